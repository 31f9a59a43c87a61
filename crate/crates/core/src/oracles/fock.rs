//! Truncated Fock-space evaluation of the thermal gate fidelity.

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cabs, Real};

type C<T> = Complex<T>;

/// Largest thermal occupation mass allowed outside the truncation.
pub const TAIL_TOLERANCE: f64 = 1e-8;
pub const MAX_FOCK_MODES: usize = 3;

const SPINS: [(i32, i32); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Columns D(β)|n⟩, n < levels, truncated to the first `levels` components.
/// Built from D|n⟩ = (a† − β*) D|n−1⟩ / √n, starting from the coherent state.
fn displaced_basis<T: Real>(beta: C<T>, levels: usize) -> Vec<Vec<C<T>>> {
    let mut cols = Vec::with_capacity(levels);
    let mut v0 = Vec::with_capacity(levels);
    let mut amp = C::new((-beta.norm_sqr() / T::lit(2.0)).exp(), T::zero());
    for m in 0..levels {
        if m > 0 {
            amp = amp * beta / T::from_usize_lossy(m).sqrt();
        }
        v0.push(amp);
    }
    cols.push(v0);
    for n in 1..levels {
        let prev = &cols[n - 1];
        let norm = T::from_usize_lossy(n).sqrt();
        let col = (0..levels)
            .map(|m| {
                let raise = if m > 0 {
                    prev[m - 1] * T::from_usize_lossy(m).sqrt()
                } else {
                    C::new(T::zero(), T::zero())
                };
                (raise - beta.conj() * prev[m]) / norm
            })
            .collect();
        cols.push(col);
    }
    cols
}

/// F = tr[ρ_th O†O] with O = ¼ Σ_s e^{i(φ₁₂ − π/4)s₁s₂} ⊗_k D(s₁α₁ᵏ + s₂α₂ᵏ),
/// evaluated with explicit truncated Fock vectors. `alpha[k] = [α₁ᵏ, α₂ᵏ]`.
pub fn fock_fidelity<T: Real>(
    alpha: &[[C<T>; 2]],
    phi12: T,
    nbar: &[T],
    levels: usize,
) -> Result<T> {
    if alpha.len() != nbar.len() || alpha.is_empty() || alpha.len() > MAX_FOCK_MODES {
        return Err(Error::InvalidConfig(format!(
            "Fock oracle takes 1..={MAX_FOCK_MODES} modes with one occupation each"
        )));
    }
    for (k, &n) in nbar.iter().enumerate() {
        let tail = if n > T::zero() {
            (n / (n + T::one())).powi(levels as i32)
        } else {
            T::zero()
        };
        let reach = cabs(alpha[k][0]) + cabs(alpha[k][1]);
        let needed = T::lit(10.0) * (n + reach * reach + T::one());
        if tail > T::lit(TAIL_TOLERANCE) || T::from_usize_lossy(levels) < needed {
            return Err(Error::TruncationTooSmall {
                tail: tail.to_f64_lossy(),
            });
        }
    }
    let delta = phi12 - T::frac_pi_4();
    let coef: Vec<C<T>> = SPINS
        .iter()
        .map(|s| {
            let ph = delta * T::lit((s.0 * s.1) as f64);
            C::new(ph.cos(), ph.sin()) / T::lit(4.0)
        })
        .collect();
    // per mode: G_k(s, s') = Σ_n p_n ⟨D(β_{s'})n | D(β_s)n⟩
    let mut gram = vec![[[C::new(T::one(), T::zero()); 4]; 4]; 1];
    let mut total = gram.pop().unwrap();
    for (k, &n) in nbar.iter().enumerate() {
        let bases: Vec<Vec<Vec<C<T>>>> = SPINS
            .iter()
            .map(|s| {
                let b = alpha[k][0] * T::lit(s.0 as f64) + alpha[k][1] * T::lit(s.1 as f64);
                displaced_basis(b, levels)
            })
            .collect();
        let ratio = n / (n + T::one());
        let weights: Vec<T> = (0..levels)
            .map(|l| ratio.powi(l as i32) / (n + T::one()))
            .collect();
        for a in 0..4 {
            for b in 0..4 {
                let mut g = C::new(T::zero(), T::zero());
                for (l, &p) in weights.iter().enumerate() {
                    let inner = bases[b][l]
                        .iter()
                        .zip(&bases[a][l])
                        .fold(C::new(T::zero(), T::zero()), |acc, (x, y)| {
                            acc + x.conj() * y
                        });
                    g += inner * p;
                }
                total[a][b] *= g;
            }
        }
    }
    let mut f = C::new(T::zero(), T::zero());
    for a in 0..4 {
        for b in 0..4 {
            f += coef[b].conj() * coef[a] * total[a][b];
        }
    }
    Ok(f.re)
}
