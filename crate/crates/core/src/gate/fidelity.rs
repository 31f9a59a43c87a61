use nalgebra::{Complex, DMatrix, DVector};

use super::GateMaps;
use crate::scalar::{cexp, Real};

type C<T> = Complex<T>;

const SPINS: [(i32, i32); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Thermal fidelity of the displacement-plus-phase evolution with respect to
/// exp(i(π/4)σ₁ᶻσ₂ᶻ) on |++⟩. Each spin branch s carries a mode displacement
/// β_s = s₁α₁ + s₂α₂ and phase φ₁₂s₁s₂; the trace over a thermal state is
/// evaluated exactly from ⟨D(−β_{s'})D(β_s)⟩.
pub fn fidelity<T: Real>(alpha: &[DVector<C<T>>; 2], phi12: T, nbar: &DVector<T>) -> T {
    T::one() - infidelity(alpha, phi12, nbar)
}

/// 1 − F, summed so that small infidelities keep their relative precision.
pub fn infidelity<T: Real>(alpha: &[DVector<C<T>>; 2], phi12: T, nbar: &DVector<T>) -> T {
    let delta = phi12 - T::frac_pi_4();
    let half = T::lit(0.5);
    let beta = |s: (i32, i32), k: usize| {
        alpha[0][k] * T::lit(s.0 as f64) + alpha[1][k] * T::lit(s.1 as f64)
    };
    // F = (1/16) Σ_{s,s'} e^{iδ(s₁s₂ − s₁'s₂')} Π_k ⟨D(−β_{s'})D(β_s)⟩
    // 1 − F = (1/16) Σ (1 − term); the s = s' terms vanish identically.
    let mut loss = T::zero();
    for (a, &s) in SPINS.iter().enumerate() {
        for &sp in &SPINS[..a] {
            let mut expo = C::new(T::zero(), delta * T::lit((s.0 * s.1 - sp.0 * sp.1) as f64));
            for k in 0..nbar.len() {
                let (bs, bp) = (beta(s, k), beta(sp, k));
                let d = bs - bp;
                expo.re -= d.norm_sqr() * (nbar[k] + half);
                expo.im += (bp.conj() * bs).im;
            }
            // the (s', s) term is the complex conjugate
            let term = cexp(expo);
            loss += T::lit(2.0) * (T::one() - term.re);
        }
    }
    loss / T::lit(16.0)
}

/// PSD M with 1 − F ≈ xᵀMx to second order in α (at φ₁₂ = π/4):
/// M = Σ_{j,k} (2n̄_k + 1) Re(A_j[k]ᴴ A_j[k]).
pub fn proxy_matrix<T: Real>(maps: &GateMaps<T>, nbar: &DVector<T>) -> DMatrix<T> {
    let m = maps.segments();
    let mut out = DMatrix::zeros(m, m);
    for a in &maps.alpha {
        for k in 0..a.nrows() {
            let w = T::lit(2.0) * nbar[k] + T::one();
            for i in 0..m {
                for j in 0..=i {
                    let v = (a[(k, i)].conj() * a[(k, j)]).re * w;
                    out[(i, j)] += v;
                    if i != j {
                        out[(j, i)] += v;
                    }
                }
            }
        }
    }
    out
}
