//! Planar Coulomb sums: energy, forces and Hessian of Σ_{i<j} κ/r_ij.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type Positions<T> = Vec<Vector2<T>>;

pub fn energy<T: Real>(positions: &[Vector2<T>], kappa: T) -> T {
    let mut e = T::zero();
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            e += kappa / (positions[i] - positions[j]).norm();
        }
    }
    e
}

/// Coulomb force on each ion, −∇V_C.
pub fn forces<T: Real>(positions: &[Vector2<T>], kappa: T, out: &mut [Vector2<T>]) {
    for f in out.iter_mut() {
        *f = Vector2::zeros();
    }
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let d = positions[i] - positions[j];
            let r2 = d.norm_squared();
            let r = r2.sqrt();
            let f = d * (kappa / (r2 * r));
            out[i] += f;
            out[j] -= f;
        }
    }
}

/// Smallest pair distance and the pair attaining it.
pub fn closest_pair<T: Real>(positions: &[Vector2<T>]) -> Option<(usize, usize, T)> {
    let mut best: Option<(usize, usize, T)> = None;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let r = (positions[i] - positions[j]).norm();
            if best.is_none_or(|(_, _, b)| r < b) {
                best = Some((i, j, r));
            }
        }
    }
    best
}

/// Gradient (2N, interleaved x₁,y₁,…) and Hessian (2N×2N) of the Coulomb
/// energy at `positions`.
pub fn gradient_and_hessian<T: Real>(
    positions: &[Vector2<T>],
    kappa: T,
) -> Result<(DVector<T>, DMatrix<T>)> {
    let n = positions.len();
    let mut grad = DVector::zeros(2 * n);
    let mut hess = DMatrix::zeros(2 * n, 2 * n);
    let three = T::lit(3.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = positions[i] - positions[j];
            let r2 = d.norm_squared();
            if r2 == T::zero() {
                return Err(Error::CoincidentIons { i, j });
            }
            let r = r2.sqrt();
            let inv_r3 = T::one() / (r2 * r);
            let inv_r5 = inv_r3 / r2;
            for a in 0..2 {
                let g = -kappa * d[a] * inv_r3;
                grad[2 * i + a] += g;
                grad[2 * j + a] -= g;
                for b in 0..2 {
                    // ∂²(1/r)/∂d_a∂d_b = (3 d_a d_b − r² δ_ab)/r⁵
                    let delta = if a == b { T::one() } else { T::zero() };
                    let h = kappa * (three * (d[a] * d[b]) * inv_r5 - delta * inv_r3);
                    hess[(2 * i + a, 2 * i + b)] += h;
                    hess[(2 * j + a, 2 * j + b)] += h;
                    hess[(2 * i + a, 2 * j + b)] -= h;
                    hess[(2 * j + a, 2 * i + b)] -= h;
                }
            }
        }
    }
    Ok((grad, hess))
}

pub fn flatten<T: Real>(positions: &[Vector2<T>]) -> DVector<T> {
    DVector::from_iterator(
        2 * positions.len(),
        positions.iter().flat_map(|p| [p.x, p.y]),
    )
}

pub fn unflatten<T: Real>(v: &DVector<T>) -> Positions<T> {
    (0..v.len() / 2)
        .map(|i| Vector2::new(v[2 * i], v[2 * i + 1]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Positions<f64> {
        vec![
            Vector2::new(0.3, -0.2),
            Vector2::new(7.1, 0.4),
            Vector2::new(3.2, 6.5),
            Vector2::new(-5.0, 4.1),
        ]
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let p = sample();
        let kappa = 1.389e5;
        let (g, h) = gradient_and_hessian(&p, kappa).unwrap();
        let x0 = flatten(&p);
        let e = |x: &DVector<f64>| energy(&unflatten(x), kappa);
        let step = 1e-4;
        for k in 0..x0.len() {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[k] += step;
            xm[k] -= step;
            let fd = (e(&xp) - e(&xm)) / (2.0 * step);
            assert!((fd - g[k]).abs() <= 1e-6 * g.amax(), "grad {k}");
            let (gp, _) = gradient_and_hessian(&unflatten(&xp), kappa).unwrap();
            let (gm, _) = gradient_and_hessian(&unflatten(&xm), kappa).unwrap();
            for l in 0..x0.len() {
                let fd2 = (gp[l] - gm[l]) / (2.0 * step);
                assert!((fd2 - h[(l, k)]).abs() <= 1e-6 * h.amax(), "hess {l} {k}");
            }
        }
        assert!((h.clone() - h.transpose()).amax() == 0.0);
    }

    #[test]
    fn forces_are_negative_gradient() {
        let p = sample();
        let (g, _) = gradient_and_hessian(&p, 2.0).unwrap();
        let mut f = vec![Vector2::zeros(); p.len()];
        forces(&p, 2.0, &mut f);
        for i in 0..p.len() {
            assert!((f[i].x + g[2 * i]).abs() < 1e-12);
            assert!((f[i].y + g[2 * i + 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn coincident_ions_rejected() {
        let p = vec![Vector2::new(1.0, 1.0), Vector2::new(1.0, 1.0)];
        assert!(matches!(
            gradient_and_hessian(&p, 1.0),
            Err(Error::CoincidentIons { i: 0, j: 1 })
        ));
    }
}
