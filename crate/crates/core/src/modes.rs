//! Transverse (z) phonon modes from micromotion-averaged Coulomb couplings.

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector2};

use crate::error::{Error, Result};
use crate::micromotion::MicromotionExpansion;
use crate::scalar::{fmax, Real};

/// Phase samples per rf period for ⟨1/r³⟩.
pub const AVERAGE_SAMPLES: usize = 256;
/// Overlaps below this make a mode assignment ambiguous.
pub const MIN_OVERLAP: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrices<T: Real> {
    /// ⟨1/r_ij³⟩ over one rf period (μm⁻³).
    pub avg_inv_r3: DMatrix<T>,
    /// 2⟨cos(Ω_T t)/r_ij³⟩, the first Fourier coefficient.
    pub first_harmonic: DMatrix<T>,
    /// 1/r_ij³ at the average positions.
    pub static_inv_r3: DMatrix<T>,
}

pub fn static_coupling<T: Real>(r: &[Vector2<T>]) -> Result<DMatrix<T>> {
    let n = r.len();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = (r[i] - r[j]).norm();
            if d == T::zero() {
                return Err(Error::CoincidentIons { i, j });
            }
            let v = T::one() / (d * d * d);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(w)
}

/// Averages 1/r_ij³ over the series trajectory on a uniform phase grid.
pub fn time_averaged_coupling<T: Real>(
    exp: &MicromotionExpansion<T>,
) -> Result<CouplingMatrices<T>> {
    let n = exp.n_ions();
    let static_inv_r3 = static_coupling(exp.r0())?;
    let mut avg = DMatrix::zeros(n, n);
    let mut first = DMatrix::zeros(n, n);
    let samples = T::from_usize_lossy(AVERAGE_SAMPLES);
    for k in 0..AVERAGE_SAMPLES {
        let theta = T::two_pi() * T::from_usize_lossy(k) / samples;
        // accumulate deviations so zero micromotion reproduces the static matrix exactly
        let w = static_coupling(&exp.positions_at(theta))? - &static_inv_r3;
        first += &w * theta.cos();
        avg += w;
    }
    avg /= samples;
    avg += &static_inv_r3;
    // the static part integrates to zero against cos θ
    first *= T::lit(2.0) / samples;
    Ok(CouplingMatrices {
        avg_inv_r3: avg,
        first_harmonic: first,
        static_inv_r3,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransverseModeSet<T: Real> {
    /// ω_k in rad/μs, ascending.
    pub frequencies: DVector<T>,
    /// Column k is the mode vector b^k.
    pub mode_matrix: DMatrix<T>,
    pub includes_micromotion: bool,
}

impl<T: Real> TransverseModeSet<T> {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// b_j^k.
    pub fn participation(&self, ion: usize, mode: usize) -> T {
        self.mode_matrix[(ion, mode)]
    }
}

/// K_ii = mω_z² − κΣ_j w_ij, K_ij = κ w_ij.
pub fn stiffness_matrix<T: Real>(w: &DMatrix<T>, omega_z: T, mass: T, kappa: T) -> DMatrix<T> {
    let n = w.nrows();
    let mut k = w * kappa;
    for i in 0..n {
        let row: T = (0..n)
            .filter(|&j| j != i)
            .fold(T::zero(), |s, j| s + w[(i, j)]);
        k[(i, i)] = mass * omega_z * omega_z - kappa * row;
    }
    k
}

/// Diagonalises the transverse stiffness built from the coupling `w`.
pub fn transverse_modes<T: Real>(
    w: &DMatrix<T>,
    omega_z: T,
    mass: T,
    kappa: T,
    includes_micromotion: bool,
) -> Result<TransverseModeSet<T>> {
    let n = w.nrows();
    let k = stiffness_matrix(w, omega_z, mass, kappa);
    let eig = SymmetricEigen::new(k);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let mut frequencies = DVector::zeros(n);
    let mut mode_matrix = DMatrix::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        let omega_sq = eig.eigenvalues[idx] / mass;
        if omega_sq < T::zero() {
            return Err(Error::ImaginaryFrequency {
                mode: col,
                omega_sq: omega_sq.to_f64_lossy(),
            });
        }
        frequencies[col] = omega_sq.sqrt();
        let v = eig.eigenvectors.column(idx);
        let pivot = v.iamax();
        let sign = if v[pivot] < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        mode_matrix.set_column(col, &(v * sign));
    }
    Ok(TransverseModeSet {
        frequencies,
        mode_matrix,
        includes_micromotion,
    })
}

/// Both tagged mode sets for one crystal: (static, micromotion-averaged).
pub fn transverse_mode_set<T: Real>(
    coupling: &CouplingMatrices<T>,
    omega_z: T,
    mass: T,
    kappa: T,
) -> Result<(TransverseModeSet<T>, TransverseModeSet<T>)> {
    Ok((
        transverse_modes(&coupling.static_inv_r3, omega_z, mass, kappa, false)?,
        transverse_modes(&coupling.avg_inv_r3, omega_z, mass, kappa, true)?,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeShiftReport<T: Real> {
    /// pairing[k] = index in `with` matched to mode k of `without`.
    pub pairing: Vec<usize>,
    /// ω_with − ω_without per `without` mode (rad/μs).
    pub shifts: Vec<T>,
    pub overlaps: Vec<T>,
    pub mean_abs_shift: T,
    pub mean_shift: T,
    /// 1 − min overlap.
    pub max_overlap_deficit: T,
}

/// Matches modes greedily by |b·b'|, ties broken by frequency proximity.
pub fn mode_shift_report<T: Real>(
    with: &TransverseModeSet<T>,
    without: &TransverseModeSet<T>,
) -> Result<ModeShiftReport<T>> {
    let n = without.len();
    if with.len() != n {
        return Err(Error::InvalidConfig(format!(
            "mode sets differ in size: {} vs {}",
            with.len(),
            n
        )));
    }
    let overlap = (without.mode_matrix.transpose() * &with.mode_matrix).map(|x| x.mag());
    let mut candidates: Vec<(usize, usize)> =
        (0..n).flat_map(|k| (0..n).map(move |l| (k, l))).collect();
    let df = |k: usize, l: usize| (with.frequencies[l] - without.frequencies[k]).mag();
    candidates.sort_by(|&(k1, l1), &(k2, l2)| {
        overlap[(k2, l2)]
            .partial_cmp(&overlap[(k1, l1)])
            .unwrap()
            .then(df(k1, l1).partial_cmp(&df(k2, l2)).unwrap())
    });
    let mut pairing = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    let mut left = n;
    for (k, l) in candidates {
        if left == 0 {
            break;
        }
        if pairing[k] == usize::MAX && !taken[l] {
            pairing[k] = l;
            taken[l] = true;
            left -= 1;
        }
    }
    let overlaps: Vec<T> = (0..n).map(|k| overlap[(k, pairing[k])]).collect();
    if let Some((mode, &o)) = overlaps
        .iter()
        .enumerate()
        .find(|(_, &o)| o < T::lit(MIN_OVERLAP))
    {
        return Err(Error::AmbiguousMatching {
            mode,
            overlap: o.to_f64_lossy(),
        });
    }
    let shifts: Vec<T> = (0..n)
        .map(|k| with.frequencies[pairing[k]] - without.frequencies[k])
        .collect();
    let nn = T::from_usize_lossy(n.max(1));
    let mean_abs_shift = shifts.iter().fold(T::zero(), |s, &d| s + d.mag()) / nn;
    let mean_shift = shifts.iter().fold(T::zero(), |s, &d| s + d) / nn;
    let min_overlap = overlaps
        .iter()
        .fold(T::one(), |m, &o| if o < m { o } else { m });
    Ok(ModeShiftReport {
        pairing,
        shifts,
        overlaps,
        mean_abs_shift,
        mean_shift,
        max_overlap_deficit: T::one() - min_overlap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RwaBound<T: Real> {
    /// max_k |q| (ω_k/Ω_T)².
    pub q_scaling: T,
    /// ‖K₁‖/‖K‖ · max_k (ω_k/Ω_T)², K₁ the stiffness of the first harmonic.
    pub norm_estimate: T,
}

/// Size of the neglected cos(Ω_T t) coupling in the rotating frame.
pub fn rwa_perturbation_bound<T: Real>(
    coupling: &CouplingMatrices<T>,
    modes: &TransverseModeSet<T>,
    q: T,
    rf_omega: T,
    mass: T,
    kappa: T,
) -> RwaBound<T> {
    let top = modes.frequencies.iter().fold(T::zero(), |m, &w| fmax(m, w));
    let ratio = (top / rf_omega) * (top / rf_omega);
    let k1 = stiffness_matrix(&coupling.first_harmonic, T::zero(), mass, kappa);
    let k = stiffness_matrix(&coupling.avg_inv_r3, top, mass, kappa);
    let kn = k.norm();
    let norm_estimate = if kn > T::zero() {
        k1.norm() / kn * ratio
    } else {
        T::zero()
    };
    RwaBound {
        q_scaling: q.mag() * ratio,
        norm_estimate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::seed_hexagonal;
    use crate::micromotion::{normal_coordinates, quadratic_expansion};
    use crate::trap::TrapConfig;
    use crate::units::UnitSystem;

    fn breathing(r0: Vec<Vector2<f64>>, q: f64) -> MicromotionExpansion<f64> {
        let units = UnitSystem::new();
        let trap = TrapConfig::reference();
        let expansion = quadratic_expansion(&r0, &trap, &units).unwrap();
        let normal = normal_coordinates(&expansion, &trap, &units);
        let r1 = r0.iter().map(|p| p * (-q / 2.0)).collect();
        MicromotionExpansion {
            amplitude: vec![0.0; r0.len()],
            harmonics: vec![r0, r1],
            series_coefficients: vec![],
            iterations: 1,
            last_shift: 0.0,
            expansion,
            normal,
        }
    }

    /// ∫(1 − (q/2)cos θ)^(−3) cos^m θ dθ/2π by a fine midpoint rule.
    fn breathing_moment(q: f64, m: i32) -> f64 {
        let n = 20000;
        (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * (k as f64 + 0.5) / n as f64;
                (1.0 - q / 2.0 * t.cos()).powi(-3) * t.cos().powi(m)
            })
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn zero_micromotion_is_static() {
        let mut mm = breathing(seed_hexagonal(7, 8.0).unwrap(), 0.0);
        mm.harmonics.truncate(1);
        let c = time_averaged_coupling(&mm).unwrap();
        assert_eq!(c.avg_inv_r3, c.static_inv_r3);
        assert_eq!(c.first_harmonic.amax(), 0.0);
    }

    #[test]
    fn breathing_ratio_matches_quadrature() {
        let q = -0.051;
        let c = time_averaged_coupling(&breathing(seed_hexagonal(19, 8.0).unwrap(), q)).unwrap();
        let avg = breathing_moment(q, 0);
        let first = 2.0 * breathing_moment(q, 1);
        assert!((avg - (1.0 + 0.75 * q * q)).abs() < 1e-5);
        assert!((first / (1.5 * q) - 1.0).abs() < 0.01);
        for i in 0..19 {
            for j in 0..19 {
                if i != j {
                    let s = c.static_inv_r3[(i, j)];
                    assert!((c.avg_inv_r3[(i, j)] / s - avg).abs() < 1e-6);
                    assert!((c.first_harmonic[(i, j)] / s - first).abs() < 1e-6);
                    assert!(c.avg_inv_r3[(i, j)] >= s);
                }
            }
        }
    }

    #[test]
    fn single_ion_mode() {
        let w = DMatrix::<f64>::zeros(1, 1);
        let m = transverse_modes(&w, 13.9, 171.0, 1.4e5, false).unwrap();
        assert_eq!(m.frequencies[0], 13.9);
    }

    #[test]
    fn com_mode_is_top_and_exact() {
        let w = static_coupling(&seed_hexagonal(19, 8.0).unwrap()).unwrap();
        let (mass, kappa, wz) = (171.0_f64, 1.38935e5_f64, 13.913_f64);
        let m = transverse_modes(&w, wz, mass, kappa, false).unwrap();
        let top = m.len() - 1;
        assert!((m.frequencies[top] - wz).abs() < 1e-10 * wz);
        let u = 1.0 / (19f64).sqrt();
        for j in 0..19 {
            assert!((m.mode_matrix[(j, top)] - u).abs() < 1e-8);
        }
        let eye = DMatrix::identity(19, 19);
        assert!((m.mode_matrix.transpose() * &m.mode_matrix - &eye).amax() < 1e-10);
        assert!((&m.mode_matrix * m.mode_matrix.transpose() - &eye).amax() < 1e-10);
        let k = stiffness_matrix(&w, wz, mass, kappa);
        let sum: f64 = m.frequencies.iter().map(|w| w * w).sum();
        assert!((sum - k.trace() / mass).abs() < 1e-8 * sum);
    }

    #[test]
    fn unstable_plane_detected() {
        let w = static_coupling(&seed_hexagonal(19, 3.0).unwrap()).unwrap();
        assert!(matches!(
            transverse_modes(&w, 1.0, 171.0, 1.38935e5, false),
            Err(Error::ImaginaryFrequency { .. })
        ));
    }

    #[test]
    fn identical_sets_have_zero_shift() {
        let w = static_coupling(&seed_hexagonal(7, 8.0).unwrap()).unwrap();
        let m = transverse_modes(&w, 13.9, 171.0, 1.38935e5, false).unwrap();
        let r = mode_shift_report(&m, &m).unwrap();
        assert!(r.shifts.iter().all(|&s| s == 0.0));
        assert_eq!(r.mean_abs_shift, 0.0);
    }

    #[test]
    fn scrambled_modes_are_ambiguous() {
        let w = static_coupling(&seed_hexagonal(7, 8.0).unwrap()).unwrap();
        let a = transverse_modes(&w, 13.9, 171.0, 1.38935e5, false).unwrap();
        let mut b = a.clone();
        // rotate two non-degenerate modes into each other by 60°
        let (i, j) = (0, 6);
        let (c, s) = (0.5, 0.75f64.sqrt());
        let (ci, cj) = (
            a.mode_matrix.column(i).clone_owned(),
            a.mode_matrix.column(j).clone_owned(),
        );
        b.mode_matrix.set_column(i, &(&ci * c + &cj * s));
        b.mode_matrix.set_column(j, &(&cj * c - &ci * s));
        assert!(matches!(
            mode_shift_report(&b, &a),
            Err(Error::AmbiguousMatching { .. })
        ));
    }

    #[test]
    fn rwa_scaling() {
        let mm = breathing(seed_hexagonal(7, 8.0).unwrap(), -0.05);
        let c = time_averaged_coupling(&mm).unwrap();
        let m = transverse_modes(&c.avg_inv_r3, 13.9, 171.0, 1.38935e5, true).unwrap();
        let b1 = rwa_perturbation_bound(&c, &m, -0.05, 314.0, 171.0, 1.38935e5);
        let b2 = rwa_perturbation_bound(&c, &m, -0.05, 628.0, 171.0, 1.38935e5);
        assert!((b1.q_scaling / b2.q_scaling - 4.0).abs() < 1e-12);
        assert!((b1.norm_estimate / b2.norm_estimate - 4.0).abs() < 1e-12);
        assert_eq!(
            rwa_perturbation_bound(&c, &m, 0.0, 314.0, 171.0, 1.38935e5).q_scaling,
            0.0
        );
    }
}
