//! Self-consistent micromotion: the Coulomb potential is expanded to second
//! order about the average positions, the linearised equations separate into
//! driven Mathieu equations in normal coordinates, and their periodic
//! particular solutions give r(t) = r⁽⁰⁾ + r⁽¹⁾cos Ω_T t + r⁽²⁾cos 2Ω_T t + ….

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector2};
use rayon::prelude::*;

use crate::coulomb::{self, Positions};
use crate::error::{Error, Result};
use crate::scalar::{fmax, Real};
use crate::trap::{floquet_growth, TrapConfig};
use crate::units::UnitSystem;

/// Upper bound on the number of cosine harmonics kept per coordinate.
pub const MAX_HARMONICS: usize = 20;
/// Series truncated once |c⁽ⁿ⁾| < this · |c⁽⁰⁾|.
pub const SERIES_TOLERANCE: f64 = 1e-12;
/// |a − 4n²| below this is treated as a parametric resonance.
pub const RESONANCE_GAP: f64 = 1e-6;

/// V_C ≈ ½ rᵀ M_C r + gᵀ r + const about the expansion point, plus the DC
/// trap curvature.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticExpansion<T: Real> {
    pub center: Positions<T>,
    /// M_C, 2N×2N, coordinates interleaved x₁, y₁, x₂, ….
    pub hessian: DMatrix<T>,
    /// g = ∇V_C(r⁽⁰⁾) − M_C r⁽⁰⁾, the linear coefficient in absolute coordinates.
    pub linear: DVector<T>,
    /// ∇V_C at the expansion point.
    pub gradient: DVector<T>,
    /// Diagonal of M_DC.
    pub dc_diagonal: DVector<T>,
}

pub fn quadratic_expansion<T: Real>(
    r0: &[Vector2<T>],
    trap: &TrapConfig<T>,
    units: &UnitSystem<T>,
) -> Result<QuadraticExpansion<T>> {
    let kappa = units.coulomb * trap.ion_charge * trap.ion_charge;
    let (gradient, hessian) = coulomb::gradient_and_hessian(r0, kappa)?;
    let x0 = coulomb::flatten(r0);
    let linear = &gradient - &hessian * &x0;
    let base = T::lit(2.0) * trap.dc_energy(units) / (trap.electrode_size * trap.electrode_size);
    let gamma = trap.anisotropy;
    let dc_diagonal = DVector::from_fn(2 * r0.len(), |k, _| {
        if k % 2 == 0 {
            base * (T::one() + gamma)
        } else {
            base * (T::one() - gamma)
        }
    });
    Ok(QuadraticExpansion {
        center: r0.to_vec(),
        hessian,
        linear,
        gradient,
        dc_diagonal,
    })
}

/// Orthogonal change of variables s = Q r diagonalising M_DC + M_C.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalCoordinateSystem<T: Real> {
    /// Rows are the normal-coordinate directions.
    pub q_matrix: DMatrix<T>,
    /// Eigenvalues of M_DC + M_C, ascending.
    pub lambda: DVector<T>,
    /// Per-coordinate Mathieu a-parameters 4Λ/(mΩ_T²).
    pub a: DVector<T>,
    /// Per-coordinate drive −4 (Q g)_i / (mΩ_T²).
    pub f: DVector<T>,
    /// Common Mathieu q of the in-plane rf field.
    pub q: T,
}

pub fn normal_coordinates<T: Real>(
    exp: &QuadraticExpansion<T>,
    trap: &TrapConfig<T>,
    units: &UnitSystem<T>,
) -> NormalCoordinateSystem<T> {
    let dim = exp.dc_diagonal.len();
    let mut k = exp.hessian.clone();
    for i in 0..dim {
        k[(i, i)] += exp.dc_diagonal[i];
    }
    let eig = SymmetricEigen::new(k);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let mut q_matrix = DMatrix::zeros(dim, dim);
    let mut lambda = DVector::zeros(dim);
    for (row, &idx) in order.iter().enumerate() {
        lambda[row] = eig.eigenvalues[idx];
        let v = eig.eigenvectors.column(idx);
        // fix the sign so the largest component is positive (deterministic output)
        let pivot = v.iamax();
        let sign = if v[pivot] < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        for c in 0..dim {
            q_matrix[(row, c)] = sign * v[c];
        }
    }
    let scale = T::lit(4.0) / (trap.ion_mass * trap.rf_omega * trap.rf_omega);
    let a = lambda.map(|l| l * scale);
    let f = (&q_matrix * &exp.linear).map(|x| -x * scale);
    let q = -T::lit(4.0) * trap.rf_energy(units)
        / (trap.ion_mass
            * trap.electrode_size
            * trap.electrode_size
            * trap.rf_omega
            * trap.rf_omega);
    NormalCoordinateSystem {
        q_matrix,
        lambda,
        a,
        f,
        q,
    }
}

/// Cosine-series coefficients c⁽⁰⁾…c⁽ⁿ⁾ of the periodic solution
/// s = f Σ c⁽ⁿ⁾ cos 2nξ of s'' + (a − 2q cos 2ξ) s = f.
pub fn solve_driven_mathieu<T: Real>(a: T, q: T) -> Result<Vec<T>> {
    solve_driven_mathieu_damped(a, q, T::zero())
}

/// As [`solve_driven_mathieu`], but tolerates a homogeneous instability whose
/// growth exponent (per unit ξ) does not exceed `max_growth`: under that much
/// cooling the free motion still decays and only the periodic solution
/// survives.
pub fn solve_driven_mathieu_damped<T: Real>(a: T, q: T, max_growth: T) -> Result<Vec<T>> {
    let gap = T::lit(RESONANCE_GAP);
    for n in 1..=MAX_HARMONICS {
        let four_n2 = T::lit((4 * n * n) as f64);
        if (a - four_n2).mag() < gap {
            return Err(Error::ResonantDrive {
                a: a.to_f64_lossy(),
                n,
            });
        }
    }
    if q == T::zero() {
        if a.mag() < gap {
            return Err(Error::ResonantDrive {
                a: a.to_f64_lossy(),
                n: 0,
            });
        }
        return Ok(vec![T::one() / a]);
    }
    if floquet_growth(a, q) > max_growth {
        return Err(Error::UnstableRegion {
            a: a.to_f64_lossy(),
            q: q.to_f64_lossy(),
        });
    }
    let tol = T::lit(SERIES_TOLERANCE);
    let mut coeffs = Vec::new();
    for top in 1..=MAX_HARMONICS {
        coeffs = solve_truncated(a, q, top);
        if coeffs[top].mag() < tol * coeffs[0].mag() {
            break;
        }
    }
    Ok(coeffs)
}

/// Solves the recurrence with c⁽ᵗᵒᵖ⁺¹⁾ = 0 by backward ratios
/// r_n = c⁽ⁿ⁾/c⁽ⁿ⁻¹⁾.
fn solve_truncated<T: Real>(a: T, q: T, top: usize) -> Vec<T> {
    // ratios[n] = c_n / c_{n-1}, n = 1..=top
    let mut ratios = vec![T::zero(); top + 2];
    for n in (1..=top).rev() {
        let d = a - T::lit((4 * n * n) as f64) - q * ratios[n + 1];
        // row 1 carries the factor 2 from cos 2ξ · cos 0
        let num = if n == 1 { T::lit(2.0) * q } else { q };
        ratios[n] = num / d;
    }
    let c0 = T::one() / (a - q * ratios[1]);
    let mut coeffs = Vec::with_capacity(top + 1);
    coeffs.push(c0);
    for n in 1..=top {
        let prev = coeffs[n - 1];
        coeffs.push(prev * ratios[n]);
    }
    coeffs
}

/// max_ξ |s'' + (a − 2q cos 2ξ) s − f| for s = f Σ cₙ cos 2nξ, sampled on
/// `samples` points of one period. Evaluated with f = 1.
pub fn driven_mathieu_residual<T: Real>(a: T, q: T, coeffs: &[T], samples: usize) -> T {
    let two = T::lit(2.0);
    let mut worst = T::zero();
    for k in 0..samples {
        let xi = T::pi() * T::from_usize_lossy(k) / T::from_usize_lossy(samples);
        let mut s = T::zero();
        let mut s2 = T::zero();
        for (n, &c) in coeffs.iter().enumerate() {
            let w = two * T::from_usize_lossy(n);
            let cw = (w * xi).cos();
            s += c * cw;
            s2 -= c * w * w * cw;
        }
        let r = s2 + (a - two * q * (two * xi).cos()) * s - T::one();
        worst = fmax(worst, r.mag());
    }
    worst
}

/// Dynamic ion positions as a cosine series in the rf phase.
#[derive(Clone, Debug)]
pub struct MicromotionExpansion<T: Real> {
    /// harmonics[n] = r⁽ⁿ⁾ per ion; harmonics[0] are the average positions.
    pub harmonics: Vec<Positions<T>>,
    /// Series coefficients per normal coordinate.
    pub series_coefficients: Vec<Vec<T>>,
    pub iterations: usize,
    /// Per-ion micromotion amplitude max_t |r(t) − r⁽⁰⁾| (μm), ion order.
    pub amplitude: Vec<T>,
    /// Max per-ion change of r⁽⁰⁾ in the last iteration (μm).
    pub last_shift: T,
    pub expansion: QuadraticExpansion<T>,
    pub normal: NormalCoordinateSystem<T>,
}

impl<T: Real> MicromotionExpansion<T> {
    pub fn n_ions(&self) -> usize {
        self.harmonics[0].len()
    }

    pub fn r0(&self) -> &Positions<T> {
        &self.harmonics[0]
    }

    /// r⁽ⁿ⁾, zero beyond the computed order.
    pub fn harmonic(&self, n: usize) -> Positions<T> {
        self.harmonics
            .get(n)
            .cloned()
            .unwrap_or_else(|| vec![Vector2::zeros(); self.n_ions()])
    }

    pub fn r1(&self) -> Positions<T> {
        self.harmonic(1)
    }

    pub fn r2(&self) -> Positions<T> {
        self.harmonic(2)
    }

    /// Displacement r(θ) − r⁽⁰⁾ of ion `i` at rf phase θ = Ω_T t.
    pub fn displacement(&self, i: usize, theta: T) -> Vector2<T> {
        self.harmonics
            .iter()
            .enumerate()
            .skip(1)
            .fold(Vector2::zeros(), |acc, (n, h)| {
                acc + h[i] * (T::from_usize_lossy(n) * theta).cos()
            })
    }

    /// Position of ion `i` at rf phase θ.
    pub fn position(&self, i: usize, theta: T) -> Vector2<T> {
        self.harmonics[0][i] + self.displacement(i, theta)
    }

    /// All positions at rf phase θ.
    pub fn positions_at(&self, theta: T) -> Positions<T> {
        (0..self.n_ions())
            .map(|i| self.position(i, theta))
            .collect()
    }

    /// Rebuilds an expansion from stored series data; the quadratic expansion
    /// and normal coordinates are recomputed about `center`, the positions the
    /// final pass expanded around.
    pub fn from_parts(
        harmonics: Vec<Positions<T>>,
        series_coefficients: Vec<Vec<T>>,
        iterations: usize,
        last_shift: T,
        center: &[Vector2<T>],
        trap: &TrapConfig<T>,
        units: &UnitSystem<T>,
    ) -> Result<Self> {
        if harmonics.is_empty() || harmonics.iter().any(|h| h.len() != center.len()) {
            return Err(Error::InvalidConfig(
                "harmonics must cover every ion of the expansion centre".into(),
            ));
        }
        let expansion = quadratic_expansion(center, trap, units)?;
        let normal = normal_coordinates(&expansion, trap, units);
        let amplitude = amplitudes(&harmonics);
        Ok(Self {
            harmonics,
            series_coefficients,
            iterations,
            amplitude,
            last_shift,
            expansion,
            normal,
        })
    }

    /// Same trajectory with all micromotion harmonics removed.
    pub fn without_micromotion(&self) -> Self {
        let mut out = self.clone();
        out.harmonics.truncate(1);
        out.amplitude = vec![T::zero(); self.n_ions()];
        out
    }
}

/// Samples per rf period for amplitude extraction.
const AMPLITUDE_SAMPLES: usize = 256;

fn amplitudes<T: Real>(harmonics: &[Positions<T>]) -> Vec<T> {
    let n = harmonics[0].len();
    (0..n)
        .map(|i| {
            (0..AMPLITUDE_SAMPLES)
                .map(|k| {
                    let theta = T::two_pi() * T::from_usize_lossy(k)
                        / T::from_usize_lossy(AMPLITUDE_SAMPLES);
                    harmonics
                        .iter()
                        .enumerate()
                        .skip(1)
                        .fold(Vector2::zeros(), |acc, (m, h)| {
                            acc + h[i] * (T::from_usize_lossy(m) * theta).cos()
                        })
                        .norm()
                })
                .fold(T::zero(), fmax)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelfConsistencyOptions {
    pub max_iterations: usize,
    /// Converged once max per-ion |Δr⁽⁰⁾| is below this (μm).
    pub tolerance: f64,
    /// Amplitude cooling rate (rad/μs) assumed to suppress weakly unstable
    /// homogeneous motion. Zero demands strict Mathieu stability.
    pub cooling_rate: f64,
}

impl Default for SelfConsistencyOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-4,
            cooling_rate: 0.0,
        }
    }
}

/// Harmonics, series coefficients, and the expansion they were solved in.
pub type PassOutput<T> = (
    Vec<Positions<T>>,
    Vec<Vec<T>>,
    QuadraticExpansion<T>,
    NormalCoordinateSystem<T>,
);

/// One pass: expand about `r0`, solve every normal coordinate, transform back.
pub fn micromotion_pass<T: Real>(
    r0: &[Vector2<T>],
    trap: &TrapConfig<T>,
    units: &UnitSystem<T>,
    cooling_rate: T,
) -> Result<PassOutput<T>> {
    // e^{γt} with ξ = Ω_T t / 2
    let max_growth = T::lit(2.0) * cooling_rate / trap.rf_omega;
    let exp = quadratic_expansion(r0, trap, units)?;
    let nc = normal_coordinates(&exp, trap, units);
    let dim = nc.a.len();
    let coeffs: Vec<Vec<T>> = (0..dim)
        .into_par_iter()
        .map(|i| solve_driven_mathieu_damped(nc.a[i], nc.q, max_growth))
        .collect::<Result<_>>()?;
    let order = coeffs.iter().map(Vec::len).max().unwrap_or(1);
    let qt = nc.q_matrix.transpose();
    let harmonics = (0..order)
        .map(|n| {
            let s = DVector::from_fn(dim, |i, _| {
                nc.f[i] * coeffs[i].get(n).copied().unwrap_or_else(T::zero)
            });
            coulomb::unflatten(&(&qt * s))
        })
        .collect();
    Ok((harmonics, coeffs, exp, nc))
}

/// Iterates expansion → normal coordinates → driven Mathieu → back-transform
/// until the average positions stop moving.
pub fn self_consistent_positions<T: Real>(
    initial: &[Vector2<T>],
    trap: &TrapConfig<T>,
    units: &UnitSystem<T>,
    opts: &SelfConsistencyOptions,
) -> Result<MicromotionExpansion<T>> {
    let tol = T::lit(opts.tolerance);
    let mut r0: Positions<T> = initial.to_vec();
    let mut last_shift = T::zero();
    for iteration in 1..=opts.max_iterations {
        let (harmonics, coeffs, exp, nc) =
            micromotion_pass(&r0, trap, units, T::lit(opts.cooling_rate))?;
        last_shift = harmonics[0]
            .iter()
            .zip(&r0)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), fmax);
        r0 = harmonics[0].clone();
        if last_shift < tol {
            let amplitude = amplitudes(&harmonics);
            return Ok(MicromotionExpansion {
                harmonics,
                series_coefficients: coeffs,
                iterations: iteration,
                amplitude,
                last_shift,
                expansion: exp,
                normal: nc,
            });
        }
    }
    Err(Error::SelfConsistencyFailed {
        iterations: opts.max_iterations,
        last_shift: last_shift.to_f64_lossy(),
    })
}

/// Per-ion micromotion amplitudes sorted ascending.
pub fn micromotion_amplitudes<T: Real>(exp: &MicromotionExpansion<T>) -> Vec<T> {
    let mut a = exp.amplitude.clone();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{relax, seed_hexagonal, Pseudopotential};
    use crate::trap::{characteristic_exponent, MathieuParams, X, Y};

    #[test]
    fn static_limit_has_single_coefficient() {
        let c = solve_driven_mathieu(0.3_f64, 0.0).unwrap();
        assert_eq!(c, vec![1.0 / 0.3]);
    }

    #[test]
    fn small_q_ratios() {
        let (a, q) = (1e-3_f64, -0.05);
        let c = solve_driven_mathieu(a, q).unwrap();
        // exact from the n = 1 row when c⁽²⁾ is neglected
        assert!((c[1] / c[0] - 2.0 * q / (a - 4.0)).abs() < 1e-4 * (q / 2.0).abs());
        assert!((c[1] / c[0] + q / 2.0).abs() < 0.01 * (q / 2.0).abs());
        assert!((c[2] / c[0] - q * q / 32.0).abs() < 0.02 * q * q / 32.0);
        // the average term reproduces the pseudopotential stiffness
        let beta = characteristic_exponent(a, q).unwrap();
        assert!((1.0 / c[0] - beta * beta).abs() < 1e-3 * beta * beta);
    }

    #[test]
    fn residual_below_threshold() {
        for (a, q) in [(0.01_f64, -0.05), (-0.001, 0.05), (0.2, 0.3), (0.5, -0.4)] {
            let c = solve_driven_mathieu(a, q).unwrap();
            let r = driven_mathieu_residual(a, q, &c, 512);
            assert!(r < 1e-10 * c[0].abs(), "{a} {q} {r}");
        }
    }

    #[test]
    fn resonance_and_instability_rejected() {
        assert!(matches!(
            solve_driven_mathieu(4.0_f64 + 1e-8, 0.1),
            Err(Error::ResonantDrive { n: 1, .. })
        ));
        assert!(matches!(
            solve_driven_mathieu(0.0_f64, 0.0),
            Err(Error::ResonantDrive { n: 0, .. })
        ));
        assert!(matches!(
            solve_driven_mathieu(-0.2_f64, 0.1),
            Err(Error::UnstableRegion { .. })
        ));
    }

    #[test]
    fn single_ion_has_no_drive() {
        let units = UnitSystem::<f64>::new();
        let mut trap = TrapConfig::reference();
        trap.n_ions = 1;
        let exp = quadratic_expansion(&[Vector2::zeros()], &trap, &units).unwrap();
        assert!(exp.hessian.amax() == 0.0 && exp.linear.amax() == 0.0);
        let mm = self_consistent_positions(&[Vector2::zeros()], &trap, &units, &Default::default())
            .unwrap();
        for h in &mm.harmonics {
            assert_eq!(h[0], Vector2::zeros());
        }
        assert_eq!(mm.amplitude[0], 0.0);
    }

    #[test]
    fn dc_matrix_entries() {
        let units = UnitSystem::<f64>::new();
        let trap = TrapConfig::reference();
        let r0 = vec![Vector2::new(-4.0, 0.0), Vector2::new(4.0, 0.0)];
        let exp = quadratic_expansion(&r0, &trap, &units).unwrap();
        let base = 2.0 * units.volt_energy * trap.dc_voltage / (200.0 * 200.0);
        assert!((exp.dc_diagonal[0] - base * 1.01).abs() < 1e-12 * base.abs());
        assert!((exp.dc_diagonal[3] - base * 0.99).abs() < 1e-12 * base.abs());
        // Coulomb energy is homogeneous of degree −1, so g = 3∇V
        assert!((&exp.linear - &exp.gradient * 3.0).amax() < 1e-9 * exp.gradient.amax());
    }

    #[test]
    fn normal_coordinates_diagonalise() {
        let units = UnitSystem::<f64>::new();
        let trap = TrapConfig::reference();
        let r0 = seed_hexagonal(7, 7.0).unwrap();
        let exp = quadratic_expansion(&r0, &trap, &units).unwrap();
        let nc = normal_coordinates(&exp, &trap, &units);
        let dim = nc.a.len();
        let eye = DMatrix::<f64>::identity(dim, dim);
        assert!((&nc.q_matrix * nc.q_matrix.transpose() - &eye).amax() < 1e-10);
        let mut k = exp.hessian.clone();
        for i in 0..dim {
            k[(i, i)] += exp.dc_diagonal[i];
        }
        let d = &nc.q_matrix * k * nc.q_matrix.transpose();
        let scale = nc.lambda.amax();
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i == j { nc.lambda[i] } else { 0.0 };
                assert!((d[(i, j)] - expect).abs() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn no_coulomb_means_identity_like_q() {
        let units = UnitSystem::<f64>::new();
        let trap = TrapConfig::reference();
        let r0 = vec![Vector2::new(1.0, 2.0)];
        let exp = quadratic_expansion(&r0, &trap, &units).unwrap();
        let nc = normal_coordinates(&exp, &trap, &units);
        // one x and one y coordinate, sorted by eigenvalue (x is softer)
        assert!((nc.q_matrix.abs() - DMatrix::identity(2, 2)).amax() < 1e-15);
        assert!((nc.lambda[0] - exp.dc_diagonal[0]).abs() < 1e-12);
    }

    #[test]
    fn seven_ion_breathing() {
        let units = UnitSystem::<f64>::new();
        let mut trap = TrapConfig::reference();
        trap.n_ions = 7;
        let p = MathieuParams::from_config(&trap, &units).unwrap();
        let pot = Pseudopotential {
            omega_x: p.omega[X],
            omega_y: p.omega[Y],
            mass: trap.ion_mass,
            coulomb: units.coulomb,
        };
        let crystal = relax(&seed_hexagonal(7, 7.0).unwrap(), &pot).unwrap();
        let mm = self_consistent_positions(&crystal.positions, &trap, &units, &Default::default())
            .unwrap();
        let q = p.q_planar();
        let (r0, r1, r2) = (mm.r0().clone(), mm.r1(), mm.r2());
        for i in 0..7 {
            for c in 0..2 {
                if r0[i][c].abs() > 1.0 {
                    assert!((r1[i][c] / r0[i][c] + q / 2.0).abs() < 0.05 * (q / 2.0).abs());
                    assert!((r2[i][c] / r0[i][c] - q * q / 32.0).abs() < 0.2 * q * q / 32.0);
                }
            }
        }
        // fixed point
        let again = micromotion_pass(mm.r0(), &trap, &units, 0.0).unwrap();
        let shift = again.0[0]
            .iter()
            .zip(mm.r0())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(shift < 1e-4);
    }
}
