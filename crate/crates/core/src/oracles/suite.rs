//! Oracle-versus-analytic comparison suites shared by the `verify` command
//! and the acceptance tests.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

use nalgebra::{Complex, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coulomb::{self, Positions};
use crate::crystal::{relax, seed_hexagonal, Pseudopotential};
use crate::error::Result;
use crate::gate::fidelity;
use crate::micromotion::{self_consistent_positions, MicromotionExpansion, SelfConsistencyOptions};
use crate::oracles::eom::{
    breathing_seed, integrate_full_eom, orbit_harmonic, trajectory_deviation, FullEomOptions,
};
use crate::oracles::floquet::floquet_exponent;
use crate::oracles::fock::{fock_fidelity, TAIL_TOLERANCE};
use crate::trap::{characteristic_exponent, monodromy_half_trace, MathieuParams, TrapConfig, X, Y};
use crate::units::UnitSystem;

/// Largest deviation found by a comparison sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Deviation {
    pub cases: usize,
    pub max_abs: f64,
    /// Description of the worst case.
    pub worst: String,
}

impl Deviation {
    fn new() -> Self {
        Self {
            cases: 0,
            max_abs: 0.0,
            worst: String::new(),
        }
    }

    fn record(&mut self, dev: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !(dev <= self.max_abs) {
            self.max_abs = dev;
            self.worst = what();
        }
    }
}

/// Hill-determinant β against the monodromy β on a `side`×`side` grid of
/// a ∈ [−0.3, 0.6], q ∈ [0, 0.8]. Points within 1e-6 of a stability boundary
/// (where β is ill-conditioned) are skipped; disagreeing stability verdicts
/// elsewhere count as an infinite deviation.
pub fn trap_exponent_sweep(side: usize) -> Deviation {
    let mut dev = Deviation::new();
    let side = side.max(2);
    for i in 0..side {
        for j in 0..side {
            let a = -0.3 + 0.9 * i as f64 / (side - 1) as f64;
            let q = 0.8 * j as f64 / (side - 1) as f64;
            let ht = monodromy_half_trace(a, q);
            if (ht.abs() - 1.0).abs() < 1e-6 {
                continue;
            }
            let oracle = floquet_exponent(a, q).beta;
            let hill = characteristic_exponent(a, q).ok();
            let d = match (hill, oracle) {
                (Some(h), Some(o)) => (h - o).abs(),
                (None, None) => 0.0,
                _ => f64::INFINITY,
            };
            dev.record(d, || {
                format!("a = {a:.4}, q = {q:.4}: hill {hill:?}, monodromy {oracle:?}")
            });
        }
    }
    dev
}

/// Fock truncation that satisfies the oracle's tail and reach guards.
pub fn fock_levels(nbar: f64, reach: f64) -> usize {
    let by_reach = (10.0 * (nbar + reach * reach + 1.0)).ceil() as usize;
    let by_tail = if nbar > 0.0 {
        (TAIL_TOLERANCE.ln() / (nbar / (nbar + 1.0)).ln()).ceil() as usize
    } else {
        1
    };
    by_reach.max(by_tail) + 4
}

/// Closed-form thermal fidelity against the truncated Fock oracle on
/// `cases` seeded draws: 1–3 modes, |α| ≤ 0.3, n̄ ≤ 2,
/// φ₁₂ ∈ {0, π/8, π/4}.
pub fn fidelity_sweep(cases: usize, seed: u64) -> Result<Deviation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev = Deviation::new();
    let phases = [0.0, FRAC_PI_8, FRAC_PI_4];
    for case in 0..cases {
        let modes = 1 + case % 3;
        let phi = phases[(case / 3) % 3];
        let mut draw = || {
            let r = 0.3 * rng.random::<f64>();
            let th = std::f64::consts::TAU * rng.random::<f64>();
            Complex::from_polar(r, th)
        };
        let alpha: Vec<[Complex<f64>; 2]> = (0..modes).map(|_| [draw(), draw()]).collect();
        let nbar: Vec<f64> = (0..modes).map(|_| 2.0 * rng.random::<f64>()).collect();
        let levels = alpha
            .iter()
            .zip(&nbar)
            .map(|(a, &n)| fock_levels(n, a[0].norm() + a[1].norm()))
            .max()
            .unwrap_or(1);
        let fock = fock_fidelity(&alpha, phi, &nbar, levels)?;
        let packed = [
            DVector::from_iterator(modes, alpha.iter().map(|a| a[0])),
            DVector::from_iterator(modes, alpha.iter().map(|a| a[1])),
        ];
        let closed = fidelity(&packed, phi, &DVector::from_vec(nbar.clone()));
        dev.record((closed - fock).abs(), || {
            format!(
                "case {case}: {modes} modes, φ₁₂ = {phi:.4}, closed {closed:.12}, Fock {fock:.12}"
            )
        });
    }
    Ok(dev)
}

/// Full-EOM steady orbit against the series reconstruction for one crystal.
#[derive(Clone, Debug)]
pub struct TrajectoryCheck {
    pub n_ions: usize,
    /// RMS |r_EOM(t) − r_series(t)| over ions and the last recorded period (μm).
    pub rms: f64,
    /// RMS difference of the orbit's mean, cos Ωt and cos 2Ωt components (μm).
    pub harmonic_rms: [f64; 3],
    /// RMS of the orbit with all micromotion dropped, for scale (μm).
    pub static_rms: f64,
    /// RMS mean-position shift predicted by the second-order Coulomb average
    /// that the static expansion leaves out (μm).
    pub second_order_shift: f64,
    /// Mean-position RMS left after adding that shift (μm).
    pub second_order_residual: f64,
    pub periods: usize,
}

/// Relaxes an `n`-ion crystal, solves the series with cooling matched to the
/// oracle's friction and integrates the full equations of motion from the
/// breathing seed.
pub fn trajectory_check(
    trap: &TrapConfig<f64>,
    n: usize,
    opts: &FullEomOptions<f64>,
) -> Result<TrajectoryCheck> {
    let units = UnitSystem::<f64>::new();
    let mut trap = *trap;
    trap.n_ions = n;
    let params = MathieuParams::from_config(&trap, &units)?;
    let pot = Pseudopotential {
        omega_x: params.omega[X],
        omega_y: params.omega[Y],
        mass: trap.ion_mass,
        coulomb: units.coulomb * trap.ion_charge * trap.ion_charge,
    };
    let crystal = relax(&seed_hexagonal(n, 7.0)?, &pot)?;
    let sc = SelfConsistencyOptions {
        cooling_rate: opts.friction / 2.0,
        ..Default::default()
    };
    let series = self_consistent_positions(&crystal.positions, &trap, &units, &sc)?;
    let seed = breathing_seed(series.r0(), params.q[X]);
    let record = integrate_full_eom(&trap, &units, &seed, opts)?;
    let rms = trajectory_deviation(&record, &series, trap.rf_omega);
    let static_rms = trajectory_deviation(&record, &series.without_micromotion(), trap.rf_omega);
    let mut harmonic_rms = [0.0; 3];
    for (k, out) in harmonic_rms.iter_mut().enumerate() {
        *out = rms_difference(
            &orbit_harmonic(&record, trap.rf_omega, k),
            &series.harmonic(k),
        );
    }
    let shift = second_order_mean_shift(&series, &trap, &units);
    let corrected: Positions<f64> = series.r0().iter().zip(&shift).map(|(r, d)| r + d).collect();
    Ok(TrajectoryCheck {
        n_ions: n,
        rms,
        harmonic_rms,
        static_rms,
        second_order_shift: rms_difference(&shift, &vec![Vector2::zeros(); n]),
        second_order_residual: rms_difference(
            &orbit_harmonic(&record, trap.rf_omega, 0),
            &corrected,
        ),
        periods: record.periods,
    })
}

fn rms_difference(a: &[Vector2<f64>], b: &[Vector2<f64>]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum();
    (s / a.len().max(1) as f64).sqrt()
}

/// Mean-position response to ⟨F_C(r(t))⟩ − F_C(r⁽⁰⁾), pushed through each
/// normal coordinate's static series coefficient.
fn second_order_mean_shift(
    series: &MicromotionExpansion<f64>,
    trap: &TrapConfig<f64>,
    units: &UnitSystem<f64>,
) -> Positions<f64> {
    const SAMPLES: usize = 512;
    let n = series.n_ions();
    let kappa = units.coulomb * trap.ion_charge * trap.ion_charge;
    let mut at_rest = vec![Vector2::zeros(); n];
    coulomb::forces(series.r0(), kappa, &mut at_rest);
    let mut avg = vec![Vector2::<f64>::zeros(); n];
    let mut f = vec![Vector2::zeros(); n];
    for k in 0..SAMPLES {
        let theta = std::f64::consts::TAU * k as f64 / SAMPLES as f64;
        coulomb::forces(&series.positions_at(theta), kappa, &mut f);
        for (a, b) in avg.iter_mut().zip(&f) {
            *a += b / SAMPLES as f64;
        }
    }
    let excess: Positions<f64> = avg.iter().zip(&at_rest).map(|(a, b)| a - b).collect();
    let nc = &series.normal;
    let scale = 4.0 / (trap.ion_mass * trap.rf_omega * trap.rf_omega);
    let s = &nc.q_matrix * coulomb::flatten(&excess);
    let ds = DVector::from_fn(s.len(), |i, _| {
        s[i] * scale * series.series_coefficients[i][0]
    });
    coulomb::unflatten(&(nc.q_matrix.transpose() * ds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_satisfy_guards() {
        for (n, r) in [(0.0, 0.0), (2.0, 0.6), (0.3, 0.1)] {
            let l = fock_levels(n, r);
            let a = [[Complex::new(r / 2.0, 0.0), Complex::new(r / 2.0, 0.0)]];
            assert!(fock_fidelity(&a, 0.3, &[n], l).is_ok(), "{n} {r} {l}");
        }
    }

    #[test]
    fn small_sweeps() {
        let t = trap_exponent_sweep(7);
        assert!(t.cases > 20 && t.max_abs < 1e-9, "{t:?}");
        let f = fidelity_sweep(12, 3).unwrap();
        assert_eq!(f.cases, 12);
        assert!(f.max_abs < 1e-6, "{f:?}");
    }
}
