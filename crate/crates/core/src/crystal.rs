//! Static crystal in the planar pseudopotential, found by damped dynamics
//! from a hexagonal seed.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::coulomb::{self, Positions};
use crate::error::{Error, Result};
use crate::scalar::{fmax, Real};

/// Ions closer than this (μm) abort the relaxation.
pub const COLLISION_DISTANCE: f64 = 0.1;

/// Number of ions in k complete hexagonal shells around a centre ion.
pub fn centered_hexagonal(shells: usize) -> usize {
    1 + 3 * shells * (shells + 1)
}

/// Centered hexagonal lattice of `n` ions with the given nearest-neighbour
/// spacing. Complete shells are filled first; a partial outer shell is filled
/// in order of polar angle. The centroid is moved to the origin.
pub fn seed_hexagonal<T: Real>(n: usize, spacing: T) -> Result<Positions<T>> {
    if n < 1 {
        return Err(Error::InvalidConfig("need at least one ion".into()));
    }
    let mut out = vec![Vector2::zeros()];
    let mut k = 1;
    while out.len() < n {
        let corner = |j: usize| {
            let angle = T::pi() / T::lit(3.0) * T::from_usize_lossy(j % 6);
            Vector2::new(angle.cos(), angle.sin()) * (spacing * T::from_usize_lossy(k))
        };
        let mut shell = Vec::with_capacity(6 * k);
        for j in 0..6 {
            let (c0, c1) = (corner(j), corner(j + 1));
            for t in 0..k {
                let frac = T::from_usize_lossy(t) / T::from_usize_lossy(k);
                shell.push(c0 + (c1 - c0) * frac);
            }
        }
        let remaining = n - out.len();
        if remaining < shell.len() {
            let angle = |p: &Vector2<T>| {
                let a = p.y.atan2(p.x);
                if a < T::zero() {
                    a + T::two_pi()
                } else {
                    a
                }
            };
            shell.sort_by(|a, b| angle(a).partial_cmp(&angle(b)).unwrap());
            shell.truncate(remaining);
        }
        out.extend(shell);
        k += 1;
    }
    let centroid = out.iter().fold(Vector2::zeros(), |acc, p| acc + p) / T::from_usize_lossy(n);
    for p in out.iter_mut() {
        *p -= centroid;
    }
    Ok(out)
}

/// Time-independent in-plane potential: harmonic secular confinement plus
/// Coulomb repulsion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pseudopotential<T> {
    pub omega_x: T,
    pub omega_y: T,
    pub mass: T,
    /// κ·Z² (u·μm³/μs²)
    pub coulomb: T,
}

impl<T: Real> Pseudopotential<T> {
    pub fn energy(&self, positions: &[Vector2<T>]) -> T {
        let half = T::lit(0.5);
        let kx = self.mass * self.omega_x * self.omega_x;
        let ky = self.mass * self.omega_y * self.omega_y;
        let trap = positions.iter().fold(T::zero(), |acc, p| {
            acc + half * (kx * p.x * p.x + ky * p.y * p.y)
        });
        trap + coulomb::energy(positions, self.coulomb)
    }

    pub fn forces(&self, positions: &[Vector2<T>], out: &mut [Vector2<T>]) {
        coulomb::forces(positions, self.coulomb, out);
        let kx = self.mass * self.omega_x * self.omega_x;
        let ky = self.mass * self.omega_y * self.omega_y;
        for (f, p) in out.iter_mut().zip(positions) {
            f.x -= kx * p.x;
            f.y -= ky * p.y;
        }
    }

    /// Force scale m·ω_x²·(1 μm) used for the convergence threshold.
    pub fn force_unit(&self) -> T {
        self.mass * self.omega_x * self.omega_x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnStats<T> {
    pub min: T,
    pub max: T,
    pub mean: T,
}

/// Per-ion nearest-neighbour distances and their summary.
pub fn nn_statistics<T: Real>(positions: &[Vector2<T>]) -> (NnStats<T>, Vec<T>) {
    let n = positions.len();
    if n < 2 {
        let z = T::zero();
        return (
            NnStats {
                min: z,
                max: z,
                mean: z,
            },
            vec![],
        );
    }
    let dists: Vec<T> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (positions[i] - positions[j]).norm())
                .fold(T::max_value().unwrap(), crate::scalar::fmin)
        })
        .collect();
    let min = dists
        .iter()
        .copied()
        .fold(T::max_value().unwrap(), crate::scalar::fmin);
    let max = dists.iter().copied().fold(T::zero(), fmax);
    let mean = dists.iter().copied().fold(T::zero(), |a, b| a + b) / T::from_usize_lossy(n);
    (NnStats { min, max, mean }, dists)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrystalState<T> {
    /// (x, y) in μm.
    pub positions: Positions<T>,
    /// Largest per-ion residual force.
    pub gradient_norm: T,
    pub converged: bool,
    pub steps: usize,
    pub nn_stats: NnStats<T>,
}

impl<T: Real> CrystalState<T> {
    pub fn require_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                steps: self.steps,
                max_force: self.gradient_norm.to_f64_lossy(),
            })
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxOptions {
    pub max_steps: usize,
    /// Converged when max force ≤ tolerance · m·ω_x²·(1 μm).
    pub force_tolerance: f64,
    /// Time step in units of 1/max(ω_x, ω_y).
    pub step_factor: f64,
    /// Damping rate η/m in units of max(ω_x, ω_y).
    pub damping_factor: f64,
    /// Record the mechanical energy every this many steps (0 = never).
    pub energy_stride: usize,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            max_steps: 1_000_000,
            force_tolerance: 1e-8,
            step_factor: 0.02,
            damping_factor: 0.5,
            energy_stride: 0,
        }
    }
}

/// Result of [`relax_with`]: the final state plus the sampled energy trace.
#[derive(Clone, Debug)]
pub struct Relaxation<T> {
    pub state: CrystalState<T>,
    /// Kinetic + potential energy every `energy_stride` steps.
    pub energy_trace: Vec<T>,
}

fn max_force<T: Real>(f: &[Vector2<T>]) -> T {
    f.iter().map(|v| v.norm()).fold(T::zero(), fmax)
}

/// Damped molecular dynamics in the pseudopotential until the force
/// tolerance is met.
pub fn relax<T: Real>(
    seed: &[Vector2<T>],
    potential: &Pseudopotential<T>,
) -> Result<CrystalState<T>> {
    relax_with(seed, potential, &RelaxOptions::default()).map(|r| r.state)
}

pub fn relax_with<T: Real>(
    seed: &[Vector2<T>],
    potential: &Pseudopotential<T>,
    opts: &RelaxOptions,
) -> Result<Relaxation<T>> {
    let n = seed.len();
    let mut x: Positions<T> = seed.to_vec();
    let mut v: Positions<T> = vec![Vector2::zeros(); n];
    let mut f: Positions<T> = vec![Vector2::zeros(); n];
    let omega_max = fmax(potential.omega_x, potential.omega_y);
    let dt = T::lit(opts.step_factor) / omega_max;
    let damping = T::lit(opts.damping_factor) * omega_max;
    let decay = (-damping * dt / T::lit(2.0)).exp();
    let half_dt_over_m = dt / (T::lit(2.0) * potential.mass);
    let tolerance = T::lit(opts.force_tolerance) * potential.force_unit();
    let guard = T::lit(COLLISION_DISTANCE);
    let mut energy_trace = Vec::new();

    potential.forces(&x, &mut f);
    let mut fmax_now = max_force(&f);
    let mut steps = 0;
    let kinetic = |v: &[Vector2<T>]| {
        v.iter().fold(T::zero(), |a, u| a + u.norm_squared()) * potential.mass / T::lit(2.0)
    };

    while fmax_now > tolerance && steps < opts.max_steps {
        if opts.energy_stride > 0 && steps % opts.energy_stride == 0 {
            energy_trace.push(kinetic(&v) + potential.energy(&x));
        }
        for i in 0..n {
            v[i] = v[i] * decay + f[i] * half_dt_over_m;
            x[i] += v[i] * dt;
        }
        potential.forces(&x, &mut f);
        for i in 0..n {
            v[i] = (v[i] + f[i] * half_dt_over_m) * decay;
        }
        fmax_now = max_force(&f);
        steps += 1;
        if steps % 64 == 0 {
            if let Some((i, j, d)) = coulomb::closest_pair(&x) {
                if d < guard {
                    return Err(Error::CollisionDetected {
                        i,
                        j,
                        distance: d.to_f64_lossy(),
                    });
                }
            }
        }
    }
    if opts.energy_stride > 0 {
        energy_trace.push(kinetic(&v) + potential.energy(&x));
    }
    let (nn_stats, _) = nn_statistics(&x);
    Ok(Relaxation {
        state: CrystalState {
            positions: x,
            gradient_norm: fmax_now,
            converged: fmax_now <= tolerance,
            steps,
            nn_stats,
        },
        energy_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const KAPPA: f64 = 1.389_354_6e5;

    fn potential(wx: f64, wy: f64) -> Pseudopotential<f64> {
        Pseudopotential {
            omega_x: wx,
            omega_y: wy,
            mass: 171.0,
            coulomb: KAPPA,
        }
    }

    #[test]
    fn hexagonal_shell_counts() {
        for (k, n) in [(0, 1), (1, 7), (2, 19), (3, 37), (4, 61), (5, 91), (6, 127)] {
            assert_eq!(centered_hexagonal(k), n);
        }
    }

    #[test]
    fn seed_single_ion() {
        let s = seed_hexagonal(1, 7.0).unwrap();
        assert_eq!(s, vec![Vector2::new(0.0, 0.0)]);
        assert!(seed_hexagonal::<f64>(0, 7.0).is_err());
    }

    #[test]
    fn seed_first_shell() {
        let s = seed_hexagonal(7, 7.0_f64).unwrap();
        assert!(s[0].norm() < 1e-12);
        for p in &s[1..] {
            assert!((p.norm() - 7.0).abs() < 1e-12);
        }
        let (nn, _) = nn_statistics(&s);
        assert!((nn.min - 7.0).abs() < 1e-12 && (nn.max - 7.0).abs() < 1e-12);
    }

    #[test]
    fn seed_127_has_six_shells() {
        let s = seed_hexagonal(127, 7.0_f64).unwrap();
        assert_eq!(s.len(), 127);
        let rmax = s.iter().map(|p| p.norm()).fold(0.0, f64::max);
        assert!((rmax - 42.0).abs() < 1e-10);
        let (nn, _) = nn_statistics(&s);
        assert!((nn.min - 7.0).abs() < 1e-10 && (nn.max - 7.0).abs() < 1e-10);
        // inversion symmetric
        for p in &s {
            assert!(s.iter().any(|o| (o + p).norm() < 1e-10));
        }
    }

    #[test]
    fn seed_partial_shell_is_centred() {
        let s = seed_hexagonal(10, 5.0).unwrap();
        let c = s.iter().fold(Vector2::zeros(), |a, p| a + p);
        assert!(c.norm() < 1e-12);
    }

    #[test]
    fn nn_statistics_simple_shapes() {
        let two = vec![Vector2::new(0.0, 0.0), Vector2::new(3.0, 4.0)];
        let (nn, d) = nn_statistics(&two);
        assert_eq!((nn.min, nn.max, nn.mean), (5.0, 5.0, 5.0));
        assert_eq!(d, vec![5.0, 5.0]);
        let s = 2.5;
        let tri = vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(s, 0.0),
            Vector2::new(s / 2.0, s * 3f64.sqrt() / 2.0),
        ];
        let (nn, _) = nn_statistics(&tri);
        for v in [nn.min, nn.max, nn.mean] {
            assert!((v - s).abs() < 1e-12);
        }
    }

    #[test]
    fn single_ion_stays_at_origin() {
        let st = relax(&[Vector2::new(0.0, 0.0)], &potential(1.1, 1.4)).unwrap();
        assert!(st.converged);
        assert_eq!(st.gradient_norm, 0.0);
        assert_eq!(st.positions[0], Vector2::zeros());
    }

    #[test]
    fn two_ions_match_analytic_separation() {
        // separation along the soft axis solves κ/d² = m ω² d / 2
        let w = 1.1;
        let seed = seed_hexagonal(2, 7.0).unwrap();
        let st = relax(&seed, &potential(w, 1.2 * w)).unwrap();
        assert!(st.converged);
        let d = (st.positions[0] - st.positions[1]).norm();
        let expected = (2.0 * KAPPA / (171.0 * w * w)).cbrt();
        assert!((d - expected).abs() < 1e-8 * expected, "{d} {expected}");
        assert!(st.positions[0].y.abs() < 1e-9);
    }

    #[test]
    fn energy_never_increases_along_trajectory() {
        let seed = seed_hexagonal(19, 7.0).unwrap();
        let opts = RelaxOptions {
            energy_stride: 100,
            ..RelaxOptions::default()
        };
        let r = relax_with(&seed, &potential(1.14, 1.39), &opts).unwrap();
        assert!(r.state.converged);
        assert!(r.energy_trace.len() > 3);
        for w in r.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn relaxed_crystal_keeps_inversion_symmetry_and_force_balance() {
        let seed = seed_hexagonal(19, 7.0).unwrap();
        let pot = potential(1.14, 1.39);
        let st = relax(&seed, &pot).unwrap();
        assert!(st.converged);
        let mut f = vec![Vector2::zeros(); st.len()];
        pot.forces(&st.positions, &mut f);
        let tol = 1e-8 * pot.force_unit();
        assert!(f.iter().all(|v| v.norm() <= tol));
        for p in &st.positions {
            assert!(st.positions.iter().any(|o| (o + p).norm() < 1e-3));
        }
    }

    #[test]
    fn equilibrium_distances_scale_as_omega_to_minus_two_thirds() {
        let seed = seed_hexagonal(7, 7.0).unwrap();
        let a = relax(&seed, &potential(1.14, 1.39)).unwrap();
        let s = 1.7;
        let b = relax(&seed, &potential(1.14 * s, 1.39 * s)).unwrap();
        let ratio = b.nn_stats.mean / a.nn_stats.mean;
        assert!((ratio / s.powf(-2.0 / 3.0) - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn non_convergence_is_flagged() {
        let seed = seed_hexagonal(7, 7.0).unwrap();
        let opts = RelaxOptions {
            max_steps: 10,
            ..RelaxOptions::default()
        };
        let r = relax_with(&seed, &potential(1.14, 1.39), &opts).unwrap();
        assert!(!r.state.converged);
        assert!(matches!(
            r.state.require_converged(),
            Err(Error::NonConvergence { steps: 10, .. })
        ));
    }
}
