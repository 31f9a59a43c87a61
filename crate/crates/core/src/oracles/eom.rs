//! Direct integration of the full time-dependent in-plane equations of motion
//! (exact rf quadrupole force + exact Coulomb force + viscous friction).

use nalgebra::{Matrix2, Vector2};

use crate::coulomb::{self, Positions};
use crate::error::{Error, Result};
use crate::micromotion::MicromotionExpansion;
use crate::oracles::floquet::floquet_exponent;
use crate::scalar::{fmax, fmin, Real};
use crate::trap::{mathieu_parameters, TrapConfig, X, Y};
use crate::units::UnitSystem;

/// RK4 steps per rf period.
pub const EOM_STEPS_PER_PERIOD: usize = 2048;
/// Largest crystal the oracle accepts.
pub const MAX_EOM_IONS: usize = 19;
/// Ions beyond this radius (μm) count as lost.
pub const RUNAWAY_RADIUS: f64 = 1e3;
/// Trajectory samples kept per rf period.
const RECORD_STRIDE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FullEomOptions<T> {
    /// Viscous damping rate (rad/μs).
    pub friction: T,
    /// Integration budget (μs).
    pub duration: T,
    /// Settled once the residual secular amplitude, inferred from the
    /// stroboscopic change per rf period, stays below this for a full secular
    /// period (μm).
    pub settle_tolerance: T,
}

impl<T: Real> Default for FullEomOptions<T> {
    fn default() -> Self {
        Self {
            friction: T::lit(0.2),
            duration: T::lit(500.0),
            settle_tolerance: T::lit(1e-6),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord<T: Real> {
    /// Uniformly spaced sample times of the last two rf periods (μs).
    pub times: Vec<T>,
    pub positions: Vec<Positions<T>>,
    pub settled: bool,
    pub periods: usize,
    /// Max per-ion stroboscopic change over the last period (μm).
    pub period_change: T,
    /// Stroboscopic energy at every period boundary: a single-ion quadratic
    /// form that the damped rf motion strictly reduces (the Floquet invariant
    /// when undamped), summed over ions, plus the Coulomb energy.
    pub period_energy: Vec<T>,
}

struct Dynamics<T: Real> {
    /// Ω²/4 · a_ν and Ω²/4 · 2q_ν
    static_k: [T; 2],
    rf_k: [T; 2],
    kappa_over_m: T,
    friction: T,
    omega: T,
    mass: T,
    kappa: T,
    /// pseudopotential stiffness ω_ν²
    secular_sq: [T; 2],
    /// per-axis coefficients of the stroboscopic invariant
    invariant: [[T; 3]; 2],
}

impl<T: Real> Dynamics<T> {
    fn accel(&self, cos_rf: T, r: &[Vector2<T>], v: &[Vector2<T>], out: &mut [Vector2<T>]) {
        coulomb::forces(r, self.kappa, out);
        for ((a, p), vel) in out.iter_mut().zip(r).zip(v) {
            let kx = self.static_k[0] - self.rf_k[0] * cos_rf;
            let ky = self.static_k[1] - self.rf_k[1] * cos_rf;
            *a = *a * (self.kappa_over_m / self.kappa)
                - Vector2::new(kx * p.x, ky * p.y)
                - vel * self.friction;
        }
    }

    /// Σ single-ion stroboscopic energy + Coulomb energy at rf phase 0.
    fn strobe_energy(&self, r: &[Vector2<T>], v: &[Vector2<T>]) -> T {
        let e = r.iter().zip(v).fold(T::zero(), |acc, (p, vel)| {
            let [cx, cy] = self.invariant;
            acc + cx[0] * p.x * p.x
                + cx[1] * p.x * vel.x
                + cx[2] * vel.x * vel.x
                + cy[0] * p.y * p.y
                + cy[1] * p.y * vel.y
                + cy[2] * vel.y * vel.y
        });
        e + coulomb::energy(r, self.kappa)
    }
}

/// Quadratic form (x², xv, v²) along one axis that the single-ion motion
/// reduces at every rf period: P = Σₖ (Mᵀ)ᵏ S Mᵏ over the damped monodromy M,
/// seeded with the undamped Floquet invariant S. With no friction P = S.
/// Normalised so the v² coefficient is m/2. Falls back to ½m(v² + ω²x²) when
/// the axis is unstable.
fn floquet_invariant<T: Real>(dyn_: &Dynamics<T>, ax: usize, cos_tab: &[T], h: T) -> [T; 3] {
    let two = T::lit(2.0);
    let fallback = [
        dyn_.mass * dyn_.secular_sq[ax] / two,
        T::zero(),
        dyn_.mass / two,
    ];
    let undamped = monodromy(dyn_.static_k[ax], dyn_.rf_k[ax], T::zero(), cos_tab, h);
    let (m11, m21, m12, m22) = (
        undamped[0][0],
        undamped[1][0],
        undamped[0][1],
        undamped[1][1],
    );
    if ((m11 + m22) / two).mag() >= T::one() || m12 <= T::zero() {
        return fallback;
    }
    // Courant–Snyder: −M21 x² + (M11 − M22) x v + M12 v² is invariant
    let mut p = Matrix2::new(-m21, (m11 - m22) / two, (m11 - m22) / two, m12);
    let damped = monodromy(dyn_.static_k[ax], dyn_.rf_k[ax], dyn_.friction, cos_tab, h);
    let mut a = Matrix2::new(damped[0][0], damped[0][1], damped[1][0], damped[1][1]);
    if dyn_.friction > T::zero() {
        // Smith doubling for the discrete Lyapunov sum
        for _ in 0..60 {
            let next = p + a.transpose() * p * a;
            a = a * a;
            let done = (next - p).abs().max() <= T::lit(1e-15) * next.abs().max();
            p = next;
            if done {
                break;
            }
        }
    }
    let scale = dyn_.mass / (two * p[(1, 1)]);
    [p[(0, 0)] * scale, two * p[(0, 1)] * scale, dyn_.mass / two]
}

/// One-period map [[x←x, x←v], [v←x, v←v]] of x'' = −(k_s − k_rf cos Ωt) x − γx'.
fn monodromy<T: Real>(k_static: T, k_rf: T, friction: T, cos_tab: &[T], h: T) -> [[T; 2]; 2] {
    let half = h / T::lit(2.0);
    let six = T::lit(6.0);
    let two = T::lit(2.0);
    let f = |c: T, y: [T; 2]| [y[1], -(k_static - k_rf * c) * y[0] - friction * y[1]];
    let mut cols = [[T::one(), T::zero()], [T::zero(), T::one()]];
    for y in cols.iter_mut() {
        for s in 0..cos_tab.len() / 2 {
            let (c0, c1, c2) = (cos_tab[2 * s], cos_tab[2 * s + 1], cos_tab[2 * s + 2]);
            let k1 = f(c0, *y);
            let k2 = f(c1, [y[0] + half * k1[0], y[1] + half * k1[1]]);
            let k3 = f(c1, [y[0] + half * k2[0], y[1] + half * k2[1]]);
            let k4 = f(c2, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / six * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
            }
        }
    }
    [[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]]
}

/// Seed that already carries the leading breathing displacement at rf phase
/// zero, r⁽⁰⁾(1 − q/2), so the transient to damp out is small.
pub fn breathing_seed<T: Real>(r0: &[Vector2<T>], q: T) -> Positions<T> {
    let s = T::one() - q / T::lit(2.0);
    r0.iter().map(|p| p * s).collect()
}

/// Integrates from rest at `seed` until the stroboscopic positions repeat.
pub fn integrate_full_eom<T: Real>(
    trap: &TrapConfig<T>,
    units: &UnitSystem<T>,
    seed: &[Vector2<T>],
    opts: &FullEomOptions<T>,
) -> Result<TrajectoryRecord<T>> {
    let n = seed.len();
    if n == 0 || n > MAX_EOM_IONS {
        return Err(Error::InvalidConfig(format!(
            "full equations of motion are limited to 1..={MAX_EOM_IONS} ions, got {n}"
        )));
    }
    let coeffs = mathieu_parameters(trap, units)?;
    let w = trap.rf_omega;
    let quarter = w * w / T::lit(4.0);
    let kappa = units.coulomb * trap.ion_charge * trap.ion_charge;
    // single-ion secular stiffness from the monodromy route; the lowest-order
    // pseudopotential stands in when an axis is unstable
    let secular_sq = [X, Y].map(|ax| {
        let (a, q) = (coeffs.a[ax], coeffs.q[ax]);
        let beta_sq = floquet_exponent(a, q)
            .beta
            .map_or_else(|| a + q * q / T::lit(2.0), |b| b * b);
        quarter * fmax(beta_sq, T::lit(1e-12))
    });
    let mut dyn_ = Dynamics {
        static_k: [quarter * coeffs.a[X], quarter * coeffs.a[Y]],
        rf_k: [
            quarter * T::lit(2.0) * coeffs.q[X],
            quarter * T::lit(2.0) * coeffs.q[Y],
        ],
        kappa_over_m: kappa / trap.ion_mass,
        friction: opts.friction,
        omega: w,
        mass: trap.ion_mass,
        kappa,
        secular_sq,
        invariant: [[T::zero(); 3]; 2],
    };
    let period = T::two_pi() / dyn_.omega;
    let h = period / T::from_usize_lossy(EOM_STEPS_PER_PERIOD);
    let half = h / T::lit(2.0);
    // cos(Ωt) at every half step of one period
    let cos_tab: Vec<T> = (0..=2 * EOM_STEPS_PER_PERIOD)
        .map(|i| {
            (T::two_pi() * T::from_usize_lossy(i) / T::from_usize_lossy(2 * EOM_STEPS_PER_PERIOD))
                .cos()
        })
        .collect();
    for ax in [X, Y] {
        dyn_.invariant[ax] = floquet_invariant(&dyn_, ax, &cos_tab, h);
    }

    let mut r: Positions<T> = seed.to_vec();
    let mut v: Positions<T> = vec![Vector2::zeros(); n];
    let zero = vec![Vector2::<T>::zeros(); n];
    let (mut k1r, mut k2r, mut k3r, mut k4r) =
        (zero.clone(), zero.clone(), zero.clone(), zero.clone());
    let (mut k1v, mut k2v, mut k3v, mut k4v) =
        (zero.clone(), zero.clone(), zero.clone(), zero.clone());
    let (mut tr, mut tv) = (zero.clone(), zero.clone());
    let six = T::lit(6.0);
    let two = T::lit(2.0);

    let mut record_times = Vec::new();
    let mut record_pos: Vec<Positions<T>> = Vec::new();
    let mut energies = vec![dyn_.strobe_energy(&r, &v)];
    let mut last_strobe = r.clone();
    let mut change = T::zero();
    let mut settled_at: Option<usize> = None;

    let max_periods = (opts.duration / period).ceil().to_f64_lossy().max(1.0) as usize;
    // slowest single-ion secular frequency sets how a residual amplitude shows
    // up in the stroboscopic change and how long to watch it
    let secular = fmin(dyn_.secular_sq[0], dyn_.secular_sq[1]).sqrt();
    let step_limit = opts.settle_tolerance * secular * period;
    let window = (T::two_pi() / (secular * period)).ceil().to_f64_lossy() as usize;
    let mut quiet = 0usize;
    for p in 0..max_periods {
        let recording = settled_at.is_some();
        for s in 0..EOM_STEPS_PER_PERIOD {
            if recording && s % RECORD_STRIDE == 0 {
                record_times.push(period * T::from_usize_lossy(p) + h * T::from_usize_lossy(s));
                record_pos.push(r.clone());
            }
            let (c0, c1, c2) = (cos_tab[2 * s], cos_tab[2 * s + 1], cos_tab[2 * s + 2]);
            k1r.copy_from_slice(&v);
            dyn_.accel(c0, &r, &v, &mut k1v);
            for i in 0..n {
                tr[i] = r[i] + k1r[i] * half;
                tv[i] = v[i] + k1v[i] * half;
            }
            k2r.copy_from_slice(&tv);
            dyn_.accel(c1, &tr, &tv, &mut k2v);
            for i in 0..n {
                tr[i] = r[i] + k2r[i] * half;
                tv[i] = v[i] + k2v[i] * half;
            }
            k3r.copy_from_slice(&tv);
            dyn_.accel(c1, &tr, &tv, &mut k3v);
            for i in 0..n {
                tr[i] = r[i] + k3r[i] * h;
                tv[i] = v[i] + k3v[i] * h;
            }
            k4r.copy_from_slice(&tv);
            dyn_.accel(c2, &tr, &tv, &mut k4v);
            for i in 0..n {
                r[i] += (k1r[i] + k2r[i] * two + k3r[i] * two + k4r[i]) * (h / six);
                v[i] += (k1v[i] + k2v[i] * two + k3v[i] * two + k4v[i]) * (h / six);
            }
        }
        if let Some((index, p)) = r
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.norm() < T::lit(RUNAWAY_RADIUS)))
        {
            return Err(Error::Runaway {
                index,
                radius: p.norm().to_f64_lossy(),
            });
        }
        energies.push(dyn_.strobe_energy(&r, &v));
        change = r
            .iter()
            .zip(&last_strobe)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), fmax);
        last_strobe.clone_from(&r);
        match settled_at {
            Some(start) if p >= start + 2 => {
                return Ok(TrajectoryRecord {
                    times: record_times,
                    positions: record_pos,
                    settled: true,
                    periods: p + 1,
                    period_change: change,
                    period_energy: energies,
                });
            }
            None => {
                quiet = if change < step_limit { quiet + 1 } else { 0 };
                if quiet > window {
                    settled_at = Some(p);
                }
            }
            _ => {}
        }
    }
    Err(Error::NoSettle {
        periods: max_periods,
        change: change.to_f64_lossy(),
    })
}

/// RMS over ions and samples of |r_oracle(t) − r_series(Ω_T t)| (μm).
pub fn trajectory_deviation<T: Real>(
    record: &TrajectoryRecord<T>,
    series: &MicromotionExpansion<T>,
    rf_omega: T,
) -> T {
    let mut sum = T::zero();
    let mut count = 0usize;
    for (t, pos) in record.times.iter().zip(&record.positions) {
        let s = series.positions_at(rf_omega * *t);
        for (a, b) in pos.iter().zip(&s) {
            sum += (a - b).norm_squared();
            count += 1;
        }
    }
    (sum / T::from_usize_lossy(count.max(1))).sqrt()
}

/// Fourier component ⟨r(t) cos(kΩt)⟩·(2 − δ_k0) of the recorded last period.
pub fn orbit_harmonic<T: Real>(
    record: &TrajectoryRecord<T>,
    rf_omega: T,
    k: usize,
) -> Positions<T> {
    let per = EOM_STEPS_PER_PERIOD / RECORD_STRIDE;
    let start = record.positions.len().saturating_sub(per);
    let n = record.positions[0].len();
    let mut acc = vec![Vector2::zeros(); n];
    for idx in start..record.positions.len() {
        let c = (T::from_usize_lossy(k) * rf_omega * record.times[idx]).cos();
        for (a, p) in acc.iter_mut().zip(&record.positions[idx]) {
            *a += p * c;
        }
    }
    let norm = if k == 0 { T::one() } else { T::lit(2.0) } / T::from_usize_lossy(per);
    acc.iter().map(|a| a * norm).collect()
}
