use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Cholesky, Complex, DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::fidelity::{infidelity, proxy_matrix};
use super::maps::{gate_maps, GateMaps};
use super::GateProblem;
use crate::error::{Error, Result};
use crate::scalar::{fmax, Real};

/// Nelder–Mead iterations spent polishing the exact fidelity.
pub const POLISH_ITERATIONS: u64 = 200;
/// Relative regularisation added to the proxy before the Cholesky split.
const REGULARISATION: f64 = 1e-12;
/// Initial simplex edge relative to the largest amplitude.
const SIMPLEX_SCALE: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct PulseSolution<T: Real> {
    pub detuning: T,
    /// +1: both ions driven in phase; −1: second ion's beam phase shifted by π.
    pub polarity: i8,
    /// Ω⁽¹⁾ … Ω⁽ᵐ⁾ (rad/μs).
    pub amplitudes: DVector<T>,
    pub alpha: [DVector<Complex<T>>; 2],
    pub phi12: T,
    pub fidelity: T,
    pub infidelity: T,
    /// xᵀMx.
    pub proxy_infidelity: T,
    /// max_i |Ω⁽ⁱ⁾| (rad/μs).
    pub max_rabi: T,
}

/// Forward evaluation of a given amplitude vector and drive polarity.
pub fn evaluate_pulse<T: Real>(
    maps: &GateMaps<T>,
    nbar: &DVector<T>,
    x: &DVector<T>,
    polarity: i8,
) -> PulseSolution<T> {
    let maps = &maps.with_polarity(polarity);
    let alpha = maps.alpha_of(x);
    let phi12 = maps.phase_of(x);
    let loss = infidelity(&alpha, phi12, nbar);
    let m = proxy_matrix(maps, nbar);
    PulseSolution {
        detuning: maps.detuning,
        polarity: if polarity >= 0 { 1 } else { -1 },
        amplitudes: x.clone(),
        phi12,
        fidelity: T::one() - loss,
        infidelity: loss,
        proxy_infidelity: x.dot(&(&m * x)),
        max_rabi: x.iter().fold(T::zero(), |a, &v| fmax(a, v.mag())),
        alpha,
    }
}

struct Polish<'a, T: Real> {
    maps: &'a GateMaps<T>,
    nbar: &'a DVector<T>,
}

impl<T: Real> CostFunction for Polish<'_, T> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let x = DVector::from_iterator(p.len(), p.iter().map(|&v| T::lit(v)));
        let alpha = self.maps.alpha_of(&x);
        Ok(infidelity(&alpha, self.maps.phase_of(&x), self.nbar).to_f64_lossy())
    }
}

/// Proxy-optimal amplitudes: maximise |xᵀWx| / xᵀMx over the generalized
/// eigenvectors. A negative optimum is reached with the second ion's drive
/// phase flipped, which turns φ₁₂ into −φ₁₂; x is then scaled so the
/// oriented phase is +π/4. Returns (x, polarity).
pub fn proxy_solution<T: Real>(maps: &GateMaps<T>, nbar: &DVector<T>) -> Result<(DVector<T>, i8)> {
    let w = &maps.phase;
    let m = maps.segments();
    if w.amax() == T::zero() {
        return Err(Error::InfeasiblePhase);
    }
    let proxy = proxy_matrix(maps, nbar);
    let trace = proxy.trace();
    let mut eps = if trace > T::zero() {
        T::lit(REGULARISATION) * trace / T::from_usize_lossy(m)
    } else {
        T::lit(REGULARISATION)
    };
    let chol = loop {
        let reg = &proxy + DMatrix::identity(m, m) * eps;
        if let Some(c) = Cholesky::new(reg) {
            break c;
        }
        eps *= T::lit(1e3);
    };
    let l = chol.l();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(m, m))
        .ok_or(Error::InfeasiblePhase)?;
    let c = &linv * w * linv.transpose();
    let c = (&c + c.transpose()) / T::lit(2.0);
    let eig = SymmetricEigen::new(c);
    let (idx, lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, T::zero()), |best, (i, &v)| {
            if v.mag() > best.1.mag() {
                (i, v)
            } else {
                best
            }
        });
    if lambda == T::zero() {
        return Err(Error::InfeasiblePhase);
    }
    let polarity: i8 = if lambda > T::zero() { 1 } else { -1 };
    let v = linv.transpose() * eig.eigenvectors.column(idx);
    let phi = v.dot(&(w * &v)) * T::lit(polarity as f64);
    if phi <= T::zero() {
        return Err(Error::InfeasiblePhase);
    }
    let mut x = v * (T::frac_pi_4() / phi).sqrt();
    let pivot = x.iamax();
    if x[pivot] < T::zero() {
        x = -x;
    }
    Ok((x, polarity))
}

/// Proxy solution followed by a derivative-free polish of the exact fidelity.
pub fn optimize_on_maps<T: Real>(
    maps: &GateMaps<T>,
    nbar: &DVector<T>,
) -> Result<PulseSolution<T>> {
    let (x0, polarity) = proxy_solution(maps, nbar)?;
    let start = evaluate_pulse(maps, nbar, &x0, polarity);
    let oriented = maps.with_polarity(polarity);
    let scale = start.max_rabi.to_f64_lossy() * SIMPLEX_SCALE;
    let base: Vec<f64> = x0.iter().map(|v| v.to_f64_lossy()).collect();
    let mut simplex = vec![base.clone()];
    for i in 0..base.len() {
        let mut v = base.clone();
        v[i] += scale;
        simplex.push(v);
    }
    let polished = NelderMead::new(simplex)
        .with_sd_tolerance(0.0)
        .ok()
        .and_then(|solver| {
            Executor::new(
                Polish {
                    maps: &oriented,
                    nbar,
                },
                solver,
            )
            .configure(|s| s.max_iters(POLISH_ITERATIONS))
            .run()
            .ok()
        })
        .and_then(|res| res.state().get_best_param().cloned());
    if let Some(p) = polished {
        let x = DVector::from_iterator(p.len(), p.into_iter().map(T::lit));
        let sol = evaluate_pulse(maps, nbar, &x, polarity);
        if sol.infidelity < start.infidelity {
            return Ok(sol);
        }
    }
    Ok(start)
}

pub fn optimize_pulse<T: Real>(p: &GateProblem<T>, mu: T) -> Result<PulseSolution<T>> {
    optimize_on_maps(&gate_maps(p, mu), &p.occupations.nbar)
}

/// μᵢ = lo + i(hi − lo)/steps, i < steps; doubling `steps` gives a superset.
pub fn scan_grid<T: Real>(lo: T, hi: T, steps: usize) -> Vec<T> {
    let n = T::from_usize_lossy(steps.max(1));
    (0..steps)
        .map(|i| lo + (hi - lo) * T::from_usize_lossy(i) / n)
        .collect()
}

#[derive(Clone, Debug)]
pub struct ScanRow<T: Real> {
    pub detuning: T,
    pub outcome: std::result::Result<PulseSolution<T>, String>,
}

#[derive(Clone, Debug)]
pub struct ScanTable<T: Real> {
    pub rows: Vec<ScanRow<T>>,
    /// Row with the lowest infidelity.
    pub best: Option<usize>,
}

impl<T: Real> ScanTable<T> {
    pub fn best_solution(&self) -> Option<&PulseSolution<T>> {
        self.best.and_then(|i| self.rows[i].outcome.as_ref().ok())
    }
}

/// Optimises every grid point (in parallel); rows keep grid order and
/// per-point failures are recorded rather than aborting the scan.
pub fn scan_detuning<T: Real>(
    p: &GateProblem<T>,
    lo: T,
    hi: T,
    steps: usize,
) -> Result<ScanTable<T>> {
    let top = p.omega.iter().fold(T::zero(), |m, &w| fmax(m, w));
    if steps < 1 || !(lo > T::zero()) || hi < lo || hi > T::lit(1.2) * top {
        return Err(Error::InvalidConfig(format!(
            "detuning scan must satisfy 0 < lo ≤ hi ≤ 1.2·ω_max and steps ≥ 1 (lo={lo:e}, hi={hi:e}, steps={steps})"
        )));
    }
    let rows: Vec<ScanRow<T>> = scan_grid(lo, hi, steps)
        .into_par_iter()
        .map(|mu| ScanRow {
            detuning: mu,
            outcome: optimize_pulse(p, mu).map_err(|e| e.to_string()),
        })
        .collect();
    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.outcome.as_ref().ok().map(|s| (i, s.infidelity)))
        .fold(None, |b: Option<(usize, T)>, (i, v)| match b {
            Some((_, bv)) if bv <= v => b,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i);
    Ok(ScanTable { rows, best })
}

/// Optimises on the static problem (no modulation, static modes) and
/// replays those amplitudes on the micromotion problem.
pub fn static_pulse_crosscheck<T: Real>(
    static_problem: &GateProblem<T>,
    micromotion_problem: &GateProblem<T>,
    mu: T,
) -> Result<(PulseSolution<T>, PulseSolution<T>)> {
    let on_static = optimize_pulse(static_problem, mu)?;
    let maps = gate_maps(micromotion_problem, mu);
    let replay = evaluate_pulse(
        &maps,
        &micromotion_problem.occupations.nbar,
        &on_static.amplitudes,
        on_static.polarity,
    );
    Ok((on_static, replay))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate::maps::tests::single_mode;

    #[test]
    fn two_segment_single_mode() {
        // μ detuned by 2π/τ: the co-rotating displacement loop closes over
        // the gate; ω ≫ 2π/τ keeps the counter-rotating residue small.
        let (w, tau) = (300.0_f64, 20.0);
        let p = single_mode(w, tau, 2, false);
        let sol = optimize_pulse(&p, w - std::f64::consts::TAU / tau).unwrap();
        assert!(sol.fidelity > 1.0 - 1e-6, "{}", sol.infidelity);
        assert!((sol.phi12 - std::f64::consts::FRAC_PI_4).abs() < 1e-3);
    }

    #[test]
    fn grid_superset() {
        let a = scan_grid(1.0_f64, 2.0, 5);
        let b = scan_grid(1.0_f64, 2.0, 10);
        assert!(a.iter().all(|x| b.iter().any(|y| (x - y).abs() < 1e-15)));
        assert_eq!(scan_grid(1.0_f64, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn one_step_scan_is_single_optimisation() {
        let p = single_mode(3.0, 20.0, 3, false);
        let t = scan_detuning(&p, 2.5, 2.8, 1).unwrap();
        let direct = optimize_pulse(&p, 2.5).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.best_solution().unwrap(), &direct);
        assert!(scan_detuning(&p, 3.2, 4.0, 1).is_err());
        // flipping the second ion's drive flips the phase map
        let maps = gate_maps(&p, 2.5);
        assert_eq!(maps.with_polarity(-1).phase, -&maps.phase);
        let sol = optimize_pulse(&p, 3.4).unwrap();
        assert!((sol.phi12 - std::f64::consts::FRAC_PI_4).abs() < 0.05);
        // an uncoupled second ion gives no conditional phase at all
        let mut q = p.clone();
        q.g[1][0] = 0.0;
        assert!(matches!(
            optimize_pulse(&q, 2.5),
            Err(Error::InfeasiblePhase)
        ));
    }

    #[test]
    fn unmodulated_crosscheck_is_identity() {
        let p = single_mode(3.0, 20.0, 3, false);
        let (a, b) = static_pulse_crosscheck(&p, &p, 2.7).unwrap();
        assert_eq!(a.fidelity, b.fidelity);
    }
}
