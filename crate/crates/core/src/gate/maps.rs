//! Linear map x ↦ α and quadratic form x ↦ φ₁₂ for segment amplitudes x.

use nalgebra::{Complex, DMatrix, DVector};

use super::integrals::{segment_exp, segment_triangle};
use super::GateProblem;
use crate::scalar::{cis, Real};

type C<T> = Complex<T>;

/// Default sampling density of the quadrature route.
pub const QUADRATURE_SAMPLES_PER_PERIOD: usize = 64;

/// Below this |λΔ| the split form of the triangle integral would cancel.
const SPLIT_THRESHOLD: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct GateMaps<T: Real> {
    pub detuning: T,
    /// alpha[j] is K×m: α_j^k = Σ_i alpha[j][(k, i)] x_i.
    pub alpha: [DMatrix<C<T>>; 2],
    /// Symmetric m×m W with φ₁₂ = xᵀWx.
    pub phase: DMatrix<T>,
}

impl<T: Real> GateMaps<T> {
    pub fn alpha_of(&self, x: &DVector<T>) -> [DVector<C<T>>; 2] {
        let xc = x.map(|v| C::new(v, T::zero()));
        [&self.alpha[0] * &xc, &self.alpha[1] * &xc]
    }

    pub fn phase_of(&self, x: &DVector<T>) -> T {
        x.dot(&(&self.phase * x))
    }

    pub fn segments(&self) -> usize {
        self.phase.nrows()
    }

    /// Maps for the second ion driven with opposite beam phase (σ = −1):
    /// α₂ and φ₁₂ change sign.
    pub fn with_polarity(&self, polarity: i8) -> Self {
        if polarity >= 0 {
            return self.clone();
        }
        let neg = C::new(-T::one(), T::zero());
        Self {
            detuning: self.detuning,
            alpha: [self.alpha[0].clone(), &self.alpha[1] * neg],
            phase: -&self.phase,
        }
    }
}

/// One exponential e^{i(sμ + nΩ)t} in the expansion of Ω^G(t) sin(μt + φ).
#[derive(Clone, Copy, Debug)]
struct Term<T: Real> {
    coef: C<T>,
    s: i32,
    n: i32,
}

fn drive_terms<T: Real>(p: &GateProblem<T>, ion: usize) -> Vec<Term<T>> {
    let g = &p.modulation[ion].harmonics;
    let mut out = Vec::new();
    for s in [1, -1] {
        // sin(μt + φ) = Σ_s s e^{is(μt+φ)} / 2i
        let base = cis(T::lit(s as f64) * p.phase_offset)
            * C::new(T::zero(), -T::lit(s as f64) / T::lit(2.0));
        for (h, &gh) in g.iter().enumerate() {
            if gh == T::zero() {
                continue;
            }
            if h == 0 {
                out.push(Term {
                    coef: base * gh,
                    s,
                    n: 0,
                });
            } else {
                let half = gh / T::lit(2.0);
                out.push(Term {
                    coef: base * half,
                    s,
                    n: h as i32,
                });
                out.push(Term {
                    coef: base * half,
                    s,
                    n: -(h as i32),
                });
            }
        }
    }
    out
}

fn frequency<T: Real>(t: &Term<T>, mu: T, rf: T) -> T {
    T::lit(t.s as f64) * mu + T::lit(t.n as f64) * rf
}

/// Fourier-analytic evaluation of both maps.
pub fn gate_maps<T: Real>(p: &GateProblem<T>, mu: T) -> GateMaps<T> {
    let m = p.segments;
    let kk = p.n_modes();
    let width = p.segment_width();
    let rf = p.rf_omega;
    let terms = [drive_terms(p, 0), drive_terms(p, 1)];
    let nmax = terms
        .iter()
        .flatten()
        .map(|t| t.n.unsigned_abs() as usize)
        .max()
        .unwrap_or(0);
    let span = 4 * nmax + 1;

    // fint[j][(k, a)] = ∫_seg a f_j(t) e^{iω_k t} dt
    let mut fint = [DMatrix::zeros(kk, m), DMatrix::zeros(kk, m)];
    let mut lower = DMatrix::<T>::zeros(m, m);
    for a in 0..m {
        let t0 = width * T::from_usize_lossy(a);
        for j in 0..2 {
            for k in 0..kk {
                fint[j][(k, a)] = terms[j]
                    .iter()
                    .fold(C::new(T::zero(), T::zero()), |acc, t| {
                        acc + t.coef * segment_exp(frequency(t, mu, rf) + p.omega[k], t0, width)
                    });
            }
        }
        // E over every possible frequency sum (s₁+s₂)μ + (n₁+n₂)Ω
        let table: Vec<C<T>> = (0..3 * span)
            .map(|idx| {
                let ssum = T::lit((idx / span) as f64 * 2.0 - 2.0);
                let nsum = T::lit((idx % span) as f64 - (2 * nmax) as f64);
                segment_exp(ssum * mu + nsum * rf, t0, width)
            })
            .collect();
        let lookup =
            |s: i32, n: i32| table[((s + 2) / 2) as usize * span + (n + 2 * nmax as i32) as usize];
        for (outer, inner) in [(0, 1), (1, 0)] {
            // S_q = Σ_p c_p E(ν_p + ν'_q), independent of the mode
            let sums: Vec<C<T>> = terms[inner]
                .iter()
                .map(|q| {
                    terms[outer]
                        .iter()
                        .fold(C::new(T::zero(), T::zero()), |acc, pt| {
                            acc + pt.coef * lookup(pt.s + q.s, pt.n + q.n)
                        })
                })
                .collect();
            for k in 0..kk {
                let w = p.omega[k];
                let mut total = C::new(T::zero(), T::zero());
                for (q, sq) in terms[inner].iter().zip(&sums) {
                    let lambda1 = frequency(q, mu, rf) - w;
                    if (lambda1 * width).mag() >= T::lit(SPLIT_THRESHOLD) {
                        // ∫_{t0}^{t2} e^{iλ₁t₁} = (e^{iλ₁t₂} − e^{iλ₁t₀})/iλ₁
                        let diff = *sq - cis(lambda1 * t0) * fint[outer][(k, a)];
                        total += q.coef * diff / C::new(T::zero(), lambda1);
                    } else {
                        for pt in &terms[outer] {
                            let lambda2 = frequency(pt, mu, rf) + w;
                            total +=
                                q.coef * pt.coef * segment_triangle(lambda2, lambda1, t0, width);
                        }
                    }
                }
                lower[(a, a)] += p.g[outer][k] * p.g[inner][k] * total.im;
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            let mut acc = T::zero();
            for k in 0..kk {
                let w12 = p.g[0][k] * p.g[1][k];
                let i12 = (fint[0][(k, a)] * fint[1][(k, b)].conj()).im;
                let i21 = (fint[1][(k, a)] * fint[0][(k, b)].conj()).im;
                acc += w12 * (i12 + i21);
            }
            lower[(a, b)] = acc;
        }
    }
    assemble(p, mu, fint, lower)
}

/// α_j^k = i g_j^k Σ_i x_i ∫ f_j e^{iω_k t}; W = (P + Pᵀ)/2.
fn assemble<T: Real>(
    p: &GateProblem<T>,
    mu: T,
    fint: [DMatrix<C<T>>; 2],
    lower: DMatrix<T>,
) -> GateMaps<T> {
    let [f0, f1] = fint;
    let scale = |f: DMatrix<C<T>>, j: usize| {
        let mut f = f;
        for k in 0..f.nrows() {
            let s = C::new(T::zero(), p.g[j][k]);
            for a in 0..f.ncols() {
                f[(k, a)] *= s;
            }
        }
        f
    };
    let phase = (&lower + lower.transpose()) / T::lit(2.0);
    GateMaps {
        detuning: mu,
        alpha: [scale(f0, 0), scale(f1, 1)],
        phase,
    }
}

/// Dense trapezoidal evaluation of the same maps using the exact Gaussian
/// modulation, with one Richardson step (h and h/2).
pub fn gate_maps_quadrature<T: Real>(
    p: &GateProblem<T>,
    mu: T,
    samples_per_period: usize,
) -> GateMaps<T> {
    let coarse = quadrature_pass(p, mu, samples_per_period);
    let fine = quadrature_pass(p, mu, 2 * samples_per_period);
    let third = T::lit(1.0 / 3.0);
    let four = T::lit(4.0);
    let rich_c = |f: &DMatrix<C<T>>, c: &DMatrix<C<T>>| {
        (f * C::new(four, T::zero()) - c) * C::new(third, T::zero())
    };
    let fint = [
        rich_c(&fine.0[0], &coarse.0[0]),
        rich_c(&fine.0[1], &coarse.0[1]),
    ];
    let lower = (&fine.1 * four - &coarse.1) * third;
    assemble(p, mu, fint, lower)
}

fn quadrature_pass<T: Real>(
    p: &GateProblem<T>,
    mu: T,
    spp: usize,
) -> ([DMatrix<C<T>>; 2], DMatrix<T>) {
    let m = p.segments;
    let kk = p.n_modes();
    let width = p.segment_width();
    let period = T::two_pi() / p.rf_omega;
    let steps = (width / period * T::from_usize_lossy(spp))
        .ceil()
        .to_f64_lossy()
        .max(1.0) as usize;
    let h = width / T::from_usize_lossy(steps);
    let mut fint = [DMatrix::zeros(kk, m), DMatrix::zeros(kk, m)];
    let mut lower = DMatrix::<T>::zeros(m, m);
    let half = T::lit(0.5);
    for a in 0..m {
        let t0 = width * T::from_usize_lossy(a);
        let times: Vec<T> = (0..=steps)
            .map(|i| t0 + h * T::from_usize_lossy(i))
            .collect();
        let drive: [Vec<T>; 2] = [0, 1].map(|j| {
            times
                .iter()
                .map(|&t| p.modulation[j].exact(p.rf_omega * t) * (mu * t + p.phase_offset).sin())
                .collect()
        });
        let wt = |i: usize| if i == 0 || i == steps { half * h } else { h };
        for k in 0..kk {
            let w = p.omega[k];
            let phases: Vec<C<T>> = times.iter().map(|&t| cis(w * t)).collect();
            for j in 0..2 {
                fint[j][(k, a)] = (0..=steps).fold(C::new(T::zero(), T::zero()), |acc, i| {
                    acc + phases[i] * (drive[j][i] * wt(i))
                });
            }
            for (outer, inner) in [(0, 1), (1, 0)] {
                // cumulative trapezoid of f_inner e^{−iωt}, then outer trapezoid
                let mut cum = C::new(T::zero(), T::zero());
                let mut prev = phases[0].conj() * drive[inner][0];
                let mut acc = C::new(T::zero(), T::zero());
                for i in 0..=steps {
                    if i > 0 {
                        let cur = phases[i].conj() * drive[inner][i];
                        cum += (prev + cur) * (half * h);
                        prev = cur;
                    }
                    acc += phases[i] * cum * (drive[outer][i] * wt(i));
                }
                lower[(a, a)] += p.g[outer][k] * p.g[inner][k] * acc.im;
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            let mut acc = T::zero();
            for k in 0..kk {
                let w12 = p.g[0][k] * p.g[1][k];
                acc += w12
                    * ((fint[0][(k, a)] * fint[1][(k, b)].conj()).im
                        + (fint[1][(k, a)] * fint[0][(k, b)].conj()).im);
            }
            lower[(a, b)] = acc;
        }
    }
    (fint, lower)
}
