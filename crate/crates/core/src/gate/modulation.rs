use nalgebra::Vector2;

use crate::micromotion::MicromotionExpansion;
use crate::scalar::{fmax, Real};

/// Target sup-norm error of the truncated cosine series.
pub const MODULATION_TOLERANCE: f64 = 1e-12;
pub const MAX_MODULATION_HARMONICS: usize = 32;
const MIN_HARMONICS: usize = 4;
const PROJECTION_SAMPLES: usize = 512;
const CHECK_SAMPLES: usize = 1024;

/// Gaussian beam weight Ω^G(θ) = exp(−|r(θ) − r⁽⁰⁾|²/w²) over one rf period,
/// stored both as the exact function and as a cosine series Σ Gₙ cos nθ.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamModulation<T: Real> {
    /// G₀ … G_{N_h}.
    pub harmonics: Vec<T>,
    /// Micromotion harmonics r⁽¹⁾, r⁽²⁾, … of the illuminated ion.
    pub displacement: Vec<Vector2<T>>,
    pub waist: T,
}

impl<T: Real> BeamModulation<T> {
    /// No micromotion: Ω^G ≡ 1.
    pub fn unit() -> Self {
        Self {
            harmonics: vec![T::one()],
            displacement: Vec::new(),
            waist: T::one(),
        }
    }

    pub fn from_expansion(exp: &MicromotionExpansion<T>, ion: usize, waist: T) -> Self {
        let displacement = exp.harmonics.iter().skip(1).map(|h| h[ion]).collect();
        Self::from_displacement(displacement, waist)
    }

    pub fn from_displacement(displacement: Vec<Vector2<T>>, waist: T) -> Self {
        if displacement
            .iter()
            .all(|d| d.x == T::zero() && d.y == T::zero())
        {
            return Self {
                displacement,
                waist,
                ..Self::unit()
            };
        }
        let mut out = Self {
            harmonics: Vec::new(),
            displacement,
            waist,
        };
        let s = T::from_usize_lossy(PROJECTION_SAMPLES);
        let samples: Vec<T> = (0..PROJECTION_SAMPLES)
            .map(|k| out.exact(T::two_pi() * T::from_usize_lossy(k) / s))
            .collect();
        let project = |n: usize| {
            let sum = samples.iter().enumerate().fold(T::zero(), |acc, (k, &f)| {
                let theta = T::two_pi() * T::from_usize_lossy(k * n % PROJECTION_SAMPLES) / s;
                acc + f * theta.cos()
            });
            if n == 0 {
                sum / s
            } else {
                sum * T::lit(2.0) / s
            }
        };
        let all: Vec<T> = (0..=MAX_MODULATION_HARMONICS).map(project).collect();
        let tol = T::lit(MODULATION_TOLERANCE);
        for nh in MIN_HARMONICS..=MAX_MODULATION_HARMONICS {
            out.harmonics = all[..=nh].to_vec();
            if out.sup_error() < tol {
                break;
            }
        }
        out
    }

    /// Exact Ω^G at rf phase θ.
    pub fn exact(&self, theta: T) -> T {
        let d = self
            .displacement
            .iter()
            .enumerate()
            .fold(Vector2::zeros(), |acc, (n, h)| {
                acc + h * (T::from_usize_lossy(n + 1) * theta).cos()
            });
        (-d.norm_squared() / (self.waist * self.waist)).exp()
    }

    /// Truncated cosine series at θ.
    pub fn series(&self, theta: T) -> T {
        self.harmonics
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (n, &g)| {
                acc + g * (T::from_usize_lossy(n) * theta).cos()
            })
    }

    pub fn order(&self) -> usize {
        self.harmonics.len() - 1
    }

    /// sup_θ |series − exact| on a grid offset from the projection grid.
    pub fn sup_error(&self) -> T {
        let s = T::from_usize_lossy(CHECK_SAMPLES);
        (0..CHECK_SAMPLES)
            .map(|k| {
                let theta = T::two_pi() * (T::from_usize_lossy(k) + T::lit(0.5)) / s;
                (self.series(theta) - self.exact(theta)).mag()
            })
            .fold(T::zero(), fmax)
    }

    /// min_θ Ω^G.
    pub fn minimum(&self) -> T {
        let s = T::from_usize_lossy(CHECK_SAMPLES);
        (0..CHECK_SAMPLES)
            .map(|k| self.exact(T::two_pi() * T::from_usize_lossy(k) / s))
            .fold(T::one(), |m, v| if v < m { v } else { m })
    }
}
