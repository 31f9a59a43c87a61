//! Segmented, micromotion-modulated pulses for a conditional phase flip
//! between two ions of the crystal, plus thermal fidelity and error budget.

mod budget;
mod fidelity;
pub mod integrals;
mod maps;
mod modulation;
mod optimize;

pub use budget::{error_budget, lamb_dicke_parameter, thermal_width, ErrorBudget, ThermalWidth};
pub use fidelity::{fidelity, infidelity, proxy_matrix};
pub use maps::{gate_maps, gate_maps_quadrature, GateMaps, QUADRATURE_SAMPLES_PER_PERIOD};
pub use modulation::{BeamModulation, MAX_MODULATION_HARMONICS, MODULATION_TOLERANCE};
pub use optimize::{
    evaluate_pulse, optimize_pulse, proxy_solution, scan_detuning, scan_grid,
    static_pulse_crosscheck, PulseSolution, ScanRow, ScanTable, POLISH_ITERATIONS,
};

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::TransverseModeSet;
use crate::scalar::Real;
use crate::units::UnitSystem;

/// η above which the Lamb-Dicke expansion is considered unreliable.
pub const LAMB_DICKE_LIMIT: f64 = 0.1;

/// Which two ions the gate acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSelector {
    /// The two ions closest to the trap centre.
    Center,
    /// The nearest-neighbour pair whose midpoint lies furthest out.
    Edge,
    Explicit(usize, usize),
}

impl std::str::FromStr for PairSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center" | "centre" => Ok(Self::Center),
            "edge" => Ok(Self::Edge),
            other => {
                let parse = |t: &str| t.trim().parse::<usize>().ok();
                match other.split_once(',') {
                    Some((a, b)) => match (parse(a), parse(b)) {
                        (Some(a), Some(b)) => Ok(Self::Explicit(a, b)),
                        _ => Err(Error::InvalidConfig(format!("bad ion pair `{other}`"))),
                    },
                    None => Err(Error::InvalidConfig(format!(
                        "pair must be `center`, `edge` or `i,j`, got `{other}`"
                    ))),
                }
            }
        }
    }
}

/// Resolves a selector to ion indices (lower index first for symbolic pairs).
pub fn select_pair<T: Real>(positions: &[Vector2<T>], sel: PairSelector) -> Result<(usize, usize)> {
    let n = positions.len();
    if n < 2 {
        return Err(Error::InvalidConfig(
            "a two-ion gate needs at least two ions".into(),
        ));
    }
    let ordered = |a: usize, b: usize| (a.min(b), a.max(b));
    match sel {
        PairSelector::Explicit(a, b) => {
            for i in [a, b] {
                if i >= n {
                    return Err(Error::IonIndex { index: i, n });
                }
            }
            if a == b {
                return Err(Error::InvalidConfig("gate ions must differ".into()));
            }
            Ok((a, b))
        }
        PairSelector::Center => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&i, &j| {
                positions[i]
                    .norm()
                    .partial_cmp(&positions[j].norm())
                    .unwrap()
                    .then(i.cmp(&j))
            });
            Ok(ordered(idx[0], idx[1]))
        }
        PairSelector::Edge => {
            let mut best: Option<((usize, usize), T)> = None;
            for i in 0..n {
                let j = (0..n)
                    .filter(|&j| j != i)
                    .min_by(|&a, &b| {
                        let da = (positions[a] - positions[i]).norm();
                        let db = (positions[b] - positions[i]).norm();
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                let r = ((positions[i] + positions[j]) / T::lit(2.0)).norm();
                if best.is_none_or(|(_, b)| r > b) {
                    best = Some((ordered(i, j), r));
                }
            }
            Ok(best.unwrap().0)
        }
    }
}

/// Laser and pulse settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateConfig<T> {
    pub pair: (usize, usize),
    /// Wave-vector difference Δk along z (μm⁻¹).
    pub dk: T,
    /// Gaussian beam waist (μm).
    pub waist: T,
    /// Beat-note detuning μ (rad/μs).
    pub detuning: T,
    /// Total gate time τ (μs).
    pub duration: T,
    pub segments: usize,
    /// k_B T/ħ (rad/μs).
    pub temperature: T,
    /// Laser phase at t = 0.
    pub phase_offset: T,
}

impl<T: Real> GateConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.duration > T::zero()) {
            return bad("gate time must be positive");
        }
        if self.segments < 1 {
            return bad("need at least one segment");
        }
        if !(self.waist > T::zero()) {
            return bad("beam waist must be positive");
        }
        if !(self.dk > T::zero()) {
            return bad("wave-vector difference must be positive");
        }
        if !(self.temperature >= T::zero()) {
            return bad("temperature must be non-negative");
        }
        if self.pair.0 == self.pair.1 {
            return bad("gate ions must differ");
        }
        Ok(())
    }

    pub fn segment_width(&self) -> T {
        self.duration / T::from_usize_lossy(self.segments)
    }
}

/// Bose–Einstein occupation per mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalOccupations<T: Real> {
    pub nbar: DVector<T>,
}

impl<T: Real> ThermalOccupations<T> {
    /// n̄ = 1/(exp(ħω/k_BT) − 1); `temperature` is k_BT/ħ.
    pub fn new(omega: &DVector<T>, temperature: T) -> Self {
        let nbar = omega.map(|w| {
            if temperature <= T::zero() {
                T::zero()
            } else {
                T::one() / ((w / temperature).exp() - T::one())
            }
        });
        Self { nbar }
    }

    pub fn ground(modes: usize) -> Self {
        Self {
            nbar: DVector::zeros(modes),
        }
    }
}

/// Everything the pulse maps need, independent of the detuning.
#[derive(Clone, Debug)]
pub struct GateProblem<T: Real> {
    pub omega: DVector<T>,
    /// Lamb-Dicke parameter per mode.
    pub eta: DVector<T>,
    /// g_j^k = η_k b_j^k for the two gate ions.
    pub g: [DVector<T>; 2],
    pub modulation: [BeamModulation<T>; 2],
    pub occupations: ThermalOccupations<T>,
    pub rf_omega: T,
    pub duration: T,
    pub segments: usize,
    pub phase_offset: T,
}

impl<T: Real> GateProblem<T> {
    pub fn new(
        modes: &TransverseModeSet<T>,
        cfg: &GateConfig<T>,
        modulation: [BeamModulation<T>; 2],
        rf_omega: T,
        mass: T,
        units: &UnitSystem<T>,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = modes.mode_matrix.nrows();
        for i in [cfg.pair.0, cfg.pair.1] {
            if i >= n {
                return Err(Error::IonIndex { index: i, n });
            }
        }
        let eta = modes
            .frequencies
            .map(|w| lamb_dicke_parameter(cfg.dk, units.hbar, mass, w));
        let row =
            |ion: usize| DVector::from_fn(modes.len(), |k, _| eta[k] * modes.mode_matrix[(ion, k)]);
        Ok(Self {
            omega: modes.frequencies.clone(),
            g: [row(cfg.pair.0), row(cfg.pair.1)],
            eta,
            modulation,
            occupations: ThermalOccupations::new(&modes.frequencies, cfg.temperature),
            rf_omega,
            duration: cfg.duration,
            segments: cfg.segments,
            phase_offset: cfg.phase_offset,
        })
    }

    /// Modes whose Lamb-Dicke parameter exceeds [`LAMB_DICKE_LIMIT`].
    pub fn lamb_dicke_violations(&self) -> Vec<usize> {
        (0..self.eta.len())
            .filter(|&k| self.eta[k] >= T::lit(LAMB_DICKE_LIMIT))
            .collect()
    }

    pub fn n_modes(&self) -> usize {
        self.omega.len()
    }

    pub fn segment_width(&self) -> T {
        self.duration / T::from_usize_lossy(self.segments)
    }

    /// Same problem with the beam modulation switched off.
    pub fn without_modulation(&self) -> Self {
        let mut out = self.clone();
        out.modulation = [BeamModulation::unit(), BeamModulation::unit()];
        out
    }
}
