//! Versioned JSON documents written by each stage. Every document echoes the
//! resolved configuration (or its hash) so later stages can detect mismatched
//! inputs.

use std::path::Path;

use ioncrystal::crystal::CrystalState;
use ioncrystal::gate::{ErrorBudget, PulseSolution};
use ioncrystal::micromotion::MicromotionExpansion;
use ioncrystal::modes::{ModeShiftReport, RwaBound, TransverseModeSet};
use ioncrystal::trap::{MathieuParams, TrapConfig};
use ioncrystal::units::{angular_to_mhz, UnitSystem};
use nalgebra::{DMatrix, DVector, Vector2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, RunConfig};
use crate::error::{CliError, CliResult};

pub const CRYSTAL_SCHEMA: &str = "ioncrystal.crystal.v1";
pub const MODES_SCHEMA: &str = "ioncrystal.modes.v1";
pub const PULSE_SCHEMA: &str = "ioncrystal.pulse.v1";
pub const BUDGET_SCHEMA: &str = "ioncrystal.budget.v1";
pub const MANIFEST_SCHEMA: &str = "ioncrystal.manifest.v1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Xy = [f64; 2];

fn to_xy(p: &[Vector2<f64>]) -> Vec<Xy> {
    p.iter().map(|v| [v.x, v.y]).collect()
}

fn from_xy(p: &[Xy]) -> Vec<Vector2<f64>> {
    p.iter().map(|v| Vector2::new(v[0], v[1])).collect()
}

/// Serialises `value` as pretty JSON with a trailing newline and returns the
/// SHA-256 of the bytes written.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<String> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, &text).map_err(CliError::io(path))?;
    Ok(sha256_hex(text.as_bytes()))
}

/// Reads a JSON document and the SHA-256 of its bytes.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<(T, String)> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    let value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((value, sha256_hex(&bytes)))
}

fn check_schema(found: &str, expected: &str) -> CliResult<()> {
    if found == expected {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "expected schema {expected}, found {found}"
        )))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationRecord {
    pub steps: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub nn_min_um: f64,
    pub nn_max_um: f64,
    pub nn_mean_um: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicromotionRecord {
    pub iterations: usize,
    pub last_shift_um: f64,
    /// Positions the final pass expanded the Coulomb energy around.
    pub expansion_center_um: Vec<Xy>,
    pub r0_um: Vec<Xy>,
    pub r1_um: Vec<Xy>,
    pub r2_um: Vec<Xy>,
    /// r⁽³⁾, r⁽⁴⁾, … when the series needed them.
    pub higher_harmonics_um: Vec<Vec<Xy>>,
    pub series_coefficients: Vec<Vec<f64>>,
    pub amplitude_um: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrystalSnapshot {
    pub schema: String,
    pub tool_version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub trap: TrapConfig<f64>,
    pub mathieu: MathieuParams<f64>,
    pub secular_freq_mhz: [f64; 3],
    pub relaxation: RelaxationRecord,
    pub pseudopotential_positions_um: Vec<Xy>,
    pub micromotion: MicromotionRecord,
}

impl CrystalSnapshot {
    pub fn new(
        config: &RunConfig,
        mathieu: &MathieuParams<f64>,
        crystal: &CrystalState<f64>,
        exp: &MicromotionExpansion<f64>,
    ) -> Self {
        let h = &exp.harmonics;
        let n = exp.n_ions();
        let harmonic = |k: usize| {
            to_xy(
                &h.get(k)
                    .cloned()
                    .unwrap_or_else(|| vec![Vector2::zeros(); n]),
            )
        };
        Self {
            schema: CRYSTAL_SCHEMA.into(),
            tool_version: TOOL_VERSION.into(),
            config_hash: config.hash(),
            config: config.clone(),
            trap: config.trap(),
            mathieu: *mathieu,
            secular_freq_mhz: mathieu.omega.map(angular_to_mhz),
            relaxation: RelaxationRecord {
                steps: crystal.steps,
                gradient_norm: crystal.gradient_norm,
                converged: crystal.converged,
                nn_min_um: crystal.nn_stats.min,
                nn_max_um: crystal.nn_stats.max,
                nn_mean_um: crystal.nn_stats.mean,
            },
            pseudopotential_positions_um: to_xy(&crystal.positions),
            micromotion: MicromotionRecord {
                iterations: exp.iterations,
                last_shift_um: exp.last_shift,
                expansion_center_um: to_xy(&exp.expansion.center),
                r0_um: harmonic(0),
                r1_um: harmonic(1),
                r2_um: harmonic(2),
                higher_harmonics_um: h.iter().skip(3).map(|p| to_xy(p)).collect(),
                series_coefficients: exp.series_coefficients.clone(),
                amplitude_um: exp.amplitude.clone(),
            },
        }
    }

    pub fn load(path: &Path) -> CliResult<(Self, String)> {
        let (snap, sha): (Self, String) = read_json(path)?;
        check_schema(&snap.schema, CRYSTAL_SCHEMA)?;
        if snap.config.hash() != snap.config_hash {
            return Err(CliError::Input(format!(
                "{}: embedded config does not match its hash",
                path.display()
            )));
        }
        Ok((snap, sha))
    }

    pub fn n_ions(&self) -> usize {
        self.micromotion.r0_um.len()
    }

    pub fn expansion(&self, units: &UnitSystem<f64>) -> CliResult<MicromotionExpansion<f64>> {
        let m = &self.micromotion;
        let harmonics = [&m.r0_um, &m.r1_um, &m.r2_um]
            .into_iter()
            .chain(m.higher_harmonics_um.iter())
            .map(|p| from_xy(p))
            .collect();
        Ok(MicromotionExpansion::from_parts(
            harmonics,
            m.series_coefficients.clone(),
            m.iterations,
            m.last_shift_um,
            &from_xy(&m.expansion_center_um),
            &self.trap,
            units,
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSetRecord {
    pub includes_micromotion: bool,
    pub frequencies_rad_per_us: Vec<f64>,
    /// mode_vectors[k][j] = b_j^k.
    pub mode_vectors: Vec<Vec<f64>>,
}

impl ModeSetRecord {
    pub fn new(set: &TransverseModeSet<f64>) -> Self {
        Self {
            includes_micromotion: set.includes_micromotion,
            frequencies_rad_per_us: set.frequencies.iter().copied().collect(),
            mode_vectors: set
                .mode_matrix
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
        }
    }

    pub fn to_set(&self) -> CliResult<TransverseModeSet<f64>> {
        let k = self.frequencies_rad_per_us.len();
        if self.mode_vectors.len() != k || self.mode_vectors.iter().any(|v| v.len() != k) {
            return Err(CliError::Input(
                "mode matrix must be square with one column per frequency".into(),
            ));
        }
        Ok(TransverseModeSet {
            frequencies: DVector::from_vec(self.frequencies_rad_per_us.clone()),
            mode_matrix: DMatrix::from_fn(k, k, |j, m| self.mode_vectors[m][j]),
            includes_micromotion: self.includes_micromotion,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecord {
    /// pairing[k]: micromotion mode matched to static mode k.
    pub pairing: Vec<usize>,
    pub shift_rad_per_us: Vec<f64>,
    pub overlaps: Vec<f64>,
    pub mean_abs_shift_khz: f64,
    pub mean_shift_khz: f64,
    pub max_overlap_deficit: f64,
}

impl ShiftRecord {
    pub fn new(r: &ModeShiftReport<f64>) -> Self {
        let khz = |w: f64| angular_to_mhz(w) * 1e3;
        Self {
            pairing: r.pairing.clone(),
            shift_rad_per_us: r.shifts.clone(),
            overlaps: r.overlaps.clone(),
            mean_abs_shift_khz: khz(r.mean_abs_shift),
            mean_shift_khz: khz(r.mean_shift),
            max_overlap_deficit: r.max_overlap_deficit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RwaRecord {
    pub q_scaling: f64,
    pub norm_estimate: f64,
}

impl RwaRecord {
    pub fn new(b: &RwaBound<f64>) -> Self {
        Self {
            q_scaling: b.q_scaling,
            norm_estimate: b.norm_estimate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModesSnapshot {
    pub schema: String,
    pub tool_version: String,
    pub config_hash: String,
    pub crystal_sha256: String,
    pub omega_z_rad_per_us: f64,
    pub static_modes: ModeSetRecord,
    pub micromotion_modes: ModeSetRecord,
    pub shifts: ShiftRecord,
    pub rwa: RwaRecord,
}

impl ModesSnapshot {
    pub fn load(path: &Path) -> CliResult<(Self, String)> {
        let (snap, sha): (Self, String) = read_json(path)?;
        check_schema(&snap.schema, MODES_SCHEMA)?;
        Ok((snap, sha))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub detuning_rad_per_us: f64,
    pub mu_over_omega_z: f64,
    /// +1: beams in phase on both ions; −1: second beam shifted by π.
    pub polarity: i8,
    pub amplitudes_rad_per_us: Vec<f64>,
    /// α_j^k at t = τ, real and imaginary parts, per ion.
    pub alpha_re: [Vec<f64>; 2],
    pub alpha_im: [Vec<f64>; 2],
    pub phi12: f64,
    pub fidelity: f64,
    pub infidelity: f64,
    pub proxy_infidelity: f64,
    pub max_rabi_2pi_mhz: f64,
}

impl PulseRecord {
    pub fn new(s: &PulseSolution<f64>, omega_z: f64) -> Self {
        Self {
            detuning_rad_per_us: s.detuning,
            mu_over_omega_z: s.detuning / omega_z,
            polarity: s.polarity,
            amplitudes_rad_per_us: s.amplitudes.iter().copied().collect(),
            alpha_re: [0, 1].map(|j| s.alpha[j].iter().map(|c| c.re).collect()),
            alpha_im: [0, 1].map(|j| s.alpha[j].iter().map(|c| c.im).collect()),
            phi12: s.phi12,
            fidelity: s.fidelity,
            infidelity: s.infidelity,
            proxy_infidelity: s.proxy_infidelity,
            max_rabi_2pi_mhz: angular_to_mhz(s.max_rabi),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub pair: [usize; 2],
    pub dk_per_um: f64,
    pub waist_um: f64,
    pub tau_cycles: f64,
    pub duration_us: f64,
    pub segments: usize,
    /// k_B T/h (MHz).
    pub temperature_freq_mhz: f64,
    pub scan_lo_over_omega_z: f64,
    pub scan_hi_over_omega_z: f64,
    pub scan_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    /// Best fidelity of the static-trap pulse replayed with micromotion.
    pub max_replay_fidelity: f64,
    pub min_replay_fidelity: f64,
    /// Best fidelity of the static-trap pulse in the static trap.
    pub max_static_fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSnapshot {
    pub schema: String,
    pub tool_version: String,
    pub config_hash: String,
    pub crystal_sha256: String,
    pub modes_sha256: String,
    pub gate: GateRecord,
    pub failed_points: usize,
    pub best: Option<PulseRecord>,
    pub static_baseline: Option<BaselineRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetSnapshot {
    pub schema: String,
    pub tool_version: String,
    pub config_hash: String,
    pub crystal_sha256: String,
    pub pair: [usize; 2],
    pub nn_distance_um: f64,
    pub waist_um: f64,
    pub delta_r_um: f64,
    pub eta_z: f64,
    pub nbar_z: f64,
    pub q: f64,
    pub crosstalk: f64,
    pub thermal_spread: f64,
    pub lamb_dicke: f64,
    pub micromotion_residual: f64,
}

impl BudgetSnapshot {
    pub fn report(&self) -> String {
        format!(
            "pair ({}, {}), d = {:.4} μm, w = {} μm, δr = {} μm, η_z = {:.5}, n̄_z = {:.4}, q = {:.5}\n\
             P_c = exp(-2(d/w)^2)                = {:.3e}\n\
             dF1 = (π^2/4)(δr/w)^4               = {:.3e}\n\
             dF2 = π^2 η_z^4 (n̄^2 + n̄ + 1/8)     = {:.3e}\n\
             micromotion residual |q|^3          = {:.3e}",
            self.pair[0],
            self.pair[1],
            self.nn_distance_um,
            self.waist_um,
            self.delta_r_um,
            self.eta_z,
            self.nbar_z,
            self.q,
            self.crosstalk,
            self.thermal_spread,
            self.lamb_dicke,
            self.micromotion_residual
        )
    }

    pub fn budget(&self) -> ErrorBudget<f64> {
        ErrorBudget {
            crosstalk: self.crosstalk,
            thermal_spread: self.thermal_spread,
            lamb_dicke: self.lamb_dicke,
            micromotion_residual: self.micromotion_residual,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: String,
    pub status: String,
}

/// Provenance record written next to each command's primary output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub inputs: Vec<FileRef>,
    pub outputs: Vec<FileRef>,
    pub stages: Vec<StageStatus>,
}
