//! Command implementations. Each `build_*` function computes a snapshot
//! without touching the file system; each `run_*` function reads its inputs,
//! writes its outputs and a manifest next to the primary output.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ioncrystal::crystal::{relax, seed_hexagonal, Pseudopotential};
use ioncrystal::gate::{
    error_budget, lamb_dicke_parameter, scan_detuning, scan_grid, select_pair,
    static_pulse_crosscheck, thermal_width, BeamModulation, GateConfig, GateProblem, PairSelector,
    ScanTable,
};
use ioncrystal::micromotion::{
    self_consistent_positions, MicromotionExpansion, SelfConsistencyOptions,
};
use ioncrystal::modes::{
    mode_shift_report, rwa_perturbation_bound, time_averaged_coupling, transverse_mode_set,
};
use ioncrystal::oracles::{fidelity_sweep, trajectory_check, trap_exponent_sweep, FullEomOptions};
use ioncrystal::trap::{MathieuParams, Planarity, X, Y, Z};
use ioncrystal::units::{mhz_to_angular, UnitSystem};
use rayon::prelude::*;

use crate::config::{sha256_hex, RunConfig};
use crate::error::{CliError, CliResult};
use crate::snapshot::*;
use crate::table::{write_scan_csv, BaselinePoint};

/// Tolerances for `verify`.
pub const TRAP_TOLERANCE: f64 = 1e-9;
pub const MICROMOTION_TOLERANCE: f64 = 1e-3;
pub const FIDELITY_TOLERANCE: f64 = 1e-6;

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn file_sha(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    Ok(sha256_hex(&bytes))
}

/// Path of the manifest that accompanies `primary`.
pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

struct Manifest(RunManifest);

impl Manifest {
    fn start(command: &str, config_hash: &str) -> Self {
        Self(RunManifest {
            schema: MANIFEST_SCHEMA.into(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            config_hash: config_hash.into(),
            started_unix_s: unix_now(),
            finished_unix_s: 0,
            inputs: Vec::new(),
            outputs: Vec::new(),
            stages: Vec::new(),
        })
    }

    fn input(&mut self, path: &Path, sha256: &str) {
        self.0.inputs.push(FileRef {
            path: path.display().to_string(),
            sha256: sha256.into(),
        });
    }

    fn output(&mut self, path: &Path, sha256: &str) {
        self.0.outputs.push(FileRef {
            path: path.display().to_string(),
            sha256: sha256.into(),
        });
    }

    fn stage(&mut self, stage: &str, status: &str) {
        self.0.stages.push(StageStatus {
            stage: stage.into(),
            status: status.into(),
        });
    }

    fn finish(mut self, primary: &Path) -> CliResult<PathBuf> {
        self.0.finished_unix_s = unix_now();
        let path = manifest_path(primary);
        write_json(&path, &self.0)?;
        Ok(path)
    }
}

fn pseudopotential(
    mathieu: &MathieuParams<f64>,
    cfg: &RunConfig,
    units: &UnitSystem<f64>,
) -> Pseudopotential<f64> {
    Pseudopotential {
        omega_x: mathieu.omega[X],
        omega_y: mathieu.omega[Y],
        mass: cfg.ion_mass,
        coulomb: coulomb_constant(cfg, units),
    }
}

fn coulomb_constant(cfg: &RunConfig, units: &UnitSystem<f64>) -> f64 {
    units.coulomb * cfg.ion_charge * cfg.ion_charge
}

/// Relaxes the crystal in the pseudopotential and solves the self-consistent
/// micromotion series.
pub fn build_crystal(cfg: &RunConfig) -> CliResult<(CrystalSnapshot, MicromotionExpansion<f64>)> {
    cfg.validate()?;
    let units = UnitSystem::new();
    let trap = cfg.trap();
    let mathieu = MathieuParams::from_config(&trap, &units)?;
    if mathieu.planarity == Planarity::Warning {
        eprintln!(
            "warning: ω_z/max(ω_x, ω_y) = {:.3}; the crystal may not stay planar",
            mathieu.planarity_ratio()
        );
    }
    let seed = seed_hexagonal(cfg.n_ions, cfg.seed_spacing)?;
    let crystal = relax(&seed, &pseudopotential(&mathieu, cfg, &units))?;
    crystal.require_converged()?;
    let opts = SelfConsistencyOptions {
        cooling_rate: cfg.cooling_rate,
        ..Default::default()
    };
    let exp = self_consistent_positions(&crystal.positions, &trap, &units, &opts)?;
    Ok((CrystalSnapshot::new(cfg, &mathieu, &crystal, &exp), exp))
}

pub fn run_relax(config: &Path, out: &Path) -> CliResult<CrystalSnapshot> {
    let cfg = RunConfig::load(config)?;
    let mut manifest = Manifest::start("relax", &cfg.hash());
    manifest.input(config, &file_sha(config)?);
    let (snap, _) = build_crystal(&cfg)?;
    manifest.stage("relaxation", "converged");
    manifest.stage("micromotion", "converged");
    let sha = write_json(out, &snap)?;
    manifest.output(out, &sha);
    manifest.finish(out)?;
    Ok(snap)
}

pub fn build_modes(crystal: &CrystalSnapshot, crystal_sha256: &str) -> CliResult<ModesSnapshot> {
    let units = UnitSystem::new();
    let exp = crystal.expansion(&units)?;
    let kappa = coulomb_constant(&crystal.config, &units);
    let mass = crystal.trap.ion_mass;
    let omega_z = crystal.mathieu.omega[Z];
    let coupling = time_averaged_coupling(&exp)?;
    let (static_set, averaged) = transverse_mode_set(&coupling, omega_z, mass, kappa)?;
    let shifts = mode_shift_report(&averaged, &static_set)?;
    let rwa = rwa_perturbation_bound(
        &coupling,
        &averaged,
        crystal.mathieu.q_planar(),
        crystal.trap.rf_omega,
        mass,
        kappa,
    );
    Ok(ModesSnapshot {
        schema: MODES_SCHEMA.into(),
        tool_version: TOOL_VERSION.into(),
        config_hash: crystal.config_hash.clone(),
        crystal_sha256: crystal_sha256.into(),
        omega_z_rad_per_us: omega_z,
        static_modes: ModeSetRecord::new(&static_set),
        micromotion_modes: ModeSetRecord::new(&averaged),
        shifts: ShiftRecord::new(&shifts),
        rwa: RwaRecord::new(&rwa),
    })
}

pub fn run_modes(crystal_path: &Path, out: &Path) -> CliResult<ModesSnapshot> {
    let (crystal, sha) = CrystalSnapshot::load(crystal_path)?;
    let mut manifest = Manifest::start("modes", &crystal.config_hash);
    manifest.input(crystal_path, &sha);
    let snap = build_modes(&crystal, &sha)?;
    manifest.stage("modes", "ok");
    let out_sha = write_json(out, &snap)?;
    manifest.output(out, &out_sha);
    manifest.finish(out)?;
    Ok(snap)
}

/// Beam and pulse flags shared by `gate` and `error-budget`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamOptions {
    pub pair: PairSelector,
    /// Δk (μm⁻¹).
    pub dk: f64,
    /// Beam waist (μm).
    pub waist: f64,
    /// k_BT/h (MHz).
    pub temperature_mhz: f64,
}

impl Default for BeamOptions {
    fn default() -> Self {
        Self {
            pair: PairSelector::Center,
            dk: 8.0,
            waist: 3.0,
            temperature_mhz: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateOptions {
    pub beam: BeamOptions,
    pub segments: usize,
    pub tau_cycles: f64,
    /// Scan bounds as fractions of ω_z, and the number of grid points.
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub mu_steps: usize,
    pub static_baseline: bool,
    pub target: f64,
}

impl Default for GateOptions {
    fn default() -> Self {
        Self {
            beam: BeamOptions::default(),
            segments: 13,
            tau_cycles: 50.0,
            mu_lo: 0.84,
            mu_hi: 1.01,
            mu_steps: 200,
            static_baseline: false,
            target: 1e-3,
        }
    }
}

/// Parses `lo:hi:steps`.
pub fn parse_scan(s: &str) -> CliResult<(f64, f64, usize)> {
    let bad = || CliError::Config(format!("--mu-scan expects lo:hi:steps, got `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = parts[0].trim().parse().map_err(|_| bad())?;
    let hi = parts[1].trim().parse().map_err(|_| bad())?;
    let steps = parts[2].trim().parse().map_err(|_| bad())?;
    Ok((lo, hi, steps))
}

pub struct GateOutcome {
    pub snapshot: PulseSnapshot,
    pub table: ScanTable<f64>,
    pub baseline: Option<Vec<BaselinePoint>>,
}

pub fn design_gate(
    crystal: &CrystalSnapshot,
    crystal_sha256: &str,
    modes: &ModesSnapshot,
    modes_sha256: &str,
    opts: &GateOptions,
) -> CliResult<GateOutcome> {
    if modes.crystal_sha256 != crystal_sha256 {
        return Err(CliError::Input(
            "mode snapshot was computed from a different crystal snapshot".into(),
        ));
    }
    let units = UnitSystem::new();
    let exp = crystal.expansion(&units)?;
    let omega_z = modes.omega_z_rad_per_us;
    let pair = select_pair(exp.r0(), opts.beam.pair)?;
    let gc = GateConfig {
        pair,
        dk: opts.beam.dk,
        waist: opts.beam.waist,
        detuning: omega_z,
        duration: opts.tau_cycles * std::f64::consts::TAU / omega_z,
        segments: opts.segments,
        temperature: mhz_to_angular(opts.beam.temperature_mhz),
        phase_offset: 0.0,
    };
    let modulation = [
        BeamModulation::from_expansion(&exp, pair.0, gc.waist),
        BeamModulation::from_expansion(&exp, pair.1, gc.waist),
    ];
    let mass = crystal.trap.ion_mass;
    let rf = crystal.trap.rf_omega;
    let averaged = modes.micromotion_modes.to_set()?;
    let problem = GateProblem::new(&averaged, &gc, modulation, rf, mass, &units)?;
    let violations = problem.lamb_dicke_violations();
    if !violations.is_empty() {
        eprintln!(
            "warning: {} modes exceed the Lamb-Dicke limit",
            violations.len()
        );
    }
    let (lo, hi) = (opts.mu_lo * omega_z, opts.mu_hi * omega_z);
    let table = scan_detuning(&problem, lo, hi, opts.mu_steps)?;
    let failed = table.rows.iter().filter(|r| r.outcome.is_err()).count();

    let baseline = if opts.static_baseline {
        let static_set = modes.static_modes.to_set()?;
        let unit = [BeamModulation::unit(), BeamModulation::unit()];
        let static_problem = GateProblem::new(&static_set, &gc, unit, rf, mass, &units)?;
        let points: Vec<BaselinePoint> = scan_grid(lo, hi, opts.mu_steps)
            .into_par_iter()
            .map(
                |mu| match static_pulse_crosscheck(&static_problem, &problem, mu) {
                    Ok((on_static, replay)) => BaselinePoint {
                        static_infidelity: on_static.infidelity,
                        replay_fidelity: replay.fidelity,
                    },
                    Err(_) => BaselinePoint::FAILED,
                },
            )
            .collect();
        Some(points)
    } else {
        None
    };
    let baseline_record = baseline.as_ref().map(|pts| {
        let ok: Vec<&BaselinePoint> = pts
            .iter()
            .filter(|p| p.replay_fidelity.is_finite())
            .collect();
        BaselineRecord {
            max_replay_fidelity: ok
                .iter()
                .map(|p| p.replay_fidelity)
                .fold(f64::NEG_INFINITY, f64::max),
            min_replay_fidelity: ok
                .iter()
                .map(|p| p.replay_fidelity)
                .fold(f64::INFINITY, f64::min),
            max_static_fidelity: ok
                .iter()
                .map(|p| 1.0 - p.static_infidelity)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    });

    let snapshot = PulseSnapshot {
        schema: PULSE_SCHEMA.into(),
        tool_version: TOOL_VERSION.into(),
        config_hash: crystal.config_hash.clone(),
        crystal_sha256: crystal_sha256.into(),
        modes_sha256: modes_sha256.into(),
        gate: GateRecord {
            pair: [pair.0, pair.1],
            dk_per_um: gc.dk,
            waist_um: gc.waist,
            tau_cycles: opts.tau_cycles,
            duration_us: gc.duration,
            segments: gc.segments,
            temperature_freq_mhz: opts.beam.temperature_mhz,
            scan_lo_over_omega_z: opts.mu_lo,
            scan_hi_over_omega_z: opts.mu_hi,
            scan_steps: opts.mu_steps,
        },
        failed_points: failed,
        best: table.best_solution().map(|s| PulseRecord::new(s, omega_z)),
        static_baseline: baseline_record,
    };
    Ok(GateOutcome {
        snapshot,
        table,
        baseline,
    })
}

/// Writes the CSV, the pulse snapshot and the manifest; fails with
/// `TargetMissed` (after writing) when no point reaches the target.
pub fn run_gate(
    crystal_path: &Path,
    modes_path: &Path,
    csv_path: &Path,
    out: &Path,
    opts: &GateOptions,
) -> CliResult<GateOutcome> {
    let (crystal, crystal_sha) = CrystalSnapshot::load(crystal_path)?;
    let (modes, modes_sha) = ModesSnapshot::load(modes_path)?;
    let mut manifest = Manifest::start("gate", &crystal.config_hash);
    manifest.input(crystal_path, &crystal_sha);
    manifest.input(modes_path, &modes_sha);
    let outcome = design_gate(&crystal, &crystal_sha, &modes, &modes_sha, opts)?;
    write_scan_csv(
        csv_path,
        &outcome.table,
        opts.segments,
        modes.omega_z_rad_per_us,
        outcome.baseline.as_deref(),
    )?;
    manifest.output(csv_path, &file_sha(csv_path)?);
    let sha = write_json(out, &outcome.snapshot)?;
    manifest.output(out, &sha);
    manifest.stage(
        "scan",
        &format!("{} failed points", outcome.snapshot.failed_points),
    );
    let best = outcome.snapshot.best.as_ref().map(|b| b.infidelity);
    let reached = best.is_some_and(|v| v < opts.target);
    manifest.stage("target", if reached { "reached" } else { "missed" });
    manifest.finish(out)?;
    if !reached {
        return Err(CliError::TargetMissed {
            target: opts.target,
            best: best.map_or("none".into(), |v| format!("{v:e}")),
        });
    }
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BudgetOptions {
    pub beam: BeamOptions,
    /// Thermal position spread (μm); defaults to the classical in-plane width
    /// at the beam temperature.
    pub delta_r: Option<f64>,
    /// Transverse centre-of-mass occupation; defaults to Bose–Einstein at the
    /// beam temperature.
    pub nbar: Option<f64>,
}

pub fn build_budget(
    crystal: &CrystalSnapshot,
    crystal_sha256: &str,
    opts: &BudgetOptions,
) -> CliResult<BudgetSnapshot> {
    let units = UnitSystem::<f64>::new();
    let r0: Vec<_> = crystal
        .micromotion
        .r0_um
        .iter()
        .map(|p| nalgebra::Vector2::new(p[0], p[1]))
        .collect();
    let pair = select_pair(&r0, opts.beam.pair)?;
    let d = (r0[pair.0] - r0[pair.1]).norm();
    let mass = crystal.trap.ion_mass;
    let omega = crystal.mathieu.omega;
    let temperature = mhz_to_angular(opts.beam.temperature_mhz);
    let delta_r = opts.delta_r.unwrap_or_else(|| {
        thermal_width(temperature, units.hbar, mass, omega[X], omega[Y]).combined
    });
    let nbar = opts
        .nbar
        .unwrap_or_else(|| 1.0 / ((omega[Z] / temperature).exp() - 1.0));
    let eta = lamb_dicke_parameter(opts.beam.dk, units.hbar, mass, omega[Z]);
    let q = crystal.mathieu.q_planar();
    let b = error_budget(d, opts.beam.waist, delta_r, eta, nbar, q);
    Ok(BudgetSnapshot {
        schema: BUDGET_SCHEMA.into(),
        tool_version: TOOL_VERSION.into(),
        config_hash: crystal.config_hash.clone(),
        crystal_sha256: crystal_sha256.into(),
        pair: [pair.0, pair.1],
        nn_distance_um: d,
        waist_um: opts.beam.waist,
        delta_r_um: delta_r,
        eta_z: eta,
        nbar_z: nbar,
        q,
        crosstalk: b.crosstalk,
        thermal_spread: b.thermal_spread,
        lamb_dicke: b.lamb_dicke,
        micromotion_residual: b.micromotion_residual,
    })
}

pub fn run_budget(
    crystal_path: &Path,
    out: Option<&Path>,
    opts: &BudgetOptions,
) -> CliResult<BudgetSnapshot> {
    let (crystal, sha) = CrystalSnapshot::load(crystal_path)?;
    let snap = build_budget(&crystal, &sha, opts)?;
    if let Some(out) = out {
        let mut manifest = Manifest::start("error-budget", &crystal.config_hash);
        manifest.input(crystal_path, &sha);
        let out_sha = write_json(out, &snap)?;
        manifest.output(out, &out_sha);
        manifest.stage("budget", "ok");
        manifest.finish(out)?;
    }
    Ok(snap)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VerifyScope {
    /// Hill-determinant β against the monodromy oracle on a side×side grid.
    Trap { grid: usize },
    /// Series trajectory against the full equations of motion for `n` ions.
    Micromotion { n: usize },
    /// Closed-form thermal fidelity against truncated Fock sums.
    Fidelity { cases: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub scope: &'static str,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }

    pub fn summary(&self) -> String {
        format!(
            "{} {}: {} cases, max deviation {:.3e} (tolerance {:.0e}); {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.scope,
            self.cases,
            self.max_deviation,
            self.tolerance,
            self.detail
        )
    }
}

/// Runs one oracle comparison; the trajectory check uses `cfg`'s trap.
pub fn verify(scope: VerifyScope, cfg: &RunConfig) -> CliResult<VerifyReport> {
    Ok(match scope {
        VerifyScope::Trap { grid } => {
            let d = trap_exponent_sweep(grid);
            VerifyReport {
                scope: "trap",
                cases: d.cases,
                max_deviation: d.max_abs,
                tolerance: TRAP_TOLERANCE,
                detail: format!("worst at {}", d.worst),
            }
        }
        VerifyScope::Micromotion { n } => {
            let c = trajectory_check(&cfg.trap(), n, &FullEomOptions::default())?;
            VerifyReport {
                scope: "micromotion",
                cases: c.n_ions,
                max_deviation: c.rms,
                tolerance: MICROMOTION_TOLERANCE,
                detail: format!(
                    "harmonic RMS r0/r1/r2 = {:.2e}/{:.2e}/{:.2e} μm, static-only {:.2e} μm, \
                     second-order mean shift {:.2e} μm leaves {:.2e} μm, {} rf periods",
                    c.harmonic_rms[0],
                    c.harmonic_rms[1],
                    c.harmonic_rms[2],
                    c.static_rms,
                    c.second_order_shift,
                    c.second_order_residual,
                    c.periods
                ),
            }
        }
        VerifyScope::Fidelity { cases, seed } => {
            let d = fidelity_sweep(cases, seed)?;
            VerifyReport {
                scope: "fidelity",
                cases: d.cases,
                max_deviation: d.max_abs,
                tolerance: FIDELITY_TOLERANCE,
                detail: format!("worst at {}", d.worst),
            }
        }
    })
}
