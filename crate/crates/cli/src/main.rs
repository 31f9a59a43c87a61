use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ioncrystal::gate::PairSelector;
use ioncrystal_cli::commands::{
    parse_scan, run_budget, run_gate, run_modes, run_relax, verify, BeamOptions, BudgetOptions,
    GateOptions, VerifyScope,
};
use ioncrystal_cli::config::RunConfig;
use ioncrystal_cli::error::{CliError, CliResult};

/// Planar Paul-trap ion crystals: relaxation, micromotion, transverse modes
/// and two-qubit gate design.
#[derive(Parser)]
#[command(name = "ioncrystal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relax the crystal and solve its micromotion; writes a crystal snapshot.
    Relax {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Static and micromotion-averaged transverse modes of a crystal snapshot.
    Modes {
        #[arg(long)]
        crystal: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detuning scan of optimised segmented pulses.
    Gate {
        #[arg(long)]
        crystal: PathBuf,
        #[arg(long)]
        modes: PathBuf,
        /// Scan table.
        #[arg(long)]
        csv: PathBuf,
        /// Best pulse snapshot.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        beam: BeamArgs,
        #[arg(long, default_value_t = 13)]
        segments: usize,
        /// Gate duration in units of 2π/ω_z.
        #[arg(long, default_value_t = 50.0)]
        tau_cycles: f64,
        /// lo:hi:steps with lo and hi as fractions of ω_z.
        #[arg(long, default_value = "0.84:1.01:200")]
        mu_scan: String,
        /// Also replay static-trap-optimal pulses with micromotion.
        #[arg(long)]
        static_baseline: bool,
        /// Exit with code 6 unless some point reaches this infidelity.
        #[arg(long, default_value_t = 1e-3)]
        target: f64,
        /// Worker threads for the scan (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// The four independent gate error estimates.
    ErrorBudget {
        #[arg(long)]
        crystal: PathBuf,
        #[command(flatten)]
        beam: BeamArgs,
        /// Thermal position spread (μm); default: classical width at --temperature.
        #[arg(long)]
        delta_r: Option<f64>,
        /// Centre-of-mass occupation; default: Bose–Einstein at --temperature.
        #[arg(long)]
        nbar: Option<f64>,
        /// Also write the budget as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare an analytic shortcut against its brute-force oracle.
    Verify {
        scope: Scope,
        /// Ions for the micromotion check.
        #[arg(long, default_value_t = 7)]
        n: usize,
        /// Points per side of the (a, q) grid.
        #[arg(long, default_value_t = 41)]
        grid: usize,
        /// Random cases for the fidelity check.
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Trap for the micromotion check (default: the reference trap).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BeamArgs {
    /// center, edge or i,j.
    #[arg(long, default_value = "center")]
    pair: String,
    /// Wave-vector difference Δk (μm⁻¹).
    #[arg(long, default_value_t = 8.0)]
    dk: f64,
    /// Beam waist (μm).
    #[arg(long, default_value_t = 3.0)]
    waist: f64,
    /// Mode temperature as k_BT/h (MHz).
    #[arg(long, default_value_t = 10.0)]
    temperature: f64,
}

impl BeamArgs {
    fn resolve(&self) -> CliResult<BeamOptions> {
        let pair: PairSelector = self.pair.parse()?;
        Ok(BeamOptions {
            pair,
            dk: self.dk,
            waist: self.waist,
            temperature_mhz: self.temperature,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    Trap,
    Micromotion,
    Fidelity,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Relax { config, out } => {
            let s = run_relax(&config, &out)?;
            let amp = s
                .micromotion
                .amplitude_um
                .iter()
                .copied()
                .fold(0.0, f64::max);
            println!(
                "{} ions, a = {:?}, q = {:.6}, {} relaxation steps, {} micromotion iterations, max amplitude {:.4} μm",
                s.n_ions(),
                s.mathieu.a,
                s.mathieu.q_planar(),
                s.relaxation.steps,
                s.micromotion.iterations,
                amp
            );
        }
        Command::Modes { crystal, out } => {
            let s = run_modes(&crystal, &out)?;
            let f = &s.micromotion_modes.frequencies_rad_per_us;
            let (lo, hi) = (f[0], f[f.len() - 1]);
            println!(
                "{} modes in [{:.4}, {:.4}] ω_z, mean |Δω|/2π = {:.4} kHz, RWA bound {:.2e}",
                f.len(),
                lo / s.omega_z_rad_per_us,
                hi / s.omega_z_rad_per_us,
                s.shifts.mean_abs_shift_khz,
                s.rwa.norm_estimate
            );
        }
        Command::Gate {
            crystal,
            modes,
            csv,
            out,
            beam,
            segments,
            tau_cycles,
            mu_scan,
            static_baseline,
            target,
            jobs,
        } => {
            let (mu_lo, mu_hi, mu_steps) = parse_scan(&mu_scan)?;
            let opts = GateOptions {
                beam: beam.resolve()?,
                segments,
                tau_cycles,
                mu_lo,
                mu_hi,
                mu_steps,
                static_baseline,
                target,
            };
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(j) = jobs {
                pool = pool.num_threads(j);
            }
            let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
            let outcome = pool.install(|| run_gate(&crystal, &modes, &csv, &out, &opts))?;
            if let Some(b) = &outcome.snapshot.best {
                println!(
                    "best μ = {:.6} ω_z: δF = {:.3e}, max Rabi/2π = {:.3} MHz",
                    b.mu_over_omega_z, b.infidelity, b.max_rabi_2pi_mhz
                );
            }
            if let Some(b) = &outcome.snapshot.static_baseline {
                println!(
                    "static baseline replay fidelity ≤ {:.4}",
                    b.max_replay_fidelity
                );
            }
        }
        Command::ErrorBudget {
            crystal,
            beam,
            delta_r,
            nbar,
            out,
        } => {
            let opts = BudgetOptions {
                beam: beam.resolve()?,
                delta_r,
                nbar,
            };
            println!("{}", run_budget(&crystal, out.as_deref(), &opts)?.report());
        }
        Command::Verify {
            scope,
            n,
            grid,
            cases,
            seed,
            config,
        } => {
            let cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::reference(),
            };
            let scope = match scope {
                Scope::Trap => VerifyScope::Trap { grid },
                Scope::Micromotion => VerifyScope::Micromotion { n },
                Scope::Fidelity => VerifyScope::Fidelity { cases, seed },
            };
            let report = verify(scope, &cfg)?;
            println!("{}", report.summary());
            if !report.passed() {
                return Err(CliError::Verify(format!(
                    "{} deviation {:e} exceeds {:e}",
                    report.scope, report.max_deviation, report.tolerance
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
