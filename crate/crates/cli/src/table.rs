//! Detuning scan CSV. One row per grid point in grid order; a point whose
//! optimisation failed keeps its row with NaN in every result column.

use std::path::Path;

use ioncrystal::gate::ScanTable;
use ioncrystal::units::angular_to_mhz;

use crate::error::{CliError, CliResult};

/// Static-trap pulse at one detuning: its own infidelity and its fidelity when
/// replayed on the micromotion problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselinePoint {
    pub static_infidelity: f64,
    pub replay_fidelity: f64,
}

impl BaselinePoint {
    pub const FAILED: Self = Self {
        static_infidelity: f64::NAN,
        replay_fidelity: f64::NAN,
    };
}

pub fn header(segments: usize, baseline: bool) -> Vec<String> {
    let mut h: Vec<String> = [
        "mu_rad_per_us",
        "mu_over_omega_z",
        "infidelity",
        "max_rabi_2pi_MHz",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    h.extend((1..=segments).map(|i| format!("amp_{i}")));
    if baseline {
        h.push("static_infidelity".into());
        h.push("static_replay_fidelity".into());
    }
    h
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn rows(
    table: &ScanTable<f64>,
    segments: usize,
    omega_z: f64,
    baseline: Option<&[BaselinePoint]>,
) -> Vec<Vec<String>> {
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mu = row.detuning;
            let mut r = vec![num(mu), num(mu / omega_z)];
            match &row.outcome {
                Ok(s) => {
                    r.push(num(s.infidelity));
                    r.push(num(angular_to_mhz(s.max_rabi)));
                    r.extend(s.amplitudes.iter().map(|&x| num(x)));
                }
                Err(_) => r.extend(std::iter::repeat_n(num(f64::NAN), 2 + segments)),
            }
            if let Some(b) = baseline {
                let p = b.get(i).copied().unwrap_or(BaselinePoint::FAILED);
                r.push(num(p.static_infidelity));
                r.push(num(p.replay_fidelity));
            }
            r
        })
        .collect()
}

pub fn write_scan_csv(
    path: &Path,
    table: &ScanTable<f64>,
    segments: usize,
    omega_z: f64,
    baseline: Option<&[BaselinePoint]>,
) -> CliResult<()> {
    let csv_err = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header(segments, baseline.is_some()))
        .map_err(csv_err)?;
    for r in rows(table, segments, omega_z, baseline) {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(CliError::io(path))
}
