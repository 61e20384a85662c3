//! Result-file writers: coverage CSV, diagnostics JSON, and the meta echo.
//!
//! Files are written to a temporary sibling and renamed into place, so a
//! failed run never leaves a partial file. Floating-point CSV fields use
//! 17 significant digits, enough to reproduce every f64 bit-exactly.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::{AuditReport, CoverageReport, DiagnosticsReport, ExperimentConfig, SimulationResult};

/// 17-significant-digit scientific form; round-trips any finite f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write through a temporary file and rename into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .ok_or_else(|| Error::Config(format!("output path {} has no parent", path.display())))?;
    std::fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("output path {} has no file name", path.display())))?
        .to_string_lossy()
        .into_owned();
    let tmp = dir.join(format!(".{file_name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// coverage.csv: one row per successful replicate.
pub fn coverage_csv(report: &CoverageReport, k: usize) -> String {
    let mut out = String::from("replicate,seed,hit,r_n,diameter");
    for i in 1..=k {
        out.push_str(&format!(",psi_hat_{i}"));
    }
    for i in 1..=k {
        out.push_str(&format!(",psi_true_{i}"));
    }
    out.push('\n');
    for rec in &report.records {
        out.push_str(&format!(
            "{},{},{},{},{}",
            rec.replicate,
            rec.seed,
            if rec.hit { 1 } else { 0 },
            fmt_f64(rec.r_n),
            fmt_f64(rec.diameter)
        ));
        for v in &rec.psi_hat {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        for v in &rec.psi_true {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_coverage_csv(path: &Path, report: &CoverageReport, k: usize) -> Result<()> {
    atomic_write(path, coverage_csv(report, k).as_bytes())
}

/// meta.json payload: the full config echo (structured and as canonical
/// config text), versions, audit, and wall time.
#[derive(Serialize)]
pub struct Meta<'a> {
    pub config: &'a ExperimentConfig,
    pub config_text: String,
    pub version: &'a str,
    pub audit: &'a AuditReport,
    pub coverage_summary: Option<MetaCoverage>,
    pub failures: Vec<(usize, String)>,
    pub wall_time_secs: f64,
}

#[derive(Serialize)]
pub struct MetaCoverage {
    pub coverage: f64,
    pub binomial_se: f64,
    pub mean_diameter: f64,
    pub replicates_ok: usize,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// diagnostics.json payload.
#[derive(Serialize)]
pub struct DiagnosticsFile<'a> {
    pub diagnostics: &'a DiagnosticsReport,
    pub psi_n: Vec<f64>,
    pub psi_hat: Vec<f64>,
    pub acceptance_rate: f64,
    pub beta_used: f64,
    pub audit: &'a AuditReport,
}

/// ellipsoid.json payload for the simulate subcommand.
#[derive(Serialize)]
pub struct EllipsoidFile<'a> {
    pub result: SimulateSummary<'a>,
    pub audit: &'a AuditReport,
}

#[derive(Serialize)]
pub struct SimulateSummary<'a> {
    pub replicate_seed: u64,
    pub psi_hat: &'a [f64],
    pub psi_true: &'a [f64],
    pub r_n: f64,
    pub diameter: f64,
    pub contains_truth: bool,
    pub degenerate: bool,
    pub acceptance_rate: f64,
    pub beta_used: f64,
}

impl<'a> SimulateSummary<'a> {
    pub fn new(sim: &'a SimulationResult) -> SimulateSummary<'a> {
        SimulateSummary {
            replicate_seed: sim.record.seed,
            psi_hat: &sim.record.psi_hat,
            psi_true: &sim.record.psi_true,
            r_n: sim.record.r_n,
            diameter: sim.record.diameter,
            contains_truth: sim.record.hit,
            degenerate: sim.degenerate,
            acceptance_rate: sim.acceptance_rate,
            beta_used: sim.beta_used,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_f64_round_trips_bits() {
        for x in [0.1, 1.0 / 3.0, 2.5e-300, -7.123456789012345e40, 0.0] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write(&path, b"one").unwrap();
        atomic_write(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        // no stray temp files
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn coverage_csv_layout() {
        let report = CoverageReport {
            records: vec![crate::harness::ReplicateRecord {
                replicate: 0,
                seed: 42,
                hit: true,
                r_n: 2.5,
                diameter: 1.25,
                psi_hat: vec![0.5, -0.5],
                psi_true: vec![0.25, 0.75],
            }],
            failures: vec![],
            coverage: 1.0,
            binomial_se: 0.0,
            mean_diameter: 1.25,
        };
        let csv = coverage_csv(&report, 2);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "replicate,seed,hit,r_n,diameter,psi_hat_1,psi_hat_2,psi_true_1,psi_true_2"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("0,42,1,"));
        assert_eq!(row.split(',').count(), 9);
    }
}
