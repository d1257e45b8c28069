//! Deterministic report emission. All CSVs are comma-separated UTF-8 with a
//! header row, '.' as the decimal separator, and rates printed to 6 decimal
//! places with a paired standard-error column, so re-running a seed
//! regenerates byte-identical files.

use adaptrand_core::{DesignConfig, OCReport};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// One completed run with its report-row labels.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub scenario: String,
    pub method: String,
    pub report: OCReport,
}

fn rate(x: f64) -> String {
    format!("{x:.6}")
}

fn size(x: f64) -> String {
    format!("{x:.4}")
}

fn max_actives(records: &[RunRecord]) -> usize {
    records.iter().map(|r| r.report.arms - 1).max().unwrap_or(0)
}

/// Operating-characteristic table: one row per run, one column pair
/// (estimate, MC standard error) per rate, dose columns padded with blanks
/// when a run has fewer active arms than the widest one.
pub fn oc_report_csv(records: &[RunRecord], iterations: u64, seed: u64) -> String {
    let actives = max_actives(records);
    let mut header = vec![
        "scenario".to_string(),
        "method".to_string(),
        "iterations".to_string(),
        "seed".to_string(),
    ];
    for stat in ["select_confirm", "raw_reject", "adj_reject"] {
        for d in 1..=actives {
            header.push(format!("{stat}_d{d}"));
            header.push(format!("{stat}_d{d}_se"));
        }
    }
    header.push("overall_power".to_string());
    header.push("overall_power_se".to_string());
    header.push("avg_n_placebo".to_string());
    for s in 1..=actives {
        header.push(format!("avg_n_s{s}"));
    }

    let mut out = header.join(",");
    out.push('\n');
    for rec in records {
        let r = &rec.report;
        let mut row = vec![
            rec.scenario.clone(),
            rec.method.clone(),
            iterations.to_string(),
            seed.to_string(),
        ];
        let pairs: [(&[f64], &[f64]); 3] = [
            (&r.select_and_confirm, &r.select_and_confirm_se),
            (&r.raw_rejection, &r.raw_rejection_se),
            (&r.adjusted_rejection, &r.adjusted_rejection_se),
        ];
        for (values, errors) in pairs {
            for d in 0..actives {
                match values.get(d) {
                    Some(&v) => {
                        row.push(rate(v));
                        row.push(rate(errors[d]));
                    }
                    None => {
                        row.push(String::new());
                        row.push(String::new());
                    }
                }
            }
        }
        row.push(rate(r.overall_power));
        row.push(rate(r.overall_power_se));
        row.push(size(r.avg_n_by_rank[0]));
        for s in 1..=actives {
            row.push(
                r.avg_n_by_rank
                    .get(s)
                    .map(|&v| size(v))
                    .unwrap_or_default(),
            );
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Allocation trajectories in long format: one row per run, adaptive
/// checkpoint, and final-analysis rank (placebo, then best to worst).
pub fn trajectories_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("scenario,method,checkpoint,rank,mean_proportion\n");
    for rec in records {
        for (t, row) in rec.report.trajectory_by_rank.iter().enumerate() {
            for (k, &p) in row.iter().enumerate() {
                let label = if k == 0 {
                    "placebo".to_string()
                } else {
                    format!("s{k}")
                };
                out.push_str(&format!(
                    "{},{},{},{label},{}\n",
                    rec.scenario,
                    rec.method,
                    t + 1,
                    rate(p)
                ));
            }
        }
    }
    out
}

/// Null-rate scan table: one row per grid point with each dose's pairwise
/// rejection rate and the adjusted familywise rate, each with its MC
/// standard error.
pub fn null_scan_csv(grid: &[f64], records: &[RunRecord]) -> String {
    let actives = max_actives(records);
    let mut header = vec!["null_rate".to_string()];
    for d in 1..=actives {
        header.push(format!("pairwise_d{d}"));
        header.push(format!("pairwise_d{d}_se"));
    }
    header.push("fwer".to_string());
    header.push("fwer_se".to_string());

    let mut out = header.join(",");
    out.push('\n');
    for (p0, rec) in grid.iter().zip(records) {
        let r = &rec.report;
        let mut row = vec![format!("{p0:.2}")];
        for d in 0..actives {
            row.push(rate(r.raw_rejection[d]));
            row.push(rate(r.raw_rejection_se[d]));
        }
        row.push(rate(r.overall_power));
        row.push(rate(r.overall_power_se));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Everything needed to reproduce a run byte for byte, plus bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_path: Option<String>,
    pub config_digest: String,
    pub iterations: u64,
    pub master_seed: u64,
    pub workers: usize,
    pub wall_time_seconds: f64,
    /// The null-rate grid is a reporting choice, not a quantity from the
    /// underlying designs, so the manifest records it explicitly.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_rate_grid: Option<Vec<f64>>,
    pub outputs: Vec<String>,
}

/// SHA-256 over the canonical JSON serialization of the expanded configs.
pub fn config_digest(configs: &[DesignConfig]) -> String {
    let text = serde_json::to_string(configs).expect("configs serialize");
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}

pub fn manifest_json(manifest: &RunManifest) -> String {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    text
}
