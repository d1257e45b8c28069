//! Command execution: expand the requested runs, drive the Monte Carlo
//! engine, and emit CSVs plus a reproducibility manifest, or run the
//! numerical verification checks and summarize them as PASS/FAIL lines.

use std::path::{Path, PathBuf};
use std::time::Instant;

use adaptrand_core::{
    lemma1_monotonicity_check, lemma1_q, lemma1_q_mc_oracle, theorem1_rejection_bound,
    theorem3_rejection_bound, w1_ordering_sweep, DesignConfig, Lemma1Query, RandomizationSpec,
    RngStream, TheoremQuery,
};
use rand::Rng;

use crate::config::parse_config;
use crate::error::{CliError, Result};
use crate::presets::{expand, null_rate_grid, PresetName, PresetRun};
use crate::report::{
    config_digest, manifest_json, null_scan_csv, oc_report_csv, trajectories_csv, RunManifest,
    RunRecord,
};

/// Where the runs come from: a built-in preset or a configuration file.
#[derive(Debug, Clone)]
pub enum RunSource {
    Preset(PresetName),
    ConfigFile(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub source: RunSource,
    pub iterations: u64,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
}

fn method_label(spec: &RandomizationSpec) -> String {
    match spec {
        RandomizationSpec::Fixed { .. } => "fixed".to_string(),
        RandomizationSpec::Rabr { block, .. } => {
            let digits: Vec<String> = block.iter().map(|r| r.to_string()).collect();
            format!("rabr-{}", digits.join("-"))
        }
        RandomizationSpec::Dbcd { target, .. } => match target {
            adaptrand_core::DbcdTarget::PhiPower { .. } => "dbcd-phi-power".to_string(),
            adaptrand_core::DbcdTarget::Neyman => "dbcd-neyman".to_string(),
        },
    }
}

fn core_error(e: adaptrand_core::Error) -> CliError {
    match e {
        adaptrand_core::Error::InvalidConfig(_) => CliError::Validation(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Run every design in the requested source and write the report files.
/// Returns the paths written.
pub fn execute_run(opts: &RunOptions) -> Result<Vec<PathBuf>> {
    if opts.iterations == 0 {
        return Err(CliError::Validation(
            "iterations: must be at least 1".to_string(),
        ));
    }
    let started = Instant::now();
    let (runs, preset, config_path) = match &opts.source {
        RunSource::Preset(name) => (expand(*name), Some(name.to_string()), None),
        RunSource::ConfigFile(path) => {
            let cfg = parse_config(path)?;
            let run = PresetRun {
                scenario: "config".to_string(),
                method: method_label(&cfg.randomization),
                cfg,
            };
            (vec![run], None, Some(path.display().to_string()))
        }
    };
    let configs: Vec<DesignConfig> = runs.iter().map(|r| r.cfg.clone()).collect();
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| {
        CliError::Runtime(format!("cannot create {}: {e}", opts.out_dir.display()))
    })?;

    let mut records = Vec::with_capacity(runs.len());
    for run in runs {
        let report = adaptrand_core::run_oc(&run.cfg, opts.iterations, opts.seed, opts.workers)
            .map_err(core_error)?;
        records.push(RunRecord {
            scenario: run.scenario,
            method: run.method,
            report,
        });
    }

    let is_scan = matches!(opts.source, RunSource::Preset(PresetName::Figure2));
    let mut written = vec![
        write_file(
            &opts.out_dir,
            "oc_report.csv",
            &oc_report_csv(&records, opts.iterations, opts.seed),
        )?,
        write_file(&opts.out_dir, "trajectories.csv", &trajectories_csv(&records))?,
    ];
    let grid = if is_scan {
        let grid = null_rate_grid();
        written.push(write_file(
            &opts.out_dir,
            "null_scan.csv",
            &null_scan_csv(&grid, &records),
        )?);
        Some(grid)
    } else {
        None
    };

    let manifest = RunManifest {
        command: "run".to_string(),
        preset,
        config_path,
        config_digest: config_digest(&configs),
        iterations: opts.iterations,
        master_seed: opts.seed,
        workers: opts.workers,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        null_rate_grid: grid,
        outputs: written
            .iter()
            .map(|p| {
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default()
            })
            .collect(),
    };
    written.push(write_file(
        &opts.out_dir,
        "run_manifest.json",
        &manifest_json(&manifest),
    )?);
    Ok(written)
}

/// Verification subcommands with their tuning knobs.
#[derive(Debug, Clone)]
pub enum VerifyArgs {
    Lemma1 {
        c: f64,
        c_prime: f64,
        grid: usize,
        draws: u64,
        seed: u64,
    },
    Theorem1 {
        sweep: u64,
        seed: u64,
    },
    Theorem3 {
        draws: u64,
        seed: u64,
    },
    W1Ordering {
        samples: u64,
        seed: u64,
    },
}

/// PASS/FAIL lines for the terminal plus the combined verdict.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub lines: Vec<String>,
    pub pass: bool,
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Interior grid of weights 1/(n+1), ..., n/(n+1).
pub fn weight_grid(points: usize) -> Vec<f64> {
    (1..=points)
        .map(|k| k as f64 / (points + 1) as f64)
        .collect()
}

/// Outcome of the randomized two-arm bound sweep: the worst excess over the
/// level among ordered-weight tuples, and the worst departure from the level
/// when both stage-2 scalings are equal.
#[derive(Debug, Clone)]
pub struct Theorem1Sweep {
    pub tuples: u64,
    pub max_excess: f64,
    pub max_equality_gap: f64,
    pub all_bounded: bool,
    pub all_equal_at_alpha: bool,
}

/// Evaluates the rejection-probability bound on `count` random valid tuples
/// (stage-1 sizes, placebo stage-2 block share, ordered scalings), and the
/// exact-level identity on each tuple's equal-scaling variant.
pub fn theorem1_sweep(count: u64, master_seed: u64) -> Result<Theorem1Sweep> {
    const TOLERANCE: f64 = 1e-6;
    let mut rng = RngStream::new(master_seed, 0).rng();
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_equality_gap = f64::NEG_INFINITY;
    for _ in 0..count {
        let n1: u32 = rng.random_range(5..=60);
        let n1_competitor: u32 = rng.random_range(5..=60);
        let n2_placebo: u32 = rng.random_range(2..=30);
        let n0: u32 = rng.random_range(10..=120);
        let beta2: f64 = rng.random_range(0.0..2.0);
        let beta1: f64 = beta2 + rng.random_range(0.0..2.0);
        let mu0: f64 = rng.random_range(-1.0..1.0);
        let query = TheoremQuery {
            n1_per_arm: vec![n1, n1_competitor],
            n2_placebo,
            betas: vec![beta1, beta2],
            n0,
            alpha: 0.025,
            mu0,
        };
        let bound = theorem1_rejection_bound(&query).map_err(core_error)?;
        max_excess = max_excess.max(bound.probability - bound.alpha);

        let equal = TheoremQuery {
            betas: vec![beta2, beta2],
            ..query
        };
        let at_level = theorem1_rejection_bound(&equal).map_err(core_error)?;
        max_equality_gap = max_equality_gap.max((at_level.probability - at_level.alpha).abs());
    }
    Ok(Theorem1Sweep {
        tuples: count,
        max_excess,
        max_equality_gap,
        all_bounded: max_excess <= TOLERANCE,
        all_equal_at_alpha: max_equality_gap <= TOLERANCE,
    })
}

fn verify_lemma1(c: f64, c_prime: f64, grid: usize, draws: u64, seed: u64) -> Result<VerifyOutcome> {
    if grid == 0 {
        return Err(CliError::Validation("grid: must be at least 1".to_string()));
    }
    let weights = weight_grid(grid);
    let report = lemma1_monotonicity_check(c, c_prime, &weights).map_err(core_error)?;
    let mut lines = vec![format!(
        "lemma1 monotonicity c={c} c_prime={c_prime} grid={grid}: max_violation={:.3e} tolerance={:.1e} {}",
        report.max_violation,
        report.tolerance,
        verdict(report.pass)
    )];
    let mut pass = report.pass;
    if draws > 0 {
        let oracle = lemma1_q_mc_oracle(c, c_prime, &weights, draws, seed).map_err(core_error)?;
        let mut max_gap = 0.0f64;
        let mut max_allowed = 0.0f64;
        let mut agree = true;
        for (&w1, estimate) in weights.iter().zip(&oracle) {
            let quad = lemma1_q(&Lemma1Query { w1, c, c_prime }).map_err(core_error)?;
            let gap = (quad - estimate.value).abs();
            max_gap = max_gap.max(gap);
            max_allowed = max_allowed.max(3.0 * estimate.se);
            agree &= gap <= 3.0 * estimate.se;
        }
        lines.push(format!(
            "lemma1 mc agreement draws={draws} seed={seed}: max_gap={max_gap:.3e} max_3se={max_allowed:.3e} {}",
            verdict(agree)
        ));
        pass &= agree;
    }
    Ok(VerifyOutcome { lines, pass })
}

fn verify_theorem1(sweep: u64, seed: u64) -> Result<VerifyOutcome> {
    if sweep == 0 {
        return Err(CliError::Validation("sweep: must be at least 1".to_string()));
    }
    let result = theorem1_sweep(sweep, seed)?;
    let lines = vec![
        format!(
            "theorem1 bound sweep tuples={} seed={seed}: max_excess={:.3e} tolerance=1.0e-6 {}",
            result.tuples,
            result.max_excess,
            verdict(result.all_bounded)
        ),
        format!(
            "theorem1 equal-scaling level: max_gap={:.3e} tolerance=1.0e-6 {}",
            result.max_equality_gap,
            verdict(result.all_equal_at_alpha)
        ),
    ];
    Ok(VerifyOutcome {
        pass: result.all_bounded && result.all_equal_at_alpha,
        lines,
    })
}

fn verify_theorem3(draws: u64, seed: u64) -> Result<VerifyOutcome> {
    // Default query shape: three equal stage-1 arms and the steep
    // case-study-like block shares (7/8, 4/8, 1/8).
    let query = TheoremQuery {
        n1_per_arm: vec![15, 15, 15],
        n2_placebo: 8,
        betas: vec![0.875, 0.5, 0.125],
        n0: 39,
        alpha: 0.025,
        mu0: 0.0,
    };
    let report = theorem3_rejection_bound(&query, draws, seed).map_err(core_error)?;
    let lines = vec![
        format!(
            "theorem3 bound draws={draws} seed={seed}: probability={:.6} alpha={:.6} mc_se={:.2e} {}",
            report.probability,
            report.alpha,
            report.mc_se,
            verdict(report.bound_ok)
        ),
        format!(
            "theorem3 middle-selection term: mc={:.6} quadrature={:.6} mc_se={:.2e} {}",
            report.middle_term_mc,
            report.middle_term_quadrature,
            report.middle_term_mc_se,
            verdict(report.middle_term_ok)
        ),
    ];
    Ok(VerifyOutcome {
        pass: report.bound_ok && report.middle_term_ok,
        lines,
    })
}

fn verify_w1_ordering(samples: u64, seed: u64) -> Result<VerifyOutcome> {
    if samples == 0 {
        return Err(CliError::Validation(
            "samples: must be at least 1".to_string(),
        ));
    }
    let report = w1_ordering_sweep(samples, seed);
    let lines = vec![format!(
        "w1-ordering sweep samples={} seed={seed}: max_weight_gap={:.3e} {}",
        report.samples,
        report.max_weight_gap,
        verdict(report.all_hold)
    )];
    Ok(VerifyOutcome {
        pass: report.all_hold,
        lines,
    })
}

/// Run one verification subcommand and collect its report lines.
pub fn execute_verify(args: &VerifyArgs) -> Result<VerifyOutcome> {
    match *args {
        VerifyArgs::Lemma1 {
            c,
            c_prime,
            grid,
            draws,
            seed,
        } => verify_lemma1(c, c_prime, grid, draws, seed),
        VerifyArgs::Theorem1 { sweep, seed } => verify_theorem1(sweep, seed),
        VerifyArgs::Theorem3 { draws, seed } => verify_theorem3(draws, seed),
        VerifyArgs::W1Ordering { samples, seed } => verify_w1_ordering(samples, seed),
    }
}
