//! Built-in scenario presets: the dose-finding simulation study (type I
//! error, power, and sample-size tables plus allocation trajectories) and the
//! binary-endpoint case study with its null-rate scan.

use std::fmt;
use std::str::FromStr;

use adaptrand_core::{
    AnalysisSpec, DbcdTarget, DesignConfig, EndpointSpec, Multiplicity, RabrMode,
    RandomizationSpec, TestKind,
};

use crate::error::{CliError, Result};

/// Names accepted by `run --preset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Table1,
    Table2,
    Table3,
    Figure1,
    CaseStudy,
    Figure2,
}

pub const PRESET_NAMES: [&str; 6] = [
    "table1",
    "table2",
    "table3",
    "figure1",
    "case-study",
    "figure2",
];

impl FromStr for PresetName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(PresetName::Table1),
            "table2" => Ok(PresetName::Table2),
            "table3" => Ok(PresetName::Table3),
            "figure1" => Ok(PresetName::Figure1),
            "case-study" => Ok(PresetName::CaseStudy),
            "figure2" => Ok(PresetName::Figure2),
            other => Err(CliError::Validation(format!(
                "unknown preset {other:?} (expected one of {PRESET_NAMES:?})"
            ))),
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PresetName::Table1 => "table1",
            PresetName::Table2 => "table2",
            PresetName::Table3 => "table3",
            PresetName::Figure1 => "figure1",
            PresetName::CaseStudy => "case-study",
            PresetName::Figure2 => "figure2",
        };
        f.write_str(name)
    }
}

/// One simulated design within a preset, labeled for report rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetRun {
    pub scenario: String,
    pub method: String,
    pub cfg: DesignConfig,
}

/// Dose-response mean vectors, placebo first. Scenario A is a monotone
/// gradient, B has two near-best doses, C has two tied best doses.
const MU_A: [f64; 4] = [0.43, 0.68, 0.93, 1.2];
const MU_B: [f64; 4] = [0.43, 1.0, 1.15, 1.2];
const MU_C: [f64; 4] = [0.43, 1.0, 1.2, 1.2];

/// Randomization blocks studied for the continuous endpoint. (8,4,4,4)
/// degenerates to fixed equal allocation; (9,9,1,1) is the most aggressive.
const BLOCKS: [[u32; 4]; 5] = [
    [8, 4, 4, 4],
    [8, 5, 4, 3],
    [8, 7, 4, 1],
    [8, 5, 5, 2],
    [9, 9, 1, 1],
];

/// Response rates for the binary case study, placebo first.
const CASE_STUDY_RATES: [f64; 3] = [0.151, 0.282, 0.400];

fn normal_analysis() -> AnalysisSpec {
    AnalysisSpec {
        alpha: 0.025,
        test: TestKind::ZKnownVariance,
        multiplicity: Multiplicity::DunnettStepDown,
    }
}

fn normal_config(
    means: [f64; 4],
    randomization: RandomizationSpec,
    burn_in: u32,
    total_n: u32,
) -> DesignConfig {
    DesignConfig {
        arms: 4,
        endpoint: EndpointSpec::Normal {
            means: means.to_vec(),
            sigma: 1.0,
        },
        randomization,
        burn_in,
        total_n,
        analysis: normal_analysis(),
    }
    .validate()
    .expect("preset config must validate")
}

fn binary_config(rates: [f64; 3], randomization: RandomizationSpec) -> DesignConfig {
    DesignConfig {
        arms: 3,
        endpoint: EndpointSpec::Binary {
            rates: rates.to_vec(),
        },
        randomization,
        burn_in: 90,
        total_n: 180,
        analysis: AnalysisSpec {
            alpha: 0.025,
            test: TestKind::Proportion,
            multiplicity: Multiplicity::Bonferroni,
        },
    }
    .validate()
    .expect("preset config must validate")
}

fn rabr(block: &[u32]) -> RandomizationSpec {
    RandomizationSpec::Rabr {
        block: block.to_vec(),
        mode: RabrMode::PerSubject,
    }
}

fn dbcd_phi(lambda: f64) -> RandomizationSpec {
    RandomizationSpec::Dbcd {
        eta: 2.0,
        target: DbcdTarget::PhiPower { lambda },
    }
}

fn block_label(block: &[u32]) -> String {
    let digits: Vec<String> = block.iter().map(|r| r.to_string()).collect();
    format!("rabr-{}", digits.join("-"))
}

/// Type I error table: every block, desk and small sample sizes, two null
/// response levels, all-equal means.
fn expand_table1() -> Vec<PresetRun> {
    let mut runs = Vec::new();
    for &(total_n, burn_in) in &[(120u32, 60u32), (40, 20)] {
        for &mu0 in &[0.0, 1.0] {
            for block in &BLOCKS {
                runs.push(PresetRun {
                    scenario: format!("null-n{total_n}-mu{mu0:.0}"),
                    method: block_label(block),
                    cfg: normal_config([mu0; 4], rabr(block), burn_in, total_n),
                });
            }
        }
    }
    runs
}

/// Power and sample-size comparison: three dose-response scenarios, each
/// under the aggressive block, fixed equal allocation, and three biased-coin
/// comparators. Power and average sizes come from the same runs, so the
/// power table and the size table share this expansion.
fn expand_power_comparison() -> Vec<PresetRun> {
    let scenarios: [(&str, [f64; 4]); 3] = [("mu-a", MU_A), ("mu-b", MU_B), ("mu-c", MU_C)];
    let methods: [(&str, RandomizationSpec); 5] = [
        ("rabr-9-9-1-1", rabr(&[9, 9, 1, 1])),
        (
            "fixed-equal",
            RandomizationSpec::Fixed {
                probs: vec![0.25; 4],
            },
        ),
        ("dbcd-lambda-neg2", dbcd_phi(-2.0)),
        ("dbcd-lambda-0", dbcd_phi(0.0)),
        ("dbcd-lambda-2", dbcd_phi(2.0)),
    ];
    let mut runs = Vec::new();
    for (scenario, means) in &scenarios {
        for (method, randomization) in &methods {
            runs.push(PresetRun {
                scenario: scenario.to_string(),
                method: method.to_string(),
                cfg: normal_config(*means, randomization.clone(), 60, 120),
            });
        }
    }
    runs
}

/// Allocation-trajectory comparison: adaptive block versus the strongest
/// biased-coin comparator on each scenario.
fn expand_figure1() -> Vec<PresetRun> {
    let scenarios: [(&str, [f64; 4]); 3] = [("mu-a", MU_A), ("mu-b", MU_B), ("mu-c", MU_C)];
    let mut runs = Vec::new();
    for (scenario, means) in &scenarios {
        for (method, randomization) in [
            ("rabr-9-9-1-1", rabr(&[9, 9, 1, 1])),
            ("dbcd-lambda-2", dbcd_phi(2.0)),
        ] {
            runs.push(PresetRun {
                scenario: scenario.to_string(),
                method: method.to_string(),
                cfg: normal_config(*means, randomization, 60, 120),
            });
        }
    }
    runs
}

/// Binary-endpoint case study: two active doses against placebo.
fn expand_case_study() -> Vec<PresetRun> {
    let methods: [(&str, RandomizationSpec); 3] = [
        ("rabr-7-7-1", rabr(&[7, 7, 1])),
        (
            "fixed-equal",
            RandomizationSpec::Fixed {
                probs: vec![1.0 / 3.0; 3],
            },
        ),
        (
            "dbcd-neyman",
            RandomizationSpec::Dbcd {
                eta: 2.0,
                target: DbcdTarget::Neyman,
            },
        ),
    ];
    methods
        .into_iter()
        .map(|(method, randomization)| PresetRun {
            scenario: "case-study".to_string(),
            method: method.to_string(),
            cfg: binary_config(CASE_STUDY_RATES, randomization),
        })
        .collect()
}

/// The 19-point grid of common null response rates scanned by the
/// binary-endpoint error study: 0.05, 0.10, ..., 0.95.
pub fn null_rate_grid() -> Vec<f64> {
    (1..=19).map(|k| f64::from(k) * 0.05).collect()
}

/// Null-rate scan: the case-study adaptive block design with all arms at a
/// common response rate, one run per grid point.
fn expand_figure2() -> Vec<PresetRun> {
    null_rate_grid()
        .into_iter()
        .map(|p| PresetRun {
            scenario: format!("null-rate-{p:.2}"),
            method: "rabr-7-7-1".to_string(),
            cfg: binary_config([p, p, p], rabr(&[7, 7, 1])),
        })
        .collect()
}

/// Expand a preset into its labeled runs.
pub fn expand(name: PresetName) -> Vec<PresetRun> {
    match name {
        PresetName::Table1 => expand_table1(),
        PresetName::Table2 | PresetName::Table3 => expand_power_comparison(),
        PresetName::Figure1 => expand_figure1(),
        PresetName::CaseStudy => expand_case_study(),
        PresetName::Figure2 => expand_figure2(),
    }
}
