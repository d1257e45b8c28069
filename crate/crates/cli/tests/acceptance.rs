//! Acceptance gate: nine checks covering reference-table reproduction, the
//! null-rate scan, the analytical verification routines, the property
//! suites, and the degenerate-block equivalence. Each test prints exactly
//! one "ACCEPTANCE n ... PASS/FAIL" line (visible with --nocapture; the
//! assertion carries the same verdict either way).

use std::sync::OnceLock;

use adaptrand_cli::{expand, theorem1_sweep, weight_grid, PresetName};
use adaptrand_core::multiplicity::{dunnett_single_step_adjust, dunnett_step_down_adjust};
use adaptrand_core::randomization::{
    dbcd_allocation_probability, rabr_probabilities, rank_arms,
};
use adaptrand_core::statistics::{chw_statistic, weight_w1, z_components, z_statistic};
use adaptrand_core::{
    lemma1_monotonicity_check, lemma1_q, lemma1_q_mc_oracle, run_oc, w1_ordering_sweep,
    AnalysisSpec, ControlArm, DesignConfig, EndpointSpec, Lemma1Query, Multiplicity, OCReport,
    RandomizationSpec, RngStream, StageSplit, TestKind,
};
use rand::Rng;

const SEED: u64 = 20240815;
const FULL_SCALE: u64 = 100_000;
const DESK_SCALE: u64 = 10_000;

/// Collects sub-check failures and prints the single verdict line.
struct Criterion {
    number: u32,
    title: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    fn new(number: u32, title: &'static str) -> Self {
        Criterion {
            number,
            title,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, label: &str, ok: bool, detail: String) {
        if !ok {
            self.failures.push(format!("{label}: {detail}"));
        }
    }

    fn finish(self) {
        let verdict = if self.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        println!("ACCEPTANCE {} {}: {verdict}", self.number, self.title);
        assert!(
            self.failures.is_empty(),
            "ACCEPTANCE {} {} failed:\n{}",
            self.number,
            self.title,
            self.failures.join("\n")
        );
    }
}

fn preset_cfg(preset: PresetName, scenario: &str, method: &str) -> DesignConfig {
    expand(preset)
        .into_iter()
        .find(|r| r.scenario == scenario && r.method == method)
        .unwrap_or_else(|| panic!("no {preset:?} run {scenario}/{method}"))
        .cfg
}

fn full_run(cfg: &DesignConfig) -> OCReport {
    run_oc(cfg, FULL_SCALE, SEED, 0).expect("simulation runs")
}

/// The aggressive-block run on the monotone dose-response scenario is shared
/// by the power check and the sample-size check.
fn shared_rabr_gradient() -> &'static OCReport {
    static REPORT: OnceLock<OCReport> = OnceLock::new();
    REPORT.get_or_init(|| full_run(&preset_cfg(PresetName::Table2, "mu-a", "rabr-9-9-1-1")))
}

#[test]
fn acceptance_1_type_i_error_reproduction() {
    let mut c = Criterion::new(1, "type I error of the adaptive block design");
    let cfg = preset_cfg(PresetName::Table1, "null-n120-mu0", "rabr-8-5-4-3");

    let desk = run_oc(&cfg, DESK_SCALE, SEED, 0).unwrap();
    c.check(
        "desk-scale familywise error near the reference 2.45%",
        (desk.overall_power - 0.0245).abs() <= 0.005,
        format!("{:.4} vs 0.0245 +- 0.0050", desk.overall_power),
    );
    c.check(
        "desk-scale familywise error within the nominal envelope",
        desk.overall_power <= 0.025 + 3.0 * desk.overall_power_se,
        format!(
            "{:.4} > 0.025 + 3 * {:.4}",
            desk.overall_power, desk.overall_power_se
        ),
    );

    let full = full_run(&cfg);
    c.check(
        "full-scale familywise error within 0.15pp of 2.45%",
        (full.overall_power - 0.0245).abs() <= 0.0015,
        format!("{:.4} vs 0.0245 +- 0.0015", full.overall_power),
    );
    c.finish();
}

#[test]
fn acceptance_2_power_reproduction() {
    let mut c = Criterion::new(2, "power of the aggressive block vs fixed allocation");
    let rabr = shared_rabr_gradient();
    c.check(
        "adaptive overall power within 2pp of 83.63%",
        (rabr.overall_power - 0.8363).abs() <= 0.02,
        format!("{:.4} vs 0.8363 +- 0.02", rabr.overall_power),
    );
    c.check(
        "top-dose select-and-confirm within 2pp of 70.26%",
        (rabr.select_and_confirm[2] - 0.7026).abs() <= 0.02,
        format!("{:.4} vs 0.7026 +- 0.02", rabr.select_and_confirm[2]),
    );

    let fixed = full_run(&preset_cfg(PresetName::Table2, "mu-a", "fixed-equal"));
    c.check(
        "fixed-allocation overall power within 1pp of 75.61%",
        (fixed.overall_power - 0.7561).abs() <= 0.01,
        format!("{:.4} vs 0.7561 +- 0.01", fixed.overall_power),
    );
    c.finish();
}

#[test]
fn acceptance_3_sample_size_reproduction() {
    let mut c = Criterion::new(3, "average sample sizes of the aggressive block");
    let rabr = shared_rabr_gradient();
    let reference = [42.00, 40.55, 19.27, 18.18];
    c.check(
        "placebo average within 0.5 subjects of 42.00",
        (rabr.avg_n_by_rank[0] - reference[0]).abs() <= 0.5,
        format!("{:.2} vs {:.2} +- 0.5", rabr.avg_n_by_rank[0], reference[0]),
    );
    for (rank, &target) in reference.iter().enumerate() {
        c.check(
            &format!("rank-{rank} average within 1.5 subjects"),
            (rabr.avg_n_by_rank[rank] - target).abs() <= 1.5,
            format!("{:.2} vs {target:.2} +- 1.5", rabr.avg_n_by_rank[rank]),
        );
    }
    c.finish();
}

#[test]
fn acceptance_4_binary_case_study_reproduction() {
    let mut c = Criterion::new(4, "binary-endpoint case study");
    let rabr = full_run(&preset_cfg(PresetName::CaseStudy, "case-study", "rabr-7-7-1"));
    c.check(
        "adaptive overall power within 2pp of 81.58%",
        (rabr.overall_power - 0.8158).abs() <= 0.02,
        format!("{:.4} vs 0.8158 +- 0.02", rabr.overall_power),
    );
    let reference = [72.02, 70.15, 37.84];
    for (rank, &target) in reference.iter().enumerate() {
        c.check(
            &format!("rank-{rank} average size within 1.5 subjects"),
            (rabr.avg_n_by_rank[rank] - target).abs() <= 1.5,
            format!("{:.2} vs {target:.2} +- 1.5", rabr.avg_n_by_rank[rank]),
        );
    }

    let fixed = full_run(&preset_cfg(PresetName::CaseStudy, "case-study", "fixed-equal"));
    c.check(
        "fixed-allocation overall power within 1pp of 76.09%",
        (fixed.overall_power - 0.7609).abs() <= 0.01,
        format!("{:.4} vs 0.7609 +- 0.01", fixed.overall_power),
    );
    c.finish();
}

#[test]
fn acceptance_5_null_rate_scan_bounded() {
    let mut c = Criterion::new(5, "null-rate scan stays under the nominal level");
    let mut worst_margin = f64::NEG_INFINITY;
    for run in expand(PresetName::Figure2) {
        let report = full_run(&run.cfg);
        for (d, (&rate, &se)) in report
            .raw_rejection
            .iter()
            .zip(&report.raw_rejection_se)
            .enumerate()
        {
            let margin = rate - (0.025 + 3.0 * se);
            worst_margin = worst_margin.max(margin);
            c.check(
                &format!("{} pairwise dose {}", run.scenario, d + 1),
                margin <= 0.0,
                format!("{rate:.4} > 0.025 + 3 * {se:.4}"),
            );
        }
        let margin = report.overall_power - (0.025 + 3.0 * report.overall_power_se);
        worst_margin = worst_margin.max(margin);
        c.check(
            &format!("{} familywise", run.scenario),
            margin <= 0.0,
            format!(
                "{:.4} > 0.025 + 3 * {:.4}",
                report.overall_power, report.overall_power_se
            ),
        );
    }
    c.check(
        "scan produced a finite worst margin",
        worst_margin.is_finite(),
        format!("{worst_margin}"),
    );
    c.finish();
}

#[test]
fn acceptance_6_conditional_rejection_monotonicity() {
    let mut c = Criterion::new(6, "conditional rejection probability checks");
    let grid = weight_grid(17);
    for &cc in &[1.96, 1.0] {
        for &c_prime in &[-2.0, 0.0, 2.0] {
            let report = lemma1_monotonicity_check(cc, c_prime, &grid).unwrap();
            c.check(
                &format!("monotone on c={cc} c'={c_prime}"),
                report.pass,
                format!("max violation {:.3e}", report.max_violation),
            );
        }
    }

    let oracle = lemma1_q_mc_oracle(1.96, 0.0, &grid, 10_000_000, SEED).unwrap();
    for (&w1, estimate) in grid.iter().zip(&oracle) {
        let quad = lemma1_q(&Lemma1Query {
            w1,
            c: 1.96,
            c_prime: 0.0,
        })
        .unwrap();
        c.check(
            &format!("quadrature matches MC at w1={w1:.3}"),
            (quad - estimate.value).abs() <= 3.0 * estimate.se,
            format!(
                "|{quad:.6} - {:.6}| > 3 * {:.2e}",
                estimate.value, estimate.se
            ),
        );
    }
    c.finish();
}

#[test]
fn acceptance_7_two_arm_rejection_bound() {
    let mut c = Criterion::new(7, "two-arm selection rejection bound");
    let sweep = theorem1_sweep(100, SEED).unwrap();
    c.check(
        "bounded by the level on 100 ordered-scaling tuples",
        sweep.all_bounded,
        format!("max excess {:.3e} > 1e-6", sweep.max_excess),
    );
    c.check(
        "exactly at the level under equal scalings",
        sweep.all_equal_at_alpha,
        format!("max gap {:.3e} > 1e-6", sweep.max_equality_gap),
    );
    c.finish();
}

#[test]
fn acceptance_8_property_suites() {
    let mut c = Criterion::new(8, "property suites");
    let mut rng = RngStream::new(SEED, 9001).rng();

    // Exact two-stage decomposition of the unweighted statistic.
    let mut max_gap = 0.0f64;
    for _ in 0..10_000 {
        let split = StageSplit {
            n1: rng.random_range(1..=60),
            mean1: rng.random_range(-3.0..3.0),
            n2: rng.random_range(1..=60),
            mean2: rng.random_range(-3.0..3.0),
            control: ControlArm {
                n0: rng.random_range(1..=120),
                mean0: rng.random_range(-3.0..3.0),
            },
        };
        let sigma = rng.random_range(0.3..3.0);
        let mu0 = rng.random_range(-2.0..2.0);
        let s = z_statistic(&split, sigma).unwrap();
        let (z1, z2) = z_components(&split, mu0, sigma).unwrap();
        let w1 = weight_w1(split.n1, split.n2 as f64, split.control.n0);
        let combined = chw_statistic(z1, z2, w1).unwrap();
        max_gap = max_gap.max((s - combined).abs());
    }
    c.check(
        "decomposition identity to 1e-10 on 10^4 inputs",
        max_gap <= 1e-10,
        format!("max gap {max_gap:.3e}"),
    );

    // Weight ordering on random size/scaling tuples.
    let ordering = w1_ordering_sweep(10_000, SEED);
    c.check(
        "stage-1 weight ordering on 10^4 tuples",
        ordering.all_hold,
        format!("max weight gap {:.3e}", ordering.max_weight_gap),
    );

    // Assignment probability vectors are distributions.
    let mut max_sum_err = 0.0f64;
    for _ in 0..10_000 {
        let mut block = vec![rng.random_range(1..=10u32)];
        let mut actives: Vec<u32> = (0..3).map(|_| rng.random_range(1..=10)).collect();
        actives.sort_unstable_by(|a, b| b.cmp(a));
        block.extend(actives);
        let measures: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ranking = rank_arms(&measures, &mut rng);
        let probs = rabr_probabilities(&block, &ranking);
        max_sum_err = max_sum_err.max((probs.iter().sum::<f64>() - 1.0).abs());

        let theta_raw: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..1.0)).collect();
        let tau_raw: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..1.0)).collect();
        let norm = |v: Vec<f64>| {
            let t: f64 = v.iter().sum();
            v.into_iter().map(|x| x / t).collect::<Vec<f64>>()
        };
        let coin = dbcd_allocation_probability(
            rng.random_range(0.0..4.0),
            &norm(theta_raw),
            &norm(tau_raw),
        );
        max_sum_err = max_sum_err.max((coin.iter().sum::<f64>() - 1.0).abs());
    }
    c.check(
        "assignment probability vectors sum to 1",
        max_sum_err <= 1e-12,
        format!("max deviation {max_sum_err:.3e}"),
    );

    // Multiplicity adjustment never decreases a p-value.
    let mut adjusted_ok = true;
    for _ in 0..2_000 {
        let stats: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..5.0)).collect();
        let arm_ns: Vec<u32> = (0..3).map(|_| rng.random_range(5..=60)).collect();
        let n0 = rng.random_range(5..=60);
        for adj in [
            dunnett_single_step_adjust(&stats, &arm_ns, n0).unwrap(),
            dunnett_step_down_adjust(&stats, &arm_ns, n0).unwrap(),
        ] {
            for (raw, adjusted) in adj.raw_p.iter().zip(&adj.adjusted_p) {
                adjusted_ok &= adjusted >= raw && *adjusted <= 1.0;
            }
        }
    }
    c.check(
        "adjusted p-values never fall below raw ones",
        adjusted_ok,
        "some adjusted p < raw p".to_string(),
    );

    // Worker count cannot influence the aggregated report.
    let cfg = preset_cfg(PresetName::CaseStudy, "case-study", "rabr-7-7-1");
    let single = run_oc(&cfg, 20_000, SEED, 1).unwrap();
    let eight = run_oc(&cfg, 20_000, SEED, 8).unwrap();
    c.check(
        "reports bit-identical across worker counts 1 and 8",
        single == eight,
        "reports differ".to_string(),
    );
    c.finish();
}

#[test]
fn acceptance_9_degenerate_block_equivalence() {
    let mut c = Criterion::new(9, "degenerate block equals fixed allocation");
    let analysis = AnalysisSpec {
        alpha: 0.025,
        test: TestKind::ZKnownVariance,
        multiplicity: Multiplicity::DunnettStepDown,
    };
    let build = |means: [f64; 4], randomization: RandomizationSpec| {
        DesignConfig {
            arms: 4,
            endpoint: EndpointSpec::Normal {
                means: means.to_vec(),
                sigma: 1.0,
            },
            randomization,
            burn_in: 60,
            total_n: 120,
            analysis: analysis.clone(),
        }
        .validate()
        .unwrap()
    };
    let degenerate = |means| {
        build(
            means,
            RandomizationSpec::Rabr {
                block: vec![8, 4, 4, 4],
                mode: adaptrand_core::RabrMode::PerSubject,
            },
        )
    };
    let fixed = |means| {
        build(
            means,
            RandomizationSpec::Fixed {
                probs: vec![0.4, 0.2, 0.2, 0.2],
            },
        )
    };
    let gradient = [0.43, 0.68, 0.93, 1.2];
    let null = [0.43; 4];

    // Same seed: the degenerate block consumes randomness exactly like the
    // fixed design, so the whole report matches bit for bit.
    let power_block = full_run(&degenerate(gradient));
    let power_fixed = full_run(&fixed(gradient));
    c.check(
        "same-seed reports are identical",
        power_block == power_fixed,
        "reports differ under a shared seed".to_string(),
    );

    // Independent seeds: overall power and familywise error agree within
    // Monte Carlo resolution.
    let power_fixed_indep = run_oc(&fixed(gradient), FULL_SCALE, SEED + 1, 0).unwrap();
    let gap = (power_block.overall_power - power_fixed_indep.overall_power).abs();
    let se = (power_block.overall_power_se.powi(2) + power_fixed_indep.overall_power_se.powi(2))
        .sqrt();
    c.check(
        "overall power within 3 MC standard errors",
        gap <= 3.0 * se,
        format!("|{:.4} - {:.4}| > 3 * {se:.4}", power_block.overall_power,
            power_fixed_indep.overall_power),
    );

    let null_block = full_run(&degenerate(null));
    let null_fixed = run_oc(&fixed(null), FULL_SCALE, SEED + 1, 0).unwrap();
    let gap = (null_block.overall_power - null_fixed.overall_power).abs();
    let se = (null_block.overall_power_se.powi(2) + null_fixed.overall_power_se.powi(2)).sqrt();
    c.check(
        "familywise error within 3 MC standard errors",
        gap <= 3.0 * se,
        format!(
            "|{:.4} - {:.4}| > 3 * {se:.4}",
            null_block.overall_power, null_fixed.overall_power
        ),
    );
    c.finish();
}
