//! Full-trial simulation and operating-characteristic aggregation.
//!
//! Reproducibility contract: every trial gets its own counter-derived rng
//! stream, and aggregation accumulates only integer counters, so the report
//! is bit-identical for any worker count and any scheduling order.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::design::{
    DesignConfig, EndpointSpec, Multiplicity, RandomizationSpec, TestKind, TrialState,
};
use crate::error::{Error, Result};
use crate::multiplicity::{
    bonferroni_adjust, dunnett_single_step_adjust, dunnett_step_down_adjust,
    resolve_selection_order, unadjusted, AdjustedResult,
};
use crate::randomization::{
    dbcd_next_assignment, draw_categorical, rabr_next_assignment, BlockCursor,
};
use crate::statistics::{
    pairwise_result, proportion_test_corrected, z_statistic, ControlArm, StageSplit,
};

/// Deterministic per-trial randomness: a (master seed, stream id) pair
/// expanded into an independent ChaCha stream. Identical pairs reproduce the
/// identical sequence on any platform and worker count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStream {
            master_seed,
            stream_id,
        }
    }

    /// Expands the pair into a full 256-bit ChaCha key via a SplitMix64
    /// chain; the multiplier is odd, so distinct stream ids give distinct
    /// chain origins.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut s = self.master_seed ^ self.stream_id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

/// Outcome of one simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Final subjects per arm, placebo first; sums to total_n.
    pub final_counts: Vec<u32>,
    /// Final-analysis p-values with the trial-resolved selection order.
    pub adjusted: AdjustedResult,
    /// Selected active arm (0-based among actives): smallest adjusted p.
    pub selected: usize,
    /// Whether the selected arm's adjusted p fell strictly below alpha.
    pub confirmed: bool,
    /// Whether any arm's adjusted p fell strictly below alpha.
    pub rejected_any: bool,
    /// Per adaptive checkpoint, the per-arm counts after that assignment.
    pub trajectory_counts: Vec<Vec<u32>>,
}

impl TrialResult {
    /// Allocation proportions per adaptive checkpoint (counts over subjects
    /// assigned so far).
    pub fn proportion_trajectory(&self) -> Vec<Vec<f64>> {
        self.trajectory_counts
            .iter()
            .map(|counts| {
                let total: u32 = counts.iter().sum();
                counts.iter().map(|&c| c as f64 / total as f64).collect()
            })
            .collect()
    }
}

/// Active arms ordered best first at final analysis (selected arm first,
/// the rest along the resolved selection order).
pub fn rank_arms_for_report(result: &TrialResult) -> Vec<usize> {
    result.adjusted.selection_order.clone()
}

/// Simulates one complete trial: equal permuted-block burn-in, adaptive
/// assignment with instant responses, final cumulative analysis, and
/// multiplicity-adjusted selection.
pub fn simulate_trial(cfg: &DesignConfig, stream: RngStream) -> Result<TrialResult> {
    let mut rng = stream.rng();
    let arms = cfg.arms;
    let mut state = match &cfg.endpoint {
        EndpointSpec::Normal { .. } => TrialState::new_normal(arms),
        EndpointSpec::Binary { .. } => TrialState::new_binary(arms),
    };

    // Burn-in: one shuffled pass over the arms per round, so counts are
    // exactly equal when it completes.
    let mut round: Vec<usize> = (0..arms).collect();
    for _ in 0..cfg.burn_in_per_arm() {
        round.shuffle(&mut rng);
        for &arm in &round {
            draw_response(&cfg.endpoint, &mut state, arm, &mut rng);
        }
    }

    let checkpoints = cfg.adaptive_subjects() as usize;
    let mut trajectory = Vec::with_capacity(checkpoints);
    let mut cursor = BlockCursor::new();
    let sigma = cfg.endpoint.sigma();
    for _ in 0..checkpoints {
        let arm = match &cfg.randomization {
            RandomizationSpec::Fixed { probs } => draw_categorical(probs, &mut rng),
            RandomizationSpec::Rabr { block, mode } => {
                rabr_next_assignment(&state, block, *mode, &mut cursor, sigma, &mut rng)?
            }
            RandomizationSpec::Dbcd { eta, target } => {
                dbcd_next_assignment(&state, *eta, target, sigma, &mut rng)?
            }
        };
        draw_response(&cfg.endpoint, &mut state, arm, &mut rng);
        trajectory.push(state.counts().to_vec());
    }

    let statistics = per_arm_statistics(cfg, &state)?;
    let arm_ns: Vec<u32> = (1..arms).map(|g| state.count(g)).collect();
    let mut adjusted = match cfg.analysis.multiplicity {
        Multiplicity::None => {
            let raw: Vec<f64> = statistics
                .iter()
                .enumerate()
                .map(|(i, &s)| pairwise_result(s, i).p_value)
                .collect();
            unadjusted(&raw)
        }
        Multiplicity::Bonferroni => {
            let raw: Vec<f64> = statistics
                .iter()
                .enumerate()
                .map(|(i, &s)| pairwise_result(s, i).p_value)
                .collect();
            bonferroni_adjust(&raw)
        }
        Multiplicity::DunnettSingleStep => {
            dunnett_single_step_adjust(&statistics, &arm_ns, state.count(0))?
        }
        Multiplicity::DunnettStepDown => {
            dunnett_step_down_adjust(&statistics, &arm_ns, state.count(0))?
        }
    };
    adjusted.selection_order = resolve_selection_order(&adjusted, &mut rng);

    let selected = adjusted.selection_order[0];
    let alpha = cfg.analysis.alpha;
    let confirmed = adjusted.adjusted_p[selected] < alpha;
    let rejected_any = adjusted.adjusted_p.iter().any(|&p| p < alpha);

    Ok(TrialResult {
        final_counts: state.counts().to_vec(),
        adjusted,
        selected,
        confirmed,
        rejected_any,
        trajectory_counts: trajectory,
    })
}

fn draw_response(
    endpoint: &EndpointSpec,
    state: &mut TrialState,
    arm: usize,
    rng: &mut impl Rng,
) {
    match endpoint {
        EndpointSpec::Normal { means, sigma } => {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            state.record_normal(arm, means[arm] + sigma * z);
        }
        EndpointSpec::Binary { rates } => {
            let u: f64 = rng.random();
            state.record_binary(arm, u < rates[arm]);
        }
    }
}

fn per_arm_statistics(cfg: &DesignConfig, state: &TrialState) -> Result<Vec<f64>> {
    let control = ControlArm {
        n0: state.count(0),
        mean0: state.arm_mean(0)?,
    };
    (1..cfg.arms)
        .map(|g| match cfg.analysis.test {
            TestKind::ZKnownVariance => {
                let split = StageSplit {
                    n1: state.count(g),
                    mean1: state.arm_mean(g)?,
                    n2: 0,
                    mean2: 0.0,
                    control,
                };
                z_statistic(&split, cfg.endpoint.sigma())
            }
            TestKind::Proportion => Ok(proportion_test_corrected(
                state.responders(g)?,
                state.count(g),
                state.responders(0)?,
                state.count(0),
            )),
        })
        .collect()
}

/// Operating characteristics over many simulated trials. Every rate is the
/// exact ratio of an integer event count to `iterations`, so reports are
/// reproducible bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct OCReport {
    pub iterations: u64,
    /// Total arms including placebo.
    pub arms: usize,
    /// Per active arm: P(arm is selected and its adjusted p < alpha).
    pub select_and_confirm: Vec<f64>,
    pub select_and_confirm_se: Vec<f64>,
    /// Per active arm: P(raw p < alpha), no multiplicity adjustment.
    pub raw_rejection: Vec<f64>,
    pub raw_rejection_se: Vec<f64>,
    /// Per active arm: P(adjusted p < alpha).
    pub adjusted_rejection: Vec<f64>,
    pub adjusted_rejection_se: Vec<f64>,
    /// P(any adjusted p < alpha) = P(select and confirm some arm).
    pub overall_power: f64,
    pub overall_power_se: f64,
    /// Average subjects by final-analysis rank: placebo, best, second, ...
    pub avg_n_by_rank: Vec<f64>,
    /// Mean allocation proportion per adaptive checkpoint, by the same
    /// placebo-first rank order.
    pub trajectory_by_rank: Vec<Vec<f64>>,
}

/// Integer-only accumulator; merging is exact addition, hence
/// order-independent.
#[derive(Debug, Clone)]
struct Aggregate {
    select_confirm: Vec<u64>,
    raw_reject: Vec<u64>,
    adj_reject: Vec<u64>,
    any_reject: u64,
    n_by_rank: Vec<u64>,
    traj_by_rank: Vec<Vec<u64>>,
}

impl Aggregate {
    fn zero(actives: usize, checkpoints: usize) -> Self {
        Aggregate {
            select_confirm: vec![0; actives],
            raw_reject: vec![0; actives],
            adj_reject: vec![0; actives],
            any_reject: 0,
            n_by_rank: vec![0; actives + 1],
            traj_by_rank: vec![vec![0; actives + 1]; checkpoints],
        }
    }

    fn absorb(&mut self, trial: &TrialResult, alpha: f64) {
        let ranks = rank_arms_for_report(trial);
        if trial.confirmed {
            self.select_confirm[trial.selected] += 1;
        }
        for (g, (&raw, &adj)) in trial
            .adjusted
            .raw_p
            .iter()
            .zip(&trial.adjusted.adjusted_p)
            .enumerate()
        {
            if raw < alpha {
                self.raw_reject[g] += 1;
            }
            if adj < alpha {
                self.adj_reject[g] += 1;
            }
        }
        if trial.rejected_any {
            self.any_reject += 1;
        }
        self.n_by_rank[0] += trial.final_counts[0] as u64;
        for (k, &active) in ranks.iter().enumerate() {
            self.n_by_rank[k + 1] += trial.final_counts[active + 1] as u64;
        }
        for (row, counts) in self.traj_by_rank.iter_mut().zip(&trial.trajectory_counts) {
            row[0] += counts[0] as u64;
            for (k, &active) in ranks.iter().enumerate() {
                row[k + 1] += counts[active + 1] as u64;
            }
        }
    }

    fn merge(&mut self, other: Aggregate) {
        for (a, b) in self.select_confirm.iter_mut().zip(other.select_confirm) {
            *a += b;
        }
        for (a, b) in self.raw_reject.iter_mut().zip(other.raw_reject) {
            *a += b;
        }
        for (a, b) in self.adj_reject.iter_mut().zip(other.adj_reject) {
            *a += b;
        }
        self.any_reject += other.any_reject;
        for (a, b) in self.n_by_rank.iter_mut().zip(other.n_by_rank) {
            *a += b;
        }
        for (row, other_row) in self.traj_by_rank.iter_mut().zip(other.traj_by_rank) {
            for (a, b) in row.iter_mut().zip(other_row) {
                *a += b;
            }
        }
    }

    fn into_report(self, cfg: &DesignConfig, iterations: u64) -> OCReport {
        let n = iterations as f64;
        let rate = |c: u64| c as f64 / n;
        let se = |c: u64| {
            let r = rate(c);
            (r * (1.0 - r) / n).sqrt()
        };
        let burn_in = cfg.burn_in as f64;
        OCReport {
            iterations,
            arms: cfg.arms,
            select_and_confirm: self.select_confirm.iter().map(|&c| rate(c)).collect(),
            select_and_confirm_se: self.select_confirm.iter().map(|&c| se(c)).collect(),
            raw_rejection: self.raw_reject.iter().map(|&c| rate(c)).collect(),
            raw_rejection_se: self.raw_reject.iter().map(|&c| se(c)).collect(),
            adjusted_rejection: self.adj_reject.iter().map(|&c| rate(c)).collect(),
            adjusted_rejection_se: self.adj_reject.iter().map(|&c| se(c)).collect(),
            overall_power: rate(self.any_reject),
            overall_power_se: se(self.any_reject),
            avg_n_by_rank: self.n_by_rank.iter().map(|&c| c as f64 / n).collect(),
            trajectory_by_rank: self
                .traj_by_rank
                .iter()
                .enumerate()
                .map(|(t, row)| {
                    // The denominator at checkpoint t is the same in every
                    // trial: burn-in plus t+1 adaptive subjects.
                    let assigned = burn_in + (t + 1) as f64;
                    row.iter().map(|&c| c as f64 / (n * assigned)).collect()
                })
                .collect(),
        }
    }
}

/// Runs `iterations` independent trials on streams (master_seed, 0..) and
/// aggregates their operating characteristics. `workers` sets the thread
/// count; 0 uses the library default. The report does not depend on the
/// worker count.
pub fn run_oc(
    cfg: &DesignConfig,
    iterations: u64,
    master_seed: u64,
    workers: usize,
) -> Result<OCReport> {
    if iterations == 0 {
        return Err(Error::InvalidConfig(
            "iterations: must be at least 1".into(),
        ));
    }
    let actives = cfg.active_arms();
    let checkpoints = cfg.adaptive_subjects() as usize;
    let alpha = cfg.analysis.alpha;

    let reduce = || -> Result<Aggregate> {
        (0..iterations)
            .into_par_iter()
            .try_fold(
                || Aggregate::zero(actives, checkpoints),
                |mut acc, i| {
                    let trial =
                        simulate_trial(cfg, RngStream::new(master_seed, i)).map_err(|e| {
                            Error::Trial {
                                stream_id: i,
                                source: Box::new(e),
                            }
                        })?;
                    acc.absorb(&trial, alpha);
                    Ok(acc)
                },
            )
            .try_reduce(
                || Aggregate::zero(actives, checkpoints),
                |mut a, b| {
                    a.merge(b);
                    Ok(a)
                },
            )
    };

    let agg = if workers == 0 {
        reduce()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("workers: {e}")))?;
        pool.install(reduce)?
    };
    Ok(agg.into_report(cfg, iterations))
}
