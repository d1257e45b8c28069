//! The three randomization engines: response-adaptive block randomization,
//! the doubly adaptive biased coin, and fixed-probability assignment.
//!
//! Active arms are indexed 0..m-1 inside [`ArmRanking`]; the corresponding
//! full-trial arm index is that value plus one, since placebo sits at 0 and
//! never participates in ranking.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::design::{DbcdTarget, RabrMode, TrialState};
use crate::error::{Error, Result};
use crate::numerics::std_normal_cdf;

/// Ranking of the active arms by their current standardized response.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmRanking {
    /// Active-arm positions (0-based), best first; exact ties appear in an
    /// rng-chosen order.
    pub order: Vec<usize>,
    /// Ranking statistic per active arm, indexed by active-arm position.
    pub measures: Vec<f64>,
}

/// Remaining assignments of the current permuted block, for the mode that
/// freezes a ranking over a whole block.
#[derive(Debug, Clone, Default)]
pub struct BlockCursor {
    remaining: Vec<usize>,
    frozen: Option<ArmRanking>,
}

impl BlockCursor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.remaining.is_empty()
    }

    pub fn remaining(&self) -> &[usize] {
        &self.remaining
    }

    /// Ranking captured when the current block was generated.
    pub fn frozen_ranking(&self) -> Option<&ArmRanking> {
        self.frozen.as_ref()
    }

    fn refill(&mut self, block: &[u32], ranking: ArmRanking, rng: &mut impl Rng) {
        self.remaining.clear();
        for _ in 0..block[0] {
            self.remaining.push(0);
        }
        for (k, &active) in ranking.order.iter().enumerate() {
            for _ in 0..block[k + 1] {
                self.remaining.push(active + 1);
            }
        }
        self.remaining.shuffle(rng);
        self.frozen = Some(ranking);
    }

    fn pop(&mut self) -> Option<usize> {
        self.remaining.pop()
    }
}

/// Standardized response of one arm on all data so far: sqrt(n) mean / sigma
/// for a continuous endpoint, sqrt(n) times the sample proportion for a
/// binary one (a common scale factor cannot change the ordering, so none is
/// applied).
pub fn standardized_measure(state: &TrialState, g: usize, sigma: f64) -> Result<f64> {
    let n = state.count(g);
    if n == 0 {
        return Err(Error::EmptyArm(g));
    }
    let mean = state.arm_mean(g)?;
    let scale = if state.is_binary() { 1.0 } else { sigma };
    Ok((n as f64).sqrt() * mean / scale)
}

/// Sorts active arms by measure descending; runs of exactly equal measures
/// are put in uniformly random order. With all-distinct measures the rng is
/// untouched and the result is deterministic.
pub fn rank_arms(measures: &[f64], rng: &mut impl Rng) -> ArmRanking {
    debug_assert!(measures.iter().all(|m| m.is_finite()));
    let mut order: Vec<usize> = (0..measures.len()).collect();
    order.sort_by(|&a, &b| measures[b].partial_cmp(&measures[a]).unwrap());
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && measures[order[end]] == measures[order[start]] {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].shuffle(rng);
        }
        start = end;
    }
    ArmRanking {
        order,
        measures: measures.to_vec(),
    }
}

/// Assignment probabilities from a block vector and a ranking: placebo keeps
/// block[0]/B, and the arm ranked k-th best receives block[k+1]/B.
pub fn rabr_probabilities(block: &[u32], ranking: &ArmRanking) -> Vec<f64> {
    debug_assert_eq!(block.len(), ranking.order.len() + 1);
    let b: u32 = block.iter().sum();
    let b = b as f64;
    let mut probs = vec![0.0; block.len()];
    probs[0] = block[0] as f64 / b;
    for (k, &active) in ranking.order.iter().enumerate() {
        probs[active + 1] = block[k + 1] as f64 / b;
    }
    probs
}

fn rank_state_arms(state: &TrialState, sigma: f64, rng: &mut impl Rng) -> Result<ArmRanking> {
    let measures = (1..state.arms())
        .map(|g| standardized_measure(state, g, sigma))
        .collect::<Result<Vec<f64>>>()?;
    Ok(rank_arms(&measures, rng))
}

/// Draws the next assignment under the adaptive block engine.
///
/// Per-subject mode re-ranks on every call and samples one arm; block mode
/// regenerates a shuffled block under a frozen ranking whenever the cursor
/// runs dry, then deals from it. Every arm must already have data (burn-in
/// complete), otherwise the ranking is undefined.
pub fn rabr_next_assignment(
    state: &TrialState,
    block: &[u32],
    mode: RabrMode,
    cursor: &mut BlockCursor,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<usize> {
    match mode {
        RabrMode::PerSubject => {
            let ranking = rank_state_arms(state, sigma, rng)?;
            let probs = rabr_probabilities(block, &ranking);
            Ok(draw_categorical(&probs, rng))
        }
        RabrMode::PermutedBlock => {
            if cursor.is_empty() {
                let ranking = rank_state_arms(state, sigma, rng)?;
                cursor.refill(block, ranking, rng);
            }
            Ok(cursor.pop().expect("cursor was just refilled"))
        }
    }
}

/// Target allocation sqrt(Phi((mean - lambda) / sigma)), normalized over all
/// arms. Accepts sample means during a trial or true means for analytic use.
pub fn dbcd_target_allocation(means: &[f64], sigma: f64, lambda: f64) -> Vec<f64> {
    let raw: Vec<f64> = means
        .iter()
        .map(|&m| std_normal_cdf((m - lambda) / sigma).max(f64::MIN_POSITIVE).sqrt())
        .collect();
    normalize(raw)
}

/// Target allocation sqrt(rate (1 - rate)), normalized; callers guard rates
/// away from 0 and 1 first (see [`dbcd_next_assignment`]).
pub fn dbcd_neyman_allocation(rates: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = rates.iter().map(|&q| (q * (1.0 - q)).sqrt()).collect();
    normalize(raw)
}

fn normalize(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return vec![1.0 / raw.len() as f64; raw.len()];
    }
    raw.into_iter().map(|v| v / total).collect()
}

/// Biased-coin assignment probabilities
/// a_g = tau_g (tau_g / theta_g)^eta, normalized, where theta is the current
/// allocation proportion and tau the estimated target.
///
/// Boundary convention: an arm with theta_g = 0 takes probability 1 before
/// normalization (and an arm holding everything, theta_g = 1, takes 0),
/// which reduces to sharing the mass uniformly over the empty arms.
pub fn dbcd_allocation_probability(eta: f64, theta: &[f64], tau_hat: &[f64]) -> Vec<f64> {
    debug_assert_eq!(theta.len(), tau_hat.len());
    debug_assert!(eta >= 0.0);
    let empty: Vec<usize> = (0..theta.len()).filter(|&g| theta[g] == 0.0).collect();
    if !empty.is_empty() {
        let mut probs = vec![0.0; theta.len()];
        for &g in &empty {
            probs[g] = 1.0 / empty.len() as f64;
        }
        return probs;
    }
    let raw: Vec<f64> = theta
        .iter()
        .zip(tau_hat)
        .map(|(&th, &tau)| tau * (tau / th).powf(eta))
        .collect();
    normalize(raw)
}

/// Draws the next assignment under the biased-coin engine: estimate the
/// target from current data, compare with the realized allocation, sample.
pub fn dbcd_next_assignment(
    state: &TrialState,
    eta: f64,
    target: &DbcdTarget,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<usize> {
    let arms = state.arms();
    let tau = match target {
        DbcdTarget::PhiPower { lambda } => {
            let means = (0..arms)
                .map(|g| state.arm_mean(g))
                .collect::<Result<Vec<f64>>>()?;
            dbcd_target_allocation(&means, sigma, *lambda)
        }
        DbcdTarget::Neyman => {
            let mut rates = Vec::with_capacity(arms);
            for g in 0..arms {
                let n = state.count(g);
                if n == 0 {
                    return Err(Error::EmptyArm(g));
                }
                let r = state.responders(g)?;
                // Degenerate observed rates are pulled just inside (0, 1) so
                // the variance factor stays positive.
                let rate = if r == 0 || r == n {
                    (r as f64 + 0.5) / (n as f64 + 1.0)
                } else {
                    r as f64 / n as f64
                };
                rates.push(rate);
            }
            dbcd_neyman_allocation(&rates)
        }
    };
    let total = state.total_assigned() as f64;
    let theta: Vec<f64> = state.counts().iter().map(|&c| c as f64 / total).collect();
    Ok(draw_categorical(
        &dbcd_allocation_probability(eta, &theta, &tau),
        rng,
    ))
}

/// Samples an index from a probability vector; the engine behind fixed
/// randomization and the per-subject adaptive draws.
pub fn draw_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
