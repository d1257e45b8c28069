//! Domain types for trial specifications and running trial state.
//!
//! Arm indexing convention used everywhere: index 0 is placebo, indices
//! 1..arms-1 are the active dose groups, and vectors over arms are ordered
//! placebo first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome model for a simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum EndpointSpec {
    /// Continuous responses with known common standard deviation.
    Normal { means: Vec<f64>, sigma: f64 },
    /// Bernoulli responses; larger response rate is favorable.
    Binary { rates: Vec<f64> },
}

impl EndpointSpec {
    pub fn arm_count(&self) -> usize {
        match self {
            EndpointSpec::Normal { means, .. } => means.len(),
            EndpointSpec::Binary { rates } => rates.len(),
        }
    }

    /// Known standard deviation for the continuous model; for the binary
    /// model this is irrelevant to ranking (common factors cannot change an
    /// ordering) and a placeholder 1 is returned.
    pub fn sigma(&self) -> f64 {
        match self {
            EndpointSpec::Normal { sigma, .. } => *sigma,
            EndpointSpec::Binary { .. } => 1.0,
        }
    }
}

/// Cadence of block regeneration for the adaptive block engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RabrMode {
    /// Re-rank and redraw arm probabilities at every assignment.
    PerSubject,
    /// Freeze the ranking for a whole shuffled block, as an IRT would.
    PermutedBlock,
}

/// Target-allocation family for the biased-coin engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DbcdTarget {
    /// Allocation proportional to sqrt(Phi((mean - lambda) / sigma)).
    PhiPower { lambda: f64 },
    /// Allocation proportional to sqrt(rate * (1 - rate)).
    Neyman,
}

/// Which randomization engine assigns subjects after burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum RandomizationSpec {
    /// Constant assignment probabilities.
    Fixed { probs: Vec<f64> },
    /// Response-adaptive block randomization: placebo keeps block[0]/B while
    /// the active entries are remapped by the current response ranking.
    Rabr { block: Vec<u32>, mode: RabrMode },
    /// Doubly adaptive biased coin: pulls observed allocation toward an
    /// estimated target, with eta controlling the pull strength.
    Dbcd { eta: f64, target: DbcdTarget },
}

/// Which pairwise test each active arm gets against placebo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    /// Known-variance z test on stage-pooled means.
    ZKnownVariance,
    /// Continuity-corrected pooled test of proportions.
    Proportion,
}

/// Familywise-error adjustment applied to the pairwise p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Multiplicity {
    None,
    Bonferroni,
    DunnettSingleStep,
    DunnettStepDown,
}

/// Final-analysis settings: one-sided level plus test and adjustment choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSpec {
    pub alpha: f64,
    pub test: TestKind,
    pub multiplicity: Multiplicity,
}

/// Complete specification of one simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    /// Total number of arms including placebo.
    pub arms: usize,
    pub endpoint: EndpointSpec,
    pub randomization: RandomizationSpec,
    /// Burn-in size M, split exactly equally across arms.
    pub burn_in: u32,
    /// Total enrollment n; n - M subjects are adaptively assigned.
    pub total_n: u32,
    pub analysis: AnalysisSpec,
}

impl DesignConfig {
    /// Number of active (non-placebo) arms.
    pub fn active_arms(&self) -> usize {
        self.arms - 1
    }

    /// Burn-in subjects per arm.
    pub fn burn_in_per_arm(&self) -> u32 {
        self.burn_in / self.arms as u32
    }

    /// Adaptive checkpoints after burn-in.
    pub fn adaptive_subjects(&self) -> u32 {
        self.total_n - self.burn_in
    }

    /// Checks every structural invariant, returning the config (with Fixed
    /// probabilities normalized to sum exactly 1) or a descriptive error
    /// naming the violated field.
    pub fn validate(mut self) -> Result<Self> {
        if self.arms < 2 {
            return Err(Error::InvalidConfig(format!(
                "arms: need placebo plus at least one active arm, got {}",
                self.arms
            )));
        }
        let arm_count = self.endpoint.arm_count();
        if arm_count != self.arms {
            return Err(Error::InvalidConfig(format!(
                "endpoint: expected {} per-arm entries (placebo first), got {arm_count}",
                self.arms
            )));
        }
        match &self.endpoint {
            EndpointSpec::Normal { means, sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "endpoint.sigma: must be a positive finite number, got {sigma}"
                    )));
                }
                if let Some(bad) = means.iter().find(|m| !m.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "endpoint.means: entries must be finite, got {bad}"
                    )));
                }
            }
            EndpointSpec::Binary { rates } => {
                if let Some(bad) = rates.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
                    return Err(Error::InvalidConfig(format!(
                        "endpoint.rates: entries must lie strictly in (0, 1), got {bad}"
                    )));
                }
            }
        }
        match &mut self.randomization {
            RandomizationSpec::Fixed { probs } => {
                if probs.len() != self.arms {
                    return Err(Error::InvalidConfig(format!(
                        "randomization.probs: expected {} entries, got {}",
                        self.arms,
                        probs.len()
                    )));
                }
                if let Some(bad) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "randomization.probs: entries must be finite and non-negative, got {bad}"
                    )));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "randomization.probs: must sum to 1 within 1e-12, got {total}"
                    )));
                }
                for p in probs.iter_mut() {
                    *p /= total;
                }
                let head: f64 = probs[..self.arms - 1].iter().sum();
                probs[self.arms - 1] = 1.0 - head;
            }
            RandomizationSpec::Rabr { block, .. } => {
                if block.len() != self.arms {
                    return Err(Error::InvalidConfig(format!(
                        "randomization.block: expected {} entries (placebo first), got {}",
                        self.arms,
                        block.len()
                    )));
                }
                if block[0] == 0 {
                    return Err(Error::InvalidConfig(
                        "randomization.block: placebo entry must be at least 1".into(),
                    ));
                }
                if block[1..].windows(2).any(|w| w[0] < w[1]) {
                    return Err(Error::InvalidConfig(format!(
                        "randomization.block: active entries must be non-increasing, got {:?}",
                        &block[1..]
                    )));
                }
            }
            RandomizationSpec::Dbcd { eta, target } => {
                if !(eta.is_finite() && *eta >= 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "randomization.eta: must be a non-negative finite number, got {eta}"
                    )));
                }
                match (target, &self.endpoint) {
                    (DbcdTarget::PhiPower { lambda }, EndpointSpec::Normal { .. }) => {
                        if !lambda.is_finite() {
                            return Err(Error::InvalidConfig(format!(
                                "randomization.target.lambda: must be finite, got {lambda}"
                            )));
                        }
                    }
                    (DbcdTarget::PhiPower { .. }, EndpointSpec::Binary { .. }) => {
                        return Err(Error::InvalidConfig(
                            "randomization.target: phi-power target needs a normal endpoint"
                                .into(),
                        ));
                    }
                    (DbcdTarget::Neyman, EndpointSpec::Binary { .. }) => {}
                    (DbcdTarget::Neyman, EndpointSpec::Normal { .. }) => {
                        return Err(Error::InvalidConfig(
                            "randomization.target: neyman target needs a binary endpoint".into(),
                        ));
                    }
                }
            }
        }
        if self.burn_in == 0 {
            return Err(Error::InvalidConfig("burn_in: must be positive".into()));
        }
        if self.burn_in % self.arms as u32 != 0 {
            return Err(Error::InvalidConfig(format!(
                "burn_in: {} is not divisible by the arm count {}",
                self.burn_in, self.arms
            )));
        }
        if self.total_n < self.burn_in {
            return Err(Error::InvalidConfig(format!(
                "total_n: {} is smaller than burn_in {}",
                self.total_n, self.burn_in
            )));
        }
        let a = self.analysis.alpha;
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "analysis.alpha: must lie in (0, 0.5), got {a}"
            )));
        }
        match (self.analysis.test, &self.endpoint) {
            (TestKind::ZKnownVariance, EndpointSpec::Normal { .. }) => {}
            (TestKind::Proportion, EndpointSpec::Binary { .. }) => {}
            (TestKind::ZKnownVariance, EndpointSpec::Binary { .. }) => {
                return Err(Error::InvalidConfig(
                    "analysis.test: z-known-variance needs a normal endpoint".into(),
                ));
            }
            (TestKind::Proportion, EndpointSpec::Normal { .. }) => {
                return Err(Error::InvalidConfig(
                    "analysis.test: proportion needs a binary endpoint".into(),
                ));
            }
        }
        Ok(self)
    }
}

/// Per-arm accumulators, either running sums (continuous) or responder
/// counts (binary); all statistics downstream are functions of these.
#[derive(Debug, Clone, PartialEq)]
enum ArmTotals {
    Normal { sums: Vec<f64> },
    Binary { responders: Vec<u32> },
}

/// Mutable state of one in-flight simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialState {
    counts: Vec<u32>,
    totals: ArmTotals,
    assignment_log: Vec<(u32, usize)>,
}

impl TrialState {
    pub fn new_normal(arms: usize) -> Self {
        TrialState {
            counts: vec![0; arms],
            totals: ArmTotals::Normal { sums: vec![0.0; arms] },
            assignment_log: Vec::new(),
        }
    }

    pub fn new_binary(arms: usize) -> Self {
        TrialState {
            counts: vec![0; arms],
            totals: ArmTotals::Binary { responders: vec![0; arms] },
            assignment_log: Vec::new(),
        }
    }

    pub fn arms(&self) -> usize {
        self.counts.len()
    }

    pub fn is_binary(&self) -> bool {
        matches!(self.totals, ArmTotals::Binary { .. })
    }

    /// Records one subject with a continuous response.
    ///
    /// Panics if the state was built for a binary endpoint; that is a caller
    /// bug, not a data condition.
    pub fn record_normal(&mut self, arm: usize, response: f64) {
        let subject = self.total_assigned();
        match &mut self.totals {
            ArmTotals::Normal { sums } => sums[arm] += response,
            ArmTotals::Binary { .. } => panic!("continuous response recorded on binary state"),
        }
        self.counts[arm] += 1;
        self.assignment_log.push((subject, arm));
    }

    /// Records one subject with a binary response.
    pub fn record_binary(&mut self, arm: usize, responded: bool) {
        let subject = self.total_assigned();
        match &mut self.totals {
            ArmTotals::Binary { responders } => {
                if responded {
                    responders[arm] += 1;
                }
            }
            ArmTotals::Normal { .. } => panic!("binary response recorded on continuous state"),
        }
        self.counts[arm] += 1;
        self.assignment_log.push((subject, arm));
    }

    pub fn count(&self, arm: usize) -> u32 {
        self.counts[arm]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total_assigned(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Sample mean (continuous) or sample proportion (binary) of an arm.
    pub fn arm_mean(&self, arm: usize) -> Result<f64> {
        let n = self.counts[arm];
        if n == 0 {
            return Err(Error::EmptyArm(arm));
        }
        Ok(match &self.totals {
            ArmTotals::Normal { sums } => sums[arm] / n as f64,
            ArmTotals::Binary { responders } => responders[arm] as f64 / n as f64,
        })
    }

    /// Responder count of an arm; only defined for binary states.
    pub fn responders(&self, arm: usize) -> Result<u32> {
        match &self.totals {
            ArmTotals::Binary { responders } => Ok(responders[arm]),
            ArmTotals::Normal { .. } => Err(Error::Degenerate(
                "responder count requested on a continuous-endpoint state",
            )),
        }
    }

    /// Ordered (subject index, arm) pairs, one per recorded subject.
    pub fn assignment_log(&self) -> &[(u32, usize)] {
        &self.assignment_log
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> DesignConfig {
        DesignConfig {
            arms: 4,
            endpoint: EndpointSpec::Normal {
                means: vec![0.0, 0.43, 0.68, 0.93],
                sigma: 1.0,
            },
            randomization: RandomizationSpec::Rabr {
                block: vec![8, 5, 4, 3],
                mode: RabrMode::PerSubject,
            },
            burn_in: 60,
            total_n: 120,
            analysis: AnalysisSpec {
                alpha: 0.025,
                test: TestKind::ZKnownVariance,
                multiplicity: Multiplicity::DunnettStepDown,
            },
        }
    }

    #[test]
    fn valid_config_passes() {
        let cfg = base_config().validate().unwrap();
        assert_eq!(cfg.active_arms(), 3);
        assert_eq!(cfg.burn_in_per_arm(), 15);
        assert_eq!(cfg.adaptive_subjects(), 60);
    }

    #[test]
    fn block_order_violation_rejected() {
        let mut cfg = base_config();
        cfg.randomization = RandomizationSpec::Rabr {
            block: vec![8, 3, 4, 5],
            mode: RabrMode::PerSubject,
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("non-increasing"), "{err}");
    }

    #[test]
    fn burn_in_divisibility_enforced() {
        let mut cfg = base_config();
        cfg.burn_in = 61;
        cfg.total_n = 121;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("divisible"), "{err}");
    }

    #[test]
    fn fixed_probs_normalized_exactly() {
        let mut cfg = base_config();
        // Three entries of 0.1 accumulate rounding; the validator must leave
        // an exact unit sum behind.
        cfg.randomization = RandomizationSpec::Fixed {
            probs: vec![0.7, 0.1, 0.1, 0.1],
        };
        let cfg = cfg.validate().unwrap();
        if let RandomizationSpec::Fixed { probs } = &cfg.randomization {
            let total: f64 = probs.iter().sum();
            assert_eq!(total, 1.0);
        } else {
            unreachable!();
        }
    }

    #[test]
    fn fixed_probs_bad_sum_rejected() {
        let mut cfg = base_config();
        cfg.randomization = RandomizationSpec::Fixed {
            probs: vec![0.5, 0.2, 0.2, 0.2],
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn endpoint_test_mismatch_rejected() {
        let mut cfg = base_config();
        cfg.analysis.test = TestKind::Proportion;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("binary endpoint"), "{err}");
    }

    #[test]
    fn dbcd_target_endpoint_mismatch_rejected() {
        let mut cfg = base_config();
        cfg.randomization = RandomizationSpec::Dbcd {
            eta: 2.0,
            target: DbcdTarget::Neyman,
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("neyman"), "{err}");

        let mut cfg = base_config();
        cfg.endpoint = EndpointSpec::Binary {
            rates: vec![0.151, 0.282, 0.4, 0.5],
        };
        cfg.analysis.test = TestKind::Proportion;
        cfg.randomization = RandomizationSpec::Dbcd {
            eta: 2.0,
            target: DbcdTarget::PhiPower { lambda: 0.0 },
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn degenerate_rates_rejected() {
        let mut cfg = base_config();
        cfg.endpoint = EndpointSpec::Binary {
            rates: vec![0.0, 0.3, 0.4, 0.5],
        };
        cfg.analysis.test = TestKind::Proportion;
        cfg.randomization = RandomizationSpec::Fixed {
            probs: vec![0.25; 4],
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = base_config().validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: DesignConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn state_means_and_log() {
        let mut st = TrialState::new_normal(3);
        st.record_normal(0, 1.0);
        st.record_normal(1, 2.0);
        st.record_normal(1, 4.0);
        assert_eq!(st.arm_mean(0).unwrap(), 1.0);
        assert_eq!(st.arm_mean(1).unwrap(), 3.0);
        assert_eq!(st.arm_mean(2).unwrap_err(), Error::EmptyArm(2));
        assert_eq!(st.assignment_log(), &[(0, 0), (1, 1), (2, 1)]);

        let mut sb = TrialState::new_binary(2);
        for responded in [true, false, true] {
            sb.record_binary(1, responded);
        }
        assert_eq!(sb.responders(1).unwrap(), 2);
        assert!((sb.arm_mean(1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(st.responders(0).is_err());
    }

    #[test]
    fn counts_match_assignment_log() {
        let mut st = TrialState::new_normal(4);
        for i in 0..40usize {
            st.record_normal(i % 4, i as f64 * 0.1);
            let mut from_log = vec![0u32; 4];
            for &(_, arm) in st.assignment_log() {
                from_log[arm] += 1;
            }
            assert_eq!(from_log, st.counts());
        }
        assert_eq!(st.total_assigned(), 40);
    }
}
