//! Final-analysis test statistics and their two-stage decomposition.
//!
//! The unweighted z statistic over both stages can be rewritten as
//! sqrt(w1) Z1 + sqrt(1 - w1) Z2 with a weight that depends only on the
//! realized stage sizes; that identity is what the design verification in
//! [`crate::verification`] exercises. The trial-level analysis path needs
//! only [`z_statistic`] / [`proportion_test`], which reference no true mean.

use crate::error::{Error, Result};
use crate::numerics::std_normal_cdf;

/// Control-arm summary at final analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlArm {
    pub n0: u32,
    pub mean0: f64,
}

/// One active arm's data split into stage-1 (burn-in) and stage-2 (adaptive)
/// parts, against the shared control summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSplit {
    pub n1: u32,
    pub mean1: f64,
    pub n2: u32,
    pub mean2: f64,
    pub control: ControlArm,
}

impl StageSplit {
    /// Pooled mean over both treatment stages.
    pub fn pooled_mean(&self) -> f64 {
        let nt = (self.n1 + self.n2) as f64;
        (self.mean1 * self.n1 as f64 + self.mean2 * self.n2 as f64) / nt
    }
}

/// Result of a single arm-versus-placebo test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseTestResult {
    pub statistic: f64,
    /// One-sided upper-tail p-value, 1 - Phi(statistic).
    pub p_value: f64,
    /// Active arm index the test refers to.
    pub arm: usize,
}

/// Unweighted two-sample z statistic on the pooled treatment data:
/// (pooled mean - control mean) / (sigma sqrt(1/(n1+n2) + 1/n0)).
pub fn z_statistic(split: &StageSplit, sigma: f64) -> Result<f64> {
    if split.n1 + split.n2 == 0 {
        return Err(Error::Degenerate("z statistic on an empty treatment arm"));
    }
    if split.control.n0 == 0 {
        return Err(Error::Degenerate("z statistic on an empty control arm"));
    }
    let nt = (split.n1 + split.n2) as f64;
    let n0 = split.control.n0 as f64;
    let se = sigma * (1.0 / nt + 1.0 / n0).sqrt();
    Ok((split.pooled_mean() - split.control.mean0) / se)
}

/// Weight on the stage-1 component when the unweighted statistic is written
/// as sqrt(w1) Z1 + sqrt(1 - w1) Z2:
///
///   w1(b) = [n1 / (n1 + b)^2] / [1/(n1 + b) + 1/n0].
///
/// `b` is the (possibly non-integer) stage-2 treatment size; w1 is strictly
/// decreasing in b, which is the inequality the error-control proof rests on.
pub fn weight_w1(n1: u32, b: f64, n0: u32) -> f64 {
    debug_assert!(n1 >= 1 && n0 >= 1 && b >= 0.0);
    let n1 = n1 as f64;
    let n0 = n0 as f64;
    let total = n1 + b;
    (n1 / (total * total)) / (1.0 / total + 1.0 / n0)
}

/// Stage components (Z1, Z2) of the decomposition, centered at the true null
/// mean `mu0`. Z2 needs a non-empty second stage.
///
/// This is an analysis facility: the simulated trial never sees `mu0`.
pub fn z_components(split: &StageSplit, mu0: f64, sigma: f64) -> Result<(f64, f64)> {
    if split.n1 == 0 {
        return Err(Error::Degenerate("stage-1 component on an empty first stage"));
    }
    if split.n2 == 0 {
        return Err(Error::Degenerate("stage-2 component on an empty second stage"));
    }
    let n1 = split.n1 as f64;
    let a = split.n2 as f64;
    let n0 = split.control.n0 as f64;
    let z1 = n1.sqrt() * (split.mean1 - mu0) / sigma;
    let scale = (a / ((n1 + a) * (n1 + a)) + 1.0 / n0).sqrt();
    let z2 = (a / (n1 + a) * (split.mean2 - mu0) - (split.control.mean0 - mu0))
        / (sigma * scale);
    Ok((z1, z2))
}

/// Fixed-weight combination sqrt(w1) Z1 + sqrt(1 - w1) Z2 with a
/// pre-specified weight, the classical two-stage combination test.
pub fn chw_statistic(z1: f64, z2: f64, w1_fixed: f64) -> Result<f64> {
    if !(w1_fixed > 0.0 && w1_fixed < 1.0) {
        return Err(Error::OutOfDomain {
            name: "w1_fixed",
            range: "(0, 1)",
            value: w1_fixed,
        });
    }
    Ok(w1_fixed.sqrt() * z1 + (1.0 - w1_fixed).sqrt() * z2)
}

/// One-sided pooled test of proportions:
/// (R1/n1 - R0/n0) / sqrt(p(1-p)(1/n1 + 1/n0)) with p the pooled rate.
///
/// When the pooled rate is 0 or 1 both observed rates are equal, so the
/// statistic is defined as 0 (never rejects).
pub fn proportion_test(r1: u32, n1: u32, r0: u32, n0: u32) -> f64 {
    debug_assert!(n1 >= 1 && n0 >= 1 && r1 <= n1 && r0 <= n0);
    let pooled = (r1 + r0) as f64 / (n1 + n0) as f64;
    if pooled <= 0.0 || pooled >= 1.0 {
        return 0.0;
    }
    let diff = r1 as f64 / n1 as f64 - r0 as f64 / n0 as f64;
    diff / (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n0 as f64)).sqrt()
}

/// [`proportion_test`] with the half-unit continuity correction: the observed
/// rate difference is shrunk toward zero by (1/n1 + 1/n0)/2, floored so the
/// correction never flips its sign. The signed square root of the corrected
/// chi-squared statistic, the form most simulation software reports.
pub fn proportion_test_corrected(r1: u32, n1: u32, r0: u32, n0: u32) -> f64 {
    debug_assert!(n1 >= 1 && n0 >= 1 && r1 <= n1 && r0 <= n0);
    let pooled = (r1 + r0) as f64 / (n1 + n0) as f64;
    if pooled <= 0.0 || pooled >= 1.0 {
        return 0.0;
    }
    let inv = 1.0 / n1 as f64 + 1.0 / n0 as f64;
    let diff = r1 as f64 / n1 as f64 - r0 as f64 / n0 as f64;
    let shrunk = (diff.abs() - 0.5 * inv).max(0.0);
    diff.signum() * shrunk / (pooled * (1.0 - pooled) * inv).sqrt()
}

/// Packages a statistic with its one-sided upper-tail p-value.
pub fn pairwise_result(statistic: f64, arm: usize) -> PairwiseTestResult {
    PairwiseTestResult {
        statistic,
        p_value: 1.0 - std_normal_cdf(statistic),
        arm,
    }
}
