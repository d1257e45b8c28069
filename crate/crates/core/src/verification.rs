//! Numerical verification of the design's error-control guarantees.
//!
//! The unweighted z statistic in the adaptive design decomposes into
//! sqrt(w)Z1 + sqrt(1-w)Z2 with independent standard normal stages, where the
//! weight w depends on which arm won the first-stage comparison. The checks
//! here evaluate the resulting selection-region mixtures by quadrature and
//! Monte Carlo: the conditional rejection probability is decreasing in the
//! weight, the two-arm rejection probability never exceeds the nominal level
//! (with exact equality in the non-adaptive case), and the same bound holds
//! with three active arms.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::monte_carlo::RngStream;
use crate::numerics::{integrate_interval, integrate_weighted_normal, std_normal_cdf, std_normal_quantile};
use crate::statistics::weight_w1;

/// Beyond this point the standard normal density carries less mass than any
/// tolerance used here.
const Z_CUT: f64 = 9.0;
/// Outer adaptive quadrature tolerance.
const OUTER_TOL: f64 = 1e-9;
/// Inner (nested) quadrature tolerance; two inner calls back one outer node.
const INNER_TOL: f64 = 1e-11;
/// Parallel Monte Carlo chunk count; fixed so results never depend on the
/// worker count.
const MC_CHUNKS: u64 = 256;

/// Point query for the conditional rejection probability
/// Q(w1) = P(sqrt(w1)Z1 + sqrt(1-w1)Z2 > c | Z1 <= Z3 + c_prime).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Query {
    pub w1: f64,
    pub c: f64,
    pub c_prime: f64,
}

/// Query for the selection-mixture rejection bounds. Stage-1 arm sizes are
/// listed analyzed arm first; `betas` are the second-stage size multipliers
/// (relative to the stage-2 placebo size) awarded best arm first.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremQuery {
    /// Stage-1 sizes (n1 of the analyzed arm, then each competitor).
    pub n1_per_arm: Vec<u32>,
    /// Stage-2 placebo size the multipliers scale.
    pub n2_placebo: u32,
    /// Non-increasing, non-negative multipliers, one per rank.
    pub betas: Vec<f64>,
    /// Final placebo size entering the test statistic.
    pub n0: u32,
    pub alpha: f64,
    /// Common response mean under the null; shifts the selection thresholds
    /// when stage-1 arm sizes differ.
    pub mu0: f64,
}

impl TheoremQuery {
    fn validated(&self, arms: usize) -> Result<()> {
        if self.n1_per_arm.len() != arms || self.betas.len() != arms {
            return Err(Error::InvalidConfig(format!(
                "query: expected {arms} stage-1 sizes and {arms} multipliers, got {} and {}",
                self.n1_per_arm.len(),
                self.betas.len()
            )));
        }
        if self.n1_per_arm.iter().any(|&n| n == 0) || self.n0 == 0 || self.n2_placebo == 0 {
            return Err(Error::InvalidConfig(
                "query: all group sizes must be positive".into(),
            ));
        }
        if self.betas.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidConfig(
                "query.betas: must be finite and non-negative".into(),
            ));
        }
        if self.betas.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(format!(
                "query.betas: must be non-increasing, got {:?}",
                self.betas
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "query.alpha: must lie in (0, 0.5), got {}",
                self.alpha
            )));
        }
        if !self.mu0.is_finite() {
            return Err(Error::InvalidConfig("query.mu0: must be finite".into()));
        }
        Ok(())
    }

    /// Selection thresholds: competitor k wins over the analyzed arm when
    /// Z1 < Z1k + shift_k, shift_k = (sqrt(n1k) - sqrt(n11)) mu0.
    fn shifts(&self) -> Vec<f64> {
        let base = (self.n1_per_arm[0] as f64).sqrt();
        self.n1_per_arm[1..]
            .iter()
            .map(|&n| ((n as f64).sqrt() - base) * self.mu0)
            .collect()
    }

    /// Stage weights by rank: w1(beta_k * n2_placebo).
    fn weights(&self) -> Vec<f64> {
        self.betas
            .iter()
            .map(|&b| weight_w1(self.n1_per_arm[0], b * self.n2_placebo as f64, self.n0))
            .collect()
    }

    fn critical(&self) -> Result<f64> {
        std_normal_quantile(1.0 - self.alpha)
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
}

/// Conditional rejection probability of the reweighted statistic given the
/// analyzed arm lost the first-stage comparison. Decreasing in `w1`.
pub fn lemma1_q(q: &Lemma1Query) -> Result<f64> {
    if !(q.w1 > 0.0 && q.w1 < 1.0) {
        return Err(Error::OutOfDomain {
            name: "w1",
            range: "(0, 1)",
            value: q.w1,
        });
    }
    let denominator = std_normal_cdf(q.c_prime / std::f64::consts::SQRT_2);
    if denominator <= 0.0 {
        return Err(Error::Degenerate(
            "conditioning event has probability zero",
        ));
    }
    let (w, c, c_prime) = (q.w1, q.c, q.c_prime);
    let numerator = integrate_weighted_normal(
        |z| second_stage_tail(z, w, c) * (1.0 - std_normal_cdf(z - c_prime)),
        OUTER_TOL,
    )?;
    Ok((numerator / denominator).clamp(0.0, 1.0))
}

/// P(sqrt(w)z + sqrt(1-w)Z2 > c) for a fixed first-stage value z.
fn second_stage_tail(z: f64, w: f64, c: f64) -> f64 {
    1.0 - std_normal_cdf((c - w.sqrt() * z) / (1.0 - w).sqrt())
}

/// Monte Carlo oracle for the conditional rejection probability, evaluated
/// at every requested weight on one shared set of (Z1, Z2, Z3) draws.
/// Standard errors treat the draws landing in the conditioning event as the
/// effective sample.
pub fn lemma1_q_mc_oracle(
    c: f64,
    c_prime: f64,
    w1s: &[f64],
    draws: u64,
    master_seed: u64,
) -> Result<Vec<McEstimate>> {
    if draws == 0 {
        return Err(Error::InvalidConfig("draws: must be at least 1".into()));
    }
    for &w in w1s {
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::OutOfDomain {
                name: "w1",
                range: "(0, 1)",
                value: w,
            });
        }
    }
    let roots: Vec<(f64, f64)> = w1s.iter().map(|&w| (w.sqrt(), (1.0 - w).sqrt())).collect();
    let zero = || (0u64, vec![0u64; w1s.len()]);
    let (condition_count, joint_counts) = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = RngStream::new(master_seed, chunk).rng();
            let mut acc = zero();
            for _ in 0..chunk_len(draws, chunk) {
                let z1: f64 = rng.sample(rand_distr::StandardNormal);
                let z2: f64 = rng.sample(rand_distr::StandardNormal);
                let z3: f64 = rng.sample(rand_distr::StandardNormal);
                if z1 <= z3 + c_prime {
                    acc.0 += 1;
                    for (k, (rw, rc)) in roots.iter().enumerate() {
                        if rw * z1 + rc * z2 > c {
                            acc.1[k] += 1;
                        }
                    }
                }
            }
            acc
        })
        .reduce(zero, |mut a, b| {
            a.0 += b.0;
            for (x, y) in a.1.iter_mut().zip(b.1) {
                *x += y;
            }
            a
        });
    if condition_count == 0 {
        return Err(Error::Degenerate(
            "no draws landed in the conditioning event",
        ));
    }
    let k = condition_count as f64;
    Ok(joint_counts
        .iter()
        .map(|&m| {
            let value = m as f64 / k;
            McEstimate {
                value,
                se: (value * (1.0 - value) / k).sqrt(),
            }
        })
        .collect())
}

fn chunk_len(total: u64, chunk: u64) -> u64 {
    total / MC_CHUNKS + u64::from(chunk < total % MC_CHUNKS)
}

/// Grid evaluation of the conditional rejection probability with the largest
/// consecutive increase; the monotonicity claim passes when no increase
/// exceeds the quadrature tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest Q(w_{i+1}) - Q(w_i) over consecutive grid pairs; 0 for grids
    /// shorter than two points.
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks that the conditional rejection probability is non-increasing along
/// a strictly increasing weight grid.
pub fn lemma1_monotonicity_check(
    c: f64,
    c_prime: f64,
    grid: &[f64],
) -> Result<MonotonicityReport> {
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "grid: weights must be strictly increasing".into(),
        ));
    }
    let values: Vec<f64> = grid
        .iter()
        .map(|&w1| lemma1_q(&Lemma1Query { w1, c, c_prime }))
        .collect::<Result<_>>()?;
    let max_violation = values
        .windows(2)
        .map(|v| v[1] - v[0])
        .fold(0.0f64, f64::max);
    let tolerance = 1e-7;
    Ok(MonotonicityReport {
        grid: grid.to_vec(),
        values,
        max_violation,
        tolerance,
        pass: max_violation <= tolerance,
    })
}

/// True when the rank-ordered second-stage sizes give the claimed weight
/// ordering: a larger stage-2 size never increases the first-stage weight.
pub fn w1_ordering_check(n1: u32, n2_0: u32, n0: u32, beta1: f64, beta2: f64) -> bool {
    weight_w1(n1, beta1 * n2_0 as f64, n0) <= weight_w1(n1, beta2 * n2_0 as f64, n0)
}

/// Outcome of a randomized sweep of the weight-ordering inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingSweepReport {
    pub samples: u64,
    pub all_hold: bool,
    /// Largest observed w1(beta1 n2) - w1(beta2 n2); non-positive when the
    /// inequality holds everywhere.
    pub max_weight_gap: f64,
}

/// Samples random valid size/multiplier tuples and checks the weight
/// ordering on each.
pub fn w1_ordering_sweep(samples: u64, master_seed: u64) -> OrderingSweepReport {
    let mut rng = RngStream::new(master_seed, 0).rng();
    let mut all_hold = true;
    let mut max_weight_gap = f64::NEG_INFINITY;
    for _ in 0..samples {
        let n1 = rng.random_range(1..=200u32);
        let n2_0 = rng.random_range(1..=200u32);
        let n0 = rng.random_range(1..=400u32);
        let beta2: f64 = rng.random_range(0.0..3.0);
        let beta1 = beta2 + rng.random_range(0.0..3.0);
        all_hold &= w1_ordering_check(n1, n2_0, n0, beta1, beta2);
        let gap = weight_w1(n1, beta1 * n2_0 as f64, n0)
            - weight_w1(n1, beta2 * n2_0 as f64, n0);
        max_weight_gap = max_weight_gap.max(gap);
    }
    OrderingSweepReport {
        samples,
        all_hold,
        max_weight_gap,
    }
}

/// Rejection probability of the adaptively weighted statistic with its
/// nominal-level bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub probability: f64,
    pub alpha: f64,
    /// probability - alpha; non-positive within tolerance when the bound
    /// holds.
    pub slack: f64,
    pub tolerance: f64,
    pub bound_ok: bool,
}

/// Two-arm rejection probability of the unweighted statistic under the null:
/// the mixture over which arm won stage 1, each term a nested quadrature
/// over (competitor stage-1 statistic, analyzed-arm stage-1 statistic) with
/// the second-stage tail in closed form. Bounded by alpha, with equality
/// when the two multipliers coincide.
pub fn theorem1_rejection_bound(q: &TheoremQuery) -> Result<BoundReport> {
    q.validated(2)?;
    let c = q.critical()?;
    let shift = q.shifts()[0];
    let weights = q.weights();
    let (w_win, w_lose) = (weights[0], weights[1]);

    // Analyzed arm wins stage 1 when its statistic z clears u + shift, u
    // being the competitor's statistic; the winner carries the first
    // multiplier's weight, the loser the second's.
    let win = integrate_weighted_normal(
        |u| {
            let lo = u + shift;
            if lo >= Z_CUT {
                return 0.0;
            }
            integrate_interval(
                |z| crate::numerics::std_normal_pdf(z) * second_stage_tail(z, w_win, c),
                lo.max(-Z_CUT),
                Z_CUT,
                INNER_TOL,
            )
            .unwrap_or(f64::NAN)
        },
        OUTER_TOL,
    )?;
    let lose = integrate_weighted_normal(
        |u| {
            let hi = u + shift;
            if hi <= -Z_CUT {
                return 0.0;
            }
            integrate_interval(
                |z| crate::numerics::std_normal_pdf(z) * second_stage_tail(z, w_lose, c),
                -Z_CUT,
                hi.min(Z_CUT),
                INNER_TOL,
            )
            .unwrap_or(f64::NAN)
        },
        OUTER_TOL,
    )?;
    let probability = win + lose;
    if !probability.is_finite() {
        return Err(Error::Degenerate("inner quadrature failed to converge"));
    }
    let tolerance = 1e-6;
    Ok(BoundReport {
        probability,
        alpha: q.alpha,
        slack: probability - q.alpha,
        tolerance,
        bound_ok: probability <= q.alpha + tolerance,
    })
}

/// Direct two-stage simulation of the two-arm design: stage-1 means drawn
/// per arm, the winner decided by the standardized comparison, the
/// second-stage size set by the winner's multiplier, and the unweighted
/// statistic tested against the critical value.
pub fn theorem1_mc_oracle(
    q: &TheoremQuery,
    draws: u64,
    master_seed: u64,
) -> Result<McEstimate> {
    q.validated(2)?;
    if draws == 0 {
        return Err(Error::InvalidConfig("draws: must be at least 1".into()));
    }
    let c = q.critical()?;
    let n11 = q.n1_per_arm[0] as f64;
    let n12 = q.n1_per_arm[1] as f64;
    let n0 = q.n0 as f64;
    let stage2 = [
        q.betas[0] * q.n2_placebo as f64,
        q.betas[1] * q.n2_placebo as f64,
    ];
    let mu0 = q.mu0;
    let rejections: u64 = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = RngStream::new(master_seed, chunk).rng();
            let mut count = 0u64;
            for _ in 0..chunk_len(draws, chunk) {
                let g1: f64 = rng.sample(rand_distr::StandardNormal);
                let g2: f64 = rng.sample(rand_distr::StandardNormal);
                let g0: f64 = rng.sample(rand_distr::StandardNormal);
                let mean11 = mu0 + g1 / n11.sqrt();
                let mean12 = mu0 + g2 / n12.sqrt();
                let mean0 = mu0 + g0 / n0.sqrt();
                let arm_won = n11.sqrt() * mean11 >= n12.sqrt() * mean12;
                let n2 = stage2[usize::from(!arm_won)];
                let pooled = if n2 > 0.0 {
                    let gs: f64 = rng.sample(rand_distr::StandardNormal);
                    let mean2 = mu0 + gs / n2.sqrt();
                    (n11 * mean11 + n2 * mean2) / (n11 + n2)
                } else {
                    mean11
                };
                let s = (pooled - mean0) / (1.0 / (n11 + n2) + 1.0 / n0).sqrt();
                if s > c {
                    count += 1;
                }
            }
            count
        })
        .sum();
    let value = rejections as f64 / draws as f64;
    Ok(McEstimate {
        value,
        se: (value * (1.0 - value) / draws as f64).sqrt(),
    })
}

/// Three-arm bound evaluation: Monte Carlo over the stage statistics with a
/// one-dimensional quadrature cross-check, including the claimed equality of
/// the middle selection region with its fixed-weight counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem3Report {
    pub probability: f64,
    pub mc_se: f64,
    pub alpha: f64,
    /// probability <= alpha + 3 mc_se.
    pub bound_ok: bool,
    pub draws: u64,
    /// Same mixture evaluated by quadrature; agrees within Monte Carlo error.
    pub quadrature_probability: f64,
    /// Rejection mass on the middle selection region (analyzed arm ranked
    /// second), by simulation and by fixed-weight quadrature.
    pub middle_term_mc: f64,
    pub middle_term_mc_se: f64,
    pub middle_term_quadrature: f64,
    pub middle_term_ok: bool,
}

/// Three-arm rejection probability of the unweighted statistic under the
/// null. The analyzed arm ranks first, second, or third against two
/// competitors; each region carries its own weight. Monte Carlo is the
/// primary evaluation, checked against the factorized quadrature form.
pub fn theorem3_rejection_bound(
    q: &TheoremQuery,
    draws: u64,
    master_seed: u64,
) -> Result<Theorem3Report> {
    q.validated(3)?;
    if draws == 0 {
        return Err(Error::InvalidConfig("draws: must be at least 1".into()));
    }
    let c = q.critical()?;
    let shifts = q.shifts();
    let (sh2, sh3) = (shifts[0], shifts[1]);
    let weights = q.weights();
    let roots: Vec<(f64, f64)> = weights.iter().map(|&w| (w.sqrt(), (1.0 - w).sqrt())).collect();

    let zero = || (0u64, 0u64);
    let (rejections, middle_rejections) = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = RngStream::new(master_seed, chunk).rng();
            let mut acc = zero();
            for _ in 0..chunk_len(draws, chunk) {
                let z1: f64 = rng.sample(rand_distr::StandardNormal);
                let z12: f64 = rng.sample(rand_distr::StandardNormal);
                let z13: f64 = rng.sample(rand_distr::StandardNormal);
                let z2: f64 = rng.sample(rand_distr::StandardNormal);
                let t2 = z12 + sh2;
                let t3 = z13 + sh3;
                let rank = usize::from(z1 < t2) + usize::from(z1 < t3);
                let (rw, rc) = roots[rank];
                if rw * z1 + rc * z2 > c {
                    acc.0 += 1;
                    if rank == 1 {
                        acc.1 += 1;
                    }
                }
            }
            acc
        })
        .reduce(zero, |a, b| (a.0 + b.0, a.1 + b.1));

    let n = draws as f64;
    let probability = rejections as f64 / n;
    let mc_se = (probability * (1.0 - probability) / n).sqrt();
    let middle_term_mc = middle_rejections as f64 / n;
    let middle_term_mc_se = (middle_term_mc * (1.0 - middle_term_mc) / n).sqrt();

    // Conditioned on the analyzed arm's stage-1 value z, the two competitor
    // comparisons are independent, so each region's probability factorizes.
    let (w1, w2, w3) = (weights[0], weights[1], weights[2]);
    let quadrature_probability = integrate_weighted_normal(
        |z| {
            let p2 = std_normal_cdf(z - sh2);
            let p3 = std_normal_cdf(z - sh3);
            let top = p2 * p3;
            let middle = p2 + p3 - 2.0 * p2 * p3;
            let bottom = (1.0 - p2) * (1.0 - p3);
            second_stage_tail(z, w1, c) * top
                + second_stage_tail(z, w2, c) * middle
                + second_stage_tail(z, w3, c) * bottom
        },
        OUTER_TOL,
    )?;
    let middle_term_quadrature = integrate_weighted_normal(
        |z| {
            let p2 = std_normal_cdf(z - sh2);
            let p3 = std_normal_cdf(z - sh3);
            second_stage_tail(z, w2, c) * (p2 + p3 - 2.0 * p2 * p3)
        },
        OUTER_TOL,
    )?;

    Ok(Theorem3Report {
        probability,
        mc_se,
        alpha: q.alpha,
        bound_ok: probability <= q.alpha + 3.0 * mc_se,
        draws,
        quadrature_probability,
        middle_term_mc,
        middle_term_mc_se,
        middle_term_quadrature,
        middle_term_ok: (middle_term_mc - middle_term_quadrature).abs()
            <= 3.0 * middle_term_mc_se,
    })
}
