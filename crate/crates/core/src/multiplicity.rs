//! Familywise error control for many-to-one comparisons: Bonferroni and the
//! single-step / step-down max-statistic procedures with unequal arm sizes.
//!
//! The max-statistic adjustments exploit the shared control arm: the test
//! statistics are jointly normal with correlation lambda_i lambda_j, where
//! lambda_i = sqrt(n_i / (n_i + n0)), so every adjusted p-value is one call
//! to [`crate::numerics::mvn_common_control_exceedance`].

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{mvn_common_control_exceedance, std_normal_cdf};

/// Raw and adjusted one-sided p-values per active arm, plus the selection
/// order (ascending adjusted p, ties by ascending raw p, then by index; a
/// trial draws any remaining exact ties at random via
/// [`resolve_selection_order`]).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedResult {
    pub raw_p: Vec<f64>,
    pub adjusted_p: Vec<f64>,
    pub selection_order: Vec<usize>,
}

impl AdjustedResult {
    fn new(raw_p: Vec<f64>, adjusted_p: Vec<f64>) -> Self {
        // Clamp to keep the componentwise adjusted >= raw invariant exact in
        // the face of ~1e-9 quadrature error, then order.
        let adjusted_p: Vec<f64> = adjusted_p
            .iter()
            .zip(&raw_p)
            .map(|(&a, &r)| a.max(r).min(1.0))
            .collect();
        let mut order: Vec<usize> = (0..raw_p.len()).collect();
        order.sort_by(|&a, &b| {
            (adjusted_p[a], raw_p[a], a)
                .partial_cmp(&(adjusted_p[b], raw_p[b], b))
                .unwrap()
        });
        AdjustedResult {
            raw_p,
            adjusted_p,
            selection_order: order,
        }
    }
}

/// Identity adjustment, for designs analyzed without multiplicity control.
pub fn unadjusted(raw_p: &[f64]) -> AdjustedResult {
    AdjustedResult::new(raw_p.to_vec(), raw_p.to_vec())
}

/// Bonferroni: adjusted p is min(1, k * raw p) over k hypotheses.
pub fn bonferroni_adjust(raw_p: &[f64]) -> AdjustedResult {
    let k = raw_p.len() as f64;
    let adjusted = raw_p.iter().map(|&p| (k * p).min(1.0)).collect();
    AdjustedResult::new(raw_p.to_vec(), adjusted)
}

fn lambdas_for(arm_ns: &[u32], n0: u32) -> Result<Vec<f64>> {
    if arm_ns.iter().any(|&n| n == 0) || n0 == 0 {
        return Err(Error::InvalidConfig(
            "max-statistic adjustment needs positive arm and control sizes".into(),
        ));
    }
    Ok(arm_ns
        .iter()
        .map(|&n| (n as f64 / (n as f64 + n0 as f64)).sqrt())
        .collect())
}

/// Single-step max-statistic adjustment: each arm's adjusted p is the
/// probability that the largest of all k correlated statistics exceeds that
/// arm's observed value under the global null.
pub fn dunnett_single_step_adjust(
    statistics: &[f64],
    arm_ns: &[u32],
    n0: u32,
) -> Result<AdjustedResult> {
    if statistics.is_empty() || statistics.len() != arm_ns.len() {
        return Err(Error::InvalidConfig(
            "statistics and arm sizes must be non-empty and equal length".into(),
        ));
    }
    let lambdas = lambdas_for(arm_ns, n0)?;
    let raw: Vec<f64> = statistics.iter().map(|&s| 1.0 - std_normal_cdf(s)).collect();
    let adjusted = statistics
        .iter()
        .map(|&s| mvn_common_control_exceedance(s, &lambdas))
        .collect::<Result<Vec<f64>>>()?;
    Ok(AdjustedResult::new(raw, adjusted))
}

/// Step-down max-statistic adjustment: arms are taken in descending
/// statistic order, each tested against only the arms still in play (with
/// that subset's own correlations), and a running maximum enforces
/// monotonicity of the adjusted p-values along that order.
pub fn dunnett_step_down_adjust(
    statistics: &[f64],
    arm_ns: &[u32],
    n0: u32,
) -> Result<AdjustedResult> {
    if statistics.is_empty() || statistics.len() != arm_ns.len() {
        return Err(Error::InvalidConfig(
            "statistics and arm sizes must be non-empty and equal length".into(),
        ));
    }
    let lambdas = lambdas_for(arm_ns, n0)?;
    let raw: Vec<f64> = statistics.iter().map(|&s| 1.0 - std_normal_cdf(s)).collect();

    let mut by_stat: Vec<usize> = (0..statistics.len()).collect();
    by_stat.sort_by(|&a, &b| {
        statistics[b]
            .partial_cmp(&statistics[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut adjusted = vec![0.0; statistics.len()];
    let mut running_max = 0.0f64;
    for j in 0..by_stat.len() {
        let survivors: Vec<f64> = by_stat[j..].iter().map(|&g| lambdas[g]).collect();
        let q = mvn_common_control_exceedance(statistics[by_stat[j]], &survivors)?;
        running_max = running_max.max(q);
        adjusted[by_stat[j]] = running_max;
    }
    Ok(AdjustedResult::new(raw, adjusted))
}

/// The selection order with any exact ties in (adjusted p, raw p) put into
/// uniformly random order; index 0 is the selected arm.
pub fn resolve_selection_order(adj: &AdjustedResult, rng: &mut impl Rng) -> Vec<usize> {
    let mut order = adj.selection_order.clone();
    let key = |g: usize| (adj.adjusted_p[g], adj.raw_p[g]);
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && key(order[end]) == key(order[start]) {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].shuffle(rng);
        }
        start = end;
    }
    order
}

/// The arm with the smallest adjusted p-value; exact ties (on adjusted then
/// raw p) are broken uniformly at random.
pub fn select_best(adj: &AdjustedResult, rng: &mut impl Rng) -> usize {
    let first = adj.selection_order[0];
    let key = (adj.adjusted_p[first], adj.raw_p[first]);
    let tied: Vec<usize> = adj
        .selection_order
        .iter()
        .copied()
        .take_while(|&g| (adj.adjusted_p[g], adj.raw_p[g]) == key)
        .collect();
    if tied.len() == 1 {
        first
    } else {
        tied[rng.random_range(0..tied.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bonferroni_examples() {
        let r = bonferroni_adjust(&[0.01, 0.5]);
        assert_eq!(r.adjusted_p, vec![0.02, 1.0]);
        let r = bonferroni_adjust(&[0.03]);
        assert_eq!(r.adjusted_p, vec![0.03]);
        let r = bonferroni_adjust(&[0.0125, 0.0125]);
        assert_eq!(r.adjusted_p, vec![0.025, 0.025]);
    }

    #[test]
    fn single_step_one_arm_is_raw() {
        let r = dunnett_single_step_adjust(&[1.7], &[30], 30).unwrap();
        assert!((r.adjusted_p[0] - r.raw_p[0]).abs() < 1e-8);
        let r = dunnett_single_step_adjust(&[40.0, 1.0], &[30, 30], 30).unwrap();
        assert!(r.adjusted_p[0] < 1e-12);
    }

    #[test]
    fn single_step_matches_mc_oracle() {
        use rand::Rng as _;
        // Three equal arms, n = n0 = 30, all statistics at 2.2. Oracle: a
        // 1e7-draw simulation of the max of the correlated statistics.
        let r = dunnett_single_step_adjust(&[2.2, 2.2, 2.2], &[30, 30, 30], 30).unwrap();
        let lambda = (30.0f64 / 60.0).sqrt();
        let s = (1.0 - lambda * lambda).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 10_000_000u64;
        let mut hits = 0u64;
        for _ in 0..draws {
            let u: f64 = rng.sample(rand_distr::StandardNormal);
            let mut max = f64::NEG_INFINITY;
            for _ in 0..3 {
                let v: f64 = rng.sample(rand_distr::StandardNormal);
                max = max.max(lambda * u + s * v);
            }
            if max > 2.2 {
                hits += 1;
            }
        }
        let oracle = hits as f64 / draws as f64;
        for g in 0..3 {
            assert!(
                (r.adjusted_p[g] - oracle).abs() < 5e-4,
                "arm {g}: {} vs oracle {oracle}",
                r.adjusted_p[g]
            );
        }
    }

    #[test]
    fn step_down_two_arm_hand_case() {
        let r = dunnett_step_down_adjust(&[2.5, 1.0], &[40, 40], 40).unwrap();
        let both = mvn_common_control_exceedance(
            2.5,
            &[(40.0f64 / 80.0).sqrt(), (40.0f64 / 80.0).sqrt()],
        )
        .unwrap();
        assert!((r.adjusted_p[0] - both).abs() < 1e-9);
        let second = (1.0 - std_normal_cdf(1.0)).max(both);
        assert!((r.adjusted_p[1] - second).abs() < 1e-9);
        // One arm degenerates to the raw p-value.
        let r = dunnett_step_down_adjust(&[1.3], &[25], 50).unwrap();
        assert!((r.adjusted_p[0] - r.raw_p[0]).abs() < 1e-8);
    }

    fn pseudo_inputs(k: u64) -> (Vec<f64>, Vec<u32>, u32) {
        // Cheap deterministic scrambling, enough to sweep the input space.
        let mut x = k.wrapping_mul(0x9e3779b97f4a7c15) | 1;
        let mut next = move || {
            x ^= x >> 31;
            x = x.wrapping_mul(0xd6e8feb86659fd93);
            x ^= x >> 27;
            (x >> 11) as f64 / (1u64 << 53) as f64
        };
        let arms = 2 + (next() * 3.0) as usize;
        let stats: Vec<f64> = (0..arms).map(|_| next() * 8.0 - 3.0).collect();
        let ns: Vec<u32> = (0..arms).map(|_| 5 + (next() * 80.0) as u32).collect();
        let n0 = 5 + (next() * 80.0) as u32;
        (stats, ns, n0)
    }

    #[test]
    fn step_down_never_exceeds_single_step() {
        for k in 0..200 {
            let (stats, ns, n0) = pseudo_inputs(k);
            let ss = dunnett_single_step_adjust(&stats, &ns, n0).unwrap();
            let sd = dunnett_step_down_adjust(&stats, &ns, n0).unwrap();
            for g in 0..stats.len() {
                assert!(
                    sd.adjusted_p[g] <= ss.adjusted_p[g] + 1e-9,
                    "case {k} arm {g}: {} vs {}",
                    sd.adjusted_p[g],
                    ss.adjusted_p[g]
                );
                assert!(sd.adjusted_p[g] >= sd.raw_p[g]);
                assert!(ss.adjusted_p[g] >= ss.raw_p[g]);
                assert!((0.0..=1.0).contains(&sd.adjusted_p[g]));
                assert!((0.0..=1.0).contains(&ss.adjusted_p[g]));
            }
        }
    }

    #[test]
    fn raising_a_statistic_never_raises_its_adjusted_p() {
        for k in 0..60 {
            let (mut stats, ns, n0) = pseudo_inputs(k);
            for adjust in [
                dunnett_single_step_adjust as fn(&[f64], &[u32], u32) -> Result<AdjustedResult>,
                dunnett_step_down_adjust,
            ] {
                let before = adjust(&stats, &ns, n0).unwrap();
                let bumped = stats[0] + 0.5;
                let old = std::mem::replace(&mut stats[0], bumped);
                let after = adjust(&stats, &ns, n0).unwrap();
                assert!(
                    after.adjusted_p[0] <= before.adjusted_p[0] + 1e-9,
                    "case {k}: {} -> {}",
                    before.adjusted_p[0],
                    after.adjusted_p[0]
                );
                stats[0] = old;
            }
        }
    }

    #[test]
    fn selection_order_and_select_best() {
        let adj = unadjusted(&[0.01, 0.20, 0.03]);
        assert_eq!(adj.selection_order, vec![0, 2, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(select_best(&adj, &mut rng), 0);

        // Adjusted tie resolved by raw p (the larger statistic wins).
        let adj = AdjustedResult::new(vec![0.018, 0.0082], vec![0.025, 0.025]);
        assert_eq!(adj.selection_order[0], 1);
        assert_eq!(select_best(&adj, &mut rng), 1);
    }

    #[test]
    fn full_tie_selects_uniformly() {
        let adj = unadjusted(&[0.04, 0.04, 0.04]);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut counts = [0u32; 3];
        for _ in 0..9000 {
            counts[select_best(&adj, &mut rng)] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / 9000.0;
            assert!((freq - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
        // The resolved order shuffles the tie class too.
        let order = resolve_selection_order(&adj, &mut rng);
        assert_eq!(order.len(), 3);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn degenerate_sizes_rejected() {
        assert!(dunnett_single_step_adjust(&[1.0], &[0], 30).is_err());
        assert!(dunnett_step_down_adjust(&[1.0], &[30], 0).is_err());
        assert!(dunnett_single_step_adjust(&[], &[], 30).is_err());
        assert!(dunnett_single_step_adjust(&[1.0, 2.0], &[30], 30).is_err());
    }
}
