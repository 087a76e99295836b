//! Confidence intervals and hypothesis tests for the iROAS.
//!
//! Two routes: a Student-t approximation built on the pair-level residual
//! standard error, and randomization (permutation) tests of a sharp null,
//! optionally inverted into a confidence interval over a candidate grid.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, SupergeoError};
use crate::experiment::{
    draw_assignment, empirical_estimator, pair_diffs, plan_spend, Assignment, ExperimentConfig,
    Observed,
};
use crate::geo_data::GeoAggregates;
use crate::rng;
use crate::scoring::SupergeoDesign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    TApprox,
    PermutationInversion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: CiMethod,
}

impl ConfidenceInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationTestResult {
    pub p_value: f64,
    pub num_draws: usize,
    pub observed_stat: f64,
    pub theta_star: f64,
}

pub(crate) fn t_quantile(df: f64, p: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("df >= 1")
        .inverse_cdf(p)
}

fn ratio_and_se(diffs: &[(f64, f64)], trimmed: &[usize]) -> Result<(f64, f64, usize)> {
    let keep: Vec<usize> = (0..diffs.len())
        .filter(|i| trimmed.binary_search(i).is_err())
        .collect();
    let kp = keep.len();
    if kp < 2 {
        return Err(SupergeoError::TooFewPairs(kp));
    }
    let dr: f64 = keep.iter().map(|&i| diffs[i].0).sum();
    let ds: f64 = keep.iter().map(|&i| diffs[i].1).sum();
    let scale: f64 = keep.iter().map(|&i| diffs[i].1.abs()).sum();
    if ds.abs() < 1e-12 * scale.max(1e-300) {
        return Err(SupergeoError::ZeroDenominator);
    }
    let theta = dr / ds;
    let ss: f64 = keep
        .iter()
        .map(|&i| {
            let e = diffs[i].0 - theta * diffs[i].1;
            e * e
        })
        .sum();
    let se = (ss * kp as f64 / (kp as f64 - 1.0)).sqrt() / ds.abs();
    Ok((theta, se, kp))
}

/// Student-t confidence interval around the untrimmed-pair ratio estimate:
/// point +- t_{K'-1, (1+level)/2} * SE.
pub fn ci_t_approx(
    diffs: &[(f64, f64)],
    level: f64,
    trimmed: &[usize],
) -> Result<ConfidenceInterval> {
    if !(0.0 < level && level < 1.0) {
        return Err(SupergeoError::InvalidConfig(format!(
            "confidence level must be in (0,1), got {level}"
        )));
    }
    let (theta, se, kp) = ratio_and_se(diffs, trimmed)?;
    let half = t_quantile((kp - 1) as f64, (1.0 + level) / 2.0) * se;
    Ok(ConfidenceInterval {
        lower: theta - half,
        upper: theta + half,
        level,
        method: CiMethod::TApprox,
    })
}

/// All 2^K assignments, or `m_perm` counter-seeded draws when 2^K is larger.
fn permutation_draws(design: &SupergeoDesign, m_perm: usize, seed: u64) -> Vec<Assignment> {
    let k = design.n_pairs();
    if k < usize::BITS as usize - 1 && (1usize << k) <= m_perm {
        (0..(1u64 << k))
            .map(|code| {
                let signs: Vec<i8> = (0..k)
                    .map(|i| if code >> i & 1 == 0 { 1 } else { -1 })
                    .collect();
                crate::experiment::assignment_from_signs(design, &signs, code)
            })
            .collect()
    } else {
        (0..m_perm as u64)
            .map(|j| draw_assignment(design, rng::derive(seed, j)))
            .collect()
    }
}

/// Baseline responses with the hypothesized effect removed from the
/// currently treated geos.
fn remove_effect(observed: &Observed, aggs: &[GeoAggregates], theta_star: f64) -> Vec<f64> {
    observed
        .response
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if observed.treated[i] {
                let delta = observed.spend[i] - aggs[i].initial_spend;
                r - theta_star * delta
            } else {
                r
            }
        })
        .collect()
}

fn reinject(
    baseline: &[f64],
    aggs: &[GeoAggregates],
    assignment: &Assignment,
    cfg: &ExperimentConfig,
    theta_star: f64,
) -> Result<Observed> {
    let plan = plan_spend(assignment, aggs, cfg)?;
    let mut response = Vec::with_capacity(aggs.len());
    let mut spend = Vec::with_capacity(aggs.len());
    let mut treated = Vec::with_capacity(aggs.len());
    for (g, a) in aggs.iter().enumerate() {
        let is_treated = assignment.treated.binary_search(&a.geo).is_ok();
        response.push(baseline[g] + theta_star * plan.delta_spend[g]);
        spend.push(a.initial_spend + plan.delta_spend[g]);
        treated.push(is_treated);
    }
    Ok(Observed {
        geos: aggs.iter().map(|a| a.geo.clone()).collect(),
        response,
        spend,
        treated,
    })
}

/// Randomization test of the sharp null theta = theta_star: strip the
/// hypothesized effect from the observed outcomes, re-draw assignments,
/// re-inject under the null, and compare |theta_hat_a - theta_star| against
/// the observed statistic.
pub fn permutation_test(
    design: &SupergeoDesign,
    observed: &Observed,
    aggs: &[GeoAggregates],
    assignment: &Assignment,
    cfg: &ExperimentConfig,
    theta_star: f64,
    m_perm: usize,
    seed: u64,
) -> Result<PermutationTestResult> {
    let theta_hat = empirical_estimator(observed, assignment)?;
    let observed_stat = (theta_hat - theta_star).abs();
    let baseline = remove_effect(observed, aggs, theta_star);

    let draws = permutation_draws(design, m_perm, seed);
    let mut exceed = 0usize;
    for a in &draws {
        let obs_a = reinject(&baseline, aggs, a, cfg, theta_star)?;
        let theta_a = empirical_estimator(&obs_a, a)?;
        if (theta_a - theta_star).abs() >= observed_stat {
            exceed += 1;
        }
    }
    let num_draws = draws.len();
    Ok(PermutationTestResult {
        p_value: (1 + exceed) as f64 / (num_draws + 1) as f64,
        num_draws,
        observed_stat,
        theta_star,
    })
}

/// Invert the permutation test over a theta grid: the CI is the hull of grid
/// points whose sharp null is not rejected at 1 - level.
///
/// The default grid spans point estimate +- 5 SE at 101 points.
#[allow(clippy::too_many_arguments)]
pub fn invert_permutation_ci(
    design: &SupergeoDesign,
    observed: &Observed,
    aggs: &[GeoAggregates],
    assignment: &Assignment,
    cfg: &ExperimentConfig,
    level: f64,
    grid: Option<Vec<f64>>,
    m_perm: usize,
    seed: u64,
) -> Result<ConfidenceInterval> {
    if !(0.0 < level && level < 1.0) {
        return Err(SupergeoError::InvalidConfig(format!(
            "confidence level must be in (0,1), got {level}"
        )));
    }
    let grid = match grid {
        Some(g) => g,
        None => {
            let diffs = pair_diffs(observed, assignment, design)?;
            let (theta, se, _) = ratio_and_se(&diffs, &[])?;
            let span = 5.0 * se;
            (0..101)
                .map(|i| theta - span + 2.0 * span * i as f64 / 100.0)
                .collect()
        }
    };

    let alpha = 1.0 - level;
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for &theta_star in &grid {
        let result = permutation_test(
            design, observed, aggs, assignment, cfg, theta_star, m_perm, seed,
        )?;
        if result.p_value > alpha {
            lower = lower.min(theta_star);
            upper = upper.max(theta_star);
        }
    }
    if lower > upper {
        return Err(SupergeoError::EmptyAcceptanceRegion);
    }
    Ok(ConfidenceInterval {
        lower,
        upper,
        level,
        method: CiMethod::PermutationInversion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::EffectModel;
    use crate::experiment::inject_effects;
    use crate::geo_data::GeoId;
    use crate::scoring::SupergeoPair;

    fn aggs_of(rows: &[(&str, f64, f64)]) -> Vec<GeoAggregates> {
        let mut rows: Vec<_> = rows.to_vec();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        rows.iter()
            .map(|&(id, r, s)| GeoAggregates {
                geo: GeoId::from(id),
                pretest_response: r,
                test_response: r,
                pretest_spend: s,
                test_spend: s,
                initial_spend: s,
            })
            .collect()
    }

    fn pair_design(geos: &[(&str, &str)]) -> SupergeoDesign {
        SupergeoDesign::new(
            geos.iter()
                .map(|&(p, m)| SupergeoPair {
                    plus: vec![GeoId::from(p)],
                    minus: vec![GeoId::from(m)],
                    score: 0.0,
                })
                .collect(),
            true,
        )
    }

    #[test]
    fn zero_residuals_give_zero_width() {
        let diffs = vec![(5.0, 2.0), (10.0, 4.0), (2.5, 1.0)];
        let ci = ci_t_approx(&diffs, 0.8, &[]).unwrap();
        assert_eq!(ci.lower, ci.upper);
        assert!((ci.lower - 2.5).abs() < 1e-12);
    }

    #[test]
    fn two_pairs_is_wide_but_contains_point() {
        let diffs = vec![(5.0, 2.0), (12.0, 4.0)];
        let ci = ci_t_approx(&diffs, 0.8, &[]).unwrap();
        let point = 17.0 / 6.0;
        assert!(ci.contains(point));
        assert!(ci.upper - ci.lower > 0.0);
        assert!(matches!(
            ci_t_approx(&diffs[..1], 0.8, &[]),
            Err(SupergeoError::TooFewPairs(1))
        ));
    }

    #[test]
    fn t_width_shrinks_with_more_pairs_at_fixed_se() {
        // quantile monotonicity in the degrees of freedom
        let mut last = f64::INFINITY;
        for df in [1.0, 2.0, 5.0, 20.0, 100.0] {
            let q = t_quantile(df, 0.9);
            assert!(q < last);
            last = q;
        }
    }

    fn noiseless_setup() -> (SupergeoDesign, Vec<GeoAggregates>, Vec<f64>) {
        let design = pair_design(&[("a", "b"), ("c", "d"), ("e", "f"), ("g", "h")]);
        let aggs = aggs_of(&[
            ("a", 10.0, 3.0),
            ("b", 10.0, 3.0),
            ("c", 20.0, 5.0),
            ("d", 20.0, 5.0),
            ("e", 30.0, 7.0),
            ("f", 30.0, 7.0),
            ("g", 40.0, 9.0),
            ("h", 40.0, 9.0),
        ]);
        let theta_g = vec![2.0; 8];
        (design, aggs, theta_g)
    }

    #[test]
    fn perfect_null_gives_p_one() {
        let (design, aggs, theta_g) = noiseless_setup();
        let cfg = ExperimentConfig::heavyup(4.0);
        let assignment = draw_assignment(&design, 7);
        let plan = plan_spend(&assignment, &aggs, &cfg).unwrap();
        let observed = inject_effects(&aggs, &assignment, &plan, &theta_g);
        // theta* equals the true theta; in a noiseless perfectly matched
        // design every re-drawn estimate coincides with the observed one
        let result =
            permutation_test(&design, &observed, &aggs, &assignment, &cfg, 2.0, 64, 1).unwrap();
        assert_eq!(result.p_value, 1.0);
        assert_eq!(result.num_draws, 16); // full enumeration of 2^4
    }

    #[test]
    fn distant_null_gives_minimal_p() {
        let (design, aggs, theta_g) = noiseless_setup();
        let cfg = ExperimentConfig::heavyup(4.0);
        let assignment = draw_assignment(&design, 7);
        let plan = plan_spend(&assignment, &aggs, &cfg).unwrap();
        let observed = inject_effects(&aggs, &assignment, &plan, &theta_g);
        let result = permutation_test(
            &design, &observed, &aggs, &assignment, &cfg, 1000.0, 999, 1,
        )
        .unwrap();
        // spend sides are balanced, so the null-implied estimates cluster at
        // theta*; only draws matching the observed sign pattern tie
        assert!(result.p_value <= 2.0 / (result.num_draws + 1) as f64);
        assert!(result.p_value >= 1.0 / (result.num_draws + 1) as f64);
        let _ = EffectModel::homogeneous(1.0);
    }

    #[test]
    fn inverted_ci_contains_truth_in_noiseless_case() {
        let (design, aggs, theta_g) = noiseless_setup();
        let cfg = ExperimentConfig::heavyup(4.0);
        let assignment = draw_assignment(&design, 7);
        let plan = plan_spend(&assignment, &aggs, &cfg).unwrap();
        let observed = inject_effects(&aggs, &assignment, &plan, &theta_g);
        let grid: Vec<f64> = (0..81).map(|i| i as f64 * 0.05).collect();
        let ci = invert_permutation_ci(
            &design,
            &observed,
            &aggs,
            &assignment,
            &cfg,
            0.8,
            Some(grid),
            256,
            1,
        )
        .unwrap();
        assert!(ci.contains(2.0), "ci = [{}, {}]", ci.lower, ci.upper);
    }
}
