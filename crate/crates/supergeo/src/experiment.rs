//! Within-pair randomization, heavy-up spend injection, and the empirical
//! and trimmed-match iROAS estimators.
//!
//! All randomness is counter-based: the sign of pair k under seed s is a pure
//! function of (s, k), so any iteration of a simulation can be reproduced in
//! isolation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, SupergeoError};
use crate::geo_data::{GeoAggregates, GeoId};
use crate::rng;
use crate::scoring::SupergeoDesign;

/// Per-pair random signs and the induced treatment/control geo sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// +1: the pair's plus side is treated; -1: the minus side is treated.
    pub signs: Vec<i8>,
    pub treated: Vec<GeoId>,
    pub control: Vec<GeoId>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Total extra spend injected into the treatment group.
    pub budget: f64,
    /// Heavy-up is the only supported treatment type.
    pub heavyup: bool,
}

impl ExperimentConfig {
    pub fn heavyup(budget: f64) -> Self {
        ExperimentConfig {
            budget,
            heavyup: true,
        }
    }
}

/// Proportional spend increases for one assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpendPlan {
    /// r = budget / total treated initial spend.
    pub rate: f64,
    /// Delta spend per geo in aggregate order; zero for control geos.
    pub delta_spend: Vec<f64>,
}

/// Observed test-window outcomes per geo, in aggregate order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observed {
    pub geos: Vec<GeoId>,
    pub response: Vec<f64>,
    pub spend: Vec<f64>,
    pub treated: Vec<bool>,
}

impl Observed {
    pub fn index_of(&self, id: &GeoId) -> Result<usize> {
        self.geos
            .binary_search(id)
            .map_err(|_| SupergeoError::UnknownGeo(id.to_string()))
    }
}

/// The three error terms of the heterogeneous-effect decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    /// Matching error: (1/B) sum_k A_k (Z_+ - Z_-).
    pub err1: f64,
    /// Within-group heterogeneity imbalance.
    pub err2: f64,
    /// Treatment-group heterogeneity weighted by the spend increase.
    pub err3: f64,
    /// theta_hat - theta.
    pub total: f64,
}

/// Draw K independent fair signs keyed by (seed, pair index).
pub fn draw_assignment(design: &SupergeoDesign, seed: u64) -> Assignment {
    let mut signs = Vec::with_capacity(design.n_pairs());
    let mut treated = Vec::new();
    let mut control = Vec::new();
    for (k, pair) in design.pairs.iter().enumerate() {
        let s = rng::sign(seed, k as u64);
        signs.push(s);
        let (t, c) = if s == 1 {
            (&pair.plus, &pair.minus)
        } else {
            (&pair.minus, &pair.plus)
        };
        treated.extend(t.iter().cloned());
        control.extend(c.iter().cloned());
    }
    treated.sort();
    control.sort();
    Assignment {
        signs,
        treated,
        control,
        seed,
    }
}

/// Build an assignment from explicit signs (used for exhaustive enumeration
/// of the 2^K assignment space).
pub fn assignment_from_signs(design: &SupergeoDesign, signs: &[i8], seed: u64) -> Assignment {
    let mut treated = Vec::new();
    let mut control = Vec::new();
    for (pair, &s) in design.pairs.iter().zip(signs) {
        let (t, c) = if s == 1 {
            (&pair.plus, &pair.minus)
        } else {
            (&pair.minus, &pair.plus)
        };
        treated.extend(t.iter().cloned());
        control.extend(c.iter().cloned());
    }
    treated.sort();
    control.sort();
    Assignment {
        signs: signs.to_vec(),
        treated,
        control,
        seed,
    }
}

/// All 2^K assignments of a design, in sign-code order.
pub fn enumerate_assignments(design: &SupergeoDesign) -> Vec<Assignment> {
    let k = design.n_pairs();
    assert!(k < 63, "enumeration only makes sense for small K");
    (0..(1u64 << k))
        .map(|code| {
            let signs: Vec<i8> = (0..k)
                .map(|i| if code >> i & 1 == 0 { 1 } else { -1 })
                .collect();
            assignment_from_signs(design, &signs, code)
        })
        .collect()
}

/// Proportional heavy-up: r = B / sum of treated initial spends, recomputed
/// for every assignment.
pub fn plan_spend(
    assignment: &Assignment,
    aggs: &[GeoAggregates],
    cfg: &ExperimentConfig,
) -> Result<SpendPlan> {
    let treated_spend: f64 = aggs
        .iter()
        .filter(|a| assignment.treated.binary_search(&a.geo).is_ok())
        .map(|a| a.initial_spend)
        .sum();
    if treated_spend <= 0.0 {
        return Err(SupergeoError::ZeroTreatedSpend);
    }
    let rate = cfg.budget / treated_spend;
    let delta_spend = aggs
        .iter()
        .map(|a| {
            if assignment.treated.binary_search(&a.geo).is_ok() {
                rate * a.initial_spend
            } else {
                0.0
            }
        })
        .collect();
    Ok(SpendPlan { rate, delta_spend })
}

/// Inject linear-model effects into the test window: a treated geo's
/// response grows by theta_g * delta spend, controls are untouched.
pub fn inject_effects(
    aggs: &[GeoAggregates],
    assignment: &Assignment,
    plan: &SpendPlan,
    theta_g: &[f64],
) -> Observed {
    let mut geos = Vec::with_capacity(aggs.len());
    let mut response = Vec::with_capacity(aggs.len());
    let mut spend = Vec::with_capacity(aggs.len());
    let mut treated = Vec::with_capacity(aggs.len());
    for (g, a) in aggs.iter().enumerate() {
        let is_treated = assignment.treated.binary_search(&a.geo).is_ok();
        geos.push(a.geo.clone());
        response.push(a.test_response + theta_g[g] * plan.delta_spend[g]);
        spend.push(a.initial_spend + plan.delta_spend[g]);
        treated.push(is_treated);
    }
    Observed {
        geos,
        response,
        spend,
        treated,
    }
}

/// Empirical estimator: ratio of treatment-minus-control response and spend
/// differences over the geos in the experiment (treated or control).
pub fn empirical_estimator(observed: &Observed, assignment: &Assignment) -> Result<f64> {
    let mut dr = 0.0;
    let mut ds = 0.0;
    let mut total_spend = 0.0;
    for (i, geo) in observed.geos.iter().enumerate() {
        let sign = if assignment.treated.binary_search(geo).is_ok() {
            1.0
        } else if assignment.control.binary_search(geo).is_ok() {
            -1.0
        } else {
            continue;
        };
        dr += sign * observed.response[i];
        ds += sign * observed.spend[i];
        total_spend += observed.spend[i];
    }
    if ds.abs() < 1e-12 * total_spend {
        return Err(SupergeoError::ZeroDenominator);
    }
    Ok(dr / ds)
}

/// Signed per-pair response and spend differences (treatment minus control).
pub fn pair_diffs(
    observed: &Observed,
    assignment: &Assignment,
    design: &SupergeoDesign,
) -> Result<Vec<(f64, f64)>> {
    design
        .pairs
        .iter()
        .zip(&assignment.signs)
        .map(|(pair, &sign)| {
            let side = |ids: &[GeoId]| -> Result<(f64, f64)> {
                let mut r = 0.0;
                let mut s = 0.0;
                for id in ids {
                    let i = observed.index_of(id)?;
                    r += observed.response[i];
                    s += observed.spend[i];
                }
                Ok((r, s))
            };
            let (rp, sp) = side(&pair.plus)?;
            let (rm, sm) = side(&pair.minus)?;
            let a = sign as f64;
            Ok((a * (rp - rm), a * (sp - sm)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimmedEstimate {
    pub theta: f64,
    /// Pair indices removed at the chosen trim level.
    pub trimmed_pairs: Vec<usize>,
    pub se: f64,
    pub q_star: usize,
    pub converged: bool,
}

const FIXED_POINT_TOL: f64 = 1e-9;
const FIXED_POINT_MAX_ITERS: usize = 100;

fn ratio_over(diffs: &[(f64, f64)], keep: &[usize]) -> Result<f64> {
    let dr: f64 = keep.iter().map(|&k| diffs[k].0).sum();
    let ds: f64 = keep.iter().map(|&k| diffs[k].1).sum();
    let scale: f64 = keep.iter().map(|&k| diffs[k].1.abs()).sum();
    if ds.abs() < 1e-12 * scale.max(1e-300) {
        return Err(SupergeoError::ZeroDenominator);
    }
    Ok(dr / ds)
}

/// Largest-|residual| pairs to trim at theta; ties broken by pair index.
fn trim_set(diffs: &[(f64, f64)], theta: f64, q: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    let resid = |k: usize| (diffs[k].0 - theta * diffs[k].1).abs();
    order.sort_by(|&a, &b| resid(b).total_cmp(&resid(a)).then(a.cmp(&b)));
    let mut trimmed: Vec<usize> = order.into_iter().take(q).collect();
    trimmed.sort_unstable();
    trimmed
}

/// Fixed-point trimmed ratio estimator at trim count q.
fn trimmed_theta_q(diffs: &[(f64, f64)], q: usize, start: f64) -> Result<(f64, Vec<usize>, bool)> {
    let k = diffs.len();
    let mut theta = start;
    let mut trimmed = trim_set(diffs, theta, q);
    let mut converged = false;
    for _ in 0..FIXED_POINT_MAX_ITERS {
        let keep: Vec<usize> = (0..k).filter(|i| trimmed.binary_search(i).is_err()).collect();
        let next = ratio_over(diffs, &keep)?;
        let done = (next - theta).abs() <= FIXED_POINT_TOL * theta.abs().max(1.0);
        theta = next;
        trimmed = trim_set(diffs, theta, q);
        if done {
            converged = true;
            break;
        }
    }
    Ok((theta, trimmed, converged))
}

/// Studentized residual-based standard error of the ratio estimator over the
/// untrimmed pairs.
fn residual_se(diffs: &[(f64, f64)], theta: f64, keep: &[usize]) -> f64 {
    let kp = keep.len();
    if kp < 2 {
        return f64::INFINITY;
    }
    let ss: f64 = keep
        .iter()
        .map(|&i| {
            let e = diffs[i].0 - theta * diffs[i].1;
            e * e
        })
        .sum();
    let ds: f64 = keep.iter().map(|&i| diffs[i].1).sum();
    (ss * kp as f64 / (kp as f64 - 1.0)).sqrt() / ds.abs()
}

fn t_quantile(df: f64, p: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("df >= 1")
        .inverse_cdf(p)
}

/// Trimmed-match estimator: for each trim count q up to
/// floor(max_trim_fraction * K), solve the trimmed ratio fixed point and pick
/// the q minimizing the width proxy t_{K-q-1, 0.975} * SE_q.
pub fn trimmed_match_estimator(
    observed: &Observed,
    assignment: &Assignment,
    design: &SupergeoDesign,
    max_trim_fraction: f64,
) -> Result<TrimmedEstimate> {
    let k = design.n_pairs();
    if k < 3 {
        return Err(SupergeoError::TooFewPairs(k));
    }
    let diffs = pair_diffs(observed, assignment, design)?;
    let start = ratio_over(&diffs, &(0..k).collect::<Vec<_>>())?;

    let q_max = ((max_trim_fraction * k as f64).floor() as usize).min(k - 2);
    let mut best: Option<TrimmedEstimate> = None;
    let mut best_width = f64::INFINITY;
    for q in 0..=q_max {
        let (theta, trimmed, converged) = trimmed_theta_q(&diffs, q, start)?;
        let keep: Vec<usize> = (0..k).filter(|i| trimmed.binary_search(i).is_err()).collect();
        let se = residual_se(&diffs, theta, &keep);
        let df = (k - q - 1) as f64;
        let width = t_quantile(df, 0.975) * se;
        if width < best_width {
            best_width = width;
            best = Some(TrimmedEstimate {
                theta,
                trimmed_pairs: trimmed,
                se,
                q_star: q,
                converged,
            });
        }
    }
    Ok(best.expect("q = 0 always evaluated"))
}

/// Ground-truth error decomposition for a simulated draw. Requires the true
/// per-geo thetas, the estimand, and the uninfluenced test responses.
#[allow(clippy::too_many_arguments)]
pub fn error_decomposition(
    observed: &Observed,
    assignment: &Assignment,
    design: &SupergeoDesign,
    aggs: &[GeoAggregates],
    plan: &SpendPlan,
    theta_g: &[f64],
    theta: f64,
    budget: f64,
) -> Result<ErrorDecomposition> {
    // err1 over the uninfluenced responses: the panel's test response is the
    // response under the existing (baseline) spend, so the zero-spend
    // response is test_response - theta_g * initial_spend under the linear
    // model
    let z_of = |ids: &[GeoId]| -> Result<f64> {
        ids.iter()
            .map(|id| {
                let i = observed.index_of(id)?;
                Ok(aggs[i].test_response - theta_g[i] * aggs[i].initial_spend)
            })
            .sum()
    };
    let mut err1 = 0.0;
    for (pair, &sign) in design.pairs.iter().zip(&assignment.signs) {
        err1 += sign as f64 * (z_of(&pair.plus)? - z_of(&pair.minus)?);
    }
    err1 /= budget;

    let mut err2 = 0.0;
    let mut err3 = 0.0;
    for (g, a) in aggs.iter().enumerate() {
        let dev = theta_g[g] - theta;
        if assignment.treated.binary_search(&a.geo).is_ok() {
            err2 += dev * a.initial_spend;
            err3 += dev * plan.delta_spend[g];
        } else if assignment.control.binary_search(&a.geo).is_ok() {
            err2 -= dev * a.initial_spend;
        }
    }
    err2 /= budget;
    err3 /= budget;

    let theta_hat = empirical_estimator(observed, assignment)?;
    Ok(ErrorDecomposition {
        err1,
        err2,
        err3,
        total: theta_hat - theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::SupergeoPair;

    fn design_of_pairs(pairs: &[(&[&str], &[&str])]) -> SupergeoDesign {
        SupergeoDesign::new(
            pairs
                .iter()
                .map(|(p, m)| SupergeoPair {
                    plus: p.iter().map(|&s| GeoId::from(s)).collect(),
                    minus: m.iter().map(|&s| GeoId::from(s)).collect(),
                    score: 0.0,
                })
                .collect(),
            true,
        )
    }

    fn aggs_of(rows: &[(&str, f64, f64)]) -> Vec<GeoAggregates> {
        // (id, test_response, initial_spend)
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

    #[test]
    fn assignment_is_reproducible_and_covers() {
        let design = design_of_pairs(&[(&["a"], &["b"]), (&["c", "d"], &["e"])]);
        let a1 = draw_assignment(&design, 9);
        let a2 = draw_assignment(&design, 9);
        assert_eq!(a1, a2);
        assert_eq!(a1.treated.len() + a1.control.len(), 5);

        // each pair's plus side is treated about half the time
        let mut plus_treated = 0;
        let n = 2000;
        for m in 0..n {
            let a = draw_assignment(&design, rng::derive(1, m));
            if a.signs[0] == 1 {
                plus_treated += 1;
            }
        }
        let frac = plus_treated as f64 / n as f64;
        assert!((0.45..=0.55).contains(&frac), "frac = {frac}");
    }

    #[test]
    fn spend_plan_rate_and_budget() {
        let design = design_of_pairs(&[(&["a"], &["b"])]);
        let aggs = aggs_of(&[("a", 10.0, 100.0), ("b", 10.0, 50.0)]);
        let cfg = ExperimentConfig::heavyup(10.0);
        let mut assignment = draw_assignment(&design, 0);
        // force `a` treated
        if assignment.signs[0] != 1 {
            assignment = draw_assignment(&design, 1);
            assert_eq!(assignment.signs[0], 1, "pick a seed with A_1 = +1");
        }
        let plan = plan_spend(&assignment, &aggs, &cfg).unwrap();
        assert!((plan.rate - 0.1).abs() < 1e-15);
        assert!((plan.delta_spend.iter().sum::<f64>() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_treated_spend_guard() {
        let design = design_of_pairs(&[(&["a"], &["b"])]);
        let aggs = aggs_of(&[("a", 10.0, 0.0), ("b", 10.0, 0.0)]);
        let assignment = draw_assignment(&design, 0);
        assert!(matches!(
            plan_spend(&assignment, &aggs, &ExperimentConfig::heavyup(5.0)),
            Err(SupergeoError::ZeroTreatedSpend)
        ));
    }

    #[test]
    fn injection_changes_only_treated() {
        let design = design_of_pairs(&[(&["a"], &["b"])]);
        let aggs = aggs_of(&[("a", 10.0, 5.0), ("b", 20.0, 5.0)]);
        let assignment = draw_assignment(&design, 0);
        let plan = plan_spend(&assignment, &aggs, &ExperimentConfig::heavyup(1.0)).unwrap();
        let observed = inject_effects(&aggs, &assignment, &plan, &[2.0, 2.0]);
        for (i, geo) in observed.geos.iter().enumerate() {
            let treated = assignment.treated.binary_search(geo).is_ok();
            if treated {
                // theta_g = 2, delta = 1 -> response up by 2
                assert!((observed.response[i] - (aggs[i].test_response + 2.0)).abs() < 1e-12);
            } else {
                assert_eq!(observed.response[i], aggs[i].test_response);
                assert_eq!(observed.spend[i], aggs[i].initial_spend);
            }
        }
    }

    #[test]
    fn empirical_estimator_arithmetic() {
        let design = design_of_pairs(&[(&["a"], &["b"])]);
        let observed = Observed {
            geos: vec![GeoId::from("a"), GeoId::from("b")],
            response: vec![110.0, 100.0],
            spend: vec![60.0, 50.0],
            treated: vec![true, false],
        };
        let assignment = Assignment {
            signs: vec![1],
            treated: vec![GeoId::from("a")],
            control: vec![GeoId::from("b")],
            seed: 0,
        };
        assert_eq!(empirical_estimator(&observed, &assignment).unwrap(), 1.0);
        let _ = design;
    }

    #[test]
    fn perfectly_matched_homogeneous_recovers_theta_exactly() {
        let design = design_of_pairs(&[(&["a"], &["b"]), (&["c"], &["d"])]);
        let aggs = aggs_of(&[
            ("a", 10.0, 4.0),
            ("b", 10.0, 4.0),
            ("c", 30.0, 6.0),
            ("d", 30.0, 6.0),
        ]);
        let theta_g = vec![1.5; 4];
        for seed in 0..8 {
            let assignment = draw_assignment(&design, seed);
            let plan = plan_spend(&assignment, &aggs, &ExperimentConfig::heavyup(2.0)).unwrap();
            let observed = inject_effects(&aggs, &assignment, &plan, &theta_g);
            let theta_hat = empirical_estimator(&observed, &assignment).unwrap();
            assert!((theta_hat - 1.5).abs() < 1e-12, "theta_hat = {theta_hat}");
        }
    }

    #[test]
    fn trimmed_zero_fraction_equals_empirical() {
        let design = design_of_pairs(&[(&["a"], &["b"]), (&["c"], &["d"]), (&["e"], &["f"])]);
        let aggs = aggs_of(&[
            ("a", 12.0, 4.0),
            ("b", 10.0, 4.0),
            ("c", 31.0, 6.0),
            ("d", 30.0, 6.0),
            ("e", 8.0, 2.0),
            ("f", 7.5, 2.0),
        ]);
        let assignment = draw_assignment(&design, 5);
        let plan = plan_spend(&assignment, &aggs, &ExperimentConfig::heavyup(2.0)).unwrap();
        let observed = inject_effects(&aggs, &assignment, &plan, &[1.0; 6]);
        let trimmed = trimmed_match_estimator(&observed, &assignment, &design, 0.0).unwrap();
        let empirical = empirical_estimator(&observed, &assignment).unwrap();
        assert_eq!(trimmed.q_star, 0);
        assert!((trimmed.theta - empirical).abs() < 1e-12);
    }

    #[test]
    fn outlier_pair_gets_trimmed() {
        // five well-matched pairs, one with a huge injected residual
        let design = design_of_pairs(&[
            (&["a"], &["b"]),
            (&["c"], &["d"]),
            (&["e"], &["f"]),
            (&["g"], &["h"]),
            (&["i"], &["j"]),
            (&["k"], &["l"]),
        ]);
        let mut rows: Vec<(&str, f64, f64)> = vec![
            ("a", 10.1, 4.0),
            ("b", 10.0, 4.0),
            ("c", 20.2, 4.0),
            ("d", 20.0, 4.0),
            ("e", 30.1, 4.0),
            ("f", 30.0, 4.0),
            ("g", 40.2, 4.0),
            ("h", 40.0, 4.0),
            ("i", 50.1, 4.0),
            ("j", 50.0, 4.0),
            ("k", 160.0, 4.0), // pair (k, l) is wildly unbalanced
            ("l", 60.0, 4.0),
        ];
        rows.sort_by(|x, y| x.0.cmp(y.0));
        let aggs = aggs_of(&rows);
        let assignment = draw_assignment(&design, 2);
        let plan = plan_spend(&assignment, &aggs, &ExperimentConfig::heavyup(4.0)).unwrap();
        let observed = inject_effects(&aggs, &assignment, &plan, &[1.0; 12]);
        let trimmed = trimmed_match_estimator(&observed, &assignment, &design, 0.25).unwrap();
        assert!(trimmed.q_star >= 1);
        // pair index of (k, l) in the sorted design
        let outlier = design
            .pairs
            .iter()
            .position(|p| p.geos().any(|g| g.as_str() == "k"))
            .unwrap();
        assert!(trimmed.trimmed_pairs.contains(&outlier));
    }

    #[test]
    fn identical_pair_diffs_have_zero_se() {
        let design = design_of_pairs(&[(&["a"], &["b"]), (&["c"], &["d"]), (&["e"], &["f"])]);
        // every pair: response diff 5, spend diff 2 when plus treated
        let observed = Observed {
            geos: ["a", "b", "c", "d", "e", "f"].iter().map(|&s| GeoId::from(s)).collect(),
            response: vec![15.0, 10.0, 25.0, 20.0, 35.0, 30.0],
            spend: vec![6.0, 4.0, 6.0, 4.0, 6.0, 4.0],
            treated: vec![true, false, true, false, true, false],
        };
        let assignment = Assignment {
            signs: vec![1, 1, 1],
            treated: ["a", "c", "e"].iter().map(|&s| GeoId::from(s)).collect(),
            control: ["b", "d", "f"].iter().map(|&s| GeoId::from(s)).collect(),
            seed: 0,
        };
        let trimmed = trimmed_match_estimator(&observed, &assignment, &design, 0.3).unwrap();
        assert_eq!(trimmed.q_star, 0);
        assert!((trimmed.theta - 2.5).abs() < 1e-12);
        assert_eq!(trimmed.se, 0.0);
    }

    #[test]
    fn too_few_pairs_for_trimming() {
        let design = design_of_pairs(&[(&["a"], &["b"]), (&["c"], &["d"])]);
        let observed = Observed {
            geos: ["a", "b", "c", "d"].iter().map(|&s| GeoId::from(s)).collect(),
            response: vec![1.0; 4],
            spend: vec![1.0, 2.0, 1.0, 2.0],
            treated: vec![true, false, true, false],
        };
        let assignment = Assignment {
            signs: vec![1, 1],
            treated: ["a", "c"].iter().map(|&s| GeoId::from(s)).collect(),
            control: ["b", "d"].iter().map(|&s| GeoId::from(s)).collect(),
            seed: 0,
        };
        assert!(matches!(
            trimmed_match_estimator(&observed, &assignment, &design, 0.25),
            Err(SupergeoError::TooFewPairs(2))
        ));
    }

    #[test]
    fn homogeneous_decomposition_has_zero_err2_err3() {
        let design = design_of_pairs(&[(&["a"], &["b"]), (&["c"], &["d"])]);
        let aggs = aggs_of(&[
            ("a", 10.0, 4.0),
            ("b", 12.0, 4.0),
            ("c", 30.0, 6.0),
            ("d", 29.0, 6.0),
        ]);
        let theta_g = vec![1.0; 4];
        let budget = 2.0;
        let assignment = draw_assignment(&design, 3);
        let plan = plan_spend(&assignment, &aggs, &ExperimentConfig::heavyup(budget)).unwrap();
        let observed = inject_effects(&aggs, &assignment, &plan, &theta_g);
        let dec = error_decomposition(
            &observed, &assignment, &design, &aggs, &plan, &theta_g, 1.0, budget,
        )
        .unwrap();
        assert_eq!(dec.err2, 0.0);
        assert_eq!(dec.err3, 0.0);
    }
}
