//! Half-synthetic Monte-Carlo evaluation: RMSE/bias/coverage tables, size
//! sweeps, adversarial perturbation, and a synthetic panel generator.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::design_search::{enumerate_candidates, solve_partition_seeded, DesignConfig};
use crate::effects::{make_effects, target_theta, EffectModel};
use crate::error::Result;
use crate::experiment::{
    draw_assignment, empirical_estimator, inject_effects, pair_diffs, plan_spend,
    trimmed_match_estimator, ExperimentConfig,
};
use crate::geo_data::{aggregates, GeoAggregates, GeoId, GeoPanel};
use crate::inference::ci_t_approx;
use crate::rng;
use crate::scoring::{design_loss, SupergeoDesign, ZValues};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Empirical,
    TrimmedMatch,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Estimator::Empirical => f.write_str("empirical"),
            Estimator::TrimmedMatch => f.write_str("trimmed_match"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iterations: usize,
    pub budget: f64,
    pub effect: EffectModel,
    pub estimators: Vec<Estimator>,
    /// Max trim fraction handed to the trimmed-match estimator.
    pub trim_fraction: f64,
    pub compute_coverage: bool,
    pub ci_level: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iterations: 2000,
            budget: 1.0,
            effect: EffectModel::homogeneous(1.0),
            estimators: vec![Estimator::Empirical, Estimator::TrimmedMatch],
            trim_fraction: 0.25,
            compute_coverage: false,
            ci_level: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub design: String,
    pub estimator: Estimator,
    pub rmse: f64,
    pub abs_bias: f64,
    pub coverage: Option<f64>,
    pub estimates: Vec<f64>,
    /// Iterations skipped because the estimator errored (e.g. a degenerate
    /// denominator); counted, not silently dropped.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub theta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub entries: Vec<EvalEntry>,
}

/// Kahan-compensated accumulator so aggregation is order-independent in
/// practice.
#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Run the half-synthetic loop: for each iteration draw an assignment,
/// plan the heavy-up spend, inject effects, and run each estimator.
pub fn run_eval(
    aggs: &[GeoAggregates],
    designs: &[(String, SupergeoDesign)],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let theta_g = make_effects(&cfg.effect, aggs)?;
    let weights: Vec<f64> = aggs.iter().map(|a| a.initial_spend).collect();
    let theta = target_theta(&theta_g, &weights)?.theta;
    let exp_cfg = ExperimentConfig::heavyup(cfg.budget);

    let mut entries = Vec::new();
    for (name, design) in designs {
        for &estimator in &cfg.estimators {
            let mut estimates = Vec::with_capacity(cfg.iterations);
            let mut failures = 0usize;
            let mut covered = 0usize;
            let mut sum = Kahan::default();
            let mut sum_sq = Kahan::default();
            for m in 0..cfg.iterations as u64 {
                let assignment = draw_assignment(design, rng::derive(cfg.seed, m));
                let iter_result = (|| -> Result<(f64, Vec<usize>)> {
                    let plan = plan_spend(&assignment, aggs, &exp_cfg)?;
                    let observed = inject_effects(aggs, &assignment, &plan, &theta_g);
                    match estimator {
                        Estimator::Empirical => {
                            Ok((empirical_estimator(&observed, &assignment)?, Vec::new()))
                        }
                        Estimator::TrimmedMatch => {
                            let t = trimmed_match_estimator(
                                &observed,
                                &assignment,
                                design,
                                cfg.trim_fraction,
                            )?;
                            Ok((t.theta, t.trimmed_pairs))
                        }
                    }
                })();
                match iter_result {
                    Ok((est, trimmed)) => {
                        sum.add(est);
                        let d = est - theta;
                        sum_sq.add(d * d);
                        if cfg.compute_coverage {
                            let plan = plan_spend(&assignment, aggs, &exp_cfg)?;
                            let observed = inject_effects(aggs, &assignment, &plan, &theta_g);
                            let diffs = pair_diffs(&observed, &assignment, design)?;
                            if let Ok(ci) = ci_t_approx(&diffs, cfg.ci_level, &trimmed) {
                                if ci.contains(theta) {
                                    covered += 1;
                                }
                            }
                        }
                        estimates.push(est);
                    }
                    Err(_) => failures += 1,
                }
            }
            let n = estimates.len().max(1) as f64;
            entries.push(EvalEntry {
                design: name.clone(),
                estimator,
                rmse: (sum_sq.sum / n).sqrt(),
                abs_bias: (sum.sum / n - theta).abs(),
                coverage: cfg
                    .compute_coverage
                    .then(|| covered as f64 / estimates.len().max(1) as f64),
                estimates,
                failures,
            });
        }
    }
    Ok(EvalReport {
        theta,
        iterations: cfg.iterations,
        seed: cfg.seed,
        entries,
    })
}

/// Worst-case bounded perturbation: within each pair the larger-Z side is
/// inflated by (1 + eta) and the smaller side deflated by (1 - eta).
/// Returns the perturbed per-geo values in aggregate order; uncovered geos
/// are unchanged.
pub fn apply_adversary(
    design: &SupergeoDesign,
    aggs: &[GeoAggregates],
    z_test: &[f64],
    adv: &AdversaryConfig,
) -> Result<Vec<f64>> {
    let index_of = |id: &GeoId| -> Result<usize> {
        aggs.binary_search_by(|a| a.geo.cmp(id))
            .map_err(|_| crate::error::SupergeoError::UnknownGeo(id.to_string()))
    };
    let mut perturbed = z_test.to_vec();
    for pair in &design.pairs {
        let sum_of = |ids: &[GeoId]| -> Result<f64> {
            ids.iter().map(|id| index_of(id).map(|i| z_test[i])).sum()
        };
        let (zp, zm) = (sum_of(&pair.plus)?, sum_of(&pair.minus)?);
        let (big, small) = if zp >= zm {
            (&pair.plus, &pair.minus)
        } else {
            (&pair.minus, &pair.plus)
        };
        for id in big {
            let i = index_of(id)?;
            perturbed[i] = z_test[i] * (1.0 + adv.eta);
        }
        for id in small {
            let i = index_of(id)?;
            perturbed[i] = z_test[i] * (1.0 - adv.eta);
        }
    }
    Ok(perturbed)
}

/// Closed-form worst-case design loss under the bounded multiplicative
/// adversary: sum over pairs of (|Z+ - Z-| + eta * Z+ + eta * Z-)^2. The
/// worst case inflates the larger side and deflates the smaller, so this
/// equals the loss of the design re-scored on `apply_adversary` output.
pub fn adversarial_loss_bound(
    design: &SupergeoDesign,
    aggs: &[GeoAggregates],
    z_test: &[f64],
    adv: &AdversaryConfig,
) -> Result<f64> {
    let index_of = |id: &GeoId| -> Result<usize> {
        aggs.binary_search_by(|a| a.geo.cmp(id))
            .map_err(|_| crate::error::SupergeoError::UnknownGeo(id.to_string()))
    };
    let mut bound = 0.0;
    for pair in &design.pairs {
        let sum_of = |ids: &[GeoId]| -> Result<f64> {
            ids.iter().map(|id| index_of(id).map(|i| z_test[i])).sum()
        };
        let (zp, zm) = (sum_of(&pair.plus)?, sum_of(&pair.minus)?);
        let gap = (zp - zm).abs() + adv.eta * zp + adv.eta * zm;
        bound += gap * gap;
    }
    Ok(bound)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSweepRow {
    pub max_size: usize,
    pub n_pairs: usize,
    pub pretest_loss: f64,
    pub test_loss: f64,
    pub rmse: f64,
    pub optimal: bool,
}

/// For each maximum pair size, search a design on pretest data and report
/// pretest loss, test loss, and RMSE. Each search is seeded with the design
/// found for the previous (smaller) size, so pretest loss is non-increasing
/// along an ascending size list even when a search times out.
pub fn size_sweep(
    panel: &GeoPanel,
    sizes: &[usize],
    design_cfg: &DesignConfig,
    eval_cfg: &EvalConfig,
) -> Result<Vec<SizeSweepRow>> {
    let aggs = aggregates(panel);
    let z_pre = ZValues::from_aggregates(&aggs);
    let z_test = ZValues::new(
        aggs.iter()
            .map(|a| (a.geo.clone(), a.test_response))
            .collect(),
    );

    let mut rows = Vec::new();
    let mut prev: Option<SupergeoDesign> = None;
    for &u in sizes {
        let cfg = DesignConfig {
            max_size: u,
            ..design_cfg.clone()
        };
        let pool = enumerate_candidates(&z_pre, &cfg)?;
        let seed_design = prev
            .as_ref()
            .filter(|d| d.pairs.iter().all(|p| p.size() <= u));
        let design = solve_partition_seeded(&pool, &z_pre, &cfg, seed_design)?;

        let mut one_eval = eval_cfg.clone();
        one_eval.estimators = vec![Estimator::Empirical];
        let report = run_eval(&aggs, &[("sweep".to_string(), design.clone())], &one_eval)?;

        rows.push(SizeSweepRow {
            max_size: u,
            n_pairs: design.n_pairs(),
            pretest_loss: design.loss,
            test_loss: design_loss(&design, &z_test)?,
            rmse: report.entries[0].rmse,
            optimal: design.optimal_flag,
        });
        prev = Some(design);
    }
    Ok(rows)
}

const SYNTH_PRETEST_DAYS: usize = 28;
const SYNTH_TEST_DAYS: usize = 28;

/// Synthetic geo panel: heavy-tailed log-normal geo sizes, daily responses
/// proportional to size with multiplicative noise, spend at a tenth of the
/// response scale with its own noise.
pub fn synth_panel(n_geos: usize, seed: u64, noise_level: f64) -> GeoPanel {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let size_seed = rng::derive(seed, 0);
    let resp_seed = rng::derive(seed, 1);
    let spend_seed = rng::derive(seed, 2);
    let periods = SYNTH_PRETEST_DAYS + SYNTH_TEST_DAYS;

    let mut geos = Vec::with_capacity(n_geos);
    let mut response = Vec::with_capacity(n_geos);
    let mut spend = Vec::with_capacity(n_geos);
    for g in 0..n_geos {
        // open-interval uniform keeps the normal quantile finite
        let u = rng::uniform(size_seed, g as u64).max(1e-12).min(1.0 - 1e-12);
        let size = normal.inverse_cdf(u).exp();
        let mut r_row = Vec::with_capacity(periods);
        let mut s_row = Vec::with_capacity(periods);
        for t in 0..periods {
            let idx = (g * periods + t) as u64;
            let eps_r = 2.0 * rng::uniform(resp_seed, idx) - 1.0;
            let eps_s = 2.0 * rng::uniform(spend_seed, idx) - 1.0;
            r_row.push(size * (1.0 + noise_level * eps_r));
            s_row.push(0.1 * size * (1.0 + noise_level * eps_s));
        }
        geos.push(GeoId::new(format!("geo{g:03}")));
        response.push(r_row);
        spend.push(s_row);
    }
    GeoPanel::new(geos, SYNTH_PRETEST_DAYS, spend, response)
        .expect("synthetic panel construction is valid")
}

/// Plot-ready CSV of raw estimates: `iter,design,estimator,estimate`.
pub fn write_estimates_csv<W: Write>(report: &EvalReport, mut w: W) -> Result<()> {
    writeln!(w, "iter,design,estimator,estimate")?;
    for entry in &report.entries {
        for (m, est) in entry.estimates.iter().enumerate() {
            writeln!(w, "{m},{},{},{est}", entry.design, entry.estimator)?;
        }
    }
    Ok(())
}
