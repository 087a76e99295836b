//! Monte-Carlo evaluation: compare the empirical and trimmed-match iROAS
//! estimators on matched-pairs vs supergeo designs under a heterogeneous
//! effect model.
//!
//! Run with: cargo run --release --example evaluate

use supergeo::design_search::{
    enumerate_candidates, matched_pairs_baseline, solve_partition, DesignConfig,
};
use supergeo::effects::EffectModel;
use supergeo::eval::{run_eval, synth_panel, Estimator, EvalConfig};
use supergeo::geo_data::aggregates;
use supergeo::scoring::ZValues;

fn main() -> supergeo::error::Result<()> {
    let panel = synth_panel(30, 7, 0.1);
    let aggs = aggregates(&panel);
    let z = ZValues::from_aggregates(&aggs);

    let baseline = matched_pairs_baseline(&z)?;
    let cfg = DesignConfig {
        max_size: 4,
        time_limit_secs: 10.0,
        ..DesignConfig::default()
    };
    let pool = enumerate_candidates(&z, &cfg)?;
    let supergeo = solve_partition(&pool, &z, &cfg)?;
    println!(
        "losses: matched pairs {:.4}, supergeo {:.4}",
        baseline.loss, supergeo.loss
    );

    let eval_cfg = EvalConfig {
        iterations: 1000,
        budget: 0.1 * aggs.iter().map(|a| a.test_spend).sum::<f64>(),
        effect: EffectModel::proportional(1.0, 0.2),
        estimators: vec![Estimator::Empirical, Estimator::TrimmedMatch],
        ..EvalConfig::default()
    };
    let report = run_eval(
        &aggs,
        &[
            ("matched_pairs".to_string(), baseline),
            ("supergeo".to_string(), supergeo),
        ],
        &eval_cfg,
    )?;

    println!("target theta = {:.4}", report.theta);
    println!("{:<16} {:<14} {:>10} {:>10}", "design", "estimator", "rmse", "|bias|");
    for e in &report.entries {
        println!(
            "{:<16} {:<14} {:>10.4} {:>10.4}",
            e.design,
            e.estimator.to_string(),
            e.rmse,
            e.abs_bias
        );
    }
    Ok(())
}
