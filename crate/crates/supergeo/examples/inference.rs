//! Randomization inference on one simulated experiment: a t-approximation
//! confidence interval, a permutation test of the sharp null, and a CI from
//! inverting the permutation test.
//!
//! Run with: cargo run --release --example inference

use supergeo::design_search::matched_pairs_baseline;
use supergeo::eval::synth_panel;
use supergeo::experiment::{draw_assignment, inject_effects, pair_diffs, plan_spend, ExperimentConfig};
use supergeo::geo_data::aggregates;
use supergeo::inference::{ci_t_approx, invert_permutation_ci, permutation_test};
use supergeo::scoring::ZValues;

fn main() -> supergeo::error::Result<()> {
    let theta_true = 2.0;
    let panel = synth_panel(24, 3, 0.1);
    let aggs = aggregates(&panel);
    let z = ZValues::from_aggregates(&aggs);
    let design = matched_pairs_baseline(&z)?;

    // simulate one experiment with homogeneous iROAS = 2; a budget this
    // large keeps the effect visible over the matching noise
    let budget = 2.0 * aggs.iter().map(|a| a.test_spend).sum::<f64>();
    let cfg = ExperimentConfig::heavyup(budget);
    let assignment = draw_assignment(&design, 4);
    let plan = plan_spend(&assignment, &aggs, &cfg)?;
    let theta_g = vec![theta_true; aggs.len()];
    let observed = inject_effects(&aggs, &assignment, &plan, &theta_g);

    let diffs = pair_diffs(&observed, &assignment, &design)?;
    let ci = ci_t_approx(&diffs, 0.8, &[])?;
    println!("t-approx 80% CI: [{:.4}, {:.4}] (truth {theta_true})", ci.lower, ci.upper);

    let null = permutation_test(&design, &observed, &aggs, &assignment, &cfg, 0.0, 999, 5)?;
    println!(
        "sharp null theta = 0: p = {:.4} over {} draws",
        null.p_value, null.num_draws
    );
    let truth = permutation_test(&design, &observed, &aggs, &assignment, &cfg, theta_true, 999, 5)?;
    println!(
        "sharp null theta = {theta_true}: p = {:.4} over {} draws",
        truth.p_value, truth.num_draws
    );

    let perm_ci =
        invert_permutation_ci(&design, &observed, &aggs, &assignment, &cfg, 0.8, None, 499, 5)?;
    println!(
        "permutation-inversion 80% CI: [{:.4}, {:.4}]",
        perm_ci.lower, perm_ci.upper
    );
    Ok(())
}
