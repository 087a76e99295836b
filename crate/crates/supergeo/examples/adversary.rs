//! Bounded adversarial perturbation: how much can the design loss degrade if
//! every geo's uninfluenced response drifts by up to a factor of (1 ± eta)
//! between the pretest and test windows?
//!
//! Run with: cargo run --release --example adversary

use supergeo::design_search::{
    enumerate_candidates, matched_pairs_baseline, solve_partition, DesignConfig,
};
use supergeo::eval::{adversarial_loss_bound, apply_adversary, synth_panel, AdversaryConfig};
use supergeo::geo_data::aggregates;
use supergeo::scoring::{design_loss, ZValues};

fn main() -> supergeo::error::Result<()> {
    let panel = synth_panel(20, 5, 0.1);
    let aggs = aggregates(&panel);
    let z = ZValues::from_aggregates(&aggs);
    let z_test: Vec<f64> = aggs.iter().map(|a| a.test_response).collect();

    let baseline = matched_pairs_baseline(&z)?;
    let cfg = DesignConfig {
        max_size: 4,
        time_limit_secs: 10.0,
        ..DesignConfig::default()
    };
    let pool = enumerate_candidates(&z, &cfg)?;
    let supergeo = solve_partition(&pool, &z, &cfg)?;

    println!("{:>6} {:>18} {:>18}", "eta", "matched pairs", "supergeo");
    for eta in [0.0, 0.05, 0.07, 0.10] {
        let adv = AdversaryConfig { eta };
        let mut losses = Vec::new();
        for design in [&baseline, &supergeo] {
            let perturbed = apply_adversary(design, &aggs, &z_test, &adv)?;
            let z_pert = ZValues::new(
                aggs.iter()
                    .map(|a| a.geo.clone())
                    .zip(perturbed.iter().copied())
                    .collect(),
            );
            let loss = design_loss(design, &z_pert)?;
            let bound = adversarial_loss_bound(design, &aggs, &z_test, &adv)?;
            assert!((loss - bound).abs() <= 1e-9 * bound.max(1.0));
            losses.push(loss);
        }
        println!("{:>6.2} {:>18.2} {:>18.2}", eta, losses[0], losses[1]);
    }
    println!("(larger supergeos buy pretest fit but are penalized faster as eta grows)");
    Ok(())
}
