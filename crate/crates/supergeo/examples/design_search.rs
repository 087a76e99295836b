//! Search for a minimum-loss supergeo design on a small synthetic panel and
//! compare it against the matched-pairs baseline.
//!
//! Run with: cargo run --example design_search

use supergeo::design_search::{
    enumerate_candidates, matched_pairs_baseline, solve_partition, DesignConfig,
};
use supergeo::eval::synth_panel;
use supergeo::geo_data::aggregates;
use supergeo::scoring::ZValues;

fn main() -> supergeo::error::Result<()> {
    let panel = synth_panel(16, 42, 0.1);
    let aggs = aggregates(&panel);
    let z = ZValues::from_aggregates(&aggs);

    let baseline = matched_pairs_baseline(&z)?;
    println!(
        "matched-pairs baseline: {} pairs, loss {:.4}",
        baseline.n_pairs(),
        baseline.loss
    );

    let cfg = DesignConfig {
        max_size: 4,
        ..DesignConfig::default()
    };
    let pool = enumerate_candidates(&z, &cfg)?;
    println!("candidate pool: {} subsets of size 2..=4", pool.len());

    let design = solve_partition(&pool, &z, &cfg)?;
    println!(
        "supergeo design: {} pairs, loss {:.4}, optimal {}",
        design.n_pairs(),
        design.loss,
        design.optimal_flag
    );
    for pair in &design.pairs {
        let fmt = |side: &[supergeo::geo_data::GeoId]| {
            side.iter().map(|g| g.0.as_str()).collect::<Vec<_>>().join("+")
        };
        println!(
            "  ({}) vs ({})  score {:.4}",
            fmt(&pair.plus),
            fmt(&pair.minus),
            pair.score
        );
    }
    Ok(())
}
