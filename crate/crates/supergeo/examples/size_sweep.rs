//! Sweep the maximum supergeo size and watch pretest loss fall while test
//! loss and RMSE flatten out — the overfitting trade-off of larger subsets.
//!
//! Run with: cargo run --release --example size_sweep

use supergeo::design_search::DesignConfig;
use supergeo::eval::{size_sweep, synth_panel, Estimator, EvalConfig};

fn main() -> supergeo::error::Result<()> {
    let panel = synth_panel(30, 11, 0.1);
    let dcfg = DesignConfig {
        time_limit_secs: 5.0,
        ..DesignConfig::default()
    };
    let ecfg = EvalConfig {
        iterations: 200,
        budget: 50.0,
        estimators: vec![Estimator::Empirical],
        ..EvalConfig::default()
    };
    let rows = size_sweep(&panel, &[2, 3, 4], &dcfg, &ecfg)?;

    println!(
        "{:>5} {:>7} {:>14} {:>12} {:>10} {:>8}",
        "u", "pairs", "pretest loss", "test loss", "rmse", "optimal"
    );
    for r in rows {
        println!(
            "{:>5} {:>7} {:>14.4} {:>12.4} {:>10.4} {:>8}",
            r.max_size, r.n_pairs, r.pretest_loss, r.test_loss, r.rmse, r.optimal
        );
    }
    Ok(())
}
