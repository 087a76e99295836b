//! Drive the CLI subcommands end to end from code: generate a synthetic
//! panel, design on it, and evaluate the result, leaving run manifests next
//! to every output.
//!
//! Run with: cargo run --release --example generate_cli

use supergeo::cli::{
    cmd_design, cmd_evaluate, cmd_generate, DesignArgs, EffectArg, EvaluateArgs, GenerateArgs,
    KindArg, StrategyArg,
};

fn main() -> supergeo::error::Result<()> {
    let dir = std::env::temp_dir().join("supergeo_example");
    std::fs::create_dir_all(&dir)?;
    let panel = dir.join("panel.csv");
    let design = dir.join("design.json");
    let report = dir.join("report.json");

    cmd_generate(&GenerateArgs {
        kind: KindArg::Synth,
        geos: 20,
        noise: 0.1,
        m: 3,
        bound: 20,
        seed: 7,
        output: panel.clone(),
    })?;

    cmd_design(&DesignArgs {
        input: panel.clone(),
        pretest_len: None,
        strategy: StrategyArg::Exhaustive,
        min_size: 2,
        max_size: 4,
        min_pairs: 1,
        time_limit: 10.0,
        seed: 0,
        starts: 1,
        baseline: true,
        partitions: 4,
        beta: 30,
        alpha: 0.02,
        output: design.clone(),
    })?;

    cmd_evaluate(&EvaluateArgs {
        input: panel,
        pretest_len: None,
        design: vec![design],
        effect: EffectArg::Homogeneous,
        theta0: 1.0,
        c: 0.0,
        noise_halfwidth: 0.0,
        budget: None,
        iterations: 200,
        trim_fraction: 0.25,
        coverage: true,
        level: 0.8,
        adversary_eta: Some(0.05),
        seed: 0,
        output: report.clone(),
    })?;

    println!("outputs and manifests under {}", dir.display());
    Ok(())
}
