//! Command-line front end: `design`, `evaluate`, `infer`, and `generate`
//! subcommands, each emitting a run manifest for reproducibility.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::design_search::{
    build_pool, matched_pairs_baseline, multi_start_search, solve_partition, DesignConfig,
    HeuristicConfig, Strategy,
};
use crate::effects::EffectModel;
use crate::error::{Result, SupergeoError};
use crate::eval::{
    adversarial_loss_bound, apply_adversary, run_eval, synth_panel, write_estimates_csv,
    AdversaryConfig, EvalConfig, Estimator,
};
use crate::experiment::{Assignment, ExperimentConfig, Observed};
use crate::geo_data::{aggregates, load_panel, GeoAggregates, GeoId, GeoPanel};
use crate::inference::{ci_t_approx, invert_permutation_ci, permutation_test};
use crate::instance_gen::{plant_n3dm, reduce_n3dm};
use crate::rng;
use crate::scoring::{design_loss, SupergeoDesign, ZValues};

#[derive(Debug, Parser)]
#[command(name = "supergeo", version, about = "Matched supergeo experiment design")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a minimum-loss supergeo design on a geo panel.
    Design(DesignArgs),
    /// Monte-Carlo evaluation of designs on a half-synthetic panel.
    Evaluate(EvaluateArgs),
    /// Confidence intervals and randomization tests on observed outcomes.
    Infer(InferArgs),
    /// Generate synthetic panels or hardness instances.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyArg {
    Exhaustive,
    Partition,
    Pergeo,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Exhaustive => Strategy::Exhaustive,
            StrategyArg::Partition => Strategy::PartitionHeuristic,
            StrategyArg::Pergeo => Strategy::PergeoHeuristic,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DesignArgs {
    /// Panel CSV with columns geo,period,response,spend.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of leading periods treated as pretest; default half the panel.
    #[arg(long)]
    pub pretest_len: Option<usize>,
    #[arg(long, value_enum, default_value = "exhaustive")]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 2)]
    pub min_size: usize,
    #[arg(long, default_value_t = 4)]
    pub max_size: usize,
    #[arg(long, default_value_t = 1)]
    pub min_pairs: usize,
    /// Search time limit in seconds.
    #[arg(long, default_value_t = 10800.0)]
    pub time_limit: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of independent search starts (differing in seed).
    #[arg(long, default_value_t = 1)]
    pub starts: usize,
    /// Also emit the matched-pairs baseline design.
    #[arg(long)]
    pub baseline: bool,
    /// Random geo partitions for the partition heuristic.
    #[arg(long, default_value_t = 4)]
    pub partitions: usize,
    /// Large-geo count for the per-geo heuristic.
    #[arg(long, default_value_t = 30)]
    pub beta: usize,
    /// Fraction of best subsets kept per large geo.
    #[arg(long, default_value_t = 0.02)]
    pub alpha: f64,
    /// Output design JSON path.
    #[arg(long, default_value = "design.json")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectArg {
    Homogeneous,
    Proportional,
    Uniform,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Panel CSV with columns geo,period,response,spend.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub pretest_len: Option<usize>,
    /// Design JSON file(s); repeat the flag to compare designs.
    #[arg(long, required = true)]
    pub design: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "homogeneous")]
    pub effect: EffectArg,
    /// Baseline iROAS theta0.
    #[arg(long, default_value_t = 1.0)]
    pub theta0: f64,
    /// Heterogeneity slope for the proportional effect model.
    #[arg(long, default_value_t = 0.0)]
    pub c: f64,
    /// Half-width for the uniform-noise effect model.
    #[arg(long, default_value_t = 0.0)]
    pub noise_halfwidth: f64,
    /// Total incremental spend per iteration; default is a tenth of the
    /// panel's test-window spend.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.25)]
    pub trim_fraction: f64,
    /// Also report CI coverage at --level.
    #[arg(long)]
    pub coverage: bool,
    #[arg(long, default_value_t = 0.8)]
    pub level: f64,
    /// Bounded-perturbation magnitude; adds an adversarial block per design.
    #[arg(long)]
    pub adversary_eta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output report JSON path; estimates CSV lands next to it.
    #[arg(long, default_value = "eval_report.json")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    /// t-approximation confidence interval.
    T,
    /// Permutation test of a sharp null.
    Perm,
    /// Confidence interval by inverting the permutation test.
    PermCi,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InferArgs {
    /// Design JSON produced by `design`.
    #[arg(long)]
    pub design: PathBuf,
    /// Observed outcomes CSV with columns geo,response,spend,treated.
    #[arg(long)]
    pub observed: PathBuf,
    /// Panel CSV; required for permutation methods.
    #[arg(long)]
    pub panel: Option<PathBuf>,
    #[arg(long)]
    pub pretest_len: Option<usize>,
    #[arg(long, value_enum, default_value = "t")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.8)]
    pub level: f64,
    /// Sharp null value for the permutation test.
    #[arg(long, default_value_t = 0.0)]
    pub theta_star: f64,
    /// Permutation draws (full enumeration when 2^K is smaller).
    #[arg(long, default_value_t = 999)]
    pub draws: usize,
    /// Experiment budget; default recovered from observed minus panel spend.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "inference.json")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    Synth,
    N3dm,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Geo count for synthetic panels.
    #[arg(long, default_value_t = 40)]
    pub geos: usize,
    /// Multiplicative noise level for synthetic panels.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Triple count for n3dm instances.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Triple-sum bound for n3dm instances.
    #[arg(long, default_value_t = 20)]
    pub bound: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path: panel CSV for synth, instance JSON for n3dm (the
    /// reduced panel lands next to it).
    #[arg(long, default_value = "generated.csv")]
    pub output: PathBuf,
}

/// Everything needed to reproduce a run bit-for-bit, plus wall-clock time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub version: String,
    /// SHA-256 digests of every input file, keyed by path.
    pub input_digests: Vec<(String, String)>,
    pub runtime_secs: f64,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".to_string());
    name.push_str(".manifest.json");
    output.with_file_name(name)
}

fn write_manifest(
    output: &Path,
    command: &str,
    config: serde_json::Value,
    seeds: Vec<u64>,
    inputs: &[&Path],
    started: Instant,
) -> Result<()> {
    let input_digests = inputs
        .iter()
        .map(|p| Ok((p.to_string_lossy().into_owned(), sha256_file(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        command: command.to_string(),
        config,
        seeds,
        version: env!("CARGO_PKG_VERSION").to_string(),
        input_digests,
        runtime_secs: started.elapsed().as_secs_f64(),
    };
    write_json(&manifest_path(output), &manifest)
}

/// Count the panel's periods so --pretest-len can default to half.
fn panel_periods(path: &Path) -> Result<usize> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut max_period = 0usize;
    for record in reader.records() {
        let record = record?;
        if let Some(p) = record.get(1) {
            if let Ok(p) = p.trim().parse::<usize>() {
                max_period = max_period.max(p + 1);
            }
        }
    }
    Ok(max_period)
}

fn load_panel_arg(path: &Path, pretest_len: Option<usize>) -> Result<GeoPanel> {
    let pretest_len = match pretest_len {
        Some(n) => n,
        None => (panel_periods(path)? / 2).max(1),
    };
    load_panel(path, pretest_len, false)
}

fn load_design(path: &Path) -> Result<SupergeoDesign> {
    let s = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&s)?)
}

/// Observed-outcome CSV: geo,response,spend,treated (treated in {0,1}).
fn load_observed(path: &Path) -> Result<Observed> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let expected = ["geo", "response", "spend", "treated"];
    if headers.iter().map(str::trim).ne(expected) {
        return Err(SupergeoError::BadHeader(headers.iter().collect::<Vec<_>>().join(",")));
    }
    let mut rows: Vec<(GeoId, f64, f64, bool)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |i: usize| -> Result<f64> {
            record
                .get(i)
                .unwrap_or("")
                .trim()
                .parse::<f64>()
                .map_err(|_| SupergeoError::BadHeader(format!("bad numeric field in {record:?}")))
        };
        rows.push((
            GeoId::new(record.get(0).unwrap_or("").trim()),
            parse(1)?,
            parse(2)?,
            parse(3)? != 0.0,
        ));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(Observed {
        geos: rows.iter().map(|r| r.0.clone()).collect(),
        response: rows.iter().map(|r| r.1).collect(),
        spend: rows.iter().map(|r| r.2).collect(),
        treated: rows.iter().map(|r| r.3).collect(),
    })
}

/// Reconstruct the assignment implied by an observed panel's treated column.
fn assignment_from_observed(design: &SupergeoDesign, observed: &Observed) -> Result<Assignment> {
    let mut signs = Vec::with_capacity(design.pairs.len());
    for pair in &design.pairs {
        let treated = |id: &GeoId| -> Result<bool> {
            let i = observed.index_of(id)?;
            Ok(observed.treated[i])
        };
        let plus_treated = treated(&pair.plus[0])?;
        for id in pair.plus.iter().chain(&pair.minus) {
            let t = treated(id)?;
            let on_plus = pair.plus.contains(id);
            if t != (plus_treated == on_plus) {
                return Err(SupergeoError::InvalidConfig(format!(
                    "treated column splits pair containing geo {id}"
                )));
            }
        }
        signs.push(if plus_treated { 1 } else { -1 });
    }
    Ok(crate::experiment::assignment_from_signs(design, &signs, 0))
}

fn effect_model(args: &EvaluateArgs) -> EffectModel {
    match args.effect {
        EffectArg::Homogeneous => EffectModel::homogeneous(args.theta0),
        EffectArg::Proportional => EffectModel::proportional(args.theta0, args.c),
        EffectArg::Uniform => {
            EffectModel::uniform_noise(args.theta0, args.noise_halfwidth, args.seed)
        }
    }
}

pub fn cmd_design(args: &DesignArgs) -> Result<()> {
    let started = Instant::now();
    let panel = load_panel_arg(&args.input, args.pretest_len)?;
    let aggs = aggregates(&panel);
    let z = ZValues::from_aggregates(&aggs);

    let base_cfg = DesignConfig {
        min_size: args.min_size,
        max_size: args.max_size,
        min_pairs: args.min_pairs,
        time_limit_secs: args.time_limit,
        seed: args.seed,
        strategy: args.strategy.into(),
        heuristic: HeuristicConfig {
            num_partitions: args.partitions,
            beta: args.beta,
            alpha: args.alpha,
        },
        ..DesignConfig::default()
    };
    let design = if args.starts > 1 {
        let configs: Vec<DesignConfig> = (0..args.starts)
            .map(|i| DesignConfig {
                seed: rng::derive(args.seed, i as u64),
                ..base_cfg.clone()
            })
            .collect();
        multi_start_search(&z, &configs)?
    } else {
        let pool = build_pool(&z, &base_cfg)?;
        solve_partition(&pool, &z, &base_cfg)?
    };

    write_json(&args.output, &design)?;
    println!(
        "loss {:.6} pairs {} optimal {}",
        design.loss,
        design.n_pairs(),
        design.optimal_flag
    );
    if args.baseline {
        let baseline = matched_pairs_baseline(&z)?;
        let mut name = args
            .output
            .file_stem()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "design".to_string());
        name.push_str(".baseline.json");
        let path = args.output.with_file_name(name);
        write_json(&path, &baseline)?;
        println!("baseline loss {:.6} pairs {}", baseline.loss, baseline.n_pairs());
    }
    write_manifest(
        &args.output,
        "design",
        serde_json::to_value(args)?,
        vec![args.seed],
        &[&args.input],
        started,
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AdversarialBlock {
    design: String,
    eta: f64,
    /// Design loss re-scored on the perturbed test-window responses.
    perturbed_loss: f64,
    /// Closed-form worst-case loss; matches perturbed_loss.
    closed_form: f64,
    /// Loss on the unperturbed test-window responses, for contrast.
    test_loss: f64,
}

fn adversarial_block(
    name: &str,
    design: &SupergeoDesign,
    aggs: &[GeoAggregates],
    eta: f64,
) -> Result<AdversarialBlock> {
    let z_test: Vec<f64> = aggs.iter().map(|a| a.test_response).collect();
    let adv = AdversaryConfig { eta };
    let perturbed = apply_adversary(design, aggs, &z_test, &adv)?;
    let z_perturbed = ZValues::new(
        aggs.iter()
            .map(|a| a.geo.clone())
            .zip(perturbed.iter().copied())
            .collect(),
    );
    let z_plain = ZValues::new(
        aggs.iter()
            .map(|a| (a.geo.clone(), a.test_response))
            .collect(),
    );
    Ok(AdversarialBlock {
        design: name.to_string(),
        eta,
        perturbed_loss: design_loss(design, &z_perturbed)?,
        closed_form: adversarial_loss_bound(design, aggs, &z_test, &adv)?,
        test_loss: design_loss(design, &z_plain)?,
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let started = Instant::now();
    let panel = load_panel_arg(&args.input, args.pretest_len)?;
    let aggs = aggregates(&panel);

    let mut designs = Vec::new();
    for path in &args.design {
        let name = path
            .file_stem()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        designs.push((name, load_design(path)?));
    }

    let budget = args
        .budget
        .unwrap_or_else(|| 0.1 * aggs.iter().map(|a| a.test_spend).sum::<f64>());
    let cfg = EvalConfig {
        iterations: args.iterations,
        budget,
        effect: effect_model(args),
        estimators: vec![Estimator::Empirical, Estimator::TrimmedMatch],
        trim_fraction: args.trim_fraction,
        compute_coverage: args.coverage,
        ci_level: args.level,
        seed: args.seed,
    };
    let report = run_eval(&aggs, &designs, &cfg)?;

    let adversarial = match args.adversary_eta {
        Some(eta) => designs
            .iter()
            .map(|(name, d)| adversarial_block(name, d, &aggs, eta))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };

    for entry in &report.entries {
        println!(
            "design {} estimator {} rmse {:.6} bias {:.6} failures {}",
            entry.design, entry.estimator, entry.rmse, entry.abs_bias, entry.failures
        );
    }
    for block in &adversarial {
        println!(
            "design {} adversary eta {} perturbed loss {:.6}",
            block.design, block.eta, block.perturbed_loss
        );
    }

    #[derive(Serialize)]
    struct FullReport<'a> {
        report: &'a crate::eval::EvalReport,
        adversarial: &'a [AdversarialBlock],
    }
    write_json(
        &args.output,
        &FullReport {
            report: &report,
            adversarial: &adversarial,
        },
    )?;
    let csv_path = args.output.with_extension("estimates.csv");
    let file = std::fs::File::create(&csv_path)?;
    write_estimates_csv(&report, std::io::BufWriter::new(file))?;

    let mut inputs: Vec<&Path> = vec![args.input.as_path()];
    inputs.extend(args.design.iter().map(|p| p.as_path()));
    write_manifest(
        &args.output,
        "evaluate",
        serde_json::to_value(args)?,
        vec![args.seed],
        &inputs,
        started,
    )
}

pub fn cmd_infer(args: &InferArgs) -> Result<()> {
    let started = Instant::now();
    let design = load_design(&args.design)?;
    let observed = load_observed(&args.observed)?;
    let assignment = assignment_from_observed(&design, &observed)?;

    let result: serde_json::Value = match args.method {
        MethodArg::T => {
            let diffs = crate::experiment::pair_diffs(&observed, &assignment, &design)?;
            let ci = ci_t_approx(&diffs, args.level, &[])?;
            serde_json::to_value(&ci)?
        }
        MethodArg::Perm | MethodArg::PermCi => {
            let panel_path = args.panel.as_ref().ok_or_else(|| {
                SupergeoError::InvalidConfig(
                    "permutation methods need --panel for baseline outcomes".to_string(),
                )
            })?;
            let panel = load_panel_arg(panel_path, args.pretest_len)?;
            let aggs = aggregates(&panel);
            let budget = args.budget.unwrap_or_else(|| {
                let base: f64 = aggs.iter().map(|a| a.test_spend).sum();
                (observed.spend.iter().sum::<f64>() - base).max(0.0)
            });
            let cfg = ExperimentConfig::heavyup(budget);
            match args.method {
                MethodArg::Perm => {
                    let test = permutation_test(
                        &design,
                        &observed,
                        &aggs,
                        &assignment,
                        &cfg,
                        args.theta_star,
                        args.draws,
                        args.seed,
                    )?;
                    serde_json::to_value(&test)?
                }
                _ => {
                    let ci = invert_permutation_ci(
                        &design,
                        &observed,
                        &aggs,
                        &assignment,
                        &cfg,
                        args.level,
                        None,
                        args.draws,
                        args.seed,
                    )?;
                    serde_json::to_value(&ci)?
                }
            }
        }
    };

    println!("{result}");
    write_json(&args.output, &result)?;
    let mut inputs: Vec<&Path> = vec![args.design.as_path(), args.observed.as_path()];
    if let Some(p) = &args.panel {
        inputs.push(p.as_path());
    }
    write_manifest(
        &args.output,
        "infer",
        serde_json::to_value(args)?,
        vec![args.seed],
        &inputs,
        started,
    )
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let started = Instant::now();
    match args.kind {
        KindArg::Synth => {
            let panel = synth_panel(args.geos, args.seed, args.noise);
            let file = std::fs::File::create(&args.output)?;
            panel.write_csv(std::io::BufWriter::new(file))?;
            println!("wrote {}-geo panel to {}", args.geos, args.output.display());
        }
        KindArg::N3dm => {
            let inst = plant_n3dm(args.m, args.bound, args.seed)?;
            let reduced = reduce_n3dm(&inst)?;
            write_json(&args.output, &inst)?;
            // reduced panel: one pretest and one test period, response = Z
            let geos = reduced.z.ids().to_vec();
            let response: Vec<Vec<f64>> = reduced
                .z
                .values()
                .iter()
                .map(|&v| vec![v, v])
                .collect();
            let spend: Vec<Vec<f64>> = reduced
                .z
                .values()
                .iter()
                .map(|&v| vec![0.1 * v, 0.1 * v])
                .collect();
            let panel = GeoPanel::new(geos, 1, spend, response)?;
            let csv_path = args.output.with_extension("panel.csv");
            let file = std::fs::File::create(&csv_path)?;
            panel.write_csv(std::io::BufWriter::new(file))?;
            println!(
                "wrote n3dm instance to {} and reduced panel to {}",
                args.output.display(),
                csv_path.display()
            );
        }
    }
    write_manifest(
        &args.output,
        "generate",
        serde_json::to_value(args)?,
        vec![args.seed],
        &[],
        started,
    )
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Design(args) => cmd_design(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Infer(args) => cmd_infer(args),
        Command::Generate(args) => cmd_generate(args),
    }
}

/// Process exit code for an error: 3 infeasible, 4 timed out with no
/// incumbent, 2 for any configuration or input problem.
pub fn exit_code(err: &SupergeoError) -> i32 {
    match err {
        SupergeoError::Infeasible | SupergeoError::OddCount(_) => 3,
        SupergeoError::TimeoutNoIncumbent => 4,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_parses() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&SupergeoError::Infeasible), 3);
        assert_eq!(exit_code(&SupergeoError::TimeoutNoIncumbent), 4);
        assert_eq!(exit_code(&SupergeoError::ZeroMeanZ), 2);
    }

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(
            manifest_path(Path::new("out/design.json")),
            PathBuf::from("out/design.json.manifest.json")
        );
    }
}
