//! Supergeo matched-pair experimental design for geo experiments.
//!
//! A supergeo design partitions a set of geographic units into disjoint pairs
//! of "supergeos" (aggregated groups of geos) so that the two sides of every
//! pair have nearly equal baseline response. Randomizing treatment within each
//! pair yields an unbiased estimator of the incremental return on ad spend
//! (iROAS) whose variance is proportional to the sum of squared within-pair
//! imbalances. Finding the minimum-imbalance partition is NP-hard; this crate
//! solves it with an exact-cover branch-and-bound over candidate subsets,
//! optionally restricted by candidate-generation heuristics.
//!
//! The crate also ships the surrounding experimental machinery: half-synthetic
//! treatment injection, empirical and trimmed-match iROAS estimators,
//! t-approximation and permutation-based inference, a Monte-Carlo evaluation
//! harness, and generators for synthetic panels and NP-hard reduction
//! instances.
//!
//! See the `examples/` directory for runnable demonstrations of each
//! capability, or use the `supergeo` binary for end-to-end runs.

pub mod cli;
pub mod design_search;
pub mod effects;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod geo_data;
pub mod inference;
pub mod instance_gen;
pub mod rng;
pub mod scoring;

pub use design_search::{
    brute_force_partition, enumerate_candidates, matched_pairs_baseline, multi_start_search,
    partition_heuristic_candidates, pergeo_heuristic_candidates, solve_partition, CandidatePool,
    DesignConfig, HeuristicConfig, Strategy,
};
pub use effects::{make_effects, target_theta, EffectKind, EffectModel, Estimand};
pub use error::SupergeoError;
pub use eval::{
    apply_adversary, run_eval, size_sweep, synth_panel, AdversaryConfig, EvalConfig, EvalReport,
};
pub use experiment::{
    draw_assignment, empirical_estimator, error_decomposition, inject_effects, plan_spend,
    trimmed_match_estimator, Assignment, ErrorDecomposition, ExperimentConfig, Observed,
    SpendPlan, TrimmedEstimate,
};
pub use geo_data::{aggregates, load_panel, GeoAggregates, GeoId, GeoPanel};
pub use inference::{
    ci_t_approx, invert_permutation_ci, permutation_test, ConfidenceInterval,
    PermutationTestResult,
};
pub use instance_gen::{plant_n3dm, reduce_n3dm, N3dmInstance};
pub use scoring::{design_loss, score, SupergeoDesign, SupergeoPair};
