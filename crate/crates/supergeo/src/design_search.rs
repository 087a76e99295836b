//! Candidate generation and the minimum-loss exact-cover search.
//!
//! The design problem: partition the geo set into disjoint subsets of size
//! between `min_size` and `max_size`, minimizing the sum of subset scores,
//! where each chosen subset becomes one supergeo pair via its optimal split.
//! The search is a branch-and-bound over a candidate pool, seeded with the
//! matched-pairs baseline whenever that baseline lives inside the pool.
//!
//! Pools can be exhaustive (all subsets in the size range) or produced by one
//! of two heuristics: restricting candidates to random partitions of the geo
//! set, or keeping only the best-scoring larger subsets around the biggest
//! geos while preserving all one-to-one pairs.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SupergeoError};
use crate::scoring::{score_indices, split_from_mask, SupergeoDesign, SupergeoPair, ZValues};

/// Geos are addressed by index into the sorted panel order; a candidate's
/// coverage is a 256-bit mask.
pub const MAX_GEOS: usize = 256;
type Mask = [u64; 4];

fn mask_set(mask: &mut Mask, i: usize) {
    mask[i / 64] |= 1u64 << (i % 64);
}

fn mask_disjoint(a: &Mask, b: &Mask) -> bool {
    a.iter().zip(b).all(|(x, y)| x & y == 0)
}

fn mask_or(a: &mut Mask, b: &Mask) {
    for (x, y) in a.iter_mut().zip(b) {
        *x |= y;
    }
}

fn mask_test(mask: &Mask, i: usize) -> bool {
    mask[i / 64] & (1u64 << (i % 64)) != 0
}

/// Candidate-generation strategy for the pool fed to the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exhaustive,
    PartitionHeuristic,
    PergeoHeuristic,
}

/// Parameters for the two candidate heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    /// Number of random partitions for the partition heuristic.
    pub num_partitions: usize,
    /// How many of the largest-Z geos get enlarged-subset candidates.
    pub beta: usize,
    /// Fraction of best-scoring subsets retained per large geo, pooled
    /// across sizes 3..=max_size.
    pub alpha: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            num_partitions: 1,
            beta: 0,
            alpha: 1.0,
        }
    }
}

/// Full configuration of one design search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub min_size: usize,
    pub max_size: usize,
    pub min_pairs: usize,
    pub time_limit_secs: f64,
    pub seed: u64,
    pub strategy: Strategy,
    pub heuristic: HeuristicConfig,
    pub require_full_cover: bool,
    /// Hard cap on the candidate pool size.
    pub pool_cap: u64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            min_size: 2,
            max_size: 4,
            min_pairs: 1,
            time_limit_secs: 3.0 * 3600.0,
            seed: 0,
            strategy: Strategy::Exhaustive,
            heuristic: HeuristicConfig::default(),
            require_full_cover: true,
            pool_cap: 50_000_000,
        }
    }
}

impl DesignConfig {
    fn validate(&self, n_geos: usize) -> Result<()> {
        if self.min_size < 2 || self.min_size > self.max_size {
            return Err(SupergeoError::InvalidConfig(format!(
                "need 2 <= min_size <= max_size, got [{}, {}]",
                self.min_size, self.max_size
            )));
        }
        if self.min_pairs < 1 {
            return Err(SupergeoError::InvalidConfig(
                "min_pairs must be at least 1".into(),
            ));
        }
        if self.time_limit_secs <= 0.0 {
            return Err(SupergeoError::InvalidConfig(
                "time_limit_secs must be positive".into(),
            ));
        }
        if n_geos > MAX_GEOS {
            return Err(SupergeoError::InvalidConfig(format!(
                "at most {MAX_GEOS} geos supported, got {n_geos}"
            )));
        }
        Ok(())
    }
}

/// One scored subset in the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Sorted geo indices.
    pub members: Vec<u16>,
    pub mask: Mask,
    pub score: f64,
    /// Plus side of the optimal split, as a bitmask over `members` positions.
    pub plus_mask: u32,
}

/// Candidate subsets plus a per-geo membership index.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    pub candidates: Vec<Candidate>,
    /// For each geo index, the pool indices of candidates containing it.
    pub membership: Vec<Vec<u32>>,
    pub n_geos: usize,
}

impl CandidatePool {
    fn from_candidates(mut candidates: Vec<Candidate>, n_geos: usize) -> Self {
        candidates.sort_by(|a, b| a.members.cmp(&b.members));
        candidates.dedup_by(|a, b| a.members == b.members);
        let mut membership = vec![Vec::new(); n_geos];
        for (ci, cand) in candidates.iter().enumerate() {
            for &g in &cand.members {
                membership[g as usize].push(ci as u32);
            }
        }
        CandidatePool {
            candidates,
            membership,
            n_geos,
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u64 = 1;
    for i in 0..k {
        result = result.saturating_mul(n - i) / (i + 1);
    }
    result
}

fn pool_size_upper_bound(n: usize, min_size: usize, max_size: usize) -> u64 {
    (min_size..=max_size.min(n))
        .map(|k| binomial(n as u64, k as u64))
        .fold(0u64, u64::saturating_add)
}

fn make_candidate(members: &[usize], z: &[f64]) -> Candidate {
    let (score, plus_mask) = score_indices(members, z).expect("candidate sizes are in [2, 16]");
    let mut mask = [0u64; 4];
    for &m in members {
        mask_set(&mut mask, m);
    }
    Candidate {
        members: members.iter().map(|&m| m as u16).collect(),
        mask,
        score,
        plus_mask,
    }
}

/// Calls `f` for every k-combination of `items`, in lexicographic order.
fn for_each_combination(items: &[usize], k: usize, f: &mut impl FnMut(&[usize])) {
    let n = items.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut combo = vec![0usize; k];
    loop {
        for (slot, &i) in combo.iter_mut().zip(&idx) {
            *slot = items[i];
        }
        f(&combo);
        // advance
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if idx[pos] != pos + n - k {
                break;
            }
            if pos == 0 {
                return;
            }
        }
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All subsets of size `[min_size, max_size]`, scored.
pub fn enumerate_candidates(z: &ZValues, cfg: &DesignConfig) -> Result<CandidatePool> {
    cfg.validate(z.len())?;
    let n = z.len();
    let bound = pool_size_upper_bound(n, cfg.min_size, cfg.max_size);
    if bound > cfg.pool_cap {
        return Err(SupergeoError::PoolTooLarge {
            size: bound,
            cap: cfg.pool_cap,
        });
    }
    let items: Vec<usize> = (0..n).collect();
    let mut candidates = Vec::with_capacity(bound as usize);
    for k in cfg.min_size..=cfg.max_size.min(n) {
        for_each_combination(&items, k, &mut |members| {
            candidates.push(make_candidate(members, z.values()));
        });
    }
    Ok(CandidatePool::from_candidates(candidates, n))
}

/// Random-partition heuristic: geos are split into `num_partitions` seeded
/// random groups and candidates are enumerated within groups only.
pub fn partition_heuristic_candidates(
    z: &ZValues,
    cfg: &DesignConfig,
    seed: u64,
) -> Result<CandidatePool> {
    cfg.validate(z.len())?;
    let n = z.len();
    let p = cfg.heuristic.num_partitions.max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    // near-even chunks; the first (n mod p) partitions get one extra geo
    let base = n / p;
    let extra = n % p;
    let mut parts: Vec<Vec<usize>> = Vec::with_capacity(p);
    let mut cursor = 0;
    for i in 0..p {
        let size = base + usize::from(i < extra);
        let mut part: Vec<usize> = order[cursor..cursor + size].to_vec();
        part.sort_unstable();
        cursor += size;
        if part.len() < cfg.min_size {
            return Err(SupergeoError::PartitionTooSmall {
                index: i,
                size: part.len(),
                min_size: cfg.min_size,
            });
        }
        parts.push(part);
    }

    let mut candidates = Vec::new();
    for part in &parts {
        for k in cfg.min_size..=cfg.max_size.min(part.len()) {
            for_each_combination(part, k, &mut |members| {
                candidates.push(make_candidate(members, z.values()));
            });
        }
    }
    let pool = CandidatePool::from_candidates(candidates, n);
    if pool.len() as u64 > cfg.pool_cap {
        return Err(SupergeoError::PoolTooLarge {
            size: pool.len() as u64,
            cap: cfg.pool_cap,
        });
    }
    Ok(pool)
}

/// Per-geo heuristic: keep every size-2 subset, and for each of the `beta`
/// largest-Z geos keep the best `alpha` fraction (by score) of subsets of
/// size 3..=max_size containing it.
pub fn pergeo_heuristic_candidates(z: &ZValues, cfg: &DesignConfig) -> Result<CandidatePool> {
    cfg.validate(z.len())?;
    let n = z.len();
    let beta = cfg.heuristic.beta.min(n);
    let alpha = cfg.heuristic.alpha;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SupergeoError::InvalidConfig(format!(
            "alpha must be in (0, 1], got {alpha}"
        )));
    }

    let mut candidates = Vec::new();
    let items: Vec<usize> = (0..n).collect();
    for_each_combination(&items, 2, &mut |members| {
        candidates.push(make_candidate(members, z.values()));
    });

    // largest pretest responses first; ties by geo order
    let mut by_size: Vec<usize> = (0..n).collect();
    by_size.sort_by(|&a, &b| z.value(b).total_cmp(&z.value(a)).then(a.cmp(&b)));

    for &big in by_size.iter().take(beta) {
        let others: Vec<usize> = (0..n).filter(|&g| g != big).collect();
        let mut scored: Vec<(f64, Vec<usize>)> = Vec::new();
        for k in 3..=cfg.max_size.min(n) {
            for_each_combination(&others, k - 1, &mut |rest| {
                let mut members: Vec<usize> = rest.to_vec();
                members.push(big);
                members.sort_unstable();
                let (sc, _) = score_indices(&members, z.values()).expect("size in [3, 16]");
                scored.push((sc, members));
            });
        }
        let keep = ((alpha * scored.len() as f64).ceil() as usize).min(scored.len());
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, members) in scored.into_iter().take(keep) {
            candidates.push(make_candidate(&members, z.values()));
        }
    }

    let pool = CandidatePool::from_candidates(candidates, n);
    if pool.len() as u64 > cfg.pool_cap {
        return Err(SupergeoError::PoolTooLarge {
            size: pool.len() as u64,
            cap: cfg.pool_cap,
        });
    }
    Ok(pool)
}

/// Sorted-adjacent matched pairs: the optimal perfect matching for scalar Z
/// under squared-difference cost.
pub fn matched_pairs_baseline(z: &ZValues) -> Result<SupergeoDesign> {
    let n = z.len();
    if n % 2 != 0 {
        return Err(SupergeoError::OddCount(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z.value(a).total_cmp(&z.value(b)).then(a.cmp(&b)));
    let mut pairs = Vec::with_capacity(n / 2);
    for chunk in order.chunks(2) {
        let (lo, hi) = (chunk[0], chunk[1]);
        let d = z.value(hi) - z.value(lo);
        // plus side is the larger-Z geo; on exact ties the lexicographically
        // smaller id (the lower index, since ids are sorted)
        let (plus, minus) = if d > 0.0 || (d == 0.0 && hi < lo) {
            (hi, lo)
        } else {
            (lo, hi)
        };
        pairs.push(SupergeoPair {
            plus: vec![z.id(plus).clone()],
            minus: vec![z.id(minus).clone()],
            score: d * d,
        });
    }
    Ok(SupergeoDesign::new(pairs, true))
}

fn design_from_choice(choice: &[u32], pool: &CandidatePool, z: &ZValues, optimal: bool) -> SupergeoDesign {
    let pairs = choice
        .iter()
        .map(|&ci| {
            let cand = &pool.candidates[ci as usize];
            let members: Vec<usize> = cand.members.iter().map(|&m| m as usize).collect();
            let (plus, minus) = split_from_mask(&members, cand.plus_mask, z);
            SupergeoPair {
                plus,
                minus,
                score: cand.score,
            }
        })
        .collect();
    SupergeoDesign::new(pairs, optimal)
}

struct SearchState<'a> {
    pool: &'a CandidatePool,
    cfg: &'a DesignConfig,
    /// Candidate indices per geo, sorted ascending by (score, members).
    by_geo: Vec<Vec<u32>>,
    /// score / |members| minimum per geo, over the whole pool.
    rate: Vec<f64>,
    deadline: Instant,
    node_budget: u32,
    timed_out: bool,
    best_cost: f64,
    best_choice: Option<Vec<u32>>,
    choice: Vec<u32>,
}

impl SearchState<'_> {
    fn check_time(&mut self) -> bool {
        self.node_budget = self.node_budget.wrapping_add(1);
        if self.node_budget % 4096 == 0 && Instant::now() >= self.deadline {
            self.timed_out = true;
        }
        self.timed_out
    }

    /// Exact-cover recursion. `bound_rest` is the sum of `rate` over
    /// uncovered geos, a lower bound on the cost of completing the cover.
    fn recurse_cover(&mut self, covered: Mask, n_covered: usize, cost: f64, bound_rest: f64) {
        if self.check_time() {
            return;
        }
        if n_covered == self.pool.n_geos {
            if self.choice.len() >= self.cfg.min_pairs && cost < self.best_cost {
                self.best_cost = cost;
                self.best_choice = Some(self.choice.clone());
            }
            return;
        }
        if cost + bound_rest >= self.best_cost {
            return;
        }

        // branch on the uncovered geo with fewest candidates
        let small_pool = self.pool.len() <= 50_000;
        let mut branch_geo = usize::MAX;
        let mut branch_count = usize::MAX;
        for g in 0..self.pool.n_geos {
            if mask_test(&covered, g) {
                continue;
            }
            let count = if small_pool {
                self.by_geo[g]
                    .iter()
                    .filter(|&&ci| mask_disjoint(&self.pool.candidates[ci as usize].mask, &covered))
                    .count()
            } else {
                self.by_geo[g].len()
            };
            if count < branch_count {
                branch_count = count;
                branch_geo = g;
                if count == 0 {
                    return; // dead end
                }
            }
        }

        let cands = std::mem::take(&mut self.by_geo[branch_geo]);
        for &ci in &cands {
            if self.timed_out {
                break;
            }
            let cand = &self.pool.candidates[ci as usize];
            if !mask_disjoint(&cand.mask, &covered) {
                continue;
            }
            let covered_rate: f64 = cand.members.iter().map(|&m| self.rate[m as usize]).sum();
            let next_bound = bound_rest - covered_rate;
            if cost + cand.score + next_bound.max(0.0) >= self.best_cost {
                // candidates are score-sorted, but the bound delta varies, so
                // keep scanning rather than breaking
                continue;
            }
            let mut next = covered;
            mask_or(&mut next, &cand.mask);
            self.choice.push(ci);
            self.recurse_cover(
                next,
                n_covered + cand.members.len(),
                cost + cand.score,
                next_bound.max(0.0),
            );
            self.choice.pop();
        }
        self.by_geo[branch_geo] = cands;
    }

    /// Partial-cover recursion used when full cover is not required: every
    /// geo may be covered by one candidate or skipped.
    fn recurse_partial(&mut self, geo: usize, covered: Mask, cost: f64) {
        if self.check_time() {
            return;
        }
        if cost >= self.best_cost {
            return;
        }
        if geo == self.pool.n_geos {
            if self.choice.len() >= self.cfg.min_pairs && cost < self.best_cost {
                self.best_cost = cost;
                self.best_choice = Some(self.choice.clone());
            }
            return;
        }
        if mask_test(&covered, geo) {
            self.recurse_partial(geo + 1, covered, cost);
            return;
        }
        // skip branch first: leaving a geo out never costs anything
        self.recurse_partial(geo + 1, covered, cost);
        for i in 0..self.by_geo[geo].len() {
            if self.timed_out {
                break;
            }
            let ci = self.by_geo[geo][i];
            let cand = &self.pool.candidates[ci as usize];
            if !mask_disjoint(&cand.mask, &covered) {
                continue;
            }
            let mut next = covered;
            mask_or(&mut next, &cand.mask);
            self.choice.push(ci);
            let score = cand.score;
            self.recurse_partial(geo + 1, next, cost + score);
            self.choice.pop();
        }
    }
}

/// Branch-and-bound over the covering formulation: pick disjoint candidates
/// covering every geo exactly once (when `require_full_cover`), at least
/// `min_pairs` of them, minimizing the summed score.
///
/// The incumbent is initialized from the matched-pairs baseline when every
/// baseline pair is present in the pool. `optimal_flag` is set only when the
/// search ran to completion within the time limit.
pub fn solve_partition(
    pool: &CandidatePool,
    z: &ZValues,
    cfg: &DesignConfig,
) -> Result<SupergeoDesign> {
    solve_partition_seeded(pool, z, cfg, None)
}

/// `solve_partition` with an extra caller-provided incumbent (e.g. the
/// solution for a smaller `max_size`, whose pool is nested in this one).
pub fn solve_partition_seeded(
    pool: &CandidatePool,
    z: &ZValues,
    cfg: &DesignConfig,
    incumbent: Option<&SupergeoDesign>,
) -> Result<SupergeoDesign> {
    cfg.validate(z.len())?;
    if pool.is_empty() {
        return Err(SupergeoError::Infeasible);
    }
    if cfg.require_full_cover && pool.membership.iter().any(|m| m.is_empty()) {
        return Err(SupergeoError::Infeasible);
    }

    let mut by_geo: Vec<Vec<u32>> = pool.membership.clone();
    for list in &mut by_geo {
        list.sort_by(|&a, &b| {
            let (ca, cb) = (&pool.candidates[a as usize], &pool.candidates[b as usize]);
            ca.score.total_cmp(&cb.score).then(ca.members.cmp(&cb.members))
        });
    }
    let rate: Vec<f64> = pool
        .membership
        .iter()
        .map(|list| {
            list.iter()
                .map(|&ci| {
                    let c = &pool.candidates[ci as usize];
                    c.score / c.members.len() as f64
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let mut best_external: Option<SupergeoDesign> = None;
    let mut best_cost = f64::INFINITY;
    let consider = |design: SupergeoDesign, best_cost: &mut f64,
                        best_external: &mut Option<SupergeoDesign>| {
        if design.n_pairs() >= cfg.min_pairs && design.loss < *best_cost {
            *best_cost = design.loss;
            *best_external = Some(design);
        }
    };
    if let Some(inc) = incumbent {
        consider(inc.clone(), &mut best_cost, &mut best_external);
    }
    if cfg.min_size == 2 && z.len() % 2 == 0 && cfg.require_full_cover {
        if let Ok(baseline) = matched_pairs_baseline(z) {
            // only usable when every baseline pair is an actual candidate
            let in_pool = baseline.pairs.iter().all(|p| {
                let mut members = [z.lookup(&p.plus[0]).unwrap(), z.lookup(&p.minus[0]).unwrap()];
                members.sort_unstable();
                let key: Vec<u16> = members.iter().map(|&m| m as u16).collect();
                pool.candidates
                    .binary_search_by(|c| c.members.cmp(&key))
                    .is_ok()
            });
            if in_pool {
                consider(baseline, &mut best_cost, &mut best_external);
            }
        }
    }

    let mut state = SearchState {
        pool,
        cfg,
        by_geo,
        rate: rate.clone(),
        deadline: Instant::now() + Duration::from_secs_f64(cfg.time_limit_secs),
        node_budget: 0,
        timed_out: false,
        best_cost,
        best_choice: None,
        choice: Vec::new(),
    };

    if cfg.require_full_cover {
        let bound0: f64 = rate.iter().sum();
        state.recurse_cover([0; 4], 0, 0.0, bound0.max(0.0));
    } else {
        state.recurse_partial(0, [0; 4], 0.0);
    }

    let optimal = !state.timed_out;
    match (state.best_choice, best_external) {
        (Some(choice), _) => Ok(design_from_choice(&choice, pool, z, optimal)),
        (None, Some(mut ext)) => {
            ext.optimal_flag = optimal;
            Ok(ext)
        }
        (None, None) => {
            if state.timed_out {
                Err(SupergeoError::TimeoutNoIncumbent)
            } else {
                Err(SupergeoError::Infeasible)
            }
        }
    }
}

/// Exhaustive recursion over every partition of the geos into size-bounded
/// blocks. Exact, so it serves as the optimality oracle for the solver.
pub fn brute_force_partition(z: &ZValues, cfg: &DesignConfig) -> Result<SupergeoDesign> {
    cfg.validate(z.len())?;
    let n = z.len();
    if n > 12 {
        return Err(SupergeoError::TooLarge(n));
    }

    fn recurse(
        remaining: u16,
        n_left: usize,
        cost: f64,
        blocks: &mut Vec<Vec<usize>>,
        z: &ZValues,
        cfg: &DesignConfig,
        best: &mut (f64, Option<Vec<Vec<usize>>>),
    ) {
        if cost >= best.0 {
            return;
        }
        if n_left == 0 {
            if blocks.len() >= cfg.min_pairs {
                *best = (cost, Some(blocks.clone()));
            }
            return;
        }
        let first = remaining.trailing_zeros() as usize;
        let rest: Vec<usize> = (first + 1..z.len())
            .filter(|&g| remaining & (1 << g) != 0)
            .collect();
        for k in cfg.min_size..=cfg.max_size.min(n_left) {
            for_each_combination(&rest, k - 1, &mut |others| {
                let mut members = vec![first];
                members.extend_from_slice(others);
                let (sc, _) = score_indices(&members, z.values()).expect("size in [2, 12]");
                let mut next = remaining;
                for &m in &members {
                    next &= !(1 << m);
                }
                blocks.push(members.clone());
                recurse(next, n_left - k, cost + sc, blocks, z, cfg, best);
                blocks.pop();
            });
        }
    }

    let mut best: (f64, Option<Vec<Vec<usize>>>) = (f64::INFINITY, None);
    let all: u16 = if n == 16 { u16::MAX } else { (1u16 << n) - 1 };
    recurse(all, n, 0.0, &mut Vec::new(), z, cfg, &mut best);

    match best.1 {
        Some(blocks) => {
            let pairs = blocks
                .iter()
                .map(|members| {
                    let (sc, plus_mask) = score_indices(members, z.values()).unwrap();
                    let (plus, minus) = split_from_mask(members, plus_mask, z);
                    SupergeoPair {
                        plus,
                        minus,
                        score: sc,
                    }
                })
                .collect();
            Ok(SupergeoDesign::new(pairs, true))
        }
        None => Err(SupergeoError::Infeasible),
    }
}

/// Run one search per config and keep the lowest-loss design. Ties prefer
/// fewer supergeos of size > 2, then the lexicographically smaller design.
pub fn multi_start_search(z: &ZValues, configs: &[DesignConfig]) -> Result<SupergeoDesign> {
    if configs.is_empty() {
        return Err(SupergeoError::AllFailed("no configs given".into()));
    }
    let mut best: Option<SupergeoDesign> = None;
    let mut last_err: Option<SupergeoError> = None;
    for cfg in configs {
        let result = build_pool(z, cfg).and_then(|pool| solve_partition(&pool, z, cfg));
        match result {
            Ok(design) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let key = |d: &SupergeoDesign| {
                            d.pairs.iter().filter(|p| p.size() > 2).count()
                        };
                        fn lex(d: &SupergeoDesign) -> Vec<&[crate::geo_data::GeoId]> {
                            d.pairs.iter().map(|p| p.plus.as_slice()).collect()
                        }
                        design.loss < b.loss
                            || (design.loss == b.loss
                                && (key(&design), lex(&design)) < (key(b), lex(b)))
                    }
                };
                if better {
                    best = Some(design);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        SupergeoError::AllFailed(
            last_err
                .map(|e| e.to_string())
                .unwrap_or_else(|| "unknown".into()),
        )
    })
}

/// Build the candidate pool dictated by the config's strategy.
pub fn build_pool(z: &ZValues, cfg: &DesignConfig) -> Result<CandidatePool> {
    match cfg.strategy {
        Strategy::Exhaustive => enumerate_candidates(z, cfg),
        Strategy::PartitionHeuristic => partition_heuristic_candidates(z, cfg, cfg.seed),
        Strategy::PergeoHeuristic => pergeo_heuristic_candidates(z, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_data::GeoId;

    fn z_from(vals: &[f64]) -> ZValues {
        ZValues::new(
            vals.iter()
                .enumerate()
                .map(|(i, &v)| (GeoId::new(format!("g{i:02}")), v))
                .collect(),
        )
    }

    fn cfg(min_size: usize, max_size: usize) -> DesignConfig {
        DesignConfig {
            min_size,
            max_size,
            time_limit_secs: 30.0,
            ..DesignConfig::default()
        }
    }

    #[test]
    fn exhaustive_pool_counts() {
        let z = z_from(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let pool = enumerate_candidates(&z, &cfg(2, 2)).unwrap();
        assert_eq!(pool.len(), 10); // C(5,2)

        let z6 = z_from(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let pool = enumerate_candidates(&z6, &cfg(2, 4)).unwrap();
        assert_eq!(pool.len(), 50); // C(6,2)+C(6,3)+C(6,4)
    }

    #[test]
    fn pool_cap_enforced() {
        let z = z_from(&(0..210).map(|i| i as f64 + 1.0).collect::<Vec<_>>());
        let err = enumerate_candidates(&z, &cfg(2, 4)).unwrap_err();
        assert!(matches!(err, SupergeoError::PoolTooLarge { .. }));
    }

    #[test]
    fn partition_heuristic_degenerate_and_deterministic() {
        let z = z_from(&[3.0, 1.0, 4.0, 1.5, 9.0, 2.0]);
        let mut c = cfg(2, 3);
        c.strategy = Strategy::PartitionHeuristic;
        c.heuristic.num_partitions = 1;
        let full = enumerate_candidates(&z, &c).unwrap();
        let one = partition_heuristic_candidates(&z, &c, 7).unwrap();
        assert_eq!(one.candidates, full.candidates);

        c.heuristic.num_partitions = 2;
        let a = partition_heuristic_candidates(&z, &c, 5).unwrap();
        let b = partition_heuristic_candidates(&z, &c, 5).unwrap();
        assert_eq!(a.candidates, b.candidates);
        assert!(a.len() < full.len());
    }

    #[test]
    fn partition_too_small() {
        let z = z_from(&[1.0, 2.0, 3.0]);
        let mut c = cfg(2, 2);
        c.heuristic.num_partitions = 3;
        let err = partition_heuristic_candidates(&z, &c, 1).unwrap_err();
        assert!(matches!(err, SupergeoError::PartitionTooSmall { .. }));
    }

    #[test]
    fn pergeo_heuristic_extremes() {
        let z = z_from(&[5.0, 1.0, 9.0, 2.0, 7.0, 3.0]);
        // beta = 0 keeps exactly the pairs
        let mut c = cfg(2, 4);
        c.heuristic.beta = 0;
        let pool = pergeo_heuristic_candidates(&z, &c).unwrap();
        assert_eq!(pool.len(), 15);
        assert!(pool.candidates.iter().all(|cand| cand.members.len() == 2));

        // alpha = 1, beta = N reproduces the exhaustive pool
        c.heuristic.beta = 6;
        c.heuristic.alpha = 1.0;
        let pool = pergeo_heuristic_candidates(&z, &c).unwrap();
        let full = enumerate_candidates(&z, &c).unwrap();
        assert_eq!(pool.candidates, full.candidates);
    }

    #[test]
    fn pergeo_heuristic_counts() {
        let z = z_from(&(0..10).map(|i| (i + 1) as f64).collect::<Vec<_>>());
        let mut c = cfg(2, 3);
        c.heuristic.beta = 2;
        c.heuristic.alpha = 0.1;
        let pool = pergeo_heuristic_candidates(&z, &c).unwrap();
        // 45 pairs plus up to 2 * ceil(0.1 * 36) = 8 triples
        let pairs = pool.candidates.iter().filter(|x| x.members.len() == 2).count();
        let triples = pool.candidates.iter().filter(|x| x.members.len() == 3).count();
        assert_eq!(pairs, 45);
        assert!(triples <= 8 && triples >= 4);
    }

    #[test]
    fn solve_toy_instance_to_zero_loss() {
        let z = z_from(&[1.0, 2.0, 3.0, 10.0, 11.0, 21.0]);
        let c = cfg(2, 4);
        let pool = enumerate_candidates(&z, &c).unwrap();
        let design = solve_partition(&pool, &z, &c).unwrap();
        assert_eq!(design.loss, 0.0);
        assert!(design.optimal_flag);
        assert_eq!(design.covered.len(), 6);
    }

    #[test]
    fn infeasible_odd_with_pairs_only() {
        let z = z_from(&[1.0, 2.0, 3.0]);
        let c = cfg(2, 2);
        let pool = enumerate_candidates(&z, &c).unwrap();
        assert!(matches!(
            solve_partition(&pool, &z, &c),
            Err(SupergeoError::Infeasible)
        ));
        assert!(matches!(
            brute_force_partition(&z, &c),
            Err(SupergeoError::Infeasible)
        ));
    }

    #[test]
    fn identical_values_pair_off_perfectly() {
        let z = z_from(&[1.0, 1.0, 1.0, 1.0]);
        let c = cfg(2, 2);
        let pool = enumerate_candidates(&z, &c).unwrap();
        let design = solve_partition(&pool, &z, &c).unwrap();
        assert_eq!(design.loss, 0.0);
        assert_eq!(design.n_pairs(), 2);
        assert!(design.optimal_flag);
    }

    #[test]
    fn baseline_pairs_adjacent_after_sorting() {
        let z = z_from(&[1.0, 2.0, 10.0, 11.0]);
        let design = matched_pairs_baseline(&z).unwrap();
        assert_eq!(design.loss, 2.0); // brute force over 3 matchings: 2, 162, 200
        assert_eq!(design.n_pairs(), 2);

        let z = z_from(&[5.0, 5.0, 5.0, 5.0]);
        assert_eq!(matched_pairs_baseline(&z).unwrap().loss, 0.0);

        let z = z_from(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(matched_pairs_baseline(&z).unwrap().loss, 2.0); // vs 8, 18

        let z = z_from(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            matched_pairs_baseline(&z),
            Err(SupergeoError::OddCount(3))
        ));
    }

    #[test]
    fn baseline_is_optimal_matching() {
        // brute force over all perfect matchings on random instances
        let mut state = 0xabcdef_u64;
        for _ in 0..50 {
            let n = 6;
            let vals: Vec<f64> = (0..n)
                .map(|_| {
                    state = crate::rng::mix(state);
                    (state % 1000) as f64
                })
                .collect();
            let z = z_from(&vals);
            let baseline = matched_pairs_baseline(&z).unwrap();

            fn best_matching(avail: &mut Vec<usize>, vals: &[f64]) -> f64 {
                if avail.is_empty() {
                    return 0.0;
                }
                let first = avail.remove(0);
                let mut best = f64::INFINITY;
                for i in 0..avail.len() {
                    let other = avail.remove(i);
                    let d = vals[first] - vals[other];
                    best = best.min(d * d + best_matching(avail, vals));
                    avail.insert(i, other);
                }
                avail.insert(0, first);
                best
            }
            let oracle = best_matching(&mut (0..n).collect(), &vals);
            assert_eq!(baseline.loss, oracle, "vals={vals:?}");
        }
    }

    #[test]
    fn brute_force_small_cases() {
        let z = z_from(&[1.0, 2.0, 4.0]);
        let design = brute_force_partition(&z, &cfg(3, 3)).unwrap();
        assert_eq!(design.loss, 1.0);

        let z = z_from(&[1.0, 2.0, 3.0, 6.0]);
        let design = brute_force_partition(&z, &cfg(2, 4)).unwrap();
        assert_eq!(design.loss, 0.0); // 1 + 2 + 3 = 6
    }

    #[test]
    fn solver_matches_brute_force_on_random_instances() {
        let mut state = 0x5eed_u64;
        for trial in 0..30 {
            let n = [6, 8, 10][trial % 3];
            let u = [2, 3, 4][(trial / 3) % 3];
            let vals: Vec<f64> = (0..n)
                .map(|_| {
                    state = crate::rng::mix(state);
                    (state % 500 + 1) as f64
                })
                .collect();
            let z = z_from(&vals);
            let c = cfg(2, u);
            let pool = enumerate_candidates(&z, &c).unwrap();
            let solved = solve_partition(&pool, &z, &c).unwrap();
            let oracle = brute_force_partition(&z, &c).unwrap();
            assert!(solved.optimal_flag);
            assert_eq!(solved.loss, oracle.loss, "n={n} u={u} vals={vals:?}");
        }
    }

    #[test]
    fn solver_dominates_baseline() {
        let mut state = 99u64;
        for _ in 0..20 {
            let vals: Vec<f64> = (0..8)
                .map(|_| {
                    state = crate::rng::mix(state);
                    (state % 100 + 1) as f64
                })
                .collect();
            let z = z_from(&vals);
            let c = cfg(2, 4);
            let pool = enumerate_candidates(&z, &c).unwrap();
            let solved = solve_partition(&pool, &z, &c).unwrap();
            let baseline = matched_pairs_baseline(&z).unwrap();
            assert!(solved.loss <= baseline.loss);
        }
    }

    #[test]
    fn nested_pools_are_monotone_in_max_size() {
        let mut state = 0xfeed_u64;
        let vals: Vec<f64> = (0..10)
            .map(|_| {
                state = crate::rng::mix(state);
                (state % 300 + 1) as f64
            })
            .collect();
        let z = z_from(&vals);
        let mut last = f64::INFINITY;
        for u in [2, 3, 4] {
            let c = cfg(2, u);
            let pool = enumerate_candidates(&z, &c).unwrap();
            let design = solve_partition(&pool, &z, &c).unwrap();
            assert!(design.optimal_flag);
            assert!(design.loss <= last);
            last = design.loss;
        }
    }

    #[test]
    fn multi_start_picks_the_better_run() {
        let z = z_from(&[1.0, 2.0, 3.0, 10.0, 11.0, 21.0]);
        let mut heur = cfg(2, 2);
        heur.strategy = Strategy::PartitionHeuristic;
        heur.heuristic.num_partitions = 2;
        heur.seed = 3;
        let full = cfg(2, 4);
        let best = multi_start_search(&z, &[heur.clone(), full.clone()]).unwrap();
        assert_eq!(best.loss, 0.0);

        // single config equals a direct solve
        let direct = {
            let pool = enumerate_candidates(&z, &full).unwrap();
            solve_partition(&pool, &z, &full).unwrap()
        };
        let single = multi_start_search(&z, &[full]).unwrap();
        assert_eq!(single, direct);
    }

    #[test]
    fn multi_start_all_failed() {
        let z = z_from(&[1.0, 2.0, 3.0]);
        let c = cfg(2, 2); // odd N, pairs only
        assert!(matches!(
            multi_start_search(&z, &[c]),
            Err(SupergeoError::AllFailed(_))
        ));
        assert!(matches!(
            multi_start_search(&z, &[]),
            Err(SupergeoError::AllFailed(_))
        ));
    }

    #[test]
    fn partial_cover_min_pairs() {
        let z = z_from(&[1.0, 1.0, 50.0, 90.0]);
        let mut c = cfg(2, 2);
        c.require_full_cover = false;
        let pool = enumerate_candidates(&z, &c).unwrap();
        let design = solve_partition(&pool, &z, &c).unwrap();
        // only the perfectly matched pair needs to be kept
        assert_eq!(design.loss, 0.0);
        assert_eq!(design.n_pairs(), 1);
        assert_eq!(design.covered.len(), 2);
    }
}
