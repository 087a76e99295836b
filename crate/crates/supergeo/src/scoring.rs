//! Balanced-split scoring of geo subsets and design loss.
//!
//! The score of a subset G is the minimum of (Z_plus - Z_minus)^2 over all
//! two-sided splits of G with both sides non-empty. A design's loss is the
//! sum of its pairs' scores, which equals the variance of the empirical
//! estimator (times B^2) under homogeneous effects.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SupergeoError};
use crate::geo_data::GeoId;

pub const MAX_SPLIT_SIZE: usize = 16;

/// Matching values (Z proxies) in a fixed geo order with id lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<(GeoId, f64)>", into = "Vec<(GeoId, f64)>")]
pub struct ZValues {
    ids: Vec<GeoId>,
    values: Vec<f64>,
    index: HashMap<GeoId, usize>,
}

impl From<Vec<(GeoId, f64)>> for ZValues {
    fn from(pairs: Vec<(GeoId, f64)>) -> Self {
        ZValues::new(pairs)
    }
}

impl From<ZValues> for Vec<(GeoId, f64)> {
    fn from(z: ZValues) -> Self {
        z.ids.into_iter().zip(z.values).collect()
    }
}

impl ZValues {
    pub fn new(pairs: Vec<(GeoId, f64)>) -> Self {
        let mut pairs = pairs;
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let ids: Vec<GeoId> = pairs.iter().map(|(id, _)| id.clone()).collect();
        let values: Vec<f64> = pairs.iter().map(|&(_, v)| v).collect();
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        ZValues { ids, values, index }
    }

    pub fn from_aggregates(aggs: &[crate::geo_data::GeoAggregates]) -> Self {
        Self::new(
            aggs.iter()
                .map(|a| (a.geo.clone(), a.pretest_response))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[GeoId] {
        &self.ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn id(&self, i: usize) -> &GeoId {
        &self.ids[i]
    }

    pub fn lookup(&self, id: &GeoId) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| SupergeoError::UnknownGeo(id.to_string()))
    }
}

/// One supergeo pair: two disjoint non-empty geo sets and the squared
/// difference of their Z sums for the stored split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupergeoPair {
    pub plus: Vec<GeoId>,
    pub minus: Vec<GeoId>,
    pub score: f64,
}

impl SupergeoPair {
    pub fn size(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn geos(&self) -> impl Iterator<Item = &GeoId> {
        self.plus.iter().chain(self.minus.iter())
    }
}

/// A full design: disjoint supergeo pairs plus their summed loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupergeoDesign {
    pub pairs: Vec<SupergeoPair>,
    pub loss: f64,
    pub covered: Vec<GeoId>,
    /// True when the solver proved the design optimal within its time limit.
    pub optimal_flag: bool,
}

impl SupergeoDesign {
    pub fn new(mut pairs: Vec<SupergeoPair>, optimal_flag: bool) -> Self {
        pairs.sort_by(|a, b| a.plus.cmp(&b.plus));
        let loss = pairs.iter().map(|p| p.score).sum();
        let mut covered: Vec<GeoId> = pairs.iter().flat_map(|p| p.geos().cloned()).collect();
        covered.sort();
        SupergeoDesign {
            pairs,
            loss,
            covered,
            optimal_flag,
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }
}

/// Minimum-imbalance split of a subset given as indices into `z`.
///
/// Returns (score, plus-side mask over the positions of `members`). The plus
/// side is canonicalized to the larger-Z side; exact Z ties and ties between
/// optimal splits resolve to the lexicographically smallest plus set.
pub fn score_indices(members: &[usize], z: &[f64]) -> Result<(f64, u32)> {
    let n = members.len();
    if n < 2 {
        return Err(SupergeoError::SubsetTooSmall(n));
    }
    if n > MAX_SPLIT_SIZE {
        return Err(SupergeoError::SubsetTooLarge(n));
    }
    let vals: Vec<f64> = members.iter().map(|&i| z[i]).collect();
    let total: f64 = vals.iter().sum();
    let full: u32 = (1u32 << n) - 1;

    let mut best_score = f64::INFINITY;
    let mut best_plus: u32 = 0;
    // fix position 0 on one side; each partition is visited once
    let half = 1u32 << (n - 1);
    for low in 0..half {
        let mask = (low << 1) | 1;
        if mask == full {
            continue; // empty minus side
        }
        let mut sum_plus = 0.0;
        let mut m = mask;
        while m != 0 {
            let b = m.trailing_zeros() as usize;
            sum_plus += vals[b];
            m &= m - 1;
        }
        let diff = 2.0 * sum_plus - total;
        let sc = diff * diff;
        if sc > best_score {
            continue;
        }
        let plus = canonical_plus(mask, full, diff);
        if sc < best_score || lex_less(plus, best_plus) {
            best_score = sc;
            best_plus = plus;
        }
    }
    Ok((best_score, best_plus))
}

/// Pick the plus side: larger Z sum wins; exact tie goes to the
/// lexicographically smaller side.
fn canonical_plus(mask: u32, full: u32, diff: f64) -> u32 {
    let comp = full & !mask;
    if diff > 0.0 {
        mask
    } else if diff < 0.0 {
        comp
    } else if lex_less(mask, comp) {
        mask
    } else {
        comp
    }
}

/// Lexicographic order on index sets encoded as bitmasks: compare the sorted
/// element lists position by position; a proper prefix sorts first.
fn lex_less(a: u32, b: u32) -> bool {
    let (mut a, mut b) = (a, b);
    while a != 0 && b != 0 {
        let (ia, ib) = (a.trailing_zeros(), b.trailing_zeros());
        if ia != ib {
            return ia < ib;
        }
        a &= a - 1;
        b &= b - 1;
    }
    a == 0 && b != 0
}

/// Score a subset of geo ids, returning the optimal split.
pub fn score(subset: &[GeoId], z: &ZValues) -> Result<(f64, (Vec<GeoId>, Vec<GeoId>))> {
    let mut members: Vec<usize> = subset
        .iter()
        .map(|id| z.lookup(id))
        .collect::<Result<_>>()?;
    members.sort_unstable();
    let (sc, plus_mask) = score_indices(&members, z.values())?;
    let (plus, minus) = split_from_mask(&members, plus_mask, z);
    Ok((sc, (plus, minus)))
}

pub fn split_from_mask(members: &[usize], plus_mask: u32, z: &ZValues) -> (Vec<GeoId>, Vec<GeoId>) {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (pos, &idx) in members.iter().enumerate() {
        if plus_mask & (1 << pos) != 0 {
            plus.push(z.id(idx).clone());
        } else {
            minus.push(z.id(idx).clone());
        }
    }
    (plus, minus)
}

/// Sum of per-pair squared Z differences for the stored splits (not
/// re-optimized).
pub fn design_loss(design: &SupergeoDesign, z: &ZValues) -> Result<f64> {
    let mut loss = 0.0;
    for pair in &design.pairs {
        let zp: f64 = pair
            .plus
            .iter()
            .map(|id| z.lookup(id).map(|i| z.value(i)))
            .sum::<Result<f64>>()?;
        let zm: f64 = pair
            .minus
            .iter()
            .map(|id| z.lookup(id).map(|i| z.value(i)))
            .sum::<Result<f64>>()?;
        let d = zp - zm;
        loss += d * d;
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zmap(pairs: &[(&str, f64)]) -> ZValues {
        ZValues::new(pairs.iter().map(|&(id, v)| (GeoId::from(id), v)).collect())
    }

    fn ids(names: &[&str]) -> Vec<GeoId> {
        names.iter().map(|&n| GeoId::from(n)).collect()
    }

    #[test]
    fn two_element_subset() {
        let z = zmap(&[("a", 3.0), ("b", 5.0)]);
        let (sc, (plus, minus)) = score(&ids(&["a", "b"]), &z).unwrap();
        assert_eq!(sc, 4.0);
        assert_eq!(plus, ids(&["b"]));
        assert_eq!(minus, ids(&["a"]));
    }

    #[test]
    fn perfect_three_way_split() {
        let z = zmap(&[("a", 1.0), ("b", 2.0), ("c", 3.0)]);
        let (sc, (plus, minus)) = score(&ids(&["a", "b", "c"]), &z).unwrap();
        assert_eq!(sc, 0.0);
        assert_eq!(plus, ids(&["a", "b"]));
        assert_eq!(minus, ids(&["c"]));
    }

    #[test]
    fn imperfect_three_way_split() {
        // brute force over all 2^3 signed splits: min is ({a,b},{c}) -> 1
        let z = zmap(&[("a", 1.0), ("b", 2.0), ("c", 4.0)]);
        let (sc, _) = score(&ids(&["a", "b", "c"]), &z).unwrap();
        assert_eq!(sc, 1.0);
    }

    #[test]
    fn size_bounds_enforced() {
        let z = zmap(&[("a", 1.0)]);
        assert!(matches!(
            score(&ids(&["a"]), &z),
            Err(SupergeoError::SubsetTooSmall(1))
        ));
        let many: Vec<(GeoId, f64)> = (0..20)
            .map(|i| (GeoId::new(format!("g{i:02}")), i as f64))
            .collect();
        let z = ZValues::new(many.clone());
        let subset: Vec<GeoId> = many.iter().map(|(id, _)| id.clone()).collect();
        assert!(matches!(
            score(&subset, &z),
            Err(SupergeoError::SubsetTooLarge(20))
        ));
    }

    #[test]
    fn matches_brute_force_over_signed_splits() {
        // exhaustive oracle that also allows empty sides; with positive Z the
        // optimum never leaves a side empty, so results must agree
        let mut state = 0x1234_5678_u64;
        let mut next = || {
            state = crate::rng::mix(state);
            (state % 1000 + 1) as f64
        };
        for trial in 0..200 {
            let n = 2 + (trial % 7);
            let vals: Vec<(GeoId, f64)> = (0..n)
                .map(|i| (GeoId::new(format!("g{i}")), next()))
                .collect();
            let z = ZValues::new(vals.clone());
            let subset: Vec<GeoId> = vals.iter().map(|(id, _)| id.clone()).collect();
            let (sc, (plus, minus)) = score(&subset, &z).unwrap();

            let raw: Vec<f64> = vals.iter().map(|&(_, v)| v).collect();
            let total: f64 = raw.iter().sum();
            let mut oracle = f64::INFINITY;
            for mask in 0..(1u32 << n) {
                let sum_plus: f64 = (0..n)
                    .filter(|&i| mask & (1 << i) != 0)
                    .map(|i| raw[i])
                    .sum();
                let d = 2.0 * sum_plus - total;
                oracle = oracle.min(d * d);
            }
            assert_eq!(sc, oracle, "n={n} values={raw:?}");
            assert!(!plus.is_empty() && !minus.is_empty());
        }
    }

    #[test]
    fn plus_side_has_larger_z_sum() {
        let mut state = 0xdead_beef_u64;
        for trial in 0..100 {
            let n = 2 + (trial % 5);
            let vals: Vec<(GeoId, f64)> = (0..n)
                .map(|i| {
                    state = crate::rng::mix(state);
                    (GeoId::new(format!("g{i}")), (state % 97) as f64 + 1.0)
                })
                .collect();
            let z = ZValues::new(vals.clone());
            let subset: Vec<GeoId> = vals.iter().map(|(id, _)| id.clone()).collect();
            let (_, (plus, minus)) = score(&subset, &z).unwrap();
            let zp: f64 = plus.iter().map(|id| z.value(z.lookup(id).unwrap())).sum();
            let zm: f64 = minus.iter().map(|id| z.value(z.lookup(id).unwrap())).sum();
            assert!(zp >= zm);
        }
    }

    #[test]
    fn design_loss_sums_stored_splits() {
        let z = ZValues::new(
            (1..=5)
                .map(|i| (GeoId::new(format!("g{i}")), i as f64))
                .collect(),
        );
        let design = SupergeoDesign::new(
            vec![
                SupergeoPair {
                    plus: ids(&["g1", "g2"]),
                    minus: ids(&["g3"]),
                    score: 0.0,
                },
                SupergeoPair {
                    plus: ids(&["g5"]),
                    minus: ids(&["g4"]),
                    score: 1.0,
                },
            ],
            true,
        );
        assert_eq!(design_loss(&design, &z).unwrap(), 1.0);
        assert_eq!(design.loss, 1.0);

        let empty = SupergeoDesign::new(vec![], true);
        assert_eq!(design_loss(&empty, &z).unwrap(), 0.0);
    }

    #[test]
    fn design_loss_unknown_geo() {
        let z = zmap(&[("a", 1.0)]);
        let design = SupergeoDesign::new(
            vec![SupergeoPair {
                plus: ids(&["a"]),
                minus: ids(&["zzz"]),
                score: 0.0,
            }],
            false,
        );
        assert!(matches!(
            design_loss(&design, &z),
            Err(SupergeoError::UnknownGeo(_))
        ));
    }

    #[test]
    fn rescoring_a_stored_pair_never_increases() {
        let z = zmap(&[("a", 1.0), ("b", 4.0), ("c", 6.0), ("d", 2.0)]);
        // deliberately suboptimal split
        let stored_diff: f64 = (1.0 + 4.0) - (6.0 + 2.0);
        let (sc, _) = score(&ids(&["a", "b", "c", "d"]), &z).unwrap();
        assert!(sc <= stored_diff * stored_diff);
    }
}
