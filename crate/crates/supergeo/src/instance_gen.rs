//! Hardness-instance generation: numerical 3-dimensional matching (N3DM)
//! inputs and their reduction to size-3 supergeo design instances.
//!
//! An N3DM instance has three disjoint element sets W, X, Y of equal size m
//! with sizes s(a) and a bound B; it is a yes-instance iff the elements can
//! be grouped into m triples (w, x, y), one element from each set, with
//! s(w) + s(x) + s(y) = B for every triple. The reduction maps each element
//! to a geo whose Z value offsets the size by a multiple of a large constant
//! M, so that the only zero-score supergeos of size <= 3 are exactly the
//! triples {w, x, y} with s(w) + s(x) + s(y) = B. A zero-loss design with
//! maximum size 3 therefore exists iff the N3DM instance is a yes-instance.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SupergeoError};
use crate::geo_data::GeoId;
use crate::rng;
use crate::scoring::ZValues;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct N3dmInstance {
    /// Element sizes s(w) for W.
    pub w: Vec<u64>,
    /// Element sizes s(x) for X.
    pub x: Vec<u64>,
    /// Element sizes s(y) for Y.
    pub y: Vec<u64>,
    /// Target triple sum B.
    pub bound: u64,
    /// For planted instances: indices (i, j, k) of a witness matching,
    /// empty when no witness is known.
    pub planted: Vec<(usize, usize, usize)>,
}

impl N3dmInstance {
    pub fn m(&self) -> usize {
        self.w.len()
    }

    /// Check a witness matching: every element used exactly once and every
    /// triple summing to the bound.
    pub fn check_matching(&self, triples: &[(usize, usize, usize)]) -> bool {
        let m = self.m();
        if triples.len() != m {
            return false;
        }
        let mut used_w = vec![false; m];
        let mut used_x = vec![false; m];
        let mut used_y = vec![false; m];
        for &(i, j, k) in triples {
            if i >= m || j >= m || k >= m || used_w[i] || used_x[j] || used_y[k] {
                return false;
            }
            used_w[i] = true;
            used_x[j] = true;
            used_y[k] = true;
            if self.w[i] + self.x[j] + self.y[k] != self.bound {
                return false;
            }
        }
        true
    }
}

/// The geo instance produced by the reduction, plus the constant used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedInstance {
    pub z: ZValues,
    /// Offset constant M = 1 + B + sum of all sizes.
    pub offset: u64,
    /// Loss of the planted design (zero for yes-instances with a witness).
    pub planted_loss: Option<f64>,
}

/// Map an N3DM instance to geo Z values:
///   Z(w_i) = s(w_i) + M,  Z(x_j) = s(x_j) + 3M,  Z(y_k) = B - s(y_k) + 4M
/// with M = 1 + B + sum of all sizes. Geo ids are prefixed w/x/y so set
/// membership stays readable.
pub fn reduce_n3dm(inst: &N3dmInstance) -> Result<ReducedInstance> {
    let m = inst.m();
    if inst.x.len() != m || inst.y.len() != m || m == 0 {
        return Err(SupergeoError::InvalidConfig(
            "n3dm sets must be non-empty and of equal size".to_string(),
        ));
    }
    if inst.y.iter().any(|&s| s > inst.bound) {
        return Err(SupergeoError::InfeasibleBound(inst.bound));
    }
    let total: u64 = inst
        .w
        .iter()
        .chain(&inst.x)
        .chain(&inst.y)
        .sum();
    let offset = 1 + inst.bound + total;

    let mut pairs = Vec::with_capacity(3 * m);
    for (i, &s) in inst.w.iter().enumerate() {
        pairs.push((GeoId::new(format!("w{i:03}")), (s + offset) as f64));
    }
    for (j, &s) in inst.x.iter().enumerate() {
        pairs.push((GeoId::new(format!("x{j:03}")), (s + 3 * offset) as f64));
    }
    for (k, &s) in inst.y.iter().enumerate() {
        pairs.push((
            GeoId::new(format!("y{k:03}")),
            (inst.bound - s + 4 * offset) as f64,
        ));
    }

    let planted_loss = if inst.planted.is_empty() {
        None
    } else if inst.check_matching(&inst.planted) {
        Some(0.0)
    } else {
        return Err(SupergeoError::InvalidConfig(
            "planted witness does not satisfy the instance".to_string(),
        ));
    };
    Ok(ReducedInstance {
        z: ZValues::new(pairs),
        offset,
        planted_loss,
    })
}

/// Build a planted yes-instance: draw m triples that each sum to `bound`,
/// then independently shuffle the three columns so the witness is hidden.
/// Sizes are kept distinct within each set so that no same-set pair of geos
/// shares a Z value after reduction (equal-Z pairs would form spurious
/// zero-score supergeos). Requires a bound large enough for m distinct
/// positive parts per column.
pub fn plant_n3dm(m: usize, bound: u64, seed: u64) -> Result<N3dmInstance> {
    if m == 0 {
        return Err(SupergeoError::InvalidConfig(
            "need at least one triple".to_string(),
        ));
    }
    if bound < 3 || bound < 3 * m as u64 {
        return Err(SupergeoError::InfeasibleBound(bound));
    }
    let mut w = Vec::with_capacity(m);
    let mut x = Vec::with_capacity(m);
    let mut y = Vec::with_capacity(m);
    let mut counter = 0u64;
    const MAX_ATTEMPTS: u64 = 100_000;
    for _ in 0..m {
        // rejection-sample a split of bound into three positive parts, each
        // distinct within its column
        let mut attempts = 0;
        loop {
            let sw = 1 + (rng::uniform(seed, counter) * (bound - 2) as f64) as u64;
            let rest = bound - sw;
            let sx = 1 + (rng::uniform(seed, counter + 1) * (rest - 1) as f64) as u64;
            counter += 2;
            let sy = bound - sw - sx;
            if sy >= 1 && !w.contains(&sw) && !x.contains(&sx) && !y.contains(&sy) {
                w.push(sw);
                x.push(sx);
                y.push(sy);
                break;
            }
            attempts += 1;
            if attempts > MAX_ATTEMPTS {
                return Err(SupergeoError::InfeasibleBound(bound));
            }
        }
    }
    // shuffle x and y columns; the witness follows the permutations
    let perm_x = seeded_permutation(m, rng::derive(seed, u64::MAX));
    let perm_y = seeded_permutation(m, rng::derive(seed, u64::MAX - 1));
    let mut shuffled_x = vec![0u64; m];
    let mut shuffled_y = vec![0u64; m];
    let mut planted = Vec::with_capacity(m);
    for t in 0..m {
        shuffled_x[perm_x[t]] = x[t];
        shuffled_y[perm_y[t]] = y[t];
        planted.push((t, perm_x[t], perm_y[t]));
    }
    Ok(N3dmInstance {
        w,
        x: shuffled_x,
        y: shuffled_y,
        bound,
        planted,
    })
}

/// Perturb a planted yes-instance into a (with overwhelming likelihood)
/// no-instance by bumping a single element of W, which breaks the total-sum
/// invariant m * bound = sum of all sizes that every yes-instance satisfies.
pub fn break_instance(inst: &N3dmInstance) -> N3dmInstance {
    let mut out = inst.clone();
    out.w[0] += 1;
    out.planted.clear();
    out
}

fn seeded_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    // Fisher-Yates with counter-based uniforms
    for i in (1..n).rev() {
        let j = (rng::uniform(seed, i as u64) * (i + 1) as f64) as usize;
        perm.swap(i, j.min(i));
    }
    perm
}
