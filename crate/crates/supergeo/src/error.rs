//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SupergeoError {
    #[error("missing value: geo {geo} has no entry for period {period}")]
    MissingValue { geo: String, period: usize },
    #[error("negative value for geo {geo} at period {period}: {value}")]
    NegativeValue {
        geo: String,
        period: usize,
        value: f64,
    },
    #[error("duplicate (geo, period) entry: ({geo}, {period})")]
    DuplicateGeoPeriod { geo: String, period: usize },
    #[error("bad header: expected `geo,period,response,spend`, got `{0}`")]
    BadHeader(String),
    #[error("pretest length {pretest_len} must be in 1..{periods}")]
    BadPretestLen { pretest_len: usize, periods: usize },

    #[error("subset of size {0} is too large for split enumeration (max 16)")]
    SubsetTooLarge(usize),
    #[error("subset of size {0} is too small to split (min 2)")]
    SubsetTooSmall(usize),
    #[error("unknown geo `{0}`")]
    UnknownGeo(String),

    #[error("candidate pool of size {size} exceeds the cap {cap}")]
    PoolTooLarge { size: u64, cap: u64 },
    #[error("partition {index} has {size} geos, fewer than the minimum subset size {min_size}")]
    PartitionTooSmall {
        index: usize,
        size: usize,
        min_size: usize,
    },
    #[error("no exact cover exists for the given pool and constraints")]
    Infeasible,
    #[error("search hit the time limit before finding any feasible design")]
    TimeoutNoIncumbent,
    #[error("matched pairs baseline requires an even geo count, got {0}")]
    OddCount(usize),
    #[error("brute force partition supports at most {max} geos, got {0}", max = 12)]
    TooLarge(usize),
    #[error("all searches failed: {0}")]
    AllFailed(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("treated geos have zero total initial spend")]
    ZeroTreatedSpend,
    #[error("spend difference between treatment and control is numerically zero")]
    ZeroDenominator,
    #[error("trimmed match requires at least 3 pairs, got {0}")]
    TooFewPairs(usize),

    #[error("mean of Z values is zero; proportional effects undefined")]
    ZeroMeanZ,
    #[error("estimand weights sum to zero")]
    ZeroWeights,

    #[error("no grid point was accepted by the permutation test")]
    EmptyAcceptanceRegion,

    #[error("n3dm bound must be at least 3, got {0}")]
    InfeasibleBound(u64),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SupergeoError>;
