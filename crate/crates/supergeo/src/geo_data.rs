//! Geo panel ingestion and aggregation.
//!
//! A panel holds per-geo spend/response time series split into a pretest
//! window (used for matching) and a test window (used for estimation).
//! The pretest response total serves as the proxy for each geo's
//! uninfluenced response.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SupergeoError};

/// Label of a single experimental unit (e.g. a DMA name).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GeoId(pub String);

impl GeoId {
    pub fn new(id: impl Into<String>) -> Self {
        GeoId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GeoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for GeoId {
    fn from(s: &str) -> Self {
        GeoId(s.to_string())
    }
}

/// Min/max used when a variable was rescaled to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleInfo {
    pub min: f64,
    pub max: f64,
}

/// Per-geo spend/response time series with a pretest/test split.
///
/// Geos are sorted lexicographically at construction so downstream
/// tie-breaking is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoPanel {
    pub geos: Vec<GeoId>,
    pub periods: usize,
    pub pretest_len: usize,
    /// Row-major N x T, same geo order as `geos`.
    pub spend: Vec<Vec<f64>>,
    pub response: Vec<Vec<f64>>,
    /// Present only when the panel was min-max scaled at load.
    pub spend_scale: Option<ScaleInfo>,
    pub response_scale: Option<ScaleInfo>,
}

impl GeoPanel {
    /// Build a panel from already-assembled rows. Geos are sorted by id;
    /// rows are permuted accordingly.
    pub fn new(
        geos: Vec<GeoId>,
        pretest_len: usize,
        spend: Vec<Vec<f64>>,
        response: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let periods = response.first().map(|r| r.len()).unwrap_or(0);
        if pretest_len == 0 || pretest_len >= periods {
            return Err(SupergeoError::BadPretestLen {
                pretest_len,
                periods,
            });
        }
        let mut order: Vec<usize> = (0..geos.len()).collect();
        order.sort_by(|&a, &b| geos[a].cmp(&geos[b]));
        let panel = GeoPanel {
            geos: order.iter().map(|&i| geos[i].clone()).collect(),
            periods,
            pretest_len,
            spend: order.iter().map(|&i| spend[i].clone()).collect(),
            response: order.iter().map(|&i| response[i].clone()).collect(),
            spend_scale: None,
            response_scale: None,
        };
        panel.validate()?;
        Ok(panel)
    }

    fn validate(&self) -> Result<()> {
        for (g, (s, r)) in self.spend.iter().zip(&self.response).enumerate() {
            if s.len() != self.periods || r.len() != self.periods {
                let period = s.len().min(r.len());
                return Err(SupergeoError::MissingValue {
                    geo: self.geos[g].to_string(),
                    period,
                });
            }
            for t in 0..self.periods {
                for v in [s[t], r[t]] {
                    if !v.is_finite() {
                        return Err(SupergeoError::MissingValue {
                            geo: self.geos[g].to_string(),
                            period: t,
                        });
                    }
                    if v < 0.0 {
                        return Err(SupergeoError::NegativeValue {
                            geo: self.geos[g].to_string(),
                            period: t,
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Min-max scale spend and response to [0, 1], one scale per variable
    /// across all geo-periods. Stores the scales for later un-scaling.
    pub fn scale(&mut self) {
        self.spend_scale = Some(scale_matrix(&mut self.spend));
        self.response_scale = Some(scale_matrix(&mut self.response));
    }

    pub fn n_geos(&self) -> usize {
        self.geos.len()
    }

    /// Write the panel in the standard CSV format (`geo,period,response,spend`).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["geo", "period", "response", "spend"])?;
        for (g, geo) in self.geos.iter().enumerate() {
            for t in 0..self.periods {
                wtr.write_record([
                    geo.as_str(),
                    &t.to_string(),
                    &format_num(self.response[g][t]),
                    &format_num(self.spend[g][t]),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Uses the shortest round-trippable decimal form so re-loading reproduces
/// the exact f64 values.
fn format_num(v: f64) -> String {
    let mut buf = v.to_string();
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("NaN") {
        buf.push_str(".0");
    }
    buf
}

fn scale_matrix(m: &mut [Vec<f64>]) -> ScaleInfo {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for row in m.iter() {
        for &v in row {
            min = min.min(v);
            max = max.max(v);
        }
    }
    let span = max - min;
    for row in m.iter_mut() {
        for v in row.iter_mut() {
            *v = if span > 0.0 { (*v - min) / span } else { 0.0 };
        }
    }
    ScaleInfo { min, max }
}

/// Window sums per geo; `pretest_response` doubles as the Z proxy for matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoAggregates {
    pub geo: GeoId,
    pub pretest_response: f64,
    pub test_response: f64,
    pub pretest_spend: f64,
    pub test_spend: f64,
    /// Initial spend used for budgeting; the test-window spend total.
    pub initial_spend: f64,
}

/// Load a panel from a CSV file with header `geo,period,response,spend`.
pub fn load_panel(path: impl AsRef<Path>, pretest_len: usize, scaling: bool) -> Result<GeoPanel> {
    let file = std::fs::File::open(path)?;
    load_panel_from_reader(file, pretest_len, scaling)
}

pub fn load_panel_from_reader<R: std::io::Read>(
    reader: R,
    pretest_len: usize,
    scaling: bool,
) -> Result<GeoPanel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = rdr.headers()?;
        let expected = ["geo", "period", "response", "spend"];
        let got: Vec<&str> = headers.iter().map(str::trim).collect();
        if got != expected {
            return Err(SupergeoError::BadHeader(got.join(",")));
        }
    }

    // geo -> period -> (response, spend)
    let mut cells: BTreeMap<String, BTreeMap<usize, (f64, f64)>> = BTreeMap::new();
    let mut max_period = 0usize;
    for record in rdr.records() {
        let record = record?;
        let geo = record.get(0).unwrap_or("").trim().to_string();
        let parse = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| SupergeoError::BadHeader(record.iter().collect::<Vec<_>>().join(",")))
        };
        let period: usize = record
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| SupergeoError::BadHeader(record.iter().collect::<Vec<_>>().join(",")))?;
        let response = parse(2)?;
        let spend = parse(3)?;
        max_period = max_period.max(period);
        let row = cells.entry(geo.clone()).or_default();
        if row.insert(period, (response, spend)).is_some() {
            return Err(SupergeoError::DuplicateGeoPeriod { geo, period });
        }
    }

    let periods = max_period + 1;
    let mut geos = Vec::new();
    let mut spend = Vec::new();
    let mut response = Vec::new();
    for (geo, row) in &cells {
        let mut s = Vec::with_capacity(periods);
        let mut r = Vec::with_capacity(periods);
        for t in 0..periods {
            match row.get(&t) {
                Some(&(resp, sp)) => {
                    r.push(resp);
                    s.push(sp);
                }
                None => {
                    return Err(SupergeoError::MissingValue {
                        geo: geo.clone(),
                        period: t,
                    })
                }
            }
        }
        geos.push(GeoId::new(geo.clone()));
        spend.push(s);
        response.push(r);
    }

    let mut panel = GeoPanel::new(geos, pretest_len, spend, response)?;
    if scaling {
        panel.scale();
    }
    Ok(panel)
}

/// Window sums per geo, in panel order.
pub fn aggregates(panel: &GeoPanel) -> Vec<GeoAggregates> {
    let t0 = panel.pretest_len;
    panel
        .geos
        .iter()
        .enumerate()
        .map(|(g, geo)| {
            let pre_r: f64 = panel.response[g][..t0].iter().sum();
            let test_r: f64 = panel.response[g][t0..].iter().sum();
            let pre_s: f64 = panel.spend[g][..t0].iter().sum();
            let test_s: f64 = panel.spend[g][t0..].iter().sum();
            GeoAggregates {
                geo: geo.clone(),
                pretest_response: pre_r,
                test_response: test_r,
                pretest_spend: pre_s,
                test_spend: test_s,
                initial_spend: test_s,
            }
        })
        .collect()
}

/// Z proxies (pretest responses) keyed by geo id, in panel order.
pub fn z_values(aggs: &[GeoAggregates]) -> Vec<(GeoId, f64)> {
    aggs.iter()
        .map(|a| (a.geo.clone(), a.pretest_response))
        .collect()
}
