//! Daily aggregation and IQR-based flagging of anomalous dates.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};

/// Columns summed by the daily aggregation.
const SUMMED: &[&str] = &[
    "QUANTITYORDERED",
    "SALES",
    "DISCOUNT",
    "NET_SALES",
    "SHIPPING_REVENUE",
    "COST_OF_GOODS_SOLD",
    "FULFILLMENT_COST",
    "MARKETING_COST",
    "RETURN_COST",
    "PROFIT",
];

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("series has {0} points, need at least 8")]
    SeriesTooShort(usize),
    #[error("multiplier must be positive, got {0}")]
    NonPositiveMultiplier(f64),
    #[error("series dates are not strictly increasing")]
    UnorderedDates,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// One value per calendar day, dates strictly increasing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DailySeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl DailySeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self, DetectError> {
        if dates.len() != values.len() || dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DetectError::UnorderedDates);
        }
        Ok(DailySeries { dates, values })
    }

    /// Extracts a named column of a daily-aggregated dataset.
    pub fn from_dataset(agg: &Dataset, column: &str) -> Result<Self, DetectError> {
        let dates = agg
            .dates()
            .ok_or_else(|| DatasetError::MissingColumn("ORDERDATE".into()))?;
        Self::new(dates.to_vec(), agg.column(column)?.to_vec())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionResult {
    pub flagged: Vec<NaiveDate>,
    /// Value at each flagged date, aligned with `flagged`.
    pub flagged_values: Vec<f64>,
    pub lower_fence: f64,
    pub upper_fence: f64,
}

impl DetectionResult {
    /// `{"dates": [...], "fences": {"low": x, "high": y}}`.
    pub fn to_json(&self) -> String {
        let value = serde_json::json!({
            "dates": self.flagged.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            "fences": {"low": self.lower_fence, "high": self.upper_fence},
        });
        serde_json::to_string_pretty(&value).expect("detection serializes")
    }
}

/// Collapses transactions to one row per date: monetary columns and
/// quantity summed, unit price and unit cost quantity-weighted, and
/// PROFIT_MARGIN recomputed as total PROFIT over total NET_SALES.
pub fn aggregate_daily(data: &Dataset) -> Result<Dataset, DetectError> {
    if data.is_empty() {
        return Err(DetectError::EmptyDataset);
    }
    let dates = data
        .dates()
        .ok_or_else(|| DatasetError::MissingColumn("ORDERDATE".into()))?;

    let mut day_rows: BTreeMap<NaiveDate, Vec<usize>> = BTreeMap::new();
    for (i, d) in dates.iter().enumerate() {
        day_rows.entry(*d).or_default().push(i);
    }

    let mut out = Dataset::new();
    out.set_dates(day_rows.keys().copied().collect()).unwrap();

    for &col in SUMMED {
        let src = data.column(col)?;
        let sums: Vec<f64> = day_rows
            .values()
            .map(|rows| rows.iter().map(|&i| src[i]).sum())
            .collect();
        out.insert_numeric(col, sums).unwrap();
    }

    let qty = data.column("QUANTITYORDERED")?;
    for col in ["PRICEEACH", "UNIT_COST"] {
        let src = data.column(col)?;
        let means: Vec<f64> = day_rows
            .values()
            .map(|rows| {
                let wsum: f64 = rows.iter().map(|&i| src[i] * qty[i]).sum();
                let w: f64 = rows.iter().map(|&i| qty[i]).sum();
                wsum / w
            })
            .collect();
        out.insert_numeric(col, means).unwrap();
    }

    let profit = out.column("PROFIT")?.to_vec();
    let net = out.column("NET_SALES")?.to_vec();
    let pm: Vec<f64> = profit.iter().zip(&net).map(|(p, n)| p / n).collect();
    out.insert_numeric("PROFIT_MARGIN", pm).unwrap();
    Ok(out)
}

/// Linear-interpolation quantile (the (n-1)p convention) of a sorted
/// slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Flags dates outside `[Q1 - c*IQR, Q3 + c*IQR]` with whole-series
/// quartiles. A zero IQR flags every value different from Q1.
pub fn detect_iqr(series: &DailySeries, c: f64) -> Result<DetectionResult, DetectError> {
    if series.values.len() < 8 {
        return Err(DetectError::SeriesTooShort(series.values.len()));
    }
    if c <= 0.0 {
        return Err(DetectError::NonPositiveMultiplier(c));
    }
    let mut sorted = series.values.clone();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;

    let (lower, upper) = (q1 - c * iqr, q3 + c * iqr);
    let mut flagged = Vec::new();
    let mut flagged_values = Vec::new();
    for (d, v) in series.dates.iter().zip(&series.values) {
        let out = if iqr == 0.0 {
            *v != q1
        } else {
            *v < lower || *v > upper
        };
        if out {
            flagged.push(*d);
            flagged_values.push(*v);
        }
    }
    Ok(DetectionResult {
        flagged,
        flagged_values,
        lower_fence: lower,
        upper_fence: upper,
    })
}

/// Deterministic SVG line chart of a daily series with flagged dates as
/// distinct markers.
pub fn plot_series(series: &DailySeries, flagged: &BTreeSet<NaiveDate>) -> String {
    let (w, h) = (880.0, 320.0);
    let (ml, mr, mt, mb) = (64.0, 16.0, 16.0, 40.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);

    let n = series.values.len();
    let (mut lo, mut hi) = series
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    if n == 0 {
        lo = 0.0;
        hi = 1.0;
    }
    if lo == hi {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);

    let x = |i: usize| ml + pw * if n <= 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
    let y = |v: f64| mt + ph * (1.0 - (v - lo) / (hi - lo));

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{ml}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr,
        h - mb
    ));
    svg.push_str(&format!(
        "  <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        h - mb
    ));
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let yy = y(v);
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{yy:.2}\" font-size=\"11\" text-anchor=\"end\">{v:.4}</text>\n",
            ml - 6.0
        ));
    }
    if let (Some(first), Some(last)) = (series.dates.first(), series.dates.last()) {
        svg.push_str(&format!(
            "  <text x=\"{ml}\" y=\"{:.2}\" font-size=\"11\">{first}</text>\n",
            h - mb + 16.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{last}</text>\n",
            w - mr,
            h - mb + 16.0
        ));
    }
    if n > 0 {
        let points: Vec<String> = series
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{:.2},{:.2}", x(i), y(*v)))
            .collect();
        svg.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n",
            points.join(" ")
        ));
    }
    for (i, d) in series.dates.iter().enumerate() {
        if flagged.contains(d) {
            svg.push_str(&format!(
                "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#d62728\"/>\n",
                x(i),
                y(series.values[i])
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
