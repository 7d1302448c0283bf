//! Scheduled, scoped anomaly transformations over a transaction table,
//! with downstream metrics recomputed to keep the accounting identities.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::seed;

#[derive(Debug, Error)]
pub enum InjectError {
    #[error("duplicate schedule entry for {0} / {1:?}")]
    DuplicateEntry(NaiveDate, String),
    #[error("bad date key {0:?} (expected YYYY-MM-DD)")]
    BadDateKey(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Anomaly families from the injection schedule. Unknown kind names are
/// rejected at JSON parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnomalyKind {
    ExcessiveDiscount,
    COGSOverstatement,
    FulfillmentSpike,
    ReturnSurge,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnomalySpec {
    pub date: NaiveDate,
    pub kind: AnomalyKind,
    pub severity: f64,
    /// Top-level merchandise category or sales channel.
    pub scope: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AnomalySchedule {
    specs: Vec<AnomalySpec>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleEntry {
    kind: AnomalyKind,
    severity: f64,
    scope: String,
}

impl AnomalySchedule {
    pub fn new(specs: Vec<AnomalySpec>) -> Result<Self, InjectError> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &specs {
            if !seen.insert((s.date, s.scope.clone())) {
                return Err(InjectError::DuplicateEntry(s.date, s.scope.clone()));
            }
        }
        Ok(AnomalySchedule { specs })
    }

    pub fn specs(&self) -> &[AnomalySpec] {
        &self.specs
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Schedule JSON keyed by date:
    /// `{"2023-01-10": {"kind":"ExcessiveDiscount","severity":0.6,"scope":"Apparel"}}`.
    pub fn to_json(&self) -> String {
        let map: BTreeMap<String, ScheduleEntry> = self
            .specs
            .iter()
            .map(|s| {
                (
                    s.date.to_string(),
                    ScheduleEntry {
                        kind: s.kind,
                        severity: s.severity,
                        scope: s.scope.clone(),
                    },
                )
            })
            .collect();
        serde_json::to_string_pretty(&map).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, InjectError> {
        let map: BTreeMap<String, ScheduleEntry> = serde_json::from_str(text)?;
        let mut specs = Vec::new();
        for (k, e) in map {
            let date = NaiveDate::parse_from_str(&k, "%Y-%m-%d")
                .map_err(|_| InjectError::BadDateKey(k.clone()))?;
            specs.push(AnomalySpec {
                date,
                kind: e.kind,
                severity: e.severity,
                scope: e.scope,
            });
        }
        Self::new(specs)
    }
}

/// The four-anomaly 2023 schedule used by the bundled experiment.
pub fn default_retail_schedule() -> AnomalySchedule {
    let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
    AnomalySchedule::new(vec![
        AnomalySpec {
            date: d("2023-01-10"),
            kind: AnomalyKind::ExcessiveDiscount,
            severity: 0.6,
            scope: "Apparel".into(),
        },
        AnomalySpec {
            date: d("2023-06-10"),
            kind: AnomalyKind::COGSOverstatement,
            severity: -0.8,
            scope: "Footwear".into(),
        },
        AnomalySpec {
            date: d("2023-09-10"),
            kind: AnomalyKind::FulfillmentSpike,
            severity: -2.0,
            scope: "Beauty".into(),
        },
        AnomalySpec {
            date: d("2023-12-10"),
            kind: AnomalyKind::ReturnSurge,
            severity: 10.0,
            scope: "Accessories".into(),
        },
    ])
    .unwrap()
}

#[derive(Debug, Clone)]
pub struct InjectOutcome {
    pub data: Dataset,
    /// Modified row count per schedule date.
    pub modified: BTreeMap<NaiveDate, usize>,
    /// Specs whose (date, scope) matched no rows; reported, not fatal.
    pub unmatched: Vec<AnomalySpec>,
    /// Rows whose recomputed NET_SALES was non-positive; their margin
    /// uses a guarded denominator.
    pub guarded_rows: Vec<usize>,
}

struct RowMetrics {
    unit_cost: f64,
    discount: f64,
    fulfillment: f64,
    return_cost: f64,
}

/// Applies one anomaly transformation to a row's source metrics.
/// `jitter` is in [-0.05, 0.05] under [`inject`]; zero means the pure
/// severity formula.
fn apply_kind(kind: AnomalyKind, severity: f64, jitter: f64, sales: f64, m: &mut RowMetrics) {
    match kind {
        AnomalyKind::ExcessiveDiscount => {
            m.discount = sales * (severity + jitter).min(0.95);
        }
        AnomalyKind::COGSOverstatement => {
            m.unit_cost *= 1.0 + severity.abs() * (1.0 + jitter);
        }
        AnomalyKind::FulfillmentSpike => {
            let f = 1.0 + severity.abs();
            m.fulfillment *= f * f * (1.0 + jitter);
        }
        AnomalyKind::ReturnSurge => {
            m.return_cost *= severity * (1.0 + jitter);
        }
    }
}

fn scope_matches(hierarchy: &str, channel: &str, scope: &str) -> bool {
    let top = hierarchy.split('.').next().unwrap_or("");
    top == scope || channel == scope
}

/// Applies every scheduled anomaly to the matching (date, scope) rows and
/// recomputes the downstream metrics. Rows outside any match are left
/// bit-identical.
pub fn inject(
    data: &Dataset,
    schedule: &AnomalySchedule,
    master_seed: u64,
) -> Result<InjectOutcome, InjectError> {
    let dates = data
        .dates()
        .ok_or_else(|| DatasetError::MissingColumn("ORDERDATE".into()))?
        .to_vec();
    let hierarchy = data.text_column("MERCHANDISE_HIERARCHY")?.to_vec();
    let channel = data.text_column("SALES_CHANNEL")?.to_vec();

    let mut qty = data.column("QUANTITYORDERED")?.to_vec();
    let mut sales = data.column("SALES")?.to_vec();
    let mut unit_cost = data.column("UNIT_COST")?.to_vec();
    let mut discount = data.column("DISCOUNT")?.to_vec();
    let mut net = data.column("NET_SALES")?.to_vec();
    let mut ship = data.column("SHIPPING_REVENUE")?.to_vec();
    let mut cogs = data.column("COST_OF_GOODS_SOLD")?.to_vec();
    let mut ful = data.column("FULFILLMENT_COST")?.to_vec();
    let mut mkt = data.column("MARKETING_COST")?.to_vec();
    let mut ret = data.column("RETURN_COST")?.to_vec();
    let mut profit = data.column("PROFIT")?.to_vec();
    let mut margin = data.column("PROFIT_MARGIN")?.to_vec();

    let mut modified: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    let mut unmatched = Vec::new();
    let mut guarded = Vec::new();

    for spec in schedule.specs() {
        let mut touched = 0usize;
        for row in 0..data.n_rows() {
            if dates[row] != spec.date || !scope_matches(&hierarchy[row], &channel[row], &spec.scope)
            {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(master_seed, row as u64));
            let jitter = rng.random_range(-0.05..0.05);
            let mut m = RowMetrics {
                unit_cost: unit_cost[row],
                discount: discount[row],
                fulfillment: ful[row],
                return_cost: ret[row],
            };
            apply_kind(spec.kind, spec.severity, jitter, sales[row], &mut m);

            unit_cost[row] = m.unit_cost;
            discount[row] = m.discount;
            ful[row] = m.fulfillment;
            ret[row] = m.return_cost;

            // Identity chain, same expression order as the generator.
            net[row] = sales[row] - discount[row];
            cogs[row] = unit_cost[row] * qty[row];
            profit[row] =
                net[row] + ship[row] - cogs[row] - ful[row] - mkt[row] - ret[row];
            if net[row] <= 0.0 {
                guarded.push(row);
                margin[row] = profit[row] / net[row].max(1.0);
            } else {
                margin[row] = profit[row] / net[row];
            }
            touched += 1;
        }
        if touched == 0 {
            unmatched.push(spec.clone());
        } else {
            *modified.entry(spec.date).or_default() += touched;
        }
    }

    let mut out = data.clone();
    out.insert_numeric("QUANTITYORDERED", std::mem::take(&mut qty))?;
    out.insert_numeric("SALES", std::mem::take(&mut sales))?;
    out.insert_numeric("UNIT_COST", std::mem::take(&mut unit_cost))?;
    out.insert_numeric("DISCOUNT", std::mem::take(&mut discount))?;
    out.insert_numeric("NET_SALES", std::mem::take(&mut net))?;
    out.insert_numeric("SHIPPING_REVENUE", std::mem::take(&mut ship))?;
    out.insert_numeric("COST_OF_GOODS_SOLD", std::mem::take(&mut cogs))?;
    out.insert_numeric("FULFILLMENT_COST", std::mem::take(&mut ful))?;
    out.insert_numeric("MARKETING_COST", std::mem::take(&mut mkt))?;
    out.insert_numeric("RETURN_COST", std::mem::take(&mut ret))?;
    out.insert_numeric("PROFIT", std::mem::take(&mut profit))?;
    out.insert_numeric("PROFIT_MARGIN", std::mem::take(&mut margin))?;

    Ok(InjectOutcome {
        data: out,
        modified,
        unmatched,
        guarded_rows: guarded,
    })
}
