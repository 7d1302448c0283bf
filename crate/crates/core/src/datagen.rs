//! Seeded synthetic retail transaction generator with non-linear,
//! interdependent financial metrics over the canonical retail DAG.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::graph::Dag;
use crate::seed;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("start date {0} is after end date {1}")]
    InvalidDateRange(NaiveDate, NaiveDate),
    #[error("rate parameters must be positive")]
    NonPositiveRate,
}

/// The causal skeleton among the transaction metrics. The edge set is
/// fixed here; it is the data contract shared by the generator, the
/// injector and the analysis pipeline.
pub fn canonical_dag() -> Dag {
    Dag::from_edges(&[
        ("PRICEEACH", "SALES"),
        ("QUANTITYORDERED", "SALES"),
        ("SALES", "DISCOUNT"),
        ("SALES", "NET_SALES"),
        ("DISCOUNT", "NET_SALES"),
        ("UNIT_COST", "COST_OF_GOODS_SOLD"),
        ("QUANTITYORDERED", "COST_OF_GOODS_SOLD"),
        ("NET_SALES", "PROFIT"),
        ("SHIPPING_REVENUE", "PROFIT"),
        ("COST_OF_GOODS_SOLD", "PROFIT"),
        ("FULFILLMENT_COST", "PROFIT"),
        ("MARKETING_COST", "PROFIT"),
        ("RETURN_COST", "PROFIT"),
        ("PROFIT", "PROFIT_MARGIN"),
        ("NET_SALES", "PROFIT_MARGIN"),
    ])
    .expect("canonical retail DAG is valid")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryParams {
    pub name: String,
    pub weight: f64,
    pub price_mult: f64,
    pub cost_mult: f64,
    pub return_mult: f64,
    pub hierarchies: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelParams {
    pub name: String,
    pub weight: f64,
    pub ship_flat: f64,
    pub ship_rate: f64,
    pub fulfill_mult: f64,
    pub marketing_mult: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TerritoryParams {
    pub name: String,
    pub weight: f64,
    pub fulfill_mult: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TierParams {
    pub name: String,
    pub weight: f64,
    pub discount_mult: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub seed: u64,
    pub transactions_per_day_base: u32,
    pub weekend_multiplier: f64,
    /// Lognormal parameters of the base unit price.
    pub price_log_mean: f64,
    pub price_log_sigma: f64,
    /// Quantity is `1 + Poisson(quantity_rate)`.
    pub quantity_rate: f64,
    /// Weekend basket-size scale. Weekends carry the demand seasonality
    /// in order count; baskets shrink by this factor so the daily value
    /// flow stays day-type stationary.
    pub weekend_quantity_scale: f64,
    /// Unit cost ratio drawn uniformly from this range, times the
    /// category cost multiplier.
    pub cost_ratio_low: f64,
    pub cost_ratio_high: f64,
    /// Day-level multiplicative drift of the cost ratio (supplier price
    /// mood), uniform in `1 +- jitter`, shared by all rows of a day.
    pub cost_ratio_daily_jitter: f64,
    /// Day-level operational moods for the remaining rate families,
    /// uniform in `1 +- jitter` and shared within a day.
    pub fulfillment_daily_jitter: f64,
    pub marketing_daily_jitter: f64,
    pub return_daily_jitter: f64,
    pub shipping_daily_jitter: f64,
    pub discount_daily_jitter: f64,
    /// Discount rate cap before anomaly injection.
    pub max_discount_rate: f64,
    pub fulfillment_base: f64,
    pub fulfillment_rate: f64,
    pub fulfillment_power: f64,
    pub marketing_rate: f64,
    pub return_rate: f64,
    pub categories: Vec<CategoryParams>,
    pub channels: Vec<ChannelParams>,
    pub territories: Vec<TerritoryParams>,
    pub loyalty_tiers: Vec<TierParams>,
    pub promo_codes: Vec<TierParams>,
}

impl GenConfig {
    pub fn new(start_date: NaiveDate, end_date: NaiveDate, seed: u64) -> Self {
        GenConfig {
            start_date,
            end_date,
            seed,
            ..GenConfig::default()
        }
    }
}

impl Default for GenConfig {
    fn default() -> Self {
        let cat = |name: &str, weight, price_mult, cost_mult, return_mult, hs: &[&str]| {
            CategoryParams {
                name: name.into(),
                weight,
                price_mult,
                cost_mult,
                return_mult,
                hierarchies: hs.iter().map(|s| s.to_string()).collect(),
            }
        };
        GenConfig {
            start_date: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
            end_date: NaiveDate::from_ymd_opt(2023, 12, 30).unwrap(),
            seed: 42,
            transactions_per_day_base: 200,
            weekend_multiplier: 1.35,
            price_log_mean: 3.4,
            price_log_sigma: 0.5,
            quantity_rate: 2.0,
            weekend_quantity_scale: 1.0 / 1.35,
            cost_ratio_low: 0.44,
            cost_ratio_high: 0.68,
            cost_ratio_daily_jitter: 0.05,
            fulfillment_daily_jitter: 0.10,
            marketing_daily_jitter: 0.12,
            return_daily_jitter: 0.12,
            shipping_daily_jitter: 0.10,
            discount_daily_jitter: 0.10,
            max_discount_rate: 0.30,
            fulfillment_base: 2.5,
            fulfillment_rate: 0.055,
            fulfillment_power: 0.97,
            marketing_rate: 0.042,
            return_rate: 0.10,
            categories: vec![
                cat(
                    "Apparel",
                    0.30,
                    1.0,
                    1.0,
                    1.05,
                    &[
                        "Apparel.Men.Shirts.Casual",
                        "Apparel.Women.Dresses.Evening",
                        "Apparel.Kids.Outerwear.Jackets",
                    ],
                ),
                cat(
                    "Footwear",
                    0.30,
                    1.15,
                    1.05,
                    1.15,
                    &[
                        "Footwear.Women.Boots.Winter",
                        "Footwear.Men.Sneakers.Running",
                        "Footwear.Unisex.Sandals.Beach",
                    ],
                ),
                cat(
                    "Beauty",
                    0.22,
                    0.9,
                    0.92,
                    0.6,
                    &[
                        "Beauty.Skincare.Moisturizer.Premium",
                        "Beauty.Makeup.Lipstick.Classic",
                        "Beauty.Fragrance.Perfume.Floral",
                    ],
                ),
                cat(
                    "Accessories",
                    0.18,
                    0.95,
                    0.97,
                    1.0,
                    &[
                        "Accessories.Bags.Handbags.Leather",
                        "Accessories.Jewelry.Necklaces.Silver",
                        "Accessories.Watches.Analog.Steel",
                    ],
                ),
            ],
            channels: vec![
                ChannelParams {
                    name: "Online".into(),
                    weight: 0.50,
                    ship_flat: 4.5,
                    ship_rate: 0.015,
                    fulfill_mult: 1.15,
                    marketing_mult: 1.2,
                },
                ChannelParams {
                    name: "Retail".into(),
                    weight: 0.35,
                    ship_flat: 0.0,
                    ship_rate: 0.0,
                    fulfill_mult: 0.9,
                    marketing_mult: 0.9,
                },
                ChannelParams {
                    name: "Wholesale".into(),
                    weight: 0.15,
                    ship_flat: 12.0,
                    ship_rate: 0.010,
                    fulfill_mult: 1.0,
                    marketing_mult: 0.6,
                },
            ],
            territories: vec![
                TerritoryParams {
                    name: "NA".into(),
                    weight: 0.45,
                    fulfill_mult: 1.0,
                },
                TerritoryParams {
                    name: "EMEA".into(),
                    weight: 0.35,
                    fulfill_mult: 1.12,
                },
                TerritoryParams {
                    name: "APAC".into(),
                    weight: 0.20,
                    fulfill_mult: 1.25,
                },
            ],
            loyalty_tiers: vec![
                TierParams {
                    name: "Bronze".into(),
                    weight: 0.40,
                    discount_mult: 0.85,
                },
                TierParams {
                    name: "Silver".into(),
                    weight: 0.30,
                    discount_mult: 1.0,
                },
                TierParams {
                    name: "Gold".into(),
                    weight: 0.20,
                    discount_mult: 1.15,
                },
                TierParams {
                    name: "Platinum".into(),
                    weight: 0.10,
                    discount_mult: 1.3,
                },
            ],
            promo_codes: vec![
                TierParams {
                    name: "NONE".into(),
                    weight: 0.55,
                    discount_mult: 0.6,
                },
                TierParams {
                    name: "PROMO10".into(),
                    weight: 0.25,
                    discount_mult: 1.2,
                },
                TierParams {
                    name: "PROMO20".into(),
                    weight: 0.20,
                    discount_mult: 1.7,
                },
            ],
        }
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn pick<'a, T>(rng: &mut impl Rng, items: &'a [T], weight: impl Fn(&T) -> f64) -> &'a T {
    let total: f64 = items.iter().map(&weight).sum();
    let mut u = rng.random_range(0.0..total);
    for item in items {
        u -= weight(item);
        if u <= 0.0 {
            return item;
        }
    }
    items.last().unwrap()
}

/// Generates the transaction table. One day at a time, each day on its
/// own deterministic substream of the master seed.
pub fn generate(cfg: &GenConfig) -> Result<Dataset, GenError> {
    if cfg.start_date > cfg.end_date {
        return Err(GenError::InvalidDateRange(cfg.start_date, cfg.end_date));
    }
    if cfg.quantity_rate <= 0.0
        || cfg.transactions_per_day_base == 0
        || cfg.price_log_sigma <= 0.0
        || cfg.weekend_multiplier <= 0.0
    {
        return Err(GenError::NonPositiveRate);
    }

    let price_dist = LogNormal::new(cfg.price_log_mean, cfg.price_log_sigma).unwrap();
    let qty_dist = Poisson::new(cfg.quantity_rate).unwrap();
    let weekend_qty = ((1.0 + cfg.quantity_rate) * cfg.weekend_quantity_scale - 1.0).max(0.05);
    let weekend_qty_dist = Poisson::new(weekend_qty).unwrap();

    let mut dates = Vec::new();
    let mut hierarchy = Vec::new();
    let mut channel_col = Vec::new();
    let mut territory_col = Vec::new();
    let mut loyalty_col = Vec::new();
    let mut promo_col = Vec::new();
    let mut price = Vec::new();
    let mut qty = Vec::new();
    let mut unit_cost = Vec::new();
    let mut sales = Vec::new();
    let mut discount = Vec::new();
    let mut net_sales = Vec::new();
    let mut shipping = Vec::new();
    let mut cogs = Vec::new();
    let mut fulfillment = Vec::new();
    let mut marketing = Vec::new();
    let mut return_cost = Vec::new();
    let mut profit = Vec::new();
    let mut margin = Vec::new();

    let mut date = cfg.start_date;
    while date <= cfg.end_date {
        let day_stream = date.num_days_from_ce() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, day_stream));
        let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
        let rate = cfg.transactions_per_day_base as f64
            * if weekend { cfg.weekend_multiplier } else { 1.0 };
        let count = Poisson::new(rate).unwrap().sample(&mut rng) as usize;
        let mood = |rng: &mut ChaCha8Rng, j: f64| rng.random_range(1.0 - j..1.0 + j);
        let cost_mood = mood(&mut rng, cfg.cost_ratio_daily_jitter);
        let ful_mood = mood(&mut rng, cfg.fulfillment_daily_jitter);
        let mkt_mood = mood(&mut rng, cfg.marketing_daily_jitter);
        let ret_mood = mood(&mut rng, cfg.return_daily_jitter);
        let ship_mood = mood(&mut rng, cfg.shipping_daily_jitter);
        let disc_mood = mood(&mut rng, cfg.discount_daily_jitter);

        for _ in 0..count {
            let cat = pick(&mut rng, &cfg.categories, |c| c.weight);
            let hier = &cat.hierarchies[rng.random_range(0..cat.hierarchies.len())];
            let chan = pick(&mut rng, &cfg.channels, |c| c.weight);
            let terr = pick(&mut rng, &cfg.territories, |t| t.weight);
            let tier = pick(&mut rng, &cfg.loyalty_tiers, |t| t.weight);
            let promo = pick(&mut rng, &cfg.promo_codes, |t| t.weight);

            let p = round2((price_dist.sample(&mut rng) * cat.price_mult).max(0.01));
            let q = if weekend {
                1.0 + weekend_qty_dist.sample(&mut rng).round()
            } else {
                1.0 + qty_dist.sample(&mut rng).round()
            };
            let s = p * q;

            let ratio = (rng.random_range(cfg.cost_ratio_low..cfg.cost_ratio_high)
                * cat.cost_mult
                * cost_mood)
                .min(0.85);
            let uc = round2((p * ratio).max(0.01));
            let cg = uc * q;

            let skew = rng.random_range(0.0..1.0) * rng.random_range(0.0..1.0);
            let d_rate = (cfg.max_discount_rate
                * skew
                * promo.discount_mult
                * tier.discount_mult
                * disc_mood)
                .min(cfg.max_discount_rate);
            let d = round2(s * d_rate).min(s);
            let net = s - d;

            let ship = round2(
                (chan.ship_flat + chan.ship_rate * s) * ship_mood * rng.random_range(0.9..1.1),
            );
            let ful = round2(
                (cfg.fulfillment_base + cfg.fulfillment_rate * s.powf(cfg.fulfillment_power))
                    * terr.fulfill_mult
                    * chan.fulfill_mult
                    * ful_mood
                    * rng.random_range(0.85..1.15),
            );
            let mkt = round2(
                cfg.marketing_rate * s * chan.marketing_mult * mkt_mood * rng.random_range(0.7..1.3),
            );
            let ret = round2(
                cfg.return_rate * s * cat.return_mult * ret_mood * rng.random_range(0.5..1.5),
            );

            let pr = net + ship - cg - ful - mkt - ret;
            let pm = pr / net;

            dates.push(date);
            hierarchy.push(hier.clone());
            channel_col.push(chan.name.clone());
            territory_col.push(terr.name.clone());
            loyalty_col.push(tier.name.clone());
            promo_col.push(promo.name.clone());
            price.push(p);
            qty.push(q);
            unit_cost.push(uc);
            sales.push(s);
            discount.push(d);
            net_sales.push(net);
            shipping.push(ship);
            cogs.push(cg);
            fulfillment.push(ful);
            marketing.push(mkt);
            return_cost.push(ret);
            profit.push(pr);
            margin.push(pm);
        }
        date = date.succ_opt().unwrap();
    }

    let mut out = Dataset::new();
    out.set_dates(dates).unwrap();
    out.insert_text("MERCHANDISE_HIERARCHY", hierarchy).unwrap();
    out.insert_text("SALES_CHANNEL", channel_col).unwrap();
    out.insert_text("TERRITORY", territory_col).unwrap();
    out.insert_text("LOYALTY_TIER", loyalty_col).unwrap();
    out.insert_text("PROMO_CODE", promo_col).unwrap();
    out.insert_numeric("PRICEEACH", price).unwrap();
    out.insert_numeric("QUANTITYORDERED", qty).unwrap();
    out.insert_numeric("UNIT_COST", unit_cost).unwrap();
    out.insert_numeric("SALES", sales).unwrap();
    out.insert_numeric("DISCOUNT", discount).unwrap();
    out.insert_numeric("NET_SALES", net_sales).unwrap();
    out.insert_numeric("SHIPPING_REVENUE", shipping).unwrap();
    out.insert_numeric("COST_OF_GOODS_SOLD", cogs).unwrap();
    out.insert_numeric("FULFILLMENT_COST", fulfillment).unwrap();
    out.insert_numeric("MARKETING_COST", marketing).unwrap();
    out.insert_numeric("RETURN_COST", return_cost).unwrap();
    out.insert_numeric("PROFIT", profit).unwrap();
    out.insert_numeric("PROFIT_MARGIN", margin).unwrap();
    Ok(out)
}

/// Asserts the accounting identities on every row; returns the first
/// violating row. The identities are checked with the same expression
/// order the generator and injector use, so they must hold bit-exactly.
pub fn check_identities(data: &Dataset) -> Result<(), usize> {
    let get = |n: &str| data.column(n).expect("transaction column");
    let (p, q, uc) = (get("PRICEEACH"), get("QUANTITYORDERED"), get("UNIT_COST"));
    let (s, d, net) = (get("SALES"), get("DISCOUNT"), get("NET_SALES"));
    let (ship, cg, ful) = (
        get("SHIPPING_REVENUE"),
        get("COST_OF_GOODS_SOLD"),
        get("FULFILLMENT_COST"),
    );
    let (mkt, ret, pr, pm) = (
        get("MARKETING_COST"),
        get("RETURN_COST"),
        get("PROFIT"),
        get("PROFIT_MARGIN"),
    );
    for i in 0..data.n_rows() {
        let ok = s[i] == p[i] * q[i]
            && net[i] == s[i] - d[i]
            && cg[i] == uc[i] * q[i]
            && pr[i] == net[i] + ship[i] - cg[i] - ful[i] - mkt[i] - ret[i]
            && (pm[i] == pr[i] / net[i] || (net[i] <= 0.0 && pm[i] == pr[i] / net[i].max(1.0)))
            && d[i] >= 0.0
            && d[i] <= s[i];
        if !ok {
            return Err(i);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{aggregate_daily, detect_iqr, DailySeries};

    fn day(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn canonical_dag_paths_exist() {
        let dag = canonical_dag();
        let anc = dag.ancestors("PROFIT_MARGIN").unwrap();
        assert!(anc.contains(&"DISCOUNT".to_string()));
        // PROFIT_MARGIN <- PROFIT <- COST_OF_GOODS_SOLD <- UNIT_COST
        assert!(dag.parents("PROFIT_MARGIN").unwrap().contains(&"PROFIT".to_string()));
        assert!(dag
            .parents("PROFIT")
            .unwrap()
            .contains(&"COST_OF_GOODS_SOLD".to_string()));
        assert!(dag
            .parents("COST_OF_GOODS_SOLD")
            .unwrap()
            .contains(&"UNIT_COST".to_string()));
    }

    #[test]
    fn one_day_generation_is_deterministic() {
        let cfg = GenConfig::new(day("2023-05-01"), day("2023-05-01"), 7);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.n_rows() > 100);
    }

    #[test]
    fn invalid_range_is_an_error() {
        let cfg = GenConfig::new(day("2023-02-01"), day("2023-01-01"), 1);
        assert!(matches!(generate(&cfg), Err(GenError::InvalidDateRange(_, _))));
    }

    #[test]
    fn identities_hold_on_every_row_of_a_year() {
        let cfg = GenConfig::new(day("2023-01-01"), day("2023-12-30"), 42);
        let data = generate(&cfg).unwrap();
        assert!(check_identities(&data).is_ok());
    }

    #[test]
    fn weekend_volume_exceeds_weekday_volume() {
        let cfg = GenConfig::new(day("2023-01-01"), day("2023-12-30"), 9);
        let data = generate(&cfg).unwrap();
        let dates = data.dates().unwrap();
        let mut counts: std::collections::BTreeMap<NaiveDate, usize> = Default::default();
        for d in dates {
            *counts.entry(*d).or_default() += 1;
        }
        let (mut we, mut wd, mut nwe, mut nwd) = (0.0, 0.0, 0, 0);
        for (d, c) in counts {
            if matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                we += c as f64;
                nwe += 1;
            } else {
                wd += c as f64;
                nwd += 1;
            }
        }
        assert!(we / nwe as f64 > wd / nwd as f64);
    }

    #[test]
    fn overlapping_ranges_share_per_day_streams() {
        let a = generate(&GenConfig::new(day("2023-03-01"), day("2023-03-10"), 5)).unwrap();
        let b = generate(&GenConfig::new(day("2023-03-06"), day("2023-03-15"), 5)).unwrap();
        let rows_a = a.rows_on_date(day("2023-03-07"));
        let rows_b = b.rows_on_date(day("2023-03-07"));
        assert_eq!(rows_a.len(), rows_b.len());
        let sa = a.column("SALES").unwrap();
        let sb = b.column("SALES").unwrap();
        for (ra, rb) in rows_a.iter().zip(&rows_b) {
            assert_eq!(sa[*ra], sb[*rb]);
        }
    }

    #[test]
    fn clean_year_has_no_iqr_outliers_for_most_seeds() {
        let mut clean = 0;
        for s in 0..20 {
            let cfg = GenConfig::new(day("2023-01-01"), day("2023-12-30"), 1000 + s);
            let data = generate(&cfg).unwrap();
            let agg = aggregate_daily(&data).unwrap();
            let series = DailySeries::from_dataset(&agg, "PROFIT_MARGIN").unwrap();
            let det = detect_iqr(&series, 3.0).unwrap();
            if det.flagged.is_empty() {
                clean += 1;
            }
        }
        assert!(clean >= 19, "only {clean}/20 seeds were outlier-free");
    }
}
