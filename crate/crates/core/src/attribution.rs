//! Shapley attribution of ancestor noise to a target's anomaly score.
//!
//! For each anomalous sample, the players are the target and its
//! ancestors. The game value of a coalition is the target's marginal
//! quantile anomaly score after forward propagation in which coalition
//! members keep their observed noise and everyone else gets bootstrap
//! noise, averaged over a fixed set of baseline draws (common random
//! numbers across coalitions).

use std::collections::{BTreeMap, HashMap};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::graph::GraphError;
use crate::scm::{FittedScm, ScmError};
use crate::scoring::{QuantileScorer, ScoringError};
use crate::seed;

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("empty row set")]
    EmptyRowSet,
    #[error("node {0:?} has an empty contribution vector")]
    EmptyVector(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionConfig {
    /// Bootstrap noise draws per coalition evaluation.
    pub baseline_draws: usize,
    /// Use exact subset enumeration up to this many players.
    pub exact_max_players: usize,
    /// Permutation draws for the sampled estimator above the crossover.
    pub permutation_samples: usize,
    /// Resample baseline noise jointly: one bootstrap row per draw,
    /// shared by all players, preserving the cross-node dependence of
    /// the training noise. With independent per-player draws the
    /// baseline propagation wanders outside the training distribution
    /// and the baseline game value inflates.
    pub joint_baseline: bool,
    pub seed: u64,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        AttributionConfig {
            baseline_draws: 50,
            exact_max_players: 10,
            permutation_samples: 200,
            joint_baseline: true,
            seed: 0,
        }
    }
}

/// Per-node noise contribution vectors over a set of anomaly rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContributionMatrix {
    pub target: String,
    pub rows: Vec<usize>,
    contributions: BTreeMap<String, Vec<f64>>,
    /// Game value with every player's observed noise, per row.
    pub h_full: Vec<f64>,
    /// Game value with every player's noise resampled, per row.
    pub h_empty: Vec<f64>,
}

impl ContributionMatrix {
    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.contributions.keys().map(|s| s.as_str())
    }

    pub fn contribution(&self, node: &str) -> Result<&[f64], AttributionError> {
        self.contributions
            .get(node)
            .map(|v| v.as_slice())
            .ok_or_else(|| AttributionError::UnknownNode(node.to_string()))
    }

    /// `max_i |C(v)_i|`.
    pub fn max_abs_contribution(&self, node: &str) -> Result<f64, AttributionError> {
        let c = self.contribution(node)?;
        if c.is_empty() {
            return Err(AttributionError::EmptyVector(node.to_string()));
        }
        Ok(c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    /// Mean of `C(v)` over the anomaly rows.
    pub fn mean_contribution(&self, node: &str) -> Result<f64, AttributionError> {
        let c = self.contribution(node)?;
        if c.is_empty() {
            return Err(AttributionError::EmptyVector(node.to_string()));
        }
        Ok(c.iter().sum::<f64>() / c.len() as f64)
    }

    /// CSV rendering, rows x nodes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row");
        for n in self.contributions.keys() {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&row.to_string());
            for c in self.contributions.values() {
                out.push(',');
                out.push_str(&format!("{}", c[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Exact Shapley values by full subset enumeration; `eval` is called once
/// per coalition bitmask.
pub fn shapley_exact(n_players: usize, mut eval: impl FnMut(u64) -> f64) -> Vec<f64> {
    assert!(n_players >= 1 && n_players <= 24);
    let full = 1u64 << n_players;
    let mut h = vec![0.0f64; full as usize];
    for mask in 0..full {
        h[mask as usize] = eval(mask);
    }
    // weight(s) = s! (p-s-1)! / p!
    let mut weights = vec![0.0f64; n_players];
    for s in 0..n_players {
        weights[s] = factorial(s) * factorial(n_players - s - 1) / factorial(n_players);
    }
    let mut phi = vec![0.0f64; n_players];
    for mask in 0..full {
        let size = mask.count_ones() as usize;
        for p in 0..n_players {
            let bit = 1u64 << p;
            if mask & bit == 0 {
                phi[p] += weights[size] * (h[(mask | bit) as usize] - h[mask as usize]);
            }
        }
    }
    phi
}

/// Permutation-sampling Shapley estimator.
pub fn shapley_sampled(
    n_players: usize,
    mut eval: impl FnMut(u64) -> f64,
    samples: usize,
    rng: &mut impl Rng,
) -> Vec<f64> {
    assert!(n_players >= 1 && samples >= 1);
    let mut phi = vec![0.0f64; n_players];
    let mut order: Vec<usize> = (0..n_players).collect();
    let h_empty = eval(0);
    for _ in 0..samples {
        order.shuffle(rng);
        let mut mask = 0u64;
        let mut prev = h_empty;
        for &p in &order {
            mask |= 1 << p;
            let cur = eval(mask);
            phi[p] += cur - prev;
            prev = cur;
        }
    }
    for v in &mut phi {
        *v /= samples as f64;
    }
    phi
}

/// Shapley values under the attribution config: exact enumeration up to
/// `exact_max_players`, permutation sampling beyond.
pub fn shapley(
    n_players: usize,
    eval: impl FnMut(u64) -> f64,
    cfg: &AttributionConfig,
    rng: &mut impl Rng,
) -> Vec<f64> {
    if n_players <= cfg.exact_max_players {
        shapley_exact(n_players, eval)
    } else {
        shapley_sampled(n_players, eval, cfg.permutation_samples, rng)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Computes per-row Shapley contributions of every player's noise to the
/// target's marginal anomaly score.
pub fn attribute_anomalies(
    scm: &FittedScm,
    target: &str,
    data: &Dataset,
    rows: &[usize],
    cfg: &AttributionConfig,
) -> Result<ContributionMatrix, AttributionError> {
    if rows.is_empty() {
        return Err(AttributionError::EmptyRowSet);
    }
    if scm.mechanism(target).is_none() {
        return Err(AttributionError::UnknownNode(target.to_string()));
    }

    // Players: ancestors(target) + target, in a propagation-compatible
    // (topological) order restricted to the ancestral closure.
    let dag = scm.dag();
    let mut closure = dag.ancestors(target)?;
    closure.push(target.to_string());
    let players: Vec<String> = dag
        .topological_order()
        .into_iter()
        .filter(|n| closure.contains(n))
        .collect();
    let np = players.len();
    let index_of: BTreeMap<&str, usize> = players
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let target_idx = index_of[target];

    // Per-player parent index lists (empty for roots).
    let parent_idx: Vec<Vec<usize>> = players
        .iter()
        .map(|n| {
            dag.parents(n)
                .unwrap()
                .iter()
                .map(|p| index_of[p.as_str()])
                .collect()
        })
        .collect();
    let mechs: Vec<&crate::scm::CausalMechanism> = players
        .iter()
        .map(|n| scm.mechanism(n).unwrap())
        .collect();

    let scorer = QuantileScorer::from_sorted(mechs[target_idx].training_values().to_vec())?;

    // Observed noise per row and player.
    let mut observed = vec![0.0f64; rows.len() * np];
    for (ri, &row) in rows.iter().enumerate() {
        for (pi, name) in players.iter().enumerate() {
            let v = data.value(name, row)?;
            observed[ri * np + pi] = if mechs[pi].is_root() {
                v
            } else {
                v - scm.predict_at(name, data, row)?
            };
        }
    }

    let mut contributions: BTreeMap<String, Vec<f64>> = players
        .iter()
        .map(|n| (n.clone(), vec![0.0; rows.len()]))
        .collect();
    let mut h_full = vec![0.0f64; rows.len()];
    let mut h_empty = vec![0.0f64; rows.len()];

    let draws = cfg.baseline_draws.max(1);
    let mut values = vec![0.0f64; np];

    let n_train = mechs
        .first()
        .map(|m| m.training_noise_rows().len())
        .unwrap_or(0);

    for (ri, &row) in rows.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, row as u64));
        // Common random numbers: one noise table reused by every
        // coalition evaluation of this row.
        let mut baseline = vec![0.0f64; draws * np];
        for b in 0..draws {
            if cfg.joint_baseline {
                let idx = rng.random_range(0..n_train);
                for (pi, mech) in mechs.iter().enumerate() {
                    baseline[b * np + pi] = mech.training_noise_rows()[idx];
                }
            } else {
                for (pi, mech) in mechs.iter().enumerate() {
                    baseline[b * np + pi] = mech.sample_noise(1, &mut rng)[0];
                }
            }
        }
        let obs = &observed[ri * np..(ri + 1) * np];

        let mut memo: HashMap<u64, f64> = HashMap::new();
        let mut eval = |mask: u64| -> f64 {
            if let Some(v) = memo.get(&mask) {
                return *v;
            }
            let mut acc = 0.0;
            for b in 0..draws {
                for pi in 0..np {
                    let eps = if mask & (1 << pi) != 0 {
                        obs[pi]
                    } else {
                        baseline[b * np + pi]
                    };
                    values[pi] = if parent_idx[pi].is_empty() {
                        eps
                    } else {
                        let mech = mechs[pi];
                        let pv: Vec<f64> =
                            parent_idx[pi].iter().map(|&j| values[j]).collect();
                        mech.predict(&pv).unwrap_or(f64::INFINITY) + eps
                    };
                }
                let t = values[target_idx];
                acc += if t.is_finite() {
                    scorer.score(t).unwrap_or(1.0)
                } else {
                    1.0
                };
            }
            let v = acc / draws as f64;
            memo.insert(mask, v);
            v
        };

        let phi = shapley(np, &mut eval, cfg, &mut rng);
        for (pi, name) in players.iter().enumerate() {
            contributions.get_mut(name).unwrap()[ri] = phi[pi];
        }
        h_full[ri] = eval(u64::MAX >> (64 - np));
        h_empty[ri] = eval(0);
    }

    Ok(ContributionMatrix {
        target: target.to_string(),
        rows: rows.to_vec(),
        contributions,
        h_full,
        h_empty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Dag;
    use crate::scm::{fit_scm, FitConfig};

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn std(v: &[f64]) -> f64 {
        let m = mean(v);
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
    }

    /// Linear chain A -> B -> T with small noise; returns (dag, data).
    fn chain_data(seed: u64, n: usize) -> (Dag, Dataset) {
        let dag = Dag::from_edges(&[("A", "B"), ("B", "T")]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = a
            .iter()
            .map(|v| 2.0 * v + rng.random_range(-0.1..0.1))
            .collect();
        let t: Vec<f64> = b
            .iter()
            .map(|v| v - 0.5 + rng.random_range(-0.1..0.1))
            .collect();
        let mut data = Dataset::new();
        data.insert_numeric("A", a).unwrap();
        data.insert_numeric("B", b).unwrap();
        data.insert_numeric("T", t).unwrap();
        (dag, data)
    }

    #[test]
    fn additive_game_recovers_weights_exactly() {
        let w = [0.3, -0.2, 0.5, 0.1];
        let phi = shapley_exact(4, |mask| {
            (0..4)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| w[i])
                .sum()
        });
        for (p, expect) in phi.iter().zip(w.iter()) {
            assert!((p - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_two_player_game_splits_evenly() {
        let phi = shapley_exact(2, |mask| match mask.count_ones() {
            0 => 0.0,
            1 => 0.4,
            _ => 1.0,
        });
        assert!((phi[0] - phi[1]).abs() < 1e-12);
        assert!((phi[0] + phi[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_estimator_matches_exact_on_random_game() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let table: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
        let exact = shapley_exact(6, |m| table[m as usize]);
        let mut rng2 = ChaCha8Rng::seed_from_u64(18);
        let approx = shapley_sampled(6, |m| table[m as usize], 5000, &mut rng2);
        for (e, a) in exact.iter().zip(&approx) {
            assert!((e - a).abs() < 0.05, "exact {e} vs sampled {a}");
        }
    }

    #[test]
    fn shock_on_root_noise_dominates_attribution() {
        let (dag, data) = chain_data(2, 400);
        let scm = fit_scm(&dag, &data, &FitConfig::default()).unwrap();

        // Inject a +10 sigma shock into A's noise on one row and push it
        // through the true equations.
        let mut eval = data.clone();
        let r = 7usize;
        let sa = std(data.column("A").unwrap());
        let a_new = data.value("A", r).unwrap() + 10.0 * sa;
        let b_shift = a_new - data.value("A", r).unwrap();
        let mut a = eval.column("A").unwrap().to_vec();
        let mut b = eval.column("B").unwrap().to_vec();
        let mut t = eval.column("T").unwrap().to_vec();
        a[r] = a_new;
        b[r] += 2.0 * b_shift;
        t[r] += 2.0 * b_shift;
        eval.insert_numeric("A", a).unwrap();
        eval.insert_numeric("B", b).unwrap();
        eval.insert_numeric("T", t).unwrap();

        let cfg = AttributionConfig::default();
        let cm = attribute_anomalies(&scm, "T", &eval, &[r], &cfg).unwrap();
        let (mut best, mut best_abs) = ("", f64::MIN);
        for node in ["A", "B", "T"] {
            let v = cm.max_abs_contribution(node).unwrap();
            if v > best_abs {
                best_abs = v;
                best = node;
            }
        }
        assert_eq!(best, "A");
    }

    #[test]
    fn training_rows_have_small_contributions_and_efficiency() {
        let (dag, data) = chain_data(5, 400);
        let scm = fit_scm(&dag, &data, &FitConfig::default()).unwrap();
        let cfg = AttributionConfig::default();
        // Unremarkable rows: target score close to the resampled baseline
        // (~0.5), so h(full) and h(empty) should both sit near it.
        let scorer = crate::scoring::QuantileScorer::fit(data.column("T").unwrap()).unwrap();
        let rows: Vec<usize> = (0..data.n_rows())
            .filter(|&r| {
                (scorer.score(data.value("T", r).unwrap()).unwrap() - 0.5).abs() < 0.05
            })
            .take(3)
            .collect();
        assert_eq!(rows.len(), 3);
        let cm = attribute_anomalies(&scm, "T", &data, &rows, &cfg).unwrap();
        for (i, _) in rows.iter().enumerate() {
            let total: f64 = ["A", "B", "T"]
                .iter()
                .map(|n| cm.contribution(n).unwrap()[i])
                .sum();
            let gap = cm.h_full[i] - cm.h_empty[i];
            assert!((total - gap).abs() < 1e-9, "efficiency: {total} vs {gap}");
            for n in ["A", "B", "T"] {
                assert!(cm.contribution(n).unwrap()[i].abs() < 0.2);
            }
        }
    }

    #[test]
    fn single_node_graph_is_one_player_shapley() {
        let dag = Dag::from_parts(&[] as &[(&str, &str)], &["X"]).unwrap();
        let mut data = Dataset::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        data.insert_numeric("X", (0..200).map(|_| rng.random_range(0.0..1.0)).collect())
            .unwrap();
        let scm = fit_scm(&dag, &data, &FitConfig::default()).unwrap();
        let cm =
            attribute_anomalies(&scm, "X", &data, &[5], &AttributionConfig::default()).unwrap();
        let c = cm.contribution("X").unwrap()[0];
        assert!((c - (cm.h_full[0] - cm.h_empty[0])).abs() < 1e-12);
    }

    #[test]
    fn deterministic_per_seed_and_null_players_absent() {
        // V is disconnected from T's ancestry; it must not be attributed.
        let dag = Dag::from_edges(&[("A", "T"), ("T", "V")]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut data = Dataset::new();
        let a: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..1.0)).collect();
        let t: Vec<f64> = a.iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
        let v: Vec<f64> = t.iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
        data.insert_numeric("A", a).unwrap();
        data.insert_numeric("T", t).unwrap();
        data.insert_numeric("V", v).unwrap();
        let scm = fit_scm(&dag, &data, &FitConfig::default()).unwrap();
        let cfg = AttributionConfig::default();
        let m1 = attribute_anomalies(&scm, "T", &data, &[1, 2], &cfg).unwrap();
        let m2 = attribute_anomalies(&scm, "T", &data, &[1, 2], &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&m1).unwrap(),
            serde_json::to_string(&m2).unwrap()
        );
        assert!(m1.contribution("V").is_err());
        let nodes: Vec<&str> = m1.nodes().collect();
        assert_eq!(nodes, vec!["A", "T"]);
    }

    #[test]
    fn empty_rows_and_unknown_target_error() {
        let (dag, data) = chain_data(8, 100);
        let scm = fit_scm(&dag, &data, &FitConfig::default()).unwrap();
        assert!(matches!(
            attribute_anomalies(&scm, "T", &data, &[], &AttributionConfig::default()),
            Err(AttributionError::EmptyRowSet)
        ));
        assert!(matches!(
            attribute_anomalies(&scm, "Z", &data, &[0], &AttributionConfig::default()),
            Err(AttributionError::UnknownNode(_))
        ));
    }

    #[test]
    fn max_abs_and_mean_contribution_arithmetic() {
        let cm = ContributionMatrix {
            target: "T".into(),
            rows: vec![0, 1],
            contributions: BTreeMap::from([
                ("A".to_string(), vec![-0.3, 0.1]),
                ("B".to_string(), vec![0.0, 0.0]),
            ]),
            h_full: vec![0.0; 2],
            h_empty: vec![0.0; 2],
        };
        assert_eq!(cm.max_abs_contribution("A").unwrap(), 0.3);
        assert_eq!(cm.max_abs_contribution("B").unwrap(), 0.0);
        assert!((cm.mean_contribution("A").unwrap() - (-0.1)).abs() < 1e-15);
        let single = ContributionMatrix {
            target: "T".into(),
            rows: vec![0],
            contributions: BTreeMap::from([("A".to_string(), vec![0.0998])]),
            h_full: vec![0.0],
            h_empty: vec![0.0],
        };
        assert_eq!(single.max_abs_contribution("A").unwrap(), 0.0998);
        let symmetric = [-1.0, 1.0];
        assert_eq!(mean(&symmetric), 0.0);
    }
}
