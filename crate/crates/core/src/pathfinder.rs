//! Combined node scoring, threshold-gated path discovery from a target
//! toward its root causes, and path significance ranking.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attribution::{attribute_anomalies, AttributionConfig, AttributionError, ContributionMatrix};
use crate::dataset::Dataset;
use crate::graph::{Dag, GraphError};
use crate::scm::FittedScm;
use crate::scoring::{conditional_anomaly_scores, mean_structural_score, ScoringError};

#[derive(Debug, Error)]
pub enum PathError {
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("no score supplied for node {0:?}")]
    MissingScore(String),
    #[error("path needs at least 2 nodes, got {0}")]
    PathTooShort(usize),
    #[error("date {0} not present in the dataset")]
    DateNotFound(NaiveDate),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Attribution(#[from] AttributionError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// Thresholds and weights for path discovery and ranking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathConfig {
    /// Weight of the structural score in the combined node score.
    pub alpha: f64,
    /// Intermediate nodes must clear `beta * theta`.
    pub beta: f64,
    /// Terminal nodes must clear `theta` (the min-score threshold).
    pub theta: f64,
    /// Weight of the terminal mean noise in the path significance.
    pub gamma: f64,
    pub max_depth: usize,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            alpha: 0.7,
            beta: 0.7,
            theta: 0.8,
            gamma: 0.7,
            max_depth: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeScore {
    pub node: String,
    pub mean_structural: f64,
    pub max_abs_noise: f64,
    pub combined: f64,
}

/// One traced pathway, target first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CausalPath {
    pub nodes: Vec<String>,
    pub node_scores: Vec<NodeScore>,
    pub consistency: f64,
    pub terminal_mean_noise: f64,
    pub significance: f64,
    /// True when no accepted path extends this one.
    pub maximal: bool,
}

/// Per-date analysis bundle: ranked paths plus the full node table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub date: NaiveDate,
    pub n_anomaly_rows: usize,
    pub paths: Vec<CausalPath>,
    pub node_scores: Vec<NodeScore>,
}

/// `alpha * S-bar + (1 - alpha) * C-tilde`.
pub fn combined_score(mean_structural: f64, max_abs_noise: f64, alpha: f64) -> f64 {
    alpha * mean_structural + (1.0 - alpha) * max_abs_noise
}

/// `gamma * terminal_mean_noise + (1 - gamma) * consistency`.
pub fn path_significance(terminal_mean_noise: f64, consistency: f64, gamma: f64) -> f64 {
    gamma * terminal_mean_noise + (1.0 - gamma) * consistency
}

/// Depth-first discovery of accepted paths from `target` toward roots.
///
/// A parent is walked through when its combined score clears
/// `beta * theta`; a path is emitted when its last node clears `theta`.
/// The target itself is exempt from both thresholds. Every accepted
/// path is returned (prefixes included); [`maximal_paths`] filters to
/// the prefix-maximal subset.
pub fn discover_paths(
    dag: &Dag,
    scores: &BTreeMap<String, NodeScore>,
    target: &str,
    cfg: &PathConfig,
) -> Result<Vec<Vec<String>>, PathError> {
    if !dag.contains(target) {
        return Err(PathError::UnknownNode(target.to_string()));
    }
    for node in dag.ancestors(target)? {
        if !scores.contains_key(&node) {
            return Err(PathError::MissingScore(node));
        }
    }
    let gate = cfg.beta * cfg.theta;
    let mut out = Vec::new();
    let mut path = vec![target.to_string()];
    walk(dag, scores, cfg, gate, &mut path, &mut out);
    Ok(out)
}

fn walk(
    dag: &Dag,
    scores: &BTreeMap<String, NodeScore>,
    cfg: &PathConfig,
    gate: f64,
    path: &mut Vec<String>,
    out: &mut Vec<Vec<String>>,
) {
    if path.len() > cfg.max_depth {
        return;
    }
    let last = path.last().unwrap().clone();
    for parent in dag.parents(&last).unwrap() {
        let combined = scores[parent].combined;
        if combined < gate {
            continue;
        }
        path.push(parent.clone());
        if combined >= cfg.theta {
            out.push(path.clone());
        }
        walk(dag, scores, cfg, gate, path, out);
        path.pop();
    }
}

/// Accepted paths that no other accepted path extends.
pub fn maximal_paths(paths: &[Vec<String>]) -> Vec<Vec<String>> {
    paths
        .iter()
        .filter(|p| {
            !paths
                .iter()
                .any(|q| q.len() > p.len() && q[..p.len()] == p[..])
        })
        .cloned()
        .collect()
}

/// Absolute Pearson correlation; `None` when undefined (fewer than two
/// samples or a zero-variance side).
pub fn abs_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some((cov / (vx.sqrt() * vy.sqrt())).abs().min(1.0))
}

/// Mean absolute Pearson correlation over adjacent contribution vectors;
/// undefined pairs contribute 0.
pub fn path_consistency(cm: &ContributionMatrix, path: &[String]) -> Result<f64, PathError> {
    if path.len() < 2 {
        return Err(PathError::PathTooShort(path.len()));
    }
    let mut total = 0.0;
    for pair in path.windows(2) {
        let a = cm.contribution(&pair[0])?;
        let b = cm.contribution(&pair[1])?;
        total += abs_pearson(a, b).unwrap_or(0.0);
    }
    Ok(total / (path.len() - 1) as f64)
}

/// Full per-date analysis: anomaly row set, node scores, attribution,
/// path discovery and significance ranking.
pub fn analyze(
    scm: &FittedScm,
    data: &Dataset,
    dates: &[NaiveDate],
    cfg: &PathConfig,
    acfg: &AttributionConfig,
    target: &str,
) -> Result<BTreeMap<NaiveDate, AnomalyReport>, PathError> {
    let dag = scm.dag();
    if !dag.contains(target) {
        return Err(PathError::UnknownNode(target.to_string()));
    }
    let mut scope = dag.ancestors(target)?;
    scope.push(target.to_string());
    scope.sort();

    let mut reports = BTreeMap::new();
    for &date in dates {
        let rows = data.rows_on_date(date);
        if rows.is_empty() {
            return Err(PathError::DateNotFound(date));
        }

        let cm = attribute_anomalies(scm, target, data, &rows, acfg)?;

        let mut scores: BTreeMap<String, NodeScore> = BTreeMap::new();
        for node in &scope {
            let s = conditional_anomaly_scores(scm, data, &rows, node)?;
            let mean_structural = mean_structural_score(&s)?;
            let max_abs_noise = cm.max_abs_contribution(node)?;
            scores.insert(
                node.clone(),
                NodeScore {
                    node: node.clone(),
                    mean_structural,
                    max_abs_noise,
                    combined: combined_score(mean_structural, max_abs_noise, cfg.alpha),
                },
            );
        }

        let accepted = discover_paths(dag, &scores, target, cfg)?;
        let maximal = maximal_paths(&accepted);
        let mut paths: Vec<CausalPath> = accepted
            .iter()
            .map(|nodes| {
                let consistency = path_consistency(&cm, nodes)?;
                let terminal_mean_noise = cm.mean_contribution(nodes.last().unwrap())?;
                Ok(CausalPath {
                    node_scores: nodes.iter().map(|n| scores[n].clone()).collect(),
                    consistency,
                    terminal_mean_noise,
                    significance: path_significance(terminal_mean_noise, consistency, cfg.gamma),
                    maximal: maximal.contains(nodes),
                    nodes: nodes.clone(),
                })
            })
            .collect::<Result<_, PathError>>()?;
        paths.sort_by(|a, b| {
            b.significance
                .total_cmp(&a.significance)
                .then(a.nodes.len().cmp(&b.nodes.len()))
                .then(a.nodes.cmp(&b.nodes))
        });

        reports.insert(
            date,
            AnomalyReport {
                date,
                n_anomaly_rows: rows.len(),
                paths,
                node_scores: scores.into_values().collect(),
            },
        );
    }
    Ok(reports)
}
