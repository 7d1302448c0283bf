//! Structural causal model: per-node mechanisms fit on observational
//! data, noise extraction, and counterfactual forward propagation.

mod kdtree;
pub mod regress;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::graph::{Dag, GraphError};
use regress::{select_mechanism, ModelId, Regressor, RowMatrix};

/// Minimum rows accepted by [`fit_scm`].
pub const MIN_FIT_ROWS: usize = 20;

/// A mechanism counts as numerically deterministic when its training
/// residual spread is below this fraction of the target's value spread.
const DEGENERACY_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ScmError {
    #[error("column {0:?} required by the graph is missing from the data")]
    MissingColumn(String),
    #[error("need at least {MIN_FIT_ROWS} rows to fit, got {0}")]
    InsufficientData(usize),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("mechanism of {0:?} is not an additive-noise mechanism")]
    NotAdditiveNoise(String),
    #[error("mechanism expects {expected} parent values, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("no noise value supplied for node {0:?}")]
    MissingNoise(String),
    #[error("prediction for node {0:?} is not finite")]
    NonFinitePrediction(String),
    #[error("unsupported scm file version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Fit configuration: candidate set, CV folds and the seed recorded in
/// the fit metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub folds: usize,
    pub seed: u64,
    pub candidates: Vec<ModelId>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            folds: 5,
            seed: 0,
            candidates: ModelId::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum MechanismKind {
    /// Root node: the empirical distribution of its training values.
    RootEmpirical,
    /// Non-root: `value = regressor(parents) + noise`.
    AdditiveNoise {
        parents: Vec<String>,
        regressor: Regressor,
        /// Residual spread indistinguishable from zero; the mechanism is
        /// an exact function of its parents on the training data.
        degenerate: bool,
    },
}

/// Per-node causal mechanism plus the training samples needed for
/// scoring and bootstrap noise draws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CausalMechanism {
    pub kind: MechanismKind,
    /// Sorted training values of the node.
    values_sorted: Vec<f64>,
    /// Sorted training noise: residuals for non-roots, values for roots.
    noise_sorted: Vec<f64>,
    /// Training noise in row order, aligned across nodes; enables joint
    /// (row-bootstrap) baseline draws.
    noise_rows: Vec<f64>,
}

impl CausalMechanism {
    pub fn training_values(&self) -> &[f64] {
        &self.values_sorted
    }

    pub fn training_residuals(&self) -> &[f64] {
        &self.noise_sorted
    }

    /// Training noise in row order (aligned across the fit's rows).
    pub fn training_noise_rows(&self) -> &[f64] {
        &self.noise_rows
    }

    pub fn is_root(&self) -> bool {
        matches!(self.kind, MechanismKind::RootEmpirical)
    }

    pub fn parents(&self) -> &[String] {
        match &self.kind {
            MechanismKind::RootEmpirical => &[],
            MechanismKind::AdditiveNoise { parents, .. } => parents,
        }
    }

    pub fn regressor(&self) -> Option<&Regressor> {
        match &self.kind {
            MechanismKind::RootEmpirical => None,
            MechanismKind::AdditiveNoise { regressor, .. } => Some(regressor),
        }
    }

    /// Regressor output for an additive-noise mechanism.
    pub fn predict(&self, parent_values: &[f64]) -> Result<f64, ScmError> {
        match &self.kind {
            MechanismKind::RootEmpirical => Err(ScmError::NotAdditiveNoise(String::new())),
            MechanismKind::AdditiveNoise {
                parents, regressor, ..
            } => {
                if parent_values.len() != parents.len() {
                    return Err(ScmError::ArityMismatch {
                        expected: parents.len(),
                        got: parent_values.len(),
                    });
                }
                let v = regressor.predict(parent_values);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(ScmError::NonFinitePrediction(String::new()))
                }
            }
        }
    }

    /// Bootstrap draws (with replacement) from the stored noise sample.
    pub fn sample_noise<R: rand::Rng>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        let n = self.noise_sorted.len();
        (0..count)
            .map(|_| self.noise_sorted[rng.random_range(0..n)])
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeFitInfo {
    pub model: ModelId,
    pub cv_rmse: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitMetadata {
    pub seed: u64,
    pub folds: usize,
    pub per_node: BTreeMap<String, NodeFitInfo>,
}

/// Per-node noise realizations for an evaluated dataset: residuals for
/// non-roots, observed values for roots. All vectors share one length.
#[derive(Debug, Clone)]
pub struct NoiseMatrix {
    values: BTreeMap<String, Vec<f64>>,
    n_rows: usize,
}

impl NoiseMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn node(&self, name: &str) -> Result<&[f64], ScmError> {
        self.values
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| ScmError::UnknownNode(name.to_string()))
    }

    pub fn row(&self, row: usize) -> BTreeMap<String, f64> {
        self.values
            .iter()
            .map(|(k, v)| (k.clone(), v[row]))
            .collect()
    }
}

/// Fitted SCM: one mechanism per graph node plus fit metadata.
#[derive(Debug, Clone)]
pub struct FittedScm {
    dag: Dag,
    mechanisms: BTreeMap<String, CausalMechanism>,
    metadata: FitMetadata,
}

/// Fits per-node mechanisms on `data`: roots get their empirical value
/// distribution, non-roots the CV-selected regressor on their parents.
/// Deterministic given `(data, config)`.
pub fn fit_scm(dag: &Dag, data: &Dataset, config: &FitConfig) -> Result<FittedScm, ScmError> {
    if data.n_rows() < MIN_FIT_ROWS {
        return Err(ScmError::InsufficientData(data.n_rows()));
    }
    for node in dag.nodes() {
        if !data.has_column(node) {
            return Err(ScmError::MissingColumn(node.clone()));
        }
    }

    let mut mechanisms = BTreeMap::new();
    let mut per_node = BTreeMap::new();
    for node in dag.nodes() {
        let y = data.column(node)?;
        let parents = dag.parents(node)?;
        if parents.is_empty() {
            let mut sorted = y.to_vec();
            sorted.sort_by(f64::total_cmp);
            mechanisms.insert(
                node.clone(),
                CausalMechanism {
                    kind: MechanismKind::RootEmpirical,
                    values_sorted: sorted.clone(),
                    noise_sorted: sorted,
                    noise_rows: y.to_vec(),
                },
            );
            continue;
        }

        let cols: Vec<&[f64]> = parents
            .iter()
            .map(|p| data.column(p))
            .collect::<Result<_, _>>()?;
        let x = RowMatrix::from_columns(&cols);
        let (regressor, report) = select_mechanism(&x, y, &config.candidates, config.folds, config.seed);

        let residuals: Vec<f64> = (0..data.n_rows())
            .map(|i| y[i] - regressor.predict(x.row(i)))
            .collect();
        let degenerate = spread(&residuals) <= DEGENERACY_REL_TOL * spread(y).max(f64::MIN_POSITIVE);

        let mut values_sorted = y.to_vec();
        values_sorted.sort_by(f64::total_cmp);
        let noise_rows = residuals.clone();
        let mut noise_sorted = residuals;
        noise_sorted.sort_by(f64::total_cmp);

        per_node.insert(
            node.clone(),
            NodeFitInfo {
                model: report.winner,
                cv_rmse: report.winner_rmse,
                degenerate,
            },
        );
        mechanisms.insert(
            node.clone(),
            CausalMechanism {
                kind: MechanismKind::AdditiveNoise {
                    parents: parents.to_vec(),
                    regressor,
                    degenerate,
                },
                values_sorted,
                noise_sorted,
                noise_rows,
            },
        );
    }

    Ok(FittedScm {
        dag: dag.clone(),
        mechanisms,
        metadata: FitMetadata {
            seed: config.seed,
            folds: config.folds,
            per_node,
        },
    })
}

fn spread(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

impl FittedScm {
    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn metadata(&self) -> &FitMetadata {
        &self.metadata
    }

    pub fn mechanism(&self, node: &str) -> Option<&CausalMechanism> {
        self.mechanisms.get(node)
    }

    /// Regressor prediction for `node` from its parents' columns at `row`.
    pub fn predict_at(&self, node: &str, data: &Dataset, row: usize) -> Result<f64, ScmError> {
        let mech = self
            .mechanisms
            .get(node)
            .ok_or_else(|| ScmError::UnknownNode(node.to_string()))?;
        if mech.is_root() {
            return Err(ScmError::NotAdditiveNoise(node.to_string()));
        }
        let vals: Vec<f64> = mech
            .parents()
            .iter()
            .map(|p| data.value(p, row))
            .collect::<Result<_, _>>()?;
        mech.predict(&vals)
    }

    /// Noise realizations of every node over `data`: residual for
    /// non-roots, observed value for roots.
    pub fn extract_noise(&self, data: &Dataset) -> Result<NoiseMatrix, ScmError> {
        let mut out = BTreeMap::new();
        for (node, mech) in &self.mechanisms {
            let col = data.column(node)?;
            let noise = if mech.is_root() {
                col.to_vec()
            } else {
                (0..data.n_rows())
                    .map(|i| Ok(col[i] - self.predict_at(node, data, i)?))
                    .collect::<Result<Vec<f64>, ScmError>>()?
            };
            out.insert(node.clone(), noise);
        }
        Ok(NoiseMatrix {
            values: out,
            n_rows: data.n_rows(),
        })
    }

    /// Forward pass: roots take their noise value, non-roots take the
    /// regressor output on propagated parents plus their noise value.
    pub fn propagate(
        &self,
        noise: &BTreeMap<String, f64>,
    ) -> Result<BTreeMap<String, f64>, ScmError> {
        let mut values: BTreeMap<String, f64> = BTreeMap::new();
        for node in self.dag.topological_order() {
            let eps = *noise
                .get(&node)
                .ok_or_else(|| ScmError::MissingNoise(node.clone()))?;
            let mech = &self.mechanisms[&node];
            let v = if mech.is_root() {
                eps
            } else {
                let pv: Vec<f64> = mech.parents().iter().map(|p| values[p]).collect();
                mech.predict(&pv)? + eps
            };
            values.insert(node, v);
        }
        Ok(values)
    }

    /// Versioned JSON document (model kinds, parameters, samples).
    pub fn to_json(&self) -> String {
        let file = ScmFile {
            version: SCM_FILE_VERSION,
            edges: self.dag.edges(),
            isolated: self
                .dag
                .nodes()
                .iter()
                .filter(|n| {
                    self.dag.parents(n).unwrap().is_empty()
                        && self.dag.children(n).unwrap().is_empty()
                })
                .cloned()
                .collect(),
            metadata: self.metadata.clone(),
            mechanisms: self.mechanisms.clone(),
        };
        serde_json::to_string_pretty(&file).expect("scm serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScmError> {
        let file: ScmFile = serde_json::from_str(text)?;
        if file.version != SCM_FILE_VERSION {
            return Err(ScmError::UnsupportedVersion(file.version));
        }
        let dag = Dag::from_parts(&file.edges, &file.isolated)?;
        for node in dag.nodes() {
            if !file.mechanisms.contains_key(node) {
                return Err(ScmError::UnknownNode(node.clone()));
            }
        }
        Ok(FittedScm {
            dag,
            mechanisms: file.mechanisms,
            metadata: file.metadata,
        })
    }
}

const SCM_FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ScmFile {
    version: u32,
    edges: Vec<(String, String)>,
    #[serde(default)]
    isolated: Vec<String>,
    metadata: FitMetadata,
    mechanisms: BTreeMap<String, CausalMechanism>,
}
