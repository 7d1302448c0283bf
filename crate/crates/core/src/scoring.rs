//! Quantile anomaly scoring: marginal scores against an empirical sample
//! and conditional (structural) scores of nodes given their parents.

use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::scm::{FittedScm, MechanismKind, ScmError};

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("need at least 2 values to fit a scorer, got {0}")]
    InsufficientData(usize),
    #[error("input to score() is not finite")]
    NonFiniteInput,
    #[error("empty input")]
    EmptyInput,
    #[error("empty row set")]
    EmptyRowSet,
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Scm(#[from] ScmError),
}

/// Median-CDF quantile scorer over an empirical sample.
///
/// `score(x) = 1 - 2 * min(P(X <= x), P(X >= x))` with ties counted on
/// both sides at half weight (mid-rank convention). 0 at the empirical
/// median, 1 beyond the support.
#[derive(Debug, Clone)]
pub struct QuantileScorer {
    sorted: Vec<f64>,
}

impl QuantileScorer {
    pub fn fit(values: &[f64]) -> Result<Self, ScoringError> {
        if values.len() < 2 {
            return Err(ScoringError::InsufficientData(values.len()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// Builds a scorer from an already-sorted sample.
    pub(crate) fn from_sorted(sorted: Vec<f64>) -> Result<Self, ScoringError> {
        if sorted.len() < 2 {
            return Err(ScoringError::InsufficientData(sorted.len()));
        }
        debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
        Ok(Self { sorted })
    }

    pub fn sample(&self) -> &[f64] {
        &self.sorted
    }

    pub fn score(&self, x: f64) -> Result<f64, ScoringError> {
        if !x.is_finite() {
            return Err(ScoringError::NonFiniteInput);
        }
        let n = self.sorted.len() as f64;
        let below = self.sorted.partition_point(|&v| v < x) as f64;
        let not_above = self.sorted.partition_point(|&v| v <= x) as f64;
        let ties = not_above - below;
        let p_le = (below + 0.5 * ties) / n;
        let p_ge = (n - not_above + 0.5 * ties) / n;
        Ok(1.0 - 2.0 * p_le.min(p_ge))
    }
}

/// Structural anomaly scores of `node` at `rows` of `data`.
///
/// Non-root nodes score the residual `x_v - predict(M(v), parents)`
/// against the mechanism's training residuals. Root nodes score the
/// observed value against the node's training values, as do non-roots
/// whose fitted mechanism is numerically deterministic (residual spread
/// indistinguishable from zero): a residual scorer carries no
/// information there, while value extremity still does.
pub fn conditional_anomaly_scores(
    scm: &FittedScm,
    data: &Dataset,
    rows: &[usize],
    node: &str,
) -> Result<Vec<f64>, ScoringError> {
    if rows.is_empty() {
        return Err(ScoringError::EmptyRowSet);
    }
    let mech = scm
        .mechanism(node)
        .ok_or_else(|| ScoringError::UnknownNode(node.to_string()))?;

    match &mech.kind {
        MechanismKind::RootEmpirical { .. } => {
            let scorer = QuantileScorer::from_sorted(mech.training_values().to_vec())?;
            let col = data.column(node)?;
            rows.iter().map(|&r| scorer.score(col[r])).collect()
        }
        MechanismKind::AdditiveNoise { degenerate, .. } => {
            let col = data.column(node)?;
            if *degenerate {
                let scorer = QuantileScorer::from_sorted(mech.training_values().to_vec())?;
                rows.iter().map(|&r| scorer.score(col[r])).collect()
            } else {
                let scorer = QuantileScorer::from_sorted(mech.training_residuals().to_vec())?;
                rows.iter()
                    .map(|&r| {
                        let pred = scm.predict_at(node, data, r)?;
                        Ok(scorer.score(col[r] - pred)?)
                    })
                    .collect()
            }
        }
    }
}

/// Arithmetic mean of a non-empty score vector (the S-bar of a node over
/// its anomaly subset).
pub fn mean_structural_score(scores: &[f64]) -> Result<f64, ScoringError> {
    if scores.is_empty() {
        return Err(ScoringError::EmptyInput);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
