//! Distance metrics and their gradients with respect to the prediction.
//!
//! The same metric is used twice: to score candidate pairs during matching
//! and as the supervised loss once pairs are fixed.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which distance to use. Serialized by the tags `sqeuclidean`,
/// `conditioned`, and `softmax_xent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MetricSpec {
    /// `sum_i (a_i - b_i)^2`.
    #[serde(rename = "sqeuclidean")]
    SquaredEuclidean,
    /// Squared Euclidean over a `[z; y]` concatenation; `z_dim` records how
    /// many leading components are the conditioning block.
    #[serde(rename = "conditioned")]
    Conditioned { z_dim: usize },
    /// `-sum_i y_i log softmax(y_hat)_i` with one-hot `y`.
    #[serde(rename = "softmax_xent")]
    SoftmaxCrossEntropy,
}

impl MetricSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            MetricSpec::SquaredEuclidean => "sqeuclidean",
            MetricSpec::Conditioned { .. } => "conditioned",
            MetricSpec::SoftmaxCrossEntropy => "softmax_xent",
        }
    }

    /// Distance from a target `y` to a prediction `y_hat`.
    ///
    /// The argument order matters only for the cross-entropy kind, where `y`
    /// must be the one-hot side.
    pub fn distance(&self, y: &[f64], y_hat: &[f64]) -> Result<f64> {
        check_dims(y, y_hat)?;
        match self {
            MetricSpec::SquaredEuclidean => Ok(squared_euclidean(y, y_hat)?),
            MetricSpec::Conditioned { z_dim } => conditioned_distance(y, y_hat, *z_dim),
            MetricSpec::SoftmaxCrossEntropy => softmax_cross_entropy(y, y_hat),
        }
    }

    /// Gradient of `distance(y, y_hat)` with respect to `y_hat`.
    pub fn gradient(&self, y: &[f64], y_hat: &[f64]) -> Result<Vec<f64>> {
        check_dims(y, y_hat)?;
        match self {
            MetricSpec::SquaredEuclidean | MetricSpec::Conditioned { .. } => {
                Ok(y_hat.iter().zip(y).map(|(p, t)| 2.0 * (p - t)).collect())
            }
            MetricSpec::SoftmaxCrossEntropy => {
                validate_one_hot(y)?;
                let mut g = softmax(y_hat);
                for (gi, yi) in g.iter_mut().zip(y) {
                    *gi -= yi;
                }
                Ok(g)
            }
        }
    }

    pub fn z_dim(&self) -> usize {
        match self {
            MetricSpec::Conditioned { z_dim } => *z_dim,
            _ => 0,
        }
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "distance between vectors of dim {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `sum_i (a_i - b_i)^2`.
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Squared Euclidean over a `[z; y]` concatenation. The split into blocks is
/// informational: summing the squared z-block and the squared y-block is the
/// same as squaring the whole concatenation.
pub fn conditioned_distance(u: &[f64], v: &[f64], z_dim: usize) -> Result<f64> {
    check_dims(u, v)?;
    if z_dim >= u.len() {
        return Err(Error::DimensionMismatch(format!(
            "z_dim {} must be smaller than the vector dimension {}",
            z_dim,
            u.len()
        )));
    }
    squared_euclidean(u, v)
}

/// Numerically safe softmax with max subtraction.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log(sum_i exp(v_i))` with max subtraction.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn validate_one_hot(y: &[f64]) -> Result<()> {
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    let zeros = y.iter().filter(|&&v| v == 0.0).count();
    if ones != 1 || ones + zeros != y.len() {
        return Err(Error::InvalidInput(format!(
            "expected a one-hot vector, got {:?}",
            y
        )));
    }
    Ok(())
}

/// Index of the single 1.0 entry of a one-hot vector.
pub fn hot_index(y: &[f64]) -> Result<usize> {
    validate_one_hot(y)?;
    Ok(y.iter().position(|&v| v == 1.0).unwrap())
}

/// `-log softmax(y_hat)_c` for the hot index `c` of `y`.
///
/// Computed as `logsumexp(y_hat) - y_hat_c`, which avoids taking the log of
/// an underflowed softmax entry.
pub fn softmax_cross_entropy(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_dims(y, y_hat)?;
    let c = hot_index(y)?;
    Ok(log_sum_exp(y_hat) - y_hat[c])
}
