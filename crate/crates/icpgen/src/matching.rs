//! Bijective correspondences between target samples and network predictions:
//! the greedy incremental closest-points pass, its alternating variant, and
//! the exact Hungarian assignment used as the optimality oracle.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::batch::SampleBatch;
use crate::distance::{self, MetricSpec};
use crate::{Error, Result};

/// Above this size the pairwise cost matrix is no longer materialized and
/// matcher queries compute distances on the fly.
pub const MATERIALIZE_LIMIT: usize = 20_000;

/// A bijective matching: `permutation()[i] = j` pairs target `i` with
/// prediction `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    permutation: Vec<usize>,
    per_pair_distance: Vec<f64>,
    total_cost: f64,
}

impl Assignment {
    fn new(permutation: Vec<usize>, per_pair_distance: Vec<f64>) -> Self {
        debug_assert_eq!(permutation.len(), per_pair_distance.len());
        let total_cost = per_pair_distance.iter().sum();
        let a = Assignment {
            permutation,
            per_pair_distance,
            total_cost,
        };
        debug_assert!(a.is_bijection());
        a
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Prediction index matched to target `i`.
    pub fn prediction_for(&self, i: usize) -> usize {
        self.permutation[i]
    }

    pub fn per_pair_distance(&self) -> &[f64] {
        &self.per_pair_distance
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    /// Iterates `(target_index, prediction_index, distance)` triples.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.permutation
            .iter()
            .zip(&self.per_pair_distance)
            .enumerate()
            .map(|(i, (&j, &d))| (i, j, d))
    }

    /// True when every prediction index appears exactly once.
    pub fn is_bijection(&self) -> bool {
        let n = self.permutation.len();
        let mut seen = vec![false; n];
        for &j in &self.permutation {
            if j >= n || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        true
    }
}

/// Square matrix of pairwise distances; entry `(i, j)` is
/// `d(target_i, prediction_j)`. Construction validates that every entry is
/// finite and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "cost matrix of size {} needs {} entries, got {}",
                n,
                n * n,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "cost matrix entries must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(CostMatrix { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Random-access view over pairwise costs: a materialized matrix below
/// `MATERIALIZE_LIMIT`, on-the-fly distance evaluation above it.
enum CostSource<'a> {
    Dense(CostMatrix),
    Lazy {
        targets: &'a SampleBatch,
        predictions: &'a SampleBatch,
        metric: &'a MetricSpec,
        /// Hot index per target and log-sum-exp per prediction, precomputed
        /// for the cross-entropy metric only.
        hots: Option<Vec<usize>>,
        lses: Option<Vec<f64>>,
    },
}

impl<'a> CostSource<'a> {
    fn build(
        targets: &'a SampleBatch,
        predictions: &'a SampleBatch,
        metric: &'a MetricSpec,
    ) -> Result<Self> {
        if targets.count() <= MATERIALIZE_LIMIT {
            Ok(CostSource::Dense(pairwise_costs(targets, predictions, metric)?))
        } else {
            Self::lazy(targets, predictions, metric)
        }
    }

    fn lazy(
        targets: &'a SampleBatch,
        predictions: &'a SampleBatch,
        metric: &'a MetricSpec,
    ) -> Result<Self> {
        validate_matching_inputs(targets, predictions, metric)?;
        let (hots, lses) = match metric {
            MetricSpec::SoftmaxCrossEntropy => {
                let hots = targets
                    .rows()
                    .map(distance::hot_index)
                    .collect::<Result<Vec<_>>>()?;
                let lses = predictions.rows().map(distance::log_sum_exp).collect();
                (Some(hots), Some(lses))
            }
            _ => (None, None),
        };
        Ok(CostSource::Lazy {
            targets,
            predictions,
            metric,
            hots,
            lses,
        })
    }

    fn cost(&self, i: usize, j: usize) -> f64 {
        match self {
            CostSource::Dense(m) => m.cost(i, j),
            CostSource::Lazy {
                targets,
                predictions,
                metric,
                hots,
                lses,
            } => match metric {
                MetricSpec::SoftmaxCrossEntropy => {
                    let hots = hots.as_ref().unwrap();
                    let lses = lses.as_ref().unwrap();
                    lses[j] - predictions.row(j)[hots[i]]
                }
                _ => distance::squared_euclidean(targets.row(i), predictions.row(j))
                    .expect("dimensions validated at construction"),
            },
        }
    }
}

fn validate_matching_inputs(
    targets: &SampleBatch,
    predictions: &SampleBatch,
    metric: &MetricSpec,
) -> Result<()> {
    if targets.is_empty() || predictions.is_empty() {
        return Err(Error::InvalidInput(
            "matching requires at least one target and one prediction".into(),
        ));
    }
    if targets.count() != predictions.count() {
        return Err(Error::InvalidInput(format!(
            "matching requires equal counts, got {} targets and {} predictions",
            targets.count(),
            predictions.count()
        )));
    }
    if targets.dim() != predictions.dim() {
        return Err(Error::DimensionMismatch(format!(
            "targets have dim {}, predictions dim {}",
            targets.dim(),
            predictions.dim()
        )));
    }
    // One representative distance call surfaces metric-specific dimension
    // errors (e.g. conditioned z_dim too large) before any bulk work.
    if !matches!(metric, MetricSpec::SoftmaxCrossEntropy) {
        metric.distance(targets.row(0), predictions.row(0))?;
    }
    Ok(())
}

/// Entry `(i, j) = d(target_i, prediction_j)` under the metric; rows are
/// filled in parallel.
pub fn pairwise_costs(
    targets: &SampleBatch,
    predictions: &SampleBatch,
    metric: &MetricSpec,
) -> Result<CostMatrix> {
    validate_matching_inputs(targets, predictions, metric)?;
    let n = targets.count();
    let mut data = vec![0.0; n * n];
    match metric {
        MetricSpec::SoftmaxCrossEntropy => {
            let hots = targets
                .rows()
                .map(distance::hot_index)
                .collect::<Result<Vec<_>>>()?;
            // d(y_i, yhat_j) = logsumexp(yhat_j) - yhat_j[hot_i]; the
            // log-sum-exp depends only on the prediction, so hoist it.
            let lses: Vec<f64> = predictions.rows().map(distance::log_sum_exp).collect();
            data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                let hot = hots[i];
                for (j, out) in row.iter_mut().enumerate() {
                    // Guard against -0.0 from exact ties in float arithmetic.
                    *out = (lses[j] - predictions.row(j)[hot]).max(0.0);
                }
            });
        }
        _ => {
            data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                let t = targets.row(i);
                for (j, out) in row.iter_mut().enumerate() {
                    *out = distance::squared_euclidean(t, predictions.row(j))
                        .expect("dimensions validated above");
                }
            });
        }
    }
    CostMatrix::new(n, data)
}

/// Greedy pass over the targets in a random order; each target takes the
/// nearest prediction not yet consumed. Ties break toward the lowest
/// prediction index.
pub fn greedy_match<R: Rng>(
    targets: &SampleBatch,
    predictions: &SampleBatch,
    metric: &MetricSpec,
    rng: &mut R,
) -> Result<Assignment> {
    let source = CostSource::build(targets, predictions, metric)?;
    let mut order: Vec<usize> = (0..targets.count()).collect();
    order.shuffle(rng);
    Ok(greedy_match_with_order(&source, &order))
}

fn greedy_match_with_order(source: &CostSource, order: &[usize]) -> Assignment {
    let n = order.len();
    let mut alive: Vec<usize> = (0..n).collect();
    let mut permutation = vec![0usize; n];
    let mut per_pair = vec![0.0; n];
    for &t in order {
        let (pos, cost) = nearest_alive(source, t, &alive, true);
        let p = alive.remove(pos);
        permutation[t] = p;
        per_pair[t] = cost;
    }
    Assignment::new(permutation, per_pair)
}

/// Position in `alive` of the nearest counterpart to `query`; ties break
/// toward the lowest index. `query_is_target` selects the cost orientation.
fn nearest_alive(
    source: &CostSource,
    query: usize,
    alive: &[usize],
    query_is_target: bool,
) -> (usize, f64) {
    let mut best_pos = 0;
    let mut best_cost = f64::INFINITY;
    for (pos, &other) in alive.iter().enumerate() {
        let c = if query_is_target {
            source.cost(query, other)
        } else {
            source.cost(other, query)
        };
        // `alive` stays in ascending index order, so strict improvement
        // keeps the lowest index on ties.
        if c < best_cost {
            best_cost = c;
            best_pos = pos;
        }
    }
    (best_pos, best_cost)
}

/// Alternating variant: a fair coin decides each round whether a random
/// remaining target grabs its nearest remaining prediction or vice versa.
pub fn alternating_match<R: Rng>(
    targets: &SampleBatch,
    predictions: &SampleBatch,
    metric: &MetricSpec,
    rng: &mut R,
) -> Result<Assignment> {
    let source = CostSource::build(targets, predictions, metric)?;
    let n = targets.count();
    let mut alive_t: Vec<usize> = (0..n).collect();
    let mut alive_p: Vec<usize> = (0..n).collect();
    let mut permutation = vec![0usize; n];
    let mut per_pair = vec![0.0; n];
    while !alive_t.is_empty() {
        let (t, p, cost) = if rng.gen_bool(0.5) {
            let t = alive_t.remove(rng.gen_range(0..alive_t.len()));
            let (pos, cost) = nearest_alive(&source, t, &alive_p, true);
            (t, alive_p.remove(pos), cost)
        } else {
            let p = alive_p.remove(rng.gen_range(0..alive_p.len()));
            let (pos, cost) = nearest_alive(&source, p, &alive_t, false);
            (alive_t.remove(pos), p, cost)
        };
        permutation[t] = p;
        per_pair[t] = cost;
    }
    Ok(Assignment::new(permutation, per_pair))
}

/// Exact minimum-cost perfect matching via the O(n³) augmenting-path
/// formulation with dual potentials. Preconditions (square, finite,
/// nonnegative) are enforced by the `CostMatrix` type.
pub fn hungarian(costs: &CostMatrix) -> Assignment {
    let n = costs.size();
    // 1-indexed arrays with a virtual 0th row/column, following the
    // classic potentials formulation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j]: row currently assigned to column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = costs.row(i0 - 1);
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut permutation = vec![0usize; n];
    let mut per_pair = vec![0.0; n];
    for j in 1..=n {
        let i = p[j] - 1;
        permutation[i] = j - 1;
        per_pair[i] = costs.cost(i, j - 1);
    }
    Assignment::new(permutation, per_pair)
}

/// Exact empirical earth mover's distance between two same-sized samples:
/// the Hungarian optimum divided by the sample count. O(n²) memory and
/// O(n³) time.
pub fn empirical_emd(
    sample_p: &SampleBatch,
    sample_q: &SampleBatch,
    metric: &MetricSpec,
) -> Result<f64> {
    let costs = pairwise_costs(sample_p, sample_q, metric)?;
    Ok(hungarian(&costs).total_cost() / costs.size() as f64)
}
