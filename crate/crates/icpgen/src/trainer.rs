//! The outer iteration: sample an origin batch and a target batch, map the
//! origin through the network, build a bijective matching, and regress the
//! network onto the matched pairs with minibatch Adam updates.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batch::SampleBatch;
use crate::distance::MetricSpec;
use crate::distributions::{OriginSpec, TargetSource, TargetSpec};
use crate::matching::{self, Assignment};
use crate::nn::{self, AdamConfig, AdamState, DenseNetwork};
use crate::{Error, Result};

/// Which correspondence builder the epoch uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatcherKind {
    Greedy,
    Alternating,
}

/// Full description of a training run. The conditioned variant is selected
/// by using the `conditioned` metric; its `z_dim` names how many leading
/// target components are the conditioning block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_matcher")]
    pub matcher: MatcherKind,
    pub metric: MetricSpec,
    pub origin: OriginSpec,
    pub target: TargetSpec,
    pub matching_batch: usize,
    pub supervised_minibatch: usize,
    pub epochs: usize,
    #[serde(default = "default_hidden_dims")]
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_clip_bound")]
    pub clip_bound: f64,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_passes")]
    pub supervised_passes_per_epoch: usize,
    /// Held-out sample size for the per-epoch exact EMD estimate; 0 skips it.
    #[serde(default)]
    pub emd_sample_size: usize,
    /// Sample size for the per-epoch pmf error of categorical targets;
    /// 0 skips it.
    #[serde(default)]
    pub pmf_eval_samples: usize,
}

fn default_matcher() -> MatcherKind {
    MatcherKind::Greedy
}
fn default_hidden_dims() -> Vec<usize> {
    vec![50, 50, 50]
}
fn default_clip_bound() -> f64 {
    0.1
}
fn default_passes() -> usize {
    1
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.origin.validate()?;
        self.target.validate()?;
        self.adam.validate()?;
        if self.matching_batch == 0 {
            return Err(Error::InvalidConfig("matching_batch must be positive".into()));
        }
        if self.supervised_minibatch == 0 || self.supervised_minibatch > self.matching_batch {
            return Err(Error::InvalidConfig(format!(
                "supervised_minibatch must lie in 1..={}, got {}",
                self.matching_batch, self.supervised_minibatch
            )));
        }
        if self.supervised_passes_per_epoch == 0 {
            return Err(Error::InvalidConfig(
                "supervised_passes_per_epoch must be positive".into(),
            ));
        }
        if !(self.clip_bound > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "clip_bound must be positive, got {}",
                self.clip_bound
            )));
        }
        match (&self.metric, &self.target) {
            (MetricSpec::Conditioned { z_dim }, target) => {
                if *z_dim == 0 {
                    return Err(Error::InvalidConfig(
                        "conditioned metric needs z_dim >= 1".into(),
                    ));
                }
                if matches!(target, TargetSpec::Multinoulli { .. }) {
                    return Err(Error::InvalidConfig(
                        "conditioned training of a categorical target is not supported".into(),
                    ));
                }
            }
            (MetricSpec::SoftmaxCrossEntropy, target) => {
                if !matches!(target, TargetSpec::Multinoulli { .. }) {
                    return Err(Error::InvalidConfig(
                        "softmax_xent metric requires a multinoulli target".into(),
                    ));
                }
            }
            _ => {}
        }
        if self.pmf_eval_samples > 0 && !matches!(self.target, TargetSpec::Multinoulli { .. }) {
            return Err(Error::InvalidConfig(
                "pmf_eval_samples is only meaningful for a multinoulli target".into(),
            ));
        }
        Ok(())
    }

    pub fn z_dim(&self) -> usize {
        self.metric.z_dim()
    }

    /// Layer dimensions implied by the config for a target of row dimension
    /// `target_dim` (conditioning block included).
    pub fn network_dims(&self, target_dim: usize) -> Result<Vec<usize>> {
        let z = self.z_dim();
        if z >= target_dim && z > 0 {
            return Err(Error::InvalidConfig(format!(
                "z_dim {} must be smaller than the target dimension {}",
                z, target_dim
            )));
        }
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(z + self.origin.dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(target_dim);
        Ok(dims)
    }
}

/// Matched inputs and regression targets for one supervised phase. Row `i`
/// of `inputs` must be driven to row `i` of `targets`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedPairs {
    pub inputs: SampleBatch,
    pub targets: SampleBatch,
}

/// Assembles the supervised set from a matching. Unconditioned pairs are
/// `(x_j, y_i)`; conditioned pairs are `([z_i; x_j], [z_i; y_i])` — the
/// input always carries the matched TARGET's conditioning block.
pub fn ordered_pairs(
    origin_batch: &SampleBatch,
    target_batch: &SampleBatch,
    assignment: &Assignment,
    z_dim: usize,
) -> Result<OrderedPairs> {
    let n = target_batch.count();
    if origin_batch.count() != n || assignment.len() != n {
        return Err(Error::InvalidInput(format!(
            "ordered pairs need equal sizes, got {} origin rows, {} target rows, {} matches",
            origin_batch.count(),
            n,
            assignment.len()
        )));
    }
    if z_dim >= target_batch.dim() && z_dim > 0 {
        return Err(Error::DimensionMismatch(format!(
            "z_dim {} exceeds target dimension {}",
            z_dim,
            target_batch.dim()
        )));
    }
    let mut inputs = SampleBatch::empty(z_dim + origin_batch.dim());
    let mut row = vec![0.0; z_dim + origin_batch.dim()];
    for i in 0..n {
        let j = assignment.prediction_for(i);
        row[..z_dim].copy_from_slice(&target_batch.row(i)[..z_dim]);
        row[z_dim..].copy_from_slice(origin_batch.row(j));
        inputs.push_row(&row);
    }
    Ok(OrderedPairs {
        inputs,
        targets: target_batch.clone(),
    })
}

/// Per-epoch convergence record. `matched_cost_*` reflect the network state
/// BEFORE the epoch's parameter updates; `emd` and `pmf_error` are held-out
/// evaluations of the updated network.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub matched_cost_sum: f64,
    pub matched_cost_mean: f64,
    pub emd: Option<f64>,
    pub pmf_error: Option<f64>,
    pub seconds: f64,
}

/// Training history; serializes to CSV with the wall-clock column separated
/// out so the convergence file stays byte-deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsHistory {
    records: Vec<EpochRecord>,
}

impl MetricsHistory {
    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn push(&mut self, record: EpochRecord) {
        self.records.push(record);
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// Deterministic columns only; same seed, same bytes.
    pub fn convergence_csv(&self) -> String {
        let mut out = String::from("epoch,matched_cost_sum,matched_cost_mean,emd,pmf_error\n");
        for r in &self.records {
            let emd = r.emd.map(|v| v.to_string()).unwrap_or_default();
            let pmf = r.pmf_error.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.matched_cost_sum, r.matched_cost_mean, emd, pmf
            ));
        }
        out
    }

    /// Wall-clock seconds per epoch, kept out of the deterministic file.
    pub fn timings_csv(&self) -> String {
        let mut out = String::from("epoch,seconds\n");
        for r in &self.records {
            out.push_str(&format!("{},{}\n", r.epoch, r.seconds));
        }
        out
    }
}

/// Streams of the per-purpose rng family: the network init uses the seed's
/// default stream 0, and each epoch draws matching batches, supervised
/// shuffles, and held-out evaluations from disjoint stream blocks so
/// enabling evaluation never perturbs training.
const MATCH_STREAM_BASE: u64 = 1 << 32;
const UPDATE_STREAM_BASE: u64 = 2 << 32;
const EVAL_STREAM_BASE: u64 = 3 << 32;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run_matcher(
    kind: MatcherKind,
    targets: &SampleBatch,
    predictions: &SampleBatch,
    metric: &MetricSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Assignment> {
    match kind {
        MatcherKind::Greedy => matching::greedy_match(targets, predictions, metric, rng),
        MatcherKind::Alternating => {
            matching::alternating_match(targets, predictions, metric, rng)
        }
    }
}

/// Network inputs for a batch: the origin noise, prefixed per row with the
/// conditioning block of `z_source` when the variant is conditioned.
fn assemble_inputs(
    origin_batch: &SampleBatch,
    z_source: &SampleBatch,
    z_dim: usize,
) -> Result<SampleBatch> {
    if z_dim == 0 {
        return Ok(origin_batch.clone());
    }
    let mut z = SampleBatch::empty(z_dim);
    for row in z_source.rows() {
        z.push_row(&row[..z_dim]);
    }
    SampleBatch::concat_columns(&z, origin_batch)
}

fn check_net_dims(net: &DenseNetwork, config: &TrainConfig, target_dim: usize) -> Result<()> {
    let expected_in = config.z_dim() + config.origin.dim;
    if net.input_dim() != expected_in || net.output_dim() != target_dim {
        return Err(Error::DimensionMismatch(format!(
            "network maps {} -> {}, config requires {} -> {}",
            net.input_dim(),
            net.output_dim(),
            expected_in,
            target_dim
        )));
    }
    Ok(())
}

/// Draws the epoch's batches, maps the origin through the network, and
/// builds the correspondence. Exposed so run artifacts (and tests) can
/// recreate any epoch's matching from `(config, epoch)` alone.
pub fn sample_and_match(
    net: &DenseNetwork,
    config: &TrainConfig,
    source: &(dyn TargetSource + Send + Sync),
    epoch: usize,
) -> Result<(SampleBatch, SampleBatch, Assignment)> {
    check_net_dims(net, config, source.dim())?;
    let mut rng = stream_rng(config.seed, MATCH_STREAM_BASE | epoch as u64);
    let origin_batch = config.origin.sample(config.matching_batch, &mut rng)?;
    let target_batch = source.sample(config.matching_batch, &mut rng);
    let inputs = assemble_inputs(&origin_batch, &target_batch, config.z_dim())?;
    let predictions = net.predict(&inputs)?;
    let assignment = run_matcher(
        config.matcher,
        &target_batch,
        &predictions,
        &config.metric,
        &mut rng,
    )?;
    Ok((origin_batch, target_batch, assignment))
}

/// Sum of `d(target_i, f(input_i))` over a pair set.
pub fn pair_loss(net: &DenseNetwork, pairs: &OrderedPairs, metric: &MetricSpec) -> Result<f64> {
    let predictions = net.predict(&pairs.inputs)?;
    let mut total = 0.0;
    for i in 0..predictions.count() {
        total += metric.distance(pairs.targets.row(i), predictions.row(i))?;
    }
    Ok(total)
}

/// Minibatch regression of the network onto the ordered pairs: per-example
/// distance gradients are clipped to ±`clip_bound` per dimension before
/// backpropagation, then Adam-applied per minibatch.
pub fn supervised_update(
    net: &mut DenseNetwork,
    adam: &mut AdamState,
    pairs: &OrderedPairs,
    metric: &MetricSpec,
    clip_bound: f64,
    adam_config: &AdamConfig,
    minibatch: usize,
    passes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let n = pairs.inputs.count();
    if n == 0 || minibatch == 0 {
        return Err(Error::InvalidInput("nothing to train on".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..passes {
        order.shuffle(rng);
        for chunk in order.chunks(minibatch) {
            let mut mb_inputs = SampleBatch::empty(pairs.inputs.dim());
            let mut mb_targets = SampleBatch::empty(pairs.targets.dim());
            for &i in chunk {
                mb_inputs.push_row(pairs.inputs.row(i));
                mb_targets.push_row(pairs.targets.row(i));
            }
            let (predictions, cache) = net.forward(&mb_inputs)?;
            let mut output_grad = SampleBatch::zeros(chunk.len(), predictions.dim());
            for r in 0..chunk.len() {
                let g = metric.gradient(mb_targets.row(r), predictions.row(r))?;
                let clipped = nn::clip_output_gradient(&g, clip_bound);
                output_grad.row_mut(r).copy_from_slice(&clipped);
            }
            let grads = net.backward(&cache, &output_grad)?;
            adam.step(net, &grads, adam_config)?;
        }
    }
    Ok(())
}

/// One full iteration: match, record the pre-update cost, update, then run
/// any held-out evaluations on the updated network.
pub fn train_epoch(
    net: &mut DenseNetwork,
    adam: &mut AdamState,
    config: &TrainConfig,
    source: &(dyn TargetSource + Send + Sync),
    epoch: usize,
) -> Result<EpochRecord> {
    let started = Instant::now();
    let (origin_batch, target_batch, assignment) = sample_and_match(net, config, source, epoch)?;
    let matched_cost_sum = assignment.total_cost();
    let matched_cost_mean = matched_cost_sum / assignment.len() as f64;

    let pairs = ordered_pairs(&origin_batch, &target_batch, &assignment, config.z_dim())?;
    // The matcher consumed an unknown amount of the epoch stream, so the
    // supervised shuffles get their own deterministic stream.
    let mut update_rng = stream_rng(config.seed, UPDATE_STREAM_BASE | epoch as u64);
    supervised_update(
        net,
        adam,
        &pairs,
        &config.metric,
        config.clip_bound,
        &config.adam,
        config.supervised_minibatch,
        config.supervised_passes_per_epoch,
        &mut update_rng,
    )?;

    let mut eval_rng = stream_rng(config.seed, EVAL_STREAM_BASE | epoch as u64);
    let emd = if config.emd_sample_size > 0 {
        Some(held_out_emd(net, config, source, config.emd_sample_size, &mut eval_rng)?)
    } else {
        None
    };
    let pmf_error_value = if config.pmf_eval_samples > 0 {
        let probabilities = source.category_probabilities().ok_or_else(|| {
            Error::InvalidConfig("pmf evaluation needs a categorical target".into())
        })?;
        let generated = generate(
            net,
            &config.origin,
            config.z_dim(),
            config.pmf_eval_samples,
            None,
            &mut eval_rng,
        )?;
        Some(pmf_error(&argmax_labels(&generated), probabilities)?)
    } else {
        None
    };

    Ok(EpochRecord {
        epoch,
        matched_cost_sum,
        matched_cost_mean,
        emd,
        pmf_error: pmf_error_value,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Exact EMD between fresh target samples and generations of the current
/// network. Conditioned nets are driven with the held-out targets' own
/// conditioning values.
pub fn held_out_emd(
    net: &DenseNetwork,
    config: &TrainConfig,
    source: &(dyn TargetSource + Send + Sync),
    sample_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let target_batch = source.sample(sample_size, rng);
    let z_dim = config.z_dim();
    let conditioning = if z_dim > 0 {
        let mut z = SampleBatch::empty(z_dim);
        for row in target_batch.rows() {
            z.push_row(&row[..z_dim]);
        }
        Some(z)
    } else {
        None
    };
    let generated = generate(
        net,
        &config.origin,
        z_dim,
        sample_size,
        conditioning.as_ref(),
        rng,
    )?;
    matching::empirical_emd(&target_batch, &generated, &config.metric)
}

/// Runs the full epoch budget. The observer sees the updated network after
/// every epoch (for checkpointing and progress output).
pub fn train_with_observer<F>(
    config: &TrainConfig,
    mut observer: F,
) -> Result<(DenseNetwork, AdamState, MetricsHistory)>
where
    F: FnMut(&DenseNetwork, &AdamState, &EpochRecord) -> Result<()>,
{
    config.validate()?;
    let source = config.target.build()?;
    let dims = config.network_dims(source.dim())?;
    let mut net = nn::init_network(&dims, config.seed)?;
    let mut adam = AdamState::new(&net);
    let mut history = MetricsHistory::default();
    for epoch in 1..=config.epochs {
        let record = train_epoch(&mut net, &mut adam, config, source.as_ref(), epoch)?;
        observer(&net, &adam, &record)?;
        history.push(record);
    }
    Ok((net, adam, history))
}

pub fn train(config: &TrainConfig) -> Result<(DenseNetwork, MetricsHistory)> {
    let (net, _, history) = train_with_observer(config, |_, _, _| Ok(()))?;
    Ok((net, history))
}

/// Maps fresh origin noise through the network. Conditioned nets require a
/// conditioning batch (one row per requested sample) and return the full
/// `[z_hat; y_hat]` outputs; unconditioned nets must not receive one.
pub fn generate(
    net: &DenseNetwork,
    origin: &OriginSpec,
    z_dim: usize,
    count: usize,
    conditioning: Option<&SampleBatch>,
    rng: &mut dyn RngCore,
) -> Result<SampleBatch> {
    if z_dim == 0 && conditioning.is_some() {
        return Err(Error::InvalidInput(
            "conditioning values supplied to an unconditioned network".into(),
        ));
    }
    if z_dim > 0 && conditioning.is_none() {
        return Err(Error::InvalidInput(
            "a conditioned network needs conditioning values".into(),
        ));
    }
    if net.input_dim() != z_dim + origin.dim {
        return Err(Error::DimensionMismatch(format!(
            "network input dim {} does not match z_dim {} + origin dim {}",
            net.input_dim(),
            z_dim,
            origin.dim
        )));
    }
    if count == 0 {
        return Ok(SampleBatch::empty(net.output_dim()));
    }
    let noise = origin.sample(count, rng)?;
    let inputs = match conditioning {
        Some(z) => {
            if z.dim() != z_dim || z.count() != count {
                return Err(Error::DimensionMismatch(format!(
                    "conditioning batch is {}x{}, expected {}x{}",
                    z.count(),
                    z.dim(),
                    count,
                    z_dim
                )));
            }
            SampleBatch::concat_columns(z, &noise)?
        }
        None => noise,
    };
    net.predict(&inputs)
}

/// Index of the largest component per row.
pub fn argmax_labels(batch: &SampleBatch) -> Vec<usize> {
    batch
        .rows()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0)
        })
        .collect()
}

/// Mean absolute difference per category between the empirical label
/// frequencies and the true pmf.
pub fn pmf_error(labels: &[usize], probabilities: &[f64]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("pmf error of an empty sample".into()));
    }
    let k = probabilities.len();
    let mut counts = vec![0usize; k];
    for &l in labels {
        if l >= k {
            return Err(Error::InvalidInput(format!(
                "label {l} out of range for {k} categories"
            )));
        }
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    Ok(counts
        .iter()
        .zip(probabilities)
        .map(|(&c, &p)| (c as f64 / n - p).abs())
        .sum::<f64>()
        / k as f64)
}

/// Monte-Carlo reference: the mean pmf error of `sample_size`-point draws
/// from the true distribution itself, averaged over `repetitions`.
pub fn pmf_error_reference(
    probabilities: &[f64],
    sample_size: usize,
    repetitions: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let source = TargetSpec::Multinoulli {
        probabilities: probabilities.to_vec(),
    }
    .build()?;
    let mut total = 0.0;
    for _ in 0..repetitions {
        let draw = source.sample(sample_size, rng);
        total += pmf_error(&argmax_labels(&draw), probabilities)?;
    }
    Ok(total / repetitions as f64)
}
