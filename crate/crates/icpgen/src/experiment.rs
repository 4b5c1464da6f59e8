//! Experiment plumbing behind the `icpgen` binary: presets for the paper's
//! experiments, run directories with reproducible artifacts, sample export,
//! and EMD / pmf evaluation of trained checkpoints.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::batch::SampleBatch;
use crate::distance::MetricSpec;
use crate::distributions::{OriginSpec, TargetSpec};
use crate::matching::{self, Assignment};
use crate::nn::{AdamConfig, Checkpoint, DenseNetwork};
use crate::trainer::{
    self, argmax_labels, generate, stream_rng, MatcherKind, MetricsHistory, TrainConfig,
};
use crate::{Error, Result};

// Rng stream ids disjoint from the trainer's per-epoch blocks.
const EXPORT_STREAM: u64 = 4 << 32;
const SAMPLE_STREAM: u64 = 5 << 32;
const EVAL_STREAM: u64 = 6 << 32;

/// A training run plus its artifact options; serialized as the resolved
/// config snapshot inside every run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    /// Write a checkpoint every K epochs (0 = final checkpoint only).
    #[serde(default)]
    pub checkpoint_every: usize,
    /// Export this many fresh target samples as target_sample.csv (0 = skip).
    #[serde(default)]
    pub export_target_sample: usize,
    /// Export the post-training matching as final_assignment.csv.
    #[serde(default)]
    pub export_final_assignment: bool,
}

pub const PRESET_NAMES: [&str; 8] = [
    "gmm3",
    "gmm3-conditioned",
    "sinusoid-conditioned",
    "sinusoid-mixed2d",
    "swissroll",
    "mnist-conditioned",
    "mnist-smallbatch",
    "multinoulli",
];

/// One-line description shown by `icpgen presets`.
pub fn preset_summary(name: &str) -> &'static str {
    match name {
        "gmm3" => "three 2-D Gaussians, greedy matching, batch 500",
        "gmm3-conditioned" => "three Gaussians conditioned on the x coordinate",
        "sinusoid-conditioned" => "noisy sinusoid conditioned on x",
        "sinusoid-mixed2d" => "noisy sinusoid from a 2-D mixed origin",
        "swissroll" => "swiss roll from a 2-D mixed origin",
        "mnist-conditioned" => "MNIST conditioned on the digit label, batch 10000",
        "mnist-smallbatch" => "MNIST conditioned, desk-scale batch 2000",
        "multinoulli" => "5-category multinoulli with softmax cross-entropy",
        _ => "",
    }
}

/// Builds the named preset; seeds default to 1 and are meant to be
/// overridden from the command line.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = |metric: MetricSpec, origin_dim: usize, target: TargetSpec| TrainConfig {
        matcher: MatcherKind::Greedy,
        metric,
        origin: OriginSpec::mixed(origin_dim),
        target,
        matching_batch: 500,
        supervised_minibatch: 100,
        epochs: 50,
        hidden_dims: vec![50, 50, 50],
        clip_bound: 0.1,
        adam: AdamConfig::default(),
        seed: 1,
        supervised_passes_per_epoch: 1,
        emd_sample_size: 0,
        pmf_eval_samples: 0,
    };
    let gmm3 = TargetSpec::Gmm3 {
        means: [[1.5, 1.0], [3.0, 2.0], [4.5, 3.0]],
        sigma: 0.2,
    };
    let sinusoid = TargetSpec::NoisySinusoid {
        x_low: 1.0,
        x_high: 5.0,
        noise_sigma: 0.1,
    };
    let mnist = TargetSpec::Mnist {
        images_path: PathBuf::from("data/mnist/train-images-idx3-ubyte"),
        labels_path: PathBuf::from("data/mnist/train-labels-idx1-ubyte"),
        normalize_labels: false,
    };

    let mut config = ExperimentConfig {
        train: match name {
            "gmm3" => {
                let mut t = base(MetricSpec::SquaredEuclidean, 6, gmm3);
                t.emd_sample_size = 500;
                t
            }
            "gmm3-conditioned" => {
                let mut t = base(MetricSpec::Conditioned { z_dim: 1 }, 6, gmm3);
                t.epochs = 100;
                t.emd_sample_size = 500;
                t
            }
            "sinusoid-conditioned" => {
                let mut t = base(MetricSpec::Conditioned { z_dim: 1 }, 6, sinusoid);
                t.epochs = 100;
                t.emd_sample_size = 500;
                t
            }
            "sinusoid-mixed2d" => {
                let mut t = base(MetricSpec::SquaredEuclidean, 2, sinusoid);
                t.epochs = 100;
                t.emd_sample_size = 500;
                t
            }
            "swissroll" => {
                let mut t = base(
                    MetricSpec::SquaredEuclidean,
                    2,
                    TargetSpec::SwissRoll { noise_sigma: 0.05 },
                );
                // The spiral spans +-4.7 per coordinate from a 2-D origin;
                // a binding 0.1 clip and batch 500 both stall the fit.
                t.matching_batch = 1000;
                t.supervised_minibatch = 100;
                t.clip_bound = 1.0;
                t.epochs = 400;
                t.emd_sample_size = 500;
                t
            }
            "mnist-conditioned" => {
                let mut t = base(MetricSpec::Conditioned { z_dim: 1 }, 20, mnist);
                t.matching_batch = 10_000;
                t.hidden_dims = vec![300, 300, 300];
                t.epochs = 100;
                t
            }
            "mnist-smallbatch" => {
                let mut t = base(MetricSpec::Conditioned { z_dim: 1 }, 20, mnist);
                t.matching_batch = 2_000;
                t.hidden_dims = vec![300, 300, 300];
                t.epochs = 20;
                t
            }
            "multinoulli" => {
                let mut t = base(
                    MetricSpec::SoftmaxCrossEntropy,
                    20,
                    TargetSpec::Multinoulli {
                        probabilities: vec![0.3, 0.25, 0.2, 0.15, 0.1],
                    },
                );
                t.epochs = 200;
                t.pmf_eval_samples = 1000;
                // Softmax - one-hot entries never exceed 1, so this clip is a
                // pure safety net. A binding clip (0.1) distorts the relative
                // coordinate weights of the cross-entropy gradient enough to
                // destabilize categorical training.
                t.clip_bound = 1.0;
                t
            }
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown preset {name:?}; known presets: {}",
                    PRESET_NAMES.join(", ")
                )))
            }
        },
        checkpoint_every: 0,
        export_target_sample: 0,
        export_final_assignment: false,
    };
    if name == "mnist-conditioned" {
        config.checkpoint_every = 10;
    }
    Ok(config)
}

/// Reads an experiment config, mapping any failure to a config error so the
/// CLI exits with status 2 and a path-bearing diagnostic.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

/// Caps the global worker pool from ICPGEN_THREADS when the variable is set.
pub fn init_thread_pool_from_env() -> Result<()> {
    match std::env::var("ICPGEN_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                Error::InvalidConfig(format!("ICPGEN_THREADS must be a positive integer, got {raw:?}"))
            })?;
            if n == 0 {
                return Err(Error::InvalidConfig(
                    "ICPGEN_THREADS must be a positive integer, got 0".into(),
                ));
            }
            // A second initialization (e.g. in tests) keeps the first pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(())
        }
    }
}

/// Paths of everything a training run wrote.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub config_json: PathBuf,
    pub convergence_csv: PathBuf,
    pub timings_csv: PathBuf,
    pub final_checkpoint: PathBuf,
    pub history: MetricsHistory,
}

fn refuse_existing(paths: &[&Path], overwrite: bool) -> Result<()> {
    if overwrite {
        return Ok(());
    }
    for p in paths {
        if p.exists() {
            return Err(Error::InvalidConfig(format!(
                "{} already exists; pass --overwrite to replace run artifacts",
                p.display()
            )));
        }
    }
    Ok(())
}

/// Trains per config and writes the run directory: resolved config snapshot,
/// convergence.csv (deterministic), timings.csv (wall clock), checkpoints,
/// and optional exports.
pub fn run_train(config: &ExperimentConfig, out_dir: &Path, overwrite: bool) -> Result<RunArtifacts> {
    config.train.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let config_json = out_dir.join("config.json");
    let convergence_csv = out_dir.join("convergence.csv");
    let timings_csv = out_dir.join("timings.csv");
    let final_checkpoint = out_dir.join("checkpoint.json");
    refuse_existing(
        &[&config_json, &convergence_csv, &timings_csv, &final_checkpoint],
        overwrite,
    )?;

    let snapshot = serde_json::to_string_pretty(config)
        .map_err(|e| Error::json(&config_json, e))?;
    fs::write(&config_json, snapshot).map_err(|e| Error::io(&config_json, e))?;

    let epochs = config.train.epochs;
    let every = config.checkpoint_every;
    let seed = config.train.seed;
    let (net, adam, history) = trainer::train_with_observer(&config.train, |net, adam, record| {
        eprintln!(
            "epoch {:>4}/{} matched_cost_mean={:.6}{}",
            record.epoch,
            epochs,
            record.matched_cost_mean,
            match (record.emd, record.pmf_error) {
                (Some(e), _) => format!(" emd={e:.6}"),
                (_, Some(p)) => format!(" pmf_error={p:.6}"),
                _ => String::new(),
            }
        );
        if every > 0 && record.epoch % every == 0 && record.epoch != epochs {
            let path = out_dir.join(format!("checkpoint_epoch_{:05}.json", record.epoch));
            Checkpoint::new(net, adam, seed, record.epoch).save(&path)?;
        }
        Ok(())
    })?;

    Checkpoint::new(&net, &adam, seed, epochs).save(&final_checkpoint)?;
    fs::write(&convergence_csv, history.convergence_csv())
        .map_err(|e| Error::io(&convergence_csv, e))?;
    fs::write(&timings_csv, history.timings_csv()).map_err(|e| Error::io(&timings_csv, e))?;

    if config.export_target_sample > 0 {
        let source = config.train.target.build()?;
        let mut rng = stream_rng(seed, EXPORT_STREAM);
        let sample = source.sample(config.export_target_sample, &mut rng);
        let header: Vec<String> = (0..sample.dim()).map(|i| format!("t{i}")).collect();
        let path = out_dir.join("target_sample.csv");
        write_batch_csv(&path, &header, &sample, None)?;
    }
    if config.export_final_assignment {
        let source = config.train.target.build()?;
        let (_, _, assignment) =
            trainer::sample_and_match(&net, &config.train, source.as_ref(), epochs + 1)?;
        write_assignment_csv(&out_dir.join("final_assignment.csv"), &assignment)?;
    }

    Ok(RunArtifacts {
        out_dir: out_dir.to_path_buf(),
        config_json,
        convergence_csv,
        timings_csv,
        final_checkpoint,
        history,
    })
}

/// How `icpgen sample` is told which conditioning values to use.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditioningSpec {
    /// `each:K`: K samples per discrete condition value of the target.
    Each(usize),
    /// CSV file with one column per conditioning dimension.
    File(PathBuf),
}

impl ConditioningSpec {
    pub fn parse(raw: &str) -> Result<Self> {
        if let Some(k) = raw.strip_prefix("each:") {
            let k: usize = k.parse().map_err(|_| {
                Error::InvalidConfig(format!("bad conditioning spec {raw:?}; expected each:K"))
            })?;
            if k == 0 {
                return Err(Error::InvalidConfig("each:K needs K >= 1".into()));
            }
            Ok(ConditioningSpec::Each(k))
        } else {
            Ok(ConditioningSpec::File(PathBuf::from(raw)))
        }
    }
}

fn load_checkpoint_network(path: &Path) -> Result<DenseNetwork> {
    let checkpoint = Checkpoint::load(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot load checkpoint: {e}")))?;
    let (net, _) = checkpoint.into_network()?;
    Ok(net)
}

fn config_next_to(checkpoint_path: &Path) -> PathBuf {
    checkpoint_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join("config.json")
}

fn check_net_against_config(net: &DenseNetwork, config: &TrainConfig) -> Result<()> {
    let expected = config.z_dim() + config.origin.dim;
    if net.input_dim() != expected {
        return Err(Error::CheckpointMismatch(format!(
            "checkpoint expects inputs of dim {}, config implies {}",
            net.input_dim(),
            expected
        )));
    }
    Ok(())
}

/// Builds the conditioning batch for a sample request. Returns the batch and
/// the effective row count.
fn resolve_conditioning(
    spec: Option<&ConditioningSpec>,
    config: &TrainConfig,
    count: Option<usize>,
) -> Result<(Option<SampleBatch>, usize)> {
    let z_dim = config.z_dim();
    match (spec, z_dim) {
        (None, 0) => Ok((None, count.unwrap_or(0))),
        (Some(_), 0) => Err(Error::InvalidConfig(
            "this checkpoint is unconditioned; drop --conditioning".into(),
        )),
        (None, _) => Err(Error::InvalidConfig(
            "this checkpoint is conditioned; pass --conditioning each:K or a CSV file".into(),
        )),
        (Some(ConditioningSpec::Each(k)), z) => {
            if z != 1 {
                return Err(Error::InvalidConfig(
                    "each:K conditioning needs a scalar conditioning variable".into(),
                ));
            }
            let source = config.target.build()?;
            let values = source.discrete_conditions().ok_or_else(|| {
                Error::InvalidConfig(
                    "each:K needs a target with discrete conditioning values".into(),
                )
            })?;
            let mut z_batch = SampleBatch::empty(1);
            for v in values {
                for _ in 0..*k {
                    z_batch.push_row(&[v]);
                }
            }
            let n = z_batch.count();
            if let Some(c) = count {
                if c != n {
                    return Err(Error::InvalidConfig(format!(
                        "--count {c} conflicts with each:{k} over {} condition values ({n} rows); drop --count",
                        n / *k
                    )));
                }
            }
            Ok((Some(z_batch), n))
        }
        (Some(ConditioningSpec::File(path)), z) => {
            let (_, batch) = read_batch_csv(path)?;
            if batch.dim() != z {
                return Err(Error::InvalidConfig(format!(
                    "conditioning file {} has {} columns, the checkpoint needs {}",
                    path.display(),
                    batch.dim(),
                    z
                )));
            }
            let n = batch.count();
            if let Some(c) = count {
                if c != n {
                    return Err(Error::InvalidConfig(format!(
                        "--count {c} conflicts with the {n}-row conditioning file; drop --count"
                    )));
                }
            }
            Ok((Some(batch), n))
        }
    }
}

/// Generates samples from a checkpoint and writes them as CSV. Conditioned
/// outputs are `[z; y]` with `z*` column names; categorical outputs get an
/// extra argmax `label` column.
pub fn run_sample(
    checkpoint_path: &Path,
    config_path: Option<&Path>,
    count: Option<usize>,
    conditioning: Option<&ConditioningSpec>,
    out_csv: &Path,
    seed: Option<u64>,
    overwrite: bool,
) -> Result<()> {
    let config_path = config_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config_next_to(checkpoint_path));
    let config = load_config(&config_path)?;
    let net = load_checkpoint_network(checkpoint_path)?;
    check_net_against_config(&net, &config.train)?;
    refuse_existing(&[out_csv], overwrite)?;

    let (z_batch, n) = resolve_conditioning(conditioning, &config.train, count)?;
    let z_dim = config.train.z_dim();
    let mut rng = stream_rng(seed.unwrap_or(config.train.seed), SAMPLE_STREAM);
    let generated = generate(&net, &config.train.origin, z_dim, n, z_batch.as_ref(), &mut rng)?;

    let mut header: Vec<String> = Vec::with_capacity(generated.dim() + 1);
    for i in 0..z_dim {
        header.push(format!("z{i}"));
    }
    for i in 0..generated.dim() - z_dim {
        header.push(format!("y{i}"));
    }
    let labels = if matches!(config.train.metric, MetricSpec::SoftmaxCrossEntropy) {
        header.push("label".into());
        Some(argmax_labels(&generated))
    } else {
        None
    };
    write_batch_csv(out_csv, &header, &generated, labels.as_deref())
}

/// What `icpgen eval` prints.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric_tag: &'static str,
    pub sample_size: usize,
    pub exact: bool,
    pub emd: f64,
    /// `(pmf_error, monte_carlo_reference)` for categorical targets.
    pub pmf: Option<(f64, f64)>,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "metric: {}", self.metric_tag)?;
        if self.exact {
            writeln!(f, "emd (exact hungarian, n={}): {}", self.sample_size, self.emd)?;
        } else {
            writeln!(
                f,
                "emd (greedy upper bound, n={}): {}",
                self.sample_size, self.emd
            )?;
        }
        if let Some((err, reference)) = self.pmf {
            writeln!(f, "pmf_error (n={}): {}", self.sample_size, err)?;
            writeln!(
                f,
                "pmf_error_reference (true-draw mean, {} reps): {}",
                PMF_REFERENCE_REPS, reference
            )?;
        }
        Ok(())
    }
}

pub const EXACT_EMD_LIMIT: usize = 2000;
pub const PMF_REFERENCE_REPS: usize = 10_000;

/// Compares generations of a checkpoint against fresh target samples:
/// exact Hungarian EMD up to `EXACT_EMD_LIMIT`, greedy upper bound beyond
/// that (opt-in), plus pmf error and its Monte-Carlo reference for
/// categorical targets.
pub fn run_eval(
    checkpoint_path: &Path,
    config_path: Option<&Path>,
    sample_size: usize,
    approx: bool,
    seed: Option<u64>,
) -> Result<EvalReport> {
    if sample_size == 0 {
        return Err(Error::InvalidConfig("sample size must be positive".into()));
    }
    if sample_size > EXACT_EMD_LIMIT && !approx {
        return Err(Error::InvalidConfig(format!(
            "exact EMD above n={EXACT_EMD_LIMIT} is O(n^3); pass --approx for the greedy upper bound"
        )));
    }
    let config_path = config_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config_next_to(checkpoint_path));
    let config = load_config(&config_path)?;
    let net = load_checkpoint_network(checkpoint_path)?;
    check_net_against_config(&net, &config.train)?;

    let train = &config.train;
    let source = train.target.build()?;
    let mut rng = stream_rng(seed.unwrap_or(train.seed), EVAL_STREAM);
    let target_batch = source.sample(sample_size, &mut rng);
    let z_dim = train.z_dim();
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
        &net,
        &train.origin,
        z_dim,
        sample_size,
        conditioning.as_ref(),
        &mut rng,
    )?;

    let emd = if sample_size <= EXACT_EMD_LIMIT {
        matching::empirical_emd(&target_batch, &generated, &train.metric)?
    } else {
        let assignment =
            matching::greedy_match(&target_batch, &generated, &train.metric, &mut rng)?;
        assignment.total_cost() / sample_size as f64
    };

    let pmf = match source.category_probabilities() {
        Some(probabilities) => {
            let err = trainer::pmf_error(&argmax_labels(&generated), probabilities)?;
            let reference = trainer::pmf_error_reference(
                probabilities,
                sample_size,
                PMF_REFERENCE_REPS,
                &mut rng,
            )?;
            Some((err, reference))
        }
        None => None,
    };

    Ok(EvalReport {
        metric_tag: train.metric.tag(),
        sample_size,
        exact: sample_size <= EXACT_EMD_LIMIT,
        emd,
        pmf,
    })
}

/// Writes a batch as CSV: comma separator, one header row, floats in the
/// shortest round-trip form. An optional integer label column is appended.
pub fn write_batch_csv(
    path: &Path,
    header: &[String],
    batch: &SampleBatch,
    labels: Option<&[usize]>,
) -> Result<()> {
    let expected = batch.dim() + usize::from(labels.is_some());
    if header.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "{} header fields for {} columns",
            header.len(),
            expected
        )));
    }
    if let Some(l) = labels {
        if l.len() != batch.count() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} rows",
                l.len(),
                batch.count()
            )));
        }
    }
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in batch.rows().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            fields.push(l[i].to_string());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a CSV written by [`write_batch_csv`] (or any numeric CSV with a
/// single header row) back into a batch.
pub fn read_batch_csv(path: &Path) -> Result<(Vec<String>, SampleBatch)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{}: empty CSV", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut batch = SampleBatch::empty(header.len());
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(header.len());
        for field in line.split(',') {
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "{}:{}: cannot parse {field:?} as a number",
                    path.display(),
                    lineno + 2
                ))
            })?;
            row.push(v);
        }
        if row.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "{}:{}: {} fields, header has {}",
                path.display(),
                lineno + 2,
                row.len(),
                header.len()
            )));
        }
        batch.push_row(&row);
    }
    Ok((header, batch))
}

/// Assignment rows as `target_index,prediction_index,distance`.
pub fn write_assignment_csv(path: &Path, assignment: &Assignment) -> Result<()> {
    let mut out = String::from("target_index,prediction_index,distance\n");
    for (i, j, d) in assignment.pairs() {
        out.push_str(&format!("{i},{j},{d}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
    use std::io::Write as _;

    fn tiny_gmm3() -> ExperimentConfig {
        let mut config = preset("gmm3").unwrap();
        config.train.matching_batch = 60;
        config.train.supervised_minibatch = 20;
        config.train.epochs = 3;
        config.train.hidden_dims = vec![16, 16];
        config.train.emd_sample_size = 30;
        config
    }

    #[test]
    fn all_presets_build_and_validate() {
        for name in PRESET_NAMES {
            let config = preset(name).unwrap();
            config.train.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!preset_summary(name).is_empty());
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn preset_scales_follow_the_experiments() {
        let gmm3 = preset("gmm3").unwrap().train;
        assert_eq!(gmm3.matching_batch, 500);
        assert_eq!(gmm3.supervised_minibatch, 100);
        assert_eq!(gmm3.origin.dim, 6);
        assert_eq!(gmm3.hidden_dims, vec![50, 50, 50]);

        let mnist = preset("mnist-conditioned").unwrap().train;
        assert_eq!(mnist.matching_batch, 10_000);
        assert_eq!(mnist.origin.dim, 20);
        assert_eq!(mnist.hidden_dims, vec![300, 300, 300]);
        assert_eq!(mnist.metric, MetricSpec::Conditioned { z_dim: 1 });

        let swiss = preset("swissroll").unwrap().train;
        assert_eq!(swiss.origin.dim, 2);
        let mixed = preset("sinusoid-mixed2d").unwrap().train;
        assert_eq!(mixed.origin.dim, 2);
    }

    #[test]
    fn run_train_writes_all_artifacts_and_respects_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let mut config = tiny_gmm3();
        config.checkpoint_every = 2;
        config.export_target_sample = 25;
        config.export_final_assignment = true;

        let artifacts = run_train(&config, &out, false).unwrap();
        assert!(artifacts.config_json.exists());
        assert!(artifacts.convergence_csv.exists());
        assert!(artifacts.timings_csv.exists());
        assert!(artifacts.final_checkpoint.exists());
        assert!(out.join("checkpoint_epoch_00002.json").exists());
        assert!(out.join("target_sample.csv").exists());
        assert!(out.join("final_assignment.csv").exists());
        assert_eq!(artifacts.history.records().len(), 3);

        // The snapshot reproduces the resolved config.
        let reloaded = load_config(&artifacts.config_json).unwrap();
        assert_eq!(reloaded, config);

        // No silent overwrite.
        let err = run_train(&config, &out, false).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
        run_train(&config, &out, true).unwrap();
    }

    #[test]
    fn rerunning_a_config_reproduces_convergence_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_gmm3();
        let a = run_train(&config, &dir.path().join("a"), false).unwrap();
        let b = run_train(&config, &dir.path().join("b"), false).unwrap();
        let bytes_a = fs::read(&a.convergence_csv).unwrap();
        let bytes_b = fs::read(&b.convergence_csv).unwrap();
        assert_eq!(bytes_a, bytes_b);
        assert_ne!(bytes_a.len(), 0);
    }

    #[test]
    fn sample_command_round_trips_unconditioned() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let config = tiny_gmm3();
        let artifacts = run_train(&config, &out, false).unwrap();

        let csv = dir.path().join("samples.csv");
        run_sample(&artifacts.final_checkpoint, None, Some(5), None, &csv, None, false).unwrap();
        let (header, batch) = read_batch_csv(&csv).unwrap();
        assert_eq!(header, vec!["y0", "y1"]);
        assert_eq!((batch.count(), batch.dim()), (5, 2));

        // count 0 -> header-only file.
        let empty = dir.path().join("empty.csv");
        run_sample(&artifacts.final_checkpoint, None, Some(0), None, &empty, None, false).unwrap();
        assert_eq!(fs::read_to_string(&empty).unwrap(), "y0,y1\n");

        // Conditioning an unconditioned checkpoint is a config error.
        let spec = ConditioningSpec::parse("each:2").unwrap();
        let err = run_sample(
            &artifacts.final_checkpoint,
            None,
            None,
            Some(&spec),
            &dir.path().join("x.csv"),
            None,
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    fn write_tiny_mnist(dir: &Path) -> (PathBuf, PathBuf) {
        let images = dir.join("img.idx");
        let labels = dir.join("lab.idx");
        let mut f = fs::File::create(&images).unwrap();
        f.write_all(&IDX_IMAGES_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&4u32.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        // Label 0 images are dark, label 1 images bright.
        f.write_all(&[10, 20, 30, 40]).unwrap();
        f.write_all(&[240, 230, 220, 210]).unwrap();
        f.write_all(&[15, 25, 35, 45]).unwrap();
        f.write_all(&[245, 235, 225, 215]).unwrap();
        let mut f = fs::File::create(&labels).unwrap();
        f.write_all(&IDX_LABELS_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&4u32.to_be_bytes()).unwrap();
        f.write_all(&[0, 1, 0, 1]).unwrap();
        (images, labels)
    }

    #[test]
    fn conditioned_sampling_with_each_and_file_specs() {
        let dir = tempfile::tempdir().unwrap();
        let (images_path, labels_path) = write_tiny_mnist(dir.path());
        let config = ExperimentConfig {
            train: TrainConfig {
                matcher: MatcherKind::Greedy,
                metric: MetricSpec::Conditioned { z_dim: 1 },
                origin: OriginSpec::mixed(4),
                target: TargetSpec::Mnist {
                    images_path,
                    labels_path,
                    normalize_labels: false,
                },
                matching_batch: 16,
                supervised_minibatch: 8,
                epochs: 2,
                hidden_dims: vec![8],
                clip_bound: 0.1,
                adam: AdamConfig::default(),
                seed: 5,
                supervised_passes_per_epoch: 1,
                emd_sample_size: 0,
                pmf_eval_samples: 0,
            },
            checkpoint_every: 0,
            export_target_sample: 0,
            export_final_assignment: false,
        };
        let out = dir.path().join("run");
        let artifacts = run_train(&config, &out, false).unwrap();

        let csv = dir.path().join("each.csv");
        let spec = ConditioningSpec::parse("each:3").unwrap();
        run_sample(&artifacts.final_checkpoint, None, None, Some(&spec), &csv, None, false)
            .unwrap();
        let (header, batch) = read_batch_csv(&csv).unwrap();
        assert_eq!(header[0], "z0");
        assert_eq!(header.len(), 5);
        assert_eq!(batch.count(), 6, "3 per discrete label 0 and 1");

        // Sampling without conditioning must fail on a conditioned net.
        let err = run_sample(
            &artifacts.final_checkpoint,
            None,
            Some(4),
            None,
            &dir.path().join("y.csv"),
            None,
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));

        // Conditioning from a CSV file.
        let z_csv = dir.path().join("z.csv");
        fs::write(&z_csv, "z0\n0\n1\n1\n").unwrap();
        let spec = ConditioningSpec::parse(z_csv.to_str().unwrap()).unwrap();
        let out_csv = dir.path().join("file.csv");
        run_sample(&artifacts.final_checkpoint, None, None, Some(&spec), &out_csv, None, false)
            .unwrap();
        let (_, batch) = read_batch_csv(&out_csv).unwrap();
        assert_eq!(batch.count(), 3);
    }

    #[test]
    fn eval_reports_exact_and_refuses_oversize_without_approx() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let config = tiny_gmm3();
        let artifacts = run_train(&config, &out, false).unwrap();

        let report = run_eval(&artifacts.final_checkpoint, None, 50, false, None).unwrap();
        assert!(report.exact);
        assert!(report.emd.is_finite() && report.emd >= 0.0);
        assert!(report.pmf.is_none());
        assert!(report.to_string().contains("exact hungarian"));

        let err = run_eval(&artifacts.final_checkpoint, None, 2001, false, None).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));

        let report = run_eval(&artifacts.final_checkpoint, None, 2001, true, None).unwrap();
        assert!(!report.exact);
        assert!(report.to_string().contains("greedy upper bound"));
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let batch = SampleBatch::from_rows(&[
            [0.1, -2.5e-17, 3.0],
            [1.0 / 3.0, f64::MIN_POSITIVE, 12345.6789],
        ])
        .unwrap();
        let header = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        write_batch_csv(&path, &header, &batch, None).unwrap();
        let first = fs::read(&path).unwrap();
        let (h, b) = read_batch_csv(&path).unwrap();
        assert_eq!(h, header);
        assert_eq!(b, batch);
        write_batch_csv(&path, &h, &b, None).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn missing_config_error_names_the_path() {
        let err = load_config(Path::new("/definitely/missing.json")).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::InvalidConfig(_)));
        assert!(msg.contains("/definitely/missing.json"));
    }

    #[test]
    fn conditioning_spec_parses_each_and_files() {
        assert_eq!(
            ConditioningSpec::parse("each:10").unwrap(),
            ConditioningSpec::Each(10)
        );
        assert!(ConditioningSpec::parse("each:0").is_err());
        assert!(ConditioningSpec::parse("each:x").is_err());
        assert_eq!(
            ConditioningSpec::parse("z.csv").unwrap(),
            ConditioningSpec::File(PathBuf::from("z.csv"))
        );
    }

    #[test]
    fn experiment_config_json_round_trips_with_flattened_fields() {
        let config = tiny_gmm3();
        let json = serde_json::to_string(&config).unwrap();
        assert!(json.contains("\"matching_batch\":60"));
        assert!(json.contains("\"checkpoint_every\":0"));
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
    }
}
