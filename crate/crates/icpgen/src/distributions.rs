//! Samplers for the origin distribution and the target distributions of the
//! experiments, plus the MNIST IDX loader.
//!
//! Conditioned targets always lay out rows as `[z; y]` with the conditioning
//! block first; which prefix is the conditioning block is decided by the
//! metric's `z_dim`, not by the sampler.

use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, RngCore};
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::batch::SampleBatch;
use crate::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Mixed origin distribution: the first `dim/2` components are Bernoulli,
/// the rest continuous uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginSpec {
    pub dim: usize,
    #[serde(default = "default_bernoulli_p")]
    pub bernoulli_p: f64,
    #[serde(default = "default_uniform_low")]
    pub uniform_low: f64,
    #[serde(default = "default_uniform_high")]
    pub uniform_high: f64,
}

fn default_bernoulli_p() -> f64 {
    0.5
}
fn default_uniform_low() -> f64 {
    0.0
}
fn default_uniform_high() -> f64 {
    1.0
}

impl OriginSpec {
    /// The paper's default: Bernoulli(0.5) and Uniform[0,1) halves.
    pub fn mixed(dim: usize) -> Self {
        OriginSpec {
            dim,
            bernoulli_p: default_bernoulli_p(),
            uniform_low: default_uniform_low(),
            uniform_high: default_uniform_high(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "origin dim must be a positive even integer, got {}",
                self.dim
            )));
        }
        if !(0.0..=1.0).contains(&self.bernoulli_p) {
            return Err(Error::InvalidConfig(format!(
                "bernoulli_p must lie in [0, 1], got {}",
                self.bernoulli_p
            )));
        }
        if !(self.uniform_low < self.uniform_high) {
            return Err(Error::InvalidConfig(format!(
                "uniform range [{}, {}) is empty",
                self.uniform_low, self.uniform_high
            )));
        }
        Ok(())
    }

    /// Draws `count` rows; dims `0..dim/2` are in {0,1}, the rest in
    /// `[uniform_low, uniform_high)`.
    pub fn sample(&self, count: usize, rng: &mut dyn RngCore) -> Result<SampleBatch> {
        self.validate()?;
        let half = self.dim / 2;
        let mut out = SampleBatch::zeros(count, self.dim);
        for r in 0..count {
            let row = out.row_mut(r);
            for v in row.iter_mut().take(half) {
                *v = if rng.gen_bool(self.bernoulli_p) { 1.0 } else { 0.0 };
            }
            for v in row.iter_mut().skip(half) {
                *v = rng.gen_range(self.uniform_low..self.uniform_high);
            }
        }
        Ok(out)
    }
}

/// Target distribution selection, serialized by `kind` tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TargetSpec {
    /// Mixture of three isotropic 2-D Gaussians with equal weights.
    #[serde(rename = "gmm3")]
    Gmm3 {
        #[serde(default = "default_gmm3_means")]
        means: [[f64; 2]; 3],
        #[serde(default = "default_gmm3_sigma")]
        sigma: f64,
    },
    /// `x ~ Uniform[x_low, x_high]`, `y = sin(x) + Normal(0, noise_sigma²)`.
    #[serde(rename = "noisy_sinusoid")]
    NoisySinusoid {
        #[serde(default = "default_sin_x_low")]
        x_low: f64,
        #[serde(default = "default_sin_x_high")]
        x_high: f64,
        #[serde(default = "default_sin_sigma")]
        noise_sigma: f64,
    },
    /// 2-D spiral `(t·cos t, t·sin t) / scale` plus isotropic noise.
    #[serde(rename = "swiss_roll")]
    SwissRoll {
        #[serde(default = "default_swiss_sigma")]
        noise_sigma: f64,
    },
    /// Categorical distribution emitting one-hot rows.
    #[serde(rename = "multinoulli")]
    Multinoulli { probabilities: Vec<f64> },
    /// MNIST from IDX files; rows are `[label; 784 pixels]`.
    #[serde(rename = "mnist")]
    Mnist {
        images_path: PathBuf,
        labels_path: PathBuf,
        /// When set, labels are scaled to [0,1] by dividing by 9.
        #[serde(default)]
        normalize_labels: bool,
    },
}

fn default_gmm3_means() -> [[f64; 2]; 3] {
    [[1.5, 1.0], [3.0, 2.0], [4.5, 3.0]]
}
fn default_gmm3_sigma() -> f64 {
    0.2
}
fn default_sin_x_low() -> f64 {
    1.0
}
fn default_sin_x_high() -> f64 {
    5.0
}
fn default_sin_sigma() -> f64 {
    0.1
}
fn default_swiss_sigma() -> f64 {
    0.05
}

pub const SWISS_ROLL_T_LOW: f64 = 1.5 * std::f64::consts::PI;
pub const SWISS_ROLL_T_HIGH: f64 = 4.5 * std::f64::consts::PI;
pub const SWISS_ROLL_SCALE: f64 = 3.0;

/// Point on the noiseless spiral at parameter `t`.
pub fn swiss_roll_point(t: f64) -> [f64; 2] {
    [
        t * t.cos() / SWISS_ROLL_SCALE,
        t * t.sin() / SWISS_ROLL_SCALE,
    ]
}

impl TargetSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            TargetSpec::Gmm3 { .. } => "gmm3",
            TargetSpec::NoisySinusoid { .. } => "noisy_sinusoid",
            TargetSpec::SwissRoll { .. } => "swiss_roll",
            TargetSpec::Multinoulli { .. } => "multinoulli",
            TargetSpec::Mnist { .. } => "mnist",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TargetSpec::Gmm3 { sigma, .. } => {
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return Err(Error::InvalidConfig(format!("gmm3 sigma {sigma} invalid")));
                }
            }
            TargetSpec::NoisySinusoid {
                x_low,
                x_high,
                noise_sigma,
            } => {
                if !(x_low < x_high) {
                    return Err(Error::InvalidConfig(format!(
                        "sinusoid x range [{x_low}, {x_high}] is empty"
                    )));
                }
                if !(noise_sigma.is_finite() && *noise_sigma >= 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "sinusoid noise_sigma {noise_sigma} invalid"
                    )));
                }
            }
            TargetSpec::SwissRoll { noise_sigma } => {
                if !(noise_sigma.is_finite() && *noise_sigma >= 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "swiss roll noise_sigma {noise_sigma} invalid"
                    )));
                }
            }
            TargetSpec::Multinoulli { probabilities } => {
                validate_probabilities(probabilities)?;
            }
            TargetSpec::Mnist { .. } => {}
        }
        Ok(())
    }

    /// Instantiates the sampler; the MNIST variant loads the files here.
    pub fn build(&self) -> Result<Box<dyn TargetSource + Send + Sync>> {
        self.validate()?;
        Ok(match self.clone() {
            TargetSpec::Gmm3 { means, sigma } => Box::new(Gmm3 { means, sigma }),
            TargetSpec::NoisySinusoid {
                x_low,
                x_high,
                noise_sigma,
            } => Box::new(NoisySinusoid {
                x_low,
                x_high,
                noise_sigma,
            }),
            TargetSpec::SwissRoll { noise_sigma } => Box::new(SwissRoll { noise_sigma }),
            TargetSpec::Multinoulli { probabilities } => Box::new(Multinoulli::new(probabilities)?),
            TargetSpec::Mnist {
                images_path,
                labels_path,
                normalize_labels,
            } => Box::new(load_mnist(&images_path, &labels_path, normalize_labels)?),
        })
    }
}

fn validate_probabilities(probabilities: &[f64]) -> Result<()> {
    if probabilities.is_empty() {
        return Err(Error::InvalidConfig("empty probability vector".into()));
    }
    if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidConfig(
            "probabilities must be finite and nonnegative".into(),
        ));
    }
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "probabilities sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// A target distribution usable by the trainer: draws batches and exposes
/// what the experiment front end needs to know about its structure.
pub trait TargetSource {
    /// Row dimension, conditioning block included.
    fn dim(&self) -> usize;

    fn sample(&self, count: usize, rng: &mut dyn RngCore) -> SampleBatch;

    /// Distinct conditioning values, when the conditioning block takes
    /// finitely many (e.g. digit labels); `None` for continuous z.
    fn discrete_conditions(&self) -> Option<Vec<f64>> {
        None
    }

    /// The true pmf for categorical targets; `None` otherwise.
    fn category_probabilities(&self) -> Option<&[f64]> {
        None
    }
}

struct Gmm3 {
    means: [[f64; 2]; 3],
    sigma: f64,
}

impl TargetSource for Gmm3 {
    fn dim(&self) -> usize {
        2
    }

    fn sample(&self, count: usize, rng: &mut dyn RngCore) -> SampleBatch {
        let normal = Normal::new(0.0, self.sigma).expect("validated sigma");
        let mut out = SampleBatch::zeros(count, 2);
        for r in 0..count {
            let mean = self.means[rng.gen_range(0..3)];
            let row = out.row_mut(r);
            row[0] = mean[0] + normal.sample(rng);
            row[1] = mean[1] + normal.sample(rng);
        }
        out
    }
}

struct NoisySinusoid {
    x_low: f64,
    x_high: f64,
    noise_sigma: f64,
}

impl TargetSource for NoisySinusoid {
    fn dim(&self) -> usize {
        2
    }

    fn sample(&self, count: usize, rng: &mut dyn RngCore) -> SampleBatch {
        let normal = Normal::new(0.0, self.noise_sigma).expect("validated sigma");
        let mut out = SampleBatch::zeros(count, 2);
        for r in 0..count {
            let x = rng.gen_range(self.x_low..=self.x_high);
            let row = out.row_mut(r);
            row[0] = x;
            row[1] = x.sin() + normal.sample(rng);
        }
        out
    }
}

struct SwissRoll {
    noise_sigma: f64,
}

impl TargetSource for SwissRoll {
    fn dim(&self) -> usize {
        2
    }

    fn sample(&self, count: usize, rng: &mut dyn RngCore) -> SampleBatch {
        let normal = Normal::new(0.0, self.noise_sigma).expect("validated sigma");
        let mut out = SampleBatch::zeros(count, 2);
        for r in 0..count {
            let t = rng.gen_range(SWISS_ROLL_T_LOW..SWISS_ROLL_T_HIGH);
            let p = swiss_roll_point(t);
            let row = out.row_mut(r);
            row[0] = p[0] + normal.sample(rng);
            row[1] = p[1] + normal.sample(rng);
        }
        out
    }
}

struct Multinoulli {
    probabilities: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl Multinoulli {
    fn new(probabilities: Vec<f64>) -> Result<Self> {
        validate_probabilities(&probabilities)?;
        let index = WeightedIndex::new(&probabilities)
            .map_err(|e| Error::InvalidConfig(format!("bad probabilities: {e}")))?;
        Ok(Multinoulli {
            probabilities,
            index,
        })
    }
}

impl TargetSource for Multinoulli {
    fn dim(&self) -> usize {
        self.probabilities.len()
    }

    fn sample(&self, count: usize, rng: &mut dyn RngCore) -> SampleBatch {
        let k = self.probabilities.len();
        let mut out = SampleBatch::zeros(count, k);
        for r in 0..count {
            out.row_mut(r)[self.index.sample(rng)] = 1.0;
        }
        out
    }

    fn category_probabilities(&self) -> Option<&[f64]> {
        Some(&self.probabilities)
    }
}

/// An in-memory MNIST-style dataset; rows are `[label; pixels]`.
#[derive(Debug, Clone)]
pub struct MnistDataset {
    rows: SampleBatch,
    labels: Vec<u8>,
    image_dim: usize,
    label_divisor: f64,
}

impl MnistDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_dim(&self) -> usize {
        self.image_dim
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Full `[z; y]` row for record `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        self.rows.row(i)
    }
}

impl TargetSource for MnistDataset {
    fn dim(&self) -> usize {
        1 + self.image_dim
    }

    /// Draws rows uniformly with replacement.
    fn sample(&self, count: usize, rng: &mut dyn RngCore) -> SampleBatch {
        let mut out = SampleBatch::empty(self.dim());
        for _ in 0..count {
            out.push_row(self.rows.row(rng.gen_range(0..self.len())));
        }
        out
    }

    fn discrete_conditions(&self) -> Option<Vec<f64>> {
        let mut seen = [false; 256];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        Some(
            seen.iter()
                .enumerate()
                .filter(|(_, s)| **s)
                .map(|(l, _)| l as f64 / self.label_divisor)
                .collect(),
        )
    }
}

fn read_be_u32(path: &Path, bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::IdxTruncated {
            path: path.to_path_buf(),
            needed: end,
            found: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parses the big-endian IDX pair used by MNIST. Pixels are scaled by 1/255
/// into [0,1]; labels become the scalar conditioning value z (divided by 9
/// when `normalize_labels` is set).
pub fn load_mnist(
    images_path: &Path,
    labels_path: &Path,
    normalize_labels: bool,
) -> Result<MnistDataset> {
    let image_bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;

    let magic = read_be_u32(images_path, &image_bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::IdxMagic {
            path: images_path.to_path_buf(),
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = read_be_u32(images_path, &image_bytes, 4)? as usize;
    let rows = read_be_u32(images_path, &image_bytes, 8)? as usize;
    let cols = read_be_u32(images_path, &image_bytes, 12)? as usize;
    let image_dim = rows * cols;
    let needed = 16 + count * image_dim;
    if image_bytes.len() < needed {
        return Err(Error::IdxTruncated {
            path: images_path.to_path_buf(),
            needed,
            found: image_bytes.len(),
        });
    }

    let magic = read_be_u32(labels_path, &label_bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::IdxMagic {
            path: labels_path.to_path_buf(),
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let label_count = read_be_u32(labels_path, &label_bytes, 4)? as usize;
    if label_bytes.len() < 8 + label_count {
        return Err(Error::IdxTruncated {
            path: labels_path.to_path_buf(),
            needed: 8 + label_count,
            found: label_bytes.len(),
        });
    }
    if count != label_count {
        return Err(Error::IdxCountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let label_divisor = if normalize_labels { 9.0 } else { 1.0 };
    let labels = label_bytes[8..8 + count].to_vec();
    let mut rows_batch = SampleBatch::zeros(count, 1 + image_dim);
    for i in 0..count {
        let row = rows_batch.row_mut(i);
        row[0] = labels[i] as f64 / label_divisor;
        let pixels = &image_bytes[16 + i * image_dim..16 + (i + 1) * image_dim];
        for (v, &px) in row[1..].iter_mut().zip(pixels) {
            *v = px as f64 / 255.0;
        }
    }
    Ok(MnistDataset {
        rows: rows_batch,
        labels,
        image_dim,
        label_divisor,
    })
}
