//! Label-conditioned image generation from IDX files. If real MNIST data is
//! present under data/mnist/ it is used; otherwise the example fabricates a
//! small IDX dataset of block glyphs (label k lights a 6x6 block at grid
//! cell k) so it runs out of the box, then renders generated images per
//! label as ASCII art.
//!
//! ```text
//! cargo run --example mnist_conditioned
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use icpgen::distributions::{OriginSpec, TargetSpec};
use icpgen::nn::AdamConfig;
use icpgen::trainer::{self, stream_rng, MatcherKind};
use icpgen::{MetricSpec, SampleBatch, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIDE: usize = 28;

fn main() -> icpgen::Result<()> {
    let real = (
        PathBuf::from("data/mnist/train-images-idx3-ubyte"),
        PathBuf::from("data/mnist/train-labels-idx1-ubyte"),
    );
    let tmp = tempdir_like();
    let (images_path, labels_path) = if real.0.exists() && real.1.exists() {
        println!("using real MNIST from data/mnist/");
        real
    } else {
        println!("no data/mnist/ files found; writing synthetic block glyphs");
        write_block_glyphs(&tmp, 2000, 99).expect("write fixture");
        (tmp.join("images.idx"), tmp.join("labels.idx"))
    };

    let config = TrainConfig {
        matcher: MatcherKind::Greedy,
        metric: MetricSpec::Conditioned { z_dim: 1 },
        origin: OriginSpec::mixed(20),
        target: TargetSpec::Mnist {
            images_path,
            labels_path,
            normalize_labels: false,
        },
        matching_batch: 1000,
        supervised_minibatch: 100,
        epochs: 10,
        hidden_dims: vec![100, 100],
        clip_bound: 0.1,
        adam: AdamConfig::default(),
        seed: 5,
        supervised_passes_per_epoch: 1,
        emd_sample_size: 0,
        pmf_eval_samples: 0,
    };
    let (net, history) = trainer::train(&config)?;
    println!(
        "matched cost: epoch 1 {:.1} -> epoch {} {:.1}",
        history.records()[0].matched_cost_mean,
        config.epochs,
        history.last().unwrap().matched_cost_mean
    );

    // One generated image per label, rendered 14x14.
    let mut rng = stream_rng(config.seed, 9 << 32);
    let mut z = SampleBatch::empty(1);
    for label in 0..10 {
        z.push_row(&[label as f64]);
    }
    let generated = trainer::generate(&net, &config.origin, 1, 10, Some(&z), &mut rng)?;
    let mut z_err = 0.0;
    for (label, row) in generated.rows().enumerate() {
        z_err += (row[0] - label as f64).abs();
    }
    println!("mean |z_hat - z| over the 10 labels: {:.3}", z_err / 10.0);
    for pair in [(0usize, 1usize), (2, 3), (4, 5), (6, 7), (8, 9)] {
        render_side_by_side(generated.row(pair.0), generated.row(pair.1), pair);
    }
    let _ = std::fs::remove_dir_all(&tmp);
    Ok(())
}

fn tempdir_like() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("icpgen-mnist-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("create temp dir");
    dir
}

/// Label k -> a bright 6x6 block at grid cell (k % 5, k / 5), plus pixel
/// noise, so the label/image relation is learnable at a glance.
fn write_block_glyphs(dir: &Path, count: usize, seed: u64) -> std::io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(count * SIDE * SIDE);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let label = rng.gen_range(0..10u8);
        labels.push(label);
        let cx = 3 + (label as usize % 5) * 5 + rng.gen_range(0..2);
        let cy = 5 + (label as usize / 5) * 10 + rng.gen_range(0..2);
        for y in 0..SIDE {
            for x in 0..SIDE {
                let inside = x >= cx && x < cx + 6 && y >= cy && y < cy + 6;
                let v: i32 = if inside {
                    200 + rng.gen_range(-40..=40)
                } else {
                    rng.gen_range(0..8)
                };
                pixels.push(v.clamp(0, 255) as u8);
            }
        }
    }
    let mut f = std::fs::File::create(dir.join("images.idx"))?;
    f.write_all(&0x0000_0803u32.to_be_bytes())?;
    f.write_all(&(count as u32).to_be_bytes())?;
    f.write_all(&(SIDE as u32).to_be_bytes())?;
    f.write_all(&(SIDE as u32).to_be_bytes())?;
    f.write_all(&pixels)?;
    let mut f = std::fs::File::create(dir.join("labels.idx"))?;
    f.write_all(&0x0000_0801u32.to_be_bytes())?;
    f.write_all(&(count as u32).to_be_bytes())?;
    f.write_all(&labels)?;
    Ok(())
}

/// Rows are [z_hat; 784 pixels]; draws two images next to each other,
/// downsampled 2x, darker-to-brighter as ` .:*#`.
fn render_side_by_side(a: &[f64], b: &[f64], labels: (usize, usize)) {
    println!("label {}              label {}", labels.0, labels.1);
    let shades = [' ', '.', ':', '*', '#'];
    for y in (0..SIDE).step_by(2) {
        let mut line = String::new();
        for img in [a, b] {
            for x in (0..SIDE).step_by(2) {
                let mut v = 0.0;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    v += img[1 + (y + dy) * SIDE + (x + dx)];
                }
                let shade = ((v / 4.0).clamp(0.0, 1.0) * 4.999) as usize;
                line.push(shades[shade.min(4)]);
            }
            line.push_str("    ");
        }
        println!("{line}");
    }
}
