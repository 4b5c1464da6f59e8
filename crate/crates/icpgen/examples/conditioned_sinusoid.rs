//! Trains a conditional model of y = sin(x) + noise and sweeps x over a
//! grid, comparing the conditional mean of the generated y against sin(x).
//!
//! ```text
//! cargo run --example conditioned_sinusoid
//! ```

use icpgen::distributions::{OriginSpec, TargetSpec};
use icpgen::nn::AdamConfig;
use icpgen::trainer::{self, stream_rng, MatcherKind};
use icpgen::{MetricSpec, SampleBatch, TrainConfig};

fn main() -> icpgen::Result<()> {
    let config = TrainConfig {
        matcher: MatcherKind::Greedy,
        metric: MetricSpec::Conditioned { z_dim: 1 },
        origin: OriginSpec::mixed(6),
        target: TargetSpec::NoisySinusoid {
            x_low: 1.0,
            x_high: 5.0,
            noise_sigma: 0.1,
        },
        matching_batch: 500,
        supervised_minibatch: 100,
        epochs: 80,
        hidden_dims: vec![50, 50, 50],
        clip_bound: 0.1,
        adam: AdamConfig::default(),
        seed: 4,
        supervised_passes_per_epoch: 1,
        emd_sample_size: 0,
        pmf_eval_samples: 0,
    };
    let (net, _history) = trainer::train(&config)?;

    let mut rng = stream_rng(config.seed, 9 << 32);
    let per_condition = 200;
    println!("{:>5} {:>9} {:>9} {:>9}", "x", "mean y", "sin x", "|err|");
    let mut worst: f64 = 0.0;
    for step in 0..=8 {
        let x = 1.0 + 0.5 * step as f64;
        let mut z = SampleBatch::empty(1);
        for _ in 0..per_condition {
            z.push_row(&[x]);
        }
        let generated =
            trainer::generate(&net, &config.origin, 1, per_condition, Some(&z), &mut rng)?;
        let mean_y: f64 = generated.rows().map(|r| r[1]).sum::<f64>() / per_condition as f64;
        let err = (mean_y - x.sin()).abs();
        worst = worst.max(err);
        println!("{x:>5.1} {mean_y:>9.3} {:>9.3} {err:>9.3}", x.sin());
    }
    println!("worst conditional-mean error: {worst:.3} (noise sigma is 0.1)");
    Ok(())
}
