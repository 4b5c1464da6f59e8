//! Learns the classic swiss-roll spiral from a 2-D mixed origin and checks
//! that generated points hug the spiral by inverting the roll's radius.
//!
//! ```text
//! cargo run --example swiss_roll
//! ```

use icpgen::distributions::{
    swiss_roll_point, OriginSpec, TargetSpec, SWISS_ROLL_SCALE, SWISS_ROLL_T_HIGH,
    SWISS_ROLL_T_LOW,
};
use icpgen::nn::AdamConfig;
use icpgen::trainer::{self, stream_rng, MatcherKind};
use icpgen::{MetricSpec, TrainConfig};

fn main() -> icpgen::Result<()> {
    let config = TrainConfig {
        matcher: MatcherKind::Greedy,
        metric: MetricSpec::SquaredEuclidean,
        origin: OriginSpec::mixed(2),
        target: TargetSpec::SwissRoll { noise_sigma: 0.05 },
        matching_batch: 1000,
        supervised_minibatch: 100,
        epochs: 300,
        hidden_dims: vec![50, 50, 50],
        // Coordinates span +-4.7, so early gradients dwarf a 0.1 clip; a
        // clip that binds this hard stalls the spiral fit.
        clip_bound: 1.0,
        adam: AdamConfig::default(),
        seed: 2,
        supervised_passes_per_epoch: 1,
        emd_sample_size: 0,
        pmf_eval_samples: 0,
    };
    let (net, history) = trainer::train(&config)?;
    println!(
        "matched cost: epoch 1 {:.4} -> epoch {} {:.4}",
        history.records()[0].matched_cost_mean,
        config.epochs,
        history.last().unwrap().matched_cost_mean
    );

    // The roll is r(t) = t / scale at angle t, so a point's radius recovers
    // its parameter and the nearest on-curve point.
    let mut rng = stream_rng(config.seed, 9 << 32);
    let generated = trainer::generate(&net, &config.origin, 0, 1000, None, &mut rng)?;
    let mut off_curve = 0.0;
    for row in generated.rows() {
        let t = (row[0].hypot(row[1]) * SWISS_ROLL_SCALE)
            .clamp(SWISS_ROLL_T_LOW, SWISS_ROLL_T_HIGH);
        // The recovered angle can be off by whole turns; check the
        // neighbouring turns too and keep the closest on-curve point.
        let mut best = f64::INFINITY;
        for turn in [-1.0, 0.0, 1.0] {
            let tt = t + turn * std::f64::consts::TAU;
            if !(SWISS_ROLL_T_LOW..=SWISS_ROLL_T_HIGH).contains(&tt) {
                continue;
            }
            let p = swiss_roll_point(tt);
            best = best.min((row[0] - p[0]).hypot(row[1] - p[1]));
        }
        off_curve += best;
    }
    println!(
        "mean distance to the spiral over 1000 samples: {:.3} (noise sigma is 0.05)",
        off_curve / generated.count() as f64
    );
    Ok(())
}
