//! Acceptance gate: one test per release criterion, each printing a single
//! `criterion N: PASS/FAIL` verdict line (visible with `--nocapture` or on
//! failure). Thresholds marked "frozen" were calibrated once and must not be
//! loosened to make a regression pass.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use icpgen::distributions::TargetSpec;
use icpgen::experiment::{preset, run_train};
use icpgen::matching::{
    alternating_match, empirical_emd, greedy_match, hungarian, pairwise_costs, CostMatrix,
};
use icpgen::nn::init_network;
use icpgen::trainer::{self, generate, stream_rng, train};
use icpgen::{MetricSpec, SampleBatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(number: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {number} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

fn random_batch(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> SampleBatch {
    let mut batch = SampleBatch::empty(dim);
    let mut row = vec![0.0; dim];
    for _ in 0..count {
        for v in &mut row {
            *v = rng.gen_range(-3.0..3.0);
        }
        batch.push_row(&row);
    }
    batch
}

/// Minimum assignment cost by exhaustive permutation search.
fn brute_force_min(costs: &CostMatrix) -> f64 {
    fn recurse(costs: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if row == costs.size() {
            *best = acc;
            return;
        }
        for j in 0..costs.size() {
            if !used[j] {
                used[j] = true;
                recurse(costs, row + 1, used, acc + costs.cost(row, j), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    recurse(costs, 0, &mut vec![false; costs.size()], 0.0, &mut best);
    best
}

// Criterion 1: for 500 random instances both matchers produce bijections
// with total cost >= the Hungarian optimum, and the Hungarian solution
// equals exhaustive search whenever it is feasible (N <= 7).
#[test]
fn criterion_1_assignment_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let metric = MetricSpec::SquaredEuclidean;
    let mut brute_checked = 0usize;
    for instance in 0..500 {
        let n = rng.gen_range(1..=50);
        let dim = [1, 2, 20][rng.gen_range(0..3)];
        let targets = random_batch(&mut rng, n, dim);
        let predictions = random_batch(&mut rng, n, dim);
        let costs = pairwise_costs(&targets, &predictions, &metric).unwrap();
        let optimal = hungarian(&costs);
        assert!(optimal.is_bijection(), "instance {instance}: hungarian bijection");
        for assignment in [
            greedy_match(&targets, &predictions, &metric, &mut rng).unwrap(),
            alternating_match(&targets, &predictions, &metric, &mut rng).unwrap(),
        ] {
            assert!(assignment.is_bijection(), "instance {instance}: bijection");
            assert!(
                assignment.total_cost() >= optimal.total_cost() - 1e-9,
                "instance {instance}: matcher beat the optimum"
            );
        }
        if n <= 7 {
            let exhaustive = brute_force_min(&costs);
            assert!(
                (optimal.total_cost() - exhaustive).abs() <= 1e-9,
                "instance {instance}: hungarian {} vs exhaustive {exhaustive}",
                optimal.total_cost()
            );
            brute_checked += 1;
        }
    }
    verdict(
        1,
        "assignment correctness",
        true,
        &format!("500 instances, {brute_checked} verified against exhaustive search"),
    );
}

// Criterion 2: the empirical EMD is zero on identical multisets, equals the
// pointwise distance for singletons, and matches an exhaustive oracle on 100
// random 6-point instances.
#[test]
fn criterion_2_emd_estimator() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let metric = MetricSpec::SquaredEuclidean;

    let batch = random_batch(&mut rng, 40, 3);
    let mut shuffled = SampleBatch::empty(3);
    for i in (0..40).rev() {
        shuffled.push_row(batch.row(i));
    }
    let zero = empirical_emd(&batch, &shuffled, &metric).unwrap();
    assert_eq!(zero, 0.0, "identical multisets");

    let p = SampleBatch::from_rows(&[[1.0, 2.0]]).unwrap();
    let q = SampleBatch::from_rows(&[[4.0, 6.0]]).unwrap();
    assert_eq!(empirical_emd(&p, &q, &metric).unwrap(), 25.0, "singleton");

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_batch(&mut rng, 6, 2);
        let b = random_batch(&mut rng, 6, 2);
        let got = empirical_emd(&a, &b, &metric).unwrap();
        let oracle = brute_force_min(&pairwise_costs(&a, &b, &metric).unwrap()) / 6.0;
        worst = worst.max((got - oracle).abs());
    }
    verdict(
        2,
        "EMD estimator",
        worst <= 1e-9,
        &format!("max |emd - exhaustive oracle| = {worst:.2e}"),
    );
}

// Criterion 3: analytic gradients of the full losses (network + metric)
// match central finite differences over 50 random small networks, for both
// the squared-Euclidean and softmax cross-entropy metrics; the raw distance
// gradients match to 1e-6.
#[test]
fn criterion_3_gradient_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let batch_size = 4;
    let h = 1e-5;
    let mut worst_rel: f64 = 0.0;

    for net_index in 0..50u64 {
        let metric = if net_index % 2 == 0 {
            MetricSpec::SquaredEuclidean
        } else {
            MetricSpec::SoftmaxCrossEntropy
        };
        let dims = vec![
            rng.gen_range(2..5),
            rng.gen_range(2..6),
            rng.gen_range(2..6),
            rng.gen_range(2..5),
        ];
        let mut net = init_network(&dims, 7000 + net_index).unwrap();
        let inputs = random_batch(&mut rng, batch_size, dims[0]);
        let out_dim = *dims.last().unwrap();
        let mut targets = SampleBatch::zeros(batch_size, out_dim);
        for r in 0..batch_size {
            match metric {
                MetricSpec::SoftmaxCrossEntropy => {
                    targets.row_mut(r)[rng.gen_range(0..out_dim)] = 1.0
                }
                _ => {
                    for v in targets.row_mut(r) {
                        *v = rng.gen_range(-2.0..2.0);
                    }
                }
            }
        }

        // Mean per-example distance, matching backward()'s 1/batch scaling.
        let loss = |net: &icpgen::DenseNetwork| -> f64 {
            let out = net.predict(&inputs).unwrap();
            (0..batch_size)
                .map(|r| metric.distance(targets.row(r), out.row(r)).unwrap())
                .sum::<f64>()
                / batch_size as f64
        };

        let (out, cache) = net.forward(&inputs).unwrap();
        let mut out_grad = SampleBatch::zeros(batch_size, out_dim);
        for r in 0..batch_size {
            let g = metric.gradient(targets.row(r), out.row(r)).unwrap();
            out_grad.row_mut(r).copy_from_slice(&g);
        }
        let grads = net.backward(&cache, &out_grad).unwrap();

        for layer in 0..net.num_layers() {
            for index in 0..grads.weight_grads[layer].len() {
                let analytic = grads.weight_grads[layer][index];
                let original = net.weights(layer)[index];
                net.weights_mut(layer)[index] = original + h;
                let plus = loss(&net);
                net.weights_mut(layer)[index] = original - h;
                let minus = loss(&net);
                net.weights_mut(layer)[index] = original;
                let numeric = (plus - minus) / (2.0 * h);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0);
                worst_rel = worst_rel.max(rel);
            }
        }
    }

    // Raw distance gradients against finite differences.
    let mut worst_distance: f64 = 0.0;
    for spec in [
        MetricSpec::SquaredEuclidean,
        MetricSpec::Conditioned { z_dim: 1 },
        MetricSpec::SoftmaxCrossEntropy,
    ] {
        for _ in 0..30 {
            let dim = rng.gen_range(2..6);
            let y: Vec<f64> = match spec {
                MetricSpec::SoftmaxCrossEntropy => {
                    let mut v = vec![0.0; dim];
                    v[rng.gen_range(0..dim)] = 1.0;
                    v
                }
                _ => (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            };
            let y_hat: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let analytic = spec.gradient(&y, &y_hat).unwrap();
            for i in 0..dim {
                let mut plus = y_hat.clone();
                plus[i] += h;
                let mut minus = y_hat.clone();
                minus[i] -= h;
                let numeric =
                    (spec.distance(&y, &plus).unwrap() - spec.distance(&y, &minus).unwrap())
                        / (2.0 * h);
                worst_distance = worst_distance.max((analytic[i] - numeric).abs());
            }
        }
    }

    verdict(
        3,
        "gradient suite",
        worst_rel < 1e-4 && worst_distance < 1e-6,
        &format!(
            "worst relative network-gradient error {worst_rel:.2e}, worst distance-gradient error {worst_distance:.2e}"
        ),
    );
}

// Criterion 4: three-Gaussian training at the reference scale converges —
// matched cost falls to <= 25% of the epoch-1 value within 50 epochs and the
// exact EMD improves at least 4x over the untrained network. Frozen bounds.
#[test]
fn criterion_4_three_gaussian_convergence() {
    let mut config = preset("gmm3").unwrap().train;
    config.epochs = 50;
    config.emd_sample_size = 0; // the EMD protocol below is self-contained
    assert_eq!(config.matching_batch, 500);
    assert_eq!(config.supervised_minibatch, 100);
    assert_eq!(config.origin.dim, 6);
    assert!(config.hidden_dims.iter().all(|&h| h == 50));

    let target_dim = config.target.build().unwrap().dim();
    let emd_of = |net: &icpgen::DenseNetwork| -> f64 {
        let source = config.target.build().unwrap();
        let mut rng = stream_rng(config.seed, 98 << 32);
        let targets = source.sample(500, &mut rng);
        let generated = generate(net, &config.origin, 0, 500, None, &mut rng).unwrap();
        empirical_emd(&targets, &generated, &config.metric).unwrap()
    };

    let untrained =
        init_network(&config.network_dims(target_dim).unwrap(), config.seed).unwrap();
    let emd_before = emd_of(&untrained);

    let (net, history) = train(&config).unwrap();
    let first = history.records()[0].matched_cost_mean;
    let last = history.last().unwrap().matched_cost_mean;
    let emd_after = emd_of(&net);

    let cost_ok = last <= 0.25 * first;
    let emd_ok = emd_after * 4.0 <= emd_before;
    verdict(
        4,
        "three-Gaussian convergence",
        cost_ok && emd_ok,
        &format!(
            "matched cost {first:.3} -> {last:.3} ({:.1}%), emd {emd_before:.3} -> {emd_after:.3} ({:.1}x)",
            100.0 * last / first,
            emd_before / emd_after
        ),
    );
}

// Criterion 5: the conditioned sinusoid reproduces sin(z) — after 100
// epochs, over 500 conditions z ~ U[1,5], mean |y - sin z| <= 3 sigma and
// the z pass-through error is <= 0.05. Frozen bounds.
#[test]
fn criterion_5_conditioned_sinusoid() {
    let config = preset("sinusoid-conditioned").unwrap().train;
    assert_eq!(config.epochs, 100);
    let (net, _) = train(&config).unwrap();

    let mut rng = stream_rng(config.seed, 98 << 32);
    let count = 500;
    let mut z = SampleBatch::empty(1);
    for _ in 0..count {
        z.push_row(&[rng.gen_range(1.0..5.0)]);
    }
    let generated = generate(&net, &config.origin, 1, count, Some(&z), &mut rng).unwrap();
    let mut y_err = 0.0;
    let mut z_err = 0.0;
    for (i, row) in generated.rows().enumerate() {
        let z_i = z.row(i)[0];
        y_err += (row[1] - z_i.sin()).abs();
        z_err += (row[0] - z_i).abs();
    }
    y_err /= count as f64;
    z_err /= count as f64;
    verdict(
        5,
        "conditioned sinusoid",
        y_err <= 0.3 && z_err <= 0.05,
        &format!("mean |y - sin z| = {y_err:.4} (<= 0.3), mean |z_hat - z| = {z_err:.4} (<= 0.05)"),
    );
}

// Criterion 6: categorical learning dips below the Monte-Carlo red line —
// the mean pmf error of 1000-sample draws from the true distribution —
// within 200 epochs, for all of seeds 1, 2, 3.
#[test]
fn criterion_6_categorical_learning() {
    let base = preset("multinoulli").unwrap().train;
    let probabilities = match &base.target {
        TargetSpec::Multinoulli { probabilities } => probabilities.clone(),
        other => panic!("unexpected target {other:?}"),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let red_line =
        trainer::pmf_error_reference(&probabilities, 1000, 10_000, &mut rng).unwrap();

    let mut detail = format!("red line {red_line:.4};");
    let mut all_pass = true;
    for seed in 1..=3 {
        let mut config = base.clone();
        config.seed = seed;
        let (_, history) = train(&config).unwrap();
        let (best_epoch, best) = history
            .records()
            .iter()
            .filter_map(|r| r.pmf_error.map(|p| (r.epoch, p)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("pmf evaluations recorded");
        all_pass &= best < red_line;
        write!(detail, " seed {seed}: best pmf {best:.4} @epoch {best_epoch};").unwrap();
    }
    verdict(6, "categorical learning", all_pass, detail.trim_end_matches(';'));
}

/// IDX pair of 10,000 synthetic 28x28 glyphs: label k is a bright 6x6 block
/// at grid cell (k % 5, k / 5) with jitter and pixel noise — structured
/// enough that label conditioning is learnable at MNIST's data shape.
fn write_glyph_fixture(dir: &Path, count: usize, seed: u64) -> (PathBuf, PathBuf) {
    const SIDE: usize = 28;
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
                let v: i32 = if x >= cx && x < cx + 6 && y >= cy && y < cy + 6 {
                    200 + rng.gen_range(-40..=40)
                } else {
                    rng.gen_range(0..8)
                };
                pixels.push(v.clamp(0, 255) as u8);
            }
        }
    }
    let images = dir.join("images.idx");
    let labels_path = dir.join("labels.idx");
    let mut f = std::fs::File::create(&images).unwrap();
    f.write_all(&0x0000_0803u32.to_be_bytes()).unwrap();
    f.write_all(&(count as u32).to_be_bytes()).unwrap();
    f.write_all(&(SIDE as u32).to_be_bytes()).unwrap();
    f.write_all(&(SIDE as u32).to_be_bytes()).unwrap();
    f.write_all(&pixels).unwrap();
    let mut f = std::fs::File::create(&labels_path).unwrap();
    f.write_all(&0x0000_0801u32.to_be_bytes()).unwrap();
    f.write_all(&(count as u32).to_be_bytes()).unwrap();
    f.write_all(&labels).unwrap();
    (images, labels_path)
}

// Criterion 7: reduced-scale image training (10,000-sample IDX set,
// matching batch 2000, minibatch 100, 300-unit layers) halves the matched
// cost within 20 epochs and returns the conditioning label to within 0.25
// for at least 90% of generations. Frozen bounds.
#[test]
fn criterion_7_reduced_mnist() {
    let dir = tempfile::tempdir().unwrap();
    let (images_path, labels_path) = write_glyph_fixture(dir.path(), 10_000, 107);

    let mut config = preset("mnist-smallbatch").unwrap().train;
    config.target = TargetSpec::Mnist {
        images_path,
        labels_path,
        normalize_labels: false,
    };
    assert_eq!(config.matching_batch, 2000);
    assert_eq!(config.supervised_minibatch, 100);
    assert_eq!(config.hidden_dims, vec![300, 300, 300]);
    assert_eq!(config.epochs, 20);

    let (net, history) = train(&config).unwrap();
    let first = history.records()[0].matched_cost_mean;
    let last = history.last().unwrap().matched_cost_mean;

    let per_label = 100;
    let mut z = SampleBatch::empty(1);
    for label in 0..10 {
        for _ in 0..per_label {
            z.push_row(&[label as f64]);
        }
    }
    let mut rng = stream_rng(config.seed, 98 << 32);
    let generated =
        generate(&net, &config.origin, 1, 10 * per_label, Some(&z), &mut rng).unwrap();
    let within = generated
        .rows()
        .enumerate()
        .filter(|(i, row)| (row[0] - (i / per_label) as f64).abs() <= 0.25)
        .count();
    let fraction = within as f64 / (10.0 * per_label as f64);

    verdict(
        7,
        "reduced MNIST",
        last <= 0.5 * first && fraction >= 0.9,
        &format!(
            "matched cost {first:.1} -> {last:.1} ({:.1}%), z within 0.25 for {:.1}% of samples",
            100.0 * last / first,
            100.0 * fraction
        ),
    );
}

// Criterion 8: rerunning a preset with the same seed reproduces
// convergence.csv byte for byte (wall-clock timings live in timings.csv).
#[test]
fn criterion_8_byte_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let mut all_identical = true;
    let mut detail = String::new();
    for (name, epochs) in [("gmm3", 6), ("multinoulli", 3)] {
        let mut config = preset(name).unwrap();
        config.train.epochs = epochs;
        let a = run_train(&config, &dir.path().join(format!("{name}-a")), false).unwrap();
        let b = run_train(&config, &dir.path().join(format!("{name}-b")), false).unwrap();
        let bytes_a = std::fs::read(&a.convergence_csv).unwrap();
        let bytes_b = std::fs::read(&b.convergence_csv).unwrap();
        let same = bytes_a == bytes_b && !bytes_a.is_empty();
        all_identical &= same;
        write!(
            detail,
            "{name} @{epochs} epochs: {}; ",
            if same { "identical" } else { "DIFFERENT" }
        )
        .unwrap();
    }
    verdict(
        8,
        "byte-identical reruns",
        all_identical,
        detail.trim_end_matches("; "),
    );
}
