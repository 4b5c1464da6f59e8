//! Compares the three bijective matchers on the same random batches: exact
//! Hungarian assignment, greedy nearest-prediction, and the alternating
//! variant. Both heuristics are upper bounds on the optimal cost, and the
//! gap is what training trades for an O(n^2) inner loop.
//!
//! ```text
//! cargo run --example matching_comparison
//! ```

use icpgen::distributions::TargetSpec;
use icpgen::matching::{alternating_match, greedy_match, hungarian, pairwise_costs};
use icpgen::trainer::stream_rng;
use icpgen::{MetricSpec, SampleBatch};
use rand::Rng;

fn main() -> icpgen::Result<()> {
    let metric = MetricSpec::SquaredEuclidean;
    let source = TargetSpec::Gmm3 {
        means: [[1.5, 1.0], [3.0, 2.0], [4.5, 3.0]],
        sigma: 0.2,
    }
    .build()?;

    println!(
        "{:>5} {:>12} {:>12} {:>12} {:>9} {:>9}",
        "n", "hungarian", "greedy", "alternating", "g/h", "a/h"
    );
    let mut rng = stream_rng(123, 0);
    for n in [50, 100, 200, 400] {
        let targets = source.sample(n, &mut rng);
        // Untrained "predictions": random points in the same plane.
        let mut predictions = SampleBatch::empty(2);
        for _ in 0..n {
            predictions.push_row(&[rng.gen_range(0.0..5.0), rng.gen_range(0.0..4.0)]);
        }

        let costs = pairwise_costs(&targets, &predictions, &metric)?;
        let optimal = hungarian(&costs).total_cost();
        let greedy = greedy_match(&targets, &predictions, &metric, &mut rng)?.total_cost();
        let alternating =
            alternating_match(&targets, &predictions, &metric, &mut rng)?.total_cost();
        println!(
            "{n:>5} {optimal:>12.3} {greedy:>12.3} {alternating:>12.3} {:>9.3} {:>9.3}",
            greedy / optimal,
            alternating / optimal
        );
        assert!(greedy >= optimal - 1e-9 && alternating >= optimal - 1e-9);
    }
    println!("both heuristics stay within a small factor of the optimum");
    Ok(())
}
