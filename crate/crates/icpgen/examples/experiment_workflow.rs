//! The full run-directory workflow the `icpgen` binary wraps: train a preset
//! into a directory of artifacts, reload its checkpoint to draw samples, and
//! score it against fresh target draws.
//!
//! ```text
//! cargo run --example experiment_workflow
//! ```

use icpgen::experiment::{preset, read_batch_csv, run_eval, run_sample, run_train};

fn main() -> icpgen::Result<()> {
    let out = std::env::temp_dir().join(format!("icpgen-workflow-{}", std::process::id()));

    let mut config = preset("gmm3")?;
    config.train.epochs = 25;
    config.train.seed = 77;
    config.export_target_sample = 200;

    let artifacts = run_train(&config, &out, true)?;
    println!("run directory: {}", artifacts.out_dir.display());
    for record in artifacts.history.records().iter().step_by(6) {
        println!(
            "  epoch {:>3}: matched cost {:.4}, held-out emd {:.4}",
            record.epoch,
            record.matched_cost_mean,
            record.emd.unwrap()
        );
    }

    // Load the checkpoint back (config.json sits next to it) and sample.
    let samples_csv = out.join("generated.csv");
    run_sample(
        &artifacts.final_checkpoint,
        None,
        Some(400),
        None,
        &samples_csv,
        Some(123),
        true,
    )?;
    let (header, samples) = read_batch_csv(&samples_csv)?;
    println!(
        "wrote {} samples with columns {header:?} to {}",
        samples.count(),
        samples_csv.display()
    );

    // Exact EMD between fresh generations and fresh target draws.
    let report = run_eval(&artifacts.final_checkpoint, None, 400, false, Some(123))?;
    print!("{report}");

    let _ = std::fs::remove_dir_all(&out);
    Ok(())
}
