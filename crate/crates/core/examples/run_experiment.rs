//! Runs a bundled preset end to end and writes its CSV trace and JSON report.
//!
//! ```bash
//! cargo run --release -p rmab-learn --example run_experiment -- [preset] [out_dir]
//! ```
//!
//! `paper-single-mdp` writes error traces; the other presets run index learning.

use rmab_learn::experiment::{run_index_learning, run_single_mdp, ExperimentConfig, ExperimentError};

fn main() -> Result<(), ExperimentError> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "desk-ci".into());
    let out = args.next().unwrap_or_else(|| "out".into());
    let cfg = ExperimentConfig::preset(&preset)?.with_output_dir(&out);

    if preset == "paper-single-mdp" {
        let summary = run_single_mdp(&cfg, true)?;
        println!("trace: {}", summary.csv.display());
        for a in &summary.algorithms {
            println!("{:>20}: final mean error {:.4}", a.algorithm.to_string(), a.final_mean_error);
        }
    } else {
        let report = run_index_learning(&cfg, true)?;
        println!("trace: {}", report.csv.display());
        println!("oracle: {:?}", report.oracle);
        for a in report.algorithms() {
            let worst: Vec<String> = report
                .runs
                .iter()
                .filter(|r| r.algorithm == a)
                .map(|r| format!("{:.3}", r.max_abs_error))
                .collect();
            println!("{:>20}: max |λ - index| per seed [{}]", a.to_string(), worst.join(", "));
        }
    }
    Ok(())
}
