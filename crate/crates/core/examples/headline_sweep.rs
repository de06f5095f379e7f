//! The seven headline configurations across the standard scenarios, on a
//! reduced network so the whole sweep finishes in a few minutes.
//!
//! cargo run --release --example headline_sweep -- [out_dir] [node_count]

use std::path::PathBuf;
use std::sync::Arc;

use scramble::experiment::{run_sweep, SweepSpec};
use scramble::latency::{bundled_city_matrix, bundled_weights, trace_model};
use scramble::ExperimentConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "headline-out".into()));
    let node_count: u32 = args.next().and_then(|a| a.parse().ok()).unwrap_or(300);

    let mut base = ExperimentConfig::default();
    base.node_count = node_count;
    base.calibration_rounds = 8;
    base.measurement_blocks = 30;

    let matrix = Arc::new(bundled_city_matrix());
    let weights = bundled_weights(&matrix);
    let outcomes = run_sweep(
        &SweepSpec::headline(),
        &base,
        |cfg| trace_model(matrix.clone(), &weights, cfg.node_count as usize, cfg.intra_city_latency, cfg.seed),
        &out,
    );

    let mut current = String::new();
    for o in &outcomes {
        if o.scenario != current {
            current = o.scenario.clone();
            println!("{current}");
        }
        match &o.result {
            Ok(s) => println!("  {:<10} p50 {:7.1}  p90 {:7.1}  p99 {:7.1}", s.config, s.p50, s.p90, s.p99),
            Err(e) => println!("  {:<10} failed: {e}", o.config),
        }
    }
    println!("outputs under {}", out.display());
}
