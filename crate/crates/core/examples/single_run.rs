//! One calibrated run on the bundled city trace.
//!
//! cargo run --release --example single_run -- [S C R] [calibration_rounds] [seed]

use std::sync::Arc;
use std::time::Instant;

use scramble::experiment::run_experiment;
use scramble::latency::{bundled_city_matrix, bundled_weights, trace_model};
use scramble::ExperimentConfig;

fn main() {
    let args: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (s, c, r) = match args[..] {
        [s, c, r, ..] => (s, c, r),
        _ => (3, 3, 2),
    };
    let mut cfg = ExperimentConfig::scr(s, c, r);
    cfg.calibration_rounds = args.get(3).copied().unwrap_or(16);
    cfg.measurement_blocks = 50;
    cfg.seed = args.get(4).copied().unwrap_or(1) as u64;
    let cfg = cfg.validate().expect("valid configuration");

    let matrix = Arc::new(bundled_city_matrix());
    let weights = bundled_weights(&matrix);
    let model = trace_model(matrix, &weights, cfg.node_count as usize, cfg.intra_city_latency, cfg.seed)
        .expect("trace model");

    let start = Instant::now();
    let exp = run_experiment(&cfg, model).expect("run");
    let summary = exp.summary(&cfg.label()).expect("records");
    println!(
        "{}  p50 {:.1}  p90 {:.1}  p99 {:.1}  p100 {:.1} msec  components {}  ({} events, {:.1?})",
        summary.config,
        summary.p50,
        summary.p90,
        summary.p99,
        summary.p100,
        exp.overlay.components,
        exp.stats.events,
        start.elapsed()
    );
}
