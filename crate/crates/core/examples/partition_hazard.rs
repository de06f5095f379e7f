//! Close-only overlays on clustered latencies: with the random refresh link
//! the network stays connected; take it away and clusters drift apart.
//!
//! cargo run --release --example partition_hazard -- [warmup_periods] [seeds]

use scramble::config::RefreshSlots;
use scramble::latency::gen_clustered_planar;
use scramble::metrics::overlay_stats;
use scramble::{ExperimentConfig, Simulation};

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let warmup = args.first().copied().unwrap_or(50) as f64;
    let seeds = args.get(1).copied().unwrap_or(5);
    let n = 240;

    println!("seed  with_refresh  refresh_removed");
    for seed in 1..=seeds {
        let model = gen_clustered_planar(n, 8, 0.04, 100.0, 5.0, seed).expect("clustered model");
        let mut cfg = ExperimentConfig::scr(0, 7, 1);
        cfg.node_count = n as u32;
        cfg.seed = seed;
        let cfg = cfg.validate().expect("valid configuration");
        let components = |force: bool| {
            let mut sim = Simulation::new(cfg.clone(), model.clone()).expect("simulation");
            sim.run_for(cfg.close_period * warmup);
            if force {
                sim.force_refresh_slots(RefreshSlots { scoring: 0, close: 0 });
            }
            sim.run_for(cfg.close_period * 3.0);
            overlay_stats(&sim.topology()).components
        };
        println!("{seed:>4}  {:>12}  {:>15}", components(false), components(true));
    }
}
