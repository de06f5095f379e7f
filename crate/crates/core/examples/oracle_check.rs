//! Compares frozen-overlay simulation against both delivery oracles.
//!
//! cargo run --release --example oracle_check -- [topologies] [total_rtts]

use scramble::config::ExperimentConfig;
use scramble::latency::gen_planar;
use scramble::oracle::{first_arrival_delivery, shortest_path_delivery};
use scramble::{NodeId, SimOptions, Simulation};

fn main() {
    let mut args = std::env::args().skip(1);
    let topologies: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let rtts: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1.5);
    let (mut worst_sp, mut worst_fa, mut off_sp) = (0.0f64, 0.0f64, 0usize);
    let mut pairs = 0usize;
    for seed in 0..topologies {
        let mut cfg = ExperimentConfig::scr(0, 0, 4);
        cfg.node_count = 50 + (seed as u32 * 37) % 150;
        cfg.total_rtts = rtts;
        cfg.seed = seed;
        let cfg = cfg.validate().expect("valid config");
        let model = gen_planar(cfg.node_count as usize, 100.0, 5.0, seed).expect("planar model");
        let opts = SimOptions { frozen: true, ..Default::default() };
        let mut sim = Simulation::with_options(cfg.clone(), model.clone(), opts).expect("simulation");
        let topo = sim.topology();
        let miners: Vec<NodeId> = (0..5).map(|i| NodeId(i * 7 % cfg.node_count)).collect();
        let records = sim.run_blocks_from(miners.len() as u32, true, miners);
        for r in &records {
            let sp = shortest_path_delivery(&topo, &model, &cfg, r.miner);
            let fa = first_arrival_delivery(&topo, &model, &cfg, r.miner);
            for (i, off) in r.offsets().enumerate() {
                let got = off.unwrap_or(f64::INFINITY);
                pairs += 1;
                let dsp = if got == sp[i] { 0.0 } else { (got - sp[i]).abs() };
                let dfa = if got == fa[i] { 0.0 } else { (got - fa[i]).abs() };
                if dsp > 1e-9 {
                    off_sp += 1;
                }
                worst_sp = worst_sp.max(dsp);
                worst_fa = worst_fa.max(dfa);
            }
        }
    }
    println!("total_rtts={rtts} pairs={pairs}");
    println!("shortest path: {off_sp} pairs off, worst {worst_sp:.3e} msec");
    println!("first arrival: worst {worst_fa:.3e} msec");
}
