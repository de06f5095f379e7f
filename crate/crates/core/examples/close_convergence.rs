//! How fast close sets approach each node's true nearest neighbours on a
//! planar model, for a close-only configuration.
//!
//! cargo run --release --example close_convergence -- [node_count] [periods] [seed]

use scramble::config::NodeId;
use scramble::latency::gen_planar;
use scramble::{ExperimentConfig, Simulation};

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(500) as usize;
    let periods = args.get(1).copied().unwrap_or(200) as u32;
    let seed = args.get(2).copied().unwrap_or(1);

    let mut cfg = ExperimentConfig::scr(0, 7, 1);
    cfg.node_count = n as u32;
    cfg.seed = seed;
    let cfg = cfg.validate().expect("valid configuration");
    let c = cfg.close_links as usize;
    let model = gen_planar(n, 100.0, 5.0, seed).expect("planar model");

    let rtt = |u: NodeId, v: NodeId| 2.0 * model.one_way(u, v);
    let optimal: Vec<f64> = (0..n as u32)
        .map(|u| {
            let mut d: Vec<f64> = (0..n as u32).filter(|&v| v != u).map(|v| rtt(NodeId(u), NodeId(v))).collect();
            d.sort_by(f64::total_cmp);
            d[..c].iter().sum::<f64>() / c as f64
        })
        .collect();

    let mut sim = Simulation::new(cfg.clone(), model.clone()).expect("simulation");
    println!("period  within_2x  median_ratio");
    let step = (periods / 10).max(1);
    let mut done = 0;
    while done < periods {
        sim.run_for(cfg.close_period * step as f64);
        done += step;
        let mut ratios: Vec<f64> = sim
            .nodes()
            .iter()
            .map(|node| {
                let mut d: Vec<f64> = node.close.peers().map(|v| rtt(node.id, v)).collect();
                d.sort_by(f64::total_cmp);
                let mean = d[..c].iter().sum::<f64>() / c as f64;
                mean / optimal[node.id.index()]
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        let within = ratios.iter().filter(|&&r| r <= 2.0).count() as f64 / n as f64;
        println!("{done:>6}  {:>8.1}%  {:>12.2}", 100.0 * within, ratios[n / 2]);
    }
}
