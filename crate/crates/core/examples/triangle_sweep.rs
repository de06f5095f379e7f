//! Every valid (S, C, R) split of a small total degree, default scenario only.
//! Prints the p90 grid with S down and C across.
//!
//! cargo run --release --example triangle_sweep -- [degree] [node_count]

use std::collections::HashMap;

use scramble::experiment::{run_sweep, Scenario, SweepSpec};
use scramble::latency::gen_planar;
use scramble::ExperimentConfig;

fn main() {
    let args: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let degree = args.first().copied().unwrap_or(6);
    let node_count = args.get(1).copied().unwrap_or(200);

    let mut spec = SweepSpec::triangle(degree);
    spec.scenarios = vec![Scenario::new(50.0, 1.5)];
    let mut base = ExperimentConfig::default();
    base.node_count = node_count;
    base.blocks_per_round = 20;
    base.calibration_rounds = 6;
    base.measurement_blocks = 30;

    let dir = tempfile_dir();
    let outcomes = run_sweep(
        &spec,
        &base,
        |cfg| gen_planar(cfg.node_count as usize, 100.0, 5.0, cfg.seed),
        &dir,
    );
    let p90: HashMap<String, f64> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().map(|s| (s.config.clone(), s.p90)))
        .collect();

    print!("S\\C ");
    for c in 0..=degree {
        print!("{c:>8}");
    }
    println!();
    for s in 0..=degree {
        print!("{s:>3} ");
        for c in 0..=degree {
            let cell = (s + c <= degree)
                .then(|| format!("S{s}-C{c}-R{}", degree - s - c))
                .and_then(|l| p90.get(&l));
            match cell {
                Some(v) => print!("{v:8.1}"),
                None => print!("{:>8}", "."),
            }
        }
        println!();
    }
    std::fs::remove_dir_all(&dir).ok();
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("scramble-triangle-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
