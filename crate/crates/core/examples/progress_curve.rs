//! Dissemination progress of one run: the fraction of nodes still missing a
//! block over elapsed time, plus a round trip through the records file.
//!
//! cargo run --release --example progress_curve -- [S C R]

use scramble::experiment::{read_records, run_experiment, write_records};
use scramble::latency::gen_planar;
use scramble::metrics::{delivery_percentiles, progress_curve};
use scramble::ExperimentConfig;

fn main() {
    let args: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (s, c, r) = match args[..] {
        [s, c, r, ..] => (s, c, r),
        _ => (3, 3, 2),
    };
    let mut cfg = ExperimentConfig::scr(s, c, r);
    cfg.node_count = 300;
    cfg.calibration_rounds = 4;
    cfg.measurement_blocks = 40;
    let cfg = cfg.validate().expect("valid configuration");
    let model = gen_planar(300, 100.0, 5.0, cfg.seed).expect("planar model");
    let exp = run_experiment(&cfg, model).expect("run");

    let mut buf = Vec::new();
    write_records(&mut buf, &exp.records).unwrap();
    let records = read_records(buf.as_slice()).unwrap();
    assert_eq!(records, exp.records);

    let curve = progress_curve(&records, 25.0).unwrap();
    println!("{}: fraction of (node, block) pairs not yet delivered", cfg.label());
    for &(t, frac) in curve.points.iter().step_by(2) {
        let bar = "#".repeat((frac * 50.0).round() as usize);
        println!("{t:7.0} msec  {frac:5.3}  {bar}");
        if frac == curve.floor() {
            break;
        }
    }
    for (p, t) in delivery_percentiles(&records, &[0.5, 0.9, 0.99]).unwrap() {
        println!("p{:<3} {t:.1} msec", p * 100.0);
    }
}
