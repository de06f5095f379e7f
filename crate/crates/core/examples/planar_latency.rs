//! Synthetic planar latencies: generation, file round trip, and the
//! triangle-inequality slack of the distance-plus-base model.
//!
//! cargo run --release --example planar_latency -- [node_count] [seed]

use scramble::config::NodeId;
use scramble::latency::{gen_planar, load_city_matrix, LatencyModel};

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(50) as usize;
    let seed = args.get(1).copied().unwrap_or(7);
    let (scale, base) = (100.0, 5.0);
    let model = gen_planar(n, scale, base, seed).expect("planar model");

    let mut worst_slack: f64 = 0.0;
    let mut sum = 0.0;
    let l = |a: usize, b: usize| model.one_way(NodeId(a as u32), NodeId(b as u32));
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            sum += l(a, b);
            for c in 0..n {
                if c != a && c != b {
                    worst_slack = worst_slack.max(l(a, c) - l(a, b) - l(b, c));
                }
            }
        }
    }
    println!(
        "{n} nodes, mean one-way {:.2} msec, worst triangle excess {worst_slack:.3} msec (bound {:.1})",
        sum / (n * (n - 1)) as f64,
        2.0 * base
    );

    // Same file format the CLI's gen-latency writes and --matrix reads.
    let path = std::env::temp_dir().join(format!("planar-{seed}.csv"));
    model.write_matrix(std::fs::File::create(&path).unwrap()).unwrap();
    let back = LatencyModel::explicit(&load_city_matrix(&path, false).unwrap()).unwrap();
    let same = (0..n).all(|a| (0..n).all(|b| a == b || back.one_way(NodeId(a as u32), NodeId(b as u32)) == l(a, b)));
    println!("wrote {} and read it back: {}", path.display(), if same { "identical" } else { "differs" });
}
