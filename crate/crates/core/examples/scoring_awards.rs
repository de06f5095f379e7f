//! Watches one node's scoring ledger: each award as it is given, then the
//! standings and the survivors at every refresh.
//!
//! cargo run --release --example scoring_awards -- [node] [blocks]

use scramble::config::{BlockId, NodeId, SimTime};
use scramble::latency::gen_planar;
use scramble::protocol::scoring::Award;
use scramble::protocol::{NodeState, Observer};
use scramble::{ExperimentConfig, SimOptions, Simulation};

struct Watch(NodeId);

impl Observer for Watch {
    fn award(&mut self, node: NodeId, block: BlockId, award: Award, at: SimTime) {
        if node == self.0 {
            println!("{at:10.1}  block {block}: {} +{:.1}", award.peer, award.points);
        }
    }

    fn scoring_round_end(&mut self, node: &NodeState, _at: SimTime) {
        if node.id == self.0 {
            let mut standings: Vec<String> = node
                .scoring
                .members()
                .iter()
                .map(|m| format!("{}={:.1}", m.peer, m.points))
                .collect();
            standings.sort();
            println!("round end: {}", standings.join(" "));
        }
    }

    fn scoring_refreshed(&mut self, node: &NodeState, _target: usize, _at: SimTime) {
        if node.id == self.0 {
            let peers: Vec<String> = node.scoring.peers().map(|p| p.to_string()).collect();
            println!("refreshed: {}\n", peers.join(" "));
        }
    }
}

fn main() {
    let args: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let node = NodeId(args.first().copied().unwrap_or(0));
    let blocks = args.get(1).copied().unwrap_or(30);

    let mut cfg = ExperimentConfig::scr(3, 3, 2);
    cfg.node_count = 100;
    cfg.blocks_per_round = 10;
    let cfg = cfg.validate().expect("valid configuration");
    let model = gen_planar(100, 100.0, 5.0, 5).expect("planar model");
    let opts = SimOptions {
        observer: Some(Box::new(Watch(node))),
        ..Default::default()
    };
    let mut sim = Simulation::with_options(cfg, model, opts).expect("simulation");
    sim.run_blocks(blocks, false);
}
