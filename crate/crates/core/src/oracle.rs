//! Delivery-time oracles for frozen overlays.
//!
//! With no heuristic running, the overlay is a fixed graph and every
//! forwarding hop `u -> v` costs `(2 × total_rtts) × latency(u, v)` plus
//! header and body validation. [`shortest_path_delivery`] runs Dijkstra over
//! those edge weights. [`first_arrival_delivery`] instead replays the exact
//! forwarding rule (pull from whichever announcement arrived first), which
//! can differ from the shortest path when more than one pull round is
//! needed: the first announcer is not always the cheapest one to pull from.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered::OrdF64;
use petgraph::algo::dijkstra;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::config::{NodeId, ValidatedConfig};
use crate::latency::LatencyModel;
use crate::protocol::topology::Topology;

mod ordered {
    #[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
    pub struct OrdF64(pub f64);

    impl Eq for OrdF64 {}

    impl Ord for OrdF64 {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }
}

/// Per-hop cost on the shortest-path oracle's graph.
pub fn hop_cost(cfg: &ValidatedConfig, one_way: f64) -> f64 {
    2.0 * cfg.total_rtts * one_way + cfg.header_validation + cfg.body_validation
}

/// Elapsed delivery time of every node for a block mined at `miner`, as the
/// shortest-path distance over the forwarding graph. `+inf` when unreachable.
pub fn shortest_path_delivery(
    topology: &Topology,
    model: &LatencyModel,
    cfg: &ValidatedConfig,
    miner: NodeId,
) -> Vec<f64> {
    let n = topology.node_count();
    let mut g: DiGraph<(), f64> = DiGraph::with_capacity(n, n * 8);
    for _ in 0..n {
        g.add_node(());
    }
    for (u, peers) in topology.adjacency().into_iter().enumerate() {
        let u = NodeId(u as u32);
        for v in peers {
            g.add_edge(
                NodeIndex::new(u.index()),
                NodeIndex::new(v.index()),
                hop_cost(cfg, model.one_way(u, v)),
            );
        }
    }
    let dist = dijkstra(&g, NodeIndex::new(miner.index()), None, |e| *e.weight());
    (0..n)
        .map(|i| dist.get(&NodeIndex::new(i)).copied().unwrap_or(f64::INFINITY))
        .collect()
}

/// Elapsed delivery times under the pull-from-first-announcer rule.
pub fn first_arrival_delivery(
    topology: &Topology,
    model: &LatencyModel,
    cfg: &ValidatedConfig,
    miner: NodeId,
) -> Vec<f64> {
    let n = topology.node_count();
    let adj = topology.adjacency();
    let pulls = 2.0 * (cfg.total_rtts - 0.5);
    let fixed = cfg.header_validation + cfg.body_validation;
    let mut arrival = vec![f64::INFINITY; n];
    let mut announcer: Vec<Option<usize>> = vec![None; n];
    let mut delivered = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    arrival[miner.index()] = 0.0;
    heap.push(Reverse((OrdF64(0.0), miner.index())));
    while let Some(Reverse((OrdF64(t), v))) = heap.pop() {
        if done[v] || t > arrival[v] {
            continue;
        }
        done[v] = true;
        delivered[v] = match announcer[v] {
            None => 0.0,
            Some(u) => t + fixed + pulls * model.one_way(NodeId(u as u32), NodeId(v as u32)),
        };
        for &w in &adj[v] {
            let w = w.index();
            if done[w] {
                continue;
            }
            let a = delivered[v] + model.one_way(NodeId(v as u32), NodeId(w as u32));
            if a < arrival[w] {
                arrival[w] = a;
                announcer[w] = Some(v);
                heap.push(Reverse((OrdF64(a), w)));
            }
        }
    }
    delivered
}
