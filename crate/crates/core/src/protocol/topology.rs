use crate::config::{ForwardingMode, NodeId};

/// Who selected whom at one instant, with the forwarding rule that turns
/// selections into links.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    /// `selected[n]` is node `n`'s scoring set followed by its close set.
    pub selected: Vec<Vec<NodeId>>,
    pub mode: ForwardingMode,
}

impl Topology {
    pub fn new(selected: Vec<Vec<NodeId>>, mode: ForwardingMode) -> Self {
        Topology { selected, mode }
    }

    pub fn node_count(&self) -> usize {
        self.selected.len()
    }

    /// Undirected links (`u < v`), sorted, irrespective of forwarding mode.
    pub fn links(&self) -> Vec<(NodeId, NodeId)> {
        let mut edges: Vec<(NodeId, NodeId)> = self
            .selected
            .iter()
            .enumerate()
            .flat_map(|(u, peers)| {
                let u = NodeId(u as u32);
                peers.iter().map(move |&v| if u < v { (u, v) } else { (v, u) })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Forwarding neighbors of every node.
    pub fn adjacency(&self) -> Vec<Vec<NodeId>> {
        match self.mode {
            ForwardingMode::Directed => self
                .selected
                .iter()
                .map(|peers| {
                    let mut p = peers.clone();
                    p.sort_unstable();
                    p.dedup();
                    p
                })
                .collect(),
            ForwardingMode::Undirected => {
                let mut adj = vec![Vec::new(); self.node_count()];
                for (u, v) in self.links() {
                    adj[u.index()].push(v);
                    adj[v.index()].push(u);
                }
                for a in &mut adj {
                    a.sort_unstable();
                }
                adj
            }
        }
    }
}

/// Peers `n` forwards blocks to: its own selections, plus (undirected mode)
/// every node that selected `n`.
pub fn neighbor_union(topology: &Topology, n: NodeId) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = topology.selected[n.index()].clone();
    if topology.mode == ForwardingMode::Undirected {
        out.extend(
            topology
                .selected
                .iter()
                .enumerate()
                .filter(|(_, peers)| peers.contains(&n))
                .map(|(m, _)| NodeId(m as u32)),
        );
    }
    out.retain(|&m| m != n);
    out.sort_unstable();
    out.dedup();
    out
}
