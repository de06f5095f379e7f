//! Ping-based ranking of a node's close set.

use crate::config::NodeId;

#[derive(Clone, Debug, PartialEq)]
pub struct ClosePeer {
    pub peer: NodeId,
    /// RTT samples collected this period, msec.
    pub samples: Vec<f64>,
}

impl ClosePeer {
    /// Arithmetic mean of this period's samples.
    pub fn average(&self) -> Option<f64> {
        if self.samples.is_empty() {
            None
        } else {
            Some(self.samples.iter().sum::<f64>() / self.samples.len() as f64)
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CloseSet {
    members: Vec<ClosePeer>,
    period: u32,
}

impl CloseSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn members(&self) -> &[ClosePeer] {
        &self.members
    }

    pub fn peers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.members.iter().map(|m| m.peer)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, peer: NodeId) -> bool {
        self.members.iter().any(|m| m.peer == peer)
    }

    /// Index of the current measurement period.
    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn add(&mut self, peer: NodeId) {
        debug_assert!(!self.contains(peer));
        self.members.push(ClosePeer {
            peer,
            samples: Vec::new(),
        });
    }

    /// Stores a ping reply. Replies for a past period or from a peer that is
    /// no longer a member are discarded.
    pub fn record(&mut self, peer: NodeId, period: u32, rtt: f64) -> bool {
        if period != self.period {
            return false;
        }
        match self.members.iter_mut().find(|m| m.peer == peer) {
            Some(m) => {
                m.samples.push(rtt);
                true
            }
            None => false,
        }
    }

    /// Removes the highest-average peers until at most `retain` remain. Peers
    /// without samples rank last but are never removed. Ties on average keep
    /// the lower id. Returns the removed peers.
    pub fn cut(&mut self, retain: usize) -> Vec<NodeId> {
        let excess = self.members.len().saturating_sub(retain);
        if excess == 0 {
            return Vec::new();
        }
        self.members.sort_by(|a, b| match (a.average(), b.average()) {
            (Some(x), Some(y)) => x.total_cmp(&y).then(a.peer.cmp(&b.peer)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.peer.cmp(&b.peer),
        });
        let sampled = self.members.iter().filter(|m| !m.samples.is_empty()).count();
        let drop = excess.min(sampled);
        // Sampled peers occupy the prefix; drop from its tail.
        let removed: Vec<NodeId> = self.members[sampled - drop..sampled]
            .iter()
            .map(|m| m.peer)
            .collect();
        self.members.drain(sampled - drop..sampled);
        removed
    }

    /// Forgets all samples and starts the next period.
    pub fn reset(&mut self) {
        for m in &mut self.members {
            m.samples.clear();
        }
        self.period += 1;
    }
}
