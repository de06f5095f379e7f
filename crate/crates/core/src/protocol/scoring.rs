//! Block-arrival scoring of a node's scoring set.
//!
//! For every block, the first scoring-set peer to announce it opens a window
//! at `t1`. The next announcement of that block from a *different*
//! scoring-set peer at `t2` awards `t2 - t1` points to the first peer and
//! closes the window. Announcements from peers outside the set are ignored.
//! Windows still open at a round boundary close without an award.

use std::collections::HashMap;

use crate::config::{BlockId, NodeId, SimTime};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Window {
    Open { first: NodeId, at: SimTime },
    Closed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Award {
    pub peer: NodeId,
    pub points: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoringPeer {
    pub peer: NodeId,
    pub points: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ScoringSet {
    members: Vec<ScoringPeer>,
    windows: HashMap<BlockId, Window>,
}

impl ScoringSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn members(&self) -> &[ScoringPeer] {
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

    pub fn points_of(&self, peer: NodeId) -> Option<f64> {
        self.members.iter().find(|m| m.peer == peer).map(|m| m.points)
    }

    pub fn window(&self, block: BlockId) -> Option<Window> {
        self.windows.get(&block).copied()
    }

    pub fn add(&mut self, peer: NodeId) {
        debug_assert!(!self.contains(peer));
        self.members.push(ScoringPeer { peer, points: 0.0 });
    }

    /// Records one announcement receipt.
    pub fn observe(&mut self, block: BlockId, from: NodeId, now: SimTime) -> Option<Award> {
        if !self.contains(from) {
            return None;
        }
        match self.windows.get(&block).copied() {
            None => {
                self.windows.insert(block, Window::Open { first: from, at: now });
                None
            }
            Some(Window::Open { first, at }) if first != from => {
                let points = now - at;
                self.windows.insert(block, Window::Closed);
                let member = self.members.iter_mut().find(|m| m.peer == first)?;
                member.points += points;
                Some(Award { peer: first, points })
            }
            Some(_) => None,
        }
    }

    /// Ranks by points (descending, ties to the lower id) and keeps the
    /// first `retain`. Returns the removed peers.
    pub fn cut(&mut self, retain: usize) -> Vec<NodeId> {
        self.members
            .sort_by(|a, b| b.points.total_cmp(&a.points).then(a.peer.cmp(&b.peer)));
        if self.members.len() <= retain {
            return Vec::new();
        }
        self.members.split_off(retain).into_iter().map(|m| m.peer).collect()
    }

    /// Zeroes every score and closes all open windows.
    pub fn reset(&mut self) {
        for m in &mut self.members {
            m.points = 0.0;
        }
        for w in self.windows.values_mut() {
            *w = Window::Closed;
        }
    }

    /// Drops bookkeeping for a block no further receipt can arrive for.
    pub fn forget(&mut self, block: BlockId) {
        self.windows.remove(&block);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(peers: &[u32]) -> ScoringSet {
        let mut s = ScoringSet::new();
        for &p in peers {
            s.add(NodeId(p));
        }
        s
    }

    #[test]
    fn first_peer_gets_gap_to_second() {
        let mut s = set(&[1, 2, 3]);
        let b = BlockId(0);
        assert_eq!(s.observe(b, NodeId(1), SimTime(1000.0)), None);
        assert_eq!(
            s.observe(b, NodeId(2), SimTime(1040.0)),
            Some(Award { peer: NodeId(1), points: 40.0 })
        );
        assert_eq!(s.observe(b, NodeId(3), SimTime(1100.0)), None);
        assert_eq!(s.points_of(NodeId(1)), Some(40.0));
        assert_eq!(s.points_of(NodeId(2)), Some(0.0));
        assert_eq!(s.points_of(NodeId(3)), Some(0.0));
    }

    #[test]
    fn outsiders_do_not_open_windows() {
        let mut s = set(&[1, 2]);
        let b = BlockId(4);
        assert_eq!(s.observe(b, NodeId(9), SimTime(900.0)), None);
        assert_eq!(s.window(b), None);
        s.observe(b, NodeId(1), SimTime(1000.0));
        let award = s.observe(b, NodeId(2), SimTime(1050.0)).unwrap();
        assert_eq!(award, Award { peer: NodeId(1), points: 50.0 });
    }

    #[test]
    fn repeat_from_same_peer_keeps_window_open() {
        let mut s = set(&[1, 2]);
        let b = BlockId(0);
        s.observe(b, NodeId(1), SimTime(10.0));
        assert_eq!(s.observe(b, NodeId(1), SimTime(20.0)), None);
        assert_eq!(s.observe(b, NodeId(2), SimTime(35.0)).unwrap().points, 25.0);
    }

    #[test]
    fn rank_and_cut_keeps_top() {
        let mut s = set(&[10, 11, 12, 13, 14]);
        for (p, pts) in [(10, 500.0), (11, 300.0), (12, 120.0), (13, 40.0), (14, 0.0)] {
            s.members.iter_mut().find(|m| m.peer == NodeId(p)).unwrap().points = pts;
        }
        let mut removed = s.cut(3);
        removed.sort();
        assert_eq!(removed, vec![NodeId(13), NodeId(14)]);
        s.reset();
        assert!(s.members().iter().all(|m| m.points == 0.0));
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn tie_at_cut_keeps_lower_id() {
        let mut s = set(&[7, 3, 5]);
        for (p, pts) in [(7, 90.0), (3, 40.0), (5, 40.0)] {
            s.members.iter_mut().find(|m| m.peer == NodeId(p)).unwrap().points = pts;
        }
        assert_eq!(s.cut(2), vec![NodeId(5)]);
        assert!(s.contains(NodeId(3)));
    }

    #[test]
    fn reset_closes_windows_without_award() {
        let mut s = set(&[1, 2]);
        let b = BlockId(0);
        s.observe(b, NodeId(1), SimTime(5.0));
        s.reset();
        assert_eq!(s.window(b), Some(Window::Closed));
        assert_eq!(s.observe(b, NodeId(2), SimTime(8.0)), None);
        assert_eq!(s.points_of(NodeId(1)), Some(0.0));
    }

    #[test]
    fn consistent_thirty_msec_lead_over_a_round() {
        let mut s = set(&[1, 2, 3]);
        for b in 0..100u32 {
            let t = SimTime(b as f64 * 30_000.0);
            s.observe(BlockId(b), NodeId(1), t);
            s.observe(BlockId(b), NodeId(2), t + 30.0);
            s.observe(BlockId(b), NodeId(3), t + 45.0);
        }
        assert_eq!(s.points_of(NodeId(1)), Some(3000.0));
    }
}
