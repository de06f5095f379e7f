//! Peer sampling stand-in: a perfect global sampler that returns uniformly
//! random responsive peers.
//!
//! A peer is responsive when it is not the requester, not excluded, and, if a
//! connection cap is configured, still below its inbound cap.

use rand::seq::IteratorRandom;
use rand::Rng;

use crate::config::NodeId;

/// Rejection attempts per requested peer before falling back to enumerating
/// the eligible set.
const REJECTION_BUDGET: usize = 32;

#[derive(Clone, Copy, Debug)]
pub struct SamplerView<'a> {
    pub population: usize,
    /// Inbound connection counters and the cap they must stay below.
    pub capacity: Option<(&'a [u32], u32)>,
}

impl<'a> SamplerView<'a> {
    pub fn uniform(population: usize) -> Self {
        SamplerView {
            population,
            capacity: None,
        }
    }

    pub fn with_capacity(population: usize, inbound: &'a [u32], max_inbound: u32) -> Self {
        SamplerView {
            population,
            capacity: Some((inbound, max_inbound)),
        }
    }

    fn has_room(&self, w: NodeId) -> bool {
        match self.capacity {
            Some((inbound, cap)) => inbound[w.index()] < cap,
            None => true,
        }
    }

    /// Up to `count` distinct peers drawn uniformly without replacement from
    /// the responsive population outside `exclude`. A short result means the
    /// candidates ran out.
    pub fn sample_responsive<R: Rng + ?Sized>(
        &self,
        requester: NodeId,
        exclude: &[NodeId],
        count: usize,
        rng: &mut R,
    ) -> Vec<NodeId> {
        let mut picked: Vec<NodeId> = Vec::with_capacity(count);
        if count == 0 || self.population == 0 {
            return picked;
        }
        let eligible = |w: NodeId, picked: &[NodeId]| {
            w != requester && self.has_room(w) && !exclude.contains(&w) && !picked.contains(&w)
        };
        let mut budget = REJECTION_BUDGET * count;
        while picked.len() < count && budget > 0 {
            budget -= 1;
            let w = NodeId(rng.random_range(0..self.population as u32));
            if eligible(w, &picked) {
                picked.push(w);
            }
        }
        if picked.len() < count {
            let rest: Vec<NodeId> = (0..self.population as u32)
                .map(NodeId)
                .filter(|&w| eligible(w, &picked))
                .collect();
            let need = count - picked.len();
            let mut extra = rest.into_iter().choose_multiple(rng, need);
            // choose_multiple does not randomize order; shuffle for fairness of
            // later prefix-based splits.
            use rand::seq::SliceRandom;
            extra.shuffle(rng);
            picked.extend(extra);
        }
        picked
    }
}
