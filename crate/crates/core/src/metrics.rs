//! Dissemination-progress curves, delivery percentiles and overlay health.

use std::collections::VecDeque;

use thiserror::Error;

use crate::config::{BlockId, NodeId, SimTime};
use crate::protocol::topology::Topology;

/// Cumulative-mass slack when locating a percentile crossing.
const MASS_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no dissemination records")]
    EmptyInput,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Delivery times of one block; `None` means never delivered.
#[derive(Clone, Debug, PartialEq)]
pub struct DisseminationRecord {
    pub block: BlockId,
    pub miner: NodeId,
    pub generated_at: SimTime,
    pub deliver_time_of: Vec<Option<SimTime>>,
}

impl DisseminationRecord {
    /// Elapsed msec from generation to delivery, per node.
    pub fn offsets(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.deliver_time_of
            .iter()
            .map(move |t| t.map(|t| t - self.generated_at))
    }

    pub fn undelivered(&self) -> usize {
        self.deliver_time_of.iter().filter(|t| t.is_none()).count()
    }
}

/// Fraction of (node, block) pairs not yet delivered, sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgressCurve {
    pub grid_step: f64,
    /// `(elapsed_msec, frac_not_delivered)`, ascending in time.
    pub points: Vec<(f64, f64)>,
}

impl ProgressCurve {
    /// Value at an arbitrary elapsed time (the grid point at or before it).
    pub fn at(&self, elapsed: f64) -> f64 {
        let idx = self.points.partition_point(|&(t, _)| t <= elapsed);
        if idx == 0 {
            1.0
        } else {
            self.points[idx - 1].1
        }
    }

    pub fn floor(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.1)
    }
}

pub fn progress_curve(records: &[DisseminationRecord], grid_step: f64) -> Result<ProgressCurve, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(MetricsError::InvalidArgument(format!("grid step {grid_step}")));
    }
    let per_block: Vec<(Vec<f64>, usize)> = records
        .iter()
        .map(|r| {
            let mut finite: Vec<f64> = r.offsets().flatten().collect();
            finite.sort_by(f64::total_cmp);
            (finite, r.deliver_time_of.len())
        })
        .collect();
    let horizon = per_block
        .iter()
        .filter_map(|(f, _)| f.last().copied())
        .fold(0.0f64, f64::max);
    let steps = (horizon / grid_step).ceil() as usize;
    let mut cursors = vec![0usize; per_block.len()];
    let mut points = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = i as f64 * grid_step;
        let mut sum = 0.0;
        for ((finite, n), cur) in per_block.iter().zip(cursors.iter_mut()) {
            while *cur < finite.len() && finite[*cur] <= t {
                *cur += 1;
            }
            if *n > 0 {
                sum += (*n - *cur) as f64 / *n as f64;
            }
        }
        points.push((t, sum / per_block.len() as f64));
    }
    Ok(ProgressCurve { grid_step, points })
}

/// Elapsed time by which a fraction `p` of (node, block) pairs, averaged
/// across blocks, has been delivered. `+inf` when never reached.
pub fn delivery_percentiles(records: &[DisseminationRecord], levels: &[f64]) -> Result<Vec<(f64, f64)>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if let Some(p) = levels.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(MetricsError::InvalidArgument(format!("level {p} outside (0, 1]")));
    }
    let blocks = records.len() as f64;
    let mut weighted: Vec<(f64, f64)> = records
        .iter()
        .flat_map(|r| {
            let w = 1.0 / (r.deliver_time_of.len().max(1) as f64 * blocks);
            r.offsets().flatten().map(move |o| (o, w))
        })
        .collect();
    weighted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Cumulative delivered mass at each distinct offset.
    let mut steps: Vec<(f64, f64)> = Vec::new();
    let mut mass = 0.0;
    for (o, w) in weighted {
        mass += w;
        match steps.last_mut() {
            Some(last) if last.0 == o => last.1 = mass,
            _ => steps.push((o, mass)),
        }
    }
    Ok(levels
        .iter()
        .map(|&p| {
            let t = steps
                .iter()
                .find(|&&(_, m)| m >= p - MASS_EPS)
                .map_or(f64::INFINITY, |&(o, _)| o);
            (p, t)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverlayStats {
    pub components: usize,
    pub min_degree: usize,
    pub mean_degree: f64,
    pub max_degree: usize,
    pub isolated: usize,
}

/// Connectivity and degree statistics of the undirected link graph.
pub fn overlay_stats(topology: &Topology) -> OverlayStats {
    let n = topology.node_count();
    let mut adj = vec![Vec::new(); n];
    for (u, v) in topology.links() {
        adj[u.index()].push(v.index());
        adj[v.index()].push(u.index());
    }
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    let degrees: Vec<usize> = adj.iter().map(Vec::len).collect();
    OverlayStats {
        components,
        min_degree: degrees.iter().copied().min().unwrap_or(0),
        mean_degree: if n == 0 {
            0.0
        } else {
            degrees.iter().sum::<usize>() as f64 / n as f64
        },
        max_degree: degrees.iter().copied().max().unwrap_or(0),
        isolated: degrees.iter().filter(|&&d| d == 0).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ForwardingMode;

    fn record(offsets: &[Option<f64>]) -> DisseminationRecord {
        DisseminationRecord {
            block: BlockId(0),
            miner: NodeId(0),
            generated_at: SimTime(1000.0),
            deliver_time_of: offsets.iter().map(|o| o.map(|o| SimTime(1000.0 + o))).collect(),
        }
    }

    #[test]
    fn curve_counts_pairs_beyond_t() {
        let recs = [record(&[Some(0.0), Some(85.0), Some(200.0)])];
        let c = progress_curve(&recs, 10.0).unwrap();
        assert_eq!(c.at(100.0), 1.0 / 3.0);
        assert_eq!(c.points[0], (0.0, 2.0 / 3.0));
        assert_eq!(c.floor(), 0.0);
        assert_eq!(c.points.last().unwrap().0, 200.0);
    }

    #[test]
    fn instant_delivery_is_flat_zero() {
        let recs = [record(&[Some(0.0); 4])];
        let c = progress_curve(&recs, 10.0).unwrap();
        assert!(c.points.iter().all(|&(_, f)| f == 0.0));
    }

    #[test]
    fn undelivered_node_sets_floor() {
        let mut offs = vec![Some(0.0); 9];
        offs.push(None);
        let c = progress_curve(&[record(&offs)], 10.0).unwrap();
        assert_eq!(c.floor(), 0.1);
    }

    #[test]
    fn percentiles_on_step_function() {
        let recs = [record(&[Some(0.0), Some(85.0), Some(200.0)])];
        let p = delivery_percentiles(&recs, &[0.5, 1.0]).unwrap();
        assert_eq!(p, vec![(0.5, 85.0), (1.0, 200.0)]);
    }

    #[test]
    fn partitioned_run_never_reaches_full() {
        let recs = [record(&[Some(0.0), Some(10.0), None])];
        let p = delivery_percentiles(&recs, &[0.5, 1.0]).unwrap();
        assert_eq!(p[0].1, 10.0);
        assert!(p[1].1.is_infinite());
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(progress_curve(&[], 10.0), Err(MetricsError::EmptyInput));
        assert_eq!(delivery_percentiles(&[], &[0.5]), Err(MetricsError::EmptyInput));
    }

    fn topo(n: usize, edges: &[(u32, u32)]) -> Topology {
        let mut sel = vec![Vec::new(); n];
        for &(u, v) in edges {
            sel[u as usize].push(NodeId(v));
        }
        Topology::new(sel, ForwardingMode::Undirected)
    }

    #[test]
    fn ring_stats() {
        let edges: Vec<(u32, u32)> = (0..10).map(|i| (i, (i + 1) % 10)).collect();
        let s = overlay_stats(&topo(10, &edges));
        assert_eq!(s.components, 1);
        assert_eq!((s.min_degree, s.max_degree), (2, 2));
        assert_eq!(s.mean_degree, 2.0);
    }

    #[test]
    fn two_triangles() {
        let s = overlay_stats(&topo(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]));
        assert_eq!(s.components, 2);
    }

    #[test]
    fn no_edges() {
        let s = overlay_stats(&topo(5, &[]));
        assert_eq!((s.components, s.isolated), (5, 5));
    }

    mod props {
        use super::*;
        use petgraph::unionfind::UnionFind;
        use proptest::prelude::*;

        fn records_strategy() -> impl Strategy<Value = Vec<DisseminationRecord>> {
            proptest::collection::vec(
                proptest::collection::vec(proptest::option::weighted(0.9, 0.0f64..500.0), 1..20),
                1..6,
            )
            .prop_map(|blocks| blocks.iter().map(|o| record(o)).collect())
        }

        proptest! {
            #[test]
            fn curve_non_increasing(recs in records_strategy(), step in 1.0f64..50.0) {
                let c = progress_curve(&recs, step).unwrap();
                for w in c.points.windows(2) {
                    prop_assert!(w[1].1 <= w[0].1);
                }
            }

            #[test]
            fn percentiles_monotone(recs in records_strategy()) {
                let levels = [0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0];
                let p = delivery_percentiles(&recs, &levels).unwrap();
                for w in p.windows(2) {
                    prop_assert!(w[1].1 >= w[0].1);
                }
            }

            #[test]
            fn components_match_union_find(
                n in 1usize..40,
                edges in proptest::collection::vec((0u32..40, 0u32..40), 0..60),
            ) {
                let edges: Vec<(u32, u32)> = edges
                    .into_iter()
                    .map(|(a, b)| (a % n as u32, b % n as u32))
                    .filter(|(a, b)| a != b)
                    .collect();
                let stats = overlay_stats(&topo(n, &edges));
                let mut uf = UnionFind::<usize>::new(n);
                for &(a, b) in &edges {
                    uf.union(a as usize, b as usize);
                }
                let mut roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
                roots.sort();
                roots.dedup();
                prop_assert_eq!(stats.components, roots.len());
            }
        }
    }
}
