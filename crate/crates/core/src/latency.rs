//! One-way link latencies between nodes.
//!
//! Three sources are supported: a city-to-city trace with nodes placed in
//! cities by weight, a synthetic planar model (euclidean distance times a
//! scale plus a base), and an explicit node-to-node matrix. All are symmetric
//! and strictly positive off the diagonal. One-way latency is the canonical
//! unit; a round trip always costs twice the one-way value.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

use crate::config::NodeId;
use crate::engine::{derive_stream, streams};

#[derive(Debug, Error)]
pub enum LatencyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("matrix is not square: {rows} rows, {cols} columns")]
    Dimension { rows: usize, cols: usize },
    #[error("invalid placement weights: {0}")]
    Weight(String),
    #[error("latency of node {0} to itself is undefined")]
    SelfLatency(NodeId),
    #[error("node {0} outside the latency model's population of {1}")]
    UnknownNode(NodeId, usize),
    #[error("non-positive latency {value} between distinct entries {a} and {b}")]
    NonPositive { a: usize, b: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Symmetric city-to-city one-way latency table.
#[derive(Clone, Debug, PartialEq)]
pub struct CityMatrix {
    pub city_names: Vec<String>,
    values: Vec<f64>,
    pub is_rtt_input: bool,
}

impl CityMatrix {
    /// Builds from a row-major table of one-way values, symmetrizing it.
    pub fn from_rows(
        city_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        values_are_rtt: bool,
    ) -> Result<Self, LatencyError> {
        let n = city_names.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(LatencyError::Dimension {
                rows: rows.len(),
                cols: rows.first().map_or(n, Vec::len),
            });
        }
        let scale = if values_are_rtt { 0.5 } else { 1.0 };
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (rows[i][j], rows[j][i]);
                if !(a.is_finite() && a >= 0.0) {
                    return Err(LatencyError::Parse {
                        line: i + 2,
                        msg: format!("latency {a} is not a finite non-negative number"),
                    });
                }
                values[i * n + j] = if i == j { 0.0 } else { (a + b) / 2.0 * scale };
            }
        }
        Ok(CityMatrix {
            city_names,
            values,
            is_rtt_input: values_are_rtt,
        })
    }

    pub fn len(&self) -> usize {
        self.city_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.city_names.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.city_names.iter().position(|c| c == name)
    }

    fn check_positive(&self) -> Result<(), LatencyError> {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                let v = self.get(i, j);
                if i != j && v <= 0.0 {
                    return Err(LatencyError::NonPositive { a: i, b: j, value: v });
                }
            }
        }
        Ok(())
    }
}

/// Reads the `,name1,name2,...` / `nameI,v1,v2,...` matrix format.
pub fn parse_city_matrix<R: Read>(reader: R, values_are_rtt: bool) -> Result<CityMatrix, LatencyError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?,
        None => {
            return Err(LatencyError::Parse {
                line: 1,
                msg: "empty file".into(),
            })
        }
    };
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (idx, rec) in records.enumerate() {
        let line = idx + 2;
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != names.len() + 1 {
            return Err(LatencyError::Parse {
                line,
                msg: format!("expected {} fields, found {}", names.len() + 1, rec.len()),
            });
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>().map_err(|_| LatencyError::Parse {
                    line,
                    msg: format!("`{cell}` is not a number"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((rec[0].to_owned(), row));
    }
    if rows.len() != names.len() {
        return Err(LatencyError::Dimension {
            rows: rows.len(),
            cols: names.len(),
        });
    }
    for (i, (name, _)) in rows.iter().enumerate() {
        if *name != names[i] {
            return Err(LatencyError::Parse {
                line: i + 2,
                msg: format!("row name `{name}` does not match column `{}`", names[i]),
            });
        }
    }
    CityMatrix::from_rows(names, rows.into_iter().map(|(_, r)| r).collect(), values_are_rtt)
}

pub fn load_city_matrix(path: impl AsRef<Path>, values_are_rtt: bool) -> Result<CityMatrix, LatencyError> {
    parse_city_matrix(std::fs::File::open(path)?, values_are_rtt)
}

/// Reads `city,weight` lines, returning weights in matrix order. Cities
/// absent from the file get weight 0.
pub fn parse_weights<R: Read>(reader: R, matrix: &CityMatrix) -> Result<Vec<f64>, LatencyError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut by_name = HashMap::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = idx + 1;
        if rec.len() != 2 {
            return Err(LatencyError::Parse {
                line,
                msg: "expected `city,weight`".into(),
            });
        }
        let Ok(w) = rec[1].parse::<f64>() else {
            if idx == 0 {
                continue; // header row
            }
            return Err(LatencyError::Parse {
                line,
                msg: format!("`{}` is not a number", &rec[1]),
            });
        };
        if matrix.index_of(&rec[0]).is_none() {
            return Err(LatencyError::Weight(format!(
                "city `{}` is not in the latency matrix",
                &rec[0]
            )));
        }
        by_name.insert(rec[0].to_owned(), w);
    }
    Ok(matrix
        .city_names
        .iter()
        .map(|c| by_name.get(c).copied().unwrap_or(0.0))
        .collect())
}

pub fn load_weights(path: impl AsRef<Path>, matrix: &CityMatrix) -> Result<Vec<f64>, LatencyError> {
    parse_weights(std::fs::File::open(path)?, matrix)
}

const BUNDLED_CITIES: &str = include_str!("../data/cities.csv");
const BUNDLED_WEIGHTS: &str = include_str!("../data/weights.csv");

/// The city RTT matrix shipped in `data/cities.csv`.
pub fn bundled_city_matrix() -> CityMatrix {
    parse_city_matrix(BUNDLED_CITIES.as_bytes(), true).expect("bundled matrix parses")
}

/// Placement weights shipped in `data/weights.csv`, in `matrix` order.
pub fn bundled_weights(matrix: &CityMatrix) -> Vec<f64> {
    parse_weights(BUNDLED_WEIGHTS.as_bytes(), matrix).expect("bundled weights match the bundled matrix")
}

/// Trace model for `node_count` nodes placed by `weights` with `seed`.
pub fn trace_model(
    matrix: Arc<CityMatrix>,
    weights: &[f64],
    node_count: usize,
    intra_city: f64,
    seed: u64,
) -> Result<LatencyModel, LatencyError> {
    let placement = place_nodes(&matrix, weights, node_count, seed)?;
    LatencyModel::trace(matrix, placement, intra_city)
}

/// Node-to-city assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub city_of: Vec<u32>,
    /// Normalized per-city sampling probabilities.
    pub weights: Vec<f64>,
}

impl Placement {
    pub fn nodes_per_city(&self) -> Vec<usize> {
        let mut counts = vec![0; self.weights.len()];
        for &c in &self.city_of {
            counts[c as usize] += 1;
        }
        counts
    }
}

/// Draws each node's city independently from the normalized weights.
pub fn place_nodes(
    matrix: &CityMatrix,
    weights: &[f64],
    node_count: usize,
    seed: u64,
) -> Result<Placement, LatencyError> {
    if weights.len() != matrix.len() {
        return Err(LatencyError::Weight(format!(
            "{} weights for {} cities",
            weights.len(),
            matrix.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(LatencyError::Weight(format!("weight {w} is negative or not finite")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(LatencyError::Weight("all weights are zero".into()));
    }
    let normalized: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let dist = WeightedIndex::new(&normalized).map_err(|e| LatencyError::Weight(e.to_string()))?;
    let mut rng = derive_stream(seed, streams::PLACEMENT);
    let city_of = (0..node_count).map(|_| dist.sample(&mut rng) as u32).collect();
    Ok(Placement {
        city_of,
        weights: normalized,
    })
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Trace {
        matrix: Arc<CityMatrix>,
        placement: Placement,
        intra_city: f64,
    },
    Planar {
        points: Vec<(f64, f64)>,
        scale: f64,
        base: f64,
    },
    Explicit {
        n: usize,
        values: Arc<Vec<f64>>,
    },
}

/// Immutable source of one-way latency between any two nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct LatencyModel {
    kind: Kind,
}

impl LatencyModel {
    pub fn trace(matrix: Arc<CityMatrix>, placement: Placement, intra_city: f64) -> Result<Self, LatencyError> {
        if !(intra_city.is_finite() && intra_city > 0.0) {
            return Err(LatencyError::Parameter(format!(
                "intra-city latency {intra_city} must be positive"
            )));
        }
        if placement.city_of.iter().any(|&c| c as usize >= matrix.len()) {
            return Err(LatencyError::Weight("placement refers to an unknown city".into()));
        }
        matrix.check_positive()?;
        Ok(LatencyModel {
            kind: Kind::Trace {
                matrix,
                placement,
                intra_city,
            },
        })
    }

    /// Model over given planar points: `distance × scale + base`.
    pub fn planar(points: Vec<(f64, f64)>, scale: f64, base: f64) -> Result<Self, LatencyError> {
        if !(scale > 0.0 && base > 0.0) {
            return Err(LatencyError::Parameter(format!(
                "planar scale {scale} and base {base} must be positive"
            )));
        }
        Ok(LatencyModel {
            kind: Kind::Planar { points, scale, base },
        })
    }

    /// Node-level matrix; entry `(i, j)` is the one-way latency between nodes.
    pub fn explicit(matrix: &CityMatrix) -> Result<Self, LatencyError> {
        matrix.check_positive()?;
        Ok(LatencyModel {
            kind: Kind::Explicit {
                n: matrix.len(),
                values: Arc::new(matrix.values.clone()),
            },
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Trace { .. } => "trace",
            Kind::Planar { .. } => "planar",
            Kind::Explicit { .. } => "explicit-matrix",
        }
    }

    pub fn node_count(&self) -> usize {
        match &self.kind {
            Kind::Trace { placement, .. } => placement.city_of.len(),
            Kind::Planar { points, .. } => points.len(),
            Kind::Explicit { n, .. } => *n,
        }
    }

    pub fn placement(&self) -> Option<&Placement> {
        match &self.kind {
            Kind::Trace { placement, .. } => Some(placement),
            _ => None,
        }
    }

    pub fn points(&self) -> Option<&[(f64, f64)]> {
        match &self.kind {
            Kind::Planar { points, .. } => Some(points),
            _ => None,
        }
    }

    /// Checked one-way latency in msec.
    pub fn latency(&self, u: NodeId, v: NodeId) -> Result<f64, LatencyError> {
        let n = self.node_count();
        for x in [u, v] {
            if x.index() >= n {
                return Err(LatencyError::UnknownNode(x, n));
            }
        }
        if u == v {
            return Err(LatencyError::SelfLatency(u));
        }
        Ok(self.one_way(u, v))
    }

    /// Unchecked fast path for the event loop; `u != v` and both in range.
    #[inline]
    pub fn one_way(&self, u: NodeId, v: NodeId) -> f64 {
        debug_assert_ne!(u, v);
        match &self.kind {
            Kind::Trace {
                matrix,
                placement,
                intra_city,
            } => {
                let (a, b) = (
                    placement.city_of[u.index()] as usize,
                    placement.city_of[v.index()] as usize,
                );
                if a == b {
                    *intra_city
                } else {
                    matrix.get(a, b)
                }
            }
            Kind::Planar { points, scale, base } => {
                let (p, q) = (points[u.index()], points[v.index()]);
                (p.0 - q.0).hypot(p.1 - q.1) * scale + base
            }
            Kind::Explicit { n, values } => values[u.index() * n + v.index()],
        }
    }

    /// Writes the model as a node-level one-way matrix in the city-matrix
    /// CSV format.
    pub fn write_matrix<W: std::io::Write>(&self, out: W) -> Result<(), LatencyError> {
        let n = self.node_count();
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec![String::new()];
        header.extend((0..n).map(|i| format!("n{i}")));
        wtr.write_record(&header)?;
        for i in 0..n {
            let mut row = vec![format!("n{i}")];
            for j in 0..n {
                let v = if i == j {
                    0.0
                } else {
                    self.one_way(NodeId(i as u32), NodeId(j as u32))
                };
                row.push(format!("{v}"));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Uniform planar placement in the unit square.
pub fn gen_planar(node_count: usize, scale: f64, base: f64, seed: u64) -> Result<LatencyModel, LatencyError> {
    let mut rng = derive_stream(seed, streams::PLANAR);
    let points = (0..node_count)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    LatencyModel::planar(points, scale, base)
}

/// Planar placement in `clusters` tight groups: cluster centres are uniform
/// in the unit square and members are offset uniformly within `±spread`.
pub fn gen_clustered_planar(
    node_count: usize,
    clusters: usize,
    spread: f64,
    scale: f64,
    base: f64,
    seed: u64,
) -> Result<LatencyModel, LatencyError> {
    if clusters == 0 {
        return Err(LatencyError::Parameter("at least one cluster required".into()));
    }
    let mut rng = derive_stream(seed, streams::PLANAR);
    let centres: Vec<(f64, f64)> = (0..clusters)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    let points = (0..node_count)
        .map(|i| {
            let c = centres[i % clusters];
            (
                c.0 + rng.random_range(-spread..=spread),
                c.1 + rng.random_range(-spread..=spread),
            )
        })
        .collect();
    LatencyModel::planar(points, scale, base)
}
