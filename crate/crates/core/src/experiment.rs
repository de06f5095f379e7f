//! Calibrated single runs, parameter sweeps and their CSV outputs.
//!
//! A sweep point writes into `<out>/<scenario>/S{x}-C{y}-R{z}/`:
//!
//! * `config.toml`: the resolved configuration
//! * `records.csv`: `block,miner,generated_at,node,deliver_msec`
//! * `S{x}-C{y}-R{z}.csv`: `elapsed_msec,frac_not_delivered`
//! * `summary.csv`: `config,p50_msec,p90_msec,p99_msec,p100_msec,components_final`
//!
//! and every scenario directory gets a `summary.csv` with one row per point.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{BlockId, ConfigError, ExperimentConfig, NodeId, SimTime, ValidatedConfig};
use crate::latency::{LatencyError, LatencyModel};
use crate::metrics::{delivery_percentiles, overlay_stats, progress_curve, DisseminationRecord, MetricsError, OverlayStats};
use crate::protocol::topology::Topology;
use crate::protocol::{SimError, SimOptions, SimStats, Simulation};

pub const DEFAULT_GRID_STEP: f64 = 10.0;
pub const SUMMARY_LEVELS: [f64; 4] = [0.5, 0.9, 0.99, 1.0];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Latency(#[from] LatencyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("records file line {line}: {msg}")]
    Records { line: u64, msg: String },
}

/// Dump writers and extra bookkeeping for one run.
#[derive(Default)]
pub struct ExperimentOptions {
    /// Record p90 of every calibration round.
    pub track_calibration: bool,
    pub trace: Option<Box<dyn Write>>,
    pub snapshots: Option<Box<dyn Write>>,
}

/// Result of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct Experiment {
    pub records: Vec<DisseminationRecord>,
    pub topology: Topology,
    pub overlay: OverlayStats,
    pub stats: SimStats,
    /// p90 delivery time per calibration round, when tracked.
    pub calibration_p90: Vec<f64>,
}

impl Experiment {
    pub fn summary(&self, label: &str) -> Result<Summary, MetricsError> {
        Summary::from_records(label, &self.records, Some(self.overlay.components))
    }
}

/// One row of a summary CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub config: String,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub p100: f64,
    pub components_final: Option<usize>,
}

impl Summary {
    pub fn from_records(
        label: &str,
        records: &[DisseminationRecord],
        components: Option<usize>,
    ) -> Result<Self, MetricsError> {
        let p = delivery_percentiles(records, &SUMMARY_LEVELS)?;
        Ok(Summary {
            config: label.to_string(),
            p50: p[0].1,
            p90: p[1].1,
            p99: p[2].1,
            p100: p[3].1,
            components_final: components,
        })
    }

    const HEADER: [&'static str; 6] = ["config", "p50_msec", "p90_msec", "p99_msec", "p100_msec", "components_final"];

    fn row(&self) -> [String; 6] {
        [
            self.config.clone(),
            self.p50.to_string(),
            self.p90.to_string(),
            self.p99.to_string(),
            self.p100.to_string(),
            self.components_final.map_or(String::new(), |c| c.to_string()),
        ]
    }
}

/// Runs `calibration_rounds × k` unrecorded blocks with the heuristics
/// active, then `measurement_blocks` recorded ones.
pub fn run_experiment(cfg: &ValidatedConfig, model: LatencyModel) -> Result<Experiment, ExperimentError> {
    run_experiment_with(cfg, model, ExperimentOptions::default())
}

pub fn run_experiment_with(
    cfg: &ValidatedConfig,
    model: LatencyModel,
    opts: ExperimentOptions,
) -> Result<Experiment, ExperimentError> {
    let sim_opts = SimOptions {
        trace: opts.trace,
        snapshots: opts.snapshots,
        ..SimOptions::default()
    };
    let mut sim = Simulation::with_options(cfg.clone(), model, sim_opts)?;
    let mut calibration_p90 = Vec::new();
    // Always calibrate round by round so tracking does not change the run.
    for _ in 0..cfg.calibration_rounds {
        let recs = sim.run_blocks(cfg.blocks_per_round, opts.track_calibration);
        if opts.track_calibration {
            calibration_p90.push(delivery_percentiles(&recs, &[0.9])?[0].1);
        }
    }
    let records = sim.run_blocks(cfg.measurement_blocks, true);
    sim.finish()?;
    let topology = sim.topology();
    let overlay = overlay_stats(&topology);
    info!(
        "{}: {} blocks recorded, {} components, {} events",
        cfg.label(),
        records.len(),
        overlay.components,
        sim.stats().events
    );
    Ok(Experiment {
        records,
        overlay,
        topology,
        stats: sim.stats(),
        calibration_p90,
    })
}

/// Parameter overrides applied to every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub body_validation: f64,
    pub total_rtts: f64,
}

impl Scenario {
    pub fn new(body_validation: f64, total_rtts: f64) -> Self {
        Scenario {
            name: format!("body{body_validation}_rtt{total_rtts}"),
            body_validation,
            total_rtts,
        }
    }

    /// The default scenario plus body-delay and RTT-budget variations.
    pub fn standard() -> Vec<Scenario> {
        vec![
            Scenario::new(50.0, 1.5),
            Scenario::new(20.0, 1.5),
            Scenario::new(100.0, 1.5),
            Scenario::new(50.0, 0.5),
            Scenario::new(50.0, 3.5),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub total_degree: u32,
    /// `(S, C, R)` points.
    pub grid: Vec<(u32, u32, u32)>,
    pub scenarios: Vec<Scenario>,
}

impl SweepSpec {
    /// The headline configurations at total degree 8.
    pub fn headline() -> Self {
        SweepSpec {
            total_degree: 8,
            grid: vec![
                (0, 0, 8),
                (4, 0, 4),
                (0, 4, 4),
                (7, 0, 1),
                (0, 7, 1),
                (1, 1, 6),
                (3, 3, 2),
            ],
            scenarios: Scenario::standard(),
        }
    }

    /// Every valid point with `S + C + R = d` and at least one refresh link.
    pub fn triangle(d: u32) -> Self {
        let mut grid = Vec::new();
        for s in 0..=d {
            for c in 0..=d - s {
                let r = d - s - c;
                let cfg = ExperimentConfig::scr(s, c, r);
                if r >= 1 && cfg.validate().is_ok() {
                    grid.push((s, c, r));
                }
            }
        }
        SweepSpec {
            total_degree: d,
            grid,
            scenarios: Scenario::standard(),
        }
    }

    /// Scoring-only edge: `S` from 0 to `d - 1`, `C = 0`, `R = d - S`.
    pub fn scoring_edge(d: u32) -> Self {
        SweepSpec {
            total_degree: d,
            grid: (0..d).map(|s| (s, 0, d - s)).collect(),
            scenarios: Scenario::standard(),
        }
    }

    /// Close-only edge: `C` from 0 to `d - 1`, `S = 0`, `R = d - C`.
    pub fn close_edge(d: u32) -> Self {
        SweepSpec {
            total_degree: d,
            grid: (0..d).map(|c| (0, c, d - c)).collect(),
            scenarios: Scenario::standard(),
        }
    }

    /// Configurations of every point, scenario-major, not yet validated.
    pub fn points(&self, base: &ExperimentConfig) -> Vec<(Scenario, ExperimentConfig)> {
        let mut out = Vec::new();
        for sc in &self.scenarios {
            for &(s, c, r) in &self.grid {
                let cfg = ExperimentConfig {
                    scoring_links: s,
                    close_links: c,
                    random_links: r,
                    body_validation: sc.body_validation,
                    total_rtts: sc.total_rtts,
                    ..base.clone()
                };
                out.push((sc.clone(), cfg));
            }
        }
        out
    }
}

#[derive(Debug)]
pub struct PointOutcome {
    pub scenario: String,
    pub config: String,
    pub dir: PathBuf,
    pub result: Result<Summary, ExperimentError>,
}

/// Runs every sweep point, in parallel, writing outputs under `out_dir`.
/// A failing point is reported in its outcome; the others still run.
pub fn run_sweep<F>(spec: &SweepSpec, base: &ExperimentConfig, model_for: F, out_dir: &Path) -> Vec<PointOutcome>
where
    F: Fn(&ValidatedConfig) -> Result<LatencyModel, LatencyError> + Sync,
{
    let points = spec.points(base);
    let outcomes: Vec<PointOutcome> = points
        .into_par_iter()
        .map(|(sc, cfg)| {
            let config = cfg.label();
            let dir = out_dir.join(&sc.name).join(&config);
            let result = cfg
                .validate()
                .map_err(ExperimentError::from)
                .and_then(|cfg| run_point(&cfg, &model_for, &dir));
            PointOutcome {
                scenario: sc.name,
                config,
                dir,
                result,
            }
        })
        .collect();
    for sc in &spec.scenarios {
        let rows: Vec<&Summary> = outcomes
            .iter()
            .filter(|o| o.scenario == sc.name)
            .filter_map(|o| o.result.as_ref().ok())
            .collect();
        let path = out_dir.join(&sc.name).join("summary.csv");
        let written = fs::create_dir_all(out_dir.join(&sc.name))
            .map_err(ExperimentError::from)
            .and_then(|_| write_summaries(File::create(&path)?, rows.into_iter()));
        if let Err(e) = written {
            log::error!("cannot write {}: {e}", path.display());
        }
    }
    outcomes
}

fn run_point<F>(cfg: &ValidatedConfig, model_for: &F, dir: &Path) -> Result<Summary, ExperimentError>
where
    F: Fn(&ValidatedConfig) -> Result<LatencyModel, LatencyError>,
{
    let model = model_for(cfg)?;
    let exp = run_experiment(cfg, model)?;
    write_outputs(cfg, &exp, dir)
}

/// Writes the config echo, records, curve and summary of one run into `dir`.
pub fn write_outputs(cfg: &ValidatedConfig, exp: &Experiment, dir: &Path) -> Result<Summary, ExperimentError> {
    fs::create_dir_all(dir)?;
    let label = cfg.label();
    fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
    write_records(File::create(dir.join("records.csv"))?, &exp.records)?;
    write_curve(File::create(dir.join(format!("{label}.csv")))?, &exp.records, DEFAULT_GRID_STEP)?;
    let summary = exp.summary(&label)?;
    write_summaries(File::create(dir.join("summary.csv"))?, std::iter::once(&summary))?;
    Ok(summary)
}

pub fn write_records<W: Write>(out: W, records: &[DisseminationRecord]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(out));
    w.write_record(["block", "miner", "generated_at", "node", "deliver_msec"])?;
    for r in records {
        let (block, miner, gen) = (r.block.to_string(), r.miner.to_string(), r.generated_at.msec().to_string());
        for (node, t) in r.deliver_time_of.iter().enumerate() {
            let t = t.map_or(String::new(), |t| t.msec().to_string());
            w.write_record([block.as_str(), miner.as_str(), gen.as_str(), &node.to_string(), &t])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a records CSV written by [`write_records`].
pub fn read_records<R: Read>(input: R) -> Result<Vec<DisseminationRecord>, ExperimentError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out: Vec<DisseminationRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: &str| ExperimentError::Records { line, msg: msg.to_string() };
        if rec.len() != 5 {
            return Err(bad("expected 5 fields"));
        }
        let block: u32 = rec[0].parse().map_err(|_| bad("bad block id"))?;
        let miner: u32 = rec[1].parse().map_err(|_| bad("bad miner id"))?;
        let gen: f64 = rec[2].parse().map_err(|_| bad("bad generation time"))?;
        let node: usize = rec[3].parse().map_err(|_| bad("bad node id"))?;
        let t = if rec[4].is_empty() {
            None
        } else {
            Some(SimTime(rec[4].parse().map_err(|_| bad("bad delivery time"))?))
        };
        if out.last().map_or(true, |r| r.block != BlockId(block)) {
            out.push(DisseminationRecord {
                block: BlockId(block),
                miner: NodeId(miner),
                generated_at: SimTime(gen),
                deliver_time_of: Vec::new(),
            });
        }
        let r = out.last_mut().expect("pushed above");
        if node != r.deliver_time_of.len() {
            return Err(bad("nodes of a block must be listed in order"));
        }
        r.deliver_time_of.push(t);
    }
    Ok(out)
}

pub fn write_curve<W: Write>(out: W, records: &[DisseminationRecord], grid_step: f64) -> Result<(), ExperimentError> {
    let curve = progress_curve(records, grid_step)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(out));
    w.write_record(["elapsed_msec", "frac_not_delivered"])?;
    for (t, f) in curve.points {
        w.write_record([t.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summaries<'a, W: Write>(
    out: W,
    rows: impl Iterator<Item = &'a Summary>,
) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(Summary::HEADER)?;
    for s in rows {
        w.write_record(s.row())?;
    }
    w.flush()?;
    Ok(())
}
