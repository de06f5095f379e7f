use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use scramble::experiment::{
    read_records, run_experiment_with, run_sweep, write_curve, write_outputs, write_summaries, ExperimentOptions,
    Scenario, Summary, SweepSpec, DEFAULT_GRID_STEP,
};
use scramble::latency::{
    bundled_city_matrix, bundled_weights, gen_clustered_planar, gen_planar, load_city_matrix, load_weights,
    parse_city_matrix, trace_model, CityMatrix,
};
use scramble::oracle::{first_arrival_delivery, shortest_path_delivery};
use scramble::{ExperimentConfig, ForwardingMode, LatencyModel, NodeId, SimOptions, Simulation, ValidatedConfig};

#[derive(Parser)]
#[command(name = "scramble", version, about = "Overlay-construction block dissemination simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its records, curve and summary.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        latency: LatencyArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Dump every event as CSV.
        #[arg(long)]
        event_trace: Option<PathBuf>,
        /// Dump set contents at every refresh as CSV.
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Run a grid of S-C-R points under one or more scenarios.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        latency: LatencyArgs,
        #[arg(long, value_enum, default_value_t = Grid::Headline)]
        grid: Grid,
        /// Total degree S + C + R of the grid.
        #[arg(long, default_value_t = 8)]
        degree: u32,
        /// Only the configured body delay and RTT budget instead of the
        /// standard scenario set.
        #[arg(long)]
        single_scenario: bool,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Write a planar node-level latency matrix.
    GenLatency {
        #[arg(long = "node_count", default_value_t = 1000)]
        node_count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100.0)]
        planar_scale: f64,
        #[arg(long, default_value_t = 5.0)]
        planar_base: f64,
        /// Group nodes into this many clusters instead of a uniform square.
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        cluster_spread: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Recompute curves and summaries from records files.
    Analyze {
        /// `records.csv` files; each becomes one summary row.
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
    },
    /// Compare a frozen overlay against the shortest-path delivery oracle.
    Oracle {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        latency: LatencyArgs,
        /// Number of blocks, mined by distinct nodes.
        #[arg(long, default_value_t = 10)]
        blocks: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    Headline,
    Triangle,
    ScoringEdge,
    CloseEdge,
}

/// Overrides on top of `--config` (or the defaults), named like the keys.
#[derive(Args)]
#[allow(non_snake_case)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "node_count")]
    node_count: Option<u32>,
    #[arg(long = "S")]
    S: Option<u32>,
    #[arg(long = "C")]
    C: Option<u32>,
    #[arg(long = "R")]
    R: Option<u32>,
    #[arg(long = "k")]
    k: Option<u32>,
    #[arg(long = "close_period")]
    close_period: Option<f64>,
    #[arg(long = "ping_count")]
    ping_count: Option<u32>,
    #[arg(long = "header_validation")]
    header_validation: Option<f64>,
    #[arg(long = "body_validation")]
    body_validation: Option<f64>,
    #[arg(long = "total_rtts")]
    total_rtts: Option<f64>,
    #[arg(long = "calibration_rounds")]
    calibration_rounds: Option<u32>,
    #[arg(long = "measurement_blocks")]
    measurement_blocks: Option<u32>,
    #[arg(long = "inter_block_gap")]
    inter_block_gap: Option<f64>,
    #[arg(long = "forwarding_mode")]
    forwarding_mode: Option<ForwardingMode>,
    #[arg(long = "max_inbound")]
    max_inbound: Option<u32>,
    #[arg(long = "intra_city_latency")]
    intra_city_latency: Option<f64>,
    #[arg(long = "latency_jitter")]
    latency_jitter: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),* $(,)?) => {
                $(if let Some(v) = self.$flag { c.$field = v; })*
            };
        }
        set!(
            seed => seed,
            node_count => node_count,
            S => scoring_links,
            C => close_links,
            R => random_links,
            k => blocks_per_round,
            close_period => close_period,
            ping_count => ping_count,
            header_validation => header_validation,
            body_validation => body_validation,
            total_rtts => total_rtts,
            calibration_rounds => calibration_rounds,
            measurement_blocks => measurement_blocks,
            inter_block_gap => inter_block_gap,
            forwarding_mode => forwarding_mode,
            intra_city_latency => intra_city_latency,
            latency_jitter => latency_jitter,
        );
        if self.max_inbound.is_some() {
            c.max_inbound = self.max_inbound;
        }
        Ok(c)
    }

    fn validated(&self) -> Result<ValidatedConfig> {
        Ok(self.resolve()?.validate()?)
    }
}

/// Where node-to-node latencies come from. Without flags, the bundled city
/// trace is used.
#[derive(Args)]
struct LatencyArgs {
    /// City latency matrix CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// `city,weight` placement weights for `--trace`.
    #[arg(long, requires = "trace")]
    weights: Option<PathBuf>,
    /// Values in `--trace` are one-way latencies rather than RTTs.
    #[arg(long, requires = "trace")]
    one_way: bool,
    /// Node-level matrix as written by `gen-latency`.
    #[arg(long, conflicts_with_all = ["trace", "synthetic"])]
    matrix: Option<PathBuf>,
    /// Planar synthetic model seeded from the run seed.
    #[arg(long, conflicts_with = "trace")]
    synthetic: bool,
    #[arg(long, default_value_t = 100.0)]
    planar_scale: f64,
    #[arg(long, default_value_t = 5.0)]
    planar_base: f64,
}

/// Builds latency models for configurations sharing one source.
struct ModelSource {
    kind: Source,
    scale: f64,
    base: f64,
}

enum Source {
    Cities(Arc<CityMatrix>, Vec<f64>),
    Explicit(LatencyModel),
    Planar,
}

impl LatencyArgs {
    fn source(&self) -> Result<ModelSource> {
        let kind = if let Some(path) = &self.matrix {
            let text = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            Source::Explicit(LatencyModel::explicit(&parse_city_matrix(text.as_slice(), false)?)?)
        } else if self.synthetic {
            Source::Planar
        } else if let Some(path) = &self.trace {
            let m = load_city_matrix(path, !self.one_way).with_context(|| format!("loading {}", path.display()))?;
            let w = match &self.weights {
                Some(p) => load_weights(p, &m).with_context(|| format!("loading {}", p.display()))?,
                None => vec![1.0; m.len()],
            };
            Source::Cities(Arc::new(m), w)
        } else {
            let m = bundled_city_matrix();
            let w = bundled_weights(&m);
            Source::Cities(Arc::new(m), w)
        };
        Ok(ModelSource {
            kind,
            scale: self.planar_scale,
            base: self.planar_base,
        })
    }
}

impl ModelSource {
    fn model_for(&self, cfg: &ValidatedConfig) -> Result<LatencyModel, scramble::latency::LatencyError> {
        let n = cfg.node_count as usize;
        match &self.kind {
            Source::Cities(m, w) => trace_model(m.clone(), w, n, cfg.intra_city_latency, cfg.seed),
            Source::Explicit(model) => Ok(model.clone()),
            Source::Planar => gen_planar(n, self.scale, self.base, cfg.seed),
        }
    }
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn print_summary(s: &Summary) {
    println!(
        "{}: p50 {:.1} p90 {:.1} p99 {:.1} p100 {:.1} msec, {} components",
        s.config,
        s.p50,
        s.p90,
        s.p99,
        s.p100,
        s.components_final.map_or("?".to_string(), |c| c.to_string())
    );
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            cfg,
            latency,
            out_dir,
            event_trace,
            snapshots,
        } => {
            let cfg = cfg.validated()?;
            let model = latency.source()?.model_for(&cfg)?;
            let opts = ExperimentOptions {
                track_calibration: false,
                trace: event_trace.as_ref().map(create).transpose()?.map(|w| Box::new(w) as _),
                snapshots: snapshots.as_ref().map(create).transpose()?.map(|w| Box::new(w) as _),
            };
            let exp = run_experiment_with(&cfg, model, opts)?;
            let dir = out_dir.join(cfg.label());
            let summary = write_outputs(&cfg, &exp, &dir)?;
            print_summary(&summary);
            println!("outputs in {}", dir.display());
        }
        Command::Sweep {
            cfg,
            latency,
            grid,
            degree,
            single_scenario,
            out_dir,
            jobs,
        } => {
            let base = cfg.resolve()?;
            let mut spec = match grid {
                Grid::Headline => SweepSpec::headline(),
                Grid::Triangle => SweepSpec::triangle(degree),
                Grid::ScoringEdge => SweepSpec::scoring_edge(degree),
                Grid::CloseEdge => SweepSpec::close_edge(degree),
            };
            if single_scenario {
                spec.scenarios = vec![Scenario::new(base.body_validation, base.total_rtts)];
            }
            if jobs > 0 {
                rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
            }
            let source = latency.source()?;
            let outcomes = run_sweep(&spec, &base, |c| source.model_for(c), &out_dir);
            let mut failed = 0;
            for o in &outcomes {
                match &o.result {
                    Ok(s) => {
                        print!("{}/", o.scenario);
                        print_summary(s);
                    }
                    Err(e) => {
                        failed += 1;
                        eprintln!("{}/{}: {e}", o.scenario, o.config);
                    }
                }
            }
            if failed > 0 {
                bail!("{failed} of {} sweep points failed", outcomes.len());
            }
        }
        Command::GenLatency {
            node_count,
            seed,
            planar_scale,
            planar_base,
            clusters,
            cluster_spread,
            out,
        } => {
            let model = match clusters {
                Some(k) => gen_clustered_planar(node_count, k, cluster_spread, planar_scale, planar_base, seed)?,
                None => gen_planar(node_count, planar_scale, planar_base, seed)?,
            };
            model.write_matrix(create(&out)?)?;
            println!("wrote {node_count}-node matrix to {}", out.display());
        }
        Command::Analyze {
            records,
            out_dir,
            grid_step,
        } => {
            fs::create_dir_all(&out_dir)?;
            let mut rows = Vec::new();
            for path in &records {
                let recs = read_records(File::open(path).with_context(|| format!("opening {}", path.display()))?)?;
                let label = path
                    .parent()
                    .and_then(|p| p.file_name())
                    .map_or_else(|| "records".to_string(), |n| n.to_string_lossy().into_owned());
                write_curve(create(&out_dir.join(format!("{label}.csv")))?, &recs, grid_step)?;
                let s = Summary::from_records(&label, &recs, None)?;
                print_summary(&s);
                rows.push(s);
            }
            write_summaries(create(&out_dir.join("summary.csv"))?, rows.iter())?;
        }
        Command::Oracle { cfg, latency, blocks } => {
            let cfg = cfg.validated()?;
            let model = latency.source()?.model_for(&cfg)?;
            let opts = SimOptions {
                frozen: true,
                ..SimOptions::default()
            };
            let mut sim = Simulation::with_options(cfg.clone(), model.clone(), opts)?;
            let topo = sim.topology();
            let n = cfg.node_count;
            let miners: Vec<NodeId> = (0..blocks.min(n)).map(|i| NodeId(i * (n / blocks.min(n)))).collect();
            let records = sim.run_blocks_from(miners.len() as u32, true, miners);
            let (mut sp_off, mut fa_off, mut worst_sp, mut worst_fa) = (0usize, 0usize, 0.0f64, 0.0f64);
            for r in &records {
                let sp = shortest_path_delivery(&topo, &model, &cfg, r.miner);
                let fa = first_arrival_delivery(&topo, &model, &cfg, r.miner);
                for (i, got) in r.offsets().enumerate() {
                    let got = got.unwrap_or(f64::INFINITY);
                    let d = |want: f64| if got == want { 0.0 } else { (got - want).abs() };
                    let (dsp, dfa) = (d(sp[i]), d(fa[i]));
                    sp_off += (dsp > 1e-9) as usize;
                    fa_off += (dfa > 1e-9) as usize;
                    worst_sp = worst_sp.max(dsp);
                    worst_fa = worst_fa.max(dfa);
                }
            }
            let pairs = records.len() * n as usize;
            println!("{pairs} (node, block) pairs, total_rtts {}", cfg.total_rtts);
            println!("shortest path:   {sp_off} differ, worst {worst_sp:.3e} msec");
            println!("first announcer: {fa_off} differ, worst {worst_fa:.3e} msec");
            if fa_off > 0 {
                bail!("simulation disagrees with the first-announcer oracle");
            }
        }
    }
    Ok(())
}
