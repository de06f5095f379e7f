//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and a
//! final tally. Set `ACCEPTANCE_STRICT=1` to exit non-zero when any fails;
//! otherwise the process succeeds so later test targets still run. Pass
//! substrings of criterion names as arguments to run a subset.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::rc::Rc;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use scramble::config::{BlockId, ExperimentConfig, NodeId, RefreshSlots, SimTime};
use scramble::experiment::{run_experiment, run_sweep, Scenario, SweepSpec};
use scramble::latency::{bundled_city_matrix, bundled_weights, gen_clustered_planar, gen_planar, trace_model};
use scramble::metrics::overlay_stats;
use scramble::oracle::{first_arrival_delivery, shortest_path_delivery};
use scramble::protocol::scoring::Award;
use scramble::protocol::{NodeState, Observer};
use scramble::{LatencyModel, SimOptions, Simulation, ValidatedConfig};

type Outcome = (bool, String);

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("oracle-equivalence", oracle_equivalence),
        ("ordering", ordering),
        ("delay-rtt-sensitivity", sensitivity),
        ("scoring-ledger", scoring_ledger),
        ("close-convergence", close_convergence),
        ("partition-hazard", partition_hazard),
        ("determinism", determinism),
    ];
    let (mut ran, mut failed) = (0, 0);
    for (name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = check();
        println!(
            "{} {name}: {detail} ({:.0?})",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed()
        );
        ran += 1;
        failed += usize::from(!ok);
    }
    println!("acceptance: {ran} run, {failed} failed");
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}

fn validated(cfg: ExperimentConfig) -> ValidatedConfig {
    cfg.validate().expect("acceptance configs are valid")
}

// ---------------------------------------------------------------------------

/// Max |simulated − oracle| and number of pairs above 1e-9, per oracle.
struct OracleGap {
    pairs: usize,
    sp_off: usize,
    sp_worst: f64,
    fa_off: usize,
    fa_worst: f64,
}

fn oracle_gap(total_rtts: f64, topologies: u64) -> OracleGap {
    let shapes = [(0, 0, 4), (0, 0, 8), (3, 3, 2), (7, 0, 1), (0, 4, 2)];
    let mut g = OracleGap {
        pairs: 0,
        sp_off: 0,
        sp_worst: 0.0,
        fa_off: 0,
        fa_worst: 0.0,
    };
    for t in 0..topologies {
        let (s, c, r) = shapes[t as usize % shapes.len()];
        let mut cfg = ExperimentConfig::scr(s, c, r);
        cfg.node_count = 20 + (t as u32 * 47) % 181;
        cfg.total_rtts = total_rtts;
        cfg.seed = 1000 + t;
        let cfg = validated(cfg);
        let n = cfg.node_count;
        let model = gen_planar(n as usize, 100.0, 5.0, cfg.seed).unwrap();
        let opts = SimOptions {
            frozen: true,
            ..Default::default()
        };
        let mut sim = Simulation::with_options(cfg.clone(), model.clone(), opts).unwrap();
        let topo = sim.topology();
        let miners: Vec<NodeId> = (0..5).map(|i| NodeId(i * n / 5)).collect();
        for r in sim.run_blocks_from(5, true, miners) {
            let sp = shortest_path_delivery(&topo, &model, &cfg, r.miner);
            let fa = first_arrival_delivery(&topo, &model, &cfg, r.miner);
            for (i, got) in r.offsets().enumerate() {
                let got = got.unwrap_or(f64::INFINITY);
                let d = |want: f64| if got == want { 0.0 } else { (got - want).abs() };
                let (dsp, dfa) = (d(sp[i]), d(fa[i]));
                g.pairs += 1;
                g.sp_off += usize::from(dsp > 1e-9);
                g.fa_off += usize::from(dfa > 1e-9);
                g.sp_worst = g.sp_worst.max(dsp);
                g.fa_worst = g.fa_worst.max(dfa);
            }
        }
    }
    g
}

fn oracle_equivalence() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for rtts in [0.5, 1.5] {
        let g = oracle_gap(rtts, 20);
        ok &= g.sp_off == 0;
        parts.push(format!(
            "total_rtts {rtts}: shortest path off on {}/{} pairs (worst {:.3e} msec), first-announcer oracle off on {} (worst {:.3e})",
            g.sp_off, g.pairs, g.sp_worst, g.fa_off, g.fa_worst
        ));
    }
    (ok, format!("20 topologies, N 20..200; {}", parts.join("; ")))
}

// ---------------------------------------------------------------------------

const SEEDS: [u64; 3] = [1, 2, 3];

fn trace_run(s: u32, c: u32, r: u32, seed: u64, edit: impl FnOnce(&mut ExperimentConfig)) -> f64 {
    let mut cfg = ExperimentConfig::scr(s, c, r);
    cfg.calibration_rounds = 16;
    cfg.measurement_blocks = 50;
    cfg.seed = seed;
    edit(&mut cfg);
    let cfg = validated(cfg);
    let matrix = Arc::new(bundled_city_matrix());
    let weights = bundled_weights(&matrix);
    let model = trace_model(matrix, &weights, cfg.node_count as usize, cfg.intra_city_latency, seed).unwrap();
    let exp = run_experiment(&cfg, model).unwrap();
    exp.summary(&cfg.label()).unwrap().p90
}

fn ordering() -> Outcome {
    let configs = [(3, 3, 2), (7, 0, 1), (0, 7, 1), (4, 0, 4), (0, 4, 4), (1, 1, 6), (0, 0, 8)];
    let jobs: Vec<(u64, (u32, u32, u32))> = SEEDS.iter().flat_map(|&s| configs.map(|c| (s, c))).collect();
    let p90: HashMap<(u64, (u32, u32, u32)), f64> = jobs
        .into_par_iter()
        .map(|(seed, (s, c, r))| ((seed, (s, c, r)), trace_run(s, c, r, seed, |_| {})))
        .collect();
    let mut ok = true;
    let mut lines = Vec::new();
    for seed in SEEDS {
        let g = |k: (u32, u32, u32)| p90[&(seed, k)];
        let best = g((3, 3, 2));
        let strong = g((7, 0, 1)).min(g((0, 7, 1)));
        let mixed = g((4, 0, 4)).min(g((0, 4, 4))).min(g((1, 1, 6)));
        let random = g((0, 0, 8));
        let holds = [best < strong, strong < mixed, mixed < random];
        ok &= holds.iter().all(|&h| h);
        let sym = |h: bool| if h { "<" } else { ">=" };
        let each: Vec<String> = configs
            .iter()
            .map(|&(s, c, r)| format!("S{s}-C{c}-R{r}={:.1}", g((s, c, r))))
            .collect();
        lines.push(format!(
            "seed {seed}: {best:.1} {} {strong:.1} {} {mixed:.1} {} {random:.1} [{}]",
            sym(holds[0]),
            sym(holds[1]),
            sym(holds[2]),
            each.join(" ")
        ));
    }
    (ok, format!("p90 msec, best < strongest single < mixed < random; {}", lines.join("; ")))
}

fn sensitivity() -> Outcome {
    #[derive(Clone, Copy)]
    enum Knob {
        Body(f64),
        Rtts(f64),
    }
    let knobs = [Knob::Body(20.0), Knob::Body(100.0), Knob::Rtts(0.5), Knob::Rtts(3.5)];
    let mut jobs = Vec::new();
    for seed in SEEDS {
        for (ki, _) in knobs.iter().enumerate() {
            for shape in [(7, 0, 1), (0, 7, 1)] {
                jobs.push((seed, ki, shape));
            }
        }
    }
    let p90: HashMap<(u64, usize, (u32, u32, u32)), f64> = jobs
        .into_par_iter()
        .map(|(seed, ki, (s, c, r))| {
            let v = trace_run(s, c, r, seed, |cfg| match knobs[ki] {
                Knob::Body(b) => cfg.body_validation = b,
                Knob::Rtts(t) => cfg.total_rtts = t,
            });
            ((seed, ki, (s, c, r)), v)
        })
        .collect();
    let mut ok = true;
    let mut lines = Vec::new();
    for seed in SEEDS {
        let gap = |ki: usize| p90[&(seed, ki, (7, 0, 1))] - p90[&(seed, ki, (0, 7, 1))];
        let (b20, b100, r05, r35) = (gap(0), gap(1), gap(2), gap(3));
        let delay_ok = b100 < b20;
        let rtt_ok = r35 > r05;
        ok &= delay_ok && rtt_ok;
        lines.push(format!(
            "seed {seed}: body 20->100 {b20:.1}->{b100:.1} ({}), rtts 0.5->3.5 {r05:.1}->{r35:.1} ({})",
            if delay_ok { "decreases" } else { "does not decrease" },
            if rtt_ok { "increases" } else { "does not increase" },
        ));
    }
    (ok, format!("p90(S7-C0-R1) - p90(S0-C7-R1) msec; {}", lines.join("; ")))
}

// ---------------------------------------------------------------------------

/// Independent re-derivation of the scoring ledger from observed receipts.
#[derive(Default)]
struct Shadow {
    members: HashMap<NodeId, Vec<NodeId>>,
    miner: HashMap<BlockId, NodeId>,
    windows: HashMap<(NodeId, BlockId), Option<(NodeId, SimTime)>>,
    points: HashMap<(NodeId, NodeId), f64>,
    expected: Option<(NodeId, BlockId, Award)>,
    awards: HashMap<(NodeId, BlockId), u32>,
    target: usize,
    checked_awards: u64,
    refreshes: u64,
    errors: Vec<String>,
}

impl Shadow {
    fn fail(&mut self, msg: String) {
        if self.errors.len() < 10 {
            self.errors.push(msg);
        }
    }

    fn missed_award(&mut self) {
        if let Some((node, block, a)) = self.expected.take() {
            self.fail(format!("node {node} block {block}: expected award {a:?}, none given"));
        }
    }
}

struct ShadowObserver(Rc<RefCell<Shadow>>);

impl Observer for ShadowObserver {
    fn announcement(&mut self, node: NodeId, block: BlockId, from: NodeId, from_in_scoring: bool, at: SimTime) {
        let mut s = self.0.borrow_mut();
        s.missed_award();
        let member = s.members.get(&node).is_some_and(|m| m.contains(&from));
        if member != from_in_scoring {
            s.fail(format!("node {node}: membership of {from} disagrees"));
        }
        if !member || s.miner.get(&block) == Some(&node) {
            return;
        }
        match s.windows.get(&(node, block)).copied() {
            None => {
                s.windows.insert((node, block), Some((from, at)));
            }
            Some(Some((first, t1))) if first != from => {
                s.windows.insert((node, block), None);
                s.expected = Some((node, block, Award { peer: first, points: at - t1 }));
            }
            Some(_) => {}
        }
    }

    fn award(&mut self, node: NodeId, block: BlockId, award: Award, _at: SimTime) {
        let mut s = self.0.borrow_mut();
        let count = s.awards.entry((node, block)).or_insert(0);
        *count += 1;
        if *count > 1 {
            s.fail(format!("node {node} block {block}: second award"));
        }
        if award.points < 0.0 {
            s.fail(format!("node {node} block {block}: negative award"));
        }
        match s.expected.take() {
            Some((n, b, a)) if n == node && b == block && a == award => {
                *s.points.entry((node, award.peer)).or_insert(0.0) += award.points;
                s.checked_awards += 1;
            }
            other => s.fail(format!("node {node} block {block}: got {award:?}, expected {other:?}")),
        }
    }

    fn delivered(&mut self, node: NodeId, block: BlockId, _at: SimTime) {
        let mut s = self.0.borrow_mut();
        s.missed_award();
        s.miner.entry(block).or_insert(node);
    }

    fn scoring_round_end(&mut self, node: &NodeState, _at: SimTime) {
        let mut s = self.0.borrow_mut();
        s.missed_award();
        for m in node.scoring.members() {
            let want = s.points.get(&(node.id, m.peer)).copied().unwrap_or(0.0);
            if want != m.points {
                s.fail(format!("node {} peer {}: {} points, shadow has {want}", node.id, m.peer, m.points));
            }
        }
    }

    fn scoring_refreshed(&mut self, node: &NodeState, target: usize, _at: SimTime) {
        let mut s = self.0.borrow_mut();
        s.refreshes += 1;
        let peers: Vec<NodeId> = node.scoring.peers().collect();
        if node.scoring.members().iter().any(|m| m.points != 0.0) {
            s.fail(format!("node {}: scores not reset", node.id));
        }
        if target != s.target || peers.len() != target {
            s.fail(format!("node {}: |SS| = {} (target {target})", node.id, peers.len()));
        }
        if peers.iter().any(|&p| p == node.id || node.close.contains(p)) {
            s.fail(format!("node {}: SS overlaps CS or self", node.id));
        }
        s.points.retain(|&(n, _), _| n != node.id);
        for (&(n, _), w) in s.windows.iter_mut() {
            if n == node.id {
                *w = None;
            }
        }
        s.members.insert(node.id, peers);
    }
}

fn scoring_ledger() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let shapes = [(3, 3, 2), (7, 0, 1), (4, 0, 4), (1, 1, 6), (2, 2, 4), (5, 0, 3)];
    let (mut blocks, mut awards, mut refreshes, mut runs) = (0u32, 0u64, 0u64, 0);
    let mut errors = Vec::new();
    while blocks < 10_000 {
        let (s, c, r) = shapes[rng.random_range(0..shapes.len())];
        let mut cfg = ExperimentConfig::scr(s, c, r);
        cfg.node_count = rng.random_range(40..=120);
        cfg.blocks_per_round = rng.random_range(3..=20);
        cfg.total_rtts = [0.5, 1.5, 2.5][rng.random_range(0..3)];
        cfg.inter_block_gap = 2500.0;
        cfg.seed = rng.random();
        let cfg = validated(cfg);
        let model = gen_planar(cfg.node_count as usize, 100.0, 5.0, cfg.seed).unwrap();
        let shadow = Rc::new(RefCell::new(Shadow {
            target: cfg.scoring_target(),
            ..Default::default()
        }));
        let opts = SimOptions {
            observer: Some(Box::new(ShadowObserver(shadow.clone()))),
            ..Default::default()
        };
        let mut sim = Simulation::with_options(cfg.clone(), model, opts).unwrap();
        for n in sim.nodes() {
            shadow.borrow_mut().members.insert(n.id, n.scoring.peers().collect());
        }
        let count = 2000.min(10_000 - blocks);
        sim.run_blocks(count, false);
        if let Err(e) = sim.check_invariants() {
            errors.extend(e);
        }
        let mut sh = shadow.borrow_mut();
        sh.missed_award();
        blocks += count;
        awards += sh.checked_awards;
        refreshes += sh.refreshes;
        runs += 1;
        errors.append(&mut sh.errors);
    }
    let ok = errors.is_empty() && awards > 0 && refreshes > 0;
    let detail = format!(
        "{blocks} blocks over {runs} randomized runs, {awards} awards and {refreshes} refreshes cross-checked{}",
        if errors.is_empty() {
            String::new()
        } else {
            format!("; first errors: {}", errors[..errors.len().min(3)].join(" | "))
        }
    );
    (ok, detail)
}

// ---------------------------------------------------------------------------

/// Retained close-set averages at the target period, and every close peer
/// each node has held up to then.
#[derive(Default)]
struct CloseCapture {
    at_period: HashMap<NodeId, Vec<(NodeId, f64)>>,
    seen: HashMap<NodeId, BTreeSet<NodeId>>,
}

struct CloseObserver(Rc<RefCell<CloseCapture>>, u32);

impl Observer for CloseObserver {
    fn close_period_end(&mut self, node: &NodeState, _at: SimTime) {
        if node.close.period() < self.1 {
            let mut cap = self.0.borrow_mut();
            let seen = cap.seen.entry(node.id).or_default();
            seen.extend(node.close.members().iter().map(|m| m.peer));
        }
        if node.close.period() + 1 == self.1 {
            let avgs = node
                .close
                .members()
                .iter()
                .filter_map(|m| m.average().map(|a| (m.peer, a)))
                .collect();
            self.0.borrow_mut().at_period.insert(node.id, avgs);
        }
    }
}

fn close_convergence() -> Outcome {
    const N: usize = 500;
    const C: usize = 7;
    const PERIODS: u32 = 50;
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in SEEDS {
        let mut cfg = ExperimentConfig::scr(0, C as u32, 1);
        cfg.node_count = N as u32;
        cfg.seed = seed;
        let cfg = validated(cfg);
        let model = gen_planar(N, 100.0, 5.0, seed).unwrap();
        let cap = Rc::new(RefCell::new(CloseCapture::default()));
        let opts = SimOptions {
            observer: Some(Box::new(CloseObserver(cap.clone(), PERIODS))),
            ..Default::default()
        };
        let mut sim = Simulation::with_options(cfg.clone(), model.clone(), opts).unwrap();
        sim.run_for(cfg.close_period * (PERIODS as f64 + 1.0));
        let cap = cap.borrow();
        let mut within = 0;
        let mut best_of_seen = 0;
        let mut ratios = Vec::with_capacity(N);
        for u in 0..N {
            let u = NodeId(u as u32);
            let mut all: Vec<f64> = (0..N as u32)
                .filter(|&v| v != u.0)
                .map(|v| 2.0 * model.one_way(u, NodeId(v)))
                .collect();
            all.sort_by(f64::total_cmp);
            let optimal = all[..C].iter().sum::<f64>() / C as f64;
            let mut kept: Vec<f64> = cap.at_period.get(&u).map_or(Vec::new(), |v| v.iter().map(|p| p.1).collect());
            kept.sort_by(f64::total_cmp);
            kept.truncate(C);
            let mean = if kept.len() == C {
                kept.iter().sum::<f64>() / C as f64
            } else {
                f64::INFINITY
            };
            let mut seen: Vec<f64> = cap.seen[&u].iter().map(|&v| 2.0 * model.one_way(u, v)).collect();
            seen.sort_by(f64::total_cmp);
            let reachable = seen[..C.min(seen.len())].iter().sum::<f64>() / C as f64;
            best_of_seen += usize::from((mean - reachable).abs() <= 1e-9 * reachable);
            let ratio = mean / optimal;
            ratios.push(ratio);
            within += usize::from(ratio <= 2.0);
        }
        ratios.sort_by(f64::total_cmp);
        let frac = within as f64 / N as f64;
        ok &= frac >= 0.9;
        parts.push(format!(
            "seed {seed}: {:.1}% within 2x (median ratio {:.2}, p90 {:.2}; {:.1}% hold the best {C} of the {:.0} peers they sampled)",
            100.0 * frac,
            ratios[N / 2],
            ratios[N * 9 / 10],
            100.0 * best_of_seen as f64 / N as f64,
            cap.seen.values().map(BTreeSet::len).sum::<usize>() as f64 / N as f64,
        ));
    }
    (ok, format!("N {N}, S0-C7-R1 after {PERIODS} periods; {}", parts.join("; ")))
}

// ---------------------------------------------------------------------------

fn partition_hazard() -> Outcome {
    const N: usize = 240;
    const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
    let mut split = 0;
    let mut control_connected = 0;
    let mut parts = Vec::new();
    for seed in SEEDS {
        let model = gen_clustered_planar(N, 8, 0.04, 100.0, 5.0, seed).unwrap();
        let run = |force: bool| {
            let mut cfg = ExperimentConfig::scr(0, 7, 1);
            cfg.node_count = N as u32;
            cfg.seed = seed;
            let cfg = validated(cfg);
            let mut sim = Simulation::new(cfg.clone(), model.clone()).unwrap();
            sim.run_for(cfg.close_period * 50.0);
            if force {
                // No refresh slots from here on: every node drops its
                // random peer at its next period end.
                sim.force_refresh_slots(RefreshSlots { scoring: 0, close: 0 });
            }
            sim.run_for(cfg.close_period * 3.0);
            overlay_stats(&sim.topology()).components
        };
        let (forced, control) = (run(true), run(false));
        split += usize::from(forced > 1);
        control_connected += usize::from(control == 1);
        parts.push(format!("seed {seed}: R=0 {forced} components, S0-C7-R1 {control}"));
    }
    let ok = split * 2 > SEEDS.len() && control_connected == SEEDS.len();
    (
        ok,
        format!(
            "{split}/{} forced runs split, {control_connected}/{} controls connected; {}",
            SEEDS.len(),
            SEEDS.len(),
            parts.join("; ")
        ),
    )
}

// ---------------------------------------------------------------------------

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let spec = SweepSpec {
        total_degree: 8,
        grid: vec![(3, 3, 2), (0, 7, 1), (7, 0, 1)],
        scenarios: vec![Scenario::new(50.0, 1.5), Scenario::new(20.0, 3.5)],
    };
    let mut base = ExperimentConfig::default();
    base.node_count = 150;
    base.blocks_per_round = 10;
    base.calibration_rounds = 3;
    base.measurement_blocks = 20;
    base.seed = 42;
    let matrix = Arc::new(bundled_city_matrix());
    let weights = bundled_weights(&matrix);
    let model_for =
        |c: &ValidatedConfig| -> Result<LatencyModel, _> { trace_model(matrix.clone(), &weights, 150, 2.0, c.seed) };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let outcomes = run_sweep(&spec, &base, model_for, d.path());
        if let Some(bad) = outcomes.iter().find(|o| o.result.is_err()) {
            return (false, format!("sweep point {} failed: {:?}", bad.config, bad.result));
        }
    }
    let (a, b) = (tree_bytes(dirs[0].path()), tree_bytes(dirs[1].path()));
    let bytes: usize = a.iter().map(|(_, v)| v.len()).sum();
    let ok = a == b && a.len() == 2 * (3 * 4 + 1);
    (ok, format!("two sweeps of 6 points, {} files, {bytes} bytes, identical: {}", a.len(), a == b))
}
