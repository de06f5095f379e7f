//! The node state machine.
//!
//! Blocks travel in two steps. A node that has validated a block announces it
//! to every neighbor except the peer it got it from; the announcement costs
//! one one-way latency and carries the header. The receiver validates the
//! header and then pulls the remaining body from its first announcer, one
//! full round trip per pull round. After body validation the block counts as
//! delivered and is forwarded in turn.
//!
//! On top of that, each node maintains two self-selected peer sets:
//!
//! * the scoring set, ranked every `k` delivered blocks by how often (and by
//!   how much) each peer beat the runner-up in announcing new blocks;
//! * the close set, ranked every close period by mean ping RTT.
//!
//! After ranking, each set keeps its best `S` (resp. `C`) members, drops the
//! rest and refills its refresh slots with uniformly random peers.

pub mod close;
pub mod scoring;
pub mod topology;

use std::fmt;
use std::io::Write;

use log::debug;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{BlockId, ForwardingMode, NodeId, RefreshSlots, SimTime, ValidatedConfig};
use crate::engine::{streams, Event, Scheduler};
use crate::latency::LatencyModel;
use crate::metrics::DisseminationRecord;
use crate::pss::SamplerView;

use self::close::CloseSet;
use self::scoring::{Award, ScoringSet};
use self::topology::Topology;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration has {config} nodes but the latency model has {model}")]
    NodeCountMismatch { config: usize, model: usize },
    #[error("selection for node {0} is invalid: {1}")]
    BadSelection(NodeId, String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventKind {
    BlockGenerated { block: BlockId, miner: NodeId },
    AnnouncementArrival { block: BlockId, from: NodeId, to: NodeId, carries_full_body: bool },
    PullRequestArrival { block: BlockId, from: NodeId, to: NodeId, round: u32 },
    PullResponseArrival { block: BlockId, from: NodeId, to: NodeId, round: u32 },
    HeaderValidated { block: BlockId, node: NodeId },
    BodyValidated { block: BlockId, node: NodeId },
    ScoringRoundTimer { node: NodeId },
    ClosePeriodTimer { node: NodeId },
    PingReply { node: NodeId, peer: NodeId, rtt_sample: f64, period: u32 },
}

impl EventKind {
    /// The block an in-flight transfer event belongs to.
    fn transfer_block(&self) -> Option<BlockId> {
        use EventKind::*;
        match *self {
            AnnouncementArrival { block, .. }
            | PullRequestArrival { block, .. }
            | PullResponseArrival { block, .. }
            | HeaderValidated { block, .. }
            | BodyValidated { block, .. } => Some(block),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        use EventKind::*;
        match self {
            BlockGenerated { .. } => "BlockGenerated",
            AnnouncementArrival { .. } => "AnnouncementArrival",
            PullRequestArrival { .. } => "PullRequestArrival",
            PullResponseArrival { .. } => "PullResponseArrival",
            HeaderValidated { .. } => "HeaderValidated",
            BodyValidated { .. } => "BodyValidated",
            ScoringRoundTimer { .. } => "ScoringRoundTimer",
            ClosePeriodTimer { .. } => "ClosePeriodTimer",
            PingReply { .. } => "PingReply",
        }
    }
}

impl fmt::Display for EventKind {
    /// Space-separated `key=value` arguments.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use EventKind::*;
        match *self {
            BlockGenerated { block, miner } => write!(f, "block={block} miner={miner}"),
            AnnouncementArrival { block, from, to, carries_full_body } => {
                write!(f, "block={block} from={from} to={to} full_body={carries_full_body}")
            }
            PullRequestArrival { block, from, to, round } | PullResponseArrival { block, from, to, round } => {
                write!(f, "block={block} from={from} to={to} round={round}")
            }
            HeaderValidated { block, node } | BodyValidated { block, node } => {
                write!(f, "block={block} node={node}")
            }
            ScoringRoundTimer { node } | ClosePeriodTimer { node } => write!(f, "node={node}"),
            PingReply { node, peer, rtt_sample, period } => {
                write!(f, "node={node} peer={peer} rtt={rtt_sample} period={period}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Unseen,
    HeaderReceived,
    HeaderValid,
    Pulling(u32),
    Delivered,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockProgress {
    pub status: Status,
    pub first_announcer: Option<NodeId>,
    pub deliver_time: Option<SimTime>,
}

impl BlockProgress {
    const UNSEEN: BlockProgress = BlockProgress {
        status: Status::Unseen,
        first_announcer: None,
        deliver_time: None,
    };

    fn advance(&mut self, next: Status) {
        debug_assert!(next > self.status, "{:?} -> {:?}", self.status, next);
        self.status = next;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Block {
    pub id: BlockId,
    pub miner: NodeId,
    pub generated_at: SimTime,
}

struct ActiveBlock {
    block: Block,
    progress: Vec<BlockProgress>,
    in_flight: u32,
    recorded: bool,
}

#[derive(Clone, Debug)]
pub struct NodeState {
    pub id: NodeId,
    pub scoring: ScoringSet,
    pub close: CloseSet,
    pub blocks_seen_this_round: u32,
    /// Completed scoring rounds.
    pub scoring_round: u32,
}

impl NodeState {
    fn new(id: NodeId) -> Self {
        NodeState {
            id,
            scoring: ScoringSet::new(),
            close: CloseSet::new(),
            blocks_seen_this_round: 0,
            scoring_round: 0,
        }
    }

    pub fn selected(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.scoring.peers().chain(self.close.peers())
    }

    pub fn selects(&self, peer: NodeId) -> bool {
        self.scoring.contains(peer) || self.close.contains(peer)
    }
}

/// Hooks for tests and instrumentation. All methods default to no-ops.
pub trait Observer {
    fn announcement(&mut self, _node: NodeId, _block: BlockId, _from: NodeId, _from_in_scoring: bool, _at: SimTime) {}
    fn award(&mut self, _node: NodeId, _block: BlockId, _award: Award, _at: SimTime) {}
    /// Called just before rank-and-cut, with the round's final scores intact.
    fn scoring_round_end(&mut self, _node: &NodeState, _at: SimTime) {}
    fn scoring_refreshed(&mut self, _node: &NodeState, _target: usize, _at: SimTime) {}
    /// Called just before the close-set cut, with this period's samples intact.
    fn close_period_end(&mut self, _node: &NodeState, _at: SimTime) {}
    fn close_refreshed(&mut self, _node: &NodeState, _target: usize, _at: SimTime) {}
    fn delivered(&mut self, _node: NodeId, _block: BlockId, _at: SimTime) {}
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimStats {
    pub events: u64,
    pub blocks_generated: u32,
    pub scoring_refreshes: u64,
    pub close_refreshes: u64,
    /// Refresh draws the sampler could not satisfy.
    pub sampler_shortfall: u64,
}

struct World {
    cfg: ValidatedConfig,
    model: LatencyModel,
    nodes: Vec<NodeState>,
    inbound: Vec<Vec<NodeId>>,
    inbound_count: Vec<u32>,
    slots: RefreshSlots,
    heuristics: bool,
    pull_rounds: u32,
    blocks: Vec<Option<Box<ActiveBlock>>>,
    active_blocks: usize,
    to_generate: u32,
    recording: bool,
    records: Vec<DisseminationRecord>,
    sampler_rng: ChaCha8Rng,
    miner_rng: ChaCha8Rng,
    jitter_rng: ChaCha8Rng,
    neighbor_buf: Vec<NodeId>,
    observer: Option<Box<dyn Observer>>,
    trace: Option<csv::Writer<Box<dyn Write>>>,
    snapshots: Option<csv::Writer<Box<dyn Write>>>,
    io_error: Option<csv::Error>,
    stats: SimStats,
}

/// One simulation run: scheduler plus all node state.
pub struct Simulation {
    sched: Scheduler<EventKind>,
    world: World,
}

/// Builder-style options for [`Simulation`].
#[derive(Default)]
pub struct SimOptions {
    /// When set, no heuristic timers run and the bootstrap overlay stays
    /// frozen.
    pub frozen: bool,
    /// Explicit initial selections (scoring set first), replacing the random
    /// bootstrap.
    pub initial_selection: Option<Vec<Vec<NodeId>>>,
    pub observer: Option<Box<dyn Observer>>,
    /// Event trace CSV `time_msec,seq,kind,args`.
    pub trace: Option<Box<dyn Write>>,
    /// Node-state CSV `round,node,set,peer,metric`, written at each refresh.
    pub snapshots: Option<Box<dyn Write>>,
}

impl Simulation {
    pub fn new(cfg: ValidatedConfig, model: LatencyModel) -> Result<Self, SimError> {
        Self::with_options(cfg, model, SimOptions::default())
    }

    pub fn with_options(cfg: ValidatedConfig, model: LatencyModel, opts: SimOptions) -> Result<Self, SimError> {
        let n = cfg.node_count as usize;
        if model.node_count() != n {
            return Err(SimError::NodeCountMismatch {
                config: n,
                model: model.node_count(),
            });
        }
        let sched = Scheduler::new(cfg.seed);
        let trace = opts.trace.map(|w| {
            let mut wtr = csv::Writer::from_writer(w);
            let _ = wtr.write_record(["time_msec", "seq", "kind", "args"]);
            wtr
        });
        let snapshots = opts.snapshots.map(|w| {
            let mut wtr = csv::Writer::from_writer(w);
            let _ = wtr.write_record(["round", "node", "set", "peer", "metric"]);
            wtr
        });
        let mut world = World {
            slots: cfg.refresh_slots(),
            pull_rounds: cfg.pull_rounds(),
            heuristics: !opts.frozen,
            nodes: (0..n as u32).map(|i| NodeState::new(NodeId(i))).collect(),
            inbound: vec![Vec::new(); n],
            inbound_count: vec![0; n],
            blocks: Vec::new(),
            active_blocks: 0,
            to_generate: 0,
            recording: false,
            records: Vec::new(),
            sampler_rng: sched.stream(streams::SAMPLER),
            miner_rng: sched.stream(streams::MINER),
            jitter_rng: sched.stream(streams::JITTER),
            neighbor_buf: Vec::new(),
            observer: opts.observer,
            trace,
            snapshots,
            io_error: None,
            stats: SimStats::default(),
            cfg,
            model,
        };
        match opts.initial_selection {
            Some(sel) => world.install_selection(sel)?,
            None => world.bootstrap(&mut sched.stream(streams::BOOTSTRAP)),
        }
        let mut sim = Simulation { sched, world };
        if sim.world.heuristics {
            sim.start_timers();
        }
        Ok(sim)
    }

    fn start_timers(&mut self) {
        let mut rng = self.sched.stream(streams::TIMERS);
        let w = &mut self.world;
        for node in &mut w.nodes {
            // Phase-shift every node's rounds and periods.
            if w.cfg.scoring_active() {
                node.blocks_seen_this_round = rng.random_range(0..w.cfg.blocks_per_round);
            }
            if w.cfg.close_active() {
                let offset = rng.random_range(0.0..w.cfg.close_period);
                self.sched
                    .schedule(offset, EventKind::ClosePeriodTimer { node: node.id })
                    .expect("non-negative offset");
            }
        }
    }

    pub fn config(&self) -> &ValidatedConfig {
        &self.world.cfg
    }

    pub fn model(&self) -> &LatencyModel {
        &self.world.model
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.world.nodes
    }

    pub fn stats(&self) -> SimStats {
        SimStats {
            events: self.sched.processed(),
            ..self.world.stats.clone()
        }
    }

    pub fn refresh_slots(&self) -> RefreshSlots {
        self.world.slots
    }

    /// Overrides the refresh slots without validation. Subsequent refreshes
    /// trim each set towards its retained size and refill only these slots.
    pub fn force_refresh_slots(&mut self, slots: RefreshSlots) {
        self.world.slots = slots;
    }

    pub fn topology(&self) -> Topology {
        Topology::new(
            self.world.nodes.iter().map(|n| n.selected().collect()).collect(),
            self.world.cfg.forwarding_mode,
        )
    }

    /// Current forwarding neighbors of `n`, sorted.
    pub fn neighbors(&mut self, n: NodeId) -> Vec<NodeId> {
        self.world.fill_neighbors(n);
        self.world.neighbor_buf.clone()
    }

    /// Generates `count` blocks, one every `inter_block_gap`, each from a
    /// uniformly random miner, and runs until all of them have finished
    /// propagating. Records are returned when `record` is set.
    pub fn run_blocks(&mut self, count: u32, record: bool) -> Vec<DisseminationRecord> {
        let miners: Vec<NodeId> = Vec::new();
        self.run_blocks_from(count, record, miners)
    }

    /// Like [`run_blocks`](Self::run_blocks) with the given miners first;
    /// remaining miners are drawn at random.
    pub fn run_blocks_from(&mut self, count: u32, record: bool, miners: Vec<NodeId>) -> Vec<DisseminationRecord> {
        if count == 0 {
            return Vec::new();
        }
        let w = &mut self.world;
        w.recording = record;
        w.to_generate = count;
        w.records.clear();
        let mut miners = miners.into_iter();
        let n = w.cfg.node_count;
        let mut pick = move |rng: &mut ChaCha8Rng| miners.next().unwrap_or_else(|| NodeId(rng.random_range(0..n)));
        let first = pick(&mut w.miner_rng);
        let block = BlockId(w.blocks.len() as u32);
        w.blocks.push(None);
        self.sched
            .schedule(w.cfg.inter_block_gap, EventKind::BlockGenerated { block, miner: first })
            .expect("positive gap");
        let world = &mut self.world;
        let done = std::cell::Cell::new(false);
        self.sched.run_until(
            |sched, ev| {
                world.handle(sched, ev, &mut pick);
                done.set(world.to_generate == 0 && world.active_blocks == 0);
            },
            |_| done.get(),
        );
        let mut records = std::mem::take(&mut self.world.records);
        records.sort_by_key(|r| r.block);
        records
    }

    /// Advances the clock by `duration` msec, running timers only if no
    /// blocks are scheduled.
    pub fn run_for(&mut self, duration: f64) {
        let end = self.sched.now() + duration;
        let world = &mut self.world;
        let n = world.cfg.node_count;
        let mut pick = move |rng: &mut ChaCha8Rng| NodeId(rng.random_range(0..n));
        while let Some(t) = self.sched.peek_time() {
            if t > end {
                break;
            }
            let ev = self.sched.pop().expect("peeked");
            world.handle(&mut self.sched, ev, &mut pick);
        }
        self.sched.advance_to(end);
    }

    /// Checks structural invariants of every node's sets.
    pub fn check_invariants(&self) -> Result<(), Vec<String>> {
        let w = &self.world;
        let (st, ct) = (
            (w.cfg.scoring_links + w.slots.scoring) as usize,
            (w.cfg.close_links + w.slots.close) as usize,
        );
        let mut errs = Vec::new();
        let mut inbound = vec![0u32; w.nodes.len()];
        for node in &w.nodes {
            let sel: Vec<NodeId> = node.selected().collect();
            if sel.contains(&node.id) {
                errs.push(format!("node {} selects itself", node.id));
            }
            if node.scoring.peers().any(|p| node.close.contains(p)) {
                errs.push(format!("node {} has overlapping sets", node.id));
            }
            if node.scoring.len() > st.max(w.cfg.scoring_target()) {
                errs.push(format!("node {} scoring set has {} > {st}", node.id, node.scoring.len()));
            }
            if node.close.len() > ct.max(w.cfg.close_target()) {
                errs.push(format!("node {} close set has {} > {ct}", node.id, node.close.len()));
            }
            for p in sel {
                inbound[p.index()] += 1;
            }
        }
        if inbound != w.inbound_count {
            errs.push("inbound counters out of sync".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Flushes dump writers and surfaces the first I/O error, if any.
    pub fn finish(&mut self) -> Result<(), SimError> {
        if let Some(e) = self.world.io_error.take() {
            return Err(e.into());
        }
        if let Some(t) = self.world.trace.as_mut() {
            t.flush()?;
        }
        if let Some(s) = self.world.snapshots.as_mut() {
            s.flush()?;
        }
        Ok(())
    }

    pub fn into_observer(self) -> Option<Box<dyn Observer>> {
        self.world.observer
    }
}

fn sampler_view<'a>(cfg: &ValidatedConfig, inbound: &'a [u32]) -> SamplerView<'a> {
    match cfg.max_inbound {
        Some(cap) => SamplerView::with_capacity(inbound.len(), inbound, cap),
        None => SamplerView::uniform(inbound.len()),
    }
}

impl World {
    fn bootstrap(&mut self, rng: &mut ChaCha8Rng) {
        let n = self.nodes.len();
        let (st, ct) = (self.cfg.scoring_target(), self.cfg.close_target());
        for i in 0..n {
            let id = NodeId(i as u32);
            let view = self.view();
            let picked = view.sample_responsive(id, &[], st + ct, rng);
            if picked.len() < st + ct {
                self.stats.sampler_shortfall += (st + ct - picked.len()) as u64;
            }
            for (j, p) in picked.into_iter().enumerate() {
                if j < st {
                    self.nodes[i].scoring.add(p);
                } else {
                    self.nodes[i].close.add(p);
                }
                self.link(id, p);
            }
        }
    }

    fn install_selection(&mut self, sel: Vec<Vec<NodeId>>) -> Result<(), SimError> {
        if sel.len() != self.nodes.len() {
            return Err(SimError::BadSelection(
                NodeId(0),
                format!("{} selections for {} nodes", sel.len(), self.nodes.len()),
            ));
        }
        let st = self.cfg.scoring_target();
        for (i, peers) in sel.into_iter().enumerate() {
            let id = NodeId(i as u32);
            for (j, p) in peers.into_iter().enumerate() {
                if p == id || p.index() >= self.nodes.len() || self.nodes[i].selects(p) {
                    return Err(SimError::BadSelection(id, format!("peer {p} is not selectable")));
                }
                if j < st {
                    self.nodes[i].scoring.add(p);
                } else {
                    self.nodes[i].close.add(p);
                }
                self.link(id, p);
            }
        }
        Ok(())
    }

    fn view(&self) -> SamplerView<'_> {
        sampler_view(&self.cfg, &self.inbound_count)
    }

    fn link(&mut self, from: NodeId, to: NodeId) {
        self.inbound[to.index()].push(from);
        self.inbound_count[to.index()] += 1;
    }

    fn unlink(&mut self, from: NodeId, to: NodeId) {
        let list = &mut self.inbound[to.index()];
        if let Some(pos) = list.iter().position(|&x| x == from) {
            list.swap_remove(pos);
            self.inbound_count[to.index()] -= 1;
        }
    }

    fn fill_neighbors(&mut self, n: NodeId) {
        let buf = &mut self.neighbor_buf;
        buf.clear();
        buf.extend(self.nodes[n.index()].selected());
        if self.cfg.forwarding_mode == ForwardingMode::Undirected {
            buf.extend(self.inbound[n.index()].iter().copied());
        }
        buf.sort_unstable();
        buf.dedup();
    }

    #[inline]
    fn message_delay(&mut self, u: NodeId, v: NodeId) -> f64 {
        let l = self.model.one_way(u, v);
        let j = self.cfg.latency_jitter;
        if j > 0.0 {
            l * (1.0 + self.jitter_rng.random_range(-j..=j))
        } else {
            l
        }
    }

    fn schedule_transfer(&mut self, sched: &mut Scheduler<EventKind>, block: BlockId, delay: f64, kind: EventKind) {
        if let Some(b) = self.blocks[block.0 as usize].as_mut() {
            b.in_flight += 1;
        }
        sched.schedule(delay, kind).expect("non-negative delay");
    }

    fn handle<P>(&mut self, sched: &mut Scheduler<EventKind>, ev: Event<EventKind>, pick_miner: &mut P)
    where
        P: FnMut(&mut ChaCha8Rng) -> NodeId,
    {
        if let Some(t) = self.trace.as_mut() {
            if let Err(e) = t.write_record([
                ev.at.msec().to_string(),
                ev.seq.to_string(),
                ev.kind.name().to_string(),
                ev.kind.to_string(),
            ]) {
                self.io_error.get_or_insert(e);
            }
        }
        let now = ev.at;
        let transfer = ev.kind.transfer_block();
        if let Some(block) = transfer {
            if let Some(b) = self.blocks[block.0 as usize].as_mut() {
                b.in_flight -= 1;
            }
        }
        match ev.kind {
            EventKind::BlockGenerated { block, miner } => {
                self.on_block_generated(sched, block, miner, now);
                self.to_generate -= 1;
                if self.to_generate > 0 {
                    let next = BlockId(self.blocks.len() as u32);
                    self.blocks.push(None);
                    let miner = pick_miner(&mut self.miner_rng);
                    sched
                        .schedule(self.cfg.inter_block_gap, EventKind::BlockGenerated { block: next, miner })
                        .expect("positive gap");
                }
                self.maybe_retire(block);
            }
            EventKind::AnnouncementArrival { block, from, to, .. } => self.on_announcement(sched, block, from, to, now),
            EventKind::HeaderValidated { block, node } => self.on_header_validated(sched, block, node),
            EventKind::PullRequestArrival { block, from, to, round } => {
                // The announcer serves immediately.
                let d = self.message_delay(to, from);
                self.schedule_transfer(
                    sched,
                    block,
                    d,
                    EventKind::PullResponseArrival { block, from: to, to: from, round },
                );
            }
            EventKind::PullResponseArrival { block, from, to, round } => {
                self.on_pull_response(sched, block, from, to, round)
            }
            EventKind::BodyValidated { block, node } => self.on_body_validated(sched, block, node, now),
            EventKind::ScoringRoundTimer { node } => self.scoring_refresh(node, now),
            EventKind::ClosePeriodTimer { node } => {
                self.close_refresh(node, now);
                self.close_ping_cycle(sched, node);
                sched
                    .schedule(self.cfg.close_period, EventKind::ClosePeriodTimer { node })
                    .expect("positive period");
            }
            EventKind::PingReply { node, peer, rtt_sample, period } => {
                self.nodes[node.index()].close.record(peer, period, rtt_sample);
            }
        }
        if let Some(block) = transfer {
            self.maybe_retire(block);
        }
    }

    fn on_block_generated(&mut self, sched: &mut Scheduler<EventKind>, id: BlockId, miner: NodeId, now: SimTime) {
        let mut progress = vec![BlockProgress::UNSEEN; self.nodes.len()];
        progress[miner.index()] = BlockProgress {
            status: Status::Delivered,
            first_announcer: None,
            deliver_time: Some(now),
        };
        self.blocks[id.0 as usize] = Some(Box::new(ActiveBlock {
            block: Block {
                id,
                miner,
                generated_at: now,
            },
            progress,
            in_flight: 0,
            recorded: self.recording,
        }));
        self.active_blocks += 1;
        self.stats.blocks_generated += 1;
        self.on_delivered(sched, id, miner, None, now);
    }

    fn progress_mut(&mut self, block: BlockId, node: NodeId) -> Option<&mut BlockProgress> {
        self.blocks[block.0 as usize]
            .as_mut()
            .map(|b| &mut b.progress[node.index()])
    }

    fn on_announcement(&mut self, sched: &mut Scheduler<EventKind>, block: BlockId, from: NodeId, to: NodeId, now: SimTime) {
        let Some(active) = self.blocks[block.0 as usize].as_mut() else {
            return;
        };
        let is_miner = active.block.miner == to;
        let progress = &mut active.progress[to.index()];
        let fresh = progress.status == Status::Unseen;
        if fresh {
            progress.advance(Status::HeaderReceived);
            progress.first_announcer = Some(from);
        }
        let node = &mut self.nodes[to.index()];
        let in_scoring = node.scoring.contains(from);
        if let Some(obs) = self.observer.as_mut() {
            obs.announcement(to, block, from, in_scoring, now);
        }
        if in_scoring && !is_miner && self.heuristics && self.cfg.scoring_active() {
            if let Some(award) = node.scoring.observe(block, from, now) {
                if let Some(obs) = self.observer.as_mut() {
                    obs.award(to, block, award, now);
                }
            }
        }
        if fresh {
            let d = self.cfg.header_validation;
            self.schedule_transfer(sched, block, d, EventKind::HeaderValidated { block, node: to });
        }
    }

    fn on_header_validated(&mut self, sched: &mut Scheduler<EventKind>, block: BlockId, node: NodeId) {
        let rounds = self.pull_rounds;
        let Some(p) = self.progress_mut(block, node) else {
            return;
        };
        p.advance(Status::HeaderValid);
        if rounds == 0 {
            let d = self.cfg.body_validation;
            self.schedule_transfer(sched, block, d, EventKind::BodyValidated { block, node });
        } else {
            p.advance(Status::Pulling(1));
            let server = p.first_announcer.expect("announced block has an announcer");
            let d = self.message_delay(node, server);
            self.schedule_transfer(
                sched,
                block,
                d,
                EventKind::PullRequestArrival { block, from: node, to: server, round: 1 },
            );
        }
    }

    fn on_pull_response(&mut self, sched: &mut Scheduler<EventKind>, block: BlockId, server: NodeId, node: NodeId, round: u32) {
        let rounds = self.pull_rounds;
        let Some(p) = self.progress_mut(block, node) else {
            return;
        };
        debug_assert_eq!(p.status, Status::Pulling(round));
        if round < rounds {
            p.advance(Status::Pulling(round + 1));
            let d = self.message_delay(node, server);
            self.schedule_transfer(
                sched,
                block,
                d,
                EventKind::PullRequestArrival { block, from: node, to: server, round: round + 1 },
            );
        } else {
            let d = self.cfg.body_validation;
            self.schedule_transfer(sched, block, d, EventKind::BodyValidated { block, node });
        }
    }

    fn on_body_validated(&mut self, sched: &mut Scheduler<EventKind>, block: BlockId, node: NodeId, now: SimTime) {
        let Some(p) = self.progress_mut(block, node) else {
            return;
        };
        p.advance(Status::Delivered);
        p.deliver_time = Some(now);
        let announcer = p.first_announcer;
        self.on_delivered(sched, block, node, announcer, now);
    }

    fn on_delivered(
        &mut self,
        sched: &mut Scheduler<EventKind>,
        block: BlockId,
        node: NodeId,
        announcer: Option<NodeId>,
        now: SimTime,
    ) {
        if let Some(obs) = self.observer.as_mut() {
            obs.delivered(node, block, now);
        }
        self.fill_neighbors(node);
        let targets = std::mem::take(&mut self.neighbor_buf);
        let carries_full_body = self.pull_rounds == 0;
        for &peer in &targets {
            if Some(peer) == announcer {
                continue;
            }
            let d = self.message_delay(node, peer);
            self.schedule_transfer(
                sched,
                block,
                d,
                EventKind::AnnouncementArrival { block, from: node, to: peer, carries_full_body },
            );
        }
        self.neighbor_buf = targets;
        if self.heuristics && self.cfg.scoring_active() {
            let state = &mut self.nodes[node.index()];
            state.blocks_seen_this_round += 1;
            if state.blocks_seen_this_round >= self.cfg.blocks_per_round {
                state.blocks_seen_this_round = 0;
                sched
                    .schedule(0.0, EventKind::ScoringRoundTimer { node })
                    .expect("zero delay");
            }
        }
    }

    fn maybe_retire(&mut self, block: BlockId) {
        let slot = &mut self.blocks[block.0 as usize];
        if !matches!(slot, Some(b) if b.in_flight == 0) {
            return;
        }
        let active = slot.take().expect("checked");
        self.active_blocks -= 1;
        for node in &mut self.nodes {
            node.scoring.forget(block);
        }
        if active.recorded {
            self.records.push(DisseminationRecord {
                block: active.block.id,
                miner: active.block.miner,
                generated_at: active.block.generated_at,
                deliver_time_of: active.progress.iter().map(|p| p.deliver_time).collect(),
            });
        }
    }

    fn write_snapshot(&mut self, round: u32, node: NodeId, set: &str, rows: Vec<(NodeId, f64)>) {
        let Some(w) = self.snapshots.as_mut() else {
            return;
        };
        for (peer, metric) in rows {
            if let Err(e) = w.write_record([
                round.to_string(),
                node.to_string(),
                set.to_string(),
                peer.to_string(),
                metric.to_string(),
            ]) {
                self.io_error.get_or_insert(e);
                return;
            }
        }
    }

    /// Rank-and-cut of the scoring set, refill, and score reset.
    fn scoring_refresh(&mut self, node: NodeId, now: SimTime) {
        let i = node.index();
        if let Some(obs) = self.observer.as_mut() {
            obs.scoring_round_end(&self.nodes[i], now);
        }
        if self.snapshots.is_some() {
            let rows = self.nodes[i].scoring.members().iter().map(|m| (m.peer, m.points)).collect();
            let round = self.nodes[i].scoring_round;
            self.write_snapshot(round, node, "scoring", rows);
        }
        let retain = self.cfg.scoring_links as usize;
        let target = retain + self.slots.scoring as usize;
        let removed = self.nodes[i].scoring.cut(retain);
        for p in removed {
            self.unlink(node, p);
        }
        let missing = target.saturating_sub(self.nodes[i].scoring.len());
        for p in self.replacements(node, missing) {
            self.nodes[i].scoring.add(p);
            self.link(node, p);
        }
        let state = &mut self.nodes[i];
        state.scoring.reset();
        state.scoring_round += 1;
        self.stats.scoring_refreshes += 1;
        if let Some(obs) = self.observer.as_mut() {
            obs.scoring_refreshed(&self.nodes[i], target, now);
        }
    }

    /// Rank-and-cut of the close set by mean RTT, refill, and sample reset.
    fn close_refresh(&mut self, node: NodeId, now: SimTime) {
        let i = node.index();
        if let Some(obs) = self.observer.as_mut() {
            obs.close_period_end(&self.nodes[i], now);
        }
        if self.snapshots.is_some() {
            let rows = self.nodes[i]
                .close
                .members()
                .iter()
                .map(|m| (m.peer, m.average().unwrap_or(f64::INFINITY)))
                .collect();
            let period = self.nodes[i].close.period();
            self.write_snapshot(period, node, "close", rows);
        }
        let retain = self.cfg.close_links as usize;
        let target = retain + self.slots.close as usize;
        let removed = self.nodes[i].close.cut(retain);
        for p in removed {
            self.unlink(node, p);
        }
        let missing = target.saturating_sub(self.nodes[i].close.len());
        for p in self.replacements(node, missing) {
            self.nodes[i].close.add(p);
            self.link(node, p);
        }
        self.nodes[i].close.reset();
        self.stats.close_refreshes += 1;
        if let Some(obs) = self.observer.as_mut() {
            obs.close_refreshed(&self.nodes[i], target, now);
        }
    }

    fn replacements(&mut self, node: NodeId, count: usize) -> Vec<NodeId> {
        if count == 0 {
            return Vec::new();
        }
        let exclude: Vec<NodeId> = self.nodes[node.index()].selected().collect();
        let picked = sampler_view(&self.cfg, &self.inbound_count).sample_responsive(
            node,
            &exclude,
            count,
            &mut self.sampler_rng,
        );
        if picked.len() < count {
            debug!("node {node}: sampler returned {} of {count} peers", picked.len());
            self.stats.sampler_shortfall += (count - picked.len()) as u64;
        }
        picked
    }

    /// Schedules `ping_count` evenly spaced pings to every close peer.
    fn close_ping_cycle(&mut self, sched: &mut Scheduler<EventKind>, node: NodeId) {
        let state = &self.nodes[node.index()];
        let period = state.close.period();
        let peers: Vec<NodeId> = state.close.peers().collect();
        let spacing = self.cfg.close_period / self.cfg.ping_count as f64;
        for k in 0..self.cfg.ping_count {
            let send = k as f64 * spacing;
            for &peer in &peers {
                let rtt = self.message_delay(node, peer) + self.message_delay(peer, node);
                sched
                    .schedule(send + rtt, EventKind::PingReply { node, peer, rtt_sample: rtt, period })
                    .expect("non-negative delay");
            }
        }
    }
}
