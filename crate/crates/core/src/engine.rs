//! Deterministic discrete-event core.
//!
//! Events are popped in `(at, seq)` order where `seq` is the insertion
//! counter, so simultaneous events run in the order they were scheduled. The
//! scheduler owns the master seed; every consumer of randomness asks for its
//! own derived stream so that draws in one component never shift another's.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::SimTime;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("cannot schedule an event {0} msec in the past")]
    NegativeDelay(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event<K> {
    pub at: SimTime,
    pub seq: u64,
    pub kind: K,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(pub u64);

struct Queued<K>(Event<K>);

impl<K> PartialEq for Queued<K> {
    fn eq(&self, other: &Self) -> bool {
        self.0.seq == other.0.seq
    }
}

impl<K> Eq for Queued<K> {}

impl<K> PartialOrd for Queued<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<K> Ord for Queued<K> {
    // BinaryHeap is a max-heap; invert to pop the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .at
            .cmp(&self.0.at)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

/// Named random streams derived from the master seed.
pub mod streams {
    pub const PLACEMENT: u64 = 1;
    pub const PLANAR: u64 = 2;
    pub const BOOTSTRAP: u64 = 3;
    pub const SAMPLER: u64 = 4;
    pub const MINER: u64 = 5;
    pub const TIMERS: u64 = 6;
    pub const JITTER: u64 = 7;
    pub const TOPOLOGY: u64 = 8;
}

/// Seeded generator for one named stream of `seed`.
pub fn derive_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub struct Scheduler<K> {
    queue: BinaryHeap<Queued<K>>,
    now: SimTime,
    next_seq: u64,
    seed: u64,
    processed: u64,
}

impl<K> Scheduler<K> {
    pub fn new(seed: u64) -> Self {
        Scheduler {
            queue: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_seq: 0,
            seed,
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, id: u64) -> ChaCha8Rng {
        derive_stream(self.seed, id)
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Events popped so far.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn schedule(&mut self, delay: f64, kind: K) -> Result<EventHandle, EngineError> {
        if delay < 0.0 || delay.is_nan() {
            return Err(EngineError::NegativeDelay(delay));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Queued(Event {
            at: self.now + delay,
            seq,
            kind,
        }));
        Ok(EventHandle(seq))
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|q| q.0.at)
    }

    /// Moves the clock forward to `t` without processing anything. Ignored
    /// if `t` lies in the past or beyond the next pending event.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now && self.peek_time().is_none_or(|next| t <= next) {
            self.now = t;
        }
    }

    /// Pops the next event and advances the clock to it.
    pub fn pop(&mut self) -> Option<Event<K>> {
        let Queued(ev) = self.queue.pop()?;
        debug_assert!(ev.at >= self.now);
        self.now = ev.at;
        self.processed += 1;
        Some(ev)
    }

    /// Runs `handler` on events in order until the queue drains or `stop`
    /// holds after an event. Returns the final clock.
    pub fn run_until<H, P>(&mut self, mut handler: H, mut stop: P) -> SimTime
    where
        H: FnMut(&mut Self, Event<K>),
        P: FnMut(&Self) -> bool,
    {
        while let Some(ev) = self.pop() {
            handler(self, ev);
            if stop(self) {
                break;
            }
        }
        self.now
    }
}
