//! Deterministic discrete-event kernel: virtual time, an ordered event
//! queue, and the seeded RNG that is the only randomness source in the
//! system.
//!
//! Events are dispatched in strict `(fire_at, seq)` order, where `seq` is
//! assigned at scheduling time. Rates elsewhere in the system are
//! piecewise-constant between events, so transfer progress integrates
//! exactly without per-tick stepping.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Identifier returned by [`Kernel::schedule`], usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

/// A dispatched event, handed to the caller's handler.
#[derive(Debug, Clone)]
pub struct Event<P> {
    pub fire_at: f64,
    pub seq: u64,
    pub payload: P,
}

#[derive(Debug)]
struct Scheduled<P> {
    fire_at: f64,
    seq: u64,
    payload: P,
}

impl<P> PartialEq for Scheduled<P> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl<P> Eq for Scheduled<P> {}

impl<P> Ord for Scheduled<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap and we want the earliest
        // (fire_at, seq) on top.
        other
            .fire_at
            .total_cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}
impl<P> PartialOrd for Scheduled<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Monotone virtual clock in seconds.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimClock {
    now: f64,
}

impl SimClock {
    pub fn now(&self) -> f64 {
        self.now
    }
}

/// Event kernel generic over the payload type.
///
/// Single-threaded by construction: all mutation of simulated state happens
/// inside the caller's dispatch loop.
#[derive(Debug)]
pub struct Kernel<P> {
    clock: SimClock,
    heap: std::collections::BinaryHeap<Scheduled<P>>,
    /// Seqs scheduled but not yet fired or cancelled.
    live: BTreeSet<u64>,
    next_seq: u64,
    dispatched: u64,
    last_fired: f64,
}

impl<P> Default for Kernel<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Kernel<P> {
    pub fn new() -> Self {
        Kernel {
            clock: SimClock::default(),
            heap: std::collections::BinaryHeap::new(),
            live: BTreeSet::new(),
            next_seq: 1,
            dispatched: 0,
            last_fired: 0.0,
        }
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    /// Total events dispatched so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Enqueue an event at `fire_at >= now`. Returns an id usable with
    /// [`Kernel::cancel`].
    pub fn schedule(&mut self, fire_at: f64, payload: P) -> Result<EventId> {
        if !fire_at.is_finite() || fire_at < self.clock.now {
            return Err(Error::EventInPast {
                fire_at,
                now: self.clock.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.live.insert(seq);
        self.heap.push(Scheduled {
            fire_at,
            seq,
            payload,
        });
        Ok(EventId(seq))
    }

    /// Cancel a pending event. Returns false if it already fired or was
    /// never scheduled. Cancellation is lazy: the heap entry is dropped
    /// when it reaches the top of the queue.
    pub fn cancel(&mut self, id: EventId) -> bool {
        self.live.remove(&id.0)
    }

    /// Pop the next live event with `fire_at <= t_end`, advancing the clock
    /// to its fire time. Returns None (clock untouched) when no event is due.
    pub fn pop_due(&mut self, t_end: f64) -> Option<Event<P>> {
        loop {
            let due = match self.heap.peek() {
                Some(top) if top.fire_at <= t_end => true,
                _ => false,
            };
            if !due {
                return None;
            }
            let top = self.heap.pop().expect("peeked entry");
            if !self.live.remove(&top.seq) {
                continue;
            }
            debug_assert!(top.fire_at >= self.last_fired, "event order regression");
            self.clock.now = top.fire_at;
            self.last_fired = top.fire_at;
            self.dispatched += 1;
            return Some(Event {
                fire_at: top.fire_at,
                seq: top.seq,
                payload: top.payload,
            });
        }
    }

    /// Advance the clock to `t` without dispatching. `t` must be >= now.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if !t.is_finite() || t < self.clock.now {
            return Err(Error::ClockRegression {
                target: t,
                now: self.clock.now,
            });
        }
        self.clock.now = t;
        Ok(())
    }

    /// Dispatch all events with `fire_at <= t_end` in `(fire_at, seq)`
    /// order, then leave the clock at exactly `t_end`. Returns the number of
    /// events dispatched.
    pub fn run_until<F>(&mut self, t_end: f64, mut handler: F) -> Result<u64>
    where
        F: FnMut(&mut Self, Event<P>),
    {
        if !t_end.is_finite() || t_end < self.clock.now {
            return Err(Error::ClockRegression {
                target: t_end,
                now: self.clock.now,
            });
        }
        let mut count = 0;
        while let Some(event) = self.pop_due(t_end) {
            handler(self, event);
            count += 1;
        }
        self.clock.now = t_end;
        Ok(count)
    }
}

/// Deterministic random stream: identical seeds yield identical draws.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
