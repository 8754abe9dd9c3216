//! Discrete-event clock. Events fire in (time, insertion sequence) order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("cannot schedule at {at} before now ({now})")]
    InPast { at: SimTime, now: SimTime },
}

struct Scheduled<E> {
    time: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // Reversed: BinaryHeap is a max-heap and we want the earliest first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

pub struct EventClock<E> {
    now: SimTime,
    queue: BinaryHeap<Scheduled<E>>,
    seq: u64,
    rng_seed: u64,
    dispatched: u64,
}

impl<E> EventClock<E> {
    pub fn new(rng_seed: u64) -> Self {
        EventClock {
            now: SimTime::ZERO,
            queue: BinaryHeap::new(),
            seq: 0,
            rng_seed,
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<u64, ClockError> {
        if at < self.now {
            return Err(ClockError::InPast { at, now: self.now });
        }
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Scheduled { time: at, seq, event });
        Ok(seq)
    }

    pub fn schedule_in(&mut self, delay: SimDuration, event: E) -> u64 {
        let at = self.now + delay;
        self.schedule(at, event).expect("future time")
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|s| s.time)
    }

    /// Removes the next event and advances `now` to its time.
    pub fn pop(&mut self) -> Option<(SimTime, E)> {
        let s = self.queue.pop()?;
        debug_assert!(s.time >= self.now);
        self.now = s.time;
        self.dispatched += 1;
        Some((s.time, s.event))
    }

    /// Like `pop`, but only if the next event is due at or before `limit`.
    pub fn pop_until(&mut self, limit: SimTime) -> Option<(SimTime, E)> {
        if self.peek_time()? > limit {
            return None;
        }
        self.pop()
    }

    /// Moves `now` forward without dispatching. No-op if `t` is in the past
    /// or an earlier event is still queued.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now && self.peek_time().is_none_or(|next| next >= t) {
            self.now = t;
        }
    }

    /// Deterministic generator for one named stream, derived from the clock seed.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(stream);
        rng
    }
}
