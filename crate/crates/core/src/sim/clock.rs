use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// A logical clock with a deterministic event queue.
///
/// Events pop in order of time, then rank (lower first), then insertion
/// sequence. Time never moves backwards.
#[derive(Debug, Clone)]
pub struct SimClock<E> {
    now: f64,
    seq: u64,
    queue: BinaryHeap<Entry<E>>,
}

#[derive(Debug, Clone)]
struct Entry<E> {
    time: f64,
    rank: u8,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.rank.cmp(&self.rank))
            .then(other.seq.cmp(&self.seq))
    }
}

impl<E> Default for SimClock<E> {
    fn default() -> Self {
        SimClock::new()
    }
}

impl<E> SimClock<E> {
    pub fn new() -> Self {
        SimClock {
            now: 0.0,
            seq: 0,
            queue: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Schedules `event` at `time`, clamped to the present.
    pub fn schedule(&mut self, time: f64, rank: u8, event: E) {
        let time = if time < self.now { self.now } else { time };
        self.queue.push(Entry {
            time,
            rank,
            seq: self.seq,
            event,
        });
        self.seq += 1;
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.queue.peek().map(|e| e.time)
    }

    /// Removes the next event and advances the clock to its time.
    pub fn pop(&mut self) -> Option<(f64, E)> {
        let e = self.queue.pop()?;
        self.now = e.time;
        Some((e.time, e.event))
    }

    /// Moves the clock forward without popping anything.
    pub fn advance_to(&mut self, time: f64) {
        if time > self.now {
            self.now = time;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &E> {
        self.queue.iter().map(|e| &e.event)
    }

    /// Drops every pending event for which `keep` is false.
    pub fn retain(&mut self, mut keep: impl FnMut(&E) -> bool) {
        self.queue.retain(|e| keep(&e.event));
    }
}
