use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::process::ProcessId;
use super::time::SimTime;

/// A scheduled event: the payload plus the ordering/routing envelope.
#[derive(Debug, Clone)]
pub struct Scheduled<E> {
    pub time: SimTime,
    /// Unique per run, assigned at enqueue; breaks ties at equal time.
    pub seq: u64,
    /// Destination process, if the event is addressed to one. Events for
    /// finished processes are dropped by the kernel and counted.
    pub target: Option<ProcessId>,
    pub payload: E,
}

struct Entry<E>(Scheduled<E>);

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.0.seq == other.0.seq
    }
}
impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want min (time, seq) first.
        (other.0.time, other.0.seq).cmp(&(self.0.time, self.0.seq))
    }
}

/// Future event list ordered by (time, seq).
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue { heap: BinaryHeap::new(), next_seq: 0 }
    }

    pub fn push(&mut self, time: SimTime, target: Option<ProcessId>, payload: E) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry(Scheduled { time, seq, target, payload }));
        seq
    }

    pub fn pop(&mut self) -> Option<Scheduled<E>> {
        self.heap.pop().map(|e| e.0)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.0.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
