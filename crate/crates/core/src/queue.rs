//! Time-ordered spike event queue.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::types::{NeuronId, TimePoint};

/// A spike on its way to `target`. Input injections have
/// `source == target` and `arrival == emission`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeEvent {
    pub source: NeuronId,
    pub target: NeuronId,
    pub emission: TimePoint,
    pub arrival: TimePoint,
}

impl SpikeEvent {
    pub fn injection(neuron: NeuronId, at: TimePoint) -> Self {
        SpikeEvent {
            source: neuron,
            target: neuron,
            emission: at,
            arrival: at,
        }
    }

    pub fn synaptic(source: NeuronId, target: NeuronId, emission: TimePoint, delay: f64) -> Self {
        SpikeEvent {
            source,
            target,
            emission,
            arrival: emission + delay,
        }
    }

    fn order(&self, other: &Self) -> Ordering {
        self.arrival
            .total_cmp(&other.arrival)
            .then(self.target.cmp(&other.target))
            .then(self.source.cmp(&other.source))
    }
}

#[derive(Debug, Clone, Copy)]
struct Ordered(SpikeEvent);

impl PartialEq for Ordered {
    fn eq(&self, other: &Self) -> bool {
        self.0.order(&other.0) == Ordering::Equal
    }
}

impl Eq for Ordered {}

impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.order(&other.0)
    }
}

/// Min-queue on `(arrival, target, source)`.
#[derive(Debug, Default, Clone)]
pub struct SpikeQueue {
    heap: BinaryHeap<Reverse<Ordered>>,
}

impl SpikeQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        SpikeQueue {
            heap: BinaryHeap::with_capacity(n),
        }
    }

    pub fn push(&mut self, event: SpikeEvent) {
        debug_assert!(event.arrival >= event.emission);
        self.heap.push(Reverse(Ordered(event)));
    }

    pub fn pop(&mut self) -> Option<SpikeEvent> {
        self.heap.pop().map(|Reverse(Ordered(e))| e)
    }

    pub fn peek(&self) -> Option<&SpikeEvent> {
        self.heap.peek().map(|Reverse(Ordered(e))| e)
    }

    /// Pop the next event if it arrives no later than `until`.
    pub fn pop_until(&mut self, until: TimePoint) -> Option<SpikeEvent> {
        match self.peek() {
            Some(e) if e.arrival <= until => self.pop(),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn clear(&mut self) {
        self.heap.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_break_on_target_then_source() {
        let mut q = SpikeQueue::new();
        q.push(SpikeEvent::synaptic(NeuronId(2), NeuronId(9), 0.0, 1.0));
        q.push(SpikeEvent::synaptic(NeuronId(1), NeuronId(9), 0.0, 1.0));
        q.push(SpikeEvent::synaptic(NeuronId(5), NeuronId(3), 0.0, 1.0));
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).map(|e| (e.target.0, e.source.0)).collect();
        assert_eq!(order, vec![(3, 5), (9, 1), (9, 2)]);
    }

    #[test]
    fn pop_until_respects_horizon() {
        let mut q = SpikeQueue::new();
        q.push(SpikeEvent::injection(NeuronId(0), 1.0));
        q.push(SpikeEvent::injection(NeuronId(0), 2.0));
        assert!(q.pop_until(0.5).is_none());
        assert_eq!(q.pop_until(1.0).map(|e| e.arrival), Some(1.0));
        assert!(q.pop_until(1.5).is_none());
        assert_eq!(q.len(), 1);
    }

    proptest! {
        #[test]
        fn pops_in_non_decreasing_arrival(events in proptest::collection::vec((0u32..50, 0u32..50, 0.0f64..10.0, 0.0f64..60.0), 0..300)) {
            let mut q = SpikeQueue::new();
            for &(s, t, e, d) in &events {
                q.push(SpikeEvent::synaptic(NeuronId(s), NeuronId(t), e, d));
            }
            let mut last: Option<SpikeEvent> = None;
            let mut n = 0;
            while let Some(ev) = q.pop() {
                if let Some(prev) = last {
                    prop_assert!(prev.order(&ev) != Ordering::Greater);
                }
                last = Some(ev);
                n += 1;
            }
            prop_assert_eq!(n, events.len());
        }
    }
}
