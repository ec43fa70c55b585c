use std::collections::BinaryHeap;

/// Bounded max-heap of `(distance, id)` keeping the `capacity` smallest
/// candidates. At equal distance the lower id wins.
#[derive(Debug, Clone)]
pub struct CandidateHeap<D: Ord + Copy> {
    capacity: usize,
    heap: BinaryHeap<(D, u32)>,
}

impl<D: Ord + Copy> CandidateHeap<D> {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, heap: BinaryHeap::with_capacity(capacity + 1) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() >= self.capacity
    }

    /// Largest retained distance.
    pub fn worst(&self) -> Option<D> {
        self.heap.peek().map(|&(d, _)| d)
    }

    /// Distance a candidate must not exceed to have any chance of entering;
    /// `None` while the heap still has room.
    pub fn admission_bound(&self) -> Option<D> {
        if self.is_full() {
            self.worst()
        } else {
            None
        }
    }

    /// Returns whether the candidate was retained.
    #[inline]
    pub fn push(&mut self, d: D, id: u32) -> bool {
        if self.capacity == 0 {
            return false;
        }
        if self.heap.len() < self.capacity {
            self.heap.push((d, id));
            return true;
        }
        let mut top = self.heap.peek_mut().unwrap();
        if (d, id) < *top {
            *top = (d, id);
            true
        } else {
            false
        }
    }

    /// Internal heap order; identical push sequences give identical slices.
    pub fn as_slice(&self) -> &[(D, u32)] {
        self.heap.as_slice()
    }

    pub fn clear(&mut self) {
        self.heap.clear();
    }

    /// Retained candidates, ascending by distance then id.
    pub fn into_sorted(self) -> Vec<(D, u32)> {
        self.heap.into_sorted_vec()
    }

    pub fn sorted(&self) -> Vec<(D, u32)> {
        self.clone().into_sorted()
    }
}
