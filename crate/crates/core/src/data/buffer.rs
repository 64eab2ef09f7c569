use super::transition::{Transition, TransitionSource};

/// Fixed-capacity FIFO ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot that the next push overwrites once the buffer is full.
    cursor: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        ReplayBuffer { capacity, items: Vec::new(), cursor: 0, pushed: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total pushes since creation, including overwritten ones.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
        self.pushed += 1;
    }

    /// Transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.cursor);
        older.iter().chain(newer.iter())
    }

    pub fn to_vec(&self) -> Vec<Transition> {
        self.iter().cloned().collect()
    }
}

impl TransitionSource for ReplayBuffer {
    fn len(&self) -> usize {
        self.items.len()
    }

    /// Storage order, not push order; uniform sampling does not care.
    fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Domain;

    fn tr(i: usize) -> Transition {
        Transition { s: vec![i as f64], a: vec![0.0], r: i as f64, s_next: vec![0.0], done: false, domain: Domain::Sim }
    }

    #[test]
    fn keeps_last_capacity_in_order() {
        let mut b = ReplayBuffer::new(4);
        for i in 0..11 {
            b.push(tr(i));
        }
        let rs: Vec<f64> = b.iter().map(|t| t.r).collect();
        assert_eq!(rs, vec![7.0, 8.0, 9.0, 10.0]);
        assert_eq!(TransitionSource::len(&b), 4);
        assert_eq!(b.total_pushed(), 11);
    }

    #[test]
    fn partial_fill_in_order() {
        let mut b = ReplayBuffer::new(10);
        for i in 0..3 {
            b.push(tr(i));
        }
        assert_eq!(b.iter().map(|t| t.r).collect::<Vec<_>>(), vec![0.0, 1.0, 2.0]);
    }
}
