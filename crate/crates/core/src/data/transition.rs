use crate::envs::Domain;

/// One `(s, a, r, s', done)` tuple tagged with its source system.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
    pub domain: Domain,
}

impl Transition {
    pub fn is_valid(&self) -> bool {
        self.s.len() == self.s_next.len()
            && self.r.is_finite()
            && self.s.iter().chain(&self.a).chain(&self.s_next).all(|x| x.is_finite())
    }

    /// `[s, a]` concatenated.
    pub fn state_action(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.s.len() + self.a.len());
        v.extend_from_slice(&self.s);
        v.extend_from_slice(&self.a);
        v
    }
}

/// Indexed collection of transitions that batches can be drawn from.
pub trait TransitionSource {
    fn len(&self) -> usize;
    fn get(&self, i: usize) -> &Transition;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TransitionSource for [Transition] {
    fn len(&self) -> usize {
        <[Transition]>::len(self)
    }

    fn get(&self, i: usize) -> &Transition {
        &self[i]
    }
}

impl TransitionSource for Vec<Transition> {
    fn len(&self) -> usize {
        Vec::len(self)
    }

    fn get(&self, i: usize) -> &Transition {
        &self[i]
    }
}
