use super::history::{Window, WindowLayout};
use super::RlError;
use crate::sim::SimState;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Model,
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Window,
    /// Action in normalized `[-1, 1]²` coordinates.
    pub action: [f64; 2],
    pub reward: f64,
    pub cost: f64,
    pub next_obs: Window,
    /// Terminal (collision or success). Timeouts are not terminal.
    pub done: bool,
    pub source: Source,
    /// Simulator state before the action, kept for oracle models.
    pub sim_state: Option<SimState>,
}

impl Transition {
    pub fn obs_window(&self, layout: &WindowLayout) -> Vec<f64> {
        self.obs.window(layout)
    }

    pub fn next_obs_window(&self, layout: &WindowLayout) -> Vec<f64> {
        self.next_obs.window(layout)
    }

    /// Element-wise equality of everything but provenance.
    pub fn same_content(&self, other: &Transition, layout: &WindowLayout) -> bool {
        self.action == other.action
            && self.reward == other.reward
            && self.cost == other.cost
            && self.done == other.done
            && self.obs_window(layout) == other.obs_window(layout)
            && self.next_obs_window(layout) == other.next_obs_window(layout)
    }
}

/// Fixed-capacity FIFO ring of transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    /// Slots holding real transitions, and each slot's position in that list.
    real: Vec<usize>,
    real_pos: Vec<Option<usize>>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            next: 0,
            real: Vec::new(),
            real_pos: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn count(&self, source: Source) -> usize {
        match source {
            Source::Real => self.real.len(),
            Source::Model => self.items.len() - self.real.len(),
        }
    }

    pub fn push(&mut self, t: Transition) {
        let slot = self.next;
        let is_real = t.source == Source::Real;
        if self.items.len() < self.capacity {
            self.items.push(t);
            self.real_pos.push(None);
        } else {
            self.items[slot] = t;
            if let Some(pos) = self.real_pos[slot].take() {
                self.real.swap_remove(pos);
                if pos < self.real.len() {
                    self.real_pos[self.real[pos]] = Some(pos);
                }
            }
        }
        if is_real {
            self.real_pos[slot] = Some(self.real.len());
            self.real.push(slot);
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Items in insertion order, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    pub fn sample<'a, R: Rng>(&'a self, n: usize, rng: &mut R) -> Result<Vec<&'a Transition>, RlError> {
        if self.items.is_empty() {
            return Err(RlError::EmptyBuffer);
        }
        Ok((0..n).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect())
    }

    pub fn sample_real<'a, R: Rng>(&'a self, n: usize, rng: &mut R) -> Result<Vec<&'a Transition>, RlError> {
        if self.real.is_empty() {
            return Err(RlError::EmptyBuffer);
        }
        Ok((0..n)
            .map(|_| &self.items[self.real[rng.gen_range(0..self.real.len())]])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::history::Frame;
    use crate::seed::rng_from_seed;

    fn t(tag: f64, source: Source) -> Transition {
        let w = Frame::root(vec![tag], 2);
        Transition {
            obs: w.clone(),
            action: [0.0, 0.0],
            reward: tag,
            cost: 0.0,
            next_obs: w,
            done: false,
            source,
            sim_state: None,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3);
        for k in 0..5 {
            b.push(t(k as f64, Source::Real));
        }
        let r: Vec<f64> = b.iter().map(|t| t.reward).collect();
        assert_eq!(r, vec![2.0, 3.0, 4.0]);
        assert_eq!(b.count(Source::Real), 3);
    }

    #[test]
    fn real_index_tracks_overwrites() {
        let mut b = ReplayBuffer::new(4);
        for k in 0..4 {
            b.push(t(k as f64, Source::Real));
        }
        b.push(t(10.0, Source::Model));
        b.push(t(11.0, Source::Model));
        assert_eq!(b.count(Source::Real), 2);
        assert_eq!(b.count(Source::Model), 2);
        let mut rng = rng_from_seed(0);
        for s in b.sample_real(200, &mut rng).unwrap() {
            assert_eq!(s.source, Source::Real);
            assert!(s.reward == 2.0 || s.reward == 3.0);
        }
        b.push(t(12.0, Source::Real));
        assert_eq!(b.count(Source::Real), 2);
    }

    #[test]
    fn sampling_is_uniform_and_seeded() {
        let mut b = ReplayBuffer::new(10);
        for k in 0..10 {
            b.push(t(k as f64, Source::Real));
        }
        let mut counts = [0usize; 10];
        let mut rng = rng_from_seed(3);
        for s in b.sample(50_000, &mut rng).unwrap() {
            counts[s.reward as usize] += 1;
        }
        for c in counts {
            assert!((4_500..5_500).contains(&c), "{counts:?}");
        }
        let a: Vec<f64> = b.sample(5, &mut rng_from_seed(1)).unwrap().iter().map(|t| t.reward).collect();
        let c: Vec<f64> = b.sample(5, &mut rng_from_seed(1)).unwrap().iter().map(|t| t.reward).collect();
        assert_eq!(a, c);
        assert!(ReplayBuffer::new(2).sample(1, &mut rng).is_err());
    }
}
