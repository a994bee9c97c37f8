//! Transition sources for the discriminator: the reference set and the
//! policy replay buffer.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::sim::SimConfig;

use super::clip::MotionClip;
use super::features::{disc_features, Transition};
use super::retarget::{retarget, RetargetMap};

/// Anything that can be sampled uniformly by index.
pub trait TransitionSource {
    fn len(&self) -> usize;
    fn get(&self, index: usize) -> Transition;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Uniform draw of `k` transitions with replacement.
pub fn sample_transitions<S: TransitionSource + ?Sized>(
    source: &S,
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Transition>> {
    let n = source.len();
    if n == 0 {
        return Err(Error::Empty("cannot sample from an empty transition source".into()));
    }
    Ok((0..k).map(|_| source.get(rng.random_range(0..n))).collect())
}

/// Consecutive frame pairs of every retargeted reference clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTransitions {
    transitions: Vec<Transition>,
}

impl ReferenceTransitions {
    pub fn from_clips(clips: &[MotionClip], map: &RetargetMap, cfg: &SimConfig) -> Result<Self> {
        let mut transitions = Vec::new();
        for clip in clips {
            let traj = retarget(clip, map, cfg)?;
            for w in traj.q.windows(2) {
                transitions.push(disc_features(&w[0], &w[1], cfg));
            }
        }
        if transitions.is_empty() {
            return Err(Error::Empty("reference clips yield no transitions".into()));
        }
        Ok(Self { transitions })
    }

    pub fn from_transitions(transitions: Vec<Transition>) -> Self {
        Self { transitions }
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }
}

impl TransitionSource for ReferenceTransitions {
    fn len(&self) -> usize {
        self.transitions.len()
    }

    fn get(&self, index: usize) -> Transition {
        self.transitions[index]
    }
}

/// Bounded FIFO of policy transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay buffer capacity must be at least 1".into()));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends a trajectory's transitions, evicting the oldest beyond capacity.
    pub fn store(&mut self, trajectory: &[Transition]) {
        for t in trajectory {
            if self.items.len() == self.capacity {
                self.items.pop_front();
            }
            self.items.push_back(*t);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}

impl TransitionSource for ReplayBuffer {
    fn len(&self) -> usize {
        self.items.len()
    }

    fn get(&self, index: usize) -> Transition {
        self.items[index]
    }
}
