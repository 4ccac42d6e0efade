//! FIFO replay storage with i.i.d. transition sampling and within-episode
//! sequence sampling.

use std::collections::VecDeque;

use rand::Rng;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_CAPACITY: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// Last step of the episode, for any reason.
    pub done: bool,
    /// The episode ended in an absorbing state, so the next state has no
    /// value. Time-limit endings set `done` but not `terminal`.
    pub terminal: bool,
}

#[derive(Clone, Debug)]
pub struct TransitionBatch {
    pub obs: Tensor,
    pub actions: Tensor,
    /// `[batch, 1]`
    pub rewards: Tensor,
    pub next_obs: Tensor,
    /// `[batch, 1]`, 1.0 where the transition is terminal.
    pub terminals: Tensor,
}

impl TransitionBatch {
    pub fn len(&self) -> usize {
        self.obs.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `batch` windows of `T+1` consecutive steps from one episode each.
#[derive(Clone, Debug)]
pub struct SequenceBatch {
    /// `[batch, T+1, obs_dim]`
    pub obs: Tensor,
    /// `[batch, T+1, act_dim]`
    pub actions: Tensor,
    /// `[batch, T+1]`
    pub rewards: Tensor,
    /// `batch · (T+1)` done flags, row-major.
    pub dones: Vec<bool>,
    pub episode_ids: Vec<u64>,
}

impl SequenceBatch {
    pub fn batch(&self) -> usize {
        self.obs.shape()[0]
    }

    /// Number of steps per window (`T+1`).
    pub fn steps(&self) -> usize {
        self.obs.shape()[1]
    }
}

/// Maximal stretch of stored steps from one episode with no done flag
/// before its last element.
#[derive(Clone, Debug)]
struct Run {
    episode_id: u64,
    start: u64,
    len: usize,
    closed: bool,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    episode_of: VecDeque<u64>,
    runs: VecDeque<Run>,
    /// Absolute index of `items[0]`.
    head: u64,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Buffer("capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: VecDeque::new(),
            episode_of: VecDeque::new(),
            runs: VecDeque::new(),
            head: 0,
            pushed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total pushes since creation, evicted ones included.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn get(&self, i: usize) -> Option<(&Transition, u64)> {
        Some((self.items.get(i)?, self.episode_of[i]))
    }

    pub fn push(&mut self, t: Transition, episode_id: u64) {
        if self.items.len() == self.capacity {
            self.evict_front();
        }
        let abs = self.head + self.items.len() as u64;
        let done = t.done;
        self.items.push_back(t);
        self.episode_of.push_back(episode_id);
        self.pushed += 1;
        match self.runs.back_mut() {
            Some(r) if r.episode_id == episode_id && !r.closed => r.len += 1,
            _ => self.runs.push_back(Run {
                episode_id,
                start: abs,
                len: 1,
                closed: false,
            }),
        }
        if done {
            self.runs.back_mut().expect("run just pushed").closed = true;
        }
    }

    fn evict_front(&mut self) {
        self.items.pop_front();
        self.episode_of.pop_front();
        self.head += 1;
        let front = self.runs.front_mut().expect("non-empty buffer has a run");
        front.start += 1;
        front.len -= 1;
        if front.len == 0 {
            self.runs.pop_front();
        }
    }

    /// Uniform draw with replacement.
    pub fn sample_transitions(&self, batch: usize, rng: &mut impl Rng) -> Result<TransitionBatch> {
        if batch == 0 {
            return Err(Error::Buffer("batch size must be positive".into()));
        }
        if self.items.len() < batch {
            return Err(Error::Buffer(format!(
                "need {batch} transitions, buffer holds {}",
                self.items.len()
            )));
        }
        let first = &self.items[0];
        let (s, a) = (first.obs.len(), first.action.len());
        let mut obs = Vec::with_capacity(batch * s);
        let mut next = Vec::with_capacity(batch * s);
        let mut actions = Vec::with_capacity(batch * a);
        let mut rewards = Vec::with_capacity(batch);
        let mut terminals = Vec::with_capacity(batch);
        for _ in 0..batch {
            let t = &self.items[rng.random_range(0..self.items.len())];
            obs.extend_from_slice(&t.obs);
            next.extend_from_slice(&t.next_obs);
            actions.extend_from_slice(&t.action);
            rewards.push(t.reward);
            terminals.push(if t.terminal { 1.0 } else { 0.0 });
        }
        Ok(TransitionBatch {
            obs: Tensor::matrix(batch, s, obs)?,
            actions: Tensor::matrix(batch, a, actions)?,
            rewards: Tensor::matrix(batch, 1, rewards)?,
            next_obs: Tensor::matrix(batch, s, next)?,
            terminals: Tensor::matrix(batch, 1, terminals)?,
        })
    }

    /// Number of window start positions for sequences of `steps` elements.
    pub fn valid_windows(&self, steps: usize) -> usize {
        self.runs
            .iter()
            .map(|r| (r.len + 1).saturating_sub(steps))
            .sum()
    }

    /// Absolute start indices of every valid window, in storage order.
    pub fn window_starts(&self, steps: usize) -> Vec<u64> {
        self.runs
            .iter()
            .flat_map(|r| (0..(r.len + 1).saturating_sub(steps) as u64).map(move |o| r.start + o))
            .collect()
    }

    /// Uniform draw over valid start positions of `T+1`-step windows.
    pub fn sample_sequences(
        &self,
        batch: usize,
        t: usize,
        rng: &mut impl Rng,
    ) -> Result<SequenceBatch> {
        if batch == 0 || t == 0 {
            return Err(Error::Buffer("batch size and T must be positive".into()));
        }
        let steps = t + 1;
        let total = self.valid_windows(steps);
        if total == 0 {
            return Err(Error::Buffer(format!(
                "no stored episode stretch has {steps} consecutive steps"
            )));
        }
        let first = &self.items[0];
        let (s, a) = (first.obs.len(), first.action.len());
        let mut obs = Vec::with_capacity(batch * steps * s);
        let mut actions = Vec::with_capacity(batch * steps * a);
        let mut rewards = Vec::with_capacity(batch * steps);
        let mut dones = Vec::with_capacity(batch * steps);
        let mut episode_ids = Vec::with_capacity(batch);
        for _ in 0..batch {
            let mut pick = rng.random_range(0..total);
            let mut start = None;
            for r in &self.runs {
                let n = (r.len + 1).saturating_sub(steps);
                if pick < n {
                    start = Some((r.start + pick as u64, r.episode_id));
                    break;
                }
                pick -= n;
            }
            let (abs, episode) = start.expect("pick is below the window total");
            let base = (abs - self.head) as usize;
            for tr in self.items.range(base..base + steps) {
                obs.extend_from_slice(&tr.obs);
                actions.extend_from_slice(&tr.action);
                rewards.push(tr.reward);
                dones.push(tr.done);
            }
            episode_ids.push(episode);
        }
        Ok(SequenceBatch {
            obs: Tensor::new(vec![batch, steps, s], obs)?,
            actions: Tensor::new(vec![batch, steps, a], actions)?,
            rewards: Tensor::matrix(batch, steps, rewards)?,
            dones,
            episode_ids,
        })
    }
}
