use std::collections::VecDeque;

/// Consecutive observations concatenated into one encoder input.
pub const STACK_FRAMES: usize = 3;

/// Rolling window of the last [`STACK_FRAMES`] observations, oldest first.
#[derive(Clone, Debug, Default)]
pub struct FrameStack {
    frames: VecDeque<Vec<f64>>,
}

impl FrameStack {
    /// Starts a new episode by repeating the first observation.
    pub fn reset(&mut self, obs: &[f64]) {
        self.frames.clear();
        for _ in 0..STACK_FRAMES {
            self.frames.push_back(obs.to_vec());
        }
    }

    pub fn push(&mut self, obs: &[f64]) {
        if self.frames.len() == STACK_FRAMES {
            self.frames.pop_front();
        }
        self.frames.push_back(obs.to_vec());
    }

    pub fn stacked(&self) -> Vec<f64> {
        self.frames.iter().flatten().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_last_three_oldest_first() {
        let mut s = FrameStack::default();
        s.reset(&[0.0]);
        assert_eq!(s.stacked(), vec![0.0, 0.0, 0.0]);
        s.push(&[1.0]);
        s.push(&[2.0]);
        s.push(&[3.0]);
        assert_eq!(s.stacked(), vec![1.0, 2.0, 3.0]);
    }
}
