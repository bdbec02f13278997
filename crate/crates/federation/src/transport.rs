use std::collections::VecDeque;

use crate::error::Result;

/// One-directional message channel between roles.
pub trait Transport<M> {
    fn send(&mut self, msg: M) -> Result<()>;
    /// Removes and returns every queued message in arrival order.
    fn drain(&mut self) -> Vec<M>;
}

/// FIFO queue inside the process.
#[derive(Debug)]
pub struct InProcessQueue<M> {
    queue: VecDeque<M>,
    delivered: usize,
}

impl<M> Default for InProcessQueue<M> {
    fn default() -> Self {
        Self { queue: VecDeque::new(), delivered: 0 }
    }
}

impl<M> InProcessQueue<M> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Messages handed out by `drain` so far.
    pub fn delivered(&self) -> usize {
        self.delivered
    }
}

impl<M> Transport<M> for InProcessQueue<M> {
    fn send(&mut self, msg: M) -> Result<()> {
        self.queue.push_back(msg);
        Ok(())
    }

    fn drain(&mut self) -> Vec<M> {
        self.delivered += self.queue.len();
        self.queue.drain(..).collect()
    }
}
