//! Order-fixed floating point summation.
//!
//! Every reduction in the crate goes through [`Pairwise`], so a result depends
//! only on the order in which terms are produced, never on thread scheduling.

use std::ops::Add;

const BLOCK: usize = 32;

/// Streaming cascade summation: blocks of `BLOCK` terms are summed left to
/// right, then combined as a balanced binary tree.
#[derive(Clone, Debug)]
pub struct Pairwise<T> {
    block: T,
    filled: usize,
    stack: Vec<(T, u32)>,
}

impl<T: Copy + Add<Output = T> + Default> Default for Pairwise<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Copy + Add<Output = T> + Default> Pairwise<T> {
    pub fn new() -> Self {
        Self {
            block: T::default(),
            filled: 0,
            stack: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, v: T) {
        self.block = self.block + v;
        self.filled += 1;
        if self.filled == BLOCK {
            let b = std::mem::take(&mut self.block);
            self.filled = 0;
            self.carry(b);
        }
    }

    fn carry(&mut self, mut v: T) {
        let mut rank = 0;
        while let Some(&(top, r)) = self.stack.last() {
            if r != rank {
                break;
            }
            self.stack.pop();
            v = top + v;
            rank += 1;
        }
        self.stack.push((v, rank));
    }

    pub fn total(&self) -> T {
        let mut acc = self.block;
        for &(s, _) in self.stack.iter().rev() {
            acc = s + acc;
        }
        acc
    }
}

impl<T: Copy + Add<Output = T> + Default> Extend<T> for Pairwise<T> {
    fn extend<I: IntoIterator<Item = T>>(&mut self, iter: I) {
        for v in iter {
            self.push(v);
        }
    }
}

/// Sum with the fixed cascade order.
pub fn pairwise_sum<T, I>(iter: I) -> T
where
    T: Copy + Add<Output = T> + Default,
    I: IntoIterator<Item = T>,
{
    let mut acc = Pairwise::new();
    acc.extend(iter);
    acc.total()
}
