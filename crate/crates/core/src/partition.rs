//! Partitions of `n` exchangeable items into labelled blocks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque identifier standing in for a block's atom location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AtomLabel(pub u64);

/// Where an item goes when it is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    NewBlock(AtomLabel),
    /// Zero-based block index.
    Join(usize),
}

/// Items are numbered `0..n` in arrival order; blocks `0..num_blocks()` in
/// order of creation. Removing the last item of a block deletes the block and
/// shifts later block indices down by one.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    sizes: Vec<u32>,
    labels: Vec<AtomLabel>,
}

impl Partition {
    pub fn new() -> Self {
        Self::default()
    }

    /// A partition with the given block sizes, items laid out block by block and
    /// labels `0..k`.
    pub fn from_sizes(sizes: &[u32]) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(Error::usage("block sizes must be positive"));
        }
        let mut assignment = Vec::with_capacity(sizes.iter().map(|&s| s as usize).sum());
        for (k, &s) in sizes.iter().enumerate() {
            assignment.extend(std::iter::repeat_n(k, s as usize));
        }
        Ok(Partition {
            assignment,
            sizes: sizes.to_vec(),
            labels: (0..sizes.len() as u64).map(AtomLabel).collect(),
        })
    }

    /// `n` singleton blocks.
    pub fn singletons(n: usize) -> Self {
        Partition {
            assignment: (0..n).collect(),
            sizes: vec![1; n],
            labels: (0..n as u64).map(AtomLabel).collect(),
        }
    }

    /// All `n` items in one block.
    pub fn one_block(n: usize) -> Self {
        if n == 0 {
            return Self::new();
        }
        Partition {
            assignment: vec![0; n],
            sizes: vec![n as u32],
            labels: vec![AtomLabel(0)],
        }
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[u32] {
        &self.sizes
    }

    pub fn labels(&self) -> &[AtomLabel] {
        &self.labels
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn block_of(&self, item: usize) -> Option<usize> {
        self.assignment.get(item).copied()
    }

    /// Block sizes in decreasing order; equal for partitions that differ only
    /// by a relabelling.
    pub fn size_profile(&self) -> Vec<u32> {
        let mut s = self.sizes.clone();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// Append item `n`.
    pub fn add_item(&mut self, choice: Choice) -> Result<()> {
        self.insert_item(self.n(), choice)
    }

    /// Insert a new item at position `item`, shifting later items up.
    pub fn insert_item(&mut self, item: usize, choice: Choice) -> Result<()> {
        if item > self.n() {
            return Err(Error::usage(format!(
                "cannot insert item at {item} into a partition of {} items",
                self.n()
            )));
        }
        let block = match choice {
            Choice::Join(k) => {
                if k >= self.num_blocks() {
                    return Err(Error::usage(format!(
                        "block index {k} out of range ({} blocks)",
                        self.num_blocks()
                    )));
                }
                self.sizes[k] += 1;
                k
            }
            Choice::NewBlock(label) => {
                if self.labels.contains(&label) {
                    return Err(Error::usage(format!(
                        "atom label {} already in use",
                        label.0
                    )));
                }
                self.sizes.push(1);
                self.labels.push(label);
                self.sizes.len() - 1
            }
        };
        self.assignment.insert(item, block);
        Ok(())
    }

    /// Remove item `item`; returns the block it belonged to, or `None` when that
    /// block was deleted.
    pub fn remove_item(&mut self, item: usize) -> Result<Option<usize>> {
        if item >= self.n() {
            return Err(Error::usage(format!(
                "item {item} out of range ({} items)",
                self.n()
            )));
        }
        let k = self.assignment.remove(item);
        self.sizes[k] -= 1;
        if self.sizes[k] > 0 {
            return Ok(Some(k));
        }
        self.sizes.remove(k);
        self.labels.remove(k);
        for a in &mut self.assignment {
            if *a > k {
                *a -= 1;
            }
        }
        Ok(None)
    }

    /// Internal consistency check, used by tests and debug assertions.
    pub fn check(&self) -> Result<()> {
        if self.sizes.len() != self.labels.len() {
            return Err(Error::usage("labels and sizes disagree"));
        }
        let mut counts = vec![0u32; self.sizes.len()];
        for &a in &self.assignment {
            *counts
                .get_mut(a)
                .ok_or_else(|| Error::usage("assignment out of range"))? += 1;
        }
        if counts != self.sizes || counts.contains(&0) {
            return Err(Error::usage("block sizes do not match the assignment"));
        }
        Ok(())
    }
}
