//! Parser stores: stacks of derivation fragments and their dense index.

use crate::error::{Error, Result};

/// Fragments for depths `1..=len`, each `(top, bottom)`. Tops at depth 1 may
/// be the root category `K`; every other slot holds an induced category.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct StoreState {
    pub fragments: Vec<(usize, usize)>,
}

impl StoreState {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn depth(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    /// Bottom at depth `d` (1-based).
    pub fn bottom(&self, d: usize) -> usize {
        self.fragments[d - 1].1
    }

    pub fn top(&self, d: usize) -> usize {
        self.fragments[d - 1].0
    }

    pub fn truncated(&self, depth: usize) -> StoreState {
        StoreState {
            fragments: self.fragments[..depth].to_vec(),
        }
    }

    pub fn with_bottom(mut self, bottom: usize) -> StoreState {
        let last = self.fragments.last_mut().expect("store has a fragment");
        last.1 = bottom;
        self
    }

    pub fn pushed(mut self, top: usize, bottom: usize) -> StoreState {
        self.fragments.push((top, bottom));
        self
    }
}

/// Decisions made while reading one token, with the store they lead to.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateStep {
    pub fork: bool,
    pub preterminal: usize,
    pub join: bool,
    pub store: StoreState,
}

pub type StateSequence = Vec<StateStep>;

/// Bijection between valid stores and `0..len()`.
#[derive(Debug, Clone)]
pub struct StoreIndex {
    k: usize,
    depth_bound: usize,
    offsets: Vec<usize>,
}

/// Number of stores for `k` categories and depth bound `depth_bound`.
pub fn store_count(k: usize, depth_bound: usize) -> Option<u128> {
    let k = k as u128;
    let mut total: u128 = 1;
    let mut level = (k + 1).checked_mul(k)?;
    for _ in 0..depth_bound {
        total = total.checked_add(level)?;
        level = level.checked_mul(k.checked_mul(k)?)?;
    }
    Some(total)
}

impl StoreIndex {
    pub fn new(k: usize, depth_bound: usize) -> Result<Self> {
        if k == 0 || depth_bound == 0 {
            return Err(Error::Parameter("store index needs K >= 1 and D >= 1".into()));
        }
        let count = store_count(k, depth_bound).unwrap_or(u128::MAX);
        if count > u32::MAX as u128 {
            return Err(Error::Capacity {
                states: count,
                transitions: 0,
                budget: u32::MAX as u128,
            });
        }
        let mut offsets = vec![0, 1];
        let mut level = (k + 1) * k;
        for _ in 1..depth_bound {
            offsets.push(offsets.last().unwrap() + level);
            level *= k * k;
        }
        offsets.push(offsets.last().unwrap() + level);
        Ok(Self {
            k,
            depth_bound,
            offsets,
        })
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth_bound(&self) -> usize {
        self.depth_bound
    }

    pub fn is_valid(&self, s: &StoreState) -> bool {
        s.depth() <= self.depth_bound
            && s.fragments.iter().enumerate().all(|(i, &(a, b))| {
                let top_limit = if i == 0 { self.k + 1 } else { self.k };
                a < top_limit && b < self.k
            })
    }

    pub fn encode(&self, s: &StoreState) -> usize {
        debug_assert!(self.is_valid(s), "invalid store {s:?}");
        let mut code = 0;
        for &(a, b) in &s.fragments {
            code = code * self.k * self.k + a * self.k + b;
        }
        self.offsets[s.depth()] + code
    }

    pub fn decode(&self, idx: usize) -> StoreState {
        let depth = self.offsets.partition_point(|&o| o <= idx) - 1;
        let mut code = idx - self.offsets[depth];
        let mut fragments = vec![(0, 0); depth];
        for slot in fragments.iter_mut().rev() {
            let pair = code % (self.k * self.k);
            code /= self.k * self.k;
            *slot = (pair / self.k, pair % self.k);
        }
        // whatever is left over is the depth-1 top beyond K-1, i.e. the root
        if depth > 0 {
            fragments[0].0 += code * self.k;
        }
        StoreState { fragments }
    }

    /// Depth of the store with this index.
    pub fn depth_of(&self, idx: usize) -> usize {
        self.offsets.partition_point(|&o| o <= idx) - 1
    }
}
