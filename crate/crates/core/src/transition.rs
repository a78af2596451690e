//! Compiled store-to-store transition lists.

use std::collections::VecDeque;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::DerivedModels;
use crate::store::{StoreIndex, StoreState};

/// Upper limit on compiled transitions unless the caller chooses another.
pub const DEFAULT_TRANSITION_BUDGET: usize = 40_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub source: u32,
    pub target: u32,
    pub preterminal: u16,
    pub fork: bool,
    pub join: bool,
    /// Probability excluding the word emission.
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct TransitionModel {
    index: StoreIndex,
    offsets: Vec<usize>,
    transitions: Vec<Transition>,
    in_offsets: Vec<usize>,
    incoming: Vec<u32>,
    /// `[word, preterminal]`
    emission: Array2<f64>,
    reachable: Vec<bool>,
    start_pick: Vec<f64>,
}

/// Compiles every store reachable from the empty store.
pub fn compile_transition_model(dm: &DerivedModels, budget: usize) -> Result<TransitionModel> {
    let layout = dm.layout();
    let index = StoreIndex::new(layout.k, dm.depth_bound())?;
    let n = index.len();
    let mut rows: Vec<Vec<Transition>> = vec![Vec::new(); n];
    let mut reachable = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    reachable[0] = true;
    let mut total = 0usize;
    while let Some(s) = queue.pop_front() {
        let store = index.decode(s);
        for (step, weight) in dm.successors(&store) {
            let t = index.encode(&step.store);
            if !reachable[t] {
                reachable[t] = true;
                queue.push_back(t);
            }
            rows[s].push(Transition {
                source: s as u32,
                target: t as u32,
                preterminal: step.preterminal as u16,
                fork: step.fork,
                join: step.join,
                weight,
            });
        }
        total += rows[s].len();
        if total > budget {
            return Err(Error::Capacity {
                states: n as u128,
                transitions: total as u128,
                budget: budget as u128,
            });
        }
    }

    let mut offsets = Vec::with_capacity(n + 1);
    let mut transitions = Vec::with_capacity(total);
    offsets.push(0);
    for row in rows {
        transitions.extend(row);
        offsets.push(transitions.len());
    }

    let mut in_counts = vec![0usize; n + 1];
    for t in &transitions {
        in_counts[t.target as usize + 1] += 1;
    }
    for i in 0..n {
        in_counts[i + 1] += in_counts[i];
    }
    let in_offsets = in_counts.clone();
    let mut fill = in_counts;
    let mut incoming = vec![0u32; transitions.len()];
    for (i, t) in transitions.iter().enumerate() {
        let slot = &mut fill[t.target as usize];
        incoming[*slot] = i as u32;
        *slot += 1;
    }

    let mut start_pick = vec![0.0; layout.rows()];
    for t in &transitions[offsets[0]..offsets[1]] {
        start_pick[t.preterminal as usize] += t.weight;
    }

    Ok(TransitionModel {
        index,
        offsets,
        transitions,
        in_offsets,
        incoming,
        emission: dm.lexical().t().to_owned(),
        reachable,
        start_pick,
    })
}

impl TransitionModel {
    pub fn index(&self) -> &StoreIndex {
        &self.index
    }

    pub fn num_states(&self) -> usize {
        self.index.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.emission.nrows()
    }

    pub fn is_reachable(&self, state: usize) -> bool {
        self.reachable[state]
    }

    pub fn outgoing(&self, state: usize) -> &[Transition] {
        &self.transitions[self.offsets[state]..self.offsets[state + 1]]
    }

    pub fn incoming(&self, state: usize) -> impl Iterator<Item = &Transition> {
        self.incoming[self.in_offsets[state]..self.in_offsets[state + 1]]
            .iter()
            .map(|&i| &self.transitions[i as usize])
    }

    /// Emission probabilities of `word` for every preterminal.
    pub fn emission(&self, word: usize) -> ndarray::ArrayView1<'_, f64> {
        self.emission.row(word)
    }

    pub fn store(&self, state: usize) -> StoreState {
        self.index.decode(state)
    }

    /// Probability of each preterminal for the first word of a sentence.
    pub fn start_pick(&self) -> &[f64] {
        &self.start_pick
    }

    /// Sum of outgoing weights, or zero for a state with no transitions.
    pub fn row_sum(&self, state: usize) -> f64 {
        self.outgoing(state).iter().map(|t| t.weight).sum()
    }
}
