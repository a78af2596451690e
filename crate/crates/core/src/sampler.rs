//! Forward filtering, backward sampling and count extraction.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grammar::CountMatrix;
use crate::store::{StateSequence, StateStep, StoreState};
use crate::transition::TransitionModel;

const EMPTY: usize = 0;

/// Scaled forward vectors for one sentence.
#[derive(Debug, Clone)]
pub struct Trellis {
    words: Vec<usize>,
    /// `forward[t]` is the store distribution after `t` words.
    forward: Vec<Vec<f64>>,
    log_scale: Vec<f64>,
    /// Preterminal weights for a one-word sentence.
    single: Option<Vec<f64>>,
}

impl Trellis {
    pub fn words(&self) -> &[usize] {
        &self.words
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_scale.iter().sum()
    }

    pub fn forward(&self, t: usize) -> &[f64] {
        &self.forward[t]
    }

    pub fn log_scale(&self) -> &[f64] {
        &self.log_scale
    }
}

/// Runs the forward pass. A sentence with no derivation yields
/// [`Error::ZeroProbability`] carrying the 1-based position of the word at
/// which all mass vanished.
pub fn forward_filter(tm: &TransitionModel, words: &[usize]) -> Result<Trellis> {
    if words.is_empty() {
        return Err(Error::Parameter("cannot parse an empty sentence".into()));
    }
    if let Some(&w) = words.iter().find(|&&w| w >= tm.vocab_size()) {
        return Err(Error::Parameter(format!("word index {w} outside the vocabulary")));
    }
    if words.len() == 1 {
        let emit = tm.emission(words[0]);
        let weights: Vec<f64> = tm.start_pick().iter().zip(emit.iter()).map(|(p, e)| p * e).collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroProbability { position: 1 });
        }
        return Ok(Trellis {
            words: words.to_vec(),
            forward: Vec::new(),
            log_scale: vec![total.ln()],
            single: Some(weights),
        });
    }

    let n = tm.num_states();
    let mut start = vec![0.0; n];
    start[EMPTY] = 1.0;
    let mut forward = vec![start];
    let mut log_scale = Vec::with_capacity(words.len());
    for (t, &w) in words.iter().enumerate() {
        let emit = tm.emission(w);
        let prev = &forward[t];
        let mut next = vec![0.0; n];
        for (s, &mass) in prev.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for tr in tm.outgoing(s) {
                let e = emit[tr.preterminal as usize];
                if e > 0.0 {
                    next[tr.target as usize] += mass * tr.weight * e;
                }
            }
        }
        if t + 1 < words.len() {
            next[EMPTY] = 0.0;
        } else {
            let keep = next[EMPTY];
            next.iter_mut().for_each(|v| *v = 0.0);
            next[EMPTY] = keep;
        }
        let total: f64 = next.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::ZeroProbability { position: t + 1 });
        }
        next.iter_mut().for_each(|v| *v /= total);
        log_scale.push(total.ln());
        forward.push(next);
    }
    Ok(Trellis {
        words: words.to_vec(),
        forward,
        log_scale,
        single: None,
    })
}

fn draw<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if u < w {
                return Some(i);
            }
            u -= w;
            last = Some(i);
        }
    }
    last
}

/// Draws one state sequence from the posterior the trellis describes.
pub fn backward_sample<R: Rng + ?Sized>(trellis: &Trellis, tm: &TransitionModel, rng: &mut R) -> Result<StateSequence> {
    let zero = || Error::Parameter("backward sampling needs a trellis with positive likelihood".into());
    if let Some(weights) = &trellis.single {
        let p = draw(weights, rng).ok_or_else(zero)?;
        return Ok(vec![StateStep {
            fork: true,
            preterminal: p,
            join: true,
            store: StoreState::empty(),
        }]);
    }
    let words = &trellis.words;
    let mut steps = Vec::with_capacity(words.len());
    let mut state = EMPTY;
    let mut cands = Vec::new();
    let mut weights = Vec::new();
    for t in (0..words.len()).rev() {
        let emit = tm.emission(words[t]);
        let prev = &trellis.forward[t];
        cands.clear();
        weights.clear();
        for tr in tm.incoming(state) {
            let w = prev[tr.source as usize] * tr.weight * emit[tr.preterminal as usize];
            if w > 0.0 {
                cands.push(*tr);
                weights.push(w);
            }
        }
        let tr = cands[draw(&weights, rng).ok_or_else(zero)?];
        steps.push(StateStep {
            fork: tr.fork,
            preterminal: tr.preterminal as usize,
            join: tr.join,
            store: tm.store(state),
        });
        state = tr.source as usize;
    }
    steps.reverse();
    Ok(steps)
}

/// Adds the rule applications of one sequence to `counts`.
pub fn add_sequence_counts(counts: &mut CountMatrix, seq: &[StateStep], words: &[usize]) -> Result<()> {
    let bad = |t: usize, why: &str| Error::Structural(format!("step {t}: {why}"));
    if seq.len() != words.len() || seq.is_empty() {
        return Err(Error::Structural("sequence and sentence lengths differ".into()));
    }
    if seq.len() == 1 {
        counts.add_lex(seq[0].preterminal, words[0]);
        return Ok(());
    }
    let mut prev = StoreState::empty();
    for (t, (step, &w)) in seq.iter().zip(words).enumerate() {
        let d = prev.depth();
        let (c, base) = if step.fork {
            (step.preterminal, d)
        } else {
            if d == 0 || prev.bottom(d) != step.preterminal {
                return Err(bad(t, "no-fork preterminal differs from the bottom sign"));
            }
            (prev.top(d), d - 1)
        };
        counts.add_lex(step.preterminal, w);
        let next = &step.store;
        match (step.join, base) {
            (true, 0) => {
                if !next.is_empty() || t + 1 != seq.len() {
                    return Err(bad(t, "completion before the last word"));
                }
            }
            (true, _) => {
                if next.depth() != base || next.fragments[..base - 1] != prev.fragments[..base - 1] {
                    return Err(bad(t, "join changed the wrong fragment"));
                }
                counts.add_pair(prev.bottom(base), c, next.bottom(base));
            }
            (false, _) => {
                if next.depth() != base + 1 || next.fragments[..base] != prev.fragments[..base] {
                    return Err(bad(t, "no-join changed the wrong fragment"));
                }
                counts.add_pair(next.top(base + 1), c, next.bottom(base + 1));
            }
        }
        prev = next.clone();
    }
    Ok(())
}

/// Rule counts over a batch of sequences.
pub fn extract_counts(k: usize, w: usize, seqs: &[StateSequence], sentences: &[Vec<usize>]) -> Result<CountMatrix> {
    if seqs.len() != sentences.len() {
        return Err(Error::Structural("one sequence per sentence is required".into()));
    }
    let mut counts = CountMatrix::zeros(k, w);
    for (seq, words) in seqs.iter().zip(sentences) {
        add_sequence_counts(&mut counts, seq, words)?;
    }
    Ok(counts)
}

/// First iteration at or after `min_iters` whose trailing window improves by
/// less than `tol` times the window's mean magnitude per iteration.
pub fn detect_convergence(trace: &[f64], window: usize, tol: f64, min_iters: usize) -> Option<usize> {
    if window < 2 || trace.len() < window {
        return None;
    }
    let first = min_iters.max(window - 1);
    (first..trace.len()).find(|&i| {
        let win = &trace[i + 1 - window..=i];
        let mean = win.iter().sum::<f64>() / window as f64;
        let slope = (win[window - 1] - win[0]) / (window - 1) as f64;
        slope <= tol * mean.abs()
    })
}
