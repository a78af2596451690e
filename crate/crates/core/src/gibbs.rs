//! The outer Gibbs sampler over grammars and parses.

use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounding::{bound_grammar, compute_containment, fragment_expectations, DEFAULT_ITERATIONS};
use crate::error::{Error, Result};
use crate::grammar::{resample_grammar, sample_prior_grammar, CategorySet, CountMatrix, Grammar, Vocabulary};
use crate::lc::states_to_tree;
use crate::model::derive_submodels;
use crate::sampler::{add_sequence_counts, backward_sample, detect_convergence, forward_filter};
use crate::store::StateSequence;
use crate::transition::{compile_transition_model, TransitionModel, DEFAULT_TRANSITION_BUDGET};
use crate::tree::Tree;

const PRIOR_RETRIES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    pub categories: usize,
    pub depth_bound: usize,
    pub beta: f64,
    pub containment_iters: usize,
    pub min_iters: usize,
    pub post_convergence: usize,
    pub window: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub transition_budget: usize,
    /// Keep a grammar snapshot every this many iterations.
    pub snapshot_every: Option<usize>,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            categories: 15,
            depth_bound: 2,
            beta: 0.2,
            containment_iters: DEFAULT_ITERATIONS,
            min_iters: 500,
            post_convergence: 250,
            window: 100,
            tol: 1e-4,
            max_iters: 3000,
            seed: 0,
            workers: None,
            transition_budget: DEFAULT_TRANSITION_BUDGET,
            snapshot_every: None,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Parameter(m.into()));
        if self.categories == 0 {
            return fail("need at least one category");
        }
        if self.depth_bound == 0 {
            return fail("depth bound must be at least 1");
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return fail("beta must be positive");
        }
        if self.containment_iters == 0 {
            return fail("containment iterations must be at least 1");
        }
        if self.window < 2 {
            return fail("convergence window must be at least 2");
        }
        if !(self.tol >= 0.0) {
            return fail("tolerance must be nonnegative");
        }
        if self.max_iters == 0 || self.max_iters < self.min_iters {
            return fail("max_iters must be positive and at least min_iters");
        }
        if self.workers == Some(0) {
            return fail("worker count must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct InductionRun {
    pub config: GibbsConfig,
    pub categories: CategorySet,
    pub vocab: Vocabulary,
    pub log_likelihood: Vec<f64>,
    pub converged_at: Option<usize>,
    pub best_iteration: usize,
    pub best_log_likelihood: f64,
    pub best_grammar: Grammar,
    pub best_parses: Vec<Tree>,
    pub final_grammar: Grammar,
    pub snapshots: Vec<(usize, Grammar)>,
}

/// Compiles the sequence model for one grammar sample.
pub fn compile_for(g: &Grammar, depth_bound: usize, iters: usize, budget: usize) -> Result<TransitionModel> {
    let h = compute_containment(g, depth_bound, iters)?;
    let bg = bound_grammar(g, &h)?;
    let x = fragment_expectations(&bg, iters)?;
    let dm = derive_submodels(g, &bg, &x)?;
    compile_transition_model(&dm, budget)
}

struct Sweep {
    seqs: Vec<Result<(StateSequence, f64)>>,
}

fn sweep(tm: &TransitionModel, sentences: &[Vec<usize>], seed: u64, iter: usize) -> Sweep {
    let seqs = sentences
        .par_iter()
        .enumerate()
        .map(|(i, words)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((iter as u64) << 32) | i as u64);
            let trellis = forward_filter(tm, words)?;
            let seq = backward_sample(&trellis, tm, &mut rng)?;
            Ok((seq, trellis.log_likelihood()))
        })
        .collect();
    Sweep { seqs }
}

/// Runs the sampler on tokenized sentences.
pub fn gibbs_run<S: AsRef<str> + Sync>(corpus: &[Vec<S>], config: &GibbsConfig) -> Result<InductionRun> {
    config.validate()?;
    if corpus.is_empty() || corpus.iter().any(|s| s.is_empty()) {
        return Err(Error::Data("corpus must be nonempty with no empty sentences".into()));
    }
    match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?
            .install(|| run(corpus, config)),
        None => run(corpus, config),
    }
}

fn run<S: AsRef<str> + Sync>(corpus: &[Vec<S>], config: &GibbsConfig) -> Result<InductionRun> {
    let cats = CategorySet::new(config.categories)?;
    let vocab = Vocabulary::from_sentences(corpus);
    let sentences: Vec<Vec<usize>> = corpus.iter().map(|s| vocab.encode(s)).collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (k, w) = (cats.k(), vocab.len());

    let mut grammar = sample_prior_grammar(&cats, &vocab, config.beta, &mut rng)?;
    let mut current: Vec<Option<StateSequence>> = vec![None; sentences.len()];
    let mut trace = Vec::new();
    let mut converged_at = None;
    let fallback_start = config.max_iters.saturating_sub(config.post_convergence.max(1));
    let mut best: Option<(usize, f64, Grammar, Vec<StateSequence>)> = None;
    let mut snapshots = Vec::new();

    let mut iter = 0;
    loop {
        let tm = compile_for(&grammar, config.depth_bound, config.containment_iters, config.transition_budget)?;
        if iter == 0 {
            debug!("{} stores, {} transitions", tm.num_states(), tm.num_transitions());
        }
        let mut result = sweep(&tm, &sentences, config.seed, iter);
        let mut retries = 0;
        while iter == 0 && result.seqs.iter().any(|r| r.is_err()) {
            retries += 1;
            if retries > PRIOR_RETRIES {
                let pos = result.seqs.iter().position(|r| r.is_err()).unwrap();
                let err = result.seqs.swap_remove(pos).unwrap_err();
                return Err(Error::Data(format!("sentence {pos} unparsable under the prior: {err}")));
            }
            warn!("redrawing the prior grammar: a sentence has no derivation");
            grammar = sample_prior_grammar(&cats, &vocab, config.beta, &mut rng)?;
            let tm = compile_for(&grammar, config.depth_bound, config.containment_iters, config.transition_budget)?;
            result = sweep(&tm, &sentences, config.seed, iter);
        }

        let mut ll = 0.0;
        for (i, r) in result.seqs.into_iter().enumerate() {
            match r {
                Ok((seq, l)) => {
                    current[i] = Some(seq);
                    ll += l;
                }
                Err(e) => warn!("iteration {iter}: sentence {i} keeps its previous parse ({e})"),
            }
        }
        trace.push(ll);

        if converged_at.is_none() {
            if let Some(c) = detect_convergence(&trace, config.window, config.tol, config.min_iters) {
                info!("converged at iteration {c}");
                converged_at = Some(c);
                best = None;
            }
        }
        let tracking = converged_at.is_some() || iter >= fallback_start;
        if tracking && best.as_ref().is_none_or(|b| ll > b.1) {
            let seqs = current.iter().map(|s| s.clone().expect("every sentence parsed")).collect();
            best = Some((iter, ll, grammar.clone(), seqs));
        }
        if config.snapshot_every.is_some_and(|n| iter % n == 0) {
            snapshots.push((iter, grammar.clone()));
        }
        if iter % 50 == 0 {
            info!("iteration {iter}: log-likelihood {ll:.4}");
        }

        let mut counts = CountMatrix::zeros(k, w);
        for (seq, words) in current.iter().zip(&sentences) {
            add_sequence_counts(&mut counts, seq.as_ref().expect("every sentence parsed"), words)?;
        }

        let done = match converged_at {
            Some(c) => iter + 1 >= config.min_iters && iter >= c + config.post_convergence,
            None => iter + 1 >= config.max_iters,
        };
        if done {
            break;
        }
        grammar = resample_grammar(&counts, config.beta, &mut rng)?;
        iter += 1;
    }
    if converged_at.is_none() {
        warn!("no convergence within {} iterations", config.max_iters);
    }

    let (best_iteration, best_log_likelihood, best_grammar, seqs) = best.expect("best iteration tracked");
    let best_parses = seqs
        .iter()
        .zip(corpus)
        .map(|(seq, toks)| states_to_tree(seq, toks, &cats))
        .collect::<Result<Vec<_>>>()?;
    Ok(InductionRun {
        config: config.clone(),
        categories: cats,
        vocab,
        log_likelihood: trace,
        converged_at,
        best_iteration,
        best_log_likelihood,
        best_grammar,
        best_parses,
        final_grammar: grammar,
        snapshots,
    })
}
