//! Category inventories, vocabularies and the unbounded PCFG.
//!
//! A [`Grammar`] is a row-stochastic matrix with one row per nonterminal
//! (`K` induced categories followed by the root `T`) and one column per
//! outcome: first the `K * K` ordered pairs of induced categories in
//! row-major order, then one column per word.

use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

/// Induced categories `X1..XK` plus the distinguished root `T` at index `K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategorySet {
    names: Vec<String>,
}

impl CategorySet {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("category count must be at least 1".into()));
        }
        let mut names: Vec<String> = (1..=k).map(|i| format!("X{i}")).collect();
        names.push("T".to_string());
        Ok(CategorySet { names })
    }

    /// Number of induced categories.
    pub fn k(&self) -> usize {
        self.names.len() - 1
    }

    /// Total nonterminal rows, `K + 1`.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root(&self) -> usize {
        self.k()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Dense bidirectional token index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary in order of first appearance.
    pub fn from_sentences<S: AsRef<str>>(sentences: &[Vec<S>]) -> Self {
        let mut vocab = Vocabulary::new();
        for sent in sentences {
            for tok in sent {
                vocab.insert(tok.as_ref());
            }
        }
        vocab
    }

    pub fn insert(&mut self, word: &str) -> usize {
        if let Some(&i) = self.index.get(word) {
            return i;
        }
        let i = self.words.len();
        self.words.push(word.to_string());
        self.index.insert(word.to_string(), i);
        i
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    /// Maps a tokenized sentence to indices, failing on unknown words.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>> {
        tokens
            .iter()
            .map(|t| {
                self.index(t.as_ref())
                    .ok_or_else(|| Error::Data(format!("word `{}` not in vocabulary", t.as_ref())))
            })
            .collect()
    }
}

/// Column layout shared by grammars and count matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub k: usize,
    pub w: usize,
}

impl Layout {
    pub fn rows(&self) -> usize {
        self.k + 1
    }

    pub fn cols(&self) -> usize {
        self.k * self.k + self.w
    }

    pub fn root(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn pair(&self, left: usize, right: usize) -> usize {
        left * self.k + right
    }

    #[inline]
    pub fn lex(&self, word: usize) -> usize {
        self.k * self.k + word
    }

    pub fn is_lex(&self, col: usize) -> bool {
        col >= self.k * self.k
    }

    /// Columns a row may put mass on: the root row excludes lexical columns.
    pub fn support(&self, row: usize) -> std::ops::Range<usize> {
        if row == self.root() {
            0..self.k * self.k
        } else {
            0..self.cols()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    layout: Layout,
    probs: Array2<f64>,
    beta: f64,
}

impl Grammar {
    pub fn from_probs(k: usize, w: usize, probs: Array2<f64>, beta: f64) -> Result<Self> {
        let layout = Layout { k, w };
        if probs.dim() != (layout.rows(), layout.cols()) {
            return Err(Error::Structural(format!(
                "grammar matrix has shape {:?}, expected ({}, {})",
                probs.dim(),
                layout.rows(),
                layout.cols()
            )));
        }
        Ok(Grammar {
            layout,
            probs,
            beta,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn k(&self) -> usize {
        self.layout.k
    }

    pub fn w(&self) -> usize {
        self.layout.w
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }

    #[inline]
    pub fn pair_prob(&self, parent: usize, left: usize, right: usize) -> f64 {
        self.probs[[parent, self.layout.pair(left, right)]]
    }

    #[inline]
    pub fn lex_prob(&self, parent: usize, word: usize) -> f64 {
        self.probs[[parent, self.layout.lex(word)]]
    }

    /// Total probability of lexical expansions of `parent`.
    pub fn lex_mass(&self, parent: usize) -> f64 {
        let k2 = self.k() * self.k();
        self.probs.row(parent).iter().skip(k2).sum()
    }
}

/// Nonnegative rule-application counts with a grammar's shape.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    layout: Layout,
    counts: Array2<f64>,
}

impl CountMatrix {
    pub fn zeros(k: usize, w: usize) -> Self {
        let layout = Layout { k, w };
        CountMatrix {
            layout,
            counts: Array2::zeros((layout.rows(), layout.cols())),
        }
    }

    pub fn from_counts(k: usize, w: usize, counts: Array2<f64>) -> Result<Self> {
        let layout = Layout { k, w };
        if counts.dim() != (layout.rows(), layout.cols()) {
            return Err(Error::Structural(format!(
                "count matrix has shape {:?}, expected ({}, {})",
                counts.dim(),
                layout.rows(),
                layout.cols()
            )));
        }
        Ok(CountMatrix { layout, counts })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn counts(&self) -> &Array2<f64> {
        &self.counts
    }

    pub fn add_pair(&mut self, parent: usize, left: usize, right: usize) {
        let col = self.layout.pair(left, right);
        self.counts[[parent, col]] += 1.0;
    }

    pub fn add_lex(&mut self, parent: usize, word: usize) {
        let col = self.layout.lex(word);
        self.counts[[parent, col]] += 1.0;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.counts[[row, col]]
    }

    pub fn merge(&mut self, other: &CountMatrix) {
        self.counts += &other.counts;
    }

    pub fn binary_total(&self) -> f64 {
        let k2 = self.layout.k * self.layout.k;
        self.counts.columns().into_iter().take(k2).map(|c| c.sum()).sum()
    }

    pub fn lexical_total(&self) -> f64 {
        let k2 = self.layout.k * self.layout.k;
        self.counts.columns().into_iter().skip(k2).map(|c| c.sum()).sum()
    }
}

fn dirichlet_row<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut draws = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let g = Gamma::new(a, 1.0).map_err(|e| Error::Parameter(format!("gamma({a}): {e}")))?;
        draws.push(g.sample(rng));
    }
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.iter_mut().for_each(|x| *x /= total);
    } else {
        // every gamma draw underflowed; fall back to the largest concentration
        let best = alphas
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        draws.iter_mut().for_each(|x| *x = 0.0);
        draws[best] = 1.0;
    }
    Ok(draws)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

fn sample_rows<R: Rng + ?Sized>(
    layout: Layout,
    beta: f64,
    counts: Option<&Array2<f64>>,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let mut probs = Array2::zeros((layout.rows(), layout.cols()));
    for row in 0..layout.rows() {
        let support = layout.support(row);
        let alphas: Vec<f64> = support
            .clone()
            .map(|c| beta + counts.map_or(0.0, |m| m[[row, c]]))
            .collect();
        let draw = dirichlet_row(&alphas, rng)?;
        for (c, p) in support.zip(draw) {
            probs[[row, c]] = p;
        }
    }
    Ok(probs)
}

/// Draws every row from a symmetric Dirichlet over its support.
pub fn sample_prior_grammar<R: Rng + ?Sized>(
    cats: &CategorySet,
    vocab: &Vocabulary,
    beta: f64,
    rng: &mut R,
) -> Result<Grammar> {
    check_beta(beta)?;
    if vocab.is_empty() {
        return Err(Error::Parameter("vocabulary is empty".into()));
    }
    let layout = Layout {
        k: cats.k(),
        w: vocab.len(),
    };
    let probs = sample_rows(layout, beta, None, rng)?;
    Grammar::from_probs(layout.k, layout.w, probs, beta)
}

/// Draws every row from `Dirichlet(counts_row + beta)` over its support.
pub fn resample_grammar<R: Rng + ?Sized>(
    counts: &CountMatrix,
    beta: f64,
    rng: &mut R,
) -> Result<Grammar> {
    check_beta(beta)?;
    if let Some(bad) = counts.counts.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
        return Err(Error::Data(format!("count matrix contains invalid entry {bad}")));
    }
    let layout = counts.layout;
    let probs = sample_rows(layout, beta, Some(&counts.counts), rng)?;
    Grammar::from_probs(layout.k, layout.w, probs, beta)
}

/// Result of [`validate_grammar`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GrammarDiagnostics {
    /// Rows whose sum deviates from 1 by more than the tolerance: `(row, sum)`.
    pub bad_rows: Vec<(usize, f64)>,
    /// Negative or non-finite entries: `(row, col, value)`.
    pub bad_entries: Vec<(usize, usize, f64)>,
    /// Lexical mass carried by the root row, if any.
    pub root_lexical_mass: Option<f64>,
}

impl GrammarDiagnostics {
    pub fn passed(&self) -> bool {
        self.bad_rows.is_empty() && self.bad_entries.is_empty() && self.root_lexical_mass.is_none()
    }
}

pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

pub fn validate_grammar(g: &Grammar) -> GrammarDiagnostics {
    let mut diag = GrammarDiagnostics::default();
    for (r, row) in g.probs.rows().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if !((sum - 1.0).abs() <= ROW_SUM_TOLERANCE) {
            diag.bad_rows.push((r, sum));
        }
        for (c, &v) in row.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                diag.bad_entries.push((r, c, v));
            }
        }
    }
    let root_lex = g.lex_mass(g.layout.root());
    if root_lex != 0.0 {
        diag.root_lexical_mass = Some(root_lex);
    }
    diag
}

/// Renders `parent<TAB>left<TAB>right<TAB>probability` lines, `_` marking
/// the right child of lexical rules. Every supported column is emitted.
pub fn write_grammar_tsv(g: &Grammar, cats: &CategorySet, vocab: &Vocabulary) -> String {
    let layout = g.layout;
    let mut out = String::new();
    for row in 0..layout.rows() {
        for col in layout.support(row) {
            let p = g.probs[[row, col]];
            if layout.is_lex(col) {
                let w = col - layout.k * layout.k;
                let _ = writeln!(out, "{}\t{}\t_\t{:.11e}", cats.name(row), vocab.word(w), p);
            } else {
                let (a, b) = (col / layout.k, col % layout.k);
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{:.11e}",
                    cats.name(row),
                    cats.name(a),
                    cats.name(b),
                    p
                );
            }
        }
    }
    out
}

/// Parses the grammar TSV. Missing entries are zero; words must be in `vocab`.
pub fn read_grammar_tsv(text: &str, cats: &CategorySet, vocab: &Vocabulary, beta: f64) -> Result<Grammar> {
    let layout = Layout {
        k: cats.k(),
        w: vocab.len(),
    };
    let mut probs = Array2::zeros((layout.rows(), layout.cols()));
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let err = |column: usize, message: String| Error::Parse {
            line: ln + 1,
            column,
            message,
        };
        if fields.len() != 4 {
            return Err(err(1, format!("expected 4 tab-separated fields, found {}", fields.len())));
        }
        let parent = cats
            .index_of(fields[0])
            .ok_or_else(|| err(1, format!("unknown category `{}`", fields[0])))?;
        let p: f64 = fields[3]
            .parse()
            .map_err(|_| err(4, format!("bad probability `{}`", fields[3])))?;
        let col = if fields[2] == "_" {
            let w = vocab
                .index(fields[1])
                .ok_or_else(|| err(2, format!("unknown word `{}`", fields[1])))?;
            layout.lex(w)
        } else {
            let a = cats
                .index_of(fields[1])
                .filter(|&a| a < layout.k)
                .ok_or_else(|| err(2, format!("bad left child `{}`", fields[1])))?;
            let b = cats
                .index_of(fields[2])
                .filter(|&b| b < layout.k)
                .ok_or_else(|| err(3, format!("bad right child `{}`", fields[2])))?;
            layout.pair(a, b)
        };
        probs[[parent, col]] = p;
    }
    Grammar::from_probs(layout.k, layout.w, probs, beta)
}
