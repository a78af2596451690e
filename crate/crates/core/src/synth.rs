//! Synthetic branching corpora with their gold trees.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tree::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    Left,
    Right,
    Center,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Self::Left),
            "right" => Ok(Self::Right),
            "center" => Ok(Self::Center),
            _ => Err(Error::Parameter(format!("unknown synthetic kind `{s}`"))),
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Left => "left",
            Self::Right => "right",
            Self::Center => "center",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    /// Tokens per class.
    pub vocab_size: usize,
    /// Sentences per pattern, in the order of [`SyntheticSpec::patterns`].
    pub counts: Vec<usize>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, seed: u64) -> Self {
        let counts = match kind {
            SyntheticKind::Left | SyntheticKind::Right => vec![100, 100],
            SyntheticKind::Center => vec![50; 4],
        };
        Self {
            kind,
            vocab_size: 50,
            counts,
            seed,
        }
    }

    /// Gold shapes in bracketed form with class letters as tokens.
    pub fn patterns(&self) -> &'static [&'static str] {
        match self.kind {
            SyntheticKind::Left => &["(X1 (X1 a) (X2 b))", "(X1 (X1 (X1 a) (X2 b)) (X2 b))"],
            SyntheticKind::Right => &["(X2 (X1 a) (X2 b))", "(X2 (X1 a) (X2 (X1 a) (X2 b)))"],
            SyntheticKind::Center => &[
                "(X3 (X1 (X1 a) (X2 b)) (X3 c))",
                "(X3 (X1 (X1 (X1 a) (X2 b)) (X2 b)) (X3 c))",
                "(X3 (X1 (X1 a) (X2 b)) (X3 (X1 (X1 a) (X2 b)) (X3 c)))",
                "(X3 (X1 (X1 (X1 a) (X2 b)) (X2 b)) (X3 (X1 (X1 (X1 a) (X2 b)) (X2 b)) (X3 c)))",
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub sentences: Vec<Vec<String>>,
    pub gold: Vec<Tree>,
}

fn fill(t: &Tree, vocab: usize, rng: &mut ChaCha8Rng) -> Tree {
    match t {
        Tree::Leaf(class) => Tree::Leaf(format!("{class}{}", rng.random_range(1..=vocab))),
        Tree::Node { label, children } => Tree::node(label.clone(), children.iter().map(|c| fill(c, vocab, rng)).collect()),
    }
}

/// Sentences grouped by pattern; every class token is drawn independently
/// and uniformly from `class1..classN`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    let patterns = spec.patterns();
    if spec.vocab_size == 0 {
        return Err(Error::Parameter("vocabulary size must be positive".into()));
    }
    if spec.counts.len() != patterns.len() || spec.counts.contains(&0) {
        return Err(Error::Parameter(format!(
            "{} corpus needs {} positive pattern counts",
            spec.kind,
            patterns.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gold = Vec::new();
    for (pat, &n) in patterns.iter().zip(&spec.counts) {
        let shape = crate::tree::parse_tree(pat, 1)?;
        for _ in 0..n {
            gold.push(fill(&shape, spec.vocab_size, &mut rng));
        }
    }
    let sentences = gold
        .iter()
        .map(|t| t.tokens().into_iter().map(String::from).collect())
        .collect();
    Ok(SyntheticCorpus { sentences, gold })
}
