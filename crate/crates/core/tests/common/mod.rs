//! Brute-force oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use dbpcfg::bounding::{bound_grammar, compute_containment, fragment_expectations, BoundedGrammar, Side};
use dbpcfg::grammar::{sample_prior_grammar, CategorySet, Grammar, Vocabulary};
use dbpcfg::model::{derive_submodels, DerivedModels};
use dbpcfg::transition::{compile_transition_model, TransitionModel};
use dbpcfg::tree::Tree;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub cats: CategorySet,
    pub vocab: Vocabulary,
    pub g: Grammar,
    pub bg: BoundedGrammar,
    pub dm: DerivedModels,
    pub tm: TransitionModel,
    pub depth: usize,
    pub iters: usize,
}

pub fn words(w: usize) -> Vec<String> {
    (0..w).map(|i| format!("w{i}")).collect()
}

pub fn random_grammar(k: usize, w: usize, beta: f64, seed: u64) -> (CategorySet, Vocabulary, Grammar) {
    let cats = CategorySet::new(k).unwrap();
    let vocab = Vocabulary::from_sentences(&[words(w)]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = sample_prior_grammar(&cats, &vocab, beta, &mut rng).unwrap();
    (cats, vocab, g)
}

pub fn instance(cats: CategorySet, vocab: Vocabulary, g: Grammar, depth: usize, iters: usize) -> Instance {
    let h = compute_containment(&g, depth, iters).unwrap();
    let bg = bound_grammar(&g, &h).unwrap();
    let x = fragment_expectations(&bg, iters).unwrap();
    let dm = derive_submodels(&g, &bg, &x).unwrap();
    let tm = compile_transition_model(&dm, 10_000_000).unwrap();
    Instance {
        cats,
        vocab,
        g,
        bg,
        dm,
        tm,
        depth,
        iters,
    }
}

/// Every binary tree over `toks[lo..hi]` with any induced root label.
fn subtrees(toks: &[String], k: usize, cats: &CategorySet) -> Vec<Tree> {
    if toks.len() == 1 {
        return (0..k).map(|p| Tree::preterminal(cats.name(p), toks[0].as_str())).collect();
    }
    let mut out = Vec::new();
    for split in 1..toks.len() {
        let left = subtrees(&toks[..split], k, cats);
        let right = subtrees(&toks[split..], k, cats);
        for l in &left {
            for r in &right {
                for lab in 0..k {
                    out.push(Tree::node(cats.name(lab), vec![l.clone(), r.clone()]));
                }
            }
        }
    }
    out
}

/// All labeled T-rooted trees over the sentence, in bound or not.
pub fn all_trees(toks: &[String], cats: &CategorySet) -> Vec<Tree> {
    let k = cats.k();
    let root = cats.name(cats.root());
    if toks.len() == 1 {
        return subtrees(toks, k, cats)
            .into_iter()
            .map(|p| Tree::node(root, vec![p]))
            .collect();
    }
    let mut out = Vec::new();
    for split in 1..toks.len() {
        for l in subtrees(&toks[..split], k, cats) {
            for r in subtrees(&toks[split..], k, cats) {
                out.push(Tree::node(root, vec![l.clone(), r]));
            }
        }
    }
    out
}

/// Whether every node sits at a legal position: left positions up to
/// depth D+1 (lexical only at D+1), right positions up to D.
pub fn in_bound(tree: &Tree, depth: usize) -> bool {
    fn walk(t: &Tree, side: Side, d: usize, depth: usize) -> bool {
        let legal = match side {
            Side::Left => d <= depth + 1 && (t.is_preterminal() || d <= depth),
            Side::Right => d <= depth,
        };
        if !legal {
            return false;
        }
        if t.is_preterminal() {
            return true;
        }
        let kids = t.children();
        let ld = if side == Side::Left { d } else { d + 1 };
        walk(&kids[0], Side::Left, ld, depth) && walk(&kids[1], Side::Right, d, depth)
    }
    if tree.children().len() == 1 {
        return true;
    }
    walk(tree, Side::Left, 1, depth)
}

/// Probability of a tree under the side- and depth-specific grammars,
/// looked up node by node.
pub fn pcfg_prob(inst: &Instance, tree: &Tree) -> f64 {
    let layout = inst.g.layout();
    let idx = |t: &Tree| inst.cats.index_of(t.label().unwrap()).unwrap();
    if tree.children().len() == 1 {
        // one word: the root's preterminal is drawn from the start context
        let pre = &tree.children()[0];
        let p = idx(pre);
        let w = inst.vocab.index(pre.tokens()[0]).unwrap();
        let x = &start_context(inst);
        let num = x[p] * inst.bg.left(1)[[p, layout.lex(w)]];
        let den: f64 = (0..layout.k).map(|q| x[q] * inst.bg.lex_mass(Side::Left, 1, q)).sum();
        return num / den;
    }
    fn walk(inst: &Instance, t: &Tree, side: Side, d: usize) -> f64 {
        let layout = inst.g.layout();
        let idx = |t: &Tree| inst.cats.index_of(t.label().unwrap()).unwrap();
        let m = inst.bg.side(side, d);
        if t.is_preterminal() {
            let w = inst.vocab.index(t.tokens()[0]).unwrap();
            return m[[idx(t), layout.lex(w)]];
        }
        let kids = t.children();
        let ld = if side == Side::Left { d } else { d + 1 };
        m[[idx(t), layout.pair(idx(&kids[0]), idx(&kids[1]))]]
            * walk(inst, &kids[0], Side::Left, ld)
            * walk(inst, &kids[1], Side::Right, d)
    }
    walk(inst, tree, Side::Left, 1)
}

/// Expected count of each category on the left chain from the root,
/// the root itself included, summed over explicit chains of bounded length.
fn start_context(inst: &Instance) -> Vec<f64> {
    let layout = inst.g.layout();
    let n = layout.rows();
    let m = inst.bg.left(1);
    let step = |c: usize, a: usize| -> f64 { (0..layout.k).map(|b| m[[c, layout.pair(a, b)]]).sum() };
    let mut total = vec![0.0; n];
    let mut frontier = vec![0.0; n];
    frontier[layout.root()] = 1.0;
    for _ in 0..inst.iters {
        let mut next = vec![0.0; n];
        for c in 0..n {
            total[c] += frontier[c];
            for a in 0..layout.k {
                next[a] += frontier[c] * step(c, a);
            }
        }
        frontier = next;
    }
    total
}

/// Rule applications in a tree as `(row, column)` counts.
pub fn rule_multiset(tree: &Tree, cats: &CategorySet, vocab: &Vocabulary, k: usize) -> BTreeMap<(usize, usize), f64> {
    let mut out = BTreeMap::new();
    fn walk(
        t: &Tree,
        cats: &CategorySet,
        vocab: &Vocabulary,
        k: usize,
        out: &mut BTreeMap<(usize, usize), f64>,
    ) {
        let row = cats.index_of(t.label().unwrap()).unwrap();
        if t.is_preterminal() {
            let w = vocab.index(t.tokens()[0]).unwrap();
            *out.entry((row, k * k + w)).or_default() += 1.0;
            return;
        }
        let kids = t.children();
        if kids.len() == 1 {
            walk(&kids[0], cats, vocab, k, out);
            return;
        }
        let l = cats.index_of(kids[0].label().unwrap()).unwrap();
        let r = cats.index_of(kids[1].label().unwrap()).unwrap();
        *out.entry((row, l * k + r)).or_default() += 1.0;
        kids.iter().for_each(|c| walk(c, cats, vocab, k, out));
    }
    walk(tree, cats, vocab, k, &mut out);
    out
}

/// All sentences over the vocabulary with lengths `1..=max_len`.
pub fn all_sentences(w: usize, max_len: usize) -> Vec<Vec<String>> {
    let ws = words(w);
    let mut out: Vec<Vec<String>> = Vec::new();
    let mut layer: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| {
                ws.iter().map(move |x| {
                    let mut s = s.clone();
                    s.push(x.clone());
                    s
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}
pub mod criteria;
