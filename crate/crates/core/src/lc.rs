//! Conversions between binary trees and left-corner state sequences.

use crate::bounding::{BoundedGrammar, Side};
use crate::error::{Error, Result};
use crate::grammar::{CategorySet, Vocabulary};
use crate::model::DerivedModels;
use crate::store::{StateSequence, StateStep, StoreState};
use crate::tree::Tree;

#[derive(Debug, Default)]
struct Arena {
    label: Vec<usize>,
    kids: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    token: Vec<Option<String>>,
}

impl Arena {
    fn add(&mut self, label: usize, token: Option<String>) -> usize {
        self.label.push(label);
        self.kids.push(Vec::new());
        self.parent.push(None);
        self.token.push(token);
        self.label.len() - 1
    }

    fn from_tree(tree: &Tree, cats: &CategorySet) -> Result<(Arena, usize, Vec<usize>)> {
        fn walk(t: &Tree, cats: &CategorySet, arena: &mut Arena, pre: &mut Vec<usize>) -> Result<usize> {
            let Tree::Node { label, children } = t else {
                return Err(Error::Structural("bare token outside a preterminal".into()));
            };
            let cat = cats
                .index_of(label)
                .ok_or_else(|| Error::Structural(format!("unknown category `{label}`")))?;
            if t.is_preterminal() {
                let id = arena.add(cat, Some(t.tokens()[0].to_string()));
                pre.push(id);
                return Ok(id);
            }
            let id = arena.add(cat, None);
            let mut kids = Vec::with_capacity(children.len());
            for c in children {
                let cid = walk(c, cats, arena, pre)?;
                arena.parent[cid] = Some(id);
                kids.push(cid);
            }
            arena.kids[id] = kids;
            Ok(id)
        }
        let mut arena = Arena::default();
        let mut pre = Vec::new();
        let root = walk(tree, cats, &mut arena, &mut pre)?;
        Ok((arena, root, pre))
    }

    fn to_tree(&self, id: usize, cats: &CategorySet) -> Result<Tree> {
        let label = cats.name(self.label[id]);
        if let Some(tok) = &self.token[id] {
            return Ok(Tree::preterminal(label, tok.as_str()));
        }
        if self.kids[id].len() != 2 {
            return Err(Error::Structural("incomplete derivation".into()));
        }
        let kids = self.kids[id]
            .iter()
            .map(|&k| self.to_tree(k, cats))
            .collect::<Result<Vec<_>>>()?;
        Ok(Tree::node(label, kids))
    }
}

fn single_token_tree(tree: &Tree, cats: &CategorySet) -> Option<usize> {
    match tree {
        Tree::Node { label, children }
            if children.len() == 1 && children[0].is_preterminal() && cats.index_of(label) == Some(cats.root()) =>
        {
            cats.index_of(children[0].label()?)
        }
        _ => None,
    }
}

/// Left-corner depth: the deepest left-position binary node, counting the
/// root as left at depth 1.
pub fn tree_depth(tree: &Tree) -> usize {
    fn walk(t: &Tree, left: bool, d: usize) -> usize {
        let kids = t.children();
        if kids.len() != 2 {
            return if kids.len() == 1 && !t.is_preterminal() {
                walk(&kids[0], left, d)
            } else {
                0
            };
        }
        let here = if left { d } else { 0 };
        let (ld, rd) = if left { (d, d) } else { (d + 1, d) };
        here.max(walk(&kids[0], true, ld)).max(walk(&kids[1], false, rd))
    }
    walk(tree, true, 1).max(1)
}

/// Decodes a T-rooted binary tree into its state sequence.
pub fn tree_to_states(tree: &Tree, cats: &CategorySet, depth_bound: usize) -> Result<StateSequence> {
    if let Some(p) = single_token_tree(tree, cats) {
        return Ok(vec![StateStep {
            fork: true,
            preterminal: p,
            join: true,
            store: StoreState::empty(),
        }]);
    }
    let (arena, root, pre) = Arena::from_tree(tree, cats)?;
    if arena.label[root] != cats.root() {
        return Err(Error::Structural("tree is not rooted in T".into()));
    }
    if arena.kids.iter().any(|k| !k.is_empty() && k.len() != 2) {
        return Err(Error::Structural("tree is not binary".into()));
    }
    let left_child_of = |c: usize| -> Result<usize> {
        let a = arena.parent[c].ok_or_else(|| Error::Structural("node without parent".into()))?;
        if arena.kids[a][0] != c {
            return Err(Error::Structural("left-corner walk reached a right child".into()));
        }
        Ok(a)
    };

    let mut frags: Vec<(usize, usize)> = Vec::new();
    let mut out = Vec::with_capacity(pre.len());
    for (t, &p) in pre.iter().enumerate() {
        let d = frags.len();
        let (fork, c, base) = if d > 0 && frags[d - 1].1 == p {
            (false, frags[d - 1].0, d - 1)
        } else {
            (true, p, d)
        };
        frags.truncate(base);
        let join = match frags.last() {
            None => c == root,
            Some(&(_, b)) => arena.parent[c] == Some(b),
        };
        if join {
            if let Some(last) = frags.last_mut() {
                let b = left_child_of(c)?;
                last.1 = arena.kids[b][1];
            } else if t + 1 != pre.len() {
                return Err(Error::Structural("tree completes before its last token".into()));
            }
        } else {
            let a = left_child_of(c)?;
            frags.push((a, arena.kids[a][1]));
            if frags.len() > depth_bound {
                return Err(Error::Depth {
                    required: tree_depth(tree),
                    bound: depth_bound,
                    node: cats.name(arena.label[a]).to_string(),
                });
            }
        }
        out.push(StateStep {
            fork,
            preterminal: arena.label[p],
            join,
            store: StoreState {
                fragments: frags.iter().map(|&(a, b)| (arena.label[a], arena.label[b])).collect(),
            },
        });
    }
    if !frags.is_empty() {
        return Err(Error::Structural("tree left incomplete fragments".into()));
    }
    Ok(out)
}

/// Rebuilds the tree a state sequence describes over `tokens`.
pub fn states_to_tree<S: AsRef<str>>(seq: &[StateStep], tokens: &[S], cats: &CategorySet) -> Result<Tree> {
    if seq.len() != tokens.len() || seq.is_empty() {
        return Err(Error::Structural(format!(
            "{} steps for {} tokens",
            seq.len(),
            tokens.len()
        )));
    }
    let bad = |t: usize, why: &str| Error::Structural(format!("step {t}: {why}"));
    if seq.len() == 1 {
        let s = &seq[0];
        if !(s.fork && s.join && s.store.is_empty()) || s.preterminal >= cats.k() {
            return Err(bad(0, "not a single-token derivation"));
        }
        return Ok(Tree::node(
            cats.name(cats.root()),
            vec![Tree::preterminal(cats.name(s.preterminal), tokens[0].as_ref())],
        ));
    }

    let mut arena = Arena::default();
    let mut frags: Vec<(usize, usize)> = Vec::new();
    let mut root = None;
    for (t, (step, tok)) in seq.iter().zip(tokens).enumerate() {
        let d = frags.len();
        let tok = Some(tok.as_ref().to_string());
        let (c, base) = if step.fork {
            (arena.add(step.preterminal, tok), d)
        } else {
            let &(top, bottom) = frags.last().ok_or_else(|| bad(t, "no fork from an empty store"))?;
            if arena.label[bottom] != step.preterminal {
                return Err(bad(t, "no-fork preterminal differs from the bottom sign"));
            }
            arena.token[bottom] = tok;
            (top, d - 1)
        };
        frags.truncate(base);
        if step.join {
            if base == 0 {
                if arena.label[c] != cats.root() || t + 1 != seq.len() {
                    return Err(bad(t, "completion before the end of the sentence"));
                }
                root = Some(c);
            } else {
                if step.store.depth() != base {
                    return Err(bad(t, "join does not keep the store depth"));
                }
                let r = arena.add(step.store.bottom(base), None);
                let b = frags[base - 1].1;
                arena.kids[b] = vec![c, r];
                frags[base - 1].1 = r;
            }
        } else {
            if step.store.depth() != base + 1 {
                return Err(bad(t, "no-join must add a fragment"));
            }
            let a = arena.add(step.store.top(base + 1), None);
            let r = arena.add(step.store.bottom(base + 1), None);
            arena.kids[a] = vec![c, r];
            frags.push((a, r));
        }
        let labels: Vec<_> = frags.iter().map(|&(a, b)| (arena.label[a], arena.label[b])).collect();
        if labels != step.store.fragments {
            return Err(bad(t, "store does not follow from the decisions"));
        }
    }
    let root = root.ok_or_else(|| bad(seq.len() - 1, "sentence never completes"))?;
    arena.to_tree(root, cats)
}

/// Log-probability of `tree` under the bounded grammar and under the
/// sequence model, in that order.
pub fn score_tree(
    bg: &BoundedGrammar,
    dm: &DerivedModels,
    tree: &Tree,
    cats: &CategorySet,
    vocab: &Vocabulary,
) -> Result<(f64, f64)> {
    let depth_bound = dm.depth_bound();
    let seq = tree_to_states(tree, cats, depth_bound)?;
    let words = vocab.encode(&tree.tokens())?;
    let layout = dm.layout();
    let lexical = dm.lexical();

    if words.len() == 1 {
        let p = seq[0].preterminal;
        let lp = (dm.theta_p(0, layout.root(), p) * lexical[[p, words[0]]]).ln();
        return Ok((lp, lp));
    }

    let mut pcfg = 0.0;
    let mut pos = 0;
    fn walk(
        t: &Tree,
        side: Side,
        d: usize,
        bg: &BoundedGrammar,
        cats: &CategorySet,
        words: &[usize],
        pos: &mut usize,
        acc: &mut f64,
    ) {
        let layout = bg.layout();
        let row = cats.index_of(t.label().unwrap()).unwrap();
        let m = bg.side(side, d);
        if t.is_preterminal() {
            *acc += m[[row, layout.lex(words[*pos])]].ln();
            *pos += 1;
            return;
        }
        let kids = t.children();
        let l = cats.index_of(kids[0].label().unwrap()).unwrap();
        let r = cats.index_of(kids[1].label().unwrap()).unwrap();
        *acc += m[[row, layout.pair(l, r)]].ln();
        let ld = if side == Side::Left { d } else { d + 1 };
        walk(&kids[0], Side::Left, ld, bg, cats, words, pos, acc);
        walk(&kids[1], Side::Right, d, bg, cats, words, pos, acc);
    }
    walk(tree, Side::Left, 1, bg, cats, &words, &mut pos, &mut pcfg);

    let mut seqp = 0.0;
    let mut prev = StoreState::empty();
    for (step, &w) in seq.iter().zip(&words) {
        let weight = dm.step_weight(&prev, step);
        seqp += weight.ln() + lexical[[step.preterminal, w]].ln();
        prev = step.store.clone();
    }
    Ok((pcfg, seqp))
}
