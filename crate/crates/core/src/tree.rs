//! Constituency trees and the one-tree-per-line bracketed format.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tree {
    Leaf(String),
    Node { label: String, children: Vec<Tree> },
}

/// A labeled constituent over tokens `start..end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Tree {
    pub fn leaf(token: impl Into<String>) -> Tree {
        Tree::Leaf(token.into())
    }

    pub fn node(label: impl Into<String>, children: Vec<Tree>) -> Tree {
        Tree::Node {
            label: label.into(),
            children,
        }
    }

    /// `(label token)`
    pub fn preterminal(label: impl Into<String>, token: impl Into<String>) -> Tree {
        Tree::node(label, vec![Tree::leaf(token)])
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Tree::Leaf(_) => None,
            Tree::Node { label, .. } => Some(label),
        }
    }

    pub fn children(&self) -> &[Tree] {
        match self {
            Tree::Leaf(_) => &[],
            Tree::Node { children, .. } => children,
        }
    }

    pub fn is_preterminal(&self) -> bool {
        matches!(self, Tree::Node { children, .. } if children.len() == 1 && matches!(children[0], Tree::Leaf(_)))
    }

    pub fn tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_tokens(&mut out);
        out
    }

    fn collect_tokens<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Tree::Leaf(t) => out.push(t),
            Tree::Node { children, .. } => children.iter().for_each(|c| c.collect_tokens(out)),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Tree::Leaf(_) => 1,
            Tree::Node { children, .. } => children.iter().map(Tree::len).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every labeled node with its token span, in preorder.
    pub fn spans(&self) -> Vec<Span> {
        let mut out = Vec::new();
        self.collect_spans(0, &mut out);
        out
    }

    fn collect_spans(&self, start: usize, out: &mut Vec<Span>) -> usize {
        match self {
            Tree::Leaf(_) => start + 1,
            Tree::Node { label, children } => {
                let idx = out.len();
                out.push(Span {
                    start,
                    end: start,
                    label: label.clone(),
                });
                let mut end = start;
                for c in children {
                    end = c.collect_spans(end, out);
                }
                out[idx].end = end;
                end
            }
        }
    }

    /// Number of nodes with exactly two children.
    pub fn binary_nodes(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Node { children, .. } => {
                usize::from(children.len() == 2) + children.iter().map(Tree::binary_nodes).sum::<usize>()
            }
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Leaf(t) => f.write_str(t),
            Tree::Node { label, children } => {
                write!(f, "({label}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Reader<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    line: usize,
    text: &'a str,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        let column = self
            .chars
            .get(self.pos)
            .map_or(self.text.chars().count() + 1, |_| self.pos + 1);
        Error::Parse {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn atom(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == '(' || c == ')' {
                break;
            }
            self.pos += 1;
        }
        let from = self.chars[start].0;
        let to = self.chars.get(self.pos).map_or(self.text.len(), |c| c.0);
        self.text[from..to].to_string()
    }

    fn tree(&mut self) -> Result<Tree> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.err("unexpected end of line")),
            Some(')') => Err(self.err("unexpected `)`")),
            Some('(') => {
                self.pos += 1;
                self.skip_ws();
                let label = match self.peek() {
                    Some('(') | Some(')') | None => String::new(),
                    Some(_) => self.atom(),
                };
                let mut children = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        None => return Err(self.err("unbalanced brackets: missing `)`")),
                        Some(')') => {
                            self.pos += 1;
                            break;
                        }
                        Some(_) => children.push(self.tree()?),
                    }
                }
                if children.is_empty() {
                    return Err(self.err(format!("node `{label}` has no children")));
                }
                Ok(Tree::Node { label, children })
            }
            Some(_) => Ok(Tree::Leaf(self.atom())),
        }
    }
}

/// Parses one bracketed tree. `line` is only used for error locations.
pub fn parse_tree(text: &str, line: usize) -> Result<Tree> {
    let mut r = Reader {
        chars: text.char_indices().collect(),
        pos: 0,
        line,
        text,
    };
    r.skip_ws();
    if r.peek() != Some('(') {
        return Err(r.err("a tree must start with `(`"));
    }
    let t = r.tree()?;
    r.skip_ws();
    if r.pos != r.chars.len() {
        return Err(r.err("trailing characters after tree"));
    }
    Ok(t)
}

/// Reads one tree per nonblank line.
pub fn read_bracketed(text: &str) -> Result<Vec<Tree>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_tree(l, i + 1))
        .collect()
}

pub fn write_bracketed(trees: &[Tree]) -> String {
    let mut out = String::new();
    for t in trees {
        out.push_str(&t.to_string());
        out.push('\n');
    }
    out
}

/// Strictly right-branching binary tree with preterminals, all labeled `X`.
pub fn right_branching_tree<S: AsRef<str>>(tokens: &[S]) -> Result<Tree> {
    let (last, rest) = tokens
        .split_last()
        .ok_or_else(|| Error::Parameter("cannot build a tree over zero tokens".into()))?;
    let mut tree = Tree::preterminal("X", last.as_ref());
    for tok in rest.iter().rev() {
        tree = Tree::node("X", vec![Tree::preterminal("X", tok.as_ref()), tree]);
    }
    Ok(tree)
}

/// Penn Treebank part-of-speech tags for punctuation.
pub const PTB_PUNCT_TAGS: &[&str] = &[",", ".", ":", "``", "''", "-LRB-", "-RRB-", "-NONE-", "HYPH", "NFP"];

const PTB_TAGS: &[&str] = &[
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS", "NNP", "NNPS", "PDT", "POS",
    "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP",
    "WP$", "WRB", "$", "#", "AFX", "ADD", "GW", "XX",
];

/// A token made only of punctuation or symbol characters.
pub fn is_punctuation_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| !c.is_alphanumeric() && !c.is_whitespace())
}

/// Punctuation decision for a preterminal: known PTB tags decide by label,
/// anything else by the token's characters.
pub fn is_punctuation(label: Option<&str>, token: &str) -> bool {
    match label {
        Some(l) if PTB_PUNCT_TAGS.contains(&l) => true,
        Some(l) if PTB_TAGS.contains(&l) => false,
        _ => is_punctuation_token(token),
    }
}

/// `true` for every token that should be kept.
pub fn punctuation_mask(tree: &Tree) -> Vec<bool> {
    fn walk(t: &Tree, parent_label: Option<&str>, out: &mut Vec<bool>) {
        match t {
            Tree::Leaf(tok) => out.push(!is_punctuation(parent_label, tok)),
            Tree::Node { label, children } => {
                let pl = if t.is_preterminal() { Some(label.as_str()) } else { None };
                children.iter().for_each(|c| walk(c, pl, out));
            }
        }
    }
    let mut out = Vec::new();
    walk(tree, None, &mut out);
    out
}

/// Removes the tokens whose `keep` flag is false. Nodes left empty are
/// dropped and nodes that become unary through the removal are replaced by
/// their remaining child. Returns `None` when nothing is left.
pub fn strip_tokens(tree: &Tree, keep: &[bool]) -> Result<Option<Tree>> {
    if keep.len() != tree.len() {
        return Err(Error::Parameter(format!(
            "mask has {} entries for a tree of {} tokens",
            keep.len(),
            tree.len()
        )));
    }
    fn walk(t: &Tree, keep: &[bool], pos: &mut usize) -> Option<Tree> {
        match t {
            Tree::Leaf(_) => {
                let k = keep[*pos];
                *pos += 1;
                k.then(|| t.clone())
            }
            Tree::Node { label, children } => {
                let kept: Vec<Tree> = children.iter().filter_map(|c| walk(c, keep, pos)).collect();
                match kept.len() {
                    0 => None,
                    1 if children.len() > 1 && matches!(kept[0], Tree::Node { .. }) => kept.into_iter().next(),
                    _ => Some(Tree::Node {
                        label: label.clone(),
                        children: kept,
                    }),
                }
            }
        }
    }
    let mut pos = 0;
    Ok(walk(tree, keep, &mut pos))
}

/// Strips punctuation using the tree's own labels and tokens.
pub fn strip_punctuation(tree: &Tree) -> Option<Tree> {
    let mask = punctuation_mask(tree);
    strip_tokens(tree, &mask).expect("mask built from the same tree")
}
