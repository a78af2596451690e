//! Depth bounding: containment likelihoods, side- and depth-specific
//! grammars, and left-corner expectations.
//!
//! Positions are written `(side, depth)`. A left sibling at `(L, d)` has
//! children at `(L, d)` and `(R, d)`; a right sibling at `(R, d)` has its
//! left child at `(L, d + 1)` and its right child at `(R, d)`. Right
//! siblings are bounded by `D`, left siblings by `D + 1`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::grammar::{Grammar, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// Default truncation order for containment and left-corner expectations.
pub const DEFAULT_ITERATIONS: usize = 20;

/// Completion probabilities `h[s][d]` for every nonterminal, kept for each
/// iteration `0..=I`. Terminals (and the null symbol) complete with
/// probability one and are not stored.
#[derive(Debug, Clone)]
pub struct ContainmentTable {
    depth_bound: usize,
    iterations: usize,
    // [depth][iteration] -> vector over nonterminals
    left: Vec<Vec<Array1<f64>>>,
    right: Vec<Vec<Array1<f64>>>,
}

impl ContainmentTable {
    pub fn depth_bound(&self) -> usize {
        self.depth_bound
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `h^(i)[side][depth]`; depths beyond the table are all-zero.
    pub fn at(&self, side: Side, depth: usize, iteration: usize) -> Array1<f64> {
        let table = match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        };
        match table.get(depth) {
            Some(per_iter) => per_iter[iteration].clone(),
            None => Array1::zeros(self.left[0][0].len()),
        }
    }

    /// Converged value `h^(I)`.
    pub fn get(&self, side: Side, depth: usize, symbol: usize) -> f64 {
        let table = match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        };
        table
            .get(depth)
            .map_or(0.0, |per_iter| per_iter[self.iterations][symbol])
    }

    fn final_vec(&self, side: Side, depth: usize) -> Option<&Array1<f64>> {
        let table = match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        };
        table.get(depth).map(|per_iter| &per_iter[self.iterations])
    }
}

fn lexical_plus_pairs(g: &Grammar, left: &Array1<f64>, right: &Array1<f64>) -> Array1<f64> {
    let layout = g.layout();
    let k = layout.k;
    let probs = g.probs();
    Array1::from_iter((0..layout.rows()).map(|c| {
        let mut total = g.lex_mass(c);
        for a in 0..k {
            if left[a] == 0.0 {
                continue;
            }
            for b in 0..k {
                total += probs[[c, layout.pair(a, b)]] * left[a] * right[b];
            }
        }
        total
    }))
}

/// Iterates the containment recursion `iterations` times from zero.
pub fn compute_containment(g: &Grammar, depth_bound: usize, iterations: usize) -> Result<ContainmentTable> {
    if depth_bound == 0 {
        return Err(Error::Parameter("depth bound must be at least 1".into()));
    }
    if iterations == 0 {
        return Err(Error::Parameter("containment iterations must be at least 1".into()));
    }
    let n = g.layout().rows();
    let root = g.layout().root();
    let zero = Array1::<f64>::zeros(n);
    let mut root_indicator = zero.clone();
    root_indicator[root] = 1.0;

    // left depths 0..=D+1, right depths 0..=D
    let mut left = vec![vec![zero.clone()]; depth_bound + 2];
    let mut right = vec![vec![zero.clone()]; depth_bound + 1];

    for i in 1..=iterations {
        let mut next_left = Vec::with_capacity(depth_bound + 2);
        for d in 0..=depth_bound + 1 {
            let hl = &left[d][i - 1];
            let hr = right.get(d).map_or(&zero, |r| &r[i - 1]);
            next_left.push(lexical_plus_pairs(g, hl, hr));
        }
        let mut next_right = Vec::with_capacity(depth_bound + 1);
        next_right.push(root_indicator.clone());
        for d in 1..=depth_bound {
            let hl = &left[d + 1][i - 1];
            let hr = &right[d][i - 1];
            next_right.push(lexical_plus_pairs(g, hl, hr));
        }
        for (d, v) in next_left.into_iter().enumerate() {
            left[d].push(v);
        }
        for (d, v) in next_right.into_iter().enumerate() {
            right[d].push(v);
        }
    }

    Ok(ContainmentTable {
        depth_bound,
        iterations,
        left,
        right,
    })
}

/// Side- and depth-specific renormalized grammars.
///
/// `left(d)` exists for `d` in `1..=D+1`, `right(d)` for `d` in `1..=D`.
/// Index 0 of either side holds an all-zero placeholder.
#[derive(Debug, Clone)]
pub struct BoundedGrammar {
    layout: Layout,
    depth_bound: usize,
    left: Vec<Array2<f64>>,
    right: Vec<Array2<f64>>,
    unreachable: Vec<(Side, usize, usize)>,
}

impl BoundedGrammar {
    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn depth_bound(&self) -> usize {
        self.depth_bound
    }

    pub fn side(&self, side: Side, depth: usize) -> &Array2<f64> {
        match side {
            Side::Left => &self.left[depth],
            Side::Right => &self.right[depth],
        }
    }

    pub fn left(&self, depth: usize) -> &Array2<f64> {
        &self.left[depth]
    }

    pub fn right(&self, depth: usize) -> &Array2<f64> {
        &self.right[depth]
    }

    /// Rows with source mass but zero containment: `(side, depth, row)`.
    pub fn unreachable(&self) -> &[(Side, usize, usize)] {
        &self.unreachable
    }

    /// Total lexical probability of a bounded row.
    pub fn lex_mass(&self, side: Side, depth: usize, row: usize) -> f64 {
        let k2 = self.layout.k * self.layout.k;
        self.side(side, depth).row(row).iter().skip(k2).sum()
    }

    /// Probability mass of rules `row -> left _`.
    pub fn left_child_mass(&self, side: Side, depth: usize, row: usize, left: usize) -> f64 {
        let m = self.side(side, depth);
        (0..self.layout.k)
            .map(|b| m[[row, self.layout.pair(left, b)]])
            .sum()
    }
}

fn reweight(g: &Grammar, hl: &Array1<f64>, hr: &Array1<f64>) -> (Array2<f64>, Vec<usize>) {
    let layout = g.layout();
    let k = layout.k;
    let mut out = g.probs().clone();
    let mut zero_rows = Vec::new();
    for c in 0..layout.rows() {
        for a in 0..k {
            for b in 0..k {
                out[[c, layout.pair(a, b)]] *= hl[a] * hr[b];
            }
        }
        let total: f64 = out.row(c).sum();
        if total > 0.0 {
            out.row_mut(c).mapv_inplace(|x| x / total);
        } else {
            out.row_mut(c).fill(0.0);
            zero_rows.push(c);
        }
    }
    (out, zero_rows)
}

/// Reweights every expansion by its children's containment and
/// renormalizes each row. The divisor is the row's reweighted mass, which
/// is the parent's own containment once the recursion has converged.
pub fn bound_grammar(g: &Grammar, h: &ContainmentTable) -> Result<BoundedGrammar> {
    let layout = g.layout();
    if h.left[0][0].len() != layout.rows() {
        return Err(Error::Structural("containment table does not match grammar".into()));
    }
    let d_max = h.depth_bound;
    let zero_vec = Array1::<f64>::zeros(layout.rows());
    let placeholder = Array2::<f64>::zeros((layout.rows(), layout.cols()));
    let mut left = vec![placeholder.clone()];
    let mut right = vec![placeholder];
    let mut unreachable = Vec::new();
    let source_mass = |c: usize| g.probs().row(c).sum() > 0.0;

    for d in 1..=d_max + 1 {
        let hl = h.final_vec(Side::Left, d).unwrap_or(&zero_vec);
        let hr = h.final_vec(Side::Right, d).unwrap_or(&zero_vec);
        let (m, zeros) = reweight(g, hl, hr);
        unreachable.extend(zeros.into_iter().filter(|&c| source_mass(c)).map(|c| (Side::Left, d, c)));
        left.push(m);
    }
    for d in 1..=d_max {
        let hl = h.final_vec(Side::Left, d + 1).unwrap_or(&zero_vec);
        let hr = h.final_vec(Side::Right, d).unwrap_or(&zero_vec);
        let (m, zeros) = reweight(g, hl, hr);
        unreachable.extend(zeros.into_iter().filter(|&c| source_mass(c)).map(|c| (Side::Right, d, c)));
        right.push(m);
    }
    Ok(BoundedGrammar {
        layout,
        depth_bound: d_max,
        left,
        right,
        unreachable,
    })
}

/// Square `(K+1) x (K+1)` matrix of left-child probabilities, summing out
/// the right child. The root column stays zero because `T` is never a child.
pub fn left_child_marginal(layout: Layout, m: &Array2<f64>) -> Array2<f64> {
    let n = layout.rows();
    let mut out = Array2::zeros((n, n));
    for c in 0..n {
        for a in 0..layout.k {
            out[[c, a]] = (0..layout.k).map(|b| m[[c, layout.pair(a, b)]]).sum();
        }
    }
    out
}

/// Truncated left-corner expectations, one table per depth.
#[derive(Debug, Clone)]
pub struct LeftCornerExpectations {
    iterations: usize,
    // [depth][order-1]
    orders: Vec<Vec<Array2<f64>>>,
    plus: Vec<Array2<f64>>,
}

impl LeftCornerExpectations {
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn depths(&self) -> usize {
        self.plus.len()
    }

    /// `E^(order)_d`, with `order` starting at 1.
    pub fn order(&self, depth: usize, order: usize) -> &Array2<f64> {
        &self.orders[depth][order - 1]
    }

    /// `E+_d`: sum of orders `1..=I`.
    pub fn plus(&self, depth: usize) -> &Array2<f64> {
        &self.plus[depth]
    }
}

fn chain_sum(first: Array2<f64>, step: &Array2<f64>, iterations: usize) -> (Vec<Array2<f64>>, Array2<f64>) {
    let mut orders = Vec::with_capacity(iterations);
    let mut plus = first.clone();
    let mut current = first;
    orders.push(current.clone());
    for _ in 1..iterations {
        current = current.dot(step);
        plus += &current;
        orders.push(current.clone());
    }
    (orders, plus)
}

/// Expected left-descendant counts below a right sibling at each depth,
/// chaining left-child steps through the same depth's left grammar.
/// Depth 0 holds zeros.
pub fn left_corner_expectations(bg: &BoundedGrammar, iterations: usize) -> Result<LeftCornerExpectations> {
    if iterations == 0 {
        return Err(Error::Parameter("expectation truncation must be at least 1".into()));
    }
    let layout = bg.layout;
    let n = layout.rows();
    let mut orders = vec![vec![Array2::zeros((n, n)); iterations]];
    let mut plus = vec![Array2::zeros((n, n))];
    for d in 1..=bg.depth_bound {
        let first = left_child_marginal(layout, bg.right(d));
        let step = left_child_marginal(layout, bg.left(d));
        let (o, p) = chain_sum(first, &step, iterations);
        orders.push(o);
        plus.push(p);
    }
    Ok(LeftCornerExpectations {
        iterations,
        orders,
        plus,
    })
}

/// Expectations used by the parser: nodes on the left chain below a right
/// sibling at `(R, d)` sit at `(L, d + 1)`, so chain steps use
/// `left(d + 1)`. Depth 0 is the sentence context: its only nonzero row is
/// the root's, starting from the root itself at `(L, 1)`.
pub fn fragment_expectations(bg: &BoundedGrammar, iterations: usize) -> Result<LeftCornerExpectations> {
    if iterations == 0 {
        return Err(Error::Parameter("expectation truncation must be at least 1".into()));
    }
    let layout = bg.layout;
    let n = layout.rows();
    let root = layout.root();
    let mut orders = Vec::with_capacity(bg.depth_bound + 1);
    let mut plus = Vec::with_capacity(bg.depth_bound + 1);

    let mut first = Array2::zeros((n, n));
    first[[root, root]] = 1.0;
    let (o, p) = chain_sum(first, &left_child_marginal(layout, bg.left(1)), iterations);
    orders.push(o);
    plus.push(p);

    for d in 1..=bg.depth_bound {
        let first = left_child_marginal(layout, bg.right(d));
        let step = left_child_marginal(layout, bg.left(d + 1));
        let (o, p) = chain_sum(first, &step, iterations);
        orders.push(o);
        plus.push(p);
    }
    Ok(LeftCornerExpectations {
        iterations,
        orders,
        plus,
    })
}
