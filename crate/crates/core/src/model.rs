//! Left-corner sequence sub-models derived from a depth-bounded grammar.
//!
//! Depth `e` indexes the context a token is read under: the bottom sign at
//! `(R, e)`, or the sentence start when `e == 0`. A preterminal forked below
//! that context sits at `(L, e + 1)`, and so does a node joined below it.

use ndarray::{Array1, Array2, Array3};

use crate::bounding::{BoundedGrammar, LeftCornerExpectations, Side};
use crate::error::{Error, Result};
use crate::grammar::{Grammar, Layout};
use crate::store::{StateStep, StoreState};

#[derive(Debug, Clone)]
pub struct DerivedModels {
    layout: Layout,
    depth_bound: usize,
    fork_norm: Vec<Array1<f64>>,
    fork: Vec<Array1<f64>>,
    no_fork: Vec<Array1<f64>>,
    pick: Vec<Array2<f64>>,
    join_norm: Vec<Array2<f64>>,
    join: Vec<Array2<f64>>,
    no_join: Vec<Array2<f64>>,
    above: Vec<Array3<f64>>,
    right_left: Vec<Array3<f64>>,
    right_right: Vec<Array3<f64>>,
    lexical: Array2<f64>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// `m[a, (c, r)] / m[a, (c, _)]` as an `[a, c, r]` array.
fn right_child_table(layout: Layout, m: &Array2<f64>) -> Array3<f64> {
    let (n, k) = (layout.rows(), layout.k);
    let mut out = Array3::zeros((n, k, k));
    for a in 0..n {
        for c in 0..k {
            let total: f64 = (0..k).map(|r| m[[a, layout.pair(c, r)]]).sum();
            for r in 0..k {
                out[[a, c, r]] = ratio(m[[a, layout.pair(c, r)]], total);
            }
        }
    }
    out
}

/// Builds every sub-model from the bounded grammar and the fragment
/// expectations computed from it.
pub fn derive_submodels(g: &Grammar, bg: &BoundedGrammar, x: &LeftCornerExpectations) -> Result<DerivedModels> {
    let layout = g.layout();
    let depth_bound = bg.depth_bound();
    if bg.layout() != layout || x.depths() != depth_bound + 1 {
        return Err(Error::Structural(
            "bounded grammar and expectations do not match the grammar".into(),
        ));
    }
    let (n, k) = (layout.rows(), layout.k);
    let root = layout.root();

    let mut lexical = Array2::zeros((n, layout.w));
    for p in 0..k {
        let mass = g.lex_mass(p);
        for w in 0..layout.w {
            lexical[[p, w]] = ratio(g.lex_prob(p, w), mass);
        }
    }

    let right_left = (0..=depth_bound + 1)
        .map(|d| {
            if d == 0 {
                Array3::zeros((n, k, k))
            } else {
                right_child_table(layout, bg.left(d))
            }
        })
        .collect();
    let right_right = (0..=depth_bound)
        .map(|d| {
            if d == 0 {
                Array3::zeros((n, k, k))
            } else {
                right_child_table(layout, bg.right(d))
            }
        })
        .collect();

    let mut dm = DerivedModels {
        layout,
        depth_bound,
        fork_norm: Vec::new(),
        fork: Vec::new(),
        no_fork: Vec::new(),
        pick: Vec::new(),
        join_norm: Vec::new(),
        join: Vec::new(),
        no_join: Vec::new(),
        above: Vec::new(),
        right_left,
        right_right,
        lexical,
    };

    for e in 0..=depth_bound {
        let xe = x.plus(e);
        let below = e + 1;
        let lex_below: Vec<f64> = (0..n).map(|p| bg.lex_mass(Side::Left, below, p)).collect();

        let mut fork_norm = Array1::zeros(n);
        let mut fork = Array1::zeros(n);
        let mut no_fork = Array1::zeros(n);
        let mut pick = Array2::zeros((n, n));
        for b in 0..n {
            let stay = if e == 0 { 0.0 } else { bg.lex_mass(Side::Right, e, b) };
            let weights: Vec<f64> = (0..n).map(|p| xe[[b, p]] * lex_below[p]).collect();
            let down: f64 = weights.iter().sum();
            let z = stay + down;
            fork_norm[b] = z;
            fork[b] = ratio(down, z);
            no_fork[b] = ratio(stay, z);
            for p in 0..n {
                pick[[b, p]] = ratio(weights[p], down);
            }
        }

        let mut join_norm = Array2::zeros((n, n));
        let mut join = Array2::zeros((n, n));
        let mut no_join = Array2::zeros((n, n));
        let mut above = Array3::zeros((n, n, n));
        for b in 0..n {
            for c in 0..n {
                let up = if e == 0 {
                    f64::from(u8::from(b == root && c == root))
                } else if c < k {
                    bg.left_child_mass(Side::Right, e, b, c)
                } else {
                    0.0
                };
                let mut weights = vec![0.0; n];
                if c < k {
                    for (a, wt) in weights.iter_mut().enumerate() {
                        *wt = xe[[b, a]] * bg.left_child_mass(Side::Left, below, a, c);
                    }
                }
                let across: f64 = weights.iter().sum();
                let z = up + across;
                join_norm[[b, c]] = z;
                join[[b, c]] = ratio(up, z);
                no_join[[b, c]] = ratio(across, z);
                for a in 0..n {
                    above[[b, c, a]] = ratio(weights[a], across);
                }
            }
        }

        dm.fork_norm.push(fork_norm);
        dm.fork.push(fork);
        dm.no_fork.push(no_fork);
        dm.pick.push(pick);
        dm.join_norm.push(join_norm);
        dm.join.push(join);
        dm.no_join.push(no_join);
        dm.above.push(above);
    }
    Ok(dm)
}

impl DerivedModels {
    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn depth_bound(&self) -> usize {
        self.depth_bound
    }

    /// Normalizer of the fork decision below `b` at depth `e`; zero marks an
    /// unreachable context.
    pub fn fork_norm(&self, e: usize, b: usize) -> f64 {
        self.fork_norm[e][b]
    }

    pub fn theta_f(&self, e: usize, b: usize, fork: bool) -> f64 {
        if fork {
            self.fork[e][b]
        } else {
            self.no_fork[e][b]
        }
    }

    pub fn theta_p(&self, e: usize, b: usize, p: usize) -> f64 {
        self.pick[e][[b, p]]
    }

    pub fn join_norm(&self, e: usize, b: usize, c: usize) -> f64 {
        self.join_norm[e][[b, c]]
    }

    pub fn theta_j(&self, e: usize, b: usize, c: usize, join: bool) -> f64 {
        if join {
            self.join[e][[b, c]]
        } else {
            self.no_join[e][[b, c]]
        }
    }

    pub fn theta_a(&self, e: usize, b: usize, c: usize, a: usize) -> f64 {
        self.above[e][[b, c, a]]
    }

    /// Right child `r` of a rule `parent -> c r` at the given position.
    pub fn theta_b(&self, side: Side, d: usize, parent: usize, c: usize, r: usize) -> f64 {
        match side {
            Side::Left => self.right_left[d][[parent, c, r]],
            Side::Right => self.right_right[d][[parent, c, r]],
        }
    }

    pub fn lexical(&self) -> &Array2<f64> {
        &self.lexical
    }

    /// Probability of one step out of `prev`, excluding the word emission.
    pub fn step_weight(&self, prev: &StoreState, step: &StateStep) -> f64 {
        let (k, root) = (self.layout.k, self.layout.root());
        let d = prev.depth();
        let next = &step.store;
        let p = step.preterminal;
        if p >= k {
            return 0.0;
        }
        let (mut w, c, e) = if step.fork {
            let b = if d == 0 { root } else { prev.bottom(d) };
            (self.theta_f(d, b, true) * self.theta_p(d, b, p), p, d)
        } else {
            if d == 0 || prev.bottom(d) != p {
                return 0.0;
            }
            (self.theta_f(d, p, false), prev.top(d), d - 1)
        };
        let ctx = if e == 0 { root } else { prev.bottom(e) };
        if step.join {
            if e == 0 {
                return if next.is_empty() { w * self.theta_j(0, root, c, true) } else { 0.0 };
            }
            if c >= k
                || next.depth() != e
                || next.fragments[..e - 1] != prev.fragments[..e - 1]
                || next.top(e) != prev.top(e)
            {
                return 0.0;
            }
            w *= self.theta_j(e, ctx, c, true) * self.theta_b(Side::Right, e, ctx, c, next.bottom(e));
        } else {
            if c >= k || e >= self.depth_bound || next.depth() != e + 1 || next.fragments[..e] != prev.fragments[..e] {
                return 0.0;
            }
            let (a, r) = next.fragments[e];
            w *= self.theta_j(e, ctx, c, false) * self.theta_a(e, ctx, c, a) * self.theta_b(Side::Left, e + 1, a, c, r);
        }
        w
    }

    /// Every nonzero step out of `store`, with its probability excluding the
    /// word emission.
    pub fn successors(&self, store: &StoreState) -> Vec<(StateStep, f64)> {
        let k = self.layout.k;
        let root = self.layout.root();
        let depth = store.depth();
        let mut out = Vec::new();

        // fork: the preterminal sits below the current bottom sign
        let b = if depth == 0 { root } else { store.bottom(depth) };
        let pf = self.theta_f(depth, b, true);
        if pf > 0.0 {
            for p in 0..k {
                let wp = pf * self.theta_p(depth, b, p);
                if wp > 0.0 {
                    self.joins(store, depth, b, p, true, p, wp, &mut out);
                }
            }
        }
        // no fork: the bottom sign itself is the preterminal and completes
        // the deepest fragment
        if depth > 0 {
            let wn = self.theta_f(depth, b, false);
            if wn > 0.0 {
                let base = store.truncated(depth - 1);
                let ctx = if depth == 1 { root } else { base.bottom(depth - 1) };
                let completed = store.top(depth);
                self.joins(&base, depth - 1, ctx, completed, false, b, wn, &mut out);
            }
        }
        out
    }

    /// Join outcomes for node `c` completed below context `ctx` at depth `e`;
    /// `base` holds the fragments down to depth `e`.
    #[allow(clippy::too_many_arguments)]
    fn joins(
        &self,
        base: &StoreState,
        e: usize,
        ctx: usize,
        c: usize,
        fork: bool,
        p: usize,
        weight: f64,
        out: &mut Vec<(StateStep, f64)>,
    ) {
        let k = self.layout.k;
        let n = self.layout.rows();
        let pj = self.theta_j(e, ctx, c, true);
        if pj > 0.0 {
            if e == 0 {
                out.push((
                    StateStep {
                        fork,
                        preterminal: p,
                        join: true,
                        store: StoreState::empty(),
                    },
                    weight * pj,
                ));
            } else {
                for r in 0..k {
                    let w = weight * pj * self.theta_b(Side::Right, e, ctx, c, r);
                    if w > 0.0 {
                        out.push((
                            StateStep {
                                fork,
                                preterminal: p,
                                join: true,
                                store: base.clone().with_bottom(r),
                            },
                            w,
                        ));
                    }
                }
            }
        }
        let pn = self.theta_j(e, ctx, c, false);
        if pn > 0.0 && e < self.depth_bound {
            for a in 0..n {
                let wa = weight * pn * self.theta_a(e, ctx, c, a);
                if wa == 0.0 {
                    continue;
                }
                for r in 0..k {
                    let w = wa * self.theta_b(Side::Left, e + 1, a, c, r);
                    if w > 0.0 {
                        out.push((
                            StateStep {
                                fork,
                                preterminal: p,
                                join: false,
                                store: base.clone().pushed(a, r),
                            },
                            w,
                        ));
                    }
                }
            }
        }
    }
}
