//! Checks behind the acceptance criteria. Each returns a one-line summary
//! on success and the first violation on failure.

use std::collections::{BTreeMap, HashMap};

use dbpcfg::bounding::{bound_grammar, compute_containment, fragment_expectations, left_corner_expectations, Side};
use dbpcfg::eval::{np_aggregate_f1, np_recall, parseval, permutation_test, SentenceCounts};
use dbpcfg::grammar::{read_grammar_tsv, validate_grammar, CategorySet, CountMatrix, Grammar, Vocabulary};
use dbpcfg::lc::{score_tree, states_to_tree, tree_to_states};
use dbpcfg::model::derive_submodels;
use dbpcfg::sampler::{add_sequence_counts, backward_sample, forward_filter};
use dbpcfg::tree::{parse_tree, right_branching_tree, Tree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    all_sentences, all_trees, in_bound, instance, pcfg_prob, random_grammar, rule_multiset, words, Instance,
};

pub type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Probabilities of every tree rooted at `c` at position `(side, d)` with
/// height at most `height`, one entry per tree.
fn tree_probs(
    g: &Grammar,
    c: usize,
    side: Side,
    d: usize,
    height: usize,
    depth: usize,
    memo: &mut HashMap<(usize, bool, usize, usize), Vec<f64>>,
) -> Vec<f64> {
    let legal = match side {
        Side::Left => d >= 1 && d <= depth + 1,
        Side::Right => d >= 1 && d <= depth,
    };
    if height == 0 || !legal {
        return Vec::new();
    }
    let key = (c, side == Side::Left, d, height);
    if let Some(v) = memo.get(&key) {
        return v.clone();
    }
    let layout = g.layout();
    let mut out: Vec<f64> = (0..layout.w).map(|w| g.lex_prob(c, w)).filter(|&p| p > 0.0).collect();
    let (ld, rd) = match side {
        Side::Left => (d, d),
        Side::Right => (d + 1, d),
    };
    for a in 0..layout.k {
        for b in 0..layout.k {
            let rule = g.pair_prob(c, a, b);
            if rule == 0.0 {
                continue;
            }
            let left = tree_probs(g, a, Side::Left, ld, height - 1, depth, memo);
            let right = tree_probs(g, b, Side::Right, rd, height - 1, depth, memo);
            for l in &left {
                for r in &right {
                    out.push(rule * l * r);
                }
            }
        }
    }
    memo.insert(key, out.clone());
    out
}

/// Brute-force check of containment against explicit tree enumeration.
pub fn containment_oracle() -> Outcome {
    let mut checked = 0;
    for seed in 0..6u64 {
        for (k, depth, max_h) in [(1, 1, 4), (2, 1, 3), (2, 2, 3), (3, 2, 3)] {
            let (_, _, g) = random_grammar(k, 2, 0.7, 100 + seed);
            let h = compute_containment(&g, depth, max_h).unwrap();
            let mut memo = HashMap::new();
            for i in 1..=max_h {
                for (side, dmax) in [(Side::Left, depth + 1), (Side::Right, depth)] {
                    for d in 1..=dmax {
                        let got = h.at(side, d, i);
                        for c in 0..g.layout().rows() {
                            let brute: f64 = tree_probs(&g, c, side, d, i, depth, &mut memo).iter().sum();
                            check((got[c] - brute).abs() <= 1e-12, || {
                                format!("h^({i})[{side:?}][{d}][{c}] = {} but enumeration gives {brute}", got[c])
                            })?;
                            checked += 1;
                        }
                    }
                }
            }
            let r0 = h.at(Side::Right, 0, max_h);
            check(
                (0..r0.len()).all(|c| r0[c] == f64::from(u8::from(c == g.layout().root()))),
                || "right depth-0 containment is not the root indicator".into(),
            )?;
        }
    }
    Ok(format!("{checked} containment entries match enumeration"))
}

/// Brute-force check of left-corner expectations against explicit chains.
pub fn expectation_oracle() -> Outcome {
    let mut checked = 0;
    for seed in 0..6u64 {
        for (k, depth) in [(1, 1), (2, 1), (2, 2), (3, 2)] {
            let (_, _, g) = random_grammar(k, 2, 0.7, 200 + seed);
            let layout = g.layout();
            let h = compute_containment(&g, depth, 20).unwrap();
            let bg = bound_grammar(&g, &h).unwrap();
            let literal = left_corner_expectations(&bg, 4).unwrap();
            let frag = fragment_expectations(&bg, 4).unwrap();
            let n = layout.rows();
            // sum over explicit (left, right) child choices along the chain
            let chains = |first: &ndarray::Array2<f64>, step: &ndarray::Array2<f64>, b: usize, c: usize, i: usize| {
                let mut total = 0.0;
                let mut stack = vec![(b, 1.0, 0usize)];
                while let Some((node, w, len)) = stack.pop() {
                    if len == i {
                        if node == c {
                            total += w;
                        }
                        continue;
                    }
                    let m = if len == 0 { first } else { step };
                    for a in 0..layout.k {
                        for r in 0..layout.k {
                            let p = m[[node, layout.pair(a, r)]];
                            if p > 0.0 {
                                stack.push((a, w * p, len + 1));
                            }
                        }
                    }
                }
                total
            };
            for d in 1..=depth {
                for i in 1..=4 {
                    for b in 0..n {
                        for c in 0..n {
                            let brute = chains(bg.right(d), bg.left(d), b, c, i);
                            let got = literal.order(d, i)[[b, c]];
                            check((got - brute).abs() <= 1e-12, || {
                                format!("E^({i})_{d}[{b},{c}] = {got} but chains give {brute}")
                            })?;
                            let brute = chains(bg.right(d), bg.left(d + 1), b, c, i);
                            let got = frag.order(d, i)[[b, c]];
                            check((got - brute).abs() <= 1e-12, || {
                                format!("fragment X^({i})_{d}[{b},{c}] = {got} but chains give {brute}")
                            })?;
                            checked += 2;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{checked} expectation entries match chain enumeration"))
}

pub const TINY: &str = "X1\tX1\tX2\t0.5\nX1\ta\t_\t0.5\nX2\tb\t_\t1\nT\tX1\tX2\t1\n";

/// The hand-computed values for the tiny grammar at I = 20.
pub fn worked_values() -> Outcome {
    let cats = CategorySet::new(2).unwrap();
    let vocab = Vocabulary::from_sentences(&[vec!["a", "b"]]);
    let g = read_grammar_tsv(TINY, &cats, &vocab, 1.0).unwrap();
    let h = compute_containment(&g, 1, 20).unwrap();
    let bg = bound_grammar(&g, &h).unwrap();
    let e = left_corner_expectations(&bg, 20).unwrap();
    let x = fragment_expectations(&bg, 20).unwrap();
    let dm = derive_submodels(&g, &bg, &x).unwrap();
    let a = g.layout().lex(0);
    let values = [
        ("h_R1(X1)", h.get(Side::Right, 1, 0), 0.75),
        ("G_R1(X1 -> a)", bg.right(1)[[0, a]], 2.0 / 3.0),
        ("theta_F1(1|X1)", dm.theta_f(1, 0, true), 1.0 / 3.0),
        ("E+(X1,X1)", e.plus(1)[[0, 0]], 2.0 / 3.0),
    ];
    for (name, got, want) in values {
        check((got - want).abs() <= 1e-5, || format!("{name} = {got}, expected {want}"))?;
    }
    Ok("h_R1=0.75, G_R1(a)=2/3, theta_F1(1)=1/3, E+=2/3".into())
}

/// Scores and likelihoods against exhaustive tree enumeration.
pub fn transform_equivalence(grammars: u64, iters: usize) -> Outcome {
    let mut trees_checked = 0;
    let mut sentences_checked = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..grammars {
        let k = 1 + (seed % 3) as usize;
        let w = 1 + ((seed / 3) % 3) as usize;
        let depth = 1 + ((seed / 9) % 2) as usize;
        let (cats, vocab, g) = random_grammar(k, w, 1.0, 1000 + seed);
        let inst = instance(cats, vocab, g, depth, iters);
        for sent in all_sentences(w, 4) {
            let mut z = 0.0;
            for tree in all_trees(&sent, &inst.cats) {
                let inside = in_bound(&tree, depth);
                let states = tree_to_states(&tree, &inst.cats, depth);
                check(inside == states.is_ok(), || {
                    format!("grammar {seed}: bound disagreement on {tree} ({states:?})")
                })?;
                if !inside {
                    continue;
                }
                let (p, q) = score_tree(&inst.bg, &inst.dm, &tree, &inst.cats, &inst.vocab).map_err(|e| e.to_string())?;
                let brute = pcfg_prob(&inst, &tree);
                worst = worst.max((p - q).abs()).max((p - brute.ln()).abs());
                check((p - q).abs() <= 1e-9 && (p - brute.ln()).abs() <= 1e-9, || {
                    format!("grammar {seed} (K={k}, W={w}, D={depth}): {tree}: pcfg {p}, sequence {q}, oracle {}", brute.ln())
                })?;
                z += brute;
                trees_checked += 1;
            }
            let ids = inst.vocab.encode(&sent).unwrap();
            let ll = forward_filter(&inst.tm, &ids).map_err(|e| e.to_string())?.log_likelihood();
            worst = worst.max((ll - z.ln()).abs());
            check((ll - z.ln()).abs() <= 1e-9, || {
                format!("grammar {seed}: sentence {sent:?}: forward {ll}, tree sum {}", z.ln())
            })?;
            sentences_checked += 1;
        }
    }
    Ok(format!(
        "{grammars} grammars, {trees_checked} trees, {sentences_checked} sentences, max deviation {worst:.2e}"
    ))
}

/// Two categories over one word, `X1 -> X1 X1 | w`, `X2 -> X1 X2 | w`,
/// `T -> X1 X2`: `w w w` has exactly two parses, and the `X2` recursion
/// probability is tuned so the right-branching one has posterior 0.75.
pub fn ffbs_exactness(samples: usize) -> Outcome {
    let cats = CategorySet::new(2).unwrap();
    let vocab = Vocabulary::from_sentences(&[words(1)]);
    let sent = vec![words(1)[0].clone(); 3];
    let build = |r: f64| {
        // columns: X1X1, X1X2, X2X1, X2X2, w
        let probs = ndarray::array![
            [0.3, 0.0, 0.0, 0.0, 0.7],
            [0.0, r, 0.0, 0.0, 1.0 - r],
            [0.0, 1.0, 0.0, 0.0, 0.0]
        ];
        let g = Grammar::from_probs(2, 1, probs, 1.0).unwrap();
        instance(cats.clone(), vocab.clone(), g, 1, 2000)
    };
    let posterior = |inst: &Instance| -> Vec<(String, f64)> {
        let trees: Vec<_> = all_trees(&sent, &inst.cats).into_iter().filter(|t| in_bound(t, 1)).collect();
        let probs: Vec<f64> = trees.iter().map(|t| pcfg_prob(inst, t)).collect();
        let z: f64 = probs.iter().sum();
        trees
            .iter()
            .zip(probs)
            .filter(|(_, p)| *p > 0.0)
            .map(|(t, p)| (t.to_string(), p / z))
            .collect()
    };
    let right_branching = |inst: &Instance| -> f64 {
        posterior(inst)
            .iter()
            .filter(|(t, _)| t.starts_with("(T (X1 w0) "))
            .map(|(_, p)| p)
            .sum()
    };
    // the right-branching parse gains mass as the X2 recursion grows
    let (mut lo, mut hi) = (0.01, 0.99);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if right_branching(&build(mid)) < 0.75 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let inst = build(0.5 * (lo + hi));
    let exact = posterior(&inst);
    check(exact.len() == 2, || format!("expected two parses, found {exact:?}"))?;
    let target = right_branching(&inst);
    check((target - 0.75).abs() < 1e-6, || format!("tuned posterior is {target}"))?;
    let tv = sampled_tv(&inst, &sent, &exact, samples, 7)?;
    check(tv <= 0.02, || format!("total variation {tv:.4} over {samples} samples"))?;
    Ok(format!(
        "posterior {:.3}/{:.3}, total variation {tv:.4} over {samples} samples",
        exact[0].1, exact[1].1
    ))
}

/// Total variation between FFBS tree frequencies and an exact posterior.
pub fn sampled_tv(inst: &Instance, sent: &[String], exact: &[(String, f64)], samples: usize, seed: u64) -> Result<f64, String> {
    let ids = inst.vocab.encode(sent).unwrap();
    let trellis = forward_filter(&inst.tm, &ids).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut freq: HashMap<String, usize> = HashMap::new();
    for _ in 0..samples {
        let seq = backward_sample(&trellis, &inst.tm, &mut rng).map_err(|e| e.to_string())?;
        let tree = states_to_tree(&seq, sent, &inst.cats).map_err(|e| e.to_string())?;
        *freq.entry(tree.to_string()).or_default() += 1;
    }
    let known: usize = exact.iter().map(|(t, _)| freq.get(t).copied().unwrap_or(0)).sum();
    let mut tv = (samples - known) as f64 / samples as f64;
    for (t, p) in exact {
        tv += (freq.get(t).copied().unwrap_or(0) as f64 / samples as f64 - p).abs();
    }
    Ok(0.5 * tv)
}

fn row_ok(sum: f64) -> bool {
    (sum - 1.0).abs() <= 1e-9 || sum == 0.0
}

/// Normalization of every table for random grammars.
pub fn normalization(grammars: u64) -> Outcome {
    let mut rows = 0usize;
    for seed in 0..grammars {
        let k = 1 + (seed % 4) as usize;
        let w = 1 + ((seed / 4) % 4) as usize;
        let depth = 1 + ((seed / 16) % 2) as usize;
        let beta = [0.2, 0.5, 1.0][(seed % 3) as usize];
        let (cats, vocab, g) = random_grammar(k, w, beta, 5000 + seed);
        let diag = validate_grammar(&g);
        check(diag.passed(), || format!("grammar {seed}: {diag:?}"))?;
        let inst = instance(cats, vocab, g, depth, 20);
        let layout = inst.g.layout();
        let n = layout.rows();
        let tag = |what: &str, s: f64| format!("grammar {seed} (K={k}, W={w}, D={depth}): {what} sums to {s}");
        for (side, dmax) in [(Side::Left, depth + 1), (Side::Right, depth)] {
            for d in 1..=dmax {
                for r in 0..n {
                    let s = inst.bg.side(side, d).row(r).sum();
                    check(row_ok(s), || tag(&format!("bounded {side:?}{d} row {r}"), s))?;
                    rows += 1;
                }
            }
        }
        let dm = &inst.dm;
        for e in 0..=depth {
            for b in 0..n {
                if dm.fork_norm(e, b) > 0.0 {
                    let s = dm.theta_f(e, b, true) + dm.theta_f(e, b, false);
                    check(row_ok(s), || tag(&format!("theta_F{e}({b})"), s))?;
                    if dm.theta_f(e, b, true) > 0.0 {
                        let s: f64 = (0..k).map(|p| dm.theta_p(e, b, p)).sum();
                        check(row_ok(s) && s > 0.0, || tag(&format!("theta_P{e}({b})"), s))?;
                    }
                    rows += 1;
                }
                for c in 0..k {
                    if dm.join_norm(e, b, c) > 0.0 {
                        let s = dm.theta_j(e, b, c, true) + dm.theta_j(e, b, c, false);
                        check(row_ok(s), || tag(&format!("theta_J{e}({b},{c})"), s))?;
                        if dm.theta_j(e, b, c, false) > 0.0 {
                            let s: f64 = (0..n).map(|a| dm.theta_a(e, b, c, a)).sum();
                            check(row_ok(s) && s > 0.0, || tag(&format!("theta_A{e}({b},{c})"), s))?;
                        }
                        rows += 1;
                    }
                }
            }
        }
        for side in [Side::Left, Side::Right] {
            for d in 1..=depth {
                for parent in 0..n {
                    for c in 0..k {
                        let s: f64 = (0..k).map(|r| dm.theta_b(side, d, parent, c, r)).sum();
                        check(row_ok(s), || tag(&format!("theta_B {side:?}{d}({parent},{c})"), s))?;
                    }
                }
            }
        }
        for p in 0..k {
            let s = dm.lexical().row(p).sum();
            check(row_ok(s), || tag(&format!("lexical row {p}"), s))?;
        }
        for s in 0..inst.tm.num_states() {
            if inst.tm.is_reachable(s) {
                let sum = inst.tm.row_sum(s);
                check((sum - 1.0).abs() <= 1e-8, || tag(&format!("transition row {s}"), sum))?;
                rows += 1;
            }
        }
    }
    Ok(format!("{grammars} grammars, {rows} normalized rows"))
}

fn random_tree<R: Rng>(toks: &[String], k: usize, cats: &CategorySet, rng: &mut R) -> Tree {
    if toks.len() == 1 {
        return Tree::preterminal(cats.name(rng.random_range(0..k)), toks[0].as_str());
    }
    let split = rng.random_range(1..toks.len());
    let kids = vec![
        random_tree(&toks[..split], k, cats, rng),
        random_tree(&toks[split..], k, cats, rng),
    ];
    Tree::node(cats.name(rng.random_range(0..k)), kids)
}

/// Random in-bound trees: state round trip and rule counts.
pub fn round_trips(trees: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut done = 0;
    let mut attempts = 0;
    while done < trees {
        attempts += 1;
        let k = rng.random_range(1..=4);
        let w = rng.random_range(1..=4);
        let depth = rng.random_range(1..=2);
        let len = rng.random_range(1..=7);
        let cats = CategorySet::new(k).unwrap();
        let vocab = Vocabulary::from_sentences(&[words(w)]);
        let toks: Vec<String> = (0..len).map(|_| format!("w{}", rng.random_range(0..w))).collect();
        let root = cats.name(cats.root());
        let tree = if len == 1 {
            Tree::node(root, vec![random_tree(&toks, k, &cats, &mut rng)])
        } else {
            let inner = random_tree(&toks, k, &cats, &mut rng);
            Tree::node(root, inner.children().to_vec())
        };
        if !in_bound(&tree, depth) {
            continue;
        }
        let seq = tree_to_states(&tree, &cats, depth).map_err(|e| format!("{tree}: {e}"))?;
        let back = states_to_tree(&seq, &toks, &cats).map_err(|e| format!("{tree}: {e}"))?;
        check(back == tree, || format!("round trip changed {tree} into {back}"))?;
        let mut counts = CountMatrix::zeros(k, w);
        let ids = vocab.encode(&toks).unwrap();
        add_sequence_counts(&mut counts, &seq, &ids).map_err(|e| e.to_string())?;
        let want = rule_multiset(&tree, &cats, &vocab, k);
        let got: BTreeMap<(usize, usize), f64> = counts
            .counts()
            .indexed_iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|(ix, &v)| (ix, v))
            .collect();
        check(got == want, || format!("{tree}: counts {got:?}, rules {want:?}"))?;
        done += 1;
    }
    Ok(format!("{done} in-bound trees of {attempts} drawn"))
}

/// The hand-computed metric fixtures.
pub fn metric_fixtures() -> Outcome {
    let t = |s: &str| parse_tree(s, 1).unwrap();
    let ts = |xs: &[&str]| xs.iter().map(|s| t(s)).collect::<Vec<_>>();
    let r = parseval(&ts(&["(X (X (X a) (X b)) (X c))"]), &ts(&["(S (A a) (Y (B b) (C c)))"])).unwrap();
    check((r.precision, r.recall, r.f1) == (50.0, 50.0, 50.0), || format!("parseval split example gave {r:?}"))?;
    let gold = ts(&["(S (NP (D the) (N dog)) (VP (V saw) (NP (D a) (N cat))))", "(S (A a) (Y (B b) (C c)))"]);
    let r = parseval(&gold, &gold).unwrap();
    check((r.precision, r.recall, r.f1) == (100.0, 100.0, 100.0), || format!("parseval identity gave {r:?}"))?;

    let np_gold = ts(&["(S (NP (D a) (N b)) (V c) (NP (D d) (N e)))"]);
    let only_first = ts(&["(X (X (X a) (X b)) (X (X c) (X (X d) (X e))))"]);
    let only_first = vec![Tree::node("X", vec![only_first[0].children()[0].clone(), t("(X (X c) (X d) (X e))")])];
    let rec = np_recall(&only_first, &np_gold).unwrap();
    check(rec == 50.0, || format!("np_recall half example gave {rec}"))?;
    let rec = np_recall(&np_gold, &np_gold).unwrap();
    check(rec == 100.0, || format!("np_recall identity gave {rec}"))?;
    let initial = ts(&["(S (NP (D the) (N dog)) (V ran))", "(S (NP (D a) (N cat)) (VP (V saw) (N it)))"]);
    let rb: Vec<Tree> = initial.iter().map(|g| right_branching_tree(&g.tokens()).unwrap()).collect();
    let rec = np_recall(&rb, &initial).unwrap();
    check(rec == 0.0, || format!("np_recall right-branching gave {rec}"))?;

    let agg_gold = ts(&[
        "(S (NP (D a) (N b)) (V c))",
        "(S (NP (D a) (N b)) (VP (V c) (NP (D d) (N e))))",
        "(S (NP (D f) (N g)) (V h))",
    ]);
    let agg_pred = ts(&[
        "(X (A (X a) (X b)) (X c))",
        "(X (A (X a) (X b)) (X (X c) (A (X d) (X e))))",
        "(X (A (X f) (X g)) (X h))",
    ]);
    let (mapping, f1) = np_aggregate_f1(&agg_pred, &agg_gold, 2).unwrap();
    check(mapping.labels == ["A"] && f1 == 100.0, || format!("coextensive aggregate gave {mapping:?}, {f1}"))?;
    let two_gold = ts(&["(S (NP (D a) (N b)) (V c) (NP (D d) (N e)))", "(S (NP (D a) (N b)) (V c))"]);
    let two_pred = ts(&["(X (A (X a) (X b)) (B (B (X c) (X d)) (X e)))", "(X (A (X a) (X b)) (X c))"]);
    let (mapping, _) = np_aggregate_f1(&two_pred, &two_gold, 1).unwrap();
    check(mapping.labels == ["A"], || format!("two-category aggregate selected {:?}", mapping.labels))?;

    let counts = |m: usize, p: usize, g: usize| SentenceCounts { matched: m, predicted: p, gold: g };
    let same: Vec<_> = (0..20).map(|i| counts(i % 3, 3, 4)).collect();
    let p = permutation_test(&same, &same, 1000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    check(p == 1.0, || format!("identical systems gave p = {p}"))?;
    let perfect = vec![counts(3, 3, 3); 100];
    let zero = vec![counts(0, 3, 3); 100];
    let p = permutation_test(&perfect, &zero, 10_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    check(p <= 0.001, || format!("perfect vs zero gave p = {p}"))?;
    let a: Vec<_> = (0..30).map(|i| counts(i % 4, 4, 5)).collect();
    let b: Vec<_> = (0..30).map(|i| counts((i + 1) % 3, 3, 5)).collect();
    let pab = permutation_test(&a, &b, 2000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let pba = permutation_test(&b, &a, 2000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    check(pab == pba, || format!("swapping systems changed p from {pab} to {pba}"))?;
    Ok("parseval, np_recall, np_aggregate_f1 and permutation_test fixtures reproduce".into())
}
