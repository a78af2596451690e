//! Unlabeled bracket scoring, noun-phrase metrics and significance testing.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::tree::Tree;

/// Bracket counts for one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SentenceCounts {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub sentences: Vec<SentenceCounts>,
    pub p_value: Option<f64>,
}

/// Percent precision, recall and F1 from totals.
pub fn prf(matched: usize, predicted: usize, gold: usize) -> (f64, f64, f64) {
    let p = if predicted == 0 { 0.0 } else { 100.0 * matched as f64 / predicted as f64 };
    let r = if gold == 0 { 0.0 } else { 100.0 * matched as f64 / gold as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

fn totals(counts: &[SentenceCounts]) -> (usize, usize, usize) {
    counts.iter().fold((0, 0, 0), |(m, p, g), c| (m + c.matched, p + c.predicted, g + c.gold))
}

fn corpus_f1(counts: &[SentenceCounts]) -> f64 {
    let (m, p, g) = totals(counts);
    prf(m, p, g).2
}

impl EvalReport {
    pub fn from_counts(sentences: Vec<SentenceCounts>) -> Self {
        let (m, p, g) = totals(&sentences);
        let (precision, recall, f1) = prf(m, p, g);
        Self {
            precision,
            recall,
            f1,
            sentences,
            p_value: None,
        }
    }

    pub fn totals(&self) -> (usize, usize, usize) {
        totals(&self.sentences)
    }

    /// `metric<TAB>value` lines.
    pub fn to_key_value(&self) -> String {
        let (m, p, g) = self.totals();
        let mut out = format!(
            "precision\t{:.1}\nrecall\t{:.1}\nf1\t{:.1}\nsentences\t{}\nmatched\t{m}\npredicted\t{p}\ngold\t{g}\n",
            self.precision,
            self.recall,
            self.f1,
            self.sentences.len()
        );
        if let Some(pv) = self.p_value {
            out.push_str(&format!("p_value\t{pv}\n"));
        }
        out
    }
}

/// Deduplicated spans of length at least two.
pub fn brackets(tree: &Tree) -> BTreeSet<(usize, usize)> {
    tree.spans()
        .into_iter()
        .filter(|s| s.end - s.start >= 2)
        .map(|s| (s.start, s.end))
        .collect()
}

fn check_aligned(pred: &[Tree], gold: &[Tree]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::Alignment {
            sentence: pred.len().min(gold.len()),
            message: format!("{} predicted trees for {} gold trees", pred.len(), gold.len()),
        });
    }
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.tokens() != g.tokens() {
            return Err(Error::Alignment {
                sentence: i,
                message: format!("tokens differ: `{}` vs `{}`", p.tokens().join(" "), g.tokens().join(" ")),
            });
        }
    }
    Ok(())
}

pub fn parseval(pred: &[Tree], gold: &[Tree]) -> Result<EvalReport> {
    check_aligned(pred, gold)?;
    let counts = pred
        .iter()
        .zip(gold)
        .map(|(p, g)| {
            let (pb, gb) = (brackets(p), brackets(g));
            SentenceCounts {
                matched: pb.intersection(&gb).count(),
                predicted: pb.len(),
                gold: gb.len(),
            }
        })
        .collect();
    Ok(EvalReport::from_counts(counts))
}

pub fn is_np_label(label: &str) -> bool {
    label.starts_with("NP")
}

/// Gold noun-phrase spans of length at least two, at every level.
pub fn np_spans(gold: &Tree) -> BTreeSet<(usize, usize)> {
    gold.spans()
        .into_iter()
        .filter(|s| s.end - s.start >= 2 && is_np_label(&s.label))
        .map(|s| (s.start, s.end))
        .collect()
}

pub fn np_recall(pred: &[Tree], gold: &[Tree]) -> Result<f64> {
    check_aligned(pred, gold)?;
    let (mut found, mut total) = (0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let pb = brackets(p);
        let nps = np_spans(g);
        found += nps.intersection(&pb).count();
        total += nps.len();
    }
    Ok(if total == 0 { 0.0 } else { 100.0 * found as f64 / total as f64 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMapping {
    /// Selected induced categories, by decreasing dev precision.
    pub labels: Vec<String>,
    /// Dev precision of each selected category.
    pub precisions: Vec<f64>,
    /// Dev (P, R, F1) after each selection.
    pub trajectory: Vec<(f64, f64, f64)>,
}

fn labeled_spans(tree: &Tree) -> Vec<(usize, usize, String)> {
    tree.spans()
        .into_iter()
        .filter(|s| s.end - s.start >= 2)
        .map(|s| (s.start, s.end, s.label))
        .collect()
}

fn aggregate_counts(pred: &[Tree], gold: &[Tree], chosen: &BTreeSet<&str>) -> (usize, usize, usize) {
    let (mut m, mut p, mut g) = (0, 0, 0);
    for (pt, gt) in pred.iter().zip(gold) {
        let spans: BTreeSet<_> = labeled_spans(pt)
            .into_iter()
            .filter(|(_, _, l)| chosen.contains(l.as_str()))
            .map(|(s, e, _)| (s, e))
            .collect();
        let nps = np_spans(gt);
        m += spans.intersection(&nps).count();
        p += spans.len();
        g += nps.len();
    }
    (m, p, g)
}

/// Picks induced categories on the first `dev_size` sentences and reports
/// the aggregate's F1 on the rest.
pub fn np_aggregate_f1(pred: &[Tree], gold: &[Tree], dev_size: usize) -> Result<(LabelMapping, f64)> {
    check_aligned(pred, gold)?;
    if dev_size >= pred.len() {
        return Err(Error::Parameter(format!(
            "dev size {dev_size} leaves no held-out sentences out of {}",
            pred.len()
        )));
    }
    let (dev_pred, test_pred) = pred.split_at(dev_size);
    let (dev_gold, test_gold) = gold.split_at(dev_size);

    let mut per_label: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (pt, gt) in dev_pred.iter().zip(dev_gold) {
        let nps = np_spans(gt);
        let mut seen = BTreeSet::new();
        for (s, e, l) in labeled_spans(pt) {
            if seen.insert((s, e, l.clone())) {
                let entry = per_label.entry(l).or_default();
                entry.1 += 1;
                entry.0 += usize::from(nps.contains(&(s, e)));
            }
        }
    }
    let mut ranked: Vec<(String, f64)> = per_label
        .into_iter()
        .map(|(l, (hit, n))| (l, hit as f64 / n as f64))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut chosen = BTreeSet::new();
    let mut mapping = LabelMapping {
        labels: Vec::new(),
        precisions: Vec::new(),
        trajectory: Vec::new(),
    };
    let mut best = 0.0;
    for (label, precision) in &ranked {
        chosen.insert(label.as_str());
        let (m, p, g) = aggregate_counts(dev_pred, dev_gold, &chosen);
        let score = prf(m, p, g);
        if score.2 > best {
            best = score.2;
            mapping.labels.push(label.clone());
            mapping.precisions.push(*precision);
            mapping.trajectory.push(score);
        } else {
            chosen.remove(label.as_str());
            break;
        }
    }
    let (m, p, g) = aggregate_counts(test_pred, test_gold, &chosen);
    Ok((mapping, prf(m, p, g).2))
}

/// Two-sided paired permutation test on corpus F1, swapping each
/// sentence's counts between systems with probability one half.
pub fn permutation_test<R: Rng + ?Sized>(
    a: &[SentenceCounts],
    b: &[SentenceCounts],
    iterations: usize,
    rng: &mut R,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Parameter(format!("{} vs {} sentences", a.len(), b.len())));
    }
    if iterations == 0 {
        return Err(Error::Parameter("need at least one permutation".into()));
    }
    let observed = (corpus_f1(a) - corpus_f1(b)).abs();
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    let mut extreme = 0;
    for _ in 0..iterations {
        for i in 0..a.len() {
            if rng.random::<bool>() {
                xs[i] = b[i];
                ys[i] = a[i];
            } else {
                xs[i] = a[i];
                ys[i] = b[i];
            }
        }
        // small slack keeps exact ties counted despite rounding
        if (corpus_f1(&xs) - corpus_f1(&ys)).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    Ok((extreme + 1) as f64 / (iterations + 1) as f64)
}
