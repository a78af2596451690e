//! File-level commands: induction runs, evaluation, synthetic corpora and
//! the right-branching baseline.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{np_aggregate_f1, np_recall, parseval, permutation_test, EvalReport};
use crate::gibbs::{gibbs_run, GibbsConfig, InductionRun};
use crate::grammar::write_grammar_tsv;
use crate::store::store_count;
use crate::synth::{generate_synthetic, SyntheticSpec};
use crate::tree::{punctuation_mask, read_bracketed, right_branching_tree, strip_tokens, write_bracketed, Tree};

pub const PARSES_FILE: &str = "parses.mrg";
pub const GRAMMAR_FILE: &str = "grammar.tsv";
pub const LOGLIK_FILE: &str = "loglik.csv";
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const CORPUS_FILE: &str = "corpus.txt";
pub const GOLD_FILE: &str = "gold.mrg";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gibbs: GibbsConfig,
    pub input: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: GibbsConfig,
    pub input: PathBuf,
    pub store_states: u128,
    /// `(file name, sha256 hex)` for every artifact.
    pub checksums: Vec<(String, String)>,
    pub version: String,
    pub seconds: f64,
    pub iterations: usize,
    pub converged_at: Option<usize>,
    pub best_iteration: usize,
    pub best_log_likelihood: f64,
}

impl RunManifest {
    /// `key<TAB>value` lines; checksums as `sha256:<file>`.
    pub fn to_tsv(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}\t{v}");
        };
        put("version", self.version.clone());
        put("input", self.input.display().to_string());
        put("cats", c.categories.to_string());
        put("depth", c.depth_bound.to_string());
        put("beta", c.beta.to_string());
        put("containment_iters", c.containment_iters.to_string());
        put("min_iters", c.min_iters.to_string());
        put("post_convergence", c.post_convergence.to_string());
        put("window", c.window.to_string());
        put("tol", c.tol.to_string());
        put("max_iters", c.max_iters.to_string());
        put("seed", c.seed.to_string());
        put("workers", c.workers.map_or("auto".into(), |w| w.to_string()));
        put("store_states", self.store_states.to_string());
        put("iterations", self.iterations.to_string());
        put("converged_at", self.converged_at.map_or("none".into(), |i| i.to_string()));
        put("best_iteration", self.best_iteration.to_string());
        put("best_log_likelihood", format!("{:.6}", self.best_log_likelihood));
        put("seconds", format!("{:.3}", self.seconds));
        for (file, sum) in &self.checksums {
            put(&format!("sha256:{file}"), sum.clone());
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Whitespace-tokenized sentences, one per line; blank lines are skipped
/// with a warning.
pub fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let toks: Vec<String> = line.split_whitespace().map(String::from).collect();
        if toks.is_empty() {
            warn!("{}: skipping empty line {}", path.display(), i + 1);
        } else {
            out.push(toks);
        }
    }
    Ok(out)
}

pub fn write_corpus(sentences: &[Vec<String>]) -> String {
    sentences.iter().map(|s| s.join(" ") + "\n").collect()
}

pub fn loglik_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,log_likelihood\n");
    for (i, ll) in trace.iter().enumerate() {
        let _ = writeln!(out, "{i},{ll:.6}");
    }
    out
}

/// Runs the sampler on the input corpus and writes parses, grammar,
/// log-likelihood trace and manifest into the output directory.
pub fn cmd_induce(config: &RunConfig) -> Result<(RunManifest, InductionRun)> {
    config.gibbs.validate()?;
    let g = &config.gibbs;
    let states = store_count(g.categories, g.depth_bound).unwrap_or(u128::MAX);
    info!("K={} D={}: {states} store states", g.categories, g.depth_bound);
    let corpus = read_corpus(&config.input)?;
    if corpus.is_empty() {
        return Err(Error::Data(format!("{} has no sentences", config.input.display())));
    }
    let start = Instant::now();
    let run = gibbs_run(&corpus, g)?;
    let seconds = start.elapsed().as_secs_f64();

    fs::create_dir_all(&config.out)?;
    let artifacts = [
        (PARSES_FILE, write_bracketed(&run.best_parses)),
        (GRAMMAR_FILE, write_grammar_tsv(&run.best_grammar, &run.categories, &run.vocab)),
        (LOGLIK_FILE, loglik_csv(&run.log_likelihood)),
    ];
    let mut checksums = Vec::new();
    for (name, text) in &artifacts {
        write(&config.out.join(name), text)?;
        checksums.push((name.to_string(), sha256_hex(text.as_bytes())));
    }
    let manifest = RunManifest {
        config: g.clone(),
        input: config.input.clone(),
        store_states: states,
        checksums,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seconds,
        iterations: run.log_likelihood.len(),
        converged_at: run.converged_at,
        best_iteration: run.best_iteration,
        best_log_likelihood: run.best_log_likelihood,
    };
    write(&config.out.join(MANIFEST_FILE), &manifest.to_tsv())?;
    Ok((manifest, run))
}

/// Recomputes the checksums listed in a run directory's manifest.
pub fn verify_manifest(dir: &Path) -> Result<()> {
    let text = read(&dir.join(MANIFEST_FILE))?;
    let mut seen = 0;
    for line in text.lines() {
        let Some((key, value)) = line.split_once('\t') else { continue };
        let Some(file) = key.strip_prefix("sha256:") else { continue };
        let actual = sha256_hex(&fs::read(dir.join(file))?);
        if actual != value {
            return Err(Error::Data(format!("checksum mismatch for {file}")));
        }
        seen += 1;
    }
    if seen == 0 {
        return Err(Error::Data("manifest lists no checksums".into()));
    }
    Ok(())
}

/// Writes `corpus.txt` and `gold.mrg`.
pub fn cmd_synth(spec: &SyntheticSpec, out: &Path) -> Result<()> {
    let corpus = generate_synthetic(spec)?;
    fs::create_dir_all(out)?;
    write(&out.join(CORPUS_FILE), &write_corpus(&corpus.sentences))?;
    write(&out.join(GOLD_FILE), &write_bracketed(&corpus.gold))?;
    Ok(())
}

/// Right-branching parses of every nonempty line.
pub fn cmd_baseline(input: &Path, out: &Path) -> Result<()> {
    let trees = read_corpus(input)?
        .iter()
        .map(|s| right_branching_tree(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write(out, &write_bracketed(&trees))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Parseval,
    NpRecall,
    NpF1 { dev_size: usize },
    Permutation { against: PathBuf, iterations: usize, seed: u64 },
}

/// Removes punctuation from both sides using the gold tree's labels.
/// Sentences that are all punctuation are dropped from both.
pub fn strip_aligned(pred: &[Tree], gold: &[Tree]) -> Result<(Vec<Tree>, Vec<Tree>)> {
    if pred.len() != gold.len() {
        return Err(Error::Alignment {
            sentence: pred.len().min(gold.len()),
            message: format!("{} predicted vs {} gold trees", pred.len(), gold.len()),
        });
    }
    let (mut ps, mut gs) = (Vec::new(), Vec::new());
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.tokens() != g.tokens() {
            return Err(Error::Alignment {
                sentence: i,
                message: "tokens differ between predicted and gold trees".into(),
            });
        }
        let mask = punctuation_mask(g);
        match (strip_tokens(p, &mask)?, strip_tokens(g, &mask)?) {
            (Some(p), Some(g)) => {
                ps.push(p);
                gs.push(g);
            }
            _ => warn!("sentence {i} is all punctuation; skipped"),
        }
    }
    Ok((ps, gs))
}

/// Scores predicted against gold trees and returns a `key<TAB>value` report.
pub fn cmd_evaluate(pred_path: &Path, gold_path: &Path, metric: &Metric) -> Result<String> {
    let pred = read_bracketed(&read(pred_path)?)?;
    let gold = read_bracketed(&read(gold_path)?)?;
    let (pred, gold) = strip_aligned(&pred, &gold)?;
    let report = match metric {
        Metric::Parseval => parseval(&pred, &gold)?.to_key_value(),
        Metric::NpRecall => format!("np_recall\t{:.1}\nsentences\t{}\n", np_recall(&pred, &gold)?, pred.len()),
        Metric::NpF1 { dev_size } => {
            let (mapping, f1) = np_aggregate_f1(&pred, &gold, *dev_size)?;
            let mut out = format!("dev_size\t{dev_size}\nheld_out\t{}\n", pred.len() - dev_size);
            for (i, (label, prec)) in mapping.labels.iter().zip(&mapping.precisions).enumerate() {
                let (p, r, f) = mapping.trajectory[i];
                let _ = writeln!(out, "selected\t{label}\tprecision={prec:.4}\tdev_p={p:.1}\tdev_r={r:.1}\tdev_f1={f:.1}");
            }
            let _ = writeln!(out, "np_f1\t{f1:.1}");
            out
        }
        Metric::Permutation { against, iterations, seed } => {
            let other = read_bracketed(&read(against)?)?;
            let (other, gold2) = strip_aligned(&other, &read_bracketed(&read(gold_path)?)?)?;
            if gold2.len() != gold.len() {
                return Err(Error::Alignment {
                    sentence: gold.len().min(gold2.len()),
                    message: "systems keep different sentences after stripping".into(),
                });
            }
            let a = parseval(&pred, &gold)?;
            let b = parseval(&other, &gold2)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let p = permutation_test(&a.sentences, &b.sentences, *iterations, &mut rng)?;
            let report = EvalReport { p_value: Some(p), ..a };
            format!("{}f1_other\t{:.1}\n", report.to_key_value(), b.f1)
        }
    };
    Ok(report)
}
