//! k-fold evaluation of disambiguation methods and comparison tables.
//!
//! Coverage counts decisions made before the default rule. `accuracy_covered` is the
//! accuracy on those cases; `accuracy_overall` also scores the default decisions.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::cluster2d::ClusterConfig;
use crate::cooccur::TripleDataset;
use crate::disambig::{
    training_triples, AttachmentCase, ClusterMethod, DecidingLevel, DefaultRule, EmpiricalEstimator, EstimatorChain,
    TableEstimator, train_pp_estimators,
};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Test folds over `0..len`; each fold trains on the complement of its test set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub len: usize,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Shuffles `0..len` with the seeded generator and deals it into `k` contiguous
    /// folds; the first `len % k` folds get one extra item.
    pub fn kfold(len: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || len < k {
            return Err(Error::TooFewItems { len, k });
        }
        let mut order: Vec<usize> = (0..len).collect();
        SeededRng::new(seed).shuffle(&mut order);
        let (base, extra) = (len / k, len % k);
        let mut folds = Vec::with_capacity(k);
        let mut start = 0;
        for f in 0..k {
            let size = base + usize::from(f < extra);
            let mut fold = order[start..start + size].to_vec();
            fold.sort_unstable();
            folds.push(fold);
            start += size;
        }
        Ok(FoldPlan { seed, len, folds })
    }

    /// One fold: a seeded random test set of `test_len` items, everything else trains.
    pub fn holdout(len: usize, test_len: usize, seed: u64) -> Result<Self> {
        if test_len == 0 || test_len > len {
            return Err(Error::TooFewItems { len, k: test_len });
        }
        let mut order: Vec<usize> = (0..len).collect();
        SeededRng::new(seed).shuffle(&mut order);
        let mut fold = order[..test_len].to_vec();
        fold.sort_unstable();
        Ok(FoldPlan { seed, len, folds: vec![fold] })
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Indices outside fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        let mut in_test = vec![false; self.len];
        for &i in &self.folds[f] {
            in_test[i] = true;
        }
        (0..self.len).filter(|&i| !in_test[i]).collect()
    }
}

/// Builds a decision chain from a training split.
pub trait ChainBuilder: Send + Sync {
    fn name(&self) -> String;
    fn build(&self, train: &[AttachmentCase]) -> Result<EstimatorChain>;
}

/// One estimator level of a [`MethodSpec`].
#[derive(Debug, Clone)]
pub enum LevelSpec {
    /// Relative frequencies, every relation.
    WordBased,
    /// MDL co-clustering for the most frequent relations.
    TwoDc,
    /// Fixed-size clustering for the most frequent relations.
    Brown { rows: usize, cols: usize },
    /// Probabilities from a file.
    Fallback(Arc<TableEstimator>),
}

/// A method assembled from levels, trained on fixed base triples plus the gold triples of
/// each training split.
#[derive(Clone)]
pub struct MethodSpec {
    pub name: String,
    pub levels: Vec<LevelSpec>,
    pub default: Option<DefaultRule>,
    pub base_triples: Arc<TripleDataset>,
    pub top_k: usize,
    pub cluster: ClusterConfig,
}

impl ChainBuilder for MethodSpec {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn build(&self, train: &[AttachmentCase]) -> Result<EstimatorChain> {
        let mut triples = (*self.base_triples).clone();
        triples.extend(&training_triples(train));
        let mut chain = match self.default {
            Some(rule) => EstimatorChain::new(rule),
            None => EstimatorChain::without_default(),
        };
        for level in &self.levels {
            match level {
                LevelSpec::WordBased => chain.push(Box::new(EmpiricalEstimator::from_triples(&triples))),
                LevelSpec::TwoDc => chain.push(Box::new(train_pp_estimators(
                    &triples,
                    self.top_k,
                    ClusterMethod::Mdl(self.cluster),
                    "2dc",
                ))),
                LevelSpec::Brown { rows, cols } => chain.push(Box::new(train_pp_estimators(
                    &triples,
                    self.top_k,
                    ClusterMethod::Brown {
                        rows: *rows,
                        cols: *cols,
                        config: self.cluster,
                    },
                    "brown",
                ))),
                LevelSpec::Fallback(table) => chain.push(Box::new(SharedTable(Arc::clone(table)))),
            }
        }
        Ok(chain)
    }
}

struct SharedTable(Arc<TableEstimator>);

impl crate::disambig::ConditionalEstimator for SharedTable {
    fn name(&self) -> &str {
        self.0.name()
    }
    fn covers(&self, relation: &str) -> bool {
        self.0.covers(relation)
    }
    fn estimate(&self, relation: &str, dependent: &str, head: &str) -> Result<f64> {
        self.0.estimate(relation, dependent, head)
    }
}

/// Counts for one fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FoldCounts {
    pub fold: usize,
    pub tested: usize,
    /// Decided before the default rule.
    pub decided: usize,
    pub correct_decided: usize,
    pub defaulted: usize,
    pub correct_default: usize,
    pub undecided: usize,
}

impl FoldCounts {
    pub fn coverage(&self) -> f64 {
        ratio(self.decided, self.tested).unwrap_or(0.0)
    }

    pub fn accuracy_covered(&self) -> Option<f64> {
        ratio(self.correct_decided, self.decided)
    }

    /// Defined only when every case received a decision.
    pub fn accuracy_overall(&self) -> Option<f64> {
        if self.undecided > 0 {
            return None;
        }
        ratio(self.correct_decided + self.correct_default, self.tested)
    }

    pub fn correct_total(&self) -> usize {
        self.correct_decided + self.correct_default
    }
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: String,
    /// Mean over folds.
    pub coverage: f64,
    /// Mean over folds where something was decided.
    pub accuracy_covered: Option<f64>,
    /// Mean over folds; `None` if any fold left cases undecided.
    pub accuracy_overall: Option<f64>,
    pub folds: Vec<FoldCounts>,
}

impl MethodReport {
    fn from_folds(method: String, folds: Vec<FoldCounts>) -> Self {
        let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        let coverage = mean(folds.iter().map(FoldCounts::coverage).collect()).unwrap_or(0.0);
        let accuracy_covered = mean(folds.iter().filter_map(FoldCounts::accuracy_covered).collect());
        let overall: Option<Vec<f64>> = folds.iter().map(FoldCounts::accuracy_overall).collect();
        MethodReport {
            method,
            coverage,
            accuracy_covered,
            accuracy_overall: overall.and_then(mean),
            folds,
        }
    }
}

/// Decides `test` with `chain` and tallies against the gold labels.
pub fn score(chain: &EstimatorChain, test: &[AttachmentCase], fold: usize) -> Result<FoldCounts> {
    let mut c = FoldCounts {
        fold,
        tested: test.len(),
        decided: 0,
        correct_decided: 0,
        defaulted: 0,
        correct_default: 0,
        undecided: 0,
    };
    for (idx, case) in test.iter().enumerate() {
        let gold = case.gold.ok_or_else(|| Error::InvalidCase {
            case: idx + 1,
            reason: format!("no gold label for {}", case.to_tsv_fields()),
        })?;
        let d = chain.decide(case)?;
        let hit = usize::from(d.outcome == gold);
        match d.level {
            DecidingLevel::Level(_) => {
                c.decided += 1;
                c.correct_decided += hit;
            }
            DecidingLevel::Default => {
                c.defaulted += 1;
                c.correct_default += hit;
            }
            DecidingLevel::Undecided => c.undecided += 1,
        }
    }
    Ok(c)
}

/// Trains and scores every fold of `plan`, then averages.
///
/// Folds run on up to `threads` workers; the report does not depend on the count.
pub fn evaluate(
    builder: &dyn ChainBuilder,
    cases: &[AttachmentCase],
    plan: &FoldPlan,
    threads: usize,
) -> Result<MethodReport> {
    if plan.len != cases.len() {
        return Err(Error::DimensionMismatch(format!(
            "plan covers {} cases, dataset has {}",
            plan.len,
            cases.len()
        )));
    }
    if let Some(i) = cases.iter().position(|c| c.gold.is_none()) {
        return Err(Error::InvalidCase {
            case: i + 1,
            reason: format!("no gold label for {}", cases[i].to_tsv_fields()),
        });
    }
    let run_fold = |f: usize| -> Result<FoldCounts> {
        let train: Vec<AttachmentCase> = plan.train_indices(f).into_iter().map(|i| cases[i].clone()).collect();
        let test: Vec<AttachmentCase> = plan.folds[f].iter().map(|&i| cases[i].clone()).collect();
        let chain = builder.build(&train)?;
        score(&chain, &test, f)
    };
    let folds: Result<Vec<FoldCounts>> = if threads > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("failed to start worker threads");
        pool.install(|| (0..plan.k()).into_par_iter().map(run_fold).collect())
    } else {
        (0..plan.k()).map(run_fold).collect()
    };
    Ok(MethodReport::from_folds(builder.name(), folds?))
}

/// Sorts cases into a canonical order so fold plans do not depend on input order.
pub fn canonicalize(cases: &mut [AttachmentCase]) {
    cases.sort();
}

/// Canonical order, a k-fold plan from `seed`, then [`evaluate`].
pub fn cross_validate(
    builder: &dyn ChainBuilder,
    cases: &[AttachmentCase],
    k: usize,
    seed: u64,
    threads: usize,
) -> Result<MethodReport> {
    let mut cases = cases.to_vec();
    canonicalize(&mut cases);
    let plan = FoldPlan::kfold(cases.len(), k, seed)?;
    evaluate(builder, &cases, &plan, threads)
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{:.1}", 100.0 * v))
}

/// Aligned text table, one row per report in the given order. With `per_fold`, a
/// per-fold section follows.
pub fn compare_report(reports: &[MethodReport], per_fold: bool) -> String {
    let header = ["Method", "Cov.(%)", "Acc.(%)", "+Default Acc.(%)"];
    let rows: Vec<[String; 4]> = reports
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                pct(Some(r.coverage)),
                pct(r.accuracy_covered),
                pct(r.accuracy_overall),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: [&str; 4], out: &mut String| {
        let _ = writeln!(
            out,
            "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
            cells[0],
            cells[1],
            cells[2],
            cells[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        );
    };
    line(header, &mut out);
    for row in &rows {
        line([&row[0], &row[1], &row[2], &row[3]], &mut out);
    }
    if per_fold {
        for r in reports.iter().filter(|r| !r.folds.is_empty()) {
            let _ = writeln!(out, "\n[{}]", r.method);
            let _ = writeln!(out, "fold\ttested\tdecided\tcorrect_decided\tdefaulted\tcorrect_default");
            for f in &r.folds {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    f.fold, f.tested, f.decided, f.correct_decided, f.defaulted, f.correct_default
                );
            }
        }
    }
    out
}

/// Same content as [`compare_report`] as TSV with fractions in `[0, 1]`.
pub fn report_tsv(reports: &[MethodReport]) -> String {
    let opt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| v.to_string());
    let mut out = String::from("method\tcoverage\taccuracy_covered\taccuracy_overall\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.method,
            r.coverage,
            opt(r.accuracy_covered),
            opt(r.accuracy_overall)
        );
    }
    out
}
