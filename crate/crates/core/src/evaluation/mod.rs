//! Metrics, reports and experiment protocols.

mod experiments;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::kg::{Fact, KnowledgeGraph, Pair};
use crate::scoring::{score_unchecked, ModelParams};

pub use experiments::{
    puzzle_experiment, puzzle_relevant_facts, run_simulation, synthetic_revimp_dataset, PuzzleResult,
    RevImpDataset, SimulationResult,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Named metrics with counts and the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub metrics: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
    pub config_echo: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
}

impl EvalReport {
    pub fn new(seed: u64) -> Self {
        EvalReport {
            schema_version: SCHEMA_VERSION,
            seed,
            ..Default::default()
        }
    }

    pub fn insert(&mut self, name: &str, value: f64, count: usize) {
        self.metrics.insert(name.to_string(), value);
        self.counts.insert(name.to_string(), count);
    }

    pub fn echo(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.config_echo.insert(key.to_string(), v);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned two-column table of the metrics.
    pub fn to_table(&self) -> String {
        let width = self.metrics.keys().map(|k| k.len()).max().unwrap_or(6).max(6);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>7}", "metric", "value", "n");
        for (k, v) in &self.metrics {
            let n = self.counts.get(k).copied().unwrap_or(0);
            let _ = writeln!(out, "{k:<width$}  {v:>8.4}  {n:>7}");
        }
        out
    }
}

/// Fraction of `pairs` whose score under relation `expected` is strictly
/// higher than under the other of the two relations.
pub fn edge_accuracy(params: &ModelParams, pairs: &[Pair], expected: usize) -> Result<f64> {
    if params.num_relations() != 2 {
        return Err(Error::invalid(format!(
            "edge accuracy needs exactly 2 relations, found {}",
            params.num_relations()
        )));
    }
    if expected > 1 {
        return Err(Error::invalid("expected relation must be 0 or 1"));
    }
    if pairs.is_empty() {
        return Err(Error::invalid("no pairs to evaluate"));
    }
    let n = params.num_entities();
    let mut correct = 0usize;
    for &(u, v) in pairs {
        if u >= n || v >= n {
            return Err(Error::invalid(format!("pair ({u}, {v}) out of range")));
        }
        let s = score_unchecked(params, &Fact::new(expected, u, v));
        let o = score_unchecked(params, &Fact::new(1 - expected, u, v));
        if s > o {
            correct += 1;
        }
    }
    Ok(correct as f64 / pairs.len() as f64)
}

/// Every fact of the universe not in `exclude`, by descending score; ties
/// keep (relation, subject, object) order.
pub fn rank_all_facts(params: &ModelParams, graph: &KnowledgeGraph, exclude: &HashSet<Fact>) -> Result<Vec<(Fact, f64)>> {
    if params.num_entities() != graph.num_entities() || params.num_relations() != graph.num_relations() {
        return Err(Error::invalid("parameters do not match the graph's symbol tables"));
    }
    let mut out: Vec<(Fact, f64)> = graph
        .universe()
        .filter(|f| !exclude.contains(f))
        .map(|f| (f, score_unchecked(params, &f)))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    /// `k` → P@k.
    pub precision: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub map: f64,
}

impl RankingMetrics {
    pub fn p_at(&self, k: usize) -> f64 {
        self.precision.get(&k).copied().unwrap_or(f64::NAN)
    }
}

/// P@k, reciprocal rank of the first relevant item and average precision of
/// one ranked list.
pub fn ranking_metrics<T: Eq + std::hash::Hash>(ranked: &[T], relevant: &HashSet<T>, ks: &[usize]) -> Result<RankingMetrics> {
    if relevant.is_empty() {
        return Err(Error::invalid("relevant set is empty"));
    }
    let flags: Vec<bool> = ranked.iter().map(|f| relevant.contains(f)).collect();
    let precision = ks
        .iter()
        .map(|&k| {
            let hits = flags.iter().take(k).filter(|&&b| b).count();
            (k, if k == 0 { 0.0 } else { hits as f64 / k as f64 })
        })
        .collect();
    let mrr = flags
        .iter()
        .position(|&b| b)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64);
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &b) in flags.iter().enumerate() {
        if b {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(RankingMetrics {
        precision,
        mrr,
        map: sum / relevant.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankMode {
    Raw,
    /// Other known-true answers are removed from the candidates.
    Filtered,
}

/// Gold ranks of the head and tail queries of each test fact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkMetrics {
    pub head_ranks: Vec<f64>,
    pub tail_ranks: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl LinkMetrics {
    /// MRR averaged over the head and tail tasks.
    pub fn mrr(&self) -> f64 {
        let rr = |v: &[f64]| mean(&v.iter().map(|r| 1.0 / r).collect::<Vec<_>>());
        0.5 * (rr(&self.head_ranks) + rr(&self.tail_ranks))
    }

    pub fn hits_at(&self, k: usize) -> f64 {
        let h = |v: &[f64]| v.iter().filter(|&&r| r <= k as f64).count() as f64 / v.len() as f64;
        0.5 * (h(&self.head_ranks) + h(&self.tail_ranks))
    }

    pub fn queries(&self) -> usize {
        self.head_ranks.len() + self.tail_ranks.len()
    }

    pub fn report(&self, seed: u64, mode: RankMode) -> EvalReport {
        let mut r = EvalReport::new(seed);
        let n = self.queries();
        r.insert("mrr", self.mrr(), n);
        r.insert("hits@3", self.hits_at(3), n);
        r.insert("hits@10", self.hits_at(10), n);
        r.echo("mode", mode);
        r
    }
}

/// Rank of `gold` among `scores`: 1 + (strictly better) + half the ties.
fn tie_averaged_rank(gold: f64, scores: impl Iterator<Item = f64>) -> f64 {
    let (mut better, mut ties) = (0usize, 0usize);
    for s in scores {
        if s > gold {
            better += 1;
        } else if s == gold {
            ties += 1;
        }
    }
    1.0 + better as f64 + 0.5 * ties as f64
}

/// Head and tail entity prediction for every test fact. Tied candidates
/// share the average rank. `Filtered` requires `known`.
pub fn link_prediction_eval(
    params: &ModelParams,
    test: &[Fact],
    mode: RankMode,
    known: Option<&HashSet<Fact>>,
) -> Result<LinkMetrics> {
    if test.is_empty() {
        return Err(Error::invalid("no test facts"));
    }
    let filter = match (mode, known) {
        (RankMode::Raw, _) => None,
        (RankMode::Filtered, Some(k)) => Some(k),
        (RankMode::Filtered, None) => return Err(Error::invalid("filtered ranking needs the known facts")),
    };
    let n = params.num_entities();
    let mut head_ranks = Vec::with_capacity(test.len());
    let mut tail_ranks = Vec::with_capacity(test.len());
    for fact in test {
        params.check_fact(fact)?;
        let gold = score_unchecked(params, fact);
        let keep = |f: &Fact| filter.is_none_or(|k| !k.contains(f));
        let tails = (0..n)
            .filter(|&c| c != fact.object)
            .map(|c| Fact::new(fact.relation, fact.subject, c))
            .filter(keep)
            .map(|f| score_unchecked(params, &f));
        tail_ranks.push(tie_averaged_rank(gold, tails));
        let heads = (0..n)
            .filter(|&c| c != fact.subject)
            .map(|c| Fact::new(fact.relation, c, fact.object))
            .filter(keep)
            .map(|f| score_unchecked(params, &f));
        head_ranks.push(tie_averaged_rank(gold, heads));
    }
    Ok(LinkMetrics { head_ranks, tail_ranks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTTest {
    pub mean_diff: f64,
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Paired two-sided t-test of `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let m = mean(&d);
    let var = d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    let df = n - 1.0;
    if var == 0.0 {
        let (t, p) = if m == 0.0 { (0.0, 1.0) } else { (m.signum() * f64::INFINITY, 0.0) };
        return Ok(PairedTTest { mean_diff: m, t, df, p });
    }
    let t = m / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(PairedTTest { mean_diff: m, t, df, p })
}
