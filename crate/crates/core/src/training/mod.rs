//! BPR objective, projected SGD and the squared-loss simulation trainer.

mod simulation;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::constraints::{compile, AuditRecord, BlockKind, FeasibleSet, ProjectionConfig};
use crate::error::{Error, Result};
use crate::evaluation::{link_prediction_eval, RankMode};
use crate::kg::{sample_negative_fact, Fact, KnowledgeGraph, Rule};
use crate::rng::{stream, Stream};
use crate::scoring::{init_params, score_grad, score_unchecked, ModelParams, ModelSpec};

pub use simulation::{train_rescal_simulation, SimConfig, SimMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub eta: f64,
    /// Negatives sampled per positive fact (S).
    pub steps: usize,
    pub batch: usize,
    pub epochs: usize,
    /// `k` of the HITS@k validation metric used for early stopping.
    pub early_stop_k: usize,
    pub lambda: f64,
    pub rho: f64,
    pub seed: u64,
    /// Upper bound on cyclic projection sweeps per half-update; sweeps stop
    /// early once every constraint holds.
    pub sweeps: usize,
    /// Record constraint violations every this many updates (0 disables).
    pub audit_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.001,
            eta: 0.1,
            steps: 200,
            batch: 1,
            epochs: 1,
            early_stop_k: 10,
            lambda: 0.5,
            rho: 0.25,
            seed: 0,
            sweeps: 1000,
            audit_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be ≥ 0, got {}", self.alpha));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be ≥ 0, got {}", self.eta));
        }
        if self.steps == 0 {
            return bad("steps must be ≥ 1".into());
        }
        if self.batch == 0 {
            return bad("batch must be ≥ 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad(format!("lambda must lie in (0, 1), got {}", self.lambda));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be > 0, got {}", self.rho));
        }
        if self.early_stop_k == 0 {
            return bad("early_stop_k must be ≥ 1".into());
        }
        Ok(())
    }

    pub fn projection(&self) -> ProjectionConfig {
        ProjectionConfig {
            sweeps: self.sweeps.max(1),
            ..ProjectionConfig::default()
        }
    }
}

/// Sparse gradient keyed by the parameter rows it touches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    pub entities: BTreeMap<usize, Vec<f64>>,
    /// Object-role rows (Tucker2).
    pub entities2: BTreeMap<usize, Vec<f64>>,
    pub relations: BTreeMap<usize, Vec<f64>>,
}

fn axpy(map: &mut BTreeMap<usize, Vec<f64>>, key: usize, c: f64, v: &[f64]) {
    let row = map.entry(key).or_insert_with(|| vec![0.0; v.len()]);
    for (r, x) in row.iter_mut().zip(v) {
        *r += c * x;
    }
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.entities
            .values()
            .chain(self.entities2.values())
            .chain(self.relations.values())
            .flatten()
            .all(|x| x.is_finite())
    }

    fn scale(&mut self, c: f64) {
        for v in self
            .entities
            .values_mut()
            .chain(self.entities2.values_mut())
            .chain(self.relations.values_mut())
        {
            v.iter_mut().for_each(|x| *x *= c);
        }
    }

    /// Adds `c · ∇ score(fact)`.
    fn add_score_grad(&mut self, params: &ModelParams, fact: &Fact, c: f64) {
        let g = score_grad(
            params.spec.kind,
            &params.relations[fact.relation],
            params.subject_vec(fact.subject),
            params.object_vec(fact.object),
        );
        axpy(&mut self.relations, fact.relation, c, &g.relation);
        axpy(&mut self.entities, fact.subject, c, &g.subject);
        if params.entities2.is_some() {
            axpy(&mut self.entities2, fact.object, c, &g.object);
        } else {
            axpy(&mut self.entities, fact.object, c, &g.object);
        }
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(score(pos) - score(neg))`.
pub fn bpr_pair_loss(params: &ModelParams, pos: &Fact, neg: &Fact) -> Result<f64> {
    params.check_fact(pos)?;
    params.check_fact(neg)?;
    Ok(softplus(score_unchecked(params, neg) - score_unchecked(params, pos)))
}

/// Gradient of [`bpr_pair_loss`]: with `v = σ(score(neg) - score(pos))` it is
/// `-v ∇score(pos) + v ∇score(neg)`.
pub fn bpr_pair_grads(params: &ModelParams, pos: &Fact, neg: &Fact) -> Result<Gradients> {
    params.check_fact(pos)?;
    params.check_fact(neg)?;
    let mut g = Gradients::default();
    accumulate_pair(params, pos, neg, &mut g);
    Ok(g)
}

fn accumulate_pair(params: &ModelParams, pos: &Fact, neg: &Fact, g: &mut Gradients) -> f64 {
    let margin = score_unchecked(params, pos) - score_unchecked(params, neg);
    let v = sigmoid(-margin);
    g.add_score_grad(params, pos, -v);
    g.add_score_grad(params, neg, v);
    softplus(-margin)
}

/// Per-epoch progress record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub validation: Option<f64>,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch {} loss {:.6}", self.epoch, self.mean_loss)?;
        if let Some(v) = self.validation {
            write!(f, " validation {v:.4}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochLog>,
    /// Epoch (1-based) whose parameters were returned.
    pub best_epoch: usize,
    pub audit: Vec<AuditRecord>,
}

/// Trains without a validation set; the last epoch wins.
pub fn train(graph: &KnowledgeGraph, rules: &[Rule], spec: ModelSpec, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(graph, rules, spec, cfg, None, &mut |_| {})
}

/// Projected SGD on the BPR objective.
///
/// Each update samples one negative per positive in the batch and performs
/// two half-steps: relations move with entities fixed and are projected, then
/// entities move against the updated relations and are projected. When
/// `validation` is given the parameters of the epoch with the best raw
/// HITS@k are returned.
pub fn train_with(
    graph: &KnowledgeGraph,
    rules: &[Rule],
    spec: ModelSpec,
    cfg: &TrainConfig,
    validation: Option<&[Fact]>,
    progress: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    for rule in rules {
        rule.check(graph)?;
    }
    if graph.facts().is_empty() {
        return Err(Error::invalid("no training facts"));
    }
    let set = compile(rules, spec, cfg.lambda, cfg.rho)?;
    let mut params = init_params(
        spec,
        graph.num_entities(),
        graph.num_relations(),
        set.domain,
        &mut stream(cfg.seed, Stream::Init),
    );
    let pcfg = cfg.projection();
    // Start from a feasible point.
    set.project_all(&mut params, &pcfg, 50);

    let mut shuffle_rng = stream(cfg.seed, Stream::Shuffle);
    let mut neg_rng = stream(cfg.seed, Stream::Negatives);
    let mut order: Vec<Fact> = graph.facts().to_vec();
    let mut history = Vec::new();
    let mut audit = Vec::new();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut update = 0usize;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for chunk in order.chunks(cfg.batch) {
            for _ in 0..cfg.steps {
                let pairs: Vec<(Fact, Fact)> = chunk
                    .iter()
                    .map(|&pos| Ok((pos, sample_negative_fact(graph, &mut neg_rng)?)))
                    .collect::<Result<_>>()?;
                loss_sum += sgd_update(&mut params, &set, &pairs, cfg, &pcfg)?;
                loss_count += pairs.len();
                update += 1;
                if cfg.audit_every > 0 && update % cfg.audit_every == 0 {
                    for (rule, violation) in set.rule_violations(&params) {
                        audit.push(AuditRecord { update, rule, violation });
                    }
                }
            }
        }
        let val = match validation {
            Some(facts) if !facts.is_empty() => {
                let m = link_prediction_eval(&params, facts, RankMode::Raw, None)?;
                Some(m.hits_at(cfg.early_stop_k))
            }
            _ => None,
        };
        let log = EpochLog {
            epoch,
            mean_loss: loss_sum / loss_count.max(1) as f64,
            validation: val,
        };
        progress(&log);
        history.push(log);
        if let Some(v) = val {
            if best.as_ref().is_none_or(|(b, _, _)| v > *b) {
                best = Some((v, epoch, params.clone()));
            }
        }
    }
    let (params, best_epoch) = match best {
        Some((_, e, p)) => (p, e),
        None => (params, cfg.epochs),
    };
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
        audit,
    })
}

/// One projected update over `pairs`; returns the summed loss before the step.
pub(crate) fn sgd_update(
    params: &mut ModelParams,
    set: &FeasibleSet,
    pairs: &[(Fact, Fact)],
    cfg: &TrainConfig,
    pcfg: &ProjectionConfig,
) -> Result<f64> {
    let scale = 1.0 / pairs.len() as f64;
    let learnable = params.spec.learnable_rel_dim();

    let mut g = Gradients::default();
    let mut loss = 0.0;
    for (pos, neg) in pairs {
        loss += accumulate_pair(params, pos, neg, &mut g);
    }
    g.scale(scale);
    for (&r, grad) in &g.relations {
        let row = &mut params.relations[r];
        for i in 0..learnable {
            row[i] -= cfg.eta * (grad[i] + 2.0 * cfg.alpha * row[i]);
        }
    }
    set.project(params, BlockKind::Relation, None, pcfg);

    let mut g = Gradients::default();
    for (pos, neg) in pairs {
        accumulate_pair(params, pos, neg, &mut g);
    }
    g.scale(scale);
    if !g.is_finite() {
        return Err(Error::NonFinite("entity gradient".into()));
    }
    let mut touched = BTreeSet::new();
    for (&e, grad) in &g.entities {
        touched.insert(e);
        for (x, gi) in params.entities[e].iter_mut().zip(grad) {
            *x -= cfg.eta * (gi + 2.0 * cfg.alpha * *x);
        }
    }
    if let Some(e2) = params.entities2.as_mut() {
        for (&e, grad) in &g.entities2 {
            touched.insert(e);
            for (x, gi) in e2[e].iter_mut().zip(grad) {
                *x -= cfg.eta * (gi + 2.0 * cfg.alpha * *x);
            }
        }
    }
    let touched: Vec<usize> = touched.into_iter().collect();
    set.project(params, BlockKind::Entity, Some(&touched), pcfg);

    let finite_rows = g.relations.keys().all(|&r| params.relations[r].iter().all(|x| x.is_finite()))
        && touched.iter().all(|&e| params.entities[e].iter().all(|x| x.is_finite()));
    if !loss.is_finite() || !finite_rows {
        return Err(Error::NonFinite("parameters after update".into()));
    }
    Ok(loss)
}
