use std::collections::HashSet;

use rand::Rng as _;
use serde::Serialize;

use super::{edge_accuracy, rank_all_facts, ranking_metrics, EvalReport, RankingMetrics};
use crate::error::{Error, Result};
use crate::kg::{forward_closure, gen_transitive_tree, Fact, KnowledgeGraph, Pair, Rule};
use crate::rng::{stream, Stream};
use crate::scoring::{ModelKind, ModelSpec};
use crate::training::{train, train_rescal_simulation, SimConfig, SimMode, TrainConfig};

/// Facts entailed by the rules but absent from the training facts.
pub fn puzzle_relevant_facts(graph: &KnowledgeGraph, rules: &[Rule]) -> HashSet<Fact> {
    let train = graph.fact_set();
    forward_closure(train, rules, graph)
        .into_iter()
        .filter(|f| !train.contains(f))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PuzzleResult {
    pub kind: ModelKind,
    pub constrained: bool,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<RankingMetrics>,
}

impl PuzzleResult {
    pub fn maps(&self) -> Vec<f64> {
        self.per_seed.iter().map(|m| m.map).collect()
    }

    fn mean_of(&self, f: impl Fn(&RankingMetrics) -> f64) -> f64 {
        self.per_seed.iter().map(f).sum::<f64>() / self.per_seed.len() as f64
    }

    pub fn mean_map(&self) -> f64 {
        self.mean_of(|m| m.map)
    }

    pub fn mean_mrr(&self) -> f64 {
        self.mean_of(|m| m.mrr)
    }

    pub fn mean_p10(&self) -> f64 {
        self.mean_of(|m| m.p_at(10))
    }

    pub fn report(&self, cfg: &TrainConfig, ent_dim: usize) -> EvalReport {
        let mut r = EvalReport::new(self.seeds.first().copied().unwrap_or(0));
        let n = self.per_seed.len();
        r.insert("p_at_10", self.mean_p10(), n);
        r.insert("mrr", self.mean_mrr(), n);
        r.insert("map", self.mean_map(), n);
        r.echo("model", self.kind);
        r.echo("constrained", self.constrained);
        r.echo("ent_dim", ent_dim);
        r.echo("seeds", &self.seeds);
        r.echo("train", cfg);
        r
    }
}

/// Trains on the puzzle facts once per seed, ranks every non-training fact
/// and scores the ranking against the facts the rules entail.
pub fn puzzle_experiment(
    graph: &KnowledgeGraph,
    rules: &[Rule],
    kind: ModelKind,
    constrained: bool,
    seeds: &[u64],
    cfg: &TrainConfig,
    ent_dim: usize,
) -> Result<PuzzleResult> {
    if seeds.is_empty() {
        return Err(Error::invalid("no seeds given"));
    }
    let relevant = puzzle_relevant_facts(graph, rules);
    let train_set = graph.fact_set().clone();
    let used_rules: &[Rule] = if constrained { rules } else { &[] };
    let spec = ModelSpec::new(kind, ent_dim);
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let run_cfg = TrainConfig { seed, ..cfg.clone() };
        let out = train(graph, used_rules, spec, &run_cfg)?;
        let ranked: Vec<Fact> = rank_all_facts(&out.params, graph, &train_set)?
            .into_iter()
            .map(|(f, _)| f)
            .collect();
        per_seed.push(ranking_metrics(&ranked, &relevant, &[10])?);
    }
    Ok(PuzzleResult {
        kind,
        constrained,
        seeds: seeds.to_vec(),
        per_seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationResult {
    pub depth: usize,
    pub mode: SimMode,
    pub kind: ModelKind,
    pub ent_dim: usize,
    /// Per seed accuracy on `(E, E^c, E^rev)`.
    pub per_seed: Vec<[f64; 3]>,
}

impl SimulationResult {
    fn mean(&self, i: usize) -> f64 {
        self.per_seed.iter().map(|a| a[i]).sum::<f64>() / self.per_seed.len() as f64
    }

    pub fn acc_e(&self) -> f64 {
        self.mean(0)
    }

    pub fn acc_ec(&self) -> f64 {
        self.mean(1)
    }

    pub fn acc_erev(&self) -> f64 {
        self.mean(2)
    }

    pub fn report(&self, cfg: &SimConfig) -> EvalReport {
        let mut r = EvalReport::new(cfg.seed);
        let n = self.per_seed.len();
        r.insert("accuracy_e", self.acc_e(), n);
        r.insert("accuracy_ec", self.acc_ec(), n);
        r.insert("accuracy_erev", self.acc_erev(), n);
        r.echo("depth", self.depth);
        r.echo("mode", self.mode);
        r.echo("model", self.kind);
        r.echo("simulation", cfg);
        r
    }
}

/// Trains the two-relation simulation on the depth-`depth` tree closure
/// once per seed and measures edge accuracy on `E`, `E^c` and `E^rev`.
pub fn run_simulation(
    depth: usize,
    mode: SimMode,
    kind: ModelKind,
    cfg: &SimConfig,
    seeds: &[u64],
) -> Result<SimulationResult> {
    if seeds.is_empty() {
        return Err(Error::invalid("no seeds given"));
    }
    let ds = gen_transitive_tree(depth)?;
    let complement: Vec<Pair> = ds.complement().collect();
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let run = SimConfig { seed, ..cfg.clone() };
        let p = train_rescal_simulation(&ds, mode, kind, &run)?;
        per_seed.push([
            edge_accuracy(&p, &ds.positives, 1)?,
            edge_accuracy(&p, &complement, 0)?,
            edge_accuracy(&p, &ds.reversed, 0)?,
        ]);
    }
    Ok(SimulationResult {
        depth,
        mode,
        kind,
        ent_dim: cfg.ent_dim,
        per_seed,
    })
}

/// A hub-and-leaf graph with `child_of(leaf, hub)` facts and their inverses
/// `parent_of(hub, leaf)`, linked by RevImp rules in both directions. All
/// `child_of` facts are training facts; a `train_inverse` fraction of the
/// `parent_of` facts is too and the rest form the test set.
#[derive(Debug, Clone)]
pub struct RevImpDataset {
    pub graph: KnowledgeGraph,
    pub rules: Vec<Rule>,
    pub test: Vec<Fact>,
}

pub fn synthetic_revimp_dataset(
    num_entities: usize,
    hubs: usize,
    train_inverse: f64,
    seed: u64,
) -> Result<RevImpDataset> {
    if hubs == 0 || hubs >= num_entities {
        return Err(Error::invalid("need 0 < hubs < entities"));
    }
    if !(0.0..=1.0).contains(&train_inverse) {
        return Err(Error::invalid("train_inverse must lie in [0, 1]"));
    }
    let mut graph = KnowledgeGraph::new();
    for h in 0..hubs {
        graph.add_entity(&format!("hub{h}"));
    }
    for l in hubs..num_entities {
        graph.add_entity(&format!("node{l}"));
    }
    let child_of = graph.add_relation("child_of");
    let parent_of = graph.add_relation("parent_of");
    let mut rng = stream(seed, Stream::Sampling);
    let mut test = Vec::new();
    for leaf in hubs..num_entities {
        let hub = rng.random_range(0..hubs);
        graph.insert(Fact::new(child_of, leaf, hub))?;
        let inverse = Fact::new(parent_of, hub, leaf);
        if rng.random_bool(train_inverse) {
            graph.insert(inverse)?;
        } else {
            test.push(inverse);
        }
    }
    let rules = vec![
        Rule::RevImp { r: child_of, r2: parent_of },
        Rule::RevImp { r: parent_of, r2: child_of },
    ];
    Ok(RevImpDataset { graph, rules, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{parse_facts, parse_rules, PUZZLE_FACTS, PUZZLE_RULES};

    #[test]
    fn puzzle_relevant_set() {
        let g = parse_facts(PUZZLE_FACTS).unwrap();
        let rules = parse_rules(PUZZLE_RULES, &g).unwrap();
        let rel = puzzle_relevant_facts(&g, &rules);
        let expected: HashSet<Fact> = [
            g.lookup("benedict", "transact_with", "nono").unwrap(),
            g.lookup("nono", "considered", "enemy").unwrap(),
            g.lookup("benedict", "considered", "criminal").unwrap(),
        ]
        .into_iter()
        .collect();
        assert_eq!(rel, expected);
    }

    #[test]
    fn revimp_dataset_shape() {
        let ds = synthetic_revimp_dataset(50, 5, 0.2, 1).unwrap();
        assert_eq!(ds.graph.num_entities(), 50);
        let child = ds.graph.facts().iter().filter(|f| f.relation == 0).count();
        assert_eq!(child, 45);
        assert_eq!(ds.graph.facts().len() - child + ds.test.len(), 45);
        for f in &ds.test {
            assert!(ds.graph.contains(&Fact::new(0, f.object, f.subject)));
            assert!(!ds.graph.contains(f));
        }
        let closed = forward_closure(ds.graph.fact_set(), &ds.rules, &ds.graph);
        assert!(ds.test.iter().all(|f| closed.contains(f)));
    }
}
