//! Knowledge-graph data model.
//!
//! Entities and relations are interned to dense indices in order of first
//! appearance. The universe of facts is every `(relation, subject, object)`
//! triple over the symbol tables, self-pairs included, so
//! `|U| = |relations| * |entities|^2`.

mod closure;
mod rules;
mod sampling;
mod tree;

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use closure::forward_closure;
pub use rules::{parse_rules, Rule};
pub use sampling::sample_negative_fact;
pub use tree::{gen_transitive_tree, sample_negatives, EdgeDataset, Negatives, Pair, MAX_TREE_DEPTH};

/// A single `(relation, (subject, object))` statement over interned indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fact {
    pub relation: usize,
    pub subject: usize,
    pub object: usize,
}

impl Fact {
    pub const fn new(relation: usize, subject: usize, object: usize) -> Self {
        Fact {
            relation,
            subject,
            object,
        }
    }
}

/// Ordered symbol table mapping names to dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolTable {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl SymbolTable {
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Entities, relations and the set of known facts.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: SymbolTable,
    relations: SymbolTable,
    facts: Vec<Fact>,
    fact_set: HashSet<Fact>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph with anonymous symbols `e0..` and `r0..`.
    pub fn with_counts(entities: usize, relations: usize) -> Self {
        let mut g = Self::new();
        for i in 0..entities {
            g.add_entity(&format!("e{i}"));
        }
        for i in 0..relations {
            g.add_relation(&format!("r{i}"));
        }
        g
    }

    pub fn add_entity(&mut self, name: &str) -> usize {
        self.entities.intern(name)
    }

    pub fn add_relation(&mut self, name: &str) -> usize {
        self.relations.intern(name)
    }

    /// Inserts a fact; returns `false` if it was already present.
    pub fn insert(&mut self, fact: Fact) -> Result<bool> {
        self.check_fact(fact)?;
        if self.fact_set.insert(fact) {
            self.facts.push(fact);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Inserts a fact given by symbol names, interning any new symbols.
    pub fn insert_named(&mut self, subject: &str, relation: &str, object: &str) -> bool {
        let s = self.add_entity(subject);
        let r = self.add_relation(relation);
        let o = self.add_entity(object);
        let fact = Fact::new(r, s, o);
        if self.fact_set.insert(fact) {
            self.facts.push(fact);
            true
        } else {
            false
        }
    }

    pub fn check_fact(&self, fact: Fact) -> Result<()> {
        if fact.relation >= self.relations.len() {
            return Err(Error::invalid(format!(
                "relation index {} out of range ({} relations)",
                fact.relation,
                self.relations.len()
            )));
        }
        let n = self.entities.len();
        if fact.subject >= n || fact.object >= n {
            return Err(Error::invalid(format!(
                "entity index out of range in {fact:?} ({n} entities)"
            )));
        }
        Ok(())
    }

    pub fn entities(&self) -> &SymbolTable {
        &self.entities
    }

    pub fn relations(&self) -> &SymbolTable {
        &self.relations
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    /// Facts in insertion order.
    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn fact_set(&self) -> &HashSet<Fact> {
        &self.fact_set
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.fact_set.contains(fact)
    }

    pub fn universe_size(&self) -> usize {
        self.relations.len() * self.entities.len() * self.entities.len()
    }

    /// Maps a universe index back to its fact; the order is
    /// `(relation, subject, object)` lexicographic.
    pub fn fact_at(&self, index: usize) -> Fact {
        let n = self.entities.len();
        let object = index % n;
        let subject = (index / n) % n;
        let relation = index / (n * n);
        Fact::new(relation, subject, object)
    }

    /// Iterates over every fact in the universe in index order.
    pub fn universe(&self) -> impl Iterator<Item = Fact> + '_ {
        (0..self.universe_size()).map(|i| self.fact_at(i))
    }

    pub fn format_fact(&self, fact: &Fact) -> String {
        format!(
            "({}, ({}, {}))",
            self.relations.name(fact.relation),
            self.entities.name(fact.subject),
            self.entities.name(fact.object)
        )
    }

    /// Resolves a `subject<TAB>relation<TAB>object` triple against existing symbols.
    pub fn lookup(&self, subject: &str, relation: &str, object: &str) -> Result<Fact> {
        let ent = |name: &str| {
            self.entities.get(name).ok_or_else(|| Error::UnknownSymbol {
                kind: "entity",
                name: name.to_owned(),
            })
        };
        let r = self.relations.get(relation).ok_or_else(|| Error::UnknownSymbol {
            kind: "relation",
            name: relation.to_owned(),
        })?;
        Ok(Fact::new(r, ent(subject)?, ent(object)?))
    }

    /// Serializes the graph in the facts-file format, with header directives
    /// listing every symbol so that parsing reproduces the same indices.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#entities: {}", self.entities.names().join(", "));
        let _ = writeln!(out, "#relations: {}", self.relations.names().join(", "));
        for f in &self.facts {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                self.entities.name(f.subject),
                self.relations.name(f.relation),
                self.entities.name(f.object)
            );
        }
        out
    }
}

/// Parses the line-oriented facts format.
///
/// Each non-empty line is `subject<TAB>relation<TAB>object`. Header lines
/// `#entities: a, b` and `#relations: r1, r2` pre-register symbols; other
/// lines starting with `#` are comments.
pub fn parse_facts(text: &str) -> Result<KnowledgeGraph> {
    let mut graph = KnowledgeGraph::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim_start();
            if let Some(list) = rest.strip_prefix("entities:") {
                for name in symbol_list(list) {
                    graph.add_entity(name);
                }
            } else if let Some(list) = rest.strip_prefix("relations:") {
                for name in symbol_list(list) {
                    graph.add_relation(name);
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                lineno + 1,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(Error::parse(lineno + 1, "empty field"));
        }
        graph.insert_named(fields[0], fields[1], fields[2]);
    }
    Ok(graph)
}

fn symbol_list(list: &str) -> impl Iterator<Item = &str> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Parses facts against an existing graph's symbol tables without adding
/// symbols; used for validation and test splits.
pub fn parse_facts_against(graph: &KnowledgeGraph, text: &str) -> Result<Vec<Fact>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                lineno + 1,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let fact = graph.lookup(fields[0], fields[1], fields[2])?;
        if seen.insert(fact) {
            out.push(fact);
        }
    }
    Ok(out)
}

/// Source text of the deduction puzzle facts shipped with the crate.
pub const PUZZLE_FACTS: &str = include_str!("../../../../data/puzzle/facts.tsv");
/// Source text of the deduction puzzle rules shipped with the crate.
pub const PUZZLE_RULES: &str = include_str!("../../../../data/puzzle/rules.txt");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_input() {
        let g = parse_facts("a\tr\tb\n").unwrap();
        assert_eq!(g.num_entities(), 2);
        assert_eq!(g.num_relations(), 1);
        assert_eq!(g.facts().len(), 1);
    }

    #[test]
    fn duplicate_lines_collapse() {
        let g = parse_facts("a\tr\tb\na\tr\tb\n").unwrap();
        assert_eq!(g.facts().len(), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_facts("a\tr\tb\n\na\tr\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn puzzle_header_registers_all_entities() {
        let g = parse_facts(PUZZLE_FACTS).unwrap();
        assert_eq!(g.facts().len(), 2);
        assert_eq!(g.num_entities(), 5);
        assert_eq!(g.num_relations(), 4);
        assert_eq!(g.universe_size(), 100);
        let seen: HashSet<usize> = g
            .facts()
            .iter()
            .flat_map(|f| [f.subject, f.object])
            .collect();
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn first_appearance_order() {
        let g = parse_facts("b\tr\ta\nc\ts\tb\n").unwrap();
        assert_eq!(g.entities().names(), ["b", "a", "c"]);
        assert_eq!(g.relations().names(), ["r", "s"]);
    }

    #[test]
    fn universe_indexing_round_trips() {
        let g = KnowledgeGraph::with_counts(3, 2);
        for (i, f) in g.universe().enumerate() {
            let back = (f.relation * 3 + f.subject) * 3 + f.object;
            assert_eq!(back, i);
        }
    }

    #[test]
    fn lookup_rejects_unknown_symbols() {
        let g = parse_facts("a\tr\tb\n").unwrap();
        assert!(matches!(
            g.lookup("a", "q", "b"),
            Err(Error::UnknownSymbol { kind: "relation", .. })
        ));
        assert!(parse_facts_against(&g, "a\tr\tz\n").is_err());
    }
}
