use std::fmt;

use serde::{Deserialize, Serialize};

use super::KnowledgeGraph;
use crate::error::{Error, Result};

/// A logical rule bound to a graph's relation and entity indices.
///
/// Argument order follows the rule notation, e.g. `ProTrans(r, r', e', r'', e'')`
/// reads "`(r, (x, y))` and `(r', (y, e'))` imply `(r'', (x, e''))`".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    /// `(r, t)` implies `(r', t)`.
    RelImp { r: usize, r2: usize },
    /// `(r, (x, y))` implies `(r', (y, x))`.
    RevImp { r: usize, r2: usize },
    /// `(r, (x, y))` implies `(r, (y, x))`.
    Symm { r: usize },
    /// `(r, (x, e))` implies `(r', (x, e'))`.
    EntailB {
        r: usize,
        e: usize,
        r2: usize,
        e2: usize,
    },
    /// `(r, (x, y))` and `(r', (y, e'))` imply `(r'', (x, e''))`.
    ProTrans {
        r: usize,
        r2: usize,
        e2: usize,
        r3: usize,
        e3: usize,
    },
    /// `(r, (x, y))` implies `(r', (x, e))`.
    TypeImp { r: usize, e: usize, r2: usize },
}

#[derive(Clone, Copy)]
enum Arg {
    Rel,
    Ent,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::RelImp { .. } => "RelImp",
            Rule::RevImp { .. } => "RevImp",
            Rule::Symm { .. } => "Symm",
            Rule::EntailB { .. } => "EntailB",
            Rule::ProTrans { .. } => "ProTrans",
            Rule::TypeImp { .. } => "TypeImp",
        }
    }

    fn signature(name: &str) -> Option<&'static [Arg]> {
        use Arg::*;
        Some(match name {
            "RelImp" => &[Rel, Rel],
            "RevImp" => &[Rel, Rel],
            "Symm" => &[Rel],
            "EntailB" | "Entail_B" => &[Rel, Ent, Rel, Ent],
            "ProTrans" => &[Rel, Rel, Ent, Rel, Ent],
            "TypeImp" => &[Rel, Ent, Rel],
            _ => return None,
        })
    }

    /// Relations referenced by the rule, in argument order.
    pub fn relations(&self) -> Vec<usize> {
        match *self {
            Rule::RelImp { r, r2 } | Rule::RevImp { r, r2 } => vec![r, r2],
            Rule::Symm { r } => vec![r],
            Rule::EntailB { r, r2, .. } => vec![r, r2],
            Rule::ProTrans { r, r2, r3, .. } => vec![r, r2, r3],
            Rule::TypeImp { r, r2, .. } => vec![r, r2],
        }
    }

    /// Entities referenced by the rule, in argument order.
    pub fn entities(&self) -> Vec<usize> {
        match *self {
            Rule::RelImp { .. } | Rule::RevImp { .. } | Rule::Symm { .. } => vec![],
            Rule::EntailB { e, e2, .. } => vec![e, e2],
            Rule::ProTrans { e2, e3, .. } => vec![e2, e3],
            Rule::TypeImp { e, .. } => vec![e],
        }
    }

    /// Checks that every referenced index exists in `graph`.
    pub fn check(&self, graph: &KnowledgeGraph) -> Result<()> {
        if let Some(&r) = self
            .relations()
            .iter()
            .find(|&&r| r >= graph.num_relations())
        {
            return Err(Error::invalid(format!("{}: relation index {r} out of range", self.name())));
        }
        if let Some(&e) = self
            .entities()
            .iter()
            .find(|&&e| e >= graph.num_entities())
        {
            return Err(Error::invalid(format!("{}: entity index {e} out of range", self.name())));
        }
        Ok(())
    }

    /// Renders the rule in the rule-file syntax using `graph`'s symbol names.
    pub fn display<'a>(&'a self, graph: &'a KnowledgeGraph) -> RuleDisplay<'a> {
        RuleDisplay { rule: self, graph }
    }
}

pub struct RuleDisplay<'a> {
    rule: &'a Rule,
    graph: &'a KnowledgeGraph,
}

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = |i: usize| self.graph.relations().name(i);
        let ent = |i: usize| self.graph.entities().name(i);
        match *self.rule {
            Rule::RelImp { r, r2 } => write!(f, "RelImp({}, {})", rel(r), rel(r2)),
            Rule::RevImp { r, r2 } => write!(f, "RevImp({}, {})", rel(r), rel(r2)),
            Rule::Symm { r } => write!(f, "Symm({})", rel(r)),
            Rule::EntailB { r, e, r2, e2 } => {
                write!(f, "EntailB({}, {}, {}, {})", rel(r), ent(e), rel(r2), ent(e2))
            }
            Rule::ProTrans { r, r2, e2, r3, e3 } => write!(
                f,
                "ProTrans({}, {}, {}, {}, {})",
                rel(r),
                rel(r2),
                ent(e2),
                rel(r3),
                ent(e3)
            ),
            Rule::TypeImp { r, e, r2 } => {
                write!(f, "TypeImp({}, {}, {})", rel(r), ent(e), rel(r2))
            }
        }
    }
}

/// Parses one rule per line (`Name(arg1, arg2, ...)`), binding symbols
/// against `graph`. Blank lines and `#` comments are skipped.
pub fn parse_rules(text: &str, graph: &KnowledgeGraph) -> Result<Vec<Rule>> {
    let mut rules = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        rules.push(parse_rule_line(line, lineno + 1, graph)?);
    }
    Ok(rules)
}

fn parse_rule_line(line: &str, lineno: usize, graph: &KnowledgeGraph) -> Result<Rule> {
    let (name, rest) = line
        .split_once('(')
        .ok_or_else(|| Error::parse(lineno, "expected `Name(args...)`"))?;
    let name = name.trim();
    let args = rest
        .trim_end()
        .strip_suffix(')')
        .ok_or_else(|| Error::parse(lineno, "missing closing parenthesis"))?;
    let args: Vec<&str> = args.split(',').map(str::trim).collect();

    let sig = Rule::signature(name)
        .ok_or_else(|| Error::parse(lineno, format!("unknown rule `{name}`")))?;
    if args.len() != sig.len() || args.iter().any(|a| a.is_empty()) {
        return Err(Error::parse(
            lineno,
            format!("{name} takes {} arguments, found {}", sig.len(), args.len()),
        ));
    }

    let mut idx = Vec::with_capacity(args.len());
    for (arg, kind) in args.iter().zip(sig) {
        let found = match kind {
            Arg::Rel => graph.relations().get(arg).ok_or(Error::UnknownSymbol {
                kind: "relation",
                name: (*arg).to_owned(),
            }),
            Arg::Ent => graph.entities().get(arg).ok_or(Error::UnknownSymbol {
                kind: "entity",
                name: (*arg).to_owned(),
            }),
        };
        idx.push(found?);
    }

    Ok(match name {
        "RelImp" => Rule::RelImp { r: idx[0], r2: idx[1] },
        "RevImp" => Rule::RevImp { r: idx[0], r2: idx[1] },
        "Symm" => Rule::Symm { r: idx[0] },
        "EntailB" | "Entail_B" => Rule::EntailB {
            r: idx[0],
            e: idx[1],
            r2: idx[2],
            e2: idx[3],
        },
        "ProTrans" => Rule::ProTrans {
            r: idx[0],
            r2: idx[1],
            e2: idx[2],
            r3: idx[3],
            e3: idx[4],
        },
        "TypeImp" => Rule::TypeImp {
            r: idx[0],
            e: idx[1],
            r2: idx[2],
        },
        _ => unreachable!("signature lookup covers every name"),
    })
}
