use std::collections::{HashMap, HashSet};

use super::{Fact, KnowledgeGraph, Rule};

/// Least fixpoint of `rules` applied to `facts` (input facts included).
///
/// Semi-naive evaluation: each round only fires rules on facts derived in the
/// previous round, joining against the full set for the two-antecedent
/// `ProTrans` rule.
pub fn forward_closure(facts: &HashSet<Fact>, rules: &[Rule], graph: &KnowledgeGraph) -> HashSet<Fact> {
    debug_assert!(facts.iter().all(|f| graph.check_fact(*f).is_ok()));
    debug_assert!(rules.iter().all(|r| r.check(graph).is_ok()));

    let mut all: HashSet<Fact> = HashSet::with_capacity(facts.len());
    // (relation, subject) -> objects and (relation, object) -> subjects
    let mut by_subject: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut by_object: HashMap<(usize, usize), Vec<usize>> = HashMap::new();

    let mut delta: Vec<Fact> = Vec::new();
    let add = |f: Fact,
                   all: &mut HashSet<Fact>,
                   delta: &mut Vec<Fact>,
                   by_subject: &mut HashMap<(usize, usize), Vec<usize>>,
                   by_object: &mut HashMap<(usize, usize), Vec<usize>>| {
        if all.insert(f) {
            by_subject.entry((f.relation, f.subject)).or_default().push(f.object);
            by_object.entry((f.relation, f.object)).or_default().push(f.subject);
            delta.push(f);
        }
    };

    let mut seed: Vec<Fact> = facts.iter().copied().collect();
    seed.sort_unstable();
    for f in seed {
        add(f, &mut all, &mut delta, &mut by_subject, &mut by_object);
    }

    while !delta.is_empty() {
        let current = std::mem::take(&mut delta);
        let mut derived = Vec::new();
        for f in &current {
            for rule in rules {
                fire(rule, f, &by_subject, &by_object, &mut derived);
            }
        }
        for f in derived {
            add(f, &mut all, &mut delta, &mut by_subject, &mut by_object);
        }
    }
    all
}

fn fire(
    rule: &Rule,
    f: &Fact,
    by_subject: &HashMap<(usize, usize), Vec<usize>>,
    by_object: &HashMap<(usize, usize), Vec<usize>>,
    out: &mut Vec<Fact>,
) {
    match *rule {
        Rule::RelImp { r, r2 } if f.relation == r => out.push(Fact::new(r2, f.subject, f.object)),
        Rule::RevImp { r, r2 } if f.relation == r => out.push(Fact::new(r2, f.object, f.subject)),
        Rule::Symm { r } if f.relation == r => out.push(Fact::new(r, f.object, f.subject)),
        Rule::EntailB { r, e, r2, e2 } if f.relation == r && f.object == e => {
            out.push(Fact::new(r2, f.subject, e2))
        }
        Rule::TypeImp { r, e, r2 } if f.relation == r => out.push(Fact::new(r2, f.subject, e)),
        Rule::ProTrans { r, r2, e2, r3, e3 } => {
            // f as the first antecedent (r, (x, y)): need (r', (y, e')).
            if f.relation == r
                && by_subject
                    .get(&(r2, f.object))
                    .is_some_and(|objs| objs.contains(&e2))
            {
                out.push(Fact::new(r3, f.subject, e3));
            }
            // f as the second antecedent (r', (y, e')): join every (r, (x, y)).
            if f.relation == r2 && f.object == e2 {
                if let Some(subjects) = by_object.get(&(r, f.subject)) {
                    out.extend(subjects.iter().map(|&x| Fact::new(r3, x, e3)));
                }
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{parse_facts, parse_rules, PUZZLE_FACTS, PUZZLE_RULES};
    use proptest::prelude::*;

    #[test]
    fn empty_fixpoint() {
        let g = parse_facts(PUZZLE_FACTS).unwrap();
        let rules = parse_rules(PUZZLE_RULES, &g).unwrap();
        assert!(forward_closure(&HashSet::new(), &rules, &g).is_empty());
    }

    #[test]
    fn puzzle_closure_derives_the_query() {
        let g = parse_facts(PUZZLE_FACTS).unwrap();
        let rules = parse_rules(PUZZLE_RULES, &g).unwrap();
        let facts: HashSet<Fact> = g.facts().iter().copied().collect();
        let closed = forward_closure(&facts, &rules, &g);

        let mut expected = facts.clone();
        for (s, r, o) in [
            ("benedict", "transact_with", "nono"),
            ("nono", "considered", "enemy"),
            ("benedict", "considered", "criminal"),
        ] {
            expected.insert(g.lookup(s, r, o).unwrap());
        }
        assert_eq!(closed, expected);
        assert_eq!(forward_closure(&closed, &rules, &g), closed);
    }

    #[test]
    fn protrans_joins_in_either_order() {
        // (p, (y, c)) is derived one round after (r, (x, y)) is seen.
        let mut g = parse_facts("x\tr\ty\ny\tq\tc\n").unwrap();
        g.add_relation("p");
        g.add_relation("s");
        let rules = parse_rules("TypeImp(q, c, p)\nProTrans(r, p, c, s, c)", &g).unwrap();
        let facts: HashSet<Fact> = g.facts().iter().copied().collect();
        let closed = forward_closure(&facts, &rules, &g);
        assert!(closed.contains(&g.lookup("y", "p", "c").unwrap()));
        assert!(closed.contains(&g.lookup("x", "s", "c").unwrap()));
        assert_eq!(closed.len(), 4);
    }

    fn small_world() -> impl Strategy<Value = (KnowledgeGraph, Vec<Rule>, Vec<Fact>, Vec<Fact>)> {
        let n_ent = 4usize;
        let n_rel = 3usize;
        let fact = (0..n_rel, 0..n_ent, 0..n_ent).prop_map(|(r, s, o)| Fact::new(r, s, o));
        let rule = prop_oneof![
            (0..n_rel, 0..n_rel).prop_map(|(r, r2)| Rule::RelImp { r, r2 }),
            (0..n_rel, 0..n_rel).prop_map(|(r, r2)| Rule::RevImp { r, r2 }),
            (0..n_rel).prop_map(|r| Rule::Symm { r }),
            (0..n_rel, 0..n_ent, 0..n_rel, 0..n_ent)
                .prop_map(|(r, e, r2, e2)| Rule::EntailB { r, e, r2, e2 }),
            (0..n_rel, 0..n_rel, 0..n_ent, 0..n_rel, 0..n_ent)
                .prop_map(|(r, r2, e2, r3, e3)| Rule::ProTrans { r, r2, e2, r3, e3 }),
            (0..n_rel, 0..n_ent, 0..n_rel).prop_map(|(r, e, r2)| Rule::TypeImp { r, e, r2 }),
        ];
        (
            proptest::collection::vec(rule, 0..5),
            proptest::collection::vec(fact.clone(), 0..8),
            proptest::collection::vec(fact, 0..4),
        )
            .prop_map(move |(rules, f1, extra)| {
                (KnowledgeGraph::with_counts(n_ent, n_rel), rules, f1, extra)
            })
    }

    /// Naive oracle: apply every rule to every fact (and every pair for
    /// ProTrans) until nothing changes.
    fn naive_closure(facts: &HashSet<Fact>, rules: &[Rule]) -> HashSet<Fact> {
        let mut all = facts.clone();
        loop {
            let mut new = Vec::new();
            for f in &all {
                for rule in rules {
                    match *rule {
                        Rule::RelImp { r, r2 } if f.relation == r => new.push(Fact::new(r2, f.subject, f.object)),
                        Rule::RevImp { r, r2 } if f.relation == r => new.push(Fact::new(r2, f.object, f.subject)),
                        Rule::Symm { r } if f.relation == r => new.push(Fact::new(r, f.object, f.subject)),
                        Rule::EntailB { r, e, r2, e2 } if f.relation == r && f.object == e => {
                            new.push(Fact::new(r2, f.subject, e2))
                        }
                        Rule::TypeImp { r, e, r2 } if f.relation == r => new.push(Fact::new(r2, f.subject, e)),
                        Rule::ProTrans { r, r2, e2, r3, e3 } if f.relation == r => {
                            for g in &all {
                                if g.relation == r2 && g.subject == f.object && g.object == e2 {
                                    new.push(Fact::new(r3, f.subject, e3));
                                }
                            }
                        }
                        _ => {}
                    }
                }
            }
            let before = all.len();
            all.extend(new);
            if all.len() == before {
                return all;
            }
        }
    }

    proptest! {
        #[test]
        fn matches_naive_oracle((g, rules, facts, _) in small_world()) {
            let facts: HashSet<Fact> = facts.into_iter().collect();
            prop_assert_eq!(forward_closure(&facts, &rules, &g), naive_closure(&facts, &rules));
        }

        #[test]
        fn monotone((g, rules, facts, extra) in small_world()) {
            let f1: HashSet<Fact> = facts.iter().copied().collect();
            let mut f2 = f1.clone();
            f2.extend(extra);
            let c1 = forward_closure(&f1, &rules, &g);
            let c2 = forward_closure(&f2, &rules, &g);
            prop_assert!(c1.is_subset(&c2));
        }

        #[test]
        fn closed_and_idempotent((g, rules, facts, _) in small_world()) {
            let f: HashSet<Fact> = facts.into_iter().collect();
            let c = forward_closure(&f, &rules, &g);
            prop_assert!(f.is_subset(&c));
            for rule in &rules {
                let once = forward_closure(&c, std::slice::from_ref(rule), &g);
                prop_assert_eq!(&once, &c);
            }
            prop_assert_eq!(forward_closure(&c, &rules, &g), c);
        }
    }
}
