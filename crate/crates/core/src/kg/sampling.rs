use rand::Rng as _;

use super::{Fact, KnowledgeGraph};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Draws a fact uniformly from the complement of the graph's facts by
/// rejection sampling over the universe.
pub fn sample_negative_fact(graph: &KnowledgeGraph, rng: &mut Rng) -> Result<Fact> {
    let universe = graph.universe_size();
    if graph.facts().len() >= universe {
        return Err(Error::invalid("graph is complete; no negative facts exist"));
    }
    loop {
        let fact = graph.fact_at(rng.random_range(0..universe));
        if !graph.contains(&fact) {
            return Ok(fact);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{parse_facts, PUZZLE_FACTS};
    use crate::rng::{stream, Stream};
    use std::collections::HashMap;

    #[test]
    fn enumerated_complement() {
        let g = parse_facts("#entities: a, b\na\tr\ta\n").unwrap();
        let mut rng = stream(3, Stream::Negatives);
        let allowed = [Fact::new(0, 0, 1), Fact::new(0, 1, 0), Fact::new(0, 1, 1)];
        for _ in 0..100 {
            let f = sample_negative_fact(&g, &mut rng).unwrap();
            assert!(allowed.contains(&f));
        }
    }

    #[test]
    fn puzzle_samples_stay_in_complement() {
        let g = parse_facts(PUZZLE_FACTS).unwrap();
        assert_eq!(g.universe_size(), 100);
        let mut rng = stream(9, Stream::Negatives);
        for _ in 0..1000 {
            let f = sample_negative_fact(&g, &mut rng).unwrap();
            assert!(!g.contains(&f));
            assert!(g.check_fact(f).is_ok());
        }
    }

    #[test]
    fn complete_graph_is_an_error() {
        let g = parse_facts("a\tr\ta\n").unwrap();
        assert!(sample_negative_fact(&g, &mut stream(0, Stream::Negatives)).is_err());
    }

    #[test]
    fn empirically_uniform() {
        // Each of the 3 complement facts has p = 1/3; the count over n draws
        // has sd sqrt(n p (1 - p)).
        let g = parse_facts("#entities: a, b\na\tr\ta\n").unwrap();
        let mut rng = stream(11, Stream::Negatives);
        let n = 100_000usize;
        let mut counts: HashMap<Fact, usize> = HashMap::new();
        for _ in 0..n {
            *counts.entry(sample_negative_fact(&g, &mut rng).unwrap()).or_default() += 1;
        }
        assert_eq!(counts.len(), 3);
        let p = 1.0 / 3.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts.values() {
            assert!((*c as f64 - n as f64 * p).abs() < 3.0 * sd, "count {c}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let g = parse_facts(PUZZLE_FACTS).unwrap();
        let draw = |seed| {
            let mut rng = stream(seed, Stream::Negatives);
            (0..20)
                .map(|_| sample_negative_fact(&g, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
    }
}
