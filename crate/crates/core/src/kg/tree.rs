use std::collections::HashSet;

use rand::seq::index;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const MAX_TREE_DEPTH: usize = 20;

pub type Pair = (usize, usize);

/// Which ordered pairs act as negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Negatives {
    /// Every ordered pair not in the positives, self-pairs included.
    FullComplement,
    Sampled(Vec<Pair>),
}

/// Ordered vertex pairs of a single binary relation together with the chosen
/// negatives and the reversed positives.
#[derive(Debug, Clone)]
pub struct EdgeDataset {
    pub vertex_count: usize,
    pub positives: Vec<Pair>,
    positive_set: HashSet<Pair>,
    pub negatives: Negatives,
    pub reversed: Vec<Pair>,
    pub closure_of_tree: bool,
}

impl EdgeDataset {
    /// Builds a dataset over `vertex_count` vertices with the full complement
    /// as negatives.
    pub fn new(vertex_count: usize, positives: Vec<Pair>) -> Result<Self> {
        let mut positive_set = HashSet::with_capacity(positives.len());
        let mut unique = Vec::with_capacity(positives.len());
        for &(u, v) in &positives {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::invalid(format!("pair ({u}, {v}) out of range")));
            }
            if positive_set.insert((u, v)) {
                unique.push((u, v));
            }
        }
        let reversed = unique.iter().map(|&(u, v)| (v, u)).collect();
        Ok(EdgeDataset {
            vertex_count,
            positives: unique,
            positive_set,
            negatives: Negatives::FullComplement,
            reversed,
            closure_of_tree: false,
        })
    }

    pub fn is_positive(&self, pair: Pair) -> bool {
        self.positive_set.contains(&pair)
    }

    pub fn complement_len(&self) -> usize {
        self.vertex_count * self.vertex_count - self.positives.len()
    }

    /// Iterates over the complement in row-major order.
    pub fn complement(&self) -> impl Iterator<Item = Pair> + '_ {
        let n = self.vertex_count;
        (0..n)
            .flat_map(move |u| (0..n).map(move |v| (u, v)))
            .filter(|p| !self.positive_set.contains(p))
    }

    /// Materialised negative pairs (the whole complement for `FullComplement`).
    pub fn negative_pairs(&self) -> Vec<Pair> {
        match &self.negatives {
            Negatives::FullComplement => self.complement().collect(),
            Negatives::Sampled(v) => v.clone(),
        }
    }

    /// Replaces the negatives with `count` uniformly sampled complement pairs.
    pub fn with_sampled_negatives(mut self, count: usize, rng: &mut Rng) -> Result<Self> {
        let sample = sample_negatives(&self, count, rng)?;
        self.negatives = Negatives::Sampled(sample);
        Ok(self)
    }
}

/// Transitive closure of the complete balanced binary tree of `depth` levels,
/// edges directed from ancestors to descendants.
///
/// Vertices are heap-numbered: the root is 0 and the children of `i` are
/// `2i + 1` and `2i + 2`.
pub fn gen_transitive_tree(depth: usize) -> Result<EdgeDataset> {
    if depth == 0 || depth > MAX_TREE_DEPTH {
        return Err(Error::invalid(format!(
            "tree depth must be in 1..={MAX_TREE_DEPTH}, got {depth}"
        )));
    }
    let v = (1usize << depth) - 1;
    let mut positives = Vec::new();
    for node in 1..v {
        let mut anc = node;
        while anc > 0 {
            anc = (anc - 1) / 2;
            positives.push((anc, node));
        }
    }
    positives.sort_unstable();
    let mut ds = EdgeDataset::new(v, positives)?;
    ds.closure_of_tree = true;
    Ok(ds)
}

/// Uniform sample of `count` distinct pairs from the complement of the
/// positives. The result is sorted.
pub fn sample_negatives(dataset: &EdgeDataset, count: usize, rng: &mut Rng) -> Result<Vec<Pair>> {
    let total = dataset.complement_len();
    if count > total {
        return Err(Error::invalid(format!(
            "cannot sample {count} negatives from a complement of {total}"
        )));
    }
    let mut out: Vec<Pair> = if count * 2 > total {
        let all: Vec<Pair> = dataset.complement().collect();
        index::sample(rng, total, count)
            .into_iter()
            .map(|i| all[i])
            .collect()
    } else {
        let n = dataset.vertex_count;
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let pair = (rng.random_range(0..n), rng.random_range(0..n));
            if !dataset.is_positive(pair) && chosen.insert(pair) {
                out.push(pair);
            }
        }
        out
    };
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    /// Independent closure: repeated composition of the parent relation until
    /// no pair is added.
    fn brute_force_closure(depth: usize) -> HashSet<Pair> {
        let v = (1usize << depth) - 1;
        let mut edges: HashSet<Pair> = (1..v).map(|c| ((c - 1) / 2, c)).collect();
        loop {
            let mut added = Vec::new();
            for &(a, b) in &edges {
                for c in [2 * b + 1, 2 * b + 2] {
                    if c < v && !edges.contains(&(a, c)) {
                        added.push((a, c));
                    }
                }
            }
            if added.is_empty() {
                return edges;
            }
            edges.extend(added);
        }
    }

    #[test]
    fn single_node() {
        let ds = gen_transitive_tree(1).unwrap();
        assert_eq!(ds.vertex_count, 1);
        assert!(ds.positives.is_empty());
        assert_eq!(ds.complement_len(), 1);
        assert_eq!(ds.complement().collect::<Vec<_>>(), vec![(0, 0)]);
    }

    #[test]
    fn depth_seven_matches_brute_force() {
        let ds = gen_transitive_tree(7).unwrap();
        assert_eq!(ds.vertex_count, 127);
        assert_eq!(ds.positives.len(), 642);
        assert_eq!(ds.complement_len(), 15487);
        let oracle = brute_force_closure(7);
        let ours: HashSet<Pair> = ds.positives.iter().copied().collect();
        assert_eq!(ours, oracle);
    }

    #[test]
    fn depth_eleven_counts() {
        let ds = gen_transitive_tree(11).unwrap();
        assert_eq!(ds.vertex_count, 2047);
        assert_eq!(ds.positives.len(), 18_434);
        assert_eq!(ds.complement_len(), 4_171_775);
    }

    #[test]
    fn closed_form_counts_and_brute_force() {
        for d in 1..=11usize {
            let ds = gen_transitive_tree(d).unwrap();
            let expected: usize = (0..d).map(|k| k << k).sum();
            assert_eq!(ds.positives.len(), expected, "depth {d}");
            let v = (1usize << d) - 1;
            assert_eq!(ds.positives.len() + ds.complement_len(), v * v);
            assert_eq!(ds.reversed.len(), ds.positives.len());
            if d <= 8 {
                let ours: HashSet<Pair> = ds.positives.iter().copied().collect();
                assert_eq!(ours, brute_force_closure(d), "depth {d}");
                assert_eq!(ds.complement().count(), ds.complement_len());
            }
        }
    }

    #[test]
    fn depth_out_of_range() {
        assert!(gen_transitive_tree(0).is_err());
        assert!(gen_transitive_tree(21).is_err());
    }

    #[test]
    fn reversed_is_the_mirror() {
        let ds = gen_transitive_tree(4).unwrap();
        for &(u, v) in &ds.reversed {
            assert!(ds.is_positive((v, u)));
            assert!(!ds.is_positive((u, v)));
        }
    }

    #[test]
    fn sampling_edge_cases() {
        let ds = gen_transitive_tree(4).unwrap();
        let mut rng = stream(1, Stream::Sampling);
        assert!(sample_negatives(&ds, 0, &mut rng).unwrap().is_empty());
        let all = sample_negatives(&ds, ds.complement_len(), &mut rng).unwrap();
        let mut complement: Vec<Pair> = ds.complement().collect();
        complement.sort_unstable();
        assert_eq!(all, complement);
        assert!(sample_negatives(&ds, ds.complement_len() + 1, &mut rng).is_err());
    }

    #[test]
    fn depth_seven_sample_is_distinct_and_in_complement() {
        let ds = gen_transitive_tree(7).unwrap();
        let oracle = brute_force_closure(7);
        let mut rng = stream(42, Stream::Sampling);
        let sample = sample_negatives(&ds, 642, &mut rng).unwrap();
        let set: HashSet<Pair> = sample.iter().copied().collect();
        assert_eq!(set.len(), 642);
        assert!(set.iter().all(|p| !oracle.contains(p) && p.0 < 127 && p.1 < 127));

        let again = sample_negatives(&ds, 642, &mut stream(42, Stream::Sampling)).unwrap();
        assert_eq!(sample, again);
    }
}
