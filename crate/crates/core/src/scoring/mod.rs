//! Embedding parameters and score functions.
//!
//! A fact `(r, (e, e'))` is scored by composing the entity vectors into a
//! tuple vector `t = c(e, e')` and comparing it with the relation vector:
//!
//! | model   | composition `t`            | score          |
//! |---------|----------------------------|----------------|
//! | A       | `(e; e')`                  | `<r, t>`       |
//! | B       | `(e; e'; <e, e'>)`         | `<r, t>`       |
//! | C       | `(e; e')`                  | `-‖r - t‖`     |
//! | D       | `(e; e'; ‖e - e'‖)`        | `-‖r - t‖`     |
//! | R       | `e ⊗ e'` (column-major)    | `<r, t>`       |
//! | T       | `e - e'`                   | `-‖r - t‖`     |
//! | Tucker2 | `a¹(e) ⊗ a²(e')`           | `<r, t>`       |
//!
//! For B and D the last relation coordinate is fixed (1 and 0
//! respectively) and never trained. Outer products are flattened
//! column-major, so `t[i + j·d̃] = e[i]·e'[j]` and the relation vector read as
//! a matrix gives `score = eᵀ M e'`.

pub mod checkpoint;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::Fact;
use crate::rng::Rng;

pub use checkpoint::{read_checkpoint, write_checkpoint, write_manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    A,
    B,
    C,
    D,
    R,
    T,
    Tucker2,
}

impl ModelKind {
    /// The six models trained with the ranking objective.
    pub const RANKING: [ModelKind; 6] = [
        ModelKind::A,
        ModelKind::B,
        ModelKind::C,
        ModelKind::D,
        ModelKind::R,
        ModelKind::T,
    ];

    pub fn is_distance(self) -> bool {
        matches!(self, ModelKind::C | ModelKind::D | ModelKind::T)
    }

    pub fn is_bilinear(self) -> bool {
        matches!(self, ModelKind::R | ModelKind::Tucker2)
    }

    /// Models whose relation vector splits into subject and object halves.
    pub fn has_halves(self) -> bool {
        matches!(self, ModelKind::A | ModelKind::B | ModelKind::C | ModelKind::D)
    }

    pub fn relation_dim(self, ent_dim: usize) -> usize {
        match self {
            ModelKind::A | ModelKind::C => 2 * ent_dim,
            ModelKind::B | ModelKind::D => 2 * ent_dim + 1,
            ModelKind::R | ModelKind::Tucker2 => ent_dim * ent_dim,
            ModelKind::T => ent_dim,
        }
    }

    fn fixed_coordinate(self) -> Option<f64> {
        match self {
            ModelKind::B => Some(1.0),
            ModelKind::D => Some(0.0),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::A => "A",
            ModelKind::B => "B",
            ModelKind::C => "C",
            ModelKind::D => "D",
            ModelKind::R => "R",
            ModelKind::T => "T",
            ModelKind::Tucker2 => "Tucker2",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "A" | "a" => ModelKind::A,
            "B" | "b" => ModelKind::B,
            "C" | "c" => ModelKind::C,
            "D" | "d" => ModelKind::D,
            "R" | "r" | "rescal" => ModelKind::R,
            "T" | "t" => ModelKind::T,
            "Tucker2" | "tucker2" => ModelKind::Tucker2,
            other => return Err(Error::invalid(format!("unknown model `{other}`"))),
        })
    }
}

/// Model kind plus its relation (`d`) and entity (`d̃`) dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub rel_dim: usize,
    pub ent_dim: usize,
}

impl ModelSpec {
    /// Spec with `d` derived from `d̃`.
    pub fn new(kind: ModelKind, ent_dim: usize) -> Self {
        ModelSpec {
            kind,
            rel_dim: kind.relation_dim(ent_dim),
            ent_dim,
        }
    }

    /// Spec from explicit dimensions, validating `d` against `d̃`.
    pub fn with_dims(kind: ModelKind, rel_dim: usize, ent_dim: usize) -> Result<Self> {
        let spec = ModelSpec::new(kind, ent_dim);
        if ent_dim == 0 {
            return Err(Error::invalid("entity dimension must be positive"));
        }
        if spec.rel_dim != rel_dim {
            return Err(Error::Dimension {
                expected: spec.rel_dim,
                actual: rel_dim,
            });
        }
        Ok(spec)
    }

    /// Relation coordinates that are trained (excludes B/D's fixed slot).
    pub fn learnable_rel_dim(&self) -> usize {
        match self.kind.fixed_coordinate() {
            Some(_) => self.rel_dim - 1,
            None => self.rel_dim,
        }
    }

    pub fn has_role_vectors(&self) -> bool {
        self.kind == ModelKind::Tucker2
    }
}

/// Entity and relation embeddings.
///
/// For Tucker2, `entities` holds the subject-role vectors and `entities2` the
/// object-role vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub spec: ModelSpec,
    pub entities: Vec<Vec<f64>>,
    pub entities2: Option<Vec<Vec<f64>>>,
    pub relations: Vec<Vec<f64>>,
}

impl ModelParams {
    /// All-zero parameters (fixed coordinates set).
    pub fn zeros(spec: ModelSpec, num_entities: usize, num_relations: usize) -> Self {
        let mut relations = vec![vec![0.0; spec.rel_dim]; num_relations];
        if let Some(c) = spec.kind.fixed_coordinate() {
            for r in &mut relations {
                r[spec.rel_dim - 1] = c;
            }
        }
        ModelParams {
            spec,
            entities: vec![vec![0.0; spec.ent_dim]; num_entities],
            entities2: spec
                .has_role_vectors()
                .then(|| vec![vec![0.0; spec.ent_dim]; num_entities]),
            relations,
        }
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    /// Subject-role vector of entity `e`.
    pub fn subject_vec(&self, e: usize) -> &[f64] {
        &self.entities[e]
    }

    /// Object-role vector of entity `e` (same as the subject vector unless
    /// the model carries role vectors).
    pub fn object_vec(&self, e: usize) -> &[f64] {
        match &self.entities2 {
            Some(v) => &v[e],
            None => &self.entities[e],
        }
    }

    pub fn check_fact(&self, fact: &Fact) -> Result<()> {
        if fact.relation >= self.relations.len()
            || fact.subject >= self.entities.len()
            || fact.object >= self.entities.len()
        {
            return Err(Error::invalid(format!("fact {fact:?} out of range for parameters")));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        let finite = |vs: &Vec<Vec<f64>>| vs.iter().flatten().all(|x| x.is_finite());
        finite(&self.entities)
            && finite(&self.relations)
            && self.entities2.as_ref().is_none_or(finite)
    }

    /// Restores B/D's fixed relation coordinate.
    pub(crate) fn pin_fixed(&mut self) {
        if let Some(c) = self.spec.kind.fixed_coordinate() {
            let last = self.spec.rel_dim - 1;
            for r in &mut self.relations {
                r[last] = c;
            }
        }
    }

    /// The relation vector read as a column-major `d̃ × d̃` matrix (R and Tucker2).
    pub fn relation_matrix(&self, r: usize) -> Vec<Vec<f64>> {
        let n = self.spec.ent_dim;
        let v = &self.relations[r];
        (0..n)
            .map(|i| (0..n).map(|j| v[i + j * n]).collect())
            .collect()
    }

    /// Number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        let ent = self.entities.len() * self.spec.ent_dim;
        let ent2 = self.entities2.as_ref().map_or(0, |v| v.len() * self.spec.ent_dim);
        ent + ent2 + self.relations.len() * self.spec.learnable_rel_dim()
    }
}

fn check_len(v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Dimension {
            expected,
            actual: v.len(),
        });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Tuple vector `c(e, e')` for the model.
pub fn compose(spec: &ModelSpec, e: &[f64], e2: &[f64]) -> Result<Vec<f64>> {
    let n = spec.ent_dim;
    check_len(e, n)?;
    check_len(e2, n)?;
    Ok(match spec.kind {
        ModelKind::A | ModelKind::C => [e, e2].concat(),
        ModelKind::B => {
            let mut t = [e, e2].concat();
            t.push(dot(e, e2));
            t
        }
        ModelKind::D => {
            let mut t = [e, e2].concat();
            t.push(sq_dist(e, e2).sqrt());
            t
        }
        ModelKind::R | ModelKind::Tucker2 => {
            let mut t = vec![0.0; n * n];
            for j in 0..n {
                for i in 0..n {
                    t[i + j * n] = e[i] * e2[j];
                }
            }
            t
        }
        ModelKind::T => e.iter().zip(e2).map(|(a, b)| a - b).collect(),
    })
}

/// Score of relation vector `r` against subject vector `s` and object vector `o`.
///
/// Terms are accumulated per block so that swapping `s` and `o` under
/// `r₁ = r₂` reproduces the score bit for bit.
pub fn score_vectors(kind: ModelKind, r: &[f64], s: &[f64], o: &[f64]) -> f64 {
    let n = s.len();
    match kind {
        ModelKind::A => dot(&r[..n], s) + dot(&r[n..2 * n], o),
        ModelKind::B => dot(&r[..n], s) + dot(&r[n..2 * n], o) + r[2 * n] * dot(s, o),
        ModelKind::C => -(sq_dist(&r[..n], s) + sq_dist(&r[n..2 * n], o)).sqrt(),
        ModelKind::D => {
            let gap = sq_dist(s, o).sqrt() - r[2 * n];
            -(sq_dist(&r[..n], s) + sq_dist(&r[n..2 * n], o) + gap * gap).sqrt()
        }
        ModelKind::R | ModelKind::Tucker2 => bilinear(r, s, o),
        ModelKind::T => {
            let d: f64 = r
                .iter()
                .zip(s.iter().zip(o))
                .map(|(ri, (si, oi))| {
                    let u = ri - (si - oi);
                    u * u
                })
                .sum();
            -d.sqrt()
        }
    }
}

/// `sᵀ M o` with `M[i][j] = r[i + j·n]`.
pub fn bilinear(r: &[f64], s: &[f64], o: &[f64]) -> f64 {
    let n = s.len();
    let mut total = 0.0;
    for (j, oj) in o.iter().enumerate() {
        let col = &r[j * n..(j + 1) * n];
        total += dot(col, s) * oj;
    }
    total
}

/// Score of `fact` under `params`.
pub fn score(params: &ModelParams, fact: &Fact) -> Result<f64> {
    params.check_fact(fact)?;
    let spec = &params.spec;
    let r = &params.relations[fact.relation];
    check_len(r, spec.rel_dim)?;
    Ok(score_vectors(
        spec.kind,
        r,
        params.subject_vec(fact.subject),
        params.object_vec(fact.object),
    ))
}

/// Score of `fact` without bounds checks; callers guarantee valid indices.
pub(crate) fn score_unchecked(params: &ModelParams, fact: &Fact) -> f64 {
    score_vectors(
        params.spec.kind,
        &params.relations[fact.relation],
        params.subject_vec(fact.subject),
        params.object_vec(fact.object),
    )
}

/// Partial derivatives of one score with respect to its three inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrad {
    pub score: f64,
    pub relation: Vec<f64>,
    pub subject: Vec<f64>,
    pub object: Vec<f64>,
}

/// Score and its gradient. Distance forms take the subgradient 0 at the kink
/// `r = t`, and D's `‖e - e'‖` term takes 0 at `e = e'`. Fixed relation
/// coordinates get a zero partial.
pub fn score_grad(kind: ModelKind, r: &[f64], s: &[f64], o: &[f64]) -> ScoreGrad {
    let n = s.len();
    let mut gr = vec![0.0; r.len()];
    let mut gs = vec![0.0; n];
    let mut go = vec![0.0; n];
    let value;
    match kind {
        ModelKind::A | ModelKind::B => {
            gr[..n].copy_from_slice(s);
            gr[n..2 * n].copy_from_slice(o);
            gs.copy_from_slice(&r[..n]);
            go.copy_from_slice(&r[n..2 * n]);
            if kind == ModelKind::B {
                let c = r[2 * n];
                for i in 0..n {
                    gs[i] += c * o[i];
                    go[i] += c * s[i];
                }
            }
            value = score_vectors(kind, r, s, o);
        }
        ModelKind::R | ModelKind::Tucker2 => {
            for j in 0..n {
                for i in 0..n {
                    let m = r[i + j * n];
                    gr[i + j * n] = s[i] * o[j];
                    gs[i] += m * o[j];
                    go[j] += m * s[i];
                }
            }
            value = bilinear(r, s, o);
        }
        ModelKind::C | ModelKind::D | ModelKind::T => {
            // u = r - t, score = -‖u‖, d score / d r = -u/‖u‖, d score / d t = u/‖u‖.
            let mut u: Vec<f64>;
            let mut gap_dir = vec![0.0; n];
            match kind {
                ModelKind::C => {
                    u = r[..n].iter().zip(s).map(|(a, b)| a - b).collect();
                    u.extend(r[n..2 * n].iter().zip(o).map(|(a, b)| a - b));
                }
                ModelKind::D => {
                    u = r[..n].iter().zip(s).map(|(a, b)| a - b).collect();
                    u.extend(r[n..2 * n].iter().zip(o).map(|(a, b)| a - b));
                    let gap = sq_dist(s, o).sqrt();
                    if gap > 0.0 {
                        for i in 0..n {
                            gap_dir[i] = (s[i] - o[i]) / gap;
                        }
                    }
                    u.push(r[2 * n] - gap);
                }
                _ => {
                    u = (0..n).map(|i| r[i] - (s[i] - o[i])).collect();
                }
            }
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            value = -norm;
            if norm > 0.0 {
                let w: Vec<f64> = u.iter().map(|x| x / norm).collect();
                match kind {
                    ModelKind::C | ModelKind::D => {
                        for i in 0..2 * n {
                            gr[i] = -w[i];
                        }
                        for i in 0..n {
                            gs[i] = w[i];
                            go[i] = w[n + i];
                        }
                        if kind == ModelKind::D {
                            // t_last = ‖s - o‖; r_last is fixed at 0.
                            let wl = w[2 * n];
                            for i in 0..n {
                                gs[i] += wl * gap_dir[i];
                                go[i] -= wl * gap_dir[i];
                            }
                        }
                    }
                    _ => {
                        for i in 0..n {
                            gr[i] = -w[i];
                            gs[i] = w[i];
                            go[i] = -w[i];
                        }
                    }
                }
            }
        }
    }
    ScoreGrad {
        score: value,
        relation: gr,
        subject: gs,
        object: go,
    }
}

/// Entity-vector domain implied by the rule set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntityDomain {
    Free,
    /// Nonnegative orthant.
    Orthant,
    /// Euclidean ball `B(0, radius)` (model T).
    Ball(f64),
}

/// Samples parameters i.i.d. uniform on `[-0.5/d̃, 0.5/d̃]` and projects the
/// entity vectors onto `domain`.
pub fn init_params(
    spec: ModelSpec,
    num_entities: usize,
    num_relations: usize,
    domain: EntityDomain,
    rng: &mut Rng,
) -> ModelParams {
    let bound = 0.5 / spec.ent_dim as f64;
    let mut params = ModelParams::zeros(spec, num_entities, num_relations);
    let fill = |vs: &mut Vec<Vec<f64>>, rng: &mut Rng| {
        for v in vs.iter_mut() {
            for x in v.iter_mut() {
                *x = rng.random_range(-bound..=bound);
            }
        }
    };
    fill(&mut params.entities, rng);
    if let Some(e2) = params.entities2.as_mut() {
        fill(e2, rng);
    }
    fill(&mut params.relations, rng);
    params.pin_fixed();
    crate::constraints::project_entity_domain(&mut params, domain, None);
    params
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn dimensions() {
        assert_eq!(ModelSpec::new(ModelKind::A, 25).rel_dim, 50);
        assert_eq!(ModelSpec::new(ModelKind::B, 25).rel_dim, 51);
        assert_eq!(ModelSpec::new(ModelKind::C, 3).rel_dim, 6);
        assert_eq!(ModelSpec::new(ModelKind::D, 3).rel_dim, 7);
        assert_eq!(ModelSpec::new(ModelKind::R, 4).rel_dim, 16);
        assert_eq!(ModelSpec::new(ModelKind::T, 4).rel_dim, 4);
        assert_eq!(ModelSpec::new(ModelKind::Tucker2, 4).rel_dim, 16);
        assert!(ModelSpec::with_dims(ModelKind::A, 49, 25).is_err());
        assert!(ModelSpec::with_dims(ModelKind::A, 50, 25).is_ok());
    }

    #[test]
    fn compose_examples() {
        let t = ModelSpec::new(ModelKind::T, 2);
        assert_eq!(compose(&t, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        let b = ModelSpec::new(ModelKind::B, 2);
        assert_eq!(
            compose(&b, &[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            vec![1.0, 0.0, 0.0, 1.0, 0.0]
        );
        let r = ModelSpec::new(ModelKind::R, 2);
        assert_eq!(
            compose(&r, &[1.0, 2.0], &[3.0, 4.0]).unwrap(),
            vec![3.0, 6.0, 4.0, 8.0]
        );
        let d = ModelSpec::new(ModelKind::D, 2);
        assert_eq!(
            compose(&d, &[3.0, 0.0], &[0.0, 4.0]).unwrap(),
            vec![3.0, 0.0, 0.0, 4.0, 5.0]
        );
        assert!(compose(&r, &[1.0], &[3.0, 4.0]).is_err());
    }

    #[test]
    fn score_examples() {
        let a = score_vectors(ModelKind::A, &[1.0, 0.0, 0.0, 1.0], &[2.0, 3.0], &[4.0, 5.0]);
        assert_eq!(a, 7.0);

        let (e, e2) = ([0.3, -0.2], [0.1, 0.4]);
        let r: Vec<f64> = e.iter().zip(&e2).map(|(x, y)| x - y).collect();
        assert_eq!(score_vectors(ModelKind::T, &r, &e, &e2), 0.0);

        // M = [[0, 1], [0, 0]] column-major.
        let m = [0.0, 0.0, 1.0, 0.0];
        assert_eq!(score_vectors(ModelKind::Tucker2, &m, &[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(score_vectors(ModelKind::Tucker2, &m, &[0.0, 1.0], &[1.0, 0.0]), 0.0);
    }

    #[test]
    fn tucker2_uses_role_vectors() {
        let spec = ModelSpec::new(ModelKind::Tucker2, 2);
        let mut p = ModelParams::zeros(spec, 2, 1);
        p.relations[0] = vec![0.0, 0.0, 1.0, 0.0];
        p.entities[0] = vec![1.0, 0.0];
        p.entities2.as_mut().unwrap()[1] = vec![0.0, 1.0];
        assert_eq!(score(&p, &Fact::new(0, 0, 1)).unwrap(), 1.0);
        assert_eq!(score(&p, &Fact::new(0, 1, 0)).unwrap(), 0.0);
    }

    #[test]
    fn composition_and_score_agree() {
        // <r, c(e, e')> and -‖r - c(e, e')‖ computed from the explicit tuple vector.
        let mut rng = stream(1, Stream::Init);
        for kind in [ModelKind::A, ModelKind::B, ModelKind::C, ModelKind::D, ModelKind::R, ModelKind::T, ModelKind::Tucker2] {
            let spec = ModelSpec::new(kind, 3);
            for _ in 0..50 {
                let mut r: Vec<f64> = (0..spec.rel_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                if let Some(c) = kind.fixed_coordinate() {
                    r[spec.rel_dim - 1] = c;
                }
                let e: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let e2: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let t = compose(&spec, &e, &e2).unwrap();
                let expected = if kind.is_distance() {
                    -sq_dist(&r, &t).sqrt()
                } else {
                    dot(&r, &t)
                };
                let got = score_vectors(kind, &r, &e, &e2);
                assert!((got - expected).abs() < 1e-12, "{kind}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn rescal_matrix_form_matches_flattened_form() {
        let mut rng = stream(2, Stream::Init);
        let n = 5;
        for _ in 0..100 {
            let r: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            // aᵀ M b with M read column-major
            let mut mat = 0.0;
            for i in 0..n {
                for j in 0..n {
                    mat += a[i] * r[i + j * n] * b[j];
                }
            }
            let t = compose(&ModelSpec::new(ModelKind::R, n), &a, &b).unwrap();
            assert!((mat - dot(&r, &t)).abs() < 1e-12);
            assert!((mat - score_vectors(ModelKind::R, &r, &a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_scores_are_nonpositive() {
        let mut rng = stream(3, Stream::Init);
        for kind in [ModelKind::C, ModelKind::D, ModelKind::T] {
            let spec = ModelSpec::new(kind, 4);
            for _ in 0..200 {
                let mut r: Vec<f64> = (0..spec.rel_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                if let Some(c) = kind.fixed_coordinate() {
                    r[spec.rel_dim - 1] = c;
                }
                let e: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let e2: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                assert!(score_vectors(kind, &r, &e, &e2) <= 0.0);
                // equality at r = t (D's fixed 0 slot only matches t when e = e')
                if kind != ModelKind::D {
                    let t = compose(&spec, &e, &e2).unwrap();
                    assert_eq!(score_vectors(kind, &t, &e, &e2), 0.0);
                }
            }
        }
    }

    #[test]
    fn symmetric_relations_give_symmetric_scores() {
        let mut rng = stream(4, Stream::Init);
        for kind in [ModelKind::A, ModelKind::B, ModelKind::C, ModelKind::D] {
            let spec = ModelSpec::new(kind, 4);
            let half: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut r = [half.clone(), half].concat();
            if let Some(c) = kind.fixed_coordinate() {
                r.push(c);
            }
            assert_eq!(r.len(), spec.rel_dim);
            for _ in 0..1000 {
                let e: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let e2: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                assert_eq!(score_vectors(kind, &r, &e, &e2), score_vectors(kind, &r, &e2, &e));
            }
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let spec = ModelSpec::new(ModelKind::B, 4);
        let p1 = init_params(spec, 6, 3, EntityDomain::Free, &mut stream(5, Stream::Init));
        let p2 = init_params(spec, 6, 3, EntityDomain::Free, &mut stream(5, Stream::Init));
        assert_eq!(p1, p2);
        let bound = 0.5 / 4.0;
        assert!(p1.entities.iter().flatten().all(|x| x.is_finite() && x.abs() <= bound));
        assert!(p1.relations.iter().all(|r| r[..8].iter().all(|x| x.abs() <= bound) && r[8] == 1.0));

        let p3 = init_params(spec, 6, 3, EntityDomain::Orthant, &mut stream(5, Stream::Init));
        assert!(p3.entities.iter().flatten().all(|&x| x >= 0.0));
    }
}
