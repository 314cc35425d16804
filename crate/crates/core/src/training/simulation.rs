use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{sample_negatives, EdgeDataset, Negatives};
use crate::rng::{stream, Stream};
use crate::scoring::{bilinear, ModelKind, ModelParams, ModelSpec};

/// Which negatives enter the simulation's training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimMode {
    /// Every non-edge is a training negative.
    FullSet,
    /// `|E|` sampled non-edges.
    SubSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub ent_dim: usize,
    pub epochs: usize,
    pub eta: f64,
    pub alpha: f64,
    /// Initial values are uniform on `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            ent_dim: 32,
            epochs: 100,
            eta: 0.05,
            alpha: 0.0,
            init_scale: 0.3,
            seed: 0,
        }
    }
}

/// Fits a two-relation bilinear model (`r₁` = edge, `r₀` = non-edge) by SGD
/// on the squared loss `(s(v, r_y, v') - 1)² + s(v, r_{1-y}, v')²`.
pub fn train_rescal_simulation(
    dataset: &EdgeDataset,
    mode: SimMode,
    kind: ModelKind,
    cfg: &SimConfig,
) -> Result<ModelParams> {
    if !matches!(kind, ModelKind::R | ModelKind::Tucker2) {
        return Err(Error::invalid(format!("simulation needs model R or Tucker2, got {kind}")));
    }
    if dataset.vertex_count == 0 || dataset.positives.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    if cfg.ent_dim == 0 || !(cfg.eta > 0.0) || cfg.alpha < 0.0 {
        return Err(Error::invalid("simulation needs ent_dim ≥ 1, eta > 0, alpha ≥ 0"));
    }
    let negatives = match (mode, &dataset.negatives) {
        (SimMode::FullSet, _) => dataset.complement().collect(),
        (SimMode::SubSet, Negatives::Sampled(v)) => v.clone(),
        (SimMode::SubSet, Negatives::FullComplement) => sample_negatives(
            dataset,
            dataset.positives.len().min(dataset.complement_len()),
            &mut stream(cfg.seed, Stream::Sampling),
        )?,
    };
    let mut pairs: Vec<(usize, usize, usize)> = dataset
        .positives
        .iter()
        .map(|&(u, v)| (u, v, 1))
        .chain(negatives.into_iter().map(|(u, v)| (u, v, 0)))
        .collect();

    let spec = ModelSpec::new(kind, cfg.ent_dim);
    let mut params = ModelParams::zeros(spec, dataset.vertex_count, 2);
    let mut init = stream(cfg.seed, Stream::Init);
    let s = cfg.init_scale;
    for v in params
        .entities
        .iter_mut()
        .chain(params.entities2.iter_mut().flatten())
        .chain(params.relations.iter_mut())
    {
        v.iter_mut().for_each(|x| *x = init.random_range(-s..=s));
    }

    let n = cfg.ent_dim;
    let mut rng = stream(cfg.seed, Stream::Shuffle);
    let mut gs = vec![0.0; n];
    let mut go = vec![0.0; n];
    for _ in 0..cfg.epochs {
        pairs.shuffle(&mut rng);
        for &(u, v, y) in &pairs {
            gs.iter_mut().for_each(|x| *x = 0.0);
            go.iter_mut().for_each(|x| *x = 0.0);
            let sv = params.subject_vec(u).to_vec();
            let ov = params.object_vec(v).to_vec();
            for rel in 0..2 {
                let target = if rel == y { 1.0 } else { 0.0 };
                let m = &mut params.relations[rel];
                let err = 2.0 * (bilinear(m, &sv, &ov) - target);
                for j in 0..n {
                    for i in 0..n {
                        let mij = m[i + j * n];
                        gs[i] += err * mij * ov[j];
                        go[j] += err * mij * sv[i];
                        m[i + j * n] -= cfg.eta * (err * sv[i] * ov[j] + 2.0 * cfg.alpha * mij);
                    }
                }
            }
            let decay = 2.0 * cfg.alpha;
            for (x, g) in params.entities[u].iter_mut().zip(&gs) {
                *x -= cfg.eta * (g + decay * *x);
            }
            let obj = match params.entities2.as_mut() {
                Some(e2) => &mut e2[v],
                None => &mut params.entities[v],
            };
            for (x, g) in obj.iter_mut().zip(&go) {
                *x -= cfg.eta * (g + decay * *x);
            }
        }
        if !params.all_finite() {
            return Err(Error::NonFinite("simulation parameters diverged".into()));
        }
    }
    Ok(params)
}
