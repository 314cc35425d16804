//! Euclidean projections and the rule-to-constraint dispatch.
//!
//! The primitives here are exact projections onto simple convex sets. The
//! [`FeasibleSet`] compiled from a rule list combines them: each atomic
//! constraint is linear (or a ball) in one parameter kind once the other kind
//! is held fixed, which matches the trainer's alternating half-updates.

mod set;

use crate::error::{Error, Result};
use crate::scoring::{EntityDomain, ModelParams};

pub use set::{
    compile, project_rules, AuditRecord, Block, BlockKind, Constraint, FeasibleSet, LinExpr,
    Part, ProjectionConfig,
};

/// Projection onto the nonnegative orthant.
pub fn project_nonneg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

/// Per-coordinate projection of `(aᵢ, bᵢ)` onto `{u ≤ v}`.
pub fn project_elem_le(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_same_len(a, b)?;
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    for (u, v) in a.iter_mut().zip(b.iter_mut()) {
        if *u > *v {
            let mid = 0.5 * (*u + *v);
            *u = mid;
            *v = mid;
        }
    }
    Ok((a, b))
}

/// Projection of a point onto the 2-D cone `{(u, v) : u ≤ v ≤ -u}`.
pub fn project_sandwich_point(u: f64, v: f64) -> (f64, f64) {
    if u <= v && v <= -u {
        return (u, v);
    }
    // polar cone {u ≥ |v|} maps to the apex
    if u >= v.abs() {
        return (0.0, 0.0);
    }
    // otherwise drop onto the nearer boundary ray (-1, ±1)/√2
    let s = if v >= 0.0 { 1.0 } else { -1.0 };
    let t = 0.5 * (-u + s * v);
    (-t, s * t)
}

/// Per-coordinate projection of `(aᵢ, bᵢ)` onto `{u ≤ v ≤ -u}`.
pub fn project_sandwich(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_same_len(a, b)?;
    let (mut pa, mut pb) = (Vec::with_capacity(a.len()), Vec::with_capacity(a.len()));
    for (&u, &v) in a.iter().zip(b) {
        let (u, v) = project_sandwich_point(u, v);
        pa.push(u);
        pb.push(v);
    }
    Ok((pa, pb))
}

/// Projection of the blocks `xⱼ` onto `{Σ cⱼ xⱼ = target}`.
pub fn project_affine_eq(blocks: &[Vec<f64>], coeffs: &[f64], target: &[f64]) -> Result<Vec<Vec<f64>>> {
    if blocks.len() != coeffs.len() {
        return Err(Error::Dimension {
            expected: blocks.len(),
            actual: coeffs.len(),
        });
    }
    for b in blocks {
        check_same_len(target, b)?;
    }
    let norm2: f64 = coeffs.iter().map(|c| c * c).sum();
    if norm2 == 0.0 {
        return Err(Error::invalid("affine constraint with all-zero coefficients"));
    }
    let residual: Vec<f64> = (0..target.len())
        .map(|i| blocks.iter().zip(coeffs).map(|(x, c)| c * x[i]).sum::<f64>() - target[i])
        .collect();
    Ok(blocks
        .iter()
        .zip(coeffs)
        .map(|(x, c)| {
            x.iter()
                .zip(&residual)
                .map(|(xi, ri)| xi - c * ri / norm2)
                .collect()
        })
        .collect())
}

/// Projection onto the ball `B(center, radius)`.
pub fn project_ball(x: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let dist = x
        .iter()
        .zip(center)
        .map(|(a, c)| (a - c) * (a - c))
        .sum::<f64>()
        .sqrt();
    if dist <= radius {
        return x.to_vec();
    }
    let scale = radius / dist;
    x.iter()
        .zip(center)
        .map(|(a, c)| c + (a - c) * scale)
        .collect()
}

pub const DYKSTRA_TOL: f64 = 1e-12;
pub const DYKSTRA_MAX_ITERS: usize = 500;

/// Projection onto `ℝ₊ⁿ ∩ B(center, ‖center‖)` for a nonnegative center.
pub fn project_ball_orthant(x: &[f64], center: &[f64]) -> Result<Vec<f64>> {
    check_same_len(x, center)?;
    if center.iter().any(|&c| c < 0.0) {
        return Err(Error::invalid("ball-orthant center must be nonnegative"));
    }
    Ok(ball_orthant_dykstra(x, center))
}

/// Dykstra's alternating projections between the orthant and the ball
/// through the origin centred at `center`.
pub(crate) fn ball_orthant_dykstra(x: &[f64], center: &[f64]) -> Vec<f64> {
    let radius = center.iter().map(|c| c * c).sum::<f64>().sqrt();
    let n = x.len();
    let mut y = x.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for _ in 0..DYKSTRA_MAX_ITERS {
        let a: Vec<f64> = (0..n).map(|i| (y[i] + p[i]).max(0.0)).collect();
        for i in 0..n {
            p[i] += y[i] - a[i];
        }
        let shifted: Vec<f64> = (0..n).map(|i| a[i] + q[i]).collect();
        let b = project_ball(&shifted, center, radius);
        for i in 0..n {
            q[i] = shifted[i] - b[i];
        }
        let moved = (0..n).map(|i| (b[i] - y[i]).powi(2)).sum::<f64>().sqrt();
        y = b;
        if moved < DYKSTRA_TOL {
            break;
        }
    }
    // Clamping a point of the ball toward a nonnegative center stays in the
    // ball, so the result is feasible for both sets.
    y.iter().map(|v| v.max(0.0)).collect()
}

/// Projects entity vectors onto the entity domain. `only` restricts the
/// projection to the listed entities.
pub fn project_entity_domain(params: &mut ModelParams, domain: EntityDomain, only: Option<&[usize]>) {
    let apply = |v: &mut Vec<f64>| match domain {
        EntityDomain::Free => {}
        EntityDomain::Orthant => v.iter_mut().for_each(|x| *x = x.max(0.0)),
        EntityDomain::Ball(rho) => {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > rho {
                let s = rho / norm;
                v.iter_mut().for_each(|x| *x *= s);
            }
        }
    };
    let run = |vs: &mut Vec<Vec<f64>>| match only {
        Some(ids) => ids.iter().for_each(|&i| apply(&mut vs[i])),
        None => vs.iter_mut().for_each(&apply),
    };
    run(&mut params.entities);
    if let Some(e2) = params.entities2.as_mut() {
        run(e2);
    }
}

/// Largest entity-domain violation.
pub fn entity_domain_violation(params: &ModelParams, domain: EntityDomain) -> f64 {
    let one = |v: &Vec<f64>| match domain {
        EntityDomain::Free => 0.0,
        EntityDomain::Orthant => v.iter().fold(0.0f64, |m, &x| m.max(-x)),
        EntityDomain::Ball(rho) => (v.iter().map(|x| x * x).sum::<f64>().sqrt() - rho).max(0.0),
    };
    params
        .entities
        .iter()
        .chain(params.entities2.iter().flatten())
        .map(one)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use rand::Rng as _;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn nonneg_examples() {
        assert_eq!(project_nonneg(&[-1.0, 2.0]), vec![0.0, 2.0]);
        assert_eq!(project_nonneg(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn nonneg_is_nearest_among_samples() {
        let mut rng = stream(1, Stream::Sampling);
        for _ in 0..20 {
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = project_nonneg(&v);
            let dp = dist(&p, &v);
            for _ in 0..1000 {
                let w: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..3.0)).collect();
                assert!(dp <= dist(&w, &v) + 1e-15);
            }
        }
    }

    #[test]
    fn elem_le_examples() {
        assert_eq!(project_elem_le(&[3.0], &[1.0]).unwrap(), (vec![2.0], vec![2.0]));
        assert_eq!(project_elem_le(&[1.0], &[3.0]).unwrap(), (vec![1.0], vec![3.0]));
        assert!(project_elem_le(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn sandwich_examples() {
        assert_eq!(project_sandwich(&[1.0], &[0.0]).unwrap(), (vec![0.0], vec![0.0]));
        assert_eq!(project_sandwich(&[-2.0], &[1.0]).unwrap(), (vec![-2.0], vec![1.0]));
        let (u, v) = project_sandwich(&[0.0], &[2.0]).unwrap();
        assert!((u[0] + 1.0).abs() < 1e-15 && (v[0] - 1.0).abs() < 1e-15);
        assert!(project_sandwich(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn affine_examples() {
        let out = project_affine_eq(&[vec![2.0, 4.0]], &[1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(out, vec![vec![0.0, 0.0]]);
        let out = project_affine_eq(&[vec![1.0, 0.0], vec![1.0, 0.0]], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(out, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert!(project_affine_eq(&[vec![1.0]], &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn affine_residual_vanishes() {
        let mut rng = stream(2, Stream::Sampling);
        for _ in 0..200 {
            let k = rng.random_range(1..5);
            let blocks: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect())
                .collect();
            let coeffs: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let target: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let out = project_affine_eq(&blocks, &coeffs, &target).unwrap();
            for i in 0..3 {
                let r: f64 = out.iter().zip(&coeffs).map(|(x, c)| c * x[i]).sum::<f64>() - target[i];
                assert!(r.abs() < 1e-12, "residual {r}");
            }
        }
    }

    #[test]
    fn ball_orthant_examples() {
        let c = vec![0.5, 1.0, 0.0];
        assert_eq!(project_ball_orthant(&c, &c).unwrap(), c);
        let x: Vec<f64> = c.iter().map(|v| 3.0 * v).collect();
        let p = project_ball_orthant(&x, &c).unwrap();
        for (pi, ci) in p.iter().zip(&c) {
            assert!((pi - 2.0 * ci).abs() < 1e-12);
        }
        assert!(project_ball_orthant(&[1.0], &[-1.0]).is_err());
    }

    #[test]
    fn ball_orthant_is_nearest_among_samples() {
        let mut rng = stream(3, Stream::Sampling);
        for _ in 0..10 {
            let c: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let rad = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = project_ball_orthant(&x, &c).unwrap();
            assert!(p.iter().all(|&v| v >= 0.0));
            assert!(dist(&p, &c) <= rad + 1e-12);
            let dp = dist(&p, &x);
            let mut checked = 0;
            while checked < 10_000 {
                let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..2.0 * rad)).collect();
                if dist(&w, &c) > rad {
                    continue;
                }
                checked += 1;
                assert!(dist(&w, &x) > dp - 1e-6);
            }
        }
    }
}
