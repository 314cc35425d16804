//! Transitivity of bilinear forms.
//!
//! A square `M` is transitive when `aᵀMb > 0` and `bᵀMc > 0` imply
//! `aᵀMc > 0`. Only symmetric PSD matrices can be transitive, so for any
//! other matrix a violating triple exists. [`find_transitivity_counterexample`]
//! constructs one.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub type Matrix = Vec<Vec<f64>>;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const SAMPLE_BUDGET: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// The form is negative somewhere.
    QuadraticForm,
    /// `xᵀMy > 0 > yᵀMx` for some pair.
    SkewPair,
}

/// A certified violation for `M / scale`: `aᵀMb > tol`, `bᵀMc > tol` and
/// `aᵀMc ≤ tol`. The vectors have unit length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// `(aᵀMb, bᵀMc, aᵀMc)` for the normalised matrix.
    pub values: [f64; 3],
    pub method: Method,
    /// Frobenius norm of the input.
    pub scale: f64,
}

fn check_square(m: &Matrix) -> Result<usize> {
    let n = m.len();
    if n == 0 {
        return Err(Error::invalid("matrix is empty"));
    }
    for row in m {
        if row.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
    }
    Ok(n)
}

fn frobenius(m: &Matrix) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

fn matvec(m: &Matrix, x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `aᵀ M b`.
pub fn form(m: &Matrix, a: &[f64], b: &[f64]) -> f64 {
    dot(a, &matvec(m, b))
}

fn unit(v: Vec<f64>) -> Option<Vec<f64>> {
    let n = dot(&v, &v).sqrt();
    (n > 0.0 && n.is_finite()).then(|| v.into_iter().map(|x| x / n).collect())
}

fn neg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

/// `‖M - Mᵀ‖_F / max(1, ‖M‖_F)`.
pub fn symmetry_defect(m: &Matrix) -> Result<f64> {
    let n = check_square(m)?;
    let mut skew = 0.0;
    for i in 0..n {
        for j in 0..n {
            skew += (m[i][j] - m[j][i]).powi(2);
        }
    }
    Ok(skew.sqrt() / frobenius(m).max(1.0))
}

/// Circulant 3×3 matrix with `M[i][j] = c[(i - j) mod 3]`.
pub fn holographic_matrix(first_col: [f64; 3]) -> Matrix {
    (0..3)
        .map(|i| (0..3).map(|j| first_col[(i + 3 - j) % 3]).collect())
        .collect()
}

pub fn random_matrix(dim: usize, rng: &mut Rng) -> Matrix {
    (0..dim)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

pub fn random_vector(dim: usize, rng: &mut Rng) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// `v vᵀ` for a random normal `v`.
pub fn rank_one_psd(dim: usize, rng: &mut Rng) -> Matrix {
    let v = random_vector(dim, rng);
    v.iter().map(|a| v.iter().map(|b| a * b).collect()).collect()
}

/// Whether `report` is a valid violation for `m` at `tol`, recomputed from
/// scratch.
pub fn verify_certificate(m: &Matrix, report: &CounterexampleReport, tol: f64) -> bool {
    let s = frobenius(m);
    if s == 0.0 {
        return false;
    }
    let mn: Matrix = m.iter().map(|r| r.iter().map(|x| x / s).collect()).collect();
    form(&mn, &report.a, &report.b) > tol
        && form(&mn, &report.b, &report.c) > tol
        && form(&mn, &report.a, &report.c) <= tol
}

fn certify(m: &Matrix, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, method: Method, scale: f64, tol: f64) -> Option<CounterexampleReport> {
    let (a, b, c) = (unit(a)?, unit(b)?, unit(c)?);
    let values = [form(m, &a, &b), form(m, &b, &c), form(m, &a, &c)];
    (values[0] > tol && values[1] > tol && values[2] <= tol).then_some(CounterexampleReport {
        a,
        b,
        c,
        values,
        method,
        scale,
    })
}

/// Triple from a direction `z` with `zᵀMz < 0`: `a = c = z` and `b` on the
/// positive side of both `Mᵀz` and `Mz`.
fn from_negative_direction(m: &Matrix, mt: &Matrix, z: &[f64], scale: f64, tol: f64) -> Option<CounterexampleReport> {
    let u = unit(matvec(mt, z))?;
    let w = unit(matvec(m, z))?;
    let b: Vec<f64> = u.iter().zip(&w).map(|(x, y)| x + y).collect();
    certify(m, z.to_vec(), b, z.to_vec(), Method::QuadraticForm, scale, tol)
}

/// Searches for a transitivity violation. Phase one builds `c = x`,
/// `b = Mc`, `a = Mb`, which succeeds when `bᵀMb ≤ tol`; phase two looks for
/// a skew pair and returns `(x, y, -x)` or `(-y, x, y)`. Each phase draws at
/// most [`SAMPLE_BUDGET`] samples. The search runs on `M / ‖M‖_F`.
pub fn find_transitivity_counterexample(m: &Matrix, tol: f64, rng: &mut Rng) -> Result<Option<CounterexampleReport>> {
    let n = check_square(m)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    let scale = frobenius(m);
    if scale == 0.0 {
        return Ok(None);
    }
    let mn: Matrix = m.iter().map(|r| r.iter().map(|x| x / scale).collect()).collect();
    let mt: Matrix = (0..n).map(|i| (0..n).map(|j| mn[j][i]).collect()).collect();
    let sym: Matrix = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (mn[i][j] + mn[j][i])).collect())
        .collect();
    let skew: Matrix = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (mn[i][j] - mn[j][i])).collect())
        .collect();

    for _ in 0..SAMPLE_BUDGET {
        let Some(x) = unit(random_vector(n, rng)) else { continue };
        let b = matvec(&mn, &x);
        let a = matvec(&mn, &b);
        if let Some(r) = certify(&mn, a, b, x.clone(), Method::QuadraticForm, scale, tol) {
            return Ok(Some(r));
        }
        if form(&mn, &x, &x) < -tol {
            if let Some(r) = from_negative_direction(&mn, &mt, &x, scale, tol) {
                return Ok(Some(r));
            }
        }
    }

    if skew.iter().flatten().all(|&v| v == 0.0) {
        return Ok(None);
    }
    for _ in 0..SAMPLE_BUDGET {
        let Some(y) = unit(random_vector(n, rng)) else { continue };
        // x ⟂ Sy with xᵀKy = ‖x‖² > 0 makes xᵀMy = -yᵀMx > 0.
        let sy = matvec(&sym, &y);
        let ky = matvec(&skew, &y);
        let ss = dot(&sy, &sy);
        let x: Vec<f64> = if ss > 0.0 {
            let k = dot(&ky, &sy) / ss;
            ky.iter().zip(&sy).map(|(p, q)| p - k * q).collect()
        } else {
            ky
        };
        let Some(x) = unit(x) else { continue };
        if !(form(&mn, &x, &y) > tol && form(&mn, &y, &x) < -tol) {
            continue;
        }
        if let Some(r) = certify(&mn, x.clone(), y.clone(), neg(&x), Method::SkewPair, scale, tol) {
            return Ok(Some(r));
        }
        if let Some(r) = certify(&mn, neg(&y), x.clone(), y.clone(), Method::SkewPair, scale, tol) {
            return Ok(Some(r));
        }
        if let Some(r) = from_negative_direction(&mn, &mt, &x, scale, tol) {
            return Ok(Some(r));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    /// Independent recomputation with explicit index loops.
    fn bilinear(m: &Matrix, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            for j in 0..b.len() {
                s += a[i] * m[i][j] * b[j];
            }
        }
        s
    }

    fn check_report(m: &Matrix, r: &CounterexampleReport) {
        let s = frobenius(m);
        let mn: Matrix = m.iter().map(|row| row.iter().map(|x| x / s).collect()).collect();
        assert!(bilinear(&mn, &r.a, &r.b) > DEFAULT_TOL);
        assert!(bilinear(&mn, &r.b, &r.c) > DEFAULT_TOL);
        assert!(bilinear(&mn, &r.a, &r.c) <= DEFAULT_TOL);
    }

    #[test]
    fn rotation_example() {
        let m = vec![vec![0.0, -1.0], vec![1.0, 0.0]];
        let (a, b, c) = ([1.0, 0.0], [0.0, -1.0], [-1.0, 0.0]);
        assert_eq!(bilinear(&m, &a, &b), 1.0);
        assert_eq!(bilinear(&m, &b, &c), 1.0);
        assert_eq!(bilinear(&m, &a, &c), 0.0);
        let r = find_transitivity_counterexample(&m, DEFAULT_TOL, &mut stream(1, Stream::Theory))
            .unwrap()
            .unwrap();
        check_report(&m, &r);
        assert!(verify_certificate(&m, &r, DEFAULT_TOL));
        // ‖M - Mᵀ‖_F = 2√2 and ‖M‖_F = √2
        assert!((symmetry_defect(&m).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rank_one_psd_has_none() {
        let m = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        let r = find_transitivity_counterexample(&m, DEFAULT_TOL, &mut stream(2, Stream::Theory)).unwrap();
        assert!(r.is_none());
        assert_eq!(symmetry_defect(&m).unwrap(), 0.0);
    }

    #[test]
    fn holographic_examples() {
        assert_eq!(
            holographic_matrix([1.0, 2.0, 3.0]),
            vec![vec![1.0, 3.0, 2.0], vec![2.0, 1.0, 3.0], vec![3.0, 2.0, 1.0]]
        );
        let constant = holographic_matrix([1.0, 1.0, 1.0]);
        assert_eq!(symmetry_defect(&constant).unwrap(), 0.0);
        assert!(find_transitivity_counterexample(&constant, DEFAULT_TOL, &mut stream(3, Stream::Theory))
            .unwrap()
            .is_none());
        let m = holographic_matrix([0.0, 1.0, -1.0]);
        let r = find_transitivity_counterexample(&m, DEFAULT_TOL, &mut stream(3, Stream::Theory))
            .unwrap()
            .unwrap();
        check_report(&m, &r);
    }

    #[test]
    fn random_asymmetric_matrices() {
        let mut rng = stream(4, Stream::Theory);
        let mut found = 0;
        let mut trials = 0;
        while trials < 100 {
            let dim = 2 + trials % 9;
            let m = random_matrix(dim, &mut rng);
            if symmetry_defect(&m).unwrap() < 0.1 {
                continue;
            }
            trials += 1;
            if let Some(r) = find_transitivity_counterexample(&m, DEFAULT_TOL, &mut rng).unwrap() {
                check_report(&m, &r);
                found += 1;
            }
        }
        assert_eq!(found, 100);
    }

    #[test]
    fn scale_does_not_matter() {
        let mut rng = stream(5, Stream::Theory);
        for _ in 0..20 {
            let m = random_matrix(4, &mut rng);
            for s in [1e-6, 1e6] {
                let scaled: Matrix = m.iter().map(|r| r.iter().map(|x| x * s).collect()).collect();
                let r = find_transitivity_counterexample(&scaled, DEFAULT_TOL, &mut stream(9, Stream::Theory))
                    .unwrap()
                    .unwrap();
                check_report(&scaled, &r);
                assert!((r.scale / frobenius(&m) - s).abs() < 1e-9 * s);
            }
        }
    }

    #[test]
    fn symmetric_negative_forms_use_the_quadratic_phase() {
        let m = vec![vec![1.0, 0.0], vec![0.0, -1.0]];
        let r = find_transitivity_counterexample(&m, DEFAULT_TOL, &mut stream(6, Stream::Theory))
            .unwrap()
            .unwrap();
        assert_eq!(r.method, Method::QuadraticForm);
        check_report(&m, &r);
    }

    #[test]
    fn non_square_is_rejected() {
        let m = vec![vec![1.0, 2.0]];
        assert!(find_transitivity_counterexample(&m, DEFAULT_TOL, &mut stream(0, Stream::Theory)).is_err());
        assert!(symmetry_defect(&m).is_err());
    }
}
