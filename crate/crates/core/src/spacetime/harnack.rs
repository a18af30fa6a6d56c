//! The matrix Harnack form `M(w,w) + 2P(v,w,w) + R(v,w,v,w)` and its trace.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Mode, SpaceTimePoint};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackComponents {
    /// `M(w,w)`.
    pub m_term: f64,
    /// `P(v,w,w)`.
    pub p_term: f64,
    /// `R(v,w,v,w)`.
    pub r_term: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarnackReport {
    /// `m_term + 2 p_term + r_term`.
    pub value: f64,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub mode: Mode,
    pub components: HarnackComponents,
}

/// Evaluates the matrix Harnack form at the point's mode.
pub fn harnack_form(pt: &SpaceTimePoint, v: &[f64], w: &[f64]) -> Result<HarnackReport> {
    let n = pt.n;
    for len in [v.len(), w.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    let m_term = pt.m.form(w, w);
    let mut p_term = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                p_term += pt.p(i, j, k) * v[i] * w[j] * w[k];
            }
        }
    }
    let r_term = pt.riem.eval(v, w, v, w);
    Ok(HarnackReport {
        value: m_term + 2.0 * p_term + r_term,
        v: v.to_vec(),
        w: w.to_vec(),
        mode: pt.mode,
        components: HarnackComponents { m_term, p_term, r_term },
    })
}

/// The symmetric matrix `A(v)` with `A(v)(w,w)` the Harnack form.
pub fn harnack_matrix(pt: &SpaceTimePoint, v: &[f64]) -> DMatrix<f64> {
    let n = pt.n;
    let mut a = pt.m.matrix().clone();
    for j in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += v[i] * (pt.p(i, j, k) + pt.p(i, k, j));
                for l in 0..n {
                    s += pt.riem[(i, j, l, k)] * v[i] * v[l];
                }
            }
            a[(j, k)] += s;
        }
    }
    0.5 * (&a + a.transpose())
}

/// `∂_t scal + scal/t + 2 ∂_i scal v^i + 2 Ric(v,v)`, with `∂_t scal = Δscal + 2|Ric|^2`.
/// The `scal/t` term is dropped in ancient mode.
pub fn trace_harnack(pt: &SpaceTimePoint, v: &[f64]) -> f64 {
    let mut val = pt.dt_scal() + 2.0 * pt.ric.form(v, v);
    val += 2.0 * pt.dscal.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    if pt.mode == Mode::WithOneOverT {
        val += pt.scal / pt.t;
    }
    val
}

/// Eigen-decomposition of `a` relative to the metric `g`: values ascending and
/// vectors normalised to `g(u, u) = 1`, in the original coordinates.
fn generalized_eigen(a: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let chol = g.clone().cholesky().ok_or(Error::NotPositiveSemidefinite(f64::NAN))?;
    let l_inv = chol.l().try_inverse().ok_or(Error::NotPositiveSemidefinite(0.0))?;
    let b = &l_inv * a * l_inv.transpose();
    let eig = SymmetricEigen::new(0.5 * (&b + b.transpose()));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order.iter().map(|&i| l_inv.transpose() * eig.eigenvectors.column(i)).collect();
    Ok((vals, vecs))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceMinimum {
    pub min: f64,
    /// The minimiser `-½ Ric^{-1} ∇scal`.
    pub v_star: Vec<f64>,
    /// Largest `|eigenvalue|` of the Harnack matrix at `v_star` relative to `g`;
    /// zero exactly when the form vanishes for every `w`.
    pub matrix_defect: f64,
}

/// Minimum of [`trace_harnack`] over `v`; needs `Ric` positive definite.
pub fn trace_harnack_min(pt: &SpaceTimePoint) -> Result<TraceMinimum> {
    let ric = pt.ric.matrix();
    let (vals, _) = generalized_eigen(ric, pt.g.matrix())?;
    let lowest = vals[0];
    if !(lowest > 1e-12 * ric.norm()) || lowest <= 0.0 {
        return Err(Error::RicciNotPositive { point: pt.x.clone(), min_eigenvalue: lowest });
    }
    let ds = DVector::from_column_slice(&pt.dscal);
    let sol = ric.clone().cholesky().ok_or(Error::RicciNotPositive { point: pt.x.clone(), min_eigenvalue: lowest })?.solve(&ds);
    let v_star: Vec<f64> = sol.iter().map(|x| -0.5 * x).collect();
    let mut min = pt.dt_scal() - 0.5 * ds.dot(&sol);
    if pt.mode == Mode::WithOneOverT {
        min += pt.scal / pt.t;
    }
    let (avals, _) = generalized_eigen(&harnack_matrix(pt, &v_star), pt.g.matrix())?;
    let matrix_defect = avals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(TraceMinimum { min, v_star, matrix_defect })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarnackMin {
    pub min: f64,
    pub v: Vec<f64>,
    /// Minimising direction with `g(w, w) = 1`.
    pub w: Vec<f64>,
    pub mode: Mode,
}

/// `v -> M(w,w) + 2 b.v + v^T A_w v` minimised over `v`; `None` if `A_w` has a
/// negative direction, in which case the form is unbounded below.
fn v_step(pt: &SpaceTimePoint, w: &[f64]) -> Option<Vec<f64>> {
    let n = pt.n;
    let mut aw: DMatrix<f64> = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for i in 0..n {
        for l in 0..n {
            for j in 0..n {
                for k in 0..n {
                    aw[(i, l)] += pt.riem[(i, j, l, k)] * w[j] * w[k];
                }
            }
        }
        for j in 0..n {
            for k in 0..n {
                b[i] += pt.p(i, j, k) * w[j] * w[k];
            }
        }
    }
    let aw: DMatrix<f64> = 0.5 * (&aw + aw.transpose());
    let eig = SymmetricEigen::new(aw);
    // pseudo-inverse: near-null directions are left alone
    let tol = 1e-10 * pt.riem.norm() * w.iter().map(|x| x * x).sum::<f64>();
    let mut v = DVector::zeros(n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let u = eig.eigenvectors.column(k);
        if lam > tol {
            v -= u * (u.dot(&b) / lam);
        } else if lam < -tol {
            return None;
        }
    }
    Some(v.iter().copied().collect())
}

/// Best-found minimum of the Harnack form over `g(w,w) = 1` and all `v`,
/// alternating an eigen-step in `w` with the exact quadratic step in `v`.
/// The first start is `v = 0`, the others are seeded random vectors.
pub fn harnack_min(pt: &SpaceTimePoint, starts: usize, seed: u64) -> Result<HarnackMin> {
    let n = pt.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = HarnackMin { min: f64::INFINITY, v: vec![0.0; n], w: vec![0.0; n], mode: pt.mode };
    let scale = pt.scale().max(1.0);
    for start in 0..starts.max(1) {
        let mut v: Vec<f64> = if start == 0 {
            vec![0.0; n]
        } else {
            (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
        };
        let mut last = f64::INFINITY;
        for _ in 0..200 {
            let (vals, vecs) = generalized_eigen(&harnack_matrix(pt, &v), pt.g.matrix())?;
            let w: Vec<f64> = vecs[0].iter().copied().collect();
            let val = vals[0];
            if val < best.min {
                best = HarnackMin { min: val, v: v.clone(), w: w.clone(), mode: pt.mode };
            }
            if (last - val).abs() <= 1e-14 * scale {
                break;
            }
            last = val;
            match v_step(pt, &w) {
                Some(nv) => v = nv,
                None => {
                    return Ok(HarnackMin { min: f64::NEG_INFINITY, v, w, mode: pt.mode });
                }
            }
        }
    }
    Ok(best)
}
