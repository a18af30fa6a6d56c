//! The vector field `V` with `∇scal + 2 Ric(V) = 0`, soliton detection and
//! parallel transport along spatial paths for `D̃`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::tensor::tilde_connection;
use super::{check_time, Mode};
use crate::error::{Error, Result};
use crate::geometries::{CurvatureJets, GeometryProvider};
use crate::jet::{invert, Jet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolitonMode {
    /// `D V = Ric + g/(2t)`.
    Expanding,
    /// `D V = Ric`.
    Steady,
}

impl std::str::FromStr for SolitonMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<SolitonMode> {
        match s {
            "expanding" => Ok(SolitonMode::Expanding),
            "steady" => Ok(SolitonMode::Steady),
            other => Err(Error::Parse(format!("unknown soliton mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolitonReport {
    pub mode: SolitonMode,
    pub points: Vec<Vec<f64>>,
    /// `V` at each sample point.
    pub v_samples: Vec<Vec<f64>>,
    /// Largest `g`-norm of `D_i V^j - Ric_i^j - c δ_i^j` over the samples.
    pub residual_norm: f64,
    pub tol: f64,
    pub is_soliton: bool,
}

fn check_ricci_positive(cj: &CurvatureJets) -> Result<()> {
    let n = cj.n;
    let g = DMatrix::from_fn(n, n, |i, j| cj.g[i * n + j].value());
    let ric = DMatrix::from_fn(n, n, |i, j| cj.ric[i * n + j].value());
    let chol = g.cholesky().ok_or(Error::NotPositiveSemidefinite(f64::NAN))?;
    let l_inv = chol.l().try_inverse().ok_or(Error::NotPositiveSemidefinite(0.0))?;
    let b = &l_inv * &ric * l_inv.transpose();
    let lowest = SymmetricEigen::new(0.5 * (&b + b.transpose())).eigenvalues.min();
    if !(lowest > 1e-12 * ric.norm()) {
        return Err(Error::RicciNotPositive { point: cj.x.clone(), min_eigenvalue: lowest });
    }
    Ok(())
}

/// Jets of `V^j = -½ (Ric^{-1})^{jk} ∂_k scal`.
fn field_jets(cj: &CurvatureJets) -> Vec<Jet> {
    let n = cj.n;
    let ric_inv = invert(&cj.ric, n);
    let ds: Vec<Jet> = (0..n).map(|k| cj.scal.deriv(k)).collect();
    (0..n)
        .map(|j| {
            let mut acc = Jet::zero(ds[0].shape());
            for k in 0..n {
                acc.add_product(&ric_inv[j * n + k], &ds[k], -0.5);
            }
            acc
        })
        .collect()
}

/// `V` at `(x, t)`; errors unless `Ric` is positive definite there.
pub fn soliton_field(provider: &dyn GeometryProvider, x: &[f64], t: f64) -> Result<Vec<f64>> {
    let cj = provider.curvature(x, t, 3, 0)?;
    check_ricci_positive(&cj)?;
    Ok(field_jets(&cj).iter().map(Jet::value).collect())
}

/// Checks `D_i V^j = Ric_i^j + c δ_i^j` at the sample points, with
/// `c = 1/(2 t0)` for expanding and `0` for steady solitons.
pub fn soliton_detect(
    provider: &dyn GeometryProvider,
    t0: f64,
    samples: &[Vec<f64>],
    mode: SolitonMode,
    tol: f64,
) -> Result<SolitonReport> {
    if mode == SolitonMode::Expanding {
        check_time(t0, Mode::WithOneOverT)?;
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("soliton detection needs at least one sample point".into()));
    }
    let c = match mode {
        SolitonMode::Expanding => 0.5 / t0,
        SolitonMode::Steady => 0.0,
    };
    let mut v_samples = Vec::with_capacity(samples.len());
    let mut worst = 0.0f64;
    for x in samples {
        let cj = provider.curvature(x, t0, 4, 0)?;
        check_ricci_positive(&cj)?;
        let n = cj.n;
        let v = field_jets(&cj);
        let vv: Vec<f64> = v.iter().map(Jet::value).collect();
        // T_i^j = D_i V^j - Ric_i^j - c δ_i^j
        let mut tm = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut d = v[j].deriv(i).value();
                for k in 0..n {
                    d += cj.gamma[(j * n + i) * n + k].value() * vv[k];
                }
                let mut ric_mixed = 0.0;
                for k in 0..n {
                    ric_mixed += cj.g_inv[j * n + k].value() * cj.ric[i * n + k].value();
                }
                tm[(i, j)] = d - ric_mixed - if i == j { c } else { 0.0 };
            }
        }
        let g = DMatrix::from_fn(n, n, |i, j| cj.g[i * n + j].value());
        let g_inv = DMatrix::from_fn(n, n, |i, j| cj.g_inv[i * n + j].value());
        // |T|^2 = g^{ia} g_{jb} T_i^j T_a^b
        let norm = (&g_inv * &tm * &g * tm.transpose()).trace().max(0.0).sqrt();
        worst = worst.max(norm);
        v_samples.push(vv);
    }
    Ok(SolitonReport {
        mode,
        points: samples.to_vec(),
        v_samples,
        residual_norm: worst,
        tol,
        is_soliton: worst <= tol,
    })
}

/// Space-time vectors along a polyline, one per RK4 substep boundary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransportTrace {
    pub points: Vec<Vec<f64>>,
    pub vectors: Vec<Vec<f64>>,
}

fn connection_at(provider: &dyn GeometryProvider, x: &[f64], t0: f64, mode: Mode) -> Result<Vec<f64>> {
    let cj = provider.curvature(x, t0, 3, 0)?;
    Ok(tilde_connection(&cj, mode).iter().map(Jet::value).collect())
}

/// `dṽ^c/ds = -Γ̃^c_ab γ'^a ṽ^b` for a spatial velocity `γ'`.
fn transport_rhs(gt: &[f64], n: usize, vel: &[f64], v: &[f64]) -> Vec<f64> {
    let nn = n + 1;
    (0..nn)
        .map(|c| {
            let mut s = 0.0;
            for (a, va) in vel.iter().enumerate() {
                for b in 0..nn {
                    s -= gt[(c * nn + a) * nn + b] * va * v[b];
                }
            }
            s
        })
        .collect()
}

/// Transports the space-time vector `v0` (last component along `∂τ`) along the
/// polyline `path` at the fixed time `t0` with `substeps` RK4 steps per segment.
pub fn parallel_transport_trace(
    provider: &dyn GeometryProvider,
    t0: f64,
    path: &[Vec<f64>],
    v0: &[f64],
    mode: Mode,
    substeps: usize,
) -> Result<TransportTrace> {
    check_time(t0, mode)?;
    let n = provider.dim();
    if v0.len() != n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, got: v0.len() });
    }
    if path.is_empty() {
        return Err(Error::InvalidArgument("transport path is empty".into()));
    }
    if let Some(p) = path.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: p.len() });
    }
    let substeps = substeps.max(1);
    let h = 1.0 / substeps as f64;
    let mut v = v0.to_vec();
    let mut trace = TransportTrace { points: vec![path[0].clone()], vectors: vec![v.clone()] };
    for seg in path.windows(2) {
        let (p0, p1) = (&seg[0], &seg[1]);
        let vel: Vec<f64> = p1.iter().zip(p0).map(|(a, b)| a - b).collect();
        let at = |s: f64| -> Vec<f64> { p0.iter().zip(&vel).map(|(p, d)| p + s * d).collect() };
        let axpy = |v: &[f64], k: &[f64], s: f64| -> Vec<f64> { v.iter().zip(k).map(|(a, b)| a + s * b).collect() };
        for step in 0..substeps {
            let s = step as f64 * h;
            let g0 = connection_at(provider, &at(s), t0, mode)?;
            let gm = connection_at(provider, &at(s + 0.5 * h), t0, mode)?;
            let g1 = connection_at(provider, &at(s + h), t0, mode)?;
            let k1 = transport_rhs(&g0, n, &vel, &v);
            let k2 = transport_rhs(&gm, n, &vel, &axpy(&v, &k1, 0.5 * h));
            let k3 = transport_rhs(&gm, n, &vel, &axpy(&v, &k2, 0.5 * h));
            let k4 = transport_rhs(&g1, n, &vel, &axpy(&v, &k3, h));
            for c in 0..=n {
                v[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            trace.points.push(at(s + h));
            trace.vectors.push(v.clone());
        }
    }
    Ok(trace)
}

/// The transported vector at the end of `path` (200 RK4 substeps per segment).
pub fn parallel_transport(
    provider: &dyn GeometryProvider,
    t0: f64,
    path: &[Vec<f64>],
    v0: &[f64],
    mode: Mode,
) -> Result<Vec<f64>> {
    let trace = parallel_transport_trace(provider, t0, path, v0, mode, 200)?;
    Ok(trace.vectors.last().cloned().unwrap_or_else(|| v0.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::super::{compute_point, trace_harnack};
    use super::*;
    use crate::geometries::{cigar_flow, flat_flow, sphere_flow};

    #[test]
    fn cigar_is_steady_soliton() {
        let c = cigar_flow();
        let samples = vec![vec![0.3, -0.4], vec![1.1, 0.2], vec![-0.7, -0.9]];
        let r = soliton_detect(&c, 0.0, &samples, SolitonMode::Steady, 1e-6).unwrap();
        assert!(r.is_soliton, "{}", r.residual_norm);
        for (x, v) in samples.iter().zip(&r.v_samples) {
            assert!((v[0] - 2.0 * x[0]).abs() < 1e-10 && (v[1] - 2.0 * x[1]).abs() < 1e-10);
        }
        let e = soliton_detect(&c, 0.5, &samples, SolitonMode::Expanding, 1e-6).unwrap();
        assert!(!e.is_soliton);
    }

    #[test]
    fn sphere_is_not_expanding_soliton() {
        let s = sphere_flow(3, 1.0).unwrap();
        let t = 0.1;
        let kappa = 1.0 / (1.0 - 4.0 * t);
        let r = soliton_detect(&s, t, &[vec![0.1, 0.2, -0.3]], SolitonMode::Expanding, 1e-6).unwrap();
        let expect = (2.0 * kappa + 0.5 / t) * 3f64.sqrt();
        assert!(!r.is_soliton);
        assert!((r.residual_norm - expect).abs() < 1e-9 * expect, "{} {expect}", r.residual_norm);
    }

    #[test]
    fn flat_has_no_soliton_field() {
        let f = flat_flow(2).unwrap();
        let r = soliton_detect(&f, 1.0, &[vec![0.0, 0.0]], SolitonMode::Steady, 1e-6);
        assert!(matches!(r, Err(Error::RicciNotPositive { .. })));
    }

    #[test]
    fn flat_transport() {
        let f = flat_flow(2).unwrap();
        let path = vec![vec![0.0, 0.0], vec![0.6, 0.8]];
        let out = parallel_transport(&f, 0.5, &path, &[0.3, -0.2, 0.0], Mode::WithOneOverT).unwrap();
        assert!((out[0] - 0.3).abs() < 1e-14 && (out[1] + 0.2).abs() < 1e-14 && out[2] == 0.0);
        let out = parallel_transport(&f, 0.5, &path, &[0.0, 0.0, 1.0], Mode::WithOneOverT).unwrap();
        assert!((out[0] - 0.6).abs() < 1e-12 && (out[1] - 0.8).abs() < 1e-12 && out[2] == 1.0, "{out:?}");
    }

    #[test]
    fn cigar_transport_stays_on_equality_set() {
        let c = cigar_flow();
        let path = vec![vec![0.2, 0.1], vec![0.9, -0.4], vec![0.5, 0.7]];
        let mut v0 = c.soliton_field(&path[0]);
        v0.push(1.0);
        let trace = parallel_transport_trace(&c, 0.3, &path, &v0, Mode::Ancient, 200).unwrap();
        for (x, v) in trace.points.iter().zip(&trace.vectors).step_by(50) {
            let pt = compute_point(&c, x, 0.3, Mode::Ancient).unwrap();
            let val = trace_harnack(&pt, &v[..2]);
            assert!(val.abs() < 1e-6, "{x:?} {val}");
        }
    }
}
