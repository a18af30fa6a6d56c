//! Residuals of the space-time evolution identities.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::tensor::{ricci_mixed, tilde_connection, time_derivative_and_laplacian};
use super::{check_time, h_inverse, m_jets, s_jets, Mode};
use crate::acvt::{q_map, AlgCurvTensor, ContractionMetric, Sym2};
use crate::error::{Error, Result};
use crate::geometries::{CurvatureJets, GeometryProvider};
use crate::jet::Jet;

/// Grid-based providers resolve the `1/t` coefficients only away from `t = 0`.
fn check_time_floor(provider: &dyn GeometryProvider, t: f64) -> Result<()> {
    if let Some(dt) = provider.capabilities().time_step {
        if t < 5.0 * dt * (1.0 - 1e-9) {
            return Err(Error::StencilRoom(format!("t={t} is below the floor 5*dt={}", 5.0 * dt)));
        }
    }
    Ok(())
}

fn trim(j: &Jet, xdeg: usize, tdeg: usize) -> Jet {
    let s = j.shape();
    j.project(xdeg.min(s.xdeg()), tdeg.min(s.tdeg()))
}

fn trim_all(js: &[Jet], xdeg: usize, tdeg: usize) -> Vec<Jet> {
    js.iter().map(|j| trim(j, xdeg, tdeg)).collect()
}

/// `D̃_τ S - Δ̃S - (2/t) S - Q̃(S)` at one point.
#[derive(Clone, Debug)]
pub struct EvolutionResidual {
    pub residual: AlgCurvTensor,
    /// Frobenius norm of the residual.
    pub norm: f64,
    /// `|Q̃(S)|`, the size of the reaction term.
    pub reaction_norm: f64,
}

impl EvolutionResidual {
    /// `norm / |Q̃(S)|`, or the plain norm when `Q̃(S)` vanishes.
    pub fn relative(&self) -> f64 {
        if self.reaction_norm > 0.0 {
            self.norm / self.reaction_norm
        } else {
            self.norm
        }
    }
}

/// Residual of the evolution equation of `S` under `D̃`, from metric jets of degree `(6, 1)`.
pub fn evolution_residual(provider: &dyn GeometryProvider, x: &[f64], t: f64, mode: Mode) -> Result<EvolutionResidual> {
    check_time(t, mode)?;
    check_time_floor(provider, t)?;
    let cj = provider.curvature(x, t, 6, 1)?;
    let n = cj.n;
    let nn = n + 1;
    let s = trim_all(&s_jets(&cj, mode)?, 2, 1);
    let gt = trim_all(&tilde_connection(&cj, mode), 1, 0);
    let (dtau, lap) = time_derivative_and_laplacian(&s, 4, &cj, &gt);
    let s_vals: Vec<f64> = s.iter().map(Jet::value).collect();
    let s_t = AlgCurvTensor::from_components(nn, s_vals)?;
    let g_inv = DMatrix::from_fn(n, n, |i, j| cj.g_inv[i * n + j].value());
    let q = q_map(&s_t, &ContractionMetric::spatial(&g_inv)?)?;
    let reaction = if mode == Mode::WithOneOverT { 2.0 / t } else { 0.0 };
    let comps: Vec<f64> = (0..s.len())
        .map(|k| dtau[k] - lap[k] - reaction * s_t.components()[k] - q.components()[k])
        .collect();
    let residual = AlgCurvTensor::from_components(nn, comps)?;
    Ok(EvolutionResidual { norm: residual.norm(), reaction_norm: q.norm(), residual })
}

/// `M_ij + D^m P_imj - Ric^{lm} R_iljm - Ric_ij/(2t)`.
#[derive(Clone, Debug)]
pub struct HamiltonResidual {
    pub residual: DMatrix<f64>,
    pub norm: f64,
    /// Frobenius norm of `M`.
    pub m_norm: f64,
}

impl HamiltonResidual {
    pub fn relative(&self) -> f64 {
        if self.m_norm > 0.0 {
            self.norm / self.m_norm
        } else {
            self.norm
        }
    }
}

pub fn hamilton_identity_residual(
    provider: &dyn GeometryProvider,
    x: &[f64],
    t: f64,
    mode: Mode,
) -> Result<HamiltonResidual> {
    check_time(t, mode)?;
    let cj = provider.curvature(x, t, 4, 0)?;
    hamilton_from_jets(&cj, mode)
}

fn hamilton_from_jets(cj: &CurvatureJets, mode: Mode) -> Result<HamiltonResidual> {
    let n = cj.n;
    let m = m_jets(cj, mode)?;
    let ddric = cj.ddric.as_ref().ok_or(Error::DerivativeOrder { xdeg: 4, tdeg: 0 })?;
    let mixed = ricci_mixed(cj);
    let gv = |i: usize, j: usize| cj.g_inv[i * n + j].value();
    // Ric^{lm}
    let up = DMatrix::from_fn(n, n, |l, mm| (0..n).map(|a| gv(l, a) * mixed[a * n + mm].value()).sum::<f64>());
    let dd = |q: usize, p: usize, j: usize, k: usize| ddric[((q * n + p) * n + j) * n + k].value();
    let riem = |i: usize, j: usize, k: usize, l: usize| cj.riem[((i * n + j) * n + k) * n + l].value();
    let c = if mode == Mode::WithOneOverT { 0.5 / cj.t } else { 0.0 };
    let mut res = DMatrix::zeros(n, n);
    let mut m_mat = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mij = m[i * n + j].value();
            m_mat[(i, j)] = mij;
            let mut v = mij - c * cj.ric[i * n + j].value();
            for mm in 0..n {
                for p in 0..n {
                    // D_p P_imj = D_p D_i Ric_mj - D_p D_m Ric_ij
                    v += gv(mm, p) * (dd(p, i, mm, j) - dd(p, mm, i, j));
                }
                for l in 0..n {
                    v -= up[(l, mm)] * riem(i, l, j, mm);
                }
            }
            res[(i, j)] = v;
        }
    }
    Ok(HamiltonResidual { norm: res.norm(), m_norm: m_mat.norm(), residual: res })
}

/// Both sides of the identities for `D̃_τ h - Δ̃h - h/t` and `D̃_v h`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HCheck {
    /// `|D̃_τ h - Δ̃h - h/t|_h`.
    pub lhs_norm: f64,
    /// `2t^2 |Ric|^2 + 2t scal + n/2`.
    pub rhs_formula: f64,
    /// `|D̃_v h|_h^2`.
    pub grad_lhs: f64,
    /// `2t^2 Ric^2(v,v) + 2t Ric(v,v) + g(v,v)/2`.
    pub grad_rhs: f64,
}

fn h_norm_sq(a: &DMatrix<f64>, h_inv: &DMatrix<f64>) -> f64 {
    let b = h_inv * a;
    (&b * &b).trace()
}

/// Evaluates the `h` identities at `(x, t)` for the spatial vector `v`.
pub fn h_evolution_check(provider: &dyn GeometryProvider, x: &[f64], t: f64, v: &[f64]) -> Result<HCheck> {
    check_time(t, Mode::WithOneOverT)?;
    check_time_floor(provider, t)?;
    let n = provider.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
    }
    let cj = provider.curvature(x, t, 4, 1)?;
    let nn = n + 1;
    let shape = cj.g[0].shape().clone();
    let mut h = vec![Jet::zero(&shape); nn * nn];
    for i in 0..n {
        for j in 0..n {
            h[i * nn + j] = cj.g[i * n + j].clone();
        }
    }
    h[nn * nn - 1] = Jet::variable(&shape, n, t).powi(-2);
    let h = trim_all(&h, 2, 1);
    let gt = trim_all(&tilde_connection(&cj, Mode::WithOneOverT), 1, 0);
    let (dtau, lap) = time_derivative_and_laplacian(&h, 2, &cj, &gt);
    let l = DMatrix::from_fn(nn, nn, |a, b| {
        let k = a * nn + b;
        dtau[k] - lap[k] - h[k].value() / t
    });
    let g_inv = Sym2::symmetrize(DMatrix::from_fn(n, n, |i, j| cj.g_inv[i * n + j].value()));
    let h_inv = h_inverse(&g_inv, t);
    let lhs_norm = h_norm_sq(&l, &h_inv).sqrt();

    let mut dv = DMatrix::zeros(nn, nn);
    for (p, vp) in v.iter().enumerate() {
        let dp = super::tensor::covariant(&h, 2, n, p, &gt);
        for a in 0..nn {
            for b in 0..nn {
                dv[(a, b)] += vp * dp[a * nn + b].value();
            }
        }
    }
    let grad_lhs = h_norm_sq(&dv, &h_inv);

    let g = DMatrix::from_fn(n, n, |i, j| cj.g[i * n + j].value());
    let ric = DMatrix::from_fn(n, n, |i, j| cj.ric[i * n + j].value());
    let gi = g_inv.matrix();
    let mixed = gi * &ric;
    let ric_norm_sq = (&mixed * &mixed).trace();
    let rhs_formula = 2.0 * t * t * ric_norm_sq + 2.0 * t * cj.scal.value() + n as f64 / 2.0;
    let vv = nalgebra::DVector::from_column_slice(v);
    let ric2 = &ric * gi * &ric;
    let form = |a: &DMatrix<f64>| (vv.transpose() * a * &vv)[(0, 0)];
    let grad_rhs = 2.0 * t * t * form(&ric2) + 2.0 * t * form(&ric) + 0.5 * form(&g);
    Ok(HCheck { lhs_norm, rhs_formula, grad_lhs, grad_rhs })
}
