//! Space-time quantities of a Ricci flow: the tensors `P`, `M`, the
//! curvature tensor `S` on `M x (0, T)`, the connection `D̃`, the metric `h`,
//! residual checks of the evolution identities, Harnack forms and solitons.
//!
//! Index convention: spatial indices `0..n`, the time direction `τ` is `n`.
//! Indices are raised with the spatial `g^{-1}` only; `h` is used for norms.

mod harnack;
mod residuals;
mod soliton;
pub(crate) mod tensor;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::acvt::{validate_acvt, AlgCurvTensor, Sym2};
use crate::error::{Error, Result};
use crate::geometries::{CurvatureJets, GeometryProvider};
use crate::jet::Jet;

pub use harnack::{
    harnack_form, harnack_matrix, harnack_min, trace_harnack, trace_harnack_min, HarnackMin, HarnackReport,
    TraceMinimum,
};
pub use residuals::{
    evolution_residual, h_evolution_check, hamilton_identity_residual, EvolutionResidual, HCheck,
    HamiltonResidual,
};
pub use soliton::{
    parallel_transport, parallel_transport_trace, soliton_detect, soliton_field, SolitonMode, SolitonReport,
    TransportTrace,
};

/// Whether the `1/t` terms are kept (`WithOneOverT`) or dropped (`Ancient`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    WithOneOverT,
    Ancient,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "with_1_over_t" | "with-1-over-t" => Ok(Mode::WithOneOverT),
            "ancient" => Ok(Mode::Ancient),
            other => Err(Error::Parse(format!("unknown mode `{other}`"))),
        }
    }
}

/// Pointwise space-time data at `(x, t)`.
#[derive(Clone, Debug)]
pub struct SpaceTimePoint {
    pub x: Vec<f64>,
    pub t: f64,
    pub mode: Mode,
    pub n: usize,
    pub g: Sym2,
    pub g_inv: Sym2,
    pub ric: Sym2,
    pub scal: f64,
    pub dscal: Vec<f64>,
    pub lap_scal: f64,
    pub riem: AlgCurvTensor,
    /// `P_ijk` at `(i * n + j) * n + k`.
    pub p: Vec<f64>,
    pub m: Sym2,
    /// `Γ^k_ij` at `(k * n + i) * n + j`.
    pub gamma: Vec<f64>,
    /// `Γ̃^c_ab` at `(c * N + a) * N + b`, `N = n + 1`.
    pub gamma_tilde: Vec<f64>,
    pub h: Sym2,
}

impl SpaceTimePoint {
    pub fn p(&self, i: usize, j: usize, k: usize) -> f64 {
        self.p[(i * self.n + j) * self.n + k]
    }

    pub fn gamma_tilde(&self, c: usize, a: usize, b: usize) -> f64 {
        let nn = self.n + 1;
        self.gamma_tilde[(c * nn + a) * nn + b]
    }

    /// `Ric_i^k Ric_kj`.
    pub fn ric_squared(&self) -> DMatrix<f64> {
        self.ric.matrix() * self.g_inv.matrix() * self.ric.matrix()
    }

    /// `|Ric|^2 = g^{ia} g^{jb} Ric_ij Ric_ab`.
    pub fn ric_norm_squared(&self) -> f64 {
        let a = self.g_inv.matrix() * self.ric.matrix();
        (&a * &a).trace()
    }

    /// `∂_t scal = Δscal + 2|Ric|^2`.
    pub fn dt_scal(&self) -> f64 {
        self.lap_scal + 2.0 * self.ric_norm_squared()
    }

    /// Magnitude used to make tolerances relative: `|R| + |P| + |M|` (Frobenius).
    pub fn scale(&self) -> f64 {
        let p = self.p.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.riem.norm() + p + self.m.matrix().norm()
    }

    /// `max |P_ijk + P_jik|`.
    pub fn p_antisymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((self.p(i, j, k) + self.p(j, i, k)).abs());
                }
            }
        }
        worst
    }

    /// `|h|_h` with `h^{-1} = diag(g^{-1}, t^2)`; equals `sqrt(n + 1)`.
    pub fn h_self_norm(&self) -> f64 {
        let h_inv = h_inverse(&self.g_inv, self.t);
        let a = &h_inv * self.h.matrix();
        (&a * &a).trace().sqrt()
    }
}

pub(crate) fn h_inverse(g_inv: &Sym2, t: f64) -> DMatrix<f64> {
    let n = g_inv.dim();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(g_inv.matrix());
    m[(n, n)] = t * t;
    m
}

fn check_time(t: f64, mode: Mode) -> Result<()> {
    if mode == Mode::WithOneOverT && !(t > 0.0) {
        return Err(Error::OutOfDomain(format!("the 1/t terms need t > 0, got t={t}")));
    }
    Ok(())
}

/// Jets of `P_ijk = D_i Ric_jk - D_j Ric_ik` at `(i * n + j) * n + k`.
pub(crate) fn p_jets(cj: &CurvatureJets) -> Result<Vec<Jet>> {
    let n = cj.n;
    let dric = cj.dric.as_ref().ok_or(Error::DerivativeOrder { xdeg: 3, tdeg: 0 })?;
    let mut out = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push(&dric[(i * n + j) * n + k] - &dric[(j * n + i) * n + k]);
            }
        }
    }
    Ok(out)
}

/// `Ric^{kl} = g^{ka} Ric_ab g^{bl}`.
fn ric_upper(cj: &CurvatureJets) -> Vec<Jet> {
    let n = cj.n;
    let mixed = tensor::ricci_mixed(cj); // Ric_a^l at a * n + l
    let mut out = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let mut acc = Jet::zero(mixed[0].shape());
            for a in 0..n {
                acc.add_product(&cj.g_inv[k * n + a], &mixed[a * n + l], 1.0);
            }
            out.push(acc);
        }
    }
    out
}

/// Jets of `M_ij = ΔRic_ij - ½ D_iD_j scal + 2 R_ikjl Ric^{kl} - Ric_i^k Ric_jk + Ric_ij/(2t)`.
pub(crate) fn m_jets(cj: &CurvatureJets, mode: Mode) -> Result<Vec<Jet>> {
    let n = cj.n;
    let missing = || Error::DerivativeOrder { xdeg: 4, tdeg: 0 };
    let ddric = cj.ddric.as_ref().ok_or_else(missing)?;
    let ddscal = cj.ddscal.as_ref().ok_or_else(missing)?;
    let up = ric_upper(cj);
    let mixed = tensor::ricci_mixed(cj);
    let shape = ddric[0].shape().clone();
    let inv_2t = if mode == Mode::WithOneOverT {
        let tj = if shape.tdeg() > 0 { Jet::variable(&shape, n, cj.t) } else { Jet::constant(&shape, cj.t) };
        Some(tj.recip().scale(0.5))
    } else {
        None
    };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = ddscal[i * n + j].scale(-0.5);
            for p in 0..n {
                for q in 0..n {
                    acc.add_product(&cj.g_inv[p * n + q], &ddric[((p * n + q) * n + i) * n + j], 1.0);
                }
            }
            for k in 0..n {
                for l in 0..n {
                    acc.add_product(&cj.riem[((i * n + k) * n + j) * n + l], &up[k * n + l], 2.0);
                }
                acc.add_product(&mixed[i * n + k], &cj.ric[j * n + k], -1.0);
            }
            if let Some(c) = &inv_2t {
                acc.add_product(c, &cj.ric[i * n + j], 1.0);
            }
            out.push(acc);
        }
    }
    Ok(out)
}

/// Places `R`, `P`, `M` into an `(n+1)^4` array with the space-time sign pattern.
pub(crate) fn place_s<T: Clone>(n: usize, zero: T, riem: &[T], p: &[T], m: &[T], neg: impl Fn(&T) -> T) -> Vec<T> {
    let nn = n + 1;
    let tau = n;
    let ix = |a: usize, b: usize, c: usize, d: usize| ((a * nn + b) * nn + c) * nn + d;
    let mut s = vec![zero; nn * nn * nn * nn];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    s[ix(i, j, k, l)] = riem[((i * n + j) * n + k) * n + l].clone();
                }
                let pv = &p[(i * n + j) * n + k];
                s[ix(i, j, tau, k)] = pv.clone();
                s[ix(i, j, k, tau)] = neg(pv);
                s[ix(tau, k, i, j)] = pv.clone();
                s[ix(k, tau, i, j)] = neg(pv);
            }
            let mv = &m[i * n + j];
            s[ix(i, tau, j, tau)] = mv.clone();
            s[ix(i, tau, tau, j)] = neg(mv);
            s[ix(tau, i, j, tau)] = neg(mv);
            s[ix(tau, i, tau, j)] = mv.clone();
        }
    }
    s
}

/// Jets of the space-time tensor `S`.
pub(crate) fn s_jets(cj: &CurvatureJets, mode: Mode) -> Result<Vec<Jet>> {
    let p = p_jets(cj)?;
    let m = m_jets(cj, mode)?;
    let zero = Jet::zero(cj.riem[0].shape());
    Ok(place_s(cj.n, zero, &cj.riem, &p, &m, |j: &Jet| -j))
}

fn values(js: &[Jet]) -> Vec<f64> {
    js.iter().map(Jet::value).collect()
}

fn sym_from(vals: &[f64], n: usize) -> Sym2 {
    Sym2::symmetrize(DMatrix::from_row_slice(n, n, vals))
}

/// Evaluates all space-time data at `(x, t)` from curvature jets of spatial degree 4.
pub fn compute_point(provider: &dyn GeometryProvider, x: &[f64], t: f64, mode: Mode) -> Result<SpaceTimePoint> {
    check_time(t, mode)?;
    let cj = provider.curvature(x, t, 4, 0)?;
    point_from_jets(&cj, mode)
}

pub(crate) fn point_from_jets(cj: &CurvatureJets, mode: Mode) -> Result<SpaceTimePoint> {
    let n = cj.n;
    let t = cj.t;
    let g = sym_from(&values(&cj.g), n);
    let g_inv = sym_from(&values(&cj.g_inv), n);
    let ric = sym_from(&values(&cj.ric), n);
    let riem = AlgCurvTensor::from_components(n, values(&cj.riem))?;
    let dscal: Vec<f64> = (0..n).map(|k| cj.scal.deriv(k).value()).collect();
    let ddscal = cj.ddscal.as_ref().ok_or(Error::DerivativeOrder { xdeg: 4, tdeg: 0 })?;
    let mut lap_scal = 0.0;
    for p in 0..n {
        for q in 0..n {
            lap_scal += cj.g_inv[p * n + q].value() * ddscal[p * n + q].value();
        }
    }
    let p = values(&p_jets(cj)?);
    let m = sym_from(&values(&m_jets(cj, mode)?), n);
    let gamma = values(&cj.gamma);
    let gamma_tilde = values(&tensor::tilde_connection(cj, mode));
    let mut hm = DMatrix::zeros(n + 1, n + 1);
    hm.view_mut((0, 0), (n, n)).copy_from(g.matrix());
    hm[(n, n)] = 1.0 / (t * t);
    Ok(SpaceTimePoint {
        x: cj.x.clone(),
        t,
        mode,
        n,
        g,
        g_inv,
        ric,
        scal: cj.scal.value(),
        dscal,
        lap_scal,
        riem,
        p,
        m,
        gamma,
        gamma_tilde,
        h: Sym2::symmetrize(hm),
    })
}

/// The space-time curvature tensor `S` of dimension `n + 1`, validated.
pub fn assemble_spacetime_s(pt: &SpaceTimePoint) -> Result<AlgCurvTensor> {
    let n = pt.n;
    let m: Vec<f64> = pt.m.matrix().transpose().iter().copied().collect();
    let comps = place_s(n, 0.0, pt.riem.components(), &pt.p, &m, |v: &f64| -v);
    let s = AlgCurvTensor::from_components(n + 1, comps)?;
    let tol = 1e-8 * s.norm().max(1.0);
    let report = validate_acvt(&s, tol);
    if !report.is_valid() {
        return Err(Error::InvalidTensor(format!(
            "space-time tensor fails validation: {:?} (max residual {:e})",
            report.violations,
            report.max_residual()
        )));
    }
    Ok(s)
}

/// One row of a scan: point, time, quantity name, value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanRow {
    pub x: Vec<f64>,
    pub t: f64,
    pub quantity: String,
    pub value: f64,
}

/// CSV with columns `x0,..,x{n-1},t,quantity,value`.
pub fn scan_csv(rows: &[ScanRow]) -> String {
    let n = rows.first().map_or(0, |r| r.x.len());
    let mut out = String::new();
    for i in 0..n {
        let _ = write!(out, "x{i},");
    }
    out.push_str("t,quantity,value\n");
    for r in rows {
        for v in &r.x {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{},{},{}", r.t, r.quantity, r.value);
    }
    out
}

/// CSV with columns `h_grid,residual_norm,rate`; the rate of row `k` is
/// `log(r_{k-1}/r_k) / log(h_{k-1}/h_k)` and is blank on the first row.
pub fn residual_study_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("h_grid,residual_norm,rate\n");
    for (k, (h, r)) in rows.iter().enumerate() {
        let rate = if k == 0 {
            String::new()
        } else {
            let (h0, r0) = rows[k - 1];
            ((r0 / r).ln() / (h0 / h).ln()).to_string()
        };
        let _ = writeln!(out, "{h},{r},{rate}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometries::{cigar_flow, flat_flow, sphere_flow};

    #[test]
    fn flat_point_is_zero() {
        let f = flat_flow(3).unwrap();
        let pt = compute_point(&f, &[0.1, 0.2, 0.3], 0.5, Mode::WithOneOverT).unwrap();
        assert!(pt.p.iter().all(|v| *v == 0.0));
        assert_eq!(pt.m.matrix().norm(), 0.0);
        assert_eq!(assemble_spacetime_s(&pt).unwrap().max_abs(), 0.0);
        assert!((pt.h_self_norm() - 2.0).abs() < 1e-14);
        assert!((pt.gamma_tilde(0, 0, 3) + 1.0).abs() < 1e-14);
        assert!((pt.gamma_tilde(3, 3, 3) + 3.0).abs() < 1e-14);
        assert!(compute_point(&f, &[0.0; 3], 0.0, Mode::WithOneOverT).is_err());
        assert!(compute_point(&f, &[0.0; 3], 0.0, Mode::Ancient).is_ok());
    }

    #[test]
    fn sphere_m_closed_form() {
        let s = sphere_flow(3, 1.0).unwrap();
        let t = 0.1;
        let kappa = 1.0 / (1.0 - 4.0 * t);
        let pt = compute_point(&s, &[0.2, -0.1, 0.4], t, Mode::WithOneOverT).unwrap();
        let expect = pt.g.matrix() * (4.0 * kappa * kappa + kappa / t);
        assert!((pt.m.matrix() - &expect).norm() < 1e-9 * expect.norm(), "{}", pt.m.matrix());
        assert!(pt.p.iter().all(|v| v.abs() < 1e-10));
        assert!((pt.dt_scal() - 24.0 * kappa * kappa).abs() < 1e-9);
        let anc = compute_point(&s, &[0.2, -0.1, 0.4], t, Mode::Ancient).unwrap();
        let expect = pt.g.matrix() * (4.0 * kappa * kappa);
        assert!((anc.m.matrix() - &expect).norm() < 1e-9 * expect.norm());
    }

    #[test]
    fn spacetime_tensor_slots() {
        let c = cigar_flow();
        let pt = compute_point(&c, &[0.3, -0.6], 0.2, Mode::Ancient).unwrap();
        let s = assemble_spacetime_s(&pt).unwrap();
        let tau = 2;
        assert_eq!(s[(0, 1, 0, 1)], pt.riem[(0, 1, 0, 1)]);
        assert_eq!(s[(0, 1, tau, 1)], pt.p(0, 1, 1));
        assert_eq!(s[(1, 0, 0, tau)], -pt.p(1, 0, 0));
        assert_eq!(s[(0, tau, 1, tau)], pt.m.get(0, 1));
        assert_eq!(s[(tau, 0, 1, tau)], -pt.m.get(0, 1));
        assert!(pt.p_antisymmetry() < 1e-12);
        assert!(pt.p.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn csv_formats() {
        let rows = vec![ScanRow { x: vec![0.0, 1.0], t: 0.5, quantity: "trace".into(), value: 2.0 }];
        let csv = scan_csv(&rows);
        assert_eq!(csv.lines().next().unwrap(), "x0,x1,t,quantity,value");
        assert_eq!(csv.lines().nth(1).unwrap(), "0,1,0.5,trace,2");
        let study = residual_study_csv(&[(0.1, 4.0), (0.05, 1.0)]);
        let last: Vec<&str> = study.lines().last().unwrap().split(',').collect();
        assert!((last[2].parse::<f64>().unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(study.lines().nth(1).unwrap(), "0.1,4,");
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("ancient".parse::<Mode>().unwrap(), Mode::Ancient);
        assert!("sideways".parse::<Mode>().is_err());
    }
}
