//! Curvature of a coordinate metric given as a matrix of jets.
//!
//! Conventions: `R(X,Y)Z = D_X D_Y Z - D_Y D_X Z - D_[X,Y] Z`,
//! `R_ijkl = g(R(∂_i, ∂_j) ∂_l, ∂_k)` so that sectional curvatures are
//! `R_ijij / (g_ii g_jj - g_ij^2)`, and `Ric_jl = g^{ik} R_ijkl`.

use crate::error::{Error, Result};
use crate::jet::{invert, Jet};

/// Metric, connection and curvature as jets at a base point `(x, t)`.
///
/// Every stored jet keeps as many derivatives as the metric jet allows:
/// with spatial degree `X` on `g`, `Γ` keeps `X - 1`, `R` and `Ric` keep
/// `X - 2`, `D Ric` keeps `X - 3` and `D D Ric` keeps `X - 4`.
#[derive(Clone, Debug)]
pub struct CurvatureJets {
    pub n: usize,
    pub x: Vec<f64>,
    pub t: f64,
    /// `g_ij`, row-major.
    pub g: Vec<Jet>,
    pub g_inv: Vec<Jet>,
    /// `Γ^k_ij` at index `(k * n + i) * n + j`.
    pub gamma: Vec<Jet>,
    /// `R_ijkl`, row-major in `(i, j, k, l)`.
    pub riem: Vec<Jet>,
    pub ric: Vec<Jet>,
    pub scal: Jet,
    /// `D_p Ric_jk` at `(p * n + j) * n + k`; present when the metric has spatial degree >= 3.
    pub dric: Option<Vec<Jet>>,
    /// `D_q D_p Ric_jk` at `((q * n + p) * n + j) * n + k`; spatial degree >= 4.
    pub ddric: Option<Vec<Jet>>,
    /// `D_q D_p scal`; spatial degree >= 4.
    pub ddscal: Option<Vec<Jet>>,
}

impl CurvatureJets {
    /// Runs the pipeline on the metric jets `g` (row-major `n x n`).
    pub fn from_metric(g: Vec<Jet>, n: usize, x: &[f64], t: f64) -> Result<CurvatureJets> {
        if g.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: g.len() });
        }
        let xdeg = g[0].shape().xdeg();
        if xdeg < 2 {
            return Err(Error::DerivativeOrder { xdeg, tdeg: g[0].shape().tdeg() });
        }
        let g_inv = invert(&g, n);
        let ix2 = |i: usize, j: usize| i * n + j;
        let ix3 = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
        let ix4 = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;

        // dg[k][i][j] = ∂_k g_ij
        let dg: Vec<Jet> = (0..n * n * n).map(|id| g[id % (n * n)].deriv(id / (n * n))).collect();
        let shape1 = dg[0].shape().clone();
        let mut gamma = vec![Jet::zero(&shape1); n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut acc = Jet::zero(&shape1);
                    for l in 0..n {
                        let first = &(&dg[ix3(i, j, l)] + &dg[ix3(j, i, l)]) - &dg[ix3(l, i, j)];
                        acc.add_product(&g_inv[ix2(k, l)], &first, 0.5);
                    }
                    gamma[ix3(k, j, i)] = acc.clone();
                    gamma[ix3(k, i, j)] = acc;
                }
            }
        }

        // R^l_ijk = ∂_i Γ^l_jk - ∂_j Γ^l_ik + Γ^l_im Γ^m_jk - Γ^l_jm Γ^m_ik, stored at (l, i, j, k)
        let dgamma: Vec<Jet> = (0..n.pow(4)).map(|id| gamma[id % n.pow(3)].deriv(id / n.pow(3))).collect();
        // dgamma[(p, l, i, j)] = ∂_p Γ^l_ij
        let shape2 = dgamma[0].shape().clone();
        let mut rup = vec![Jet::zero(&shape2); n.pow(4)];
        for l in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    for k in 0..n {
                        let mut acc = &dgamma[ix4(i, l, j, k)] - &dgamma[ix4(j, l, i, k)];
                        for m in 0..n {
                            acc.add_product(&gamma[ix3(l, i, m)], &gamma[ix3(m, j, k)], 1.0);
                            acc.add_product(&gamma[ix3(l, j, m)], &gamma[ix3(m, i, k)], -1.0);
                        }
                        rup[ix4(l, j, i, k)] = -&acc;
                        rup[ix4(l, i, j, k)] = acc;
                    }
                }
            }
        }
        // R_ijkl = g_km R^m_ijl
        let mut riem = vec![Jet::zero(&shape2); n.pow(4)];
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = Jet::zero(&shape2);
                        for m in 0..n {
                            acc.add_product(&g[ix2(k, m)], &rup[ix4(m, i, j, l)], 1.0);
                        }
                        riem[ix4(j, i, k, l)] = -&acc;
                        riem[ix4(i, j, k, l)] = acc;
                    }
                }
            }
        }
        let mut ric = vec![Jet::zero(&shape2); n * n];
        for j in 0..n {
            for l in j..n {
                let mut acc = Jet::zero(&shape2);
                for i in 0..n {
                    for k in 0..n {
                        acc.add_product(&g_inv[ix2(i, k)], &riem[ix4(i, j, k, l)], 1.0);
                    }
                }
                ric[ix2(l, j)] = acc.clone();
                ric[ix2(j, l)] = acc;
            }
        }
        let mut scal = Jet::zero(&shape2);
        for j in 0..n {
            for l in 0..n {
                scal.add_product(&g_inv[ix2(j, l)], &ric[ix2(j, l)], 1.0);
            }
        }

        let mut out = CurvatureJets {
            n,
            x: x.to_vec(),
            t,
            g,
            g_inv,
            gamma,
            riem,
            ric,
            scal,
            dric: None,
            ddric: None,
            ddscal: None,
        };
        if xdeg >= 3 {
            out.dric = Some(out.covariant_2(&out.ric));
        }
        if xdeg >= 4 {
            out.ddric = Some(out.covariant_3(out.dric.as_ref().expect("set above")));
            let ds: Vec<Jet> = (0..n).map(|p| out.scal.deriv(p)).collect();
            let mut dd = Vec::with_capacity(n * n);
            for q in 0..n {
                for p in 0..n {
                    let mut acc = ds[p].deriv(q);
                    for m in 0..n {
                        acc.add_product(&out.gamma[ix3(m, q, p)], &ds[m], -1.0);
                    }
                    dd.push(acc);
                }
            }
            out.ddscal = Some(dd);
        }
        Ok(out)
    }

    fn ix2(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    fn ix3(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.n + b) * self.n + c
    }

    /// `D_p T_jk` for a `(0,2)` tensor.
    fn covariant_2(&self, tt: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n * n);
        for p in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut acc = tt[self.ix2(j, k)].deriv(p);
                    for m in 0..n {
                        acc.add_product(&self.gamma[self.ix3(m, p, j)], &tt[self.ix2(m, k)], -1.0);
                        acc.add_product(&self.gamma[self.ix3(m, p, k)], &tt[self.ix2(j, m)], -1.0);
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    /// `D_q T_pjk` for a `(0,3)` tensor.
    fn covariant_3(&self, tt: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let mut out = Vec::with_capacity(n.pow(4));
        for q in 0..n {
            for p in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = tt[self.ix3(p, j, k)].deriv(q);
                        for m in 0..n {
                            acc.add_product(&self.gamma[self.ix3(m, q, p)], &tt[self.ix3(m, j, k)], -1.0);
                            acc.add_product(&self.gamma[self.ix3(m, q, j)], &tt[self.ix3(p, m, k)], -1.0);
                            acc.add_product(&self.gamma[self.ix3(m, q, k)], &tt[self.ix3(p, j, m)], -1.0);
                        }
                        out.push(acc);
                    }
                }
            }
        }
        out
    }

    /// Values of a row-major jet array.
    pub fn values(jets: &[Jet]) -> Vec<f64> {
        jets.iter().map(Jet::value).collect()
    }
}
