//! Jet-valued tensors on space-time and the connection `D̃`.
//!
//! Space-time indices run over `0..n` (space) and `n` (the time direction
//! `τ`). Tensors are flat row-major arrays over `(n+1)^rank` entries.

use super::Mode;
use crate::geometries::CurvatureJets;
use crate::jet::Jet;

/// Row-major multi-index decoding in base `base`.
pub(crate) fn digits(mut idx: usize, rank: usize, base: usize) -> Vec<usize> {
    let mut out = vec![0; rank];
    for slot in (0..rank).rev() {
        out[slot] = idx % base;
        idx /= base;
    }
    out
}

pub(crate) fn encode(ds: &[usize], base: usize) -> usize {
    ds.iter().fold(0, |acc, &d| acc * base + d)
}

/// `1/(2t)` as a jet in the time variable of `like`.
fn half_over_t(like: &Jet, n: usize, t: f64) -> Jet {
    let shape = like.shape();
    let tj = if shape.tdeg() > 0 { Jet::variable(shape, n, t) } else { Jet::constant(shape, t) };
    tj.recip().scale(0.5)
}

/// `Ric_i^j = g^{jk} Ric_ik` at index `i * n + j`.
pub(crate) fn ricci_mixed(cj: &CurvatureJets) -> Vec<Jet> {
    let n = cj.n;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Jet::zero(cj.ric[0].shape());
            for k in 0..n {
                acc.add_product(&cj.g_inv[j * n + k], &cj.ric[i * n + k], 1.0);
            }
            out.push(acc);
        }
    }
    out
}

/// Coefficients `Γ̃^c_ab` at `(c * N + a) * N + b`, `N = n + 1`:
/// `D̃_i ∂_j = Γ^k_ij ∂_k`, `D̃_i ∂_τ = D̃_τ ∂_i = -(Ric_i^j + δ_i^j/(2t)) ∂_j`,
/// `D̃_τ ∂_τ = -½ ∇scal - 3/(2t) ∂_τ`. Ancient mode drops the `1/t` terms.
pub(crate) fn tilde_connection(cj: &CurvatureJets, mode: Mode) -> Vec<Jet> {
    let n = cj.n;
    let nn = n + 1;
    let tau = n;
    let zero = Jet::zero(cj.g[0].shape());
    let mut gt = vec![zero; nn * nn * nn];
    let ix = |c: usize, a: usize, b: usize| (c * nn + a) * nn + b;
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                gt[ix(c, a, b)] = cj.gamma[(c * n + a) * n + b].clone();
            }
        }
    }
    let mixed = ricci_mixed(cj);
    let inv_2t = half_over_t(&cj.ric[0], n, cj.t);
    for i in 0..n {
        for j in 0..n {
            let mut v = -&mixed[i * n + j];
            if i == j && mode == Mode::WithOneOverT {
                v = &v - &inv_2t;
            }
            gt[ix(j, i, tau)] = v.clone();
            gt[ix(j, tau, i)] = v;
        }
    }
    let ds: Vec<Jet> = (0..n).map(|k| cj.scal.deriv(k)).collect();
    for j in 0..n {
        let mut acc = Jet::zero(ds[0].shape());
        for k in 0..n {
            acc.add_product(&cj.g_inv[j * n + k], &ds[k], -0.5);
        }
        gt[ix(j, tau, tau)] = acc;
    }
    if mode == Mode::WithOneOverT {
        gt[ix(tau, tau, tau)] = inv_2t.scale(-3.0);
    }
    gt
}

/// `(D̃_dir T)` for a covariant tensor `T` of the given rank, as jets.
/// `dir == n` differentiates in time.
pub(crate) fn covariant(tensor: &[Jet], rank: usize, n: usize, dir: usize, gt: &[Jet]) -> Vec<Jet> {
    let nn = n + 1;
    let ix = |c: usize, a: usize, b: usize| (c * nn + a) * nn + b;
    (0..tensor.len())
        .map(|idx| {
            let mut acc = tensor[idx].deriv(dir);
            let mut ds = digits(idx, rank, nn);
            for slot in 0..rank {
                let orig = ds[slot];
                for e in 0..nn {
                    let coef = &gt[ix(e, dir, orig)];
                    if coef.value() == 0.0 && coef.is_zero() {
                        continue;
                    }
                    ds[slot] = e;
                    acc.add_product(coef, &tensor[encode(&ds, nn)], -1.0);
                }
                ds[slot] = orig;
            }
            acc
        })
        .collect()
}

/// Values of `D̃_τ T` and `Δ̃ T = g^{pq} (D̃ D̃ T)_{pq}` for a covariant tensor.
pub(crate) fn time_derivative_and_laplacian(
    tensor: &[Jet],
    rank: usize,
    cj: &CurvatureJets,
    gt: &[Jet],
) -> (Vec<f64>, Vec<f64>) {
    let n = cj.n;
    let nn = n + 1;
    let dtau: Vec<f64> = covariant(tensor, rank, n, n, gt).iter().map(Jet::value).collect();
    // D̃T as a tensor of rank + 1 whose first slot is the derivative index
    let mut dt_all: Vec<Jet> = Vec::with_capacity(tensor.len() * nn);
    for q in 0..nn {
        dt_all.extend(covariant(tensor, rank, n, q, gt));
    }
    let mut lap = vec![0.0; tensor.len()];
    for p in 0..n {
        let ddt = covariant(&dt_all, rank + 1, n, p, gt);
        for q in 0..n {
            let gpq = cj.g_inv[p * n + q].value();
            if gpq == 0.0 {
                continue;
            }
            for (idx, l) in lap.iter_mut().enumerate() {
                *l += gpq * ddt[q * tensor.len() + idx].value();
            }
        }
    }
    (dtau, lap)
}
