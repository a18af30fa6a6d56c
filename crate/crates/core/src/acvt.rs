//! Dense algebraic curvature tensors on `R^d`.
//!
//! Components are stored as a full `d^4` array indexed `(i, j, k, l)`. The
//! curvature symmetries are validated rather than enforced by the storage.
//! Sign convention: `R(v, w, v, w) > 0` on the round sphere, and the Ricci
//! contraction is `Ric_jl = g^{ik} R_ijkl`, so a space form of curvature
//! `kappa` has `Ric = (d - 1) kappa g`.

use std::fmt::Write as _;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric bilinear form on `R^d` (metric, Ricci tensor, `M_ij`, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct Sym2(DMatrix<f64>);

impl Sym2 {
    /// Wraps `m` after checking symmetry to `1e-12` relative.
    pub fn new(m: DMatrix<f64>) -> Result<Sym2> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Sym2(m))
    }

    /// Symmetrizes `m` without checking.
    pub fn symmetrize(m: DMatrix<f64>) -> Sym2 {
        let s = (&m + m.transpose()) * 0.5;
        Sym2(s)
    }

    pub fn identity(d: usize) -> Sym2 {
        Sym2(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Sym2 {
        Sym2(DMatrix::zeros(d, d))
    }

    pub fn diagonal(diag: &[f64]) -> Sym2 {
        Sym2(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// `A(v, w)`.
    pub fn form(&self, v: &[f64], w: &[f64]) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += self.0[(i, j)] * v[i] * w[j];
            }
        }
        acc
    }

    pub fn scaled(&self, s: f64) -> Sym2 {
        Sym2(&self.0 * s)
    }

    /// `sqrt(C^{ac} C^{bd} T_ab T_cd)`.
    pub fn norm_with(&self, c: &ContractionMetric) -> Result<f64> {
        check_dim(c.dim(), self.dim())?;
        let ct = c.matrix() * &self.0;
        Ok((&ct * &ct).trace().max(0.0).sqrt())
    }
}

/// Positive semidefinite weights used to contract dummy indices. Rank
/// deficiency is allowed: the space-time contraction only runs over the
/// spatial block.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionMetric(DMatrix<f64>);

impl ContractionMetric {
    pub fn new(m: DMatrix<f64>) -> Result<ContractionMetric> {
        let m = Sym2::new(m)?.into_matrix();
        let eig = SymmetricEigen::new(m.clone());
        let radius = eig.eigenvalues.amax();
        let min = eig.eigenvalues.min();
        if min < -1e-12 * radius.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPositiveSemidefinite(min));
        }
        Ok(ContractionMetric(m))
    }

    pub fn identity(d: usize) -> ContractionMetric {
        ContractionMetric(DMatrix::identity(d, d))
    }

    /// `diag(g_inv, 0)` on `R^{n+1}`: contraction over the spatial block only.
    pub fn spatial(g_inv: &DMatrix<f64>) -> Result<ContractionMetric> {
        let n = g_inv.nrows();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(g_inv);
        ContractionMetric::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Residuals of the three curvature axioms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub antisymmetry: f64,
    pub pair_symmetry: f64,
    pub bianchi: f64,
    /// Axioms whose residual exceeds the tolerance.
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.antisymmetry.max(self.pair_symmetry).max(self.bianchi)
    }
}

/// Dense `(0,4)` tensor on `R^d` with the symmetries of a curvature tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgCurvTensor {
    dim: usize,
    comps: Vec<f64>,
}

impl AlgCurvTensor {
    pub fn zeros(dim: usize) -> AlgCurvTensor {
        AlgCurvTensor { dim, comps: vec![0.0; dim.pow(4)] }
    }

    /// Wraps raw components without validation.
    pub fn from_components(dim: usize, comps: Vec<f64>) -> Result<AlgCurvTensor> {
        if comps.len() != dim.pow(4) {
            return Err(Error::DimensionMismatch { expected: dim.pow(4), got: comps.len() });
        }
        Ok(AlgCurvTensor { dim, comps })
    }

    /// Constant sectional curvature `kappa` with respect to `g`: `(kappa/2) g∧g`.
    pub fn constant_curvature(g: &Sym2, kappa: f64) -> AlgCurvTensor {
        kulkarni_nomizu(g, g).expect("same dimension") * (0.5 * kappa)
    }

    /// Constant curvature `kappa` with respect to the Euclidean metric.
    pub fn euclidean_space_form(dim: usize, kappa: f64) -> AlgCurvTensor {
        AlgCurvTensor::constant_curvature(&Sym2::identity(dim), kappa)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[f64] {
        &self.comps
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.dim + j) * self.dim + k) * self.dim + l
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Euclidean norm of the component array.
    pub fn norm(&self) -> f64 {
        self.comps.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `T(v1, v2, v3, v4)`.
    pub fn eval(&self, v1: &[f64], v2: &[f64], v3: &[f64], v4: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            if v1[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                if v2[j] == 0.0 {
                    continue;
                }
                let a = v1[i] * v2[j];
                let base = (i * d + j) * d * d;
                let mut inner = 0.0;
                for k in 0..d {
                    if v3[k] == 0.0 {
                        continue;
                    }
                    let row = &self.comps[base + k * d..base + k * d + d];
                    let mut s = 0.0;
                    for l in 0..d {
                        s += row[l] * v4[l];
                    }
                    inner += v3[k] * s;
                }
                acc += a * inner;
            }
        }
        acc
    }

    /// The matrix `m_pq = T(u, e_p, w, e_q)`.
    pub fn slot_13(&self, u: &[f64], w: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for k in 0..d {
                let a = u[i] * w[k];
                if a == 0.0 {
                    continue;
                }
                for p in 0..d {
                    for q in 0..d {
                        m[(p, q)] += a * self[(i, p, k, q)];
                    }
                }
            }
        }
        m
    }

    /// The matrix `m_pq = T(u, w, e_p, e_q)`.
    pub fn slot_12(&self, u: &[f64], w: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let a = u[i] * w[j];
                if a == 0.0 {
                    continue;
                }
                for p in 0..d {
                    for q in 0..d {
                        m[(p, q)] += a * self[(i, j, p, q)];
                    }
                }
            }
        }
        m
    }

    /// Pullback `(L·T)(a,b,c,d) = T(L e_a, L e_b, L e_c, L e_d)`.
    pub fn pullback(&self, l: &DMatrix<f64>) -> Result<AlgCurvTensor> {
        check_dim(self.dim, l.nrows())?;
        check_dim(self.dim, l.ncols())?;
        let d = self.dim;
        let mut cur = self.comps.clone();
        // contract one slot at a time; slot s moves to the front after each pass
        for _ in 0..4 {
            let mut next = vec![0.0; cur.len()];
            // cur indexed (i, rest) with i the slot to transform; output (rest, a)
            let rest = d * d * d;
            for i in 0..d {
                for r in 0..rest {
                    let v = cur[i * rest + r];
                    if v == 0.0 {
                        continue;
                    }
                    for a in 0..d {
                        next[r * d + a] += l[(i, a)] * v;
                    }
                }
            }
            cur = next;
        }
        Ok(AlgCurvTensor { dim: d, comps: cur })
    }

    /// Zero extension to `R^{d+extra}`, keeping this tensor in the leading block.
    pub fn embed(&self, extra: usize) -> AlgCurvTensor {
        let n = self.dim;
        let d = n + extra;
        let mut out = AlgCurvTensor::zeros(d);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out[(i, j, k, l)] = self[(i, j, k, l)];
                    }
                }
            }
        }
        out
    }

    /// `|T|_C`: full contraction of `T ⊗ T` with `C` on every index.
    pub fn norm_with(&self, c: &ContractionMetric) -> Result<f64> {
        check_dim(c.dim(), self.dim)?;
        let raised = self.pullback(c.matrix())?;
        let s: f64 = raised.comps.iter().zip(&self.comps).map(|(a, b)| a * b).sum();
        Ok(s.max(0.0).sqrt())
    }

    /// Text serialization: `acvt d=<d>` header, then `i j k l value` per nonzero component.
    pub fn to_text(&self) -> String {
        let d = self.dim;
        let mut s = format!("acvt d={d}\n");
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let v = self[(i, j, k, l)];
                        if v != 0.0 {
                            let _ = writeln!(s, "{i} {j} {k} {l} {v}");
                        }
                    }
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<AlgCurvTensor> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty tensor file".into()))?;
        let d: usize = header
            .trim()
            .strip_prefix("acvt d=")
            .ok_or_else(|| Error::Parse(format!("bad header `{header}`")))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad dimension: {e}")))?;
        if d == 0 || d > 16 {
            return Err(Error::Parse(format!("unsupported dimension {d}")));
        }
        let mut t = AlgCurvTensor::zeros(d);
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(Error::Parse(format!("bad component line `{line}`")));
            }
            let mut ix = [0usize; 4];
            for (slot, tok) in ix.iter_mut().zip(&f[..4]) {
                *slot = tok.parse().map_err(|e| Error::Parse(format!("bad index `{tok}`: {e}")))?;
                if *slot >= d {
                    return Err(Error::Parse(format!("index {slot} out of range for d={d}")));
                }
            }
            let v: f64 = f[4].parse().map_err(|e| Error::Parse(format!("bad value `{}`: {e}", f[4])))?;
            t[(ix[0], ix[1], ix[2], ix[3])] = v;
        }
        Ok(t)
    }
}

impl Index<(usize, usize, usize, usize)> for AlgCurvTensor {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j, k, l): (usize, usize, usize, usize)) -> &f64 {
        &self.comps[self.idx(i, j, k, l)]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for AlgCurvTensor {
    #[inline]
    fn index_mut(&mut self, (i, j, k, l): (usize, usize, usize, usize)) -> &mut f64 {
        let id = self.idx(i, j, k, l);
        &mut self.comps[id]
    }
}

impl Mul<f64> for AlgCurvTensor {
    type Output = AlgCurvTensor;
    fn mul(mut self, s: f64) -> AlgCurvTensor {
        self.comps.iter_mut().for_each(|x| *x *= s);
        self
    }
}

impl Mul<f64> for &AlgCurvTensor {
    type Output = AlgCurvTensor;
    fn mul(self, s: f64) -> AlgCurvTensor {
        self.clone() * s
    }
}

impl Add for &AlgCurvTensor {
    type Output = AlgCurvTensor;
    fn add(self, rhs: &AlgCurvTensor) -> AlgCurvTensor {
        assert_eq!(self.dim, rhs.dim);
        AlgCurvTensor { dim: self.dim, comps: self.comps.iter().zip(&rhs.comps).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &AlgCurvTensor {
    type Output = AlgCurvTensor;
    fn sub(self, rhs: &AlgCurvTensor) -> AlgCurvTensor {
        assert_eq!(self.dim, rhs.dim);
        AlgCurvTensor { dim: self.dim, comps: self.comps.iter().zip(&rhs.comps).map(|(a, b)| a - b).collect() }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

/// Residuals of antisymmetry, pair symmetry and first Bianchi; an axiom is
/// reported violated when its residual exceeds `tol * max(1, max|T|)`.
pub fn validate_acvt(t: &AlgCurvTensor, tol: f64) -> ValidationReport {
    let d = t.dim;
    let (mut anti, mut pair, mut bianchi) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let v = t[(i, j, k, l)];
                    anti = anti.max((v + t[(j, i, k, l)]).abs());
                    pair = pair.max((v - t[(k, l, i, j)]).abs());
                    bianchi = bianchi.max((v + t[(j, k, i, l)] + t[(k, i, j, l)]).abs());
                }
            }
        }
    }
    let bound = tol * t.max_abs().max(1.0);
    let mut violations = Vec::new();
    for (name, r) in [("antisymmetry", anti), ("pair symmetry", pair), ("first Bianchi", bianchi)] {
        if r > bound {
            violations.push(name.to_string());
        }
    }
    ValidationReport { antisymmetry: anti, pair_symmetry: pair, bianchi, violations }
}

/// `(A∧B)_ijkl = A_ik B_jl + A_jl B_ik - A_il B_jk - A_jk B_il`.
pub fn kulkarni_nomizu(a: &Sym2, b: &Sym2) -> Result<AlgCurvTensor> {
    check_dim(a.dim(), b.dim())?;
    let d = a.dim();
    let (a, b) = (a.matrix(), b.matrix());
    let mut t = AlgCurvTensor::zeros(d);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    t[(i, j, k, l)] = a[(i, k)] * b[(j, l)] + a[(j, l)] * b[(i, k)]
                        - a[(i, l)] * b[(j, k)]
                        - a[(j, k)] * b[(i, l)];
                }
            }
        }
    }
    Ok(t)
}

/// `Ric_jl = g^{ik} R_ijkl`.
pub fn contract_ricci(r: &AlgCurvTensor, g_inv: &ContractionMetric) -> Result<Sym2> {
    check_dim(r.dim(), g_inv.dim())?;
    let d = r.dim();
    let gi = g_inv.matrix();
    let mut ric = DMatrix::zeros(d, d);
    for j in 0..d {
        for l in 0..d {
            let mut s = 0.0;
            for i in 0..d {
                for k in 0..d {
                    s += gi[(i, k)] * r[(i, j, k, l)];
                }
            }
            ric[(j, l)] = s;
        }
    }
    Ok(Sym2::symmetrize(ric))
}

/// `scal = g^{ij} Ric_ij`.
pub fn contract_scal(ric: &Sym2, g_inv: &ContractionMetric) -> Result<f64> {
    check_dim(ric.dim(), g_inv.dim())?;
    Ok(ric.matrix().component_mul(g_inv.matrix()).sum())
}

/// The quadratic map
/// `Q(S)_abcd = C^{pq} C^{rs} [S_abpr S_cdqs + 2 S_apcr S_bqds - 2 S_apdr S_bqcs]`.
pub fn q_map(s: &AlgCurvTensor, c: &ContractionMetric) -> Result<AlgCurvTensor> {
    check_dim(s.dim(), c.dim())?;
    let d = s.dim();
    let cm = c.matrix();
    let d2 = d * d;
    let d3 = d2 * d;
    // Z[a][b][q][s] = C^{pq} C^{rs} S_abpr, Y[a][q][c][s] = C^{pq} C^{rs} S_apcr
    let mut half = vec![0.0; d.pow(4)];
    let mut z = vec![0.0; d.pow(4)];
    // raise slot 3: half[a][b][q][r] = C^{pq} S_abpr
    for ab in 0..d2 {
        for q in 0..d {
            for r in 0..d {
                let mut acc = 0.0;
                for p in 0..d {
                    acc += cm[(p, q)] * s.comps[ab * d2 + p * d + r];
                }
                half[ab * d2 + q * d + r] = acc;
            }
        }
    }
    for ab in 0..d2 {
        for q in 0..d {
            for sidx in 0..d {
                let mut acc = 0.0;
                for r in 0..d {
                    acc += cm[(r, sidx)] * half[ab * d2 + q * d + r];
                }
                z[ab * d2 + q * d + sidx] = acc;
            }
        }
    }
    let mut y = vec![0.0; d.pow(4)];
    let mut half2 = vec![0.0; d.pow(4)];
    // half2[a][q][c][r] = C^{pq} S_apcr
    for a in 0..d {
        for q in 0..d {
            for cc in 0..d {
                for r in 0..d {
                    let mut acc = 0.0;
                    for p in 0..d {
                        acc += cm[(p, q)] * s.comps[a * d3 + p * d2 + cc * d + r];
                    }
                    half2[a * d3 + q * d2 + cc * d + r] = acc;
                }
            }
        }
    }
    for a in 0..d {
        for q in 0..d {
            for cc in 0..d {
                for sidx in 0..d {
                    let mut acc = 0.0;
                    for r in 0..d {
                        acc += cm[(r, sidx)] * half2[a * d3 + q * d2 + cc * d + r];
                    }
                    y[a * d3 + q * d2 + cc * d + sidx] = acc;
                }
            }
        }
    }
    let mut out = AlgCurvTensor::zeros(d);
    for a in 0..d {
        for b in 0..d {
            for cc in 0..d {
                for dd in 0..d {
                    let mut t1 = 0.0;
                    let zab = &z[(a * d + b) * d2..(a * d + b) * d2 + d2];
                    let scd = &s.comps[(cc * d + dd) * d2..(cc * d + dd) * d2 + d2];
                    for (x, w) in zab.iter().zip(scd) {
                        t1 += x * w;
                    }
                    let mut t2 = 0.0;
                    let mut t3 = 0.0;
                    for q in 0..d {
                        for sidx in 0..d {
                            t2 += y[a * d3 + q * d2 + cc * d + sidx] * s.comps[b * d3 + q * d2 + dd * d + sidx];
                            t3 += y[a * d3 + q * d2 + dd * d + sidx] * s.comps[b * d3 + q * d2 + cc * d + sidx];
                        }
                    }
                    out[(a, b, cc, dd)] = t1 + 2.0 * t2 - 2.0 * t3;
                }
            }
        }
    }
    Ok(out)
}

/// Random symmetric matrix with standard normal entries.
pub fn random_symmetric(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let x: f64 = StandardNormal.sample(rng);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

/// `sum_a A_a ∧ A_a` for random PSD `A_a = B_a^2`. Such tensors have a
/// nonnegative curvature operator and therefore lie in the isotropic cone.
pub fn random_cone_tensor(seed: u64, d: usize, terms: usize) -> Result<AlgCurvTensor> {
    if terms == 0 {
        return Err(Error::InvalidArgument("random_cone_tensor needs at least one term".into()));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = AlgCurvTensor::zeros(d);
    for _ in 0..terms {
        let b = random_symmetric(&mut rng, d);
        let a = Sym2::symmetrize(&b * &b);
        acc = &acc + &kulkarni_nomizu(&a, &a)?;
    }
    Ok(acc)
}

/// Random tensor satisfying the curvature symmetries but with no sign
/// condition: a sum of `A∧B` with independent random symmetric `A`, `B`.
pub fn random_acvt(seed: u64, d: usize, terms: usize) -> AlgCurvTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = AlgCurvTensor::zeros(d);
    for _ in 0..terms.max(1) {
        let a = Sym2::symmetrize(random_symmetric(&mut rng, d));
        let b = Sym2::symmetrize(random_symmetric(&mut rng, d));
        acc = &acc + &kulkarni_nomizu(&a, &b).expect("same dimension");
    }
    acc
}

/// Random PSD contraction metric of rank `rank` on `R^d`.
pub fn random_contraction(seed: u64, d: usize, rank: usize) -> ContractionMetric {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DMatrix::<f64>::zeros(d, rank);
    for i in 0..d {
        for j in 0..rank {
            g[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    let m = &g * g.transpose();
    ContractionMetric(Sym2::symmetrize(m).into_matrix())
}
