//! The isotropic quadratic form, membership in the cone of tensors with
//! nonnegative isotropic curvature, and the algebra used to show that the
//! cone is preserved by `dS/dt = Q(S)`.
//!
//! For a tensor `S` on `R^d` and vectors `v1..v4`,
//! `I_S(v) = S(v1,v3,v1,v3) + S(v1,v4,v1,v4) + S(v2,v3,v2,v3) + S(v2,v4,v2,v4) - 2 S(v1,v2,v3,v4)`.
//! `S` lies in the cone when `I_S >= 0` for every tuple.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acvt::{check_dim, q_map, validate_acvt, AlgCurvTensor, ContractionMetric};
use crate::error::{Error, Result};

/// Four vectors `(v1, v2, v3, v4)` in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourTuple(pub [Vec<f64>; 4]);

impl FourTuple {
    pub fn new(v1: Vec<f64>, v2: Vec<f64>, v3: Vec<f64>, v4: Vec<f64>) -> FourTuple {
        FourTuple([v1, v2, v3, v4])
    }

    pub fn zeros(d: usize) -> FourTuple {
        FourTuple::new(vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0[0].len()
    }

    pub fn v(&self, k: usize) -> &[f64] {
        &self.0[k]
    }

    fn check(&self, d: usize) -> Result<()> {
        for v in &self.0 {
            check_dim(d, v.len())?;
        }
        Ok(())
    }

    /// Rescales so that `|v1|^2 + |v2|^2 = 1` and `|v3|^2 + |v4|^2 = 1`;
    /// a zero pair is left unchanged.
    pub fn normalized(&self) -> FourTuple {
        let mut out = self.clone();
        for pair in [0usize, 2] {
            let n2: f64 = out.0[pair].iter().chain(&out.0[pair + 1]).map(|x| x * x).sum();
            if n2 > 0.0 {
                let s = n2.sqrt().recip();
                for k in pair..pair + 2 {
                    out.0[k].iter_mut().for_each(|x| *x *= s);
                }
            }
        }
        out
    }

    /// `self + s * w`, componentwise.
    pub fn shifted(&self, w: &FourTuple, s: f64) -> FourTuple {
        let mut out = self.clone();
        for k in 0..4 {
            for (a, b) in out.0[k].iter_mut().zip(&w.0[k]) {
                *a += s * b;
            }
        }
        out
    }

    /// `(v2, -v1, v4, -v3)`.
    pub fn rotated(&self) -> FourTuple {
        let neg = |v: &Vec<f64>| v.iter().map(|x| -x).collect::<Vec<f64>>();
        FourTuple::new(self.0[1].clone(), neg(&self.0[0]), self.0[3].clone(), neg(&self.0[2]))
    }

    /// Random tuple with independent standard normal entries.
    pub fn random(rng: &mut ChaCha8Rng, d: usize) -> FourTuple {
        let mut gen = || (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect::<Vec<f64>>();
        FourTuple::new(gen(), gen(), gen(), gen())
    }
}

/// `I_S(v1, v2, v3, v4)`.
pub fn isotropic_form(s: &AlgCurvTensor, t: &FourTuple) -> Result<f64> {
    t.check(s.dim())?;
    let [v1, v2, v3, v4] = &t.0;
    Ok(s.eval(v1, v3, v1, v3) + s.eval(v1, v4, v1, v4) + s.eval(v2, v3, v2, v3) + s.eval(v2, v4, v2, v4)
        - 2.0 * s.eval(v1, v2, v3, v4))
}

/// Frame version of the isotropic form:
/// `S(e1,e3,e1,e3) + λ²S(e1,e4,e1,e4) + μ²S(e2,e3,e2,e3) + λ²μ²S(e2,e4,e2,e4) - 2λμ S(e1,e2,e3,e4)`.
pub fn frame_form(s: &AlgCurvTensor, frame: &[Vec<f64>; 4], lambda: f64, mu: f64) -> Result<f64> {
    let d = s.dim();
    let mut defect = 0.0f64;
    for a in 0..4 {
        check_dim(d, frame[a].len())?;
        for b in 0..4 {
            let ip: f64 = frame[a].iter().zip(&frame[b]).map(|(x, y)| x * y).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            defect = defect.max((ip - want).abs());
        }
    }
    if defect > 1e-10 {
        return Err(Error::NotOrthonormal(defect));
    }
    if !(-1.0..=1.0).contains(&lambda) || !(-1.0..=1.0).contains(&mu) {
        return Err(Error::InvalidArgument(format!("lambda={lambda}, mu={mu} must lie in [-1, 1]")));
    }
    let [e1, e2, e3, e4] = frame;
    let (l2, m2) = (lambda * lambda, mu * mu);
    Ok(s.eval(e1, e3, e1, e3) + l2 * s.eval(e1, e4, e1, e4) + m2 * s.eval(e2, e3, e2, e3)
        + l2 * m2 * s.eval(e2, e4, e2, e4)
        - 2.0 * lambda * mu * s.eval(e1, e2, e3, e4))
}

/// Outcome of a cone membership search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeCertificate {
    pub min_value: f64,
    pub member: bool,
    pub tol: f64,
    pub argmin: FourTuple,
    pub starts: usize,
    pub converged_starts: usize,
}

/// Knobs for [`cone_membership_with`].
#[derive(Clone, Debug)]
pub struct MembershipOptions {
    pub starts: usize,
    pub tol: f64,
    pub seed: u64,
    pub max_rounds: usize,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        MembershipOptions { starts: 32, tol: 1e-8, seed: 0x15_07_20_9c, max_rounds: 500 }
    }
}

/// Matrix of `x -> I_S` for `x = (v1, v2)` with `(v3, v4)` fixed:
/// `[[A, -E], [-E^T, A]]` with `A_ab = S(v3,e_a,v3,e_b) + S(v4,e_a,v4,e_b)` and
/// `E_ab = S(v3,v4,e_a,e_b)`. By pair symmetry the same matrix serves the other side.
fn side_matrix(s: &AlgCurvTensor, u3: &[f64], u4: &[f64]) -> DMatrix<f64> {
    let d = s.dim();
    let a = s.slot_13(u3, u3) + s.slot_13(u4, u4);
    let e = s.slot_12(u3, u4);
    let mut h = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let aij = 0.5 * (a[(i, j)] + a[(j, i)]);
            h[(i, j)] = aij;
            h[(d + i, d + j)] = aij;
            h[(i, d + j)] = -e[(i, j)];
            h[(d + j, i)] = -e[(i, j)];
        }
    }
    h
}

/// Removes the directions `(u3, u4)` and `(-u4, u3)` from the search: in complex
/// notation `I_S = S(z, w, z̄, w̄)` with `z = v1 + i v2`, `w = v3 + i v4`, and
/// the value is unchanged by adding complex multiples of `w` to `z`, so those
/// directions only contribute trivial zeros.
fn deflate(h: &mut DMatrix<f64>, u3: &[f64], u4: &[f64]) {
    let d = u3.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for cand in [[u3, u4].concat(), [u4.iter().map(|x| -x).collect::<Vec<f64>>(), u3.to_vec()].concat()] {
        let mut q = cand;
        for b in &basis {
            let c: f64 = q.iter().zip(b).map(|(x, y)| x * y).sum();
            q.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            basis.push(q.iter().map(|x| x / norm).collect());
        }
    }
    if basis.is_empty() {
        return;
    }
    let mut p = DMatrix::<f64>::identity(2 * d, 2 * d);
    for b in &basis {
        let v = nalgebra::DVector::from_column_slice(b);
        p -= &v * v.transpose();
    }
    let shift = h.norm() + 1.0;
    let ph = &p * &*h * &p;
    *h = ph + (DMatrix::identity(2 * d, 2 * d) - &p) * shift;
}

fn min_eigvec(h: DMatrix<f64>) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(h);
    let (k, &val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty spectrum");
    (val, eig.eigenvectors.column(k).iter().copied().collect())
}

struct StartResult {
    value: f64,
    tuple: FourTuple,
    converged: bool,
}

fn alternate(s: &AlgCurvTensor, start: FourTuple, scale: f64, max_rounds: usize) -> StartResult {
    let d = s.dim();
    let mut t = start.normalized();
    let mut best = f64::INFINITY;
    let mut stalls = 0;
    let mut converged = false;
    for _ in 0..max_rounds {
        let mut h = side_matrix(s, &t.0[2], &t.0[3]);
        deflate(&mut h, &t.0[2], &t.0[3]);
        let (_, x) = min_eigvec(h);
        t.0[0] = x[..d].to_vec();
        t.0[1] = x[d..].to_vec();
        let mut h = side_matrix(s, &t.0[0], &t.0[1]);
        deflate(&mut h, &t.0[0], &t.0[1]);
        let (val, y) = min_eigvec(h);
        t.0[2] = y[..d].to_vec();
        t.0[3] = y[d..].to_vec();
        if best - val < 1e-14 * scale {
            stalls += 1;
            if stalls >= 3 {
                converged = true;
                break;
            }
        } else {
            stalls = 0;
        }
        best = best.min(val);
    }
    let value = isotropic_form(s, &t).expect("dimension checked");
    StartResult { value, tuple: t, converged }
}

/// Searches for the minimum of `I_S` over normalized tuples with `starts`
/// random restarts and default options.
pub fn cone_membership(s: &AlgCurvTensor, starts: usize, tol: f64) -> Result<ConeCertificate> {
    cone_membership_with(s, &MembershipOptions { starts, tol, ..MembershipOptions::default() })
}

/// Alternating minimal-eigenvector search. The value returned for a negative
/// minimum is attained at `argmin`, so non-membership is certified exactly;
/// membership means no violation was found.
pub fn cone_membership_with(s: &AlgCurvTensor, opts: &MembershipOptions) -> Result<ConeCertificate> {
    if opts.starts == 0 {
        return Err(Error::InvalidArgument("cone membership needs at least one start".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let d = s.dim();
    let scale = s.norm();
    if scale == 0.0 {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        return Ok(ConeCertificate {
            min_value: 0.0,
            member: true,
            tol: opts.tol,
            argmin: FourTuple::new(e.clone(), vec![0.0; d], e, vec![0.0; d]),
            starts: opts.starts,
            converged_starts: opts.starts,
        });
    }
    let results: Vec<StartResult> = (0..opts.starts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
            alternate(s, FourTuple::random(&mut rng, d), scale, opts.max_rounds)
        })
        .collect();
    let converged_starts = results.iter().filter(|r| r.converged).count();
    let mut best = 0;
    for (k, r) in results.iter().enumerate() {
        if r.value < results[best].value {
            best = k;
        }
    }
    let r = &results[best];
    Ok(ConeCertificate {
        min_value: r.value,
        member: r.value >= -opts.tol * scale,
        tol: opts.tol,
        argmin: r.tuple.clone(),
        starts: opts.starts,
        converged_starts,
    })
}

/// A tensor pushed onto the cone boundary together with its degenerate tuple.
#[derive(Clone, Debug)]
pub struct BoundaryPoint {
    pub tensor: AlgCurvTensor,
    pub theta: f64,
    pub certificate: ConeCertificate,
}

/// Bisects on `θ` in `S - θ·(½ I∧I)` until the membership minimum lies in
/// `[0, upper·|S|]`. Requires `S` in the cone.
pub fn deform_to_boundary(s: &AlgCurvTensor, opts: &MembershipOptions, upper: f64) -> Result<BoundaryPoint> {
    let d = s.dim();
    let unit = AlgCurvTensor::euclidean_space_form(d, 1.0);
    let scale = s.norm().max(f64::MIN_POSITIVE);
    let at = |theta: f64| -> Result<(AlgCurvTensor, ConeCertificate)> {
        let t = s - &(&unit * theta);
        let c = cone_membership_with(&t, opts)?;
        Ok((t, c))
    };
    let (t0, c0) = at(0.0)?;
    if c0.min_value < 0.0 {
        if c0.min_value >= -opts.tol * scale {
            return Ok(BoundaryPoint { tensor: t0, theta: 0.0, certificate: c0 });
        }
        return Err(Error::InvalidArgument(format!("tensor is outside the cone (min {:e})", c0.min_value)));
    }
    let mut lo = (0.0, t0, c0);
    let mut hi = scale / unit.norm();
    let mut guard = 0;
    while at(hi)?.1.min_value >= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::InvalidArgument("could not bracket the cone boundary".into()));
        }
    }
    for _ in 0..200 {
        if lo.2.min_value <= upper * scale {
            break;
        }
        let mid = 0.5 * (lo.0 + hi);
        if mid <= lo.0 || mid >= hi {
            break;
        }
        let (t, c) = at(mid)?;
        if c.min_value >= 0.0 {
            lo = (mid, t, c);
        } else {
            hi = mid;
        }
    }
    Ok(BoundaryPoint { tensor: lo.1, theta: lo.0, certificate: lo.2 })
}

/// The second-variation expression of `I_S` at `v` in the direction `w`,
/// in its Bianchi-reduced form. At a zero of `I_S` for `S` in the cone it is
/// nonnegative; in general it equals one quarter of the sum of
/// `d²/ds² I_S(v + s w)` and `d²/ds² I_S(v' + s w)` at `s = 0`, where
/// `v' = (v2, -v1, v4, -v3)`.
pub fn second_variation_form(s: &AlgCurvTensor, v: &FourTuple, w: &FourTuple) -> Result<f64> {
    let d = s.dim();
    v.check(d)?;
    w.check(d)?;
    let [v1, v2, v3, v4] = &v.0;
    let [w1, w2, w3, w4] = &w.0;
    let e = |a: &[f64], b: &[f64], c: &[f64], dd: &[f64]| s.eval(a, b, c, dd);
    let diag = e(w1, v3, w1, v3)
        + e(w1, v4, w1, v4)
        + e(w2, v3, w2, v3)
        + e(w2, v4, w2, v4)
        + e(v1, w3, v1, w3)
        + e(v2, w3, v2, w3)
        + e(v1, w4, v1, w4)
        + e(v2, w4, v2, w4);
    let mixed = -2.0 * (e(v3, w1, v1, w3) + e(v4, w1, v2, w3)) - 2.0 * (e(v4, w1, v1, w4) - e(v3, w1, v2, w4))
        + 2.0 * (e(v4, w2, v1, w3) - e(v3, w2, v2, w3))
        - 2.0 * (e(v3, w2, v1, w4) + e(v4, w2, v2, w4));
    Ok(diag + mixed - 2.0 * e(w1, w2, v3, v4) - 2.0 * e(v1, v2, w3, w4))
}

/// The six `n x n` matrices built from `S` and a tuple on `R^n x R`, and the
/// assembled `4n x 4n` block matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrixBundle {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub big: DMatrix<f64>,
}

impl BlockMatrixBundle {
    /// Assembles `[[B,-F,-C,-D],[F,B,D,-C],[-C^T,D^T,A,-E],[-D^T,-C^T,E,A]]`.
    pub fn from_blocks(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        e: DMatrix<f64>,
        f: DMatrix<f64>,
    ) -> BlockMatrixBundle {
        let n = a.nrows();
        let mut big = DMatrix::zeros(4 * n, 4 * n);
        let layout: [[(&DMatrix<f64>, f64, bool); 4]; 4] = [
            [(&b, 1.0, false), (&f, -1.0, false), (&c, -1.0, false), (&d, -1.0, false)],
            [(&f, 1.0, false), (&b, 1.0, false), (&d, 1.0, false), (&c, -1.0, false)],
            [(&c, -1.0, true), (&d, 1.0, true), (&a, 1.0, false), (&e, -1.0, false)],
            [(&d, -1.0, true), (&c, -1.0, true), (&e, 1.0, false), (&a, 1.0, false)],
        ];
        for (bi, row) in layout.iter().enumerate() {
            for (bj, &(m, sign, transpose)) in row.iter().enumerate() {
                let blk = if transpose { m.transpose() * sign } else { m * sign };
                big.view_mut((bi * n, bj * n), (n, n)).copy_from(&blk);
            }
        }
        BlockMatrixBundle { a, b, c, d, e, f, big }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.big.clone()).eigenvalues.min()
    }
}

fn spatial_block(m: DMatrix<f64>, n: usize) -> DMatrix<f64> {
    m.view((0, 0), (n, n)).into_owned()
}

/// The matrices `a..f` for `S` on `R^{n+1}` (last index is time) and a tuple,
/// with `e_p` running over the spatial basis only.
pub fn build_block_matrix(s: &AlgCurvTensor, v: &FourTuple) -> Result<BlockMatrixBundle> {
    let d = s.dim();
    v.check(d)?;
    if d < 3 {
        return Err(Error::InvalidArgument(format!("block matrix needs spatial dimension >= 2, got {}", d - 1)));
    }
    let n = d - 1;
    let [v1, v2, v3, v4] = &v.0;
    let a = spatial_block(s.slot_13(v1, v1) + s.slot_13(v2, v2), n);
    let b = spatial_block(s.slot_13(v3, v3) + s.slot_13(v4, v4), n);
    let c = spatial_block(s.slot_13(v3, v1) + s.slot_13(v4, v2), n);
    let dm = spatial_block(s.slot_13(v4, v1) - s.slot_13(v3, v2), n);
    let e = spatial_block(s.slot_12(v1, v2), n);
    let f = spatial_block(s.slot_12(v3, v4), n);
    Ok(BlockMatrixBundle::from_blocks(a, b, c, dm, e, f))
}

/// `Σ a_pq b_pq - Σ e_pq f_pq - Σ c_pq c_qp - Σ d_pq d_qp`.
pub fn trace_inequality_value(bundle: &BlockMatrixBundle) -> f64 {
    let dot = |x: &DMatrix<f64>, y: &DMatrix<f64>| x.component_mul(y).sum();
    dot(&bundle.a, &bundle.b)
        - dot(&bundle.e, &bundle.f)
        - dot(&bundle.c, &bundle.c.transpose())
        - dot(&bundle.d, &bundle.d.transpose())
}

/// Both sides of the decomposition of `I_{Q(S)}(v)` (spatial contraction)
/// into two sums of squares plus twice the trace inequality value.
pub fn q_boundary_decomposition(s: &AlgCurvTensor, v: &FourTuple) -> Result<(f64, f64)> {
    let d = s.dim();
    let report = validate_acvt(s, 1e-9);
    if report.bianchi > 1e-9 * s.max_abs().max(1.0) {
        return Err(Error::BianchiViolation(report.bianchi));
    }
    let bundle = build_block_matrix(s, v)?;
    let n = d - 1;
    let c = ContractionMetric::spatial(&DMatrix::identity(n, n))?;
    let q = q_map(s, &c)?;
    let lhs = isotropic_form(&q, v)?;
    let [v1, v2, v3, v4] = &v.0;
    let m13 = spatial_block(s.slot_12(v1, v3), n);
    let m24 = spatial_block(s.slot_12(v2, v4), n);
    let m14 = spatial_block(s.slot_12(v1, v4), n);
    let m23 = spatial_block(s.slot_12(v2, v3), n);
    let rhs = (&m13 - &m24).norm_squared() + (&m14 + &m23).norm_squared() + 2.0 * trace_inequality_value(&bundle);
    Ok((lhs, rhs))
}

/// Spatial Euclidean metric on `R^n x R`, the contraction used by [`q_boundary_decomposition`].
pub fn spatial_identity(d: usize) -> Result<ContractionMetric> {
    ContractionMetric::spatial(&DMatrix::identity(d - 1, d - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acvt::{random_acvt, random_cone_tensor};

    fn e(d: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        v
    }

    #[test]
    fn isotropic_form_examples() {
        let t = FourTuple::new(e(4, 0), e(4, 1), e(4, 2), e(4, 3));
        assert_eq!(isotropic_form(&AlgCurvTensor::zeros(4), &t).unwrap(), 0.0);
        let s = AlgCurvTensor::euclidean_space_form(4, 1.0);
        assert!((isotropic_form(&s, &t).unwrap() - 4.0).abs() < 1e-14);
        let v = vec![0.3, -1.0, 2.0, 0.5];
        let same = FourTuple::new(v.clone(), v.clone(), v.clone(), v);
        assert!(isotropic_form(&random_acvt(1, 4, 2), &same).unwrap().abs() < 1e-12);
    }

    #[test]
    fn frame_form_examples() {
        let s = AlgCurvTensor::euclidean_space_form(4, 1.0);
        let frame = [e(4, 0), e(4, 1), e(4, 2), e(4, 3)];
        assert!((frame_form(&s, &frame, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((frame_form(&s, &frame, 1.0, 1.0).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(frame_form(&AlgCurvTensor::zeros(4), &frame, 0.3, -0.8).unwrap(), 0.0);
        let bad = [e(4, 0), e(4, 0), e(4, 2), e(4, 3)];
        assert!(matches!(frame_form(&s, &bad, 0.5, 0.5), Err(Error::NotOrthonormal(_))));
    }

    #[test]
    fn membership_of_zero_and_hyperbolic() {
        let z = cone_membership(&AlgCurvTensor::zeros(4), 4, 1e-8).unwrap();
        assert!(z.member);
        assert_eq!(z.min_value, 0.0);
        let h = AlgCurvTensor::euclidean_space_form(4, -1.0);
        let c = cone_membership(&h, 32, 1e-8).unwrap();
        assert!(!c.member);
        assert!((c.min_value + 1.0).abs() < 1e-8, "{}", c.min_value);
        let back = isotropic_form(&h, &c.argmin).unwrap();
        assert!((back - c.min_value).abs() <= 1e-10 * c.min_value.abs());
        assert!(cone_membership(&h, 0, 1e-8).is_err());
    }

    #[test]
    fn embedded_sphere_is_member() {
        let s = AlgCurvTensor::euclidean_space_form(3, 1.0).embed(1);
        let c = cone_membership(&s, 32, 1e-8).unwrap();
        assert!(c.member);
        assert!(c.min_value.abs() < 1e-10);
        let t = FourTuple::new(e(4, 3), vec![0.0; 4], e(4, 3), vec![0.0; 4]);
        assert_eq!(isotropic_form(&s, &t).unwrap(), 0.0);
    }

    #[test]
    fn block_matrix_of_time_tuple_vanishes() {
        let s = AlgCurvTensor::euclidean_space_form(3, 1.0).embed(1);
        let t = FourTuple::new(e(4, 3), vec![0.0; 4], e(4, 3), vec![0.0; 4]);
        let b = build_block_matrix(&s, &t).unwrap();
        assert_eq!(b.big.amax(), 0.0);
        let z = build_block_matrix(&AlgCurvTensor::zeros(4), &t).unwrap();
        assert_eq!(trace_inequality_value(&z), 0.0);
        assert!(z.min_eigenvalue() >= 0.0);
    }

    #[test]
    fn big_matrix_is_symmetric() {
        let s = random_acvt(3, 5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = build_block_matrix(&s, &FourTuple::random(&mut rng, 5)).unwrap();
        assert!((&b.big - b.big.transpose()).amax() < 1e-12 * b.big.amax());
        assert!((&b.e + b.e.transpose()).amax() < 1e-12 * b.e.amax().max(1.0));
    }

    #[test]
    fn decomposition_holds_on_random_tensor() {
        let s = random_acvt(17, 5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = FourTuple::random(&mut rng, 5);
        let (l, r) = q_boundary_decomposition(&s, &v).unwrap();
        assert!((l - r).abs() <= 1e-10 * l.abs().max(r.abs()).max(1.0));
        let (l0, r0) = q_boundary_decomposition(&AlgCurvTensor::zeros(4), &v.normalized().clone_trunc(4)).unwrap();
        assert_eq!((l0, r0), (0.0, 0.0));
    }

    #[test]
    fn second_variation_zero_direction() {
        let s = random_cone_tensor(4, 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = FourTuple::random(&mut rng, 4);
        assert_eq!(second_variation_form(&s, &v, &FourTuple::zeros(4)).unwrap(), 0.0);
        assert_eq!(second_variation_form(&AlgCurvTensor::zeros(4), &v, &v).unwrap(), 0.0);
    }

    impl FourTuple {
        fn clone_trunc(&self, d: usize) -> FourTuple {
            FourTuple::new(self.0[0][..d].to_vec(), self.0[1][..d].to_vec(), self.0[2][..d].to_vec(), self.0[3][..d].to_vec())
        }
    }
}
