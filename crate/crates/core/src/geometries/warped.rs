//! Rotationally symmetric Ricci flow on `S^n`, evolved on a grid.
//!
//! The metric is `g = ds² + ψ(s,t)² g_{S^{n-1}}` with `s ∈ [0, L(t)]` the
//! arclength from one pole. In coordinates that do not move with the flow,
//! `∂_t g = -2 Ric` reads
//!
//! ```text
//! ψ_t = ψ_ss - (n-2) (1 - ψ_s²) / ψ,      ∂_t s = V(s) = (n-1) ∫_0^s ψ_ss/ψ ds'
//! ```
//!
//! so the points of such a coordinate drift along the arclength. The solver
//! stores `ψ̂(σ, t) = ψ(σ L(t), t)` on a uniform grid in `σ = s/L ∈ [0, 1]`,
//! where the equation picks up the drift term `ψ_s (σ L' - V)` and
//! `L' = V(L)`. Second-order central differences in space and classical RK4
//! in time. At each pole `ψ` is odd and the first interior node is slaved to
//! the regular expansion `ψ = s + b s³ + c s⁵` fitted through the next two
//! nodes; without this the cone-angle mode `ψ ≈ (1 + ε) s` grows at the grid
//! scale.
//!
//! Queries use the chart `(x, y)`: `x` labels the point at arclength `x` at
//! time zero and moves with the drift, `y` is stereographic on `S^{n-1}`. In
//! it `g = φ² dx² + ψ² g_{S^{n-1}}` evolves exactly by `-2 Ric`. Jets in `x`
//! come from carrying the Taylor series of the label's `σ`-position along the
//! drift (Heun steps between stored levels) and composing with local
//! polynomial interpolants of the grid data. Time derivatives use central
//! differences across stored levels, so query times must be stored levels.

use std::fmt::Write as _;
use std::path::Path;

use super::{conformal, Capabilities, GeometryProvider};
use crate::error::{Error, Result};
use crate::jet::{Jet, Shape};

/// Grid and time-stepping parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpedSpec {
    pub n: usize,
    /// Initial length of the profile, pole to pole.
    pub length: f64,
    /// Number of grid cells; nodes are `0..=cells`.
    pub cells: usize,
    pub t_span: f64,
    pub dt: f64,
}

impl WarpedSpec {
    /// Picks `dt <= dx²/4` so that `t_span` is a whole number of steps,
    /// divisible by 4 so that quarter spans land on stored levels.
    pub fn new(n: usize, length: f64, cells: usize, t_span: f64) -> WarpedSpec {
        let h = length / cells as f64;
        let steps = ((t_span / (0.25 * h * h)).ceil() as usize).div_ceil(4).max(1) * 4;
        WarpedSpec { n, length, cells, t_span, dt: t_span / steps as f64 }
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    /// Halves the grid spacing and quarters the time step.
    pub fn refined(&self) -> WarpedSpec {
        WarpedSpec { cells: self.cells * 2, dt: self.dt / 4.0, ..self.clone() }
    }
}

/// `ψ0(s) = sin s (1 + ε sin²s + δ sin²s cos s)` on `[0, π]`: a smooth,
/// non-symmetric deformation of the unit round sphere.
pub fn perturbed_profile(eps: f64, delta: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        let s = x.sin();
        s * (1.0 + eps * s * s + delta * s * s * x.cos())
    }
}

/// Grid quantities derived from one stored level.
#[derive(Clone, Debug)]
struct Level {
    length: f64,
    /// `dL/dt = V(L)`.
    dlength: f64,
    /// `ψ_ss / ψ` at the nodes.
    q: Vec<f64>,
    /// `V` at the nodes.
    v: Vec<f64>,
}

/// Evolved warped-product flow with all time levels kept.
#[derive(Clone, Debug)]
pub struct WarpedFlow {
    caps: Capabilities,
    cells: usize,
    dt: f64,
    times: Vec<f64>,
    psi: Vec<Vec<f64>>,
    levels: Vec<Level>,
}

/// Coefficients `(b, c)` of `ψ = s + b s³ + c s⁵` through the nodes at `2h`, `3h`.
fn pole_fit(p2: f64, p3: f64, h: f64) -> (f64, f64) {
    let r2 = p2 - 2.0 * h;
    let r3 = p3 - 3.0 * h;
    let b = (243.0 * r2 - 32.0 * r3) / (1080.0 * h.powi(3));
    let c = (8.0 * r3 - 27.0 * r2) / (1080.0 * h.powi(5));
    (b, c)
}

/// Sets the pole nodes to zero and the first interior nodes from the regular
/// expansion; returns the cubic coefficients at both poles.
fn slave_poles(psi: &mut [f64], h: f64) -> (f64, f64) {
    let nn = psi.len() - 1;
    let (b0, c0) = pole_fit(psi[2], psi[3], h);
    let (b1, c1) = pole_fit(psi[nn - 2], psi[nn - 3], h);
    psi[0] = 0.0;
    psi[nn] = 0.0;
    psi[1] = h + b0 * h.powi(3) + c0 * h.powi(5);
    psi[nn - 1] = h + b1 * h.powi(3) + c1 * h.powi(5);
    (b0, b1)
}

/// `ψ_ss/ψ` and the drift `V` on the nodes of a slaved profile.
fn drift(n: usize, psi: &[f64], h: f64, b0: f64, b1: f64) -> (Vec<f64>, Vec<f64>) {
    let nn = psi.len() - 1;
    let mut q = vec![0.0; nn + 1];
    for j in 1..nn {
        q[j] = (psi[j + 1] - 2.0 * psi[j] + psi[j - 1]) / (h * h * psi[j]);
    }
    q[0] = 6.0 * b0;
    q[nn] = 6.0 * b1;
    let mut v = vec![0.0; nn + 1];
    for j in 1..=nn {
        v[j] = v[j - 1] + 0.5 * h * (q[j] + q[j - 1]);
    }
    let scale = n as f64 - 1.0;
    v.iter_mut().for_each(|x| *x *= scale);
    (q, v)
}

/// `(dψ̂/dt, dL/dt)` of the semi-discrete system; `psi` must be slaved.
fn flow_rhs(n: usize, psi: &[f64], length: f64, b0: f64, b1: f64) -> (Vec<f64>, f64) {
    let nn = psi.len() - 1;
    let h = length / nn as f64;
    let (_, v) = drift(n, psi, h, b0, b1);
    let dl = v[nn];
    let mut dpsi = vec![0.0; nn + 1];
    for j in 2..nn - 1 {
        let ps = (psi[j + 1] - psi[j - 1]) / (2.0 * h);
        let pss = (psi[j + 1] - 2.0 * psi[j] + psi[j - 1]) / (h * h);
        let sigma = j as f64 / nn as f64;
        dpsi[j] = pss - (n as f64 - 2.0) * (1.0 - ps * ps) / psi[j] + ps * (sigma * dl - v[j]);
    }
    (dpsi, dl)
}

/// Fornberg weights: `w[k][j]` is the weight of `f(x_j)` in `f^{(k)}(z)`.
fn fornberg(z: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let np = xs.len();
    let mut c = vec![vec![0.0; np]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..np {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

const STENCIL: usize = 10;

#[derive(Clone, Copy)]
enum Parity {
    /// Odd about both poles (`ψ`).
    Odd,
    /// Even about both poles (`ψ_ss/ψ`).
    Even,
    /// Odd about the first pole, `f(L+u) = 2 f(L) - f(L-u)` at the second (`V`).
    Drift,
}

/// Node value with reflection across the poles.
fn reflected(f: &[f64], i: isize, parity: Parity) -> f64 {
    let nn = (f.len() - 1) as isize;
    if i < 0 {
        let v = f[(-i) as usize];
        match parity {
            Parity::Even => v,
            Parity::Odd | Parity::Drift => -v,
        }
    } else if i > nn {
        let v = f[(2 * nn - i) as usize];
        match parity {
            Parity::Even => v,
            Parity::Odd => -v,
            Parity::Drift => 2.0 * f[nn as usize] - v,
        }
    } else {
        f[i as usize]
    }
}

/// Taylor coefficients `f^{(k)}(s)/k!`, `k ≤ deg`, of the local interpolant
/// of a node function with spacing `h`.
fn taylor(f: &[f64], h: f64, s: f64, deg: usize, parity: Parity) -> Vec<f64> {
    let u = s / h;
    let i0 = u.floor() as isize - (STENCIL as isize / 2 - 1);
    let xs: Vec<f64> = (0..STENCIL).map(|j| (i0 + j as isize) as f64).collect();
    let w = fornberg(u, &xs, deg);
    let mut out = Vec::with_capacity(deg + 1);
    let mut fact = 1.0;
    for (k, wk) in w.iter().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        let acc: f64 = wk.iter().enumerate().map(|(j, wj)| wj * reflected(f, i0 + j as isize, parity)).sum();
        out.push(acc / (fact * h.powi(k as i32)));
    }
    out
}

/// Truncated power series in one variable.
fn series_mul(a: &[f64], b: &[f64], deg: usize) -> Vec<f64> {
    let mut out = vec![0.0; deg + 1];
    for (i, &x) in a.iter().enumerate().take(deg + 1) {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(deg + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// `f(j(ξ))` where `f` holds Taylor coefficients about `j(0)`.
fn series_compose(f: &[f64], j: &[f64], deg: usize) -> Vec<f64> {
    let mut d = j.to_vec();
    d.resize(deg + 1, 0.0);
    d[0] = 0.0;
    let mut out = vec![0.0; deg + 1];
    for &c in f.iter().rev() {
        out = series_mul(&out, &d, deg);
        out[0] += c;
    }
    out
}

fn series_deriv(a: &[f64]) -> Vec<f64> {
    a.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

impl WarpedFlow {
    /// Evolves `ψ0` (an arclength profile on `[0, length]`) over `[0, t_span]`.
    pub fn evolve(spec: &WarpedSpec, psi0: impl Fn(f64) -> f64) -> Result<WarpedFlow> {
        let n = spec.n;
        if n < 2 {
            return Err(Error::InvalidArgument(format!("warped flow needs n >= 2, got {n}")));
        }
        if spec.cells < 12 || !(spec.length > 0.0) || !(spec.t_span > 0.0) || !(spec.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("bad warped grid {spec:?}")));
        }
        let nn = spec.cells;
        let h0 = spec.dx();
        let slope0 = (psi0(h0) - psi0(-h0)) / (2.0 * h0);
        let slope_l = (psi0(spec.length + h0) - psi0(spec.length - h0)) / (2.0 * h0);
        if (slope0 - 1.0).abs() > 1e-2 || (slope_l + 1.0).abs() > 1e-2 || psi0(0.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "initial profile does not close smoothly: psi(0)={}, psi'(0)={slope0}, psi'(L)={slope_l}",
                psi0(0.0)
            )));
        }
        let mut psi: Vec<f64> = (0..=nn).map(|i| psi0(i as f64 * h0)).collect();
        if psi[1..nn].iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidArgument("initial profile must be positive in the interior".into()));
        }
        slave_poles(&mut psi, h0);
        let steps = (spec.t_span / spec.dt).round().max(1.0) as usize;
        let dt = spec.t_span / steps as f64;
        let mut length = spec.length;
        let mut psis = vec![psi.clone()];
        let mut lengths = vec![length];
        let mut times = vec![0.0];

        let stage = |base: &[f64], k: &[f64], c: f64, len: f64| -> (Vec<f64>, f64, f64) {
            let mut p: Vec<f64> = base.iter().zip(k).map(|(b, d)| b + c * d).collect();
            let (b0, b1) = slave_poles(&mut p, len / nn as f64);
            (p, b0, b1)
        };
        for step in 1..=steps {
            let h = length / nn as f64;
            let limit = 0.6 * h * h;
            if dt > limit {
                return Err(Error::Cfl { dt, limit });
            }
            let zero = vec![0.0; nn + 1];
            let (p1, b0, b1) = stage(&psi, &zero, 0.0, length);
            let (k1, l1) = flow_rhs(n, &p1, length, b0, b1);
            let (p2, b0, b1) = stage(&psi, &k1, 0.5 * dt, length + 0.5 * dt * l1);
            let (k2, l2) = flow_rhs(n, &p2, length + 0.5 * dt * l1, b0, b1);
            let (p3, b0, b1) = stage(&psi, &k2, 0.5 * dt, length + 0.5 * dt * l2);
            let (k3, l3) = flow_rhs(n, &p3, length + 0.5 * dt * l2, b0, b1);
            let (p4, b0, b1) = stage(&psi, &k3, dt, length + dt * l3);
            let (k4, l4) = flow_rhs(n, &p4, length + dt * l3, b0, b1);
            for i in 0..=nn {
                psi[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            length += dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
            let t = step as f64 * dt;
            if !(length > 0.0) {
                return Err(Error::ProfileCollapse(t));
            }
            slave_poles(&mut psi, length / nn as f64);
            if psi[1..nn].iter().any(|&p| !(p > 0.0)) {
                return Err(Error::ProfileCollapse(t));
            }
            psis.push(psi.clone());
            lengths.push(length);
            times.push(t);
        }
        Ok(WarpedFlow::from_parts(n, times, psis, lengths))
    }

    fn from_parts(n: usize, times: Vec<f64>, psi: Vec<Vec<f64>>, lengths: Vec<f64>) -> WarpedFlow {
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        let cells = psi[0].len() - 1;
        let levels = psi
            .iter()
            .zip(&lengths)
            .map(|(p, &length)| {
                let mut p = p.clone();
                let h = length / cells as f64;
                let (b0, b1) = slave_poles(&mut p, h);
                let (q, v) = drift(n, &p, h, b0, b1);
                Level { length, dlength: v[cells], q, v }
            })
            .collect();
        WarpedFlow {
            caps: Capabilities {
                name: format!("warped:n={n},L={},cells={cells}", lengths[0]),
                n,
                t_min: times[0] - 0.5 * dt,
                t_max: times[times.len() - 1] + 0.5 * dt,
                closed_form: false,
                max_xdeg: 6,
                max_tdeg: 1,
                ancient: false,
                time_step: Some(dt),
            },
            cells,
            dt,
            times,
            psi,
            levels,
        }
    }

    /// Initial grid spacing.
    pub fn dx(&self) -> f64 {
        self.length() / self.cells as f64
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Initial pole-to-pole length; labels `x` range over `(0, length)`.
    pub fn length(&self) -> f64 {
        self.levels[0].length
    }

    /// Pole-to-pole length at time level `k`.
    pub fn length_at(&self, k: usize) -> f64 {
        self.levels[k].length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// `ψ` at time level `k` on the uniform arclength grid.
    pub fn psi(&self, k: usize) -> &[f64] {
        &self.psi[k]
    }

    fn level_of(&self, t: f64, tdeg: usize) -> Result<usize> {
        if self.dt == 0.0 {
            return Err(Error::OutOfDomain("snapshot holds a single time level".into()));
        }
        let r = (t - self.times[0]) / self.dt;
        let k = r.round();
        if (r - k).abs() > 1e-6 || k < 0.0 || k as usize >= self.times.len() {
            return Err(Error::OutOfDomain(format!("t = {t} is not a stored time level (step {})", self.dt)));
        }
        let k = k as usize;
        if tdeg > 0 && (k == 0 || k + 1 >= self.times.len()) {
            return Err(Error::StencilRoom(format!("time level {k} has no neighbours for a central difference")));
        }
        Ok(k)
    }

    fn label_check(&self, x0: f64) -> Result<()> {
        if !(x0 > 0.0 && x0 < self.length()) {
            return Err(Error::OutOfDomain(format!("label x = {x0} outside (0, {})", self.length())));
        }
        Ok(())
    }

    /// Taylor series of the drift `dσ/dt` about `sigma` at level `k`.
    fn drift_series(&self, k: usize, sigma: f64, deg: usize) -> Vec<f64> {
        let lev = &self.levels[k];
        let l = lev.length;
        let h = l / self.cells as f64;
        let s = sigma * l;
        let nf = self.caps.n as f64 - 1.0;
        let q = taylor(&lev.q, h, s, deg.saturating_sub(1), Parity::Even);
        let v0 = taylor(&lev.v, h, s, 0, Parity::Drift)[0];
        let mut out = vec![0.0; deg + 1];
        out[0] = (v0 - sigma * lev.dlength) / l;
        if deg >= 1 {
            out[1] = nf * q[0] - lev.dlength / l;
        }
        for m in 2..=deg {
            out[m] = l.powi(m as i32 - 1) * nf * q[m - 1] / m as f64;
        }
        out
    }

    /// Taylor series in `σ` of `ψ̂` at level `k` about `sigma`.
    fn profile_series(&self, k: usize, sigma: f64, deg: usize) -> Vec<f64> {
        let l = self.levels[k].length;
        let h = l / self.cells as f64;
        let mut c = taylor(&self.psi[k], h, sigma * l, deg, Parity::Odd);
        for (m, cm) in c.iter_mut().enumerate() {
            *cm *= l.powi(m as i32);
        }
        c
    }

    /// Series in `ξ` of the `σ`-position of label `x0 + ξ` at level `k`.
    fn position_series(&self, x0: f64, k: usize, deg: usize) -> Vec<f64> {
        let mut j = vec![0.0; deg + 1];
        j[0] = x0 / self.length();
        if deg >= 1 {
            j[1] = 1.0 / self.length();
        }
        for lev in 0..k {
            let dt = self.times[lev + 1] - self.times[lev];
            let f0 = series_compose(&self.drift_series(lev, j[0], deg), &j, deg);
            let pred: Vec<f64> = j.iter().zip(&f0).map(|(a, b)| a + dt * b).collect();
            let f1 = series_compose(&self.drift_series(lev + 1, pred[0], deg), &pred, deg);
            for m in 0..=deg {
                j[m] += 0.5 * dt * (f0[m] + f1[m]);
            }
        }
        j
    }

    /// Partial derivatives `[k][m]` (x-order, t-order) of `ψ` and `φ` at a label.
    fn label_partials(&self, x0: f64, k: usize, xdeg: usize, tdeg: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let d = xdeg + 1;
        let j = self.position_series(x0, k, d);
        let sigma = j[0];
        let lev = &self.levels[k];
        let prof = self.profile_series(k, sigma, d);
        let psi = series_compose(&prof, &j, xdeg);
        let jx = series_deriv(&j);
        let phi: Vec<f64> = jx.iter().map(|c| lev.length * c).collect();
        let (mut psi_t, mut phi_t) = (Vec::new(), Vec::new());
        if tdeg >= 1 {
            let up = self.profile_series(k + 1, sigma, d);
            let down = self.profile_series(k - 1, sigma, d);
            let dt2 = self.times[k + 1] - self.times[k - 1];
            let prof_t: Vec<f64> = up.iter().zip(&down).map(|(a, b)| (a - b) / dt2).collect();
            let u = series_compose(&self.drift_series(k, sigma, d), &j, d);
            let prof_s = series_compose(&series_deriv(&prof), &j, xdeg);
            let adv = series_mul(&prof_s, &u, xdeg);
            psi_t = series_compose(&prof_t, &j, xdeg).iter().zip(&adv).map(|(a, b)| a + b).collect();
            let ux = series_deriv(&u);
            phi_t = jx.iter().zip(&ux).map(|(a, b)| lev.dlength * a + lev.length * b).collect();
        }
        let mut fact = 1.0;
        let mut psi_p = Vec::with_capacity(xdeg + 1);
        let mut phi_p = Vec::with_capacity(xdeg + 1);
        for m in 0..=xdeg {
            if m > 0 {
                fact *= m as f64;
            }
            let mut a = vec![psi[m] * fact];
            let mut b = vec![phi[m] * fact];
            if tdeg >= 1 {
                a.push(psi_t[m] * fact);
                b.push(phi_t[m] * fact);
            }
            psi_p.push(a);
            phi_p.push(b);
        }
        (psi_p, phi_p)
    }

    /// Writes the snapshot text format: header (with the initial length), times
    /// line, one `ψ` line per time level, then one line of pole-to-pole lengths.
    pub fn to_snapshot(&self) -> String {
        let mut s = format!(
            "warped n={} L={} ns={} nt={}\n",
            self.caps.n,
            self.length(),
            self.cells + 1,
            self.times.len()
        );
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "{}", join(&self.times));
        for row in &self.psi {
            let _ = writeln!(s, "{}", join(row));
        }
        let lengths: Vec<f64> = self.levels.iter().map(|l| l.length).collect();
        let _ = writeln!(s, "{}", join(&lengths));
        s
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_snapshot())?;
        Ok(())
    }

    pub fn from_snapshot(text: &str) -> Result<WarpedFlow> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty snapshot".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("warped") {
            return Err(Error::Parse(format!("bad snapshot header `{header}`")));
        }
        let (mut n, mut len, mut ns, mut nt) = (None, None, None, None);
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| Error::Parse(format!("bad header field `{f}`")))?;
            let bad = |e: String| Error::Parse(format!("bad header value `{f}`: {e}"));
            match k {
                "n" => n = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "L" => len = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "ns" => ns = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "nt" => nt = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                _ => return Err(Error::Parse(format!("unknown header field `{k}`"))),
            }
        }
        let missing = || Error::Parse("snapshot header needs n, L, ns and nt".into());
        let (n, len, ns, nt) = (n.ok_or_else(missing)?, len.ok_or_else(missing)?, ns.ok_or_else(missing)?, nt.ok_or_else(missing)?);
        if ns < 13 || nt == 0 || n < 2 {
            return Err(Error::Parse(format!("unsupported snapshot sizes n={n}, ns={ns}, nt={nt}")));
        }
        let parse_row = |line: Option<&str>, want: usize, what: &str| -> Result<Vec<f64>> {
            let line = line.ok_or_else(|| Error::Parse(format!("snapshot truncated while reading {what}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|e| Error::Parse(format!("bad number `{x}` in {what}: {e}"))))
                .collect::<Result<_>>()?;
            if row.len() != want {
                return Err(Error::Parse(format!("{what}: expected {want} values, got {}", row.len())));
            }
            Ok(row)
        };
        let times = parse_row(lines.next(), nt, "times")?;
        let psi = (0..nt).map(|_| parse_row(lines.next(), ns, "psi profile")).collect::<Result<Vec<_>>>()?;
        let lengths = parse_row(lines.next(), nt, "lengths")?;
        if (lengths[0] - len).abs() > 1e-12 * len.abs().max(1.0) {
            return Err(Error::Parse(format!("header L={len} disagrees with first length {}", lengths[0])));
        }
        if lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::Parse("lengths must be positive".into()));
        }
        if nt > 1 {
            let dt = times[1] - times[0];
            if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
                return Err(Error::Parse("snapshot times must be uniformly spaced and increasing".into()));
            }
        }
        Ok(WarpedFlow::from_parts(n, times, psi, lengths))
    }

    pub fn read_snapshot(path: &Path) -> Result<WarpedFlow> {
        WarpedFlow::from_snapshot(&std::fs::read_to_string(path)?)
    }

    /// Arclength position of label `x0` at time `t`.
    pub fn arclength_of(&self, x0: f64, t: f64) -> Result<f64> {
        self.label_check(x0)?;
        let k = self.level_of(t, 0)?;
        Ok(self.position_series(x0, k, 0)[0] * self.levels[k].length)
    }

    /// Scalar curvature from the reduction formulas
    /// `K_rad = -ψ_ss/ψ`, `K_sph = (1 - ψ_s²)/ψ²`:
    /// `scal = 2(n-1) K_rad + (n-1)(n-2) K_sph`, evaluated on the arclength grid.
    pub fn reduced_scal(&self, x0: f64, t: f64) -> Result<f64> {
        let s = self.arclength_of(x0, t)?;
        let k = self.level_of(t, 0)?;
        let h = self.levels[k].length / self.cells as f64;
        let c = taylor(&self.psi[k], h, s, 2, Parity::Odd);
        let (psi, ps, pss) = (c[0], c[1], 2.0 * c[2]);
        let nf = self.caps.n as f64;
        Ok(-2.0 * (nf - 1.0) * pss / psi + (nf - 1.0) * (nf - 2.0) * (1.0 - ps * ps) / (psi * psi))
    }
}

impl GeometryProvider for WarpedFlow {
    fn capabilities(&self) -> &Capabilities {
        &self.caps
    }

    fn metric_jet(&self, x: &[f64], t: f64, xdeg: usize, tdeg: usize) -> Result<Vec<Jet>> {
        self.check_domain(x, t)?;
        self.check_orders(xdeg, tdeg)?;
        self.label_check(x[0])?;
        let n = self.caps.n;
        let k = self.level_of(t, tdeg)?;
        let shape = Shape::get(n, xdeg, tdeg);
        let (psi_p, phi_p) = self.label_partials(x[0], k, xdeg, tdeg);
        let psi = Jet::from_partials(&shape, 0, &psi_p);
        let phi = Jet::from_partials(&shape, 0, &phi_p);
        let mut r2 = Jet::zero(&shape);
        for a in 1..n {
            let y = Jet::variable(&shape, a, x[a]);
            r2 = &r2 + &(&y * &y);
        }
        let one_plus = r2 + 1.0;
        let sigma = (&one_plus * &one_plus).recip() * 4.0;
        let sph = &(&psi * &psi) * &sigma;
        let mut g = conformal(n, sph);
        g[0] = &phi * &phi;
        Ok(g)
    }

    /// Labels spread over the middle of the profile, `y_a = 0.15 a`, and
    /// stored levels that leave room for central time differences.
    fn sample_grid(&self, nx: usize, nt: usize) -> Vec<(Vec<f64>, f64)> {
        let n = self.caps.n;
        let len = self.length();
        let labels: Vec<f64> = (0..nx.max(1))
            .map(|j| if nx <= 1 { 0.5 * len } else { len * (0.2 + 0.6 * j as f64 / (nx - 1) as f64) })
            .collect();
        let levels = self.times.len();
        let floor = 5usize.min(levels.saturating_sub(2)).max(1);
        let top = levels.saturating_sub(2).max(floor);
        let mut ks: Vec<usize> = (0..nt.max(1))
            .map(|j| if nt <= 1 { (floor + top) / 2 } else { floor + (top - floor) * j / (nt - 1) })
            .collect();
        ks.dedup();
        let mut out = Vec::new();
        for &k in &ks {
            for &l in &labels {
                let mut x = vec![0.0; n];
                x[0] = l;
                for (a, y) in x.iter_mut().enumerate().skip(1) {
                    *y = 0.15 * a as f64;
                }
                out.push((x, self.times[k]));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_matches_central_stencils() {
        let w = fornberg(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[1][0] + 0.5).abs() < 1e-15 && (w[1][2] - 0.5).abs() < 1e-15);
        assert!((w[2][0] - 1.0).abs() < 1e-15 && (w[2][1] + 2.0).abs() < 1e-15);
        let xs: Vec<f64> = (0..10).map(|j| j as f64 - 4.0).collect();
        let w = fornberg(0.3, &xs, 9);
        // exact on x^9 at z = 0.3
        let f: Vec<f64> = xs.iter().map(|x| x.powi(9)).collect();
        let d3: f64 = w[3].iter().zip(&f).map(|(a, b)| a * b).sum();
        assert!((d3 - 504.0 * 0.3f64.powi(6)).abs() < 1e-9, "{d3}");
    }

    #[test]
    fn series_composition() {
        // exp(ξ + ξ²) to degree 3: 1 + ξ + 3/2 ξ² + 7/6 ξ³
        let f = [1.0, 1.0, 0.5, 1.0 / 6.0];
        let j = [0.0, 1.0, 1.0, 0.0];
        let c = series_compose(&f, &j, 3);
        let want = [1.0, 1.0, 1.5, 7.0 / 6.0];
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn pole_fit_is_exact_on_quintics() {
        let h = 0.1;
        let f = |s: f64| s - 0.3 * s.powi(3) + 0.05 * s.powi(5);
        let (b, c) = pole_fit(f(2.0 * h), f(3.0 * h), h);
        assert!((b + 0.3).abs() < 1e-9 && (c - 0.05).abs() < 1e-7, "{b} {c}");
    }

    fn round_spec(cells: usize) -> WarpedSpec {
        let length = std::f64::consts::PI;
        let h = length / cells as f64;
        WarpedSpec { n: 3, length, cells, t_span: 0.04, dt: 0.25 * h * h }
    }

    #[test]
    fn round_sphere_shrinks_like_closed_form() {
        let flow = WarpedFlow::evolve(&round_spec(32), |s: f64| s.sin()).unwrap();
        let last = flow.times().len() - 1;
        let t = flow.times()[last];
        let r = (1.0 - 4.0 * t).sqrt();
        assert!((flow.length_at(last) - std::f64::consts::PI * r).abs() < 1e-3, "{}", flow.length_at(last) - std::f64::consts::PI * r);
        let psi = flow.psi(last);
        assert!((psi[16] - r).abs() < 1e-4, "{} vs {r}", psi[16]);
        // labels do not drift on the round sphere, and φ stays r
        let k = last - 1;
        let (p, f) = flow.label_partials(1.0, k, 2, 1);
        let rk = (1.0 - 4.0 * flow.times()[k]).sqrt();
        assert!((p[0][0] - rk * (1.0f64).sin()).abs() < 1e-4);
        assert!((f[0][0] - rk).abs() < 1e-4 && f[1][0].abs() < 1e-4);
        assert!((f[0][1] + 2.0 / rk).abs() < 1e-3, "{}", f[0][1]);
    }

    #[test]
    fn snapshot_round_trip() {
        let spec = WarpedSpec { t_span: 0.005, dt: 0.001, ..round_spec(16) };
        let flow = WarpedFlow::evolve(&spec, perturbed_profile(0.1, 0.05)).unwrap();
        let back = WarpedFlow::from_snapshot(&flow.to_snapshot()).unwrap();
        assert_eq!(back.times().len(), flow.times().len());
        assert_eq!(back.psi(3), flow.psi(3));
        let t = flow.times()[2];
        let a = flow.metric_jet(&[1.0, 0.1, 0.2], t, 2, 1).unwrap();
        let b = back.metric_jet(&[1.0, 0.1, 0.2], t, 2, 1).unwrap();
        assert_eq!(a[0].value(), b[0].value());
        assert!(WarpedFlow::from_snapshot("warped n=3 L=1 ns=20\n").is_err());
    }

    #[test]
    fn cfl_and_profile_checks() {
        let bad_dt = WarpedSpec { dt: 1.0, ..round_spec(16) };
        assert!(matches!(WarpedFlow::evolve(&bad_dt, |s: f64| s.sin()), Err(Error::Cfl { .. })));
        assert!(WarpedFlow::evolve(&round_spec(16), |s: f64| 2.0 * s.sin()).is_err());
        let flow = WarpedFlow::evolve(&WarpedSpec { t_span: 0.002, ..round_spec(16) }, |s: f64| s.sin()).unwrap();
        assert!(flow.metric_jet(&[0.0, 0.0, 0.0], flow.times()[1], 2, 0).is_err());
        assert!(flow.metric_jet(&[1.0, 0.0, 0.0], 0.5 * flow.dt(), 2, 0).is_err());
    }
}
