//! Bundled Ricci flows.
//!
//! A provider hands out the metric `g_ij(x, t)` as a matrix of jets, from
//! which [`CurvatureJets`] derives the connection, the curvature and their
//! covariant derivatives. Closed-form providers evaluate their formula on
//! jets directly, so derivatives are exact to roundoff; the warped flow
//! builds its jets from finite differences of grid data.

mod curvature;
mod warped;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use curvature::CurvatureJets;
pub use warped::{perturbed_profile, WarpedFlow, WarpedSpec};

use crate::error::{Error, Result};
use crate::jet::{Jet, Scalar, Shape};

/// What a provider can deliver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capabilities {
    pub name: String,
    pub n: usize,
    /// Open time interval on which the flow is defined.
    pub t_min: f64,
    pub t_max: f64,
    pub closed_form: bool,
    /// Highest spatial derivative order of `g` available.
    pub max_xdeg: usize,
    /// Highest time derivative order of `g` available.
    pub max_tdeg: usize,
    /// The flow exists for all negative times.
    pub ancient: bool,
    /// Grid time step for numeric providers.
    pub time_step: Option<f64>,
}

/// A Ricci flow `∂_t g = -2 Ric` that can be queried at points `(x, t)`.
pub trait GeometryProvider: Send + Sync {
    fn capabilities(&self) -> &Capabilities;

    /// `g_ij` at `(x, t)` as jets truncated at spatial degree `xdeg` and time degree `tdeg`.
    fn metric_jet(&self, x: &[f64], t: f64, xdeg: usize, tdeg: usize) -> Result<Vec<Jet>>;

    /// `nx * nt` sample points spread over a representative part of the domain.
    fn sample_grid(&self, nx: usize, nt: usize) -> Vec<(Vec<f64>, f64)>;

    fn dim(&self) -> usize {
        self.capabilities().n
    }

    fn check_domain(&self, x: &[f64], t: f64) -> Result<()> {
        let caps = self.capabilities();
        if x.len() != caps.n {
            return Err(Error::DimensionMismatch { expected: caps.n, got: x.len() });
        }
        if !(t > caps.t_min && t < caps.t_max) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfDomain(format!(
                "{} is defined for t in ({}, {}), got x={x:?}, t={t}",
                caps.name, caps.t_min, caps.t_max
            )));
        }
        Ok(())
    }

    fn check_orders(&self, xdeg: usize, tdeg: usize) -> Result<()> {
        let caps = self.capabilities();
        if xdeg > caps.max_xdeg || tdeg > caps.max_tdeg {
            return Err(Error::DerivativeOrder { xdeg, tdeg });
        }
        Ok(())
    }

    /// Curvature jets at `(x, t)` from a metric jet of the given degrees.
    fn curvature(&self, x: &[f64], t: f64, xdeg: usize, tdeg: usize) -> Result<CurvatureJets> {
        let g = self.metric_jet(x, t, xdeg, tdeg)?;
        CurvatureJets::from_metric(g, self.dim(), x, t)
    }
}

/// Evaluates a closed-form metric on jets expanded at `(x, t)`.
fn closed_form_jet<F>(n: usize, x: &[f64], t: f64, xdeg: usize, tdeg: usize, metric: F) -> Vec<Jet>
where
    F: Fn(&[Jet], &Jet) -> Vec<Jet>,
{
    let shape = Shape::get(n, xdeg, tdeg);
    let xs: Vec<Jet> = (0..n).map(|i| Jet::variable(&shape, i, x[i])).collect();
    let tj = Jet::variable(&shape, n, t);
    metric(&xs, &tj)
}

fn conformal<T: Scalar>(n: usize, factor: T) -> Vec<T> {
    let zero = factor.cst(0.0);
    (0..n * n).map(|k| if k / n == k % n { factor.clone() } else { zero.clone() }).collect()
}

fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    if k <= 1 {
        return vec![0.5 * (a + b)];
    }
    (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
}

/// Euclidean space, constant in time.
#[derive(Clone, Debug)]
pub struct FlatFlow {
    caps: Capabilities,
}

pub fn flat_flow(n: usize) -> Result<FlatFlow> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("flat flow needs n >= 2, got {n}")));
    }
    Ok(FlatFlow {
        caps: Capabilities {
            name: format!("flat:n={n}"),
            n,
            t_min: f64::NEG_INFINITY,
            t_max: f64::INFINITY,
            closed_form: true,
            max_xdeg: 8,
            max_tdeg: 2,
            ancient: true,
            time_step: None,
        },
    })
}

impl GeometryProvider for FlatFlow {
    fn capabilities(&self) -> &Capabilities {
        &self.caps
    }

    fn metric_jet(&self, x: &[f64], t: f64, xdeg: usize, tdeg: usize) -> Result<Vec<Jet>> {
        self.check_domain(x, t)?;
        self.check_orders(xdeg, tdeg)?;
        Ok(closed_form_jet(self.caps.n, x, t, xdeg, tdeg, |_, tj| conformal(self.caps.n, tj.cst(1.0))))
    }

    fn sample_grid(&self, nx: usize, nt: usize) -> Vec<(Vec<f64>, f64)> {
        let n = self.caps.n;
        let mut out = Vec::new();
        for t in linspace(0.05, 1.0, nt) {
            for s in linspace(-1.0, 1.0, nx) {
                out.push(((0..n).map(|i| s * (1.0 + 0.3 * i as f64)).collect(), t));
            }
        }
        out
    }
}

/// Round sphere of initial radius `r0` shrinking under Ricci flow, in
/// stereographic coordinates: `g(t) = (r0² - 2(n-1)t) · 4|dx|² / (1 + |x|²)²`.
#[derive(Clone, Debug)]
pub struct SphereFlow {
    caps: Capabilities,
    r0: f64,
}

pub fn sphere_flow(n: usize, r0: f64) -> Result<SphereFlow> {
    if n < 2 || !(r0 > 0.0) {
        return Err(Error::InvalidArgument(format!("sphere flow needs n >= 2 and r0 > 0, got n={n}, r0={r0}")));
    }
    Ok(SphereFlow {
        caps: Capabilities {
            name: format!("sphere:n={n},r0={r0}"),
            n,
            t_min: 0.0,
            t_max: r0 * r0 / (2.0 * (n as f64 - 1.0)),
            closed_form: true,
            max_xdeg: 8,
            max_tdeg: 2,
            ancient: false,
            time_step: None,
        },
        r0,
    })
}

impl SphereFlow {
    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Sectional curvature `1 / (r0² - 2(n-1)t)`.
    pub fn kappa(&self, t: f64) -> f64 {
        1.0 / (self.r0 * self.r0 - 2.0 * (self.caps.n as f64 - 1.0) * t)
    }

    pub fn metric<T: Scalar>(&self, x: &[T], t: &T) -> Vec<T> {
        let n = self.caps.n;
        let mut r2 = t.cst(0.0);
        for xi in x {
            r2 = r2 + xi.clone() * xi.clone();
        }
        let one_plus = r2 + t.cst(1.0);
        let c = t.cst(self.r0 * self.r0) - t.clone() * t.cst(2.0 * (n as f64 - 1.0));
        let factor = c * t.cst(4.0) / (one_plus.clone() * one_plus);
        conformal(n, factor)
    }
}

impl GeometryProvider for SphereFlow {
    fn capabilities(&self) -> &Capabilities {
        &self.caps
    }

    fn metric_jet(&self, x: &[f64], t: f64, xdeg: usize, tdeg: usize) -> Result<Vec<Jet>> {
        self.check_domain(x, t)?;
        self.check_orders(xdeg, tdeg)?;
        Ok(closed_form_jet(self.caps.n, x, t, xdeg, tdeg, |xs, tj| self.metric(xs, tj)))
    }

    fn sample_grid(&self, nx: usize, nt: usize) -> Vec<(Vec<f64>, f64)> {
        let n = self.caps.n;
        let tmax = self.caps.t_max;
        let mut out = Vec::new();
        for t in linspace(0.08 * tmax, 0.8 * tmax, nt) {
            for s in linspace(-1.2, 1.2, nx) {
                out.push(((0..n).map(|i| s * [1.0, -0.6, 0.35, 0.2][i % 4]).collect(), t));
            }
        }
        out
    }
}

/// Hamilton's cigar soliton as a Ricci flow on `R^2`:
/// `g(t) = (dx² + dy²) / (e^{4t} + x² + y²)`, an eternal solution whose
/// steady soliton field is `V = 2x ∂_x + 2y ∂_y`.
#[derive(Clone, Debug)]
pub struct CigarFlow {
    caps: Capabilities,
}

pub fn cigar_flow() -> CigarFlow {
    CigarFlow {
        caps: Capabilities {
            name: "cigar".into(),
            n: 2,
            t_min: f64::NEG_INFINITY,
            t_max: f64::INFINITY,
            closed_form: true,
            max_xdeg: 8,
            max_tdeg: 2,
            ancient: true,
            time_step: None,
        },
    }
}

impl CigarFlow {
    pub fn metric<T: Scalar>(&self, x: &[T], t: &T) -> Vec<T> {
        let a = (t.clone() * t.cst(4.0)).exp();
        let denom = a + x[0].clone() * x[0].clone() + x[1].clone() * x[1].clone();
        conformal(2, denom.recip())
    }

    /// `scal = 4 e^{4t} / (e^{4t} + x² + y²)`.
    pub fn scal(&self, x: &[f64], t: f64) -> f64 {
        let a = (4.0 * t).exp();
        4.0 * a / (a + x[0] * x[0] + x[1] * x[1])
    }

    /// The steady soliton field `V = 2x`.
    pub fn soliton_field(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| 2.0 * v).collect()
    }
}

impl GeometryProvider for CigarFlow {
    fn capabilities(&self) -> &Capabilities {
        &self.caps
    }

    fn metric_jet(&self, x: &[f64], t: f64, xdeg: usize, tdeg: usize) -> Result<Vec<Jet>> {
        self.check_domain(x, t)?;
        self.check_orders(xdeg, tdeg)?;
        Ok(closed_form_jet(2, x, t, xdeg, tdeg, |xs, tj| self.metric(xs, tj)))
    }

    fn sample_grid(&self, nx: usize, nt: usize) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::new();
        for t in linspace(-0.5, 0.5, nt) {
            for s in linspace(-2.0, 2.0, nx) {
                out.push((vec![s, 0.5 - 0.4 * s], t));
            }
        }
        out
    }
}

/// Shared handle to any provider.
pub type Provider = Arc<dyn GeometryProvider>;

/// Parses `flat:n=3`, `sphere:n=3,r0=1`, `cigar` or `warped:<snapshot path>`.
pub fn provider_from_spec(spec: &str) -> Result<Provider> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let params = |rest: &str| -> Result<Vec<(String, f64)>> {
        rest.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|kv| {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected key=value in provider spec, got `{kv}`")))?;
                let v: f64 = v.trim().parse().map_err(|e| Error::Parse(format!("bad value for {k}: {e}")))?;
                Ok((k.trim().to_string(), v))
            })
            .collect()
    };
    let get = |ps: &[(String, f64)], key: &str, default: f64| -> f64 {
        ps.iter().find(|(k, _)| k == key).map(|(_, v)| *v).unwrap_or(default)
    };
    let as_dim = |v: f64| -> Result<usize> {
        if v.fract() != 0.0 || v < 0.0 {
            return Err(Error::Parse(format!("dimension must be a nonnegative integer, got {v}")));
        }
        Ok(v as usize)
    };
    match kind.trim() {
        "flat" => {
            let ps = params(rest)?;
            Ok(Arc::new(flat_flow(as_dim(get(&ps, "n", 3.0))?)?))
        }
        "sphere" => {
            let ps = params(rest)?;
            Ok(Arc::new(sphere_flow(as_dim(get(&ps, "n", 3.0))?, get(&ps, "r0", 1.0))?))
        }
        "cigar" => Ok(Arc::new(cigar_flow())),
        "warped" => {
            if rest.is_empty() {
                return Err(Error::Parse("warped provider needs a snapshot path: warped:<path>".into()));
            }
            Ok(Arc::new(WarpedFlow::read_snapshot(std::path::Path::new(rest))?))
        }
        other => Err(Error::Parse(format!("unknown provider `{other}`"))),
    }
}

/// `max_ij |∂_t g_ij + 2 Ric_ij|` at `(x, t)`.
pub fn ricci_flow_residual(provider: &dyn GeometryProvider, x: &[f64], t: f64) -> Result<f64> {
    let cj = provider.curvature(x, t, 2, 1)?;
    let n = cj.n;
    let mut worst = 0.0f64;
    for k in 0..n * n {
        let dt_g = cj.g[k].partial(&time_multi_index(n));
        worst = worst.max((dt_g + 2.0 * cj.ric[k].value()).abs());
    }
    Ok(worst)
}

/// Multi-index selecting one time derivative.
pub(crate) fn time_multi_index(n: usize) -> Vec<usize> {
    let mut e = vec![0; n + 1];
    e[n] = 1;
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_curvature_vanishes() {
        let f = flat_flow(3).unwrap();
        let cj = f.curvature(&[0.1, 0.2, 0.3], 1.0, 4, 0).unwrap();
        assert_eq!(cj.scal.value(), 0.0);
        assert_eq!(ricci_flow_residual(&f, &[0.0; 3], 0.5).unwrap(), 0.0);
        assert!(flat_flow(1).is_err());
    }

    #[test]
    fn sphere_scalar_curvature() {
        let s = sphere_flow(3, 1.0).unwrap();
        let cj = s.curvature(&[0.3, -0.2, 0.5], 0.1, 2, 0).unwrap();
        assert!((cj.scal.value() - 10.0).abs() < 1e-12, "{}", cj.scal.value());
        assert!(ricci_flow_residual(&s, &[0.3, -0.2, 0.5], 0.1).unwrap() < 1e-12);
        assert!(s.curvature(&[0.0; 3], 0.3, 2, 0).is_err());
        assert!(s.curvature(&[0.0; 3], 0.1, 9, 0).is_err());
    }

    #[test]
    fn sphere_ricci_derivative_vanishes() {
        let s = sphere_flow(3, 1.0).unwrap();
        let cj = s.curvature(&[0.4, 0.1, -0.7], 0.05, 4, 0).unwrap();
        let dric = cj.dric.unwrap();
        assert!(dric.iter().all(|j| j.value().abs() < 1e-11));
        let ddric = cj.ddric.unwrap();
        assert!(ddric.iter().all(|j| j.value().abs() < 1e-10));
    }

    #[test]
    fn cigar_scalar_curvature() {
        let c = cigar_flow();
        let cj = c.curvature(&[0.0, 0.0], 0.0, 2, 1).unwrap();
        assert!((cj.scal.value() - 4.0).abs() < 1e-13);
        for (x, t) in c.sample_grid(4, 3) {
            let cj = c.curvature(&x, t, 2, 0).unwrap();
            assert!((cj.scal.value() - c.scal(&x, t)).abs() < 1e-12);
            assert!(ricci_flow_residual(&c, &x, t).unwrap() < 1e-12);
        }
    }

    #[test]
    fn provider_specs() {
        assert_eq!(provider_from_spec("sphere:n=4,r0=2").unwrap().dim(), 4);
        assert_eq!(provider_from_spec("flat:n=2").unwrap().dim(), 2);
        assert_eq!(provider_from_spec("cigar").unwrap().dim(), 2);
        assert!(provider_from_spec("torus").is_err());
        assert!(provider_from_spec("sphere:n=3.5").is_err());
        assert!(provider_from_spec("warped:/nonexistent/file").is_err());
    }
}
