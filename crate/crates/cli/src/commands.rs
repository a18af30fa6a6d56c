//! The verification commands. Each turns a [`RunConfig`] into an [`Output`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use harnack::acvt::{
    q_map, random_acvt, random_cone_tensor, random_contraction, validate_acvt, AlgCurvTensor, ContractionMetric,
};
use harnack::cone::{
    build_block_matrix, cone_membership_with, deform_to_boundary, isotropic_form, q_boundary_decomposition,
    second_variation_form, spatial_identity, trace_inequality_value, FourTuple, MembershipOptions,
};
use harnack::geometries::{
    perturbed_profile, provider_from_spec, ricci_flow_residual, GeometryProvider, Provider, WarpedFlow, WarpedSpec,
};
use harnack::odeflow::{integrate_ode, IntegratorConfig};
use harnack::spacetime::{
    assemble_spacetime_s, compute_point, evolution_residual, h_evolution_check, hamilton_identity_residual,
    harnack_min, scan_csv, soliton_detect, trace_harnack_min, Mode, ScanRow, SolitonMode,
};
use harnack::Error;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{RunConfig, WarpedParams};
use crate::error::CliError;
use crate::report::{Check, Kind, Output, ReportDocument};

/// A check a command can emit, with its default tolerance.
struct CheckSpec {
    name: &'static str,
    kind: Kind,
    tol: f64,
    anchor: &'static str,
}

impl CheckSpec {
    fn check(&self, cfg: &RunConfig, value: f64) -> Check {
        self.check_with_default(cfg, value, self.tol)
    }

    fn check_with_default(&self, cfg: &RunConfig, value: f64, default: f64) -> Check {
        Check::new(self.name, self.kind, value, cfg.tol(self.name, default), self.anchor)
    }
}

fn names(specs: &[CheckSpec]) -> Vec<&'static str> {
    specs.iter().map(|s| s.name).collect()
}

fn relative(value: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        value / scale
    } else {
        value
    }
}

fn min_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::INFINITY, f64::min)
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Uniform in `[-1, 1)`.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    2.0 * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64) - 1.0
}

fn parse_mode(cfg: &RunConfig) -> Result<Mode, CliError> {
    Ok(cfg.mode.as_deref().map(str::parse).transpose()?.unwrap_or_default())
}

fn load_provider(cfg: &RunConfig, default: &str) -> Result<Provider, CliError> {
    let spec = cfg.provider.as_deref().unwrap_or(default);
    provider_from_spec(spec).map_err(|e| match e {
        Error::Io(io) => CliError::Io(format!("provider `{spec}`: {io}")),
        other => CliError::Core(other),
    })
}

/// Sample points of the provider usable in `mode` (`t > 0` unless ancient).
fn sample_points(p: &dyn GeometryProvider, cfg: &RunConfig, mode: Mode, nx: usize, nt: usize) -> Vec<(Vec<f64>, f64)> {
    let g = cfg.grid_or(nx, nt);
    p.sample_grid(g.nx, g.nt)
        .into_iter()
        .filter(|(_, t)| mode == Mode::Ancient || *t > 0.0)
        .collect()
}

fn require_points(points: &[(Vec<f64>, f64)]) -> Result<(), CliError> {
    if points.is_empty() {
        return Err(CliError::Usage("no sample points with t > 0; use --mode ancient or another grid".into()));
    }
    Ok(())
}

fn finish(cfg: &RunConfig, checks: Vec<Check>, metrics: BTreeMap<String, f64>) -> Output {
    Output::new(ReportDocument::new(cfg.clone(), checks, metrics))
}

const IDENTITY: [CheckSpec; 7] = [
    CheckSpec {
        name: "q_closure",
        kind: Kind::Residual,
        tol: 1e-10,
        anchor: "Q(S) is again an algebraic curvature tensor",
    },
    CheckSpec {
        name: "q_identity",
        kind: Kind::Residual,
        tol: 1e-10,
        anchor: "I_Q(S) splits into the second variation of I_S and the block matrix terms",
    },
    CheckSpec {
        name: "second_variation_fd",
        kind: Kind::Residual,
        tol: 1e-6,
        anchor: "second variation of I_S is the mean s^2 coefficient of the two substitutions",
    },
    CheckSpec {
        name: "second_variation_boundary",
        kind: Kind::Nonnegative,
        tol: 1e-6,
        anchor: "the second variation of I_S is nonnegative at a null tuple of S in K",
    },
    CheckSpec {
        name: "block_matrix_psd",
        kind: Kind::Nonnegative,
        tol: 1e-6,
        anchor: "the 4n x 4n block matrix is positive semidefinite at a null tuple of S in K",
    },
    CheckSpec {
        name: "trace_inequality",
        kind: Kind::Nonnegative,
        tol: 1e-6,
        anchor: "trace of the block matrix product is nonnegative at a null tuple of S in K",
    },
    CheckSpec {
        name: "q_combination",
        kind: Kind::Nonnegative,
        tol: 1e-6,
        anchor: "I_Q(S) >= 0 at a null tuple of S in K",
    },
];

/// `f''(0)` from the five-point stencil, exact for quartic `f`.
fn second_derivative(f: impl Fn(f64) -> f64) -> f64 {
    let h = 0.25;
    (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h)
}

/// `(v2, -v1, v4, -v3)`.
fn swapped(v: &FourTuple) -> FourTuple {
    let neg = |x: &[f64]| x.iter().map(|a| -a).collect::<Vec<f64>>();
    FourTuple::new(v.v(1).to_vec(), neg(v.v(0)), v.v(3).to_vec(), neg(v.v(2)))
}

struct IdentitySample {
    closure: f64,
    identity: f64,
    fd: f64,
    boundary_variation: f64,
    block: f64,
    trace: f64,
    q_comb: f64,
}

fn identity_sample(seed: u64, d: usize) -> Result<IdentitySample, Error> {
    let s = random_acvt(seed, d, 3);
    let c = if seed % 2 == 0 { ContractionMetric::identity(d) } else { random_contraction(seed ^ 0x5eed, d, d) };
    let q = q_map(&s, &c)?;
    let closure = relative(validate_acvt(&q, f64::INFINITY).max_residual(), q.max_abs());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = FourTuple::random(&mut rng, d).normalized();
    let w = FourTuple::random(&mut rng, d).normalized();
    let (lhs, rhs) = q_boundary_decomposition(&s, &v)?;
    let identity = relative((lhs - rhs).abs(), s.norm().powi(2));

    let vs = swapped(&v);
    let f1 = second_derivative(|x| isotropic_form(&s, &v.shifted(&w, x)).unwrap_or(f64::NAN));
    let f2 = second_derivative(|x| isotropic_form(&s, &vs.shifted(&w, x)).unwrap_or(f64::NAN));
    let fd_value = 0.25 * (f1 + f2);
    let fd = (second_variation_form(&s, &v, &w)? - fd_value).abs() / fd_value.abs().max(s.norm());

    let opts = MembershipOptions { starts: 16, ..MembershipOptions::default() };
    let cone = random_cone_tensor(seed, d, 3)?;
    let b = deform_to_boundary(&cone, &opts, 1e-9)?;
    let scale = b.tensor.norm();
    let null = b.certificate.argmin.normalized();
    let boundary_variation = relative(second_variation_form(&b.tensor, &null, &w)?, scale);
    let bundle = build_block_matrix(&b.tensor, &null)?;
    let (q_lhs, _) = q_boundary_decomposition(&b.tensor, &null)?;
    Ok(IdentitySample {
        closure,
        identity,
        fd,
        boundary_variation,
        block: relative(bundle.min_eigenvalue(), scale),
        trace: relative(trace_inequality_value(&bundle), scale * scale),
        q_comb: relative(q_lhs, scale * scale),
    })
}

/// Algebraic checks on random tensors of each dimension.
pub fn identity_suite(cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.check_tol_names(&names(&IDENTITY))?;
    let dims = cfg.dims_or(&[4, 5]);
    if let Some(d) = dims.iter().find(|d| **d < 2) {
        return Err(CliError::Usage(format!("dimension {d} carries no curvature; need d >= 2")));
    }
    let samples = cfg.samples.unwrap_or(20) as u64;
    let jobs: Vec<(u64, usize)> = dims
        .iter()
        .flat_map(|&d| (0..samples).map(move |k| (cfg.seed.wrapping_mul(1000).wrapping_add(k), d)))
        .collect();
    let results: Vec<IdentitySample> =
        jobs.par_iter().map(|&(seed, d)| identity_sample(seed, d)).collect::<Result<_, _>>()?;
    let values = [
        max_of(results.iter().map(|r| r.closure)),
        max_of(results.iter().map(|r| r.identity)),
        max_of(results.iter().map(|r| r.fd)),
        min_of(results.iter().map(|r| r.boundary_variation)),
        min_of(results.iter().map(|r| r.block)),
        min_of(results.iter().map(|r| r.trace)),
        min_of(results.iter().map(|r| r.q_comb)),
    ];
    let checks = IDENTITY.iter().zip(values).map(|(s, v)| s.check(cfg, v)).collect();
    let mut metrics = BTreeMap::new();
    metrics.insert("samples".into(), results.len() as f64);
    Ok(finish(cfg, checks, metrics))
}

const CONE: [CheckSpec; 1] = [CheckSpec {
    name: "cone_min",
    kind: Kind::Nonnegative,
    tol: 1e-8,
    anchor: "the space-time curvature tensor S lies in the cone K of nonnegative isotropic curvature",
}];

/// Cone membership of the space-time tensor at sample points of a provider.
pub fn cone_check(cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.check_tol_names(&names(&CONE))?;
    let p = load_provider(cfg, "sphere:n=3,r0=1")?;
    let mode = parse_mode(cfg)?;
    let points = sample_points(p.as_ref(), cfg, mode, 4, 4);
    require_points(&points)?;
    let opts = MembershipOptions { starts: cfg.samples.unwrap_or(16), seed: cfg.seed, ..MembershipOptions::default() };
    let res: Vec<(f64, f64)> = points
        .par_iter()
        .map(|(x, t)| -> Result<(f64, f64), Error> {
            let pt = compute_point(p.as_ref(), x, *t, mode)?;
            let s = assemble_spacetime_s(&pt)?;
            let c = cone_membership_with(&s, &opts)?;
            Ok((c.min_value, s.norm()))
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<ScanRow> = points
        .iter()
        .zip(&res)
        .map(|((x, t), (m, _))| ScanRow { x: x.clone(), t: *t, quantity: "cone_min".into(), value: *m })
        .collect();
    let worst = min_of(res.iter().map(|(m, n)| relative(*m, *n)));
    let mut out = finish(cfg, vec![CONE[0].check(cfg, worst)], BTreeMap::from([("points".into(), points.len() as f64)]));
    out.csv.push(("cone_scan.csv".into(), scan_csv(&rows)));
    Ok(out)
}

const ODE: [CheckSpec; 3] = [
    CheckSpec {
        name: "ode_cone_min",
        kind: Kind::Nonnegative,
        tol: 1e-6,
        anchor: "K is invariant under the ODE dS/dt = Q(S)",
    },
    CheckSpec {
        name: "riccati_anchor",
        kind: Kind::Residual,
        tol: 1e-6,
        anchor: "on the 3-dimensional unit space form the ODE gives sectional curvature 1/(1 - 4t)",
    },
    CheckSpec {
        name: "rk4_order",
        kind: Kind::Residual,
        tol: 0.3,
        anchor: "RK4 global error scales with the fourth power of the step",
    },
];

/// Integrates `dS/dt = Q(S)` from random cone tensors and monitors membership.
pub fn ode_invariance(cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.check_tol_names(&names(&ODE))?;
    let dims = cfg.dims_or(&[3, 4, 5]);
    if let Some(d) = dims.iter().find(|d| **d < 2) {
        return Err(CliError::Usage(format!("dimension {d} carries no curvature; need d >= 2")));
    }
    let samples = cfg.samples.unwrap_or(5) as u64;
    let jobs: Vec<(usize, u64)> = dims.iter().flat_map(|&d| (0..samples).map(move |k| (d, k))).collect();
    let runs: Vec<(f64, Option<String>)> = jobs
        .par_iter()
        .map(|&(d, k)| -> Result<(f64, Option<String>), Error> {
            let s0 = random_cone_tensor(cfg.seed.wrapping_mul(1000).wrapping_add(k), d, 3)?;
            let norm = s0.norm();
            let mut ic = IntegratorConfig::new(0.01 / norm, 1.0 / norm, spatial_identity(d)?);
            ic.save_every = 5;
            ic.monitor = Some(MembershipOptions { starts: 12, seed: cfg.seed, ..MembershipOptions::default() });
            let traj = integrate_ode(&s0, &ic)?;
            Ok((traj.worst_relative_cone_min(), (k == 0).then(|| traj.to_csv())))
        })
        .collect::<Result<_, _>>()?;
    let worst = min_of(runs.iter().map(|r| r.0));

    let sphere = AlgCurvTensor::euclidean_space_form(3, 1.0);
    let riccati = |step: f64| -> Result<f64, Error> {
        let mut ic = IntegratorConfig::new(step, 0.1, ContractionMetric::identity(3));
        ic.monitor = None;
        Ok(integrate_ode(&sphere, &ic)?.last()[(0, 1, 0, 1)])
    };
    let exact = 1.0 / (1.0 - 4.0 * 0.1);
    let anchor = riccati(1e-3)? - exact;
    let ratio = (riccati(0.02)? - exact).abs() / (riccati(0.01)? - exact).abs();

    let checks = vec![ODE[0].check(cfg, worst), ODE[1].check(cfg, anchor), ODE[2].check(cfg, ratio / 16.0 - 1.0)];
    let metrics = BTreeMap::from([("rk4_halving_ratio".into(), ratio), ("runs".into(), runs.len() as f64)]);
    let mut out = finish(cfg, checks, metrics);
    for ((d, _), (_, csv)) in jobs.iter().zip(runs) {
        if let Some(csv) = csv {
            out.csv.push((format!("trajectory_d{d}.csv"), csv));
        }
    }
    Ok(out)
}

const EVOLUTION: [CheckSpec; 3] = [
    CheckSpec {
        name: "evolution_residual",
        kind: Kind::Residual,
        tol: 1e-9,
        anchor: "S satisfies D_tau S = Laplacian S + Q(S), plus (2/t) S when the 1/t terms are kept",
    },
    CheckSpec {
        name: "hamilton_residual",
        kind: Kind::Residual,
        tol: 1e-9,
        anchor: "Hamilton's identity for the evolution of M",
    },
    CheckSpec {
        name: "h_evolution",
        kind: Kind::Residual,
        tol: 1e-10,
        anchor: "the space-time metric h evolves by D_tau h - Laplacian h - h/t with |.|_h = n/2 and gradient g(v,v)/2",
    },
];

/// Default tolerance for grid-based providers, whose residuals carry discretization error.
const NUMERIC_TOL: f64 = 5e-2;

/// Residuals of the evolution identities at sample points of a provider.
pub fn verify_evolution(cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.check_tol_names(&names(&EVOLUTION))?;
    let p = load_provider(cfg, "sphere:n=3,r0=1")?;
    let mode = parse_mode(cfg)?;
    let points = sample_points(p.as_ref(), cfg, mode, 5, 5);
    require_points(&points)?;
    let n = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let v: Vec<f64> = (0..n).map(|_| unit(&mut rng)).collect();
    let res: Vec<(f64, f64, Option<f64>)> = points
        .par_iter()
        .map(|(x, t)| -> Result<(f64, f64, Option<f64>), Error> {
            let e = evolution_residual(p.as_ref(), x, *t, mode)?.relative();
            let m = hamilton_identity_residual(p.as_ref(), x, *t, mode)?.relative();
            let h = if *t > 0.0 {
                let h = h_evolution_check(p.as_ref(), x, *t, &v)?;
                let a = relative((h.lhs_norm - h.rhs_formula).abs(), h.rhs_formula.abs());
                let b = relative((h.grad_lhs - h.grad_rhs).abs(), h.grad_rhs.abs());
                Some(a.max(b))
            } else {
                None
            };
            Ok((e, m, h))
        })
        .collect::<Result<_, _>>()?;
    let closed = p.capabilities().closed_form;
    let default = |s: &CheckSpec| if closed { s.tol } else { NUMERIC_TOL };
    let mut checks = vec![
        EVOLUTION[0].check_with_default(cfg, max_of(res.iter().map(|r| r.0)), default(&EVOLUTION[0])),
        EVOLUTION[1].check_with_default(cfg, max_of(res.iter().map(|r| r.1)), default(&EVOLUTION[1])),
    ];
    if res.iter().any(|r| r.2.is_some()) {
        let worst = max_of(res.iter().filter_map(|r| r.2));
        checks.push(EVOLUTION[2].check_with_default(cfg, worst, default(&EVOLUTION[2])));
    }
    let mut rows = Vec::new();
    for ((x, t), (e, m, h)) in points.iter().zip(&res) {
        let mut push = |q: &str, value: f64| rows.push(ScanRow { x: x.clone(), t: *t, quantity: q.into(), value });
        push("evolution_residual", *e);
        push("hamilton_residual", *m);
        if let Some(h) = h {
            push("h_evolution", *h);
        }
    }
    let mut out = finish(cfg, checks, BTreeMap::from([("points".into(), points.len() as f64)]));
    out.csv.push(("evolution_scan.csv".into(), scan_csv(&rows)));
    Ok(out)
}

const HARNACK: [CheckSpec; 2] = [
    CheckSpec {
        name: "harnack_min",
        kind: Kind::Nonnegative,
        tol: 1e-6,
        anchor: "M(w,w) + 2P(v,w,w) + R(v,w,v,w) >= 0 on a flow with nonnegative isotropic curvature",
    },
    CheckSpec {
        name: "trace_harnack_min",
        kind: Kind::Nonnegative,
        tol: 1e-6,
        anchor: "the traced Harnack quantity is nonnegative for every vector v",
    },
];

/// Matrix and trace Harnack minima over sample points of a provider.
pub fn harnack_scan(cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.check_tol_names(&names(&HARNACK))?;
    let p = load_provider(cfg, "sphere:n=3,r0=1")?;
    let mode = parse_mode(cfg)?;
    let points = sample_points(p.as_ref(), cfg, mode, 4, 4);
    require_points(&points)?;
    let starts = cfg.samples.unwrap_or(6);
    let res: Vec<(f64, f64, Option<f64>)> = points
        .par_iter()
        .enumerate()
        .map(|(k, (x, t))| -> Result<(f64, f64, Option<f64>), Error> {
            let pt = compute_point(p.as_ref(), x, *t, mode)?;
            let hm = harnack_min(&pt, starts, cfg.seed.wrapping_add(k as u64))?;
            let tm = match trace_harnack_min(&pt) {
                Ok(tm) => Some(tm.min),
                Err(Error::RicciNotPositive { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok((hm.min, pt.scale(), tm))
        })
        .collect::<Result<_, _>>()?;
    let mut checks = vec![HARNACK[0].check(cfg, min_of(res.iter().map(|r| relative(r.0, r.1))))];
    let mut metrics = BTreeMap::from([
        ("points".into(), points.len() as f64),
        ("harnack_min_raw".into(), min_of(res.iter().map(|r| r.0))),
    ]);
    let traced: Vec<(f64, f64)> = res.iter().filter_map(|r| r.2.map(|m| (m, r.1))).collect();
    metrics.insert("trace_points_skipped".into(), (res.len() - traced.len()) as f64);
    if !traced.is_empty() {
        checks.push(HARNACK[1].check(cfg, min_of(traced.iter().map(|(m, s)| relative(*m, *s)))));
        metrics.insert("trace_harnack_min_raw".into(), min_of(traced.iter().map(|r| r.0)));
    }
    let mut rows = Vec::new();
    for ((x, t), (h, _, tm)) in points.iter().zip(&res) {
        rows.push(ScanRow { x: x.clone(), t: *t, quantity: "harnack_min".into(), value: *h });
        if let Some(tm) = tm {
            rows.push(ScanRow { x: x.clone(), t: *t, quantity: "trace_harnack_min".into(), value: *tm });
        }
    }
    let mut out = finish(cfg, checks, metrics);
    out.csv.push(("harnack_scan.csv".into(), scan_csv(&rows)));
    Ok(out)
}

const SOLITON: [CheckSpec; 1] = [CheckSpec {
    name: "soliton_residual",
    kind: Kind::Residual,
    tol: 1e-6,
    anchor: "gradient soliton: D_i V^j = Ric_i^j + c delta_i^j with V = -(1/2) Ric^-1 grad R",
}];

/// Tests whether the flow is a steady or expanding gradient soliton at a time slice.
pub fn soliton_detect_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.check_tol_names(&names(&SOLITON))?;
    let p = load_provider(cfg, "cigar")?;
    let mode: SolitonMode = cfg.soliton_mode.as_deref().unwrap_or("steady").parse()?;
    let grid = cfg.grid_or(5, 1);
    let grid_points = p.sample_grid(grid.nx, grid.nt.max(1));
    let t = match cfg.t {
        Some(t) => t,
        None => grid_points.last().map(|(_, t)| *t).unwrap_or(0.0),
    };
    let xs: Vec<Vec<f64>> = p.sample_grid(grid.nx, 1).into_iter().map(|(x, _)| x).collect();
    let tol = cfg.tol(SOLITON[0].name, SOLITON[0].tol);
    let rep = soliton_detect(p.as_ref(), t, &xs, mode, tol)?;
    let check = SOLITON[0].check(cfg, rep.residual_norm);
    let metrics = BTreeMap::from([("t".into(), t), ("is_soliton".into(), f64::from(u8::from(rep.is_soliton)))]);
    let mut csv = String::new();
    let n = p.dim();
    for i in 0..n {
        let _ = write!(csv, "x{i},");
    }
    for i in 0..n {
        let _ = write!(csv, "V{i}{}", if i + 1 < n { "," } else { "\n" });
    }
    for (x, v) in rep.points.iter().zip(&rep.v_samples) {
        let fields: Vec<String> = x.iter().chain(v).map(|a| a.to_string()).collect();
        let _ = writeln!(csv, "{}", fields.join(","));
    }
    let mut out = finish(cfg, vec![check], metrics);
    out.csv.push(("soliton_field.csv".into(), csv));
    Ok(out)
}

const WARPED: [CheckSpec; 2] = [
    CheckSpec {
        name: "ricci_flow_residual",
        kind: Kind::Residual,
        tol: NUMERIC_TOL,
        anchor: "the evolved metric solves dg/dt = -2 Ric",
    },
    CheckSpec {
        name: "snapshot_roundtrip",
        kind: Kind::Residual,
        tol: 1e-12,
        anchor: "a reloaded snapshot reproduces the metric",
    },
];

/// Evolves a warped product and writes its snapshot for use as `warped:<path>`.
pub fn evolve_warped(cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.check_tol_names(&names(&WARPED))?;
    let wp: WarpedParams = cfg.warped.clone().unwrap_or_default();
    if wp.n < 2 || wp.cells < 8 || !(wp.length > 0.0 && wp.t_span > 0.0) {
        return Err(CliError::Usage("warped needs n >= 2, cells >= 8, length > 0 and t_span > 0".into()));
    }
    let spec = WarpedSpec::new(wp.n, wp.length, wp.cells, wp.t_span);
    let flow = WarpedFlow::evolve(&spec, perturbed_profile(wp.eps, wp.delta))?;
    let text = flow.to_snapshot();
    let back = WarpedFlow::from_snapshot(&text)?;
    let points = flow.sample_grid(3, 3);
    let res: Vec<(f64, f64)> = points
        .par_iter()
        .map(|(x, t)| -> Result<(f64, f64), Error> {
            let pt = compute_point(&flow, x, *t, Mode::Ancient)?;
            let r = relative(ricci_flow_residual(&flow, x, *t)?, pt.ric.matrix().amax());
            let q = compute_point(&back, x, *t, Mode::Ancient)?;
            let d = pt.riem.components().iter().zip(q.riem.components()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok((r, d))
        })
        .collect::<Result<_, _>>()?;
    let checks = vec![
        WARPED[0].check(cfg, max_of(res.iter().map(|r| r.0))),
        WARPED[1].check(cfg, max_of(res.iter().map(|r| r.1))),
    ];
    let metrics = BTreeMap::from([("dx".into(), flow.dx()), ("dt".into(), flow.dt())]);
    let mut out = finish(cfg, checks, metrics);
    out.extra_files.push(("warped.snapshot".into(), text));
    Ok(out)
}
