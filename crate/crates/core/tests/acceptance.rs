//! Acceptance suite: one pass/fail line per criterion, exit status 1 if any fails.

use std::io::Write;
use std::time::{Duration, Instant};

use harnack::acvt::{
    q_map, random_acvt, random_cone_tensor, random_contraction, validate_acvt, AlgCurvTensor, ContractionMetric,
};
use harnack::cone::{
    build_block_matrix, deform_to_boundary, isotropic_form, q_boundary_decomposition,
    second_variation_form, spatial_identity, trace_inequality_value, FourTuple, MembershipOptions,
};
use harnack::geometries::{
    cigar_flow, flat_flow, perturbed_profile, sphere_flow, GeometryProvider, WarpedFlow, WarpedSpec,
};
use harnack::odeflow::{integrate_ode, IntegratorConfig};
use harnack::spacetime::{
    assemble_spacetime_s, compute_point, evolution_residual, h_evolution_check, hamilton_identity_residual,
    harnack_min, parallel_transport_trace, soliton_detect, trace_harnack, trace_harnack_min, Mode, SolitonMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn kappa(t: f64) -> f64 {
    1.0 / (1.0 - 4.0 * t)
}

fn within_time(start: Instant, limit: Duration) -> (bool, f64) {
    let el = start.elapsed();
    (el < limit, el.as_secs_f64())
}

fn q_closure() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let d = 2 + (seed % 5) as usize;
        let s = random_acvt(seed, d, 3);
        let c = if seed % 2 == 0 { ContractionMetric::identity(d) } else { random_contraction(seed + 1000, d, d) };
        let q = q_map(&s, &c).unwrap();
        let rel = validate_acvt(&q, f64::INFINITY).max_residual() / q.max_abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    let (fast, secs) = within_time(start, Duration::from_secs(10));
    outcome(worst <= 1e-10 && fast, format!("max relative axiom residual {worst:.2e} over 100 tensors, d=2..6, {secs:.2}s"))
}

fn q_identity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let n = 2 + (seed % 4) as usize;
        let d = n + 1;
        let s = random_acvt(seed, d, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        let v = FourTuple::random(&mut rng, d).normalized();
        let (lhs, rhs) = q_boundary_decomposition(&s, &v).unwrap();
        let scale = s.norm().powi(2).max(f64::MIN_POSITIVE);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    let (fast, secs) = within_time(start, Duration::from_secs(10));
    outcome(worst <= 1e-10 && fast, format!("max |lhs - rhs| / |S|^2 = {worst:.2e} over 100 cases, n=2..5, {secs:.2}s"))
}

/// `f''(0)` from the five-point stencil, exact for quartic `f`.
fn second_derivative(f: impl Fn(f64) -> f64) -> f64 {
    let h = 0.25;
    (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h)
}

fn swapped(v: &FourTuple) -> FourTuple {
    let neg = |x: &[f64]| x.iter().map(|a| -a).collect::<Vec<f64>>();
    FourTuple::new(v.v(1).to_vec(), neg(v.v(0)), v.v(3).to_vec(), neg(v.v(2)))
}

fn second_variation() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let d = 4 + (seed % 2) as usize;
        let s = random_acvt(seed, d, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 99);
        let v = FourTuple::random(&mut rng, d).normalized();
        let w = FourTuple::random(&mut rng, d).normalized();
        let vs = swapped(&v);
        let f1 = second_derivative(|x| isotropic_form(&s, &v.shifted(&w, x)).unwrap());
        let f2 = second_derivative(|x| isotropic_form(&s, &vs.shifted(&w, x)).unwrap());
        // Taylor coefficient of s^2, averaged over the two substitutions
        let fd = 0.25 * (f1 + f2);
        let got = second_variation_form(&s, &v, &w).unwrap();
        worst = worst.max((got - fd).abs() / fd.abs().max(s.norm()));
    }
    let opts = MembershipOptions { starts: 16, ..MembershipOptions::default() };
    let mut worst_boundary = f64::INFINITY;
    for seed in 0..10u64 {
        let d = 4 + (seed % 2) as usize;
        let s = random_cone_tensor(seed, d, 3).unwrap();
        let b = deform_to_boundary(&s, &opts, 1e-9).unwrap();
        let v = b.certificate.argmin.normalized();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 5);
        for _ in 0..5 {
            let w = FourTuple::random(&mut rng, d).normalized();
            let val = second_variation_form(&b.tensor, &v, &w).unwrap() / b.tensor.norm();
            worst_boundary = worst_boundary.min(val);
        }
    }
    outcome(
        worst <= 1e-6 && worst_boundary >= -1e-6,
        format!("finite-difference mismatch {worst:.2e}; min at boundary tuples {worst_boundary:.2e} x scale"),
    )
}

fn block_matrix_at_boundary() -> Outcome {
    let opts = MembershipOptions { starts: 16, ..MembershipOptions::default() };
    let results: Vec<(f64, f64, f64)> = (0..25u64)
        .into_par_iter()
        .map(|seed| {
            let d = 4 + (seed % 2) as usize;
            let s = random_cone_tensor(seed + 500, d, 3).unwrap();
            let b = deform_to_boundary(&s, &opts, 1e-9).unwrap();
            let v = b.certificate.argmin.normalized();
            let scale = b.tensor.norm();
            let bundle = build_block_matrix(&b.tensor, &v).unwrap();
            let (lhs, _) = q_boundary_decomposition(&b.tensor, &v).unwrap();
            (bundle.min_eigenvalue() / scale, trace_inequality_value(&bundle) / scale.powi(2), lhs / scale.powi(2))
        })
        .collect();
    let eig = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let tr = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let q = results.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    outcome(
        eig >= -1e-6 && tr >= -1e-6 && q >= -1e-6,
        format!("min eigenvalue {eig:.2e}, trace value {tr:.2e}, Q-combination {q:.2e} (relative) over 25 boundary tensors"),
    )
}

fn ode_invariance() -> Outcome {
    let worst: f64 = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let d = 3 + (seed % 3) as usize;
            let s0 = random_cone_tensor(seed + 2000, d, 3).unwrap();
            let norm = s0.norm();
            let mut cfg = IntegratorConfig::new(0.01 / norm, 1.0 / norm, spatial_identity(d).unwrap());
            cfg.save_every = 5;
            cfg.monitor = Some(MembershipOptions { starts: 12, ..MembershipOptions::default() });
            integrate_ode(&s0, &cfg).unwrap().worst_relative_cone_min()
        })
        .reduce(|| f64::INFINITY, f64::min);
    let sphere = AlgCurvTensor::euclidean_space_form(3, 1.0);
    let riccati = |step: f64| {
        let mut cfg = IntegratorConfig::new(step, 0.1, ContractionMetric::identity(3));
        cfg.monitor = None;
        integrate_ode(&sphere, &cfg).unwrap().last()[(0, 1, 0, 1)]
    };
    let exact = kappa(0.1);
    let anchor = (riccati(1e-3) - exact).abs();
    let ratio = (riccati(0.02) - exact).abs() / (riccati(0.01) - exact).abs();
    outcome(
        worst >= -1e-6 && anchor <= 1e-6 && (ratio - 16.0).abs() <= 0.3 * 16.0,
        format!("worst cone_min {worst:.2e} x |S| over 50 seeds; Riccati error {anchor:.1e}; RK4 halving ratio {ratio:.2}"),
    )
}

fn warped_fixture(cells: usize) -> WarpedFlow {
    let spec = WarpedSpec::new(3, std::f64::consts::PI, cells, 0.04);
    WarpedFlow::evolve(&spec, perturbed_profile(0.2, 0.1)).unwrap()
}

/// Positive sectional curvature initially, so the flow stays in the cone.
fn nic_warped_fixture(cells: usize) -> WarpedFlow {
    let spec = WarpedSpec::new(3, std::f64::consts::PI, cells, 0.04);
    WarpedFlow::evolve(&spec, perturbed_profile(-0.2, 0.1)).unwrap()
}

const WARPED_T: f64 = 0.03;
const WARPED_LABELS: [f64; 3] = [0.8, 1.5, 2.3];

fn evolution_identity() -> Outcome {
    let start = Instant::now();
    let s = sphere_flow(3, 1.0).unwrap();
    let sphere_worst = s
        .sample_grid(5, 5)
        .par_iter()
        .map(|(x, t)| evolution_residual(&s, x, *t, Mode::WithOneOverT).unwrap().relative())
        .reduce(|| 0.0, f64::max);
    let norms: Vec<f64> = [32usize, 64, 128]
        .par_iter()
        .map(|&cells| {
            let f = warped_fixture(cells);
            WARPED_LABELS
                .iter()
                .map(|&l| evolution_residual(&f, &[l, 0.1, 0.2], WARPED_T, Mode::WithOneOverT).unwrap().norm)
                .fold(0.0, f64::max)
        })
        .collect();
    let rates: Vec<f64> = norms.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let (fast, secs) = within_time(start, Duration::from_secs(60));
    let pass = sphere_worst <= 1e-9 && rates.iter().all(|r| (r - 2.0).abs() <= 0.3) && fast;
    outcome(
        pass,
        format!(
            "sphere worst relative {sphere_worst:.2e}; warped residuals {:.3e}/{:.3e}/{:.3e}, rates {:.2}, {:.2}; {secs:.1}s",
            norms[0], norms[1], norms[2], rates[0], rates[1]
        ),
    )
}

fn hamilton_identity() -> Outcome {
    let start = Instant::now();
    let s = sphere_flow(3, 1.0).unwrap();
    let mut sphere_worst = 0.0f64;
    let mut anchor = 0.0f64;
    for (x, t) in s.sample_grid(5, 5) {
        sphere_worst = sphere_worst.max(hamilton_identity_residual(&s, &x, t, Mode::WithOneOverT).unwrap().relative());
        let pt = compute_point(&s, &x, t, Mode::WithOneOverT).unwrap();
        let k = kappa(t);
        let expect = pt.g.matrix() * (4.0 * k * k + k / t);
        anchor = anchor.max((pt.m.matrix() - &expect).norm() / expect.norm());
    }
    let warped: Vec<f64> = [32usize, 64, 128]
        .par_iter()
        .map(|&cells| {
            let f = warped_fixture(cells);
            WARPED_LABELS
                .iter()
                .map(|&l| hamilton_identity_residual(&f, &[l, 0.1, 0.2], WARPED_T, Mode::WithOneOverT).unwrap().relative())
                .fold(0.0, f64::max)
        })
        .collect();
    let warped_worst = warped.iter().copied().fold(0.0, f64::max);
    let (fast, secs) = within_time(start, Duration::from_secs(60));
    outcome(
        sphere_worst <= 1e-9 && anchor <= 1e-10 && warped_worst <= 1e-9 && fast,
        format!(
            "sphere worst relative {sphere_worst:.2e}; M anchor {anchor:.2e}; warped relative {:.1e}/{:.1e}/{:.1e} at every refinement; {secs:.1}s",
            warped[0], warped[1], warped[2]
        ),
    )
}

fn h_equalities() -> Outcome {
    let mut worst = 0.0f64;
    let s = sphere_flow(3, 1.0).unwrap();
    let c = cigar_flow();
    let v3 = [0.4, -0.7, 0.2];
    for (x, t) in s.sample_grid(4, 3) {
        let h = h_evolution_check(&s, &x, t, &v3).unwrap();
        worst = worst.max((h.lhs_norm - h.rhs_formula).abs() / h.rhs_formula);
        worst = worst.max((h.grad_lhs - h.grad_rhs).abs() / h.grad_rhs);
    }
    for (x, t) in c.sample_grid(4, 3) {
        if t <= 0.0 {
            continue;
        }
        let h = h_evolution_check(&c, &x, t, &[0.5, -0.3]).unwrap();
        worst = worst.max((h.lhs_norm - h.rhs_formula).abs() / h.rhs_formula);
        worst = worst.max((h.grad_lhs - h.grad_rhs).abs() / h.grad_rhs);
    }
    let f = flat_flow(3).unwrap();
    let v = [0.3, 1.2, -0.4];
    let hf = h_evolution_check(&f, &[0.1, 0.2, 0.3], 0.7, &v).unwrap();
    let gvv: f64 = v.iter().map(|a| a * a).sum();
    let flat_err = (hf.lhs_norm - 1.5).abs().max((hf.grad_lhs - 0.5 * gvv).abs());
    let hs = h_evolution_check(&s, &[0.2, 0.1, -0.3], 0.1, &v3).unwrap();
    let anchor = (hs.rhs_formula - 4.1667).abs();
    outcome(
        worst <= 1e-10 && flat_err <= 1e-12 && anchor <= 1e-4,
        format!("closed-form relative mismatch {worst:.2e}; flat anchors error {flat_err:.1e}; sphere rhs {:.6}", hs.rhs_formula),
    )
}

fn harnack_nonnegativity() -> Outcome {
    let sphere = sphere_flow(3, 1.0).unwrap();
    let warped = nic_warped_fixture(64);
    let providers: [&dyn GeometryProvider; 2] = [&sphere, &warped];
    let opts = MembershipOptions { starts: 16, ..MembershipOptions::default() };
    let mut worst_min = f64::INFINITY;
    let mut worst_cone = f64::INFINITY;
    for p in providers {
        let grid = p.sample_grid(10, 10);
        let res: Vec<(f64, f64)> = grid
            .par_iter()
            .enumerate()
            .map(|(k, (x, t))| {
                let pt = compute_point(p, x, *t, Mode::WithOneOverT).unwrap();
                let hm = harnack_min(&pt, 6, k as u64).unwrap();
                let s = assemble_spacetime_s(&pt).unwrap();
                let cone = harnack::cone::cone_membership_with(&s, &opts).unwrap();
                (hm.min / pt.scale(), cone.min_value / s.norm())
            })
            .collect();
        for (a, b) in res {
            worst_min = worst_min.min(a);
            worst_cone = worst_cone.min(b);
        }
    }
    let pt = compute_point(&sphere, &[0.3, -0.2, 0.1], 0.1, Mode::WithOneOverT).unwrap();
    let tm = trace_harnack_min(&pt).unwrap();
    let anchor = (tm.min - 166.667).abs() / 166.667;
    outcome(
        worst_min >= -1e-6 && worst_cone >= -1e-8 && anchor <= 1e-3,
        format!(
            "worst harnack_min {worst_min:.2e} x scale, worst cone_min {worst_cone:.2e} x |S| over 2x100 samples; trace min {:.4}",
            tm.min
        ),
    )
}

fn equality_cases() -> Outcome {
    let c = cigar_flow();
    let samples: Vec<Vec<f64>> = c.sample_grid(5, 1).into_iter().map(|(x, _)| x).collect();
    let sol = soliton_detect(&c, 0.0, &samples, SolitonMode::Steady, 1e-6).unwrap();
    let mut trace_worst = 0.0f64;
    for (x, t) in c.sample_grid(5, 4) {
        let pt = compute_point(&c, &x, t, Mode::Ancient).unwrap();
        trace_worst = trace_worst.max(trace_harnack_min(&pt).unwrap().min.abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut transport_worst = 0.0f64;
    for _ in 0..5 {
        let path: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]).collect();
        let t0 = 0.3;
        let mut v0 = c.soliton_field(&path[0]);
        v0.push(1.0);
        let tr = parallel_transport_trace(&c, t0, &path, &v0, Mode::Ancient, 200).unwrap();
        for (x, v) in tr.points.iter().zip(&tr.vectors).step_by(20) {
            let pt = compute_point(&c, x, t0, Mode::Ancient).unwrap();
            let spatial: Vec<f64> = v[..2].iter().map(|a| a / v[2]).collect();
            transport_worst = transport_worst.max(trace_harnack(&pt, &spatial).abs());
        }
    }
    let s = sphere_flow(3, 1.0).unwrap();
    let t = 0.1;
    let rep = soliton_detect(&s, t, &[vec![0.2, -0.1, 0.3]], SolitonMode::Expanding, 1e-6).unwrap();
    let expect = (2.0 * kappa(t) + 0.5 / t) * 3f64.sqrt();
    let sphere_err = (rep.residual_norm - expect).abs();
    outcome(
        sol.is_soliton && trace_worst <= 1e-6 && transport_worst <= 1e-6 && !rep.is_soliton && sphere_err <= 1e-8,
        format!(
            "cigar soliton residual {:.1e}; trace min |.| {trace_worst:.1e}; transported trace {transport_worst:.1e}; sphere residual {:.6} (expected {expect:.6})",
            sol.residual_norm, rep.residual_norm
        ),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("Q preserves the algebraic curvature tensor axioms", q_closure),
        ("I_Q(S) decomposition identity", q_identity),
        ("second variation vs finite differences, nonnegative at boundary", second_variation),
        ("block matrix, trace value and Q-combination at cone boundary", block_matrix_at_boundary),
        ("cone invariance under dS/dt = Q(S), Riccati anchor, RK4 order", ode_invariance),
        ("evolution identity of the space-time tensor", evolution_identity),
        ("Hamilton's identity for M", hamilton_identity),
        ("evolution of the space-time metric h", h_equalities),
        ("matrix and trace Harnack nonnegativity", harnack_nonnegativity),
        ("soliton equality cases and parallel transport", equality_cases),
    ];
    let results: Vec<(Outcome, f64)> = criteria
        .par_iter()
        .map(|(_, f)| {
            let start = Instant::now();
            let o = f();
            (o, start.elapsed().as_secs_f64())
        })
        .collect();
    let mut stderr = std::io::stderr();
    let mut failed = 0;
    for (k, ((name, _), (o, secs))) in criteria.iter().zip(&results).enumerate() {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        let _ = writeln!(stderr, "criterion {:>2} [{tag}] {name}: {} ({secs:.1}s)", k + 1, o.detail);
    }
    let _ = writeln!(stderr, "acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
