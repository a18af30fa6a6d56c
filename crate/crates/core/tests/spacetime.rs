use harnack::cone::{cone_membership, isotropic_form, FourTuple};
use harnack::geometries::{cigar_flow, perturbed_profile, sphere_flow, GeometryProvider, WarpedFlow, WarpedSpec};
use harnack::spacetime::{
    assemble_spacetime_s, compute_point, evolution_residual, harnack_form, harnack_min, hamilton_identity_residual,
    residual_study_csv, scan_csv, trace_harnack, Mode, ScanRow, SpaceTimePoint,
};
use proptest::prelude::*;

fn warped(eps: f64, cells: usize) -> WarpedFlow {
    let spec = WarpedSpec::new(3, std::f64::consts::PI, cells, 0.04);
    WarpedFlow::evolve(&spec, perturbed_profile(eps, 0.1)).unwrap()
}

/// `D_i Ric_jk` with `∂_i Ric_jk` from central differences of neighbouring points.
fn fd_dric(provider: &dyn GeometryProvider, pt: &SpaceTimePoint, h: f64) -> Vec<f64> {
    let n = pt.n;
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        let mut xp = pt.x.clone();
        let mut xm = pt.x.clone();
        xp[i] += h;
        xm[i] -= h;
        let rp = compute_point(provider, &xp, pt.t, pt.mode).unwrap().ric;
        let rm = compute_point(provider, &xm, pt.t, pt.mode).unwrap().ric;
        for j in 0..n {
            for k in 0..n {
                let mut v = (rp.get(j, k) - rm.get(j, k)) / (2.0 * h);
                for m in 0..n {
                    v -= pt.gamma[(m * n + i) * n + j] * pt.ric.get(m, k);
                    v -= pt.gamma[(m * n + i) * n + k] * pt.ric.get(j, m);
                }
                out[(i * n + j) * n + k] = v;
            }
        }
    }
    out
}

fn fd_p(provider: &dyn GeometryProvider, pt: &SpaceTimePoint, h: f64) -> Vec<f64> {
    let n = pt.n;
    let d = fd_dric(provider, pt, h);
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[(i * n + j) * n + k] = d[(i * n + j) * n + k] - d[(j * n + i) * n + k];
            }
        }
    }
    out
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn p_matches_finite_differences_on_cigar() {
    let c = cigar_flow();
    let pt = compute_point(&c, &[0.6, -0.4], 0.2, Mode::Ancient).unwrap();
    let scale = pt.p.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(scale > 1e-3);
    let e1 = max_diff(&pt.p, &fd_p(&c, &pt, 1e-2));
    let e2 = max_diff(&pt.p, &fd_p(&c, &pt, 5e-3));
    assert!(e2 < 1e-4 * scale, "{e2}");
    let rate = (e1 / e2).log2();
    assert!((rate - 2.0).abs() < 0.3, "rate {rate}");
}

#[test]
fn p_matches_finite_differences_on_warped_at_second_order() {
    let x = [1.5, 0.2, -0.1];
    let mut errs = Vec::new();
    for cells in [32, 64, 128] {
        let w = warped(0.2, cells);
        let pt = compute_point(&w, &x, 0.03, Mode::WithOneOverT).unwrap();
        errs.push(max_diff(&pt.p, &fd_p(&w, &pt, w.dx())));
    }
    let rates: Vec<f64> = errs.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    assert!(rates.iter().all(|r| (r - 2.0).abs() < 0.3), "{errs:?} {rates:?}");
}

#[test]
fn p_is_antisymmetric_on_warped() {
    let w = warped(0.2, 64);
    for x in [[0.8, 0.1, -0.2], [1.5, 0.0, 0.4], [2.3, -0.3, 0.2]] {
        let pt = compute_point(&w, &x, 0.03, Mode::WithOneOverT).unwrap();
        assert!(pt.p_antisymmetry() <= 1e-10, "{}", pt.p_antisymmetry());
    }
}

#[test]
fn warped_scalar_curvature_matches_reduction() {
    let mut errs = Vec::new();
    for cells in [32, 64, 128] {
        let w = warped(0.2, cells);
        let mut worst: f64 = 0.0;
        for x0 in [0.8, 1.5, 2.3] {
            let pt = compute_point(&w, &[x0, 0.0, 0.0], 0.03, Mode::WithOneOverT).unwrap();
            let red = w.reduced_scal(x0, 0.03).unwrap();
            worst = worst.max((pt.scal - red).abs() / red.abs().max(1.0));
        }
        errs.push(worst);
    }
    assert!(errs.iter().all(|e| *e < 1e-10), "{errs:?}");
}

#[test]
fn warped_evolution_residual_converges_at_second_order() {
    let x = [1.5, 0.2, -0.1];
    let mut rows = Vec::new();
    for cells in [32, 64, 128] {
        let w = warped(0.2, cells);
        let r = evolution_residual(&w, &x, 0.03, Mode::WithOneOverT).unwrap();
        rows.push((w.dx(), r.norm));
    }
    let rate = (rows[1].1 / rows[2].1).ln() / (rows[1].0 / rows[2].0).ln();
    assert!((rate - 2.0).abs() < 0.3, "{rows:?}");
    let csv = residual_study_csv(&rows);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "h_grid,residual_norm,rate");
    assert!(lines[1].ends_with(','));
    let last: f64 = lines[3].rsplit(',').next().unwrap().parse().unwrap();
    assert!((last - rate).abs() < 1e-12);
}

#[test]
fn warped_hamilton_identity_is_exact() {
    let w = warped(0.2, 32);
    for mode in [Mode::WithOneOverT, Mode::Ancient] {
        let r = hamilton_identity_residual(&w, &[1.1, 0.3, 0.2], 0.03, mode).unwrap();
        assert!(r.relative() < 1e-12, "{}", r.relative());
    }
}

#[test]
fn negative_sectional_curvature_leaves_the_cone() {
    let w = warped(0.2, 64);
    let x = [std::f64::consts::PI / 5.0, 0.15, 0.3];
    let t = w.times()[5];
    let pt = compute_point(&w, &x, t, Mode::WithOneOverT).unwrap();
    let s = assemble_spacetime_s(&pt).unwrap();
    let e = |i: usize| {
        let mut v = vec![0.0; 4];
        v[i] = 1.0;
        v
    };
    let witness = isotropic_form(&s, &FourTuple::new(e(1), vec![0.0; 4], e(2), vec![0.0; 4])).unwrap();
    assert!(witness < 0.0);
    let cert = cone_membership(&s, 32, 1e-8).unwrap();
    assert!(!cert.member);
    assert!(cert.min_value <= witness + 1e-12, "{} vs {witness}", cert.min_value);
}

#[test]
fn nic_warped_flow_satisfies_harnack() {
    let w = warped(-0.2, 64);
    for (x, t) in w.sample_grid(3, 3) {
        let pt = compute_point(&w, &x, t, Mode::WithOneOverT).unwrap();
        let hm = harnack_min(&pt, 4, 11).unwrap();
        assert!(hm.min >= -1e-8 * pt.scale(), "{x:?} {t} {}", hm.min);
    }
}

#[test]
fn scan_csv_layout() {
    let s = sphere_flow(2, 1.0).unwrap();
    let pt = compute_point(&s, &[0.1, 0.2], 0.05, Mode::WithOneOverT).unwrap();
    let rows = vec![ScanRow { x: pt.x.clone(), t: pt.t, quantity: "trace".into(), value: trace_harnack(&pt, &[0.0, 0.0]) }];
    let csv = scan_csv(&rows);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x0,x1,t,quantity,value"));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields.len(), 5);
    assert_eq!(fields[3], "trace");
    assert_eq!(fields[4].parse::<f64>().unwrap(), rows[0].value);
}

fn cigar_point() -> SpaceTimePoint {
    compute_point(&cigar_flow(), &[0.5, -0.7], 0.4, Mode::Ancient).unwrap()
}

proptest! {
    #[test]
    fn harnack_form_is_isotropic_form_of_s(
        v in prop::collection::vec(-2.0..2.0f64, 2),
        w in prop::collection::vec(-2.0..2.0f64, 2),
    ) {
        let pt = cigar_point();
        let s = assemble_spacetime_s(&pt).unwrap();
        let direct = harnack_form(&pt, &v, &w).unwrap().value;
        let tuple = FourTuple::new(vec![v[0], v[1], 1.0], vec![0.0; 3], vec![w[0], w[1], 0.0], vec![0.0; 3]);
        let iso = isotropic_form(&s, &tuple).unwrap();
        prop_assert!((direct - iso).abs() < 1e-10 * iso.abs().max(1.0));
    }

    #[test]
    fn harnack_form_is_quadratic_in_w(
        v in prop::collection::vec(-2.0..2.0f64, 2),
        w in prop::collection::vec(-2.0..2.0f64, 2),
        lambda in -3.0..3.0f64,
    ) {
        let pt = cigar_point();
        let a = harnack_form(&pt, &v, &w).unwrap().value;
        let lw: Vec<f64> = w.iter().map(|x| lambda * x).collect();
        let b = harnack_form(&pt, &v, &lw).unwrap().value;
        prop_assert!((b - lambda * lambda * a).abs() < 1e-10 * (1.0 + b.abs()));
    }
}
