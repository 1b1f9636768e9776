use std::f64::consts::{FRAC_PI_2, PI};

use wext_core::config::graded_levels;
use wext_core::extension::{extend_with_weight, rotate_profile};
use wext_core::rigidity::{
    angle_fields, extract_direction, growth_statistic, monotonicity_gate, rigidity_report, theta_residual, Tolerances,
};
use wext_core::symbol::ProfileOptions;
use wext_core::{Error, GridMeta, HalfSpaceField, TraceField, Weight};

fn square(n: usize, half: f64) -> GridMeta {
    GridMeta::with_origin(&[n, n], &[2.0 * half, 2.0 * half], vec![-half, -half], false).unwrap()
}

/// Smooth periodic layer extended in 1D, then laid onto a square at `angle`.
fn rotated_layer(angle: f64, box_grid: &GridMeta) -> HalfSpaceField {
    let w = Weight::power(0.5).unwrap();
    let period = 512.0;
    let k = 2.0 * PI / period;
    let delta = 4.0;
    let g = GridMeta::periodic(&[1024], &[period]).unwrap();
    let u = TraceField::from_fn(g, |p| 2.0 / PI * ((k * p[0]).sin() / (k * delta)).atan()).unwrap();
    let t = graded_levels(20.0, 40, 2.0).unwrap();
    let mut opts = ProfileOptions::with_tol(1e-8);
    opts.min_truncation = 48.0;
    let v = extend_with_weight(&u, &w, &t, &opts).unwrap();
    rotate_profile(&v, box_grid, angle).unwrap()
}

#[test]
fn linear_examples() {
    let w = Weight::power(0.5).unwrap();
    let tol = Tolerances::default();
    let t = vec![0.0, 0.5, 1.0, 2.0];
    let u = HalfSpaceField::from_fn(square(32, 4.0), t.clone(), |p, _| p[1]).unwrap();
    let r = rigidity_report(&u, &w, &[], &tol).unwrap();
    let om = r.omega_global.unwrap();
    assert!(om[0].abs() < 1e-12 && (om[1] - 1.0).abs() < 1e-12);
    assert!((r.theta_global - FRAC_PI_2).abs() < 1e-8);
    assert!(r.theta_residual_l2 < 1e-10 && r.is_one_dimensional);

    let u = HalfSpaceField::from_fn(square(32, 4.0), t.clone(), |p, _| (p[0] + p[1]) / 2f64.sqrt()).unwrap();
    let r = rigidity_report(&u, &w, &[], &tol).unwrap();
    let om = r.omega_global.unwrap();
    assert!((om[0] - 0.5f64.sqrt()).abs() < 1e-10 && (om[1] - 0.5f64.sqrt()).abs() < 1e-10);
    assert!(r.is_one_dimensional);

    let u = HalfSpaceField::from_fn(square(64, 6.0), t, |p, t| p[1].tanh() * (-t).exp()).unwrap();
    let r = rigidity_report(&u, &w, &[], &tol).unwrap();
    assert!(r.is_one_dimensional && r.theta_residual_l2 < 1e-10);
    assert!((r.theta_global - FRAC_PI_2).abs() < 1e-8);
}

#[test]
fn direction_is_rotation_equivariant() {
    let grid = square(128, 16.0);
    let tol = Tolerances::default();
    let w = Weight::power(0.5).unwrap();
    for phi in [0.3, 1.0, 2.0] {
        let layer = rotated_layer(phi, &grid);
        let f = angle_fields(&layer, tol.eps_rho).unwrap();
        let d = extract_direction(&f, &tol).unwrap();
        assert!(d.is_one_dimensional, "phi = {phi}: {d:?}");
        let om = d.omega_global.unwrap();
        assert!((om[0] - phi.cos()).abs() < 1e-8 && (om[1] - phi.sin()).abs() < 1e-8, "phi = {phi}: {om:?}");
        let (res, _) = theta_residual(&layer, &w, &f).unwrap();
        assert!(res <= 1e-6, "phi = {phi}: residual {res:e}");
    }
}

#[test]
fn tilted_field_has_large_residual() {
    let grid = square(128, 16.0);
    let w = Weight::power(0.5).unwrap();
    let tol = Tolerances::default();
    let layer = rotated_layer(0.3, &grid);
    let f = angle_fields(&layer, tol.eps_rho).unwrap();
    let (base, _) = theta_residual(&layer, &w, &f).unwrap();

    let tilt = HalfSpaceField::from_fn(grid, layer.t_levels.clone(), |p, t| p[1] + 0.2 * t * p[0]).unwrap();
    let g = angle_fields(&tilt, tol.eps_rho).unwrap();
    let (res, _) = theta_residual(&tilt, &w, &g).unwrap();
    assert!(res >= 1e3 * base, "{res:e} vs {base:e}");
    assert!(!extract_direction(&g, &tol).unwrap().is_one_dimensional);
}

#[test]
fn arcsine_bound_holds_pointwise() {
    let grid = square(64, 8.0);
    let t = vec![0.0, 0.5, 1.0, 3.0];
    let fields = [
        HalfSpaceField::from_fn(grid.clone(), t.clone(), |p, t| p[1] + 0.2 * t * p[0]).unwrap(),
        HalfSpaceField::from_fn(grid, t, |p, t| ((0.3 * p[0] + p[1]) / (1.0 + t)).tanh() + 0.1 * p[1]).unwrap(),
    ];
    for u in &fields {
        let f = angle_fields(u, 1e-8).unwrap();
        monotonicity_gate(&f).unwrap();
        for i in 0..f.mask.len() {
            if !f.mask[i] {
                continue;
            }
            assert!(f.theta[i] >= -1e-12 && f.theta[i] <= FRAC_PI_2 * f.d2[i] / f.rho[i] + 1e-12);
        }
    }
}

#[test]
fn decreasing_fields_are_refused() {
    let u = HalfSpaceField::from_fn(square(16, 4.0), vec![0.0, 1.0], |p, _| p[0] - p[1]).unwrap();
    let w = Weight::power(0.5).unwrap();
    let err = rigidity_report(&u, &w, &[], &Tolerances::default()).unwrap_err();
    assert!(matches!(err, Error::NotMonotone { .. }));
    assert_eq!(err.code(), "not_monotone");
}

/// ∫₀^{2R} a(t) (1+t)⁻² |slice(t)| dt for U = x₂/(1+t), with slice area
/// π(4R² − t²) − π max(R² − t², 0), by composite Simpson split at t = R.
fn growth_oracle(s: f64, r: f64) -> f64 {
    let slice = |t: f64| PI * (4.0 * r * r - t * t) - PI * (r * r - t * t).max(0.0);
    let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
        let n = 4000;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    let total = if s > 0.5 {
        // t = u² removes the integrable singularity of t^{1−2s}
        let g = |u: f64| {
            let t = u * u;
            2.0 * u.powf(3.0 - 4.0 * s) * slice(t) / ((1.0 + t) * (1.0 + t))
        };
        simpson(&g, 0.0, r.sqrt()) + simpson(&g, r.sqrt(), (2.0 * r).sqrt())
    } else {
        let g = |t: f64| t.powf(1.0 - 2.0 * s) * slice(t) / ((1.0 + t) * (1.0 + t));
        simpson(&g, 0.0, r) + simpson(&g, r, 2.0 * r)
    };
    total / (r * r)
}

#[test]
fn growth_matches_quadrature_oracle() {
    let r = 2.0;
    let t: Vec<f64> = (0..=160).map(|j| 4.0 * j as f64 / 160.0).collect();
    let u = HalfSpaceField::from_fn(square(96, 4.5), t, |p, t| p[1] / (1.0 + t)).unwrap();
    for s in [0.25, 0.5, 0.75] {
        let w = Weight::power(s).unwrap();
        let e = growth_statistic(&u, &w, &[r]).unwrap()[0].1;
        let exact = growth_oracle(s, r);
        assert!((e - exact).abs() <= 1e-2 * exact, "s = {s}: {e} vs {exact}");
    }
}

#[test]
fn growth_is_stable_under_refinement() {
    let w = Weight::power(0.5).unwrap();
    let field = |n: usize| {
        let t = graded_levels(6.0, n / 2, 1.5).unwrap();
        HalfSpaceField::from_fn(square(n, 6.5), t, |p, t| ((0.6 * p[0] + 0.8 * p[1]) / (1.0 + t)).atan()).unwrap()
    };
    let radii = [1.0, 2.0, 3.0];
    let coarse = growth_statistic(&field(64), &w, &radii).unwrap();
    let fine = growth_statistic(&field(128), &w, &radii).unwrap();
    for (c, f) in coarse.iter().zip(&fine) {
        assert!((c.1 / f.1 - 1.0).abs() <= 0.02, "R = {}: {} vs {}", c.0, c.1, f.1);
    }
}

#[test]
fn constant_field_has_no_energy() {
    let t: Vec<f64> = (0..=32).map(|j| 4.0 * j as f64 / 32.0).collect();
    let u = HalfSpaceField::from_fn(square(32, 4.0), t, |_, _| 0.7).unwrap();
    let e = growth_statistic(&u, &Weight::power(0.3).unwrap(), &[1.0, 1.5]).unwrap();
    assert!(e.iter().all(|p| p.1 < 1e-20), "{e:?}");
    assert!(matches!(angle_fields(&u, 1e-8), Err(Error::Degenerate(_))));
}

#[test]
fn report_serializes_with_documented_keys() {
    let u = HalfSpaceField::from_fn(square(32, 4.0), vec![0.0, 0.5, 1.0, 2.0], |p, _| p[1]).unwrap();
    let r = rigidity_report(&u, &Weight::power(0.5).unwrap(), &[1.0], &Tolerances::default()).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    for key in [
        "theta_residual_l2",
        "theta_boundary_flux",
        "growth_curve",
        "omega_global",
        "alpha",
        "is_one_dimensional",
        "tolerances",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}
