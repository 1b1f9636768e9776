//! Extension engine against closed forms: exponential modes for a ≡ 1, the
//! Bessel form of the profiles for power weights and the homogeneous symbol.

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

use wext_core::config::graded_levels;
use wext_core::extension::{
    apply_trace_operator, boundary_flux, default_test_bank, energy_identity_check, extend, extend_with_weight,
    lattice_lambdas, poisson_convolve_with, verify_poisson_symbol, weak_residual, PoissonOptions,
};
use wext_core::io::{decode_field, encode_field};
use wext_core::symbol::{compute_symbol, profile_kernel, ProfileOptions};
use wext_core::{GridMeta, HalfSpaceField, Provenance, TraceField, Weight};

/// K_ν(z) = ∫₀^∞ exp(−z cosh u) cosh(νu) du by the trapezoid rule, which
/// converges geometrically for this analytic, doubly decaying integrand.
fn bessel_k(nu: f64, z: f64) -> f64 {
    let h = 0.01;
    let mut sum = 0.5 * (-z).exp();
    let mut k = 1;
    loop {
        let u = k as f64 * h;
        let v = (-z * u.cosh()).exp() * (nu * u).cosh();
        sum += v;
        if v < 1e-300 || (v < 1e-18 * sum && u > 1.0) {
            break;
        }
        k += 1;
    }
    sum * h
}

fn bessel_profile(s: f64, lambda: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let z = lambda.sqrt() * t;
    2f64.powf(1.0 - s) / gamma(s) * z.powf(s) * bessel_k(s, z)
}

fn power_symbol(s: f64, lambda: f64) -> f64 {
    2f64.powf(1.0 - 2.0 * s) * gamma(1.0 - s) / gamma(s) * lambda.powf(s)
}

fn random_trace(grid: &GridMeta, seed: u64, kmax: i64) -> TraceField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<(Vec<f64>, f64, f64)> = (0..5)
        .map(|_| {
            let k = (0..grid.ndim())
                .map(|a| rng.gen_range(-kmax..=kmax) as f64 * 2.0 * PI / grid.periods[a])
                .collect();
            (k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    TraceField::from_fn(grid.clone(), |p| {
        terms.iter().map(|(k, a, ph)| a * (k.iter().zip(p).map(|(x, y)| x * y).sum::<f64>() + ph).cos()).sum::<f64>() + 0.3
    })
    .unwrap()
}

#[test]
fn bessel_oracle_self_check() {
    // K_{1/2}(z) = sqrt(π/(2z)) e^{−z}
    for z in [0.1, 1.0, 5.0] {
        let exact = (PI / (2.0 * z)).sqrt() * (-z).exp();
        assert!((bessel_k(0.5, z) - exact).abs() < 1e-12 * exact);
    }
}

#[test]
fn constant_weight_modes_decay_exponentially() {
    let w = Weight::power(0.5).unwrap();
    let grid = GridMeta::periodic(&[16, 16], &[2.0 * PI, 2.0 * PI]).unwrap();
    let u = TraceField::from_fn(grid.clone(), |p| (p[0] + 2.0 * p[1]).cos() + 0.5 * (3.0 * p[0]).sin()).unwrap();
    let t = vec![0.0, 0.5, 1.0, 2.0];
    let big_u = extend_with_weight(&u, &w, &t, &ProfileOptions::with_tol(1e-9)).unwrap();
    assert_eq!(big_u.provenance, Provenance::FourierFormula);
    for (j, &tj) in t.iter().enumerate() {
        for (i, v) in big_u.level(j).iter().enumerate() {
            let p = grid.point(i);
            let exact = (-(5f64).sqrt() * tj).exp() * (p[0] + 2.0 * p[1]).cos() + 0.5 * (-3.0 * tj).exp() * (3.0 * p[0]).sin();
            assert!((v - exact).abs() < 1e-7, "t = {tj}: {v} vs {exact}");
        }
    }
}

#[test]
fn power_weight_modes_follow_bessel_profiles() {
    for s in [0.25, 0.75] {
        let w = Weight::power(s).unwrap();
        let grid = GridMeta::periodic(&[32], &[2.0 * PI]).unwrap();
        let u = TraceField::from_fn(grid.clone(), |p| (2.0 * p[0]).cos() - 0.4 * (5.0 * p[0]).sin()).unwrap();
        let t = vec![0.0, 0.05, 0.3, 1.0, 2.5];
        let big_u = extend_with_weight(&u, &w, &t, &ProfileOptions::with_tol(1e-9)).unwrap();
        for (j, &tj) in t.iter().enumerate() {
            let (g2, g5) = (bessel_profile(s, 4.0, tj), bessel_profile(s, 25.0, tj));
            for (i, v) in big_u.level(j).iter().enumerate() {
                let x = grid.coord(0, i);
                let exact = g2 * (2.0 * x).cos() - 0.4 * g5 * (5.0 * x).sin();
                assert!((v - exact).abs() < 1e-6, "s = {s}, t = {tj}: {v} vs {exact}");
            }
        }
    }
}

#[test]
fn trace_operator_is_a_power_of_the_laplacian() {
    for (s, dims) in [(0.3, vec![64]), (0.7, vec![32, 16])] {
        let w = Weight::power(s).unwrap();
        let periods: Vec<f64> = dims.iter().map(|_| 2.0 * PI).collect();
        let grid = GridMeta::periodic(&dims, &periods).unwrap();
        let u = random_trace(&grid, 11, 4);
        let mut l = lattice_lambdas(&grid);
        l.insert(0, 0.5);
        let tab = compute_symbol(&w, &l, 1e-9).unwrap();
        let out = apply_trace_operator(&u, &tab).unwrap();
        assert!((out.m_one.unwrap() - power_symbol(s, 1.0)).abs() < 1e-6);
        let lam = grid.squared_frequencies();
        let spec: Vec<_> = u.spectrum().iter().zip(&lam).map(|(c, l)| c * power_symbol(s, *l)).collect();
        let exact = TraceField::from_spectrum(grid, spec).unwrap();
        let scale = exact.max_abs();
        for (a, b) in out.f.values.iter().zip(&exact.values) {
            assert!((a - b).abs() < 1e-6 * scale);
        }
    }
}

#[test]
fn boundary_flux_recovers_the_trace_operator() {
    let w = Weight::power(0.5).unwrap();
    let grid = GridMeta::periodic(&[32], &[2.0 * PI]).unwrap();
    let u = TraceField::from_fn(grid.clone(), |p| (3.0 * p[0]).cos()).unwrap();
    let t = graded_levels(4.0, 400, 2.0).unwrap();
    let big_u = extend_with_weight(&u, &w, &t, &ProfileOptions::with_tol(1e-9)).unwrap();
    let q = boundary_flux(&big_u, &w, 4).unwrap();
    for (a, b) in q.values.iter().zip(&u.values) {
        assert!((a - 3.0 * b).abs() < 1e-4, "{a} vs {}", 3.0 * b);
    }
}

#[test]
fn poisson_symbol_identity_off_half() {
    let xi = [0.5, 1.0, 2.0, 4.0];
    let r = verify_poisson_symbol(0.3, &xi, &[0.2, 1.0]).unwrap();
    assert!(r.max_deviation < 1e-5, "{r:?}");
    assert!(r.max_deviation_closed_form.is_none());
}

#[test]
fn two_paths_agree_in_two_dimensions() {
    let s = 0.5;
    let grid = GridMeta::periodic(&[64, 64], &[16.0, 16.0]).unwrap();
    let u = TraceField::from_fn(grid.clone(), |p| (-(p[0] * p[0] + 0.5 * p[1] * p[1])).exp()).unwrap();
    let t = vec![0.0, 0.5, 1.0, 2.0];
    let k = profile_kernel(&Weight::power(s).unwrap(), &lattice_lambdas(&grid), &t, 1e-8).unwrap();
    let a = extend(&u, &k).unwrap();
    let b = poisson_convolve_with(&u, s, &t, &PoissonOptions { images: 48, tail_tol: 1e-6 }).unwrap();
    assert_eq!(b.provenance, Provenance::PoissonConvolution);
    let gap = a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(gap < 1e-3, "gap {gap:e}");
}

fn weak_setup(s: f64) -> (Weight, TraceField, HalfSpaceField, TraceField) {
    let w = Weight::power(s).unwrap();
    let grid = GridMeta::periodic(&[64], &[2.0 * PI]).unwrap();
    let u = random_trace(&grid, 5, 5);
    let t = graded_levels(8.0, 64, 3.0).unwrap();
    let big_u = extend_with_weight(&u, &w, &t, &ProfileOptions::with_tol(1e-9)).unwrap();
    let tab = compute_symbol(&w, &lattice_lambdas(&grid), 1e-9).unwrap();
    let f = apply_trace_operator(&u, &tab).unwrap().f;
    (w, u, big_u, f)
}

#[test]
fn weak_residual_baseline_and_violation() {
    for s in [0.3, 0.5, 0.7] {
        let (w, _, big_u, f) = weak_setup(s);
        let bank = default_test_bank(&big_u.grid, 8.0);
        let base = weak_residual(&big_u, &w, &f, &bank).unwrap().max_residual;
        assert!(base <= 5e-3, "s = {s}: baseline {base:e}");

        let mut bent = big_u.clone();
        let n = bent.grid.len();
        for (j, &t) in bent.t_levels.clone().iter().enumerate() {
            for i in 0..n {
                let x = bent.grid.coord(0, i);
                bent.values[j * n + i] += t * x.sin();
            }
        }
        let worse = weak_residual(&bent, &w, &f, &bank).unwrap().max_residual;
        assert!(worse >= 10.0 * base, "s = {s}: {worse:e} vs {base:e}");
    }
}

#[test]
fn energy_identity_for_random_traces() {
    for s in [0.3, 0.7] {
        let (w, u, big_u, _) = weak_setup(s);
        let tab = compute_symbol(&w, &lattice_lambdas(&u.grid), 1e-9).unwrap();
        let e = energy_identity_check(&u, &big_u, &w, &tab).unwrap();
        assert!(e.rel_gap < 1e-2, "s = {s}: {e:?}");
        assert!(e.tail_estimate < 1e-3 * e.rhs);
    }
}

#[test]
fn field_round_trip_is_bit_exact() {
    let (_, _, big_u, _) = weak_setup(0.5);
    let bytes = encode_field(&big_u).unwrap();
    let back = decode_field(&bytes[..]).unwrap();
    assert_eq!(back, big_u);
    assert!(back.values.iter().zip(&big_u.values).all(|(a, b)| a.to_bits() == b.to_bits()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn extension_invariants(seed in 0u64..1000, s in 0.1f64..0.9, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let w = Weight::power(s).unwrap();
        let grid = GridMeta::periodic(&[32], &[6.0]).unwrap();
        let u = random_trace(&grid, seed, 6);
        let v = random_trace(&grid, seed + 1, 6);
        let t = vec![0.0, 0.1, 0.4, 1.0, 3.0];
        let k = profile_kernel(&w, &lattice_lambdas(&grid), &t, 1e-6).unwrap();
        let eu = extend(&u, &k).unwrap();
        let ev = extend(&v, &k).unwrap();
        let mix = TraceField::new(grid.clone(), u.values.iter().zip(&v.values).map(|(x, y)| a * x + b * y).collect()).unwrap();
        let em = extend(&mix, &k).unwrap();
        for i in 0..em.values.len() {
            prop_assert!((em.values[i] - (a * eu.values[i] + b * ev.values[i])).abs() < 1e-11);
        }
        prop_assert_eq!(eu.boundary_gap(&u), Some(0.0));
        prop_assert!(eu.level(0).iter().zip(&u.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        let norms: Vec<f64> = (0..t.len()).map(|j| eu.level(j).iter().map(|x| x * x).sum::<f64>()).collect();
        prop_assert!(norms.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-12)));
        let mean = u.mean();
        for j in 0..t.len() {
            let m = eu.level(j).iter().sum::<f64>() / grid.len() as f64;
            prop_assert!((m - mean).abs() < 1e-12);
        }
    }
}
