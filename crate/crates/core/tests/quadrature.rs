use lpgrad_core::counterexample::closed_form_integral;
use lpgrad_core::fields::make_cutoff;
use lpgrad_core::quadrature::{
    avg_lp_norm, build_grid, lp_norm, radial_power_integral, Quantity, Region,
};
use lpgrad_core::{ConformalSurface, Point};
use proptest::prelude::*;
use std::f64::consts::PI;

fn rect(x0: f64, x1: f64) -> Region {
    Region::rectangle(Point::new(x0, -0.5), Point::new(x1, 0.5))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rectangle_partition_is_additive(split in 1usize..15) {
        let h = 1.0 / 16.0;
        let f = |p: Point| (3.0 * p.x).sin() * (1.0 + p.y * p.y) + p.x * p.x;
        let m = -0.5 + split as f64 * h;
        let whole = build_grid(&rect(-0.5, 0.5), h, &[]).unwrap().integrate(f).unwrap();
        let left = build_grid(&rect(-0.5, m), h, &[]).unwrap().integrate(f).unwrap();
        let right = build_grid(&rect(m, 0.5), h, &[]).unwrap().integrate(f).unwrap();
        prop_assert!((whole - left - right).abs() <= 1e-13);
    }

    #[test]
    fn averaged_norm_is_monotone_in_p(p1 in 1.0..6.0f64, dp in 0.1..4.0f64) {
        let s = ConformalSurface::flat();
        let g = build_grid(&rect(-0.5, 0.5), 1.0 / 16.0, &[]).unwrap();
        let f = |p: Point| 1.0 + (4.0 * p.x).cos() * p.y;
        let a = avg_lp_norm(&s, f, &g, p1).unwrap();
        let b = avg_lp_norm(&s, f, &g, p1 + dp).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-12));
    }

    #[test]
    fn radial_power_integral_matches_closed_form_family(eps_exp in -12.0..-1.0f64, gamma in -3.0..2.0f64, delta in 0.05..0.5f64) {
        let eps = 10f64.powf(eps_exp);
        let v = radial_power_integral(delta, eps, gamma);
        // composite Simpson in t = ln(r² + ε), where dx = π e^t dt
        let lo = eps.ln();
        let hi = (delta * delta + eps).ln();
        let n = 20_000;
        let step = (hi - lo) / n as f64;
        let f = |i: usize| ((gamma + 1.0) * (lo + step * i as f64)).exp();
        let mut sum = f(0) + f(n);
        for i in 1..n {
            sum += if i % 2 == 1 { 4.0 * f(i) } else { 2.0 * f(i) };
        }
        let numeric = PI * sum * step / 3.0;
        prop_assert!((v - numeric).abs() <= 1e-9 * v.abs(), "{v} vs {numeric}");
    }
}

#[test]
fn closed_form_decreases_in_epsilon() {
    let mut prev = f64::INFINITY;
    for i in 0..40 {
        let eps = 10f64.powf(-20.0 + 0.5 * i as f64);
        let v = closed_form_integral(4.0, 1.0, 0.1, eps);
        assert!(v < prev, "not decreasing at eps = {eps:e}");
        prev = v;
    }
}

#[test]
fn constant_factor_scales_norms() {
    let u = make_cutoff(0.2, 0.4).unwrap();
    let region = Region::rectangle(Point::new(-0.5, -0.5), Point::new(0.5, 0.5));
    let g = build_grid(&region, 1.0 / 32.0, &[]).unwrap();
    let flat = ConformalSurface::flat();
    let scaled = ConformalSurface::constant(0.5).unwrap();
    let p = 3.0;
    let v0 = lp_norm(&flat, Quantity::Value, &u, &g, p).unwrap();
    let v1 = lp_norm(&scaled, Quantity::Value, &u, &g, p).unwrap();
    // dμ = λ² dx
    assert!((v1 - v0 * 0.25f64.powf(1.0 / p)).abs() <= 1e-12 * v1);
    let l0 = lp_norm(&flat, Quantity::Laplacian, &u, &g, p).unwrap();
    let l1 = lp_norm(&scaled, Quantity::Laplacian, &u, &g, p).unwrap();
    // Δ_g = λ⁻² Δ
    assert!((l1 - l0 * 4.0 * 0.25f64.powf(1.0 / p)).abs() <= 1e-12 * l1);
}

#[test]
fn singular_block_resolves_log_patch() {
    let centre = Point::ORIGIN;
    let region = Region::rectangle(Point::new(-0.5, -0.5), Point::new(0.5, 0.5));
    let g = build_grid(&region, 1.0 / 16.0, &[centre]).unwrap();
    let eps = 1e-10;
    let gamma = -2.0;
    let delta = 0.1;
    let v = g
        .integrate(|p| {
            let r2 = p.norm_sq();
            if r2 < delta * delta { (r2 + eps).powf(gamma) } else { 0.0 }
        })
        .unwrap();
    let exact = radial_power_integral(delta, eps, gamma);
    assert!((v - exact).abs() <= 1e-8 * exact, "{v} vs {exact}");
}
