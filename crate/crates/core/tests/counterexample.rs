use lpgrad_core::counterexample::*;
use lpgrad_core::quadrature::{build_grid_with, norm_densities, Region};
use proptest::prelude::*;

fn small_sigma() -> Sigma {
    build_sigma(&CounterexampleSpec { k_max: 3, ..CounterexampleSpec::default() }).unwrap()
}

#[test]
fn norms_are_additive_over_disjoint_patches() {
    let sigma = small_sigma();
    let h = 1.0 / 64.0;
    let options = sigma.grid_options();
    let report = verify_failure_with(&sigma, h, &options).unwrap();
    let grid = build_grid_with(&sigma.domain(), h, &sigma.spec.centers(), &options).unwrap();
    let (s, p) = (&sigma.surface, sigma.spec.p);
    for k in 0..=sigma.spec.k_max {
        let u = &sigma.fields[k];
        let [v, g, l] = grid.integrate_n(|x| norm_densities(s, u, p, x)).unwrap();
        let row = &report.rows[k];
        assert!((v - row.value_norm).abs() <= 1e-10 * v, "value k={k}: {v} vs {}", row.value_norm);
        assert!((g - row.gradient_norm).abs() <= 1e-10 * g, "grad k={k}: {g} vs {}", row.gradient_norm);
        assert!((l - row.laplacian_norm).abs() <= 1e-10 * l, "lap k={k}: {l} vs {}", row.laplacian_norm);
    }
}

#[test]
fn bump_laplacian_vanishes_on_inner_disc() {
    let sigma = small_sigma();
    let options = sigma.grid_options();
    for m in 0..=sigma.spec.k_max {
        let c = sigma.spec.centers()[m];
        let phi = &sigma.bumps[m];
        let inner = build_grid_with(&Region::ball(c, 0.25), 1.0 / 64.0, &[c], &options).unwrap();
        let v = inner.integrate(|x| phi.eval(x).laplacian).unwrap();
        assert!(v.abs() <= 1e-12, "m={m}: {v:e}");
    }
}

#[test]
fn bump_laplacian_has_zero_mean() {
    let sigma = small_sigma();
    let options = sigma.grid_options();
    let c = sigma.spec.centers()[1];
    let phi = &sigma.bumps[1];
    let mut previous = f64::INFINITY;
    for h in [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0] {
        let grid = build_grid_with(&sigma.patch_domain(1), h, &[c], &options).unwrap();
        let [signed, total] = grid
            .integrate_n(|x| {
                let l = phi.eval(x).laplacian;
                [l, l.abs()]
            })
            .unwrap();
        let rel = signed.abs() / total;
        assert!(rel < previous);
        previous = rel;
    }
    assert!(previous <= 1e-8, "{previous:e}");
}

#[test]
fn gradient_norm_dominates_closed_form_bound() {
    let sigma = small_sigma();
    let report = verify_failure(&sigma, 1.0 / 64.0).unwrap();
    for row in &report.rows {
        assert!(row.gradient_norm + row.gradient_error >= row.gradient_lower_bound * (1.0 - 1e-9));
    }
    assert!(report.all_pass());
}

#[test]
fn tail_bound_decreases() {
    let sigma = small_sigma();
    let tails: Vec<f64> = (0..8).map(|k| u_infty_tail(&sigma, k)).collect();
    for w in tails.windows(2) {
        assert!(w[1] < w[0]);
        assert!((w[1] / w[0] - 1.0 / 16.0).abs() < 1e-12);
    }
}

#[test]
fn product_with_unit_volume_is_identity() {
    let sigma = small_sigma();
    let report = verify_failure(&sigma, 1.0 / 32.0).unwrap();
    let same = product_norms(&report, 1.0, 2).unwrap();
    assert_eq!(same.rows, report.rows);
    assert_eq!(same.effective_scale, report.effective_scale);
    let torus = product_norms(&report, 2.0, 3).unwrap();
    assert_eq!(torus.dimension, 3);
    assert!((torus.effective_scale - report.effective_scale * 2f64.powf(-0.25)).abs() < 1e-15);
    assert!(product_norms(&report, 0.0, 3).is_err());
    assert!(product_norms(&report, 2.0, 1).is_err());
}

#[test]
fn schedule_is_strictly_decreasing() {
    let sigma = build_sigma(&CounterexampleSpec::default()).unwrap();
    let e = &sigma.schedule.epsilons;
    assert_eq!(e.len(), 9);
    for w in e.windows(2) {
        assert!(w[1] < w[0]);
    }
}

#[test]
fn invalid_specs_are_rejected() {
    for spec in [
        CounterexampleSpec { p: 2.0, ..CounterexampleSpec::default() },
        CounterexampleSpec { delta: 0.2, ..CounterexampleSpec::default() },
        CounterexampleSpec { beta: 0.0, ..CounterexampleSpec::default() },
    ] {
        assert!(build_sigma(&spec).is_err(), "{spec:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_form_is_decreasing(a in -30.0..-1.0f64, b in -30.0..-1.0f64, p in 3.2..6.0f64) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let i_lo = log_closed_form_integral(p, 1.0, 0.1, 10f64.powf(lo));
        let i_hi = log_closed_form_integral(p, 1.0, 0.1, 10f64.powf(hi));
        prop_assert!(i_lo > i_hi);
    }

    #[test]
    fn selected_epsilon_meets_threshold(log_t in 0.0..40.0f64, p in 3.2..6.0f64) {
        let c = 0.01;
        let threshold = 10f64.powf(log_t);
        let eps = select_epsilon(p, 1.0, 0.1, threshold, c).unwrap();
        let lhs = p * c.ln() + log_closed_form_integral(p, 1.0, 0.1, eps);
        prop_assert!(lhs >= threshold.ln() - 1e-9);
        if eps < 1.0 - 0.01 {
            let bigger = p * c.ln() + log_closed_form_integral(p, 1.0, 0.1, eps * 1.001);
            prop_assert!(bigger < threshold.ln() + 1e-9);
        }
    }
}
