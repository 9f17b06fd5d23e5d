//! Acceptance suite. Prints one line per criterion and exits non-zero if any fails.
//!
//! `cargo test -p lpgrad-core --test acceptance -- 2 7` runs a subset.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use lpgrad_core::counterexample::{
    build_sigma, closed_form_integral, default_remark_samples, integral_bound_example, optimality_schedule,
    product_norms, remark_surface, verify_failure, CounterexampleSpec, RemarkSpec, Sigma,
};
use lpgrad_core::curvature::{k_local_many, BallGrid};
use lpgrad_core::fields::{combine, make_cutoff_at, make_linear_bump};
use lpgrad_core::geodesic::{brute_force_overlap, distance_field, greedy_covering};
use lpgrad_core::inequality::{l2_identity_check, support_grid};
use lpgrad_core::quadrature::{build_grid, radial_power_integral, Region};
use lpgrad_core::{ConformalSurface, CurvatureConvention, Point, SmoothField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (usize, &'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_failure(sigma: &Sigma, workers: usize) -> Result<(String, bool, Duration), String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| e.to_string())?;
    let t = Instant::now();
    let report = pool.install(|| verify_failure(sigma, 1.0 / 512.0)).map_err(|e| e.to_string())?;
    Ok((report.to_csv(), report.all_pass(), t.elapsed()))
}

fn criterion_1() -> Outcome {
    let sigma = build_sigma(&CounterexampleSpec::default()).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let report = verify_failure(&sigma, 1.0 / 512.0).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let worst_denominator = report
        .rows
        .iter()
        .map(|r| r.value_norm + r.laplacian_norm + r.value_error + r.laplacian_error)
        .fold(0.0, f64::max);
    let worst_margin = report
        .rows
        .iter()
        .map(|r| r.gradient_norm - r.gradient_error - r.k as f64)
        .fold(f64::INFINITY, f64::min);
    check(
        report.all_pass() && worst_denominator < 1.0 && worst_margin >= 0.0 && elapsed.as_secs_f64() <= 120.0,
        format!(
            "k <= {}: max(norm+error) of denominator {worst_denominator:.6e} < 1, min(grad - error - k) {worst_margin:.6e} >= 0, {:.1}s at h = 1/512",
            report.k_max,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let delta = 0.1;
    let gammas = [-2.0, -3.0, -1.5, -0.5, 0.5, 1.0, -4.0, -2.5, 2.0, -1.25];
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let eps = 10f64.powf(-12.0 + 11.0 * i as f64 / 19.0);
        let gamma = gammas[i % gammas.len()];
        let grid = build_grid(&Region::ball(Point::ORIGIN, delta), 0.01, &[Point::ORIGIN]).map_err(|e| e.to_string())?;
        let q = grid
            .integrate(|x| (gamma * (x.norm_sq() + eps).ln()).exp())
            .map_err(|e| e.to_string())?;
        let exact = radial_power_integral(delta, eps, gamma);
        worst = worst.max((q - exact).abs() / exact);
    }
    // the singular case p = 4, β = 1 against the counterexample's own closed form
    let grid = build_grid(&Region::ball(Point::ORIGIN, delta), 0.01, &[Point::ORIGIN]).map_err(|e| e.to_string())?;
    let q = grid.integrate(|x| (x.norm_sq() + 1e-3).powi(-2)).map_err(|e| e.to_string())?;
    let reference = closed_form_integral(4.0, 1.0, delta, 1e-3);
    worst = worst.max((q - reference).abs() / reference);
    check(worst <= 1e-8, format!("20 (eps, gamma) pairs, eps in [1e-12, 1e-1]: max relative error {worst:.3e} <= 1e-8"))
}

fn random_field(rng: &mut ChaCha8Rng, around: Point, spread: f64) -> SmoothField {
    let terms = rng.random_range(1..=3);
    let mut parts = Vec::new();
    for _ in 0..terms {
        let c = Point::new(
            around.x + rng.random_range(-spread..spread),
            around.y + rng.random_range(-spread..spread),
        );
        let coeff = rng.random_range(-2.0..2.0);
        if rng.random_bool(0.3) {
            parts.push((coeff, make_linear_bump(c)));
        } else {
            let r_out = rng.random_range(0.15..0.5);
            let r_in = r_out * rng.random_range(0.2..0.8);
            parts.push((coeff, make_cutoff_at(c, r_in, r_out).expect("valid radii")));
        }
    }
    combine(&parts).expect("nonempty")
}

fn criterion_3() -> Outcome {
    let sigma = build_sigma(&CounterexampleSpec::default()).map_err(|e| e.to_string())?;
    let flat = ConformalSurface::flat();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_501);
    let mut worst: f64 = 0.0;
    let mut bound_ok = true;
    let mut count = 0;
    for (surface, around) in [(&flat, Point::ORIGIN), (&sigma.surface, Point::new(3.0, 0.0))] {
        for _ in 0..10 {
            let u = random_field(&mut rng, around, 0.15);
            let grid = support_grid(surface, &u, 1.0 / 512.0).map_err(|e| e.to_string())?;
            let r = l2_identity_check(surface, &u, &grid).map_err(|e| e.to_string())?;
            worst = worst.max(r.residual);
            bound_ok &= r.bound_holds;
            count += 1;
        }
    }
    check(
        worst <= 1e-6 && bound_ok,
        format!("{count} random fields (flat and sigma): max residual {worst:.3e} <= 1e-6, L2 bound holds: {bound_ok}"),
    )
}

fn criterion_4() -> Outcome {
    let spec = RemarkSpec::default();
    let report = integral_bound_example(&spec, 1.0 / 256.0, &default_remark_samples(spec.n_max)).map_err(|e| e.to_string())?;
    let rel = (report.fitted_exponent - report.expected_exponent).abs() / report.expected_exponent;
    let bounded = report.sup_variant <= 1.05 * report.first_patch_variant
        && report.sup_gaussian <= 1.05 * report.first_patch_gaussian;
    let floor = 0.75 * PI - 0.02;
    check(
        rel <= 0.05 && bounded && report.min_volume >= floor,
        format!(
            "fitted exponent {:.6} vs 2 - a = {} (rel {rel:.2e}); sup over w {:.6e} vs first bump {:.6e} (Gaussian {:.6e} vs {:.6e}); min vol {:.5} >= {floor:.5}",
            report.fitted_exponent,
            report.expected_exponent,
            report.sup_variant,
            report.first_patch_variant,
            report.sup_gaussian,
            report.first_patch_gaussian,
            report.min_volume
        ),
    )
}

fn criterion_5() -> Outcome {
    let h = 1.0 / 128.0;
    let flat = ConformalSurface::flat();
    let sigma = build_sigma(&CounterexampleSpec::default()).map_err(|e| e.to_string())?;
    let cases = [
        ("flat unit square", &flat, Region::rectangle(Point::ORIGIN, Point::new(1.0, 1.0)), 0.25),
        (
            "sigma 4x1 window",
            &sigma.surface,
            Region::rectangle(Point::new(-0.5, -0.5), Point::new(3.5, 0.5)),
            0.5,
        ),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (name, s, region, radius) in cases {
        let c = greedy_covering(s, &region, radius, h).map_err(|e| e.to_string())?;
        let brute = brute_force_overlap(s, &region, radius, h, &c.centers).map_err(|e| e.to_string())?;
        let pass = c.disjointness_ok && c.coverage_ok && c.overlap_count <= 25 && brute == c.overlap_count;
        ok &= pass;
        details.push(format!(
            "{name} R={radius}: {} centers, N={} (brute force {brute}), disjoint {}, covered {}",
            c.centers.len(),
            c.overlap_count,
            c.disjointness_ok,
            c.coverage_ok
        ));
    }
    check(ok, details.join("; "))
}

fn criterion_6() -> Outcome {
    let grid = BallGrid::new(1.0 / 128.0);
    let qs = [1.0, 2.0, 4.0];
    let levels = [0.0, -1.0, -0.5, 1.0];
    let flat = ConformalSurface::flat();
    let remark = remark_surface(&RemarkSpec::default()).map_err(|e| e.to_string())?;
    let mut flat_max: f64 = 0.0;
    for c in [Point::ORIGIN, Point::new(0.7, -0.3)] {
        for r in [0.25, 1.0] {
            let t = k_local_many(&flat, c, &qs, r, &[0.0, -1.0], 2, &grid).map_err(|e| e.to_string())?;
            flat_max = t.iter().flatten().fold(flat_max, |a, &b| a.max(b));
        }
    }
    let mut monotone = true;
    let mut shift = true;
    let mut shrink = true;
    let mut balls = 0;
    for c in [Point::new(4.3, 0.0), Point::new(4.2, 0.2), Point::new(8.1, 0.0)] {
        let mut previous: Option<Vec<Vec<f64>>> = None;
        for r in [0.5, 0.25, 0.125] {
            let t = k_local_many(&remark, c, &qs, r, &levels, 2, &grid).map_err(|e| e.to_string())?;
            balls += 1;
            for row in &t {
                monotone &= row.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12));
            }
            for (li, &big_k) in levels.iter().enumerate().skip(1) {
                shift &= t[0].iter().zip(&t[li]).all(|(k0, kk)| *k0 <= kk + big_k.abs() * r * r + 1e-12);
            }
            if let Some(prev) = &previous {
                shrink &= t[0].iter().zip(&prev[0]).all(|(now, before)| now < before);
            }
            previous = Some(t);
        }
    }
    check(
        flat_max == 0.0 && monotone && shift && shrink,
        format!(
            "flat max k = {flat_max}; on {balls} balls of the integral-bounds surface: monotone in q {monotone}, shift bound {shift}, k(R/2) < k(R) {shrink}"
        ),
    )
}

fn max_flat_error(h: f64) -> Result<f64, String> {
    let dom = Region::rectangle(Point::new(-2.0, -2.0), Point::new(2.0, 2.0));
    let f = distance_field(&ConformalSurface::flat(), Point::ORIGIN, &dom, h).map_err(|e| e.to_string())?;
    let lattice = f.lattice();
    let mut worst: f64 = 0.0;
    for (i, &d) in f.values().iter().enumerate() {
        let e = lattice.point(i).norm();
        if e > 0.0 {
            worst = worst.max((d - e).abs() / e);
        }
    }
    Ok(worst)
}

fn criterion_7() -> Outcome {
    let errors: Vec<f64> = [0.01, 0.005, 0.0025]
        .iter()
        .map(|&h| max_flat_error(h))
        .collect::<Result<_, _>>()?;
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let sigma = build_sigma(&CounterexampleSpec::default()).map_err(|e| e.to_string())?;
    let flat = ConformalSurface::flat();
    let dom = Region::rectangle(Point::new(-0.5, -0.5), Point::new(3.5, 0.5));
    let mut excess = f64::NEG_INFINITY;
    let mut nodes = 0;
    for src in [Point::ORIGIN, Point::new(0.3, 0.1), Point::new(1.05, -0.02), Point::new(2.9, 0.2)] {
        let dg = distance_field(&sigma.surface, src, &dom, 1.0 / 128.0).map_err(|e| e.to_string())?;
        let de = distance_field(&flat, src, &dom, 1.0 / 128.0).map_err(|e| e.to_string())?;
        for (a, b) in dg.values().iter().zip(de.values()) {
            excess = excess.max(a - b - 1e-12 * b);
            nodes += 1;
        }
    }
    check(
        errors[0] <= 0.02 && orders.iter().all(|&o| o >= 0.9) && excess <= 0.0,
        format!(
            "flat max relative error {:.4e} / {:.4e} / {:.4e} at h = 0.01 / 0.005 / 0.0025, orders {:.3} {:.3}; sigma d_g <= d_e at {nodes} lattice points (max excess {excess:.2e})",
            errors[0], errors[1], errors[2], orders[0], orders[1]
        ),
    )
}

fn criterion_8() -> Outcome {
    let spec = CounterexampleSpec::default();
    let opt = optimality_schedule(|t| t, &spec, CurvatureConvention::Gaussian).map_err(|e| e.to_string())?;
    let sigma = build_sigma(&spec).map_err(|e| e.to_string())?;
    let base = verify_failure(&sigma, 1.0 / 128.0).map_err(|e| e.to_string())?;
    let product = product_norms(&base, 2.0, 3).map_err(|e| e.to_string())?;
    let preserved = base.rows.iter().zip(&product.rows).all(|(a, b)| {
        a.denominator_below_one == b.denominator_below_one
            && a.gradient_at_least_k == b.gradient_at_least_k
            && b.gradient_norm == 2.0 * a.gradient_norm
    }) && product.all_pass();
    check(
        opt.violations == 0 && preserved,
        format!(
            "alpha(t) = t: {} centers up to s = {:.3e}, {} samples, {} violations (min margin {:.3e}); product V=2, n=3 keeps all failure booleans: {preserved}",
            opt.centers.len(),
            opt.centers.last().map_or(0.0, |c| c.x),
            opt.samples,
            opt.violations,
            opt.min_margin
        ),
    )
}

fn criterion_9() -> Outcome {
    let sigma = build_sigma(&CounterexampleSpec::default()).map_err(|e| e.to_string())?;
    let (one, pass_one, t1) = run_failure(&sigma, 1)?;
    let (eight, pass_eight, t8) = run_failure(&sigma, 8)?;
    let (again, _, _) = run_failure(&sigma, 1)?;
    check(
        one == eight && one == again && pass_one && pass_eight,
        format!(
            "criterion 1 CSV with 1, 8 and again 1 workers: identical {} ({} bytes, {:.1}s / {:.1}s)",
            one == eight && one == again,
            one.len(),
            t1.as_secs_f64(),
            t8.as_secs_f64()
        ),
    )
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 9] = [
        (1, "counterexample reproduction", criterion_1),
        (2, "closed-form oracle", criterion_2),
        (3, "L2 identity", criterion_3),
        (4, "integral versus pointwise curvature", criterion_4),
        (5, "covering properties", criterion_5),
        (6, "k(q,R,K) suite", criterion_6),
        (7, "eikonal accuracy", criterion_7),
        (8, "optimality schedule and product", criterion_8),
        (9, "determinism", criterion_9),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n} ({name}): PASS [{secs:.1}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL [{secs:.1}s] {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
