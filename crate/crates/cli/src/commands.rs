use std::fmt::Write as _;

use lpgrad_core::counterexample::{
    build_sigma, default_remark_samples, integral_bound_example, optimality_schedule, product_norms,
    remark_surface, verify_failure_with, Sigma,
};
use lpgrad_core::curvature::{k_global, BallGrid};
use lpgrad_core::geodesic::greedy_covering;
use lpgrad_core::inequality::{best_constant_search, BumpWidthFamily, FieldFamily, IndexedFamily};
use lpgrad_core::quadrature::{build_grid_with, GridOptions, Region};
use lpgrad_core::{ConformalSurface, Error, Point, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::args::*;

/// Result of one subcommand: a JSON report, a CSV table and a one-line summary.
pub struct Output {
    pub report: Value,
    pub csv: String,
    pub summary: String,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn grid_options(grid: &GridArgs, base: GridOptions) -> Result<GridOptions> {
    if grid.order == 0 {
        return Err(Error::InvalidArgument("quadrature order must be positive".into()));
    }
    Ok(GridOptions { order: grid.order, ..base })
}

fn build_surface(args: &SurfaceArgs) -> Result<(ConformalSurface, Option<Sigma>)> {
    let (surface, sigma) = match args.surface {
        SurfaceKind::Flat => (ConformalSurface::flat(), None),
        SurfaceKind::Sigma => {
            let sigma = build_sigma(&args.sigma.spec())?;
            (sigma.surface.clone(), Some(sigma))
        }
        SurfaceKind::Remark => (remark_surface(&args.remark.spec(args.sigma.p))?, None),
    };
    Ok((surface.with_convention(args.convention.into()), sigma))
}

pub fn counterexample(args: &CounterexampleArgs) -> Result<Output> {
    let sigma = build_sigma(&args.sigma.spec())?;
    let h = args.grid.spacing();
    let report = verify_failure_with(&sigma, h, &grid_options(&args.grid, sigma.grid_options())?)?;
    let summary = format!("counterexample: all rows pass = {} (k <= {})", report.all_pass(), report.k_max);
    Ok(Output { report: to_value(&report), csv: report.to_csv(), summary })
}

pub fn product(args: &ProductArgs) -> Result<Output> {
    let sigma = build_sigma(&args.sigma.spec())?;
    let h = args.grid.spacing();
    let base = verify_failure_with(&sigma, h, &grid_options(&args.grid, sigma.grid_options())?)?;
    let report = product_norms(&base, args.volume, args.n)?;
    let summary = format!(
        "product: V = {}, n = {}, all rows pass = {}",
        args.volume,
        args.n,
        report.all_pass()
    );
    Ok(Output { report: to_value(&report), csv: report.to_csv(), summary })
}

pub fn kq(args: &KqArgs, seed: u64) -> Result<Output> {
    let (surface, _) = build_surface(&args.surface)?;
    let [lo, hi] = args.window;
    let mut centers = args.centers.0.clone();
    if args.samples > 0 {
        if !(lo.x < hi.x && lo.y < hi.y) {
            return Err(Error::InvalidArgument("sampling window is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        centers.extend((0..args.samples).map(|_| Point::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y))));
    }
    let grid = BallGrid {
        h: args.grid.spacing(),
        options: grid_options(&args.grid, GridOptions::default())?,
        with_error: true,
    };
    let stats = k_global(&surface, &centers, args.q, args.radius, args.big_k, args.n, &grid)?;
    let summary = format!("kq: sup over {} centers k = {:e}", centers.len(), stats.sampled_sup);
    Ok(Output { report: to_value(&stats), csv: stats.to_csv(), summary })
}

pub fn covering(args: &CoveringArgs) -> Result<Output> {
    let (surface, _) = build_surface(&args.surface)?;
    let [lo, hi] = args.region;
    let h = args.grid.spacing();
    let report = greedy_covering(&surface, &Region::rectangle(lo, hi), args.radius, h)?;
    let mut csv = String::from("center_x,center_y\n");
    for c in &report.centers {
        let _ = writeln!(csv, "{:.16e},{:.16e}", c.x, c.y);
    }
    let summary = format!(
        "covering: {} centers, N = {}, disjoint {}, covered {}",
        report.centers.len(),
        report.overlap_count,
        report.disjointness_ok,
        report.coverage_ok
    );
    Ok(Output { report: to_value(&report), csv, summary })
}

pub fn estimate(args: &EstimateArgs) -> Result<Output> {
    let (surface, sigma) = build_surface(&args.surface)?;
    let h = args.grid.spacing();
    let p = args.surface.sigma.p;
    let singular = surface.singular_centers();
    let (family, region, base): (Box<dyn FieldFamily>, Region, GridOptions) = match args.family {
        FamilyKind::Uk => {
            let sigma = match sigma {
                Some(s) => s,
                None => build_sigma(&args.surface.sigma.spec())?,
            };
            let options = sigma.grid_options();
            (Box::new(IndexedFamily { fields: sigma.fields.clone() }), sigma.domain(), options)
        }
        FamilyKind::Bump => {
            if !(args.width_min > 0.0 && args.width_max > args.width_min) {
                return Err(Error::InvalidArgument(format!(
                    "need 0 < width-min < width-max, got {} and {}",
                    args.width_min, args.width_max
                )));
            }
            let c = args.center;
            let half = args.width_max + 0.25;
            let region = Region::rectangle(Point::new(c.x - half, c.y - half), Point::new(c.x + half, c.y + half));
            let family = BumpWidthFamily { center: c, widths: (args.width_min, args.width_max), lattice: args.lattice };
            (Box::new(family), region, GridOptions::default())
        }
    };
    let [lo, hi] = region.bounding_box();
    let centers: Vec<Point> = singular
        .into_iter()
        .filter(|c| c.x > lo.x && c.x < hi.x && c.y > lo.y && c.y < hi.y)
        .collect();
    let grid = build_grid_with(&region, h, &centers, &grid_options(&args.grid, base)?)?;
    let report = best_constant_search(&surface, family.as_ref(), p, args.budget, &grid)?;
    let summary = format!(
        "estimate: best {} with ratio {:e} after {} evaluations",
        report.best.label, report.best.ratio, report.evaluations
    );
    Ok(Output { report: to_value(&report), csv: report.to_csv(), summary })
}

pub fn integral_example(args: &IntegralExampleArgs) -> Result<Output> {
    let spec = args.remark.spec(args.p);
    let h = args.grid.spacing();
    let report = integral_bound_example(&spec, h, &default_remark_samples(spec.n_max))?;
    let summary = format!(
        "integral-example: fitted exponent {:.6} (expected {}), min volume {:.5}",
        report.fitted_exponent, report.expected_exponent, report.min_volume
    );
    Ok(Output { report: to_value(&report), csv: report.to_csv(), summary })
}

pub fn optimality(args: &OptimalityArgs) -> Result<Output> {
    let (power, scale) = (args.alpha_power, args.alpha_scale);
    if !(power > 0.0 && scale > 0.0) {
        return Err(Error::InvalidArgument("alpha needs positive power and scale".into()));
    }
    let report = optimality_schedule(move |t: f64| scale * t.powf(power), &args.sigma.spec(), args.convention.into())?;
    let mut csv = String::from("m,center_x,center_y,curvature_floor,epsilon\n");
    for (m, ((c, f), e)) in report.centers.iter().zip(&report.curvature_floor).zip(&report.epsilons).enumerate() {
        let _ = writeln!(csv, "{m},{:.16e},{:.16e},{:.16e},{:.16e}", c.x, c.y, f, e);
    }
    let summary = format!("optimality: {} violations over {} samples", report.violations, report.samples);
    Ok(Output { report: to_value(&report), csv, summary })
}

pub fn run(command: &Command, seed: u64) -> Result<Output> {
    if let Some(h) = command.spacing() {
        if !(h > 0.0 && h <= 0.5) {
            return Err(Error::InvalidArgument(format!("h must lie in (0, 1/2], got {h}")));
        }
    }
    match command {
        Command::Counterexample(a) => counterexample(a),
        Command::Kq(a) => kq(a, seed),
        Command::Covering(a) => covering(a),
        Command::Estimate(a) => estimate(a),
        Command::IntegralExample(a) => integral_example(a),
        Command::Optimality(a) => optimality(a),
        Command::Product(a) => product(a),
    }
}

/// Two for bad input, three when the grid is too coarse to decide.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Inconclusive(_) => 3,
        Error::Evaluation { .. } => 1,
        _ => 2,
    }
}

pub fn envelope(command: &Command, report: Value, workers: usize, seed: u64) -> Value {
    json!({
        "command": command.name(),
        "config": { "seed": seed, "workers": workers, "arguments": to_value(command) },
        "report": report,
    })
}
