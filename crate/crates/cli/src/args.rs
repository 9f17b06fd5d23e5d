use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lpgrad_core::counterexample::{CounterexampleSpec, RemarkSpec};
use lpgrad_core::{CurvatureConvention, Point};
use serde::Serialize;

/// Accepts decimals and fractions such as `1/512`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let value = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("{s}: {e}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("{s} is not a finite number"))
    }
}

fn parse_numbers(s: &str, count: usize) -> Result<Vec<f64>, String> {
    let parts: Vec<f64> = s.split(',').map(parse_real).collect::<Result<_, _>>()?;
    if parts.len() != count {
        return Err(format!("expected {count} comma-separated numbers, got {s:?}"));
    }
    Ok(parts)
}

pub fn parse_point(s: &str) -> Result<Point, String> {
    let v = parse_numbers(s, 2)?;
    Ok(Point::new(v[0], v[1]))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PointList(pub Vec<Point>);

pub fn parse_points(s: &str) -> Result<PointList, String> {
    s.split(';').filter(|t| !t.trim().is_empty()).map(parse_point).collect::<Result<_, _>>().map(PointList)
}

pub fn parse_box(s: &str) -> Result<[Point; 2], String> {
    let v = parse_numbers(s, 4)?;
    Ok([Point::new(v[0], v[1]), Point::new(v[2], v[3])])
}

#[derive(Parser, Debug)]
#[command(name = "lpgrad", version, about = "Lp gradient estimates on conformal surfaces", args_override_self = true)]
pub struct Cli {
    /// Flat `key = value` file; keys mirror long flag names.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (falls back to LPGRAD_OUT_DIR, then the config file, then `.`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Seed for sampled lattices.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Norms of u_k on the counterexample surface.
    Counterexample(CounterexampleArgs),
    /// Integral curvature k(x, q, R, K) over a set of centers.
    Kq(KqArgs),
    /// Greedy covering by disjoint half-radius balls.
    Covering(CoveringArgs),
    /// Search a field family for the largest gradient ratio.
    Estimate(EstimateArgs),
    /// Surface with unbounded curvature but bounded integral curvature.
    IntegralExample(IntegralExampleArgs),
    /// Push the patches outwards until min Ric >= -alpha(r).
    Optimality(OptimalityArgs),
    /// Failure norms on the product with a flat torus.
    Product(ProductArgs),
}

impl Command {
    /// Fills unset resolutions with the per-command defaults so the recorded
    /// configuration is complete.
    pub fn resolve_defaults(&mut self) {
        let (grid, default) = match self {
            Command::Counterexample(a) => (Some(&mut a.grid), 1.0 / 512.0),
            Command::Product(a) => (Some(&mut a.grid), 1.0 / 512.0),
            Command::Kq(a) => (Some(&mut a.grid), 1.0 / 64.0),
            Command::Covering(a) => (Some(&mut a.grid), 1.0 / 128.0),
            Command::Estimate(a) => (Some(&mut a.grid), 1.0 / 64.0),
            Command::IntegralExample(a) => (Some(&mut a.grid), 1.0 / 256.0),
            Command::Optimality(_) => (None, 0.0),
        };
        if let Some(g) = grid {
            g.h.get_or_insert(default);
        }
    }

    pub fn spacing(&self) -> Option<f64> {
        match self {
            Command::Counterexample(a) => a.grid.h,
            Command::Product(a) => a.grid.h,
            Command::Kq(a) => a.grid.h,
            Command::Covering(a) => a.grid.h,
            Command::Estimate(a) => a.grid.h,
            Command::IntegralExample(a) => a.grid.h,
            Command::Optimality(_) => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Counterexample(_) => "counterexample",
            Command::Kq(_) => "kq",
            Command::Covering(_) => "covering",
            Command::Estimate(_) => "estimate",
            Command::IntegralExample(_) => "integral-example",
            Command::Optimality(_) => "optimality",
            Command::Product(_) => "product",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SigmaArgs {
    #[arg(long, default_value_t = 4.0, value_parser = parse_real)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0, value_parser = parse_real)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.1, value_parser = parse_real)]
    pub delta: f64,
    #[arg(long, default_value_t = 8)]
    pub kmax: usize,
    /// Distance between consecutive patch centers.
    #[arg(long, default_value_t = 1.0, value_parser = parse_real)]
    pub spacing: f64,
    /// Multiplier on the bumps; derived from the flat norms when absent.
    #[arg(long, value_parser = parse_real)]
    pub scale: Option<f64>,
}

impl SigmaArgs {
    pub fn spec(&self) -> CounterexampleSpec {
        CounterexampleSpec {
            p: self.p,
            beta: self.beta,
            delta: self.delta,
            k_max: self.kmax,
            spacing: self.spacing,
            scale: self.scale,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RemarkArgs {
    /// Growth parameter; the curvature peaks grow like n^(2 - a).
    #[arg(long, default_value_t = 1.75, value_parser = parse_real)]
    pub a: f64,
    #[arg(long, default_value_t = 0.1, value_parser = parse_real)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 10)]
    pub nmax: usize,
}

impl RemarkArgs {
    pub fn spec(&self, p: f64) -> RemarkSpec {
        RemarkSpec {
            p,
            a: self.a,
            amplitude: self.amplitude,
            n_max: self.nmax,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GridArgs {
    /// Cell size of the quadrature tiles and eikonal lattice.
    #[arg(long, value_parser = parse_real)]
    pub h: Option<f64>,
    /// Gauss-Legendre order per tile direction.
    #[arg(long, default_value_t = 4)]
    pub order: usize,
}

impl GridArgs {
    pub fn spacing(&self) -> f64 {
        self.h.expect("resolution resolved before running")
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    Flat,
    Sigma,
    Remark,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionArg {
    Gaussian,
    Remark,
}

impl From<ConventionArg> for CurvatureConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Gaussian => CurvatureConvention::Gaussian,
            ConventionArg::Remark => CurvatureConvention::RemarkVariant,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SurfaceArgs {
    #[arg(long, value_enum, default_value_t = SurfaceKind::Flat)]
    pub surface: SurfaceKind,
    #[arg(long, value_enum, default_value_t = ConventionArg::Gaussian)]
    pub convention: ConventionArg,
    #[command(flatten)]
    pub sigma: SigmaArgs,
    #[command(flatten)]
    pub remark: RemarkArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct CounterexampleArgs {
    #[command(flatten)]
    pub sigma: SigmaArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct ProductArgs {
    #[command(flatten)]
    pub sigma: SigmaArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Volume of the flat torus factor.
    #[arg(long, default_value_t = 2.0, value_parser = parse_real)]
    pub volume: f64,
    /// Dimension of the product.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct KqArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 2.0, value_parser = parse_real)]
    pub q: f64,
    #[arg(long = "R", default_value_t = 1.0, value_parser = parse_real)]
    pub radius: f64,
    #[arg(long = "K", default_value_t = 0.0, value_parser = parse_real)]
    pub big_k: f64,
    /// Dimension entering rho_K through (n - 1) K.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Ball centers as `x,y;x,y;...`.
    #[arg(long, default_value = "0,0", value_parser = parse_points)]
    pub centers: PointList,
    /// Additional centers drawn uniformly from `--window` with `--seed`.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long, default_value = "-0.5,-0.5,0.5,0.5", value_parser = parse_box)]
    pub window: [Point; 2],
}

#[derive(Args, Debug, Serialize)]
pub struct CoveringArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Rectangle `x0,y0,x1,y1` to cover.
    #[arg(long, default_value = "0,0,1,1", value_parser = parse_box)]
    pub region: [Point; 2],
    #[arg(long = "R", default_value_t = 0.25, value_parser = parse_real)]
    pub radius: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// The partial sums u_0, ..., u_kmax.
    Uk,
    /// Dilated radial bumps around `--center`.
    Bump,
}

#[derive(Args, Debug, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value_t = FamilyKind::Uk)]
    pub family: FamilyKind,
    /// Largest number of distinct family members evaluated.
    #[arg(long, default_value_t = 64)]
    pub budget: usize,
    #[arg(long, default_value = "0,0", value_parser = parse_point)]
    pub center: Point,
    #[arg(long, default_value_t = 1.5, value_parser = parse_real)]
    pub width_min: f64,
    #[arg(long, default_value_t = 12.0, value_parser = parse_real)]
    pub width_max: f64,
    #[arg(long, default_value_t = 9)]
    pub lattice: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct IntegralExampleArgs {
    #[arg(long, default_value_t = 4.0, value_parser = parse_real)]
    pub p: f64,
    #[command(flatten)]
    pub remark: RemarkArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct OptimalityArgs {
    #[command(flatten)]
    pub sigma: SigmaArgs,
    #[arg(long, value_enum, default_value_t = ConventionArg::Gaussian)]
    pub convention: ConventionArg,
    /// alpha(t) = alpha_scale * t^alpha_power.
    #[arg(long, default_value_t = 1.0, value_parser = parse_real)]
    pub alpha_power: f64,
    #[arg(long, default_value_t = 1.0, value_parser = parse_real)]
    pub alpha_scale: f64,
}
