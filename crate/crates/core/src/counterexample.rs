//! The surface `Σ = (ℝ², λ² dx²)` on which the `L^p` gradient estimate fails,
//! and the companion examples built from the same machinery.
//!
//! Around each center `x_m` the factor is `λ = (|x - x_m|² + ε_m)^β` on
//! `B_δ(x_m)`, blended to `1` across `δ ≤ r ≤ 1/8` with the radial cutoff. The
//! test functions are `u_k = Σ_{m ≤ k} c φ_m / 2^m`, where `φ_m` is the linear
//! bump translated to `x_m`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{combine, make_cutoff, make_linear_bump, CutoffProfile, Jet, Point, SmoothField};
use crate::geodesic::{ball_field, geodesic_ball};
use crate::quadrature::{build_grid, build_grid_with, norm_densities, GridOptions, Region};
use crate::surface::{min_ricci_from, ConformalFactor, ConformalSurface, CurvatureConvention};

/// Outer radius of the deformed region around each center.
pub const BLEND_OUTER: f64 = 0.125;
/// Smallest ε the schedule may use.
pub const EPS_FLOOR: f64 = 1e-300;
/// Resolution of the flat quadrature that fixes the scale `c`.
pub const PHI0_RESOLUTION: f64 = 1.0 / 256.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSpec {
    pub p: f64,
    pub beta: f64,
    pub delta: f64,
    pub k_max: usize,
    /// Centers are `x_m = (m · spacing, 0)`.
    pub spacing: f64,
    /// Multiplier `c` on `φ₀`; derived from the flat norms of `φ₀` when unset.
    pub scale: Option<f64>,
}

impl Default for CounterexampleSpec {
    fn default() -> Self {
        Self {
            p: 4.0,
            beta: 1.0,
            delta: 0.1,
            k_max: 8,
            spacing: 1.0,
            scale: None,
        }
    }
}

impl CounterexampleSpec {
    pub fn validate(&self) -> Result<()> {
        validate_exponents(self.p, self.beta, self.delta)?;
        if !(self.spacing >= 1.0 && self.spacing.is_finite()) {
            return Err(invalid(format!("center spacing must be at least 1, got {}", self.spacing)));
        }
        if self.k_max > 64 {
            return Err(invalid(format!("k_max = {} exceeds double-precision range", self.k_max)));
        }
        if let Some(c) = self.scale {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("scale must be positive, got {c}")));
            }
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        (2.0 - self.p) * self.beta
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..=self.k_max)
            .map(|m| Point::new(m as f64 * self.spacing, 0.0))
            .collect()
    }
}

fn validate_exponents(p: f64, beta: f64, delta: f64) -> Result<()> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(invalid(format!("p must exceed 2, got {p}")));
    }
    if !(beta * (p - 2.0) > 1.0 && beta.is_finite()) {
        return Err(invalid(format!("need beta (p - 2) > 1, got beta = {beta}, p = {p}")));
    }
    if !(delta > 0.0 && delta < BLEND_OUTER) {
        return Err(invalid(format!("delta must lie in (0, 1/8), got {delta}")));
    }
    Ok(())
}

/// `ln I(ε)` with `I(ε) = ∫_{B_δ} (r² + ε)^γ dx`, `γ = (2 - p)β < -1`.
pub fn log_closed_form_integral(p: f64, beta: f64, delta: f64, eps: f64) -> f64 {
    let g1 = (2.0 - p) * beta + 1.0;
    // I = π ε^{γ+1} (1 - (1 + δ²/ε)^{γ+1}) / |γ+1|
    let tail = -(g1 * (delta * delta / eps).ln_1p()).exp_m1();
    PI.ln() + g1 * eps.ln() + tail.ln() - (-g1).ln()
}

pub fn closed_form_integral(p: f64, beta: f64, delta: f64, eps: f64) -> f64 {
    log_closed_form_integral(p, beta, delta, eps).exp()
}

/// Largest `ε` (to bisection accuracy in `log ε`) with `c^p I(ε) ≥ threshold`.
pub fn select_epsilon(p: f64, beta: f64, delta: f64, threshold: f64, c: f64) -> Result<f64> {
    validate_exponents(p, beta, delta)?;
    select_epsilon_below(p, beta, delta, threshold, c, 1.0 - delta * delta)
}

fn select_epsilon_below(p: f64, beta: f64, delta: f64, threshold: f64, c: f64, upper: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(invalid(format!("threshold must be positive, got {threshold}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("scale must be positive, got {c}")));
    }
    let target = threshold.ln() - p * c.ln();
    let feasible = |log_eps: f64| log_closed_form_integral(p, beta, delta, log_eps.exp()) >= target;
    let (mut lo, mut hi) = (EPS_FLOOR.ln(), upper.ln());
    if feasible(hi) {
        return Ok(upper);
    }
    if !feasible(lo) {
        return Err(Error::ScheduleOverflow(format!(
            "threshold {threshold:e} is not reached for any epsilon >= {EPS_FLOOR:e}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo.exp())
}

/// Flat norms of `φ₀`, the linear bump at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Phi0Norms {
    pub value: f64,
    pub gradient: f64,
    pub laplacian: f64,
}

pub fn phi0_norms(p: f64) -> Result<Phi0Norms> {
    let flat = ConformalSurface::flat();
    let phi = make_linear_bump(Point::ORIGIN);
    let grid = build_grid(&Region::rectangle(Point::new(-0.5, -0.5), Point::new(0.5, 0.5)), PHI0_RESOLUTION, &[])?;
    let [value, gradient, laplacian] = grid.integrate_n(|x| norm_densities(&flat, &phi, p, x))?;
    Ok(Phi0Norms { value, gradient, laplacian })
}

/// `c = ½ (‖φ₀‖_p^p + ‖Δφ₀‖_p^p)^{-1/p} (Σ 2^{-mp})^{-1/p}`.
pub fn default_scale(p: f64, norms: &Phi0Norms) -> f64 {
    let geometric = 1.0 / (1.0 - 2f64.powf(-p));
    0.5 * (norms.value + norms.laplacian).powf(-1.0 / p) * geometric.powf(-1.0 / p)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonSchedule {
    pub scale: f64,
    pub epsilons: Vec<f64>,
    /// `2^{mp} / c^p`.
    pub thresholds: Vec<f64>,
    /// Closed-form `I(ε_m)`.
    pub integrals: Vec<f64>,
}

pub fn epsilon_schedule(spec: &CounterexampleSpec, scale: f64) -> Result<EpsilonSchedule> {
    spec.validate()?;
    let (p, beta, delta) = (spec.p, spec.beta, spec.delta);
    let mut upper = 1.0 - delta * delta;
    let mut sched = EpsilonSchedule {
        scale,
        epsilons: Vec::new(),
        thresholds: Vec::new(),
        integrals: Vec::new(),
    };
    for m in 0..=spec.k_max {
        let threshold = 2f64.powf(m as f64 * p);
        let mut eps = select_epsilon_below(p, beta, delta, threshold, scale, upper)?;
        if m > 0 && eps >= upper {
            eps = upper * (1.0 - 1e-9);
        }
        sched.epsilons.push(eps);
        sched.thresholds.push(threshold / scale.powf(p));
        sched.integrals.push(closed_form_integral(p, beta, delta, eps));
        upper = eps;
    }
    Ok(sched)
}

/// `log λ` of one deformed patch in coordinates centered at the patch.
fn patch_log_jet(offset: Point, eps: f64, beta: f64, blend: &CutoffProfile) -> Jet {
    let r2 = offset.norm_sq();
    if r2 >= blend.r_out * blend.r_out {
        return Jet::ZERO;
    }
    let s = r2 + eps;
    if r2 <= blend.r_in * blend.r_in {
        return Jet {
            value: beta * s.ln(),
            grad: [2.0 * beta * offset.x / s, 2.0 * beta * offset.y / s],
            laplacian: 4.0 * beta * eps / (s * s),
        };
    }
    let r = r2.sqrt();
    let (eta, deta, d2eta) = blend.eval(r);
    let pw = (beta * s.ln()).exp();
    let dp = 2.0 * beta * r * pw / s;
    let d2p = 2.0 * beta * pw / s + 4.0 * beta * (beta - 1.0) * r2 * pw / (s * s);
    let lam = 1.0 - eta * (1.0 - pw);
    let dl = -deta * (1.0 - pw) + eta * dp;
    let d2l = -d2eta * (1.0 - pw) + 2.0 * deta * dp + eta * d2p;
    let df = dl / lam;
    Jet::radial(lam.ln(), df, d2l / lam - df * df, offset)
}

/// Conformal factor of `Σ`: one deformed patch `(center, ε)` per center.
#[derive(Clone, Debug)]
pub struct SigmaFactor {
    patches: Vec<(Point, f64)>,
    beta: f64,
    blend: CutoffProfile,
}

impl SigmaFactor {
    pub fn new(patches: Vec<(Point, f64)>, beta: f64, delta: f64) -> Result<Self> {
        for (i, (a, ea)) in patches.iter().enumerate() {
            if !(*ea > 0.0 && *ea <= 1.0 - delta * delta) {
                return Err(invalid(format!("epsilon {ea} outside (0, 1 - delta^2]")));
            }
            if patches[..i].iter().any(|(b, _)| a.dist(*b) < 2.0 * BLEND_OUTER) {
                return Err(invalid(format!("patch at {a} overlaps another patch")));
            }
        }
        Ok(Self {
            patches,
            beta,
            blend: CutoffProfile::new(delta, BLEND_OUTER)?,
        })
    }

    pub fn patches(&self) -> &[(Point, f64)] {
        &self.patches
    }

    /// `log λ` near patch `m` at local offset `v`.
    pub fn local_jet(&self, m: usize, v: Point) -> Jet {
        patch_log_jet(v, self.patches[m].1, self.beta, &self.blend)
    }
}

impl ConformalFactor for SigmaFactor {
    fn log_jet(&self, p: Point) -> Jet {
        for &(c, eps) in &self.patches {
            let v = p - c;
            if v.norm_sq() < BLEND_OUTER * BLEND_OUTER {
                return patch_log_jet(v, eps, self.beta, &self.blend);
            }
        }
        Jet::ZERO
    }

    fn singular_centers(&self) -> Vec<Point> {
        self.patches.iter().map(|&(c, _)| c).collect()
    }

    fn shortcut_bound(&self) -> f64 {
        4.0 * BLEND_OUTER
    }
}

/// The assembled counterexample.
#[derive(Clone, Debug)]
pub struct Sigma {
    pub spec: CounterexampleSpec,
    pub phi0: Phi0Norms,
    pub schedule: EpsilonSchedule,
    pub surface: ConformalSurface,
    /// `φ_m` for `m = 0..=k_max`.
    pub bumps: Vec<SmoothField>,
    /// `u_k` for `k = 0..=k_max`.
    pub fields: Vec<SmoothField>,
}

pub fn build_sigma(spec: &CounterexampleSpec) -> Result<Sigma> {
    spec.validate()?;
    let phi0 = phi0_norms(spec.p)?;
    let scale = spec.scale.unwrap_or_else(|| default_scale(spec.p, &phi0));
    let schedule = epsilon_schedule(spec, scale)?;
    let centers = spec.centers();
    let patches = centers.iter().copied().zip(schedule.epsilons.iter().copied()).collect();
    let factor = SigmaFactor::new(patches, spec.beta, spec.delta)?;
    let surface = ConformalSurface::new(
        Arc::new(factor),
        format!("sigma p={} beta={} delta={} k_max={}", spec.p, spec.beta, spec.delta, spec.k_max),
    );
    let bumps: Vec<SmoothField> = centers.iter().map(|&c| make_linear_bump(c)).collect();
    let mut fields = Vec::with_capacity(bumps.len());
    for k in 0..bumps.len() {
        let terms: Vec<(f64, SmoothField)> = bumps[..=k]
            .iter()
            .enumerate()
            .map(|(m, b)| (scale / 2f64.powi(m as i32), b.clone()))
            .collect();
        fields.push(combine(&terms)?);
    }
    Ok(Sigma {
        spec: spec.clone(),
        phi0,
        schedule,
        surface,
        bumps,
        fields,
    })
}

impl Sigma {
    /// Rectangle containing the supports of all `φ_m`.
    pub fn domain(&self) -> Region {
        let last = self.spec.k_max as f64 * self.spec.spacing;
        Region::rectangle(Point::new(-0.5, -0.5), Point::new(last + 0.5, 0.5))
    }

    /// Square around the support of `φ_m`.
    pub fn patch_domain(&self, m: usize) -> Region {
        let c = self.spec.centers()[m];
        Region::rectangle(Point::new(c.x - 0.5, c.y - 0.5), Point::new(c.x + 0.5, c.y + 0.5))
    }

    /// Grid options suited to the patches: polar block of half-width `δ/2`
    /// and grading below the smallest `√ε`.
    pub fn grid_options(&self) -> GridOptions {
        let eps_min = self.schedule.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
        GridOptions {
            r_min: (0.1 * eps_min.sqrt()).min(1e-8),
            patch_half_width: Some(0.5 * self.spec.delta),
            ..GridOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureRow {
    pub k: usize,
    pub value_norm: f64,
    pub laplacian_norm: f64,
    pub gradient_norm: f64,
    pub value_error: f64,
    pub laplacian_error: f64,
    pub gradient_error: f64,
    /// `Σ_{m ≤ k} 2^{-mp} c^p I(ε_m)`.
    pub gradient_lower_bound: f64,
    pub denominator_below_one: bool,
    pub gradient_at_least_k: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureReport {
    pub p: f64,
    pub beta: f64,
    pub delta: f64,
    pub k_max: usize,
    pub scale: f64,
    /// Factor multiplying every norm (the torus volume for products, 1 on `Σ`).
    pub volume: f64,
    /// Scale that makes the rescaled norms comparable with the thresholds.
    pub effective_scale: f64,
    pub dimension: usize,
    pub h: f64,
    pub epsilons: Vec<f64>,
    pub rows: Vec<FailureRow>,
}

impl FailureReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.denominator_below_one && r.gradient_at_least_k)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "k,value_norm_p,laplacian_norm_p,gradient_norm_p,value_error,laplacian_error,gradient_error,gradient_lower_bound,denominator_below_one,gradient_at_least_k\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                r.k,
                r.value_norm,
                r.laplacian_norm,
                r.gradient_norm,
                r.value_error,
                r.laplacian_error,
                r.gradient_error,
                r.gradient_lower_bound,
                r.denominator_below_one,
                r.gradient_at_least_k
            );
        }
        out
    }
}

/// Per-patch integrals `(‖φ_m‖_p^p, ‖∇φ_m‖_p^p, ‖Δφ_m‖_p^p)` and their error bars.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PatchNorms {
    pub value: f64,
    pub gradient: f64,
    pub laplacian: f64,
    pub value_error: f64,
    pub gradient_error: f64,
    pub laplacian_error: f64,
}

pub fn patch_norms(sigma: &Sigma, m: usize, h: f64, options: &GridOptions) -> Result<PatchNorms> {
    let center = sigma.spec.centers()[m];
    let grid = build_grid_with(&sigma.patch_domain(m), h, &[center], options)?;
    let (s, phi, p) = (&sigma.surface, &sigma.bumps[m], sigma.spec.p);
    let [v, g, l] = grid.integrate_n_estimate(|x| norm_densities(s, phi, p, x))?;
    Ok(PatchNorms {
        value: v.value,
        gradient: g.value,
        laplacian: l.value,
        value_error: v.error,
        gradient_error: g.error,
        laplacian_error: l.error,
    })
}

fn decide_row(k: usize, norms: [f64; 3], errors: [f64; 3], factor: f64) -> Result<(bool, bool)> {
    let [value, lap, grad] = norms;
    let [ev, el, eg] = errors;
    let below = if (value + lap + ev + el) * factor < 1.0 {
        true
    } else if (value + lap - ev - el) * factor >= 1.0 {
        false
    } else {
        return Err(Error::Inconclusive(format!(
            "k = {k}: error bar of the denominator straddles 1"
        )));
    };
    let at_least = if (grad - eg) * factor >= k as f64 {
        true
    } else if (grad + eg) * factor < k as f64 {
        false
    } else {
        return Err(Error::Inconclusive(format!(
            "k = {k}: error bar of the gradient norm straddles {k}"
        )));
    };
    Ok((below, at_least))
}

/// The three norms of every `u_k`, assembled from disjoint patch contributions.
pub fn verify_failure(sigma: &Sigma, h: f64) -> Result<FailureReport> {
    verify_failure_with(sigma, h, &sigma.grid_options())
}

pub fn verify_failure_with(sigma: &Sigma, h: f64, options: &GridOptions) -> Result<FailureReport> {
    let spec = &sigma.spec;
    let p = spec.p;
    let c = sigma.schedule.scale;
    let mut acc = [0.0f64; 6];
    let mut bound = 0.0;
    let mut rows = Vec::with_capacity(spec.k_max + 1);
    for m in 0..=spec.k_max {
        let n = patch_norms(sigma, m, h, options)?;
        let w = (p * (c.ln() - m as f64 * 2f64.ln())).exp();
        for (a, x) in acc.iter_mut().zip([
            n.value,
            n.laplacian,
            n.gradient,
            n.value_error,
            n.laplacian_error,
            n.gradient_error,
        ]) {
            *a += w * x;
        }
        bound += w * sigma.schedule.integrals[m];
        let (below, at_least) = decide_row(m, [acc[0], acc[1], acc[2]], [acc[3], acc[4], acc[5]], 1.0)?;
        rows.push(FailureRow {
            k: m,
            value_norm: acc[0],
            laplacian_norm: acc[1],
            gradient_norm: acc[2],
            value_error: acc[3],
            laplacian_error: acc[4],
            gradient_error: acc[5],
            gradient_lower_bound: bound,
            denominator_below_one: below,
            gradient_at_least_k: at_least,
        });
    }
    Ok(FailureReport {
        p,
        beta: spec.beta,
        delta: spec.delta,
        k_max: spec.k_max,
        scale: c,
        volume: 1.0,
        effective_scale: c,
        dimension: 2,
        h,
        epsilons: sigma.schedule.epsilons.clone(),
        rows,
    })
}

/// Norms of `v_k(x, y) = u_k(x)` on `Σ × T` with `vol T = V`, `dim = n`.
///
/// Every norm picks up the factor `V`; the booleans are decided for the
/// rescaled sequence with `c' = c V^{-1/p}`.
pub fn product_norms(report: &FailureReport, volume: f64, n: usize) -> Result<FailureReport> {
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(invalid(format!("torus volume must be positive, got {volume}")));
    }
    if n < 2 {
        return Err(invalid(format!("dimension must be at least 2, got {n}")));
    }
    let mut out = report.clone();
    out.volume = report.volume * volume;
    out.dimension = n;
    out.effective_scale = report.effective_scale * volume.powf(-1.0 / report.p);
    let factor = 1.0 / out.volume;
    for row in &mut out.rows {
        row.value_norm *= volume;
        row.laplacian_norm *= volume;
        row.gradient_norm *= volume;
        row.value_error *= volume;
        row.laplacian_error *= volume;
        row.gradient_error *= volume;
        row.gradient_lower_bound *= volume;
        let (below, at_least) = decide_row(
            row.k,
            [row.value_norm, row.laplacian_norm, row.gradient_norm],
            [row.value_error, row.laplacian_error, row.gradient_error],
            factor,
        )?;
        row.denominator_below_one = below;
        row.gradient_at_least_k = at_least;
    }
    Ok(out)
}

/// Bound `Σ_{m > k} 2^{-mp} c^p (‖φ₀‖_p^p + ‖Δφ₀‖_p^p)` on the tail of `u_∞ - u_k`.
pub fn u_infty_tail(sigma: &Sigma, k: usize) -> f64 {
    let p = sigma.spec.p;
    let c = sigma.schedule.scale;
    let first = 2f64.powf(-((k + 1) as f64) * p);
    c.powf(p) * (sigma.phi0.value + sigma.phi0.laplacian) * first / (1.0 - 2f64.powf(-p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalityReport {
    pub centers: Vec<Point>,
    /// Lower bound `c_m` for `min Ric` on `B_{1/8}(x_m)`.
    pub curvature_floor: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// Length a path from the origin may save by crossing patches.
    pub path_slack: f64,
    pub samples: usize,
    pub violations: usize,
    /// Smallest `min Ric(x) + α(r(x))` over the samples.
    pub min_margin: f64,
}

fn blend_floor(factor: &SigmaFactor, m: usize, convention: CurvatureConvention, delta: f64) -> f64 {
    let n = 2000;
    let mut floor: f64 = 0.0;
    for i in 0..=n {
        let r = delta + (BLEND_OUTER - delta) * i as f64 / n as f64;
        floor = floor.min(min_ricci_from(convention, factor.local_jet(m, Point::new(r, 0.0))));
    }
    floor
}

fn smallest_admissible<A: Fn(f64) -> f64>(alpha: &A, need: f64, lower: f64, offset: f64) -> Result<f64> {
    let ok = |s: f64| alpha((s - offset).max(0.0)) >= need;
    if ok(lower) {
        return Ok(lower);
    }
    let mut step = 1.0f64.max(lower.abs());
    let mut hi = lower + step;
    let mut iterations = 0;
    while !ok(hi) {
        step *= 2.0;
        hi = lower + step;
        iterations += 1;
        if iterations > 2100 || !hi.is_finite() {
            return Err(invalid(format!("alpha never reaches {need:e}")));
        }
    }
    let mut lo = lower;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Places the centers `x_m = (s_m, 0)` far enough out that `min Ric ≥ -α(r)`
/// and checks the bound on a sample lattice in local patch coordinates.
pub fn optimality_schedule<A: Fn(f64) -> f64>(
    alpha: A,
    spec: &CounterexampleSpec,
    convention: CurvatureConvention,
) -> Result<OptimalityReport> {
    spec.validate()?;
    let phi0 = phi0_norms(spec.p)?;
    let scale = spec.scale.unwrap_or_else(|| default_scale(spec.p, &phi0));
    let schedule = epsilon_schedule(spec, scale)?;
    let count = schedule.epsilons.len();
    let path_slack = count as f64 * 2.0 * BLEND_OUTER;
    // local factor with dummy well-separated centers; only offsets are used
    let local = SigmaFactor::new(
        schedule.epsilons.iter().enumerate().map(|(m, &e)| (Point::new(m as f64, 0.0), e)).collect(),
        spec.beta,
        spec.delta,
    )?;
    let mut centers = Vec::with_capacity(count);
    let mut floors = Vec::with_capacity(count);
    let mut lower = 0.0;
    for m in 0..count {
        let center_value = min_ricci_from(convention, local.local_jet(m, Point::ORIGIN));
        let floor = center_value.min(1.1 * blend_floor(&local, m, convention, spec.delta));
        let s = smallest_admissible(&alpha, -floor, lower, BLEND_OUTER + path_slack)?;
        centers.push(Point::new(s, 0.0));
        floors.push(floor);
        lower = s + spec.spacing;
    }

    let mut samples = 0;
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    let mut radii = vec![0.0];
    radii.extend((0..=360).map(|i| 1e-12 * (BLEND_OUTER / 1e-12).powf(i as f64 / 360.0) * 0.999_999));
    radii.extend((1..300).map(|i| BLEND_OUTER * i as f64 / 300.0));
    for (m, c) in centers.iter().enumerate() {
        for &r in &radii {
            for k in 0..8 {
                let t = (k as f64 + 0.5) * PI / 4.0;
                let v = Point::new(r * t.cos(), r * t.sin());
                let ric = min_ricci_from(convention, local.local_jet(m, v));
                let r_lower = (c.x - r - path_slack).max(0.0);
                let margin = ric + alpha(r_lower);
                samples += 1;
                min_margin = min_margin.min(margin);
                if margin < 0.0 {
                    violations += 1;
                }
            }
        }
    }
    Ok(OptimalityReport {
        centers,
        curvature_floor: floors,
        epsilons: schedule.epsilons,
        path_slack,
        samples,
        violations,
        min_margin,
    })
}

/// Parameters of the surface with unbounded curvature but small integral curvature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemarkSpec {
    pub p: f64,
    pub a: f64,
    /// `φ̃₀ = -amplitude · χ` with the cutoff `χ` equal to 1 on `B_{1/4}`.
    pub amplitude: f64,
    pub n_max: usize,
}

impl Default for RemarkSpec {
    fn default() -> Self {
        Self {
            p: 4.0,
            a: 1.75,
            amplitude: 0.1,
            n_max: 10,
        }
    }
}

impl RemarkSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(invalid(format!("p must exceed 1, got {}", self.p)));
        }
        let lo = 2.0 - 2.0 / self.p;
        if !(self.a > lo && self.a < 2.0) {
            return Err(invalid(format!("a must lie in ({lo}, 2), got {}", self.a)));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(invalid(format!("amplitude must be positive, got {}", self.amplitude)));
        }
        if self.n_max == 0 {
            return Err(invalid("n_max must be at least 1"));
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<SmoothField> {
        combine(&[(-self.amplitude, make_cutoff(0.25, 0.5)?)])
    }

    pub fn patch_center(n: usize) -> Point {
        Point::new(4.0 * n as f64, 0.0)
    }
}

/// `g = e^{2φ} dx²` with `φ = Σ_{n ≤ n_max} n^{-a} φ̃₀(n(x - 4n, y))`.
pub fn remark_surface(spec: &RemarkSpec) -> Result<ConformalSurface> {
    spec.validate()?;
    let profile = spec.profile()?;
    let mut terms = Vec::with_capacity(spec.n_max);
    for n in 1..=spec.n_max {
        let nf = n as f64;
        terms.push((nf.powf(-spec.a), profile.dilate(RemarkSpec::patch_center(n), nf)?));
    }
    let phi = combine(&terms)?;
    let shortcut = -(-spec.amplitude).exp_m1();
    Ok(ConformalSurface::exp_with_shortcut(
        phi,
        shortcut,
        format!("remark p={} a={} amplitude={} n_max={}", spec.p, spec.a, spec.amplitude, spec.n_max),
    ))
}

/// Centers mixing the neighborhood of the first bump, later bumps and flat area.
pub fn default_remark_samples(n_max: usize) -> Vec<Point> {
    let mut w = Vec::new();
    for dy in [0.0, 0.4] {
        for dx in [-0.75, -0.25, 0.0, 0.25, 0.75] {
            w.push(Point::new(4.0 + dx, dy));
        }
    }
    let mut later = vec![2, 3, 5, n_max];
    later.retain(|&n| n >= 2 && n <= n_max);
    later.dedup();
    for n in later {
        let c = RemarkSpec::patch_center(n);
        w.push(c);
        w.push(Point::new(c.x + 0.3, 0.2));
    }
    w.push(Point::new(2.0, 0.0));
    w.push(Point::new(4.0, 3.0));
    w
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemarkBall {
    pub center: Point,
    /// Bump whose support meets `B_1^e(w)`, if any.
    pub near_patch: Option<usize>,
    /// `∫ ((min Ric)_-)^p dμ_g` with `min Ric = -2Δₑφ`.
    pub integral_variant: f64,
    /// The same with the Gaussian curvature `-e^{-2φ}Δₑφ`.
    pub integral_gaussian: f64,
    pub volume: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemarkReport {
    pub spec: RemarkSpec,
    pub h: f64,
    /// Sampled `sup (Δₑφ_n)_+` for `n = 1..=n_max`.
    pub laplacian_sups: Vec<f64>,
    pub fitted_exponent: f64,
    pub expected_exponent: f64,
    /// `2^p ∫ ((Δₑφ̃₀)_+)^p dx`.
    pub chain_bound: f64,
    pub balls: Vec<RemarkBall>,
    /// Largest integral among centers next to the first bump, per convention.
    pub first_patch_variant: f64,
    pub first_patch_gaussian: f64,
    pub sup_variant: f64,
    pub sup_gaussian: f64,
    pub min_volume: f64,
}

impl RemarkReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("w_x,w_y,near_patch,integral_variant,integral_gaussian,volume\n");
        for b in &self.balls {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
                b.center.x,
                b.center.y,
                b.near_patch.map_or(String::new(), |n| n.to_string()),
                b.integral_variant,
                b.integral_gaussian,
                b.volume
            );
        }
        out
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn integral_bound_example(spec: &RemarkSpec, h: f64, samples: &[Point]) -> Result<RemarkReport> {
    let surface = remark_surface(spec)?;
    if samples.is_empty() {
        return Err(invalid("no sample centers"));
    }
    let p = spec.p;

    let steps = 50_000;
    let laplacian_sups: Vec<f64> = (1..=spec.n_max)
        .map(|n| {
            let nf = n as f64;
            let c = RemarkSpec::patch_center(n);
            (0..=steps)
                .map(|i| {
                    let t = 0.5 * i as f64 / steps as f64;
                    surface.log_lambda_laplacian(Point::new(c.x + t / nf, 0.0)).max(0.0)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let ns: Vec<f64> = (1..=spec.n_max).map(|n| n as f64).collect();
    let fitted_exponent = if spec.n_max >= 2 {
        fit_log_slope(&ns, &laplacian_sups)
    } else {
        f64::NAN
    };

    let profile = spec.profile()?;
    let flat_grid = build_grid(&Region::rectangle(Point::new(-0.5, -0.5), Point::new(0.5, 0.5)), h, &[])?;
    let chain_bound = 2f64.powf(p)
        * flat_grid.integrate(|x| {
            let l = profile.eval(x).laplacian;
            if l > 0.0 {
                l.powf(p)
            } else {
                0.0
            }
        })?;

    let mut balls = Vec::with_capacity(samples.len());
    for &w in samples {
        let field = ball_field(&surface, w, 1.0, h)?;
        let region = geodesic_ball(&field, 1.0)?;
        let grid = build_grid(&region, h, &[])?;
        let [variant, gaussian, volume] = grid.integrate_n(|x| {
            let jet = surface.log_lambda(x);
            let density = (2.0 * jet.value).exp();
            let l = jet.laplacian;
            if l > 0.0 {
                [
                    (2.0 * l).powf(p) * density,
                    (p * (l.ln() - 2.0 * jet.value) + 2.0 * jet.value).exp(),
                    density,
                ]
            } else {
                [0.0, 0.0, density]
            }
        })?;
        let near_patch = (1..=spec.n_max).find(|&n| w.dist(RemarkSpec::patch_center(n)) < 1.0 + 0.5 / n as f64);
        balls.push(RemarkBall {
            center: w,
            near_patch,
            integral_variant: variant,
            integral_gaussian: gaussian,
            volume,
        });
    }
    let max_of = |f: &dyn Fn(&RemarkBall) -> f64, first_only: bool| {
        balls
            .iter()
            .filter(|b| !first_only || b.near_patch == Some(1))
            .map(f)
            .fold(0.0, f64::max)
    };
    Ok(RemarkReport {
        spec: spec.clone(),
        h,
        fitted_exponent,
        expected_exponent: 2.0 - spec.a,
        chain_bound,
        first_patch_variant: max_of(&|b| b.integral_variant, true),
        first_patch_gaussian: max_of(&|b| b.integral_gaussian, true),
        sup_variant: max_of(&|b| b.integral_variant, false),
        sup_gaussian: max_of(&|b| b.integral_gaussian, false),
        min_volume: balls.iter().map(|b| b.volume).fold(f64::INFINITY, f64::min),
        laplacian_sups,
        balls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_reference_value() {
        let i = closed_form_integral(4.0, 1.0, 0.1, 1e-3);
        let exact = PI * (1.0 / 1e-3 - 1.0 / (0.01 + 1e-3));
        assert!((i - exact).abs() <= 1e-12 * exact);
    }

    #[test]
    fn center_factor_equals_epsilon() {
        let f = SigmaFactor::new(vec![(Point::new(3.0, 0.0), 0.01)], 1.0, 0.1).unwrap();
        let jet = f.log_jet(Point::new(3.0, 0.0));
        assert!((jet.value.exp() - 0.01).abs() < 1e-15);
        assert_eq!(f.log_jet(Point::new(3.2, 0.0)), Jet::ZERO);
        // Gaussian curvature at the center is -4 β ε^{-(2β+1)}
        let k = min_ricci_from(CurvatureConvention::Gaussian, jet);
        assert!((k + 4.0 * 0.01f64.powi(-3)).abs() < 1e-6 * 4e6);
    }

    #[test]
    fn blend_is_continuous_at_inner_radius() {
        let f = SigmaFactor::new(vec![(Point::ORIGIN, 1e-4)], 1.0, 0.1).unwrap();
        let a = f.local_jet(0, Point::new(0.1 - 1e-12, 0.0));
        let b = f.local_jet(0, Point::new(0.1 + 1e-12, 0.0));
        assert!((a.value - b.value).abs() < 1e-9);
        assert!((a.grad[0] - b.grad[0]).abs() < 1e-6);
        assert!((a.laplacian - b.laplacian).abs() < 1e-4 * a.laplacian.abs().max(1.0));
    }

    #[test]
    fn tiny_threshold_returns_upper_end() {
        let eps = select_epsilon(4.0, 1.0, 0.1, 1e-30, 1.0).unwrap();
        assert_eq!(eps, 1.0 - 0.01);
    }

    #[test]
    fn unreachable_threshold_overflows() {
        assert!(matches!(
            select_epsilon(4.0, 1.0, 0.1, 1e305, 1.0),
            Err(Error::ScheduleOverflow(_))
        ));
        assert!(select_epsilon(3.0, 0.5, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn remark_range_of_a() {
        let bad = RemarkSpec { a: 1.4, ..RemarkSpec::default() };
        assert!(remark_surface(&bad).is_err());
        let bad = RemarkSpec { a: 2.0, ..RemarkSpec::default() };
        assert!(remark_surface(&bad).is_err());
    }
}
