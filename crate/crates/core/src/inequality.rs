//! The gradient-estimate functional `Q_p(u) = ‖∇u‖_p^p / (‖u‖_p^p + ‖Δu‖_p^p)`
//! and the probes around it.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::BallGrid;
use crate::error::{invalid, Result};
use crate::fields::{make_cutoff, Point, SmoothField};
use crate::geodesic::{ball_field, geodesic_ball, CoveringReport};
use crate::quadrature::{build_grid, build_grid_with, norm_densities, QuadratureGrid, Region};
use crate::surface::{laplace_beltrami_from, ConformalSurface};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    pub p: f64,
    pub label: String,
    /// `‖∇u‖_p^p`
    pub numerator: f64,
    /// `‖u‖_p^p + ‖Δu‖_p^p`
    pub denominator: f64,
    pub value_norm: f64,
    pub laplacian_norm: f64,
    pub ratio: f64,
    pub error: f64,
}

fn ratio_from(p: f64, label: String, [v, g, l]: [f64; 3], [ev, eg, el]: [f64; 3]) -> Result<RatioReport> {
    let denominator = v + l;
    if !(denominator > 0.0) {
        return Err(invalid(format!("{label}: u vanishes on the grid")));
    }
    let ratio = g / denominator;
    let error = if g > 0.0 { ratio * (eg / g + (ev + el) / denominator) } else { 0.0 };
    Ok(RatioReport {
        p,
        label,
        numerator: g,
        denominator,
        value_norm: v,
        laplacian_norm: l,
        ratio,
        error,
    })
}

/// `Q_p(u)` with an error bar from the coarsened companion grid.
pub fn ratio_qp(s: &ConformalSurface, u: &SmoothField, p: f64, grid: &QuadratureGrid, label: &str) -> Result<RatioReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must satisfy p >= 1, got {p}")));
    }
    if u.is_zero() {
        return Err(invalid("u is identically zero"));
    }
    let [v, g, l] = grid.integrate_n_estimate(|x| norm_densities(s, u, p, x))?;
    ratio_from(p, label.to_string(), [v.value, g.value, l.value], [v.error, g.error, l.error])
}

/// `Q_p(u)` on the given grid only.
pub fn ratio_qp_fast(s: &ConformalSurface, u: &SmoothField, p: f64, grid: &QuadratureGrid, label: &str) -> Result<RatioReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must satisfy p >= 1, got {p}")));
    }
    if u.is_zero() {
        return Err(invalid("u is identically zero"));
    }
    let n = grid.integrate_n(|x| norm_densities(s, u, p, x))?;
    ratio_from(p, label.to_string(), [n[0], n[1], n[2]], [0.0; 3])
}

/// A parameterised set of test functions.
pub trait FieldFamily: Sync {
    /// Box of admissible parameters.
    fn bounds(&self) -> Vec<(f64, f64)>;

    /// Points per parameter in the initial lattice scan.
    fn lattice(&self) -> Vec<usize>;

    /// Representative of `params` (for instance, rounding for integer-valued families).
    fn canonical(&self, params: &[f64]) -> Vec<f64> {
        params.to_vec()
    }

    fn member(&self, params: &[f64]) -> Result<SmoothField>;

    fn label(&self, params: &[f64]) -> String {
        let parts: Vec<String> = params.iter().map(|x| format!("{x}")).collect();
        parts.join(";")
    }
}

/// The fixed list `u_0, …, u_k`.
pub struct IndexedFamily {
    pub fields: Vec<SmoothField>,
}

impl FieldFamily for IndexedFamily {
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, self.fields.len().saturating_sub(1) as f64)]
    }

    fn lattice(&self) -> Vec<usize> {
        vec![self.fields.len()]
    }

    fn canonical(&self, params: &[f64]) -> Vec<f64> {
        let hi = self.fields.len().saturating_sub(1) as f64;
        vec![params[0].round().clamp(0.0, hi)]
    }

    fn member(&self, params: &[f64]) -> Result<SmoothField> {
        let k = self.canonical(params)[0] as usize;
        self.fields
            .get(k)
            .cloned()
            .ok_or_else(|| invalid("empty family"))
    }

    fn label(&self, params: &[f64]) -> String {
        format!("k={}", self.canonical(params)[0])
    }
}

/// Radial bumps `χ(|x - c| / w)` over a width interval, `χ = 1` on `[0, 1/2]`, `0` beyond 1.
pub struct BumpWidthFamily {
    pub center: Point,
    pub widths: (f64, f64),
    pub lattice: usize,
}

impl FieldFamily for BumpWidthFamily {
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![self.widths]
    }

    fn lattice(&self) -> Vec<usize> {
        vec![self.lattice]
    }

    fn member(&self, params: &[f64]) -> Result<SmoothField> {
        let w = params[0];
        if !(w > 0.0) {
            return Err(invalid(format!("bump width must be positive, got {w}")));
        }
        make_cutoff(0.5, 1.0)?.dilate(Point::ORIGIN, 1.0 / w).map(|f| f.translate(self.center))
    }

    fn label(&self, params: &[f64]) -> String {
        format!("width={}", params[0])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchStep {
    pub params: Vec<f64>,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchReport {
    pub best: RatioReport,
    pub params: Vec<f64>,
    pub evaluations: usize,
    pub history: Vec<SearchStep>,
}

impl SearchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameters,ratio\n");
        for step in &self.history {
            let params: Vec<String> = step.params.iter().map(|x| format!("{x:.16e}")).collect();
            let _ = writeln!(out, "{},{:.16e}", params.join(";"), step.ratio);
        }
        out
    }
}

struct Search<'a, F: FieldFamily + ?Sized> {
    s: &'a ConformalSurface,
    family: &'a F,
    p: f64,
    grid: &'a QuadratureGrid,
    seen: Vec<(Vec<f64>, RatioReport)>,
    history: Vec<SearchStep>,
}

impl<F: FieldFamily + ?Sized> Search<'_, F> {
    fn lookup(&self, key: &[f64]) -> Option<&RatioReport> {
        self.seen.iter().find(|(k, _)| k.as_slice() == key).map(|(_, r)| r)
    }

    fn evaluate(&mut self, params: &[f64]) -> Result<f64> {
        let key = self.family.canonical(params);
        if let Some(r) = self.lookup(&key) {
            return Ok(r.ratio);
        }
        let u = self.family.member(&key)?;
        let report = ratio_qp_fast(self.s, &u, self.p, self.grid, &self.family.label(&key))?;
        let ratio = report.ratio;
        self.history.push(SearchStep { params: key.clone(), ratio });
        self.seen.push((key, report));
        Ok(ratio)
    }
}

fn better(a: (f64, &[f64]), b: (f64, &[f64])) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1.partial_cmp(b.1) == Some(std::cmp::Ordering::Less))
}

/// Lattice scan over the parameter box, then coordinate-wise golden-section
/// refinement around the best lattice point. `budget` caps the number of
/// distinct members evaluated.
pub fn best_constant_search<F: FieldFamily + ?Sized>(
    s: &ConformalSurface,
    family: &F,
    p: f64,
    budget: usize,
    grid: &QuadratureGrid,
) -> Result<SearchReport> {
    let bounds = family.bounds();
    let lattice = family.lattice();
    if bounds.is_empty() || bounds.len() != lattice.len() || lattice.contains(&0) {
        return Err(invalid("family has no parameters"));
    }
    let size: usize = lattice.iter().product();
    if budget < size {
        return Err(invalid(format!("budget {budget} is smaller than the lattice size {size}")));
    }
    let dims = bounds.len();
    let coord = |d: usize, i: usize| {
        let (lo, hi) = bounds[d];
        if lattice[d] == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (lattice[d] - 1) as f64
        }
    };
    let points: Vec<Vec<f64>> = (0..size)
        .map(|mut flat| {
            let mut idx = vec![0; dims];
            for d in (0..dims).rev() {
                idx[d] = flat % lattice[d];
                flat /= lattice[d];
            }
            (0..dims).map(|d| coord(d, idx[d])).collect()
        })
        .map(|p: Vec<f64>| family.canonical(&p))
        .collect();

    // lattice members are independent; evaluate them concurrently in a fixed order
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for pt in &points {
        if !unique.contains(pt) {
            unique.push(pt.clone());
        }
    }
    let scanned = unique
        .par_iter()
        .map(|key| {
            let u = family.member(key)?;
            ratio_qp_fast(s, &u, p, grid, &family.label(key))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut search = Search {
        s,
        family,
        p,
        grid,
        seen: Vec::new(),
        history: Vec::new(),
    };
    for (key, report) in unique.into_iter().zip(scanned) {
        search.history.push(SearchStep { params: key.clone(), ratio: report.ratio });
        search.seen.push((key, report));
    }
    let mut best = search.seen[0].0.clone();
    let mut best_ratio = search.seen[0].1.ratio;
    for (k, r) in &search.seen {
        if better((r.ratio, k), (best_ratio, &best)) {
            best = k.clone();
            best_ratio = r.ratio;
        }
    }

    let remaining = budget - search.seen.len();
    let per_dim = remaining / dims;
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    for d in 0..dims {
        if per_dim < 2 || lattice[d] < 2 {
            continue;
        }
        let (lo_b, hi_b) = bounds[d];
        let step = (hi_b - lo_b) / (lattice[d] - 1) as f64;
        let (mut a, mut b) = ((best[d] - step).max(lo_b), (best[d] + step).min(hi_b));
        let at = |x: f64, base: &[f64]| {
            let mut v = base.to_vec();
            v[d] = x;
            v
        };
        let base = best.clone();
        let mut c = b - INV_PHI * (b - a);
        let mut e = a + INV_PHI * (b - a);
        let mut fc = search.evaluate(&at(c, &base))?;
        let mut fe = search.evaluate(&at(e, &base))?;
        for _ in 2..per_dim {
            if fc >= fe {
                b = e;
                e = c;
                fe = fc;
                c = b - INV_PHI * (b - a);
                fc = search.evaluate(&at(c, &base))?;
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + INV_PHI * (b - a);
                fe = search.evaluate(&at(e, &base))?;
            }
        }
        for (k, r) in &search.seen {
            if better((r.ratio, k), (best_ratio, &best)) {
                best = k.clone();
                best_ratio = r.ratio;
            }
        }
    }
    let report = search.lookup(&best).cloned().expect("best point was evaluated");
    Ok(SearchReport {
        best: report,
        params: best,
        evaluations: search.seen.len(),
        history: search.history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct L2Identity {
    /// `∫ |∇u|_g² dμ_g`
    pub grad_sq: f64,
    /// `∫ u Δ_g u dμ_g`
    pub u_lap: f64,
    pub u_sq: f64,
    pub lap_sq: f64,
    /// `|∫|∇u|² + ∫uΔu| / ∫|∇u|²`
    pub residual: f64,
    /// `‖∇u‖₂² ≤ ½(‖u‖₂² + ‖Δu‖₂²)`
    pub bound_holds: bool,
}

pub fn l2_identity_check(s: &ConformalSurface, u: &SmoothField, grid: &QuadratureGrid) -> Result<L2Identity> {
    let [grad_sq, u_lap, u_sq, lap_sq] = grid.integrate_n(|x| {
        let jet = u.eval(x);
        let phi = s.log_lambda(x).value;
        let density = (2.0 * phi).exp();
        let lap_g = laplace_beltrami_from(jet.laplacian, phi);
        let g2 = (jet.grad[0] * jet.grad[0] + jet.grad[1] * jet.grad[1]) * (-2.0 * phi).exp();
        [g2 * density, jet.value * lap_g * density, jet.value * jet.value * density, lap_g * lap_g * density]
    })?;
    if !(grad_sq > 0.0) {
        return Err(invalid("u has no gradient on the grid"));
    }
    Ok(L2Identity {
        grad_sq,
        u_lap,
        u_sq,
        lap_sq,
        residual: (grad_sq + u_lap).abs() / grad_sq,
        bound_holds: grad_sq <= 0.5 * (u_sq + lap_sq),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalGradientRatio {
    /// `sup_{B_{R/2}(x)} |∇u|_g²` over lattice nodes.
    pub sup_grad_sq: f64,
    /// `‖u‖*_{2, B_R}`
    pub avg_u: f64,
    /// `‖Δu‖*_{2q, B_R}`
    pub avg_lap: f64,
    pub ratio: f64,
}

/// Empirical constant `sup_{B_{R/2}} |∇u|² / (R^{-2}[(‖u‖*_2)² + (‖Δu‖*_{2q})²])`.
pub fn local_gradient_ratio(
    s: &ConformalSurface,
    u: &SmoothField,
    x: Point,
    radius: f64,
    q: f64,
    grid: &BallGrid,
) -> Result<LocalGradientRatio> {
    if !(q >= 1.0 && radius > 0.0) {
        return Err(invalid(format!("need q >= 1 and R > 0, got q = {q}, R = {radius}")));
    }
    let field = ball_field(s, x, radius, grid.h)?;
    let region = geodesic_ball(&field, radius)?;
    let qg = build_ball_grid(s, &region, grid)?;
    let pq = 2.0 * q;
    let [u2, lap, vol] = qg.integrate_n(|p| {
        let jet = u.eval(p);
        let phi = s.log_lambda(p).value;
        let density = (2.0 * phi).exp();
        let lg = laplace_beltrami_from(jet.laplacian, phi).abs();
        [jet.value * jet.value * density, if lg == 0.0 { 0.0 } else { lg.powf(pq) * density }, density]
    })?;
    if !(vol > 0.0) {
        return Err(invalid("ball has no volume"));
    }
    let avg_u = (u2 / vol).sqrt();
    let avg_lap = (lap / vol).powf(1.0 / pq);
    let lattice = field.lattice();
    let sup_grad_sq = (0..lattice.len())
        .filter(|&i| field.values()[i] < 0.5 * radius)
        .map(|i| s.riem_grad_norm(u, lattice.point(i)).powi(2))
        .fold(0.0, f64::max);
    let bracket = (avg_u * avg_u + avg_lap * avg_lap) / (radius * radius);
    let ratio = if sup_grad_sq == 0.0 {
        0.0
    } else if bracket == 0.0 {
        f64::INFINITY
    } else {
        sup_grad_sq / bracket
    };
    Ok(LocalGradientRatio { sup_grad_sq, avg_u, avg_lap, ratio })
}

fn build_ball_grid(s: &ConformalSurface, region: &Region, grid: &BallGrid) -> Result<QuadratureGrid> {
    let [lo, hi] = region.bounding_box();
    let centers: Vec<Point> = s
        .singular_centers()
        .into_iter()
        .filter(|c| c.x > lo.x && c.x < hi.x && c.y > lo.y && c.y < hi.y)
        .collect();
    build_grid_with(region, grid.h, &centers, &grid.options)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverProbeBall {
    pub center: Point,
    /// `∫_{B_{R/2}(x_i)} |∇u|^p dμ_g`
    pub half_ball_gradient: f64,
    /// `∫_{B_R(x_i)} (|u|^p + |Δu|^p) dμ_g`
    pub ball_denominator: f64,
    /// `half_ball_gradient / (R^{-p} ball_denominator)`
    pub local_constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverProbe {
    pub p: f64,
    pub radius: f64,
    pub overlap_count: usize,
    /// `∫_M |∇u|^p dμ_g`
    pub total_gradient: f64,
    /// `‖u‖_p^p + ‖Δu‖_p^p`
    pub total_denominator: f64,
    pub sum_half_ball_gradient: f64,
    pub sum_ball_denominator: f64,
    /// `∫|∇u|^p ≤ Σ_i ∫_{B_{R/2}(x_i)} |∇u|^p`
    pub subadditive: bool,
    /// `Σ_i ∫_{B_R(x_i)} (|u|^p + |Δu|^p) ≤ N (‖u‖_p^p + ‖Δu‖_p^p)`
    pub overlap_bound: bool,
    /// Largest local constant, the empirical `D`.
    pub empirical_constant: f64,
    pub balls: Vec<CoverProbeBall>,
}

/// Evaluates each step of the covering argument for one test function.
pub fn global_from_local_probe(
    s: &ConformalSurface,
    u: &SmoothField,
    p: f64,
    covering: &CoveringReport,
    grid: &BallGrid,
) -> Result<CoverProbe> {
    if !covering.coverage_ok {
        return Err(invalid("covering does not cover its region"));
    }
    let [lo, hi] = covering.region;
    let [slo, shi] = u.support_box();
    if slo.x < lo.x || slo.y < lo.y || shi.x > hi.x || shi.y > hi.y {
        return Err(invalid("covering region does not contain the support of u"));
    }
    let radius = covering.radius;
    let domain = Region::rectangle(lo, hi);
    let centers: Vec<Point> = s
        .singular_centers()
        .into_iter()
        .filter(|c| c.x > lo.x && c.x < hi.x && c.y > lo.y && c.y < hi.y)
        .collect();
    let whole = build_grid_with(&domain, grid.h, &centers, &grid.options)?;
    let [v, g, l] = whole.integrate_n(|x| norm_densities(s, u, p, x))?;
    let balls = covering
        .centers
        .par_iter()
        .map(|&c| {
            let full = ball_field(s, c, radius, grid.h)?;
            let big = build_ball_grid(s, &geodesic_ball(&full, radius)?, grid)?;
            let small = build_ball_grid(s, &geodesic_ball(&full, 0.5 * radius)?, grid)?;
            let [bv, _, bl] = big.integrate_n(|x| norm_densities(s, u, p, x))?;
            let [_, sg, _] = small.integrate_n(|x| norm_densities(s, u, p, x))?;
            let denom = bv + bl;
            let local_constant = if sg == 0.0 {
                0.0
            } else if denom == 0.0 {
                f64::INFINITY
            } else {
                sg / (radius.powf(-p) * denom)
            };
            Ok(CoverProbeBall {
                center: c,
                half_ball_gradient: sg,
                ball_denominator: denom,
                local_constant,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sum_half: f64 = balls.iter().map(|b| b.half_ball_gradient).sum();
    let sum_den: f64 = balls.iter().map(|b| b.ball_denominator).sum();
    let total_den = v + l;
    let slack = 1e-6;
    Ok(CoverProbe {
        p,
        radius,
        overlap_count: covering.overlap_count,
        total_gradient: g,
        total_denominator: total_den,
        sum_half_ball_gradient: sum_half,
        sum_ball_denominator: sum_den,
        subadditive: g <= sum_half * (1.0 + slack),
        overlap_bound: sum_den <= covering.overlap_count as f64 * total_den * (1.0 + slack),
        empirical_constant: balls.iter().map(|b| b.local_constant).fold(0.0, f64::max),
        balls,
    })
}

/// Grid over the support box of `u` with the surface's singular centers inside it.
pub fn support_grid(s: &ConformalSurface, u: &SmoothField, h: f64) -> Result<QuadratureGrid> {
    let [lo, hi] = u.support_box();
    let centers: Vec<Point> = s
        .singular_centers()
        .into_iter()
        .filter(|c| c.x > lo.x && c.x < hi.x && c.y > lo.y && c.y < hi.y)
        .collect();
    build_grid(&Region::rectangle(lo, hi), h, &centers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_linear_bump;

    #[test]
    fn ratio_is_scale_invariant() {
        let s = ConformalSurface::flat();
        let u = make_cutoff(0.25, 0.5).unwrap();
        let g = build_grid(&Region::rectangle(Point::new(-0.5, -0.5), Point::new(0.5, 0.5)), 1.0 / 32.0, &[]).unwrap();
        let a = ratio_qp_fast(&s, &u, 3.0, &g, "u").unwrap();
        let u2 = crate::fields::combine(&[(2.0, u)]).unwrap();
        let b = ratio_qp_fast(&s, &u2, 3.0, &g, "2u").unwrap();
        assert!((a.ratio - b.ratio).abs() <= 1e-12 * a.ratio);
    }

    #[test]
    fn zero_field_is_rejected() {
        let s = ConformalSurface::flat();
        let g = build_grid(&Region::rectangle(Point::ORIGIN, Point::new(1.0, 1.0)), 0.25, &[]).unwrap();
        assert!(ratio_qp(&s, &SmoothField::zero(), 2.0, &g, "0").is_err());
    }

    #[test]
    fn single_member_family() {
        let s = ConformalSurface::flat();
        let u = make_linear_bump(Point::ORIGIN);
        let g = support_grid(&s, &u, 1.0 / 32.0).unwrap();
        let fam = IndexedFamily { fields: vec![u.clone()] };
        let r = best_constant_search(&s, &fam, 4.0, 1, &g).unwrap();
        let direct = ratio_qp_fast(&s, &u, 4.0, &g, "k=0").unwrap();
        assert_eq!(r.best.ratio, direct.ratio);
        assert!(best_constant_search(&s, &fam, 4.0, 0, &g).is_err());
    }

    #[test]
    fn l2_identity_on_flat_bump() {
        let s = ConformalSurface::flat();
        let u = make_linear_bump(Point::ORIGIN);
        let g = support_grid(&s, &u, 1.0 / 64.0).unwrap();
        let r = l2_identity_check(&s, &u, &g).unwrap();
        assert!(r.residual < 1e-6, "{r:?}");
        assert!(r.bound_holds);
    }
}
