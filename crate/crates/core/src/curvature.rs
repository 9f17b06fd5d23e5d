//! Integral curvature `k(x, q, R, K) = R² ‖ρ_K‖*_{q, B_R(x)}` and the
//! comparison quantities around it.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fields::Point;
use crate::geodesic::{ball_field, geodesic_ball};
use crate::quadrature::{build_grid_with, GridOptions};
use crate::surface::ConformalSurface;

/// Geodesic ball and quadrature settings shared by the curvature quantities.
#[derive(Clone, Debug, Serialize)]
pub struct BallGrid {
    /// Spacing of both the eikonal lattice and the quadrature tiles.
    pub h: f64,
    pub options: GridOptions,
    /// Also integrate on the coarsened grid to attach an error bar.
    pub with_error: bool,
}

impl BallGrid {
    pub fn new(h: f64) -> Self {
        Self {
            h,
            options: GridOptions::default(),
            with_error: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalCurvature {
    pub center: Point,
    pub k: f64,
    pub volume: f64,
    pub error: f64,
}

fn check_ball_args(q: f64, radius: f64, n: usize) -> Result<()> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(invalid(format!("q must satisfy q >= 1, got {q}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    if n < 2 {
        return Err(invalid(format!("dimension must be at least 2, got {n}")));
    }
    Ok(())
}

fn ball_integrals(
    s: &ConformalSurface,
    x: Point,
    radius: f64,
    grid: &BallGrid,
    f: impl Fn(Point) -> f64 + Sync,
) -> Result<([f64; 2], f64)> {
    let field = ball_field(s, x, radius, grid.h)?;
    let region = geodesic_ball(&field, radius)?;
    let [lo, hi] = region.bounding_box();
    let centers: Vec<Point> = s
        .singular_centers()
        .into_iter()
        .filter(|c| c.x > lo.x && c.x < hi.x && c.y > lo.y && c.y < hi.y)
        .collect();
    let qg = build_grid_with(&region, grid.h, &centers, &grid.options)?;
    let integrand = |p: Point| [f(p), s.volume_density(p)];
    if grid.with_error {
        let [a, b] = qg.integrate_n_estimate(integrand)?;
        Ok(([a.value, b.value], a.error))
    } else {
        Ok((qg.integrate_n(integrand)?, 0.0))
    }
}

fn local_from_integrals(x: Point, q: f64, radius: f64, [num, vol]: [f64; 2], num_error: f64) -> Result<LocalCurvature> {
    if !(vol > 0.0) {
        return Err(invalid(format!("geodesic ball at {x} has no volume")));
    }
    let avg = (num / vol).powf(1.0 / q);
    let k = radius * radius * avg;
    // first-order propagation of the numerator error through the q-th root
    let error = if num > 0.0 { k * num_error / (q * num) } else { radius * radius * (num_error / vol).powf(1.0 / q) };
    Ok(LocalCurvature { center: x, k, volume: vol, error })
}

/// `R² (⨍_{B_R(x)} ρ_K^q dμ_g)^{1/q}`.
pub fn k_local(
    s: &ConformalSurface,
    x: Point,
    q: f64,
    radius: f64,
    big_k: f64,
    n: usize,
    grid: &BallGrid,
) -> Result<LocalCurvature> {
    check_ball_args(q, radius, n)?;
    let shift = (n as f64 - 1.0) * big_k;
    let (ints, err) = ball_integrals(s, x, radius, grid, |p| {
        let rho = (shift - s.min_ricci(p)).max(0.0);
        if rho == 0.0 {
            0.0
        } else {
            (q * rho.ln()).exp() * s.volume_density(p)
        }
    })?;
    local_from_integrals(x, q, radius, ints, err)
}

/// Several exponents `q` and levels `K` on one shared geodesic ball.
pub fn k_local_many(
    s: &ConformalSurface,
    x: Point,
    qs: &[f64],
    radius: f64,
    levels: &[f64],
    n: usize,
    grid: &BallGrid,
) -> Result<Vec<Vec<f64>>> {
    for &q in qs {
        check_ball_args(q, radius, n)?;
    }
    let field = ball_field(s, x, radius, grid.h)?;
    let region = geodesic_ball(&field, radius)?;
    let [lo, hi] = region.bounding_box();
    let centers: Vec<Point> = s
        .singular_centers()
        .into_iter()
        .filter(|c| c.x > lo.x && c.x < hi.x && c.y > lo.y && c.y < hi.y)
        .collect();
    let qg = build_grid_with(&region, grid.h, &centers, &grid.options)?;
    let mut out = Vec::with_capacity(levels.len());
    for &big_k in levels {
        let shift = (n as f64 - 1.0) * big_k;
        let mut row = Vec::with_capacity(qs.len());
        for &q in qs {
            let [num, vol] = qg.integrate_n(|p| {
                let density = s.volume_density(p);
                let rho = (shift - s.min_ricci(p)).max(0.0);
                [if rho == 0.0 { 0.0 } else { (q * rho.ln()).exp() * density }, density]
            })?;
            row.push(local_from_integrals(x, q, radius, [num, vol], 0.0)?.k);
        }
        out.push(row);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureStats {
    pub q: f64,
    pub radius: f64,
    pub big_k: f64,
    pub dimension: usize,
    pub h: f64,
    pub per_center: Vec<LocalCurvature>,
    /// Maximum over the sampled centers; a lower bound for the supremum over the surface.
    pub sampled_sup: f64,
}

impl CurvatureStats {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("center_x,center_y,k_local,ball_volume,error\n");
        for c in &self.per_center {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                c.center.x, c.center.y, c.k, c.volume, c.error
            );
        }
        out
    }
}

pub fn k_global(
    s: &ConformalSurface,
    centers: &[Point],
    q: f64,
    radius: f64,
    big_k: f64,
    n: usize,
    grid: &BallGrid,
) -> Result<CurvatureStats> {
    if centers.is_empty() {
        return Err(invalid("k_global needs at least one center"));
    }
    let per_center = centers
        .par_iter()
        .map(|&x| k_local(s, x, q, radius, big_k, n, grid))
        .collect::<Result<Vec<_>>>()?;
    let sampled_sup = per_center.iter().map(|c| c.k).fold(0.0, f64::max);
    Ok(CurvatureStats {
        q,
        radius,
        big_k,
        dimension: n,
        h: grid.h,
        per_center,
        sampled_sup,
    })
}

/// Area of a geodesic disc of radius `R` in the surface of constant curvature `K`.
pub fn space_form_volume(big_k: f64, radius: f64) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    if big_k == 0.0 {
        return Ok(PI * radius * radius);
    }
    if big_k > 0.0 {
        let s = big_k.sqrt();
        if radius > PI / s {
            return Err(Error::OutOfRange(format!(
                "radius {radius} exceeds the diameter pi/sqrt(K) = {} of the sphere",
                PI / s
            )));
        }
        // 2π(1 - cos √K R)/K = 4π sin²(√K R / 2)/K
        let h = (0.5 * s * radius).sin();
        Ok(4.0 * PI * h * h / big_k)
    } else {
        let s = (-big_k).sqrt();
        let h = (0.5 * s * radius).sinh();
        Ok(4.0 * PI * h * h / (-big_k))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaleControl {
    pub r1: f64,
    pub r2: f64,
    pub k1: f64,
    pub k2: f64,
    pub v1: f64,
    pub v2: f64,
    /// `4 (R₁/R₂)² (v_K(R₂)/v_K(R₁))^{1/q}`.
    pub factor: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Both sides of `k(q, R₁, K) ≤ 4 (R₁/R₂)² (v_K(R₂)/v_K(R₁))^{1/q} k(q, R₂, K)` at one center.
#[allow(clippy::too_many_arguments)]
pub fn scale_control_report(
    s: &ConformalSurface,
    x: Point,
    q: f64,
    r1: f64,
    r2: f64,
    big_k: f64,
    n: usize,
    grid: &BallGrid,
) -> Result<ScaleControl> {
    if !(r1 > 0.0 && r1 < r2) {
        return Err(invalid(format!("need 0 < R1 < R2, got R1 = {r1}, R2 = {r2}")));
    }
    let k1 = k_local(s, x, q, r1, big_k, n, grid)?.k;
    let k2 = k_local(s, x, q, r2, big_k, n, grid)?.k;
    let v1 = space_form_volume(big_k, r1)?;
    let v2 = space_form_volume(big_k, r2)?;
    let factor = 4.0 * (r1 / r2).powi(2) * (v2 / v1).powf(1.0 / q);
    let rhs = factor * k2;
    Ok(ScaleControl {
        r1,
        r2,
        k1,
        k2,
        v1,
        v2,
        factor,
        rhs,
        holds: k1 <= rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_form_reference_values() {
        assert!((space_form_volume(0.0, 1.0).unwrap() - PI).abs() < 1e-15);
        let hyp = space_form_volume(-1.0, 1.0).unwrap();
        assert!((hyp - 2.0 * PI * (1f64.cosh() - 1.0)).abs() < 1e-13);
        assert!((hyp - 3.412_28).abs() < 1e-5);
        let sph = space_form_volume(1.0, 1.0).unwrap();
        assert!((sph - 2.0 * PI * (1.0 - 1f64.cos())).abs() < 1e-13);
        assert!(matches!(space_form_volume(1.0, 3.2), Err(Error::OutOfRange(_))));
        assert!(space_form_volume(0.0, 0.0).is_err());
    }

    #[test]
    fn small_curvature_limit() {
        // πR² (1 - K R²/12 + ...) for the sphere
        let r: f64 = 1.3;
        for k in [1e-6, -1e-6] {
            let series = PI * r * r * (1.0 - k * r * r / 12.0);
            assert!((space_form_volume(k, r).unwrap() - series).abs() < 1e-8);
        }
    }

    #[test]
    fn flat_surface_has_no_curvature_deficit() {
        let s = ConformalSurface::flat();
        let g = BallGrid::new(1.0 / 32.0);
        let c = k_local(&s, Point::new(0.3, -0.2), 2.0, 0.5, 0.0, 2, &g).unwrap();
        assert_eq!(c.k, 0.0);
        assert!((c.volume - PI * 0.25).abs() < 0.05);
        assert!(k_global(&s, &[], 2.0, 0.5, 0.0, 2, &g).is_err());
    }
}
