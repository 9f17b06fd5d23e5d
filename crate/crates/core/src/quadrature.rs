//! Tensor Gauss–Legendre quadrature on rectangles with polar refinement.
//!
//! A grid is a fixed, ordered list of cells: Cartesian tiles, full polar rings
//! and polar shells. Around every singular center the tiles of a small block
//! are replaced by a polar disc (rings graded geometrically towards the center)
//! plus four triangular shells reaching the block edges, so cells partition the
//! domain exactly. Cells are evaluated in parallel; the reduction always runs in
//! cell order with compensated summation, so results do not depend on the
//! number of workers.

use std::f64::consts::PI;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fields::{Point, SmoothField};
use crate::geodesic::DistanceField;
use crate::surface::ConformalSurface;

/// Integration domain.
#[derive(Clone, Debug)]
pub enum Region {
    Rectangle { min: Point, max: Point },
    EuclideanBall { center: Point, radius: f64 },
    GeodesicBall { field: Arc<DistanceField>, radius: f64 },
}

impl Region {
    pub fn rectangle(min: Point, max: Point) -> Self {
        Region::Rectangle { min, max }
    }

    pub fn ball(center: Point, radius: f64) -> Self {
        Region::EuclideanBall { center, radius }
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            Region::Rectangle { min, max } => p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y,
            Region::EuclideanBall { center, radius } => p.dist(*center) < *radius,
            Region::GeodesicBall { field, radius } => field.query(p) < *radius,
        }
    }

    pub fn bounding_box(&self) -> [Point; 2] {
        match self {
            Region::Rectangle { min, max } => [*min, *max],
            Region::EuclideanBall { center, radius } => [
                Point::new(center.x - radius, center.y - radius),
                Point::new(center.x + radius, center.y + radius),
            ],
            Region::GeodesicBall { field, .. } => field.bounding_box(),
        }
    }
}

/// Compensated (Neumaier) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GridOptions {
    /// Gauss–Legendre nodes per axis on each tile.
    pub order: usize,
    /// Gauss–Legendre nodes per polar ring (radial direction).
    pub radial_order: usize,
    /// Minimum number of equally spaced angles on a full ring.
    pub angular_nodes: usize,
    /// Angular panels per triangular shell.
    pub shell_panels: usize,
    /// Gauss–Legendre nodes per shell panel in angle.
    pub shell_order: usize,
    /// The innermost graded ring ends at or below this radius.
    pub r_min: f64,
    /// Ratio between consecutive graded radii.
    pub grading: f64,
    /// Half-width of the tile block replaced by a polar patch; two tiles if unset.
    pub patch_half_width: Option<f64>,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            order: 4,
            radial_order: 10,
            angular_nodes: 48,
            shell_panels: 4,
            shell_order: 10,
            r_min: 1e-8,
            grading: 0.5,
            patch_half_width: None,
        }
    }
}

impl GridOptions {
    fn coarser(&self) -> Self {
        Self {
            radial_order: (self.radial_order - 3).max(4),
            angular_nodes: (self.angular_nodes / 2).max(16),
            shell_order: (self.shell_order - 3).max(4),
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Cell {
    Tile { x0: f64, y0: f64, hx: f64, hy: f64 },
    Ring { center: Point, r_lo: f64, r_hi: f64, angles: usize },
    /// Angular panel `[t0, t1]` of the region between the disc of radius `rho`
    /// and the straight edge at distance `dist` with outward normal angle `normal`.
    Shell { center: Point, t0: f64, t1: f64, normal: f64, dist: f64, rho: f64 },
}

#[derive(Clone, Debug)]
struct Rule {
    nodes: Vec<(f64, f64)>,
}

impl Rule {
    fn gauss(n: usize) -> Self {
        let mut nodes = if n < 2 {
            vec![(0.0, 2.0)]
        } else {
            GaussLegendre::new(n)
                .expect("degree >= 2")
                .into_node_weight_pairs()
        };
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { nodes }
    }

    /// Nodes and weights mapped to `[a, b]`.
    fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (m, r) = ((a + b) / 2.0, (b - a) / 2.0);
        self.nodes.iter().map(move |&(x, w)| (m + r * x, r * w))
    }
}

/// Integral with an error bar from a companion grid of doubled spacing and
/// lowered polar orders.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    region: Region,
    h: f64,
    centers: Vec<Point>,
    options: GridOptions,
    cells: Vec<Cell>,
    tile_rule: Rule,
    radial_rule: Rule,
    shell_rule: Rule,
}

/// Builds a grid with default options.
pub fn build_grid(domain: &Region, h: f64, centers: &[Point]) -> Result<QuadratureGrid> {
    build_grid_with(domain, h, centers, &GridOptions::default())
}

pub fn build_grid_with(
    domain: &Region,
    h: f64,
    centers: &[Point],
    options: &GridOptions,
) -> Result<QuadratureGrid> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("grid spacing must be positive, got {h}")));
    }
    if !(options.grading > 0.0 && options.grading < 1.0 && options.r_min > 0.0 && options.order >= 1) {
        return Err(invalid("grid options out of range"));
    }
    let mut cells = Vec::new();
    match domain {
        Region::Rectangle { min, max } => rectangle_cells(&mut cells, *min, *max, h, centers, options)?,
        Region::GeodesicBall { field, .. } => {
            let [min, max] = field.bounding_box();
            let inside: Vec<Point> = centers
                .iter()
                .copied()
                .filter(|c| c.x > min.x && c.x < max.x && c.y > min.y && c.y < max.y)
                .collect();
            rectangle_cells(&mut cells, min, max, h, &inside, options)?
        }
        Region::EuclideanBall { center, radius } => {
            if !(*radius > 0.0) {
                return Err(invalid(format!("ball radius must be positive, got {radius}")));
            }
            let singular = match centers {
                [] => false,
                [c] if c.dist(*center) <= 1e-14 * radius.max(1.0) => true,
                _ => {
                    return Err(invalid(
                        "a Euclidean ball grid only supports a singular center at the ball center",
                    ))
                }
            };
            ball_cells(&mut cells, *center, *radius, h, singular, options);
        }
    }
    Ok(QuadratureGrid {
        region: domain.clone(),
        h,
        centers: centers.to_vec(),
        options: options.clone(),
        cells,
        tile_rule: Rule::gauss(options.order),
        radial_rule: Rule::gauss(options.radial_order),
        shell_rule: Rule::gauss(options.shell_order),
    })
}

fn angles_for(radius: f64, h: f64, options: &GridOptions) -> usize {
    let by_size = 2 * options.order * (PI * radius / h).ceil() as usize;
    options.angular_nodes.max(by_size)
}

/// Geometrically graded rings from `rho` down to `r_min`, then the inner disc.
fn graded_disc(cells: &mut Vec<Cell>, center: Point, rho: f64, h: f64, options: &GridOptions) {
    let angles = angles_for(rho, h, options);
    let mut r_hi = rho;
    while r_hi > options.r_min {
        let r_lo = r_hi * options.grading;
        cells.push(Cell::Ring { center, r_lo, r_hi, angles });
        r_hi = r_lo;
    }
    cells.push(Cell::Ring { center, r_lo: 0.0, r_hi, angles });
}

fn ball_cells(cells: &mut Vec<Cell>, center: Point, radius: f64, h: f64, singular: bool, options: &GridOptions) {
    let panels = (radius / h - 1e-9).ceil().max(1.0) as usize;
    let dr = radius / panels as f64;
    for i in (1..panels).rev() {
        let (r_lo, r_hi) = (dr * i as f64, dr * (i + 1) as f64);
        cells.push(Cell::Ring { center, r_lo, r_hi, angles: angles_for(r_hi, h, options) });
    }
    if singular {
        graded_disc(cells, center, dr, h, options);
    } else {
        cells.push(Cell::Ring { center, r_lo: 0.0, r_hi: dr, angles: angles_for(dr, h, options) });
    }
}

fn rectangle_cells(
    cells: &mut Vec<Cell>,
    min: Point,
    max: Point,
    h: f64,
    centers: &[Point],
    options: &GridOptions,
) -> Result<()> {
    if !(min.x < max.x && min.y < max.y) {
        return Err(invalid(format!("degenerate rectangle {min} .. {max}")));
    }
    let nx = ((max.x - min.x) / h - 1e-9).ceil().max(1.0) as usize;
    let ny = ((max.y - min.y) / h - 1e-9).ceil().max(1.0) as usize;
    let hx = (max.x - min.x) / nx as f64;
    let hy = (max.y - min.y) / ny as f64;
    let mut claimed = vec![false; nx * ny];
    let mut blocks = Vec::new();
    for &c in centers {
        if !(c.x > min.x && c.x < max.x && c.y > min.y && c.y < max.y) {
            return Err(invalid(format!("singular center {c} must lie inside the rectangle")));
        }
        let kx = options.patch_half_width.map_or(2, |w| (w / hx).round().max(1.0) as usize);
        let ky = options.patch_half_width.map_or(2, |w| (w / hy).round().max(1.0) as usize);
        let ic = (((c.x - min.x) / hx).floor() as usize).min(nx - 1);
        let jc = (((c.y - min.y) / hy).floor() as usize).min(ny - 1);
        let (i0, i1) = (ic.saturating_sub(kx), (ic + kx).min(nx - 1));
        let (j0, j1) = (jc.saturating_sub(ky), (jc + ky).min(ny - 1));
        for i in i0..=i1 {
            for j in j0..=j1 {
                let slot = &mut claimed[i * ny + j];
                if *slot {
                    return Err(invalid(format!("polar patches around {c} overlap another patch")));
                }
                *slot = true;
            }
        }
        let bmin = Point::new(min.x + i0 as f64 * hx, min.y + j0 as f64 * hy);
        let bmax = Point::new(min.x + (i1 + 1) as f64 * hx, min.y + (j1 + 1) as f64 * hy);
        blocks.push((c, bmin, bmax));
    }
    for i in 0..nx {
        for j in 0..ny {
            if !claimed[i * ny + j] {
                cells.push(Cell::Tile {
                    x0: min.x + i as f64 * hx,
                    y0: min.y + j as f64 * hy,
                    hx,
                    hy,
                });
            }
        }
    }
    for (c, bmin, bmax) in blocks {
        polar_block(cells, c, bmin, bmax, h, options);
    }
    Ok(())
}

fn polar_block(cells: &mut Vec<Cell>, c: Point, bmin: Point, bmax: Point, h: f64, options: &GridOptions) {
    let right = bmax.x - c.x;
    let top = bmax.y - c.y;
    let left = c.x - bmin.x;
    let bottom = c.y - bmin.y;
    let rho = right.min(top).min(left).min(bottom);
    graded_disc(cells, c, rho, h, options);
    // corner angles, counter-clockwise starting from the bottom-right corner
    let a_br = -bottom.atan2(right);
    let a_tr = top.atan2(right);
    let a_tl = PI - top.atan2(left);
    let a_bl = PI + bottom.atan2(left);
    let edges = [
        (0.0, right, a_br, a_tr),
        (PI / 2.0, top, a_tr, a_tl),
        (PI, left, a_tl, a_bl),
        (3.0 * PI / 2.0, bottom, a_bl, 2.0 * PI + a_br),
    ];
    for (normal, dist, ta, tb) in edges {
        let panels = options.shell_panels.max(1);
        let dt = (tb - ta) / panels as f64;
        for k in 0..panels {
            cells.push(Cell::Shell {
                center: c,
                t0: ta + k as f64 * dt,
                t1: ta + (k + 1) as f64 * dt,
                normal,
                dist,
                rho,
            });
        }
    }
}

impl QuadratureGrid {
    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn resolution(&self) -> f64 {
        self.h
    }

    pub fn singular_centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn options(&self) -> &GridOptions {
        &self.options
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn tile_count(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c, Cell::Tile { .. })).count()
    }

    /// Innermost graded radius over all polar patches, if any.
    pub fn innermost_ring_radius(&self) -> Option<f64> {
        self.cells
            .iter()
            .filter_map(|c| match c {
                Cell::Ring { r_lo: 0.0, r_hi, .. } if !self.centers.is_empty() => Some(*r_hi),
                _ => None,
            })
            .reduce(f64::min)
    }

    /// Same region and centers at spacing `2h` with lowered polar orders.
    pub fn coarsened(&self) -> Result<QuadratureGrid> {
        build_grid_with(&self.region, 2.0 * self.h, &self.centers, &self.options.coarser())
    }

    fn for_each_node(&self, cell: &Cell, mut f: impl FnMut(Point, f64)) {
        match *cell {
            Cell::Tile { x0, y0, hx, hy } => {
                for (x, wx) in self.tile_rule.on(x0, x0 + hx) {
                    for (y, wy) in self.tile_rule.on(y0, y0 + hy) {
                        f(Point::new(x, y), wx * wy);
                    }
                }
            }
            Cell::Ring { center, r_lo, r_hi, angles } => {
                let dt = 2.0 * PI / angles as f64;
                for (r, wr) in self.radial_rule.on(r_lo, r_hi) {
                    for k in 0..angles {
                        let t = (k as f64 + 0.5) * dt;
                        f(center + Point::new(r * t.cos(), r * t.sin()), wr * r * dt);
                    }
                }
            }
            Cell::Shell { center, t0, t1, normal, dist, rho } => {
                for (t, wt) in self.shell_rule.on(t0, t1) {
                    let edge = dist / (t - normal).cos();
                    if edge <= rho {
                        continue;
                    }
                    let (ct, st) = (t.cos(), t.sin());
                    for (r, wr) in self.radial_rule.on(rho, edge) {
                        f(center + Point::new(r * ct, r * st), wt * wr * r);
                    }
                }
            }
        }
    }

    fn mask_allows(&self, p: Point) -> bool {
        match &self.region {
            Region::GeodesicBall { field, radius } => field.query(p) < *radius,
            _ => true,
        }
    }

    /// Integrates several quantities in one pass over the nodes.
    pub fn integrate_n<const N: usize, F>(&self, f: F) -> Result<[f64; N]>
    where
        F: Fn(Point) -> [f64; N] + Sync,
    {
        let masked = matches!(self.region, Region::GeodesicBall { .. });
        let partials: Vec<Result<[f64; N]>> = self
            .cells
            .par_iter()
            .map(|cell| {
                let mut acc = [CompensatedSum::default(); N];
                let mut err = None;
                self.for_each_node(cell, |p, w| {
                    if err.is_some() || (masked && !self.mask_allows(p)) {
                        return;
                    }
                    let v = f(p);
                    for (a, x) in acc.iter_mut().zip(v) {
                        if !x.is_finite() {
                            err = Some(Error::Evaluation { node: p, value: x });
                            return;
                        }
                        a.add(w * x);
                    }
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(acc.map(|a| a.value())),
                }
            })
            .collect();
        let mut total = [CompensatedSum::default(); N];
        for part in partials {
            for (t, v) in total.iter_mut().zip(part?) {
                t.add(v);
            }
        }
        Ok(total.map(|t| t.value()))
    }

    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(Point) -> f64 + Sync,
    {
        Ok(self.integrate_n(|p| [f(p)])?[0])
    }

    /// Integral on this grid and on [`coarsened`](Self::coarsened); the error bar is their difference.
    pub fn integrate_n_estimate<const N: usize, F>(&self, f: F) -> Result<[Estimate; N]>
    where
        F: Fn(Point) -> [f64; N] + Sync,
    {
        let fine = self.integrate_n(&f)?;
        let coarse = self.coarsened()?.integrate_n(&f)?;
        let mut out = [Estimate::default(); N];
        for k in 0..N {
            out[k] = Estimate {
                value: fine[k],
                error: (fine[k] - coarse[k]).abs() + 1e-14 * fine[k].abs(),
            };
        }
        Ok(out)
    }

    pub fn integrate_estimate<F>(&self, f: F) -> Result<Estimate>
    where
        F: Fn(Point) -> f64 + Sync,
    {
        Ok(self.integrate_n_estimate(|p| [f(p)])?[0])
    }
}

/// Which pointwise quantity of `u` a norm measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Quantity {
    /// `|u|`
    Value,
    /// `|∇u|_g`
    Grad,
    /// `|Δ_g u|`
    Laplacian,
}

/// `q(x)^p λ(x)²` for the chosen quantity; the density of `‖·‖_p^p`.
pub fn lp_density(s: &ConformalSurface, quantity: Quantity, u: &SmoothField, p: f64, x: Point) -> f64 {
    let jet = u.eval(x);
    let magnitude = match quantity {
        Quantity::Value => jet.value.abs(),
        Quantity::Grad => jet.grad_norm(),
        Quantity::Laplacian => jet.laplacian.abs(),
    };
    if magnitude == 0.0 {
        return 0.0;
    }
    let phi = s.log_lambda(x).value;
    // λ² · (λ^{-k} m)^p with k = 0, 1, 2
    let k = match quantity {
        Quantity::Value => 0.0,
        Quantity::Grad => 1.0,
        Quantity::Laplacian => 2.0,
    };
    (p * magnitude.ln() + (2.0 - k * p) * phi).exp()
}

/// Densities of `‖u‖_p^p`, `‖∇u‖_p^p` and `‖Δu‖_p^p` at `x`, from one jet evaluation.
pub fn norm_densities(s: &ConformalSurface, u: &SmoothField, p: f64, x: Point) -> [f64; 3] {
    let jet = u.eval(x);
    let phi = s.log_lambda(x).value;
    let term = |m: f64, k: f64| if m == 0.0 { 0.0 } else { (p * m.ln() + (2.0 - k * p) * phi).exp() };
    [
        term(jet.value.abs(), 0.0),
        term(jet.grad_norm(), 1.0),
        term(jet.laplacian.abs(), 2.0),
    ]
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("norm exponent must satisfy p >= 1, got {p}")));
    }
    Ok(())
}

/// `∫_region q^p dμ_g` without taking the root.
pub fn lp_norm_pow(
    s: &ConformalSurface,
    quantity: Quantity,
    u: &SmoothField,
    grid: &QuadratureGrid,
    p: f64,
) -> Result<f64> {
    check_exponent(p)?;
    grid.integrate(|x| lp_density(s, quantity, u, p, x))
}

/// `(∫_region q^p dμ_g)^{1/p}`.
pub fn lp_norm(
    s: &ConformalSurface,
    quantity: Quantity,
    u: &SmoothField,
    grid: &QuadratureGrid,
    p: f64,
) -> Result<f64> {
    Ok(lp_norm_pow(s, quantity, u, grid, p)?.powf(1.0 / p))
}

/// Averaged norm `(∫|f|^p dμ_g / vol_g)^{1/p}` together with `vol_g`.
pub fn avg_lp_norm_with_volume<F>(s: &ConformalSurface, f: F, grid: &QuadratureGrid, p: f64) -> Result<(f64, f64)>
where
    F: Fn(Point) -> f64 + Sync,
{
    check_exponent(p)?;
    let [num, vol] = grid.integrate_n(|x| {
        let density = s.volume_density(x);
        let v = f(x).abs();
        [if v == 0.0 { 0.0 } else { v.powf(p) * density }, density]
    })?;
    if !(vol > 0.0) {
        return Err(invalid("averaged norm over a region of zero volume"));
    }
    Ok(((num / vol).powf(1.0 / p), vol))
}

pub fn avg_lp_norm<F>(s: &ConformalSurface, f: F, grid: &QuadratureGrid, p: f64) -> Result<f64>
where
    F: Fn(Point) -> f64 + Sync,
{
    Ok(avg_lp_norm_with_volume(s, f, grid, p)?.0)
}

/// `∫_{B_δ(0)} (r² + ε)^γ dx = π[(δ² + ε)^{γ+1} − ε^{γ+1}]/(γ+1)`, `γ ≠ −1`.
pub fn radial_power_integral(delta: f64, eps: f64, gamma: f64) -> f64 {
    let g1 = gamma + 1.0;
    if g1 == 0.0 {
        return PI * ((delta * delta + eps) / eps).ln();
    }
    // ε^{γ+1} [(1 + δ²/ε)^{γ+1} − 1] / (γ+1), with expm1 for the bracket
    let bracket = (g1 * (delta * delta / eps).ln_1p()).exp_m1();
    PI * (g1 * eps.ln()).exp() * bracket / g1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Region {
        Region::rectangle(Point::ORIGIN, Point::new(1.0, 1.0))
    }

    #[test]
    fn tile_count_and_area() {
        let g = build_grid(&unit_square(), 0.1, &[]).unwrap();
        assert_eq!(g.tile_count(), 100);
        assert!((g.integrate(|_| 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(build_grid(&unit_square(), 0.0, &[]).is_err());
    }

    #[test]
    fn polar_patch_keeps_measure() {
        let g = build_grid(&unit_square(), 0.1, &[Point::new(0.43, 0.61)]).unwrap();
        assert!((g.integrate(|_| 1.0).unwrap() - 1.0).abs() < 1e-10);
        assert!(g.innermost_ring_radius().unwrap() <= 1e-8);
        // indicator of a sub-rectangle is integrated exactly when it is tile aligned
        let sub = g.integrate(|p| if p.x < 0.2 { 1.0 } else { 0.0 }).unwrap();
        assert!((sub - 0.2).abs() < 1e-10);
    }

    #[test]
    fn disc_area_and_symmetry() {
        let g = build_grid(&Region::ball(Point::ORIGIN, 0.1), 0.01, &[Point::ORIGIN]).unwrap();
        let area = g.integrate(|_| 1.0).unwrap();
        assert!((area - PI * 0.01).abs() <= 1e-10 * PI * 0.01);
        assert!(g.integrate(|p| p.x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn singular_radial_integral_matches_closed_form() {
        let (delta, eps) = (0.1, 1e-3);
        let g = build_grid(&Region::ball(Point::ORIGIN, delta), 0.01, &[Point::ORIGIN]).unwrap();
        let q = g.integrate(|p| (p.norm_sq() + eps).powi(-2)).unwrap();
        let exact = PI * (1.0 / eps - 1.0 / (delta * delta + eps));
        assert!((exact - 2855.9933).abs() < 1e-4);
        assert!((q - exact).abs() <= 1e-8 * exact);
        assert!((radial_power_integral(delta, eps, -2.0) - exact).abs() <= 1e-12 * exact);
    }

    #[test]
    fn non_finite_integrand_names_node() {
        let g = build_grid(&unit_square(), 0.5, &[]).unwrap();
        match g.integrate(|p| if p.x > 0.5 { f64::NAN } else { 1.0 }) {
            Err(Error::Evaluation { node, .. }) => assert!(node.x > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn averaged_norm_of_constant() {
        let s = ConformalSurface::constant(0.5).unwrap();
        let g = build_grid(&Region::ball(Point::new(0.2, 0.1), 0.3), 0.05, &[]).unwrap();
        for p in [1.0, 2.0, 3.5] {
            assert!((avg_lp_norm(&s, |_| 2.5, &g, p).unwrap() - 2.5).abs() < 1e-12);
        }
        assert!(avg_lp_norm(&s, |_| 1.0, &g, 0.5).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-15).abs() < 1e-30);
    }
}
