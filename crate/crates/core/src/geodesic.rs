//! Geodesic distance on a conformal surface by first-order fast marching.
//!
//! The distance from a source solves `|∇d| = λ` on a Cartesian lattice. Nodes
//! within a fixed physical radius of the source are initialised with the
//! length of the straight segment, the rest are accepted in increasing order with the
//! usual upwind quadratic update.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fields::Point;
use crate::quadrature::Region;
use crate::surface::ConformalSurface;

/// Minimum initialisation radius in lattice spacings.
pub const DEFAULT_INIT_CELLS: f64 = 3.0;

/// Physical radius around the source inside which nodes are initialised directly.
pub const DEFAULT_INIT_RADIUS: f64 = 0.1;

// 6-point Gauss–Legendre on [0, 1]
const SEGMENT_RULE: [(f64, f64); 6] = [
    (0.033_765_242_898_423_975, 0.085_662_246_189_584_87),
    (0.169_395_306_766_867_76, 0.180_380_786_524_069_47),
    (0.380_690_406_958_401_5, 0.233_956_967_286_345_69),
    (0.619_309_593_041_598_5, 0.233_956_967_286_345_69),
    (0.830_604_693_233_132_2, 0.180_380_786_524_069_47),
    (0.966_234_757_101_576, 0.085_662_246_189_584_87),
];

/// Lattice of `(nx + 1) × (ny + 1)` nodes with the conformal factor sampled at each.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub origin: Point,
    pub hx: f64,
    pub hy: f64,
    pub nx: usize,
    pub ny: usize,
    lambda: Vec<f64>,
}

impl Lattice {
    pub fn new(surface: &ConformalSurface, min: Point, max: Point, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("lattice spacing must be positive, got {h}")));
        }
        if !(min.x <= max.x && min.y <= max.y) {
            return Err(invalid(format!("empty lattice box {min} .. {max}")));
        }
        let (w, hgt) = (max.x - min.x, max.y - min.y);
        let nx = (w / h - 1e-9).ceil().max(0.0) as usize;
        let ny = (hgt / h - 1e-9).ceil().max(0.0) as usize;
        let hx = if nx == 0 { h } else { w / nx as f64 };
        let hy = if ny == 0 { h } else { hgt / ny as f64 };
        let mut lattice = Self {
            origin: min,
            hx,
            hy,
            nx,
            ny,
            lambda: Vec::new(),
        };
        let mut lambda = Vec::with_capacity(lattice.len());
        for idx in 0..lattice.len() {
            let p = lattice.point(idx);
            let l = surface.lambda(p);
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidSurface(format!(
                    "non-positive conformal factor {l} at lattice node {p}"
                )));
            }
            lambda.push(l);
        }
        lattice.lambda = lambda;
        Ok(lattice)
    }

    pub fn len(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major in x: node `(i, j)` has index `i * (ny + 1) + j`, so index
    /// order is lexicographic in `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / (self.ny + 1), idx % (self.ny + 1))
    }

    pub fn point(&self, idx: usize) -> Point {
        let (i, j) = self.coords(idx);
        Point::new(
            self.origin.x + i as f64 * self.hx,
            self.origin.y + j as f64 * self.hy,
        )
    }

    pub fn max(&self) -> Point {
        Point::new(
            self.origin.x + self.nx as f64 * self.hx,
            self.origin.y + self.ny as f64 * self.hy,
        )
    }

    pub fn lambda_at(&self, idx: usize) -> f64 {
        self.lambda[idx]
    }

    pub fn spacing(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn nearest_node(&self, p: Point) -> usize {
        let i = ((p.x - self.origin.x) / self.hx).round().clamp(0.0, self.nx as f64) as usize;
        let j = ((p.y - self.origin.y) / self.hy).round().clamp(0.0, self.ny as f64) as usize;
        self.index(i, j)
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.coords(idx);
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.coords(idx);
        let mut out = [usize::MAX; 4];
        if i > 0 {
            out[0] = self.index(i - 1, j);
        }
        if i < self.nx {
            out[1] = self.index(i + 1, j);
        }
        if j > 0 {
            out[2] = self.index(i, j - 1);
        }
        if j < self.ny {
            out[3] = self.index(i, j + 1);
        }
        out.into_iter().filter(|&n| n != usize::MAX)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Trial {
    dist: f64,
    idx: usize,
}

impl Eq for Trial {}

impl Ord for Trial {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Trial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Upwind solution of `((d-a)/hx)² + ((d-b)/hy)² = f²` with `d ≥ max(a, b)`.
fn eikonal_update(a: f64, b: f64, hx: f64, hy: f64, f: f64) -> f64 {
    let da = a + hx * f;
    let db = b + hy * f;
    if !a.is_finite() {
        return db;
    }
    if !b.is_finite() {
        return da;
    }
    let (wa, wb) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let sa = wa + wb;
    let sb = wa * a + wb * b;
    let sc = wa * a * a + wb * b * b - f * f;
    let disc = sb * sb - sa * sc;
    if disc >= 0.0 {
        let d = (sb + disc.sqrt()) / sa;
        if d >= a.max(b) {
            return d.min(da).min(db);
        }
    }
    da.min(db)
}

/// Length of the straight segment from `source` to `p`.
fn segment_length(surface: &ConformalSurface, source: Point, p: Point) -> f64 {
    let r = p.dist(source);
    if r == 0.0 {
        return 0.0;
    }
    let d = p - source;
    r * SEGMENT_RULE
        .iter()
        .map(|&(t, w)| w * surface.lambda(source + d * t))
        .sum::<f64>()
}

/// Single-source march. Nodes whose distance would reach `cutoff` are left at
/// `+∞`; the accepted values are identical to those of an untruncated march.
pub(crate) fn march(
    surface: &ConformalSurface,
    lattice: &Lattice,
    source: Point,
    init_radius: f64,
    cutoff: f64,
) -> Vec<f64> {
    let n = lattice.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut accepted = vec![false; n];
    let mut heap = BinaryHeap::new();

    let (i0, i1) = index_range(source.x, init_radius, lattice.origin.x, lattice.hx, lattice.nx);
    let (j0, j1) = index_range(source.y, init_radius, lattice.origin.y, lattice.hy, lattice.ny);
    let mut seeded = false;
    for i in i0..=i1 {
        for j in j0..=j1 {
            let idx = lattice.index(i, j);
            let p = lattice.point(idx);
            if p.dist(source) <= init_radius {
                let d = segment_length(surface, source, p);
                dist[idx] = d;
                heap.push(Trial { dist: d, idx });
                seeded = true;
            }
        }
    }
    if !seeded {
        let idx = lattice.nearest_node(source);
        let d = segment_length(surface, source, lattice.point(idx));
        dist[idx] = d;
        heap.push(Trial { dist: d, idx });
    }

    while let Some(Trial { dist: d, idx }) = heap.pop() {
        if accepted[idx] || d > dist[idx] {
            continue;
        }
        if d >= cutoff {
            break;
        }
        accepted[idx] = true;
        for nb in lattice.neighbors(idx) {
            if accepted[nb] {
                continue;
            }
            let (i, j) = lattice.coords(nb);
            let pick = |a: Option<usize>, b: Option<usize>| {
                let va = a.filter(|&k| accepted[k]).map_or(f64::INFINITY, |k| dist[k]);
                let vb = b.filter(|&k| accepted[k]).map_or(f64::INFINITY, |k| dist[k]);
                va.min(vb)
            };
            let a = pick(
                (i > 0).then(|| lattice.index(i - 1, j)),
                (i < lattice.nx).then(|| lattice.index(i + 1, j)),
            );
            let b = pick(
                (j > 0).then(|| lattice.index(i, j - 1)),
                (j < lattice.ny).then(|| lattice.index(i, j + 1)),
            );
            let cand = eikonal_update(a, b, lattice.hx, lattice.hy, lattice.lambda_at(nb));
            if cand < dist[nb] {
                dist[nb] = cand;
                heap.push(Trial { dist: cand, idx: nb });
            }
        }
    }
    for (d, ok) in dist.iter_mut().zip(&accepted) {
        if !ok {
            *d = f64::INFINITY;
        }
    }
    dist
}

fn index_range(c: f64, r: f64, origin: f64, h: f64, n: usize) -> (usize, usize) {
    let lo = ((c - r - origin) / h).floor().clamp(0.0, n as f64) as usize;
    let hi = ((c + r - origin) / h).ceil().clamp(0.0, n as f64) as usize;
    (lo, hi)
}

/// Geodesic distance from a source, sampled on a lattice.
#[derive(Clone, Debug)]
pub struct DistanceField {
    surface: ConformalSurface,
    source: Point,
    lattice: Lattice,
    values: Vec<f64>,
    init_radius: f64,
}

impl DistanceField {
    pub fn source(&self) -> Point {
        self.source
    }

    pub fn spacing(&self) -> f64 {
        self.lattice.spacing()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn surface(&self) -> &ConformalSurface {
        &self.surface
    }

    pub fn bounding_box(&self) -> [Point; 2] {
        [self.lattice.origin, self.lattice.max()]
    }

    /// Distance at an arbitrary point: the initialisation formula near the
    /// source, bilinear interpolation elsewhere, `+∞` outside the lattice box.
    pub fn query(&self, p: Point) -> f64 {
        if p.dist(self.source) <= self.init_radius {
            return segment_length(&self.surface, self.source, p);
        }
        let l = &self.lattice;
        let fx = (p.x - l.origin.x) / l.hx;
        let fy = (p.y - l.origin.y) / l.hy;
        if !(fx >= -1e-12 && fy >= -1e-12 && fx <= l.nx as f64 + 1e-12 && fy <= l.ny as f64 + 1e-12) {
            return f64::INFINITY;
        }
        let i = (fx.floor().max(0.0) as usize).min(l.nx.saturating_sub(1));
        let j = (fy.floor().max(0.0) as usize).min(l.ny.saturating_sub(1));
        let tx = if l.nx == 0 { 0.0 } else { (fx - i as f64).clamp(0.0, 1.0) };
        let ty = if l.ny == 0 { 0.0 } else { (fy - j as f64).clamp(0.0, 1.0) };
        let i1 = (i + 1).min(l.nx);
        let j1 = (j + 1).min(l.ny);
        let v = |a: usize, b: usize| self.values[l.index(a, b)];
        let (v00, v10, v01, v11) = (v(i, j), v(i1, j), v(i, j1), v(i1, j1));
        (1.0 - tx) * ((1.0 - ty) * v00 + ty * v01) + tx * ((1.0 - ty) * v10 + ty * v11)
    }

    /// Smallest distance attained on the lattice boundary.
    pub fn boundary_min(&self) -> f64 {
        (0..self.lattice.len())
            .filter(|&i| self.lattice.is_boundary(i))
            .map(|i| self.values[i])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Eikonal distance from `source` over the bounding box of `domain`.
pub fn distance_field(
    surface: &ConformalSurface,
    source: Point,
    domain: &Region,
    h: f64,
) -> Result<DistanceField> {
    distance_field_with(surface, source, domain, h, DEFAULT_INIT_RADIUS)
}

/// As [`distance_field`], initialising every node within `init_radius` of the
/// source by its straight-segment length (never fewer than three cells).
pub fn distance_field_with(
    surface: &ConformalSurface,
    source: Point,
    domain: &Region,
    h: f64,
    init_radius: f64,
) -> Result<DistanceField> {
    let [min, max] = domain.bounding_box();
    if !domain.contains(source) {
        return Err(invalid(format!("source {source} lies outside the domain")));
    }
    let lattice = Lattice::new(surface, min, max, h)?;
    let init_radius = init_radius.max(DEFAULT_INIT_CELLS * lattice.spacing());
    let values = march(surface, &lattice, source, init_radius, f64::INFINITY);
    Ok(DistanceField {
        surface: surface.clone(),
        source,
        lattice,
        values,
        init_radius,
    })
}

/// The geodesic ball `{d < R}` as an integration region.
pub fn geodesic_ball(field: &Arc<DistanceField>, radius: f64) -> Result<Region> {
    if !(radius > 0.0) {
        return Err(invalid(format!("ball radius must be positive, got {radius}")));
    }
    if radius >= field.boundary_min() {
        return Err(Error::OutOfDomain(format!(
            "geodesic ball of radius {radius} reaches the lattice boundary (boundary distance {})",
            field.boundary_min()
        )));
    }
    Ok(Region::GeodesicBall {
        field: Arc::clone(field),
        radius,
    })
}

/// Distance field sized so that `B_R(x)` fits inside its lattice.
pub fn ball_field(surface: &ConformalSurface, x: Point, radius: f64, h: f64) -> Result<Arc<DistanceField>> {
    let half = 1.25 * radius + surface.shortcut_bound().min(4.0 * radius + 1.0) + 4.0 * h;
    let domain = Region::Rectangle {
        min: Point::new(x.x - half, x.y - half),
        max: Point::new(x.x + half, x.y + half),
    };
    Ok(Arc::new(distance_field(surface, x, &domain, h)?))
}

/// Greedy maximal `R/2`-separated set and the three covering properties.
#[derive(Clone, Debug, Serialize)]
pub struct CoveringReport {
    pub centers: Vec<Point>,
    pub radius: f64,
    /// Largest number of balls `B_R(x_i)` containing a lattice node.
    pub overlap_count: usize,
    pub disjointness_ok: bool,
    pub coverage_ok: bool,
    /// Slack used by both checks, `2h`.
    pub tolerance: f64,
    /// Largest distance from a lattice node to its nearest center.
    pub max_nearest: f64,
    /// Smallest center-to-center distance measured by either endpoint's march.
    pub min_separation: f64,
    pub lattice_nodes: usize,
    pub region: [Point; 2],
    pub spacing: f64,
}

fn region_rectangle(region: &Region) -> Result<[Point; 2]> {
    let [min, max] = region.bounding_box();
    if !(min.x <= max.x && min.y <= max.y) {
        return Err(invalid("covering region is empty"));
    }
    Ok([min, max])
}

fn check_covering_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0 && 2.0 * radius <= 1.0) {
        return Err(invalid(format!("covering needs 0 < 2R <= 1, got R = {radius}")));
    }
    Ok(())
}

/// Greedy covering of the lattice of `region` (ties broken by lexicographic
/// lattice order). Only lattice nodes of `region` that satisfy
/// `region.contains` are candidates and are counted.
pub fn greedy_covering(
    surface: &ConformalSurface,
    region: &Region,
    radius: f64,
    h: f64,
) -> Result<CoveringReport> {
    check_covering_radius(radius)?;
    let [min, max] = region_rectangle(region)?;
    let lattice = Lattice::new(surface, min, max, h)?;
    let init_radius = DEFAULT_INIT_RADIUS.max(DEFAULT_INIT_CELLS * lattice.spacing());
    let inside: Vec<bool> = (0..lattice.len()).map(|i| region.contains(lattice.point(i))).collect();
    if !inside.iter().any(|&b| b) {
        return Err(invalid("covering region contains no lattice node"));
    }

    let mut nearest = vec![f64::INFINITY; lattice.len()];
    let mut counts = vec![0usize; lattice.len()];
    let mut centers = Vec::new();
    let mut center_nodes = Vec::new();
    let mut fields: Vec<Vec<f64>> = Vec::new();
    for idx in 0..lattice.len() {
        if !inside[idx] || nearest[idx] < radius / 2.0 {
            continue;
        }
        let x = lattice.point(idx);
        let d = march(surface, &lattice, x, init_radius, radius);
        for (k, &v) in d.iter().enumerate() {
            if v < radius {
                counts[k] += 1;
                nearest[k] = nearest[k].min(v);
            }
        }
        centers.push(x);
        center_nodes.push(idx);
        fields.push(d);
    }

    let tolerance = 2.0 * h;
    let max_nearest = (0..lattice.len())
        .filter(|&i| inside[i])
        .map(|i| nearest[i])
        .fold(0.0, f64::max);
    let mut min_separation = f64::INFINITY;
    for (a, field) in fields.iter().enumerate() {
        for (b, &node) in center_nodes.iter().enumerate() {
            if a != b {
                min_separation = min_separation.min(field[node]);
            }
        }
    }
    let overlap_count = (0..lattice.len())
        .filter(|&i| inside[i])
        .map(|i| counts[i])
        .max()
        .unwrap_or(0);
    Ok(CoveringReport {
        disjointness_ok: min_separation >= radius / 2.0 - tolerance,
        coverage_ok: max_nearest < radius / 2.0 + tolerance,
        centers,
        radius,
        overlap_count,
        tolerance,
        max_nearest,
        min_separation,
        lattice_nodes: inside.iter().filter(|&&b| b).count(),
        region: [min, max],
        spacing: h,
    })
}

/// Overlap count recomputed from untruncated marches, one per center.
pub fn brute_force_overlap(
    surface: &ConformalSurface,
    region: &Region,
    radius: f64,
    h: f64,
    centers: &[Point],
) -> Result<usize> {
    let [min, max] = region_rectangle(region)?;
    let lattice = Lattice::new(surface, min, max, h)?;
    let init_radius = DEFAULT_INIT_RADIUS.max(DEFAULT_INIT_CELLS * lattice.spacing());
    let mut counts = vec![0usize; lattice.len()];
    for &c in centers {
        let d = march(surface, &lattice, c, init_radius, f64::INFINITY);
        for (k, &v) in d.iter().enumerate() {
            if v < radius {
                counts[k] += 1;
            }
        }
    }
    Ok((0..lattice.len())
        .filter(|&i| region.contains(lattice.point(i)))
        .map(|i| counts[i])
        .max()
        .unwrap_or(0))
}
