//! Smooth scalar fields on the plane with exact first and second derivatives.
//!
//! Every field evaluates to a [`Jet`]: its value, Euclidean gradient and
//! Euclidean Laplacian. Derivatives are propagated through sums, products with
//! affine factors and dilations by the chain rule, never by differencing.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Value, Euclidean gradient and Euclidean Laplacian of a field at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 2],
    pub laplacian: f64,
}

impl Jet {
    pub const ZERO: Jet = Jet {
        value: 0.0,
        grad: [0.0, 0.0],
        laplacian: 0.0,
    };

    pub fn grad_norm(&self) -> f64 {
        self.grad[0].hypot(self.grad[1])
    }

    pub fn scaled(self, c: f64) -> Jet {
        Jet {
            value: c * self.value,
            grad: [c * self.grad[0], c * self.grad[1]],
            laplacian: c * self.laplacian,
        }
    }

    fn accumulate(&mut self, other: Jet) {
        self.value += other.value;
        self.grad[0] += other.grad[0];
        self.grad[1] += other.grad[1];
        self.laplacian += other.laplacian;
    }

    /// Product rule, `Δ(fg) = fΔg + gΔf + 2∇f·∇g`.
    pub fn product(self, other: Jet) -> Jet {
        Jet {
            value: self.value * other.value,
            grad: [
                self.value * other.grad[0] + other.value * self.grad[0],
                self.value * other.grad[1] + other.value * self.grad[1],
            ],
            laplacian: self.value * other.laplacian
                + other.value * self.laplacian
                + 2.0 * (self.grad[0] * other.grad[0] + self.grad[1] * other.grad[1]),
        }
    }

    /// Jet of a radial function `f(|p - c|)` given `f, f', f''` at `r` and the offset `p - c`.
    pub fn radial(f: f64, df: f64, d2f: f64, offset: Point) -> Jet {
        let r = offset.norm();
        if r == 0.0 {
            // smooth radial functions have f'(0) = 0 and Δf(0) = 2 f''(0)
            return Jet {
                value: f,
                grad: [0.0, 0.0],
                laplacian: 2.0 * d2f,
            };
        }
        Jet {
            value: f,
            grad: [df * offset.x / r, df * offset.y / r],
            laplacian: d2f + df / r,
        }
    }
}

/// The C^∞ step `h(t) = s(t)/(s(t) + s(1-t))`, `s(t) = exp(-1/t)` for `t > 0`.
///
/// Returns `(h, h', h'')`. Written as a logistic in `z = 1/(1-t) - 1/t` so the
/// derivatives never divide two underflowing exponentials.
pub fn smooth_step(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let u = 1.0 - t;
    let z = 1.0 / u - 1.0 / t;
    let sigma = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    let s1 = sigma * (1.0 - sigma);
    if s1 == 0.0 {
        return (sigma, 0.0, 0.0);
    }
    let s2 = s1 * (1.0 - 2.0 * sigma);
    let dz = 1.0 / (u * u) + 1.0 / (t * t);
    let d2z = 2.0 / (u * u * u) - 2.0 / (t * t * t);
    (sigma, s1 * dz, s2 * dz * dz + s1 * d2z)
}

/// Radial profile equal to 1 on `[0, r_in]`, 0 beyond `r_out`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub r_in: f64,
    pub r_out: f64,
}

impl CutoffProfile {
    pub fn new(r_in: f64, r_out: f64) -> Result<Self> {
        if !(r_in > 0.0 && r_out > r_in && r_out.is_finite()) {
            return Err(invalid(format!(
                "cutoff needs 0 < r_in < r_out, got r_in = {r_in}, r_out = {r_out}"
            )));
        }
        Ok(Self { r_in, r_out })
    }

    /// `(χ, χ', χ'')` as functions of the radius.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.r_in {
            return (1.0, 0.0, 0.0);
        }
        if r >= self.r_out {
            return (0.0, 0.0, 0.0);
        }
        let w = self.r_out - self.r_in;
        let (h, dh, d2h) = smooth_step((self.r_out - r) / w);
        (h, -dh / w, d2h / (w * w))
    }

    pub fn jet(&self, offset: Point) -> Jet {
        let (f, df, d2f) = self.eval(offset.norm());
        Jet::radial(f, df, d2f, offset)
    }
}

#[derive(Debug)]
enum Kind {
    Zero,
    Cutoff { center: Point, profile: CutoffProfile },
    /// `((x - c.x) + 1) · χ(|p - c|)`
    LinearBump { center: Point, profile: CutoffProfile },
    /// `inner(scale · (p - center))`
    Dilated {
        inner: SmoothField,
        center: Point,
        scale: f64,
    },
    Sum(Vec<(f64, SmoothField)>),
}

/// Immutable smooth field with known compact support.
///
/// The field and all its derivatives vanish outside the closed ball of radius
/// `support_radius` about `support_center`.
#[derive(Clone, Debug)]
pub struct SmoothField {
    kind: Arc<Kind>,
    support_center: Point,
    support_radius: f64,
    support_box: [Point; 2],
}

fn ball_box(center: Point, radius: f64) -> [Point; 2] {
    [
        Point::new(center.x - radius, center.y - radius),
        Point::new(center.x + radius, center.y + radius),
    ]
}

impl SmoothField {
    fn from_kind(kind: Kind, support_center: Point, support_radius: f64) -> Self {
        Self {
            kind: Arc::new(kind),
            support_center,
            support_radius,
            support_box: ball_box(support_center, support_radius),
        }
    }

    pub fn zero() -> Self {
        Self::from_kind(Kind::Zero, Point::ORIGIN, 0.0)
    }

    pub fn support_center(&self) -> Point {
        self.support_center
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Axis-aligned box containing the support; tighter than the ball for sums.
    pub fn support_box(&self) -> [Point; 2] {
        self.support_box
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self.kind, Kind::Zero)
            || matches!(&*self.kind, Kind::Sum(terms) if terms.iter().all(|(c, f)| *c == 0.0 || f.is_zero()))
    }

    pub fn eval(&self, p: Point) -> Jet {
        if p.dist(self.support_center) > self.support_radius
            || p.x < self.support_box[0].x
            || p.x > self.support_box[1].x
            || p.y < self.support_box[0].y
            || p.y > self.support_box[1].y
        {
            return Jet::ZERO;
        }
        match &*self.kind {
            Kind::Zero => Jet::ZERO,
            Kind::Cutoff { center, profile } => profile.jet(p - *center),
            Kind::LinearBump { center, profile } => {
                let chi = profile.jet(p - *center);
                if chi.value == 0.0 {
                    return Jet::ZERO;
                }
                let affine = Jet {
                    value: (p.x - center.x) + 1.0,
                    grad: [1.0, 0.0],
                    laplacian: 0.0,
                };
                affine.product(chi)
            }
            Kind::Dilated {
                inner,
                center,
                scale,
            } => {
                let j = inner.eval((p - *center) * *scale);
                Jet {
                    value: j.value,
                    grad: [scale * j.grad[0], scale * j.grad[1]],
                    laplacian: scale * scale * j.laplacian,
                }
            }
            Kind::Sum(terms) => {
                let mut acc = Jet::ZERO;
                for (c, f) in terms {
                    let j = f.eval(p);
                    if j != Jet::ZERO {
                        acc.accumulate(j.scaled(*c));
                    }
                }
                acc
            }
        }
    }

    /// `p ↦ self(scale · (p - center))`; the support follows the map.
    pub fn dilate(&self, center: Point, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale != 0.0) {
            return Err(invalid(format!("dilation scale must be finite and nonzero, got {scale}")));
        }
        let s = scale.abs();
        let c = center + self.support_center * (1.0 / scale);
        let [lo, hi] = self.support_box;
        let (a, b) = (center + lo * (1.0 / scale), center + hi * (1.0 / scale));
        let mut out = Self::from_kind(
            Kind::Dilated {
                inner: self.clone(),
                center,
                scale,
            },
            c,
            self.support_radius / s,
        );
        out.support_box = [
            Point::new(a.x.min(b.x), a.y.min(b.y)),
            Point::new(a.x.max(b.x), a.y.max(b.y)),
        ];
        Ok(out)
    }

    /// `p ↦ self(p - offset)`.
    pub fn translate(&self, offset: Point) -> Self {
        self.dilate(offset, 1.0).expect("unit scale is valid")
    }
}

/// Radial cutoff about the origin: 1 on `B_{r_in}`, 0 outside `B_{r_out}`.
pub fn make_cutoff(r_in: f64, r_out: f64) -> Result<SmoothField> {
    make_cutoff_at(Point::ORIGIN, r_in, r_out)
}

pub fn make_cutoff_at(center: Point, r_in: f64, r_out: f64) -> Result<SmoothField> {
    let profile = CutoffProfile::new(r_in, r_out)?;
    Ok(SmoothField::from_kind(
        Kind::Cutoff { center, profile },
        center,
        r_out,
    ))
}

/// Radius below which the linear bump is exactly affine.
pub const BUMP_PLATEAU: f64 = 0.25;
/// Radius of the linear bump's support.
pub const BUMP_SUPPORT: f64 = 0.5;

/// `((x - c.x) + 1) χ(|p - c|)` with `χ = make_cutoff(1/4, 1/2)`.
pub fn make_linear_bump(center: Point) -> SmoothField {
    let profile = CutoffProfile {
        r_in: BUMP_PLATEAU,
        r_out: BUMP_SUPPORT,
    };
    SmoothField::from_kind(Kind::LinearBump { center, profile }, center, BUMP_SUPPORT)
}

/// Pointwise linear combination. Zero-coefficient and zero terms are kept for
/// evaluation but do not widen the support.
pub fn combine(terms: &[(f64, SmoothField)]) -> Result<SmoothField> {
    if terms.is_empty() {
        return Err(invalid("combine needs at least one term"));
    }
    for (c, _) in terms {
        if !c.is_finite() {
            return Err(invalid(format!("non-finite coefficient {c}")));
        }
    }
    let live: Vec<&SmoothField> = terms
        .iter()
        .filter(|(c, f)| *c != 0.0 && !f.is_zero())
        .map(|(_, f)| f)
        .collect();
    if live.is_empty() {
        let mut z = SmoothField::from_kind(Kind::Sum(terms.to_vec()), Point::ORIGIN, 0.0);
        z.support_box = ball_box(Point::ORIGIN, 0.0);
        return Ok(z);
    }
    let mut lo = live[0].support_box[0];
    let mut hi = live[0].support_box[1];
    for f in &live[1..] {
        lo = Point::new(lo.x.min(f.support_box[0].x), lo.y.min(f.support_box[0].y));
        hi = Point::new(hi.x.max(f.support_box[1].x), hi.y.max(f.support_box[1].y));
    }
    let center = (lo + hi) * 0.5;
    let radius = live
        .iter()
        .map(|f| f.support_center.dist(center) + f.support_radius)
        .fold(0.0, f64::max);
    let mut out = SmoothField::from_kind(Kind::Sum(terms.to_vec()), center, radius);
    out.support_box = [lo, hi];
    Ok(out)
}

/// The exact jet of `field` at `p`.
pub fn eval_jet(field: &SmoothField, p: Point) -> Jet {
    field.eval(p)
}
