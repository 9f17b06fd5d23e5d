//! Conformally flat metrics `g = λ² dx²` on the plane.
//!
//! A surface is described by the exact jet of `φ = log λ`. Working with the
//! logarithm keeps curvature accurate where `λ` is tiny, since
//! `Δₑ log λ` is available in closed form instead of as a difference of two
//! large quotients.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{Jet, Point, SmoothField};

/// Source of the conformal exponent `φ = log λ`.
pub trait ConformalFactor: Send + Sync + fmt::Debug {
    /// Exact jet of `log λ` at `p`.
    fn log_jet(&self, p: Point) -> Jet;

    /// Points near which integrands built from this metric become singular
    /// and need polar refinement.
    fn singular_centers(&self) -> Vec<Point> {
        Vec::new()
    }

    /// Upper bound on how much Euclidean length a geodesic of the metric can
    /// save inside the deformed region; used to size boxes around geodesic balls.
    fn shortcut_bound(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Flat;

impl ConformalFactor for Flat {
    fn log_jet(&self, _p: Point) -> Jet {
        Jet::ZERO
    }
}

/// `λ ≡ c` everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantFactor {
    log_c: f64,
}

impl ConformalFactor for ConstantFactor {
    fn log_jet(&self, _p: Point) -> Jet {
        Jet {
            value: self.log_c,
            ..Jet::ZERO
        }
    }

    fn shortcut_bound(&self) -> f64 {
        f64::INFINITY
    }
}

/// `λ = e^φ` for a smooth compactly supported exponent `φ`.
#[derive(Debug, Clone)]
pub struct ExpField {
    pub exponent: SmoothField,
    /// Overrides the conservative support-diameter shortcut bound.
    pub shortcut: Option<f64>,
}

impl ConformalFactor for ExpField {
    fn log_jet(&self, p: Point) -> Jet {
        self.exponent.eval(p)
    }

    fn shortcut_bound(&self) -> f64 {
        if let Some(b) = self.shortcut {
            return b;
        }
        let [lo, hi] = self.exponent.support_box();
        (hi.x - lo.x).hypot(hi.y - lo.y).max(0.0)
    }
}

/// How the smallest Ricci eigenvalue is derived from `φ = log λ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurvatureConvention {
    /// Gaussian curvature `-e^{-2φ} Δₑφ`; in dimension two `Ric = K g`.
    #[default]
    Gaussian,
    /// `-2 Δₑφ`, the shorthand used in the integral-bounds example.
    RemarkVariant,
}

#[derive(Clone, Debug)]
pub struct ConformalSurface {
    factor: Arc<dyn ConformalFactor>,
    convention: CurvatureConvention,
    description: String,
}

impl ConformalSurface {
    pub fn new(factor: Arc<dyn ConformalFactor>, description: impl Into<String>) -> Self {
        Self {
            factor,
            convention: CurvatureConvention::Gaussian,
            description: description.into(),
        }
    }

    pub fn flat() -> Self {
        Self::new(Arc::new(Flat), "flat")
    }

    /// `λ ≡ c` with `0 < c ≤ 1`.
    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidSurface(format!(
                "constant conformal factor must lie in (0, 1], got {c}"
            )));
        }
        Ok(Self::new(
            Arc::new(ConstantFactor { log_c: c.ln() }),
            format!("constant lambda = {c}"),
        ))
    }

    pub fn exp_of(exponent: SmoothField, description: impl Into<String>) -> Self {
        Self::new(Arc::new(ExpField { exponent, shortcut: None }), description)
    }

    /// `λ = e^φ` with an explicit bound on how much Euclidean length a
    /// geodesic inside a unit ball can save by crossing the support of `φ`.
    pub fn exp_with_shortcut(exponent: SmoothField, shortcut: f64, description: impl Into<String>) -> Self {
        Self::new(Arc::new(ExpField { exponent, shortcut: Some(shortcut) }), description)
    }

    pub fn with_convention(mut self, convention: CurvatureConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn convention(&self) -> CurvatureConvention {
        self.convention
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn factor(&self) -> &Arc<dyn ConformalFactor> {
        &self.factor
    }

    pub fn log_lambda(&self, p: Point) -> Jet {
        self.factor.log_jet(p)
    }

    pub fn lambda(&self, p: Point) -> f64 {
        self.factor.log_jet(p).value.exp()
    }

    pub fn log_lambda_laplacian(&self, p: Point) -> f64 {
        self.factor.log_jet(p).laplacian
    }

    pub fn singular_centers(&self) -> Vec<Point> {
        self.factor.singular_centers()
    }

    pub fn shortcut_bound(&self) -> f64 {
        self.factor.shortcut_bound()
    }

    /// `Δ_g u = λ⁻² Δₑ u`.
    pub fn laplace_beltrami(&self, u: &SmoothField, p: Point) -> f64 {
        laplace_beltrami_from(u.eval(p).laplacian, self.log_lambda(p).value)
    }

    /// `|∇u|_g = λ⁻¹ |∇ₑ u|`.
    pub fn riem_grad_norm(&self, u: &SmoothField, p: Point) -> f64 {
        u.eval(p).grad_norm() * (-self.log_lambda(p).value).exp()
    }

    /// Density of `dμ_g` against Lebesgue measure, `λ²`.
    pub fn volume_density(&self, p: Point) -> f64 {
        (2.0 * self.log_lambda(p).value).exp()
    }

    /// Smallest eigenvalue of the Ricci endomorphism at `p`.
    pub fn min_ricci(&self, p: Point) -> f64 {
        min_ricci_from(self.convention, self.log_lambda(p))
    }

    /// `(min Ric - (n-1)K)_-`.
    pub fn rho_k(&self, p: Point, k: f64, n: usize) -> Result<f64> {
        if n < 2 {
            return Err(invalid(format!("dimension must be at least 2, got {n}")));
        }
        Ok(negative_part(self.min_ricci(p) - (n as f64 - 1.0) * k))
    }

    /// Checks `0 < λ ≤ 1` on the given sample points.
    pub fn check_admissible(&self, samples: impl IntoIterator<Item = Point>) -> Result<()> {
        for p in samples {
            let phi = self.log_lambda(p).value;
            if !(phi.is_finite() && phi <= 0.0) {
                return Err(Error::InvalidSurface(format!(
                    "conformal factor exp({phi}) outside (0, 1] at {p}"
                )));
            }
        }
        Ok(())
    }
}

pub fn laplace_beltrami_from(euclidean_laplacian: f64, log_lambda: f64) -> f64 {
    if euclidean_laplacian == 0.0 {
        return 0.0;
    }
    euclidean_laplacian * (-2.0 * log_lambda).exp()
}

pub fn min_ricci_from(convention: CurvatureConvention, log_lambda: Jet) -> f64 {
    match convention {
        CurvatureConvention::Gaussian => {
            if log_lambda.laplacian == 0.0 {
                0.0
            } else {
                -log_lambda.laplacian * (-2.0 * log_lambda.value).exp()
            }
        }
        CurvatureConvention::RemarkVariant => -2.0 * log_lambda.laplacian,
    }
}

/// `a_- = (|a| - a) / 2`.
pub fn negative_part(a: f64) -> f64 {
    (a.abs() - a) / 2.0
}
