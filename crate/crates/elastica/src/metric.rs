//! Conformally flat Riemannian metrics on planar domains.
//!
//! Every surface handled by this crate is a domain Ω ⊆ ℝ² carrying a metric
//! of the form
//!
//! ```text
//!     ds² = g(x) (dx₁² + dx₂²),        g : Ω → ℝ_{>0},
//! ```
//!
//! i.e. a positive conformal factor times the Euclidean metric. All
//! geometric quantities of the surface can be written in terms of `g` and
//! its first two derivatives; the flows in [`crate::scheme`] only ever ask
//! for
//!
//! * `g(x)` and `√g(x)`,
//! * `∇ ln g(x)` (a vector),
//! * `D² ln g(x)` (the symmetric Hessian matrix),
//! * the Gauss curvature `S(x) = −Δ ln g / (2 g)`.
//!
//! The supported families:
//!
//! | family      | factor `g(z)`                        | domain                | surface                |
//! |-------------|--------------------------------------|-----------------------|------------------------|
//! | `euclidean` | `1`                                  | ℝ²                    | flat plane             |
//! | `mu`        | `(z·e₂)^(−2μ)`                       | upper half-plane      | half-plane model (μ=1: hyperbolic) |
//! | `alpha`     | `4 / (1 − α·|z|²)²`                  | ℝ² (α≤0), disk (α>0)  | sphere (α<0), hyperbolic disk (α>0) |
//! | `mercator`  | `cosh(z·e₁)^(−2)`                    | ℝ²                    | unit sphere, Mercator chart |
//! | `catenoid`  | `cosh(z·e₁)^2`                       | ℝ²                    | catenoid               |
//! | `torus`     | `s² (√(s²+1) − cos(z·e₂))^(−2)`      | ℝ²                    | torus of revolution    |
//!
//! For the families that are isometric charts of a classical surface in
//! ℝ³, [`ConformalMetric::embed`] maps chart coordinates to points on that
//! surface, which is how the CLI exports three-dimensional trajectories.
//!
//! Sign conventions: `alpha` with `α < 0` is a round sphere of curvature
//! `−α > 0`; with `α > 0` it is the disk model of the hyperbolic plane of
//! curvature `−α < 0` with chart radius `α^(−1/2)`.

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Mat2, Vec2, Vec3};

/// Serializable description of a conformal metric family.
///
/// The JSON form uses a `family` tag plus the family's parameters, e.g.
/// `{"family": "alpha", "alpha": -1.0}` or `{"family": "torus", "s": 1.0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricSpec {
    /// Flat plane, `g ≡ 1`.
    Euclidean,
    /// Power-law factor `g = (z·e₂)^(−2μ)` on the upper half-plane.
    Mu {
        /// Exponent μ; μ = 1 is the hyperbolic half-plane, μ = 0 is flat.
        mu: f64,
    },
    /// Rotationally symmetric factor `g = 4/(1 − α|z|²)²`.
    Alpha {
        /// Curvature parameter; the Gauss curvature is exactly `−α`.
        alpha: f64,
    },
    /// Mercator chart of the unit sphere, `g = cosh(z·e₁)^(−2)`.
    Mercator,
    /// Conformal chart of the catenoid, `g = cosh(z·e₁)²`.
    Catenoid,
    /// Flat chart of a torus of revolution with radius ratio `√(s²+1)/s… `
    /// parametrised by `s > 0`; `g = s²(√(s²+1) − cos(z·e₂))^(−2)`.
    Torus {
        /// Shape parameter `s > 0`; the tube/center radii of the embedded
        /// torus are `1` and `√(s²+1)` after rescaling by `s`.
        s: f64,
    },
}

/// First- and second-order metric data at a single point.
///
/// Evaluating all of it at once shares the domain check and the common
/// subexpressions between `g`, `∇ ln g` and `D² ln g`.
#[derive(Debug, Clone, Copy)]
pub struct MetricJet {
    /// Conformal factor `g(x) > 0`.
    pub g: f64,
    /// `√g(x)`.
    pub sqrt_g: f64,
    /// Gradient of `ln g` at `x`.
    pub grad_ln_g: Vec2,
    /// Hessian of `ln g` at `x` (symmetric).
    pub hess_ln_g: Mat2,
}

/// A conformally flat metric, ready for pointwise evaluation.
///
/// Construct with [`ConformalMetric::new`]; all evaluations return
/// [`Error::DomainViolation`] when the query point is outside the chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalMetric {
    spec: MetricSpec,
}

impl ConformalMetric {
    /// Validates the family parameters and builds the metric.
    ///
    /// Fails with [`Error::Config`] when a parameter is non-finite or, for
    /// the torus family, when `s ≤ 0`.
    pub fn new(spec: MetricSpec) -> Result<Self> {
        match spec {
            MetricSpec::Euclidean | MetricSpec::Mercator | MetricSpec::Catenoid => {}
            MetricSpec::Mu { mu } => {
                if !mu.is_finite() {
                    return Err(Error::Config(format!("mu must be finite, got {mu}")));
                }
            }
            MetricSpec::Alpha { alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::Config(format!("alpha must be finite, got {alpha}")));
                }
            }
            MetricSpec::Torus { s } => {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::Config(format!(
                        "torus parameter s must be positive and finite, got {s}"
                    )));
                }
            }
        }
        Ok(Self { spec })
    }

    /// The family description this metric was built from.
    pub fn spec(&self) -> MetricSpec {
        self.spec
    }

    /// Checks that `x` lies inside the coordinate domain of the chart.
    pub fn check_domain(&self, x: Vec2) -> Result<()> {
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::DomainViolation {
                x: x[0],
                y: x[1],
                reason: "coordinates must be finite".into(),
            });
        }
        match self.spec {
            MetricSpec::Mu { .. } => {
                if x[1] <= 0.0 {
                    return Err(Error::DomainViolation {
                        x: x[0],
                        y: x[1],
                        reason: "second coordinate must be positive (upper half-plane)".into(),
                    });
                }
            }
            MetricSpec::Alpha { alpha } if alpha > 0.0 => {
                if alpha * x.norm_squared() >= 1.0 {
                    return Err(Error::DomainViolation {
                        x: x[0],
                        y: x[1],
                        reason: format!(
                            "point must lie in the open disk of radius {}",
                            alpha.powf(-0.5)
                        ),
                    });
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Conformal factor `g(x)`.
    pub fn eval_g(&self, x: Vec2) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.g_unchecked(x))
    }

    /// `√g(x)`.
    pub fn sqrt_g(&self, x: Vec2) -> Result<f64> {
        Ok(self.eval_g(x)?.sqrt())
    }

    /// Gradient of `ln g` at `x`.
    pub fn grad_ln_g(&self, x: Vec2) -> Result<Vec2> {
        self.check_domain(x)?;
        Ok(self.grad_ln_g_unchecked(x))
    }

    /// Hessian of `ln g` at `x`.
    pub fn hess_ln_g(&self, x: Vec2) -> Result<Mat2> {
        self.check_domain(x)?;
        Ok(self.hess_ln_g_unchecked(x))
    }

    /// Evaluates `g`, `√g`, `∇ ln g` and `D² ln g` with a single domain check.
    pub fn jet(&self, x: Vec2) -> Result<MetricJet> {
        self.check_domain(x)?;
        let g = self.g_unchecked(x);
        Ok(MetricJet {
            g,
            sqrt_g: g.sqrt(),
            grad_ln_g: self.grad_ln_g_unchecked(x),
            hess_ln_g: self.hess_ln_g_unchecked(x),
        })
    }

    /// Gauss curvature `S(x) = −Δ ln g(x) / (2 g(x))` of the surface.
    pub fn sectional_curvature(&self, x: Vec2) -> Result<f64> {
        self.check_domain(x)?;
        Ok(match self.spec {
            MetricSpec::Euclidean => 0.0,
            // g = y^(−2μ):  Δ ln g = 2μ/y²,  S = −μ y^(2μ−2).
            MetricSpec::Mu { mu } => -mu * x[1].powf(2.0 * mu - 2.0),
            // Constant curvature −α, exactly.
            MetricSpec::Alpha { alpha } => -alpha,
            MetricSpec::Mercator => 1.0,
            // g = cosh² x₁:  Δ ln g = 2/cosh² x₁,  S = −cosh⁻⁴ x₁.
            MetricSpec::Catenoid => -x[0].cosh().powi(-4),
            // S = −(1 − √(s²+1) cos x₂) / s².
            MetricSpec::Torus { s } => {
                let c = (s * s + 1.0).sqrt();
                -(1.0 - c * x[1].cos()) / (s * s)
            }
        })
    }

    /// Isometric embedding into ℝ³ for families that chart a classical
    /// surface: the sphere (`alpha` with α < 0 and `mercator`), the
    /// catenoid, and the torus of revolution. Returns `None` for families
    /// without a distinguished embedding (`euclidean`, `mu`, `alpha` with
    /// α ≥ 0).
    pub fn embed(&self, x: Vec2) -> Result<Option<Vec3>> {
        self.check_domain(x)?;
        Ok(match self.spec {
            MetricSpec::Alpha { alpha } if alpha < 0.0 => {
                // Inverse stereographic projection onto the sphere of radius
                // R = (−α)^(−1/2): scale the unit-sphere formula.
                let r = (-alpha).powf(-0.5);
                let z = x * r.recip();
                let d = 1.0 + z.norm_squared();
                Some(Vector3::new(2.0 * z[0], 2.0 * z[1], z.norm_squared() - 1.0) * (r / d))
            }
            MetricSpec::Mercator => {
                let sech = x[0].cosh().recip();
                Some(Vector3::new(
                    sech * x[1].cos(),
                    sech * x[1].sin(),
                    x[0].tanh(),
                ))
            }
            MetricSpec::Catenoid => Some(Vector3::new(
                x[0].cosh() * x[1].cos(),
                x[0].cosh() * x[1].sin(),
                x[0],
            )),
            MetricSpec::Torus { s } => {
                let c = (s * s + 1.0).sqrt();
                let f = s / (c - x[1].cos());
                Some(Vector3::new(
                    f * s * (x[0] / s).cos(),
                    f * s * (x[0] / s).sin(),
                    f * x[1].sin(),
                ))
            }
            _ => None,
        })
    }

    fn g_unchecked(&self, x: Vec2) -> f64 {
        match self.spec {
            MetricSpec::Euclidean => 1.0,
            MetricSpec::Mu { mu } => x[1].powf(-2.0 * mu),
            MetricSpec::Alpha { alpha } => {
                let d = 1.0 - alpha * x.norm_squared();
                4.0 / (d * d)
            }
            MetricSpec::Mercator => x[0].cosh().powi(-2),
            MetricSpec::Catenoid => x[0].cosh().powi(2),
            MetricSpec::Torus { s } => {
                let c = (s * s + 1.0).sqrt();
                let d = c - x[1].cos();
                s * s / (d * d)
            }
        }
    }

    fn grad_ln_g_unchecked(&self, x: Vec2) -> Vec2 {
        match self.spec {
            MetricSpec::Euclidean => Vector2::zeros(),
            MetricSpec::Mu { mu } => Vector2::new(0.0, -2.0 * mu / x[1]),
            MetricSpec::Alpha { alpha } => x * (4.0 * alpha / (1.0 - alpha * x.norm_squared())),
            MetricSpec::Mercator => Vector2::new(-2.0 * x[0].tanh(), 0.0),
            MetricSpec::Catenoid => Vector2::new(2.0 * x[0].tanh(), 0.0),
            MetricSpec::Torus { s } => {
                let c = (s * s + 1.0).sqrt();
                Vector2::new(0.0, -2.0 * x[1].sin() / (c - x[1].cos()))
            }
        }
    }

    fn hess_ln_g_unchecked(&self, x: Vec2) -> Mat2 {
        match self.spec {
            MetricSpec::Euclidean => Matrix2::zeros(),
            MetricSpec::Mu { mu } => {
                Matrix2::new(0.0, 0.0, 0.0, 2.0 * mu / (x[1] * x[1]))
            }
            MetricSpec::Alpha { alpha } => {
                let d = 1.0 - alpha * x.norm_squared();
                let a = 4.0 * alpha / d;
                let b = 8.0 * alpha * alpha / (d * d);
                Matrix2::identity() * a + (x * x.transpose()) * b
            }
            MetricSpec::Mercator => {
                let s = -2.0 * x[0].cosh().powi(-2);
                Matrix2::new(s, 0.0, 0.0, 0.0)
            }
            MetricSpec::Catenoid => {
                let s = 2.0 * x[0].cosh().powi(-2);
                Matrix2::new(s, 0.0, 0.0, 0.0)
            }
            MetricSpec::Torus { s } => {
                let c = (s * s + 1.0).sqrt();
                let d = c - x[1].cos();
                let h = 2.0 * (1.0 - c * x[1].cos()) / (d * d);
                Matrix2::new(0.0, 0.0, 0.0, h)
            }
        }
    }
}
