//! Reference circle solutions and convergence-study utilities.
//!
//! On constant-curvature surfaces, circles evolve under the elastic flow
//! (with `λ = 0`) into circles again, and the evolution of centre and
//! radius reduces to ordinary differential equations. Two families are
//! implemented:
//!
//! * **Rotationally symmetric factor** (`alpha` family, centre pinned at
//!   the origin): the radius satisfies, in terms of `u = r⁴`,
//!
//!   ```text
//!       u'(t) = ⅛ (1 − α² u) (1 − 6 α √u + α² u),      u(0) = r(0)⁴.
//!   ```
//!
//!   For `α = 0` this integrates to the flat-plane closed form
//!   `r(t) = (r(0)⁴ + t/8)^¼`; for `α > 0` the radius approaches the
//!   stationary value with `α r² = 3 − 2√2`.
//!
//! * **Hyperbolic half-plane** (`mu` family with `μ = 1`, circle centred
//!   at height `a(t)` on the vertical axis): with `σ = a/r`,
//!
//!   ```text
//!       σ' = σ (1 − σ²/2)(σ² − 1),
//!       a(t) = a(0) · exp(−t + ½∫₀ᵗ σ²),      r = a/σ,
//!   ```
//!
//!   whose stationary state is `σ = √2` (the circle of hyperbolic
//!   geodesic curvature √2 · √2/2… — the well-known clamped circle).
//!
//! Both are integrated by the adaptive Runge–Kutta pair in
//! [`crate::ode`] at tolerance `1e-12`. [`ExactCircle`] exposes them as
//! resumable trajectories for per-step error monitoring, and
//! [`linf_error`] / [`eoc`] implement the error norm and observed-order
//! bookkeeping used by the convergence tables.

use crate::ode::{OdePath, OdeRhs, DEFAULT_TOL};
use crate::Vec2;

/// Radius ODE of the rotationally symmetric family, in `u = r⁴` form.
struct AlphaRhs {
    alpha: f64,
}

impl OdeRhs for AlphaRhs {
    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let a = self.alpha;
        let u = y[0];
        let r2 = u.max(0.0).sqrt();
        dy[0] = 0.125 * (1.0 - a * a * u) * (1.0 - 6.0 * a * r2 + a * a * u);
    }
}

/// Centre/radius system of the hyperbolic half-plane in `(σ, ∫σ²)` form.
struct HyperbolicRhs;

impl OdeRhs for HyperbolicRhs {
    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let s = y[0];
        dy[0] = s * (1.0 - 0.5 * s * s) * (s * s - 1.0);
        dy[1] = s * s;
    }
}

/// Radius at time `t` of the origin-centred circle with initial radius
/// `r0` in the `alpha` metric family.
///
/// Panics on invalid initial data (`r0 ≤ 0`, or the circle outside the
/// chart for `α > 0`).
pub fn exact_alpha(alpha: f64, r0: f64, t: f64) -> f64 {
    ExactCircle::alpha(alpha, r0).eval(t).1
}

/// Centre height and radius `(a(t), r(t))` of the circle with initial
/// centre `(0, a0)` and radius `r0` in the hyperbolic half-plane.
///
/// Panics unless `a0 > r0 > 0` (the circle must stay inside the chart).
pub fn exact_hyperbolic(a0: f64, r0: f64, t: f64) -> (f64, f64) {
    ExactCircle::hyperbolic(a0, r0).eval(t)
}

enum Inner {
    Alpha(OdePath<AlphaRhs>),
    Hyperbolic { a0: f64, path: OdePath<HyperbolicRhs> },
}

/// A reference circle evolution, queried at arbitrary times.
///
/// Evaluation at nondecreasing times is incremental (the integrator
/// resumes from the last state), which keeps per-step error monitoring
/// cheap.
pub struct ExactCircle {
    inner: Inner,
}

impl ExactCircle {
    /// Origin-centred circle of radius `r0` in the `alpha` family.
    pub fn alpha(alpha: f64, r0: f64) -> Self {
        assert!(r0 > 0.0, "initial radius must be positive");
        if alpha > 0.0 {
            assert!(
                alpha * r0 * r0 < 1.0,
                "initial circle must lie inside the chart disk"
            );
        }
        Self {
            inner: Inner::Alpha(OdePath::new(
                AlphaRhs { alpha },
                0.0,
                &[r0.powi(4)],
                DEFAULT_TOL,
            )),
        }
    }

    /// Circle of radius `r0` centred at `(0, a0)` in the hyperbolic
    /// half-plane (`mu` family, `μ = 1`).
    pub fn hyperbolic(a0: f64, r0: f64) -> Self {
        assert!(
            a0 > r0 && r0 > 0.0,
            "need a0 > r0 > 0 for a circle inside the half-plane"
        );
        Self {
            inner: Inner::Hyperbolic {
                a0,
                path: OdePath::new(HyperbolicRhs, 0.0, &[a0 / r0, 0.0], DEFAULT_TOL),
            },
        }
    }

    /// Centre height and radius `(a(t), r(t))`.
    pub fn eval(&mut self, t: f64) -> (f64, f64) {
        match &mut self.inner {
            Inner::Alpha(path) => {
                let u = path.eval(t)[0];
                (0.0, u.max(0.0).powf(0.25))
            }
            Inner::Hyperbolic { a0, path } => {
                let y = path.eval(t);
                let (sigma, integral) = (y[0], y[1]);
                let a = *a0 * (-t + 0.5 * integral).exp();
                (a, a / sigma)
            }
        }
    }
}

/// Initial polygon used by the convergence studies: a circle of radius
/// `r0` centred at `(0, a0)` with vertices placed at the angularly
/// perturbed parameters
///
/// ```text
///     X(q_j) = a0 e₂ + r0 (cos θ_j, sin θ_j),
///     θ_j = 2π q_j + 0.1 sin(2π q_j),      q_j = j/J.
/// ```
///
/// The perturbation makes the initial edge lengths non-uniform (ratio
/// ≈ 1.22) so that tangential-motion differences between schemes show up.
pub fn perturbed_circle(j_count: usize, r0: f64, a0: f64) -> Vec<Vec2> {
    use std::f64::consts::TAU;
    (0..j_count)
        .map(|j| {
            let q = j as f64 / j_count as f64;
            let theta = TAU * q + 0.1 * (TAU * q).sin();
            Vec2::new(r0 * theta.cos(), a0 + r0 * theta.sin())
        })
        .collect()
}

/// Regular polygon with `j_count` vertices inscribed in the circle of
/// radius `r` about `center`.
pub fn circle(j_count: usize, r: f64, center: Vec2) -> Vec<Vec2> {
    use std::f64::consts::TAU;
    (0..j_count)
        .map(|j| {
            let t = TAU * j as f64 / j_count as f64;
            center + Vec2::new(r * t.cos(), r * t.sin())
        })
        .collect()
}

/// Longest edge of a closed polygon (the `h` in the time-step rule
/// `Δt = 0.1 h²`).
pub fn max_edge_length(x: &[Vec2]) -> f64 {
    let n = x.len();
    (0..n)
        .map(|j| (x[j] - x[(j + n - 1) % n]).norm())
        .fold(0.0, f64::max)
}

/// Distance-to-reference error of a trajectory of snapshots:
///
/// ```text
///     max_{t_m > 0} max_j | |X_j(t_m) − a(t_m) e₂| − r(t_m) |,
/// ```
///
/// i.e. how far each vertex is from the reference circle at its time.
/// Snapshots at `t = 0` are skipped (the initial polygon lies on the
/// circle by construction and carries no scheme error).
pub fn linf_error(snapshots: &[(f64, Vec<Vec2>)], reference: &mut ExactCircle) -> f64 {
    let mut worst: f64 = 0.0;
    for (t, x) in snapshots {
        if *t == 0.0 {
            continue;
        }
        let (a, r) = reference.eval(*t);
        for p in x {
            let d = ((p - Vec2::new(0.0, a)).norm() - r).abs();
            worst = worst.max(d);
        }
    }
    worst
}

/// Experimental orders of convergence between consecutive refinement
/// levels: `eoc_k = ln(e_{k−1}/e_k) / ln(h_{k−1}/h_k)` for `k ≥ 1`.
pub fn eoc(hs: &[f64], errors: &[f64]) -> Vec<f64> {
    assert_eq!(hs.len(), errors.len());
    (1..hs.len())
        .map(|k| (errors[k - 1] / errors[k]).ln() / (hs[k - 1] / hs[k]).ln())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values frozen from an independent high-precision
    // integration (30-digit arithmetic, cross-checked with a second
    // integrator) of the ODEs in the module documentation.
    const ALPHA_NEG1_R15_T1: f64 = 1.147_589_335_790_971_1;
    const ALPHA_POS1_R01_T1: f64 = 0.403_626_810_734_230_74;
    const ALPHA_ZERO_R1_T1: f64 = 1.029_883_571_953_558_9;
    const HYP_A2_R1_T1: (f64, f64) = (2.411_176_655_638_766, 1.677_430_435_129_082_8);
    const HYP_A11_R1_T1: (f64, f64) = (0.791_513_546_393_861_22, 0.645_363_226_505_033_28);

    #[test]
    fn frozen_reference_values() {
        assert_relative_eq!(exact_alpha(-1.0, 1.5, 1.0), ALPHA_NEG1_R15_T1, max_relative = 1e-9);
        assert_relative_eq!(exact_alpha(1.0, 0.1, 1.0), ALPHA_POS1_R01_T1, max_relative = 1e-9);
        assert_relative_eq!(exact_alpha(0.0, 1.0, 1.0), ALPHA_ZERO_R1_T1, max_relative = 1e-9);
        let (a, r) = exact_hyperbolic(2.0, 1.0, 1.0);
        assert_relative_eq!(a, HYP_A2_R1_T1.0, max_relative = 1e-9);
        assert_relative_eq!(r, HYP_A2_R1_T1.1, max_relative = 1e-9);
        let (a, r) = exact_hyperbolic(1.1, 1.0, 1.0);
        assert_relative_eq!(a, HYP_A11_R1_T1.0, max_relative = 1e-9);
        assert_relative_eq!(r, HYP_A11_R1_T1.1, max_relative = 1e-9);
    }

    #[test]
    fn flat_plane_closed_form() {
        // α = 0 integrates in closed form: r(t) = (r0⁴ + t/8)^¼.
        for t in [0.1, 1.0, 7.5] {
            let exact = (1.0f64 + t / 8.0).powf(0.25);
            assert_relative_eq!(exact_alpha(0.0, 1.0, t), exact, max_relative = 1e-11);
        }
    }

    #[test]
    fn stationary_circles_stay_put() {
        // Hyperbolic half-plane: σ = a/r = √2 is stationary.
        let (a, r) = exact_hyperbolic(2.0f64.sqrt(), 1.0, 10.0);
        assert_relative_eq!(a, 2.0f64.sqrt(), max_relative = 1e-8);
        assert_relative_eq!(r, 1.0, max_relative = 1e-8);
        // Hyperbolic disk: α r² = 3 − 2√2, i.e. r = √2 − 1 for α = 1.
        let rs = 2.0f64.sqrt() - 1.0;
        assert_relative_eq!(exact_alpha(1.0, rs, 5.0), rs, max_relative = 1e-8);
    }

    #[test]
    fn quoted_rounded_values_match() {
        assert!((exact_alpha(-1.0, 1.5, 1.0) - 1.148).abs() < 5e-4);
        assert!((exact_alpha(1.0, 0.1, 1.0) - 0.404).abs() < 5e-4);
        let (a, r) = exact_hyperbolic(2.0, 1.0, 1.0);
        assert!((a - 2.411).abs() < 5e-4);
        assert!((r - 1.677).abs() < 5e-4);
        let (a, r) = exact_hyperbolic(1.1, 1.0, 1.0);
        assert!((a - 0.792).abs() < 5e-4);
        assert!((r - 0.645).abs() < 5e-4);
    }

    #[test]
    fn fixed_step_rk4_recomputes_the_alpha_radius() {
        // Independent in-repo integrator: classical RK4 on u' = f(u).
        let alpha = -1.0f64;
        let f = |u: f64| {
            0.125 * (1.0 - alpha * alpha * u) * (1.0 - 6.0 * alpha * u.sqrt() + alpha * alpha * u)
        };
        let mut u = 1.5f64.powi(4);
        let h = 1e-5;
        for _ in 0..100_000 {
            let k1 = f(u);
            let k2 = f(u + 0.5 * h * k1);
            let k3 = f(u + 0.5 * h * k2);
            let k4 = f(u + h * k3);
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert_relative_eq!(u.powf(0.25), ALPHA_NEG1_R15_T1, max_relative = 1e-10);
    }

    #[test]
    fn perturbed_circle_geometry() {
        let x = perturbed_circle(32, 1.0, 0.0);
        assert_eq!(x.len(), 32);
        // Vertex 0 sits at angle zero: (r0, a0).
        assert_relative_eq!(x[0][0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(x[0][1], 0.0, epsilon = 1e-15);
        // All vertices lie exactly on the circle.
        for p in &x {
            assert_relative_eq!(p.norm(), 1.0, max_relative = 1e-14);
        }
        // Frozen maximal edge lengths (these feed the Δt = 0.1 h² rule).
        assert_relative_eq!(max_edge_length(&x), 2.154_397_373_3e-1, max_relative = 1e-9);
        let x64 = perturbed_circle(64, 1.0, 0.0);
        assert_relative_eq!(max_edge_length(&x64), 1.079_240_383_8e-1, max_relative = 1e-9);
        // Scaling the radius scales the edges exactly.
        let xs = perturbed_circle(32, 1.5, 0.3);
        assert_relative_eq!(
            max_edge_length(&xs),
            1.5 * max_edge_length(&x),
            max_relative = 1e-13
        );
    }

    #[test]
    fn error_norm_vanishes_on_the_reference_itself() {
        let mut reference = ExactCircle::hyperbolic(2.0, 1.0);
        let mut snapshots = Vec::new();
        for i in 0..=5 {
            let t = 0.2 * i as f64;
            let (a, r) = reference.eval(t);
            snapshots.push((t, circle(48, r, Vec2::new(0.0, a))));
        }
        let mut fresh = ExactCircle::hyperbolic(2.0, 1.0);
        assert!(linf_error(&snapshots, &mut fresh) < 1e-12);

        // A radial offset of 1e-3 in one snapshot is picked up exactly.
        let (t, a, r) = {
            let (a, r) = fresh.eval(0.4);
            (0.4, a, r)
        };
        snapshots.push((t, circle(48, r + 1e-3, Vec2::new(0.0, a))));
        let mut fresh = ExactCircle::hyperbolic(2.0, 1.0);
        assert_relative_eq!(linf_error(&snapshots, &mut fresh), 1e-3, max_relative = 1e-9);
    }

    #[test]
    fn observed_orders() {
        let hs = [0.2, 0.1, 0.05];
        let errors = [4.0e-2, 1.0e-2, 2.5e-3];
        let orders = eoc(&hs, &errors);
        assert_eq!(orders.len(), 2);
        assert_relative_eq!(orders[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(orders[1], 2.0, max_relative = 1e-12);
    }
}
