//! Adaptive Runge–Kutta integration for the reference-solution ODEs.
//!
//! The reference radii used in the convergence studies solve small
//! nonlinear ODE systems (dimension one or two). They are integrated here
//! with the Dormand–Prince embedded Runge–Kutta 5(4) pair and adaptive
//! step-size control, tight enough (`tol = 1e-12`) that the reference
//! values are exact to well below any discretization error they are
//! compared against.
//!
//! [`OdePath`] wraps the integrator as a *resumable trajectory*: queries at
//! increasing times continue from the last reached state instead of
//! re-integrating from scratch, which is what the error monitors need when
//! they sample the reference solution at every time step.

/// Right-hand side of an autonomous-in-form ODE system
/// `y' = f(t, y)`, writing the derivative into `dy`.
pub trait OdeRhs {
    /// Evaluates `dy = f(t, y)`.
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeRhs for F {
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        self(t, y, dy)
    }
}

/// Absolute and relative tolerance used for the reference solutions.
pub const DEFAULT_TOL: f64 = 1e-12;

// Dormand–Prince 5(4) coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
/// Fifth-order weights (the last stage slot is zero; FSAL pair).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// Fourth-order (embedded) weights.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `(t0, y0)` to `t1 ≥ t0` with adaptive
/// Dormand–Prince 5(4); `tol` acts as both absolute and relative
/// tolerance. Returns the state at `t1`.
pub fn integrate<F: OdeRhs>(f: &F, t0: f64, y0: &[f64], t1: f64, tol: f64) -> Vec<f64> {
    assert!(t1 >= t0, "integration must move forward in time");
    let dim = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    if t1 == t0 {
        return y;
    }
    let mut h = ((t1 - t0) / 100.0).min(0.1).max(1e-8);
    let mut k = vec![vec![0.0; dim]; 7];
    let mut stage = vec![0.0; dim];
    f.eval(t, &y, &mut k[0]);
    let mut steps = 0usize;
    while t < t1 {
        if t + h > t1 {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s - 1][j] * kj[i];
                }
                stage[i] = y[i] + h * acc;
            }
            let ts = t + C[s - 1] * h;
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            f.eval(ts, &stage, &mut tail[0]);
        }
        // Fifth-order solution and embedded error estimate.
        let mut ynew = vec![0.0; dim];
        let mut err: f64 = 0.0;
        for i in 0..dim {
            let mut acc5 = 0.0;
            let mut acc4 = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc5 += B5[j] * kj[i];
                acc4 += B4[j] * kj[i];
            }
            ynew[i] = y[i] + h * acc5;
            let scale = tol + tol * y[i].abs().max(ynew[i].abs());
            err = err.max((h * (acc5 - acc4)).abs() / scale);
        }
        if err <= 1.0 {
            t += h;
            y = ynew;
            // FSAL: last stage is the derivative at the accepted point.
            let k6 = k[6].clone();
            k[0] = k6;
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        steps += 1;
        assert!(steps < 10_000_000, "step-size control failed to converge");
    }
    y
}

/// Resumable ODE trajectory: evaluates the solution at a sequence of
/// query times, continuing from the last reached state when queries are
/// nondecreasing and restarting from the initial data otherwise.
pub struct OdePath<F: OdeRhs> {
    f: F,
    tol: f64,
    t0: f64,
    y0: Vec<f64>,
    t: f64,
    y: Vec<f64>,
}

impl<F: OdeRhs> OdePath<F> {
    /// Starts a trajectory at `(t0, y0)`.
    pub fn new(f: F, t0: f64, y0: &[f64], tol: f64) -> Self {
        Self {
            f,
            tol,
            t0,
            y0: y0.to_vec(),
            t: t0,
            y: y0.to_vec(),
        }
    }

    /// State at time `t ≥ t0`.
    pub fn eval(&mut self, t: f64) -> &[f64] {
        if t < self.t {
            // Restart for backwards queries; exact same arithmetic as a
            // fresh forward integration, so results stay deterministic.
            self.t = self.t0;
            self.y = self.y0.clone();
        }
        if t > self.t {
            self.y = integrate(&self.f, self.t, &self.y, t, self.tol);
            self.t = t;
        }
        &self.y
    }
}
