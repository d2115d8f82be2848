//! Fully discrete elastic-flow schemes for curves in conformal metrics.
//!
//! The flow minimizes the bending energy
//!
//! ```text
//!     W(Γ) = ½ ∮ (κ_g² + 2λ) ds_g
//! ```
//!
//! of a closed curve Γ, where `κ_g` is the geodesic curvature and `ds_g`
//! the arclength of the surface metric `g·(dx² + dy²)`; the evolution is
//! the `L²(ds_g)`-gradient flow. Each time step solves one linear system
//! whose unknowns are the new vertex positions together with discrete
//! curvature variables; all geometric coefficients are frozen at the old
//! polygon, so the step is unconditionally linear.
//!
//! Two discretizations are provided, differing in which curvature is the
//! unknown and how integrals are approximated:
//!
//! * [`Scheme::P`] keeps the *flat-chart* curvature `κ` and the vector
//!   variable `Y` with mass-lumped (vertex-sampled) products. Its side
//!   equation forces the second difference of the new positions to stay
//!   parallel to the old vertex normal at every vertex, which drives the
//!   mesh towards equidistribution (asymptotically equal edge lengths
//!   wherever the curve is not straight).
//! * [`Scheme::Qh`] and [`Scheme::Qstar`] keep the *geodesic* curvature
//!   `κ_g` and the g-weighted vector variable `Y_g`, with all products
//!   evaluated by a quadrature rule on each element — the endpoint rule
//!   for `Qh` (which lets `κ_g` be eliminated, shrinking the system from
//!   5 to 4 unknowns per vertex) and a three-point Gauss rule for
//!   `Qstar`. These schemes have no built-in redistribution mechanism and
//!   their mesh ratio can drift or blow up.
//!
//! Both schemes reproduce second-order convergence of the curve position;
//! discrete energies are observed to decay monotonically (checked as a
//! property, not proved). The per-state energy is evaluated with the
//! *pre-step* frame, matching where the decay structure lives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{
    check_assumptions, frame, next, perp, prev, Frame, QuadratureRule,
};
use crate::metric::{ConformalMetric, MetricJet};
use crate::solver::CyclicBlockTridiag;
use crate::Vec2;

/// The available time-stepping schemes. Serialized names (`"P"`, `"Qh"`,
/// `"Qstar"`) are part of the configuration format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Mass-lumped scheme with flat-chart curvature unknown; strong
    /// tangential mesh redistribution.
    P,
    /// Quadrature scheme with geodesic-curvature unknown, endpoint
    /// (vertex) rule; reduces to a 4-unknowns-per-vertex system.
    Qh,
    /// Quadrature scheme with geodesic-curvature unknown, three-point
    /// Gauss rule (exact to polynomial degree five).
    Qstar,
}

impl Scheme {
    /// Quadrature rule backing the scheme's element integrals.
    pub fn rule(&self) -> QuadratureRule {
        match self {
            Scheme::P | Scheme::Qh => QuadratureRule::vertex(),
            Scheme::Qstar => QuadratureRule::gauss3(),
        }
    }

    /// True for the schemes whose curvature unknown is the geodesic one.
    pub fn is_quadrature(&self) -> bool {
        matches!(self, Scheme::Qh | Scheme::Qstar)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::P => write!(f, "P"),
            Scheme::Qh => write!(f, "Qh"),
            Scheme::Qstar => write!(f, "Qstar"),
        }
    }
}

/// Complete discrete state of one flow: mesh, curvature variables, and
/// bookkeeping. Produced by [`SchemeState::init`] and advanced in place
/// by [`SchemeState::step`].
#[derive(Debug, Clone)]
pub struct SchemeState {
    /// Which scheme advances this state.
    pub kind: Scheme,
    /// Surface metric.
    pub metric: ConformalMetric,
    /// Energy offset λ (adds `2λ` per unit g-length to the density).
    pub lambda: f64,
    /// Flow time of the current state.
    pub t: f64,
    /// Number of completed steps.
    pub step: usize,
    /// Vertex positions of the current polygon.
    pub x: Vec<Vec2>,
    /// Scalar curvature unknown at the vertices: flat-chart curvature `κ`
    /// for [`Scheme::P`], geodesic curvature `κ_g` for the quadrature
    /// schemes.
    pub kappa: Vec<f64>,
    /// Vector curvature variable at the vertices: `Y` for [`Scheme::P`],
    /// the g-weighted `Y_g` for the quadrature schemes.
    pub y: Vec<Vec2>,
    /// Discrete bending energy of this state (evaluated with the frame of
    /// the polygon that produced it: the initial polygon for step 0, the
    /// pre-step polygon afterwards).
    pub energy: f64,
}

/// Outcome of a time-stepping loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    /// Reached the requested final time.
    Completed,
    /// A step failed; the state before the failed step is preserved.
    Aborted {
        /// Index of the step that failed (1-based count of attempted steps).
        step: usize,
        /// Human-readable failure cause.
        reason: String,
    },
}

impl RunStatus {
    /// True when the loop reached the requested time.
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

/// One diagnostics record per recorded state.
#[derive(Debug, Clone, Copy)]
pub struct DiagRow {
    /// Step index (0 = initial state).
    pub step: usize,
    /// Flow time.
    pub t: f64,
    /// Discrete bending energy.
    pub energy: f64,
    /// Longest/shortest edge ratio.
    pub ratio: f64,
    /// Shortest edge length.
    pub min_edge: f64,
    /// Longest edge length.
    pub max_edge: f64,
}

/// Full record of an [`evolve`] run: per-step diagnostics, periodic
/// position snapshots, and the final status.
#[derive(Debug, Clone)]
pub struct RunRecord {
    /// One row per recorded state, starting with the initial state.
    pub rows: Vec<DiagRow>,
    /// `(step, t, positions)` snapshots.
    pub snapshots: Vec<(usize, f64, Vec<Vec2>)>,
    /// Completion or abort.
    pub status: RunStatus,
}

/// Edge-length statistics of a polygon (no degeneracy requirements).
fn edge_stats(x: &[Vec2]) -> (f64, f64) {
    let n = x.len();
    let mut min = f64::MAX;
    let mut max: f64 = 0.0;
    for j in 0..n {
        let len = (x[j] - x[prev(j, n)]).norm();
        min = min.min(len);
        max = max.max(len);
    }
    (min, max)
}

/// Diagnostics row for a state.
pub fn diag_row(state: &SchemeState) -> DiagRow {
    let (min_edge, max_edge) = edge_stats(&state.x);
    DiagRow {
        step: state.step,
        t: state.t,
        energy: state.energy,
        ratio: max_edge / min_edge,
        min_edge,
        max_edge,
    }
}

/// Discrete curvature vector of a polygon: the lumped second difference
/// `κ⃗_j = (τ_{j+1} − τ_j) / w_j` of unit tangents.
pub fn curvature_vector_nodes(fr: &Frame) -> Vec<Vec2> {
    let n = fr.len();
    (0..n)
        .map(|j| (fr.tangent[next(j, n)] - fr.tangent[j]) / fr.weight[j])
        .collect()
}

/// Nodal geodesic curvature extracted from a polygon: project the
/// curvature vector on the unit vertex normal and correct by the metric,
/// `κ_g = g^(−1/2) (κ⃗·ω̂ − ½ ω̂·∇ ln g)`.
pub fn geodesic_curvature_nodes(metric: &ConformalMetric, x: &[Vec2]) -> Result<Vec<f64>> {
    let fr = frame(x)?;
    let kv = curvature_vector_nodes(&fr);
    let n = x.len();
    (0..n)
        .map(|j| {
            let jet = metric.jet(x[j])?;
            let omh = fr.unit_vertex_normal[j];
            Ok((kv[j].dot(&omh) - 0.5 * omh.dot(&jet.grad_ln_g)) / jet.sqrt_g)
        })
        .collect()
}

impl SchemeState {
    /// Builds the initial state for a scheme from a starting polygon:
    /// recovers the discrete curvature variables from the geometry and
    /// evaluates the initial energy.
    pub fn init(
        kind: Scheme,
        metric: ConformalMetric,
        lambda: f64,
        x0: &[Vec2],
    ) -> Result<Self> {
        let rule = kind.rule();
        let report = check_assumptions(x0, &metric, &rule)?;
        if !report.vertex_separation || !report.normal_span {
            return Err(Error::AssumptionViolation(format!(
                "initial polygon rejected: {report:?}"
            )));
        }
        let fr = frame(x0)?;
        let n = x0.len();
        let jets: Vec<MetricJet> = x0.iter().map(|p| metric.jet(*p)).collect::<Result<_>>()?;
        let kv = curvature_vector_nodes(&fr);
        let mut kappa_flat = vec![0.0; n];
        let mut kappa_g = vec![0.0; n];
        for j in 0..n {
            let omh = fr.unit_vertex_normal[j];
            kappa_flat[j] = kv[j].dot(&omh);
            kappa_g[j] = (kappa_flat[j] - 0.5 * omh.dot(&jets[j].grad_ln_g)) / jets[j].sqrt_g;
        }
        let (kappa, y): (Vec<f64>, Vec<Vec2>) = if kind.is_quadrature() {
            let y = (0..n)
                .map(|j| {
                    fr.vertex_normal[j]
                        * (kappa_g[j] / (jets[j].sqrt_g * fr.vertex_normal[j].norm_squared()))
                })
                .collect();
            (kappa_g.clone(), y)
        } else {
            let y = (0..n)
                .map(|j| fr.vertex_normal[j] * (kappa_g[j] / fr.vertex_normal[j].norm_squared()))
                .collect();
            (kappa_flat, y)
        };
        let energy = match kind {
            Scheme::P => lumped_energy(&fr, &jets, &y, lambda),
            Scheme::Qh | Scheme::Qstar => {
                let sqg = sample_sqrt_g(&metric, x0, &rule)?;
                quadrature_energy(&fr, &rule, &sqg, &kappa_g, lambda)
            }
        };
        Ok(Self {
            kind,
            metric,
            lambda,
            t: 0.0,
            step: 0,
            x: x0.to_vec(),
            kappa,
            y,
            energy,
        })
    }

    /// Advances the state by one implicit step of size `dt`.
    ///
    /// Fails (leaving the state untouched) when the polygon violates the
    /// scheme's structural assumptions, when a vertex leaves the metric
    /// domain, or when the linear system cannot be solved reliably.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        assert!(dt > 0.0, "step size must be positive");
        match self.kind {
            Scheme::P => step_p(self, dt),
            Scheme::Qh => step_q_vertex(self, dt),
            Scheme::Qstar => {
                let rule = QuadratureRule::gauss3();
                step_q_general(self, dt, &rule)
            }
        }
    }
}

/// Lumped energy `½ Σ_j w_j √g_j ((Y_j·ω_j)² + 2λ)` with the frame that
/// produced `y`.
fn lumped_energy(fr: &Frame, jets: &[MetricJet], y: &[Vec2], lambda: f64) -> f64 {
    let n = fr.len();
    (0..n)
        .map(|j| {
            let yo = y[j].dot(&fr.vertex_normal[j]);
            0.5 * fr.weight[j] * jets[j].sqrt_g * (yo * yo + 2.0 * lambda)
        })
        .sum()
}

/// `√g` sampled at every quadrature node of every element (element-major).
fn sample_sqrt_g(
    metric: &ConformalMetric,
    x: &[Vec2],
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    let n = x.len();
    let mut out = Vec::with_capacity(n * rule.len());
    for e in 0..n {
        let (l, r) = (x[prev(e, n)], x[e]);
        for k in 0..rule.len() {
            out.push(metric.sqrt_g(rule.lerp_vec(k, l, r))?);
        }
    }
    Ok(out)
}

/// Quadrature energy `½ Σ_e h_e Σ_k w_k √g_k ((κ_g(ξ_k))² + 2λ)` with
/// the interpolated curvature and pre-computed `√g` samples.
fn quadrature_energy(
    fr: &Frame,
    rule: &QuadratureRule,
    sqg_samples: &[f64],
    kappa_g: &[f64],
    lambda: f64,
) -> f64 {
    let n = fr.len();
    let kq = rule.len();
    let mut w = 0.0;
    for e in 0..n {
        let (kl, kr) = (kappa_g[prev(e, n)], kappa_g[e]);
        for k in 0..kq {
            let kap = rule.lerp(k, kl, kr);
            w += 0.5
                * fr.edge_len[e]
                * rule.weights[k]
                * sqg_samples[e * kq + k]
                * (kap * kap + 2.0 * lambda);
        }
    }
    w
}

/// Adds `v` at block entry `(r, c)` of the block whose row vertex is `rv`
/// and column vertex is `cv` (must be `rv` or a cyclic neighbour).
#[inline]
fn add_at(mat: &mut CyclicBlockTridiag, n: usize, rv: usize, cv: usize, r: usize, c: usize, v: f64) {
    if cv == rv {
        mat.add_diag(rv, r, c, v);
    } else if cv == next(rv, n) {
        mat.add_upper(rv, r, c, v);
    } else {
        debug_assert_eq!(cv, prev(rv, n));
        mat.add_lower(rv, r, c, v);
    }
}

/// Assembled linear system of one step together with the pre-step
/// geometry it was built from.
struct AssembledSystem {
    fr: Frame,
    jets: Vec<MetricJet>,
    mat: CyclicBlockTridiag,
    rhs: Vec<f64>,
}

/// Assembles the mass-lumped scheme's linear system (4 unknowns per
/// vertex: new position and new `Y`).
fn assemble_p(state: &SchemeState, dt: f64) -> Result<AssembledSystem> {
    let x = &state.x;
    let n = x.len();
    let metric = &state.metric;
    let report = check_assumptions(x, metric, &QuadratureRule::vertex())?;
    if !report.vertex_separation || !report.normal_span {
        return Err(Error::AssumptionViolation(format!(
            "polygon rejected before assembly: {report:?}"
        )));
    }
    let fr = frame(x)?;
    let jets: Vec<MetricJet> = x.iter().map(|p| metric.jet(*p)).collect::<Result<_>>()?;
    let lambda = state.lambda;

    // Geodesic curvature derived from the flat-chart unknown.
    let kg: Vec<f64> = (0..n)
        .map(|j| {
            (state.kappa[j] - 0.5 * fr.unit_vertex_normal[j].dot(&jets[j].grad_ln_g))
                / jets[j].sqrt_g
        })
        .collect();

    let mut mat = CyclicBlockTridiag::zeros(n, 4);
    let mut rhs = vec![0.0; 4 * n];
    for i in 0..n {
        let (ip, iq) = (prev(i, n), next(i, n));
        let (hb, ha) = (fr.edge_len[i], fr.edge_len[iq]);
        let (tb, ta) = (fr.tangent[i], fr.tangent[iq]);
        let w = fr.weight[i];
        let om = fr.vertex_normal[i];
        let omh = fr.unit_vertex_normal[i];
        let jet = &jets[i];

        // --- momentum rows (new position vs new Y) ---
        let mvel = w * jet.g * jet.sqrt_g / dt;
        for r in 0..2 {
            for c in 0..2 {
                mat.add_diag(i, r, c, mvel * om[r] * om[c]);
            }
        }
        let kd = 1.0 / hb + 1.0 / ha;
        for r in 0..2 {
            mat.add_diag(i, r, 2 + r, -kd);
            mat.add_lower(i, r, 2 + r, 1.0 / hb);
            mat.add_upper(i, r, 2 + r, 1.0 / ha);
        }
        let mut ra = om * (mvel * om.dot(&x[i]));
        // Old tangential stiffness, moved to the right-hand side.
        let yb = state.y[i] - state.y[ip];
        let ya = state.y[i] - state.y[iq];
        ra -= tb * (yb.dot(&tb) / hb) + ta * (ya.dot(&ta) / ha);
        // Energy-density load along the tangents.
        let dens = |j: usize| jets[j].sqrt_g * (kg[j] * kg[j] + 2.0 * lambda);
        ra -= (tb * (dens(ip) + dens(i)) - ta * (dens(i) + dens(iq))) * 0.25;
        // Metric-gradient load.
        let bden = jet.sqrt_g * (kg[i] * kg[i] - 2.0 * lambda);
        ra += jet.grad_ln_g * (0.25 * w * bden);
        // Metric-Hessian load.
        ra += (jet.hess_ln_g * omh) * (0.5 * w * kg[i]);
        // Rotated-Y load.
        let c_of = |j: usize| perp(state.y[j]) * state.kappa[j];
        ra += (c_of(ip) - c_of(iq)) * 0.5;
        // Perp-gradient load.
        let d_of = |j: usize| {
            kg[j] / fr.vertex_normal[j].norm()
                * jets[j].grad_ln_g.dot(&perp(fr.unit_vertex_normal[j]))
        };
        ra -= (fr.unit_vertex_normal[ip] * d_of(ip) - fr.unit_vertex_normal[iq] * d_of(iq)) * 0.25;
        rhs[4 * i] = ra[0];
        rhs[4 * i + 1] = ra[1];

        // --- side-condition rows (new Y vs new position) ---
        for r in 0..2 {
            mat.add_diag(i, 2 + r, r, kd);
            mat.add_lower(i, 2 + r, r, -1.0 / hb);
            mat.add_upper(i, 2 + r, r, -1.0 / ha);
        }
        let myy = w * jet.sqrt_g;
        for r in 0..2 {
            for c in 0..2 {
                mat.add_diag(i, 2 + r, 2 + c, myy * om[r] * om[c]);
            }
        }
        let rb = om * (-0.5 * w * omh.dot(&jet.grad_ln_g));
        rhs[4 * i + 2] = rb[0];
        rhs[4 * i + 3] = rb[1];
    }
    Ok(AssembledSystem { fr, jets, mat, rhs })
}

/// One step of the mass-lumped scheme.
fn step_p(state: &mut SchemeState, dt: f64) -> Result<()> {
    let n = state.x.len();
    let AssembledSystem { fr, jets, mat, rhs } = assemble_p(state, dt)?;
    let sol = mat.solve(&rhs)?;
    let xp: Vec<Vec2> = (0..n).map(|i| Vec2::new(sol[4 * i], sol[4 * i + 1])).collect();
    let yp: Vec<Vec2> = (0..n)
        .map(|i| Vec2::new(sol[4 * i + 2], sol[4 * i + 3]))
        .collect();
    for p in &xp {
        state.metric.check_domain(*p)?;
    }
    // Curvature update and energy, both with the pre-step frame.
    let mut kappa_new = vec![0.0; n];
    for j in 0..n {
        let yo = yp[j].dot(&fr.vertex_normal[j]);
        kappa_new[j] =
            jets[j].sqrt_g * yo + 0.5 * fr.unit_vertex_normal[j].dot(&jets[j].grad_ln_g);
    }
    state.energy = lumped_energy(&fr, &jets, &yp, state.lambda);
    state.x = xp;
    state.y = yp;
    state.kappa = kappa_new;
    state.t += dt;
    state.step += 1;
    Ok(())
}

/// Per-node context shared by the two quadrature-scheme assemblies.
struct QNode {
    /// Shape function values `(φ_p, φ_q)` at the node.
    phi: [f64; 2],
    /// Quadrature weight.
    wk: f64,
    /// Metric data at the interpolated position.
    jet: MetricJet,
    /// Interpolated old curvature.
    kap: f64,
    /// Interpolated old `Y_g`.
    y: Vec2,
}

/// Explicit right-hand-side loads of the quadrature scheme's momentum
/// equation at one node; returns the contributions to the test functions
/// at the element's two vertices `[p, q]`.
fn q_momentum_loads(
    node: &QNode,
    he: f64,
    te: Vec2,
    ne: Vec2,
    dy_m: Vec2,
    lambda: f64,
) -> [Vec2; 2] {
    let QNode { phi, wk, jet, kap, y } = node;
    let a_k = kap * kap + 2.0 * lambda - y.dot(&jet.grad_ln_g);
    let c_k = jet.sqrt_g * kap * y.dot(&ne) + 0.5 * dy_m.dot(&te) / he;
    let mut out = [Vec2::zeros(), Vec2::zeros()];
    for (ri, load) in out.iter_mut().enumerate() {
        let sign = if ri == 0 { -1.0 } else { 1.0 };
        // Energy-density load paired with the full test derivative.
        *load += (te * (sign / he) + jet.grad_ln_g * (0.5 * phi[ri]))
            * (-0.5 * wk * he * jet.sqrt_g * a_k);
        // Metric-Hessian load.
        *load += (jet.hess_ln_g * y) * (0.5 * wk * he * jet.sqrt_g * phi[ri]);
        // Metric-gradient load.
        *load += jet.grad_ln_g * (wk * he * jet.sqrt_g * c_k * phi[ri]);
        // Rotated-Y load.
        *load += perp(*y) * (wk * jet.g * kap * sign);
    }
    out
}

/// Builds the per-node contexts of one element.
fn q_nodes(state: &SchemeState, rule: &QuadratureRule, e: usize) -> Result<Vec<QNode>> {
    let n = state.x.len();
    let (p, q) = (prev(e, n), e);
    (0..rule.len())
        .map(|k| {
            let xk = rule.lerp_vec(k, state.x[p], state.x[q]);
            Ok(QNode {
                phi: [1.0 - rule.nodes[k], rule.nodes[k]],
                wk: rule.weights[k],
                jet: state.metric.jet(xk)?,
                kap: rule.lerp(k, state.kappa[p], state.kappa[q]),
                y: rule.lerp_vec(k, state.y[p], state.y[q]),
            })
        })
        .collect()
}

/// Assembles the quadrature scheme's general linear system (5 unknowns
/// per vertex: position, `Y_g`, and `κ_g`), valid for any rule. Also
/// returns the `√g` samples at the quadrature nodes for the energy.
fn assemble_q_general(
    state: &SchemeState,
    dt: f64,
    rule: &QuadratureRule,
) -> Result<(AssembledSystem, Vec<f64>)> {
    let n = state.x.len();
    let metric = state.metric;
    let report = check_assumptions(&state.x, &metric, rule)?;
    if !report.all_hold() {
        return Err(Error::AssumptionViolation(format!(
            "polygon rejected before assembly: {report:?}"
        )));
    }
    let fr = frame(&state.x)?;
    let lambda = state.lambda;
    let kq = rule.len();

    let mut mat = CyclicBlockTridiag::zeros(n, 5);
    let mut rhs = vec![0.0; 5 * n];
    let mut sqg_samples = vec![0.0; n * kq];

    for e in 0..n {
        let (p, q) = (prev(e, n), e);
        let verts = [p, q];
        let he = fr.edge_len[e];
        let te = fr.tangent[e];
        let ne = fr.normal[e];
        let dy_m = state.y[q] - state.y[p];
        let nodes = q_nodes(state, rule, e)?;
        let mut s_e = 0.0;
        for (k, node) in nodes.iter().enumerate() {
            sqg_samples[e * kq + k] = node.jet.sqrt_g;
            s_e += node.wk * node.jet.sqrt_g;
            let om_k = rule.lerp_vec(k, fr.vertex_normal[p], fr.vertex_normal[q]);
            let x_k = rule.lerp_vec(k, state.x[p], state.x[q]);

            // Momentum rows: implicit velocity blocks and their rhs.
            let cvel = node.wk * he * node.jet.g * node.jet.sqrt_g / dt;
            for (ri, &rv) in verts.iter().enumerate() {
                for (ci, &cv) in verts.iter().enumerate() {
                    let coef = cvel * node.phi[ri] * node.phi[ci];
                    for r in 0..2 {
                        for c in 0..2 {
                            add_at(&mut mat, n, rv, cv, r, c, coef * om_k[r] * om_k[c]);
                        }
                    }
                }
                let rv_load = om_k * (cvel * node.phi[ri] * om_k.dot(&x_k));
                rhs[5 * rv] += rv_load[0];
                rhs[5 * rv + 1] += rv_load[1];
            }
            // Momentum rows: explicit loads.
            let loads = q_momentum_loads(node, he, te, ne, dy_m, lambda);
            for (ri, &rv) in verts.iter().enumerate() {
                rhs[5 * rv] += loads[ri][0];
                rhs[5 * rv + 1] += loads[ri][1];
            }
            // Curvature-definition rows (scalar row 4):
            // Σ w_k h_e √g φ_r (κ⁺ − √g Y⁺·ν) = 0.
            for (ri, &rv) in verts.iter().enumerate() {
                for (ci, &cv) in verts.iter().enumerate() {
                    let cc = node.wk * he * node.jet.sqrt_g * node.phi[ri] * node.phi[ci];
                    add_at(&mut mat, n, rv, cv, 4, 4, cc);
                    for c in 0..2 {
                        add_at(&mut mat, n, rv, cv, 4, 2 + c, -cc * node.jet.sqrt_g * ne[c]);
                    }
                }
            }
            // Position-curvature rows (rows 2–3): κ⁺ column and rhs.
            for (ri, &rv) in verts.iter().enumerate() {
                for (ci, &cv) in verts.iter().enumerate() {
                    let cc = node.wk * he * node.jet.g * node.phi[ri] * node.phi[ci];
                    for r in 0..2 {
                        add_at(&mut mat, n, rv, cv, 2 + r, 4, cc * ne[r]);
                    }
                }
                let gl = node.jet.grad_ln_g * (0.5 * node.wk * he * node.jet.sqrt_g * node.phi[ri]);
                rhs[5 * rv + 2] -= gl[0];
                rhs[5 * rv + 3] -= gl[1];
            }
        }
        // Metric-weighted stiffness: edge weight s = s_e / h_e.
        let s = s_e / he;
        for r in 0..2 {
            // Momentum rows, acting on Y⁺ with a minus sign.
            mat.add_diag(q, r, 2 + r, -s);
            mat.add_lower(q, r, 2 + r, s);
            mat.add_diag(p, r, 2 + r, -s);
            mat.add_upper(p, r, 2 + r, s);
            // Position rows, acting on X⁺ with a plus sign.
            mat.add_diag(q, 2 + r, r, s);
            mat.add_lower(q, 2 + r, r, -s);
            mat.add_diag(p, 2 + r, r, s);
            mat.add_upper(p, 2 + r, r, -s);
        }
        // Old tangential stiffness moved to the momentum rhs.
        let tload = te * (s * dy_m.dot(&te));
        rhs[5 * q] -= tload[0];
        rhs[5 * q + 1] -= tload[1];
        rhs[5 * p] += tload[0];
        rhs[5 * p + 1] += tload[1];
    }
    Ok((AssembledSystem { fr, jets: Vec::new(), mat, rhs }, sqg_samples))
}

/// One step of the quadrature scheme in its general form.
fn step_q_general(state: &mut SchemeState, dt: f64, rule: &QuadratureRule) -> Result<()> {
    let n = state.x.len();
    let metric = state.metric;
    let lambda = state.lambda;
    let (AssembledSystem { fr, mat, rhs, .. }, sqg_samples) =
        assemble_q_general(state, dt, rule)?;
    let sol = mat.solve(&rhs)?;
    let xp: Vec<Vec2> = (0..n).map(|i| Vec2::new(sol[5 * i], sol[5 * i + 1])).collect();
    let yp: Vec<Vec2> = (0..n)
        .map(|i| Vec2::new(sol[5 * i + 2], sol[5 * i + 3]))
        .collect();
    let kp: Vec<f64> = (0..n).map(|i| sol[5 * i + 4]).collect();
    for pt in &xp {
        metric.check_domain(*pt)?;
    }
    state.energy = quadrature_energy(&fr, rule, &sqg_samples, &kp, lambda);
    state.x = xp;
    state.y = yp;
    state.kappa = kp;
    state.t += dt;
    state.step += 1;
    Ok(())
}

/// One step of the quadrature scheme with the endpoint rule in reduced
/// form: the curvature unknown is eliminated nodally
/// (`κ⁺_j = √g_j Y⁺_j · ω_j`), leaving 4 unknowns per vertex.
fn step_q_vertex(state: &mut SchemeState, dt: f64) -> Result<()> {
    let n = state.x.len();
    let metric = state.metric;
    let rule = QuadratureRule::vertex();
    let report = check_assumptions(&state.x, &metric, &rule)?;
    if !report.all_hold() {
        return Err(Error::AssumptionViolation(format!(
            "polygon rejected before assembly: {report:?}"
        )));
    }
    let fr = frame(&state.x)?;
    let jets: Vec<MetricJet> = state
        .x
        .iter()
        .map(|p| metric.jet(*p))
        .collect::<Result<_>>()?;
    let lambda = state.lambda;

    let mut mat = CyclicBlockTridiag::zeros(n, 4);
    let mut rhs = vec![0.0; 4 * n];

    // Vertex-diagonal blocks.
    for i in 0..n {
        let w = fr.weight[i];
        let om = fr.vertex_normal[i];
        let jet = &jets[i];
        let g32 = jet.g * jet.sqrt_g;
        for r in 0..2 {
            for c in 0..2 {
                // Momentum rows: velocity projection.
                mat.add_diag(i, r, c, w * g32 / dt * om[r] * om[c]);
                // Position rows: eliminated-curvature projection.
                mat.add_diag(i, 2 + r, 2 + c, w * g32 * om[r] * om[c]);
            }
        }
        let ra = om * (w * g32 / dt * om.dot(&state.x[i]));
        rhs[4 * i] += ra[0];
        rhs[4 * i + 1] += ra[1];
        let rb = jet.grad_ln_g * (-0.5 * w * jet.sqrt_g);
        rhs[4 * i + 2] += rb[0];
        rhs[4 * i + 3] += rb[1];
    }

    // Element loop: stiffness, tangential correction, explicit loads.
    for e in 0..n {
        let (p, q) = (prev(e, n), e);
        let he = fr.edge_len[e];
        let te = fr.tangent[e];
        let ne = fr.normal[e];
        let dy_m = state.y[q] - state.y[p];
        let s = 0.5 * (jets[p].sqrt_g + jets[q].sqrt_g) / he;
        for r in 0..2 {
            mat.add_diag(q, r, 2 + r, -s);
            mat.add_lower(q, r, 2 + r, s);
            mat.add_diag(p, r, 2 + r, -s);
            mat.add_upper(p, r, 2 + r, s);
            mat.add_diag(q, 2 + r, r, s);
            mat.add_lower(q, 2 + r, r, -s);
            mat.add_diag(p, 2 + r, r, s);
            mat.add_upper(p, 2 + r, r, -s);
        }
        let tload = te * (s * dy_m.dot(&te));
        rhs[4 * q] -= tload[0];
        rhs[4 * q + 1] -= tload[1];
        rhs[4 * p] += tload[0];
        rhs[4 * p + 1] += tload[1];

        // Endpoint-rule loads, shared with the general assembly.
        for (k, &v) in [p, q].iter().enumerate() {
            let node = QNode {
                phi: if k == 0 { [1.0, 0.0] } else { [0.0, 1.0] },
                wk: 0.5,
                jet: jets[v],
                kap: state.kappa[v],
                y: state.y[v],
            };
            let loads = q_momentum_loads(&node, he, te, ne, dy_m, lambda);
            rhs[4 * p] += loads[0][0];
            rhs[4 * p + 1] += loads[0][1];
            rhs[4 * q] += loads[1][0];
            rhs[4 * q + 1] += loads[1][1];
        }
    }

    let sol = mat.solve(&rhs)?;
    let xp: Vec<Vec2> = (0..n).map(|i| Vec2::new(sol[4 * i], sol[4 * i + 1])).collect();
    let yp: Vec<Vec2> = (0..n)
        .map(|i| Vec2::new(sol[4 * i + 2], sol[4 * i + 3]))
        .collect();
    for pt in &xp {
        metric.check_domain(*pt)?;
    }
    let kp: Vec<f64> = (0..n)
        .map(|j| jets[j].sqrt_g * yp[j].dot(&fr.vertex_normal[j]))
        .collect();
    let sqg = sample_sqrt_g(&metric, &state.x, &rule)?;
    state.energy = quadrature_energy(&fr, &rule, &sqg, &kp, lambda);
    state.x = xp;
    state.y = yp;
    state.kappa = kp;
    state.t += dt;
    state.step += 1;
    Ok(())
}

/// Runs the flow from the state's current time until `t ≥ t_end`,
/// invoking `on_state` for the initial state and after every completed
/// step. The number of steps is fixed up front from `(t_end − t)/dt`
/// (rounded up), so the final time may overshoot `t_end` by less than one
/// step. Recorded times are multiples of `dt` (no accumulation drift).
pub fn evolve_with<F: FnMut(&SchemeState)>(
    state: &mut SchemeState,
    dt: f64,
    t_end: f64,
    mut on_state: F,
) -> RunStatus {
    assert!(dt > 0.0, "step size must be positive");
    on_state(state);
    let base_t = state.t;
    let base_step = state.step;
    let steps = if t_end > base_t {
        ((t_end - base_t) / dt - 1e-9).ceil().max(1.0) as usize
    } else {
        0
    };
    for i in 1..=steps {
        if let Err(e) = state.step(dt) {
            return RunStatus::Aborted {
                step: base_step + i,
                reason: e.to_string(),
            };
        }
        // Deterministic clock: overwrite the accumulated time.
        state.t = base_t + dt * i as f64;
        state.step = base_step + i;
        on_state(state);
    }
    RunStatus::Completed
}

/// Runs the flow and collects diagnostics and snapshots.
///
/// `snapshot_every = k > 0` stores the positions at every `k`-th step
/// (plus the initial and final states); `k = 0` stores only the initial
/// and final states.
pub fn evolve(
    state: &mut SchemeState,
    dt: f64,
    t_end: f64,
    snapshot_every: usize,
) -> RunRecord {
    let mut rows = Vec::new();
    let mut snapshots: Vec<(usize, f64, Vec<Vec2>)> = Vec::new();
    let status = evolve_with(state, dt, t_end, |s| {
        rows.push(diag_row(s));
        let due = snapshot_every > 0 && s.step % snapshot_every == 0;
        if due || s.step == 0 {
            snapshots.push((s.step, s.t, s.x.clone()));
        }
    });
    // Always capture the final reached state.
    if let Some(last) = rows.last() {
        if snapshots.last().map(|(s, _, _)| *s) != Some(last.step) {
            snapshots.push((last.step, last.t, state.x.clone()));
        }
    }
    RunRecord {
        rows,
        snapshots,
        status,
    }
}
