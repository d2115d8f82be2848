//! Discrete geometry of closed polygonal curves.
//!
//! A closed curve with `J` vertices is stored as a slice of positions
//! `x[0..J]`, understood cyclically. The parameter domain is the periodic
//! interval `[0, 1]` split into `J` equal elements of parameter length
//! `h = 1/J`; **element `j`** is the edge from vertex `j−1` (cyclically)
//! to vertex `j`.
//!
//! [`Frame`] collects the per-element and per-vertex quantities every
//! scheme needs:
//!
//! * edge length `h_j = |x_j − x_{j−1}|`, unit tangent `τ_j`, unit normal
//!   `ν_j = −τ_j^⊥` (pointing left of the direction of travel, i.e.
//!   inward for a counter-clockwise curve),
//! * the mass-lumped vertex weight `w_j = ½(h_j + h_{j+1})`,
//! * the *vertex normal* `ω_j = (h_j ν_j + h_{j+1} ν_{j+1}) / (h_j + h_{j+1})`,
//!   an edge-length-weighted average of the two adjacent edge normals,
//!   and its unit version `ω̂_j`. On a regular `J`-gon, `|ω_j| = cos(π/J)`.
//!
//! Two discrete inner products are provided on this mesh:
//!
//! * [`inner_h`] — the *mass-lumped* product: on each element the
//!   integrand is sampled at the two endpoints (one-sided limits, so
//!   discontinuous piecewise-linear data is allowed) and combined by the
//!   trapezoid rule with the edge length as weight.
//! * [`inner_quad`] / [`integrate_quad`] — quadrature over the parameter
//!   domain with a [`QuadratureRule`]; any arclength or metric weight is
//!   part of the integrand. With the [vertex rule](QuadratureRule::vertex)
//!   and the weight `|X_ρ|`, this reproduces [`inner_h`] exactly.
//!
//! [`check_assumptions`] verifies the three structural conditions the
//! implicit schemes rely on; see [`AssumptionReport`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::metric::ConformalMetric;
use crate::Vec2;

/// Clockwise rotation by 90°: `(a, b) ↦ (b, −a)`.
///
/// The inward normal of a counter-clockwise curve is `−perp(τ)` for unit
/// tangent `τ`.
#[inline]
pub fn perp(v: Vec2) -> Vec2 {
    Vec2::new(v[1], -v[0])
}

/// Per-edge and per-vertex geometric data of a closed polygon.
///
/// Built by [`frame`]. All vectors have length `J`; see the module
/// documentation for the indexing convention (element `j` runs from
/// vertex `j−1` to vertex `j`).
#[derive(Debug, Clone)]
pub struct Frame {
    /// Edge lengths `h_j > 0`.
    pub edge_len: Vec<f64>,
    /// Unit tangents `τ_j` per element.
    pub tangent: Vec<Vec2>,
    /// Unit normals `ν_j = −τ_j^⊥` per element.
    pub normal: Vec<Vec2>,
    /// Mass-lumped vertex weights `w_j = ½(h_j + h_{j+1})`.
    pub weight: Vec<f64>,
    /// Vertex normals `ω_j` (length ≤ 1, possibly zero at a cusp).
    pub vertex_normal: Vec<Vec2>,
    /// Unit vertex normals `ω̂_j = ω_j / |ω_j|`.
    pub unit_vertex_normal: Vec<Vec2>,
}

impl Frame {
    /// Number of vertices / elements.
    pub fn len(&self) -> usize {
        self.edge_len.len()
    }

    /// True when the polygon is empty (never the case for built frames).
    pub fn is_empty(&self) -> bool {
        self.edge_len.is_empty()
    }
}

/// Index of the cyclic predecessor of `j` among `0..n`.
#[inline]
pub fn prev(j: usize, n: usize) -> usize {
    (j + n - 1) % n
}

/// Index of the cyclic successor of `j` among `0..n`.
#[inline]
pub fn next(j: usize, n: usize) -> usize {
    (j + 1) % n
}

/// Computes the discrete frame of a closed polygon.
///
/// Fails with [`Error::AssumptionViolation`] when fewer than three
/// vertices are given, when two consecutive vertices coincide (an edge of
/// length zero) or when two next-nearest vertices coincide (the unit
/// vertex normal `ω̂_j` would be undefined).
pub fn frame(x: &[Vec2]) -> Result<Frame> {
    let n = x.len();
    if n < 3 {
        return Err(Error::AssumptionViolation(format!(
            "a closed polygon needs at least 3 vertices, got {n}"
        )));
    }
    let mut edge_len = vec![0.0; n];
    let mut tangent = vec![Vec2::zeros(); n];
    let mut normal = vec![Vec2::zeros(); n];
    for j in 0..n {
        let d = x[j] - x[prev(j, n)];
        let len = d.norm();
        if len == 0.0 {
            return Err(Error::AssumptionViolation(format!(
                "consecutive vertices {} and {} coincide",
                prev(j, n),
                j
            )));
        }
        edge_len[j] = len;
        tangent[j] = d / len;
        normal[j] = -perp(tangent[j]);
    }
    let mut weight = vec![0.0; n];
    let mut vertex_normal = vec![Vec2::zeros(); n];
    let mut unit_vertex_normal = vec![Vec2::zeros(); n];
    for j in 0..n {
        let jn = next(j, n);
        let hb = edge_len[j];
        let ha = edge_len[jn];
        weight[j] = 0.5 * (hb + ha);
        vertex_normal[j] = (normal[j] * hb + normal[jn] * ha) / (hb + ha);
        let chord = x[jn] - x[prev(j, n)];
        let chord_len = chord.norm();
        if chord_len == 0.0 {
            return Err(Error::AssumptionViolation(format!(
                "next-nearest vertices {} and {} coincide",
                prev(j, n),
                jn
            )));
        }
        unit_vertex_normal[j] = -perp(chord) / chord_len;
    }
    Ok(Frame {
        edge_len,
        tangent,
        normal,
        weight,
        vertex_normal,
        unit_vertex_normal,
    })
}

/// Ratio of longest to shortest edge, `max_j h_j / min_j h_j`.
///
/// A value near 1 means the vertices are nearly equidistributed along the
/// curve; schemes differ sharply in how this ratio evolves.
pub fn mesh_ratio(frame: &Frame) -> f64 {
    let max = frame.edge_len.iter().cloned().fold(f64::MIN, f64::max);
    let min = frame.edge_len.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

/// Mass-lumped inner product of two piecewise-linear fields.
///
/// `u[j]` and `v[j]` hold the one-sided values of the fields on element
/// `j`: `[value at left endpoint, value at right endpoint]`, each taken
/// from inside the element, so jumps at vertices are allowed. The product
/// is the trapezoid rule per element, weighted by edge length:
///
/// ```text
///     (u, v)ʰ = ½ Σ_j h_j (u_Lⱼ v_Lⱼ + u_Rⱼ v_Rⱼ).
/// ```
pub fn inner_h(edge_len: &[f64], u: &[[f64; 2]], v: &[[f64; 2]]) -> f64 {
    edge_len
        .iter()
        .zip(u)
        .zip(v)
        .map(|((&h, a), b)| 0.5 * h * (a[0] * b[0] + a[1] * b[1]))
        .sum()
}

/// Vector-valued version of [`inner_h`] (dot product at each sample).
pub fn inner_h_vec(edge_len: &[f64], u: &[[Vec2; 2]], v: &[[Vec2; 2]]) -> f64 {
    edge_len
        .iter()
        .zip(u)
        .zip(v)
        .map(|((&h, a), b)| 0.5 * h * (a[0].dot(&b[0]) + a[1].dot(&b[1])))
        .sum()
}

/// Expands continuous vertex values to per-element endpoint pairs, ready
/// for [`inner_h`]: element `j` gets `[vals[j−1], vals[j]]`.
pub fn nodal_to_elements(vals: &[f64]) -> Vec<[f64; 2]> {
    let n = vals.len();
    (0..n).map(|j| [vals[prev(j, n)], vals[j]]).collect()
}

/// Vector version of [`nodal_to_elements`].
pub fn nodal_to_elements_vec(vals: &[Vec2]) -> Vec<[Vec2; 2]> {
    let n = vals.len();
    (0..n).map(|j| [vals[prev(j, n)], vals[j]]).collect()
}

/// A quadrature rule on the reference element `[0, 1]` with positive
/// weights summing to one.
///
/// Node `ξ = 0` is the element's left endpoint (vertex `j−1`), `ξ = 1`
/// the right endpoint (vertex `j`).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Node positions in `[0, 1]`.
    pub nodes: Vec<f64>,
    /// Weights, summing to one.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// The two-point endpoint (trapezoid) rule: nodes `{0, 1}`, weights
    /// `{½, ½}`. Together with the arclength weight it reproduces the
    /// mass-lumped product [`inner_h`] exactly.
    pub fn vertex() -> Self {
        Self {
            nodes: vec![0.0, 1.0],
            weights: vec![0.5, 0.5],
        }
    }

    /// Three-point Gauss–Legendre rule, exact for polynomials of degree
    /// five on the element.
    pub fn gauss3() -> Self {
        let d = 0.5 * (3.0f64 / 5.0).sqrt();
        Self {
            nodes: vec![0.5 - d, 0.5, 0.5 + d],
            weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
        }
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when the rule has no nodes (never for the built-in rules).
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Evaluates the linear interpolant with endpoint values `(l, r)` at
    /// node `k`.
    #[inline]
    pub fn lerp(&self, k: usize, l: f64, r: f64) -> f64 {
        let xi = self.nodes[k];
        (1.0 - xi) * l + xi * r
    }

    /// Vector version of [`QuadratureRule::lerp`].
    #[inline]
    pub fn lerp_vec(&self, k: usize, l: Vec2, r: Vec2) -> Vec2 {
        let xi = self.nodes[k];
        l * (1.0 - xi) + r * xi
    }
}

/// Quadrature approximation of the parameter-domain integral
/// `∫₀¹ f dρ ≈ Σ_j h Σ_k w_k f_{j,k}`, where `h` is the parameter length
/// of one element and `values` holds the integrand samples flattened
/// element-major: `values[j*K + k]` is the sample at node `k` of element
/// `j`.
pub fn integrate_quad(rule: &QuadratureRule, h: f64, values: &[f64]) -> f64 {
    let k = rule.len();
    assert_eq!(values.len() % k, 0, "sample count must be a multiple of the rule size");
    values
        .chunks_exact(k)
        .map(|elem| -> f64 {
            elem.iter()
                .zip(&rule.weights)
                .map(|(val, w)| w * val)
                .sum()
        })
        .sum::<f64>()
        * h
}

/// Quadrature inner product `(u, v)^⋄ ≈ ∫₀¹ u v dρ` of two sampled
/// integrands (layout as in [`integrate_quad`]). Weights such as the
/// arclength element belong inside one of the factors.
pub fn inner_quad(rule: &QuadratureRule, h: f64, u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len());
    let prod: Vec<f64> = u.iter().zip(v).map(|(a, b)| a * b).collect();
    integrate_quad(rule, h, &prod)
}

/// Samples the continuous piecewise-linear field with the given vertex
/// values at every quadrature node, element-major (layout accepted by
/// [`integrate_quad`]).
pub fn sample_p1(rule: &QuadratureRule, nodal: &[f64]) -> Vec<f64> {
    let n = nodal.len();
    let mut out = Vec::with_capacity(n * rule.len());
    for j in 0..n {
        let l = nodal[prev(j, n)];
        let r = nodal[j];
        for k in 0..rule.len() {
            out.push(rule.lerp(k, l, r));
        }
    }
    out
}

/// Samples the piecewise-linear curve position at every quadrature node,
/// element-major.
pub fn sample_positions(rule: &QuadratureRule, x: &[Vec2]) -> Vec<Vec2> {
    let n = x.len();
    let mut out = Vec::with_capacity(n * rule.len());
    for j in 0..n {
        let l = x[prev(j, n)];
        let r = x[j];
        for k in 0..rule.len() {
            out.push(rule.lerp_vec(k, l, r));
        }
    }
    out
}

/// Outcome of [`check_assumptions`]: the three structural conditions the
/// implicit schemes need from the current polygon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssumptionReport {
    /// Consecutive and next-nearest vertices are pairwise distinct, so
    /// edge tangents and unit vertex normals are well defined.
    pub vertex_separation: bool,
    /// Every vertex normal `ω_j` is nonzero and together they span the
    /// plane (the lumped normal-projection matrix is invertible).
    pub normal_span: bool,
    /// The metric-weighted normal moments `(√g ν, χ_j |X_ρ|_g)^⋄` span the
    /// plane; needed by the quadrature schemes to keep the curvature
    /// update well posed.
    pub weighted_normal_span: bool,
}

impl AssumptionReport {
    /// All three conditions hold.
    pub fn all_hold(&self) -> bool {
        self.vertex_separation && self.normal_span && self.weighted_normal_span
    }
}

/// Relative singular-value threshold below which a set of plane vectors is
/// declared rank-deficient.
const SPAN_TOL: f64 = 1e-10;

/// Rank-2 test for a family of plane vectors: smallest singular value of
/// the stacked matrix must exceed [`SPAN_TOL`] times the largest.
fn spans_plane(vectors: &[Vec2]) -> bool {
    let m = DMatrix::from_fn(vectors.len(), 2, |i, c| vectors[i][c]);
    let sv = m.singular_values();
    let max = sv.max();
    max > 0.0 && sv.min() > SPAN_TOL * max
}

/// Verifies the structural assumptions of the schemes on a polygon.
///
/// Returns the three booleans of [`AssumptionReport`]; a failed
/// `vertex_separation` makes the other two conditions unverifiable and
/// they are reported as `false`. Metric evaluation errors (curve outside
/// the chart domain) are propagated as `Err`.
pub fn check_assumptions(
    x: &[Vec2],
    metric: &ConformalMetric,
    rule: &QuadratureRule,
) -> Result<AssumptionReport> {
    let n = x.len();
    if n < 3 {
        return Err(Error::AssumptionViolation(format!(
            "a closed polygon needs at least 3 vertices, got {n}"
        )));
    }
    for &p in x {
        metric.check_domain(p)?;
    }
    let frame = match frame(x) {
        Ok(f) => f,
        Err(_) => {
            return Ok(AssumptionReport {
                vertex_separation: false,
                normal_span: false,
                weighted_normal_span: false,
            })
        }
    };

    let normals_ok = frame.vertex_normal.iter().all(|w| w.norm() > 0.0)
        && spans_plane(&frame.vertex_normal);

    // Weighted normal moments z_j = Σ_e h_e ν_e Σ_k w_k g(X_k) χ_j(ξ_k),
    // with χ_j the hat function of vertex j (supported on elements j and
    // j+1, where it takes values ξ and 1−ξ respectively).
    let mut moments = vec![Vec2::zeros(); n];
    for e in 0..n {
        let l = x[prev(e, n)];
        let r = x[e];
        let he = frame.edge_len[e];
        for k in 0..rule.len() {
            let g = metric.eval_g(rule.lerp_vec(k, l, r))?;
            let c = rule.weights[k] * g * he;
            let xi = rule.nodes[k];
            moments[prev(e, n)] += frame.normal[e] * (c * (1.0 - xi));
            moments[e] += frame.normal[e] * (c * xi);
        }
    }
    let weighted_ok = spans_plane(&moments);

    Ok(AssumptionReport {
        vertex_separation: true,
        normal_span: normals_ok,
        weighted_normal_span: weighted_ok,
    })
}
