//! The transport embedding: a spacetime curl built from the Levi-Civita
//! tensor over (t, x, y).
//!
//! For a potential v, the flux T_j = eps_ijk d_i v_k is divergence-free in
//! the spacetime sense Div(F) = d_t F_0 + d_x F_1 + d_y F_2 (an exact
//! identity, not a trained property). Adding the diffusion part
//! R = (0, gamma d_x T_0, gamma d_y T_0) gives M = T + R with
//! Div(M) = gamma laplacian(T_0), which is the conservative transport
//! equation for the scalar phi = T_0 with flux phi u_i = M_i. Velocity is
//! recovered by the regularized division u_i = M_i w / (w^2 + eps^2) with
//! w = T_0, since w vanishes on the Taylor-Green cell boundaries.

use crate::graph::{GraphError, NodeId, ParamGraph};
use crate::jet::{jet_arith, ArithKind, ElemFn, Jet3, JetError};
use std::fmt;

/// Spacetime axes: 0 = t, 1 = x, 2 = y.
pub const AXIS_T: usize = 0;
pub const AXIS_X: usize = 1;
pub const AXIS_Y: usize = 2;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingError {
    /// Input jets do not carry enough derivative orders.
    InsufficientOrder { required: usize, actual: usize },
    /// Velocity recovery with eps_div = 0 at a zero of the vorticity.
    Singularity { omega: f64 },
    /// Wrong head count / variant combination.
    BadHeads { expected: usize, actual: usize },
    Jet(JetError),
}

impl fmt::Display for EmbeddingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingError::InsufficientOrder { required, actual } => {
                write!(f, "embedding needs jets of order >= {required}, got {actual}")
            }
            EmbeddingError::Singularity { omega } => {
                write!(f, "velocity recovery singular: omega = {omega} with eps_div = 0")
            }
            EmbeddingError::BadHeads { expected, actual } => {
                write!(f, "variant expects {expected} heads, got {actual}")
            }
            EmbeddingError::Jet(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for EmbeddingError {}

impl From<JetError> for EmbeddingError {
    fn from(e: JetError) -> Self {
        EmbeddingError::Jet(e)
    }
}

// ---------------------------------------------------------------------------
// Levi-Civita and the spacetime curl
// ---------------------------------------------------------------------------

/// Sign of the permutation (i, j, k) of (0, 1, 2); 0 on repeated indices.
pub fn levi_civita(i: usize, j: usize, k: usize) -> i32 {
    debug_assert!(i < 3 && j < 3 && k < 3);
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1,
        _ => 0,
    }
}

/// Spacetime curl with an injectable permutation table (test hook for the
/// identity suites).
pub(crate) fn curl_spacetime_with(
    eps: &dyn Fn(usize, usize, usize) -> i32,
    v: &[Jet3; 3],
) -> Result<[Jet3; 3], EmbeddingError> {
    let order = v[0].order();
    if order < 1 {
        return Err(EmbeddingError::InsufficientOrder { required: 1, actual: order });
    }
    let mut out = [Jet3::constant(0.0, order - 1); 3];
    for j in 0..3 {
        let mut acc = Jet3::constant(0.0, order - 1);
        for i in 0..3 {
            for k in 0..3 {
                match eps(i, j, k) {
                    1 => acc = acc + v[k].deriv(i)?,
                    -1 => acc = acc - v[k].deriv(i)?,
                    _ => {}
                }
            }
        }
        out[j] = acc;
    }
    Ok(out)
}

/// T_j = eps_ijk d_i v_k: the divergence-free flux of the potential v.
/// T's own derivative entries come from v's higher entries, so T carries one
/// order less than v.
pub fn curl_spacetime(v: &[Jet3; 3]) -> Result<[Jet3; 3], EmbeddingError> {
    curl_spacetime_with(&levi_civita, v)
}

/// Spacetime divergence Div(F) = d_t F_0 + d_x F_1 + d_y F_2.
pub fn spacetime_div(f: &[Jet3; 3]) -> f64 {
    f[0].grad(AXIS_T) + f[1].grad(AXIS_X) + f[2].grad(AXIS_Y)
}

// ---------------------------------------------------------------------------
// Diffusion part and velocity recovery
// ---------------------------------------------------------------------------

/// Embedding outputs at one spacetime point.
#[derive(Debug, Clone)]
pub struct FluxFields {
    /// Divergence-free flux T with its derivative jets.
    pub t: [Jet3; 3],
    /// Diffusion part (0, gamma d_x T_0, gamma d_y T_0); first component is
    /// exactly zero.
    pub r: [f64; 3],
    /// M = T + R componentwise.
    pub m: [f64; 3],
    /// Transported scalar: omega = T_0 = M_0.
    pub omega: f64,
    /// Recovered velocity; filled by [`tenn_heads`] / [`recover_velocity`],
    /// zero straight out of [`assemble_m`].
    pub u: [f64; 2],
    /// Diffusion constant, 1/Re.
    pub gamma: f64,
}

/// Build R and M from the flux T. Needs T at order >= 1 so d_i T_0 exists.
pub fn assemble_m(t: &[Jet3; 3], gamma: f64) -> Result<FluxFields, EmbeddingError> {
    if t[0].order() < 1 {
        return Err(EmbeddingError::InsufficientOrder { required: 1, actual: t[0].order() });
    }
    let r = [0.0, gamma * t[0].grad(AXIS_X), gamma * t[0].grad(AXIS_Y)];
    let m = [t[0].value() + r[0], t[1].value() + r[1], t[2].value() + r[2]];
    Ok(FluxFields { t: *t, r, m, omega: t[0].value(), u: [0.0; 2], gamma })
}

/// M as jets (order of T minus one): M_i = T_i + gamma d_i T_0.
pub fn m_jets(t: &[Jet3; 3], gamma: f64) -> Result<[Jet3; 3], EmbeddingError> {
    if t[0].order() < 1 {
        return Err(EmbeddingError::InsufficientOrder { required: 1, actual: t[0].order() });
    }
    let order = t[0].order() - 1;
    Ok([
        t[0].truncate(order),
        t[1].truncate(order) + t[0].deriv(AXIS_X)? * gamma,
        t[2].truncate(order) + t[0].deriv(AXIS_Y)? * gamma,
    ])
}

/// u_i = M_i w / (w^2 + eps^2); exactly M_i / w when eps_div = 0 and w != 0.
pub fn recover_velocity(m: [f64; 3], omega: f64, eps_div: f64) -> Result<[f64; 2], EmbeddingError> {
    if eps_div == 0.0 && omega == 0.0 {
        return Err(EmbeddingError::Singularity { omega });
    }
    let denom = omega * omega + eps_div * eps_div;
    Ok([m[1] * omega / denom, m[2] * omega / denom])
}

/// Jet version of the velocity recovery: u_i = M_i w / (w^2 + eps^2) with all
/// factors as jets of M's order.
pub fn recover_velocity_jets(
    m: &[Jet3; 3],
    omega: &Jet3,
    eps_div: f64,
) -> Result<[Jet3; 2], EmbeddingError> {
    let order = m[1].order();
    let w = omega.truncate(order.min(omega.order()));
    if eps_div == 0.0 && w.value() == 0.0 {
        return Err(EmbeddingError::Singularity { omega: w.value() });
    }
    let denom = w * w + Jet3::constant(eps_div * eps_div, order);
    let ux = jet_arith(ArithKind::Div, &(m[1] * w), &denom)?;
    let uy = jet_arith(ArithKind::Div, &(m[2] * w), &denom)?;
    Ok([ux, uy])
}

// ---------------------------------------------------------------------------
// Head wiring
// ---------------------------------------------------------------------------

/// How the three network heads produce (omega, u).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TennVariant {
    /// Heads are the potential v; omega = T_0 and u = M w / (w^2 + eps^2).
    /// Transport holds by construction wherever w^2 dominates eps^2.
    PotentialB,
    /// Heads are (v_0, u_x, u_y); u is direct, omega = T_0 = d_y u_x - d_x u_y
    /// (the sign-flipped spatial curl under this index convention), and the
    /// flux-consistency residual couples v_0 to the pair.
    SplitA,
}

/// Embedding outputs with enough derivative structure for the loss terms.
#[derive(Debug, Clone)]
pub struct TennOutputs {
    /// omega = T_0 as a jet (order of v minus one).
    pub omega: Jet3,
    /// Velocity jets (recovered for PotentialB, direct heads for SplitA).
    pub u: [Jet3; 2],
    pub fields: FluxFields,
    /// Flux-consistency residual r_i = T_i + gamma d_i T_0 - T_0 u_i.
    pub flux_residual: [f64; 2],
}

/// Wire raw network heads into (omega, u) plus diagnostics.
pub fn tenn_heads(
    raw_heads: &[Jet3],
    variant: TennVariant,
    gamma: f64,
    eps_div: f64,
) -> Result<TennOutputs, EmbeddingError> {
    if raw_heads.len() != 3 {
        return Err(EmbeddingError::BadHeads { expected: 3, actual: raw_heads.len() });
    }
    let required = match variant {
        TennVariant::PotentialB => 3,
        TennVariant::SplitA => 2,
    };
    let order = raw_heads[0].order();
    if order < required {
        return Err(EmbeddingError::InsufficientOrder { required, actual: order });
    }
    let v = [raw_heads[0], raw_heads[1], raw_heads[2]];
    let t = curl_spacetime(&v)?;
    let mut fields = assemble_m(&t, gamma)?;
    match variant {
        TennVariant::PotentialB => {
            let m = m_jets(&t, gamma)?;
            let u = recover_velocity_jets(&m, &t[0], eps_div)?;
            fields.u = [u[0].value(), u[1].value()];
            let flux_residual = [
                fields.m[1] - fields.omega * fields.u[0],
                fields.m[2] - fields.omega * fields.u[1],
            ];
            Ok(TennOutputs { omega: t[0], u, fields, flux_residual })
        }
        TennVariant::SplitA => {
            let order = t[0].order().min(raw_heads[1].order());
            let u = [raw_heads[1].truncate(order), raw_heads[2].truncate(order)];
            fields.u = [u[0].value(), u[1].value()];
            let flux_residual = [
                fields.m[1] - fields.omega * fields.u[0],
                fields.m[2] - fields.omega * fields.u[1],
            ];
            Ok(TennOutputs { omega: t[0], u, fields, flux_residual })
        }
    }
}

// ---------------------------------------------------------------------------
// Transport residuals
// ---------------------------------------------------------------------------

/// Conservative transport residual
/// d_t w + d_x(w u_x) + d_y(w u_y) - gamma laplacian(w),
/// with the flux products formed from the given jets.
/// This is the form Lemma 2 forces to zero for PotentialB outputs (up to the
/// eps_div regularization); it coincides with the advective form wherever
/// div(u) = 0.
pub fn transport_residual(omega: &Jet3, u: &[Jet3; 2], gamma: f64) -> Result<f64, EmbeddingError> {
    if omega.order() < 2 {
        return Err(EmbeddingError::InsufficientOrder { required: 2, actual: omega.order() });
    }
    if u[0].order() < 1 {
        return Err(EmbeddingError::InsufficientOrder { required: 1, actual: u[0].order() });
    }
    let w1 = omega.truncate(u[0].order().min(omega.order() - 1).max(1));
    let fx = w1 * u[0].truncate(w1.order());
    let fy = w1 * u[1].truncate(w1.order());
    let lap = omega.hess(AXIS_X, AXIS_X) + omega.hess(AXIS_Y, AXIS_Y);
    Ok(omega.grad(AXIS_T) + fx.grad(AXIS_X) + fy.grad(AXIS_Y) - gamma * lap)
}

/// Advective form d_t w + u . grad(w) - gamma laplacian(w). Differs from the
/// conservative form by w div(u); reported as a diagnostic.
pub fn transport_residual_advective(omega: &Jet3, u: &[Jet3; 2], gamma: f64) -> Result<f64, EmbeddingError> {
    if omega.order() < 2 {
        return Err(EmbeddingError::InsufficientOrder { required: 2, actual: omega.order() });
    }
    let lap = omega.hess(AXIS_X, AXIS_X) + omega.hess(AXIS_Y, AXIS_Y);
    Ok(omega.grad(AXIS_T) + u[0].value() * omega.grad(AXIS_X) + u[1].value() * omega.grad(AXIS_Y)
        - gamma * lap)
}

// ---------------------------------------------------------------------------
// Graph builders (training path)
// ---------------------------------------------------------------------------

/// Node handles for the embedding applied to a batched head block.
pub struct TennNodes {
    /// T_0 at head-order minus one.
    pub omega: NodeId,
    /// Velocity nodes at the order the variant supports.
    pub u: [NodeId; 2],
    /// The full flux T.
    pub t: [NodeId; 3],
}

/// Record the spacetime curl of a 3-row head block: T_0, T_1, T_2.
pub fn build_curl(graph: &mut ParamGraph, heads: NodeId) -> Result<[NodeId; 3], GraphError> {
    let v0 = graph.row(heads, 0)?;
    let v1 = graph.row(heads, 1)?;
    let v2 = graph.row(heads, 2)?;
    let d = |g: &mut ParamGraph, n, axis| g.deriv(n, axis);
    let t0 = {
        let a = d(graph, v1, AXIS_Y)?;
        let b = d(graph, v2, AXIS_X)?;
        graph.sub(a, b)?
    };
    let t1 = {
        let a = d(graph, v2, AXIS_T)?;
        let b = d(graph, v0, AXIS_Y)?;
        graph.sub(a, b)?
    };
    let t2 = {
        let a = d(graph, v0, AXIS_X)?;
        let b = d(graph, v1, AXIS_T)?;
        graph.sub(a, b)?
    };
    Ok([t0, t1, t2])
}

/// Record the PotentialB wiring: curl, M, and the regularized velocity
/// recovery. Heads must carry order 3 so u ends up with first derivatives.
pub fn build_tenn_potential(
    graph: &mut ParamGraph,
    heads: NodeId,
    gamma: f64,
    eps_div: f64,
) -> Result<TennNodes, GraphError> {
    let t = build_curl(graph, heads)?;
    // M_i = T_i + gamma d_i T_0, one order below T
    let m = {
        let mut m = [NodeId(0); 2];
        for (slot, axis) in [(0usize, AXIS_X), (1, AXIS_Y)] {
            let ti = graph.truncate(t[1 + slot], graph.block(t[1 + slot]).order - 1)?;
            let dt0 = graph.deriv(t[0], axis)?;
            let sdt0 = graph.scale(dt0, gamma);
            m[slot] = graph.add(ti, sdt0)?;
        }
        m
    };
    let w1 = graph.truncate(t[0], graph.block(t[0]).order - 1)?;
    let w2 = graph.mul(w1, w1)?;
    let denom = graph.add_const(w2, eps_div * eps_div);
    let rden = graph.elem(ElemFn::Recip, denom)?;
    let mut u = [NodeId(0); 2];
    for slot in 0..2 {
        let mw = graph.mul(m[slot], w1)?;
        u[slot] = graph.mul(mw, rden)?;
    }
    Ok(TennNodes { omega: t[0], u, t })
}

/// Record the SplitA wiring: direct velocity heads plus the curl of
/// (v_0, u_x, u_y) for omega and the flux residual.
pub fn build_tenn_split(graph: &mut ParamGraph, heads: NodeId) -> Result<TennNodes, GraphError> {
    let t = build_curl(graph, heads)?;
    let ux = graph.row(heads, 1)?;
    let uy = graph.row(heads, 2)?;
    Ok(TennNodes { omega: t[0], u: [ux, uy], t })
}

/// Flux-consistency residual nodes (order 0): r_i = T_i + gamma d_i T_0
/// - T_0 u_i.
pub fn build_flux_residual(
    graph: &mut ParamGraph,
    nodes: &TennNodes,
    gamma: f64,
) -> Result<[NodeId; 2], GraphError> {
    let t0_0 = graph.truncate(nodes.t[0], 0)?;
    let mut out = [NodeId(0); 2];
    for (slot, axis) in [(0usize, AXIS_X), (1, AXIS_Y)] {
        let ti = graph.truncate(nodes.t[1 + slot], 0)?;
        let dt0 = graph.deriv(nodes.t[0], axis)?;
        let dt0 = graph.truncate(dt0, 0)?;
        let sdt0 = graph.scale(dt0, gamma);
        let m = graph.add(ti, sdt0)?;
        let u0 = graph.truncate(nodes.u[slot], 0)?;
        let wu = graph.mul(t0_0, u0)?;
        out[slot] = graph.sub(m, wu)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{jet_elementwise, jet_seed_inputs};
    use std::f64::consts::PI;

    #[test]
    fn levi_civita_values() {
        assert_eq!(levi_civita(0, 1, 2), 1);
        assert_eq!(levi_civita(1, 0, 2), -1);
        assert_eq!(levi_civita(0, 0, 2), 0);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(levi_civita(i, j, k), -levi_civita(j, i, k));
                }
            }
        }
    }

    fn jets_at(point: [f64; 3], order: usize) -> [Jet3; 3] {
        jet_seed_inputs(point, order).unwrap()
    }

    #[test]
    fn curl_of_coordinate_potentials() {
        let [t, x, y] = jets_at([0.4, 0.7, 0.2], 2);
        let zero = Jet3::constant(0.0, 2);

        // v = (0, 0, x) -> T = (-1, 0, 0)
        let tt = curl_spacetime(&[zero, zero, x]).unwrap();
        assert_eq!([tt[0].value(), tt[1].value(), tt[2].value()], [-1.0, 0.0, 0.0]);

        // v = (0, y, 0) -> T = (+1, 0, 0)
        let tt = curl_spacetime(&[zero, y, zero]).unwrap();
        assert_eq!([tt[0].value(), tt[1].value(), tt[2].value()], [1.0, 0.0, 0.0]);

        // v = (y, 0, 0) -> T = (0, -1, 0)
        let tt = curl_spacetime(&[y, zero, zero]).unwrap();
        assert_eq!([tt[0].value(), tt[1].value(), tt[2].value()], [0.0, -1.0, 0.0]);

        let _ = t;
    }

    #[test]
    fn spacetime_div_examples() {
        let [t, x, y] = jets_at([1.0, 0.3, 0.8], 1);
        assert_eq!(spacetime_div(&[t, x, y]), 3.0);

        let [t, _, _] = jets_at([1.0, 0.3, 0.8], 2);
        let t2 = t * t;
        let zero = Jet3::constant(0.0, 1);
        assert_eq!(spacetime_div(&[t2.truncate(1), zero, zero]), 2.0);
    }

    #[test]
    fn div_of_curl_vanishes_for_polynomials() {
        // random-ish cubic polynomial potential
        let [t, x, y] = jets_at([0.3, 0.9, 0.5], 3);
        let v = [
            t * x * y + x * x * 0.3,
            y * y * t * 0.7 - x * y * 1.1,
            t * t * 0.4 + x * y * y * 0.9,
        ];
        let tt = curl_spacetime(&v).unwrap();
        assert!(spacetime_div(&tt).abs() <= 1e-12);
    }

    #[test]
    fn assemble_m_examples() {
        let [_, x, y] = jets_at([0.0, 0.25, 0.75], 3);
        let v = [Jet3::constant(0.0, 3), x * y, y * x * 2.0];
        let t = curl_spacetime(&v).unwrap();

        let f0 = assemble_m(&t, 0.0).unwrap();
        assert_eq!(f0.m, [t[0].value(), t[1].value(), t[2].value()]);
        assert_eq!(f0.r, [0.0; 3]);

        let gamma = 0.5;
        let f = assemble_m(&t, gamma).unwrap();
        assert_eq!(f.r[0], 0.0);
        assert_eq!(f.m[1], t[1].value() + gamma * t[0].grad(AXIS_X));
        assert_eq!(f.m[2], t[2].value() + gamma * t[0].grad(AXIS_Y));
        assert_eq!(f.omega, t[0].value());
    }

    #[test]
    fn lemma2_identity_on_polynomial_potential() {
        // Div(M) - gamma laplacian(T_0) = 0 structurally
        let [t, x, y] = jets_at([0.6, 0.1, 0.9], 3);
        let v = [x * y * t, t * t * y, x * x * y * 0.5];
        let tt = curl_spacetime(&v).unwrap();
        for gamma in [0.0, 0.01, 1.0, 10.0] {
            let m = m_jets(&tt, gamma).unwrap();
            let div_m = spacetime_div(&m);
            let lap = tt[0].hess(AXIS_X, AXIS_X) + tt[0].hess(AXIS_Y, AXIS_Y);
            assert!((div_m - gamma * lap).abs() <= 1e-12, "gamma={gamma}");
        }
    }

    #[test]
    fn recover_velocity_examples() {
        assert_eq!(recover_velocity([2.0, 4.0, 6.0], 2.0, 0.0).unwrap(), [2.0, 3.0]);
        assert_eq!(recover_velocity([0.0, 1.0, 1.0], 0.0, 1e-6).unwrap(), [0.0, 0.0]);
        assert_eq!(recover_velocity([1.0, 1.0, 0.0], 1.0, 0.0).unwrap(), [1.0, 0.0]);
        assert!(matches!(
            recover_velocity([1.0, 1.0, 1.0], 0.0, 0.0),
            Err(EmbeddingError::Singularity { .. })
        ));
    }

    #[test]
    fn tenn_heads_potential_simple() {
        // v = (0, 0, x), gamma = 0: omega = -1, M = (-1, 0, 0), u = (0, 0)
        let [_, x, _] = jets_at([0.2, 0.8, 0.1], 3);
        let zero = Jet3::constant(0.0, 3);
        let out = tenn_heads(&[zero, zero, x], TennVariant::PotentialB, 0.0, 0.0).unwrap();
        assert_eq!(out.omega.value(), -1.0);
        assert_eq!(out.fields.m, [-1.0, 0.0, 0.0]);
        assert_eq!([out.u[0].value(), out.u[1].value()], [0.0, 0.0]);
        assert_eq!(out.flux_residual, [0.0, 0.0]);
    }

    #[test]
    fn potential_reproduces_initial_vorticity() {
        // v = (0, -cos(2 pi x) sin(2 pi y), sin(2 pi x) cos(2 pi y)) gives
        // T_0 = -4 pi cos(2 pi x) cos(2 pi y), the analytic t = 0 vorticity.
        for (x, y) in [(0.0, 0.0), (0.13, 0.71), (0.4, 0.9)] {
            let [_, xj, yj] = jets_at([0.0, x, y], 3);
            let sx = jet_elementwise(ElemFn::Sin2Pi, &xj).unwrap();
            let cx = jet_elementwise(ElemFn::Cos2Pi, &xj).unwrap();
            let sy = jet_elementwise(ElemFn::Sin2Pi, &yj).unwrap();
            let cy = jet_elementwise(ElemFn::Cos2Pi, &yj).unwrap();
            let v = [Jet3::constant(0.0, 3), -(cx * sy), sx * cy];
            let t = curl_spacetime(&v).unwrap();
            let expect = crate::oracle::analytic_vorticity(x, y, 0.0, 1.0).unwrap();
            assert!(
                (t[0].value() - expect).abs() < 1e-10,
                "({x},{y}): {} vs {expect}",
                t[0].value()
            );
        }
    }

    #[test]
    fn split_vorticity_is_sign_flipped_curl() {
        // u = analytic t = 0 velocity: T_0 at the origin is +4 pi.
        let [_, xj, yj] = jets_at([0.0, 0.0, 0.0], 2);
        let sx = jet_elementwise(ElemFn::Sin2Pi, &xj).unwrap();
        let cx = jet_elementwise(ElemFn::Cos2Pi, &xj).unwrap();
        let sy = jet_elementwise(ElemFn::Sin2Pi, &yj).unwrap();
        let cy = jet_elementwise(ElemFn::Cos2Pi, &yj).unwrap();
        let ux = cx * sy;
        let uy = -(cy * sx);
        let v0 = Jet3::constant(0.0, 2);
        let out = tenn_heads(&[v0, ux, uy], TennVariant::SplitA, 0.01, 0.0).unwrap();
        assert!((out.omega.value() - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn heads_validation() {
        let z = Jet3::constant(0.0, 1);
        assert!(matches!(
            tenn_heads(&[z, z], TennVariant::PotentialB, 0.0, 0.0),
            Err(EmbeddingError::BadHeads { .. })
        ));
        assert!(matches!(
            tenn_heads(&[z, z, z], TennVariant::PotentialB, 0.0, 0.0),
            Err(EmbeddingError::InsufficientOrder { required: 3, .. })
        ));
    }

    #[test]
    fn curl_linearity() {
        let [t, x, y] = jets_at([0.8, 0.45, 0.33], 3);
        let v = [t * x, x * y, y * t];
        let w = [y * y, t * x * 0.3, x * x];
        let (alpha, beta) = (1.7, -0.6);
        let combo =
            [v[0] * alpha + w[0] * beta, v[1] * alpha + w[1] * beta, v[2] * alpha + w[2] * beta];
        let tc = curl_spacetime(&combo).unwrap();
        let tv = curl_spacetime(&v).unwrap();
        let tw = curl_spacetime(&w).unwrap();
        for j in 0..3 {
            let expect = tv[j] * alpha + tw[j] * beta;
            assert!((tc[j].value() - expect.value()).abs() <= 1e-12);
            for ax in 0..3 {
                assert!((tc[j].grad(ax) - expect.grad(ax)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn graph_and_scalar_embeddings_agree() {
        // The batched graph builders must match the scalar jet path exactly.
        use crate::network::{forward_network, init_params, HeadRole, NetworkSpec};
        let spec = NetworkSpec {
            dictionary: Default::default(),
            hidden: vec![crate::network::HiddenLayer {
                width: 10,
                activation: crate::jet::ActivationKind::Sin,
            }],
            heads: HeadRole::TennPotential,
        };
        let params = init_params(&spec, 11).unwrap();
        let points = [[0.2, 0.6, 0.4], [0.9, 0.05, 0.71]];
        let (gamma, eps) = (0.01, 1e-4);

        let mut g = ParamGraph::new(params.clone());
        let heads = forward_network(&mut g, &spec, &points, 3).unwrap();
        let nodes = build_tenn_potential(&mut g, heads, gamma, eps).unwrap();

        for (cell, point) in points.iter().enumerate() {
            let raw = crate::network::mlp_forward(&params, &spec, *point, 3).unwrap();
            let out = tenn_heads(&raw, TennVariant::PotentialB, gamma, eps).unwrap();
            let gw = g.jet(nodes.omega, 0, cell);
            assert!((gw.value() - out.omega.value()).abs() < 1e-13);
            for slot in 0..2 {
                let gu = g.jet(nodes.u[slot], 0, cell);
                assert!((gu.value() - out.u[slot].value()).abs() < 1e-12);
                for ax in 0..3 {
                    assert!((gu.grad(ax) - out.u[slot].grad(ax)).abs() < 1e-10);
                }
            }
        }
    }
}
