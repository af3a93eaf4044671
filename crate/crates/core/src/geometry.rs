//! Geometry of the radial graph X = e^γ ξ over a sphere grid.
//!
//! With ω = √(1+|Dγ|²) the graph has support function u = ρ/ω, metric
//! g_ij = ρ²(e_ij + γ_iγ_j) and second fundamental form
//! h_ij = (ρ/ω)(−γ_{;ij} + γ_iγ_j + e_ij), all in (θ, φ) chart components.
//! The outward normal is ν = (ξ − γ_θ e_θ − (γ_φ/sinθ) e_φ̂)/ω and the unit
//! sphere of radius R has κ = 1/R.

use std::io::Write;

use crate::error::{Error, Result};
use crate::spheregrid::{Grid, ScalarField, Sym2};

#[derive(Debug, Clone)]
pub struct GeometryState {
    /// Dimension n of the hypersurface.
    pub n: usize,
    /// Ambient dimension n + 1 (stride of `position` and `normal`).
    pub dim: usize,
    pub rho: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Chart components (∂_θγ, ∂_φγ).
    pub dgamma: Vec<[f64; 2]>,
    pub omega: Vec<f64>,
    pub u: Vec<f64>,
    pub position: Vec<f64>,
    pub normal: Vec<f64>,
    pub g: Vec<Sym2>,
    pub g_inv: Vec<Sym2>,
    pub h: Vec<Sym2>,
    /// Mixed h^i_j as [h^θ_θ, h^θ_φ, h^φ_θ, h^φ_φ].
    pub weingarten: Vec<[f64; 4]>,
    /// Principal curvatures, stride n, each block sorted descending.
    pub kappa: Vec<f64>,
}

impl GeometryState {
    pub fn node_count(&self) -> usize {
        self.rho.len()
    }

    pub fn kappa_at(&self, node: usize) -> &[f64] {
        &self.kappa[node * self.n..(node + 1) * self.n]
    }

    pub fn position_at(&self, node: usize) -> &[f64] {
        &self.position[node * self.dim..(node + 1) * self.dim]
    }

    pub fn normal_at(&self, node: usize) -> &[f64] {
        &self.normal[node * self.dim..(node + 1) * self.dim]
    }
}

fn inverse(m: Sym2) -> Sym2 {
    let det = m.tt * m.pp - m.tp * m.tp;
    Sym2::new(m.pp / det, -m.tp / det, m.tt / det)
}

/// Eigenvalues of the g-self-adjoint shape operator g^{-1}h, sorted
/// descending, via the symmetric reduction L^{-1} h L^{-T} with g = L Lᵀ.
pub fn principal_curvatures(g: Sym2, h: Sym2) -> Result<[f64; 2]> {
    if !(g.tt > 0.0) {
        return Err(Error::DegenerateMetric(format!("g_11 = {} is not positive", g.tt)));
    }
    let l11 = g.tt.sqrt();
    let l21 = g.tp / l11;
    let d = g.pp - l21 * l21;
    if !(d > 0.0) {
        return Err(Error::DegenerateMetric(format!("metric not positive definite (pivot {d})")));
    }
    let l22 = d.sqrt();
    // M = L^{-1} h L^{-T}
    let m11 = h.tt / (l11 * l11);
    let m21 = (h.tp - l21 * m11 * l11) / (l11 * l22);
    let m22 = (h.pp - 2.0 * l21 * (h.tp / l11) + l21 * l21 * m11) / (l22 * l22);
    let mean = 0.5 * (m11 + m22);
    let half_diff = 0.5 * (m11 - m22);
    let rad = half_diff.hypot(m21);
    Ok([mean + rad, mean - rad])
}

/// Principal curvatures of a rotationally symmetric graph over S^n:
/// (κ_meridian, κ_parallel × (n−1)), sorted descending.
pub fn principal_curvatures_axisym(g: Sym2, h: Sym2, n: usize, out: &mut [f64]) -> Result<()> {
    if !(g.tt > 0.0 && g.pp > 0.0) {
        return Err(Error::DegenerateMetric(format!("diagonal metric ({}, {})", g.tt, g.pp)));
    }
    let k_m = h.tt / g.tt;
    let k_p = h.pp / g.pp;
    let (hi, lo) = if k_m >= k_p { (k_m, k_p) } else { (k_p, k_m) };
    if k_m >= k_p {
        out[0] = hi;
        out[1..n].fill(lo);
    } else {
        out[..n - 1].fill(hi);
        out[n - 1] = lo;
    }
    Ok(())
}

/// Pointwise geometry of the radial graph at one node.
#[derive(Debug, Clone, Copy)]
pub struct NodeGeometry {
    pub rho: f64,
    pub dgamma: [f64; 2],
    pub omega: f64,
    /// |Dγ|² in the round metric, kept separately so it does not cancel
    /// against 1 in ω² − 1.
    pub grad_norm_sq: f64,
    pub u: f64,
    pub g: Sym2,
    pub h: Sym2,
}

impl NodeGeometry {
    /// |Dγ|² in the round metric.
    pub fn grad_sq(&self) -> f64 {
        self.grad_norm_sq
    }
}

#[inline]
pub fn node_geometry(grid: &Grid, gamma: &[f64], node: usize) -> NodeGeometry {
    let i = grid.ring_of(node);
    let p = grid.partials(gamma, node);
    let (gt, gp) = (p[0], p[1]);
    let hess = grid.hessian_from_partials(i, &p);
    let rho = gamma[node].exp();
    let grad_norm_sq = grid.grad_norm_sq(i, gt, gp);
    let omega = (1.0 + grad_norm_sq).sqrt();
    let e_pp = grid.sin_theta[i] * grid.sin_theta[i];
    let rho2 = rho * rho;
    let scale = rho / omega;
    NodeGeometry {
        rho,
        dgamma: [gt, gp],
        omega,
        grad_norm_sq,
        u: scale,
        g: Sym2::new(rho2 * (1.0 + gt * gt), rho2 * gt * gp, rho2 * (e_pp + gp * gp)),
        h: Sym2::new(
            scale * (-hess.tt + gt * gt + 1.0),
            scale * (-hess.tp + gt * gp),
            scale * (-hess.pp + gp * gp + e_pp),
        ),
    }
}

/// Principal curvatures of a node (stride n, sorted descending).
#[inline]
pub fn node_curvatures(grid: &Grid, geo: &NodeGeometry, out: &mut [f64]) -> Result<()> {
    if grid.is_axisym() {
        principal_curvatures_axisym(geo.g, geo.h, grid.n, out)
    } else {
        out.copy_from_slice(&principal_curvatures(geo.g, geo.h)?);
        Ok(())
    }
}

/// Assembles every geometric quantity of the radial graph of `gamma`.
pub fn assemble(grid: &Grid, gamma: &ScalarField) -> Result<GeometryState> {
    let nodes = grid.node_count();
    if gamma.len() != nodes {
        return Err(Error::Shape(format!(
            "gamma has {} values, grid has {nodes} nodes",
            gamma.len()
        )));
    }
    let n = grid.n;
    let dim = grid.ambient_dim();
    let mut st = GeometryState {
        n,
        dim,
        rho: Vec::with_capacity(nodes),
        gamma: gamma.values.clone(),
        dgamma: Vec::with_capacity(nodes),
        omega: Vec::with_capacity(nodes),
        u: Vec::with_capacity(nodes),
        position: vec![0.0; nodes * dim],
        normal: vec![0.0; nodes * dim],
        g: Vec::with_capacity(nodes),
        g_inv: Vec::with_capacity(nodes),
        h: Vec::with_capacity(nodes),
        weingarten: Vec::with_capacity(nodes),
        kappa: vec![0.0; nodes * n],
    };
    let mut xi = vec![0.0; dim];
    let mut e_t = vec![0.0; dim];
    let mut e_p = vec![0.0; dim];
    let axisym = grid.is_axisym();
    for node in 0..nodes {
        if !gamma.values[node].is_finite() {
            return Err(Error::Domain(format!("gamma at node {node} is not finite")));
        }
        let geo = node_geometry(grid, &gamma.values, node);
        let (g, h) = (geo.g, geo.h);
        let g_inv = inverse(g);
        let w = [
            g_inv.tt * h.tt + g_inv.tp * h.tp,
            g_inv.tt * h.tp + g_inv.tp * h.pp,
            g_inv.tp * h.tt + g_inv.pp * h.tp,
            g_inv.tp * h.tp + g_inv.pp * h.pp,
        ];
        node_curvatures(grid, &geo, &mut st.kappa[node * n..(node + 1) * n])?;
        let [gt, gp] = geo.dgamma;
        grid.direction_into(node, &mut xi);
        grid.tangent_frame_into(node, &mut e_t, &mut e_p);
        let gp_hat = if axisym { 0.0 } else { gp / grid.sin_theta[grid.ring_of(node)] };
        for c in 0..dim {
            st.position[node * dim + c] = geo.rho * xi[c];
            st.normal[node * dim + c] = (xi[c] - gt * e_t[c] - gp_hat * e_p[c]) / geo.omega;
        }
        st.rho.push(geo.rho);
        st.dgamma.push(geo.dgamma);
        st.omega.push(geo.omega);
        st.u.push(geo.u);
        st.g.push(g);
        st.g_inv.push(g_inv);
        st.h.push(h);
        st.weingarten.push(w);
    }
    Ok(st)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarShapeReport {
    pub rho_min: f64,
    pub rho_max: f64,
    pub u_min: f64,
    pub ok: bool,
}

pub fn star_shape_check(state: &GeometryState) -> StarShapeReport {
    let rho_min = state.rho.iter().cloned().fold(f64::INFINITY, f64::min);
    let rho_max = state.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let u_min = state.u.iter().cloned().fold(f64::INFINITY, f64::min);
    StarShapeReport { rho_min, rho_max, u_min, ok: rho_min > 0.0 && u_min > 0.0 }
}

/// Max-norm residual of ∇_i u = g^{kl} h_{ik} ∇_l Φ with Φ = ρ²/2, both
/// sides discretized independently (left: differences of the u field;
/// right: stored g^{-1}, h and ∂Φ = ρ²Dγ). Components are measured in the
/// orthonormal sphere frame.
pub fn support_gradient_identity_residual(grid: &Grid, state: &GeometryState) -> f64 {
    let u_field = ScalarField { values: state.u.clone() };
    let du = grid.grad(&u_field);
    let mut worst = 0.0f64;
    for node in 0..state.node_count() {
        let i = grid.ring_of(node);
        let rho2 = state.rho[node] * state.rho[node];
        let [gt, gp] = state.dgamma[node];
        let (phi_t, phi_p) = (rho2 * gt, rho2 * gp);
        let (gi, h) = (state.g_inv[node], state.h[node]);
        // (g^{-1} ∂Φ)^k, then h_{ik} of that
        let v_t = gi.tt * phi_t + gi.tp * phi_p;
        let v_p = gi.tp * phi_t + gi.pp * phi_p;
        let rhs_t = h.tt * v_t + h.tp * v_p;
        let rhs_p = h.tp * v_t + h.pp * v_p;
        let mut err = (du[node][0] - rhs_t).abs();
        if !grid.is_axisym() {
            err = err.max((du[node][1] - rhs_p).abs() / grid.sin_theta[i]);
        }
        worst = worst.max(err);
    }
    worst
}

/// ρ(θ) of the spheroid with equatorial semi-axis `a` and polar semi-axis
/// `b` (rotation axis along the pole).
pub fn spheroid_radius(a: f64, b: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    a * b / (b * b * s * s + a * a * c * c).sqrt()
}

/// CSV dump: theta, [phi,] rho, u, kappa_1..kappa_n.
pub fn write_csv<W: Write>(grid: &Grid, state: &GeometryState, mut w: W) -> Result<()> {
    let mut header = String::from("theta");
    if !grid.is_axisym() {
        header.push_str(",phi");
    }
    header.push_str(",rho,u");
    for k in 1..=state.n {
        header.push_str(&format!(",kappa_{k}"));
    }
    writeln!(w, "{header}")?;
    for node in 0..state.node_count() {
        let mut line = format!("{:e}", grid.theta[grid.ring_of(node)]);
        if !grid.is_axisym() {
            line.push_str(&format!(",{:e}", grid.phi[grid.column_of(node)]));
        }
        line.push_str(&format!(",{:e},{:e}", state.rho[node], state.u[node]));
        for k in state.kappa_at(node) {
            line.push_str(&format!(",{k:e}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Wavefront OBJ of a full S² state: one vertex per node, quads between
/// neighbouring rings and one polygon cap around each pole.
pub fn write_obj<W: Write>(grid: &Grid, state: &GeometryState, mut w: W) -> Result<()> {
    if grid.is_axisym() {
        return Err(Error::Argument("OBJ export needs a full S2 grid".into()));
    }
    writeln!(w, "# starflow surface, {} x {}", grid.m_theta, grid.m_phi)?;
    for node in 0..state.node_count() {
        let x = state.position_at(node);
        writeln!(w, "v {} {} {}", x[0], x[1], x[2])?;
    }
    let idx = |i: usize, j: usize| grid.index(i, j % grid.m_phi) + 1;
    let cap_n: Vec<String> = (0..grid.m_phi).rev().map(|j| idx(0, j).to_string()).collect();
    writeln!(w, "f {}", cap_n.join(" "))?;
    for i in 0..grid.m_theta - 1 {
        for j in 0..grid.m_phi {
            writeln!(w, "f {} {} {} {}", idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1))?;
        }
    }
    let last = grid.m_theta - 1;
    let cap_s: Vec<String> = (0..grid.m_phi).map(|j| idx(last, j).to_string()).collect();
    writeln!(w, "f {}", cap_s.join(" "))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spheregrid::GridSpec;

    #[test]
    fn principal_curvature_examples() {
        let k = principal_curvatures(Sym2::new(1.0, 0.0, 1.0), Sym2::new(2.0, 0.0, 3.0)).unwrap();
        assert_eq!(k, [3.0, 2.0]);
        let r = 1.7;
        let k = principal_curvatures(Sym2::new(4.0, 0.0, 4.0), Sym2::new(4.0 / r, 0.0, 4.0 / r)).unwrap();
        assert!((k[0] - 1.0 / r).abs() < 1e-15 && (k[1] - 1.0 / r).abs() < 1e-15);
        let g = Sym2::new(2.0, 0.7, 1.3);
        let h = Sym2::new(2.0 / r, 0.7 / r, 1.3 / r);
        let k = principal_curvatures(g, h).unwrap();
        assert!((k[0] - 1.0 / r).abs() < 1e-14 && (k[1] - 1.0 / r).abs() < 1e-14);
        assert!(matches!(
            principal_curvatures(Sym2::new(1.0, 2.0, 1.0), h),
            Err(Error::DegenerateMetric(_))
        ));
    }

    #[test]
    fn sphere_is_exact() {
        let r = 1.9f64;
        for spec in [GridSpec::Axisym { n: 4, m_theta: 16 }, GridSpec::FullS2 { m_theta: 16, m_phi: 32 }] {
            let grid = Grid::build(spec).unwrap();
            let st = assemble(&grid, &ScalarField::constant(&grid, r.ln())).unwrap();
            for node in 0..grid.node_count() {
                assert_eq!(st.omega[node], 1.0);
                for k in st.kappa_at(node) {
                    assert!((k - 1.0 / r).abs() < 1e-12);
                }
                let x = st.position_at(node);
                let nu = st.normal_at(node);
                let xn: f64 = x.iter().zip(nu).map(|(a, b)| a * b).sum();
                assert!((xn - r).abs() < 1e-12);
            }
            let rep = star_shape_check(&st);
            assert!(rep.ok);
            assert!((rep.u_min - r).abs() < 1e-12);
        }
    }

    #[test]
    fn star_shape_flags_nonpositive_support() {
        let grid = Grid::build(GridSpec::Axisym { n: 2, m_theta: 8 }).unwrap();
        let mut st = assemble(&grid, &ScalarField::constant(&grid, 0.0)).unwrap();
        st.u[3] = -0.1;
        assert!(!star_shape_check(&st).ok);
    }

    #[test]
    fn spheroid_support_minimum() {
        let grid = Grid::build(GridSpec::Axisym { n: 2, m_theta: 128 }).unwrap();
        let gamma = grid.field_from_fn(|t, _| spheroid_radius(1.5, 1.0, t).ln());
        let st = assemble(&grid, &gamma).unwrap();
        let rep = star_shape_check(&st);
        assert!(rep.ok);
        // support function of an ellipsoid ranges over [min axis, max axis]
        assert!((rep.u_min - 1.0).abs() < 1e-3, "{}", rep.u_min);
        assert!((rep.rho_max - 1.5).abs() < 1e-3);
    }
}
