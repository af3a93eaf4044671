//! Cell-centred latitude/longitude grids on S^n and the discrete covariant
//! calculus of the round metric e = dθ² + sin²θ dφ².
//!
//! Two layouts are supported. `Axisym` stores one value per colatitude and
//! represents a rotationally symmetric function on S^n for any n ≥ 2; the
//! `φ` slot then stands for any of the n−1 parallel directions. `FullS2`
//! stores a full (θ, φ) field on S². Neither layout has a node on a pole;
//! stencils that reach past a pole read the ghost value at (mirror θ, φ+π).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_M_THETA: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GridSpec {
    Axisym { n: usize, m_theta: usize },
    FullS2 { m_theta: usize, m_phi: usize },
}

/// Symmetric 2-tensor in (θ, φ) chart components.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Sym2 {
    pub tt: f64,
    pub tp: f64,
    pub pp: f64,
}

impl Sym2 {
    pub const fn new(tt: f64, tp: f64, pp: f64) -> Self {
        Self { tt, tp, pp }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub spec: GridSpec,
    /// Dimension of the sphere S^n.
    pub n: usize,
    pub m_theta: usize,
    /// 1 for axisymmetric grids.
    pub m_phi: usize,
    pub dtheta: f64,
    /// Zero for axisymmetric grids.
    pub dphi: f64,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub sin_theta: Vec<f64>,
    pub cos_theta: Vec<f64>,
    pub cot_theta: Vec<f64>,
    sin_phi: Vec<f64>,
    cos_phi: Vec<f64>,
}

impl Grid {
    pub fn build(spec: GridSpec) -> Result<Self> {
        let (n, m_theta, m_phi) = match spec {
            GridSpec::Axisym { n, m_theta } => {
                if n < 2 {
                    return Err(Error::Grid(format!("axisymmetric grid needs n >= 2, got {n}")));
                }
                (n, m_theta, 1)
            }
            GridSpec::FullS2 { m_theta, m_phi } => {
                if m_phi < 4 || m_phi % 2 != 0 {
                    return Err(Error::Grid(format!(
                        "m_phi must be even and >= 4 for pole pairing, got {m_phi}"
                    )));
                }
                (2, m_theta, m_phi)
            }
        };
        if m_theta < MIN_M_THETA {
            return Err(Error::Grid(format!("m_theta must be >= {MIN_M_THETA}, got {m_theta}")));
        }
        let dtheta = std::f64::consts::PI / m_theta as f64;
        let theta: Vec<f64> = (0..m_theta).map(|i| (i as f64 + 0.5) * dtheta).collect();
        let dphi = if m_phi > 1 { 2.0 * std::f64::consts::PI / m_phi as f64 } else { 0.0 };
        let phi: Vec<f64> = (0..m_phi).map(|j| j as f64 * dphi).collect();
        Ok(Self {
            spec,
            n,
            m_theta,
            m_phi,
            dtheta,
            dphi,
            sin_theta: theta.iter().map(|t| t.sin()).collect(),
            cos_theta: theta.iter().map(|t| t.cos()).collect(),
            cot_theta: theta.iter().map(|t| t.cos() / t.sin()).collect(),
            sin_phi: phi.iter().map(|p| p.sin()).collect(),
            cos_phi: phi.iter().map(|p| p.cos()).collect(),
            theta,
            phi,
        })
    }

    pub fn is_axisym(&self) -> bool {
        matches!(self.spec, GridSpec::Axisym { .. })
    }

    pub fn node_count(&self) -> usize {
        self.m_theta * self.m_phi
    }

    /// Dimension of the ambient Euclidean space, n + 1.
    pub fn ambient_dim(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.m_phi + j
    }

    #[inline]
    pub fn ring_of(&self, node: usize) -> usize {
        node / self.m_phi
    }

    #[inline]
    pub fn column_of(&self, node: usize) -> usize {
        node % self.m_phi
    }

    /// Unit direction ξ of a node in R^{n+1}. The rotation axis is the last
    /// coordinate; axisymmetric nodes sit in the (x_1, x_{n+1}) half plane.
    pub fn direction_into(&self, node: usize, out: &mut [f64]) {
        let i = self.ring_of(node);
        let (s, c) = (self.sin_theta[i], self.cos_theta[i]);
        out.fill(0.0);
        let d = self.ambient_dim();
        if self.is_axisym() {
            out[0] = s;
        } else {
            let j = self.column_of(node);
            out[0] = s * self.cos_phi[j];
            out[1] = s * self.sin_phi[j];
        }
        out[d - 1] = c;
    }

    /// Orthonormal tangent directions (e_θ, e_φ/sinθ) at a node, in R^{n+1}.
    pub fn tangent_frame_into(&self, node: usize, e_theta: &mut [f64], e_phi: &mut [f64]) {
        let i = self.ring_of(node);
        let (s, c) = (self.sin_theta[i], self.cos_theta[i]);
        let d = self.ambient_dim();
        e_theta.fill(0.0);
        e_phi.fill(0.0);
        if self.is_axisym() {
            e_theta[0] = c;
            e_theta[d - 1] = -s;
            e_phi[1] = 1.0;
        } else {
            let j = self.column_of(node);
            let (sp, cp) = (self.sin_phi[j], self.cos_phi[j]);
            e_theta[0] = c * cp;
            e_theta[1] = c * sp;
            e_theta[2] = -s;
            e_phi[0] = -sp;
            e_phi[1] = cp;
        }
    }

    /// Value at ring `i` (may be −1 or m_theta), column `j` (taken mod m_phi),
    /// using the pole-wrap ghost convention.
    #[inline]
    fn at(&self, values: &[f64], i: isize, j: isize) -> f64 {
        let m = self.m_phi as isize;
        let (ii, jj) = if i < 0 {
            (-1 - i, j + m / 2)
        } else if i >= self.m_theta as isize {
            (2 * self.m_theta as isize - 1 - i, j + m / 2)
        } else {
            (i, j)
        };
        let jj = jj.rem_euclid(m);
        values[ii as usize * self.m_phi + jj as usize]
    }

    /// Central-difference partial derivatives at one node:
    /// (f_θ, f_φ, f_θθ, f_θφ, f_φφ). Axisymmetric fields have zero φ parts.
    #[inline]
    pub fn partials(&self, values: &[f64], node: usize) -> [f64; 5] {
        let i = self.ring_of(node) as isize;
        let j = self.column_of(node) as isize;
        let f0 = values[node];
        let fn_ = self.at(values, i - 1, j);
        let fs = self.at(values, i + 1, j);
        let dt = self.dtheta;
        let f_t = (fs - fn_) / (2.0 * dt);
        let f_tt = (fs - 2.0 * f0 + fn_) / (dt * dt);
        if self.is_axisym() {
            return [f_t, 0.0, f_tt, 0.0, 0.0];
        }
        let dp = self.dphi;
        let m = self.m_phi;
        let interior = i > 0 && i < self.m_theta as isize - 1 && j > 0 && j < m as isize - 1;
        let (fe, fw, cross) = if interior {
            let (up, down) = (node - m, node + m);
            (
                values[node + 1],
                values[node - 1],
                values[down + 1] - values[down - 1] - values[up + 1] + values[up - 1],
            )
        } else {
            (
                self.at(values, i, j + 1),
                self.at(values, i, j - 1),
                self.at(values, i + 1, j + 1) - self.at(values, i + 1, j - 1)
                    - self.at(values, i - 1, j + 1)
                    + self.at(values, i - 1, j - 1),
            )
        };
        let f_p = (fe - fw) / (2.0 * dp);
        let f_pp = (fe - 2.0 * f0 + fw) / (dp * dp);
        let f_tp = cross / (4.0 * dt * dp);
        [f_t, f_p, f_tt, f_tp, f_pp]
    }

    /// Covariant Hessian f_{;ij} from coordinate partials at ring `i`, using
    /// Γ^θ_{φφ} = −sinθcosθ and Γ^φ_{θφ} = cotθ. For axisymmetric grids the
    /// φφ entry is the parallel component sinθcosθ·f_θ.
    #[inline]
    pub fn hessian_from_partials(&self, i: usize, p: &[f64; 5]) -> Sym2 {
        let (s, c, cot) = (self.sin_theta[i], self.cos_theta[i], self.cot_theta[i]);
        Sym2 {
            tt: p[2],
            tp: p[3] - cot * p[1],
            pp: p[4] + s * c * p[0],
        }
    }

    /// |Df|² = f_θ² + f_φ²/sin²θ.
    #[inline]
    pub fn grad_norm_sq(&self, i: usize, f_t: f64, f_p: f64) -> f64 {
        let s = self.sin_theta[i];
        f_t * f_t + (f_p * f_p) / (s * s)
    }

    pub fn grad(&self, field: &ScalarField) -> Vec<[f64; 2]> {
        (0..self.node_count())
            .map(|k| {
                let p = self.partials(&field.values, k);
                [p[0], p[1]]
            })
            .collect()
    }

    pub fn grad_norm_sq_field(&self, field: &ScalarField) -> Vec<f64> {
        self.grad(field)
            .iter()
            .enumerate()
            .map(|(k, d)| self.grad_norm_sq(self.ring_of(k), d[0], d[1]))
            .collect()
    }

    pub fn covariant_hessian(&self, field: &ScalarField) -> Vec<Sym2> {
        (0..self.node_count())
            .map(|k| {
                let p = self.partials(&field.values, k);
                self.hessian_from_partials(self.ring_of(k), &p)
            })
            .collect()
    }

    /// Round metric e_ij = diag(1, sin²θ) at ring i.
    pub fn metric(&self, i: usize) -> Sym2 {
        let s = self.sin_theta[i];
        Sym2::new(1.0, 0.0, s * s)
    }

    pub fn field_from_fn(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let values = (0..self.node_count())
            .map(|k| {
                let th = self.theta[self.ring_of(k)];
                let ph = if self.is_axisym() { 0.0 } else { self.phi[self.column_of(k)] };
                f(th, ph)
            })
            .collect();
        ScalarField { values }
    }
}

pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    Grid::build(spec)
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Shape(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("field value at node {k} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self { values: vec![value; grid.node_count()] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// CSV with header `theta,value` (axisym) or `theta,phi,value`.
    pub fn write_csv<W: Write>(&self, grid: &Grid, mut w: W) -> Result<()> {
        if grid.is_axisym() {
            writeln!(w, "theta,value")?;
        } else {
            writeln!(w, "theta,phi,value")?;
        }
        for (k, v) in self.values.iter().enumerate() {
            let th = grid.theta[grid.ring_of(k)];
            if grid.is_axisym() {
                writeln!(w, "{th:e},{v:e}")?;
            } else {
                writeln!(w, "{th:e},{:e},{v:e}", grid.phi[grid.column_of(k)])?;
            }
        }
        Ok(())
    }

    /// Reads a CSV written by [`ScalarField::write_csv`], checking that every
    /// row lands on the matching grid node.
    pub fn read_csv<R: BufRead>(grid: &Grid, r: R) -> Result<Self> {
        let cols = if grid.is_axisym() { 2 } else { 3 };
        let mut values = Vec::with_capacity(grid.node_count());
        let tol = 1e-9;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || lineno == 0 && line.starts_with("theta") {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != cols {
                return Err(Error::Shape(format!(
                    "line {}: expected {cols} columns, found {}",
                    lineno + 1,
                    parts.len()
                )));
            }
            let nums = parts
                .iter()
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Shape(format!("line {}: {e}", lineno + 1)))?;
            let k = values.len();
            if k >= grid.node_count() {
                return Err(Error::Shape(format!("line {}: more rows than grid nodes", lineno + 1)));
            }
            let th = grid.theta[grid.ring_of(k)];
            let coord_ok = (nums[0] - th).abs() <= tol
                && (grid.is_axisym() || (nums[1] - grid.phi[grid.column_of(k)]).abs() <= tol);
            if !coord_ok {
                return Err(Error::Shape(format!(
                    "line {}: coordinates do not match grid node {k}",
                    lineno + 1
                )));
            }
            values.push(nums[cols - 1]);
        }
        if values.len() != grid.node_count() {
            return Err(Error::Shape(format!(
                "file has {} rows, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        ScalarField::new(grid, values)
    }
}
