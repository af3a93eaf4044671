//! Prescribed data G(X, ν) = c·ψ(X/|X|)·u^a·ρ^b with log-linear
//! ψ(ξ) = exp(Σ_j s_j⟨ξ, v_j⟩), the speed reparameterizations Ψ, and
//! validators for the barrier and monotonicity hypotheses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symfunc::CurvatureFunctionSpec;

pub const RADIUS_LO: f64 = 1e-6;
pub const RADIUS_HI: f64 = 1e6;
/// Directions sampled on S² when searching for the extrema of ψ.
pub const DIRECTION_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiTerm {
    pub s: f64,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedSpec {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub psi: Vec<PsiTerm>,
}

impl SpeedSpec {
    pub fn isotropic(c: f64, a: f64, b: f64) -> Self {
        Self { c, a, b, psi: Vec::new() }
    }

    pub fn with_psi(mut self, s: f64, v: Vec<f64>) -> Self {
        self.psi.push(PsiTerm { s, v });
        self
    }

    /// Checks c > 0, finite exponents and unit ψ directions of length `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Argument(format!("G constant c must be > 0, got {}", self.c)));
        }
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::Argument("G exponents must be finite".into()));
        }
        for (idx, term) in self.psi.iter().enumerate() {
            if term.v.len() != dim {
                return Err(Error::Argument(format!(
                    "psi term {idx}: direction has {} components, expected {dim}",
                    term.v.len()
                )));
            }
            let norm = term.v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::Argument(format!("psi term {idx}: |v| = {norm}, expected 1")));
            }
            if !term.s.is_finite() {
                return Err(Error::Argument(format!("psi term {idx}: s is not finite")));
            }
        }
        Ok(())
    }

    /// Every ψ direction lies on the rotation axis (last coordinate).
    pub fn is_axisymmetric(&self) -> bool {
        self.psi.iter().all(|t| {
            let d = t.v.len();
            t.v[..d - 1].iter().all(|x| x.abs() <= 1e-12)
        })
    }

    /// w = Σ s_j v_j, so that ψ(ξ) = exp⟨ξ, w⟩.
    pub fn psi_vector(&self, dim: usize) -> Vec<f64> {
        let mut w = vec![0.0; dim];
        for t in &self.psi {
            for (wi, vi) in w.iter_mut().zip(&t.v) {
                *wi += t.s * vi;
            }
        }
        w
    }

    pub fn psi_is_constant(&self) -> bool {
        let dim = self.psi.first().map_or(0, |t| t.v.len());
        self.psi_vector(dim).iter().all(|x| x.abs() < 1e-15)
    }

    #[inline]
    pub fn psi_at(&self, xi: &[f64]) -> f64 {
        let mut e = 0.0;
        for t in &self.psi {
            e += t.s * t.v.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
        }
        e.exp()
    }

    /// The spec of 1/G.
    pub fn reciprocal(&self) -> Self {
        Self {
            c: 1.0 / self.c,
            a: -self.a,
            b: -self.b,
            psi: self.psi.iter().map(|t| PsiTerm { s: -t.s, v: t.v.clone() }).collect(),
        }
    }
}

/// G(X, ν) for X with |X| = ρ and support u = ⟨X, ν⟩. `nu` is accepted
/// for signature parity; the implemented family does not depend on it
/// beyond u.
pub fn g_eval(spec: &SpeedSpec, x: &[f64], _nu: &[f64], u: f64, rho: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("support function u = {u} is not positive")));
    }
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("radius rho = {rho} is not positive")));
    }
    let mut e = 0.0;
    for t in &spec.psi {
        e += t.s * t.v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / rho;
    }
    Ok(spec.c * (e + spec.a * u.ln() + spec.b * rho.ln()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiMode {
    /// Ψ(s) = s
    Identity,
    /// Ψ(s) = −1/s
    NegReciprocal,
    /// Ψ(s) = s^m, m > 0
    Power { m: f64 },
}

impl PsiMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            PsiMode::Power { m } if !(*m > 0.0 && m.is_finite()) => {
                Err(Error::Argument(format!("power psi needs m > 0, got {m}")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply_unchecked(&self, s: f64) -> f64 {
        match *self {
            PsiMode::Identity => s,
            PsiMode::NegReciprocal => -1.0 / s,
            PsiMode::Power { m } => s.powf(m),
        }
    }

    #[inline]
    pub fn prime_unchecked(&self, s: f64) -> f64 {
        match *self {
            PsiMode::Identity => 1.0,
            PsiMode::NegReciprocal => 1.0 / (s * s),
            PsiMode::Power { m } => m * s.powf(m - 1.0),
        }
    }

    /// Ψ(s) − Ψ(1).
    #[inline]
    pub fn speed_unchecked(&self, s: f64) -> f64 {
        match *self {
            PsiMode::Identity => s - 1.0,
            PsiMode::NegReciprocal => 1.0 - 1.0 / s,
            PsiMode::Power { m } => s.powf(m) - 1.0,
        }
    }
}

fn check_positive(s: f64) -> Result<()> {
    if s > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("psi argument s = {s} is not positive")))
    }
}

pub fn psi_apply(mode: PsiMode, s: f64) -> Result<f64> {
    check_positive(s)?;
    Ok(mode.apply_unchecked(s))
}

pub fn psi_prime(mode: PsiMode, s: f64) -> Result<f64> {
    check_positive(s)?;
    Ok(mode.prime_unchecked(s))
}

/// Radii between which round spheres act as barriers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierRadii {
    pub r1: f64,
    pub r2: f64,
    /// r1 and r2 coincide (to relative 1e-9); only the weak inequalities hold.
    pub equality: bool,
}

/// Unit directions in R^dim used to search for extrema of ψ: a Fibonacci
/// lattice on S² (dim = 3) or a meridian sweep (higher dim, axisymmetric ψ),
/// plus ±w/|w| where ψ = exp⟨ξ, w⟩ is extremal.
pub fn sample_directions(spec: &SpeedSpec, dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count + 4);
    if dim == 3 {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        for i in 0..count {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            out.push(vec![r * phi.cos(), r * phi.sin(), z]);
        }
    } else {
        for i in 0..count {
            let t = std::f64::consts::PI * i as f64 / (count - 1).max(1) as f64;
            let mut v = vec![0.0; dim];
            v[0] = t.sin();
            v[dim - 1] = t.cos();
            out.push(v);
        }
    }
    let w = spec.psi_vector(dim);
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.push(w.iter().map(|x| x / norm).collect());
        out.push(w.iter().map(|x| -x / norm).collect());
    }
    out
}

fn sphere_g_extremes(spec: &SpeedSpec, dirs: &[Vec<f64>], r: f64, beta: f64) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut x = vec![0.0; dirs.first().map_or(0, Vec::len)];
    for d in dirs {
        for (xi, di) in x.iter_mut().zip(d) {
            *xi = r * di;
        }
        let g = g_eval(spec, &x, d, r, r)?.powf(1.0 / beta);
        lo = lo.min(g);
        hi = hi.max(g);
    }
    Ok((lo, hi))
}

/// Bisection in log r for the root of a function that is positive at the
/// lower end and negative at the upper end.
fn bisect_log(mut f: impl FnMut(f64) -> Result<f64>, rel_tol: f64) -> Result<Option<f64>> {
    let (mut lo, mut hi) = (RADIUS_LO.ln(), RADIUS_HI.ln());
    let (f_lo, f_hi) = (f(lo.exp())?, f(hi.exp())?);
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Ok(None);
    }
    while hi - lo > rel_tol {
        let mid = 0.5 * (lo + hi);
        if f(mid.exp())? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some((0.5 * (lo + hi)).exp()))
}

/// Barrier radii for G^{1/β}: r1 solves min_ξ G^{1/β}(r ξ, ξ) = F(1,…,1)/r
/// and r2 solves the same with max_ξ, on sphere points (u = ρ = r, ν = ξ).
pub fn validate_barrier_radii(
    spec: &SpeedSpec,
    f_spec: &CurvatureFunctionSpec,
    n: usize,
    beta: f64,
) -> Result<BarrierRadii> {
    validate_barrier_radii_sampled(spec, f_spec, n, beta, DIRECTION_SAMPLES)
}

pub fn validate_barrier_radii_sampled(
    spec: &SpeedSpec,
    f_spec: &CurvatureFunctionSpec,
    n: usize,
    beta: f64,
    samples: usize,
) -> Result<BarrierRadii> {
    if !(beta > 0.0) {
        return Err(Error::Argument(format!("beta must be > 0, got {beta}")));
    }
    let dim = n + 1;
    spec.validate(dim)?;
    f_spec.validate(n)?;
    let f_one = f_spec.eval(&vec![1.0; n])?.ln();
    let dirs = sample_directions(spec, dim, samples);
    // the first inequality must hold at r1, the second at r2
    let r1 = bisect_log(|r| Ok(sphere_g_extremes(spec, &dirs, r, beta)?.0.ln() + r.ln() - f_one), 1e-14)?;
    let r2 = bisect_log(|r| Ok(sphere_g_extremes(spec, &dirs, r, beta)?.1.ln() + r.ln() - f_one), 1e-14)?;
    let expo = (spec.a + spec.b) / beta + 1.0;
    match (r1, r2) {
        (Some(r1), Some(r2)) if r1 <= r2 * (1.0 + 1e-9) => Ok(BarrierRadii {
            r1: r1.min(r2),
            r2,
            equality: (r2 - r1).abs() <= 1e-9 * r1,
        }),
        _ => Err(Error::Validation(format!(
            "no admissible barrier radii in [{RADIUS_LO:e}, {RADIUS_HI:e}]: on spheres \
             G^(1/beta)*r scales like r^{expo:.6} and needs a negative exponent \
             (a + b + beta = {:.6} must be < 0)",
            spec.a + spec.b + beta
        ))),
    }
}

/// One closed-form sign condition with its margin (holds iff margin ≥ 0,
/// or > 0 for strict conditions).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub name: String,
    pub statement: String,
    pub holds: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub conditions: Vec<ConditionReport>,
    pub notes: Vec<String>,
}

impl MonotonicityReport {
    pub fn get(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// Reports the radial-monotonicity and support-exponent conditions for the
/// implemented family. The support-exponent variants are evaluated for G^{1/β}, whose
/// exponents are (a/β, b/β).
pub fn validate_monotonicity(spec: &SpeedSpec, beta: f64) -> MonotonicityReport {
    let (a, b) = (spec.a, spec.b);
    let (ab, bb) = (a / beta, b / beta);
    let iso_u = a == 0.0;
    let cond = |name: &str, statement: &str, holds: bool, margin: f64| ConditionReport {
        name: name.to_string(),
        statement: statement.to_string(),
        holds,
        margin,
    };
    let rho_beta = -(a + b + beta);
    let rho_g = -(a + b + 1.0);
    let rho_g_root = -(ab + bb + 1.0);
    let conditions = vec![
        cond("rho_g_beta_monotone", "d/drho (rho G^(1/beta)) <= 0  <=>  a + b + beta <= 0", rho_beta >= 0.0, rho_beta),
        cond("rho_g_monotone", "d/drho (rho G) <= 0  <=>  a + b + 1 <= 0", rho_g >= 0.0, rho_g),
        cond("uniqueness", "d/drho (rho G) < 0  <=>  a + b + 1 < 0", rho_g > 0.0, rho_g),
        cond("u_free_weak", "a = 0 and b/beta + 1 <= 0", iso_u && rho_g_root >= 0.0, if iso_u { rho_g_root } else { -a.abs() }),
        cond("support_exponent_negative", "u phi_u/phi = a/beta <= -eps", ab < 0.0, -ab),
        cond("combined_exponent_strict", "a/beta + b/beta + 1 <= -eps", rho_g_root > 0.0, rho_g_root),
        cond("u_free_strict", "a = 0 and b/beta + 1 < 0", iso_u && rho_g_root > 0.0, if iso_u { rho_g_root } else { -a.abs() }),
        cond("position_only_weak", "a = 0 (phi depends on X only) and b/beta + 1 <= 0", iso_u && rho_g_root >= 0.0, if iso_u { rho_g_root } else { -a.abs() }),
        cond("support_exponent_nonzero", "|a/beta| >= eps", ab != 0.0, ab.abs()),
    ];
    let mut notes = vec![
        "radius equation kept with explicit eta = F(1,...,1)^(-beta): eta*G(R,R)*R^beta = 1; \
         it reduces to G(R,R)*R^beta = 1 only when F(1,...,1) = 1"
            .to_string(),
    ];
    if !spec.psi_is_constant() {
        notes.push(
            "psi is anisotropic: the u_free and position_only variants reduce to the same exponent conditions \
             because psi depends on X/|X| only"
                .to_string(),
        );
    }
    MonotonicityReport { conditions, notes }
}

/// Stationary sphere radius: η·G(R,R)·R^β = 1 with η = F(1,…,1)^{-β}
/// (equivalently η^{-1}·G̃(R,R)·R^{-β} = 1 with G̃ = 1/G).
pub fn radius_root(
    spec: &SpeedSpec,
    f_spec: &CurvatureFunctionSpec,
    n: usize,
    beta: f64,
    mode: PsiMode,
) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Argument(format!("beta must be > 0, got {beta}")));
    }
    if !spec.psi_is_constant() {
        return Err(Error::Argument("radius_root needs a constant psi".into()));
    }
    f_spec.validate(n)?;
    let log_eta = -beta * f_spec.eval(&vec![1.0; n])?.ln();
    let dim = n + 1;
    let mut xi = vec![0.0; dim];
    xi[dim - 1] = 1.0;
    let log_g = |r: f64| -> Result<f64> {
        let x: Vec<f64> = xi.iter().map(|v| r * v).collect();
        Ok(g_eval(spec, &x, &xi, r, r)?.ln())
    };
    let residual = |r: f64| -> Result<f64> {
        Ok(match mode {
            PsiMode::NegReciprocal => -log_eta - log_g(r)? - beta * r.ln(),
            _ => log_eta + log_g(r)? + beta * r.ln(),
        })
    };
    let expo = spec.a + spec.b + beta;
    if expo == 0.0 {
        return Err(Error::Validation(
            "eta*G(r,r)*r^beta is constant in r (a + b + beta = 0); no isolated root".into(),
        ));
    }
    let sign = match mode {
        PsiMode::NegReciprocal => -expo.signum(),
        _ => expo.signum(),
    };
    // orient so the bracketed function decreases
    let root = bisect_log(|r| Ok(-sign * residual(r)?), 1e-13)?;
    root.ok_or_else(|| {
        Error::Validation(format!(
            "no stationary radius in [{RADIUS_LO:e}, {RADIUS_HI:e}]"
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s2() -> CurvatureFunctionSpec {
        CurvatureFunctionSpec::SigmaKRoot { k: 2 }
    }

    fn axis3() -> Vec<f64> {
        vec![0.0, 0.0, 1.0]
    }

    #[test]
    fn g_eval_examples() {
        let spec = SpeedSpec::isotropic(1.0, 0.0, -2.0);
        let r = 1.7;
        assert!((g_eval(&spec, &[0.0, 0.0, r], &axis3(), r, r).unwrap() - r.powi(-2)).abs() < 1e-15);

        let spec = SpeedSpec::isotropic(1.0, -0.5, -1.5).with_psi(0.2, axis3());
        let g = g_eval(&spec, &axis3(), &axis3(), 1.0, 1.0).unwrap();
        assert!((g - 0.2f64.exp()).abs() < 1e-15);

        assert!(matches!(g_eval(&spec, &axis3(), &axis3(), 0.0, 1.0), Err(Error::Domain(_))));
        assert!(g_eval(&spec, &axis3(), &axis3(), 1.0, -1.0).is_err());
    }

    #[test]
    fn psi_examples() {
        assert_eq!(PsiMode::Identity.speed_unchecked(1.0), 0.0);
        assert_eq!(psi_apply(PsiMode::NegReciprocal, 2.0).unwrap() - psi_apply(PsiMode::NegReciprocal, 1.0).unwrap(), 0.5);
        assert_eq!(psi_apply(PsiMode::Power { m: 2.0 }, 3.0).unwrap(), 9.0);
        assert_eq!(psi_prime(PsiMode::Power { m: 2.0 }, 3.0).unwrap(), 6.0);
        assert_eq!(psi_prime(PsiMode::NegReciprocal, 2.0).unwrap(), 0.25);
        assert!(psi_apply(PsiMode::Identity, 0.0).is_err());
        assert!(psi_prime(PsiMode::Identity, -1.0).is_err());
        assert!(PsiMode::Power { m: 0.0 }.validate().is_err());
    }

    #[test]
    fn barrier_radii_examples() {
        let iso = SpeedSpec::isotropic(1.0, 0.0, -2.0);
        let r = validate_barrier_radii(&iso, &s2(), 2, 1.0).unwrap();
        assert!((r.r1 - 1.0).abs() < 1e-12 && (r.r2 - 1.0).abs() < 1e-12);
        assert!(r.equality);

        let aniso = iso.clone().with_psi(0.2, axis3());
        let r = validate_barrier_radii(&aniso, &s2(), 2, 1.0).unwrap();
        assert!((r.r1 - (-0.2f64).exp()).abs() < 1e-12, "{r:?}");
        assert!((r.r2 - 0.2f64.exp()).abs() < 1e-12, "{r:?}");
        assert!(!r.equality);

        let bad = SpeedSpec::isotropic(1.0, 0.0, 1.0);
        assert!(matches!(validate_barrier_radii(&bad, &s2(), 2, 1.0), Err(Error::Validation(_))));
    }

    #[test]
    fn monotonicity_examples() {
        let rep = validate_monotonicity(&SpeedSpec::isotropic(1.0, 0.0, -2.0), 1.0);
        let c = rep.get("rho_g_beta_monotone").unwrap();
        assert!(c.holds && c.margin == 1.0);

        let rep = validate_monotonicity(&SpeedSpec::isotropic(1.0, -0.5, -1.5), 1.0);
        let c = rep.get("support_exponent_negative").unwrap();
        assert!(c.holds && c.margin == 0.5);

        let rep = validate_monotonicity(&SpeedSpec::isotropic(1.0, 0.0, 0.0), 1.0);
        assert!(!rep.get("rho_g_beta_monotone").unwrap().holds);
        assert!(!rep.get("rho_g_monotone").unwrap().holds);
    }

    #[test]
    fn radius_root_examples() {
        let r = radius_root(&SpeedSpec::isotropic(1.0, 0.0, -2.0), &s2(), 2, 1.0, PsiMode::Identity).unwrap();
        assert!((r - 1.0).abs() < 1e-12);

        // contracting case stated through G~ = rho^3, i.e. G = rho^-3
        let g_tilde = SpeedSpec::isotropic(1.0, 0.0, 3.0);
        let r = radius_root(&g_tilde.reciprocal(), &s2(), 3, 2.0, PsiMode::NegReciprocal).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-12, "{r}");

        let s1 = CurvatureFunctionSpec::SigmaKRoot { k: 2 };
        let r = radius_root(&SpeedSpec::isotropic(2.0, 0.0, -2.0), &s1, 2, 1.0, PsiMode::Identity).unwrap();
        assert!((r - 2.0).abs() < 1e-11);

        assert!(radius_root(&SpeedSpec::isotropic(1.0, 0.0, -1.0), &s2(), 2, 1.0, PsiMode::Identity).is_err());
        let aniso = SpeedSpec::isotropic(1.0, 0.0, -2.0).with_psi(0.2, axis3());
        assert!(radius_root(&aniso, &s2(), 2, 1.0, PsiMode::Identity).is_err());
    }

    #[test]
    fn reciprocal_inverts_g() {
        let spec = SpeedSpec::isotropic(1.3, -0.4, 0.7).with_psi(0.3, axis3());
        let x = [0.3, -0.4, 0.5];
        let rho = (0.09f64 + 0.16 + 0.25).sqrt();
        let g = g_eval(&spec, &x, &axis3(), 0.4, rho).unwrap();
        let gr = g_eval(&spec.reciprocal(), &x, &axis3(), 0.4, rho).unwrap();
        assert!((g * gr - 1.0).abs() < 1e-14);
    }
}
