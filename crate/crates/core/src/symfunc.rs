//! Elementary symmetric polynomials, Garding cones and the supported
//! families of curvature functions `F(κ)`.
//!
//! All functions take plain `&[f64]` slices so they can run in the inner
//! loop of the flow without allocating; [`CurvatureVector`] is the checked
//! owning wrapper used at API boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STACK_ORDER: usize = 32;

/// An n-tuple of principal curvatures, n ≥ 2, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureVector(Vec<f64>);

impl CurvatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Argument(format!(
                "curvature vector needs n >= 2 entries, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("curvature entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| c * v).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for CurvatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Fills `e[0..=kmax]` with e_0..e_kmax of `kappa` (optionally with entry
/// `skip` removed) using e_k(x_1..x_m) = e_k(x_1..x_{m-1}) + x_m e_{k-1}(x_1..x_{m-1}).
fn esym_into(kappa: &[f64], skip: Option<usize>, kmax: usize, e: &mut [f64]) {
    e[..=kmax].fill(0.0);
    e[0] = 1.0;
    let mut seen = 0usize;
    for (idx, &x) in kappa.iter().enumerate() {
        if Some(idx) == skip {
            continue;
        }
        seen += 1;
        let top = seen.min(kmax);
        for k in (1..=top).rev() {
            e[k] += x * e[k - 1];
        }
    }
}

fn esym_single(kappa: &[f64], skip: Option<usize>, k: usize) -> f64 {
    let available = kappa.len() - usize::from(skip.is_some());
    if k > available {
        return 0.0;
    }
    if k < 8 {
        let mut buf = [0.0; 8];
        esym_into(kappa, skip, k, &mut buf);
        buf[k]
    } else if k < STACK_ORDER {
        let mut buf = [0.0; STACK_ORDER];
        esym_into(kappa, skip, k, &mut buf);
        buf[k]
    } else {
        let mut buf = vec![0.0; k + 1];
        esym_into(kappa, skip, k, &mut buf);
        buf[k]
    }
}

/// σ_k(κ); σ_0 = 1.
pub fn sigma(kappa: &[f64], k: usize) -> Result<f64> {
    if k > kappa.len() {
        return Err(Error::Argument(format!(
            "sigma order k = {k} outside 0..={}",
            kappa.len()
        )));
    }
    Ok(esym_single(kappa, None, k))
}

/// σ_k of κ with entry `i` removed (σ_{k,i} in the usual notation).
/// Negative orders give 0.
pub fn sigma_deleted(kappa: &[f64], k: isize, i: usize) -> Result<f64> {
    if i >= kappa.len() {
        return Err(Error::Argument(format!("index {i} out of range")));
    }
    if k < 0 {
        return Ok(0.0);
    }
    Ok(esym_single(kappa, Some(i), k as usize))
}

/// ∂σ_k/∂κ_i = σ_{k-1}(κ | i) for every i.
pub fn sigma_grad(kappa: &[f64], k: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; kappa.len()];
    sigma_grad_into(kappa, k, &mut out)?;
    Ok(out)
}

pub fn sigma_grad_into(kappa: &[f64], k: usize, out: &mut [f64]) -> Result<()> {
    let n = kappa.len();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("sigma_grad order k = {k} outside 1..={n}")));
    }
    for (i, o) in out.iter_mut().enumerate().take(n) {
        *o = esym_single(kappa, Some(i), k - 1);
    }
    Ok(())
}

/// ∂²σ_k/∂κ_i∂κ_j: σ_{k-2} with entries i and j removed for i ≠ j, zero on
/// the diagonal (σ_k is affine in each entry).
pub fn sigma_second_partial(kappa: &[f64], k: usize, i: usize, j: usize) -> Result<f64> {
    let n = kappa.len();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("order k = {k} outside 1..={n}")));
    }
    if i >= n || j >= n {
        return Err(Error::Argument(format!("index ({i}, {j}) out of range for n = {n}")));
    }
    if i == j || k < 2 {
        return Ok(0.0);
    }
    let reduced: Vec<f64> = kappa
        .iter()
        .enumerate()
        .filter(|&(idx, _)| idx != i && idx != j)
        .map(|(_, &v)| v)
        .collect();
    Ok(esym_single(&reduced, None, k - 2))
}

/// Open Garding-type cones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConeSpec {
    /// σ_1, …, σ_k all strictly positive.
    GammaKPlus { k: usize },
    /// All κ_i strictly positive.
    GammaPlus,
}

impl ConeSpec {
    /// The first defining inequality that fails, if any.
    pub fn violation(&self, kappa: &[f64]) -> Option<String> {
        match *self {
            ConeSpec::GammaPlus => kappa
                .iter()
                .position(|&v| !(v > 0.0))
                .map(|i| format!("kappa_{} = {} is not > 0", i + 1, kappa[i])),
            ConeSpec::GammaKPlus { k } => {
                let k = k.min(kappa.len());
                let mut e = vec![0.0; k + 1];
                esym_into(kappa, None, k, &mut e);
                (1..=k)
                    .find(|&l| !(e[l] > 0.0))
                    .map(|l| format!("sigma_{l} = {} is not > 0", e[l]))
            }
        }
    }

    pub fn contains(&self, kappa: &[f64]) -> bool {
        match *self {
            ConeSpec::GammaPlus => kappa.iter().all(|&v| v > 0.0),
            ConeSpec::GammaKPlus { k } => {
                let k = k.min(kappa.len());
                if k < 8 {
                    let mut e = [0.0; 8];
                    esym_into(kappa, None, k, &mut e);
                    e[1..=k].iter().all(|&v| v > 0.0)
                } else if k < STACK_ORDER {
                    let mut e = [0.0; STACK_ORDER];
                    esym_into(kappa, None, k, &mut e);
                    e[1..=k].iter().all(|&v| v > 0.0)
                } else {
                    self.violation(kappa).is_none()
                }
            }
        }
    }
}

pub fn in_cone(kappa: &[f64], cone: ConeSpec) -> bool {
    cone.contains(kappa)
}

fn cone_check(kappa: &[f64], cone: ConeSpec) -> Result<()> {
    if cone.contains(kappa) {
        Ok(())
    } else {
        Err(Error::Cone(
            cone.violation(kappa).unwrap_or_else(|| "outside cone".to_string()),
        ))
    }
}

/// A weighted factor of a [`CurvatureFunctionSpec::Product`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedFactor {
    pub weight: f64,
    pub f: CurvatureFunctionSpec,
}

/// Supported curvature functions. Every variant is symmetric, monotone,
/// concave and homogeneous of degree one on its natural cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurvatureFunctionSpec {
    /// σ_k^{1/k}
    SigmaKRoot { k: usize },
    /// (σ_k/σ_l)^{1/(k-l)}, 0 ≤ l < k
    QuotientRoot { k: usize, l: usize },
    /// (Σ κ_i^p)^{1/p}, p < 0
    PowerMean { p: f64 },
    /// Π F_i^{α_i}, α_i ≥ 0, Σ α_i = 1
    Product { factors: Vec<WeightedFactor> },
}

impl CurvatureFunctionSpec {
    /// Checks parameter ranges against the dimension n.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Self::SigmaKRoot { k } => {
                if *k == 0 || *k > n {
                    return Err(Error::Argument(format!("sigma_k_root needs 1 <= k <= n = {n}, got k = {k}")));
                }
            }
            Self::QuotientRoot { k, l } => {
                if !(l < k && *k <= n) {
                    return Err(Error::Argument(format!(
                        "quotient_root needs 0 <= l < k <= n = {n}, got k = {k}, l = {l}"
                    )));
                }
            }
            Self::PowerMean { p } => {
                if !(p.is_finite() && *p < 0.0) {
                    return Err(Error::Argument(format!("power_mean needs p < 0, got {p}")));
                }
            }
            Self::Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::Argument("product needs at least one factor".into()));
                }
                let mut total = 0.0;
                for factor in factors {
                    if !(factor.weight >= 0.0) {
                        return Err(Error::Argument(format!(
                            "product weight {} is negative",
                            factor.weight
                        )));
                    }
                    total += factor.weight;
                    factor.f.validate(n)?;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Argument(format!("product weights sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    /// The cone on which this function is defined and positive.
    pub fn natural_cone(&self) -> ConeSpec {
        match self {
            Self::SigmaKRoot { k } | Self::QuotientRoot { k, .. } => ConeSpec::GammaKPlus { k: *k },
            Self::PowerMean { .. } => ConeSpec::GammaPlus,
            Self::Product { factors } => {
                let mut k_max = 1;
                for factor in factors {
                    match factor.f.natural_cone() {
                        ConeSpec::GammaPlus => return ConeSpec::GammaPlus,
                        ConeSpec::GammaKPlus { k } => k_max = k_max.max(k),
                    }
                }
                ConeSpec::GammaKPlus { k: k_max }
            }
        }
    }

    pub fn eval(&self, kappa: &[f64]) -> Result<f64> {
        cone_check(kappa, self.natural_cone())?;
        Ok(self.log_eval_unchecked(kappa).exp())
    }

    fn log_eval_unchecked(&self, kappa: &[f64]) -> f64 {
        match self {
            Self::SigmaKRoot { k } => esym_single(kappa, None, *k).ln() / *k as f64,
            Self::QuotientRoot { k, l } => {
                let num = esym_single(kappa, None, *k);
                let den = esym_single(kappa, None, *l);
                (num.ln() - den.ln()) / (*k - *l) as f64
            }
            Self::PowerMean { p } => {
                // factor out the smallest entry, which dominates for p < 0
                let m = kappa.iter().cloned().fold(f64::INFINITY, f64::min);
                let s: f64 = kappa.iter().map(|&x| (x / m).powf(*p)).sum();
                m.ln() + s.ln() / p
            }
            Self::Product { factors } => factors
                .iter()
                .filter(|f| f.weight > 0.0)
                .map(|f| f.weight * f.f.log_eval_unchecked(kappa))
                .sum(),
        }
    }

    /// ∂F/∂κ_i written into `out`; returns F.
    pub fn grad_into(&self, kappa: &[f64], out: &mut [f64]) -> Result<f64> {
        cone_check(kappa, self.natural_cone())?;
        let f = self.log_eval_unchecked(kappa).exp();
        // out_i = ∂ log F / ∂κ_i, scaled by F at the end
        self.log_grad_unchecked(kappa, out);
        for o in out.iter_mut() {
            *o *= f;
        }
        Ok(f)
    }

    /// log F and ∂ log F/∂κ_i (into `out`) without the cone check; the
    /// caller guarantees κ lies in the natural cone.
    pub fn log_eval_grad_unchecked(&self, kappa: &[f64], out: &mut [f64]) -> f64 {
        if let Self::SigmaKRoot { k } = self {
            let s = esym_single(kappa, None, *k);
            let scale = 1.0 / (s * *k as f64);
            for (i, o) in out.iter_mut().enumerate().take(kappa.len()) {
                *o = esym_single(kappa, Some(i), k - 1) * scale;
            }
            return s.ln() / *k as f64;
        }
        self.log_grad_unchecked(kappa, out);
        self.log_eval_unchecked(kappa)
    }

    pub fn grad(&self, kappa: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; kappa.len()];
        self.grad_into(kappa, &mut out)?;
        Ok(out)
    }

    fn log_grad_unchecked(&self, kappa: &[f64], out: &mut [f64]) {
        let n = kappa.len();
        match self {
            Self::SigmaKRoot { k } => {
                let s = esym_single(kappa, None, *k);
                for i in 0..n {
                    out[i] = esym_single(kappa, Some(i), k - 1) / (s * *k as f64);
                }
            }
            Self::QuotientRoot { k, l } => {
                let sk = esym_single(kappa, None, *k);
                let sl = esym_single(kappa, None, *l);
                let d = (*k - *l) as f64;
                for i in 0..n {
                    let gk = esym_single(kappa, Some(i), k - 1) / sk;
                    let gl = if *l == 0 { 0.0 } else { esym_single(kappa, Some(i), l - 1) / sl };
                    out[i] = (gk - gl) / d;
                }
            }
            Self::PowerMean { p } => {
                let m = kappa.iter().cloned().fold(f64::INFINITY, f64::min);
                let s: f64 = kappa.iter().map(|&x| (x / m).powf(*p)).sum();
                for i in 0..n {
                    // ∂ log F = κ_i^{p-1} / Σ κ_j^p
                    out[i] = (kappa[i] / m).powf(*p) / (kappa[i] * s);
                }
            }
            Self::Product { factors } => {
                out[..n].fill(0.0);
                let mut tmp = vec![0.0; n];
                for factor in factors.iter().filter(|f| f.weight > 0.0) {
                    factor.f.log_grad_unchecked(kappa, &mut tmp);
                    for i in 0..n {
                        out[i] += factor.weight * tmp[i];
                    }
                }
            }
        }
    }
}

pub fn f_eval(spec: &CurvatureFunctionSpec, kappa: &[f64]) -> Result<f64> {
    spec.eval(kappa)
}

pub fn f_grad(spec: &CurvatureFunctionSpec, kappa: &[f64]) -> Result<Vec<f64>> {
    spec.grad(kappa)
}

/// η = F(1,…,1)^{-β}.
pub fn eta_of(spec: &CurvatureFunctionSpec, n: usize, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Argument(format!("beta must be > 0, got {beta}")));
    }
    spec.validate(n)?;
    Ok(spec.eval(&vec![1.0; n])?.powf(-beta))
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// min over j of p_j^{1/j} − p_{j+1}^{1/(j+1)}, j = 1..m−1, where
/// p_j = σ_j / C(n, j). Non-negative on Γ_m^+, zero iff all κ_i agree.
pub fn newton_maclaurin_margin(kappa: &[f64], m: usize) -> Result<f64> {
    let n = kappa.len();
    if m < 2 || m > n {
        return Err(Error::Argument(format!("m = {m} outside 2..={n}")));
    }
    cone_check(kappa, ConeSpec::GammaKPlus { k: m })?;
    let mut e = vec![0.0; m + 1];
    esym_into(kappa, None, m, &mut e);
    let root = |j: usize| (e[j] / binomial(n, j)).powf(1.0 / j as f64);
    Ok((1..m)
        .map(|j| root(j) - root(j + 1))
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1.0)
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(&[1.0, 1.0, 1.0], 2).unwrap(), 3.0);
        assert_eq!(sigma(&[0.3, -2.0, 7.0], 0).unwrap(), 1.0);
        assert_eq!(sigma(&[1.0, 2.0, 3.0], 2).unwrap(), 11.0);
        assert!(matches!(sigma(&[1.0, 2.0], 3), Err(Error::Argument(_))));
    }

    #[test]
    fn sigma_grad_examples() {
        let g = sigma_grad(&[1.0, 2.0, 3.0], 3).unwrap();
        assert_eq!(g[0], 6.0);
        assert_eq!(sigma_grad(&[1.0, 1.0, 1.0], 2).unwrap(), vec![2.0; 3]);
        assert!(sigma_grad(&[1.0, 1.0], 0).is_err());
        assert!(sigma_grad(&[1.0, 1.0], 3).is_err());
    }

    #[test]
    fn sigma_second_partial_examples() {
        assert_eq!(sigma_second_partial(&[1.0, 2.0, 3.0], 2, 0, 1).unwrap(), 1.0);
        assert_eq!(sigma_second_partial(&[1.0, 2.0, 3.0], 3, 1, 1).unwrap(), 0.0);
        assert_eq!(sigma_second_partial(&[2.0, 2.0], 2, 0, 1).unwrap(), 1.0);
        assert!(sigma_second_partial(&[2.0, 2.0], 2, 0, 2).is_err());
    }

    #[test]
    fn cone_examples() {
        let k = [1.0, 1.0, -0.1];
        assert!(in_cone(&k, ConeSpec::GammaKPlus { k: 2 }));
        assert!(!in_cone(&k, ConeSpec::GammaPlus));
        assert!(!in_cone(&k, ConeSpec::GammaKPlus { k: 3 }));
        for cone in [ConeSpec::GammaPlus, ConeSpec::GammaKPlus { k: 1 }, ConeSpec::GammaKPlus { k: 3 }] {
            assert!(in_cone(&[1.0; 3], cone));
        }
        // boundary is excluded
        assert!(!in_cone(&[1.0, 0.0], ConeSpec::GammaPlus));
    }

    #[test]
    fn f_eval_examples() {
        let s2 = CurvatureFunctionSpec::SigmaKRoot { k: 2 };
        assert!(close(s2.eval(&[1.0; 3]).unwrap(), 3f64.sqrt(), 1e-15));
        let q = CurvatureFunctionSpec::QuotientRoot { k: 2, l: 1 };
        assert!(close(q.eval(&[1.0; 3]).unwrap(), 1.0, 1e-15));
        assert!(close(q.eval(&[2.0; 3]).unwrap(), 2.0, 1e-15));
        let pm = CurvatureFunctionSpec::PowerMean { p: -1.0 };
        assert!(close(pm.eval(&[1.0, 2.0]).unwrap(), 2.0 / 3.0, 1e-15));
    }

    #[test]
    fn f_eval_reports_failed_inequality() {
        let s2 = CurvatureFunctionSpec::SigmaKRoot { k: 2 };
        match s2.eval(&[1.0, -2.0, 0.5]) {
            Err(Error::Cone(msg)) => assert!(msg.contains("sigma_1"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let pm = CurvatureFunctionSpec::PowerMean { p: -2.0 };
        match pm.eval(&[1.0, -1.0]) {
            Err(Error::Cone(msg)) => assert!(msg.contains("kappa_2"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn f_grad_examples() {
        let s1 = CurvatureFunctionSpec::SigmaKRoot { k: 1 };
        for g in s1.grad(&[0.3, 2.0, 5.0]).unwrap() {
            assert!(close(g, 1.0, 1e-15));
        }
        let s2 = CurvatureFunctionSpec::SigmaKRoot { k: 2 };
        for g in s2.grad(&[1.0; 3]).unwrap() {
            assert!(close(g, 1.0 / 3f64.sqrt(), 1e-14));
        }
    }

    #[test]
    fn eta_examples() {
        let s2 = CurvatureFunctionSpec::SigmaKRoot { k: 2 };
        assert!(close(eta_of(&s2, 2, 0.7).unwrap(), 1.0, 1e-15));
        assert!(close(eta_of(&s2, 3, 2.0).unwrap(), 1.0 / 3.0, 1e-14));
        let s1 = CurvatureFunctionSpec::SigmaKRoot { k: 1 };
        assert!(close(eta_of(&s1, 3, 1.0).unwrap(), 1.0 / 3.0, 1e-15));
        assert!(eta_of(&s1, 3, 0.0).is_err());
    }

    #[test]
    fn newton_maclaurin_examples() {
        assert!(newton_maclaurin_margin(&[1.0; 3], 3).unwrap().abs() < 1e-14);
        let m = newton_maclaurin_margin(&[1.0, 2.0, 3.0], 2).unwrap();
        assert!(close(m, 2.0 - (11.0f64 / 3.0).sqrt(), 1e-14));
        assert!(m > 0.0);
        assert!(newton_maclaurin_margin(&[2.0, 2.0], 2).unwrap().abs() < 1e-14);
        assert!(matches!(
            newton_maclaurin_margin(&[1.0, -3.0], 2),
            Err(Error::Cone(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(CurvatureFunctionSpec::SigmaKRoot { k: 4 }.validate(3).is_err());
        assert!(CurvatureFunctionSpec::QuotientRoot { k: 2, l: 2 }.validate(3).is_err());
        assert!(CurvatureFunctionSpec::PowerMean { p: 0.5 }.validate(3).is_err());
        let bad = CurvatureFunctionSpec::Product {
            factors: vec![
                WeightedFactor { weight: 0.5, f: CurvatureFunctionSpec::SigmaKRoot { k: 1 } },
                WeightedFactor { weight: 0.4, f: CurvatureFunctionSpec::SigmaKRoot { k: 2 } },
            ],
        };
        assert!(bad.validate(3).is_err());
    }

    #[test]
    fn product_cone_is_intersection() {
        let spec = CurvatureFunctionSpec::Product {
            factors: vec![
                WeightedFactor { weight: 0.5, f: CurvatureFunctionSpec::SigmaKRoot { k: 1 } },
                WeightedFactor { weight: 0.5, f: CurvatureFunctionSpec::SigmaKRoot { k: 3 } },
            ],
        };
        assert_eq!(spec.natural_cone(), ConeSpec::GammaKPlus { k: 3 });
        let with_pm = CurvatureFunctionSpec::Product {
            factors: vec![
                WeightedFactor { weight: 0.25, f: CurvatureFunctionSpec::SigmaKRoot { k: 2 } },
                WeightedFactor { weight: 0.75, f: CurvatureFunctionSpec::PowerMean { p: -1.0 } },
            ],
        };
        assert_eq!(with_pm.natural_cone(), ConeSpec::GammaPlus);
    }
}
