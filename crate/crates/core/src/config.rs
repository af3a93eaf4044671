//! Run configuration: a TOML file with sections [flow], [F], [G], [grid],
//! [initial] and [output].
//!
//! ```toml
//! [flow]
//! psi = "identity"          # identity | neg_reciprocal | power (with psi_power)
//! beta = 1.0
//! dt_safety = 0.2
//! t_max = 40.0
//! tol_residual = 1e-6
//!
//! [F]
//! kind = "sigma_k_root"
//! k = 2
//!
//! [G]                       # G = c * psi * u^a * rho^b
//! c = 1.0
//! a = 0.0
//! b = -2.0
//! psi = [{ s = 0.2, v = [0.0, 0.0, 1.0] }]
//!
//! [grid]
//! mode = "axisym"
//! n = 2
//! m_theta = 64
//!
//! [initial]
//! kind = "constant"
//! radius = 1.3
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flow::{FlowConfig, InitialKind};
use crate::speed::{PsiMode, PsiTerm, SpeedSpec};
use crate::spheregrid::GridSpec;
use crate::symfunc::{ConeSpec, CurvatureFunctionSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub psi: String,
    pub psi_power: Option<f64>,
    pub beta: f64,
    pub dt_safety: Option<f64>,
    pub t_max: Option<f64>,
    pub tol_residual: Option<f64>,
    pub tol_stall: Option<f64>,
    pub cadence: Option<usize>,
    pub polar_filter: Option<bool>,
    pub guard: Option<ConeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedSection {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub psi: Vec<PsiTerm>,
    /// The values describe G̃ = 1/G instead of G.
    #[serde(default)]
    pub reciprocal: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    /// Write mesh_NNN.obj every this many steps (full-sphere grids; 0 = off).
    #[serde(default)]
    pub obj_every: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub flow: FlowSection,
    #[serde(rename = "F", alias = "f")]
    pub f: CurvatureFunctionSpec,
    #[serde(rename = "G", alias = "g")]
    pub g: SpeedSection,
    pub grid: GridSpec,
    pub initial: InitialKind,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub flow: FlowConfig,
    pub initial: InitialKind,
    pub output: OutputSection,
}

/// 1-based line of `key` inside `[section]`, if present.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut section_line = None;
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current.eq_ignore_ascii_case(section) && section_line.is_none() {
                section_line = Some(idx + 1);
            }
            continue;
        }
        if current.eq_ignore_ascii_case(section) {
            if let Some(rest) = t.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(idx + 1);
                }
            }
        }
    }
    section_line
}

struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn err(&self, section: &str, key: &str, msg: impl Into<String>) -> Error {
        let msg = msg.into();
        match key_line(self.text, section, key) {
            Some(line) => Error::Config(format!("line {line}: [{section}] {key}: {msg}")),
            None => Error::Config(format!("[{section}] {key}: {msg}")),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            let msg = e.message().trim().to_string();
            match line {
                Some(l) => Error::Config(format!("line {l}: {msg}")),
                None => Error::Config(msg),
            }
        })?;
        Self::from_raw(raw, text)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn from_raw(raw: RawConfig, text: &str) -> Result<Self> {
        let loc = Locator { text };
        let fs = &raw.flow;
        let psi_mode = match fs.psi.as_str() {
            "identity" => PsiMode::Identity,
            "neg_reciprocal" => PsiMode::NegReciprocal,
            "power" => {
                let m = fs.psi_power.ok_or_else(|| loc.err("flow", "psi", "power mode needs psi_power"))?;
                if !(m > 0.0 && m.is_finite()) {
                    return Err(loc.err("flow", "psi_power", format!("must be > 0, got {m}")));
                }
                PsiMode::Power { m }
            }
            other => {
                return Err(loc.err(
                    "flow",
                    "psi",
                    format!("unknown mode '{other}' (expected identity, neg_reciprocal or power)"),
                ))
            }
        };
        if !(fs.beta > 0.0 && fs.beta.is_finite()) {
            return Err(loc.err("flow", "beta", format!("must be > 0, got {}", fs.beta)));
        }
        let g = &raw.g;
        if !(g.c > 0.0 && g.c.is_finite()) {
            return Err(loc.err("G", "c", format!("must be > 0, got {}", g.c)));
        }
        let mut g_spec = SpeedSpec { c: g.c, a: g.a, b: g.b, psi: g.psi.clone() };
        if g.reciprocal {
            g_spec = g_spec.reciprocal();
        }
        let mut flow = FlowConfig::new(psi_mode, fs.beta, raw.f.clone(), g_spec, raw.grid);
        if let Some(v) = fs.dt_safety {
            if !(v > 0.0 && v <= 1.0) {
                return Err(loc.err("flow", "dt_safety", format!("must lie in (0, 1], got {v}")));
            }
            flow.dt_safety = v;
        }
        if let Some(v) = fs.t_max {
            if !(v > 0.0 && v.is_finite()) {
                return Err(loc.err("flow", "t_max", format!("must be finite and > 0, got {v}")));
            }
            flow.t_max = v;
        }
        if let Some(v) = fs.tol_residual {
            if !(v > 0.0) {
                return Err(loc.err("flow", "tol_residual", format!("must be > 0, got {v}")));
            }
            flow.tol_residual = v;
        }
        if let Some(v) = fs.tol_stall {
            flow.tol_stall = v;
        }
        if let Some(v) = fs.cadence {
            if v == 0 {
                return Err(loc.err("flow", "cadence", "must be >= 1"));
            }
            flow.cadence = v;
        }
        if let Some(v) = fs.polar_filter {
            flow.polar_filter = v;
        }
        if let Some(cone) = fs.guard {
            if cone != flow.f_spec.natural_cone() {
                return Err(loc.err(
                    "flow",
                    "guard",
                    format!("{cone:?} does not match the natural cone {:?} of F", flow.f_spec.natural_cone()),
                ));
            }
        }
        crate::spheregrid::Grid::build(raw.grid).map_err(|e| loc.err("grid", "mode", e.to_string()))?;
        let n = match raw.grid {
            GridSpec::Axisym { n, .. } => n,
            GridSpec::FullS2 { .. } => 2,
        };
        flow.f_spec.validate(n).map_err(|e| loc.err("F", "kind", e.to_string()))?;
        flow.g_spec.validate(n + 1).map_err(|e| loc.err("G", "psi", e.to_string()))?;
        flow.validate().map_err(|e| loc.err("G", "psi", e.to_string()))?;
        Ok(Self { initial: raw.initial, output: raw.output.clone(), raw, flow })
    }

    /// Command-line overrides of scalar fields.
    pub fn apply_overrides(&mut self, t_max: Option<f64>, tol: Option<f64>) -> Result<()> {
        if let Some(v) = t_max {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("--t-max must be finite and > 0, got {v}")));
            }
            self.flow.t_max = v;
            self.raw.flow.t_max = Some(v);
        }
        if let Some(v) = tol {
            if !(v > 0.0) {
                return Err(Error::Config(format!("--tol must be > 0, got {v}")));
            }
            self.flow.tol_residual = v;
            self.raw.flow.tol_residual = Some(v);
        }
        Ok(())
    }

    /// SHA-256 of the parsed configuration, independent of formatting.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.raw).expect("config serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[flow]
psi = "identity"
beta = 1.0
t_max = 20.0

[F]
kind = "sigma_k_root"
k = 2

[G]
c = 1.0
a = 0.0
b = -2.0

[grid]
mode = "axisym"
n = 2
m_theta = 32

[initial]
kind = "constant"
radius = 1.3
"#;

    #[test]
    fn parses_base_config() {
        let cfg = RunConfig::parse(BASE).unwrap();
        assert_eq!(cfg.flow.psi_mode, PsiMode::Identity);
        assert_eq!(cfg.flow.t_max, 20.0);
        assert_eq!(cfg.flow.dt_safety, 0.2);
        assert_eq!(cfg.initial, InitialKind::Constant { radius: 1.3 });
    }

    #[test]
    fn zero_dt_safety_is_located() {
        let text = BASE.replace("t_max = 20.0", "t_max = 20.0\ndt_safety = 0");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line 6") && err.contains("dt_safety"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let text = BASE.replace("b = -2.0", "b = ");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line 14"), "{err}");
        let text = BASE.replace("beta = 1.0", "beta = 1.0\nbogus = 3");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line 5") && err.contains("bogus"), "{err}");
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = RunConfig::parse(BASE).unwrap().hash();
        let spaced = BASE.replace(" = ", "   =   ").replace("\n[", "\n\n# comment\n[");
        assert_eq!(a, RunConfig::parse(&spaced).unwrap().hash());
        let other = RunConfig::parse(&BASE.replace("radius = 1.3", "radius = 1.2")).unwrap().hash();
        assert_ne!(a, other);
    }

    #[test]
    fn reciprocal_flag_inverts_g() {
        let text = BASE.replace("b = -2.0", "b = 3.0\nreciprocal = true");
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.flow.g_spec.b, -3.0);
    }
}
