//! Run configuration in TOML.
//!
//! ```toml
//! seed = 7
//!
//! [mesh]
//! kind = "interval"      # or "disc" with `level`
//! elements = 64
//!
//! [potential.bulk]
//! name = "logarithmic"   # regular | logarithmic | obstacle
//! c = 2.0
//!
//! [coupling]
//! kind = "default"       # default | zero | affine
//!
//! [scheme]
//! eps = 0.01
//! n_blocks = 10
//! dt = 1e-3
//! final_time = 0.1
//!
//! [initial.mu]
//! profile = "cos_bump"
//! base = 1.0
//! amplitude = 1.0
//! modes = 2.0
//!
//! [initial.rho]
//! profile = "random"
//! lo = -0.5
//! hi = 0.5
//!
//! [control]
//! kind = "sinusoid"
//! amplitude = 0.5
//! frequency = 10.0
//! ```
//!
//! Omitted sections take the defaults of the reference problem. The boundary
//! potential defaults to the bulk one.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretization::Mesh;
use crate::experiments::Setup;
use crate::graphs::{CouplingFunction, Interval, PotentialSplit};
use crate::stepper::{BoundaryControl, Potentials, Problem, SchemeConfig, StepError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("{0}")]
    Io(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Interval {
        elements: usize,
        #[serde(default = "unit")]
        length: f64,
    },
    Disc {
        level: usize,
    },
}

fn unit() -> f64 {
    1.0
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec::Interval { elements: 64, length: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PotentialName {
    #[default]
    Regular,
    Logarithmic,
    Obstacle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub name: PotentialName,
    /// Coefficient of `−c r²`; defaults to 2 (logarithmic) and 1 (obstacle).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl PotentialSpec {
    pub fn build(&self) -> Result<PotentialSplit, String> {
        match self.name {
            PotentialName::Regular => Ok(PotentialSplit::regular()),
            PotentialName::Logarithmic => {
                let c = self.c.unwrap_or(2.0);
                PotentialSplit::logarithmic(c)
                    .map_err(|_| format!("logarithmic potential needs c > 1 so that W is nonconvex (got c = {c})"))
            }
            PotentialName::Obstacle => {
                let c = self.c.unwrap_or(1.0);
                PotentialSplit::obstacle(c).map_err(|_| format!("double-obstacle potential needs c > 0 (got c = {c})"))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PotentialsSpec {
    #[serde(default)]
    pub bulk: PotentialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<PotentialSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingSpec {
    /// `g(r) = (1 + r)/2`
    #[default]
    Default,
    Zero,
    /// `g(r) = intercept + slope · r` on `[−1, 1]`.
    Affine {
        intercept: f64,
        slope: f64,
    },
}

impl CouplingSpec {
    pub fn build(&self) -> Result<CouplingFunction, String> {
        match self {
            CouplingSpec::Default => Ok(CouplingFunction::default_coupling()),
            CouplingSpec::Zero => Ok(CouplingFunction::zero()),
            CouplingSpec::Affine { intercept, slope } => {
                CouplingFunction::affine(*intercept, *slope, Interval::closed(-1.0, 1.0))
                    .map_err(|e| format!("(A5): {e}"))
            }
        }
    }
}

/// Named initial profiles, evaluated at node coordinates `(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `base + amplitude · cos(modes · π · x)`
    CosBump {
        base: f64,
        amplitude: f64,
        #[serde(default = "unit")]
        modes: f64,
    },
    /// `left + (right − left) · ½(1 + tanh((x − center)/width))`
    SmoothedStep {
        left: f64,
        right: f64,
        center: f64,
        width: f64,
    },
    /// Independent uniform values in `[lo, hi]` drawn from the run seed.
    Random {
        lo: f64,
        hi: f64,
    },
    /// CSV file with a `node,value` header and one row per node.
    Csv {
        path: PathBuf,
    },
}

impl Profile {
    /// Nodal values on `mesh`; `stream` separates the random streams of μ₀ and ρ₀.
    pub fn evaluate(&self, mesh: &Mesh, seed: u64, stream: u64) -> Result<DVector<f64>, String> {
        let xs = mesh.coords();
        let n = mesh.n_nodes();
        Ok(match self {
            Profile::Constant { value } => DVector::from_element(n, *value),
            Profile::CosBump { base, amplitude, modes } => {
                DVector::from_fn(n, |i, _| base + amplitude * (modes * PI * xs[i][0]).cos())
            }
            Profile::SmoothedStep { left, right, center, width } => {
                if !(*width > 0.0) {
                    return Err(format!("smoothed step needs width > 0 (got {width})"));
                }
                DVector::from_fn(n, |i, _| left + (right - left) * 0.5 * (1.0 + ((xs[i][0] - center) / width).tanh()))
            }
            Profile::Random { lo, hi } => {
                if !(lo <= hi) {
                    return Err(format!("random profile needs lo <= hi (got {lo} > {hi})"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                DVector::from_fn(n, |_, _| if lo == hi { *lo } else { rng.random_range(*lo..=*hi) })
            }
            Profile::Csv { path } => crate::io::read_nodal_csv(path, n).map_err(|e| e.to_string())?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSpec {
    pub mu: Profile,
    pub rho: Profile,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            mu: Profile::CosBump { base: 1.0, amplitude: 1.0, modes: 2.0 },
            rho: Profile::CosBump { base: 0.0, amplitude: 0.6, modes: 1.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude · sin(2π · frequency · t)` on all of `Γ`.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
    },
    /// `sin²` bump on `[start, end]` at one boundary node.
    Pulse {
        amplitude: f64,
        node: usize,
        start: f64,
        end: f64,
    },
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec::Sinusoid { amplitude: 0.5, frequency: 10.0 }
    }
}

impl ControlSpec {
    pub fn build(&self, n_boundary: usize) -> Result<BoundaryControl, String> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match *self {
            ControlSpec::Zero => Ok(BoundaryControl::Zero),
            ControlSpec::Constant { value } if finite(&[value]) => Ok(BoundaryControl::Constant(value)),
            ControlSpec::Sinusoid { amplitude, frequency } if finite(&[amplitude, frequency]) => {
                Ok(BoundaryControl::Sinusoid { amplitude, frequency })
            }
            ControlSpec::Pulse { amplitude, node, start, end } if finite(&[amplitude, start, end]) => {
                if node >= n_boundary {
                    return Err(format!("pulse node {node} out of range: the boundary has {n_boundary} nodes"));
                }
                if !(end > start) {
                    return Err(format!("pulse needs end > start (got [{start}, {end}])"));
                }
                Ok(BoundaryControl::Pulse { amplitude, node, start, end })
            }
            _ => Err("(A2): u_Γ must lie in H¹(0,T;H_Γ); control parameters must be finite".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Write a snapshot every this many steps (the final state is always written).
    pub snapshot_every: usize,
    pub vtk: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out"), snapshot_every: 0, vtk: false }
    }
}

/// Parameter varied by a convergence study or sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    Dt,
    Eps,
    Blocks,
    Elements,
    Eta,
    Amplitude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub parameter: Parameter,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySpec {
    /// Perturbation profile `φ`; the second control is `u + p φ`.
    pub perturbation: ControlSpec,
    pub scales: Vec<f64>,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        StabilitySpec { perturbation: ControlSpec::Constant { value: 1.0 }, scales: vec![0.1, 0.05, 0.025] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub potential: PotentialsSpec,
    #[serde(default)]
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub control: ControlSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<StudySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<StudySpec>,
}

fn negative_mu0(min: f64) -> String {
    format!("(A1): μ₀ has negative entries (min {min}); μ₀ ≥ 0 a.e. in Ω is required")
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
    (line, column)
}

/// Parse only; no semantic checks.
pub fn parse_raw(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
        ConfigError::Syntax { line, column, message: e.message().to_string() }
    })
}

/// Parse and validate; the result is guaranteed to [`RunConfig::build`].
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg = parse_raw(text)?;
    cfg.build()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes")
    }

    /// Copy with one study parameter set to `value`.
    pub fn with_parameter(&self, parameter: Parameter, value: f64) -> Result<RunConfig, String> {
        let mut out = self.clone();
        let count = |what: &str| {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(format!("{what} must be a positive integer, got {value}"))
            }
        };
        match parameter {
            Parameter::Dt => out.scheme.dt = value,
            Parameter::Eps => out.scheme.eps = value,
            Parameter::Eta => out.scheme.eta = value,
            Parameter::Blocks => out.scheme.n_blocks = count("blocks")?,
            Parameter::Elements => match &mut out.mesh {
                MeshSpec::Interval { elements, .. } => *elements = count("elements")?,
                MeshSpec::Disc { level } => *level = count("disc level")?,
            },
            Parameter::Amplitude => match &mut out.control {
                ControlSpec::Zero => return Err("the zero control has no amplitude".into()),
                ControlSpec::Constant { value: v } => *v = value,
                ControlSpec::Sinusoid { amplitude, .. } | ControlSpec::Pulse { amplitude, .. } => *amplitude = value,
            },
        }
        Ok(out)
    }

    pub fn build_mesh(&self) -> Result<Mesh, String> {
        match self.mesh {
            MeshSpec::Interval { elements, length } => Mesh::interval(elements, length),
            MeshSpec::Disc { level } => Mesh::disc(level),
        }
        .map_err(|e| format!("mesh: {e}"))
    }

    /// Build the problem, collecting every violation instead of stopping at the first.
    pub fn build(&self) -> Result<Setup, ConfigError> {
        let mut errors = Vec::new();
        if let Err(e) = self.scheme.validate() {
            errors.push(e.to_string());
        }
        let mesh = self.build_mesh().map_err(|e| errors.push(e)).ok();
        let bulk = self.potential.bulk.build().map_err(|e| errors.push(format!("potential.bulk: {e}"))).ok();
        let boundary = match &self.potential.boundary {
            Some(b) => b.build().map_err(|e| errors.push(format!("potential.boundary: {e}"))).ok(),
            None => bulk.clone(),
        };
        let coupling = self.coupling.build().map_err(|e| errors.push(format!("coupling: {e}"))).ok();
        let (Some(mesh), Some(bulk), Some(boundary), Some(coupling)) = (mesh.clone(), bulk, boundary, coupling) else {
            // still report data violations that do not depend on the potentials
            if let Some(mesh) = &mesh {
                if let Ok(mu0) = self.initial.mu.evaluate(mesh, self.seed, 0) {
                    if let Some(min) = mu0.iter().cloned().reduce(f64::min).filter(|m| *m < 0.0) {
                        errors.push(negative_mu0(min));
                    }
                }
            }
            return Err(ConfigError::Invalid(errors));
        };
        let mut problem = match Problem::new(mesh, Potentials { bulk, boundary }, coupling) {
            Ok(p) => p,
            Err(e) => {
                errors.push(format!("mesh: {e}"));
                return Err(ConfigError::Invalid(errors));
            }
        };
        match self.initial.mu.evaluate(&problem.mesh, self.seed, 0) {
            Ok(mu0) => {
                if let Some(min) = mu0.iter().cloned().reduce(f64::min).filter(|m| *m < 0.0) {
                    errors.push(negative_mu0(min));
                }
                problem.mu0 = mu0;
            }
            Err(e) => errors.push(format!("initial.mu: {e}")),
        }
        match self.initial.rho.evaluate(&problem.mesh, self.seed, 1) {
            Ok(rho0) => problem.rho0 = rho0,
            Err(e) => errors.push(format!("initial.rho: {e}")),
        }
        match self.control.build(problem.ops.n_boundary()) {
            Ok(c) => problem.control = c,
            Err(e) => errors.push(format!("control: {e}")),
        }
        if errors.is_empty() {
            if let Err(e) = problem.validate(&self.scheme) {
                errors.push(match e {
                    StepError::Assumption { code, message } => format!("{code}: {message}"),
                    other => other.to_string(),
                });
            }
        }
        if !errors.is_empty() {
            return Err(ConfigError::Invalid(errors));
        }
        Ok(Setup { cfg: self.scheme.clone(), problem })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("[mesh]\nkind = \"interval\"\nelements = 8\n").unwrap();
        assert_eq!(cfg.scheme, SchemeConfig::default());
        assert_eq!(cfg.mesh, MeshSpec::Interval { elements: 8, length: 1.0 });
        assert_eq!(cfg.control, ControlSpec::default());
    }

    #[test]
    fn low_log_coefficient_is_rejected() {
        let err = parse_config("[potential.bulk]\nname = \"logarithmic\"\nc = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("c > 1"), "{err}");
    }

    #[test]
    fn negative_mu0_cites_a1() {
        let text =
            "[initial.mu]\nprofile = \"constant\"\nvalue = -1.0\n[initial.rho]\nprofile = \"constant\"\nvalue = 0.0\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("(A1)"), "{err}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse_config("seed = 1\n[scheme]\neps = = 0.1\n").unwrap_err();
        match err {
            ConfigError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let err = parse_config("seed = 1\n\n[scheme]\nbogus = 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 4, .. }), "{err}");
    }

    #[test]
    fn parameters_apply() {
        let base = RunConfig::default();
        assert_eq!(base.with_parameter(Parameter::Blocks, 4.0).unwrap().scheme.n_blocks, 4);
        assert!(base.with_parameter(Parameter::Blocks, 2.5).is_err());
        let c = base.with_parameter(Parameter::Amplitude, 0.1).unwrap();
        assert_eq!(c.control, ControlSpec::Sinusoid { amplitude: 0.1, frequency: 10.0 });
        let m = base.with_parameter(Parameter::Elements, 16.0).unwrap();
        assert_eq!(m.mesh, MeshSpec::Interval { elements: 16, length: 1.0 });
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig { seed: 99, ..RunConfig::default() };
        cfg.potential.boundary = Some(PotentialSpec { name: PotentialName::Logarithmic, c: Some(1.5) });
        cfg.sweep = Some(StudySpec { parameter: Parameter::Eps, values: vec![0.1, 0.03] });
        cfg.scheme.eps = 0.1 + 0.2;
        let back = parse_raw(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }
}
