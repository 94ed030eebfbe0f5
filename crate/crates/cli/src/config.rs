//! Run configuration: lattice, model, numerics, output and the experiment to run.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scarlab_core::evolve::EvolveOptions;
use scarlab_core::lattice::SiteClass;
use scarlab_core::{LatticeSpec, Model, SiteGraph, Sublattice};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub description: String,
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub numeric: NumericConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub experiment: Experiment,
}

/// Model parameters. Site `r` gets frequency `omega_{sub(r)} * (1 - g_{class(r)})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub a: f64,
    pub b: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub g_corner: f64,
    pub g_edge: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { a: 0.0, b: 0.0, omega_a: 1.0, omega_b: 1.0, g_corner: 0.0, g_edge: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Param {
    A,
    B,
    OmegaA,
    OmegaB,
    GCorner,
    GEdge,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::A => "a",
            Param::B => "b",
            Param::OmegaA => "omega_a",
            Param::OmegaB => "omega_b",
            Param::GCorner => "g_corner",
            Param::GEdge => "g_edge",
        }
    }
}

impl ModelConfig {
    pub fn with(&self, p: Param, v: f64) -> Self {
        let mut m = self.clone();
        match p {
            Param::A => m.a = v,
            Param::B => m.b = v,
            Param::OmegaA => m.omega_a = v,
            Param::OmegaB => m.omega_b = v,
            Param::GCorner => m.g_corner = v,
            Param::GEdge => m.g_edge = v,
        }
        m
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let vals = [self.a, self.b, self.omega_a, self.omega_b, self.g_corner, self.g_edge];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Validation("model parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn build(&self, graph: &SiteGraph) -> Model {
        let freq = (0..graph.n_sites())
            .map(|r| {
                let w = match graph.sublattice(r) {
                    Sublattice::A => self.omega_a,
                    Sublattice::B => self.omega_b,
                };
                let g = match graph.site_class(r) {
                    SiteClass::Corner => self.g_corner,
                    SiteClass::Edge => self.g_edge,
                    SiteClass::Bulk => 0.0,
                };
                w * (1.0 - g)
            })
            .collect();
        let model = Model { freq, deform: None };
        if self.a != 0.0 || self.b != 0.0 {
            model.with_deformation(self.a, self.b)
        } else {
            model
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericConfig {
    pub dt: f64,
    pub t_max: f64,
    pub krylov_dim: usize,
    pub tol: f64,
    pub dense_max_dim: usize,
    pub dense_cap: usize,
    pub dim_cap: Option<usize>,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_max: 20.0,
            krylov_dim: 30,
            tol: 1e-10,
            dense_max_dim: 2048,
            dense_cap: scarlab_core::eigen::DEFAULT_DENSE_CAP,
            dim_cap: None,
        }
    }
}

impl NumericConfig {
    pub fn evolve_options(&self) -> EvolveOptions<f64> {
        EvolveOptions { krylov_dim: self.krylov_dim, tol: self.tol, dense_max_dim: self.dense_max_dim, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Evolve(EvolveExp),
    Spectrum(SpectrumExp),
    Fsa(FsaExp),
    Tdvp(TdvpExp),
    Optimize(OptimizeExp),
    Scan(ScanExp),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Evolve(_) => "evolve",
            Experiment::Spectrum(_) => "spectrum",
            Experiment::Fsa(_) => "fsa",
            Experiment::Tdvp(_) => "tdvp",
            Experiment::Optimize(_) => "optimize",
            Experiment::Scan(_) => "scan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Initial {
    #[default]
    Ma,
    Mb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    Fidelity,
    DomainWall,
    DensityA,
    DensityB,
    SigmaYA,
    SigmaYB,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::Fidelity => "fidelity",
            Observable::DomainWall => "domain_wall",
            Observable::DensityA => "density_a",
            Observable::DensityB => "density_b",
            Observable::SigmaYA => "sigma_y_a",
            Observable::SigmaYB => "sigma_y_b",
        }
    }
}

/// A labelled model replacing the top-level one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    #[serde(default)]
    pub model: ModelConfig,
}

fn default_observables() -> Vec<Observable> {
    vec![Observable::Fidelity]
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveExp {
    #[serde(default)]
    pub initial: Initial,
    #[serde(default = "default_observables")]
    pub observables: Vec<Observable>,
    #[serde(default)]
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumExp {
    #[serde(default = "yes")]
    pub entropy: bool,
    #[serde(default = "default_windows")]
    pub windows: usize,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_windows() -> usize {
    scarlab_core::eigen::DEFAULT_WINDOWS
}

fn default_floor() -> f64 {
    scarlab_core::eigen::DEFAULT_OVERLAP_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CasimirExp {
    #[serde(default = "default_periods")]
    pub periods: f64,
    #[serde(default = "default_search")]
    pub t_search: f64,
}

fn default_periods() -> f64 {
    3.0
}

fn default_search() -> f64 {
    12.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsaExp {
    #[serde(default)]
    pub overlaps: bool,
    #[serde(default)]
    pub casimir: Option<CasimirExp>,
    #[serde(default)]
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdvpExp {
    /// Defaults to the lattice's sublattice connectivities.
    #[serde(default)]
    pub c_a: Option<u32>,
    #[serde(default)]
    pub c_b: Option<u32>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub omegas: Vec<f64>,
    #[serde(default)]
    pub find_omega_c: bool,
    #[serde(default = "default_bracket")]
    pub bracket: [f64; 2],
    #[serde(default = "default_bisect_tol")]
    pub tol: f64,
    /// Compare TTS observables with exact dynamics on the lattice.
    #[serde(default)]
    pub compare_exact: bool,
}

fn default_epsilon() -> f64 {
    4e-4
}

fn default_bracket() -> [f64; 2] {
    [0.7, 1.0]
}

fn default_bisect_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Deformation,
    Boundary,
    Frequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.from];
        }
        (0..self.steps).map(|k| self.from + (self.to - self.from) * k as f64 / (self.steps - 1) as f64).collect()
    }

    fn validate(&self, what: &str) -> Result<(), CliError> {
        if self.steps == 0 || !self.from.is_finite() || !self.to.is_finite() {
            return Err(CliError::Validation(format!("{what}: need finite bounds and steps >= 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeExp {
    pub target: Target,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    #[serde(default = "default_xtol")]
    pub xtol: f64,
    /// Window searched for the reference revival.
    #[serde(default = "default_search")]
    pub t_search: f64,
    #[serde(default)]
    pub freeze_edge: bool,
    /// Frequency sweep reported alongside the frequency optimum.
    #[serde(default)]
    pub sweep: Option<Range>,
}

fn default_max_evals() -> usize {
    400
}

fn default_xtol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Leakage,
    LiteralVariance,
    Fidelity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: Param,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl Axis {
    pub fn range(&self) -> Range {
        Range { from: self.from, to: self.to, steps: self.steps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanExp {
    pub quantity: Quantity,
    pub x: Axis,
    #[serde(default)]
    pub y: Option<Axis>,
    #[serde(default = "default_search")]
    pub t_search: f64,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Validation(one_line(&e.to_string())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    /// SHA-256 of the canonical TOML, ignoring the output location.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        Sha256::digest(c.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.lattice.validate().map_err(CliError::from)?;
        self.model.validate()?;
        let n = &self.numeric;
        if !(n.dt > 0.0 && n.dt.is_finite()) || !(n.t_max > 0.0 && n.t_max.is_finite()) {
            return Err(CliError::Validation("numeric.dt and numeric.t_max must be positive".into()));
        }
        if n.dt > n.t_max {
            return Err(CliError::Validation("numeric.dt exceeds numeric.t_max".into()));
        }
        if n.krylov_dim < 2 || !(n.tol > 0.0) {
            return Err(CliError::Validation("numeric.krylov_dim must be >= 2 and numeric.tol > 0".into()));
        }
        if self.output.dir.is_empty() {
            return Err(CliError::Validation("output.dir must not be empty".into()));
        }
        let variants = |v: &[Variant]| -> Result<(), CliError> {
            for x in v {
                x.model.validate()?;
                if x.label.is_empty() || x.label.contains(',') {
                    return Err(CliError::Validation(format!("invalid variant label '{}'", x.label)));
                }
            }
            Ok(())
        };
        match &self.experiment {
            Experiment::Evolve(e) => {
                if e.observables.is_empty() {
                    return Err(CliError::Validation("evolve: no observables requested".into()));
                }
                variants(&e.variants)?;
            }
            Experiment::Spectrum(s) => {
                if s.windows == 0 || !(s.floor >= 0.0) {
                    return Err(CliError::Validation("spectrum: windows must be >= 1 and floor >= 0".into()));
                }
            }
            Experiment::Fsa(f) => {
                variants(&f.variants)?;
                if let Some(c) = &f.casimir {
                    if !(c.periods > 0.0) || !(c.t_search > 0.0) {
                        return Err(CliError::Validation("fsa.casimir: periods and t_search must be positive".into()));
                    }
                }
            }
            Experiment::Tdvp(t) => {
                if !(t.epsilon >= 0.0) || t.omegas.iter().any(|w| !(*w > 0.0)) {
                    return Err(CliError::Validation("tdvp: epsilon must be >= 0 and omegas positive".into()));
                }
                if !(t.bracket[0] > 0.0 && t.bracket[1] > t.bracket[0]) || !(t.tol > 0.0) {
                    return Err(CliError::Validation("tdvp: invalid bracket or tolerance".into()));
                }
                if t.omegas.is_empty() && !t.find_omega_c {
                    return Err(CliError::Validation("tdvp: nothing to do (no omegas, find_omega_c off)".into()));
                }
            }
            Experiment::Optimize(o) => {
                if o.max_evals == 0 || !(o.xtol > 0.0) || !(o.t_search > 0.0) {
                    return Err(CliError::Validation("optimize: invalid max_evals, xtol or t_search".into()));
                }
                if let Some(s) = &o.sweep {
                    s.validate("optimize.sweep")?;
                }
            }
            Experiment::Scan(s) => {
                s.x.range().validate("scan.x")?;
                if let Some(y) = &s.y {
                    y.range().validate("scan.y")?;
                    if y.param == s.x.param {
                        return Err(CliError::Validation("scan: x and y scan the same parameter".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[lattice]
kind = "square"
lx = 4
ly = 4
boundary = "periodic"

[experiment]
kind = "evolve"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.numeric.dt, 0.01);
        assert_eq!(c.model, ModelConfig::default());
        match &c.experiment {
            Experiment::Evolve(e) => assert_eq!(e.observables, vec![Observable::Fidelity]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip_and_hash() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        let again = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
        assert_eq!(c.hash().len(), 64);
        let mut d = c.clone();
        d.model.a = 0.01;
        assert_ne!(c.hash(), d.hash());
        let mut e = c.clone();
        e.output.dir = "elsewhere".into();
        assert_eq!(c.hash(), e.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        for bad in [
            format!("{MINIMAL}\nextra = 1\n"),
            MINIMAL.replace("boundary = \"periodic\"", "boundary = \"periodic\"\ncolor = 3"),
            MINIMAL.replace("kind = \"evolve\"", "kind = \"evolve\"\nspeed = 2"),
            format!("{MINIMAL}\n[model]\nalpha = 1.0\n"),
        ] {
            assert!(matches!(RunConfig::from_toml(&bad), Err(CliError::Validation(_))), "{bad}");
        }
    }

    #[test]
    fn semantic_validation() {
        let odd = MINIMAL.replace("lx = 4", "lx = 5");
        assert!(matches!(RunConfig::from_toml(&odd), Err(CliError::Validation(_))));
        let neg = format!("{MINIMAL}\n[numeric]\ndt = -1.0\n");
        assert!(matches!(RunConfig::from_toml(&neg), Err(CliError::Validation(_))));
        let idle = MINIMAL.replace("kind = \"evolve\"", "kind = \"tdvp\"");
        assert!(matches!(RunConfig::from_toml(&idle), Err(CliError::Validation(_))));
    }

    #[test]
    fn ranges() {
        assert_eq!(Range { from: 0.0, to: 1.0, steps: 3 }.points(), vec![0.0, 0.5, 1.0]);
        assert_eq!(Range { from: 0.2, to: 1.0, steps: 1 }.points(), vec![0.2]);
    }
}
