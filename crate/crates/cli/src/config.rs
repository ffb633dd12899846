//! Run configuration: a TOML file with one section per concern.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sepinn::geometry::SampleCounts;
use sepinn::loss::{AuxInput, EigenWeights, PenaltyWeights};
use sepinn::optimize::{AdamConfig, EigenConfig, LbfgsConfig, PenaltySchedule, TwoStageConfig};
use sepinn::problems::{self, EquationKind, ProblemSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Field { field: &'static str, message: String },
}

fn field(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Scalar enrichment of a 2D problem.
    Sepinn,
    /// Truncated edge series of a 3D problem.
    SepinnC,
    /// Auxiliary networks for the edge flux intensity.
    SepinnN,
    /// No enrichment.
    Pinn,
    Eigen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub widths: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_widths: Option<Vec<usize>>,
    #[serde(default)]
    pub aux_input: AuxInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesSection {
    pub interior: usize,
    /// Total boundary points, split between `Γ_D` and `Γ_N` by length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neumann: Option<usize>,
    /// Fresh points for error estimates.
    #[serde(default = "default_validation")]
    pub validation: usize,
}

fn default_validation() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySection {
    pub sigma_d: f64,
    #[serde(default)]
    pub sigma_n: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    pub cap: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_q() -> f64 {
    1.5
}

fn default_threshold() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamSection {
    pub lr_net: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_coeff: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbfgsSection {
    pub iterations: usize,
    #[serde(default = "default_memory")]
    pub memory: usize,
    #[serde(default = "default_gtol")]
    pub gtol: f64,
    #[serde(default = "default_ftol")]
    pub ftol: f64,
}

fn default_memory() -> usize {
    10
}

fn default_gtol() -> f64 {
    1e-9
}

fn default_ftol() -> f64 {
    LbfgsConfig::default().ftol
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSection {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_nu")]
    pub nu: [f64; 2],
    pub alternations: usize,
    #[serde(default = "default_mu_tol")]
    pub mu_tol: f64,
    #[serde(default = "default_restarts")]
    pub max_restarts: usize,
}

fn default_alpha() -> f64 {
    EigenWeights::default().alpha
}
fn default_beta() -> f64 {
    EigenWeights::default().beta
}
fn default_nu() -> [f64; 2] {
    EigenWeights::default().nu
}
fn default_mu_tol() -> f64 {
    1e-3
}
fn default_restarts() -> usize {
    3
}

fn default_gamma_init() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub method: Method,
    pub seed: u64,
    #[serde(default = "default_gamma_init")]
    pub gamma_init: f64,
    /// Run directory; defaults to a name under the output root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub network: NetworkSection,
    pub samples: SamplesSection,
    pub penalty: PenaltySection,
    pub adam: AdamSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lbfgs: Option<LbfgsSection>,
    /// Adam before L-BFGS in every penalty loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage2_adam: Option<AdamSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen: Option<EigenSection>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, ConfigError> {
        problems::by_name(&self.problem).map_err(|e| field("problem", e.to_string()))
    }

    /// Field-level checks beyond what parsing enforces.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = self.problem_spec()?;
        let dim = p.dim();
        let eigen = p.kind == EquationKind::Eigenvalue;
        match self.method {
            Method::Eigen if !eigen => return Err(field("method", "eigen needs an eigenvalue problem")),
            m if eigen && m != Method::Eigen => {
                return Err(field("method", "eigenvalue problems use method 'eigen'"));
            }
            Method::Sepinn if dim != 2 => return Err(field("method", "sepinn needs a 2D problem")),
            Method::SepinnC | Method::SepinnN if dim != 3 => {
                return Err(field("method", "sepinn-c and sepinn-n need a 3D problem"));
            }
            _ => {}
        }
        let w = &self.network.widths;
        if w.len() < 2 || w.contains(&0) {
            return Err(field("network.widths", "need at least input and output widths, all positive"));
        }
        if w[0] != dim || *w.last().unwrap() != 1 {
            return Err(field("network.widths", format!("must map {dim} inputs to 1 output")));
        }
        if self.method == Method::SepinnN {
            let a = self
                .network
                .aux_widths
                .as_ref()
                .ok_or_else(|| field("network.aux_widths", "required for sepinn-n"))?;
            let want = match self.network.aux_input {
                AuxInput::Polar => 2,
                AuxInput::Cartesian => 3,
            };
            if a.len() < 2 || a.contains(&0) || a[0] != want || *a.last().unwrap() != 1 {
                return Err(field("network.aux_widths", format!("must map {want} inputs to 1 output")));
            }
        }
        if self.method == Method::SepinnC && self.series.is_none() {
            return Err(field("series.n", "required for sepinn-c"));
        }
        if self.method == Method::Eigen && self.eigen.is_none() {
            return Err(field("eigen", "section required for method 'eigen'"));
        }
        if self.method != Method::Eigen && self.lbfgs.is_none() {
            return Err(field("lbfgs", "section required"));
        }
        if !(self.gamma_init.is_finite()) {
            return Err(field("gamma_init", "must be finite"));
        }

        let s = &self.samples;
        if s.interior == 0 {
            return Err(field("samples.interior", "must be positive"));
        }
        let has_neumann = p.domain.measures().neumann > 0.0;
        match (s.boundary, s.dirichlet, s.neumann) {
            (Some(_), None, None) | (None, None, None) if s.boundary.unwrap_or(0) == 0 => {
                return Err(field("samples.boundary", "positive boundary or dirichlet count required"));
            }
            (Some(_), None, None) => {}
            (Some(_), _, _) => {
                return Err(field("samples.boundary", "give either boundary or dirichlet/neumann counts"));
            }
            (None, Some(0), _) => return Err(field("samples.dirichlet", "must be positive")),
            (None, Some(_), n) if has_neumann && !eigen && n.unwrap_or(0) == 0 => {
                return Err(field("samples.neumann", "domain has a Neumann boundary"));
            }
            (None, Some(_), _) => {}
            (None, None, _) => return Err(field("samples.dirichlet", "required with explicit counts")),
        }
        if s.validation < 1000 {
            return Err(field("samples.validation", "at least 1000 points"));
        }

        let pen = &self.penalty;
        if !(pen.sigma_d > 0.0) {
            return Err(field("penalty.sigma_d", "must be positive"));
        }
        if !(pen.sigma_n >= 0.0) {
            return Err(field("penalty.sigma_n", "must be non-negative"));
        }
        if !(pen.q > 1.0) {
            return Err(field("penalty.q", format!("must exceed 1, got {}", pen.q)));
        }
        if !(pen.cap >= pen.sigma_d.max(pen.sigma_n)) {
            return Err(field("penalty.cap", "must be at least the initial weights"));
        }
        if !(pen.threshold >= 0.0) {
            return Err(field("penalty.threshold", "must be non-negative"));
        }
        if p.domain.measures().neumann > 0.0 && pen.sigma_n == 0.0 && !eigen {
            return Err(field("penalty.sigma_n", "domain has a Neumann boundary"));
        }

        check_adam("adam", &self.adam)?;
        if let Some(a) = &self.stage2_adam {
            check_adam("stage2_adam", a)?;
        }
        if let Some(l) = &self.lbfgs {
            if l.memory == 0 {
                return Err(field("lbfgs.memory", "must be at least 1"));
            }
            if !(l.gtol > 0.0) {
                return Err(field("lbfgs.gtol", "must be positive"));
            }
            if !(l.ftol >= 0.0) {
                return Err(field("lbfgs.ftol", "must be non-negative"));
            }
        }
        if let Some(e) = &self.eigen {
            if e.alternations == 0 {
                return Err(field("eigen.alternations", "must be at least 1"));
            }
            if e.alpha < 0.0 || e.beta < 0.0 || e.nu.iter().any(|v| *v < 0.0) {
                return Err(field("eigen", "weights must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn sample_counts(&self, spec: &ProblemSpec) -> SampleCounts {
        let s = &self.samples;
        match s.boundary {
            Some(b) => SampleCounts::proportional(&spec.domain, s.interior, b),
            None => SampleCounts {
                interior: s.interior,
                dirichlet: s.dirichlet.unwrap_or(0),
                neumann: s.neumann.unwrap_or(0),
            },
        }
    }

    pub fn initial_penalty(&self) -> PenaltyWeights {
        PenaltyWeights {
            dirichlet: self.penalty.sigma_d,
            neumann: self.penalty.sigma_n,
        }
    }

    pub fn schedule(&self) -> PenaltySchedule {
        PenaltySchedule {
            initial: self.initial_penalty(),
            q: self.penalty.q,
            cap: self.penalty.cap,
            threshold: self.penalty.threshold,
        }
    }

    pub fn two_stage(&self) -> TwoStageConfig {
        let l = self.lbfgs.clone().unwrap_or(LbfgsSection {
            iterations: 0,
            memory: default_memory(),
            gtol: default_gtol(),
            ftol: default_ftol(),
        });
        TwoStageConfig {
            adam: adam_config(&self.adam),
            lbfgs: LbfgsConfig {
                memory: l.memory,
                gtol: l.gtol,
                ftol: l.ftol,
                max_iter: l.iterations,
                ..LbfgsConfig::default()
            },
            schedule: self.schedule(),
            stage2_adam: self.stage2_adam.as_ref().map(adam_config),
        }
    }

    pub fn eigen_config(&self) -> Option<(EigenConfig, EigenWeights)> {
        let e = self.eigen.as_ref()?;
        Some((
            EigenConfig {
                adam: adam_config(&self.adam),
                schedule: self.schedule(),
                alternations: e.alternations,
                mu_tol: e.mu_tol,
                max_restarts: e.max_restarts,
            },
            EigenWeights {
                alpha: e.alpha,
                beta: e.beta,
                nu: e.nu,
            },
        ))
    }
}

fn check_adam(name: &'static str, a: &AdamSection) -> Result<(), ConfigError> {
    let lr_field = if name == "adam" { "adam.lr_net" } else { "stage2_adam.lr_net" };
    if !(a.lr_net > 0.0) || !(a.lr_coeff.unwrap_or(a.lr_net) > 0.0) {
        return Err(field(lr_field, "learning rates must be positive"));
    }
    Ok(())
}

fn adam_config(a: &AdamSection) -> AdamConfig {
    AdamConfig {
        lr_net: a.lr_net,
        lr_coeff: a.lr_coeff.unwrap_or(a.lr_net),
        max_iter: a.iterations,
        ..AdamConfig::default()
    }
}
