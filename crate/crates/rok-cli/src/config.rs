//! TOML run configuration. Every section and field has a default, so an empty
//! file is a valid configuration; unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use rok_core::{BasisStrategy, IntegratorConfig, Tableau};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub problem: ProblemConfig,
    pub method: MethodConfig,
    pub integrator: IntegratorSection,
    pub reference: ReferenceSection,
    pub sweep: SweepSection,
    pub stability: StabilitySection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            problem: ProblemConfig::default(),
            method: MethodConfig::default(),
            integrator: IntegratorSection::default(),
            reference: ReferenceSection::default(),
            sweep: SweepSection::default(),
            stability: StabilitySection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    /// Registered problem name: `dahlquist`, `linear`, `smooth`, `allen-cahn`.
    pub name: String,
    pub t0: f64,
    /// Final time; problems supply their own when absent.
    pub tf: Option<f64>,
    /// Dahlquist eigenvalue.
    pub lambda: f64,
    /// Size of the random linear problem.
    pub n: usize,
    /// Eigenvalue spread of the random linear problem.
    pub stiffness: f64,
    /// Off-diagonal noise of the random linear problem.
    pub coupling: f64,
    pub nx: usize,
    pub ny: usize,
    pub alpha: f64,
    pub gamma_rc: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            name: "allen-cahn".into(),
            t0: 0.0,
            tf: None,
            lambda: -1.0,
            n: 32,
            stiffness: 1000.0,
            coupling: 0.5,
            nx: 64,
            ny: 64,
            alpha: 1.0,
            gamma_rc: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfig {
    /// Built-in tableau name, used when `tableau_file` is absent.
    pub tableau: String,
    pub tableau_file: Option<PathBuf>,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self { tableau: "rok4l".into(), tableau_file: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Fixed,
    Residual,
    MatchTol,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub rtol: f64,
    pub atol: f64,
    pub strategy: StrategyKind,
    /// Basis size for `fixed`.
    pub m: usize,
    /// First-stage residual tolerance for `residual`.
    pub resid_tol: f64,
    pub extend: bool,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub safety: f64,
    pub fac_min: f64,
    pub fac_max: f64,
    pub m_max: usize,
    pub test_indices: Vec<usize>,
    pub max_steps: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        Self {
            rtol: 1e-4,
            atol: 1e-4,
            strategy: StrategyKind::MatchTol,
            m: 16,
            resid_tol: 1e-6,
            extend: false,
            h_init: d.h_init,
            h_min: d.h_min,
            h_max: d.h_max,
            safety: d.safety,
            fac_min: d.fac_min,
            fac_max: d.fac_max,
            m_max: d.m_max,
            test_indices: d.test_indices,
            max_steps: d.max_steps,
        }
    }
}

impl IntegratorSection {
    pub fn to_core(&self) -> IntegratorConfig {
        let basis_strategy = match self.strategy {
            StrategyKind::Fixed => BasisStrategy::Fixed(self.m),
            StrategyKind::Residual => BasisStrategy::AdaptiveResidual(self.resid_tol),
            StrategyKind::MatchTol => BasisStrategy::AdaptiveResidualMatchTol,
        };
        IntegratorConfig {
            rtol: self.rtol,
            atol: self.atol,
            basis_strategy,
            extend_with_stage_rhs: self.extend,
            h_init: self.h_init,
            h_min: self.h_min,
            h_max: self.h_max,
            safety: self.safety,
            fac_min: self.fac_min,
            fac_max: self.fac_max,
            m_max: self.m_max,
            test_indices: self.test_indices.clone(),
            max_steps: self.max_steps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMode {
    /// Compute in memory before the sweep.
    Compute,
    /// Load from `reference.path`.
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    pub mode: ReferenceMode,
    pub path: Option<PathBuf>,
    pub rtol: f64,
    pub atol: f64,
    /// Relative agreement required between the reference and the halved
    /// fixed-step oracle.
    pub check_tol: f64,
    /// Upper bound on oracle steps; larger requirements skip the check with
    /// an error.
    pub check_max_steps: usize,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self {
            mode: ReferenceMode::Compute,
            path: None,
            rtol: 1e-12,
            atol: 1e-12,
            check_tol: 1e-9,
            check_max_steps: 2_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Labels such as `M=4`, `R=1e-6`, `R=tol`, each optionally with `+ext`.
    pub strategies: Vec<String>,
    pub tolerances: Vec<f64>,
    /// `atol = atol_factor · tol`
    pub atol_factor: f64,
    /// Fill the `wall_seconds` column; off keeps the CSV reproducible.
    pub wall_time: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            strategies: ["M=4", "M=16", "R=tol", "R=tol+ext"].iter().map(|s| s.to_string()).collect(),
            tolerances: (2..=10).map(|i| 10f64.powi(-i)).collect(),
            atol_factor: 1.0,
            wall_time: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub h_min: f64,
    pub h_max: f64,
    pub points: usize,
    /// Basis sizes to sample; clamped to the problem size.
    pub sizes: Vec<usize>,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self { h_min: 1e-4, h_max: 10.0, points: 41, sizes: vec![1, 2, 4, 8, 16] }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    /// Print one line per attempted step in `run`.
    pub per_step: bool,
}

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse(String),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse(msg) => write!(f, "config parse error: {msg}"),
            ConfigError::Invalid(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        Self::from_toml(&src)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks values and that referenced files exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.workers == 0 {
            return invalid("workers must be at least 1");
        }
        self.integrator.to_core().validate().map_err(|e| ConfigError::Invalid(format!("integrator: {e}")))?;
        if let Some(p) = &self.method.tableau_file {
            if !p.is_file() {
                return Err(ConfigError::Invalid(format!("method.tableau_file {} does not exist", p.display())));
            }
        } else if Tableau::builtin(&self.method.tableau).is_none() {
            return Err(ConfigError::Invalid(format!("method.tableau: unknown built-in `{}`", self.method.tableau)));
        }
        if self.reference.mode == ReferenceMode::File {
            match &self.reference.path {
                Some(p) if p.is_file() => {}
                Some(p) => return Err(ConfigError::Invalid(format!("reference.path {} does not exist", p.display()))),
                None => return invalid("reference.mode = \"file\" needs reference.path"),
            }
        }
        for s in &self.sweep.strategies {
            crate::sweep::SweepStrategy::parse(s).map_err(ConfigError::Invalid)?;
        }
        if self.sweep.tolerances.iter().any(|t| !(*t > 0.0)) {
            return invalid("sweep.tolerances must be positive");
        }
        if !(self.sweep.atol_factor > 0.0) {
            return invalid("sweep.atol_factor must be positive");
        }
        let s = &self.stability;
        if !(s.h_min > 0.0 && s.h_min <= s.h_max) || s.points == 0 || s.sizes.iter().any(|&m| m == 0) {
            return invalid("stability: need 0 < h_min <= h_max, points >= 1, sizes >= 1");
        }
        let p = &self.problem;
        if let Some(tf) = p.tf {
            if !(tf > p.t0) {
                return invalid("problem.tf must exceed problem.t0");
            }
        }
        Ok(())
    }

    /// Loads the tableau named or pointed to by `[method]`.
    pub fn tableau(&self) -> Result<Tableau, String> {
        match &self.method.tableau_file {
            Some(p) => {
                let src = std::fs::read_to_string(p).map_err(|e| format!("cannot read tableau {}: {e}", p.display()))?;
                rok_core::tableau::parse(&src).map_err(|e| format!("{}: {e}", p.display()))
            }
            None => Tableau::builtin(&self.method.tableau).ok_or_else(|| format!("unknown tableau `{}`", self.method.tableau)),
        }
    }
}
