//! Run configuration files (JSON, unknown keys rejected).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use dgnewton::dg_elasticity::LoadCase;
use dgnewton::dg_scalar::TractionAveraging;
use dgnewton::solver::NewtonConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Poisson,
    Plasticity,
    Hyperelastic,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Poisson => "poisson",
            ProblemKind::Plasticity => "plasticity",
            ProblemKind::Hyperelastic => "hyperelastic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Nitsche,
    DgClassical,
    DgHybrid,
    Cg,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Nitsche => "nitsche",
            Scheme::DgClassical => "dg-classical",
            Scheme::DgHybrid => "dg-hybrid",
            Scheme::Cg => "cg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    #[default]
    StressOfMean,
    MeanOfStress,
}

impl From<Averaging> for TractionAveraging {
    fn from(a: Averaging) -> Self {
        match a {
            Averaging::StressOfMean => TractionAveraging::StressOfMean,
            Averaging::MeanOfStress => TractionAveraging::MeanOfStress,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Refinement parameter of the built-in mesh.
    pub n: Option<usize>,
    /// ASCII mesh file, relative to the config file.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub k: Option<f64>,
    pub shear_modulus: Option<f64>,
    pub yield_stress: Option<f64>,
    pub eps_reg: Option<f64>,
    pub youngs_modulus: Option<f64>,
    pub poisson_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonSettings {
    pub tol_rel: Option<f64>,
    pub tol_abs: Option<f64>,
    pub max_iter: Option<usize>,
    pub load_steps: Option<usize>,
    pub max_halvings: Option<usize>,
}

impl NewtonSettings {
    pub fn apply(&self, mut base: NewtonConfig) -> NewtonConfig {
        if let Some(v) = self.tol_rel {
            base.tol_rel = v;
        }
        if let Some(v) = self.tol_abs {
            base.tol_abs = v;
        }
        if let Some(v) = self.max_iter {
            base.max_iter = v;
        }
        if let Some(v) = self.load_steps {
            base.load_steps = v;
        }
        if let Some(v) = self.max_halvings {
            base.max_halvings = v;
        }
        base
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    /// Load case of a hyperelastic run: twist, stretch or bend.
    pub case: Option<String>,
    pub scheme: Scheme,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub material: MaterialConfig,
    pub gamma0: Option<f64>,
    #[serde(default)]
    pub averaging: Averaging,
    #[serde(default)]
    pub newton: NewtonSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Also write the exploded-mesh VTK variant of discontinuous fields.
    #[serde(default = "default_true")]
    pub exploded: bool,
    /// Single-threaded sparse factorization.
    #[serde(default)]
    pub deterministic: bool,
}

/// A configuration problem, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        if let (Some(file), Some(dir)) = (&config.mesh.file, path.parent()) {
            if file.is_relative() {
                config.mesh.file = Some(dir.join(file));
            }
        }
        Ok(config)
    }

    pub fn load_case(&self) -> Result<Option<LoadCase>, ConfigError> {
        match (&self.case, self.problem) {
            (Some(c), ProblemKind::Hyperelastic) => c.parse().map(Some).map_err(|_| {
                ConfigError(format!(
                    "field `case`: unknown load case `{c}` (expected twist, stretch or bend)"
                ))
            }),
            (None, ProblemKind::Hyperelastic) => Err(ConfigError(
                "field `case` is required for hyperelastic problems".into(),
            )),
            (Some(_), _) => Err(ConfigError(format!(
                "field `case` is only used by hyperelastic problems, not `{}`",
                self.problem.name()
            ))),
            (None, _) => Ok(None),
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        self.load_case()?;
        let allowed: &[Scheme] = match self.problem {
            ProblemKind::Poisson => &[
                Scheme::Nitsche,
                Scheme::DgClassical,
                Scheme::DgHybrid,
                Scheme::Cg,
            ],
            ProblemKind::Plasticity => &[Scheme::DgClassical, Scheme::DgHybrid, Scheme::Cg],
            ProblemKind::Hyperelastic => &[Scheme::DgClassical, Scheme::Cg],
        };
        if !allowed.contains(&self.scheme) {
            let names: Vec<&str> = allowed.iter().map(|s| s.name()).collect();
            return err(format!(
                "field `scheme`: `{}` is not available for {} problems (expected one of {})",
                self.scheme.name(),
                self.problem.name(),
                names.join(", ")
            ));
        }
        let m = &self.material;
        let used: &[(&str, bool)] = &[
            ("k", m.k.is_some()),
            ("shear_modulus", m.shear_modulus.is_some()),
            ("yield_stress", m.yield_stress.is_some()),
            ("eps_reg", m.eps_reg.is_some()),
            ("youngs_modulus", m.youngs_modulus.is_some()),
            ("poisson_ratio", m.poisson_ratio.is_some()),
        ];
        let accepted: &[&str] = match self.problem {
            ProblemKind::Poisson => &["k"],
            ProblemKind::Plasticity => &["shear_modulus", "yield_stress", "eps_reg"],
            ProblemKind::Hyperelastic => &["youngs_modulus", "poisson_ratio"],
        };
        for (name, set) in used {
            if *set && !accepted.contains(name) {
                return err(format!(
                    "field `material.{name}` does not apply to {} problems",
                    self.problem.name()
                ));
            }
        }
        if self.mesh.n.is_some() && self.mesh.file.is_some() {
            return err("fields `mesh.n` and `mesh.file` are mutually exclusive".into());
        }
        if self.mesh.n == Some(0) {
            return err("field `mesh.n` must be positive".into());
        }
        if let Some(g) = self.gamma0 {
            if !(g > 0.0) {
                return err(format!("field `gamma0` must be positive, got {g}"));
            }
        }
        if self.averaging != Averaging::StressOfMean && !matches!(self.scheme, Scheme::DgClassical)
        {
            return err("field `averaging` only applies to the dg-classical scheme".into());
        }
        Ok(())
    }
}
