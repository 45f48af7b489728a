//! Run configuration: a TOML file with one section per concern. Every key
//! has a default, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use normsol::potentials::PotentialKind;
use normsol::{Potential, Spacing};
use serde::{Deserialize, Serialize};

pub const OUTPUT_DIR_ENV: &str = "NORMSOL_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for randomized sampling (geometry certificates, GN spot checks).
    pub seed: u64,
    pub potential: PotentialConfig,
    pub params: ParamsConfig,
    pub grid: GridConfig,
    pub tolerances: ToleranceConfig,
    pub gn: GnConfig,
    pub output: OutputConfig,
    pub mountain_pass: MountainPassConfig,
    pub sweep: SweepConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            potential: PotentialConfig::default(),
            params: ParamsConfig::default(),
            grid: GridConfig::default(),
            tolerances: ToleranceConfig::default(),
            gn: GnConfig::default(),
            output: OutputConfig::default(),
            mountain_pass: MountainPassConfig::default(),
            sweep: SweepConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

/// The shape keys sit next to `kind` (`kind = "gaussian_well"`, `depth`,
/// `width`). Unknown keys in this section are ignored: serde cannot deny them
/// through a flattened enum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    #[serde(flatten)]
    pub shape: PotentialKind,
    #[serde(default)]
    pub offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_override: Option<f64>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            shape: PotentialKind::GaussianWell { depth: 5.0, width: 1.0 },
            offset: 0.0,
            floor_override: None,
        }
    }
}

impl PotentialConfig {
    pub fn build(&self) -> Result<Potential> {
        let mut v = Potential::new(self.shape.clone())?.shift(self.offset);
        if let Some(f) = self.floor_override {
            v = v.with_floor_override(f);
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(rename = "N")]
    pub dimension: usize,
    pub q: f64,
    pub rho: f64,
    /// Prescribed mass; when absent, `mu_fraction · μ₀` is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub mu_fraction: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            dimension: 2,
            q: 6.0,
            rho: 1.0,
            mu: None,
            mu_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub r_max: f64,
    pub intervals: usize,
    /// `"uniform"` or `"graded(g)"`.
    pub spacing: String,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            r_max: normsol::solvers::DEFAULT_R_MAX,
            intervals: normsol::solvers::DEFAULT_INTERVALS,
            spacing: "uniform".into(),
        }
    }
}

impl GridConfig {
    pub fn spacing(&self) -> Result<Spacing> {
        Ok(self.spacing.parse()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Newton residual tolerance, relative to `max(1, ‖u‖_∞^{q−1})`.
    pub solver: f64,
    /// Eigenpair residual.
    pub eigen: f64,
    /// Morse index cutoff, relative to the operator scale.
    pub index: f64,
    /// `verify`: bound on `residual_inf / max(1, ‖u‖_∞^{q−1})` and on the
    /// mass error.
    pub verify: f64,
    /// `verify --pohozaev`: bound on the residual relative to the sum of the
    /// term magnitudes. The discrete identity holds only to `O(h²)`.
    pub pohozaev: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            solver: 1e-10,
            eigen: 1e-9,
            index: 1e-6,
            verify: 1e-6,
            pohozaev: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnConfig {
    /// Use this value instead of computing `C_{N,q}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub r_max: f64,
    pub intervals: usize,
}

impl Default for GnConfig {
    fn default() -> Self {
        Self {
            value: None,
            r_max: 20.0,
            intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountainPassConfig {
    pub n_knots: usize,
    pub max_iter: usize,
    pub handoff: f64,
}

impl Default for MountainPassConfig {
    fn default() -> Self {
        let d = normsol::solvers::MountainPassOptions::default();
        Self {
            n_knots: d.n_knots,
            max_iter: d.max_iter,
            handoff: d.handoff,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariableConfig {
    Mu,
    Rho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariableConfig,
    /// For `mu` sweeps these are fractions of `μ₀`; for `rho` the values.
    pub start: f64,
    pub end: f64,
    pub points: usize,
    pub warm_start: bool,
    pub branch: normsol::solvers::Branch,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            variable: SweepVariableConfig::Rho,
            start: 0.5,
            end: 1.0,
            points: 6,
            warm_start: false,
            branch: normsol::solvers::Branch::LocalMin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pohozaev: Option<[f64; 2]>,
    pub blowup: bool,
    pub classify_threshold: f64,
    /// `[γ, R]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<[f64; 2]>,
    /// `ε` the decay check must pass with.
    pub decay_eps: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            pohozaev: None,
            blowup: false,
            classify_threshold: 1.0,
            decay: None,
            decay_eps: 0.2,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).context("config parse error")?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("solver", t.solver),
            ("eigen", t.eigen),
            ("index", t.index),
            ("verify", t.verify),
            ("pohozaev", t.pohozaev),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                bail!("tolerance {name} = {v} must be positive");
            }
        }
        self.grid.spacing()?;
        self.potential.build()?;
        if self.sweep.points < 1 {
            bail!("sweep.points must be at least 1");
        }
        Ok(())
    }

    /// Output directory: `--output-dir`, then the config, then
    /// `$NORMSOL_OUTPUT_DIR`, then `./normsol-out`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.output.dir {
            return p.clone();
        }
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(p) if !p.is_empty() => PathBuf::from(p),
            _ => PathBuf::from("normsol-out"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7

[potential]
kind = "square_well"
depth = 2.0
radius = 1.5
offset = 0.25

[params]
N = 3
q = 3.5
rho = 0.75
mu = 0.4

[grid]
r_max = 30.0
intervals = 3000
spacing = "graded(0.5)"

[tolerances]
solver = 1e-9

[sweep]
variable = "mu"
start = 0.2
end = 0.6
points = 5
warm_start = true
branch = "mountain_pass"

[verify]
pohozaev = [1.0, 5.0]
blowup = true
decay = [0.5, 8.0]
"#;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.params.dimension, 3);
        assert_eq!(c.grid.spacing().unwrap(), Spacing::Graded(0.5));
        assert_eq!(c.potential.build().unwrap().evaluate(0.0).unwrap(), -1.75);
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
        let d = RunConfig::default();
        assert_eq!(RunConfig::parse(&d.to_toml().unwrap()).unwrap(), d);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("[tolerances]\nsolver = 0.0").is_err());
        assert!(RunConfig::parse("[tolerances]\neigen = -1.0").is_err());
        assert!(RunConfig::parse("[grid]\nspacing = \"wavy\"").is_err());
        assert!(RunConfig::parse("[params]\nbogus = 1").is_err());
        assert!(RunConfig::parse("[potential]\nkind = \"gaussian_well\"\ndepth = 1.0\nwidth = -1.0").is_err());
        assert!(RunConfig::parse("not toml at all [").is_err());
    }

    #[test]
    fn output_dir_precedence() {
        let mut c = RunConfig::default();
        assert_eq!(c.output_dir(Some(Path::new("a"))), PathBuf::from("a"));
        c.output.dir = Some("b".into());
        assert_eq!(c.output_dir(None), PathBuf::from("b"));
    }
}
