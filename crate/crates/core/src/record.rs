//! Converged solutions with everything needed to re-verify them later:
//! parameters, potential, grid construction data and nodal values.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::{EnergyParams, Functional};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, RadialField, RadialGrid};
use crate::json;
use crate::potentials::Potential;
use crate::spectral::{lambda1, LinearizedOperator, MorseIndex};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    LocalMin,
    MountainPass,
    Continuation,
}

impl std::fmt::Display for SolutionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolutionKind::LocalMin => "local_min",
            SolutionKind::MountainPass => "mountain_pass",
            SolutionKind::Continuation => "continuation",
        })
    }
}

/// Spectral data attached to a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// `λ₁(V)` on the record's grid.
    pub lambda1: f64,
    /// `λ_ess(V)`, when the potential has a detectable limit.
    pub lambda_ess: Option<f64>,
    /// `λ + λ₁(V)`; positive when the multiplier bound holds.
    pub multiplier_margin: f64,
    pub morse: MorseIndex,
}

/// Solver bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub iterations: usize,
    pub newton_iterations: usize,
    /// Residual tolerance the solver was asked to reach.
    pub tolerance: f64,
    /// Sphere-projected gradient norm at exit.
    pub projected_gradient: f64,
    /// Max energy along the final path (mountain-pass runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_level: Option<f64>,
    /// Knot energies of the final path (mountain-pass runs).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path_energies: Vec<f64>,
    /// Dilation factor of the far endpoint (mountain-pass runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_dilation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub schema_version: u32,
    pub kind: SolutionKind,
    pub params: EnergyParams,
    pub potential_id: String,
    pub potential: Potential,
    pub grid: GridSpec,
    pub lambda: f64,
    pub energy: f64,
    pub mass: f64,
    pub grad_norm: f64,
    pub residual_inf: f64,
    pub morse_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralReport>,
    pub solver: SolverInfo,
    pub u: Vec<f64>,
}

impl SolutionRecord {
    /// Builds a record from a converged field, computing the derived
    /// quantities and the spectral report.
    pub fn assemble(
        kind: SolutionKind,
        params: EnergyParams,
        potential: &Potential,
        u: &RadialField<f64>,
        lambda: f64,
        solver: SolverInfo,
    ) -> Result<Self> {
        let f = Functional::new(params, potential, u.grid().clone())?;
        let residual_inf = f
            .residual(u.values(), lambda)
            .iter()
            .fold(0.0f64, |m, r| m.max(r.abs()));
        let l1 = lambda1(potential, u.grid())?;
        let morse = LinearizedOperator::at_solution(&params, potential, u, lambda)?.morse(u)?;
        let spectral = SpectralReport {
            lambda1: l1,
            lambda_ess: potential.essential_spectrum_floor().ok(),
            multiplier_margin: lambda + l1,
            morse,
        };
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            kind,
            params,
            potential_id: potential.id(),
            potential: potential.clone(),
            grid: u.grid().spec(),
            lambda,
            energy: f.energy(u.values()),
            mass: u.l2_norm(),
            grad_norm: u.gradient_norm(),
            residual_inf,
            morse_index: spectral.morse.free,
            spectral: Some(spectral),
            solver,
            u: u.values().to_vec(),
        })
    }

    pub fn build_grid(&self) -> Result<Arc<RadialGrid<f64>>> {
        Ok(Arc::new(self.grid.build()?))
    }

    /// The solution as a field on a freshly built grid.
    pub fn field(&self) -> Result<RadialField<f64>> {
        RadialField::new(self.build_grid()?, self.u.clone())
    }

    pub fn field_on(&self, grid: &Arc<RadialGrid<f64>>) -> Result<RadialField<f64>> {
        if grid.spec() != self.grid {
            return Err(Error::DimensionMismatch("record stored on a different grid".into()));
        }
        RadialField::new(grid.clone(), self.u.clone())
    }

    pub fn morse(&self) -> Option<&MorseIndex> {
        self.spectral.as_ref().map(|s| &s.morse)
    }

    pub fn to_json(&self) -> Result<String> {
        json::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => return Err(Error::Parse(format!("unsupported schema_version {v}"))),
            None => return Err(Error::Parse("missing schema_version".into())),
        }
        let record: Self = serde_json::from_value(value)?;
        if record.u.len() != record.grid.intervals + 1 {
            return Err(Error::Parse(format!(
                "record has {} values for a grid with {} nodes",
                record.u.len(),
                record.grid.intervals + 1
            )));
        }
        Ok(record)
    }

    /// Plot-ready profile: `r, u, u', residual`.
    pub fn profile_csv(&self) -> Result<String> {
        let u = self.field()?;
        let grid = u.grid().clone();
        let du = grid.radial_derivative(&u)?;
        let f = Functional::new(self.params, &self.potential, grid.clone())?;
        let res = f.residual(u.values(), self.lambda);
        let mut s = String::from("r,u,du,residual\n");
        for i in 0..grid.len() {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                grid.nodes()[i],
                u.values()[i],
                du.values()[i],
                res[i]
            ));
        }
        Ok(s)
    }

    /// Writes `<stem>.json` and `<stem>.csv` under `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let json_path = dir.join(format!("{stem}.json"));
        let csv_path = dir.join(format!("{stem}.csv"));
        std::fs::write(&json_path, self.to_json()?)?;
        std::fs::write(&csv_path, self.profile_csv()?)?;
        Ok((json_path, csv_path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Spacing};

    fn sample() -> SolutionRecord {
        let g = build_grid::<f64>(2, 10.0, 200, Spacing::Uniform).unwrap();
        let u = RadialField::from_fn(g, |r| (-r * r / 2.0).exp() * (1.0 - r / 10.0));
        let params = EnergyParams::new(2, 6.0, 1.0, u.l2_norm()).unwrap();
        let v = Potential::gaussian_well(5.0, 1.0).unwrap();
        let lambda = crate::energy::lagrange_multiplier(&params, &v, &u).unwrap();
        SolutionRecord::assemble(SolutionKind::LocalMin, params, &v, &u, lambda, SolverInfo::default()).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let r = sample();
        let text = r.to_json().unwrap();
        assert!(text.contains("\"schema_version\": 1"));
        let back = SolutionRecord::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn schema_checks() {
        let r = sample();
        let mut v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        v["schema_version"] = serde_json::json!(99);
        assert!(SolutionRecord::from_json(&v.to_string()).is_err());
        v["schema_version"] = serde_json::json!(1);
        v["u"] = serde_json::json!([1.0, 2.0]);
        assert!(SolutionRecord::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn profile_columns() {
        let csv = sample().profile_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "r,u,du,residual");
        assert_eq!(lines.count(), 201);
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample();
        let (json_path, csv_path) = r.save(dir.path(), "rec").unwrap();
        assert!(csv_path.exists());
        assert_eq!(SolutionRecord::load(&json_path).unwrap(), r);
    }
}
