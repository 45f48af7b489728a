//! Parameter continuation in `μ` or `ρ` along either solution branch.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::descent::{solve_local_min_with, LocalMinOptions};
use super::mountain_pass::{solve_mountain_pass_with, MountainPassOptions};
use crate::constants::geometry;
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::potentials::Potential;
use crate::record::SolutionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    LocalMin,
    MountainPass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Mu,
    Rho,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub branch: Branch,
    /// `C_{N,q}` used to build the geometry at every point.
    pub gn_constant: f64,
    pub local_min: LocalMinOptions,
    pub mountain_pass: MountainPassOptions,
}

/// Outcome at one parameter value; failures do not stop the sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub params: EnergyParams,
    pub outcome: std::result::Result<SolutionRecord, String>,
}

/// One row of the plot-ready trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub param: f64,
    pub lambda: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub morse: usize,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub variable: Option<SweepVariable>,
    pub points: Vec<SweepPoint>,
}

impl Sweep {
    pub fn records(&self) -> impl Iterator<Item = &SolutionRecord> {
        self.points.iter().filter_map(|p| p.outcome.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &str)> {
        self.points
            .iter()
            .filter_map(|p| p.outcome.as_ref().err().map(|e| (p.index, e.as_str())))
    }

    /// Rows for the converged points, in input order.
    pub fn trace(&self) -> Vec<TraceRow> {
        self.points
            .iter()
            .filter_map(|p| {
                let r = p.outcome.as_ref().ok()?;
                Some(TraceRow {
                    param: match self.variable {
                        Some(SweepVariable::Rho) => p.params.rho,
                        _ => p.params.mu,
                    },
                    lambda: r.lambda,
                    energy: r.energy,
                    grad_norm: r.grad_norm,
                    morse: r.morse_index,
                })
            })
            .collect()
    }

    /// `(min λ, max λ)` over the converged points.
    pub fn lambda_range(&self) -> Option<(f64, f64)> {
        let mut it = self.records().map(|r| r.lambda);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), l| (lo.min(l), hi.max(l))))
    }

    /// Set when a point failed or produced a non-finite multiplier.
    pub fn diverged(&self) -> bool {
        self.points
            .iter()
            .any(|p| p.outcome.as_ref().map_or(true, |r| !r.lambda.is_finite()))
    }

    pub fn trace_csv(&self) -> String {
        let name = match self.variable {
            Some(SweepVariable::Rho) => "rho",
            _ => "mu",
        };
        let mut s = format!("{name},lambda,energy,grad_norm,morse\n");
        for r in self.trace() {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                r.param, r.lambda, r.energy, r.grad_norm, r.morse
            ));
        }
        s
    }
}

/// Solves the chosen branch at every parameter in order. With `warm_start`
/// the previous local minimizer seeds the next descent and points run
/// sequentially; otherwise points run in parallel from the default start.
pub fn continuation_sweep(
    params: &[EnergyParams],
    v: &Potential,
    grid: &Arc<RadialGrid<f64>>,
    warm_start: bool,
    opts: &SweepOptions,
) -> Result<Sweep> {
    let variable = check_monotone(params)?;
    let points = if warm_start {
        let mut seed: Option<RadialField<f64>> = None;
        let mut out = Vec::with_capacity(params.len());
        for (index, p) in params.iter().enumerate() {
            let outcome = solve_point(p, v, grid, seed.as_ref(), opts);
            if let Ok((lm, _)) = &outcome {
                seed = lm.field().ok();
            }
            out.push(SweepPoint {
                index,
                params: *p,
                outcome: outcome.map(|(_, r)| r).map_err(|e| e.to_string()),
            });
        }
        out
    } else {
        params
            .par_iter()
            .enumerate()
            .map(|(index, p)| SweepPoint {
                index,
                params: *p,
                outcome: solve_point(p, v, grid, None, opts)
                    .map(|(_, r)| r)
                    .map_err(|e| e.to_string()),
            })
            .collect()
    };
    Ok(Sweep { variable, points })
}

/// The local minimizer and the branch record (the same record for the
/// local-min branch).
fn solve_point(
    p: &EnergyParams,
    v: &Potential,
    grid: &Arc<RadialGrid<f64>>,
    seed: Option<&RadialField<f64>>,
    opts: &SweepOptions,
) -> Result<(SolutionRecord, SolutionRecord)> {
    let geom = geometry(p.dimension, p.q, opts.gn_constant, p.mu, v.gap()?)?;
    let lm = solve_local_min_with(p, v, &geom, grid, seed, &opts.local_min)?;
    match opts.branch {
        Branch::LocalMin => Ok((lm.clone(), lm)),
        Branch::MountainPass => {
            let mp = solve_mountain_pass_with(p, v, &geom, &lm, &opts.mountain_pass)?;
            Ok((lm, mp))
        }
    }
}

/// The varying parameter, which must be monotone; `N` and `q` are fixed.
fn check_monotone(params: &[EnergyParams]) -> Result<Option<SweepVariable>> {
    let Some(first) = params.first() else {
        return Ok(None);
    };
    if params.iter().any(|p| p.dimension != first.dimension || p.q != first.q) {
        return Err(Error::InvalidParameter("a sweep must keep N and q fixed".into()));
    }
    let mu_varies = params.iter().any(|p| p.mu != first.mu);
    let rho_varies = params.iter().any(|p| p.rho != first.rho);
    let (variable, values): (_, Vec<f64>) = match (mu_varies, rho_varies) {
        (true, true) => {
            return Err(Error::InvalidParameter("a sweep varies either mu or rho, not both".into()))
        }
        (false, true) => (SweepVariable::Rho, params.iter().map(|p| p.rho).collect()),
        _ => (SweepVariable::Mu, params.iter().map(|p| p.mu).collect()),
    };
    let up = values.windows(2).all(|w| w[1] >= w[0]);
    let down = values.windows(2).all(|w| w[1] <= w[0]);
    if !(up || down) {
        return Err(Error::InvalidParameter("sweep parameters must be monotone".into()));
    }
    Ok(Some(variable))
}
