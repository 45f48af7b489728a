//! Constrained local minimizer of `E_ρ` on `{‖u‖₂ = μ, ‖∇u‖₂ < t_μ}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::newton::constrained_newton;
use super::{l2_residual, projected_gradient, retract, tangent_descent, Tolerances};
use crate::constants::Geometry;
use crate::energy::{EnergyParams, Functional};
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::potentials::Potential;
use crate::precond::Sobolev;
use crate::record::{SolutionKind, SolutionRecord, SolverInfo};
use crate::spectral::LinearizedOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalMinOptions {
    pub max_iter: usize,
    /// `L²` residual at which the descent hands over to Newton.
    pub handoff: f64,
    pub tolerances: Tolerances,
}

impl Default for LocalMinOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            handoff: 1e-4,
            tolerances: Tolerances::default(),
        }
    }
}

/// Local minimizer on the default grid (or on the grid of `start`).
pub fn solve_local_min(
    params: &EnergyParams,
    v: &Potential,
    geom: &Geometry,
    start: Option<&RadialField<f64>>,
) -> Result<SolutionRecord> {
    let grid = match start {
        Some(s) => s.grid().clone(),
        None => super::default_grid(params.dimension)?,
    };
    solve_local_min_with(params, v, geom, &grid, start, &LocalMinOptions::default())
}

/// `H¹`-preconditioned projected descent with `u ↦ μ|u|/‖u‖₂` after each
/// step, then the constrained Newton polish. Every iterate is checked to
/// stay inside `Σ_μ`.
pub fn solve_local_min_with(
    params: &EnergyParams,
    v: &Potential,
    geom: &Geometry,
    grid: &Arc<RadialGrid<f64>>,
    start: Option<&RadialField<f64>>,
    opts: &LocalMinOptions,
) -> Result<SolutionRecord> {
    params.validate()?;
    check_geometry(params, geom)?;
    let f = Functional::new(*params, v, grid.clone())?;
    let mu = params.mu;
    let mut u = match start {
        Some(s) => {
            grid.check(s)?;
            s.values().to_vec()
        }
        None => ground_mode(v, grid)?,
    };
    f.zero_boundary(&mut u);
    if !(grid.integrate_values(&u, 2.0) > 0.0) {
        return Err(Error::ZeroMass);
    }
    retract(grid, &mut u, mu);
    check_sigma(grid, &u, geom.t_mu, 0)?;

    let p = Sobolev::new(grid, 1.0);
    let mut e = f.energy(&u);
    let mut iterations = 0;
    loop {
        let (res, _) = l2_residual(&f, &u);
        if res < opts.handoff {
            break;
        }
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence {
                what: "local-min descent",
                iterations,
                residual: res,
            });
        }
        let (d, g) = tangent_descent(&f, &p, &u);
        let slope = -super::dot(&g, &d);
        let mut tau = 1.0;
        loop {
            let mut trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + tau * b).collect();
            retract(grid, &mut trial, mu);
            let et = f.energy(&trial);
            if et <= e - 1e-4 * tau * slope {
                u = trial;
                e = et;
                break;
            }
            tau *= 0.5;
            if tau < 1e-12 {
                return Err(Error::NoConvergence {
                    what: "local-min line search",
                    iterations,
                    residual: res,
                });
            }
        }
        iterations += 1;
        check_sigma(grid, &u, geom.t_mu, iterations)?;
    }

    let lambda = f.multiplier(&u)?;
    let tol = opts.tolerances;
    let out = constrained_newton(&f, &u, lambda, tol.newton, tol.newton_max_iter)?;
    check_sigma(grid, &out.u, geom.t_mu, iterations + out.iterations)?;
    let field = RadialField::new(grid.clone(), out.u)?;
    let solver = SolverInfo {
        iterations,
        newton_iterations: out.iterations,
        tolerance: tol.newton,
        projected_gradient: projected_gradient(&f, field.values()),
        ..SolverInfo::default()
    };
    SolutionRecord::assemble(SolutionKind::LocalMin, *params, v, &field, out.lambda, solver)
}

/// The positive ground mode of `−Δ + V`.
pub(crate) fn ground_mode(v: &Potential, grid: &Arc<RadialGrid<f64>>) -> Result<Vec<f64>> {
    let op = LinearizedOperator::schrodinger(grid.clone(), v)?;
    let pairs = op.lowest_eigenpairs(1)?;
    Ok(pairs[0].1.values().iter().map(|x| x.abs()).collect())
}

pub(crate) fn check_geometry(params: &EnergyParams, geom: &Geometry) -> Result<()> {
    if geom.dimension != params.dimension || geom.q != params.q || geom.mu != params.mu {
        return Err(Error::InvalidParameter(format!(
            "geometry for (N, q, mu) = ({}, {}, {}) used with ({}, {}, {})",
            geom.dimension, geom.q, geom.mu, params.dimension, params.q, params.mu
        )));
    }
    if !(params.mu < geom.mu0) {
        return Err(Error::InvalidParameter(format!(
            "mu = {} is not below mu0 = {}",
            params.mu, geom.mu0
        )));
    }
    Ok(())
}

fn check_sigma(grid: &RadialGrid<f64>, u: &[f64], t_mu: f64, iteration: usize) -> Result<()> {
    let grad_norm = grid.dirichlet_values(u).sqrt();
    if grad_norm < t_mu {
        Ok(())
    } else {
        Err(Error::LeftSigma {
            iteration,
            grad_norm,
            t_mu,
            exit_iterate: u.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::geometry;
    use crate::grid::{build_grid, Spacing};

    const C26: f64 = 0.04726537;

    fn case(shift: f64) -> (EnergyParams, Potential, Geometry, Arc<RadialGrid<f64>>) {
        let v = Potential::gaussian_well(5.0, 1.0).unwrap().shift(shift);
        let gap = v.gap().unwrap();
        let params = EnergyParams::new(2, 6.0, 1.0, 0.6).unwrap();
        let geom = geometry(2, 6.0, C26, 0.6, gap).unwrap();
        (params, v, geom, build_grid(2, 30.0, 1500, Spacing::Uniform).unwrap())
    }

    #[test]
    fn shifted_potential_shifts_multiplier_only() {
        let (p, v, g, grid) = case(0.0);
        let (_, v3, g3, _) = case(3.0);
        let opts = LocalMinOptions::default();
        let a = solve_local_min_with(&p, &v, &g, &grid, None, &opts).unwrap();
        let b = solve_local_min_with(&p, &v3, &g3, &grid, None, &opts).unwrap();
        assert!((a.lambda - b.lambda - 3.0).abs() < 1e-8, "{} {}", a.lambda, b.lambda);
        let d = a.u.iter().zip(&b.u).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn leaving_sigma_is_reported() {
        let (p, v, g, grid) = case(0.0);
        // A narrow bump far outside the ball.
        let start = RadialField::from_fn(grid.clone(), |r| (-(r / 0.05).powi(2)).exp());
        match solve_local_min_with(&p, &v, &g, &grid, Some(&start), &LocalMinOptions::default()) {
            Err(Error::LeftSigma { exit_iterate, grad_norm, t_mu, .. }) => {
                assert!(grad_norm >= t_mu);
                assert_eq!(exit_iterate.len(), grid.len());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mass_above_mu0_rejected() {
        let (p, v, _, grid) = case(0.0);
        let gap = v.gap().unwrap();
        let big = p.with_mu(5.0);
        let geom = geometry(2, 6.0, C26, 5.0, gap).unwrap();
        assert!(matches!(
            solve_local_min_with(&big, &v, &geom, &grid, None, &LocalMinOptions::default()),
            Err(Error::InvalidParameter(_))
        ));
    }
}
