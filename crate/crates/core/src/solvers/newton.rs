//! Constrained Newton polish for the extended system
//! `(∇E(u) + λWu, ½(‖u‖² − μ²)) = 0`.

use std::sync::Arc;

use crate::energy::Functional;
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::linalg::solve_bordered;
use crate::record::{SolutionRecord, SolverInfo};

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub u: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    /// `max |residual|` at exit.
    pub residual: f64,
}

/// Residual scale used by the stopping test: `max(1, ‖u‖_∞^{q−1})`.
pub fn residual_scale(u: &[f64], q: f64) -> f64 {
    let m = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    m.powf(q - 1.0).max(1.0)
}

pub(crate) fn max_residual(f: &Functional<f64>, u: &[f64], lambda: f64) -> f64 {
    f.residual(u, lambda).iter().fold(0.0f64, |a, r| a.max(r.abs()))
}

/// Newton on `(u, λ)` jointly with the mass as a bordering row. Stops when
/// `max |−Δu + Vu + λu − ρ|u|^{q−2}u| ≤ tol·max(1, ‖u‖_∞^{q−1})` and the
/// mass defect is at rounding level.
pub fn constrained_newton(
    f: &Functional<f64>,
    u: &[f64],
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    let grid = f.grid().clone();
    let w = grid.weights();
    let free = grid.free();
    let mu2 = f.params().mu * f.params().mu;
    let mut u = u.to_vec();
    let mut lambda = lambda;
    let mut first = None;
    for it in 0..=max_iter {
        let res = max_residual(f, &u, lambda);
        let mass2: f64 = free.clone().map(|i| w[i] * u[i] * u[i]).sum();
        let defect = 0.5 * (mass2 - mu2);
        if !res.is_finite() || !lambda.is_finite() {
            return Err(Error::NewtonDivergence { iterations: it, residual: res });
        }
        if res <= tol * residual_scale(&u, f.params().q) && defect.abs() <= 1e-13 * mu2.max(1e-300) {
            return Ok(NewtonOutcome {
                u,
                lambda,
                iterations: it,
                residual: res,
            });
        }
        let r0 = *first.get_or_insert(res);
        if it == max_iter || res > 1e8 * r0.max(1.0) {
            return Err(Error::NewtonDivergence { iterations: it, residual: res });
        }
        let g = f.gradient(&u);
        let rhs: Vec<f64> = free.clone().map(|i| -(g[i] + lambda * w[i] * u[i])).collect();
        let c: Vec<f64> = free.clone().map(|i| w[i] * u[i]).collect();
        let h = f.hessian(&u, lambda);
        let (du, dl) = solve_bordered(&h, &c, &rhs, -defect)
            .ok_or(Error::NewtonDivergence { iterations: it, residual: res })?;
        for (j, i) in free.clone().enumerate() {
            u[i] += du[j];
        }
        lambda += dl;
    }
    unreachable!()
}

/// Transfers a record to `grid` by interpolation and re-converges it there
/// with the constrained Newton method. The kind and solver metadata are kept.
pub fn refine_on_grid(record: &SolutionRecord, grid: &Arc<RadialGrid<f64>>, tol: f64) -> Result<SolutionRecord> {
    let source = record.field()?;
    let mut u: Vec<f64> = grid.nodes().iter().map(|&r| source.interpolate(r)).collect();
    let f = Functional::new(record.params, &record.potential, grid.clone())?;
    f.zero_boundary(&mut u);
    super::project_mass(grid, &mut u, record.params.mu);
    let out = constrained_newton(&f, &u, record.lambda, tol, 50)?;
    let field = RadialField::new(grid.clone(), out.u)?;
    let solver = SolverInfo {
        newton_iterations: out.iterations,
        tolerance: tol,
        projected_gradient: super::projected_gradient(&f, field.values()),
        ..record.solver.clone()
    };
    SolutionRecord::assemble(record.kind, record.params, &record.potential, &field, out.lambda, solver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyParams;
    use crate::grid::{build_grid, Spacing};
    use crate::potentials::Potential;

    #[test]
    fn newton_recovers_scaled_soliton() {
        // −u'' + λu = u³ is solved by √(2λ) sech(√λ x), of mass² 4√λ.
        let g = build_grid::<f64>(1, 20.0, 4000, Spacing::Uniform).unwrap();
        let params = EnergyParams::limit_problem(1, 4.0, 1.0, 2.0).unwrap();
        let v = Potential::constant(0.0).unwrap();
        let f = Functional::new(params, &v, g.clone()).unwrap();
        let lam = 1.0f64;
        let exact: Vec<f64> = g
            .nodes()
            .iter()
            .map(|&x| (2.0 * lam).sqrt() / (lam.sqrt() * x).cosh())
            .collect();
        let mut start: Vec<f64> = exact.iter().map(|v| 0.9 * v).collect();
        f.zero_boundary(&mut start);
        let out = constrained_newton(&f, &start, 0.7, 1e-10, 50).unwrap();
        assert!((out.lambda - 1.0).abs() < 1e-4, "{}", out.lambda);
        let err = out.u.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-3, "{err}");
    }
}
