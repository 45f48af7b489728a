//! The local minimizer in `Σ_μ`, the mountain-pass saddle, and
//! parameter sweeps along either branch.

pub mod descent;
pub mod mountain_pass;
pub mod newton;
pub mod sweep;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::Functional;
use crate::error::Result;
use crate::grid::{build_grid, RadialGrid, Spacing};
use crate::precond::Sobolev;

pub use descent::{solve_local_min, solve_local_min_with, LocalMinOptions};
pub use mountain_pass::{solve_mountain_pass, solve_mountain_pass_with, MountainPassOptions, PathState};
pub use newton::{constrained_newton, refine_on_grid, NewtonOutcome};
pub use sweep::{continuation_sweep, Branch, Sweep, SweepOptions, SweepPoint, SweepVariable, TraceRow};

pub const DEFAULT_R_MAX: f64 = 40.0;
pub const DEFAULT_INTERVALS: usize = 4000;

/// Default solve grid for dimension `N`: uniform on `[0, 40]` with 4000
/// intervals.
pub fn default_grid(dimension: usize) -> Result<Arc<RadialGrid<f64>>> {
    build_grid(dimension, DEFAULT_R_MAX, DEFAULT_INTERVALS, Spacing::Uniform)
}

/// Tolerances shared by both solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Residual tolerance of the Newton polish, relative to
    /// `max(1, ‖u‖_∞^{q−1})`.
    pub newton: f64,
    pub newton_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            newton: 1e-10,
            newton_max_iter: 50,
        }
    }
}

/// Rescales to `‖u‖₂ = μ`.
pub(crate) fn project_mass(grid: &RadialGrid<f64>, u: &mut [f64], mu: f64) {
    let m = grid.integrate_values(u, 2.0).sqrt();
    if m > 0.0 {
        for v in u.iter_mut() {
            *v *= mu / m;
        }
    }
}

/// `|u|` rescaled to mass `μ`.
pub(crate) fn retract(grid: &RadialGrid<f64>, u: &mut [f64], mu: f64) {
    for v in u.iter_mut() {
        *v = v.abs();
    }
    project_mass(grid, u, mu);
}

/// Sphere-projected gradient `∇E + λWu`, `λ` the `L²`-optimal multiplier,
/// measured in the dual norm of `K + W`.
pub fn projected_gradient(f: &Functional<f64>, u: &[f64]) -> f64 {
    let lambda = match f.multiplier(u) {
        Ok(l) => l,
        Err(_) => return f64::NAN,
    };
    let w = f.grid().weights();
    let mut g = f.gradient(u);
    for i in f.grid().free() {
        g[i] += lambda * w[i] * u[i];
    }
    let p = Sobolev::new(f.grid(), 1.0);
    let y = p.solve(&g);
    g.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
}

/// `L²`-weighted residual norm `(Σ w r²)^{1/2}` at the optimal multiplier.
pub(crate) fn l2_residual(f: &Functional<f64>, u: &[f64]) -> (f64, f64) {
    let lambda = f.multiplier(u).unwrap_or(f64::NAN);
    let r = f.residual(u, lambda);
    let w = f.grid().weights();
    let s: f64 = r.iter().zip(w).map(|(a, b)| b * a * a).sum();
    (s.sqrt(), lambda)
}

/// Direction `−(P⁻¹g − βP⁻¹Wu)` tangent to the sphere in the `P` metric,
/// with `g` the `L²` gradient of the energy.
pub(crate) fn tangent_descent(f: &Functional<f64>, p: &Sobolev, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let g = f.gradient(u);
    let w = f.grid().weights();
    let wu: Vec<f64> = u.iter().zip(w).map(|(a, b)| a * b).collect();
    let pg = p.solve(&g);
    let pu = p.solve(&wu);
    let beta = dot(&wu, &pg) / dot(&wu, &pu);
    let d = pg.iter().zip(&pu).map(|(a, b)| -(a - beta * b)).collect();
    (d, g)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
