//! Mountain-pass saddle on the mass sphere by discrete path deformation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::descent::check_geometry;
use super::newton::constrained_newton;
use super::{dot, l2_residual, projected_gradient, retract, Tolerances};
use crate::constants::Geometry;
use crate::energy::{EnergyParams, Functional};
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::potentials::Potential;
use crate::precond::Sobolev;
use crate::record::{SolutionKind, SolutionRecord, SolverInfo};

/// Knots whose energies lie within this of the maximum count as maximal.
pub const TIE_TOLERANCE: f64 = 1e-12;
pub const MIN_KNOTS: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountainPassOptions {
    pub n_knots: usize,
    pub max_iter: usize,
    /// Dual-norm projected gradient of the maximal knot at which the path
    /// phase stops.
    pub path_tolerance: f64,
    /// `L²` residual of the maximal knot at which the path phase hands over
    /// to Newton.
    pub handoff: f64,
    /// Iterations between arclength re-spacings.
    pub respace_every: usize,
    /// Golden-section steps when locating the maximum on a segment.
    pub golden_steps: usize,
    /// Moves are capped at this fraction of the distance to the nearer
    /// neighbour.
    pub step_fraction: f64,
    /// First dilation factor tried for the far endpoint.
    pub dilation_start: f64,
    pub tolerances: Tolerances,
}

impl Default for MountainPassOptions {
    fn default() -> Self {
        Self {
            n_knots: MIN_KNOTS,
            max_iter: 20_000,
            path_tolerance: 1e-6,
            handoff: 4.0,
            respace_every: 5,
            golden_steps: 40,
            step_fraction: 0.25,
            dilation_start: 2.0,
            tolerances: Tolerances::default(),
        }
    }
}

/// A discrete path on the mass sphere with fixed endpoints.
#[derive(Debug, Clone)]
pub struct PathState {
    pub knots: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    pub max_index: usize,
}

impl PathState {
    fn new(f: &Functional<f64>, knots: Vec<Vec<f64>>) -> Self {
        let mut s = Self {
            knots,
            energies: Vec::new(),
            max_index: 0,
        };
        s.update(f);
        s
    }

    /// Recomputes the energies and the maximal knot, lowest index on ties.
    fn update(&mut self, f: &Functional<f64>) {
        self.energies = self.knots.iter().map(|k| f.energy(k)).collect();
        let top = self.energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tol = TIE_TOLERANCE * top.abs().max(1.0);
        self.max_index = self.energies.iter().position(|&e| e >= top - tol).unwrap_or(0);
    }

    pub fn level(&self) -> f64 {
        self.energies[self.max_index]
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }
}

pub fn solve_mountain_pass(
    params: &EnergyParams,
    v: &Potential,
    geom: &Geometry,
    u0: &SolutionRecord,
    n_knots: usize,
) -> Result<SolutionRecord> {
    let opts = MountainPassOptions {
        n_knots,
        ..MountainPassOptions::default()
    };
    solve_mountain_pass_with(params, v, geom, u0, &opts)
}

/// Path-deformation minimax from the local minimizer `u0` to a dilation of
/// it with lower energy outside `Σ_μ`, followed by the constrained Newton
/// polish of the maximal knot.
pub fn solve_mountain_pass_with(
    params: &EnergyParams,
    v: &Potential,
    geom: &Geometry,
    u0: &SolutionRecord,
    opts: &MountainPassOptions,
) -> Result<SolutionRecord> {
    params.validate()?;
    check_geometry(params, geom)?;
    if opts.n_knots < MIN_KNOTS {
        return Err(Error::InvalidParameter(format!(
            "n_knots = {} < {MIN_KNOTS}",
            opts.n_knots
        )));
    }
    if u0.kind != SolutionKind::LocalMin || u0.params != *params {
        return Err(Error::InvalidParameter(
            "mountain pass needs the local-min record of the same parameters".into(),
        ));
    }
    let grid = u0.build_grid()?;
    let f = Functional::new(*params, v, grid.clone())?;
    let mu = params.mu;
    let start = u0.field()?;
    let e0 = f.energy(start.values());

    let (far, dilation) = far_endpoint(&f, &start, geom.t_mu, e0, opts.dilation_start)?;
    let knots: Vec<Vec<f64>> = (0..opts.n_knots)
        .map(|j| {
            let s = j as f64 / (opts.n_knots - 1) as f64;
            segment_point(&grid, start.values(), &far, s, mu)
        })
        .collect();
    let mut path = PathState::new(&f, knots);
    let h1 = Sobolev::new(&grid, 1.0);
    let last = opts.n_knots - 1;

    let mut iterations = 0;
    loop {
        let i = path.max_index;
        if i == 0 || i == last {
            return Err(Error::PathCollapse { index: i });
        }
        path.knots[i] = refine_max(&f, &path, i, mu, opts.golden_steps);
        let (res, _) = l2_residual(&f, &path.knots[i]);
        let pg = projected_gradient(&f, &path.knots[i]);
        if pg <= opts.path_tolerance || res < opts.handoff {
            break;
        }
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence {
                what: "mountain-pass path",
                iterations,
                residual: res,
            });
        }
        for j in i - 1..=i + 1 {
            if j == 0 || j == last {
                continue;
            }
            let gap = h1_distance(&h1, &path.knots[j], &path.knots[j - 1])
                .min(h1_distance(&h1, &path.knots[j + 1], &path.knots[j]));
            path.knots[j] = descend(&f, &path.knots[j], opts.step_fraction * gap, mu);
        }
        iterations += 1;
        if iterations % opts.respace_every == 0 {
            path.knots = respace(&grid, &h1, &path.knots, mu);
        }
        path.update(&f);
    }
    path.update(&f);
    let level = path.level();
    let top = path.knots[path.max_index].clone();

    let lambda = f.multiplier(&top)?;
    let tol = opts.tolerances;
    let out = constrained_newton(&f, &top, lambda, tol.newton, tol.newton_max_iter)?;
    let field = RadialField::new(grid.clone(), out.u)?;
    let solver = SolverInfo {
        iterations,
        newton_iterations: out.iterations,
        tolerance: tol.newton,
        projected_gradient: projected_gradient(&f, field.values()),
        path_level: Some(level),
        path_energies: path.energies.clone(),
        endpoint_dilation: Some(dilation),
    };
    SolutionRecord::assemble(SolutionKind::MountainPass, *params, v, &field, out.lambda, solver)
}

/// `u₁ = t^{N/2}u₀(t·)` on the sphere, `t` grown by 1.5 until
/// `E(u₁) < E(u₀)` and `‖∇u₁‖₂ > t_μ`.
fn far_endpoint(
    f: &Functional<f64>,
    u0: &RadialField<f64>,
    t_mu: f64,
    e0: f64,
    t_start: f64,
) -> Result<(Vec<f64>, f64)> {
    let grid = f.grid();
    let mu = f.params().mu;
    let mut t = t_start;
    while t < 1e6 {
        let mut u1 = u0.dilate(t).into_values();
        f.zero_boundary(&mut u1);
        retract(grid, &mut u1, mu);
        if f.energy(&u1) < e0 && grid.dirichlet_values(&u1).sqrt() > t_mu {
            return Ok((u1, t));
        }
        t *= 1.5;
    }
    Err(Error::GeometryViolated(
        "no dilation of the local minimizer has lower energy outside Sigma_mu".into(),
    ))
}

fn segment_point(grid: &RadialGrid<f64>, a: &[f64], b: &[f64], s: f64, mu: f64) -> Vec<f64> {
    let mut u: Vec<f64> = a.iter().zip(b).map(|(x, y)| (1.0 - s) * x + s * y).collect();
    retract(grid, &mut u, mu);
    u
}

fn h1_distance(p: &Sobolev, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    p.norm2(&d).sqrt()
}

/// Golden-section search for the energy maximum on the two segments
/// adjacent to knot `i`; the knot is replaced only by a higher point.
fn refine_max(f: &Functional<f64>, path: &PathState, i: usize, mu: f64, steps: usize) -> Vec<f64> {
    let grid = f.grid();
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = (path.energies[i], path.knots[i].clone());
    for (a, b) in [(i - 1, i), (i, i + 1)] {
        let (ka, kb) = (&path.knots[a], &path.knots[b]);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..steps {
            let m1 = hi - ratio * (hi - lo);
            let m2 = lo + ratio * (hi - lo);
            let e1 = f.energy(&segment_point(grid, ka, kb, m1, mu));
            let e2 = f.energy(&segment_point(grid, ka, kb, m2, mu));
            if e1 > e2 {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let c = segment_point(grid, ka, kb, 0.5 * (lo + hi), mu);
        let ec = f.energy(&c);
        if ec > best.0 {
            best = (ec, c);
        }
    }
    best.1
}

/// One Armijo step along the sphere-tangent descent direction in the
/// metric `K + αW`, `α = max(1, λ + min V)`, with the move capped in `H¹`.
fn descend(f: &Functional<f64>, u: &[f64], cap: f64, mu: f64) -> Vec<f64> {
    let grid = f.grid();
    let vmin = f
        .potential_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let lambda = f.multiplier(u).unwrap_or(0.0);
    let alpha = (lambda + vmin).max(1.0);
    let p = Sobolev::new(grid, alpha);
    let (d, g) = super::tangent_descent(f, &p, u);
    let h1 = Sobolev::new(grid, 1.0);
    let len = h1.norm2(&d).sqrt();
    if !(len > 0.0) {
        return u.to_vec();
    }
    let slope = -dot(&g, &d);
    let e0 = f.energy(u);
    let mut tau = (cap / len).min(1.0);
    while tau > 1e-8 {
        let mut trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + tau * b).collect();
        retract(grid, &mut trial, mu);
        if f.energy(&trial) <= e0 - 1e-4 * tau * slope {
            return trial;
        }
        tau *= 0.5;
    }
    u.to_vec()
}

/// Re-spaces the interior knots uniformly in `H¹` arclength.
fn respace(grid: &Arc<RadialGrid<f64>>, h1: &Sobolev, knots: &[Vec<f64>], mu: f64) -> Vec<Vec<f64>> {
    let n = knots.len();
    let mut arc = vec![0.0; n];
    for j in 1..n {
        arc[j] = arc[j - 1] + h1_distance(h1, &knots[j], &knots[j - 1]);
    }
    let total = arc[n - 1];
    let mut out = Vec::with_capacity(n);
    out.push(knots[0].clone());
    for j in 1..n - 1 {
        let s = total * j as f64 / (n - 1) as f64;
        let m = arc.partition_point(|&a| a < s).saturating_sub(1).min(n - 2);
        let span = arc[m + 1] - arc[m];
        let frac = if span > 0.0 { (s - arc[m]) / span } else { 0.0 };
        out.push(segment_point(grid, &knots[m], &knots[m + 1], frac, mu));
    }
    out.push(knots[n - 1].clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::geometry;
    use crate::solvers::descent::solve_local_min;

    const C26: f64 = 0.04726537;

    #[test]
    fn local_min_then_mountain_pass() {
        let v = Potential::gaussian_well(5.0, 1.0).unwrap();
        let gap = v.gap().unwrap();
        let mu0 = crate::constants::mu0(2, 6.0, C26, gap).unwrap();
        let params = EnergyParams::new(2, 6.0, 1.0, 0.5 * mu0).unwrap();
        let geom = geometry(2, 6.0, C26, params.mu, gap).unwrap();
        let lm = solve_local_min(&params, &v, &geom, None).unwrap();
        assert!((lm.lambda - 2.36642).abs() < 1e-4, "{}", lm.lambda);
        assert!((lm.energy + 0.525687).abs() < 1e-5, "{}", lm.energy);
        assert!((lm.mass - params.mu).abs() < 1e-10);
        assert!(lm.grad_norm < geom.t_mu);
        assert!(lm.u.iter().all(|&x| x >= -1e-10));

        let mp = solve_mountain_pass(&params, &v, &geom, &lm, 17).unwrap();
        eprintln!("{} {} {:?}", mp.lambda, mp.energy, mp.spectral.as_ref().unwrap().morse);
        assert!((mp.lambda - 79.4735).abs() < 1e-3, "{}", mp.lambda);
        assert!((mp.energy - 16.30094).abs() < 1e-4, "{}", mp.energy);
        assert!(mp.energy <= mp.solver.path_level.unwrap() + 1e-6);
        let morse = &mp.spectral.as_ref().unwrap().morse;
        assert!(morse.free <= 2 && morse.tangent <= 1);
        assert!(mp.u.iter().all(|&x| x >= -1e-10));
    }

    #[test]
    fn too_few_knots_rejected() {
        let v = Potential::gaussian_well(5.0, 1.0).unwrap();
        let gap = v.gap().unwrap();
        let params = EnergyParams::new(2, 6.0, 1.0, 0.5).unwrap();
        let geom = geometry(2, 6.0, C26, 0.5, gap).unwrap();
        let g = crate::grid::build_grid(2, 20.0, 400, crate::grid::Spacing::Uniform).unwrap();
        let lm = crate::solvers::solve_local_min_with(&params, &v, &geom, &g, None, &Default::default()).unwrap();
        assert!(matches!(
            solve_mountain_pass(&params, &v, &geom, &lm, 5),
            Err(Error::InvalidParameter(_))
        ));
    }
}
