//! Limit profiles: the 1D soliton in closed form and the radial ground state
//! of `−Δφ + φ = φ^{q−1}` by shooting.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::check_subcritical;
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};

fn check_q(q: f64) -> Result<()> {
    if !(q > 2.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("q = {q} must exceed 2")));
    }
    Ok(())
}

/// `ln sech(y)`, stable for large `|y|`.
fn ln_sech(y: f64) -> f64 {
    let a = y.abs();
    -a - ((1.0 + (-2.0 * a).exp()) / 2.0).ln()
}

/// Closed-form soliton `U(x) = [(q/2) sech²(k x)]^{1/(q−2)}`, `k = (q−2)/2`.
pub fn soliton_value(q: f64, x: f64) -> f64 {
    let k = (q - 2.0) / 2.0;
    soliton_peak(q) * (2.0 * ln_sech(k * x) / (q - 2.0)).exp()
}

/// `U''(x) = U − (q/2) sech²(k x) U`.
pub fn soliton_second_derivative(q: f64, x: f64) -> f64 {
    let k = (q - 2.0) / 2.0;
    let u = soliton_value(q, x);
    let sech2 = (2.0 * ln_sech(k * x)).exp();
    u - 0.5 * q * sech2 * u
}

/// Peak value `U(0) = (2/q)^{−1/(q−2)}`.
pub fn soliton_peak(q: f64) -> f64 {
    (2.0 / q).powf(-1.0 / (q - 2.0))
}

/// The soliton sampled on a two-sided 1D grid.
pub fn soliton_profile_1d(q: f64, grid: &Arc<RadialGrid<f64>>) -> Result<RadialField<f64>> {
    check_q(q)?;
    if !grid.is_two_sided() {
        return Err(Error::InvalidParameter("the soliton lives on a two-sided 1D grid".into()));
    }
    Ok(RadialField::from_fn(grid.clone(), |x| soliton_value(q, x)))
}

/// Residuals of `−U'' + U − U^{q−1}` for the soliton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonResidual {
    /// Max over the nodes with `U''` from its closed form.
    pub analytic: f64,
    /// Max over the interior nodes with the grid's discrete Laplacian.
    pub discrete: f64,
}

pub fn soliton_residual(q: f64, grid: &Arc<RadialGrid<f64>>) -> Result<SolitonResidual> {
    let u = soliton_profile_1d(q, grid)?;
    let mut analytic = 0.0f64;
    for &x in grid.nodes() {
        let v = soliton_value(q, x);
        let r = -soliton_second_derivative(q, x) + v - v.powf(q - 1.0);
        analytic = analytic.max(r.abs());
    }
    let mut ku = vec![0.0; grid.len()];
    grid.apply_stiffness(u.values(), &mut ku);
    let mut discrete = 0.0f64;
    for i in grid.free() {
        let v = u.values()[i];
        let r = ku[i] / grid.weights()[i] + v - v.powf(q - 1.0);
        discrete = discrete.max(r.abs());
    }
    Ok(SolitonResidual { analytic, discrete })
}

/// Both sides of `(2q/(q+2)) ∫U² = ∫U^q` on a 1D grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRelation {
    pub mass2: f64,
    pub lq: f64,
    pub lhs: f64,
    pub relative_error: f64,
}

pub fn soliton_norm_relation(q: f64, grid: &Arc<RadialGrid<f64>>) -> Result<NormRelation> {
    let u = soliton_profile_1d(q, grid)?;
    let mass2 = grid.integrate(&u, 2.0)?;
    let lq = grid.integrate(&u, q)?;
    let lhs = 2.0 * q / (q + 2.0) * mass2;
    Ok(NormRelation {
        mass2,
        lq,
        lhs,
        relative_error: (lhs - lq).abs() / lq,
    })
}

/// Shooting controls for [`ground_state_nd_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// Largest RK4 step.
    pub step: f64,
    /// Relative separation of the bracketing trajectories where the
    /// asymptotic tail takes over.
    pub split: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { step: 2e-3, split: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    /// Crossed zero: `φ(0)` too large.
    Overshoot,
    /// Turned upward while positive: `φ(0)` too small.
    Undershoot,
    /// Neither within the integration range.
    Decaying,
}

struct Shooter {
    dimension: usize,
    q: f64,
    step: f64,
}

impl Shooter {
    fn f(&self, phi: f64) -> f64 {
        phi - phi.abs().powf(self.q - 2.0) * phi
    }

    fn rhs(&self, r: f64, y: [f64; 2]) -> [f64; 2] {
        let n1 = (self.dimension - 1) as f64;
        let acc = if r > 0.0 {
            self.f(y[0]) - n1 / r * y[1]
        } else {
            self.f(y[0]) / self.dimension as f64
        };
        [y[1], acc]
    }

    fn rk4(&self, r: f64, y: [f64; 2], h: f64) -> [f64; 2] {
        let add = |y: [f64; 2], k: [f64; 2], s: f64| [y[0] + s * k[0], y[1] + s * k[1]];
        let k1 = self.rhs(r, y);
        let k2 = self.rhs(r + 0.5 * h, add(y, k1, 0.5 * h));
        let k3 = self.rhs(r + 0.5 * h, add(y, k2, 0.5 * h));
        let k4 = self.rhs(r + h, add(y, k3, h));
        [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }

    /// Series `a + c₂r² + c₄r⁴` near the origin.
    fn series(&self, a: f64, r: f64) -> [f64; 2] {
        let n = self.dimension as f64;
        let fa = self.f(a);
        let dfa = 1.0 - (self.q - 1.0) * a.abs().powf(self.q - 2.0);
        let c2 = fa / (2.0 * n);
        let c4 = dfa * c2 / (4.0 * n + 8.0);
        [a + c2 * r * r + c4 * r.powi(4), 2.0 * c2 * r + 4.0 * c4 * r.powi(3)]
    }

    /// Integrates from `φ(0) = a` through `nodes` (which start at 0), stopping
    /// at the first overshoot or undershoot. Returns the values at the nodes
    /// reached and the outcome.
    fn run(&self, a: f64, nodes: &[f64]) -> (Vec<f64>, Outcome) {
        let mut values = Vec::with_capacity(nodes.len());
        values.push(a);
        let mut y = [a, 0.0];
        let mut r = 0.0;
        let mut first = true;
        for &target in &nodes[1..] {
            let span = target - r;
            let n = (span / self.step).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for _ in 0..n {
                y = if first {
                    first = false;
                    self.series(a, h)
                } else {
                    self.rk4(r, y, h)
                };
                r += h;
                if y[0] <= 0.0 {
                    return (values, Outcome::Overshoot);
                }
                if y[1] > 0.0 {
                    return (values, Outcome::Undershoot);
                }
            }
            r = target;
            values.push(y[0]);
        }
        (values, Outcome::Decaying)
    }
}

/// Radial decaying solution of `Δφ = φ` up to a constant:
/// `r^{−(N−1)/2} e^{−r} (1 + (4ν² − 1)/(8r))`, `ν = (N−2)/2`.
fn linear_tail(dimension: usize, r: f64) -> f64 {
    let nu = (dimension as f64 - 2.0) / 2.0;
    r.powf(-(dimension as f64 - 1.0) / 2.0) * (-r).exp() * (1.0 + (4.0 * nu * nu - 1.0) / (8.0 * r))
}

/// Ground state with shooting diagnostics.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub profile: RadialField<f64>,
    pub phi0: f64,
    /// Radius beyond which the asymptotic tail is used.
    pub matching_radius: f64,
}

/// Radial ground state of `−Δφ + φ = φ^{q−1}` on `grid` (`N ≥ 2`).
pub fn ground_state_nd(dimension: usize, q: f64, grid: &Arc<RadialGrid<f64>>) -> Result<RadialField<f64>> {
    ground_state_nd_with(dimension, q, grid, ShootingOptions::default()).map(|g| g.profile)
}

pub fn ground_state_nd_with(
    dimension: usize,
    q: f64,
    grid: &Arc<RadialGrid<f64>>,
    options: ShootingOptions,
) -> Result<GroundState> {
    if dimension < 2 {
        return Err(Error::InvalidParameter(
            "ground_state_nd needs N >= 2; use soliton_profile_1d in 1D".into(),
        ));
    }
    if grid.dimension() != dimension {
        return Err(Error::DimensionMismatch(format!(
            "grid has N = {}, requested N = {dimension}",
            grid.dimension()
        )));
    }
    check_subcritical(dimension, q)?;
    if !(options.step > 0.0) || !(options.split > 0.0) {
        return Err(Error::InvalidParameter("shooting step and split must be positive".into()));
    }
    let shooter = Shooter { dimension, q, step: options.step };
    let nodes = grid.nodes();
    let outcome = |a: f64| shooter.run(a, nodes).1;

    let not_found = || Error::BracketNotFound { dimension, q };
    let mut lo = 1.0 + 1e-3;
    if outcome(lo) != Outcome::Undershoot {
        return Err(not_found());
    }
    let mut hi = 2.0;
    while outcome(hi) != Outcome::Overshoot {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(not_found());
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match outcome(mid) {
            Outcome::Overshoot => hi = mid,
            Outcome::Undershoot => lo = mid,
            Outcome::Decaying => {
                lo = mid;
                hi = mid;
                break;
            }
        }
    }

    let (below, _) = shooter.run(lo, nodes);
    let (above, _) = shooter.run(hi, nodes);
    let reach = below.len().min(above.len());
    let mut split = reach;
    for i in 0..reach {
        if (above[i] - below[i]).abs() > options.split * below[i].abs() {
            split = i;
            break;
        }
    }
    // Keep a few nodes of margin before the trajectories separate.
    let last = split.saturating_sub(1).max(1).min(nodes.len() - 1);
    let mut values = Vec::with_capacity(nodes.len());
    for i in 0..=last {
        values.push(0.5 * (below[i] + above[i]));
    }
    let rc = nodes[last];
    let phi_c = values[last];
    let g_c = linear_tail(dimension, rc);
    for &r in &nodes[last + 1..] {
        values.push(phi_c * linear_tail(dimension, r) / g_c);
    }
    Ok(GroundState {
        profile: RadialField::new(grid.clone(), values)?,
        phi0: 0.5 * (lo + hi),
        matching_radius: rc,
    })
}

/// Shooting outcome for `−U'' + βU = U^{q−1}`, `U(0) = 1`, `U'(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DichotomyWitness {
    pub beta: f64,
    pub q: f64,
    /// First zero of `U`, if it changes sign before `x_end`.
    pub crossing: Option<f64>,
}

pub fn dichotomy_witness(beta: f64, q: f64, x_end: f64) -> Result<DichotomyWitness> {
    check_q(q)?;
    if !(beta > 0.0) || !(x_end > 0.0) {
        return Err(Error::InvalidParameter("beta and x_end must be positive".into()));
    }
    let rhs = |y: [f64; 2]| [y[1], beta * y[0] - y[0].abs().powf(q - 2.0) * y[0]];
    let h = 1e-3;
    let mut y = [1.0, 0.0];
    let mut x = 0.0;
    while x < x_end {
        let add = |y: [f64; 2], k: [f64; 2], s: f64| [y[0] + s * k[0], y[1] + s * k[1]];
        let k1 = rhs(y);
        let k2 = rhs(add(y, k1, 0.5 * h));
        let k3 = rhs(add(y, k2, 0.5 * h));
        let k4 = rhs(add(y, k3, h));
        let next = [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if next[0] < 0.0 {
            let crossing = x + h * y[0] / (y[0] - next[0]);
            return Ok(DichotomyWitness { beta, q, crossing: Some(crossing) });
        }
        y = next;
        x += h;
    }
    Ok(DichotomyWitness { beta, q, crossing: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Spacing};

    fn line(r_max: f64, m: usize) -> Arc<RadialGrid<f64>> {
        build_grid::<f64>(1, r_max, m, Spacing::Uniform).unwrap()
    }

    #[test]
    fn q4_soliton_is_sqrt2_sech() {
        for &x in &[0.0f64, 0.3, -1.7, 5.0, 30.0] {
            let expect = 2f64.sqrt() / x.cosh();
            assert!((soliton_value(4.0, x) - expect).abs() <= 1e-14 * expect.max(1e-300) + 1e-300);
        }
        assert_eq!(soliton_peak(4.0), 2f64.sqrt());
    }

    #[test]
    fn peak_matches_closed_form() {
        for &q in &[2.5, 3.5, 4.0, 5.0, 6.0, 9.0] {
            let p = soliton_value(q, 0.0);
            assert!((p - soliton_peak(q)).abs() <= 4.0 * f64::EPSILON * p, "q = {q}");
        }
    }

    #[test]
    fn second_derivative_against_finite_differences() {
        let q = 5.0;
        let h = 1e-3;
        for &x in &[0.0, 0.4, 1.3, 3.0] {
            let fd = (soliton_value(q, x + h) - 2.0 * soliton_value(q, x) + soliton_value(q, x - h)) / (h * h);
            assert!((fd - soliton_second_derivative(q, x)).abs() < 1e-5);
        }
    }

    #[test]
    fn residuals() {
        let g = line(20.0, 4000);
        let r = soliton_residual(4.0, &g).unwrap();
        assert!(r.analytic <= 1e-10, "{r:?}");
        // O(h²) with h = 0.01.
        assert!(r.discrete < 1e-3 && r.discrete > 1e-7, "{r:?}");
    }

    #[test]
    fn q4_norms() {
        let rel = soliton_norm_relation(4.0, &line(20.0, 4000)).unwrap();
        assert!((rel.mass2 - 4.0).abs() < 1e-10);
        assert!((rel.lq - 16.0 / 3.0).abs() < 1e-10);
        assert!(rel.relative_error < 1e-10);
    }

    #[test]
    fn needs_two_sided_grid() {
        let g = build_grid::<f64>(2, 10.0, 100, Spacing::Uniform).unwrap();
        assert!(soliton_profile_1d(4.0, &g).is_err());
        assert!(soliton_profile_1d(2.0, &line(10.0, 100)).is_err());
    }

    #[test]
    fn ground_state_2d_q4() {
        let g = build_grid::<f64>(2, 30.0, 3000, Spacing::Uniform).unwrap();
        let gs = ground_state_nd_with(2, 4.0, &g, ShootingOptions::default()).unwrap();
        // Townes profile: φ(0) ≈ 2.20620.
        assert!((gs.phi0 - 2.2062).abs() < 1e-3, "{}", gs.phi0);
        let v = gs.profile.values();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert!(gs.matching_radius > 5.0);
    }

    #[test]
    fn ground_state_resolution_independent() {
        let g = build_grid::<f64>(3, 25.0, 2500, Spacing::Uniform).unwrap();
        let a = ground_state_nd_with(3, 4.0, &g, ShootingOptions { step: 4e-3, split: 1e-6 }).unwrap();
        let b = ground_state_nd_with(3, 4.0, &g, ShootingOptions { step: 2e-3, split: 1e-6 }).unwrap();
        assert!((a.phi0 - b.phi0).abs() < 1e-8);
        assert!((b.phi0 - 4.3374).abs() < 1e-3, "{}", b.phi0);
    }

    #[test]
    fn ground_state_rejects_bad_input() {
        let g = build_grid::<f64>(3, 10.0, 100, Spacing::Uniform).unwrap();
        assert!(ground_state_nd(3, 6.5, &g).is_err());
        assert!(ground_state_nd(2, 4.0, &g).is_err());
        assert!(ground_state_nd(1, 4.0, &line(10.0, 100)).is_err());
    }

    #[test]
    fn small_beta_changes_sign() {
        let w = dichotomy_witness(0.25, 4.0, 50.0).unwrap();
        assert!(w.crossing.is_some());
        // β ≥ 2/q: the energy at U = 0 is non-positive, no crossing.
        let w = dichotomy_witness(0.6, 4.0, 50.0).unwrap();
        assert!(w.crossing.is_none());
    }
}
