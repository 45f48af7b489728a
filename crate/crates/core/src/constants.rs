//! Gagliardo–Nirenberg constant, the gradient-ball radius `t_μ`, the mass
//! threshold `μ₀` and numerical certificates of the mountain-pass geometry.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::profiles::ground_state_nd;
use crate::energy::{check_subcritical, check_window, theta, xi, EnergyParams, Functional};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, RadialField, RadialGrid};
use crate::potentials::Potential;
use crate::precond::Sobolev;
use crate::spectral::LinearizedOperator;

/// Relative agreement required between the two GN methods.
pub const GN_AGREEMENT: f64 = 1e-3;
/// Relative tolerance of the `μ₀` bisection.
pub const MU0_TOLERANCE: f64 = 1e-12;

/// `∞` is written as JSON `null` and read back as `∞`.
pub(crate) mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GnMethod {
    QuotientMaximization,
    GroundStateRelation,
    /// Value given by the caller.
    Supplied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GNConstant {
    #[serde(rename = "N")]
    pub dimension: usize,
    pub q: f64,
    pub value: f64,
    pub theta: f64,
    pub xi: f64,
    pub method: GnMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Quotient at the shooting ground state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_state_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_disagreement: Option<f64>,
    #[serde(default)]
    pub iterations: usize,
}

impl GNConstant {
    /// A caller-provided value, e.g. a test stub.
    pub fn supplied(dimension: usize, q: f64, value: f64) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter(format!("GN constant {value} must be positive")));
        }
        Ok(Self {
            dimension,
            q,
            value,
            theta: theta(dimension, q),
            xi: xi(dimension, q),
            method: GnMethod::Supplied,
            grid: None,
            ground_state_value: None,
            relative_disagreement: None,
            iterations: 0,
        })
    }

    pub fn geometry(&self, mu: f64, gap: f64) -> Result<Geometry> {
        geometry(self.dimension, self.q, self.value, mu, gap)
    }
}

/// `‖u‖_q^q / (‖u‖₂^θ ‖∇u‖₂^ξ)` with the discrete norms.
pub fn gn_quotient(u: &RadialField<f64>, q: f64) -> Result<f64> {
    let grid = u.grid();
    let n = grid.dimension();
    let lq = grid.integrate_values(u.values(), q);
    let m2 = grid.integrate_values(u.values(), 2.0);
    let d = grid.dirichlet_values(u.values());
    if !(m2 > 0.0) || !(d > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(lq / (m2.powf(theta(n, q) / 2.0) * d.powf(xi(n, q) / 2.0)))
}

/// Result of the quotient maximization.
#[derive(Debug, Clone)]
pub struct AscentOutcome {
    pub value: f64,
    pub iterations: usize,
    /// `gᵀP⁻¹g` at exit.
    pub gradient: f64,
    pub maximizer: RadialField<f64>,
}

/// Maximizes the GN quotient from `start` by `H¹`-preconditioned gradient
/// ascent on its logarithm, renormalizing the mass after each step. The
/// ascent is restricted to directions transverse to dilations and the
/// width is held near that of `start`.
pub fn gn_ascent(start: &RadialField<f64>, q: f64) -> Result<AscentOutcome> {
    const TOL: f64 = 1e-14;
    const MAX_ITER: usize = 20_000;
    const WIDTH_SLACK: f64 = 1e-2;
    // Stop once `log Q` has not risen by `STAGNATION` for `PATIENCE` steps.
    const STAGNATION: f64 = 1e-9;
    const PATIENCE: usize = 500;
    let grid = start.grid().clone();
    let n = grid.dimension();
    let (th, x) = (theta(n, q), xi(n, q));
    let w = grid.weights().to_vec();
    let free = grid.free();

    let log_q = |u: &[f64]| -> f64 {
        let lq = grid.integrate_values(u, q);
        let m2 = grid.integrate_values(u, 2.0);
        let d = grid.dirichlet_values(u);
        lq.ln() - th / 2.0 * m2.ln() - x / 2.0 * d.ln()
    };
    let normalize = |u: &mut Vec<f64>| {
        let m = grid.integrate_values(u, 2.0).sqrt();
        for v in u.iter_mut() {
            *v /= m;
        }
    };

    let mut u: Vec<f64> = start.values().to_vec();
    for (i, v) in u.iter_mut().enumerate() {
        if !free.contains(&i) {
            *v = 0.0;
        }
    }
    if !(grid.integrate_values(&u, 2.0) > 0.0) {
        return Err(Error::ZeroMass);
    }
    normalize(&mut u);
    // Grid-scale spikes beat the continuum supremum under lumped quadrature,
    // so the width is pinned at the starting `‖∇u‖²/‖u‖²` by dilation.
    let width = grid.dirichlet_values(&u);
    let mut f = log_q(&u);
    let mut best = (f, u.clone(), 0usize);
    let mut tau: f64 = 1.0;
    let mut ku = vec![0.0; u.len()];
    let mut gd = f64::INFINITY;
    for it in 0..MAX_ITER {
        let lq = grid.integrate_values(&u, q);
        let d = grid.dirichlet_values(&u);
        grid.apply_stiffness(&u, &mut ku);
        let mut g = vec![0.0; u.len()];
        for i in free.clone() {
            let a = u[i].abs();
            g[i] = q * w[i] * a.powf(q - 2.0) * u[i] / lq - th * w[i] * u[i] - x * ku[i] / d;
        }
        let p = Sobolev::new(&grid, d);
        let mut dir = p.solve(&g);
        for v in dir.iter_mut() {
            *v *= d;
        }
        // Remove the dilation generator `(N/2)u + r u'`: the quotient is
        // dilation invariant, while the lumped quadrature rewards spikes.
        let du = grid.derivative_values(&u);
        let mut psi: Vec<f64> = (0..u.len())
            .map(|i| 0.5 * n as f64 * u[i] + grid.nodes()[i] * du[i])
            .collect();
        for (i, v) in psi.iter_mut().enumerate() {
            if !free.contains(&i) {
                *v = 0.0;
            }
        }
        let psi_norm = p.norm2(&psi) / d;
        if psi_norm > 0.0 {
            let c = g.iter().zip(&psi).map(|(a, b)| a * b).sum::<f64>() / psi_norm;
            for (v, s) in dir.iter_mut().zip(&psi) {
                *v -= c * s;
            }
        }
        gd = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if gd <= TOL {
            return finish(&grid, u, q, it, gd);
        }
        if f > best.0 + STAGNATION {
            best = (f, u.clone(), it);
        } else if it - best.2 >= PATIENCE {
            return finish(&grid, best.1, q, it, gd);
        }
        tau = (2.0 * tau).min(1.0);
        loop {
            let mut trial: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + tau * b).collect();
            normalize(&mut trial);
            let ft = log_q(&trial);
            if ft >= f + 1e-4 * tau * gd {
                u = trial;
                f = ft;
                let t = (width / grid.dirichlet_values(&u)).sqrt();
                if (t - 1.0).abs() > WIDTH_SLACK {
                    let field = RadialField::new(grid.clone(), u)?.dilate(t);
                    u = field.into_values();
                    for (i, v) in u.iter_mut().enumerate() {
                        if !free.contains(&i) {
                            *v = 0.0;
                        }
                    }
                    normalize(&mut u);
                    f = log_q(&u);
                }
                break;
            }
            tau *= 0.5;
            if tau < 1e-12 {
                if gd <= 1e-10 {
                    return finish(&grid, u, q, it, gd);
                }
                return Err(Error::AscentStall { iterations: it, gradient: gd });
            }
        }
    }
    Err(Error::AscentStall {
        iterations: MAX_ITER,
        gradient: gd,
    })
}

fn finish(grid: &Arc<RadialGrid<f64>>, u: Vec<f64>, q: f64, iterations: usize, gradient: f64) -> Result<AscentOutcome> {
    let maximizer = RadialField::new(grid.clone(), u)?;
    Ok(AscentOutcome {
        value: gn_quotient(&maximizer, q)?,
        iterations,
        gradient,
        maximizer,
    })
}

/// `C_{N,q}` by quotient maximization from a Gaussian, cross-checked
/// against the quotient at the radial ground state.
pub fn gn_constant(dimension: usize, q: f64, grid: &Arc<RadialGrid<f64>>) -> Result<GNConstant> {
    check_subcritical(dimension, q)?;
    if dimension < 2 || grid.dimension() != dimension {
        return Err(Error::DimensionMismatch(format!(
            "GN constant for N = {dimension} on a grid for N = {} (needs N >= 2)",
            grid.dimension()
        )));
    }
    let start = RadialField::from_fn(grid.clone(), |r| (-0.5 * r * r).exp());
    let ascent = gn_ascent(&start, q)?;
    let gs = ground_state_nd(dimension, q, grid)?;
    let ground = gn_quotient(&gs, q)?;
    let relative = (ascent.value - ground).abs() / ascent.value;
    if relative > GN_AGREEMENT {
        return Err(Error::MethodDisagreement {
            ascent: ascent.value,
            ground_state: ground,
            relative,
        });
    }
    Ok(GNConstant {
        dimension,
        q,
        value: ascent.value,
        theta: theta(dimension, q),
        xi: xi(dimension, q),
        method: GnMethod::QuotientMaximization,
        grid: Some(grid.spec()),
        ground_state_value: Some(ground),
        relative_disagreement: Some(relative),
        iterations: ascent.iterations,
    })
}

/// Local-minimum geometry on the mass sphere of radius `μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    #[serde(rename = "N")]
    pub dimension: usize,
    pub q: f64,
    /// GN constant used.
    pub c: f64,
    pub mu: f64,
    /// `V̲ − λ_ess(V)`.
    pub gap: f64,
    /// Radius of `Σ_μ` in `‖∇u‖₂`.
    pub t_mu: f64,
    #[serde(with = "inf_as_null")]
    pub mu0: f64,
    /// `t_μ²(½ − 1/ξ)`: the maximum of `t²/2 − (C/q)μ^θ t^ξ`.
    pub f_mu_at_tmu: f64,
    /// `f_mu_at_tmu + ½μ² gap`: GN lower bound for
    /// `E − ½μ²λ_ess` on `{‖u‖₂ = μ, ‖∇u‖₂ = t_μ}`.
    pub sigma_infimum_bound: f64,
}

impl Geometry {
    /// `f_μ(t) = ½t² + ½μ² gap − (C/q) μ^θ t^ξ`.
    pub fn f_mu(&self, t: f64) -> f64 {
        f_mu(self.dimension, self.q, self.c, self.mu, self.gap, t)
    }

    pub fn in_local_min_regime(&self) -> bool {
        self.mu < self.mu0
    }
}

pub fn f_mu(dimension: usize, q: f64, c: f64, mu: f64, gap: f64, t: f64) -> f64 {
    0.5 * t * t + 0.5 * mu * mu * gap - c / q * mu.powf(theta(dimension, q)) * t.powf(xi(dimension, q))
}

/// `g(μ)`, whose unique positive root is `μ₀`.
pub fn mu0_equation(dimension: usize, q: f64, c: f64, gap: f64, mu: f64) -> f64 {
    let n = dimension as f64;
    let s = n * (q - 2.0);
    let e1 = -(4.0 * q - 2.0 * s) / (s - 4.0);
    mu.powf(e1) * (2.0 * q / (s * c)).powf(4.0 / (s - 4.0)) * (s - 4.0) / (2.0 * s) + 0.5 * mu * mu * gap
}

/// `μ₀` by bracketing bisection; `∞` when `gap = 0`.
pub fn mu0(dimension: usize, q: f64, c: f64, gap: f64) -> Result<f64> {
    check_window(dimension, q)?;
    if gap > 0.0 {
        return Err(Error::PositiveGap(gap));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("GN constant {c} must be positive")));
    }
    if gap == 0.0 {
        return Ok(f64::INFINITY);
    }
    let g = |m: f64| mu0_equation(dimension, q, c, gap, m);
    let (mut lo, mut hi) = (1e-6, 1e6);
    while g(lo) <= 0.0 {
        lo *= 1e-3;
        if lo < 1e-300 {
            return Err(Error::InvalidParameter("no sign change for the mu0 equation".into()));
        }
    }
    while g(hi) > 0.0 {
        hi *= 1e3;
        if hi > 1e300 {
            return Err(Error::InvalidParameter("no sign change for the mu0 equation".into()));
        }
    }
    for _ in 0..400 {
        if hi - lo <= MU0_TOLERANCE * 1e-2 * hi {
            break;
        }
        // Geometric midpoint while the bracket spans decades.
        let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn t_mu(dimension: usize, q: f64, c: f64, mu: f64) -> f64 {
    let (th, x) = (theta(dimension, q), xi(dimension, q));
    (q / (x * c * mu.powf(th))).powf(1.0 / (x - 2.0))
}

pub fn geometry(dimension: usize, q: f64, c: f64, mu: f64, gap: f64) -> Result<Geometry> {
    check_window(dimension, q)?;
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("mass mu = {mu} must be positive")));
    }
    let m0 = mu0(dimension, q, c, gap)?;
    let t = t_mu(dimension, q, c, mu);
    let f_max = t * t * (0.5 - 1.0 / xi(dimension, q));
    Ok(Geometry {
        dimension,
        q,
        c,
        mu,
        gap,
        t_mu: t,
        mu0: m0,
        f_mu_at_tmu: f_max,
        sigma_infimum_bound: f_max + 0.5 * mu * mu * gap,
    })
}

/// Numerical certificate of the mountain-pass geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpGeometryReport {
    pub lambda1: f64,
    pub lambda_ess: f64,
    /// `E(u₀)` at the normalized first eigenfunction.
    pub e_u0: f64,
    pub half_mu2_lambda1: f64,
    /// `E(u₀) − ½μ²λ₁ + (ρ/q)‖u₀‖_q^q`; zero up to rounding.
    pub identity_residual: f64,
    pub u0_grad_norm: f64,
    /// Smallest `E − ½μ²λ_ess` over the sampled slice `‖∇u‖₂ = t_μ`.
    pub slice_margin: f64,
    pub slice_samples: usize,
    /// GN lower bound for the same quantity.
    pub analytic_bound: f64,
    pub endpoint_dilation: f64,
    pub e_u1: f64,
    pub u1_grad_norm: f64,
}

/// Mass-`μ` Gaussian `e^{−t²r²}` on `grid`.
pub fn dilated_gaussian(grid: &Arc<RadialGrid<f64>>, mu: f64, t: f64) -> RadialField<f64> {
    let mut u = RadialField::from_fn(grid.clone(), |r| (-(t * r) * (t * r)).exp());
    let last = grid.len() - 1;
    u.values_mut()[last] = 0.0;
    let m = u.l2_norm();
    u.scale(mu / m)
}

/// `E_ρ` of the dilated default profile.
pub fn dilation_energy(params: &EnergyParams, potential: &Potential, grid: &Arc<RadialGrid<f64>>, t: f64) -> Result<f64> {
    let f = Functional::new(*params, potential, grid.clone())?;
    Ok(f.energy(dilated_gaussian(grid, params.mu, t).values()))
}

fn slice_profile(kind: usize, r: f64, s: f64, p: f64, b: f64) -> f64 {
    let x = r / s;
    match kind {
        0 => (-x * x).exp(),
        1 => (-x).exp() * (1.0 + x),
        2 => x * x * (-x * x).exp(),
        3 => {
            let y = 1.0 - x * x;
            if y > 0.0 {
                y * y
            } else {
                0.0
            }
        }
        4 => (1.0 / x.cosh()).powf(p),
        _ => (-x * x).exp() + p * (-((r - b * s) / s) * ((r - b * s) / s)).exp(),
    }
}

/// Certifies the three strict inequalities of the mountain-pass geometry on
/// `grid`. The slice `‖∇u‖₂ = t_μ` is sampled with `samples` profiles drawn
/// from a seeded family.
pub fn check_mp_geometry(
    params: &EnergyParams,
    potential: &Potential,
    geom: &Geometry,
    grid: &Arc<RadialGrid<f64>>,
    samples: usize,
    seed: u64,
) -> Result<MpGeometryReport> {
    let mu = params.mu;
    if !(mu < geom.mu0) {
        return Err(Error::GeometryViolated(format!("mu = {mu} is not below mu0 = {}", geom.mu0)));
    }
    let lambda_ess = potential.essential_spectrum_floor()?;
    let f = Functional::new(*params, potential, grid.clone())?;
    let op = LinearizedOperator::schrodinger(grid.clone(), potential)?;
    let (lambda1, phi) = op.lowest_eigenpairs(1)?.remove(0);
    let u0 = phi.map(f64::abs).scale(mu / phi.l2_norm());
    let e_u0 = f.energy(u0.values());
    let half = 0.5 * mu * mu * lambda1;
    let lq = f.parts(u0.values()).nonlinear;
    let identity_residual = e_u0 - half + params.rho / params.q * lq;
    if !(e_u0 < half) {
        return Err(Error::GeometryViolated(format!("E(u0) = {e_u0} is not below mu^2 lambda1 / 2 = {half}")));
    }
    let u0_grad_norm = u0.gradient_norm();
    if !(u0_grad_norm < geom.t_mu) {
        return Err(Error::GeometryViolated(format!(
            "u0 lies outside Sigma_mu: |grad u0| = {u0_grad_norm} >= t_mu = {}",
            geom.t_mu
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slice_margin = f64::INFINITY;
    let mut taken = 0;
    for k in 0..samples {
        let kind = k % 6;
        let p = rng.gen_range(0.2..2.0);
        let b = rng.gen_range(1.0..4.0);
        let mut s = rng.gen_range(0.5..2.0);
        let build = |s: f64| -> RadialField<f64> {
            let mut u = RadialField::from_fn(grid.clone(), |r| slice_profile(kind, r.abs(), s, p, b));
            let last = grid.len() - 1;
            u.values_mut()[last] = 0.0;
            if grid.is_two_sided() {
                u.values_mut()[0] = 0.0;
            }
            let m = u.l2_norm();
            u.scale(mu / m)
        };
        let mut u = build(s);
        for _ in 0..60 {
            let ratio = u.gradient_norm() / geom.t_mu;
            if (ratio - 1.0).abs() < 1e-12 {
                break;
            }
            s *= ratio;
            u = build(s);
        }
        if (u.gradient_norm() / geom.t_mu - 1.0).abs() > 1e-8 {
            continue;
        }
        taken += 1;
        let margin = f.energy(u.values()) - 0.5 * mu * mu * lambda_ess;
        slice_margin = slice_margin.min(margin);
    }
    if taken == 0 {
        return Err(Error::GeometryViolated("no slice sample reached |grad u| = t_mu".into()));
    }
    if !(slice_margin > 0.0) {
        return Err(Error::GeometryViolated(format!(
            "E - mu^2 lambda_ess / 2 = {slice_margin} on the slice |grad u| = t_mu"
        )));
    }

    let mut t = 1.0;
    let (e_u1, u1_grad_norm) = loop {
        let u1 = dilated_gaussian(grid, mu, t);
        let e = f.energy(u1.values());
        let gn = u1.gradient_norm();
        if e <= e_u0 && gn > geom.t_mu {
            break (e, gn);
        }
        t *= 2.0;
        if t > 4096.0 {
            return Err(Error::GeometryViolated(
                "no dilation reaches E(u1) <= E(u0) outside Sigma_mu".into(),
            ));
        }
    };

    Ok(MpGeometryReport {
        lambda1,
        lambda_ess,
        e_u0,
        half_mu2_lambda1: half,
        identity_residual,
        u0_grad_norm,
        slice_margin,
        slice_samples: taken,
        analytic_bound: geom.sigma_infimum_bound,
        endpoint_dilation: t,
        e_u1,
        u1_grad_norm,
    })
}
