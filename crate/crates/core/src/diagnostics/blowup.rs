//! Blow-up rescaling around the local maxima of a large-`λ` solution and the
//! far-field exponential decay check.

use serde::{Deserialize, Serialize};

use crate::diagnostics::profiles::{ground_state_nd, soliton_value};
use crate::error::{Error, Result};
use crate::grid::{build_grid, RadialField, Spacing};
use crate::potentials::Potential;
use crate::record::SolutionRecord;

/// Relative plateau tolerance for maxima detection.
pub const PLATEAU_TOLERANCE: f64 = 1e-12;
/// Half-width of the rescaled window in units of `ε`.
pub const WINDOW: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concentration {
    OriginSpike,
    SphereLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximumReport {
    pub radius: f64,
    pub value: f64,
    /// `a / ε`.
    pub scaled_radius: f64,
    /// `u(a)^{−(q−2)/2}`.
    pub eps_tilde: f64,
    /// `ε̃ / ε`.
    pub ratio: f64,
    /// Limit of `ratio` for a sphere layer: `√(2ρ/q)`.
    pub ratio_target: f64,
    pub classification: Concentration,
    /// Sup distance of the rescaled profile to its limit on `|s| ≤ 10`.
    pub profile_distance: f64,
    /// `u(a)^{q−2} − (λ + V̲)`; non-negative at a true maximum.
    pub bound_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub lambda: f64,
    pub q: f64,
    pub rho: f64,
    /// `λ^{−1/2}`.
    pub eps: f64,
    pub maxima_radii: Vec<f64>,
    pub maxima: Vec<MaximumReport>,
    /// `ε̃` and `ε̃/ε` at the highest maximum.
    pub eps_tilde: f64,
    pub ratio: f64,
    /// Largest profile distance over the maxima.
    pub profile_distance: f64,
    /// Fitted rate `γ` of `u ~ e^{−γ √λ |r − a|}` beyond the outermost maximum.
    pub decay_rate: Option<f64>,
}

impl BlowupReport {
    pub fn maxima_bound_holds(&self) -> bool {
        self.maxima.iter().all(|m| m.bound_margin >= 0.0)
    }
}

/// Blow-up analysis of a stored solution with the default classification
/// cutoff `a/ε ≤ 1`.
pub fn blowup_rescale(record: &SolutionRecord) -> Result<BlowupReport> {
    blowup_rescale_with(record, 1.0)
}

pub fn blowup_rescale_with(record: &SolutionRecord, classify_threshold: f64) -> Result<BlowupReport> {
    let u = record.field()?;
    blowup_field(
        &u,
        record.lambda,
        record.params.q,
        record.params.rho,
        &record.potential,
        classify_threshold,
    )
}

/// Interior maxima of `u` refined by a parabola through three nodes, as
/// `(radius, value)` pairs sorted by radius. The origin of a radial grid
/// counts when `u(0) > u(r₁)`.
pub fn local_maxima(u: &RadialField<f64>) -> Vec<(f64, f64)> {
    let grid = u.grid();
    let r = grid.nodes();
    let v = u.values();
    let tol = PLATEAU_TOLERANCE * u.max_abs();
    let n = v.len();
    let mut out = Vec::new();
    if !grid.is_two_sided() && v[0] > 0.0 && v[0] - v[1] > tol {
        out.push((0.0, v[0]));
    }
    for i in 1..n - 1 {
        if v[i] > 0.0 && v[i] - v[i - 1] > tol && v[i] - v[i + 1] > tol {
            let (x0, x1, x2) = (r[i - 1], r[i], r[i + 1]);
            let (y0, y1, y2) = (v[i - 1], v[i], v[i + 1]);
            let d01 = (y1 - y0) / (x1 - x0);
            let d12 = (y2 - y1) / (x2 - x1);
            let c2 = (d12 - d01) / (x2 - x0);
            let (mut a, mut value) = (x1, y1);
            if c2 < 0.0 {
                // y = y1 + d (x − x1) + c2 (x − x1)², d = slope at x1.
                let d = d01 + c2 * (x1 - x0);
                let shift = (-d / (2.0 * c2)).clamp(x0 - x1, x2 - x1);
                a = x1 + shift;
                value = y1 + d * shift + c2 * shift * shift;
            }
            out.push((a.abs(), value));
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

pub fn blowup_field(
    u: &RadialField<f64>,
    lambda: f64,
    q: f64,
    rho: f64,
    potential: &Potential,
    classify_threshold: f64,
) -> Result<BlowupReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "blow-up rescaling needs lambda > 0, got {lambda}"
        )));
    }
    if !(q > 2.0) || !(rho > 0.0) || !(classify_threshold >= 0.0) {
        return Err(Error::InvalidParameter("need q > 2, rho > 0, threshold >= 0".into()));
    }
    let grid = u.grid();
    let dim = grid.dimension();
    let maxima = local_maxima(u);
    if maxima.is_empty() {
        return Err(Error::NoMaximaFound);
    }
    let eps = lambda.powf(-0.5);
    let amp = lambda.powf(1.0 / (q - 2.0));
    let profile_scale = rho.powf(-1.0 / (q - 2.0));
    let v_floor = potential.ess_inf();

    let mut origin_profile: Option<RadialField<f64>> = None;
    let mut reports = Vec::with_capacity(maxima.len());
    for &(a, value) in &maxima {
        let scaled_radius = a / eps;
        let classification = if scaled_radius <= classify_threshold {
            Concentration::OriginSpike
        } else {
            Concentration::SphereLayer
        };
        let use_ground_state = classification == Concentration::OriginSpike && dim >= 2;
        if use_ground_state && origin_profile.is_none() {
            let g = build_grid::<f64>(dim, WINDOW + 2.0, 2400, Spacing::Uniform)?;
            origin_profile = Some(ground_state_nd(dim, q, &g)?);
        }
        let mut distance = 0.0f64;
        for (i, &r) in grid.nodes().iter().enumerate() {
            let s = if use_ground_state { r.abs() / eps } else { (r.abs() - a) / eps };
            if s.abs() > WINDOW || (grid.is_two_sided() && r < 0.0) {
                continue;
            }
            let limit = if use_ground_state {
                origin_profile.as_ref().map(|p| p.interpolate(s)).unwrap_or(0.0)
            } else {
                soliton_value(q, s)
            };
            let v = u.values()[i] / amp;
            distance = distance.max((v - profile_scale * limit).abs());
        }
        let eps_tilde = value.powf(-(q - 2.0) / 2.0);
        reports.push(MaximumReport {
            radius: a,
            value,
            scaled_radius,
            eps_tilde,
            ratio: eps_tilde / eps,
            ratio_target: (2.0 * rho / q).sqrt(),
            classification,
            profile_distance: distance,
            bound_margin: value.powf(q - 2.0) - (lambda + v_floor),
        });
    }

    let top = reports
        .iter()
        .max_by(|x, y| x.value.total_cmp(&y.value))
        .expect("at least one maximum");
    let (eps_tilde, ratio) = (top.eps_tilde, top.ratio);
    let profile_distance = reports.iter().fold(0.0f64, |m, r| m.max(r.profile_distance));
    let outer = maxima.last().expect("non-empty");
    let decay_rate = fit_decay(u, outer.0, outer.1, lambda);

    Ok(BlowupReport {
        lambda,
        q,
        rho,
        eps,
        maxima_radii: maxima.iter().map(|m| m.0).collect(),
        maxima: reports,
        eps_tilde,
        ratio,
        profile_distance,
        decay_rate,
    })
}

/// Least-squares slope of `ln u` against `√λ (r − a)` where
/// `10⁻⁸ ≤ u/u(a) ≤ 10⁻²`, beyond the outermost maximum.
fn fit_decay(u: &RadialField<f64>, a: f64, peak: f64, lambda: f64) -> Option<f64> {
    let sl = lambda.sqrt();
    let mut pts = Vec::new();
    for (&r, &v) in u.grid().nodes().iter().zip(u.values()) {
        if r <= a || v <= 0.0 {
            continue;
        }
        let rel = v / peak;
        if (1e-8..=1e-2).contains(&rel) {
            pts.push((sl * (r - a), v.ln()));
        }
    }
    if pts.len() < 5 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx > 0.0 {
        Some(-sxy / sxx)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub gamma: f64,
    pub r_far: f64,
    /// Supplied `ε`.
    pub eps: f64,
    /// Smallest `ε` for which the bound holds on the far set.
    pub min_eps: f64,
    pub passed: bool,
    pub far_points: usize,
    /// Far nodes with `u > DECAY_FLOOR · ‖u‖_∞`; only these enter `min_eps`.
    pub resolved_points: usize,
}

/// Relative level below which nodal values are rounding noise left by the
/// Newton polish and carry no decay information.
pub const DECAY_FLOOR: f64 = 1e-12;

/// Checks `u(r) ≤ ε λ^{1/(q−2)} e^{γR} Σᵢ e^{−γ√λ|r−aᵢ|}` on
/// `{r : minᵢ |r − aᵢ| ≥ R/√λ}`.
pub fn decay_check(record: &SolutionRecord, report: &BlowupReport, gamma: f64, r_far: f64, eps: f64) -> Result<DecayReport> {
    let u = record.field()?;
    decay_check_field(&u, record.lambda, record.params.q, &report.maxima_radii, gamma, r_far, eps)
}

pub fn decay_check_field(
    u: &RadialField<f64>,
    lambda: f64,
    q: f64,
    maxima_radii: &[f64],
    gamma: f64,
    r_far: f64,
    eps: f64,
) -> Result<DecayReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} outside (0, 1)")));
    }
    if !(r_far > 0.0) || !(eps >= 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidParameter("need R > 0, eps >= 0, lambda > 0".into()));
    }
    if maxima_radii.is_empty() {
        return Err(Error::NoMaximaFound);
    }
    let sl = lambda.sqrt();
    let cutoff = r_far / sl;
    let log_amp = lambda.ln() / (q - 2.0) + gamma * r_far;
    let mut min_eps = 0.0f64;
    let mut far_points = 0;
    let mut resolved_points = 0;
    let floor = DECAY_FLOOR * u.max_abs();
    let grid = u.grid();
    for (&r, &v) in grid.nodes().iter().zip(u.values()) {
        if grid.is_two_sided() && r < 0.0 {
            continue;
        }
        let d: Vec<f64> = maxima_radii.iter().map(|&a| (r - a).abs()).collect();
        if d.iter().cloned().fold(f64::INFINITY, f64::min) < cutoff {
            continue;
        }
        far_points += 1;
        if v <= floor {
            continue;
        }
        resolved_points += 1;
        let exps: Vec<f64> = d.iter().map(|&di| -gamma * sl * di).collect();
        let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + exps.iter().map(|&e| (e - m).exp()).sum::<f64>().ln();
        min_eps = min_eps.max((v.ln() - log_amp - lse).exp());
    }
    if far_points == 0 {
        return Err(Error::FarSetEmpty(r_far));
    }
    Ok(DecayReport {
        gamma,
        r_far,
        eps,
        min_eps,
        passed: min_eps <= eps,
        far_points,
        resolved_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn synthetic(q: f64, lambda: f64, a_over_eps: f64) -> RadialField<f64> {
        let g = build_grid::<f64>(2, 1.0, 4000, Spacing::Uniform).unwrap();
        let eps = lambda.powf(-0.5);
        let a = a_over_eps * eps;
        let amp = lambda.powf(1.0 / (q - 2.0));
        RadialField::from_fn(g, |r| amp * soliton_value(q, (r - a) / eps))
    }

    #[test]
    fn synthetic_sphere_layer() {
        let u = synthetic(4.0, 1e4, 5.0);
        let v = Potential::constant(0.0).unwrap();
        let rep = blowup_field(&u, 1e4, 4.0, 1.0, &v, 1.0).unwrap();
        assert_eq!(rep.maxima.len(), 1);
        let m = &rep.maxima[0];
        assert_eq!(m.classification, Concentration::SphereLayer);
        assert!((m.radius - 0.05).abs() < 1e-9);
        assert!(rep.profile_distance <= 1e-3, "{}", rep.profile_distance);
        assert!((rep.ratio - 0.5f64.sqrt()).abs() < 1e-6);
        assert!(rep.maxima_bound_holds());
        let gamma = rep.decay_rate.unwrap();
        assert!((gamma - 1.0).abs() < 0.05, "{gamma}");
    }

    #[test]
    fn origin_spike_against_ground_state() {
        let lambda: f64 = 400.0;
        let q = 4.0;
        let g = build_grid::<f64>(2, 1.5, 3000, Spacing::Uniform).unwrap();
        let gs_grid = build_grid::<f64>(2, 30.0, 6000, Spacing::Uniform).unwrap();
        let phi = ground_state_nd(2, q, &gs_grid).unwrap();
        let eps = lambda.powf(-0.5);
        let u = RadialField::from_fn(g, |r| lambda.sqrt() * phi.interpolate(r / eps));
        let rep = blowup_field(&u, lambda, q, 1.0, &Potential::constant(0.0).unwrap(), 1.0).unwrap();
        assert_eq!(rep.maxima_radii, vec![0.0]);
        assert_eq!(rep.maxima[0].classification, Concentration::OriginSpike);
        assert!(rep.profile_distance < 1e-3, "{}", rep.profile_distance);
    }

    #[test]
    fn needs_a_maximum() {
        let g = build_grid::<f64>(2, 1.0, 100, Spacing::Uniform).unwrap();
        let u = RadialField::zeros(g);
        let v = Potential::constant(0.0).unwrap();
        assert!(matches!(blowup_field(&u, 10.0, 4.0, 1.0, &v, 1.0), Err(Error::NoMaximaFound)));
        assert!(blowup_field(&u, -1.0, 4.0, 1.0, &v, 1.0).is_err());
    }

    #[test]
    fn two_layers_sorted() {
        let g = build_grid::<f64>(2, 1.0, 4000, Spacing::Uniform).unwrap();
        let eps: f64 = 0.01;
        let u = RadialField::from_fn(g, |r| soliton_value(4.0, (r - 0.7) / eps) + 0.5 * soliton_value(4.0, (r - 0.3) / eps));
        let found = local_maxima(&u);
        assert_eq!(found.len(), 2);
        assert!((found[0].0 - 0.3).abs() < 1e-6 && (found[1].0 - 0.7).abs() < 1e-6);
    }

    #[test]
    fn decay_of_zero_field() {
        let g = build_grid::<f64>(2, 1.0, 400, Spacing::Uniform).unwrap();
        let u = RadialField::zeros(g);
        let rep = decay_check_field(&u, 1e4, 4.0, &[0.5], 0.5, 8.0, 0.0).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.min_eps, 0.0);
    }

    #[test]
    fn decay_monotone_in_gamma() {
        let u = synthetic(4.0, 1e4, 30.0);
        let mut prev = 0.0;
        for gamma in [0.3, 0.5, 0.7, 0.9] {
            let rep = decay_check_field(&u, 1e4, 4.0, &[0.3], gamma, 8.0, 0.2).unwrap();
            assert!(rep.min_eps >= prev * (1.0 - 1e-12), "{gamma} {rep:?} {prev}");
            prev = rep.min_eps;
        }
        let rep = decay_check_field(&u, 1e4, 4.0, &[0.3], 0.5, 8.0, 0.2).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn rounding_tail_is_ignored() {
        let clean = synthetic(4.0, 1e4, 30.0);
        let peak = clean.max_abs();
        // Slowly decaying noise far below the floor.
        let noisy = RadialField::from_fn(clean.grid().clone(), |r| 1e-14 * peak * (-r).exp());
        let noisy = RadialField::new(
            clean.grid().clone(),
            clean.values().iter().zip(noisy.values()).map(|(a, b)| a + b).collect(),
        )
        .unwrap();
        let a = decay_check_field(&clean, 1e4, 4.0, &[0.3], 0.5, 8.0, 0.2).unwrap();
        let b = decay_check_field(&noisy, 1e4, 4.0, &[0.3], 0.5, 8.0, 0.2).unwrap();
        assert!(b.passed, "{b:?}");
        assert!(b.resolved_points < b.far_points);
        assert!((a.min_eps - b.min_eps).abs() <= 1e-6 * a.min_eps, "{a:?} {b:?}");
    }

    #[test]
    fn far_set_can_be_empty() {
        let u = synthetic(4.0, 1e4, 30.0);
        assert!(matches!(
            decay_check_field(&u, 1e4, 4.0, &[0.5], 0.5, 200.0, 0.2),
            Err(Error::FarSetEmpty(_))
        ));
    }
}
