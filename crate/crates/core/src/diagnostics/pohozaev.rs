//! One-dimensional Pohozaev identity for radial profiles on `[a, b]`.

use serde::{Deserialize, Serialize};

use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::grid::RadialField;
use crate::potentials::Potential;
use crate::scalar::unit_sphere_area;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    /// Interval actually used, after snapping to nodes.
    pub a: f64,
    pub b: f64,
    /// LHS minus RHS.
    pub residual: f64,
    /// Sum of the magnitudes of all terms; the natural scale of `residual`.
    pub scale: f64,
    /// `∫ₐᵇ V r u u'`.
    pub potential_term: f64,
    /// `(‖V‖∞ / |S^{N−1}|) a^{2−N} ‖u‖₂ ‖∇u‖₂`; infinite where it does not
    /// apply (`N = 1`, or `a = 0` with `N > 2`).
    pub potential_bound: f64,
    /// The left end was moved off the origin (N = 2).
    pub origin_shifted: bool,
}

impl PohozaevReport {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.residual.abs() / self.scale
        } else {
            0.0
        }
    }

    pub fn potential_bound_holds(&self) -> bool {
        self.potential_term.abs() <= self.potential_bound
    }
}

/// Signed residual of the identity on `[a, b]`.
pub fn pohozaev_residual(
    params: &EnergyParams,
    potential: &Potential,
    u: &RadialField<f64>,
    lambda: f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    pohozaev_report(params, potential, u, lambda, a, b).map(|r| r.residual)
}

pub fn pohozaev_report(
    params: &EnergyParams,
    potential: &Potential,
    u: &RadialField<f64>,
    lambda: f64,
    a: f64,
    b: f64,
) -> Result<PohozaevReport> {
    let grid = u.grid();
    if grid.dimension() != params.dimension {
        return Err(Error::DimensionMismatch(format!(
            "grid has N = {}, parameters N = {}",
            grid.dimension(),
            params.dimension
        )));
    }
    let r_max = grid.r_max();
    if !(a >= 0.0) || !(b > a) || b > r_max * (1.0 + 1e-12) {
        return Err(Error::IntervalOutOfRange { a, b, r_max });
    }
    let nodes = grid.nodes();
    let dim = params.dimension;
    let n = dim as f64;
    let (q, rho) = (params.q, params.rho);

    let mut i0 = grid.nearest(a);
    let i1 = grid.nearest(b);
    let mut origin_shifted = false;
    if nodes[i0] <= 0.0 && dim == 2 {
        i0 += 1;
        origin_shifted = true;
    }
    if i1 <= i0 + 1 {
        return Err(Error::IntervalOutOfRange { a, b, r_max });
    }
    let values = u.values();
    let du = grid.derivative_values(values);
    let v: Vec<f64> = potential.sample(grid);

    let trap = |f: &dyn Fn(usize) -> f64| -> f64 {
        (i0..i1)
            .map(|i| 0.5 * (nodes[i + 1] - nodes[i]) * (f(i) + f(i + 1)))
            .sum()
    };

    let c = 1.5 - n;
    let c_inv = c * (n - 1.0) / 2.0;
    let lhs = rho * (n - 1.5 - 1.0 / q) * trap(&|i| values[i].abs().powf(q));
    let t_lambda = (n - 2.0) * lambda * trap(&|i| values[i] * values[i]);
    let t_pot = -c * trap(&|i| v[i] * values[i] * values[i]);
    let t_virial = trap(&|i| v[i] * nodes[i] * values[i] * du[i]);

    // `c_inv (∫ u²/r² + [u²/r])`; for `a = 0` (N ≥ 3) the two pieces are
    // combined as `∫ (u² − u(0)²)/r² − u(0)²/b` so that the singular parts
    // cancel analytically.
    let from_origin = nodes[i0] <= 0.0;
    let boundary = |i: usize, with_inverse: bool| -> f64 {
        let (r, w, dw) = (nodes[i], values[i], du[i]);
        let inverse = if with_inverse && c_inv != 0.0 { c_inv * w * w / r } else { 0.0 };
        c * w * dw + inverse + 0.5 * lambda * w * w * r - rho / q * w.abs().powf(q) * r - 0.5 * r * dw * dw
    };
    let (t_inverse, bracket) = if c_inv == 0.0 {
        (0.0, boundary(i1, false) - boundary(i0, false))
    } else if from_origin {
        let u0 = values[i0];
        let h1 = nodes[i0 + 1] - nodes[i0];
        let curvature = 2.0 * (values[i0 + 1] - u0) / (h1 * h1);
        let integrand = |i: usize| {
            if i == i0 {
                u0 * curvature
            } else {
                (values[i] * values[i] - u0 * u0) / (nodes[i] * nodes[i])
            }
        };
        let t = c_inv * (trap(&integrand) - u0 * u0 / nodes[i1]);
        (t, boundary(i1, true) - boundary(i0, false))
    } else {
        let t = c_inv * trap(&|i| values[i] * values[i] / (nodes[i] * nodes[i]));
        (t, boundary(i1, true) - boundary(i0, true))
    };

    let rhs = t_lambda + t_inverse + t_pot + t_virial + bracket;
    let scale = lhs.abs() + t_lambda.abs() + t_inverse.abs() + t_pot.abs() + t_virial.abs() + bracket.abs();

    let a_used = nodes[i0];
    // `r ≤ a^{2−N} r^{N−1}` on `[a, ∞)` needs `N ≥ 2`.
    let geometric = if dim == 1 {
        f64::INFINITY
    } else if a_used > 0.0 {
        a_used.powf(2.0 - n)
    } else if dim == 2 {
        1.0
    } else {
        f64::INFINITY
    };
    let potential_bound = potential.sup_abs() / unit_sphere_area::<f64>(dim) * geometric * u.l2_norm() * u.gradient_norm();

    Ok(PohozaevReport {
        a: a_used,
        b: nodes[i1],
        residual: lhs - rhs,
        scale,
        potential_term: t_virial,
        potential_bound,
        origin_shifted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Spacing};

    #[test]
    fn zero_field_gives_zero() {
        let g = build_grid::<f64>(2, 10.0, 400, Spacing::Uniform).unwrap();
        let p = EnergyParams::new(2, 6.0, 1.0, 1.0).unwrap();
        let v = Potential::gaussian_well(5.0, 1.0).unwrap();
        let u = RadialField::zeros(g);
        let r = pohozaev_report(&p, &v, &u, 3.0, 1.0, 5.0).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.relative(), 0.0);
    }

    #[test]
    fn interval_checks() {
        let g = build_grid::<f64>(2, 10.0, 400, Spacing::Uniform).unwrap();
        let p = EnergyParams::new(2, 6.0, 1.0, 1.0).unwrap();
        let v = Potential::constant(0.0).unwrap();
        let u = RadialField::zeros(g);
        for (a, b) in [(-1.0, 2.0), (3.0, 2.0), (1.0, 11.0)] {
            assert!(matches!(
                pohozaev_report(&p, &v, &u, 1.0, a, b),
                Err(Error::IntervalOutOfRange { .. })
            ));
        }
        let r = pohozaev_report(&p, &v, &u, 1.0, 0.0, 5.0).unwrap();
        assert!(r.origin_shifted && r.a > 0.0);
    }

    /// 1D soliton with `λ = 1`, `V = 0`: an exact solution, so the residual
    /// is pure quadrature error.
    #[test]
    fn soliton_satisfies_identity() {
        use crate::diagnostics::profiles::soliton_value;
        let mut last = None;
        for m in [2000usize, 4000] {
            let g = build_grid::<f64>(1, 20.0, m, Spacing::Uniform).unwrap();
            let u = RadialField::from_fn(g, |x| soliton_value(4.0, x));
            let p = EnergyParams::limit_problem(1, 4.0, 1.0, u.l2_norm()).unwrap();
            let v = Potential::constant(0.0).unwrap();
            let r = pohozaev_report(&p, &v, &u, 1.0, 0.5, 3.0).unwrap();
            assert!(r.relative() < 1e-4, "{r:?}");
            if let Some(prev) = last {
                let ratio: f64 = prev / r.residual;
                assert!(ratio > 3.4 && ratio < 4.6, "ratio {ratio}");
            }
            last = Some(r.residual);
        }
    }

    /// The 3D ground state solves the equation with `λ = 1`, `V = 0`; the
    /// identity holds from the origin through the regularized combination.
    #[test]
    fn ground_state_from_origin() {
        use crate::diagnostics::profiles::ground_state_nd;
        let g = build_grid::<f64>(3, 20.0, 4000, Spacing::Uniform).unwrap();
        let u = ground_state_nd(3, 4.0, &g).unwrap();
        let p = EnergyParams::new(3, 4.0, 1.0, u.l2_norm()).unwrap();
        let v = Potential::constant(0.0).unwrap();
        let r = pohozaev_report(&p, &v, &u, 1.0, 0.0, 6.0).unwrap();
        assert!(!r.origin_shifted);
        assert!(r.relative() < 1e-4, "{r:?}");
        let r = pohozaev_report(&p, &v, &u, 1.0, 1.0, 6.0).unwrap();
        assert!(r.relative() < 1e-4, "{r:?}");
    }
}
