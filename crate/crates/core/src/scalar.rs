//! Scalar abstraction for the discretization core.
//!
//! Grids, fields, potentials, the energy functional and the tridiagonal
//! eigen-machinery are written against [`Real`], so they run in `f32` as well
//! as `f64`. The solvers and verification layers are pinned to `f64`: their
//! tolerances (Newton to 1e-10, eigen-residuals to 1e-9) are out of reach in
//! single precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type usable by the discretization core.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Never fails for the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub(crate) fn gauss_legendre<T: Real>(n: usize) -> Vec<(T, T)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((T::lit(x), T::lit(w)));
    }
    out
}

/// Surface area |S^{N-1}| of the unit sphere in R^N; 2 for N = 1.
pub fn unit_sphere_area<T: Real>(dimension: usize) -> T {
    // |S^0| = 2, |S^1| = 2π, |S^{N+1}| = 2π |S^{N-1}| / N.
    let mut area = if dimension % 2 == 1 { 2.0 } else { 2.0 * std::f64::consts::PI };
    let mut n = if dimension % 2 == 1 { 1 } else { 2 };
    while n < dimension {
        area *= 2.0 * std::f64::consts::PI / n as f64;
        n += 2;
    }
    T::lit(area)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert_eq!(unit_sphere_area::<f64>(1), 2.0);
        assert!((unit_sphere_area::<f64>(2) - 2.0 * pi).abs() < 1e-15);
        assert!((unit_sphere_area::<f64>(3) - 4.0 * pi).abs() < 1e-14);
        assert!((unit_sphere_area::<f64>(4) - 2.0 * pi * pi).abs() < 1e-13);
    }

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for n in 1..8 {
            let rule = gauss_legendre::<f64>(n);
            for deg in 0..(2 * n) {
                let approx: f64 = rule.iter().map(|&(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }
}
