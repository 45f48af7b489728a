//! Dense-free kernels for symmetric tridiagonal operators.
//!
//! Everything the solvers need reduces to tridiagonal work: the stiffness
//! matrix couples nearest neighbours only and the mass matrix is diagonal.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// LU factorization with partial pivoting of a general tridiagonal matrix,
/// laid out as in LAPACK's `gttrf` (one extra superdiagonal from pivoting).
#[derive(Debug, Clone)]
pub struct TridiagonalLu<T> {
    dl: Vec<T>,
    d: Vec<T>,
    du: Vec<T>,
    du2: Vec<T>,
    swapped: Vec<bool>,
}

impl<T: Real> TridiagonalLu<T> {
    /// Factors the matrix with subdiagonal `sub`, diagonal `diag` and
    /// superdiagonal `sup`. Returns `None` for an exactly singular matrix.
    pub fn factor(sub: &[T], diag: &[T], sup: &[T]) -> Option<Self> {
        let n = diag.len();
        assert!(n >= 1 && sub.len() + 1 == n && sup.len() + 1 == n);
        let mut d = diag.to_vec();
        let mut dl = sub.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == T::zero() {
                    return None;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] = d[i + 1] - fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == T::zero() || d.iter().any(|x| !x.is_finite()) {
            return None;
        }
        Some(Self {
            dl,
            d,
            du,
            du2,
            swapped,
        })
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.d.len();
        let mut b = rhs.to_vec();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let tmp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = tmp - self.dl[i] * b[i];
            } else {
                b[i + 1] = b[i + 1] - self.dl[i] * b[i];
            }
        }
        b[n - 1] = b[n - 1] / self.d[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
        b
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal<T> {
    pub diag: Vec<T>,
    pub off: Vec<T>,
}

impl<T: Real> SymTridiagonal<T> {
    pub fn new(diag: Vec<T>, off: Vec<T>) -> Self {
        assert_eq!(diag.len(), off.len() + 1);
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        let mut y: Vec<T> = self.diag.iter().zip(x).map(|(&a, &b)| a * b).collect();
        for i in 0..n - 1 {
            y[i] = y[i] + self.off[i] * x[i + 1];
            y[i + 1] = y[i + 1] + self.off[i] * x[i];
        }
        y
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (T, T) {
        let n = self.len();
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for i in 0..n {
            let mut radius = T::zero();
            if i > 0 {
                radius = radius + self.off[i - 1].abs();
            }
            if i + 1 < n {
                radius = radius + self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - radius);
            hi = hi.max(self.diag[i] + radius);
        }
        (lo, hi)
    }

    /// Spectral scale `max(|lo|, |hi|)` from the Gershgorin enclosure.
    pub fn scale(&self) -> T {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs()).max(T::min_positive_value())
    }

    /// Number of eigenvalues strictly below `sigma` (Sylvester inertia of the
    /// LDLᵀ factorization of `A - σI`).
    pub fn count_below(&self, sigma: T) -> usize {
        let tiny = T::epsilon() * self.scale() * T::epsilon();
        let mut count = 0;
        let mut d = T::one();
        for i in 0..self.len() {
            let coupling = if i == 0 {
                T::zero()
            } else {
                self.off[i - 1] * self.off[i - 1] / d
            };
            d = self.diag[i] - sigma - coupling;
            if d == T::zero() {
                d = -tiny;
            }
            if d < T::zero() {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (zero-based), by bisection on the
    /// inertia count.
    pub fn eigenvalue(&self, k: usize) -> T {
        assert!(k < self.len());
        let (mut lo, mut hi) = self.gershgorin();
        let pad = T::lit(1e-3) * self.scale();
        lo = lo - pad;
        hi = hi + pad;
        let two = T::lit(2.0);
        for _ in 0..400 {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo + hi) / two
    }

    /// The `k` smallest eigenpairs, ascending, with orthonormal vectors.
    ///
    /// Eigenvalues come from bisection, vectors from inverse iteration with
    /// Gram–Schmidt against the vectors already found.
    pub fn lowest_eigenpairs(&self, k: usize, residual_tol: T) -> Result<Vec<(T, Vec<T>)>> {
        let n = self.len();
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "requested {k} eigenpairs of a {n}x{n} operator"
            )));
        }
        let scale = self.scale();
        let tol = residual_tol.max(T::lit(1e3) * T::epsilon() * scale);
        let mut pairs: Vec<(T, Vec<T>)> = Vec::with_capacity(k);
        for j in 0..k {
            let nu = self.eigenvalue(j);
            let mut x: Vec<T> = (0..n)
                .map(|i| T::one() + T::lit(0.3) * T::of_usize(i * (j + 7)).sin())
                .collect();
            normalize(&mut x);
            let mut residual = T::infinity();
            let mut shift = nu + T::lit(8.0) * T::epsilon() * scale;
            let sub = &self.off;
            let mut lu = None;
            for attempt in 0..8 {
                let diag: Vec<T> = self.diag.iter().map(|&a| a - shift).collect();
                lu = TridiagonalLu::factor(sub, &diag, sub);
                if lu.is_some() {
                    break;
                }
                shift = shift + T::lit(8.0) * T::of_usize(attempt + 1) * T::epsilon() * scale;
            }
            let lu = lu.ok_or(Error::NoConvergence {
                what: "inverse iteration",
                iterations: 0,
                residual: f64::INFINITY,
            })?;
            let mut iterations = 0;
            while iterations < 12 {
                iterations += 1;
                let mut y = lu.solve(&x);
                for (_, v) in &pairs {
                    let c = dot(&y, v);
                    for (yi, &vi) in y.iter_mut().zip(v) {
                        *yi = *yi - c * vi;
                    }
                }
                normalize(&mut y);
                if y.iter().any(|v| !v.is_finite()) {
                    break;
                }
                x = y;
                let ax = self.apply(&x);
                residual = ax
                    .iter()
                    .zip(&x)
                    .map(|(&a, &b)| (a - nu * b) * (a - nu * b))
                    .sum::<T>()
                    .sqrt();
                if residual <= tol && iterations >= 2 {
                    break;
                }
            }
            if !(residual <= tol) {
                return Err(Error::NoConvergence {
                    what: "inverse iteration",
                    iterations,
                    residual: residual.as_f64(),
                });
            }
            // Fix the sign so the largest component is positive.
            let imax = x
                .iter()
                .enumerate()
                .fold((0, T::zero()), |(bi, bv), (i, &v)| {
                    if v.abs() > bv {
                        (i, v.abs())
                    } else {
                        (bi, bv)
                    }
                })
                .0;
            if x[imax] < T::zero() {
                for v in x.iter_mut() {
                    *v = -*v;
                }
            }
            pairs.push((nu, x));
        }
        Ok(pairs)
    }

    pub fn factor_shifted(&self, sigma: T) -> Option<TridiagonalLu<T>> {
        let diag: Vec<T> = self.diag.iter().map(|&a| a - sigma).collect();
        TridiagonalLu::factor(&self.off, &diag, &self.off)
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn normalize<T: Real>(x: &mut [T]) {
    let n = dot(x, x).sqrt();
    if n > T::zero() {
        for v in x.iter_mut() {
            *v = *v / n;
        }
    }
}

/// Solves the bordered system `[[A, c], [cᵀ, 0]] (x, s) = (f, g)` for a
/// symmetric tridiagonal `A` by block elimination.
pub fn solve_bordered<T: Real>(
    a: &SymTridiagonal<T>,
    c: &[T],
    f: &[T],
    g: T,
) -> Option<(Vec<T>, T)> {
    let lu = a.factor_shifted(T::zero())?;
    let y1 = lu.solve(f);
    let y2 = lu.solve(c);
    let denom = dot(c, &y2);
    if denom == T::zero() || !denom.is_finite() {
        return None;
    }
    let s = (dot(c, &y1) - g) / denom;
    let x: Vec<T> = y1.iter().zip(&y2).map(|(&p, &q)| p - s * q).collect();
    Some((x, s))
}
