//! Radial discretization of R^N restricted to radial functions.
//!
//! Nodes live on `[0, r_max]` for `N >= 2` and on `[-r_max, r_max]` for the
//! one-dimensional limit problems. Functions are represented by their nodal
//! values and interpreted as continuous piecewise-linear interpolants:
//!
//! * quadrature weights are the moments of the hat functions against the
//!   measure `|S^{N-1}| r^{N-1} dr` (plain `dr` in 1D), so `∫ (a + b r) dμ`
//!   is integrated exactly;
//! * the Dirichlet form `∫ |u'|² dμ` is evaluated exactly for the
//!   interpolant, one coefficient per element.
//!
//! The resulting discrete Laplacian `W⁻¹K` is symmetric with respect to the
//! weighted inner product and second-order accurate.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{gauss_legendre, unit_sphere_area, Real};

/// Node distribution of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Uniform,
    /// Smooth quadratic map `r = r_max ((1 - g) s² + g s)`; the first step is
    /// `g` times the uniform step, so `g < 1` clusters nodes near the origin.
    Graded(f64),
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spacing::Uniform => write!(f, "uniform"),
            Spacing::Graded(g) => write!(f, "graded({g})"),
        }
    }
}

impl std::str::FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "uniform" {
            return Ok(Spacing::Uniform);
        }
        if let Some(inner) = s.strip_prefix("graded(").and_then(|r| r.strip_suffix(')')) {
            let g: f64 = inner
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad grading ratio '{inner}'")))?;
            return Ok(Spacing::Graded(g));
        }
        Err(Error::Parse(format!("unknown spacing '{s}'")))
    }
}

/// Construction parameters of a grid; enough to rebuild it bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "N")]
    pub dimension: usize,
    pub r_max: f64,
    #[serde(rename = "M")]
    pub intervals: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn build<T: Real>(&self) -> Result<RadialGrid<T>> {
        RadialGrid::new(self.dimension, T::lit(self.r_max), self.intervals, self.spacing)
    }
}

#[derive(Debug, Clone)]
pub struct RadialGrid<T> {
    spec: GridSpec,
    r_max: T,
    nodes: Vec<T>,
    weights: Vec<T>,
    /// `|S^{N-1}| ∫_e r^{N-1} dr / h_e²` for each element `e = [r_i, r_{i+1}]`.
    stiffness: Vec<T>,
}

impl<T: Real> PartialEq for RadialGrid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

/// Builds a grid of `intervals` elements; see [`RadialGrid::new`].
pub fn build_grid<T: Real>(
    dimension: usize,
    r_max: T,
    intervals: usize,
    spacing: Spacing,
) -> Result<Arc<RadialGrid<T>>> {
    RadialGrid::new(dimension, r_max, intervals, spacing).map(Arc::new)
}

impl<T: Real> RadialGrid<T> {
    pub fn new(dimension: usize, r_max: T, intervals: usize, spacing: Spacing) -> Result<Self> {
        if dimension < 1 {
            return Err(Error::InvalidParameter(format!("dimension N = {dimension} < 1")));
        }
        if intervals < 16 {
            return Err(Error::InvalidParameter(format!("M = {intervals} < 16")));
        }
        if !(r_max > T::zero()) || !r_max.is_finite() {
            return Err(Error::InvalidParameter(format!("r_max = {r_max} must be positive")));
        }
        if let Spacing::Graded(g) = spacing {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::InvalidParameter(format!("grading ratio {g} outside (0, 1]")));
            }
        }
        if dimension == 1 && intervals % 2 == 1 {
            return Err(Error::InvalidParameter(
                "1D grids are two-sided and need an even number of intervals".into(),
            ));
        }

        let map = |s: T| -> T {
            match spacing {
                Spacing::Uniform => r_max * s,
                Spacing::Graded(g) => {
                    let g = T::lit(g);
                    r_max * ((T::one() - g) * s * s + g * s)
                }
            }
        };
        let m = T::of_usize(intervals);
        let nodes: Vec<T> = if dimension == 1 {
            let half = intervals / 2;
            let h = T::of_usize(half);
            (0..=intervals)
                .map(|i| {
                    if i == half {
                        T::zero()
                    } else if i < half {
                        -map(T::of_usize(half - i) / h)
                    } else {
                        map(T::of_usize(i - half) / h)
                    }
                })
                .collect()
        } else {
            (0..=intervals).map(|i| map(T::of_usize(i) / m)).collect()
        };
        let mut nodes = nodes;
        nodes[intervals] = r_max;
        if dimension == 1 {
            nodes[0] = -r_max;
        } else {
            nodes[0] = T::zero();
        }

        let area = unit_sphere_area::<T>(dimension);
        let rule = gauss_legendre::<T>(dimension / 2 + 2);
        let half = T::lit(0.5);
        let mut weights = vec![T::zero(); intervals + 1];
        let mut stiffness = Vec::with_capacity(intervals);
        for e in 0..intervals {
            let (a, b) = (nodes[e], nodes[e + 1]);
            let h = b - a;
            let (mut left, mut right, mut total) = (T::zero(), T::zero(), T::zero());
            for &(x, w) in &rule {
                let r = (a + b) * half + h * half * x;
                let density = if dimension == 1 {
                    T::one()
                } else {
                    area * r.powi(dimension as i32 - 1)
                };
                let dm = w * h * half * density;
                left = left + dm * (b - r) / h;
                right = right + dm * (r - a) / h;
                total = total + dm;
            }
            weights[e] = weights[e] + left;
            weights[e + 1] = weights[e + 1] + right;
            stiffness.push(total / (h * h));
        }

        Ok(Self {
            spec: GridSpec {
                dimension,
                r_max: r_max.as_f64(),
                intervals,
                spacing,
            },
            r_max,
            nodes,
            weights,
            stiffness,
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn r_max(&self) -> T {
        self.r_max
    }

    /// Number of elements `M`; there are `M + 1` nodes.
    pub fn intervals(&self) -> usize {
        self.spec.intervals
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn stiffness(&self) -> &[T] {
        &self.stiffness
    }

    pub fn is_two_sided(&self) -> bool {
        self.spec.dimension == 1
    }

    /// Index range of the nodes not pinned by the homogeneous Dirichlet
    /// condition (`r = r_max`, and `r = -r_max` on 1D grids).
    pub fn free(&self) -> std::ops::Range<usize> {
        let n = self.nodes.len();
        if self.is_two_sided() {
            1..n - 1
        } else {
            0..n - 1
        }
    }

    /// Index of the node at the origin.
    pub fn origin(&self) -> usize {
        if self.is_two_sided() {
            self.spec.intervals / 2
        } else {
            0
        }
    }

    /// Smallest element length.
    pub fn min_step(&self) -> T {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::infinity(), T::min)
    }

    /// Index of the node closest to `r`.
    pub fn nearest(&self, r: T) -> usize {
        let idx = self.nodes.partition_point(|&x| x < r);
        if idx == 0 {
            return 0;
        }
        if idx >= self.nodes.len() {
            return self.nodes.len() - 1;
        }
        if (self.nodes[idx] - r) < (r - self.nodes[idx - 1]) {
            idx
        } else {
            idx - 1
        }
    }

    /// Piecewise-linear interpolation of nodal `values` at `r`; zero outside
    /// the grid (fields vanish beyond the Dirichlet boundary).
    pub fn interpolate(&self, values: &[T], r: T) -> T {
        let n = self.nodes.len();
        if r < self.nodes[0] || r > self.nodes[n - 1] {
            return T::zero();
        }
        let idx = self.nodes.partition_point(|&x| x < r);
        if idx == 0 {
            return values[0];
        }
        let (a, b) = (self.nodes[idx - 1], self.nodes[idx]);
        let t = (r - a) / (b - a);
        values[idx - 1] * (T::one() - t) + values[idx] * t
    }

    /// `∫ |f|^p` over R^N (over R for 1D grids).
    pub fn integrate(&self, f: &RadialField<T>, power: T) -> Result<T> {
        self.check(f)?;
        Ok(self.integrate_values(f.values(), power))
    }

    pub(crate) fn integrate_values(&self, values: &[T], power: T) -> T {
        let two = T::lit(2.0);
        self.weights
            .iter()
            .zip(values)
            .map(|(&w, &v)| {
                let a = v.abs();
                let ap = if power == two { a * a } else { a.powf(power) };
                w * ap
            })
            .sum()
    }

    /// Dirichlet form `∫ |∇u|²` of the piecewise-linear interpolant.
    pub(crate) fn dirichlet_values(&self, values: &[T]) -> T {
        self.stiffness
            .iter()
            .zip(values.windows(2))
            .map(|(&k, w)| {
                let d = w[1] - w[0];
                k * d * d
            })
            .sum()
    }

    /// Applies the stiffness matrix `K` (the Hessian of the Dirichlet form
    /// divided by two) to nodal `values`.
    pub(crate) fn apply_stiffness(&self, values: &[T], out: &mut [T]) {
        for o in out.iter_mut() {
            *o = T::zero();
        }
        for (e, &k) in self.stiffness.iter().enumerate() {
            let flux = k * (values[e + 1] - values[e]);
            out[e] = out[e] - flux;
            out[e + 1] = out[e + 1] + flux;
        }
    }

    /// Second-order nodal derivative: central differences inside, a
    /// three-point one-sided formula at the outer boundary, and `u'(0) = 0`
    /// at the origin of radial grids.
    pub fn radial_derivative(&self, f: &RadialField<T>) -> Result<RadialField<T>> {
        self.check(f)?;
        let values = self.derivative_values(f.values());
        Ok(RadialField {
            grid: f.grid.clone(),
            values,
        })
    }

    pub(crate) fn derivative_values(&self, u: &[T]) -> Vec<T> {
        let r = &self.nodes;
        let n = r.len();
        let mut d = vec![T::zero(); n];
        for i in 1..n - 1 {
            let hm = r[i] - r[i - 1];
            let hp = r[i + 1] - r[i];
            d[i] = (hm * hm * u[i + 1] - hp * hp * u[i - 1] + (hp * hp - hm * hm) * u[i])
                / (hp * hm * (hp + hm));
        }
        let one_sided = |i0: usize, i1: usize, i2: usize| -> T {
            // Quadratic through three nodes, differentiated at r[i0].
            let (x0, x1, x2) = (r[i0], r[i1], r[i2]);
            let l0 = (T::lit(2.0) * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2));
            let l1 = (x0 - x2) / ((x1 - x0) * (x1 - x2));
            let l2 = (x0 - x1) / ((x2 - x0) * (x2 - x1));
            l0 * u[i0] + l1 * u[i1] + l2 * u[i2]
        };
        d[n - 1] = one_sided(n - 1, n - 2, n - 3);
        if self.is_two_sided() {
            d[0] = one_sided(0, 1, 2);
        } else {
            d[0] = T::zero();
        }
        d
    }

    pub(crate) fn check(&self, f: &RadialField<T>) -> Result<()> {
        if f.values.len() != self.nodes.len() || f.grid.spec != self.spec {
            return Err(Error::DimensionMismatch(format!(
                "field on grid {:?} ({} values) used with grid {:?}",
                f.grid.spec,
                f.values.len(),
                self.spec
            )));
        }
        Ok(())
    }

    /// Plain-text serialization: a commented header with the construction
    /// parameters followed by `r,weight` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# N={}\n", self.spec.dimension));
        s.push_str(&format!("# r_max={:.17e}\n", self.spec.r_max));
        s.push_str(&format!("# M={}\n", self.spec.intervals));
        s.push_str(&format!("# spacing={}\n", self.spec.spacing));
        s.push_str("r,weight\n");
        for (r, w) in self.nodes.iter().zip(&self.weights) {
            s.push_str(&format!("{:.17e},{:.17e}\n", r.as_f64(), w.as_f64()));
        }
        s
    }

    /// Rebuilds a grid from [`to_csv`](Self::to_csv) output and checks the
    /// stored node column against the reconstruction.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut header = std::collections::HashMap::new();
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    header.insert(k.trim().to_string(), v.trim().to_string());
                }
            } else if !line.is_empty() && !line.starts_with('r') {
                let r: f64 = line
                    .split(',')
                    .next()
                    .and_then(|c| c.trim().parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad grid row '{line}'")))?;
                rows.push(r);
            }
        }
        let get = |k: &str| {
            header
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Parse(format!("grid header missing '{k}'")))
        };
        let parse_err = |k: &str| Error::Parse(format!("bad grid header value for '{k}'"));
        let spec = GridSpec {
            dimension: get("N")?.parse().map_err(|_| parse_err("N"))?,
            r_max: get("r_max")?.parse().map_err(|_| parse_err("r_max"))?,
            intervals: get("M")?.parse().map_err(|_| parse_err("M"))?,
            spacing: get("spacing")?.parse()?,
        };
        let grid: Self = spec.build()?;
        if rows.len() != grid.len()
            || rows
                .iter()
                .zip(grid.nodes())
                .any(|(a, b)| (a - b.as_f64()).abs() > 1e-12 * spec.r_max)
        {
            return Err(Error::Parse("grid node column does not match its header".into()));
        }
        Ok(grid)
    }
}

/// Real-valued samples aligned with the nodes of a grid.
#[derive(Debug, Clone)]
pub struct RadialField<T> {
    grid: Arc<RadialGrid<T>>,
    values: Vec<T>,
}

impl<T: Real> RadialField<T> {
    pub fn new(grid: Arc<RadialGrid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("field has non-finite entries".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid<T>>) -> Self {
        let values = vec![T::zero(); grid.len()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<RadialGrid<T>>, f: impl Fn(T) -> T) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Same grid, new values (no validation beyond the length).
    pub(crate) fn with_values(&self, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `‖u‖₂`.
    pub fn l2_norm(&self) -> T {
        self.grid.integrate_values(&self.values, T::lit(2.0)).sqrt()
    }

    /// `‖∇u‖₂`.
    pub fn gradient_norm(&self) -> T {
        self.grid.dirichlet_values(&self.values).sqrt()
    }

    /// Weighted inner product `∫ u v`.
    pub fn dot(&self, other: &Self) -> T {
        self.grid
            .weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(&w, (&a, &b))| w * a * b)
            .sum()
    }

    pub fn interpolate(&self, r: T) -> T {
        self.grid.interpolate(&self.values, r)
    }

    /// Mass-preserving dilation `t^{N/2} u(t r)`, resampled on the same grid.
    pub fn dilate(&self, t: T) -> Self {
        let n = T::of_usize(self.grid.dimension());
        let amp = t.powf(n / T::lit(2.0));
        let values = self
            .grid
            .nodes()
            .iter()
            .map(|&r| amp * self.grid.interpolate(&self.values, t * r))
            .collect();
        self.with_values(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize, r_max: f64, m: usize) -> Arc<RadialGrid<f64>> {
        build_grid::<f64>(n, r_max, m, Spacing::Uniform).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            RadialGrid::<f64>::new(0, 1.0, 100, Spacing::Uniform),
            Err(Error::InvalidParameter(_))
        ));
        assert!(RadialGrid::<f64>::new(2, 1.0, 15, Spacing::Uniform).is_err());
        assert!(RadialGrid::<f64>::new(2, 0.0, 100, Spacing::Uniform).is_err());
        assert!(RadialGrid::<f64>::new(2, -1.0, 100, Spacing::Uniform).is_err());
        assert!(RadialGrid::<f64>::new(2, 1.0, 100, Spacing::Graded(0.0)).is_err());
        assert!(RadialGrid::<f64>::new(1, 1.0, 101, Spacing::Uniform).is_err());
    }

    #[test]
    fn node_invariants() {
        for spacing in [Spacing::Uniform, Spacing::Graded(0.2)] {
            let g = RadialGrid::<f64>::new(3, 7.5, 300, spacing).unwrap();
            assert_eq!(g.nodes()[0], 0.0);
            assert_eq!(*g.nodes().last().unwrap(), 7.5);
            assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
            assert!(g.weights().iter().all(|&w| w >= 0.0));
        }
        let g = RadialGrid::<f64>::new(1, 5.0, 200, Spacing::Uniform).unwrap();
        assert_eq!(g.nodes()[0], -5.0);
        assert_eq!(g.nodes()[100], 0.0);
        assert_eq!(g.origin(), 100);
    }

    #[test]
    fn graded_grid_clusters_near_origin() {
        let g = RadialGrid::<f64>::new(2, 10.0, 100, Spacing::Graded(0.25)).unwrap();
        let first = g.nodes()[1] - g.nodes()[0];
        let last = g.nodes()[100] - g.nodes()[99];
        assert!((first - 0.025).abs() < 1e-3);
        assert!(last > 5.0 * first);
    }

    #[test]
    fn disk_area() {
        let g = grid(2, 20.0, 2000);
        assert!((g.nodes()[1] - 0.01).abs() < 1e-15);
        let one = RadialField::from_fn(g.clone(), |_| 1.0);
        let area = g.integrate(&one, 1.0).unwrap();
        assert!((area - PI * 400.0).abs() / (PI * 400.0) < 1e-6);
    }

    #[test]
    fn ball_volume() {
        let g = grid(3, 10.0, 1000);
        let one = RadialField::from_fn(g.clone(), |_| 1.0);
        let vol = g.integrate(&one, 2.0).unwrap();
        let exact = 4.0 / 3.0 * PI * 1000.0;
        assert!((vol - exact).abs() / exact < 1e-6);
    }

    #[test]
    fn truncated_gaussian_integral() {
        let g = grid(2, 8.0, 1600);
        let f = RadialField::from_fn(g.clone(), |r| (-r * r).exp());
        let val = g.integrate(&f, 1.0).unwrap();
        let exact = PI * (1.0 - (-64.0f64).exp());
        assert!((val - exact).abs() / exact < 1e-6);
    }

    #[test]
    fn gaussian_norms() {
        let g = grid(2, 12.0, 4000);
        let f = RadialField::from_fn(g.clone(), |r| (-r * r / 2.0).exp());
        let l2 = g.integrate(&f, 2.0).unwrap();
        assert!((l2 - PI * (1.0 - (-144.0f64).exp())).abs() < 1e-5);
        // ∫ e^{-2r²} over R² = π/2.
        let l4 = g.integrate(&f, 4.0).unwrap();
        assert!((l4 - PI / 2.0).abs() < 1e-5);
        let zero = RadialField::zeros(g.clone());
        assert_eq!(g.integrate(&zero, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn linear_moments_exact() {
        // ∫_0^R (a + b r) |S^{N-1}| r^{N-1} dr, exact for any N on uniform grids.
        for n in 1..=5usize {
            let g = if n == 1 { grid(1, 3.0, 64) } else { grid(n, 3.0, 64) };
            let f = RadialField::from_fn(g.clone(), |r| 2.0 + 0.5 * r.abs());
            let got: f64 = g
                .weights()
                .iter()
                .zip(f.values())
                .map(|(w, v)| w * v)
                .sum();
            let nn = n as f64;
            let area = unit_sphere_area::<f64>(n);
            let exact = area * (2.0 * 3f64.powf(nn) / nn + 0.5 * 3f64.powf(nn + 1.0) / (nn + 1.0));
            assert!((got - exact).abs() / exact < 1e-13, "N={n}: {got} vs {exact}");
        }
    }

    #[test]
    fn derivative_of_quadratic_is_exact() {
        let g = grid(2, 4.0, 400);
        let f = RadialField::from_fn(g.clone(), |r| r * r);
        let d = g.radial_derivative(&f).unwrap();
        for i in 1..g.len() - 1 {
            assert!((d.values()[i] - 2.0 * g.nodes()[i]).abs() < 1e-10);
        }
        assert_eq!(d.values()[0], 0.0);
        let c = RadialField::from_fn(g.clone(), |_| 3.0);
        assert!(g.radial_derivative(&c).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn derivative_converges_at_second_order() {
        let err = |m: usize| {
            let g = grid(2, 3.0, m);
            let f = RadialField::from_fn(g.clone(), f64::sin);
            let d = g.radial_derivative(&f).unwrap();
            (1..g.len())
                .map(|i| (d.values()[i] - g.nodes()[i].cos()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(200), err(400));
        let order = (e1 / e2).log2();
        assert!((1.8..=2.2).contains(&order), "order {order}");
    }

    #[test]
    fn quadrature_converges_at_second_order() {
        let err = |m: usize| {
            let g = grid(3, 6.0, m);
            let f = RadialField::from_fn(g.clone(), |r| (-r * r).exp() * (1.0 + r.cos()));
            let fine = {
                let g = grid(3, 6.0, 64000);
                let f = RadialField::from_fn(g.clone(), |r| (-r * r).exp() * (1.0 + r.cos()));
                g.integrate(&f, 1.0).unwrap()
            };
            (g.integrate(&f, 1.0).unwrap() - fine).abs()
        };
        let order = (err(100) / err(200)).log2();
        assert!((1.8..=2.2).contains(&order), "order {order}");
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = grid(2, 4.0, 100);
        let b = grid(2, 4.0, 200);
        let f = RadialField::zeros(b);
        assert!(matches!(a.integrate(&f, 2.0), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn csv_round_trip() {
        let g = RadialGrid::<f64>::new(3, 12.0, 64, Spacing::Graded(0.5)).unwrap();
        let text = g.to_csv();
        let back = RadialGrid::<f64>::from_csv(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.nodes(), g.nodes());
    }

    #[test]
    fn dilation_preserves_mass() {
        let g = grid(2, 20.0, 4000);
        let f = RadialField::from_fn(g.clone(), |r| (-r * r).exp());
        let d = f.dilate(2.0);
        assert!((d.l2_norm() - f.l2_norm()).abs() / f.l2_norm() < 1e-4);
        assert!((d.gradient_norm() / f.gradient_norm() - 2.0).abs() < 1e-3);
    }

    #[test]
    fn single_precision_grid() {
        let g = RadialGrid::<f32>::new(2, 10.0, 1000, Spacing::Uniform).unwrap();
        let area: f32 = g.weights().iter().sum();
        assert!((area - std::f32::consts::PI * 100.0).abs() / area < 1e-5);
    }
}
