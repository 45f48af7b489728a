//! Radial Schrödinger operators `−Δ + P(r)` with Dirichlet truncation:
//! lowest eigenpairs, `λ₁(V)`, and Morse indices of linearizations.
//!
//! The generalized problem `Hx = νWx` (stiffness plus weighted diagonal
//! against the diagonal mass matrix) is symmetrized as
//! `A = W^{-1/2} H W^{-1/2}`; eigenvectors `y` of `A` map back to fields
//! `x = W^{-1/2} y` that are orthonormal in the quadrature inner product.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::{free_stiffness, EnergyParams, Functional};
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::linalg::{dot, SymTridiagonal};
use crate::potentials::Potential;
use crate::scalar::Real;

/// Relative size of the zero band used when counting negative eigenvalues.
pub const INDEX_TOLERANCE: f64 = 1e-6;

/// Residual bound for returned eigenpairs.
pub const EIGEN_RESIDUAL: f64 = 1e-9;

/// `−Δ + P` on a grid, where `P` is the diagonal potential.
#[derive(Debug, Clone)]
pub struct LinearizedOperator<T> {
    grid: Arc<RadialGrid<T>>,
    diagonal_potential: Vec<T>,
    matrix: SymTridiagonal<T>,
    sqrt_w: Vec<T>,
}

impl<T: Real> LinearizedOperator<T> {
    pub fn new(grid: Arc<RadialGrid<T>>, diagonal_potential: Vec<T>) -> Result<Self> {
        if diagonal_potential.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} potential values for {} nodes",
                diagonal_potential.len(),
                grid.len()
            )));
        }
        let k = free_stiffness(&grid);
        let free = grid.free();
        let sqrt_w: Vec<T> = grid.weights()[free.clone()].iter().map(|w| w.sqrt()).collect();
        let diag: Vec<T> = free
            .clone()
            .enumerate()
            .map(|(j, i)| k.diag[j] / (sqrt_w[j] * sqrt_w[j]) + diagonal_potential[i])
            .collect();
        let off: Vec<T> = k
            .off
            .iter()
            .enumerate()
            .map(|(j, &o)| o / (sqrt_w[j] * sqrt_w[j + 1]))
            .collect();
        Ok(Self {
            grid,
            diagonal_potential,
            matrix: SymTridiagonal::new(diag, off),
            sqrt_w,
        })
    }

    /// `−Δ + V`.
    pub fn schrodinger(grid: Arc<RadialGrid<T>>, potential: &Potential) -> Result<Self> {
        let v = potential.sample(&grid);
        Self::new(grid, v)
    }

    /// Linearization `−Δ + V + λ − ρ(q−1)|u|^{q−2}` of the equation at `u`.
    pub fn at_solution(params: &EnergyParams, potential: &Potential, u: &RadialField<T>, lambda: T) -> Result<Self> {
        let f = Functional::new(*params, potential, u.grid().clone())?;
        let qm1 = T::lit(params.q - 1.0);
        let rho = T::lit(params.rho);
        let p: Vec<T> = f
            .potential_values()
            .iter()
            .zip(u.values())
            .map(|(&v, &ui)| v + lambda - rho * qm1 * f.power_q2(ui))
            .collect();
        Self::new(u.grid().clone(), p)
    }

    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }

    pub fn diagonal_potential(&self) -> &[T] {
        &self.diagonal_potential
    }

    /// The symmetrized matrix on the free nodes.
    pub fn symmetric_matrix(&self) -> &SymTridiagonal<T> {
        &self.matrix
    }

    /// `10⁻⁶` times the Gershgorin scale of the symmetrized matrix.
    pub fn index_tolerance(&self) -> T {
        T::lit(INDEX_TOLERANCE) * self.matrix.scale()
    }

    /// Number of eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: T) -> usize {
        self.matrix.count_below(sigma)
    }

    /// Applies the operator to a field (zero at Dirichlet nodes).
    pub fn apply(&self, x: &RadialField<T>) -> Result<RadialField<T>> {
        self.grid.check(x)?;
        let free = self.grid.free();
        let y: Vec<T> = free
            .clone()
            .enumerate()
            .map(|(j, i)| x.values()[i] * self.sqrt_w[j])
            .collect();
        let ay = self.matrix.apply(&y);
        let mut out = vec![T::zero(); self.grid.len()];
        for (j, i) in free.enumerate() {
            out[i] = ay[j] / self.sqrt_w[j];
        }
        RadialField::new(self.grid.clone(), out)
    }

    fn to_field(&self, y: &[T]) -> RadialField<T> {
        let mut out = vec![T::zero(); self.grid.len()];
        for (j, i) in self.grid.free().enumerate() {
            out[i] = y[j] / self.sqrt_w[j];
        }
        RadialField::zeros(self.grid.clone()).with_values(out)
    }

    /// The `k` smallest eigenvalues, ascending, with eigenfields normalized
    /// in `L²`.
    pub fn lowest_eigenpairs(&self, k: usize) -> Result<Vec<(T, RadialField<T>)>> {
        self.lowest_eigenpairs_to(k, EIGEN_RESIDUAL)
    }

    /// As [`Self::lowest_eigenpairs`] with an explicit residual tolerance.
    pub fn lowest_eigenpairs_to(&self, k: usize, residual: f64) -> Result<Vec<(T, RadialField<T>)>> {
        if k < 1 || k > self.grid.intervals() / 4 {
            return Err(Error::InvalidParameter(format!(
                "k = {k} outside [1, M/4 = {}]",
                self.grid.intervals() / 4
            )));
        }
        let pairs = self.matrix.lowest_eigenpairs(k, T::lit(residual))?;
        Ok(pairs.into_iter().map(|(nu, y)| (nu, self.to_field(&y))).collect())
    }

    /// Smallest eigenvalue, without computing its vector.
    pub fn lowest_eigenvalue(&self) -> T {
        self.matrix.eigenvalue(0)
    }

    /// Negative directions of the quadratic form, on the whole space and on
    /// the tangent space `{φ : ⟨u, φ⟩ = 0}` of the mass sphere at `u`.
    pub fn morse(&self, u: &RadialField<T>) -> Result<MorseIndex> {
        self.morse_with(u, INDEX_TOLERANCE)
    }

    /// As [`Self::morse`] with the index tolerance `relative` times the
    /// operator scale.
    pub fn morse_with(&self, u: &RadialField<T>, relative: f64) -> Result<MorseIndex> {
        self.grid.check(u)?;
        let tol = T::lit(relative) * self.matrix.scale();
        let free_index = self.count_below(-tol);
        let ambiguous_zero = self.count_below(tol) != free_index;

        // Haynsworth: the bordered matrix [[A, c], [cᵀ, 0]] has the inertia of
        // A plus that of −cᵀA⁻¹c, and also that of A restricted to c⊥ plus one
        // pair (+, −). Counting below −tol means working with A + tol·I.
        let c: Vec<T> = self
            .grid
            .free()
            .enumerate()
            .map(|(j, i)| u.values()[i] * self.sqrt_w[j])
            .collect();
        let (tangent_index, schur, singular) = match self.matrix.factor_shifted(-tol) {
            Some(lu) => {
                let s = dot(&c, &lu.solve(&c));
                let drop = usize::from(s < T::zero());
                (free_index - drop.min(free_index), s.as_f64(), false)
            }
            None => (free_index, f64::NAN, true),
        };
        let nev = 4.min(self.matrix.len());
        let lowest = (0..nev).map(|j| self.matrix.eigenvalue(j).as_f64()).collect();
        Ok(MorseIndex {
            free: free_index,
            tangent: tangent_index,
            ambiguous: ambiguous_zero || singular,
            tolerance: tol.as_f64(),
            schur_complement: schur,
            lowest,
        })
    }
}

/// Morse data of a critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseIndex {
    /// Eigenvalues below `−tolerance`.
    pub free: usize,
    /// Negative directions tangent to the mass sphere.
    pub tangent: usize,
    /// Set when an eigenvalue lies in `(−tolerance, tolerance)`.
    pub ambiguous: bool,
    pub tolerance: f64,
    /// `⟨u, L⁻¹u⟩` in the quadrature inner product (shifted by the tolerance).
    pub schur_complement: f64,
    /// The lowest few eigenvalues of the linearization.
    pub lowest: Vec<f64>,
}

pub fn lowest_eigenpairs<T: Real>(op: &LinearizedOperator<T>, k: usize) -> Result<Vec<(T, RadialField<T>)>> {
    op.lowest_eigenpairs(k)
}

/// `λ₁(V)`: bottom of the radial spectrum of `−Δ + V` on the truncated ball.
///
/// When the value lies below the essential spectrum (a bound state), it is
/// recomputed on a domain of twice the radius at the same resolution and
/// must agree to `10⁻⁶`.
pub fn lambda1<T: Real>(potential: &Potential, grid: &Arc<RadialGrid<T>>) -> Result<T> {
    if grid.dimension() < 2 {
        return Err(Error::InvalidParameter("lambda1 needs N >= 2".into()));
    }
    let value = LinearizedOperator::schrodinger(grid.clone(), potential)?.lowest_eigenvalue();
    let floor = potential.essential_spectrum_floor().ok();
    let bound_state = floor.is_some_and(|f| value.as_f64() < f - 1e-6 * (1.0 + f.abs()));
    if bound_state {
        let spec = grid.spec();
        let doubled = RadialGrid::<T>::new(spec.dimension, T::lit(2.0) * grid.r_max(), 2 * spec.intervals, spec.spacing)?;
        let v2 = LinearizedOperator::schrodinger(Arc::new(doubled), potential)?.lowest_eigenvalue();
        let (a, b) = (value.as_f64(), v2.as_f64());
        if (a - b).abs() > 1e-6 * a.abs().max(1.0) {
            return Err(Error::TruncationUnstable { value: a, doubled: b });
        }
    }
    Ok(value)
}

/// Morse data at `(u, λ)`.
pub fn morse_of<T: Real>(params: &EnergyParams, potential: &Potential, u: &RadialField<T>, lambda: T) -> Result<MorseIndex> {
    LinearizedOperator::at_solution(params, potential, u, lambda)?.morse(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Spacing};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const J01: f64 = 2.404_825_557_695_773;

    #[test]
    fn dirichlet_disk_eigenvalue() {
        let r = 10.0;
        let g = build_grid::<f64>(2, r, 4000, Spacing::Uniform).unwrap();
        let op = LinearizedOperator::new(g.clone(), vec![0.0; g.len()]).unwrap();
        let pairs = op.lowest_eigenpairs(2).unwrap();
        let exact = (J01 / r).powi(2);
        assert!((pairs[0].0 - exact).abs() / exact < 1e-4);
        assert!((pairs[0].1.l2_norm() - 1.0).abs() < 1e-10);
        assert!(pairs[0].1.dot(&pairs[1].1).abs() < 1e-10);
    }

    #[test]
    fn poschl_teller_spectrum() {
        let g = build_grid::<f64>(1, 20.0, 4000, Spacing::Uniform).unwrap();
        let p: Vec<f64> = g.nodes().iter().map(|x| 1.0 - 6.0 / x.cosh().powi(2)).collect();
        let op = LinearizedOperator::new(g, p).unwrap();
        let pairs = op.lowest_eigenpairs(2).unwrap();
        assert!((pairs[0].0 + 3.0).abs() < 1e-3, "{}", pairs[0].0);
        assert!(pairs[1].0.abs() < 1e-3, "{}", pairs[1].0);
    }

    #[test]
    fn eigen_residuals() {
        let g = build_grid::<f64>(2, 15.0, 1500, Spacing::Graded(0.3)).unwrap();
        let v = Potential::gaussian_well(5.0, 1.0).unwrap();
        let op = LinearizedOperator::schrodinger(g, &v).unwrap();
        for (nu, e) in op.lowest_eigenpairs(5).unwrap() {
            let ae = op.apply(&e).unwrap();
            let r = ae.with_values(ae.values().iter().zip(e.values()).map(|(a, b)| a - nu * b).collect());
            assert!(r.l2_norm() <= 1e-9 * e.l2_norm(), "residual {}", r.l2_norm());
        }
    }

    #[test]
    fn constant_shift_moves_spectrum() {
        let g = build_grid::<f64>(3, 10.0, 800, Spacing::Uniform).unwrap();
        let a = LinearizedOperator::new(g.clone(), vec![0.0; g.len()]).unwrap();
        let b = LinearizedOperator::new(g.clone(), vec![2.5; g.len()]).unwrap();
        for k in 0..5 {
            let d = b.symmetric_matrix().eigenvalue(k) - a.symmetric_matrix().eigenvalue(k);
            assert!((d - 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn weighted_symmetry() {
        let g = build_grid::<f64>(2, 8.0, 600, Spacing::Graded(0.4)).unwrap();
        let v = Potential::gaussian_well(3.0, 1.0).unwrap();
        let op = LinearizedOperator::schrodinger(g.clone(), &v).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rand_field = || {
            let vals: Vec<f64> = g.nodes().iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut f = RadialField::new(g.clone(), vals).unwrap();
            *f.values_mut().last_mut().unwrap() = 0.0;
            f
        };
        for _ in 0..10 {
            let (x, y) = (rand_field(), rand_field());
            let lhs = op.apply(&x).unwrap().dot(&y);
            let rhs = x.dot(&op.apply(&y).unwrap());
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn lambda1_values() {
        let g = build_grid::<f64>(2, 40.0, 4000, Spacing::Uniform).unwrap();
        let free = lambda1(&Potential::constant(0.0).unwrap(), &g).unwrap();
        assert!(free > 0.0 && free <= 0.004);
        let c = lambda1(&Potential::constant(-2.0).unwrap(), &g).unwrap();
        assert!((c + 2.0 - free).abs() < 1e-9);
        let well = lambda1(&Potential::gaussian_well(5.0, 1.0).unwrap(), &g).unwrap();
        assert!(well < 0.0);
    }

    #[test]
    fn slowly_decaying_bound_state_is_truncation_unstable() {
        // A wide well whose bound state tail does not fit in r_max = 6.
        let g = build_grid::<f64>(2, 6.0, 600, Spacing::Uniform).unwrap();
        let v = Potential::gaussian_well(1.0, 3.0).unwrap();
        assert!(matches!(lambda1(&v, &g), Err(Error::TruncationUnstable { .. })));
    }

    #[test]
    fn trivial_field_is_nondegenerate() {
        let g = build_grid::<f64>(2, 20.0, 1000, Spacing::Uniform).unwrap();
        let v = Potential::gaussian_well(5.0, 1.0).unwrap();
        let l1 = lambda1(&v, &g).unwrap();
        let params = EnergyParams::new(2, 6.0, 1.0, 1.0).unwrap();
        let u = RadialField::zeros(g);
        let m = morse_of(&params, &v, &u, -l1 + 0.5).unwrap();
        assert_eq!(m.free, 0);
        assert!(!m.ambiguous);
    }

    #[test]
    fn soliton_index_one() {
        let g = build_grid::<f64>(1, 20.0, 4000, Spacing::Uniform).unwrap();
        let u = RadialField::from_fn(g, |x| 2f64.sqrt() / x.cosh());
        let params = EnergyParams::limit_problem(1, 4.0, 1.0, 2.0).unwrap();
        let m = morse_of(&params, &Potential::constant(0.0).unwrap(), &u, 1.0).unwrap();
        assert_eq!(m.free, 1);
        assert!((m.lowest[0] + 3.0).abs() < 1e-3);
    }

    #[test]
    fn soliton_quadratic_form_is_negative() {
        // Q(U; U) = (2 − q)∫U^q = −32/3 for q = 4.
        let g = build_grid::<f64>(1, 25.0, 20000, Spacing::Uniform).unwrap();
        let u = RadialField::from_fn(g.clone(), |x| 2f64.sqrt() / x.cosh());
        let p: Vec<f64> = g.nodes().iter().map(|x| 1.0 - 6.0 / x.cosh().powi(2)).collect();
        let op = LinearizedOperator::new(g, p).unwrap();
        let q = op.apply(&u).unwrap().dot(&u);
        assert!((q + 32.0 / 3.0).abs() < 1e-4, "{q}");
    }

    #[test]
    fn tangent_index_two_by_two() {
        // A = diag(−1, 2) restricted to c⊥.
        let a = SymTridiagonal::new(vec![-1.0, 2.0], vec![0.0]);
        for (c, expected) in [([1.0, 0.0], 0usize), ([0.0, 1.0], 1), ([1.0, 1.0], 0), ([0.5, 1.0], 1)] {
            let lu = a.factor_shifted(0.0).unwrap();
            let s = dot(&c, &lu.solve(&c));
            let free = a.count_below(0.0);
            let tangent = free - usize::from(s < 0.0);
            // The tangent line is spanned by (c₁, −c₀).
            let t = [c[1], -c[0]];
            let qf = -t[0] * t[0] + 2.0 * t[1] * t[1];
            assert_eq!(tangent, usize::from(qf < 0.0));
            assert_eq!(tangent, expected);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(5))]
        #[test]
        fn nonnegative_potential_raises_eigenvalues(seed in 0u64..1000) {
            let g = build_grid::<f64>(2, 10.0, 400, Spacing::Uniform).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base: Vec<f64> = g.nodes().iter().map(|r| -4.0 * (-r * r).exp() + rng.gen_range(-0.5..0.5)).collect();
            let extra: Vec<f64> = g.nodes().iter().map(|_| rng.gen_range(0.0..2.0)).collect();
            let a = LinearizedOperator::new(g.clone(), base.clone()).unwrap();
            let b = LinearizedOperator::new(g.clone(), base.iter().zip(&extra).map(|(x, y)| x + y).collect()).unwrap();
            for k in 0..6 {
                prop_assert!(b.symmetric_matrix().eigenvalue(k) >= a.symmetric_matrix().eigenvalue(k) - 1e-10);
            }
        }
    }
}
