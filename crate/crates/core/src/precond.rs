//! `H¹` preconditioner `K + αW` on the free nodes.

use std::ops::Range;

use crate::energy::free_stiffness;
use crate::grid::RadialGrid;
use crate::linalg::{SymTridiagonal, TridiagonalLu};

pub(crate) struct Sobolev {
    matrix: SymTridiagonal<f64>,
    lu: TridiagonalLu<f64>,
    free: Range<usize>,
    len: usize,
}

impl Sobolev {
    pub(crate) fn new(grid: &RadialGrid<f64>, alpha: f64) -> Self {
        let mut matrix = free_stiffness(grid);
        let w = grid.weights();
        for (j, i) in grid.free().enumerate() {
            matrix.diag[j] += alpha * w[i];
        }
        let lu = matrix
            .factor_shifted(0.0)
            .expect("K + alpha W is positive definite for alpha > 0");
        Self {
            matrix,
            lu,
            free: grid.free(),
            len: grid.len(),
        }
    }

    /// `P⁻¹ rhs` on the free nodes, zero elsewhere.
    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let y = self.lu.solve(&rhs[self.free.clone()]);
        let mut out = vec![0.0; self.len];
        out[self.free.clone()].copy_from_slice(&y);
        out
    }

    /// `xᵀ P x` over the free nodes.
    pub(crate) fn norm2(&self, x: &[f64]) -> f64 {
        let xf = &x[self.free.clone()];
        let px = self.matrix.apply(xf);
        xf.iter().zip(&px).map(|(a, b)| a * b).sum()
    }
}
