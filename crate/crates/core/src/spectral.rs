//! Spectral gap of `−Δ` and the optimal Poincaré constant.
//!
//! `−Δ = M⁻¹ L` with `L = D − W` the combinatorial Laplacian and `M = diag(μ)`.
//! It is self-adjoint in the μ-weighted inner product, and is similar to the
//! symmetric matrix `M^{-1/2} L M^{-1/2}`, which is what gets diagonalised.
//! Dense `O(n³)` eigendecomposition, meant for graphs up to a few thousand
//! vertices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::field::VertexField;
use crate::graph::WeightedGraph;

/// Symmetrised `−Δ`: `S_xy = (L)_xy / sqrt(μ(x) μ(y))`.
pub fn symmetric_operator(g: &WeightedGraph) -> DMatrix<f64> {
    let n = g.n();
    let mu = g.measure();
    let mut s = DMatrix::zeros(n, n);
    for &(x, y, w) in g.edges() {
        let off = -w / (mu[x] * mu[y]).sqrt();
        s[(x, y)] += off;
        s[(y, x)] += off;
        s[(x, x)] += w / mu[x];
        s[(y, y)] += w / mu[y];
    }
    s
}

/// All eigenvalues of `−Δ`, ascending.
pub fn laplacian_spectrum(g: &WeightedGraph) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetric_operator(g)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest nonzero eigenvalue of `−Δ` together with an eigenvector
/// (as a vertex field, normalised to unit μ-weighted L² norm).
pub fn spectral_gap(g: &WeightedGraph) -> Result<(f64, VertexField)> {
    let n = g.n();
    let eig = SymmetricEigen::new(symmetric_operator(g));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let top = eig.eigenvalues[order[n - 1]].abs().max(1.0);
    if n < 2 {
        return Err(Error::InvalidParameter("spectral gap needs at least two vertices".into()));
    }
    let idx = order[1];
    let gap = eig.eigenvalues[idx];
    if gap <= 1e-12 * top {
        return Err(Error::Disconnected);
    }
    let y = eig.eigenvectors.column(idx);
    let mu = g.measure();
    // u = M^{-1/2} y has ∫u² dμ = |y|² = 1.
    let u = (0..n).map(|x| y[x] / mu[x].sqrt()).collect();
    Ok((gap, VertexField::new(u)?))
}

/// Optimal `C` in `∫u² dμ ≤ C ∫|∇u|² dμ` over mean-zero `u`; equals
/// `1 / λ₂(−Δ)`.
pub fn poincare_constant(g: &WeightedGraph) -> Result<f64> {
    Ok(1.0 / spectral_gap(g)?.0)
}
