//! The two linear systems the solvers need.
//!
//! * shifted: `(Δ − K) x = b` with `K > 0`. Multiplying by `−M` gives the
//!   symmetric positive definite system `(L + K M) x = −M b`.
//! * Poisson: `Δ x = f` with `∫f dμ = 0`, normalised by `∫x dμ = 0`. In
//!   symmetric form `L x = −M f`, singular with kernel = constants.
//!
//! Both are solved either by a dense factorisation or by conjugate gradients.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{sup_norm, VertexField};
use crate::graph::WeightedGraph;

/// Graphs up to this many vertices default to a dense direct solve.
pub const DIRECT_MAX_N: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Direct,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSolveConfig {
    pub rel_tol: f64,
    /// `None` means `10 · n`.
    pub max_iter: Option<usize>,
    /// `None` picks `Direct` for `n ≤ 512` and `ConjugateGradient` above.
    pub method: Option<SolveMethod>,
}

impl Default for LinearSolveConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: None,
            method: None,
        }
    }
}

impl LinearSolveConfig {
    pub fn with_method(method: SolveMethod) -> Self {
        Self {
            method: Some(method),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("rel_tol = {} must be > 0", self.rel_tol)));
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        Ok(())
    }

    fn method_for(&self, n: usize) -> SolveMethod {
        self.method.unwrap_or(if n <= DIRECT_MAX_N {
            SolveMethod::Direct
        } else {
            SolveMethod::ConjugateGradient
        })
    }

    fn max_iter_for(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n)
    }
}

/// Dense `L + K M` (or plain `L` when `shift == 0`).
fn assemble(g: &WeightedGraph, shift: f64) -> DMatrix<f64> {
    let n = g.n();
    let mut a = DMatrix::zeros(n, n);
    for &(x, y, w) in g.edges() {
        a[(x, y)] -= w;
        a[(y, x)] -= w;
        a[(x, x)] += w;
        a[(y, y)] += w;
    }
    for (x, m) in g.measure().iter().enumerate() {
        a[(x, x)] += shift * m;
    }
    a
}

/// `(L + K M) x` in place, `L x = −M Δx`.
fn apply_symmetric(g: &WeightedGraph, shift: f64, x: &[f64], out: &mut [f64]) {
    g.laplacian_into(x, out);
    for ((o, m), xi) in out.iter_mut().zip(g.measure()).zip(x) {
        *o = -*o * m + shift * m * xi;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Sup-norm of `(Δ − K)x − b`.
fn shifted_residual(g: &WeightedGraph, shift: f64, x: &[f64], b: &[f64]) -> f64 {
    let lx = g.laplacian_vec(x);
    lx.iter()
        .zip(x)
        .zip(b)
        .fold(0.0, |m, ((l, xi), bi)| m.max((l - shift * xi - bi).abs()))
}

/// Conjugate gradients for `A x = rhs` with `A` symmetric positive
/// (semi)definite. The stopping test is on `sup |r_i / μ_i|`, which is the
/// sup-norm residual of the unsymmetrised system. With `project` set, iterates
/// and residuals are kept orthogonal to the constants.
fn conjugate_gradient(
    g: &WeightedGraph,
    shift: f64,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
    project: bool,
) -> Result<Vec<f64>> {
    let n = g.n();
    let mu = g.measure();
    let scaled_sup = |r: &[f64]| r.iter().zip(mu).fold(0.0f64, |m, (ri, mi)| m.max((ri / mi).abs()));
    let remove_mean = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|e| *e -= mean);
    };

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    if project {
        remove_mean(&mut r);
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut res = scaled_sup(&r);
    for _ in 0..max_iter {
        if res <= tol {
            return Ok(x);
        }
        apply_symmetric(g, shift, &p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if project {
            remove_mean(&mut x);
            remove_mean(&mut r);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        res = scaled_sup(&r);
    }
    // recompute from scratch before giving up: the recursive residual drifts
    let mut ax = vec![0.0; n];
    apply_symmetric(g, shift, &x, &mut ax);
    let true_res = scaled_sup(&rhs.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>());
    if true_res <= tol {
        return Ok(x);
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: true_res,
    })
}

/// A reusable solver for `(Δ − K) x = b` on a fixed graph and shift; the
/// dense factorisation (if any) is computed once.
pub struct ShiftedSolver<'g> {
    graph: &'g WeightedGraph,
    shift: f64,
    cfg: LinearSolveConfig,
    factor: Option<Cholesky<f64, Dyn>>,
}

impl<'g> ShiftedSolver<'g> {
    pub fn new(graph: &'g WeightedGraph, shift: f64, cfg: LinearSolveConfig) -> Result<Self> {
        cfg.validate()?;
        if !(shift > 0.0 && shift.is_finite()) {
            return Err(Error::InvalidParameter(format!("shift K = {shift} must be > 0")));
        }
        let factor = match cfg.method_for(graph.n()) {
            SolveMethod::Direct => Some(
                Cholesky::new(assemble(graph, shift))
                    .ok_or_else(|| Error::InvalidParameter("shifted operator is not positive definite".into()))?,
            ),
            SolveMethod::ConjugateGradient => None,
        };
        Ok(Self {
            graph,
            shift,
            cfg,
            factor,
        })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Solves with a raw slice right-hand side; used by the iteration loops.
    pub(crate) fn solve_slice(&self, b: &[f64]) -> Result<Vec<f64>> {
        let g = self.graph;
        let tol = self.cfg.rel_tol * (1.0 + sup_norm(b));
        let rhs: Vec<f64> = b.iter().zip(g.measure()).map(|(bi, m)| -bi * m).collect();
        let x = match &self.factor {
            Some(chol) => {
                let mut x = chol.solve(&DVector::from_column_slice(&rhs));
                // one step of iterative refinement
                let mut ax = vec![0.0; g.n()];
                apply_symmetric(g, self.shift, x.as_slice(), &mut ax);
                let r = DVector::from_iterator(g.n(), rhs.iter().zip(&ax).map(|(p, q)| p - q));
                x += chol.solve(&r);
                x.as_slice().to_vec()
            }
            None => conjugate_gradient(g, self.shift, &rhs, tol, self.cfg.max_iter_for(g.n()), false)?,
        };
        let res = shifted_residual(g, self.shift, &x, b);
        if !(res <= tol) {
            return Err(Error::NoConvergence {
                iterations: self.cfg.max_iter_for(g.n()),
                residual: res,
            });
        }
        Ok(x)
    }

    pub fn solve(&self, b: &VertexField) -> Result<VertexField> {
        self.graph.check_aligned(b)?;
        VertexField::new(self.solve_slice(b.as_slice())?)
    }
}

/// Solves `(Δ − K) x = b` for `K > 0`.
pub fn solve_shifted(g: &WeightedGraph, shift: f64, b: &VertexField, cfg: &LinearSolveConfig) -> Result<VertexField> {
    ShiftedSolver::new(g, shift, *cfg)?.solve(b)
}

/// Solves `Δ x = f` with `∫x dμ = 0`. `f` must integrate to zero up to
/// `1e-10 · Vol · (1 + ‖f‖∞)`; it is projected onto the mean-zero subspace
/// before solving.
pub fn solve_poisson_mean_zero(g: &WeightedGraph, f: &VertexField, cfg: &LinearSolveConfig) -> Result<VertexField> {
    cfg.validate()?;
    g.check_aligned(f)?;
    let n = g.n();
    let vol = g.volume();
    let integral = g.integrate(f)?;
    if integral.abs() > 1e-10 * vol * (1.0 + f.sup_norm()) {
        return Err(Error::Incompatible { integral });
    }
    let f: Vec<f64> = f.iter().map(|v| v - integral / vol).collect();
    let mu = g.measure();
    let rhs: Vec<f64> = f.iter().zip(mu).map(|(fi, m)| -fi * m).collect();
    let tol = cfg.rel_tol * (1.0 + sup_norm(&f));

    let mut x = match cfg.method_for(n) {
        SolveMethod::Direct => {
            // Row 0 is implied by the others (the rows of L sum to zero), so
            // it is replaced by the gauge constraint ∫x dμ = 0.
            let mut a = assemble(g, 0.0);
            let mut b = DVector::from_column_slice(&rhs);
            for (j, m) in mu.iter().enumerate() {
                a[(0, j)] = *m;
            }
            b[0] = 0.0;
            let lu = LU::new(a);
            let x = lu.solve(&b).ok_or(Error::Disconnected)?;
            x.as_slice().to_vec()
        }
        SolveMethod::ConjugateGradient => conjugate_gradient(g, 0.0, &rhs, tol, cfg.max_iter_for(n), true)?,
    };
    let mean = g.integrate_slice(&x) / vol;
    x.iter_mut().for_each(|v| *v -= mean);

    let lx = g.laplacian_vec(&x);
    let res = lx.iter().zip(&f).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if !(res <= tol) {
        return Err(Error::NoConvergence {
            iterations: cfg.max_iter_for(n),
            residual: res,
        });
    }
    VertexField::new(x)
}
