//! Problem setup and the monotone iteration.
//!
//! Writing `u = u₀ + v`, where `u₀` is the mean-zero solution of
//!
//! ```text
//! Δu₀ = −4πN/Vol + 4π Σ_s n_s δ_{p_s},
//! ```
//!
//! the equation becomes `Δv = λ F(u₀ + v) + 4πN/Vol` with
//! `F(y) = e^y (e^y − 1)^5`. The scheme
//!
//! ```text
//! (Δ − K) W_n = λ F(u₀ + W_{n−1}) − K W_{n−1} + 4πN/Vol,   W₀ = −u₀,   K ≥ λ
//! ```
//!
//! produces a pointwise non-increasing sequence bounded below by every
//! subsolution, hence by every solution; when it converges the limit is the
//! maximal solution.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VertexField;
use crate::graph::WeightedGraph;
use crate::linear::{solve_poisson_mean_zero, LinearSolveConfig, ShiftedSolver};

pub const FOUR_PI: f64 = 4.0 * PI;

/// `min F = F(−ln 6) = −5⁵/6⁶`.
pub const F_MIN: f64 = -3125.0 / 46656.0;

/// `6⁶/5⁵`, the factor in the necessary condition on λ.
pub const BOUND_FACTOR: f64 = 46656.0 / 3125.0;

/// Below this exponent `e^y` is treated as zero.
const EXP_FLOOR: f64 = -700.0;

/// Slack allowed in the pointwise monotonicity check `W_n ≤ W_{n−1} + tol`.
pub const MONOTONE_TOL: f64 = 1e-10;

/// `F(y) = e^y (e^y − 1)^5`. Returns exactly 0 for `y < −700`.
pub fn nonlinearity(y: f64) -> f64 {
    if y < EXP_FLOOR {
        return 0.0;
    }
    y.exp() * y.exp_m1().powi(5)
}

/// `F'(y) = e^y (e^y − 1)^4 (6 e^y − 1)`.
pub fn nonlinearity_prime(y: f64) -> f64 {
    if y < EXP_FLOOR {
        return 0.0;
    }
    let s = y.exp();
    s * y.exp_m1().powi(4) * (6.0 * s - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vortex {
    pub vertex: usize,
    pub multiplicity: u32,
}

impl Vortex {
    pub fn simple(vertex: usize) -> Self {
        Self { vertex, multiplicity: 1 }
    }
}

/// Coupling, vortex data and host graph. Each vortex vertex appears once;
/// repeated vortices are expressed through the multiplicity (all
/// multiplicities 1 is the distinct-vertex case).
#[derive(Debug, Clone)]
pub struct VortexProblem<'g> {
    graph: &'g WeightedGraph,
    lambda: f64,
    vortices: Vec<Vortex>,
}

impl<'g> VortexProblem<'g> {
    pub fn new(graph: &'g WeightedGraph, lambda: f64, vortices: Vec<Vortex>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be > 0")));
        }
        if vortices.is_empty() {
            return Err(Error::InvalidParameter("at least one vortex is required".into()));
        }
        let mut seen = vec![false; graph.n()];
        for v in &vortices {
            graph.check_vertex(v.vertex)?;
            if v.multiplicity == 0 {
                return Err(Error::InvalidParameter(format!("vortex at {} has multiplicity 0", v.vertex)));
            }
            if std::mem::replace(&mut seen[v.vertex], true) {
                return Err(Error::InvalidParameter(format!(
                    "vertex {} listed twice; use a multiplicity",
                    v.vertex
                )));
            }
        }
        Ok(Self {
            graph,
            lambda,
            vortices,
        })
    }

    /// Same graph and vortices at another coupling.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.graph, lambda, self.vortices.clone())
    }

    pub fn graph(&self) -> &'g WeightedGraph {
        self.graph
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn vortices(&self) -> &[Vortex] {
        &self.vortices
    }

    /// `N = Σ n_s`.
    pub fn total_charge(&self) -> u64 {
        self.vortices.iter().map(|v| u64::from(v.multiplicity)).sum()
    }

    /// The constant `4πN / Vol(V)`.
    pub fn background_density(&self) -> f64 {
        FOUR_PI * self.total_charge() as f64 / self.graph.volume()
    }

    /// `4π Σ n_s δ_{p_s}` as a field.
    pub fn vortex_source(&self) -> Vec<f64> {
        let mu = self.graph.measure();
        let mut s = vec![0.0; self.graph.n()];
        for v in &self.vortices {
            s[v.vertex] += FOUR_PI * f64::from(v.multiplicity) / mu[v.vertex];
        }
        s
    }

    /// `(6⁶/5⁵) · 4πN / Vol(V)`: no solution exists below this coupling.
    pub fn necessary_lambda_bound(&self) -> f64 {
        lambda_bound(self.graph, self.total_charge())
    }
}

/// `(6⁶/5⁵) · 4πN / Vol(V)`.
pub fn lambda_bound(g: &WeightedGraph, total_charge: u64) -> f64 {
    BOUND_FACTOR * FOUR_PI * total_charge as f64 / g.volume()
}

/// The mean-zero background `u₀` with `Δu₀ = −4πN/Vol + 4π Σ n_s δ_{p_s}`.
pub fn compute_u0(prob: &VortexProblem, cfg: &LinearSolveConfig) -> Result<VertexField> {
    let g = prob.graph();
    let c = prob.background_density();
    let rhs: Vec<f64> = prob.vortex_source().iter().map(|s| s - c).collect();
    let integral = g.integrate_slice(&rhs);
    let scale = FOUR_PI * prob.total_charge() as f64;
    if integral.abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::Incompatible { integral });
    }
    solve_poisson_mean_zero(g, &VertexField::new(rhs)?, cfg)
}

fn reduced_residual_vec(prob: &VortexProblem, u0: &[f64], v: &[f64]) -> Vec<f64> {
    let lam = prob.lambda();
    let c = prob.background_density();
    let lv = prob.graph().laplacian_vec(v);
    lv.iter()
        .zip(u0.iter().zip(v))
        .map(|(l, (a, b))| l - lam * nonlinearity(a + b) - c)
        .collect()
}

/// Pointwise `Δv − λF(u₀ + v) − 4πN/Vol`.
pub fn residual_reduced(prob: &VortexProblem, u0: &VertexField, v: &VertexField) -> Result<VertexField> {
    let g = prob.graph();
    g.check_aligned(u0)?;
    g.check_aligned(v)?;
    VertexField::new(reduced_residual_vec(prob, u0.as_slice(), v.as_slice()))
}

/// Default slack for [`is_subsolution`].
pub const SUBSOLUTION_SLACK: f64 = 1e-12;

/// `Δw ≥ λF(u₀ + w) + 4πN/Vol` at every vertex, up to a slack of `1e-12`.
pub fn is_subsolution(prob: &VortexProblem, u0: &VertexField, w: &VertexField) -> Result<bool> {
    is_subsolution_with_slack(prob, u0, w, SUBSOLUTION_SLACK)
}

pub fn is_subsolution_with_slack(prob: &VortexProblem, u0: &VertexField, w: &VertexField, slack: f64) -> Result<bool> {
    Ok(residual_reduced(prob, u0, w)?.iter().all(|&r| r >= -slack))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    /// Shift `K`; `None` means `K = λ`.
    pub shift: Option<f64>,
    pub residual_tol: f64,
    pub max_iter: usize,
    /// Divergence is declared once `min_x W_n` drops below this.
    pub divergence_floor: f64,
    /// Number of consecutive iterates on which the nonexistence certificate
    /// must hold before divergence is declared.
    pub stall_window: usize,
    pub linear: LinearSolveConfig,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            shift: None,
            residual_tol: 1e-10,
            max_iter: 100_000,
            divergence_floor: -1e3,
            stall_window: 50,
            linear: LinearSolveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    Diverged,
    Stalled,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Diverged => "diverged",
            SolveStatus::Stalled => "stalled",
        }
    }
}

/// Why an iteration was declared divergent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum Divergence {
    /// `min_x W_n` fell below the configured floor.
    BelowFloor { min_value: f64 },
    /// Every solution `v*` satisfies `v* ≤ W_n`, so `|λ∫F(u₀+v*) dμ|` is at
    /// most `λ Σ_x μ(x) max_{y ≤ u₀(x)+W_n(x)} |F(y)|`. Once that bound is
    /// below `4πN` the integrated equation `λ∫F(u) dμ = −4πN` cannot hold.
    NoSolutionCertificate { bound: f64, required: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Present iff converged.
    pub solution_v: Option<VertexField>,
    pub last_iterate: VertexField,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Every step satisfied `W_n ≤ W_{n−1} + 1e-10` pointwise.
    pub monotonicity_certified: bool,
    /// `min_x W_n` for `n = 0, 1, ...`.
    pub min_value_trace: Vec<f64>,
    pub divergence: Option<Divergence>,
    /// Set when a lower barrier was supplied: every iterate stayed above it
    /// (minus `1e-8`).
    pub barrier_respected: Option<bool>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn is_converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// `max_{y ≤ m} |F(y)|`.
fn max_abs_f_below(m: f64) -> f64 {
    if m >= -(6f64.ln()) {
        -F_MIN
    } else {
        -nonlinearity(m)
    }
}

/// Runs the monotone scheme from `W₀ = −u₀`.
pub fn monotone_iterate(prob: &VortexProblem, u0: &VertexField, cfg: &SchemeConfig) -> Result<SolveReport> {
    monotone_iterate_with_barrier(prob, u0, cfg, None)
}

/// As [`monotone_iterate`], additionally checking every iterate against a
/// lower barrier (normally a subsolution).
pub fn monotone_iterate_with_barrier(
    prob: &VortexProblem,
    u0: &VertexField,
    cfg: &SchemeConfig,
    barrier: Option<&VertexField>,
) -> Result<SolveReport> {
    let g = prob.graph();
    g.check_aligned(u0)?;
    if let Some(b) = barrier {
        g.check_aligned(b)?;
    }
    let lam = prob.lambda();
    let shift = cfg.shift.unwrap_or(lam);
    if !(shift >= lam) {
        return Err(Error::InvalidParameter(format!("shift K = {shift} must be >= lambda = {lam}")));
    }
    if !(cfg.residual_tol > 0.0) || cfg.max_iter == 0 || cfg.stall_window == 0 {
        return Err(Error::InvalidParameter(
            "scheme needs residual_tol > 0, max_iter >= 1, stall_window >= 1".into(),
        ));
    }

    let solver = ShiftedSolver::new(g, shift, cfg.linear)?;
    let c = prob.background_density();
    let required = FOUR_PI * prob.total_charge() as f64 * (1.0 - 1e-9);
    let mu = g.measure();
    let u0 = u0.as_slice();
    let n = g.n();

    let mut w: Vec<f64> = u0.iter().map(|a| -a).collect();
    let mut min_trace = vec![min_of(&w)];
    let mut residuals = Vec::new();
    let mut monotone = true;
    let mut above_barrier = barrier.map(|_| true);
    let mut certified_run = 0usize;
    let mut rhs = vec![0.0; n];

    let mut status = SolveStatus::Stalled;
    let mut divergence = None;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        for i in 0..n {
            rhs[i] = lam * nonlinearity(u0[i] + w[i]) - shift * w[i] + c;
        }
        let next = solver.solve_slice(&rhs)?;
        iterations += 1;

        if next.iter().zip(&w).any(|(a, b)| *a > b + MONOTONE_TOL) {
            monotone = false;
        }
        w = next;
        if let (Some(flag), Some(b)) = (above_barrier.as_mut(), barrier) {
            if w.iter().zip(b.iter()).any(|(a, lo)| *a < lo - 1e-8) {
                *flag = false;
            }
        }
        let min_w = min_of(&w);
        min_trace.push(min_w);
        let res = crate::field::sup_norm(&reduced_residual_vec(prob, u0, &w));
        residuals.push(res);

        if res <= cfg.residual_tol {
            status = SolveStatus::Converged;
            break;
        }
        if min_w < cfg.divergence_floor {
            status = SolveStatus::Diverged;
            divergence = Some(Divergence::BelowFloor { min_value: min_w });
            break;
        }
        let bound: f64 = lam
            * mu
                .iter()
                .zip(u0.iter().zip(&w))
                .map(|(m, (a, b))| m * max_abs_f_below(a + b))
                .sum::<f64>();
        if bound < required {
            certified_run += 1;
            if certified_run >= cfg.stall_window {
                status = SolveStatus::Diverged;
                divergence = Some(Divergence::NoSolutionCertificate { bound, required });
                break;
            }
        } else {
            certified_run = 0;
        }
    }

    let last = VertexField::new(w)?;
    Ok(SolveReport {
        status,
        solution_v: (status == SolveStatus::Converged).then(|| last.clone()),
        last_iterate: last,
        iterations,
        residual_history: residuals,
        monotonicity_certified: monotone,
        min_value_trace: min_trace,
        divergence,
        barrier_respected: above_barrier,
    })
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Checks on a candidate solution `u = u₀ + v` of the original equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    /// `‖Δu − λF(u) − 4πΣ n_s δ_{p_s}‖∞`.
    pub residual: f64,
    pub residual_ok: bool,
    pub max_u: f64,
    /// `u < 0` everywhere.
    pub negative_ok: bool,
    /// `λ∫F(u) dμ + 4πN`.
    pub identity_defect: f64,
    pub identity_ok: bool,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.residual_ok && self.negative_ok && self.identity_ok
    }
}

pub const IDENTITY_TOL: f64 = 1e-8;

pub fn verify_solution(prob: &VortexProblem, u: &VertexField, residual_tol: f64) -> Result<Verification> {
    let g = prob.graph();
    g.check_aligned(u)?;
    let lam = prob.lambda();
    let lu = g.laplacian_vec(u.as_slice());
    let src = prob.vortex_source();
    let residual = lu
        .iter()
        .zip(u.iter())
        .zip(&src)
        .fold(0.0f64, |m, ((l, &x), s)| m.max((l - lam * nonlinearity(x) - s).abs()));
    let max_u = u.max();
    let integral: f64 = g.measure().iter().zip(u.iter()).map(|(m, &x)| m * nonlinearity(x)).sum();
    let identity_defect = lam * integral + FOUR_PI * prob.total_charge() as f64;
    Ok(Verification {
        residual,
        residual_ok: residual <= residual_tol,
        max_u,
        negative_ok: max_u < 0.0,
        identity_defect,
        identity_ok: identity_defect.abs() <= IDENTITY_TOL,
    })
}

/// Outcome of comparing maximal solutions at two couplings `λ₁ ≥ λ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum LambdaComparison {
    /// Both converged; `max_excess = max_x (v_{λ₂} − v_{λ₁})(x)`.
    Compared { holds: bool, max_excess: f64 },
    /// At least one of the two runs did not converge.
    NotApplicable {
        status_high: SolveStatus,
        status_low: SolveStatus,
    },
}

impl LambdaComparison {
    pub fn holds(&self) -> Option<bool> {
        match self {
            LambdaComparison::Compared { holds, .. } => Some(*holds),
            LambdaComparison::NotApplicable { .. } => None,
        }
    }
}

/// Runs the scheme at `lambda_high ≥ lambda_low` and checks
/// `v_{λ_low} ≤ v_{λ_high} + 1e-8` pointwise.
pub fn compare_lambda_monotonicity(
    prob: &VortexProblem,
    lambda_high: f64,
    lambda_low: f64,
    cfg: &SchemeConfig,
) -> Result<LambdaComparison> {
    if !(lambda_high >= lambda_low) {
        return Err(Error::InvalidParameter(format!(
            "expected lambda_high = {lambda_high} >= lambda_low = {lambda_low}"
        )));
    }
    let high = prob.with_lambda(lambda_high)?;
    let low = prob.with_lambda(lambda_low)?;
    let u0 = compute_u0(&high, &cfg.linear)?;
    let rh = monotone_iterate(&high, &u0, cfg)?;
    let rl = monotone_iterate(&low, &u0, cfg)?;
    match (&rh.solution_v, &rl.solution_v) {
        (Some(vh), Some(vl)) => {
            let max_excess = vl.max_excess_over(vh);
            Ok(LambdaComparison::Compared {
                holds: max_excess <= 1e-8,
                max_excess,
            })
        }
        _ => Ok(LambdaComparison::NotApplicable {
            status_high: rh.status,
            status_low: rl.status,
        }),
    }
}
