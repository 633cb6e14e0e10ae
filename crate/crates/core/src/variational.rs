//! The energy functional
//!
//! ```text
//! I(v) = ∫ [ ½|∇v|² + (λ/6)(e^{u₀+v} − 1)^6 + (4πN/Vol)·v ] dμ
//! ```
//!
//! whose critical points are the solutions of the reduced equation, plus
//! descent to a local minimizer and a mountain-pass search for a second
//! critical point above it.
//!
//! Gradients are taken with respect to the plain coordinate inner product,
//! so the gradient at `x` carries the factor `μ(x)`. All directional
//! derivatives and step lengths use the plain dot product for the same
//! reason.
//!
//! If the minimizer is not a strict local minimum, the functional has a
//! continuum of critical points at the minimizer's energy level. That case is
//! not searched for: the mountain pass then collapses onto the minimizer and
//! reports `Stalled`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chern_simons::{nonlinearity, nonlinearity_prime, SolveStatus, VortexProblem};
use crate::error::{Error, Result};
use crate::field::{sup_norm, VertexField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    /// Sup-norm target for the (μ-scaled) gradient.
    pub grad_tol: f64,
    pub max_steps: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub init_step: f64,
    /// Each trial step starts no longer than this in sup norm. The energy is
    /// unbounded below (constants → −∞), so an unrestricted first step from
    /// a point near the top of the well can leave the well entirely.
    pub max_displacement: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-9,
            max_steps: 200_000,
            armijo_c: 1e-4,
            backtrack: 0.5,
            init_step: 1.0,
            max_displacement: 0.25,
        }
    }
}

impl DescentConfig {
    fn validate(&self) -> Result<()> {
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::InvalidParameter(format!("armijo_c = {} not in (0, 1)", self.armijo_c)));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter(format!("backtrack = {} not in (0, 1)", self.backtrack)));
        }
        if !(self.grad_tol > 0.0 && self.init_step > 0.0 && self.max_displacement > 0.0) || self.max_steps == 0 {
            return Err(Error::InvalidParameter(
                "grad_tol, init_step, max_displacement and max_steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountainPassConfig {
    pub path_points: usize,
    /// Gradient sup-norm at the highest path node that counts as critical.
    pub deform_tol: f64,
    pub max_deform: usize,
    /// First trial for the endpoint shift `c₀` (doubled until the energy drop
    /// reaches 1).
    pub c0_search: f64,
    /// Residual required of the polished second solution.
    pub residual_tol: f64,
}

impl Default for MountainPassConfig {
    fn default() -> Self {
        Self {
            path_points: 51,
            deform_tol: 1e-7,
            max_deform: 50_000,
            c0_search: 1.0,
            residual_tol: 1e-10,
        }
    }
}

fn check_inputs(prob: &VortexProblem, u0: &VertexField, v: &VertexField) -> Result<()> {
    prob.graph().check_aligned(u0)?;
    prob.graph().check_aligned(v)
}

fn energy_slice(prob: &VortexProblem, u0: &[f64], v: &[f64]) -> Result<f64> {
    let g = prob.graph();
    let lam = prob.lambda();
    let c = prob.background_density();
    let pot: f64 = g
        .measure()
        .iter()
        .zip(u0.iter().zip(v))
        .map(|(m, (a, b))| m * (lam / 6.0 * (a + b).exp_m1().powi(6) + c * b))
        .sum();
    let e = 0.5 * g.dirichlet_sum(v) + pot;
    if !e.is_finite() {
        return Err(Error::EnergyOverflow);
    }
    Ok(e)
}

pub fn energy(prob: &VortexProblem, u0: &VertexField, v: &VertexField) -> Result<f64> {
    check_inputs(prob, u0, v)?;
    energy_slice(prob, u0.as_slice(), v.as_slice())
}

fn gradient_slice(prob: &VortexProblem, u0: &[f64], v: &[f64]) -> Vec<f64> {
    let g = prob.graph();
    let lam = prob.lambda();
    let c = prob.background_density();
    let lv = g.laplacian_vec(v);
    g.measure()
        .iter()
        .zip(lv)
        .zip(u0.iter().zip(v))
        .map(|((m, l), (a, b))| m * (-l + lam * nonlinearity(a + b) + c))
        .collect()
}

/// `∂I/∂v(x) = μ(x)·[−Δv + λF(u₀+v) + 4πN/Vol](x)`.
pub fn energy_gradient(prob: &VortexProblem, u0: &VertexField, v: &VertexField) -> Result<VertexField> {
    check_inputs(prob, u0, v)?;
    VertexField::new(gradient_slice(prob, u0.as_slice(), v.as_slice()))
}

/// `I(v + d) − I(v)`, assembled term by term so that small differences do
/// not cancel against the full energy.
fn energy_difference_slice(prob: &VortexProblem, u0: &[f64], v: &[f64], d: &[f64]) -> Result<f64> {
    let g = prob.graph();
    let lam = prob.lambda();
    let c = prob.background_density();
    let quad: f64 = g
        .edges()
        .iter()
        .map(|&(x, y, w)| {
            let a = v[y] - v[x];
            let e = d[y] - d[x];
            0.5 * w * e * (2.0 * a + e)
        })
        .sum();
    let mut pot = 0.0;
    for (i, m) in g.measure().iter().enumerate() {
        let y = u0[i] + v[i];
        let p = y.exp_m1();
        let q = (y + d[i]).exp_m1();
        let dq = y.exp() * d[i].exp_m1();
        let s = q.powi(5) + q.powi(4) * p + q.powi(3) * p.powi(2) + q * q * p.powi(3) + q * p.powi(4) + p.powi(5);
        pot += m * (lam / 6.0 * dq * s + c * d[i]);
    }
    let diff = quad + pot;
    if !diff.is_finite() {
        return Err(Error::EnergyOverflow);
    }
    Ok(diff)
}

pub fn energy_difference(prob: &VortexProblem, u0: &VertexField, v: &VertexField, d: &VertexField) -> Result<f64> {
    check_inputs(prob, u0, v)?;
    prob.graph().check_aligned(d)?;
    energy_difference_slice(prob, u0.as_slice(), v.as_slice(), d.as_slice())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Minimum {
    pub v: VertexField,
    pub energy: f64,
    pub steps: usize,
    pub grad_norm: f64,
    /// Every accepted step lowered the energy.
    pub energy_monotone: bool,
}

/// Backtracking-Armijo steepest descent from `start`.
pub fn minimize(prob: &VortexProblem, u0: &VertexField, start: &VertexField, cfg: &DescentConfig) -> Result<Minimum> {
    cfg.validate()?;
    check_inputs(prob, u0, start)?;
    let u0s = u0.as_slice();
    let mut v = start.as_slice().to_vec();
    let mut e = energy_slice(prob, u0s, &v)?;
    let mut monotone = true;
    let mut trial = vec![0.0; v.len()];

    for step in 0..=cfg.max_steps {
        let grad = gradient_slice(prob, u0s, &v);
        let gn = sup_norm(&grad);
        if gn <= cfg.grad_tol {
            return Ok(Minimum {
                v: VertexField::new(v)?,
                energy: e,
                steps: step,
                grad_norm: gn,
                energy_monotone: monotone,
            });
        }
        if step == cfg.max_steps {
            return Err(Error::DescentBudget {
                steps: step,
                grad_norm: gn,
                last: Box::new(VertexField::new(v)?),
            });
        }
        let gg = dot(&grad, &grad);
        let mut alpha = cfg.init_step.min(cfg.max_displacement / gn);
        loop {
            for (t, g) in trial.iter_mut().zip(&grad) {
                *t = -alpha * g;
            }
            // overflow means the step is far too long
            let de = energy_difference_slice(prob, u0s, &v, &trial).unwrap_or(f64::INFINITY);
            if de <= -cfg.armijo_c * alpha * gg {
                for (x, d) in v.iter_mut().zip(&trial) {
                    *x += d;
                }
                let e_new = energy_slice(prob, u0s, &v)?;
                if de > 0.0 {
                    monotone = false;
                }
                e = e_new;
                break;
            }
            alpha *= cfg.backtrack;
            if alpha * sup_norm(&grad) < 1e-300 {
                return Err(Error::DescentBudget {
                    steps: step,
                    grad_norm: gn,
                    last: Box::new(VertexField::new(v)?),
                });
            }
        }
    }
    unreachable!()
}

/// Damped Newton iteration on the reduced residual
/// `Δv − λF(u₀+v) − 4πN/Vol`, with dense LU on the Jacobian
/// `Δ − λ diag F'(u₀+v)`. Stops when the residual reaches `tol` or stops
/// decreasing. Returns the polished field and its residual.
pub fn newton_polish(prob: &VortexProblem, u0: &VertexField, v: &VertexField, tol: f64, max_iter: usize) -> Result<(VertexField, f64)> {
    check_inputs(prob, u0, v)?;
    let g = prob.graph();
    let n = g.n();
    let lam = prob.lambda();
    let c = prob.background_density();
    let u0 = u0.as_slice();
    let residual = |w: &[f64]| -> Vec<f64> {
        let lw = g.laplacian_vec(w);
        (0..n).map(|i| lw[i] - lam * nonlinearity(u0[i] + w[i]) - c).collect()
    };

    let mut lap = DMatrix::zeros(n, n);
    for &(x, y, w) in g.edges() {
        let (mx, my) = (g.measure()[x], g.measure()[y]);
        lap[(x, y)] += w / mx;
        lap[(y, x)] += w / my;
        lap[(x, x)] -= w / mx;
        lap[(y, y)] -= w / my;
    }

    let mut v = v.as_slice().to_vec();
    let mut r = residual(&v);
    let mut rn = sup_norm(&r);
    for _ in 0..max_iter {
        if rn <= tol {
            break;
        }
        let mut jac = lap.clone();
        for i in 0..n {
            jac[(i, i)] -= lam * nonlinearity_prime(u0[i] + v[i]);
        }
        let Some(delta) = jac.lu().solve(&DVector::from_column_slice(&r)) else {
            break;
        };
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-6 {
            let cand: Vec<f64> = v.iter().zip(delta.iter()).map(|(a, d)| a - t * d).collect();
            let rc = residual(&cand);
            let rcn = sup_norm(&rc);
            if rcn.is_finite() && rcn < rn {
                v = cand;
                r = rc;
                rn = rcn;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((VertexField::new(v)?, rn))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MountainPassReport {
    pub status: SolveStatus,
    /// The second solution, present iff converged.
    pub solution_v: Option<VertexField>,
    /// Highest path node at termination (after polishing when a critical
    /// point was reached).
    pub candidate: VertexField,
    pub energy: f64,
    pub energy_min: f64,
    /// `I(candidate) − I(v_min)`.
    pub energy_gap: f64,
    pub c0: f64,
    pub deformations: usize,
    pub residual: f64,
    pub distance_from_min: f64,
    /// Maximal path energy after each deformation.
    pub max_energy_trace: Vec<f64>,
}

/// Path `γ(t_i)`, nodes stored row-wise.
struct Path {
    nodes: Vec<Vec<f64>>,
}

impl Path {
    fn linear(start: &[f64], c0: f64, points: usize) -> Self {
        let nodes = (0..points)
            .map(|i| {
                let t = i as f64 / (points - 1) as f64;
                start.iter().map(|a| a - t * c0).collect()
            })
            .collect();
        Self { nodes }
    }

    /// Re-spaces the interior nodes at equal Euclidean arclength, keeping the
    /// endpoints fixed.
    fn respace(&mut self) {
        let p = self.nodes.len();
        let mut cum = vec![0.0; p];
        for i in 1..p {
            let d: f64 = self.nodes[i]
                .iter()
                .zip(&self.nodes[i - 1])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            cum[i] = cum[i - 1] + d;
        }
        let total = cum[p - 1];
        if !(total > 0.0) {
            return;
        }
        let mut fresh = Vec::with_capacity(p);
        fresh.push(self.nodes[0].clone());
        let mut seg = 0;
        for k in 1..p - 1 {
            let s = total * k as f64 / (p - 1) as f64;
            while seg + 1 < p - 1 && cum[seg + 1] < s {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
            let (a, b) = (&self.nodes[seg], &self.nodes[seg + 1]);
            fresh.push(a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect());
        }
        fresh.push(self.nodes[p - 1].clone());
        self.nodes = fresh;
    }
}

/// Numerical mountain pass between a local minimizer `v_min` and the
/// lower-energy point `v_min − c₀`.
///
/// The highest interior node of a discretised path is pushed down the energy
/// gradient with an Armijo step and the path is re-spaced, until the gradient
/// at the highest node falls below `deform_tol`. That node is then polished
/// by damped Newton. The result is a second solution if its residual meets
/// `residual_tol` and it is more than `10³ · deform_tol` away from `v_min`.
pub fn mountain_pass(
    prob: &VortexProblem,
    u0: &VertexField,
    v_min: &VertexField,
    cfg: &MountainPassConfig,
    dcfg: &DescentConfig,
) -> Result<MountainPassReport> {
    dcfg.validate()?;
    check_inputs(prob, u0, v_min)?;
    if cfg.path_points < 3 {
        return Err(Error::InvalidParameter("path_points must be >= 3".into()));
    }
    if !(cfg.c0_search > 0.0 && cfg.deform_tol > 0.0 && cfg.residual_tol > 0.0) {
        return Err(Error::InvalidParameter("c0_search, deform_tol, residual_tol must be > 0".into()));
    }
    let u0s = u0.as_slice();
    let vm = v_min.as_slice();
    let gmin = sup_norm(&gradient_slice(prob, u0s, vm));
    if gmin > dcfg.grad_tol {
        return Err(Error::NotCritical {
            grad_norm: gmin,
            tol: dcfg.grad_tol,
        });
    }
    let e_min = energy_slice(prob, u0s, vm)?;

    // Endpoint: I(v_min − c₀) ≤ I(v_min) − 1. The linear term alone drops by
    // 4πN·c₀, so the doubling terminates.
    let mut c0 = cfg.c0_search;
    loop {
        let shift = vec![-c0; vm.len()];
        if energy_difference_slice(prob, u0s, vm, &shift)? <= -1.0 {
            break;
        }
        c0 *= 2.0;
        if !c0.is_finite() {
            return Err(Error::InvalidParameter("no endpoint with lower energy found".into()));
        }
    }

    let mut path = Path::linear(vm, c0, cfg.path_points);
    let p = cfg.path_points;
    let mut trace = Vec::new();
    let mut deformations = 0;
    let mut critical = None;
    let collapse_tol = 1e3 * cfg.deform_tol;

    while deformations < cfg.max_deform {
        // highest interior node
        let mut best = (1, f64::NEG_INFINITY);
        for i in 1..p - 1 {
            let e = energy_slice(prob, u0s, &path.nodes[i]).unwrap_or(f64::INFINITY);
            if e > best.1 {
                best = (i, e);
            }
        }
        let (j, e_top) = best;
        trace.push(e_top);
        let node = path.nodes[j].clone();
        let dist = sup_norm(&node.iter().zip(vm).map(|(a, b)| a - b).collect::<Vec<_>>());
        if e_top <= e_min + 1e-12 * (1.0 + e_min.abs()) && dist <= collapse_tol {
            break;
        }
        let grad = gradient_slice(prob, u0s, &node);
        let gn = sup_norm(&grad);
        if gn <= cfg.deform_tol {
            critical = Some(node);
            break;
        }
        let gg = dot(&grad, &grad);
        let mut alpha = dcfg.init_step;
        let mut moved = false;
        while alpha * gn > 1e-300 {
            let d: Vec<f64> = grad.iter().map(|g| -alpha * g).collect();
            let de = energy_difference_slice(prob, u0s, &node, &d).unwrap_or(f64::INFINITY);
            if de <= -dcfg.armijo_c * alpha * gg {
                path.nodes[j] = node.iter().zip(&d).map(|(a, b)| a + b).collect();
                moved = true;
                break;
            }
            alpha *= dcfg.backtrack;
        }
        deformations += 1;
        if !moved {
            break;
        }
        path.respace();
    }

    let (candidate, residual) = match &critical {
        Some(node) => {
            let (v, r) = newton_polish(prob, u0, &VertexField::new(node.clone())?, 0.01 * cfg.residual_tol, 50)?;
            (v, r)
        }
        None => {
            let j = (1..p - 1)
                .max_by(|&a, &b| {
                    let ea = energy_slice(prob, u0s, &path.nodes[a]).unwrap_or(f64::INFINITY);
                    let eb = energy_slice(prob, u0s, &path.nodes[b]).unwrap_or(f64::INFINITY);
                    ea.total_cmp(&eb)
                })
                .unwrap_or(1);
            let v = VertexField::new(path.nodes[j].clone())?;
            let r = sup_norm(&crate::chern_simons::residual_reduced(prob, u0, &v)?.into_vec());
            (v, r)
        }
    };
    let energy = energy_slice(prob, u0s, candidate.as_slice())?;
    let distance = sup_norm(&candidate.sub(v_min)?.into_vec());
    let converged = critical.is_some() && residual <= cfg.residual_tol && distance > collapse_tol;
    Ok(MountainPassReport {
        status: if converged { SolveStatus::Converged } else { SolveStatus::Stalled },
        solution_v: converged.then(|| candidate.clone()),
        candidate,
        energy,
        energy_min: e_min,
        energy_gap: energy - e_min,
        c0,
        deformations,
        residual,
        distance_from_min: distance,
        max_energy_trace: trace,
    })
}
