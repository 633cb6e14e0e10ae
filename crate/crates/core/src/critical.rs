//! Bracketing the critical coupling and sweeping λ.
//!
//! The set of couplings with a solution is an interval unbounded above, and
//! its infimum λ̂ is at least the necessary bound `(6⁶/5⁵)·4πN/Vol`.
//! Nonexistence at a probe is only known operationally, through the
//! divergence criteria of the monotone scheme, so the result is a numerical
//! bracket `[lambda_lo, lambda_hi]`, never a point value.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chern_simons::{compute_u0, monotone_iterate, Divergence, SchemeConfig, SolveReport, SolveStatus, Vortex, VortexProblem};
use crate::error::{Error, Result};
use crate::field::VertexField;
use crate::graph::WeightedGraph;
use crate::variational::{energy, minimize, mountain_pass, DescentConfig, MountainPassConfig};

/// Probes above `CAP_FACTOR · bound` are not attempted.
pub const CAP_FACTOR: f64 = 1e6;

/// Relative offset of the first (diverging) probe below the bound.
const SEED_OFFSET: f64 = 1e-3;

/// A stalled probe is retried with this many times the iteration budget,
/// up to `STALL_RETRIES` times.
const STALL_BUDGET_GROWTH: usize = 4;
const STALL_RETRIES: usize = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Probe {
    pub lambda: f64,
    pub report: SolveReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalEstimate {
    /// Largest probed λ with certified divergence.
    pub lambda_lo: f64,
    /// Smallest probed λ with a converged solution.
    pub lambda_hi: f64,
    /// In probing order.
    pub probes: Vec<Probe>,
    pub bound: f64,
}

impl CriticalEstimate {
    pub fn relative_width(&self) -> f64 {
        (self.lambda_hi - self.lambda_lo) / self.lambda_hi
    }

    /// No converged probe lies below a diverged one.
    pub fn is_interval_consistent(&self) -> bool {
        let max_div = self
            .probes
            .iter()
            .filter(|p| p.report.status == SolveStatus::Diverged)
            .map(|p| p.lambda)
            .fold(f64::NEG_INFINITY, f64::max);
        self.probes
            .iter()
            .filter(|p| p.report.is_converged())
            .all(|p| p.lambda > max_div)
    }

    pub fn probe_at(&self, lambda: f64) -> Option<&Probe> {
        self.probes.iter().find(|p| p.lambda == lambda)
    }

    pub fn summary(&self) -> CriticalSummary {
        CriticalSummary {
            lambda_lo: self.lambda_lo,
            lambda_hi: self.lambda_hi,
            bound: self.bound,
            relative_width: self.relative_width(),
            probes: self.probes.iter().map(ProbeSummary::from).collect(),
        }
    }
}

/// Serialisable digest of a [`CriticalEstimate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalSummary {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub bound: f64,
    pub relative_width: f64,
    pub probes: Vec<ProbeSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub lambda: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub residual: f64,
    pub min_value: f64,
    pub monotonicity_certified: bool,
    pub divergence: Option<Divergence>,
}

impl From<&Probe> for ProbeSummary {
    fn from(p: &Probe) -> Self {
        Self {
            lambda: p.lambda,
            status: p.report.status,
            iterations: p.report.iterations,
            residual: p.report.final_residual(),
            min_value: p.report.min_value_trace.last().copied().unwrap_or(f64::NAN),
            monotonicity_certified: p.report.monotonicity_certified,
            divergence: p.report.divergence,
        }
    }
}

fn probe_log(probes: &[Probe]) -> Vec<(f64, &'static str)> {
    probes.iter().map(|p| (p.lambda, p.report.status.as_str())).collect()
}

fn probe(base: &VortexProblem, u0: &VertexField, lambda: f64, cfg: &SchemeConfig) -> Result<SolveReport> {
    let prob = base.with_lambda(lambda)?;
    let mut cfg = *cfg;
    let mut report = monotone_iterate(&prob, u0, &cfg)?;
    for _ in 0..STALL_RETRIES {
        if report.status != SolveStatus::Stalled {
            break;
        }
        cfg.max_iter = cfg.max_iter.saturating_mul(STALL_BUDGET_GROWTH);
        report = monotone_iterate(&prob, u0, &cfg)?;
    }
    Ok(report)
}

/// Bisection (on a log scale) for the critical coupling. The bracket is
/// seeded with a probe just below the necessary bound, then the upper end is
/// doubled from the bound until a probe converges.
pub fn find_critical_lambda(
    graph: &WeightedGraph,
    vortices: &[Vortex],
    rel_width: f64,
    cfg: &SchemeConfig,
) -> Result<CriticalEstimate> {
    if !(rel_width > 0.0 && rel_width < 1.0) {
        return Err(Error::InvalidParameter(format!("rel_width = {rel_width} not in (0, 1)")));
    }
    let base = VortexProblem::new(graph, 1.0, vortices.to_vec())?;
    let bound = base.necessary_lambda_bound();
    let u0 = compute_u0(&base, &cfg.linear)?;
    let mut probes = Vec::new();
    let run = |lambda: f64, probes: &mut Vec<Probe>| -> Result<SolveStatus> {
        let report = probe(&base, &u0, lambda, cfg)?;
        let status = report.status;
        probes.push(Probe { lambda, report });
        match status {
            SolveStatus::Stalled => Err(Error::InconclusiveProbe {
                lambda,
                log: probe_log(probes),
            }),
            s => Ok(s),
        }
    };

    let mut lo = bound * (1.0 - SEED_OFFSET);
    if run(lo, &mut probes)? == SolveStatus::Converged {
        // impossible below the necessary bound; treat as a solver fault
        return Err(Error::InconclusiveProbe {
            lambda: lo,
            log: probe_log(&probes),
        });
    }
    let cap = CAP_FACTOR * bound;
    let mut hi = bound;
    loop {
        if run(hi, &mut probes)? == SolveStatus::Converged {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > cap {
            return Err(Error::ProbeCap {
                cap,
                log: probe_log(&probes),
            });
        }
    }
    while (hi - lo) / hi > rel_width {
        let mid = (lo * hi).sqrt();
        match run(mid, &mut probes)? {
            SolveStatus::Converged => hi = mid,
            _ => lo = mid,
        }
    }
    Ok(CriticalEstimate {
        lambda_lo: lo,
        lambda_hi: hi,
        probes,
        bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub scheme: SchemeConfig,
    pub descent: DescentConfig,
    /// Run the mountain pass on converged rows.
    pub mountain: Option<MountainPassConfig>,
    pub jobs: usize,
    /// Fill `wall_ms`; otherwise it is written as 0 so output stays
    /// byte-reproducible.
    pub record_timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            scheme: SchemeConfig::default(),
            descent: DescentConfig::default(),
            mountain: None,
            jobs: 1,
            record_timing: false,
        }
    }
}

/// One λ of a sweep. `None` cells were not computed (non-converged rows or a
/// failed stage, explained in `note`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// `converged`, `diverged`, `stalled` or `error`.
    pub status: String,
    pub iterations: usize,
    pub residual: Option<f64>,
    pub min_u: Option<f64>,
    pub energy_maximal: Option<f64>,
    pub energy_min: Option<f64>,
    pub energy_gap: Option<f64>,
    pub wall_ms: u64,
    pub note: String,
    /// Maximal solution, not part of the CSV.
    #[serde(skip)]
    pub solution_v: Option<VertexField>,
}

pub const SWEEP_CSV_HEADER: [&str; 10] = [
    "lambda",
    "status",
    "iterations",
    "residual",
    "min_u",
    "energy_maximal",
    "energy_min",
    "energy_gap",
    "wall_ms",
    "note",
];

/// Fixed 17-significant-digit scientific formatting.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl SweepRow {
    pub fn csv_record(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
        vec![
            format_float(self.lambda),
            self.status.clone(),
            self.iterations.to_string(),
            opt(self.residual),
            opt(self.min_u),
            opt(self.energy_maximal),
            opt(self.energy_min),
            opt(self.energy_gap),
            self.wall_ms.to_string(),
            self.note.clone(),
        ]
    }
}

fn sweep_one(base: &VortexProblem, u0: &VertexField, lambda: f64, opts: &SweepOptions) -> SweepRow {
    let started = Instant::now();
    let mut row = SweepRow {
        lambda,
        status: "error".into(),
        iterations: 0,
        residual: None,
        min_u: None,
        energy_maximal: None,
        energy_min: None,
        energy_gap: None,
        wall_ms: 0,
        note: String::new(),
        solution_v: None,
    };
    let mut notes = Vec::new();
    let outcome = (|| -> Result<()> {
        let prob = base.with_lambda(lambda)?;
        let rep = monotone_iterate(&prob, u0, &opts.scheme)?;
        row.status = rep.status.as_str().into();
        row.iterations = rep.iterations;
        row.residual = rep.residual_history.last().copied();
        row.min_u = Some(u0.add(&rep.last_iterate)?.min());
        let Some(vmax) = rep.solution_v else {
            return Ok(());
        };
        row.energy_maximal = Some(energy(&prob, u0, &vmax)?);
        row.solution_v = Some(vmax);
        let start = u0.map(|a| -a)?;
        match minimize(&prob, u0, &start, &opts.descent) {
            Ok(m) => {
                row.energy_min = Some(m.energy);
                if let Some(mcfg) = &opts.mountain {
                    let mp = mountain_pass(&prob, u0, &m.v, mcfg, &opts.descent)?;
                    if mp.status == SolveStatus::Converged {
                        row.energy_gap = Some(mp.energy_gap);
                    } else {
                        notes.push(format!("mountain pass {}", mp.status.as_str()));
                    }
                }
            }
            Err(e) => notes.push(format!("minimize: {e}")),
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        notes.push(e.to_string());
    }
    row.note = notes.join("; ");
    if opts.record_timing {
        row.wall_ms = started.elapsed().as_millis() as u64;
    }
    row
}

/// Runs the scheme (and optionally descent and mountain pass) at each λ.
/// Rows come back in input order; failures are recorded in the row.
pub fn sweep_lambda(
    graph: &WeightedGraph,
    vortices: &[Vortex],
    lambdas: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    let base = VortexProblem::new(graph, 1.0, vortices.to_vec())?;
    let u0 = compute_u0(&base, &opts.scheme.linear)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    use rayon::prelude::*;
    Ok(pool.install(|| {
        lambdas
            .par_iter()
            .map(|&lambda| sweep_one(&base, &u0, lambda, opts))
            .collect()
    }))
}
