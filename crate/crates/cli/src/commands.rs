use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use csgraph::chern_simons::lambda_bound;
use csgraph::critical::{CriticalSummary, SWEEP_CSV_HEADER};
use csgraph::{
    compute_u0, energy, find_critical_lambda, generate_graph, minimize, monotone_iterate, mountain_pass,
    residual_reduced, sweep_lambda, verify_solution, DescentConfig, Error, GraphKind, GraphOptions, MountainPassConfig,
    SolveStatus, SweepOptions, VertexField, Vortex, VortexProblem, WeightedGraph,
};

use crate::args::{
    Cli, Command, CriticalArgs, GraphArgs, Kind, Mode, MountainArgs, ProblemArgs, SolveArgs, SweepArgs, VerifyArgs,
};
use crate::output::{emit, sidecar_path, to_json, RunContext, RunManifest, SolutionRecord, Trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_STALLED: i32 = 3;

pub fn exit_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::Diverged => EXIT_DIVERGED,
        SolveStatus::Stalled => EXIT_STALLED,
    }
}

/// Worst status first: stalled, then diverged.
fn combine(a: SolveStatus, b: SolveStatus) -> SolveStatus {
    use SolveStatus::*;
    match (a, b) {
        (Stalled, _) | (_, Stalled) => Stalled,
        (Diverged, _) | (_, Diverged) => Diverged,
        _ => Converged,
    }
}

struct Session {
    seed: u64,
    record_timing: bool,
    started: Instant,
}

impl Session {
    fn manifest(&self, command: &str, config: serde_json::Value, graph_hash: Option<&str>) -> RunManifest {
        let mut m = RunManifest::new(command, self.seed, config);
        if let Some(h) = graph_hash {
            m.input_hashes.insert("graph".into(), h.into());
        }
        if self.record_timing {
            m.wall_ms = self.started.elapsed().as_millis() as u64;
        }
        m
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    let session = Session {
        seed: cli.seed,
        record_timing: cli.record_timing,
        started: Instant::now(),
    };
    match cli.command {
        Command::Graph(a) => cmd_graph(&session, a),
        Command::Solve(a) => cmd_solve(&session, a),
        Command::Verify(a) => cmd_verify(&session, a),
        Command::Critical(a) => cmd_critical(&session, a),
        Command::Sweep(a) => cmd_sweep(&session, a),
        Command::Mountain(a) => cmd_mountain(&session, a),
    }
}

fn load_graph(path: &Path) -> Result<WeightedGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(WeightedGraph::from_json_str(&text)?)
}

fn load_problem(p: &ProblemArgs) -> Result<(WeightedGraph, String)> {
    let g = load_graph(&p.graph)?;
    let hash = g.content_hash();
    Ok((g, hash))
}

fn vortex_pairs(v: &[Vortex]) -> Vec<(usize, u32)> {
    v.iter().map(|v| (v.vertex, v.multiplicity)).collect()
}

fn total_charge(v: &[Vortex]) -> u64 {
    v.iter().map(|v| v.multiplicity as u64).sum()
}

fn cmd_graph(s: &Session, a: GraphArgs) -> Result<i32> {
    let (g, config) = match (&a.from, a.kind) {
        (Some(path), _) => (load_graph(path)?, json!({ "from": "file" })),
        (None, Some(kind)) => {
            let need = |v: Option<usize>, name: &str| v.ok_or_else(|| anyhow!("--{name} is required for this kind"));
            let kind = match kind {
                Kind::Torus => GraphKind::TorusGrid {
                    m: need(a.m, "m")?,
                    k: need(a.k, "k")?,
                },
                Kind::Complete => GraphKind::Complete { n: need(a.n, "n")? },
                Kind::Cycle => GraphKind::Cycle { n: need(a.n, "n")? },
                Kind::Path => GraphKind::Path { n: need(a.n, "n")? },
                Kind::Random => GraphKind::Random {
                    n: need(a.n, "n")?,
                    extra_edge_prob: a.p,
                    seed: s.seed,
                },
            };
            let n = match kind {
                GraphKind::TorusGrid { m, k } => m * k,
                GraphKind::Complete { n } | GraphKind::Cycle { n } | GraphKind::Path { n } => n,
                GraphKind::Random { n, .. } => n,
            };
            let opts = GraphOptions {
                weight: a.weight,
                mu: a.mu.map(|m| vec![m; n]),
            };
            let config = json!({ "kind": kind, "weight": a.weight, "mu": a.mu });
            (generate_graph(kind, &opts)?, config)
        }
        (None, None) => bail!("either --kind or --from is required"),
    };
    emit(a.out.as_deref(), &to_json(&g.to_json())?)?;
    if let Some(out) = &a.out {
        let m = s.manifest("graph", config, Some(&g.content_hash()));
        emit(Some(&sidecar_path(out)), &to_json(&m)?)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    manifest: RunManifest,
    #[serde(skip_serializing_if = "Option::is_none")]
    critical: Option<&'a CriticalSummary>,
    solutions: Vec<SolutionRecord>,
}

fn minimizer_record(
    prob: &VortexProblem,
    ctx: &RunContext,
    descent: &DescentConfig,
    tol: f64,
) -> Result<(SolutionRecord, Option<VertexField>)> {
    let start = ctx.u0.map(|a| -a)?;
    match minimize(prob, &ctx.u0, &start, descent) {
        Ok(m) => {
            let mut rec = SolutionRecord::new("minimizer", SolveStatus::Converged, ctx, &m.v);
            rec.residual = residual_reduced(prob, &ctx.u0, &m.v)?.sup_norm();
            rec.energy = Some(m.energy);
            rec.iterations = m.steps;
            rec.verification = Some(verify_solution(prob, &ctx.u0.add(&m.v)?, tol)?);
            Ok((rec, Some(m.v)))
        }
        Err(Error::DescentBudget { steps, last, .. }) => {
            let mut rec = SolutionRecord::new("minimizer", SolveStatus::Stalled, ctx, &last);
            rec.residual = residual_reduced(prob, &ctx.u0, &last)?.sup_norm();
            rec.energy = energy(prob, &ctx.u0, &last).ok();
            rec.iterations = steps;
            Ok((rec, None))
        }
        Err(e) => Err(e.into()),
    }
}

fn check_verified(rec: &SolutionRecord) -> Result<()> {
    if let Some(v) = &rec.verification {
        if !v.passed() {
            bail!("{} solution failed verification: {:?}", rec.kind, v);
        }
    }
    Ok(())
}

fn cmd_solve(s: &Session, a: SolveArgs) -> Result<i32> {
    let (g, hash) = load_problem(&a.problem)?;
    let vortices = a.problem.vortices.clone();
    let lambda = match (a.lambda, a.bound_multiple) {
        (Some(l), _) => l,
        (None, Some(m)) => m * lambda_bound(&g, total_charge(&vortices)),
        (None, None) => unreachable!("clap group"),
    };
    let prob = VortexProblem::new(&g, lambda, vortices.clone())?;
    let scheme = a.scheme.config();
    let descent = DescentConfig::default();
    let u0 = compute_u0(&prob, &scheme.linear)?;
    let ctx = RunContext {
        graph_hash: hash.clone(),
        lambda,
        vortices: vortices.clone(),
        u0,
    };
    let mut solutions = Vec::new();
    let mut status = SolveStatus::Converged;
    if matches!(a.mode, Mode::Iterate | Mode::Both) {
        let rep = monotone_iterate(&prob, &ctx.u0, &scheme)?;
        let v = rep.solution_v.as_ref().unwrap_or(&rep.last_iterate);
        let mut rec = SolutionRecord::new("maximal", rep.status, &ctx, v);
        rec.residual = rep.final_residual();
        rec.iterations = rep.iterations;
        rec.monotonicity_certified = Some(rep.monotonicity_certified);
        rec.divergence = rep.divergence;
        rec.min_value_trace = Some(Trace::thin(&rep.min_value_trace));
        if rep.is_converged() {
            rec.energy = Some(energy(&prob, &ctx.u0, v)?);
            rec.verification = Some(verify_solution(&prob, &ctx.u0.add(v)?, scheme.residual_tol)?);
        }
        status = combine(status, rep.status);
        solutions.push(rec);
    }
    if matches!(a.mode, Mode::Minimize | Mode::Both) {
        let (rec, _) = minimizer_record(&prob, &ctx, &descent, scheme.residual_tol.max(1e-8))?;
        status = combine(status, rec.status);
        solutions.push(rec);
    }
    for rec in &solutions {
        check_verified(rec)?;
    }
    let config = json!({
        "lambda": lambda,
        "bound_multiple": a.bound_multiple,
        "vortices": vortex_pairs(&vortices),
        "mode": a.mode,
        "scheme": scheme,
        "descent": descent,
    });
    let file = SolutionFile {
        manifest: s.manifest("solve", config, Some(&hash)),
        critical: None,
        solutions,
    };
    emit(a.out.as_deref(), &to_json(&file)?)?;
    Ok(exit_code(status))
}

#[derive(Serialize)]
struct VerifyResult {
    kind: String,
    status: String,
    checked: bool,
    passed: bool,
    u0_defect: f64,
    verification: Option<csgraph::Verification>,
}

fn cmd_verify(s: &Session, a: VerifyArgs) -> Result<i32> {
    let g = load_graph(&a.graph)?;
    let hash = g.content_hash();
    let text = fs::read_to_string(&a.solution).with_context(|| format!("reading {}", a.solution.display()))?;
    let doc: serde_json::Value = serde_json::from_str(&text)?;
    let records = doc
        .get("solutions")
        .and_then(|v| v.as_array())
        .ok_or_else(|| anyhow!("no \"solutions\" array in {}", a.solution.display()))?;
    let mut results = Vec::new();
    let mut all_ok = true;
    for r in records {
        let field = |k: &str| r.get(k).ok_or_else(|| anyhow!("solution record without {k:?}"));
        if field("graph_hash")?.as_str() != Some(hash.as_str()) {
            bail!("solution was computed on a different graph");
        }
        let kind = field("kind")?.as_str().unwrap_or_default().to_string();
        let status = field("status")?.as_str().unwrap_or_default().to_string();
        let lambda: f64 = serde_json::from_value(field("lambda")?.clone())?;
        let pairs: Vec<(usize, u32)> = serde_json::from_value(field("vortices")?.clone())?;
        let stored_u0 = VertexField::new(serde_json::from_value(field("u0")?.clone())?)?;
        let v = VertexField::new(serde_json::from_value(field("v")?.clone())?)?;
        let vortices = pairs
            .into_iter()
            .map(|(vertex, multiplicity)| Vortex { vertex, multiplicity })
            .collect();
        let prob = VortexProblem::new(&g, lambda, vortices)?;
        let u0 = compute_u0(&prob, &Default::default())?;
        let u0_defect = u0.sub(&stored_u0)?.sup_norm();
        let checked = status == "converged";
        let (passed, verification) = if checked {
            let ver = verify_solution(&prob, &u0.add(&v)?, a.tol)?;
            (ver.passed() && u0_defect <= 1e-10, Some(ver))
        } else {
            (true, None)
        };
        all_ok &= passed;
        results.push(VerifyResult {
            kind,
            status,
            checked,
            passed,
            u0_defect,
            verification,
        });
    }
    let out = json!({
        "manifest": s.manifest("verify", json!({ "tol": a.tol }), Some(&hash)),
        "results": results,
    });
    emit(a.out.as_deref(), &to_json(&out)?)?;
    if !all_ok {
        bail!("verification failed");
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CriticalFile {
    manifest: RunManifest,
    /// States that `[lambda_lo, lambda_hi]` is a numerical bracket only.
    label: &'static str,
    critical: CriticalSummary,
}

const BRACKET_LABEL: &str = "numerical bracket for the critical coupling; nonexistence at lambda_lo is certified by the divergence criteria of the monotone scheme only";

fn cmd_critical(s: &Session, a: CriticalArgs) -> Result<i32> {
    let (g, hash) = load_problem(&a.problem)?;
    let scheme = a.scheme.config();
    let est = find_critical_lambda(&g, &a.problem.vortices, a.rel_width, &scheme)?;
    let config = json!({
        "vortices": vortex_pairs(&a.problem.vortices),
        "rel_width": a.rel_width,
        "scheme": scheme,
    });
    let file = CriticalFile {
        manifest: s.manifest("critical", config, Some(&hash)),
        label: BRACKET_LABEL,
        critical: est.summary(),
    };
    emit(a.out.as_deref(), &to_json(&file)?)?;
    Ok(EXIT_OK)
}

fn cmd_sweep(s: &Session, a: SweepArgs) -> Result<i32> {
    let (g, hash) = load_problem(&a.problem)?;
    let vortices = &a.problem.vortices;
    let lambdas: Vec<f64> = if a.lambdas.is_empty() {
        let bound = lambda_bound(&g, total_charge(vortices));
        a.bound_multiples.iter().map(|m| m * bound).collect()
    } else {
        a.lambdas.clone()
    };
    if a.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let opts = SweepOptions {
        scheme: a.scheme.config(),
        descent: DescentConfig::default(),
        mountain: a.mountain.then(MountainPassConfig::default),
        jobs: a.jobs,
        record_timing: s.record_timing,
    };
    let rows = sweep_lambda(&g, vortices, &lambdas, &opts)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_CSV_HEADER)?;
    for r in &rows {
        w.write_record(r.csv_record())?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("csv: {e}"))?;
    emit(a.out.as_deref(), std::str::from_utf8(&bytes)?)?;
    if let Some(out) = &a.out {
        // jobs does not affect the numbers, so it stays out of the snapshot
        let config = json!({
            "vortices": vortex_pairs(vortices),
            "lambdas": lambdas,
            "bound_multiples": a.bound_multiples,
            "scheme": opts.scheme,
            "descent": opts.descent,
            "mountain": opts.mountain,
        });
        let m = s.manifest("sweep", config, Some(&hash));
        emit(Some(&sidecar_path(out)), &to_json(&m)?)?;
    }
    Ok(EXIT_OK)
}

fn cmd_mountain(s: &Session, a: MountainArgs) -> Result<i32> {
    let (g, hash) = load_problem(&a.problem)?;
    let vortices = a.problem.vortices.clone();
    let scheme = a.scheme.config();
    let mut critical = None;
    let lambda = match (a.lambda, a.bound_multiple, a.critical_multiple) {
        (Some(l), ..) => l,
        (None, Some(m), _) => m * lambda_bound(&g, total_charge(&vortices)),
        (None, None, Some(m)) => {
            let est = find_critical_lambda(&g, &vortices, a.rel_width, &scheme)?;
            let lam = m * est.lambda_hi;
            critical = Some(est.summary());
            lam
        }
        _ => unreachable!("clap group"),
    };
    let prob = VortexProblem::new(&g, lambda, vortices.clone())?;
    let u0 = compute_u0(&prob, &scheme.linear)?;
    let ctx = RunContext {
        graph_hash: hash.clone(),
        lambda,
        vortices: vortices.clone(),
        u0,
    };
    let descent = DescentConfig::default();
    let mcfg = MountainPassConfig {
        path_points: a.path_points,
        max_deform: a.max_deform,
        residual_tol: scheme.residual_tol,
        ..Default::default()
    };
    let verify_tol = scheme.residual_tol.max(1e-8);
    let (min_rec, vmin) = minimizer_record(&prob, &ctx, &descent, verify_tol)?;
    let mut solutions = vec![min_rec];
    let status = match vmin {
        None => SolveStatus::Stalled,
        Some(vmin) => {
            let mp = mountain_pass(&prob, &ctx.u0, &vmin, &mcfg, &descent)?;
            let v = mp.solution_v.as_ref().unwrap_or(&mp.candidate);
            let mut rec = SolutionRecord::new("mountain_pass", mp.status, &ctx, v);
            rec.residual = mp.residual;
            rec.energy = Some(mp.energy);
            rec.energy_gap = Some(mp.energy_gap);
            rec.iterations = mp.deformations;
            if mp.status == SolveStatus::Converged {
                rec.verification = Some(verify_solution(&prob, &ctx.u0.add(v)?, verify_tol)?);
            }
            solutions.push(rec);
            mp.status
        }
    };
    for rec in &solutions {
        check_verified(rec)?;
    }
    let config = json!({
        "lambda": lambda,
        "vortices": vortex_pairs(&vortices),
        "bound_multiple": a.bound_multiple,
        "critical_multiple": a.critical_multiple,
        "rel_width": a.rel_width,
        "scheme": scheme,
        "descent": descent,
        "mountain": mcfg,
    });
    let file = SolutionFile {
        manifest: s.manifest("mountain", config, Some(&hash)),
        critical: critical.as_ref(),
        solutions,
    };
    emit(a.out.as_deref(), &to_json(&file)?)?;
    Ok(exit_code(status))
}
