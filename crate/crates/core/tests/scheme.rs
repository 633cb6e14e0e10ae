mod common;

use common::{fixed_graphs, random_graph};
use csgraph::chern_simons::{lambda_bound, monotone_iterate_with_barrier, F_MIN, MONOTONE_TOL};
use csgraph::{
    compute_u0, is_subsolution, monotone_iterate, nonlinearity, nonlinearity_prime, verify_solution, LinearSolveConfig,
    SchemeConfig, SolveStatus, VertexField, Vortex, VortexProblem, WeightedGraph,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::f64::consts::PI;

// Mean-zero Poisson solution via the dense pseudo-inverse of the symmetric form.
fn u0_oracle(g: &WeightedGraph, vortices: &[Vortex]) -> Vec<f64> {
    let n = g.n();
    let mu = g.measure();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for &(x, y, w) in g.edges() {
        l[(x, x)] += w;
        l[(y, y)] += w;
        l[(x, y)] -= w;
        l[(y, x)] -= w;
    }
    let total: f64 = vortices.iter().map(|v| v.multiplicity as f64).sum();
    let mut rhs = nalgebra::DVector::from_fn(n, |x, _| 4.0 * PI * total / g.volume() * mu[x]);
    for v in vortices {
        rhs[v.vertex] -= 4.0 * PI * v.multiplicity as f64;
    }
    // L u = −M f, with f = −c + 4πΣδ
    let u = l.pseudo_inverse(1e-12).unwrap() * rhs;
    let mean = (0..n).map(|x| u[x] * mu[x]).sum::<f64>() / g.volume();
    (0..n).map(|x| u[x] - mean).collect()
}

#[test]
fn u0_on_k2_is_minus_pi_pi() {
    let g = &fixed_graphs()[0].1;
    let prob = VortexProblem::new(g, 1.0, vec![Vortex::simple(0)]).unwrap();
    let u0 = compute_u0(&prob, &LinearSolveConfig::default()).unwrap();
    assert!((u0[0] + PI).abs() <= 1e-12 && (u0[1] - PI).abs() <= 1e-12);
}

#[test]
fn u0_matches_pseudo_inverse_on_fixed_graphs() {
    for (name, g) in fixed_graphs() {
        let vortices = vec![Vortex::simple(0), Vortex { vertex: 1, multiplicity: 2 }];
        let prob = VortexProblem::new(&g, 1.0, vortices.clone()).unwrap();
        let u0 = compute_u0(&prob, &LinearSolveConfig::default()).unwrap();
        let oracle = u0_oracle(&g, &vortices);
        for x in 0..g.n() {
            assert!((u0[x] - oracle[x]).abs() <= 1e-10, "{name} at {x}");
        }
        assert!(g.integrate(&u0).unwrap().abs() <= 1e-12 * g.volume(), "{name}");
    }
}

#[test]
fn f_minimum_by_grid_and_golden_section() {
    let (mut best_y, mut best) = (0.0, f64::INFINITY);
    let mut y = -10.0;
    while y <= 2.0 {
        let f = nonlinearity(y);
        if f < best {
            best = f;
            best_y = y;
        }
        y += 1e-3;
    }
    let (mut a, mut b) = (best_y - 1e-3, best_y + 1e-3);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if nonlinearity(c) < nonlinearity(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let y_star = 0.5 * (a + b);
    assert!((nonlinearity(y_star) - (-3125.0 / 46656.0)).abs() <= 1e-12);
    assert!((F_MIN + 3125.0 / 46656.0).abs() == 0.0);
    assert!((y_star + 6f64.ln()).abs() <= 1e-6);
}

#[test]
fn derivative_sign_bracket_on_unit_interval() {
    for lam in [0.1, 1.0, 93.8, 1e4] {
        for k in [lam, 1.5 * lam, 10.0 * lam] {
            for i in 1..=100_000 {
                let s = i as f64 / 100_000.0;
                let poly = lam * s * (s - 1.0).powi(4) * (6.0 * s - 1.0);
                assert!(poly - k <= 0.0);
                let via = lam * nonlinearity_prime(s.ln());
                assert!((via - poly).abs() <= 1e-12 * lam.max(1.0));
            }
        }
    }
}

fn converged_case(g: &WeightedGraph, mult: f64) -> (VortexProblem<'_>, VertexField, csgraph::SolveReport) {
    let prob = VortexProblem::new(g, 1.0, vec![Vortex::simple(0)]).unwrap();
    let prob = prob.with_lambda(mult * prob.necessary_lambda_bound()).unwrap();
    let u0 = compute_u0(&prob, &LinearSolveConfig::default()).unwrap();
    let rep = monotone_iterate(&prob, &u0, &SchemeConfig::default()).unwrap();
    (prob, u0, rep)
}

#[test]
fn converged_solutions_are_negative_and_satisfy_identity() {
    for (name, g) in fixed_graphs() {
        for mult in [4.0, 10.0, 40.0] {
            let (prob, u0, rep) = converged_case(&g, mult);
            assert_eq!(rep.status, SolveStatus::Converged, "{name} x{mult}");
            assert!(rep.monotonicity_certified);
            assert!(rep.final_residual() <= 1e-10);
            let u = u0.add(rep.solution_v.as_ref().unwrap()).unwrap();
            let ver = verify_solution(&prob, &u, 1e-8).unwrap();
            assert!(ver.passed(), "{name} x{mult}: {ver:?}");
            let integral: f64 = g.measure().iter().zip(u.iter()).map(|(m, &y)| m * nonlinearity(y)).sum();
            assert!((prob.lambda() * integral + 4.0 * PI).abs() <= 1e-8);
        }
    }
}

#[test]
fn below_bound_diverges_with_decreasing_minimum() {
    for (name, g) in fixed_graphs() {
        for mult in [0.5, 0.9] {
            let (_, _, rep) = converged_case(&g, mult);
            assert_eq!(rep.status, SolveStatus::Diverged, "{name} x{mult}");
            assert!(rep.min_value_trace.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOL));
            assert!(rep.divergence.is_some());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chain_is_monotone_and_bounded_below_by_subsolution(
        n in 2usize..12, p in 0.0f64..0.5, seed in any::<u64>(), mult in 20.0f64..60.0,
    ) {
        let g = random_graph(n, p, seed);
        let bound = lambda_bound(&g, 1);
        let base = VortexProblem::new(&g, 1.0, vec![Vortex::simple(seed as usize % n)]).unwrap();
        let u0 = compute_u0(&base, &LinearSolveConfig::default()).unwrap();
        let cfg = SchemeConfig::default();
        let low = base.with_lambda(0.5 * mult * bound).unwrap();
        let low_rep = monotone_iterate(&low, &u0, &cfg).unwrap();
        prop_assume!(low_rep.is_converged());
        let barrier = low_rep.solution_v.unwrap();
        let high = base.with_lambda(mult * bound).unwrap();
        // a solution at a smaller coupling is a subsolution at a larger one
        prop_assert!(csgraph::chern_simons::is_subsolution_with_slack(&high, &u0, &barrier, 1e-9).unwrap());
        let rep = monotone_iterate_with_barrier(&high, &u0, &cfg, Some(&barrier)).unwrap();
        prop_assert_eq!(rep.status, SolveStatus::Converged);
        prop_assert!(rep.monotonicity_certified);
        prop_assert_eq!(rep.barrier_respected, Some(true));
        let v = rep.solution_v.unwrap();
        prop_assert!(barrier.max_excess_over(&v) <= 1e-8);
        prop_assert!(u0.add(&v).unwrap().max() < 0.0);
    }

    #[test]
    fn start_is_supersolution_and_chain_certified(n in 2usize..12, p in 0.0f64..0.5, seed in any::<u64>(), mult in 0.2f64..30.0) {
        let g = random_graph(n, p, seed);
        let base = VortexProblem::new(&g, 1.0, vec![Vortex::simple(0)]).unwrap();
        let prob = base.with_lambda(mult * base.necessary_lambda_bound()).unwrap();
        let u0 = compute_u0(&prob, &LinearSolveConfig::default()).unwrap();
        let cfg = SchemeConfig { max_iter: 200, ..Default::default() };
        let rep = monotone_iterate(&prob, &u0, &cfg).unwrap();
        prop_assert!(rep.monotonicity_certified);
        let start = u0.map(|a| -a).unwrap();
        let r = csgraph::residual_reduced(&prob, &u0, &start).unwrap();
        prop_assert!(r.max() <= 1e-9);
        prop_assert!(!is_subsolution(&prob, &u0, &start).unwrap());
    }
}
