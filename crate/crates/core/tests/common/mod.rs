#![allow(dead_code)]

use csgraph::{generate_graph, GraphKind, GraphOptions, VertexField, WeightedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_graph(n: usize, p: f64, seed: u64) -> WeightedGraph {
    generate_graph(
        GraphKind::Random {
            n,
            extra_edge_prob: p,
            seed,
        },
        &GraphOptions::default(),
    )
    .unwrap()
}

pub fn fixed_graphs() -> Vec<(&'static str, WeightedGraph)> {
    let opts = GraphOptions::default();
    vec![
        ("k2", generate_graph(GraphKind::Complete { n: 2 }, &opts).unwrap()),
        ("k3", generate_graph(GraphKind::Complete { n: 3 }, &opts).unwrap()),
        ("torus4x4", generate_graph(GraphKind::TorusGrid { m: 4, k: 4 }, &opts).unwrap()),
        ("cycle8", generate_graph(GraphKind::Cycle { n: 8 }, &opts).unwrap()),
        ("random12", random_graph(12, 0.3, 0)),
    ]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn field(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> VertexField {
    VertexField::new((0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

pub fn dot_mu(g: &WeightedGraph, u: &VertexField, v: &VertexField) -> f64 {
    g.measure().iter().zip(u.iter().zip(v.iter())).map(|(m, (a, b))| m * a * b).sum()
}
