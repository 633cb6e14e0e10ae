//! Connected finite weighted graphs and the discrete calculus on them.
//!
//! With edge weights `w_xy = w_yx > 0` and a vertex measure `mu > 0`:
//!
//! ```text
//! Δu(x)      = 1/mu(x) · Σ_{y~x} w_xy (u(y) − u(x))
//! Γ(u,v)(x)  = 1/(2 mu(x)) · Σ_{y~x} w_xy (u(y) − u(x)) (v(y) − v(x))
//! |∇u|(x)    = sqrt(Γ(u,u)(x))
//! ∫ u dμ     = Σ_x mu(x) u(x)
//! ```
//!
//! Neighbor lists are kept in ascending vertex order, so every sum is
//! evaluated in a fixed order and results are bit-reproducible.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::VertexField;

/// `(x, y, w)` with `x < y` after normalisation.
pub type Edge = (usize, usize, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    /// Undirected edges, each stored once with `x < y`, sorted.
    edges: Vec<(usize, usize, f64)>,
    mu: Vec<f64>,
    // CSR adjacency, neighbors ascending.
    offsets: Vec<usize>,
    nbrs: Vec<usize>,
    wts: Vec<f64>,
}

/// On-disk graph representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
}

impl WeightedGraph {
    /// Builds a graph, checking every structural invariant: positive finite
    /// weights and measure, no self-loops, each undirected edge given once,
    /// connectivity.
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>, mu: Option<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mu = mu.unwrap_or_else(|| vec![1.0; n]);
        if mu.len() != n {
            return Err(Error::InvalidGraph(format!(
                "measure has {} entries, expected {n}",
                mu.len()
            )));
        }
        if let Some((x, m)) = mu.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidGraph(format!("mu({x}) = {m} is not positive")));
        }

        let mut seen = BTreeSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for &(x, y, w) in &edges {
            for v in [x, y] {
                if v >= n {
                    return Err(Error::VertexOutOfRange { vertex: v, n });
                }
            }
            if x == y {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {x}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidGraph(format!("edge ({x},{y}) has weight {w}")));
            }
            let (a, b) = if x < y { (x, y) } else { (y, x) };
            if !seen.insert((a, b)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a},{b})")));
            }
            normalized.push((a, b, w));
        }
        normalized.sort_by_key(|&(a, b, _)| (a, b));

        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(a, b, w) in &normalized {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut nbrs = Vec::with_capacity(2 * normalized.len());
        let mut wts = Vec::with_capacity(2 * normalized.len());
        offsets.push(0);
        for list in &mut adj {
            list.sort_by_key(|&(y, _)| y);
            for &(y, w) in list.iter() {
                nbrs.push(y);
                wts.push(w);
            }
            offsets.push(nbrs.len());
        }

        let g = Self {
            n,
            edges: normalized,
            mu,
            offsets,
            nbrs,
            wts,
        };
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = queue.pop_front() {
            for (y, _) in self.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    queue.push_back(y);
                }
            }
        }
        count == self.n
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn measure(&self) -> &[f64] {
        &self.mu
    }

    pub fn min_measure(&self) -> f64 {
        self.mu.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Neighbors of `x` with edge weights, ascending by index.
    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[x]..self.offsets[x + 1];
        self.nbrs[r.clone()].iter().copied().zip(self.wts[r].iter().copied())
    }

    /// Weighted degree `Σ_{y~x} w_xy`.
    pub fn degree(&self, x: usize) -> f64 {
        self.neighbors(x).map(|(_, w)| w).sum()
    }

    pub fn check_aligned(&self, u: &VertexField) -> Result<()> {
        if u.len() != self.n {
            return Err(Error::Misaligned {
                expected: self.n,
                found: u.len(),
            });
        }
        Ok(())
    }

    pub fn check_vertex(&self, p: usize) -> Result<()> {
        if p >= self.n {
            return Err(Error::VertexOutOfRange { vertex: p, n: self.n });
        }
        Ok(())
    }

    pub(crate) fn laplacian_into(&self, u: &[f64], out: &mut [f64]) {
        for x in 0..self.n {
            let ux = u[x];
            let s: f64 = self.neighbors(x).map(|(y, w)| w * (u[y] - ux)).sum();
            out[x] = s / self.mu[x];
        }
    }

    pub(crate) fn laplacian_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.laplacian_into(u, &mut out);
        out
    }

    pub fn laplacian(&self, u: &VertexField) -> Result<VertexField> {
        self.check_aligned(u)?;
        VertexField::new(self.laplacian_vec(u.as_slice()))
    }

    pub fn gradient_form(&self, u: &VertexField, v: &VertexField) -> Result<VertexField> {
        self.check_aligned(u)?;
        self.check_aligned(v)?;
        let (u, v) = (u.as_slice(), v.as_slice());
        let out = (0..self.n)
            .map(|x| {
                let s: f64 = self
                    .neighbors(x)
                    .map(|(y, w)| w * (u[y] - u[x]) * (v[y] - v[x]))
                    .sum();
                s / (2.0 * self.mu[x])
            })
            .collect();
        VertexField::new(out)
    }

    pub fn gradient_norm(&self, u: &VertexField) -> Result<VertexField> {
        self.gradient_form(u, u)?.map(f64::sqrt)
    }

    /// `∫|∇u|² dμ`, i.e. `Σ_{edges} w_xy (u(y) − u(x))²`.
    pub fn dirichlet_energy(&self, u: &VertexField) -> Result<f64> {
        self.check_aligned(u)?;
        Ok(self.dirichlet_sum(u.as_slice()))
    }

    pub(crate) fn dirichlet_sum(&self, u: &[f64]) -> f64 {
        self.edges.iter().map(|&(x, y, w)| w * (u[y] - u[x]).powi(2)).sum()
    }

    pub fn integrate(&self, u: &VertexField) -> Result<f64> {
        self.check_aligned(u)?;
        Ok(self.integrate_slice(u.as_slice()))
    }

    pub(crate) fn integrate_slice(&self, u: &[f64]) -> f64 {
        self.mu.iter().zip(u).map(|(m, v)| m * v).sum()
    }

    pub fn volume(&self) -> f64 {
        self.mu.iter().sum()
    }

    pub fn norm_p(&self, u: &VertexField, p: f64) -> Result<f64> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("norm exponent p = {p} must be >= 1")));
        }
        self.check_aligned(u)?;
        let s: f64 = self.mu.iter().zip(u.iter()).map(|(m, v)| m * v.abs().powf(p)).sum();
        Ok(s.powf(1.0 / p))
    }

    /// `sqrt(∫(|∇u|² + u²) dμ)`.
    pub fn sobolev_norm(&self, u: &VertexField) -> Result<f64> {
        let grad = self.dirichlet_energy(u)?;
        let l2: f64 = self.mu.iter().zip(u.iter()).map(|(m, v)| m * v * v).sum();
        Ok((grad + l2).sqrt())
    }

    /// Unit point mass at `p`: `1/mu(p)` at `p`, zero elsewhere, so that its
    /// integral is exactly one.
    pub fn dirac_mass(&self, p: usize) -> Result<VertexField> {
        self.check_vertex(p)?;
        let mut v = vec![0.0; self.n];
        v[p] = 1.0 / self.mu[p];
        VertexField::new(v)
    }

    /// `u − (∫u dμ)/Vol`.
    pub fn project_mean_zero(&self, u: &VertexField) -> Result<VertexField> {
        let mean = self.integrate(u)? / self.volume();
        u.shift(-mean)
    }

    /// Same graph with the vertices relabelled: old vertex `x` becomes `perm[x]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n || perm.iter().collect::<BTreeSet<_>>().len() != self.n {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
        let edges = self.edges.iter().map(|&(x, y, w)| (perm[x], perm[y], w)).collect();
        let mut mu = vec![0.0; self.n];
        for (x, &m) in self.mu.iter().enumerate() {
            mu[perm[x]] = m;
        }
        Self::new(self.n, edges, Some(mu))
    }

    /// Returns a copy with every edge weight multiplied by `t`.
    pub fn scaled_weights(&self, t: f64) -> Result<Self> {
        let edges = self.edges.iter().map(|&(x, y, w)| (x, y, w * t)).collect();
        Self::new(self.n, edges, Some(self.mu.clone()))
    }

    /// Returns a copy with the measure multiplied by `t`.
    pub fn scaled_measure(&self, t: f64) -> Result<Self> {
        let mu = self.mu.iter().map(|m| m * t).collect();
        Self::new(self.n, self.edges.clone(), Some(mu))
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            n: self.n,
            edges: self.edges.clone(),
            mu: Some(self.mu.clone()),
        }
    }

    pub fn from_json(json: GraphJson) -> Result<Self> {
        Self::new(json.n, json.edges, json.mu)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(serde_json::from_str(s)?)
    }

    /// Normalized compact JSON: edges with `x < y` in lexicographic order and
    /// the measure always written out.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("graph serialization cannot fail")
    }

    /// Hex SHA-256 of the normalized JSON form.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json_string().as_bytes()))
    }
}

/// Built-in graph families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GraphKind {
    /// `m × k` grid with 4-neighbor wraparound.
    TorusGrid { m: usize, k: usize },
    Complete { n: usize },
    Cycle { n: usize },
    Path { n: usize },
    /// Random spanning tree plus each remaining pair with probability
    /// `extra_edge_prob`; weights and measure drawn uniformly from `[0.5, 2]`.
    Random { n: usize, extra_edge_prob: f64, seed: u64 },
}

/// Overrides applied to the unit-weight, unit-measure families.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphOptions {
    pub weight: Option<f64>,
    pub mu: Option<Vec<f64>>,
}

pub fn generate_graph(kind: GraphKind, opts: &GraphOptions) -> Result<WeightedGraph> {
    let w = opts.weight.unwrap_or(1.0);
    let (n, edges, mu): (usize, Vec<Edge>, Option<Vec<f64>>) = match kind {
        GraphKind::TorusGrid { m, k } => {
            if m * k < 2 {
                return Err(Error::InvalidParameter(format!("torus grid {m}x{k} has fewer than 2 vertices")));
            }
            let id = |i: usize, j: usize| i * k + j;
            let mut edges = Vec::with_capacity(2 * m * k);
            for i in 0..m {
                for j in 0..k {
                    edges.push((id(i, j), id((i + 1) % m, j), w));
                    edges.push((id(i, j), id(i, (j + 1) % k), w));
                }
            }
            (m * k, edges, None)
        }
        GraphKind::Complete { n } => {
            check_order(n)?;
            let edges = (0..n)
                .flat_map(|x| ((x + 1)..n).map(move |y| (x, y, w)))
                .collect();
            (n, edges, None)
        }
        GraphKind::Cycle { n } => {
            check_order(n)?;
            (n, (0..n).map(|x| (x, (x + 1) % n, w)).collect(), None)
        }
        GraphKind::Path { n } => {
            check_order(n)?;
            (n, (0..n - 1).map(|x| (x, x + 1, w)).collect(), None)
        }
        GraphKind::Random {
            n,
            extra_edge_prob,
            seed,
        } => {
            check_order(n)?;
            if !(0.0..=1.0).contains(&extra_edge_prob) {
                return Err(Error::InvalidParameter(format!(
                    "edge probability {extra_edge_prob} outside [0, 1]"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pairs = BTreeSet::new();
            let mut edges = Vec::new();
            for y in 1..n {
                let x = rng.gen_range(0..y);
                pairs.insert((x, y));
                edges.push((x, y, w * rng.gen_range(0.5..2.0)));
            }
            for x in 0..n {
                for y in (x + 1)..n {
                    if !pairs.contains(&(x, y)) && rng.gen_bool(extra_edge_prob) {
                        edges.push((x, y, w * rng.gen_range(0.5..2.0)));
                    }
                }
            }
            let mu = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
            (n, edges, Some(mu))
        }
    };
    WeightedGraph::new(n, edges, opts.mu.clone().or(mu))
}

fn check_order(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("graph order {n} < 2")));
    }
    Ok(())
}
