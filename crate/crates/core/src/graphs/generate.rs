use std::collections::HashSet;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FeatureKind, Graph, GraphKind, GraphModel};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// Disconnected WS or RR draws are redrawn on a fresh stream this many times.
pub const MAX_REGENERATIONS: usize = 100;
/// Pairing-model restarts allowed for one RR draw.
pub const RR_MAX_RESTARTS: usize = 10_000;

fn edge(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

fn watts_strogatz(n: usize, k: usize, p_e: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for u in 0..n {
        for j in 1..=k / 2 {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if !adj[u].contains(&v) || rng.random::<f64>() >= p_e {
                continue;
            }
            if adj[u].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.random_range(0..n);
                if w != u && !adj[u].contains(&w) {
                    break w;
                }
            };
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    let mut edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| adj[u].iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
        .collect();
    edges.sort_unstable();
    edges
}

/// Star on nodes `0..=m` centred at 0, then each new node attaches to `m`
/// distinct existing nodes chosen with probability proportional to degree + 1.
/// Yields `m * (n - m)` edges.
fn barabasi_albert(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..=m).map(|i| (0, i)).collect();
    let mut deg = vec![0usize; n];
    deg[0] = m;
    deg[1..=m].iter_mut().for_each(|d| *d = 1);
    for v in m + 1..n {
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        while chosen.len() < m {
            let total: usize = (0..v)
                .filter(|u| !chosen.contains(u))
                .map(|u| deg[u] + 1)
                .sum();
            let mut t = rng.random_range(0..total);
            let pick = (0..v)
                .filter(|u| !chosen.contains(u))
                .find(|&u| {
                    let w = deg[u] + 1;
                    if t < w {
                        true
                    } else {
                        t -= w;
                        false
                    }
                })
                .expect("weights cover the range");
            chosen.push(pick);
        }
        for &u in &chosen {
            deg[u] += 1;
            edges.push(edge(u, v));
        }
        deg[v] = m;
    }
    edges.sort_unstable();
    edges
}

fn random_regular(n: usize, r: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|u| std::iter::repeat_n(u, r)).collect();
    'restart: for _ in 0..RR_MAX_RESTARTS {
        stubs.shuffle(rng);
        let mut seen = HashSet::with_capacity(stubs.len() / 2);
        for pair in stubs.chunks_exact(2) {
            if pair[0] == pair[1] || !seen.insert(edge(pair[0], pair[1])) {
                continue 'restart;
            }
        }
        let mut edges: Vec<(usize, usize)> = seen.into_iter().collect();
        edges.sort_unstable();
        return Ok(edges);
    }
    Err(Error::NonConvergence {
        solver: "random regular pairing",
        iterations: RR_MAX_RESTARTS,
        residual: f64::NAN,
    })
}

fn draw_features(kind: FeatureKind, n: usize, rng: &mut ChaCha8Rng) -> Option<Array2<f64>> {
    match kind {
        FeatureKind::None => None,
        FeatureKind::Normal1d => Some(Array2::from_shape_fn((n, 1), |_| StandardNormal.sample(rng))),
        FeatureKind::Bernoulli { p } => Some(Array2::from_shape_fn((n, 1), |_| {
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        })),
    }
}

/// Draws a graph; also returns how many draws were needed to get a
/// connected one (1 unless WS rewiring or RR pairing disconnected it).
pub fn generate_with_attempts(model: &GraphModel, n: usize, seed: u64) -> Result<(Graph, usize)> {
    model.validate(n)?;
    for attempt in 0..MAX_REGENERATIONS {
        let mut rng = seeded_rng(seed);
        rng.set_stream(attempt as u64);
        let edges = match model.kind {
            GraphKind::Ws { k, p_e } => watts_strogatz(n, k, p_e, &mut rng),
            GraphKind::Ba { m } => barabasi_albert(n, m, &mut rng),
            GraphKind::Rr { r } => random_regular(n, r, &mut rng)?,
        };
        let features = draw_features(model.features, n, &mut rng);
        let g = Graph::new(n, edges, features)?;
        if g.is_connected() {
            return Ok((g, attempt + 1));
        }
    }
    Err(Error::NonConvergence {
        solver: "connected graph generation",
        iterations: MAX_REGENERATIONS,
        residual: f64::NAN,
    })
}

/// Seeded draw from `model` with `n` nodes, always connected.
pub fn generate(model: &GraphModel, n: usize, seed: u64) -> Result<Graph> {
    Ok(generate_with_attempts(model, n, seed)?.0)
}
