//! Random graphs, their shortest-path metrics, isomorphic-pair synthesis
//! and 1-WL color refinement.

mod generate;
mod wl;

use std::collections::{BTreeSet, VecDeque};

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng};
use crate::spaces::{MmSpace, StructuredSpace};

pub use generate::{generate, generate_with_attempts, MAX_REGENERATIONS, RR_MAX_RESTARTS};
pub use wl::{wl_refinement, WlLabels, WlVerdict};

/// Simple undirected graph with optional node features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc", into = "GraphDoc")]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    features: Option<Array2<f64>>,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    n: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<Vec<f64>>>,
}

impl TryFrom<GraphDoc> for Graph {
    type Error = Error;

    fn try_from(doc: GraphDoc) -> Result<Self> {
        let features = match doc.features {
            None => None,
            Some(rows) => {
                let d = rows.first().map_or(0, Vec::len);
                if rows.len() != doc.n || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::FeatureRowMismatch {
                        expected: doc.n,
                        found: rows.len(),
                    });
                }
                Some(
                    Array2::from_shape_vec((doc.n, d), rows.into_iter().flatten().collect())
                        .expect("shape"),
                )
            }
        };
        Graph::new(doc.n, doc.edges.into_iter().map(|[u, v]| (u, v)), features)
    }
}

impl From<Graph> for GraphDoc {
    fn from(g: Graph) -> Self {
        GraphDoc {
            n: g.n,
            edges: g.edges.iter().map(|&(u, v)| [u, v]).collect(),
            features: g
                .features
                .map(|f| f.rows().into_iter().map(|r| r.to_vec()).collect()),
        }
    }
}

impl Graph {
    /// Normalises edges to `u < v` in sorted order; rejects self-loops,
    /// duplicates and out-of-range endpoints.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Option<Array2<f64>>,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Domain(format!("edge ({u}, {v}) outside 0..{n}")));
            }
            if u == v {
                return Err(Error::Domain(format!("self-loop at node {u}")));
            }
            if !set.insert((u.min(v), u.max(v))) {
                return Err(Error::Domain(format!("duplicate edge ({u}, {v})")));
            }
        }
        if let Some(f) = &features {
            if f.nrows() != n {
                return Err(Error::FeatureRowMismatch {
                    expected: n,
                    found: f.nrows(),
                });
            }
        }
        Ok(Graph {
            n,
            edges: set.into_iter().collect(),
            features,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> Option<&Array2<f64>> {
        self.features.as_ref()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Node sets of the connected components, largest first.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut comps = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut k = 0;
            while k < comp.len() {
                for &v in &adj[comp[k]] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
                k += 1;
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.components().len() == 1
    }

    /// Induced subgraph on `nodes`, relabelled `0..nodes.len()` in the given order.
    pub fn induced(&self, nodes: &[usize]) -> Graph {
        let mut index = vec![usize::MAX; self.n];
        for (k, &v) in nodes.iter().enumerate() {
            index[v] = k;
        }
        let edges = self
            .edges
            .iter()
            .filter(|(u, v)| index[*u] != usize::MAX && index[*v] != usize::MAX)
            .map(|&(u, v)| (index[u], index[v]));
        let features = self
            .features
            .as_ref()
            .map(|f| f.select(ndarray::Axis(0), nodes));
        Graph::new(nodes.len(), edges, features).expect("subgraph of a valid graph")
    }

    pub fn largest_component(&self) -> Graph {
        match self.components().first() {
            Some(c) => self.induced(c),
            None => self.clone(),
        }
    }

    /// The graph with node `i` of the result being node `perm[i]` of `self`.
    pub fn relabeled(&self, perm: &[usize]) -> Graph {
        self.induced(perm)
    }
}

/// Hop counts from every node by breadth-first search, with uniform weights.
/// Disconnected graphs are an error; see [`Graph::largest_component`].
pub fn shortest_path_metric(g: &Graph) -> Result<MmSpace> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::Domain("empty graph".into()));
    }
    let adj = g.adjacency();
    let mut dist = Array2::from_elem((n, n), f64::INFINITY);
    let mut queue = VecDeque::with_capacity(n);
    for s in 0..n {
        let mut row = vec![usize::MAX; n];
        row[s] = 0;
        queue.clear();
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if row[v] == usize::MAX {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if row.contains(&usize::MAX) {
            return Err(Error::Domain(
                "graph is disconnected; restrict to the largest component".into(),
            ));
        }
        for (t, &h) in row.iter().enumerate() {
            dist[[s, t]] = h as f64;
        }
    }
    MmSpace::uniform(dist)
}

/// Shortest-path metric together with the node features (none: zero columns).
pub fn to_structured(g: &Graph) -> Result<StructuredSpace> {
    let base = shortest_path_metric(g)?;
    match g.features() {
        Some(f) => StructuredSpace::new(base, f.clone()),
        None => Ok(StructuredSpace::unlabeled(base)),
    }
}

/// Topology of a random graph family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphKind {
    /// Watts–Strogatz: ring lattice of degree `k`, each edge rewired with
    /// probability `p_e`.
    Ws { k: usize, p_e: f64 },
    /// Barabási–Albert with `m` edges per new node.
    Ba { m: usize },
    /// Uniform random `r`-regular graph.
    Rr { r: usize },
}

/// Node features attached after the topology is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    #[default]
    None,
    /// One standard normal value per node.
    Normal1d,
    /// One 0.0/1.0 value per node, 1.0 with probability `p`.
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphModel {
    pub kind: GraphKind,
    #[serde(default)]
    pub features: FeatureKind,
}

impl GraphModel {
    pub fn new(kind: GraphKind, features: FeatureKind) -> Self {
        GraphModel { kind, features }
    }

    /// Checks the size constraints of the family for `n` nodes.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self.kind {
            GraphKind::Ws { k, p_e } => {
                if k < 2 || k % 2 != 0 || k >= n {
                    return Err(Error::Domain(format!("WS needs even 2 <= k < n, got k = {k}, n = {n}")));
                }
                if !(0.0..=1.0).contains(&p_e) {
                    return Err(Error::Domain(format!("rewiring probability {p_e} outside [0, 1]")));
                }
            }
            GraphKind::Ba { m } => {
                if m == 0 || m >= n {
                    return Err(Error::Domain(format!("BA needs 1 <= m < n, got m = {m}, n = {n}")));
                }
            }
            GraphKind::Rr { r } => {
                if r == 0 || r >= n || (r * n) % 2 != 0 {
                    return Err(Error::Domain(format!(
                        "RR needs 1 <= r < n with r*n even, got r = {r}, n = {n}"
                    )));
                }
            }
        }
        if let FeatureKind::Bernoulli { p } = self.features {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("Bernoulli probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Two structured spaces built from graphs, with the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPair {
    pub first: StructuredSpace,
    pub second: StructuredSpace,
    pub graphs: (Graph, Graph),
    pub isomorphic: bool,
}

/// Seed of the relabelling permutation for an isomorphic pair.
const PERMUTATION_STREAM: u64 = 0x5045_524D;
/// Index of the second draw for a non-isomorphic pair.
const SECOND_DRAW: u64 = 1;

/// An isomorphic pair relabels one draw by a seeded uniform permutation; a
/// non-isomorphic pair is two independent draws from the same model.
pub fn make_pair(model: &GraphModel, n: usize, seed: u64, isomorphic: bool) -> Result<GraphPair> {
    let g1 = generate(model, n, seed)?;
    let g2 = if isomorphic {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut seeded_rng(derive_seed(seed, PERMUTATION_STREAM)));
        g1.relabeled(&perm)
    } else {
        generate(model, n, derive_seed(seed, SECOND_DRAW))?
    };
    Ok(GraphPair {
        first: to_structured(&g1)?,
        second: to_structured(&g2)?,
        graphs: (g1, g2),
        isomorphic,
    })
}
