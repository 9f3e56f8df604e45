//! Exact discrete transport: a dense Hungarian solver for the uniform
//! equal-size case and a transportation simplex for general marginals.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Minimum-cost perfect matching on a square cost matrix.
/// Returns `assignment[row] = col`.
pub fn hungarian(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "hungarian needs a square matrix");
    if n == 0 {
        return Vec::new();
    }
    let c = cost.as_standard_layout();
    let c = c.as_slice().expect("contiguous");
    // 1-based potentials; column 0 is a virtual start.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &c[(i0 - 1) * n..i0 * n];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - ui0 - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

struct Basis {
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    // adjacency over nodes: rows 0..n, columns n..n+m
    adj: Vec<Vec<usize>>,
}

impl Basis {
    fn attach(&mut self, id: usize, n: usize) {
        let (i, j) = self.cells[id];
        self.adj[i].push(id);
        self.adj[n + j].push(id);
    }

    fn detach(&mut self, id: usize, n: usize) {
        let (i, j) = self.cells[id];
        self.adj[i].retain(|&c| c != id);
        self.adj[n + j].retain(|&c| c != id);
    }
}

/// Transportation simplex (network simplex on the bipartite graph) with a
/// northwest-corner start and Dantzig pricing; switches to Bland's rule after
/// a run of degenerate pivots so it cannot cycle.
pub fn transport_simplex(cost: &Array2<f64>, a: &[f64], b: &[f64]) -> Result<(Array2<f64>, usize)> {
    let (n, m) = cost.dim();
    if n == 0 || m == 0 {
        return Err(Error::Domain("empty transport problem".into()));
    }
    let nodes = n + m;
    let mut basis = Basis {
        cells: Vec::with_capacity(nodes - 1),
        flow: Vec::with_capacity(nodes - 1),
        adj: vec![Vec::new(); nodes],
    };
    let mut in_basis = vec![usize::MAX; n * m];
    {
        let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
        let (mut i, mut j) = (0, 0);
        loop {
            let x = ra[i].min(rb[j]).max(0.0);
            ra[i] -= x;
            rb[j] -= x;
            let id = basis.cells.len();
            basis.cells.push((i, j));
            basis.flow.push(x);
            basis.attach(id, n);
            in_basis[i * m + j] = id;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if i == n - 1 {
                j += 1;
            } else if j == m - 1 || ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let scale = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let tol = 1e-12 * (1.0 + scale);
    let max_iter = 50 * nodes * nodes + 10_000;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    let mut known = vec![false; nodes];
    let mut stack = Vec::with_capacity(nodes);
    let mut parent: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); nodes];
    let mut degenerate_run = 0usize;

    for iter in 0..max_iter {
        // potentials from the spanning tree
        known.iter_mut().for_each(|k| *k = false);
        known[0] = true;
        u[0] = 0.0;
        stack.clear();
        stack.push(0usize);
        while let Some(node) = stack.pop() {
            for &id in &basis.adj[node] {
                let (i, j) = basis.cells[id];
                if node < n {
                    if !known[n + j] {
                        v[j] = cost[[i, j]] - u[i];
                        known[n + j] = true;
                        stack.push(n + j);
                    }
                } else if !known[i] {
                    u[i] = cost[[i, j]] - v[j];
                    known[i] = true;
                    stack.push(i);
                }
            }
        }

        let bland = degenerate_run > nodes;
        let mut entering = None;
        let mut best = -tol;
        'price: for i in 0..n {
            for j in 0..m {
                if in_basis[i * m + j] != usize::MAX {
                    continue;
                }
                let rc = cost[[i, j]] - u[i] - v[j];
                if rc < best {
                    entering = Some((i, j));
                    if bland {
                        break 'price;
                    }
                    best = rc;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let mut plan = Array2::zeros((n, m));
            for (id, &(i, j)) in basis.cells.iter().enumerate() {
                plan[[i, j]] = basis.flow[id];
            }
            return Ok((plan, iter));
        };

        // tree path from row ei to column ej
        parent.iter_mut().for_each(|p| *p = (usize::MAX, usize::MAX));
        stack.clear();
        stack.push(ei);
        parent[ei] = (usize::MAX, ei);
        let target = n + ej;
        'search: while let Some(node) = stack.pop() {
            for &id in &basis.adj[node] {
                let (i, j) = basis.cells[id];
                let other = if node < n { n + j } else { i };
                if parent[other].1 == usize::MAX {
                    parent[other] = (id, node);
                    if other == target {
                        break 'search;
                    }
                    stack.push(other);
                }
            }
        }
        // cells along the path starting at column ej; odd positions lose flow
        let mut path = Vec::new();
        let mut node = target;
        while node != ei {
            let (id, prev) = parent[node];
            path.push(id);
            node = prev;
        }
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (k, &id) in path.iter().enumerate() {
            if k % 2 == 0 {
                let f = basis.flow[id];
                let better = f < theta
                    || (f == theta && {
                        let (li, lj) = basis.cells[leave];
                        let (ci, cj) = basis.cells[id];
                        ci * m + cj < li * m + lj
                    });
                if better {
                    theta = f;
                    leave = id;
                }
            }
        }
        for (k, &id) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis.flow[id] = (basis.flow[id] - theta).max(0.0);
            } else {
                basis.flow[id] += theta;
            }
        }
        degenerate_run = if theta <= 0.0 { degenerate_run + 1 } else { 0 };
        basis.detach(leave, n);
        let (li, lj) = basis.cells[leave];
        in_basis[li * m + lj] = usize::MAX;
        basis.cells[leave] = (ei, ej);
        basis.flow[leave] = theta;
        basis.attach(leave, n);
        in_basis[ei * m + ej] = leave;
    }
    Err(Error::NonConvergence {
        solver: "transport simplex",
        iterations: max_iter,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn plan_cost(plan: &Array2<f64>, cost: &Array2<f64>) -> f64 {
        (plan * cost).sum()
    }

    #[test]
    fn hungarian_small() {
        let c = array![[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]];
        let a = hungarian(&c);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| c[[i, j]]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn simplex_matches_hungarian_on_uniform() {
        let c = array![[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]];
        let w = [1.0 / 3.0; 3];
        let (plan, _) = transport_simplex(&c, &w, &w).unwrap();
        assert!((plan_cost(&plan, &c) - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_rectangular_marginals() {
        let c = array![[0.0, 1.0, 2.0], [2.0, 1.0, 0.0]];
        let (plan, _) = transport_simplex(&c, &[0.5, 0.5], &[0.3, 0.4, 0.3]).unwrap();
        for i in 0..2 {
            assert!((plan.row(i).sum() - 0.5).abs() < 1e-15);
        }
        assert!((plan_cost(&plan, &c) - 0.4).abs() < 1e-12);
    }
}
