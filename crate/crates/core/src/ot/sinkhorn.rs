//! Entropic transport by log-domain Sinkhorn iterations.
//!
//! The regularisation is annealed from the cost scale down to the requested
//! `epsilon` (warm-starting the dual potentials at each stage). The final
//! scaling is rounded onto the transport polytope, so the returned plan is
//! always feasible and its unregularised cost upper-bounds the exact optimum.

use ndarray::Array2;

/// Parameters of the entropic solver.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SinkhornParams {
    /// Regularisation strength in absolute cost units.
    pub epsilon: f64,
    pub max_iter: usize,
    /// L1 tolerance on the row marginal.
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        SinkhornParams {
            epsilon: 1e-3,
            max_iter: 10_000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SinkhornOutput {
    pub plan: Array2<f64>,
    pub iterations: usize,
    pub marginal_error: f64,
    pub converged: bool,
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + it.map(|x| (x - mx).exp()).sum::<f64>().ln()
}

pub(crate) fn sinkhorn_log(
    cost: &Array2<f64>,
    a: &[f64],
    b: &[f64],
    params: &SinkhornParams,
) -> SinkhornOutput {
    let (n, m) = cost.dim();
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let c = cost.as_standard_layout();
    let c = c.as_slice().expect("contiguous");
    let ct = cost.t().as_standard_layout().into_owned();
    let ct = ct.as_slice().expect("contiguous");

    let scale = c.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let mut stages = Vec::new();
    let mut eps = scale.max(params.epsilon);
    while eps > params.epsilon {
        stages.push(eps);
        eps *= 0.5;
    }
    stages.push(params.epsilon);

    let mut iterations = 0;
    let mut err = f64::INFINITY;
    let last = stages.len() - 1;
    for (s, &eps) in stages.iter().enumerate() {
        let final_stage = s == last;
        let stage_tol = if final_stage { params.tol } else { params.tol.max(1e-4) };
        let mut stage_iters = 0;
        loop {
            if iterations >= params.max_iter || (!final_stage && stage_iters >= 200) {
                break;
            }
            for i in 0..n {
                let row = &c[i * m..(i + 1) * m];
                let lse = log_sum_exp(row.iter().zip(&g).map(|(cij, gj)| (gj - cij) / eps));
                f[i] = eps * (log_a[i] - lse);
            }
            for j in 0..m {
                let column = &ct[j * n..(j + 1) * n];
                let lse = log_sum_exp(column.iter().zip(&f).map(|(cij, fi)| (fi - cij) / eps));
                g[j] = eps * (log_b[j] - lse);
            }
            iterations += 1;
            stage_iters += 1;
            // columns are exact after the g-update; measure the row marginal
            err = (0..n)
                .map(|i| {
                    let row = &c[i * m..(i + 1) * m];
                    let r: f64 = row
                        .iter()
                        .zip(&g)
                        .map(|(cij, gj)| ((f[i] + gj - cij) / eps).exp())
                        .sum();
                    (r - a[i]).abs()
                })
                .sum();
            if err < stage_tol {
                break;
            }
        }
    }
    let eps = params.epsilon;
    let mut plan = Array2::from_shape_fn((n, m), |(i, j)| ((f[i] + g[j] - c[i * m + j]) / eps).exp());
    round_to_polytope(&mut plan, a, b);
    SinkhornOutput {
        plan,
        iterations,
        marginal_error: err,
        converged: err < params.tol,
    }
}

/// Projects a nonnegative matrix onto the set of couplings of `a` and `b`
/// by row/column down-scaling plus a rank-one correction.
pub(crate) fn round_to_polytope(plan: &mut Array2<f64>, a: &[f64], b: &[f64]) {
    let (n, m) = plan.dim();
    for i in 0..n {
        let r = plan.row(i).sum();
        if r > a[i] {
            let x = a[i] / r;
            plan.row_mut(i).mapv_inplace(|v| v * x);
        }
    }
    for j in 0..m {
        let s = plan.column(j).sum();
        if s > b[j] {
            let y = b[j] / s;
            plan.column_mut(j).mapv_inplace(|v| v * y);
        }
    }
    let ea: Vec<f64> = (0..n).map(|i| (a[i] - plan.row(i).sum()).max(0.0)).collect();
    let eb: Vec<f64> = (0..m).map(|j| (b[j] - plan.column(j).sum()).max(0.0)).collect();
    let total: f64 = ea.iter().sum();
    if total > 0.0 {
        for i in 0..n {
            for j in 0..m {
                plan[[i, j]] += ea[i] * eb[j] / total;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_cost_gives_product_coupling() {
        let c = Array2::zeros((2, 3));
        let a = [0.4, 0.6];
        let b = [0.2, 0.3, 0.5];
        let out = sinkhorn_log(&c, &a, &b, &SinkhornParams::default());
        assert!(out.converged);
        for i in 0..2 {
            for j in 0..3 {
                assert!((out.plan[[i, j]] - a[i] * b[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rounding_restores_marginals() {
        let mut p = array![[0.5, 0.1], [0.1, 0.1]];
        round_to_polytope(&mut p, &[0.5, 0.5], &[0.5, 0.5]);
        for i in 0..2 {
            assert!((p.row(i).sum() - 0.5).abs() < 1e-15);
            assert!((p.column(i).sum() - 0.5).abs() < 1e-15);
        }
        assert!(p.iter().all(|&v| v >= 0.0));
    }
}
