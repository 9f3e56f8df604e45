//! Reference (F)GW solvers: permutation enumeration for tiny uniform spaces
//! and entropic block-coordinate descent.

use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{check_order, meta, BoundConfig, DistanceResult};
use crate::error::{Error, Result};
use crate::ot::{abs_pow, sinkhorn, CostMatrix, OuterSolver, SinkhornParams, TransportPlan};
use crate::spaces::{MmSpace, StructuredSpace};

/// Largest size accepted by the permutation search.
pub const BRUTEFORCE_MAX_N: usize = 8;

/// `sum_{ijkl} |d_ik - e_jl|^p plan_ij plan_kl`.
pub fn gw_objective(x: &MmSpace, y: &MmSpace, plan: &Array2<f64>, p: f64) -> Result<f64> {
    check_order(p)?;
    if plan.dim() != (x.len(), y.len()) {
        return Err(Error::DimensionMismatch(format!(
            "plan is {:?} for spaces of size {} and {}",
            plan.dim(),
            x.len(),
            y.len()
        )));
    }
    let support: Vec<(usize, usize, f64)> = plan
        .indexed_iter()
        .filter(|(_, &v)| v != 0.0)
        .map(|((i, j), &v)| (i, j, v))
        .collect();
    let (dx, dy) = (x.distances(), y.distances());
    let mut total = 0.0;
    for &(i, j, g) in &support {
        let mut inner = 0.0;
        for &(k, l, h) in &support {
            inner += h * abs_pow(dx[[i, k]] - dy[[j, l]], p);
        }
        total += g * inner;
    }
    Ok(total)
}

fn feature_cost(x: &StructuredSpace, y: &StructuredSpace, p: f64) -> Result<Array2<f64>> {
    if x.feature_dim() != y.feature_dim() {
        return Err(Error::DimensionMismatch(format!(
            "feature dimensions {} and {}",
            x.feature_dim(),
            y.feature_dim()
        )));
    }
    Ok(Array2::from_shape_fn((x.len(), y.len()), |(i, j)| {
        let sq: f64 = x
            .feature_row(i)
            .iter()
            .zip(y.feature_row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if p == 2.0 {
            sq
        } else {
            sq.sqrt().powf(p)
        }
    }))
}

/// Fused objective `(1 - alpha) D_p(plan) + alpha T_p(plan)` of any plan.
pub fn fgw_objective(
    x: &StructuredSpace,
    y: &StructuredSpace,
    plan: &Array2<f64>,
    alpha: f64,
    p: f64,
) -> Result<f64> {
    let m = feature_cost(x, y, p)?;
    let structure = if alpha < 1.0 {
        gw_objective(x.base(), y.base(), plan, p)?
    } else {
        0.0
    };
    let features: f64 = (plan * &m).sum();
    Ok((1.0 - alpha) * structure + alpha * features)
}

fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    // Heap's algorithm
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            f(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn check_bruteforce(x: &MmSpace, y: &MmSpace) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Refused(format!(
            "permutation search needs equal sizes, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() > BRUTEFORCE_MAX_N {
        return Err(Error::Refused(format!(
            "permutation search limited to n <= {BRUTEFORCE_MAX_N}, got {}",
            x.len()
        )));
    }
    if !x.is_uniform() || !y.is_uniform() {
        return Err(Error::Refused("permutation search needs uniform weights".into()));
    }
    Ok(())
}

fn best_permutation(n: usize, objective: impl Fn(&[usize]) -> f64) -> (Vec<usize>, f64) {
    let mut best = (Vec::new(), f64::INFINITY);
    for_each_permutation(n, |perm| {
        let v = objective(perm);
        if v < best.1 {
            best = (perm.to_vec(), v);
        }
    });
    best
}

fn permutation_plan(perm: &[usize], cost: f64) -> TransportPlan {
    let n = perm.len();
    let mut matrix = Array2::zeros((n, n));
    for (i, &j) in perm.iter().enumerate() {
        matrix[[i, j]] = 1.0 / n as f64;
    }
    TransportPlan {
        matrix,
        cost,
        solver: "bruteforce",
        iterations: 0,
        marginal_error: 0.0,
        converged: true,
    }
}

/// Smallest distortion over all permutation plans of two uniform spaces with
/// at most [`BRUTEFORCE_MAX_N`] points. An upper bound on the GW distance.
pub fn gw_bruteforce(x: &MmSpace, y: &MmSpace, p: f64) -> Result<DistanceResult> {
    check_order(p)?;
    check_bruteforce(x, y)?;
    let start = Instant::now();
    let n = x.len();
    let (dx, dy) = (x.distances(), y.distances());
    let (perm, v) = best_permutation(n, |perm| {
        let mut s = 0.0;
        for i in 0..n {
            for k in 0..n {
                s += abs_pow(dx[[i, k]] - dy[[perm[i], perm[k]]], p);
            }
        }
        s / (n * n) as f64
    });
    let r = DistanceResult::from_power(v, p, meta("gw-brute", "bruteforce", start));
    Ok(r.with_plan(permutation_plan(&perm, v)))
}

/// Best fused objective over permutation plans; same limits as [`gw_bruteforce`].
pub fn fgw_bruteforce(
    x: &StructuredSpace,
    y: &StructuredSpace,
    alpha: f64,
    p: f64,
) -> Result<DistanceResult> {
    check_order(p)?;
    check_bruteforce(x.base(), y.base())?;
    let start = Instant::now();
    let m = feature_cost(x, y, p)?;
    let n = x.len();
    let (dx, dy) = (x.base().distances(), y.base().distances());
    let (perm, v) = best_permutation(n, |perm| {
        let mut s = 0.0;
        for i in 0..n {
            for k in 0..n {
                s += abs_pow(dx[[i, k]] - dy[[perm[i], perm[k]]], p);
            }
        }
        let f: f64 = (0..n).map(|i| m[[i, perm[i]]]).sum();
        (1.0 - alpha) * s / (n * n) as f64 + alpha * f / n as f64
    });
    let r = DistanceResult::from_power(v, p, meta("fgw-brute", "bruteforce", start));
    Ok(r.with_plan(permutation_plan(&perm, v)))
}

/// Starting plan of the block-coordinate descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FgwInit {
    /// `wa ⊗ wb`.
    #[default]
    Product,
    /// `diag(wa)`; needs equal weight vectors.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FgwOptions {
    pub init: FgwInit,
    pub max_outer: usize,
    /// Frobenius norm of the plan change that ends the descent.
    pub tol: f64,
    /// Inner solver; `None` takes the entropic settings of the bound
    /// configuration, or the defaults when that asks for an exact solver.
    pub sinkhorn: Option<SinkhornParams>,
}

impl Default for FgwOptions {
    fn default() -> Self {
        FgwOptions {
            init: FgwInit::Product,
            max_outer: 200,
            tol: 1e-7,
            sinkhorn: None,
        }
    }
}

/// `L(plan)_ij = sum_{kl} |d_ik - e_jl|^p plan_kl`.
fn linearize(dx: &Array2<f64>, dy: &Array2<f64>, plan: &Array2<f64>, p: f64) -> Array2<f64> {
    let (n, m) = plan.dim();
    if p == 2.0 {
        let r = plan.sum_axis(ndarray::Axis(1));
        let c = plan.sum_axis(ndarray::Axis(0));
        let dx2 = dx.mapv(|v| v * v);
        let dy2 = dy.mapv(|v| v * v);
        let left = dx2.dot(&r);
        let right = dy2.dot(&c);
        let cross = dx.dot(plan).dot(dy);
        Array2::from_shape_fn((n, m), |(i, j)| {
            (left[i] + right[j] - 2.0 * cross[[i, j]]).max(0.0)
        })
    } else {
        let support: Vec<(usize, usize, f64)> = plan
            .indexed_iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|((k, l), &v)| (k, l, v))
            .collect();
        Array2::from_shape_fn((n, m), |(i, j)| {
            support
                .iter()
                .map(|&(k, l, g)| g * abs_pow(dx[[i, k]] - dy[[j, l]], p))
                .sum()
        })
    }
}

/// Entropic fused GW by block-coordinate descent: linearise the quadratic
/// term at the current plan, solve the fused linear problem with Sinkhorn,
/// repeat. Returns the unregularised objective of the final (feasible) plan,
/// an upper bound on FGW.
pub fn fgw_entropic(
    x: &StructuredSpace,
    y: &StructuredSpace,
    cfg: &BoundConfig,
    opts: &FgwOptions,
) -> Result<DistanceResult> {
    cfg.validate()?;
    let start = Instant::now();
    let (p, alpha) = (cfg.p, cfg.alpha);
    let m = feature_cost(x, y, p)?;
    let (wa, wb) = (x.base().weights_slice(), y.base().weights_slice());
    let params = opts.sinkhorn.unwrap_or(match cfg.outer_solver {
        OuterSolver::Sinkhorn(s) => s,
        OuterSolver::Exact => SinkhornParams::default(),
    });
    let mut plan = match opts.init {
        FgwInit::Product => Array2::from_shape_fn((wa.len(), wb.len()), |(i, j)| wa[i] * wb[j]),
        FgwInit::Identity => {
            if wa != wb {
                return Err(Error::Refused(
                    "identity initialisation needs equal weight vectors".into(),
                ));
            }
            Array2::from_diag(&ndarray::Array1::from(wa.to_vec()))
        }
    };
    let (dx, dy) = (x.base().distances(), y.base().distances());
    let mut converged = false;
    let mut outer = 0;
    let mut inner_converged = true;
    while outer < opts.max_outer {
        outer += 1;
        let mut cost = if alpha < 1.0 {
            let mut l = linearize(dx, dy, &plan, p);
            l.mapv_inplace(|v| 2.0 * (1.0 - alpha) * v);
            l
        } else {
            Array2::zeros(m.dim())
        };
        if alpha > 0.0 {
            cost.scaled_add(alpha, &m);
        }
        let next = sinkhorn(&CostMatrix::new(cost)?, wa, wb, &params)?;
        inner_converged = next.converged;
        let change = (&next.matrix - &plan).mapv(|v| v * v).sum().sqrt();
        plan = next.matrix;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let value = fgw_objective(x, y, &plan, alpha, p)?;
    let mut r = DistanceResult::from_power(value, p, meta("fgw-entropic", "sinkhorn", start));
    let tp = TransportPlan {
        matrix: plan,
        cost: value,
        solver: "sinkhorn",
        iterations: outer,
        marginal_error: 0.0,
        converged: converged && inner_converged,
    };
    r.meta.wall_time = start.elapsed().as_secs_f64();
    Ok(r.with_plan(tp))
}
