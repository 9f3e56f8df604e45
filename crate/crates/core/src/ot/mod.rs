//! Wasserstein solvers: closed-form 1D transport, exact discrete transport
//! and entropic Sinkhorn.

mod exact;
mod one_d;
mod sinkhorn;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub use exact::{hungarian, transport_simplex};
pub use one_d::{
    wasserstein_1d, wasserstein_1d_sorted, w2_squared_with_grad, SortedMeasure,
};
pub(crate) use one_d::{abs_pow, wasserstein_1d_uniform_sorted};
pub use sinkhorn::SinkhornParams;

/// Which solver handles an outer transport problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OuterSolver {
    #[default]
    Exact,
    Sinkhorn(SinkhornParams),
}

impl OuterSolver {
    pub fn name(&self) -> &'static str {
        match self {
            OuterSolver::Exact => "exact",
            OuterSolver::Sinkhorn(_) => "sinkhorn",
        }
    }
}

/// A finite, nonnegative cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(Array2<f64>);

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "cost matrix" });
        }
        if entries.iter().any(|&v| v < 0.0) {
            return Err(Error::Domain("cost entries must be nonnegative".into()));
        }
        Ok(CostMatrix(entries.as_standard_layout().into_owned()))
    }

    pub(crate) fn from_trusted(entries: Array2<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| v.is_finite() && *v >= 0.0));
        CostMatrix(entries)
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// A coupling together with the transport cost it attains.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub matrix: Array2<f64>,
    /// Unregularised objective `<plan, cost>`.
    pub cost: f64,
    pub solver: &'static str,
    pub iterations: usize,
    /// L1 marginal residual reported by iterative solvers (0 for exact ones).
    pub marginal_error: f64,
    pub converged: bool,
}

impl TransportPlan {
    /// Largest absolute deviation of the row and column sums from the marginals.
    pub fn marginal_violation(&self, wa: &[f64], wb: &[f64]) -> f64 {
        let rows = self
            .matrix
            .rows()
            .into_iter()
            .zip(wa)
            .map(|(r, &w)| (r.sum() - w).abs());
        let cols = self
            .matrix
            .columns()
            .into_iter()
            .zip(wb)
            .map(|(c, &w)| (c.sum() - w).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }
}

fn check_marginal(w: &[f64], what: &str) -> Result<()> {
    if w.is_empty() {
        return Err(Error::Domain(format!("empty {what} marginal")));
    }
    if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Domain(format!("{what} marginal has negative or non-finite mass")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > crate::spaces::WEIGHT_RENORM_TOL {
        return Err(Error::WeightSum { sum: s });
    }
    Ok(())
}

/// Restricts a problem to atoms with positive mass.
struct Reduced {
    rows: Vec<usize>,
    cols: Vec<usize>,
    cost: Array2<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Reduced {
    fn new(cost: &Array2<f64>, wa: &[f64], wb: &[f64]) -> Reduced {
        let rows: Vec<usize> = (0..wa.len()).filter(|&i| wa[i] > 0.0).collect();
        let cols: Vec<usize> = (0..wb.len()).filter(|&j| wb[j] > 0.0).collect();
        let sa: f64 = rows.iter().map(|&i| wa[i]).sum();
        let sb: f64 = cols.iter().map(|&j| wb[j]).sum();
        let a = rows.iter().map(|&i| wa[i] / sa).collect();
        let b = cols.iter().map(|&j| wb[j] / sb).collect();
        let cost = Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| cost[[rows[i], cols[j]]]);
        Reduced { rows, cols, cost, a, b }
    }

    fn expand(&self, plan: &Array2<f64>, n: usize, m: usize) -> Array2<f64> {
        let mut full = Array2::zeros((n, m));
        for (ri, &i) in self.rows.iter().enumerate() {
            for (rj, &j) in self.cols.iter().enumerate() {
                full[[i, j]] = plan[[ri, rj]];
            }
        }
        full
    }

    fn is_uniform_square(&self) -> bool {
        let n = self.a.len();
        if n != self.b.len() {
            return false;
        }
        let u = 1.0 / n as f64;
        self.a.iter().chain(&self.b).all(|&w| (w - u).abs() <= 1e-14)
    }
}

fn plan_cost(plan: &Array2<f64>, cost: &Array2<f64>) -> f64 {
    let terms: Vec<f64> = plan.iter().zip(cost).map(|(p, c)| p * c).collect();
    par::pairwise_sum(&terms)
}

/// Optimal plan of the linear transport problem.
///
/// Zero-mass atoms are removed before solving and come back as zero rows or
/// columns. Uniform equal-size problems go through the Hungarian method,
/// everything else through the transportation simplex.
pub fn exact_ot(cost: &CostMatrix, wa: &[f64], wb: &[f64]) -> Result<TransportPlan> {
    let (n, m) = cost.dim();
    if wa.len() != n || wb.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{n}x{m} cost with marginals of length {} and {}",
            wa.len(),
            wb.len()
        )));
    }
    check_marginal(wa, "source")?;
    check_marginal(wb, "target")?;
    let red = Reduced::new(cost.entries(), wa, wb);
    let (plan, iterations) = if red.is_uniform_square() {
        let k = red.a.len();
        let assignment = hungarian(&red.cost);
        let mut p = Array2::zeros((k, k));
        for (i, &j) in assignment.iter().enumerate() {
            p[[i, j]] = red.a[i];
        }
        (p, k)
    } else {
        transport_simplex(&red.cost, &red.a, &red.b)?
    };
    let matrix = red.expand(&plan, n, m);
    Ok(TransportPlan {
        cost: plan_cost(&matrix, cost.entries()),
        matrix,
        solver: "exact",
        iterations,
        marginal_error: 0.0,
        converged: true,
    })
}

/// Entropic transport plan; see [`SinkhornParams`]. The returned plan is
/// feasible even when the iteration budget runs out (`converged == false`).
pub fn sinkhorn(cost: &CostMatrix, wa: &[f64], wb: &[f64], params: &SinkhornParams) -> Result<TransportPlan> {
    let (n, m) = cost.dim();
    if wa.len() != n || wb.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{n}x{m} cost with marginals of length {} and {}",
            wa.len(),
            wb.len()
        )));
    }
    if !(params.epsilon > 0.0) {
        return Err(Error::Domain("sinkhorn epsilon must be positive".into()));
    }
    check_marginal(wa, "source")?;
    check_marginal(wb, "target")?;
    let red = Reduced::new(cost.entries(), wa, wb);
    let out = sinkhorn::sinkhorn_log(&red.cost, &red.a, &red.b, params);
    let matrix = red.expand(&out.plan, n, m);
    Ok(TransportPlan {
        cost: plan_cost(&matrix, cost.entries()),
        matrix,
        solver: "sinkhorn",
        iterations: out.iterations,
        marginal_error: out.marginal_error,
        converged: out.converged,
    })
}

/// Dispatches to the requested solver.
pub fn solve(cost: &CostMatrix, wa: &[f64], wb: &[f64], solver: &OuterSolver) -> Result<TransportPlan> {
    match solver {
        OuterSolver::Exact => exact_ot(cost, wa, wb),
        OuterSolver::Sinkhorn(p) => sinkhorn(cost, wa, wb, p),
    }
}

/// Squared Euclidean distances between the rows of `a` and `b`, computed as
/// `sum (x - y)^2` so entries stay nonnegative.
pub fn squared_euclidean_cost(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<CostMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let (n, m, k) = (a.nrows(), b.nrows(), a.ncols());
    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let (sa, sb) = (a.as_slice().unwrap(), b.as_slice().unwrap());
    let mut flat = vec![0.0; n * m];
    par::fill_rows(&mut flat, m, |i, out| {
        let x = &sa[i * k..(i + 1) * k];
        for (j, o) in out.iter_mut().enumerate() {
            let y = &sb[j * k..(j + 1) * k];
            *o = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
        }
    });
    Ok(CostMatrix::from_trusted(
        Array2::from_shape_vec((n, m), flat).expect("shape"),
    ))
}

/// Optimal plan for the squared Euclidean cost between two weighted point sets.
pub fn ot_squared_euclidean(
    a: ArrayView2<f64>,
    wa: &[f64],
    b: ArrayView2<f64>,
    wb: &[f64],
    solver: &OuterSolver,
) -> Result<TransportPlan> {
    let cost = squared_euclidean_cost(a, b)?;
    solve(&cost, wa, wb, solver)
}

/// `W_2^2` between two weighted point sets under the chosen solver.
pub fn ot_cost_squared_euclidean(
    a: ArrayView2<f64>,
    wa: &[f64],
    b: ArrayView2<f64>,
    wb: &[f64],
    solver: &OuterSolver,
) -> Result<f64> {
    Ok(ot_squared_euclidean(a, wa, b, wb, solver)?.cost)
}
