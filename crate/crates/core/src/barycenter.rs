//! Free-support Euclidean barycenters: gradient descent on point positions
//! for `sum_k TLB^2(X, Y_k)` or `sum_k STLB^2(X, Y_k)`.
//!
//! Gradients hold the optimiser fixed (outer plan and 1D monotone couplings
//! for TLB; sort permutations and 1D couplings per direction for STLB) and
//! differentiate the rest by the chain rule through the distance matrix.

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::{exact_ot, w2_squared_with_grad, wasserstein_1d_sorted, CostMatrix, SortedMeasure};
use crate::par;
use crate::quantile::{embed, midpoint_rule, quantile_indices, sort_order, QuadratureRule};
use crate::rng::{derive_seed, seeded_rng};
use crate::sliced::{sample_directions, ProjectionSet};
use crate::spaces::{euclidean_distances, MmSpace};

/// Guard for the `1 / |x_i - x_k|` factor at coincident points.
pub const DISTANCE_FLOOR: f64 = 1e-12;
/// A restart whose loss exceeds this is abandoned.
pub const DIVERGENCE_LOSS: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaryDistance {
    Tlb,
    Stlb { r: usize, num_projections: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaryInit {
    /// Standard normal points; restart `k` uses a seed derived from `seed` and `k`.
    RandomNormal { seed: u64 },
    /// Every restart starts from these points.
    WarmStart { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycenterConfig {
    pub n_points: usize,
    pub dim: usize,
    pub steps: usize,
    pub step_size: f64,
    pub restarts: usize,
    pub distance: BaryDistance,
    pub init: BaryInit,
}

impl Default for BarycenterConfig {
    fn default() -> Self {
        BarycenterConfig {
            n_points: 50,
            dim: 2,
            steps: 1000,
            step_size: 0.1,
            restarts: 3,
            distance: BaryDistance::Tlb,
            init: BaryInit::RandomNormal { seed: 0 },
        }
    }
}

impl BarycenterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Domain("steps must be >= 1".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Domain(format!("step size {} must be positive", self.step_size)));
        }
        if self.restarts == 0 || self.n_points == 0 || self.dim == 0 {
            return Err(Error::Domain("restarts, n_points and dim must be >= 1".into()));
        }
        if let BaryInit::WarmStart { points } = &self.init {
            if points.len() != self.n_points || points.iter().any(|p| p.len() != self.dim) {
                return Err(Error::DimensionMismatch(format!(
                    "warm start must be {} x {}",
                    self.n_points, self.dim
                )));
            }
        }
        if let BaryDistance::Stlb { r, num_projections, .. } = self.distance {
            if r == 0 || num_projections == 0 {
                return Err(Error::Domain("STLB needs r >= 1 and at least one projection".into()));
            }
        }
        Ok(())
    }
}

struct SortedRow {
    order: Vec<usize>,
    measure: SortedMeasure,
}

fn sorted_rows(d: &Array2<f64>, weights: &[f64]) -> Vec<SortedRow> {
    (0..d.nrows())
        .map(|i| {
            let row = d.row(i);
            let row = row.as_slice().expect("contiguous");
            let order = sort_order(row);
            let measure = SortedMeasure {
                values: order.iter().map(|&j| row[j]).collect(),
                masses: order.iter().map(|&j| weights[j]).collect(),
            };
            SortedRow { order, measure }
        })
        .collect()
}

enum Frozen {
    Tlb,
    Stlb { rule: QuadratureRule, proj: ProjectionSet },
}

/// `sum_k dist^2(X, Y_k)` as a function of the point positions of `X`, with
/// any random directions drawn once.
pub struct BarycenterObjective<'a> {
    targets: &'a [MmSpace],
    frozen: Frozen,
    target_embeddings: Vec<Array2<f64>>,
    target_rows: Vec<Vec<SortedMeasure>>,
}

impl<'a> BarycenterObjective<'a> {
    pub fn new(targets: &'a [MmSpace], distance: &BaryDistance) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Domain("need at least one target".into()));
        }
        if let Some(k) = targets.iter().position(|t| !t.is_uniform()) {
            return Err(Error::Domain(format!("target {k} does not have uniform weights")));
        }
        let (frozen, target_embeddings, target_rows) = match *distance {
            BaryDistance::Tlb => {
                let rows = targets
                    .iter()
                    .map(|t| {
                        sorted_rows(t.distances(), t.weights_slice())
                            .into_iter()
                            .map(|r| r.measure)
                            .collect()
                    })
                    .collect();
                (Frozen::Tlb, Vec::new(), rows)
            }
            BaryDistance::Stlb { r, num_projections, seed } => {
                let rule = midpoint_rule(r)?;
                let proj = sample_directions(seed, num_projections, r)?;
                let emb = targets.iter().map(|t| embed(t, &rule).vectors().clone()).collect();
                (Frozen::Stlb { rule, proj }, emb, Vec::new())
            }
        };
        Ok(BarycenterObjective {
            targets,
            frozen,
            target_embeddings,
            target_rows,
        })
    }

    /// Loss and its gradient with respect to `points` (n x dim).
    pub fn loss_and_gradient(&self, points: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
        let n = points.nrows();
        if n == 0 {
            return Err(Error::Domain("no points".into()));
        }
        let d = euclidean_distances(points);
        let w = vec![1.0 / n as f64; n];
        let rows = sorted_rows(&d, &w);
        let terms: Vec<Result<(f64, Array2<f64>)>> = par::map_range(self.targets.len(), |k| match &self.frozen {
            Frozen::Tlb => self.tlb_term(k, &rows, &w),
            Frozen::Stlb { rule, proj } => Ok(self.stlb_term(k, &rows, rule, proj)),
        });
        let mut loss = 0.0;
        let mut grad_d = Array2::<f64>::zeros((n, n));
        for t in terms {
            let (l, g) = t?;
            loss += l;
            grad_d += &g;
        }
        Ok((loss, distance_chain_rule(points, &d, &grad_d)))
    }

    fn tlb_term(&self, k: usize, rows: &[SortedRow], w: &[f64]) -> Result<(f64, Array2<f64>)> {
        let target = &self.targets[k];
        let trows = &self.target_rows[k];
        let (n, m) = (rows.len(), trows.len());
        let mut cost = Array2::zeros((n, m));
        for i in 0..n {
            for j in 0..m {
                cost[[i, j]] = wasserstein_1d_sorted(&rows[i].measure, &trows[j], 2.0);
            }
        }
        let plan = exact_ot(&CostMatrix::new(cost)?, w, target.weights_slice())?;
        let mut g = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..m {
                let gamma = plan.matrix[[i, j]];
                if gamma == 0.0 {
                    continue;
                }
                let (_, gs) = w2_squared_with_grad(&rows[i].measure, &trows[j]);
                for (s, &c) in rows[i].order.iter().enumerate() {
                    g[[i, c]] += gamma * gs[s];
                }
            }
        }
        Ok((plan.cost, g))
    }

    fn stlb_term(
        &self,
        k: usize,
        rows: &[SortedRow],
        rule: &QuadratureRule,
        proj: &ProjectionSet,
    ) -> (f64, Array2<f64>) {
        let n = rows.len();
        let r = rule.len();
        let scale: Vec<f64> = rule.weights().iter().map(|w| w.sqrt()).collect();
        // embedding entry (i, s) is scale[s] * D[i, source[i][s]]
        let mut emb = Array2::zeros((n, r));
        let mut source = vec![vec![0usize; r]; n];
        for (i, row) in rows.iter().enumerate() {
            let idx = quantile_indices(&row.measure.masses, rule.knots());
            for s in 0..r {
                emb[[i, s]] = scale[s] * row.measure.values[idx[s]];
                source[i][s] = row.order[idx[s]];
            }
        }
        let target = &self.target_embeddings[k];
        let tw = self.targets[k].weights_slice();
        let w = vec![1.0 / n as f64; n];
        let l_count = proj.len();
        let mut loss = 0.0;
        let mut grad_e = Array2::<f64>::zeros((n, r));
        for l in 0..l_count {
            let theta = proj.direction(l);
            let px: Vec<f64> = emb.rows().into_iter().map(|e| e.iter().zip(theta).map(|(a, b)| a * b).sum()).collect();
            let py: Vec<f64> = target.rows().into_iter().map(|e| e.iter().zip(theta).map(|(a, b)| a * b).sum()).collect();
            let ox = sort_order(&px);
            let sx = SortedMeasure {
                values: ox.iter().map(|&i| px[i]).collect(),
                masses: ox.iter().map(|&i| w[i]).collect(),
            };
            let sy = SortedMeasure::new(&py, tw);
            let (v, g) = w2_squared_with_grad(&sx, &sy);
            loss += v;
            for (s, &i) in ox.iter().enumerate() {
                for (c, &t) in theta.iter().enumerate() {
                    grad_e[[i, c]] += g[s] * t;
                }
            }
        }
        let inv = 1.0 / l_count as f64;
        let mut g = Array2::zeros((n, n));
        for i in 0..n {
            for s in 0..r {
                g[[i, source[i][s]]] += inv * scale[s] * grad_e[[i, s]];
            }
        }
        (loss * inv, g)
    }
}

/// Pulls a gradient with respect to distance entries back to point positions.
fn distance_chain_rule(points: &Array2<f64>, d: &Array2<f64>, grad_d: &Array2<f64>) -> Array2<f64> {
    let (n, dim) = points.dim();
    let mut out = Array2::zeros((n, dim));
    for i in 0..n {
        for k in 0..n {
            let g = grad_d[[i, k]];
            if i == k || g == 0.0 {
                continue;
            }
            let denom = d[[i, k]].max(DISTANCE_FLOOR);
            for c in 0..dim {
                let u = (points[[i, c]] - points[[k, c]]) / denom;
                out[[i, c]] += g * u;
                out[[k, c]] -= g * u;
            }
        }
    }
    out
}

/// One-shot loss and gradient; directions for STLB are drawn from its seed.
pub fn loss_and_gradient(
    points: &Array2<f64>,
    targets: &[MmSpace],
    distance: &BaryDistance,
) -> Result<(f64, Array2<f64>)> {
    BarycenterObjective::new(targets, distance)?.loss_and_gradient(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartSummary {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub diverged: bool,
    pub steps_taken: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterResult {
    pub points: Array2<f64>,
    /// Loss before each step, then after the last one.
    pub loss_trace: Vec<f64>,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
}

fn initial_points(cfg: &BarycenterConfig, restart: usize) -> Array2<f64> {
    match &cfg.init {
        BaryInit::RandomNormal { seed } => {
            let mut rng = seeded_rng(derive_seed(*seed, restart as u64));
            Array2::from_shape_fn((cfg.n_points, cfg.dim), |_| StandardNormal.sample(&mut rng))
        }
        BaryInit::WarmStart { points } => Array2::from_shape_fn((cfg.n_points, cfg.dim), |(i, c)| points[i][c]),
    }
}

fn run_restart(
    objective: &BarycenterObjective,
    cfg: &BarycenterConfig,
    restart: usize,
) -> Result<(Array2<f64>, Vec<f64>, RestartSummary)> {
    let mut x = initial_points(cfg, restart);
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut diverged = false;
    for _ in 0..cfg.steps {
        let (loss, grad) = objective.loss_and_gradient(&x)?;
        trace.push(loss);
        if !(loss <= DIVERGENCE_LOSS) {
            diverged = true;
            break;
        }
        x.scaled_add(-cfg.step_size, &grad);
    }
    if !diverged {
        let (loss, _) = objective.loss_and_gradient(&x)?;
        trace.push(loss);
        diverged = !(loss <= DIVERGENCE_LOSS);
    }
    let summary = RestartSummary {
        initial_loss: trace[0],
        final_loss: *trace.last().expect("nonempty"),
        diverged,
        steps_taken: trace.len() - 1,
    };
    Ok((x, trace, summary))
}

/// Fixed-step gradient descent from each restart; returns the restart with
/// the lowest final loss among those that did not diverge.
pub fn solve(targets: &[MmSpace], cfg: &BarycenterConfig) -> Result<BarycenterResult> {
    cfg.validate()?;
    let objective = BarycenterObjective::new(targets, &cfg.distance)?;
    let runs = par::map_range(cfg.restarts, |k| run_restart(&objective, cfg, k));
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.2.diverged)
        .min_by(|a, b| a.1 .2.final_loss.total_cmp(&b.1 .2.final_loss))
        .map(|(k, _)| k)
        .ok_or(Error::NonConvergence {
            solver: "barycenter descent",
            iterations: cfg.steps,
            residual: f64::INFINITY,
        })?;
    let restarts = runs.iter().map(|r| r.2.clone()).collect();
    let (points, loss_trace, _) = runs.into_iter().nth(best).expect("index in range");
    Ok(BarycenterResult {
        points,
        loss_trace,
        best_restart: best,
        restarts,
    })
}
