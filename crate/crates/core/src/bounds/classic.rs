//! FLB, SLB, TLB and the fused TLB.

use std::time::Instant;

use ndarray::Array2;

use super::{check_order, meta, BoundConfig, DistanceResult};
use crate::error::{Error, Result};
use crate::ot::{
    abs_pow, ot_squared_euclidean, solve, wasserstein_1d_sorted, wasserstein_1d_uniform_sorted,
    CostMatrix, SortedMeasure,
};
use crate::par;
use crate::quantile::fused_embedding;
use crate::spaces::{MmSpace, StructuredSpace};

fn both_uniform_same_size(x: &MmSpace, y: &MmSpace) -> bool {
    x.len() == y.len() && x.is_uniform() && y.is_uniform()
}

fn power_sum(row: &[f64], w: &[f64], p: f64) -> f64 {
    row.iter().zip(w).map(|(&d, &wj)| wj * abs_pow(d, p)).sum()
}

/// `s_i = (sum_j w_j d_ij^p)^{1/p}` for every point.
pub fn eccentricities(x: &MmSpace, p: f64) -> Result<Vec<f64>> {
    check_order(p)?;
    let w = x.weights_slice();
    Ok((0..x.len())
        .map(|i| power_sum(x.row(i), w, p).powf(1.0 / p))
        .collect())
}

/// First lower bound: transport between the eccentricity distributions.
pub fn flb(x: &MmSpace, y: &MmSpace, p: f64) -> Result<DistanceResult> {
    let start = Instant::now();
    let ex = eccentricities(x, p)?;
    let ey = eccentricities(y, p)?;
    let v = wasserstein_1d_sorted(
        &SortedMeasure::new(&ex, x.weights_slice()),
        &SortedMeasure::new(&ey, y.weights_slice()),
        p,
    );
    Ok(DistanceResult::from_power(v, p, meta("flb", "1d", start)))
}

fn pair_distribution(x: &MmSpace) -> (Vec<f64>, Vec<f64>) {
    let w = x.weights_slice();
    let n = x.len();
    let mut values = Vec::with_capacity(n * n);
    let mut masses = Vec::with_capacity(n * n);
    for i in 0..n {
        for (j, &d) in x.row(i).iter().enumerate() {
            values.push(d);
            masses.push(w[i] * w[j]);
        }
    }
    (values, masses)
}

/// Second lower bound: transport between the distributions of all pairwise
/// distances.
pub fn slb(x: &MmSpace, y: &MmSpace, p: f64) -> Result<DistanceResult> {
    check_order(p)?;
    let start = Instant::now();
    let (mut vx, mx) = pair_distribution(x);
    let (mut vy, my) = pair_distribution(y);
    let v = if both_uniform_same_size(x, y) {
        vx.sort_by(f64::total_cmp);
        vy.sort_by(f64::total_cmp);
        wasserstein_1d_uniform_sorted(&vx, &vy, p)
    } else {
        wasserstein_1d_sorted(&SortedMeasure::new(&vx, &mx), &SortedMeasure::new(&vy, &my), p)
    };
    Ok(DistanceResult::from_power(v, p, meta("slb", "1d", start)))
}

fn sorted_rows(x: &MmSpace) -> Vec<SortedMeasure> {
    par::map_range(x.len(), |i| SortedMeasure::new(x.row(i), x.weights_slice()))
}

/// `LD_p^p(x_i, y_j)`: transport between the distance distributions of `x_i`
/// in `X` and `y_j` in `Y`.
pub fn local_distance_matrix(x: &MmSpace, y: &MmSpace, p: f64) -> Result<CostMatrix> {
    check_order(p)?;
    let (n, m) = (x.len(), y.len());
    let rx = sorted_rows(x);
    let ry = sorted_rows(y);
    let uniform = both_uniform_same_size(x, y);
    let mut flat = vec![0.0; n * m];
    par::fill_rows(&mut flat, m, |i, out| {
        for (j, o) in out.iter_mut().enumerate() {
            *o = if uniform {
                wasserstein_1d_uniform_sorted(&rx[i].values, &ry[j].values, p)
            } else {
                wasserstein_1d_sorted(&rx[i], &ry[j], p)
            };
        }
    });
    Ok(CostMatrix::from_trusted(
        Array2::from_shape_vec((n, m), flat).expect("shape"),
    ))
}

/// Third lower bound: optimal transport with the local distance costs.
pub fn tlb(x: &MmSpace, y: &MmSpace, cfg: &BoundConfig) -> Result<DistanceResult> {
    cfg.validate()?;
    let start = Instant::now();
    let cost = local_distance_matrix(x, y, cfg.p)?;
    let plan = solve(&cost, x.weights_slice(), y.weights_slice(), &cfg.outer_solver)?;
    let mut r = DistanceResult::from_power(plan.cost, cfg.p, meta("tlb", "", start));
    r.meta.wall_time = start.elapsed().as_secs_f64();
    Ok(r.with_plan(plan))
}

fn check_feature_dims(x: &StructuredSpace, y: &StructuredSpace) -> Result<()> {
    if x.feature_dim() != y.feature_dim() {
        return Err(Error::DimensionMismatch(format!(
            "feature dimensions {} and {}",
            x.feature_dim(),
            y.feature_dim()
        )));
    }
    Ok(())
}

/// `(1 - alpha) LD_p^p(i, j) + alpha |z_i - z'_j|^p`.
pub fn fused_cost_matrix(
    x: &StructuredSpace,
    y: &StructuredSpace,
    alpha: f64,
    p: f64,
) -> Result<CostMatrix> {
    check_feature_dims(x, y)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha = {alpha} outside [0, 1]")));
    }
    let (n, m) = (x.len(), y.len());
    let mut cost = if alpha < 1.0 {
        let mut ld = local_distance_matrix(x.base(), y.base(), p)?.into_inner();
        if alpha > 0.0 {
            ld.mapv_inplace(|v| (1.0 - alpha) * v);
        }
        ld
    } else {
        check_order(p)?;
        Array2::zeros((n, m))
    };
    if alpha > 0.0 {
        let cs = cost.as_slice_mut().expect("contiguous");
        par::fill_rows(cs, m, |i, out| {
            let zi = x.feature_row(i);
            for (j, o) in out.iter_mut().enumerate() {
                let sq: f64 = zi
                    .iter()
                    .zip(y.feature_row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let f = if p == 2.0 { sq } else { sq.sqrt().powf(p) };
                *o += alpha * f;
            }
        });
    }
    Ok(CostMatrix::from_trusted(cost))
}

/// Fused third lower bound by outer transport over the fused cost matrix.
pub fn ftlb(x: &StructuredSpace, y: &StructuredSpace, cfg: &BoundConfig) -> Result<DistanceResult> {
    cfg.validate()?;
    let start = Instant::now();
    let cost = fused_cost_matrix(x, y, cfg.alpha, cfg.p)?;
    let plan = solve(
        &cost,
        x.base().weights_slice(),
        y.base().weights_slice(),
        &cfg.outer_solver,
    )?;
    let mut r = DistanceResult::from_power(plan.cost, cfg.p, meta("ftlb", "", start));
    r.meta.wall_time = start.elapsed().as_secs_f64();
    Ok(r.with_plan(plan))
}

/// Fused third lower bound at `p = 2` as `W_2^2` between fused quantile
/// embeddings under `cfg.rule`. Equals [`ftlb`] for uniform equal-size
/// inputs with the midpoint rule `r = n`, and approximates it otherwise.
pub fn ftlb_embedding(
    x: &StructuredSpace,
    y: &StructuredSpace,
    cfg: &BoundConfig,
) -> Result<DistanceResult> {
    cfg.validate()?;
    if cfg.p != 2.0 {
        return Err(Error::UnsupportedOrder(cfg.p));
    }
    check_feature_dims(x, y)?;
    let start = Instant::now();
    let (wa, wb) = (x.base().weights_slice(), y.base().weights_slice());
    let rule = cfg.rule.resolve(wa, wb)?;
    let ex = fused_embedding(x, &rule, cfg.alpha)?;
    let ey = fused_embedding(y, &rule, cfg.alpha)?;
    let plan = ot_squared_euclidean(ex.vectors().view(), wa, ey.vectors().view(), wb, &cfg.outer_solver)?;
    let mut r = DistanceResult::from_power(plan.cost, 2.0, meta("ftlb", "", start));
    r.meta.wall_time = start.elapsed().as_secs_f64();
    Ok(r.with_plan(plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::QuadratureSpec;
    use crate::ot::OuterSolver;
    use ndarray::array;

    fn two_point(d: f64) -> MmSpace {
        MmSpace::uniform(array![[0.0, d], [d, 0.0]]).unwrap()
    }

    fn cfg() -> BoundConfig {
        BoundConfig::default()
    }

    #[test]
    fn flb_two_point_example() {
        let r = flb(&two_point(1.0), &two_point(2.0), 2.0).unwrap();
        assert!((r.value_power_p - 0.5).abs() < 1e-15);
        assert!((r.value - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn slb_two_point_example() {
        let r = slb(&two_point(1.0), &two_point(2.0), 2.0).unwrap();
        assert!((r.value_power_p - 0.5).abs() < 1e-15);
        let one = MmSpace::uniform(array![[0.0]]).unwrap();
        assert_eq!(slb(&one, &one, 2.0).unwrap().value, 0.0);
    }

    #[test]
    fn ld_two_point_example() {
        let ld = local_distance_matrix(&two_point(1.0), &two_point(2.0), 2.0).unwrap();
        assert!(ld.entries().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn tlb_two_point_example() {
        let r = tlb(&two_point(1.0), &two_point(2.0), &cfg()).unwrap();
        assert!((r.value_power_p - 0.5).abs() < 1e-15);
        assert!(r.plan.is_some());
    }

    #[test]
    fn self_distances_vanish() {
        let x = MmSpace::from_rows(
            &[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.5], vec![2.0, 1.5, 0.0]],
            Some(&[0.2, 0.5, 0.3]),
        )
        .unwrap();
        assert_eq!(flb(&x, &x, 2.0).unwrap().value, 0.0);
        assert_eq!(slb(&x, &x, 1.0).unwrap().value, 0.0);
        assert_eq!(tlb(&x, &x, &cfg()).unwrap().value, 0.0);
        let ld = local_distance_matrix(&x, &x, 2.0).unwrap();
        for i in 0..3 {
            assert_eq!(ld.entries()[[i, i]], 0.0);
        }
    }

    #[test]
    fn ftlb_endpoints() {
        let x = StructuredSpace::new(two_point(1.0), array![[0.0], [1.0]]).unwrap();
        let y = StructuredSpace::new(two_point(2.0), array![[3.0], [1.0]]).unwrap();
        let c0 = BoundConfig { alpha: 0.0, ..cfg() };
        assert_eq!(
            ftlb(&x, &y, &c0).unwrap().value_power_p,
            tlb(x.base(), y.base(), &c0).unwrap().value_power_p
        );
        let c1 = BoundConfig { alpha: 1.0, ..cfg() };
        // features {0, 1} vs {1, 3}: W_2^2 = (1 + 4) / 2
        assert!((ftlb(&x, &y, &c1).unwrap().value_power_p - 2.5).abs() < 1e-15);
    }

    #[test]
    fn ftlb_paths_agree_on_small_instance() {
        let x = StructuredSpace::new(two_point(1.0), array![[0.0], [1.0]]).unwrap();
        let y = StructuredSpace::new(two_point(2.0), array![[3.0], [1.0]]).unwrap();
        let c = BoundConfig {
            alpha: 0.5,
            rule: QuadratureSpec::MatchSize,
            outer_solver: OuterSolver::Exact,
            ..cfg()
        };
        let a = ftlb(&x, &y, &c).unwrap().value_power_p;
        let b = ftlb_embedding(&x, &y, &c).unwrap().value_power_p;
        assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn feature_dimension_mismatch() {
        let x = StructuredSpace::new(two_point(1.0), array![[0.0], [1.0]]).unwrap();
        let y = StructuredSpace::unlabeled(two_point(1.0));
        assert!(matches!(ftlb(&x, &y, &cfg()), Err(Error::DimensionMismatch(_))));
    }
}
