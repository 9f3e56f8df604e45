//! STLB and SFTLB: sliced 2-Wasserstein between (fused) quantile embeddings.

use std::time::Instant;

use ndarray::ArrayView2;

use super::{meta, BoundConfig, DistanceResult};
use crate::error::{Error, Result};
use crate::quantile::{embed, fused_embedding};
use crate::sliced::{sw2_squared_estimate, ProjectionSet, RNG_ALGORITHM};
use crate::spaces::{MmSpace, StructuredSpace};

pub(crate) fn sliced_result(
    a: ArrayView2<f64>,
    wa: &[f64],
    b: ArrayView2<f64>,
    wb: &[f64],
    proj: &ProjectionSet,
    bound: &'static str,
    start: Instant,
) -> Result<DistanceResult> {
    let est = sw2_squared_estimate(a, wa, b, wb, proj)?;
    let mut m = meta(bound, "sliced", start);
    m.seed = Some(proj.seed());
    m.rng = Some(RNG_ALGORITHM);
    m.iterations = proj.len();
    let mut r = DistanceResult::from_power(est.value, 2.0, m);
    r.std_error = Some(est.std_error());
    r.meta.wall_time = start.elapsed().as_secs_f64();
    Ok(r)
}

/// STLB with explicitly supplied directions in `R^r`.
pub fn stlb_with(
    x: &MmSpace,
    y: &MmSpace,
    cfg: &BoundConfig,
    proj: &ProjectionSet,
) -> Result<DistanceResult> {
    cfg.validate_sliced()?;
    let start = Instant::now();
    let rule = cfg.rule.resolve(x.weights_slice(), y.weights_slice())?;
    if proj.dim() != rule.len() {
        return Err(Error::DimensionMismatch(format!(
            "directions in R^{} for {} quadrature knots",
            proj.dim(),
            rule.len()
        )));
    }
    let ex = embed(x, &rule);
    let ey = embed(y, &rule);
    sliced_result(
        ex.vectors().view(),
        x.weights_slice(),
        ey.vectors().view(),
        y.weights_slice(),
        proj,
        "stlb",
        start,
    )
}

/// Sliced third lower bound; directions come from `cfg.seed`.
pub fn stlb(x: &MmSpace, y: &MmSpace, cfg: &BoundConfig) -> Result<DistanceResult> {
    cfg.validate_sliced()?;
    let r = cfg.rule.resolve(x.weights_slice(), y.weights_slice())?.len();
    let proj = ProjectionSet::new(cfg.direction_rule, cfg.seed, cfg.num_projections, r)?;
    stlb_with(x, y, cfg, &proj)
}

/// SFTLB with explicitly supplied directions in `R^{r+d}`.
pub fn sftlb_with(
    x: &StructuredSpace,
    y: &StructuredSpace,
    cfg: &BoundConfig,
    proj: &ProjectionSet,
) -> Result<DistanceResult> {
    cfg.validate_sliced()?;
    if x.feature_dim() != y.feature_dim() {
        return Err(Error::DimensionMismatch(format!(
            "feature dimensions {} and {}",
            x.feature_dim(),
            y.feature_dim()
        )));
    }
    let start = Instant::now();
    let (wa, wb) = (x.base().weights_slice(), y.base().weights_slice());
    let rule = cfg.rule.resolve(wa, wb)?;
    if proj.dim() != rule.len() + x.feature_dim() {
        return Err(Error::DimensionMismatch(format!(
            "directions in R^{} for embeddings in R^{}",
            proj.dim(),
            rule.len() + x.feature_dim()
        )));
    }
    let ex = fused_embedding(x, &rule, cfg.alpha)?;
    let ey = fused_embedding(y, &rule, cfg.alpha)?;
    sliced_result(ex.vectors().view(), wa, ey.vectors().view(), wb, proj, "sftlb", start)
}

/// Sliced fused third lower bound; directions come from `cfg.seed`.
pub fn sftlb(x: &StructuredSpace, y: &StructuredSpace, cfg: &BoundConfig) -> Result<DistanceResult> {
    cfg.validate_sliced()?;
    let r = cfg
        .rule
        .resolve(x.base().weights_slice(), y.base().weights_slice())?
        .len();
    let proj = ProjectionSet::new(
        cfg.direction_rule,
        cfg.seed,
        cfg.num_projections,
        r + x.feature_dim(),
    )?;
    sftlb_with(x, y, cfg, &proj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::QuadratureSpec;
    use ndarray::array;

    fn space() -> StructuredSpace {
        let base = MmSpace::uniform(array![
            [0.0, 1.0, 2.0, 2.5],
            [1.0, 0.0, 1.5, 2.0],
            [2.0, 1.5, 0.0, 1.0],
            [2.5, 2.0, 1.0, 0.0]
        ])
        .unwrap();
        StructuredSpace::new(base, array![[0.1], [0.7], [-0.3], [1.2]]).unwrap()
    }

    fn cfg() -> BoundConfig {
        BoundConfig {
            rule: QuadratureSpec::Midpoint { r: 3 },
            num_projections: 32,
            ..BoundConfig::default()
        }
    }

    #[test]
    fn permuted_copy_is_exactly_zero() {
        let x = space();
        let y = x.permuted(&[2, 0, 3, 1]);
        assert_eq!(stlb(x.base(), y.base(), &cfg()).unwrap().value, 0.0);
        assert_eq!(sftlb(&x, &y, &cfg()).unwrap().value, 0.0);
    }

    #[test]
    fn sftlb_without_features_is_stlb() {
        let x = StructuredSpace::unlabeled(space().base().clone());
        let y = StructuredSpace::unlabeled(space().base().scaled(1.7));
        let c = BoundConfig { alpha: 0.0, ..cfg() };
        let a = sftlb(&x, &y, &c).unwrap().value;
        let b = stlb(x.base(), y.base(), &c).unwrap().value;
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn order_other_than_two_is_refused() {
        let x = space();
        let c = BoundConfig { p: 1.0, ..cfg() };
        assert_eq!(stlb(x.base(), x.base(), &c).unwrap_err(), Error::UnsupportedOrder(1.0));
    }
}
