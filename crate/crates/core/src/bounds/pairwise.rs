//! Symmetric distance matrices over a collection of spaces.

use std::time::Instant;

use ndarray::Array2;
use serde::Serialize;

use super::slicing::sliced_result;
use super::{Bound, BoundConfig, DistanceResult};
use crate::error::{Error, Result};
use crate::par;
use crate::quantile::{embed, fuse};
use crate::sliced::{ProjectionSet, RNG_ALGORITHM};
use crate::spaces::{matrix_to_csv, StructuredSpace};

/// Distances between all pairs, plus what is needed to reproduce them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseMatrix {
    pub bound: Bound,
    pub config: BoundConfig,
    #[serde(skip)]
    pub values: Array2<f64>,
    /// False if any pair reported a solver that stopped early.
    pub converged: bool,
    pub rng: Option<&'static str>,
    /// Seconds for the whole job.
    pub wall_time: f64,
}

impl PairwiseMatrix {
    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.values)
    }

    /// JSON sidecar describing the job.
    pub fn metadata_json(&self) -> serde_json::Value {
        serde_json::json!({
            "bound": self.bound,
            "config": self.config,
            "seed": self.config.seed,
            "rng": self.rng,
            "size": self.values.nrows(),
            "converged": self.converged,
            "wall_time": self.wall_time,
        })
    }
}

/// Evaluates `bound` on every unordered pair. Sliced bounds share one set of
/// directions across all pairs, so the matrix is a pseudo-metric.
pub fn pairwise_matrix(
    spaces: &[StructuredSpace],
    bound: Bound,
    cfg: &BoundConfig,
) -> Result<PairwiseMatrix> {
    let start = Instant::now();
    let n = spaces.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let results: Vec<Result<DistanceResult>> = if bound.is_sliced() && cfg.rule.is_fixed() {
        cached_sliced(spaces, bound, cfg, &pairs)?
    } else {
        par::map_range(pairs.len(), |k| {
            let (i, j) = pairs[k];
            bound.evaluate(&spaces[i], &spaces[j], cfg)
        })
    };
    let mut values = Array2::zeros((n, n));
    let mut converged = true;
    for (&(i, j), r) in pairs.iter().zip(results) {
        let r = r?;
        converged &= r.meta.converged;
        values[[i, j]] = r.value;
        values[[j, i]] = r.value;
    }
    Ok(PairwiseMatrix {
        bound,
        config: cfg.clone(),
        values,
        converged,
        rng: bound.is_sliced().then_some(RNG_ALGORITHM),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn cached_sliced(
    spaces: &[StructuredSpace],
    bound: Bound,
    cfg: &BoundConfig,
    pairs: &[(usize, usize)],
) -> Result<Vec<Result<DistanceResult>>> {
    cfg.validate_sliced()?;
    let rule = cfg.rule.resolve(&[1.0], &[1.0])?;
    let fused = bound == Bound::Sftlb;
    let d = if fused {
        let d = spaces.first().map_or(0, |s| s.feature_dim());
        if let Some(s) = spaces.iter().find(|s| s.feature_dim() != d) {
            return Err(Error::DimensionMismatch(format!(
                "feature dimensions {d} and {}",
                s.feature_dim()
            )));
        }
        d
    } else {
        0
    };
    let embeddings: Vec<Result<Array2<f64>>> = par::map_range(spaces.len(), |i| {
        let qe = embed(spaces[i].base(), &rule);
        if fused {
            Ok(fuse(&qe, spaces[i].features(), cfg.alpha)?.vectors().clone())
        } else {
            Ok(qe.vectors().clone())
        }
    });
    let embeddings = embeddings.into_iter().collect::<Result<Vec<_>>>()?;
    let proj = ProjectionSet::new(cfg.direction_rule, cfg.seed, cfg.num_projections, rule.len() + d)?;
    let name = bound.name();
    Ok(par::map_range(pairs.len(), |k| {
        let (i, j) = pairs[k];
        sliced_result(
            embeddings[i].view(),
            spaces[i].base().weights_slice(),
            embeddings[j].view(),
            spaces[j].base().weights_slice(),
            &proj,
            name,
            Instant::now(),
        )
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::QuadratureSpec;
    use crate::spaces::MmSpace;
    use ndarray::array;

    fn spaces() -> Vec<StructuredSpace> {
        [1.0, 1.5, 3.0]
            .iter()
            .map(|&s| {
                let base = MmSpace::uniform(array![
                    [0.0, 1.0, 2.0],
                    [1.0, 0.0, 1.0 + s],
                    [2.0, 1.0 + s, 0.0]
                ])
                .unwrap();
                StructuredSpace::new(base, array![[0.0], [s], [1.0]]).unwrap()
            })
            .collect()
    }

    #[test]
    fn cached_and_direct_sliced_agree() {
        let cfg = BoundConfig {
            rule: QuadratureSpec::Midpoint { r: 3 },
            num_projections: 20,
            ..BoundConfig::default()
        };
        let s = spaces();
        for bound in [Bound::Stlb, Bound::Sftlb] {
            let m = pairwise_matrix(&s, bound, &cfg).unwrap();
            for i in 0..3 {
                assert_eq!(m.values[[i, i]], 0.0);
                for j in 0..3 {
                    assert_eq!(m.values[[i, j]], m.values[[j, i]]);
                    if i != j {
                        let direct = bound.evaluate(&s[i], &s[j], &cfg).unwrap().value;
                        assert!((direct - m.values[[i, j]]).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn metadata_names_the_bound() {
        let m = pairwise_matrix(&spaces(), Bound::Tlb, &BoundConfig::default()).unwrap();
        let meta = m.metadata_json();
        assert_eq!(meta["bound"], "tlb");
        assert_eq!(meta["size"], 3);
    }
}
