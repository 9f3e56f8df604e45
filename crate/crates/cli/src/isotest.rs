//! Graph isomorphism testing by thresholding pair distances.

use std::fmt;
use std::str::FromStr;

use gw_bounds::graphs::{make_pair, wl_refinement, GraphModel, GraphPair, WlLabels, WlVerdict};
use gw_bounds::rng::derive_seed;
use gw_bounds::{par, Bound, BoundConfig, Error, Result};
use serde::Serialize;

use crate::knn::mean_std;

/// A distance to threshold, or a 1-WL baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bound(Bound),
    /// 1-WL with degree initial colours.
    WlDegree,
    /// 1-WL with binned node features as initial colours.
    WlFeature,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bound(b) => b.name(),
            Method::WlDegree => "wl-d",
            Method::WlFeature => "wl-f",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wl-d" => Ok(Method::WlDegree),
            "wl-f" => Ok(Method::WlFeature),
            other => other.parse().map(Method::Bound),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoConfig {
    pub model: GraphModel,
    pub n: usize,
    pub pairs: usize,
    pub repeats: usize,
    pub wl_iterations: usize,
    pub wl_bins: usize,
    /// Sanity mode: every pair is a relabelled copy.
    pub all_isomorphic: bool,
    pub seed: u64,
    pub bound: BoundConfig,
}

impl IsoConfig {
    pub fn new(model: GraphModel, n: usize, seed: u64, bound: BoundConfig) -> Self {
        IsoConfig {
            model,
            n,
            pairs: 200,
            repeats: 5,
            wl_iterations: 3,
            wl_bins: 10,
            all_isomorphic: false,
            seed,
            bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoRow {
    pub method: Method,
    /// Accuracy of each repetition.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Classifies a pair as isomorphic if its distance is exactly zero or it is
/// among the `len / 2` smallest, ranked stably by (distance, index).
pub fn decide(distances: &[f64]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    let mut iso: Vec<bool> = distances.iter().map(|&d| d == 0.0).collect();
    for &i in &order[..distances.len() / 2] {
        iso[i] = true;
    }
    iso
}

/// Pair `k` of repetition `t`; even `k` are isomorphic.
pub fn pair(cfg: &IsoConfig, t: usize, k: usize) -> Result<GraphPair> {
    let seed = derive_seed(derive_seed(cfg.seed, t as u64), k as u64);
    make_pair(&cfg.model, cfg.n, seed, cfg.all_isomorphic || k % 2 == 0)
}

fn predictions(method: Method, pairs: &[GraphPair], cfg: &IsoConfig) -> Result<Vec<bool>> {
    match method {
        Method::Bound(b) => {
            let d = par::map_range(pairs.len(), |k| b.evaluate(&pairs[k].first, &pairs[k].second, &cfg.bound));
            let d = d.into_iter().map(|r| r.map(|r| r.value)).collect::<Result<Vec<_>>>()?;
            Ok(decide(&d))
        }
        Method::WlDegree | Method::WlFeature => {
            let labels = if method == Method::WlDegree {
                WlLabels::Degree
            } else {
                WlLabels::FeatureBinned { bins: cfg.wl_bins }
            };
            Ok(pairs
                .iter()
                .map(|p| wl_refinement(&p.graphs.0, &p.graphs.1, cfg.wl_iterations, labels) == WlVerdict::PossiblyIsomorphic)
                .collect())
        }
    }
}

/// Accuracy of every method on the same pairs, per repetition.
pub fn run_isotest(cfg: &IsoConfig, methods: &[Method]) -> Result<Vec<IsoRow>> {
    if cfg.pairs == 0 || cfg.pairs % 2 != 0 {
        return Err(Error::Domain(format!("pairs must be even and positive, got {}", cfg.pairs)));
    }
    if cfg.repeats == 0 {
        return Err(Error::Domain("repeats must be >= 1".into()));
    }
    if methods.iter().any(|m| matches!(m, Method::Bound(_))) {
        cfg.bound.validate()?;
    }
    cfg.model.validate(cfg.n)?;
    let mut acc = vec![Vec::with_capacity(cfg.repeats); methods.len()];
    for t in 0..cfg.repeats {
        let pairs = par::map_range(cfg.pairs, |k| pair(cfg, t, k))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        for (m, &method) in methods.iter().enumerate() {
            let pred = predictions(method, &pairs, cfg)?;
            let correct = pred.iter().zip(&pairs).filter(|(&p, g)| p == g.isomorphic).count();
            acc[m].push(correct as f64 / pairs.len() as f64);
        }
    }
    Ok(methods
        .iter()
        .zip(acc)
        .map(|(&method, accuracies)| {
            let (mean, std) = mean_std(&accuracies);
            IsoRow { method, accuracies, mean, std }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use gw_bounds::graphs::{FeatureKind, GraphKind};

    #[test]
    fn decision_rule() {
        assert_eq!(decide(&[3.0, 1.0, 2.0, 4.0]), vec![false, true, true, false]);
        // ties at the boundary go to the lower index
        assert_eq!(decide(&[1.0, 1.0, 1.0, 1.0]), vec![true, true, false, false]);
        // exact zeros override the 50% cut
        assert_eq!(decide(&[0.0, 0.0, 0.0, 5.0]), vec![true, true, true, false]);
    }

    #[test]
    fn parse_methods() {
        assert_eq!("wl-d".parse::<Method>().unwrap(), Method::WlDegree);
        assert_eq!("STLB".parse::<Method>().unwrap(), Method::Bound(Bound::Stlb));
        assert!("wl-x".parse::<Method>().is_err());
    }

    #[test]
    fn sanity_mode_is_perfect() {
        let model = GraphModel::new(GraphKind::Ba { m: 2 }, FeatureKind::None);
        let mut cfg = IsoConfig::new(model, 8, 3, BoundConfig::default());
        cfg.pairs = 10;
        cfg.repeats = 2;
        cfg.all_isomorphic = true;
        let rows = run_isotest(&cfg, &[Method::Bound(Bound::Stlb), Method::Bound(Bound::Tlb), Method::WlDegree]).unwrap();
        for r in rows {
            assert_eq!(r.mean, 1.0, "{}", r.method);
        }
    }

    #[test]
    fn odd_pair_count_is_rejected() {
        let model = GraphModel::new(GraphKind::Rr { r: 3 }, FeatureKind::None);
        let mut cfg = IsoConfig::new(model, 10, 0, BoundConfig::default());
        cfg.pairs = 7;
        assert!(run_isotest(&cfg, &[Method::WlDegree]).is_err());
    }
}
