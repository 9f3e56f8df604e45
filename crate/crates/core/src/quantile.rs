//! Sampled quantile functions of local distance distributions.
//!
//! Every point `x_i` of a metric measure space carries the distribution of its
//! distances to all points (itself included, with its own mass). Sampling the
//! quantile function of that distribution at the knots of a quadrature rule,
//! and scaling by the square root of the quadrature weights, turns each point
//! into a vector in `R^r`; squared Euclidean distances between such vectors
//! approximate the squared 2-Wasserstein distance between the underlying
//! distributions.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::par;
use crate::spaces::{normalize_weights, MmSpace, StructuredSpace};

/// Knots in `(0, 1)` with positive weights.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "RawRule")]
pub struct QuadratureRule {
    knots: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(serde::Deserialize)]
struct RawRule {
    knots: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawRule> for QuadratureRule {
    type Error = Error;

    fn try_from(raw: RawRule) -> Result<Self> {
        QuadratureRule::new(raw.knots, raw.weights)
    }
}

impl QuadratureRule {
    /// Accepts any rule with strictly increasing knots in `(0,1)` and positive
    /// weights. Weights need not sum to one; see [`Self::normalization_deviation`].
    pub fn new(knots: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Domain("quadrature rule needs at least one knot".into()));
        }
        if knots.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} knots, {} weights",
                knots.len(),
                weights.len()
            )));
        }
        if knots.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
            return Err(Error::Domain("quadrature knots must lie in (0, 1)".into()));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("quadrature knots must be strictly increasing".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Domain("quadrature weights must be positive".into()));
        }
        Ok(QuadratureRule { knots, weights })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// `|sum(w) - 1|`; zero (up to rounding) for the built-in rules.
    pub fn normalization_deviation(&self) -> f64 {
        (self.weights.iter().sum::<f64>() - 1.0).abs()
    }
}

/// Equispaced midpoint rule: knots `(k - 1/2)/r`, weights `1/r`.
pub fn midpoint_rule(r: usize) -> Result<QuadratureRule> {
    if r == 0 {
        return Err(Error::Domain("midpoint rule needs r >= 1".into()));
    }
    let h = 1.0 / r as f64;
    let knots = (0..r).map(|k| (k as f64 + 0.5) * h).collect();
    Ok(QuadratureRule {
        knots,
        weights: vec![h; r],
    })
}

/// Midpoint rule on the merged cumulative-mass breakpoints of two probability
/// vectors. Exact for the 1D transport between any two distributions whose
/// sorted masses are `wa` and `wb`.
pub fn nonequispaced_midpoint_rule(wa: &[f64], wb: &[f64]) -> Result<QuadratureRule> {
    const MERGE_TOL: f64 = 1e-14;
    let wa = normalize_weights(Array1::from(wa.to_vec()))?;
    let wb = normalize_weights(Array1::from(wb.to_vec()))?;
    let cumulative = |w: &Array1<f64>| {
        let mut acc = 0.0;
        let mut v: Vec<f64> = w
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        if let Some(last) = v.last_mut() {
            *last = 1.0;
        }
        v
    };
    let mut breaks = cumulative(&wa);
    breaks.extend(cumulative(&wb));
    breaks.sort_by(f64::total_cmp);
    let mut knots = Vec::with_capacity(breaks.len());
    let mut weights = Vec::with_capacity(breaks.len());
    let mut prev = 0.0;
    for t in breaks {
        let t = t.min(1.0);
        if t - prev > MERGE_TOL {
            knots.push(0.5 * (prev + t));
            weights.push(t - prev);
            prev = t;
        }
    }
    QuadratureRule::new(knots, weights)
}

/// `inf { z : F(z) > s }` for the discrete distribution `sum masses_i delta_{values_i}`.
pub fn weighted_quantile(values: &[f64], masses: &[f64], s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("quantile level {s} outside (0, 1)")));
    }
    if values.len() != masses.len() || values.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} values, {} masses",
            values.len(),
            masses.len()
        )));
    }
    let order = sort_order(values);
    let sorted_masses: Vec<f64> = order.iter().map(|&i| masses[i]).collect();
    let idx = quantile_indices(&sorted_masses, &[s])[0];
    Ok(values[order[idx]])
}

/// Stable ascending argsort.
pub(crate) fn sort_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// For sorted masses and increasing levels, the index of the first sorted
/// atom whose cumulative mass strictly exceeds each level.
pub(crate) fn quantile_indices(sorted_masses: &[f64], levels: &[f64]) -> Vec<usize> {
    let last = sorted_masses.len() - 1;
    let mut out = Vec::with_capacity(levels.len());
    let mut idx = 0;
    let mut cum = sorted_masses[0];
    for &s in levels {
        while cum <= s && idx < last {
            idx += 1;
            cum += sorted_masses[idx];
        }
        out.push(idx);
    }
    out
}

/// Rows are `(sqrt(w_k) * q_i(s_k))_k` for the local distance distribution of
/// point `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileEmbedding {
    vectors: Array2<f64>,
    rule: QuadratureRule,
    weights: Array1<f64>,
}

impl QuantileEmbedding {
    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }
}

/// Samples the quantile function of every row's distance distribution.
pub fn embed(space: &MmSpace, rule: &QuadratureRule) -> QuantileEmbedding {
    let n = space.len();
    let r = rule.len();
    let masses = space.weights_slice();
    let scale: Vec<f64> = rule.weights().iter().map(|w| w.sqrt()).collect();
    let mut flat = vec![0.0; n * r];
    par::fill_rows(&mut flat, r, |i, out| {
        let row = space.row(i);
        let order = sort_order(row);
        let sorted_masses: Vec<f64> = order.iter().map(|&j| masses[j]).collect();
        let idx = quantile_indices(&sorted_masses, rule.knots());
        for (k, o) in out.iter_mut().enumerate() {
            *o = scale[k] * row[order[idx[k]]];
        }
    });
    QuantileEmbedding {
        vectors: Array2::from_shape_vec((n, r), flat).expect("shape"),
        rule: rule.clone(),
        weights: space.weights().clone(),
    }
}

/// Quantile vectors concatenated with features: row `i` is
/// `(sqrt(1 - alpha) q_i ; sqrt(alpha) z_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedEmbedding {
    vectors: Array2<f64>,
    alpha: f64,
    quantile_dim: usize,
    weights: Array1<f64>,
}

impl FusedEmbedding {
    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    /// Number of leading quantile columns.
    pub fn quantile_dim(&self) -> usize {
        self.quantile_dim
    }

    pub fn feature_dim(&self) -> usize {
        self.vectors.ncols() - self.quantile_dim
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }
}

pub fn fuse(qe: &QuantileEmbedding, features: &Array2<f64>, alpha: f64) -> Result<FusedEmbedding> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha = {alpha} outside [0, 1]")));
    }
    let n = qe.len();
    if features.nrows() != n {
        return Err(Error::FeatureRowMismatch {
            expected: n,
            found: features.nrows(),
        });
    }
    let r = qe.vectors.ncols();
    let d = features.ncols();
    let (a, b) = ((1.0 - alpha).sqrt(), alpha.sqrt());
    let vectors = Array2::from_shape_fn((n, r + d), |(i, k)| {
        if k < r {
            a * qe.vectors[[i, k]]
        } else {
            b * features[[i, k - r]]
        }
    });
    Ok(FusedEmbedding {
        vectors,
        alpha,
        quantile_dim: r,
        weights: qe.weights.clone(),
    })
}

/// Embeds a structured space and fuses its features in one step.
pub fn fused_embedding(
    space: &StructuredSpace,
    rule: &QuadratureRule,
    alpha: f64,
) -> Result<FusedEmbedding> {
    fuse(&embed(space.base(), rule), space.features(), alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn quantile_at_breakpoint_uses_strict_inequality() {
        let v = [4.0, 2.0, 3.0, 1.0];
        let m = [0.25; 4];
        assert_eq!(weighted_quantile(&v, &m, 0.25).unwrap(), 2.0);
        assert_eq!(weighted_quantile(&v, &m, 0.125).unwrap(), 1.0);
        assert_eq!(weighted_quantile(&v, &m, 0.99).unwrap(), 4.0);
    }

    #[test]
    fn quantile_of_point_mass() {
        for s in [1e-9, 0.3, 0.999_999] {
            assert_eq!(weighted_quantile(&[5.0], &[1.0], s).unwrap(), 5.0);
        }
    }

    #[test]
    fn quantile_level_domain() {
        assert!(weighted_quantile(&[1.0], &[1.0], 0.0).is_err());
        assert!(weighted_quantile(&[1.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn midpoint_rules() {
        let r1 = midpoint_rule(1).unwrap();
        assert_eq!(r1.knots(), &[0.5]);
        assert_eq!(r1.weights(), &[1.0]);
        let r2 = midpoint_rule(2).unwrap();
        assert_eq!(r2.knots(), &[0.25, 0.75]);
        assert_eq!(r2.weights(), &[0.5, 0.5]);
        assert_eq!(midpoint_rule(4).unwrap().knots(), &[0.125, 0.375, 0.625, 0.875]);
        assert!(midpoint_rule(0).is_err());
    }

    #[test]
    fn nonequispaced_coinciding_breakpoints() {
        let q = nonequispaced_midpoint_rule(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(q.knots(), &[0.25, 0.75]);
        assert_eq!(q.weights(), &[0.5, 0.5]);
        let q = nonequispaced_midpoint_rule(&[1.0], &[1.0]).unwrap();
        assert_eq!(q.knots(), &[0.5]);
        assert_eq!(q.weights(), &[1.0]);
    }

    #[test]
    fn nonequispaced_halves_and_thirds() {
        let t = 1.0 / 3.0;
        let q = nonequispaced_midpoint_rule(&[0.5, 0.5], &[t, t, t]).unwrap();
        // breakpoints 1/3, 1/2, 2/3, 1
        let expected_w = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0];
        let expected_k = [1.0 / 6.0, 5.0 / 12.0, 7.0 / 12.0, 5.0 / 6.0];
        assert_eq!(q.len(), 4);
        for k in 0..4 {
            assert!((q.weights()[k] - expected_w[k]).abs() < 1e-15);
            assert!((q.knots()[k] - expected_k[k]).abs() < 1e-15);
        }
        assert!(q.normalization_deviation() < 1e-15);
    }

    #[test]
    fn nonequispaced_rejects_non_simplex() {
        assert!(nonequispaced_midpoint_rule(&[0.5, 0.2], &[1.0]).is_err());
    }

    #[test]
    fn user_rules_validated() {
        assert!(QuadratureRule::new(vec![0.5, 0.2], vec![0.5, 0.5]).is_err());
        assert!(QuadratureRule::new(vec![0.0], vec![1.0]).is_err());
        assert!(QuadratureRule::new(vec![0.5], vec![0.0]).is_err());
        let q = QuadratureRule::new(vec![0.3, 0.6], vec![0.2, 0.2]).unwrap();
        assert!((q.normalization_deviation() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn embed_single_point() {
        let s = MmSpace::uniform(array![[0.0]]).unwrap();
        let e = embed(&s, &midpoint_rule(1).unwrap());
        assert_eq!(e.vectors(), &array![[0.0]]);
    }

    #[test]
    fn embed_two_points() {
        let s = MmSpace::uniform(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let e = embed(&s, &midpoint_rule(2).unwrap());
        let h = 0.5f64.sqrt();
        assert_eq!(e.vectors(), &array![[0.0, h], [0.0, h]]);
    }

    #[test]
    fn embed_is_homogeneous() {
        let s = MmSpace::uniform(array![[0.0, 1.0, 2.5], [1.0, 0.0, 2.0], [2.5, 2.0, 0.0]]).unwrap();
        let rule = midpoint_rule(5).unwrap();
        let e1 = embed(&s, &rule);
        let e3 = embed(&s.scaled(3.0), &rule);
        for (a, b) in e1.vectors().iter().zip(e3.vectors()) {
            assert!((3.0 * a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn fuse_endpoints_and_arithmetic() {
        let s = MmSpace::uniform(array![[0.0]]).unwrap();
        let mut qe = embed(&s, &midpoint_rule(1).unwrap());
        qe.vectors[[0, 0]] = 2.0;
        let f = array![[4.0]];
        let z = fuse(&qe, &f, 0.0).unwrap();
        assert_eq!(z.vectors(), &array![[2.0, 0.0]]);
        let o = fuse(&qe, &f, 1.0).unwrap();
        assert_eq!(o.vectors(), &array![[0.0, 4.0]]);
        let h = fuse(&qe, &f, 0.5).unwrap();
        let c = 0.5f64.sqrt();
        assert_eq!(h.vectors(), &array![[c * 2.0, c * 4.0]]);
        assert!(fuse(&qe, &array![[1.0], [2.0]], 0.5).is_err());
        assert!(fuse(&qe, &f, 1.5).is_err());
    }
}
