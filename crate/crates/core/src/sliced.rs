//! Sliced 2-Wasserstein distance by Monte Carlo over random directions.

use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::ot::{wasserstein_1d_sorted, wasserstein_1d_uniform_sorted, SortedMeasure};
use crate::par;
use crate::rng::seeded_rng;

pub use crate::rng::ALGORITHM as RNG_ALGORITHM;

/// How directions on the sphere are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum DirectionRule {
    /// I.i.d. uniform directions: normalised standard Gaussian vectors.
    #[default]
    MonteCarlo,
}

/// `L` unit vectors in `R^D`, reproducible from `(rule, seed, L, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    directions: Array2<f64>,
    seed: u64,
    rule: DirectionRule,
}

impl ProjectionSet {
    pub fn new(rule: DirectionRule, seed: u64, count: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("projection dimension must be >= 1".into()));
        }
        if count == 0 {
            return Err(Error::Domain("need at least one projection".into()));
        }
        let mut rng = seeded_rng(seed);
        let mut flat = Vec::with_capacity(count * dim);
        let mut buf = vec![0.0; dim];
        for _ in 0..count {
            loop {
                for x in buf.iter_mut() {
                    *x = StandardNormal.sample(&mut rng);
                }
                let norm = buf.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-300 {
                    flat.extend(buf.iter().map(|x| x / norm));
                    break;
                }
            }
        }
        Ok(ProjectionSet {
            directions: Array2::from_shape_vec((count, dim), flat).expect("shape"),
            seed,
            rule,
        })
    }

    pub fn directions(&self) -> &Array2<f64> {
        &self.directions
    }

    pub fn direction(&self, l: usize) -> &[f64] {
        let d = self.dim();
        &self.directions.as_slice().expect("standard layout")[l * d..(l + 1) * d]
    }

    pub fn len(&self) -> usize {
        self.directions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.directions.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rule(&self) -> DirectionRule {
        self.rule
    }
}

/// Monte Carlo directions uniform on `S^{dim-1}`.
pub fn sample_directions(seed: u64, count: usize, dim: usize) -> Result<ProjectionSet> {
    ProjectionSet::new(DirectionRule::MonteCarlo, seed, count, dim)
}

/// Monte Carlo estimate of `SW_2^2` with its per-projection spread.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicedEstimate {
    /// Mean of the per-direction `W_2^2` values.
    pub value: f64,
    /// Sample standard deviation of the per-direction values.
    pub std_dev: f64,
    pub projections: usize,
}

impl SlicedEstimate {
    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.std_dev / (self.projections as f64).sqrt()
    }
}

fn project(points: &[f64], dim: usize, theta: &[f64], out: &mut [f64]) {
    for (o, x) in out.iter_mut().zip(points.chunks_exact(dim)) {
        *o = x.iter().zip(theta).map(|(a, b)| a * b).sum();
    }
}

/// Per-direction `W_2^2` between the projections of two weighted point sets.
pub fn projected_w2_values(
    a: ArrayView2<f64>,
    wa: &[f64],
    b: ArrayView2<f64>,
    wb: &[f64],
    proj: &ProjectionSet,
) -> Result<Vec<f64>> {
    let dim = proj.dim();
    if a.ncols() != dim || b.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "points in R^{} and R^{} for directions in R^{dim}",
            a.ncols(),
            b.ncols()
        )));
    }
    if a.nrows() != wa.len() || b.nrows() != wb.len() {
        return Err(Error::DimensionMismatch("points and masses differ in length".into()));
    }
    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let (sa, sb) = (a.as_slice().unwrap(), b.as_slice().unwrap());
    let (n, m) = (wa.len(), wb.len());
    let uniform = n == m && {
        let u = 1.0 / n as f64;
        wa.iter().chain(wb).all(|&w| (w - u).abs() <= 1e-14)
    };
    Ok(par::map_range(proj.len(), |l| {
        let theta = proj.direction(l);
        let mut pa = vec![0.0; n];
        let mut pb = vec![0.0; m];
        project(sa, dim, theta, &mut pa);
        project(sb, dim, theta, &mut pb);
        if uniform {
            pa.sort_by(f64::total_cmp);
            pb.sort_by(f64::total_cmp);
            wasserstein_1d_uniform_sorted(&pa, &pb, 2.0)
        } else {
            wasserstein_1d_sorted(&SortedMeasure::new(&pa, wa), &SortedMeasure::new(&pb, wb), 2.0)
        }
    }))
}

/// Sliced `W_2^2` estimate together with its Monte Carlo spread.
pub fn sw2_squared_estimate(
    a: ArrayView2<f64>,
    wa: &[f64],
    b: ArrayView2<f64>,
    wb: &[f64],
    proj: &ProjectionSet,
) -> Result<SlicedEstimate> {
    let values = projected_w2_values(a, wa, b, wb, proj)?;
    Ok(summarize(&values))
}

pub(crate) fn summarize(values: &[f64]) -> SlicedEstimate {
    let l = values.len();
    let value = par::pairwise_sum(values) / l as f64;
    let std_dev = if l > 1 {
        let dev: Vec<f64> = values.iter().map(|v| (v - value) * (v - value)).collect();
        (par::pairwise_sum(&dev) / (l - 1) as f64).sqrt()
    } else {
        0.0
    };
    SlicedEstimate {
        value,
        std_dev,
        projections: l,
    }
}

/// `(1/L) sum_l W_2^2(theta_l . A, theta_l . B)`.
pub fn sw2_squared(
    a: ArrayView2<f64>,
    wa: &[f64],
    b: ArrayView2<f64>,
    wb: &[f64],
    proj: &ProjectionSet,
) -> Result<f64> {
    Ok(sw2_squared_estimate(a, wa, b, wb, proj)?.value)
}

/// `ln A(S^n)` for the unit sphere `S^n ⊂ R^{n+1}`.
fn ln_sphere_area(n: usize) -> f64 {
    let h = (n as f64 + 1.0) / 2.0;
    std::f64::consts::LN_2 + h * std::f64::consts::PI.ln() - ln_gamma(h)
}

/// `c_{k,l}^2`, the factor by which padding `k` zero coordinates onto
/// measures in `R^l` scales their sliced `W_2^2`.
pub fn dimension_constant_squared(k: usize, l: usize) -> Result<f64> {
    if l <= 1 {
        return Err(Error::Domain(format!("dimension constant needs l > 1, got l = {l}")));
    }
    if k == 0 {
        return Err(Error::Domain("dimension constant needs k >= 1".into()));
    }
    let ln = ln_sphere_area(k + l + 1) - ln_sphere_area(l + 1) + ln_sphere_area(l - 1)
        - ln_sphere_area(k + l - 1);
    Ok(ln.exp())
}

/// `c_{k,l}`; see [`dimension_constant_squared`].
pub fn dimension_constant(k: usize, l: usize) -> Result<f64> {
    Ok(dimension_constant_squared(k, l)?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_dimensional_directions_are_signs() {
        let p = sample_directions(7, 50, 1).unwrap();
        assert!(p.directions().iter().all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn same_seed_same_directions() {
        let a = sample_directions(42, 10, 4).unwrap();
        let b = sample_directions(42, 10, 4).unwrap();
        assert_eq!(a, b);
        let c = sample_directions(43, 10, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn fewer_directions_are_a_prefix() {
        let short = sample_directions(5, 3, 4).unwrap();
        let long = sample_directions(5, 30, 4).unwrap();
        assert_eq!(short.directions(), &long.directions().slice(ndarray::s![..3, ..]));
    }

    #[test]
    fn directions_are_unit() {
        let p = sample_directions(1, 100, 6).unwrap();
        for row in p.directions().rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(sample_directions(0, 10, 0).is_err());
    }

    #[test]
    fn identical_sets_vanish() {
        let a = array![[0.0, 1.0], [2.0, 3.0], [-1.0, 0.5]];
        let w = [0.2, 0.3, 0.5];
        let p = sample_directions(3, 64, 2).unwrap();
        assert_eq!(sw2_squared(a.view(), &w, a.view(), &w, &p).unwrap(), 0.0);
    }

    #[test]
    fn one_dimensional_reduces_to_w2() {
        let a = array![[0.0], [2.0]];
        let b = array![[1.0], [3.0], [5.0]];
        let wa = [0.5, 0.5];
        let wb = [0.2, 0.3, 0.5];
        let p = sample_directions(11, 20, 1).unwrap();
        let sw = sw2_squared(a.view(), &wa, b.view(), &wb, &p).unwrap();
        let w = crate::ot::wasserstein_1d(&[0.0, 2.0], &wa, &[1.0, 3.0, 5.0], &wb, 2.0).unwrap();
        assert!((sw - w).abs() < 1e-12);
    }

    #[test]
    fn dimension_constant_closed_form() {
        let c = dimension_constant(1, 2).unwrap();
        assert!((c - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(dimension_constant(1, 1).is_err());
    }
}
