//! Synthetic 2D point-cloud shapes and random Euclidean instances.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng};
use crate::spaces::{mm_from_point_cloud, PointCloud, StructuredSpace};

/// Standard deviation of the Gaussian jitter added to every point.
pub const JITTER: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Outline of an ellipse with random aspect ratio.
    Ellipse,
    /// Outline of a five-pointed star.
    Star,
    /// Filled plus sign.
    Cross,
    /// Filled annular arc open on one side.
    Horseshoe,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Ellipse, Shape::Star, Shape::Cross, Shape::Horseshoe];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Ellipse => "ellipse",
            Shape::Star => "star",
            Shape::Cross => "cross",
            Shape::Horseshoe => "horseshoe",
        }
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Domain(format!("unknown shape `{s}`")))
    }
}

fn star_point(rng: &mut ChaCha8Rng) -> [f64; 2] {
    let vertex = |k: usize| {
        let radius = if k % 2 == 0 { 1.0 } else { 0.45 };
        let a = PI / 2.0 + k as f64 * PI / 5.0;
        [radius * a.cos(), radius * a.sin()]
    };
    let k = rng.random_range(0..10);
    let t: f64 = rng.random();
    let (a, b) = (vertex(k), vertex(k + 1));
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn raw_point(shape: Shape, aspect: f64, rng: &mut ChaCha8Rng) -> [f64; 2] {
    match shape {
        Shape::Ellipse => {
            let t = rng.random_range(0.0..2.0 * PI);
            [t.cos(), aspect * t.sin()]
        }
        Shape::Star => star_point(rng),
        Shape::Cross => {
            let long = rng.random_range(-1.0..1.0);
            let short = rng.random_range(-0.2..0.2);
            if rng.random::<bool>() {
                [long, short]
            } else {
                [short, long]
            }
        }
        Shape::Horseshoe => {
            let t = rng.random_range(0.3 * PI..1.7 * PI);
            let r = rng.random_range(0.6..1.0);
            [r * t.cos(), r * t.sin()]
        }
    }
}

/// `n` jittered points of `shape`, randomly rotated.
pub fn sample_shape(shape: Shape, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::Domain("need at least one point".into()));
    }
    let mut rng = seeded_rng(seed);
    let aspect = rng.random_range(0.45..0.6);
    let angle = rng.random_range(0.0..2.0 * PI);
    let (c, s) = (angle.cos(), angle.sin());
    let mut pts = Array2::zeros((n, 2));
    for i in 0..n {
        let [x, y] = raw_point(shape, aspect, &mut rng);
        let jx: f64 = StandardNormal.sample(&mut rng);
        let jy: f64 = StandardNormal.sample(&mut rng);
        pts[[i, 0]] = c * x - s * y + JITTER * jx;
        pts[[i, 1]] = s * x + c * y + JITTER * jy;
    }
    PointCloud::uniform(pts)
}

/// `per_class` samples of each shape with `n` points; labels index
/// [`Shape::ALL`].
pub fn shape_dataset(per_class: usize, n: usize, seed: u64) -> Result<(Vec<PointCloud>, Vec<usize>)> {
    let mut clouds = Vec::with_capacity(per_class * Shape::ALL.len());
    let mut labels = Vec::with_capacity(per_class * Shape::ALL.len());
    for (label, &shape) in Shape::ALL.iter().enumerate() {
        for k in 0..per_class {
            let idx = (label * per_class + k) as u64;
            clouds.push(sample_shape(shape, n, derive_seed(seed, idx))?);
            labels.push(label);
        }
    }
    Ok((clouds, labels))
}

/// Standard normal points in `R^dim` with one standard normal feature per
/// point, as a structured space with Euclidean distances.
pub fn gaussian_structured(n: usize, dim: usize, seed: u64) -> Result<StructuredSpace> {
    let mut rng = seeded_rng(seed);
    let pts = Array2::from_shape_fn((n, dim), |_| StandardNormal.sample(&mut rng));
    let features = Array2::from_shape_fn((n, 1), |_| StandardNormal.sample(&mut rng));
    let base = mm_from_point_cloud(&PointCloud::new(pts, Array1::from_elem(n, 1.0 / n as f64))?)?;
    StructuredSpace::new(base, features)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_are_seeded() {
        for s in Shape::ALL {
            let a = sample_shape(s, 30, 4).unwrap();
            let b = sample_shape(s, 30, 4).unwrap();
            assert_eq!(a, b);
            assert!(a.points().iter().all(|v| v.abs() < 1.5));
        }
    }

    #[test]
    fn dataset_labels() {
        let (clouds, labels) = shape_dataset(3, 10, 0).unwrap();
        assert_eq!(clouds.len(), 12);
        assert_eq!(labels, vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]);
    }

    #[test]
    fn gaussian_instance_shape() {
        let s = gaussian_structured(7, 2, 1).unwrap();
        assert_eq!(s.len(), 7);
        assert_eq!(s.feature_dim(), 1);
        s.validate(true).unwrap();
    }
}
