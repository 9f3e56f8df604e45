//! Wall-clock timing of bounds on random Euclidean instances.

use std::time::Instant;

use gw_bounds::bounds::QuadratureSpec;
use gw_bounds::rng::derive_seed;
use gw_bounds::shapes::gaussian_structured;
use gw_bounds::{Bound, BoundConfig, Error, Result};
use serde::Serialize;

use crate::knn::mean_std;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub bounds: Vec<Bound>,
    /// Quadrature rules to sweep for the sliced bounds.
    pub rules: Vec<QuadratureSpec>,
    /// Projection counts to sweep for the sliced bounds.
    pub projections: Vec<usize>,
    /// Dimension of the random point clouds.
    pub dim: usize,
    pub seed: u64,
    pub base: BoundConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub bound: Bound,
    pub n: usize,
    pub r: Option<String>,
    #[serde(rename = "L")]
    pub num_projections: Option<usize>,
    /// Seconds per repeat.
    pub times: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rule_label(rule: &QuadratureSpec) -> String {
    match rule {
        QuadratureSpec::Midpoint { r } => r.to_string(),
        QuadratureSpec::MatchSize => "n".into(),
        QuadratureSpec::Custom(q) => format!("custom({})", q.len()),
    }
}

/// The pair of instances timed in repeat `t` at size `n`: standard normal
/// points in `R^dim` with one standard normal feature each.
pub fn instance(seed: u64, n: usize, t: usize, dim: usize) -> Result<(gw_bounds::StructuredSpace, gw_bounds::StructuredSpace)> {
    let base = derive_seed(derive_seed(seed, n as u64), t as u64);
    Ok((
        gaussian_structured(n, dim, derive_seed(base, 0))?,
        gaussian_structured(n, dim, derive_seed(base, 1))?,
    ))
}

/// Times each bound (and each sliced configuration) on `repeats` instance
/// pairs per size. Runs sequentially so timings do not compete.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.sizes.is_empty() || cfg.repeats == 0 || cfg.bounds.is_empty() {
        return Err(Error::Domain("need sizes, bounds and repeats >= 1".into()));
    }
    if cfg.sizes.iter().any(|&n| n < 2) {
        return Err(Error::Domain("sizes must be >= 2".into()));
    }
    let mut variants: Vec<(Bound, Option<BoundConfig>, Option<String>, Option<usize>)> = Vec::new();
    for &b in &cfg.bounds {
        if b.is_sliced() {
            for rule in &cfg.rules {
                for &l in &cfg.projections {
                    let c = BoundConfig {
                        rule: rule.clone(),
                        num_projections: l,
                        ..cfg.base.clone()
                    };
                    c.validate()?;
                    variants.push((b, Some(c), Some(rule_label(rule)), Some(l)));
                }
            }
        } else {
            variants.push((b, None, None, None));
        }
    }
    let mut times = vec![Vec::new(); cfg.sizes.len() * variants.len()];
    for (si, &n) in cfg.sizes.iter().enumerate() {
        for t in 0..cfg.repeats {
            let (x, y) = instance(cfg.seed, n, t, cfg.dim)?;
            for (vi, (b, c, _, _)) in variants.iter().enumerate() {
                let c = c.as_ref().unwrap_or(&cfg.base);
                let start = Instant::now();
                let r = b.evaluate(&x, &y, c)?;
                let elapsed = start.elapsed().as_secs_f64();
                std::hint::black_box(r.value);
                times[si * variants.len() + vi].push(elapsed);
            }
        }
    }
    let mut rows = Vec::with_capacity(times.len());
    for (si, &n) in cfg.sizes.iter().enumerate() {
        for (vi, (b, _, r, l)) in variants.iter().enumerate() {
            let ts = std::mem::take(&mut times[si * variants.len() + vi]);
            let (mean, std) = mean_std(&ts);
            rows.push(BenchRow {
                bound: *b,
                n,
                r: r.clone(),
                num_projections: *l,
                median: median(&ts),
                times: ts,
                mean,
                std,
            });
        }
    }
    Ok(rows)
}
