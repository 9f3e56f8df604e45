//! Closed-form transport on the real line.
//!
//! Sorting both supports and merging their cumulative masses yields the
//! monotone (quantile) coupling, which is optimal for every convex cost
//! `|x - y|^p`. The merged coupling has at most `n + m - 1` cells.

use crate::error::{Error, Result};
use crate::quantile::sort_order;

/// Calls `f(i, j, mass)` for every cell of the monotone coupling between two
/// sorted mass vectors. Indices refer to positions in the sorted order.
#[inline]
pub(crate) fn for_each_cell(ma: &[f64], mb: &[f64], mut f: impl FnMut(usize, usize, f64)) {
    let (n, m) = (ma.len(), mb.len());
    if n == 0 || m == 0 {
        return;
    }
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (ma[0], mb[0]);
    let mut t = 0.0;
    loop {
        let next = fa.min(fb);
        let len = next - t;
        if len > 0.0 {
            f(i, j, len);
        }
        t = next;
        let adv_a = fa <= fb;
        let adv_b = fb <= fa;
        if adv_a {
            i += 1;
            if i == n {
                break;
            }
            fa += ma[i];
        }
        if adv_b {
            j += 1;
            if j == m {
                break;
            }
            fb += mb[j];
        }
    }
}

#[inline]
pub(crate) fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 2.0 {
        a * a
    } else if p == 1.0 {
        a
    } else {
        a.powf(p)
    }
}

/// A 1D distribution with its support sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedMeasure {
    pub values: Vec<f64>,
    pub masses: Vec<f64>,
}

impl SortedMeasure {
    pub fn new(values: &[f64], masses: &[f64]) -> Self {
        let order = sort_order(values);
        SortedMeasure {
            values: order.iter().map(|&i| values[i]).collect(),
            masses: order.iter().map(|&i| masses[i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `W_p^p` between two sorted measures.
pub fn wasserstein_1d_sorted(a: &SortedMeasure, b: &SortedMeasure, p: f64) -> f64 {
    let mut acc = 0.0;
    for_each_cell(&a.masses, &b.masses, |i, j, w| {
        acc += w * abs_pow(a.values[i] - b.values[j], p);
    });
    acc
}

/// `W_p^p` between two uniform measures on sorted supports of equal size.
#[inline]
pub(crate) fn wasserstein_1d_uniform_sorted(a: &[f64], b: &[f64], p: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let sum: f64 = if p == 2.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    } else {
        a.iter().zip(b).map(|(x, y)| abs_pow(x - y, p)).sum()
    };
    sum / a.len() as f64
}

fn check_masses(masses: &[f64], what: &str) -> Result<()> {
    if masses.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::Domain(format!("{what} masses must be nonnegative")));
    }
    let s: f64 = masses.iter().sum();
    if (s - 1.0).abs() > crate::spaces::WEIGHT_RENORM_TOL {
        return Err(Error::WeightSum { sum: s });
    }
    Ok(())
}

/// `W_p^p` between `sum wa_i delta_{va_i}` and `sum wb_j delta_{vb_j}`.
pub fn wasserstein_1d(va: &[f64], wa: &[f64], vb: &[f64], wb: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("order p = {p} must be >= 1")));
    }
    if va.len() != wa.len() || vb.len() != wb.len() {
        return Err(Error::DimensionMismatch("values and masses differ in length".into()));
    }
    if va.is_empty() || vb.is_empty() {
        return Err(Error::Domain("empty measure".into()));
    }
    if va.iter().chain(vb).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "support" });
    }
    check_masses(wa, "source")?;
    check_masses(wb, "target")?;
    Ok(wasserstein_1d_sorted(
        &SortedMeasure::new(va, wa),
        &SortedMeasure::new(vb, wb),
        p,
    ))
}

/// `W_2^2` between two sorted measures and its gradient with respect to the
/// sorted support of `a`, holding the monotone coupling fixed.
pub fn w2_squared_with_grad(a: &SortedMeasure, b: &SortedMeasure) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; a.len()];
    let mut acc = 0.0;
    for_each_cell(&a.masses, &b.masses, |i, j, w| {
        let d = a.values[i] - b.values[j];
        acc += w * d * d;
        grad[i] += 2.0 * w * d;
    });
    (acc, grad)
}
