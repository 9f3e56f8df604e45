//! Finite metric measure spaces, structured (labelled) spaces and point clouds.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deviation of the weight sum from 1 that is silently renormalised.
pub const WEIGHT_RENORM_TOL: f64 = 1e-6;
/// Deviation of the weight sum from 1 accepted by validation.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Slack allowed by the strict triangle-inequality check.
pub const TRIANGLE_TOL: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-12;

/// A finite metric measure space: a symmetric distance matrix with zero
/// diagonal and a probability vector over its points.
#[derive(Debug, Clone, PartialEq)]
pub struct MmSpace {
    distances: Array2<f64>,
    weights: Array1<f64>,
}

impl MmSpace {
    /// Builds a space, renormalising weights whose sum is within
    /// [`WEIGHT_RENORM_TOL`] of one, and validates it in permissive mode.
    pub fn new(distances: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        let weights = normalize_weights(weights)?;
        let space = MmSpace {
            distances: distances.as_standard_layout().into_owned(),
            weights,
        };
        space.validate(false)?;
        Ok(space)
    }

    /// Builds a space with uniform weights.
    pub fn uniform(distances: Array2<f64>) -> Result<Self> {
        let n = distances.nrows();
        if n == 0 {
            return Err(Error::Domain("empty space".into()));
        }
        Self::new(distances, Array1::from_elem(n, 1.0 / n as f64))
    }

    /// Builds a space from nested rows; missing weights default to uniform.
    pub fn from_rows(rows: &[Vec<f64>], weights: Option<&[f64]>) -> Result<Self> {
        let distances = rows_to_matrix(rows, "distances")?;
        match weights {
            Some(w) => Self::new(distances, Array1::from(w.to_vec())),
            None => Self::uniform(distances),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn distances(&self) -> &Array2<f64> {
        &self.distances
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn weights_slice(&self) -> &[f64] {
        self.weights.as_slice().expect("weights are contiguous")
    }

    /// Distance row `i` as a contiguous slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.distances.as_slice().expect("standard layout")[i * n..(i + 1) * n]
    }

    /// True when every weight equals `1/n` up to rounding.
    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.weights.iter().all(|&w| (w - u).abs() <= 1e-14)
    }

    /// Checks every type invariant; `strict` additionally checks the
    /// triangle inequality (cubic cost).
    pub fn validate(&self, strict: bool) -> Result<()> {
        let n = self.weights.len();
        if n == 0 {
            return Err(Error::Domain("empty space".into()));
        }
        let (rows, cols) = self.distances.dim();
        if rows != n || cols != n {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} distance matrix for {n} weights"
            )));
        }
        check_weights(self.weights.view())?;
        let d = &self.distances;
        for i in 0..n {
            for j in 0..n {
                let v = d[[i, j]];
                if !v.is_finite() {
                    return Err(Error::NonFinite { what: "distances" });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry { i, j, value: v });
                }
            }
            if d[[i, i]] != 0.0 {
                return Err(Error::NonzeroDiagonal { i, value: d[[i, i]] });
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (d[[i, j]], d[[j, i]]);
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::Asymmetric { i, j, a, b });
                }
            }
        }
        if strict {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        if d[[i, k]] > d[[i, j]] + d[[j, k]] + TRIANGLE_TOL {
                            return Err(Error::TriangleViolation { i, j, k });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Relabels points: point `i` of the result is point `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> MmSpace {
        let n = self.len();
        assert_eq!(perm.len(), n, "permutation length");
        let distances = Array2::from_shape_fn((n, n), |(i, j)| self.distances[[perm[i], perm[j]]]);
        let weights = perm.iter().map(|&p| self.weights[p]).collect();
        MmSpace { distances, weights }
    }

    /// Multiplies every distance by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> MmSpace {
        MmSpace {
            distances: &self.distances * factor,
            weights: self.weights.clone(),
        }
    }
}

/// A metric measure space whose points carry Euclidean feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredSpace {
    base: MmSpace,
    features: Array2<f64>,
}

impl StructuredSpace {
    pub fn new(base: MmSpace, features: Array2<f64>) -> Result<Self> {
        let s = StructuredSpace {
            base,
            features: features.as_standard_layout().into_owned(),
        };
        s.validate(false)?;
        Ok(s)
    }

    /// Wraps a space with zero-dimensional features.
    pub fn unlabeled(base: MmSpace) -> Self {
        let n = base.len();
        StructuredSpace {
            base,
            features: Array2::zeros((n, 0)),
        }
    }

    pub fn base(&self) -> &MmSpace {
        &self.base
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        let d = self.feature_dim();
        &self.features.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn validate(&self, strict: bool) -> Result<()> {
        self.base.validate(strict)?;
        if self.features.nrows() != self.base.len() {
            return Err(Error::FeatureRowMismatch {
                expected: self.base.len(),
                found: self.features.nrows(),
            });
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "features" });
        }
        Ok(())
    }

    pub fn permuted(&self, perm: &[usize]) -> StructuredSpace {
        StructuredSpace {
            base: self.base.permuted(perm),
            features: self.features.select(Axis(0), perm),
        }
    }

    /// Scales distances and features by the same factor.
    pub fn scaled(&self, factor: f64) -> StructuredSpace {
        StructuredSpace {
            base: self.base.scaled(factor),
            features: &self.features * factor,
        }
    }

    pub fn into_base(self) -> MmSpace {
        self.base
    }
}

impl From<MmSpace> for StructuredSpace {
    fn from(base: MmSpace) -> Self {
        StructuredSpace::unlabeled(base)
    }
}

/// Weighted points in Euclidean space.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Array2<f64>,
    weights: Array1<f64>,
}

impl PointCloud {
    pub fn new(points: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        if points.nrows() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points for {} weights",
                points.nrows(),
                weights.len()
            )));
        }
        if points.nrows() == 0 {
            return Err(Error::Domain("empty point cloud".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "points" });
        }
        let weights = normalize_weights(weights)?;
        Ok(PointCloud {
            points: points.as_standard_layout().into_owned(),
            weights,
        })
    }

    pub fn uniform(points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::new(points, Array1::from_elem(n, 1.0 / n.max(1) as f64))
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

/// Pairwise Euclidean distances between rows of `points`.
pub fn euclidean_distances(points: &Array2<f64>) -> Array2<f64> {
    let n = points.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// The metric measure space induced by the Euclidean metric on a point cloud.
pub fn mm_from_point_cloud(pc: &PointCloud) -> Result<MmSpace> {
    MmSpace::new(euclidean_distances(pc.points()), pc.weights().clone())
}

/// On-disk formats for spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceFormat {
    /// Plain comma-separated distance matrix, no header, uniform weights.
    CsvMatrix,
    /// JSON object with `distances`, optional `weights` and `features`.
    JsonStructured,
}

impl SpaceFormat {
    /// Guesses the format from a file extension (`.json` or anything else).
    pub fn from_path(path: &Path) -> SpaceFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => SpaceFormat::JsonStructured,
            _ => SpaceFormat::CsvMatrix,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceDoc {
    distances: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<Vec<f64>>>,
}

/// Parses a space from text in the given format.
pub fn parse_space(text: &str, format: SpaceFormat) -> Result<StructuredSpace> {
    match format {
        SpaceFormat::CsvMatrix => {
            let rows = parse_csv_matrix(text)?;
            Ok(StructuredSpace::unlabeled(MmSpace::from_rows(&rows, None)?))
        }
        SpaceFormat::JsonStructured => {
            let doc: SpaceDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
                line: e.line(),
                field: e.column(),
                msg: e.to_string(),
            })?;
            let base = MmSpace::from_rows(&doc.distances, doc.weights.as_deref())?;
            match doc.features {
                None => Ok(StructuredSpace::unlabeled(base)),
                Some(rows) => {
                    if rows.len() != base.len() {
                        return Err(Error::FeatureRowMismatch {
                            expected: base.len(),
                            found: rows.len(),
                        });
                    }
                    let d = rows.first().map_or(0, Vec::len);
                    let features = if d == 0 && rows.iter().all(Vec::is_empty) {
                        Array2::zeros((rows.len(), 0))
                    } else {
                        rows_to_matrix(&rows, "features")?
                    };
                    StructuredSpace::new(base, features)
                }
            }
        }
    }
}

/// Loads and validates a space from disk.
pub fn load_space(path: &Path, format: SpaceFormat) -> Result<StructuredSpace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_space(&text, format)
}

/// Serialises a space. Floats use the shortest representation that parses
/// back to the identical value. The CSV format stores distances only.
pub fn format_space(space: &StructuredSpace, format: SpaceFormat) -> String {
    match format {
        SpaceFormat::CsvMatrix => matrix_to_csv(space.base().distances()),
        SpaceFormat::JsonStructured => {
            let doc = SpaceDoc {
                distances: matrix_rows(space.base().distances()),
                weights: Some(space.base().weights().to_vec()),
                features: (space.feature_dim() > 0).then(|| matrix_rows(space.features())),
            };
            serde_json::to_string(&doc).expect("finite floats serialise")
        }
    }
}

pub fn save_space(path: &Path, space: &StructuredSpace, format: SpaceFormat) -> Result<()> {
    std::fs::write(path, format_space(space, format)).map_err(|e| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Writes a matrix as headerless CSV.
pub fn matrix_to_csv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses a headerless numeric CSV into rows.
pub fn parse_csv_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(fi, field)| {
                field.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: li + 1,
                    field: fi + 1,
                    msg: format!("{:?}: {e}", field.trim()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn matrix_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &'static str) -> Result<Array2<f64>> {
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if what == "distances" {
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                row,
                cols: r.len(),
            });
        }
    } else if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch(format!("ragged {what} rows")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((n, cols), flat)
        .map_err(|e| Error::DimensionMismatch(format!("{what}: {e}")))
}

fn check_weights(w: ArrayView1<f64>) -> Result<()> {
    for (i, &v) in w.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { what: "weights" });
        }
        if v < 0.0 {
            return Err(Error::NegativeWeight { i, value: v });
        }
    }
    let sum: f64 = w.sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::WeightSum { sum });
    }
    Ok(())
}

/// Validates a probability vector. Drift up to [`WEIGHT_RENORM_TOL`] is
/// renormalised away; vectors already within [`WEIGHT_SUM_TOL`] are returned
/// bit-for-bit.
pub fn normalize_weights(w: Array1<f64>) -> Result<Array1<f64>> {
    for (i, &v) in w.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { what: "weights" });
        }
        if v < 0.0 {
            return Err(Error::NegativeWeight { i, value: v });
        }
    }
    let sum: f64 = w.sum();
    if (sum - 1.0).abs() > WEIGHT_RENORM_TOL {
        return Err(Error::WeightSum { sum });
    }
    if (sum - 1.0).abs() <= WEIGHT_SUM_TOL {
        Ok(w)
    } else {
        Ok(w / sum)
    }
}
