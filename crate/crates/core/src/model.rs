//! Problem and data types shared across the crate.
//!
//! Observations are stored row-major: row `i` of a [`Dataset`] is one draw of the
//! uncertain vector. Any reshaping of a flat observation into matrices (the row
//! concatenation `vec(A)`, the `(A, b, c)` triple of a quadratic constraint, the
//! coefficient blocks of a matrix inequality) goes through the helpers here so that
//! every consumer uses the same orientation.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Reproducible generator used by every stochastic operation.
pub type SeededRng = ChaCha8Rng;

/// Builds the crate's generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A matrix of `n` observations of an `m`-dimensional vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n: usize,
    m: usize,
}

impl Dataset {
    /// Builds a dataset from row-major values. Requires `n >= 1`, `m >= 1` and finite entries.
    pub fn new(values: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return invalid("dataset needs at least one row and one column");
        }
        Self::with_rows(values, n, m)
    }

    /// Builds a dataset from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != m) {
            return invalid("rows have different lengths");
        }
        Self::new(rows.concat(), rows.len(), m)
    }

    /// An empty dataset of dimension `m`, used for an empty phase of a split.
    pub fn empty(m: usize) -> Self {
        Dataset {
            values: Vec::new(),
            n: 0,
            m,
        }
    }

    fn with_rows(values: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        if values.len() != n * m {
            return invalid(format!(
                "expected {} values for {n}x{m} data, got {}",
                n * m,
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("dataset contains non-finite values");
        }
        Ok(Dataset { values, n, m })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of one observation.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Observation `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.m.max(1)).take(self.n)
    }

    /// Row-major backing storage.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Copy as an `n x m` nalgebra matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.m, &self.values)
    }

    /// Dataset made of the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.m);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            values,
            n: indices.len(),
            m: self.m,
        }
    }

    /// Coordinate-wise sample mean. Panics on an empty dataset.
    pub fn mean(&self) -> Vec<f64> {
        assert!(self.n > 0, "mean of empty dataset");
        let mut mean = vec![0.0; self.m];
        for row in self.rows() {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= self.n as f64);
        mean
    }

    /// Unbiased sample covariance (divides by `n - 1`; zero matrix when `n == 1`).
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let mut centered = self.to_matrix();
        for mut row in centered.row_iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v -= mean[j];
            }
        }
        let denom = (self.n.max(2) - 1) as f64;
        let mut cov = centered.transpose() * &centered / denom;
        symmetrize(&mut cov);
        cov
    }

    /// Reads a CSV file with one observation per row.
    pub fn read_csv(path: &Path, has_header: bool) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, has_header)
    }

    pub fn from_csv_reader<R: Read>(reader: R, has_header: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::InvalidArgument(format!("bad number {f:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    /// Writes the dataset as header-less CSV using shortest round-trip decimals.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Phase-1 / Phase-2 partition of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    /// Shape-learning part.
    pub phase1: Dataset,
    /// Size-calibration part.
    pub phase2: Dataset,
    pub seed: u64,
}

/// Splits `data` into `n1` Phase-1 rows chosen uniformly without replacement and the rest.
///
/// Rows keep their source order inside each part.
pub fn split_data(data: &Dataset, n1: usize, seed: u64) -> Result<DataSplit> {
    let n = data.n();
    if n1 > n {
        return invalid(format!("n1 = {n1} exceeds the {n} available rows"));
    }
    let mut rng = rng_from_seed(seed);
    let mut chosen = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, n1) {
        chosen[i] = true;
    }
    let first: Vec<usize> = (0..n).filter(|&i| chosen[i]).collect();
    let second: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
    Ok(DataSplit {
        phase1: data.select(&first),
        phase2: data.select(&second),
        seed,
    })
}

/// The constraint `g(x; xi)` protected by the chance constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintFamily {
    /// `xi' x <= b` with `xi` of dimension `d`.
    SingleLinear,
    /// `A x <= b` with `A` of shape `rows x d` and `xi = vec(A)` (rows concatenated).
    JointLinear { rows: usize },
    /// `x' A' A x - b' x - c <= 0` with `xi = (vec(A), b, c)` and `A` of shape `d x d`.
    Quadratic,
    /// `B + sum_j x_j Xi_j` is positive semidefinite, with `Xi_j` of side `size` and
    /// `xi` the row-major concatenation of `Xi_1, ..., Xi_d`.
    Semidefinite {
        size: usize,
        b_matrix: Vec<Vec<f64>>,
    },
}

impl ConstraintFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintFamily::SingleLinear => "single_linear",
            ConstraintFamily::JointLinear { .. } => "joint_linear",
            ConstraintFamily::Quadratic => "quadratic",
            ConstraintFamily::Semidefinite { .. } => "semidefinite",
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            ConstraintFamily::SingleLinear | ConstraintFamily::JointLinear { .. }
        )
    }

    /// Number of scalar linear rows (1 for single linear, 0 for the conic families).
    pub fn linear_rows(&self) -> usize {
        match self {
            ConstraintFamily::SingleLinear => 1,
            ConstraintFamily::JointLinear { rows } => *rows,
            _ => 0,
        }
    }

    /// Dimension of the uncertain vector for decision dimension `d`.
    pub fn data_dim(&self, d: usize) -> usize {
        match self {
            ConstraintFamily::SingleLinear => d,
            ConstraintFamily::JointLinear { rows } => rows * d,
            ConstraintFamily::Quadratic => d * d + d + 1,
            ConstraintFamily::Semidefinite { size, .. } => d * size * size,
        }
    }
}

/// A deterministic linear constraint `coeffs' x <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetConstraint {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

/// Chance-constrained program: minimize `objective' x` subject to
/// `P(g(x; xi) is satisfied) >= 1 - epsilon` and deterministic constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcpSpec {
    pub objective: Vec<f64>,
    pub family: ConstraintFamily,
    /// Right-hand sides of the linear rows; empty for the conic families.
    #[serde(default)]
    pub rhs: Vec<f64>,
    #[serde(default)]
    pub det_constraints: Vec<DetConstraint>,
    pub epsilon: f64,
    pub delta: f64,
}

impl CcpSpec {
    /// Decision dimension.
    pub fn d(&self) -> usize {
        self.objective.len()
    }

    /// Dimension of the uncertain vector.
    pub fn data_dim(&self) -> usize {
        self.family.data_dim(self.d())
    }

    /// Checks dimensions and probability ranges.
    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        if d == 0 {
            return invalid("objective must have at least one entry");
        }
        check_probability("epsilon", self.epsilon)?;
        check_probability("delta", self.delta)?;
        if self.objective.iter().any(|v| !v.is_finite()) {
            return invalid("objective has non-finite entries");
        }
        let expected_rhs = self.family.linear_rows();
        if self.rhs.len() != expected_rhs {
            return invalid(format!(
                "family {} expects {expected_rhs} rhs values, got {}",
                self.family.name(),
                self.rhs.len()
            ));
        }
        if self.rhs.iter().any(|v| !v.is_finite()) {
            return invalid("rhs has non-finite entries");
        }
        match &self.family {
            ConstraintFamily::JointLinear { rows } if *rows == 0 => {
                return invalid("joint family needs at least one row");
            }
            ConstraintFamily::Semidefinite { size, b_matrix } => {
                if *size == 0
                    || b_matrix.len() != *size
                    || b_matrix.iter().any(|r| r.len() != *size)
                {
                    return invalid("b_matrix must be size x size");
                }
                for i in 0..*size {
                    for j in 0..*size {
                        if b_matrix[i][j] != b_matrix[j][i] || !b_matrix[i][j].is_finite() {
                            return invalid("b_matrix must be finite and symmetric");
                        }
                    }
                }
            }
            _ => {}
        }
        for c in &self.det_constraints {
            if c.coeffs.len() != d || !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite())
            {
                return invalid("deterministic constraint has wrong length or non-finite data");
            }
        }
        Ok(())
    }

    /// Reads and validates a JSON specification.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: CcpSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Values `g_j(x; xi) - b_j` of the linear rows (positive means violated).
    pub fn linear_margins(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
        let d = self.d();
        (0..self.family.linear_rows())
            .map(|j| dot(&xi[j * d..(j + 1) * d], x) - self.rhs[j])
            .collect()
    }

    /// Whether the realization `xi` violates the uncertain constraint at `x`.
    pub fn is_violated(&self, x: &[f64], xi: &[f64]) -> bool {
        let d = self.d();
        match &self.family {
            ConstraintFamily::SingleLinear | ConstraintFamily::JointLinear { .. } => {
                self.linear_margins(x, xi).iter().any(|&v| v > 0.0)
            }
            ConstraintFamily::Quadratic => {
                let (a, b, c) = quadratic_parts(xi, d);
                let ax = &a * nalgebra::DVector::from_column_slice(x);
                ax.norm_squared() - dot(&b, x) - c > 0.0
            }
            ConstraintFamily::Semidefinite { size, b_matrix } => {
                let blocks = sdp_blocks(xi, d, *size);
                let mut m = DMatrix::from_fn(*size, *size, |i, j| b_matrix[i][j]);
                for (xj, blk) in x.iter().zip(&blocks) {
                    m += blk * *xj;
                }
                symmetrize(&mut m);
                let scale = m.amax().max(1.0);
                SymmetricEigen::new(m).eigenvalues.min() < -1e-12 * scale
            }
        }
    }
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("{name} must lie in (0, 1), got {p}"));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Splits a flat `vec(A)` into its `rows` rows of length `d`.
pub fn devectorize_rows(xi: &[f64], rows: usize, d: usize) -> Vec<Vec<f64>> {
    assert_eq!(xi.len(), rows * d, "vec(A) length mismatch");
    xi.chunks_exact(d).map(<[f64]>::to_vec).collect()
}

/// Splits `(vec(A), b, c)` of a quadratic constraint with `A` of shape `d x d`.
pub fn quadratic_parts(xi: &[f64], d: usize) -> (DMatrix<f64>, Vec<f64>, f64) {
    assert_eq!(xi.len(), d * d + d + 1, "quadratic data length mismatch");
    let a = DMatrix::from_row_slice(d, d, &xi[..d * d]);
    let b = xi[d * d..d * d + d].to_vec();
    (a, b, xi[d * d + d])
}

/// Inverse of [`quadratic_parts`].
pub fn quadratic_vector(a: &DMatrix<f64>, b: &[f64], c: f64) -> Vec<f64> {
    let d = b.len();
    let mut out = Vec::with_capacity(d * d + d + 1);
    for i in 0..d {
        for j in 0..d {
            out.push(a[(i, j)]);
        }
    }
    out.extend_from_slice(b);
    out.push(c);
    out
}

/// Splits the flat data of a matrix inequality into its `d` coefficient blocks of side `p`.
pub fn sdp_blocks(xi: &[f64], d: usize, p: usize) -> Vec<DMatrix<f64>> {
    assert_eq!(xi.len(), d * p * p, "semidefinite data length mismatch");
    xi.chunks_exact(p * p)
        .map(|c| DMatrix::from_row_slice(p, p, c))
        .collect()
}

/// Inverse of [`sdp_blocks`].
pub fn sdp_vector(blocks: &[DMatrix<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for b in blocks {
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                out.push(b[(i, j)]);
            }
        }
    }
    out
}
