//! Cone-program representation, an interior-point solver for linear and second-order
//! cones, and exporters.
//!
//! Programs are kept in the standard form
//!
//! ```text
//! minimize c'x  subject to  b - A x in K,   K = K_1 x ... x K_p
//! ```
//!
//! where each `K_i` is the zero cone, the nonnegative orthant, a second-order cone
//! `{(t, u) : t >= ||u||}`, or a PSD cone that is only ever exported. A PSD block of side
//! `p` occupies `p(p+1)/2` rows listing the upper-triangular entries row by row, each
//! row carrying the matrix entry itself (no off-diagonal scaling).

mod cones;
mod export;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use export::{export, pretty_print, ExportFormat};
pub use solver::{solve, IterateInfo, SolverSettings};

/// One factor of the cone product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cone {
    /// `{0}^dim`: equality rows.
    Zero(usize),
    /// Nonnegative orthant of the given dimension.
    Nonneg(usize),
    /// `{(t, u) in R x R^(dim-1) : t >= ||u||_2}`.
    SecondOrder(usize),
    /// Symmetric PSD matrices of the given side; export only.
    PsdExportOnly(usize),
}

impl Cone {
    /// Number of rows of `A` covered by the cone.
    pub fn rows(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::Nonneg(d) | Cone::SecondOrder(d) => d,
            Cone::PsdExportOnly(p) => p * (p + 1) / 2,
        }
    }
}

/// Coordinate-format sparse matrix with entries sorted by `(row, col)` and no duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    /// Builds from arbitrary triplets, summing duplicates and dropping exact zeros.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => entries.push((r, c, v)),
            }
        }
        entries.retain(|e| e.2 != 0.0);
        SparseMatrix {
            nrows,
            ncols,
            entries,
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }
}

/// A cone program in standard form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    /// Cost vector `c`.
    pub objective: Vec<f64>,
    /// Constraint matrix `A` (rows x variables).
    pub a: SparseMatrix,
    /// Offset `b`.
    pub b: Vec<f64>,
    /// Ordered cone product covering the rows of `A`.
    pub cones: Vec<Cone>,
}

impl ConicProgram {
    /// Validates dimensions, cone coverage and finiteness.
    pub fn new(
        objective: Vec<f64>,
        a: SparseMatrix,
        b: Vec<f64>,
        cones: Vec<Cone>,
    ) -> Result<Self> {
        let prog = ConicProgram {
            objective,
            a,
            b,
            cones,
        };
        prog.validate()?;
        Ok(prog)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.ncols != self.objective.len() {
            return invalid("A has a different number of columns than the objective");
        }
        if self.a.nrows != self.b.len() {
            return invalid("A has a different number of rows than b");
        }
        if self.cones.iter().any(|c| c.rows() == 0) {
            return invalid("cones must have positive dimension");
        }
        let rows: usize = self.cones.iter().map(Cone::rows).sum();
        if rows != self.b.len() {
            return invalid(format!(
                "cone rows {rows} differ from {} constraint rows",
                self.b.len()
            ));
        }
        if self.objective.iter().chain(&self.b).any(|v| !v.is_finite())
            || self.a.entries.iter().any(|e| !e.2.is_finite())
        {
            return invalid("program data must be finite");
        }
        if self
            .a
            .entries
            .iter()
            .any(|e| e.0 >= self.a.nrows || e.1 >= self.a.ncols)
        {
            return invalid("matrix entry out of range");
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// Whether any PSD block is present.
    pub fn is_export_only(&self) -> bool {
        self.cones
            .iter()
            .any(|c| matches!(c, Cone::PsdExportOnly(_)))
    }

    /// Copy with row `i` of `(A, b)` multiplied by `scales[i]`. Rows of one second-order or
    /// PSD block must share a scale for the result to describe the same feasible set.
    pub fn scale_rows(&self, scales: &[f64]) -> ConicProgram {
        let mut out = self.clone();
        for e in &mut out.a.entries {
            e.2 *= scales[e.0];
        }
        for (v, s) in out.b.iter_mut().zip(scales) {
            *v *= s;
        }
        out
    }

    /// Serializes to the lossless JSON schema.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let prog: ConicProgram = serde_json::from_str(text)?;
        prog.validate()?;
        Ok(prog)
    }
}

/// Affine expression `constant + sum coeff * var` in the program variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Affine {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn var(i: usize) -> Self {
        Affine {
            constant: 0.0,
            terms: vec![(i, 1.0)],
        }
    }

    pub fn from_terms(constant: f64, terms: Vec<(usize, f64)>) -> Self {
        Affine { constant, terms }
    }

    pub fn add_term(&mut self, var: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((var, coeff));
        }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&mut self, other: &Affine, factor: f64) {
        if factor == 0.0 {
            return;
        }
        self.constant += factor * other.constant;
        for &(v, c) in &other.terms {
            self.terms.push((v, factor * c));
        }
    }

    pub fn scaled(&self, factor: f64) -> Affine {
        let mut out = Affine::default();
        out.add_scaled(self, factor);
        out
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.1 == 0.0)
    }

    /// Value at the point `z`.
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * z[v]).sum::<f64>()
    }
}

/// Incremental construction of a [`ConicProgram`].
///
/// Rows are emitted in the order: all equality rows, all nonnegative rows, then each
/// second-order block and each PSD block in insertion order.
#[derive(Debug, Clone, Default)]
pub struct ProgramBuilder {
    objective: Vec<f64>,
    zero: Vec<Affine>,
    nonneg: Vec<Affine>,
    soc: Vec<Vec<Affine>>,
    psd: Vec<(usize, Vec<Affine>)>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a free variable with zero cost and returns its index.
    pub fn new_var(&mut self) -> usize {
        self.objective.push(0.0);
        self.objective.len() - 1
    }

    pub fn new_vars(&mut self, k: usize) -> Vec<usize> {
        (0..k).map(|_| self.new_var()).collect()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    /// `expr = 0`.
    pub fn add_zero(&mut self, expr: Affine) {
        self.zero.push(expr);
    }

    /// `expr >= 0`.
    pub fn add_nonneg(&mut self, expr: Affine) {
        self.nonneg.push(expr);
    }

    /// `lhs <= rhs`.
    pub fn add_le(&mut self, lhs: &Affine, rhs: &Affine) {
        let mut e = rhs.clone();
        e.add_scaled(lhs, -1.0);
        self.add_nonneg(e);
    }

    /// `exprs[0] >= ||exprs[1..]||_2`.
    pub fn add_soc(&mut self, exprs: Vec<Affine>) {
        assert!(!exprs.is_empty(), "empty second-order block");
        self.soc.push(exprs);
    }

    /// Symmetric matrix of side `side` whose upper triangle (row by row) is `upper`
    /// must be positive semidefinite.
    pub fn add_psd(&mut self, side: usize, upper: Vec<Affine>) {
        assert_eq!(upper.len(), side * (side + 1) / 2, "PSD entry count");
        self.psd.push((side, upper));
    }

    pub fn num_soc(&self) -> usize {
        self.soc.len()
    }

    pub fn build(self) -> ConicProgram {
        let n = self.objective.len();
        let mut triplets = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        let push_row =
            |expr: &Affine, triplets: &mut Vec<(usize, usize, f64)>, b: &mut Vec<f64>| {
                let row = b.len();
                b.push(expr.constant);
                for &(v, c) in &expr.terms {
                    triplets.push((row, v, -c));
                }
            };
        if !self.zero.is_empty() {
            self.zero
                .iter()
                .for_each(|e| push_row(e, &mut triplets, &mut b));
            cones.push(Cone::Zero(self.zero.len()));
        }
        if !self.nonneg.is_empty() {
            self.nonneg
                .iter()
                .for_each(|e| push_row(e, &mut triplets, &mut b));
            cones.push(Cone::Nonneg(self.nonneg.len()));
        }
        for block in &self.soc {
            block
                .iter()
                .for_each(|e| push_row(e, &mut triplets, &mut b));
            cones.push(Cone::SecondOrder(block.len()));
        }
        for (side, block) in &self.psd {
            block
                .iter()
                .for_each(|e| push_row(e, &mut triplets, &mut b));
            cones.push(Cone::PsdExportOnly(*side));
        }
        let a = SparseMatrix::from_triplets(b.len(), n, triplets);
        ConicProgram {
            objective: self.objective,
            a,
            b,
            cones,
        }
    }
}

/// Outcome class of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
    ExportOnly,
}

/// Solver output. For `Infeasible` the dual vector `y` is a normalized Farkas certificate
/// (`b'y = -1`); for `Unbounded` the primal vector `x` is an improving ray (`c'x = -1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    /// `c'x`.
    pub primal_objective: f64,
    /// `-b'y`.
    pub dual_objective: f64,
    /// Smaller of the absolute and relative duality gap.
    pub gap: f64,
    /// Relative primal infeasibility.
    pub primal_residual: f64,
    /// Relative dual infeasibility.
    pub dual_residual: f64,
    /// Residual of the infeasibility or unboundedness certificate, when one was found.
    pub certificate_residual: Option<f64>,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<IterateInfo>,
}

impl Solution {
    /// Placeholder result for programs that can only be exported.
    pub fn export_only(num_vars: usize) -> Self {
        Solution {
            status: SolveStatus::ExportOnly,
            x: vec![f64::NAN; num_vars],
            s: Vec::new(),
            y: Vec::new(),
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            gap: f64::NAN,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            certificate_residual: None,
            iterations: 0,
            trace: Vec::new(),
        }
    }
}
