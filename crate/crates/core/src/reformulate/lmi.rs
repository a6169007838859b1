//! Linear matrix inequalities for quadratic and semidefinite constraints under
//! ellipsoidal and norm-bounded uncertainty. They are built and exported, not solved.

use nalgebra::DMatrix;

use crate::conic::Affine;
use crate::error::{invalid, Result};

/// Symmetric matrix whose entries are affine in the program variables, stored as the
/// upper triangle row by row (the layout of a PSD cone block).
#[derive(Debug, Clone, PartialEq)]
pub struct SymAffineMatrix {
    pub side: usize,
    pub upper: Vec<Affine>,
}

impl SymAffineMatrix {
    pub fn zeros(side: usize) -> Self {
        SymAffineMatrix {
            side,
            upper: vec![Affine::default(); side * (side + 1) / 2],
        }
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.side - i * (i + 1) / 2 + j
    }

    /// Mutable access to entry `(i, j)` (and hence `(j, i)`).
    pub fn entry(&mut self, i: usize, j: usize) -> &mut Affine {
        let k = self.index(i, j);
        &mut self.upper[k]
    }

    /// Numeric matrix at the variable values `z`.
    pub fn eval(&self, z: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.side, self.side);
        for i in 0..self.side {
            for j in i..self.side {
                let v = self.upper[self.index(i, j)].eval(z);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

/// One term `(A^j, b^j, c^j)` of an ellipsoidal family of quadratic data.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTerm {
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub c: f64,
}

/// LMI equivalent to `x' A' A x - b' x - c <= 0` for every
/// `(A, b, c) = term0 + sum_j u_j term_j` with `||u|| <= 1`.
///
/// With `k` directions and `A` of shape `q x d` the matrix has side `1 + k + q`:
///
/// ```text
/// [ c0 + b0'x - tau        (c_j + b_j'x)/2 ...   (A0 x)' ]
/// [ (c_j + b_j'x)/2        tau I_k               (A_j x)' ]
/// [ A0 x                   A_j x ...             I_q      ]
/// ```
pub fn rc_quadratic_ellipsoid(
    center: &QuadraticTerm,
    directions: &[QuadraticTerm],
    x: &[usize],
    tau: usize,
) -> Result<SymAffineMatrix> {
    let d = x.len();
    let q = center.a.nrows();
    let consistent = |t: &QuadraticTerm| t.a.ncols() == d && t.a.nrows() == q && t.b.len() == d;
    if !consistent(center) || !directions.iter().all(consistent) {
        return invalid("quadratic terms must share the shape of the decision vector");
    }
    let k = directions.len();
    let mut m = SymAffineMatrix::zeros(1 + k + q);
    let linear = |t: &QuadraticTerm, scale: f64| -> Affine {
        let mut e = Affine::constant(scale * t.c);
        for (j, &v) in x.iter().enumerate() {
            e.add_term(v, scale * t.b[j]);
        }
        e
    };
    let product = |t: &QuadraticTerm, row: usize| -> Affine {
        let mut e = Affine::default();
        for (j, &v) in x.iter().enumerate() {
            e.add_term(v, t.a[(row, j)]);
        }
        e
    };
    let mut corner = linear(center, 1.0);
    corner.add_term(tau, -1.0);
    *m.entry(0, 0) = corner;
    for (j, t) in directions.iter().enumerate() {
        *m.entry(0, 1 + j) = linear(t, 0.5);
        *m.entry(1 + j, 1 + j) = Affine::var(tau);
        for r in 0..q {
            *m.entry(1 + j, 1 + k + r) = product(t, r);
        }
    }
    for r in 0..q {
        *m.entry(0, 1 + k + r) = product(center, r);
        *m.entry(1 + k + r, 1 + k + r) = Affine::constant(1.0);
    }
    Ok(m)
}

/// LMI guaranteeing `B + sum_j x_j (Abar_j + Z_j) >= 0` whenever the stacked perturbation
/// `[Z_1; ...; Z_d]` has spectral norm at most `rho`:
///
/// ```text
/// [ lambda I_{dp}     rho L(x)                ]
/// [ rho L(x)'         A0(x) - lambda I_p      ]
/// ```
///
/// with `L(x) = [x_1 I_p; ...; x_d I_p]` and `A0(x) = B + sum_j x_j Abar_j`.
pub fn rc_sdp_normbounded(
    centers: &[DMatrix<f64>],
    b_matrix: &DMatrix<f64>,
    rho: f64,
    x: &[usize],
    lambda: usize,
) -> Result<SymAffineMatrix> {
    let d = x.len();
    let p = b_matrix.nrows();
    if centers.len() != d || centers.iter().any(|c| c.shape() != (p, p)) || b_matrix.ncols() != p {
        return invalid("semidefinite blocks must be d matrices of the side of B");
    }
    if !(rho >= 0.0) {
        return invalid("rho must be nonnegative");
    }
    let dp = d * p;
    let mut m = SymAffineMatrix::zeros(dp + p);
    for i in 0..dp {
        *m.entry(i, i) = Affine::var(lambda);
    }
    for (j, &v) in x.iter().enumerate() {
        for i in 0..p {
            m.entry(j * p + i, dp + i).add_term(v, rho);
        }
    }
    for r in 0..p {
        for c in r..p {
            let e = m.entry(dp + r, dp + c);
            e.constant = 0.5 * (b_matrix[(r, c)] + b_matrix[(c, r)]);
            for (j, &v) in x.iter().enumerate() {
                e.add_term(v, 0.5 * (centers[j][(r, c)] + centers[j][(c, r)]));
            }
            if r == c {
                e.add_term(lambda, -1.0);
            }
        }
    }
    Ok(m)
}
