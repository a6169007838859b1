//! Per-cone primitives used by the interior-point solver: Nesterov-Todd scalings,
//! Jordan-algebra products and step-to-boundary computations.

use super::Cone;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Zero,
    Nonneg,
    Soc,
}

/// A cone together with the rows it covers.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Block {
    pub kind: Kind,
    pub start: usize,
    pub dim: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.dim
    }
}

/// Splits a solvable cone list into row blocks. PSD cones must have been rejected earlier.
pub(crate) fn blocks(cones: &[Cone]) -> Vec<Block> {
    let mut start = 0;
    let mut out = Vec::with_capacity(cones.len());
    for cone in cones {
        let (kind, dim) = match *cone {
            Cone::Zero(d) => (Kind::Zero, d),
            Cone::Nonneg(d) => (Kind::Nonneg, d),
            Cone::SecondOrder(d) => (Kind::Soc, d),
            Cone::PsdExportOnly(_) => unreachable!("PSD cones are export-only"),
        };
        out.push(Block { kind, start, dim });
        start += dim;
    }
    out
}

/// Barrier degree of the cone product (equality rows excluded).
pub(crate) fn degree(blocks: &[Block]) -> usize {
    blocks
        .iter()
        .map(|b| match b.kind {
            Kind::Zero => 0,
            Kind::Nonneg => b.dim,
            Kind::Soc => 1,
        })
        .sum()
}

fn soc_residual(v: &[f64]) -> f64 {
    let tail = norm(&v[1..]);
    (v[0] - tail) * (v[0] + tail)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Nesterov-Todd scaling of one block: a symmetric `W` with `W z = W^{-1} s = lambda`.
#[derive(Debug, Clone)]
pub(crate) enum Scaling {
    Zero,
    /// Diagonal of `W`.
    Nonneg(Vec<f64>),
    /// `W = eta [[w0, w1'], [w1, I + w1 w1' / (1 + w0)]]`.
    Soc {
        eta: f64,
        w: Vec<f64>,
    },
}

impl Scaling {
    /// Identity scaling (zero for equality rows), used at initialization.
    pub fn identity(block: &Block) -> Self {
        match block.kind {
            Kind::Zero => Scaling::Zero,
            Kind::Nonneg => Scaling::Nonneg(vec![1.0; block.dim]),
            Kind::Soc => {
                let mut w = vec![0.0; block.dim];
                w[0] = 1.0;
                Scaling::Soc { eta: 1.0, w }
            }
        }
    }

    /// Scaling at a strictly interior pair `(s, z)`.
    pub fn nesterov_todd(block: &Block, s: &[f64], z: &[f64]) -> Self {
        match block.kind {
            Kind::Zero => Scaling::Zero,
            Kind::Nonneg => Scaling::Nonneg(s.iter().zip(z).map(|(a, b)| (a / b).sqrt()).collect()),
            Kind::Soc => {
                let s_res = soc_residual(s).max(f64::MIN_POSITIVE);
                let z_res = soc_residual(z).max(f64::MIN_POSITIVE);
                let s_scale = s_res.sqrt();
                let z_scale = z_res.sqrt();
                let sbar: Vec<f64> = s.iter().map(|v| v / s_scale).collect();
                let zbar: Vec<f64> = z.iter().map(|v| v / z_scale).collect();
                let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
                let mut w: Vec<f64> = Vec::with_capacity(s.len());
                w.push((sbar[0] + zbar[0]) / (2.0 * gamma));
                for i in 1..s.len() {
                    w.push((sbar[i] - zbar[i]) / (2.0 * gamma));
                }
                let eta = (s_res / z_res).powf(0.25);
                Scaling::Soc { eta, w }
            }
        }
    }

    /// `out = W v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Scaling::Nonneg(w) => {
                for ((o, a), b) in out.iter_mut().zip(v).zip(w) {
                    *o = a * b;
                }
            }
            Scaling::Soc { eta, w } => soc_apply(*eta, w, v, out, false),
        }
    }

    /// `out = W^{-1} v`; equality rows map to zero.
    pub fn apply_inv(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Scaling::Nonneg(w) => {
                for ((o, a), b) in out.iter_mut().zip(v).zip(w) {
                    *o = a / b;
                }
            }
            Scaling::Soc { eta, w } => soc_apply(1.0 / eta, w, v, out, true),
        }
    }
}

fn soc_apply(eta: f64, w: &[f64], v: &[f64], out: &mut [f64], inverse: bool) {
    let sign = if inverse { -1.0 } else { 1.0 };
    let w0 = w[0];
    let w1 = &w[1..];
    let v0 = v[0];
    let v1 = &v[1..];
    let w1v1 = dot(w1, v1);
    out[0] = eta * (w0 * v0 + sign * w1v1);
    let coef = sign * v0 + w1v1 / (1.0 + w0);
    for i in 0..w1.len() {
        out[i + 1] = eta * (v1[i] + coef * w1[i]);
    }
}

/// Jordan product `u o v` on one block.
pub(crate) fn jordan_product(kind: Kind, u: &[f64], v: &[f64], out: &mut [f64]) {
    match kind {
        Kind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
        Kind::Nonneg => {
            for i in 0..u.len() {
                out[i] = u[i] * v[i];
            }
        }
        Kind::Soc => {
            out[0] = dot(u, v);
            for i in 1..u.len() {
                out[i] = u[0] * v[i] + v[0] * u[i];
            }
        }
    }
}

/// Solves `lambda o x = v` on one block.
pub(crate) fn jordan_divide(kind: Kind, lambda: &[f64], v: &[f64], out: &mut [f64]) {
    match kind {
        Kind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
        Kind::Nonneg => {
            for i in 0..v.len() {
                out[i] = v[i] / lambda[i];
            }
        }
        Kind::Soc => {
            let l0 = lambda[0];
            let l1 = &lambda[1..];
            let v1 = &v[1..];
            let x0 = (l0 * v[0] - dot(l1, v1)) / soc_residual(lambda);
            out[0] = x0;
            for i in 0..l1.len() {
                out[i + 1] = (v1[i] - x0 * l1[i]) / l0;
            }
        }
    }
}

/// Adds `alpha * e` (the cone identity) to a block.
pub(crate) fn add_identity(kind: Kind, v: &mut [f64], alpha: f64) {
    match kind {
        Kind::Zero => {}
        Kind::Nonneg => v.iter_mut().for_each(|a| *a += alpha),
        Kind::Soc => v[0] += alpha,
    }
}

/// Smallest "eigenvalue" of a block: `min v_i` or `v_0 - ||v_1||`.
pub(crate) fn min_eig(kind: Kind, v: &[f64]) -> f64 {
    match kind {
        Kind::Zero => f64::INFINITY,
        Kind::Nonneg => v.iter().copied().fold(f64::INFINITY, f64::min),
        Kind::Soc => v[0] - norm(&v[1..]),
    }
}

/// Largest `alpha` with `u + alpha d` in the closed cone, for interior `u`.
pub(crate) fn max_step(kind: Kind, u: &[f64], d: &[f64]) -> f64 {
    match kind {
        Kind::Zero => f64::INFINITY,
        Kind::Nonneg => u
            .iter()
            .zip(d)
            .filter(|(_, &di)| di < 0.0)
            .map(|(&ui, &di)| -ui / di)
            .fold(f64::INFINITY, f64::min),
        Kind::Soc => soc_max_step(u, d),
    }
}

fn soc_max_step(u: &[f64], d: &[f64]) -> f64 {
    let dn = norm(&d[1..]);
    let a = (d[0] - dn) * (d[0] + dn);
    let b = u[0] * d[0] - dot(&u[1..], &d[1..]);
    let c = soc_residual(u).max(0.0);
    let mut best = if d[0] < 0.0 {
        -u[0] / d[0]
    } else {
        f64::INFINITY
    };
    // roots of a t^2 + 2 b t + c
    if a == 0.0 {
        if b < 0.0 {
            best = best.min(-c / (2.0 * b));
        }
    } else {
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let q = -(b + b.signum() * disc.sqrt());
            let mut roots = vec![];
            if q != 0.0 {
                roots.push(q / a);
                roots.push(c / q);
            } else {
                roots.push((-c / a).abs().sqrt());
            }
            for r in roots {
                if r > 0.0 {
                    best = best.min(r);
                }
            }
        }
    }
    best
}
