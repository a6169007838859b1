//! Dense primal-dual interior-point method on the homogeneous self-dual embedding.
//!
//! The embedding is
//!
//! ```text
//! A'z + c tau = 0,   A x + s - b tau = 0,   c'x + b'z + kappa = 0,
//! s in K, z in K*, tau, kappa >= 0,
//! ```
//!
//! solved with Nesterov-Todd scaling and Mehrotra's predictor-corrector. The Newton
//! system is reduced to the variables `x` and the duals of the equality rows; every
//! other dual block is eliminated through its scaling. Data are Ruiz-equilibrated
//! before solving and all termination tests use the original data.

use nalgebra::{DMatrix, LU};
use serde::{Deserialize, Serialize};

use super::cones::{self, Block, Kind, Scaling};
use super::{ConicProgram, Solution, SolveStatus};
use crate::error::{Error, Result};

/// Tolerances and limits for [`solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Record per-iteration diagnostics in [`Solution::trace`].
    pub record_trace: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            record_trace: false,
        }
    }
}

/// Diagnostics of one iterate, in terms of the original data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateInfo {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub mu: f64,
    pub tau: f64,
    pub kappa: f64,
    pub step: f64,
}

const STEP_FRACTION: f64 = 0.99;
const STATIC_REG: f64 = 1e-10;

/// Solves a program without PSD blocks.
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Result<Solution> {
    if prog.is_export_only() {
        return Err(Error::ExportOnly);
    }
    prog.validate()?;
    if prog.num_rows() == 0 {
        return Ok(unconstrained(prog));
    }
    let blocks = cones::blocks(&prog.cones);
    let a_orig = prog.a.to_dense();
    let (drow, ecol) = equilibrate(&a_orig, &blocks);
    let mut a = a_orig;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            a[(i, j)] *= drow[i] * ecol[j];
        }
    }
    let b: Vec<f64> = prog.b.iter().zip(&drow).map(|(v, d)| v * d).collect();
    let c: Vec<f64> = prog
        .objective
        .iter()
        .zip(&ecol)
        .map(|(v, e)| v * e)
        .collect();
    let ipm = Ipm {
        at: a.transpose(),
        a,
        b,
        c,
        drow,
        ecol,
        zero_rows: blocks
            .iter()
            .filter(|bl| bl.kind == Kind::Zero)
            .flat_map(|bl| bl.range())
            .collect(),
        blocks,
        b_norm: inf_norm(&prog.b),
        c_norm: inf_norm(&prog.objective),
    };
    Ok(ipm.run(settings))
}

fn unconstrained(prog: &ConicProgram) -> Solution {
    let n = prog.num_vars();
    let c = &prog.objective;
    let cc: f64 = c.iter().map(|v| v * v).sum();
    let mut sol = Solution {
        status: SolveStatus::Optimal,
        x: vec![0.0; n],
        s: Vec::new(),
        y: Vec::new(),
        primal_objective: 0.0,
        dual_objective: 0.0,
        gap: 0.0,
        primal_residual: 0.0,
        dual_residual: 0.0,
        certificate_residual: None,
        iterations: 0,
        trace: Vec::new(),
    };
    if cc > 0.0 {
        sol.status = SolveStatus::Unbounded;
        sol.x = c.iter().map(|v| -v / cc).collect();
        sol.primal_objective = -1.0;
        sol.certificate_residual = Some(0.0);
    }
    sol
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Ruiz equilibration: positive row and column scalings bringing every row and column of
/// `D A E` close to unit infinity norm. Rows of one second-order block share a scale.
fn equilibrate(a: &DMatrix<f64>, blocks: &[Block]) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = a.shape();
    let mut d = vec![1.0; m];
    let mut e = vec![1.0; n];
    for _ in 0..25 {
        let mut rn = vec![0.0f64; m];
        let mut cn = vec![0.0f64; n];
        for j in 0..n {
            for i in 0..m {
                let v = (a[(i, j)] * d[i] * e[j]).abs();
                rn[i] = rn[i].max(v);
                cn[j] = cn[j].max(v);
            }
        }
        for bl in blocks.iter().filter(|bl| bl.kind == Kind::Soc) {
            let mx = rn[bl.range()].iter().copied().fold(0.0, f64::max);
            rn[bl.range()].iter_mut().for_each(|v| *v = mx);
        }
        let mut done = true;
        for i in 0..m {
            if rn[i] > 0.0 {
                done &= (rn[i] - 1.0).abs() < 1e-3;
                d[i] = (d[i] / rn[i].sqrt()).clamp(1e-6, 1e6);
            }
        }
        for j in 0..n {
            if cn[j] > 0.0 {
                done &= (cn[j] - 1.0).abs() < 1e-3;
                e[j] = (e[j] / cn[j].sqrt()).clamp(1e-6, 1e6);
            }
        }
        if done {
            break;
        }
    }
    (d, e)
}

struct Ipm {
    a: DMatrix<f64>,
    at: DMatrix<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    drow: Vec<f64>,
    ecol: Vec<f64>,
    blocks: Vec<Block>,
    zero_rows: Vec<usize>,
    b_norm: f64,
    c_norm: f64,
}

#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<f64>,
    dz: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

/// Reduced Newton system for a fixed scaling.
struct Kkt {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

struct Metrics {
    pres: f64,
    dres: f64,
    pcost: f64,
    dcost: f64,
    gap: f64,
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl Ipm {
    fn n(&self) -> usize {
        self.c.len()
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    fn mul_a(&self, x: &[f64]) -> Vec<f64> {
        (&self.a * nalgebra::DVector::from_column_slice(x))
            .data
            .into()
    }

    fn mul_at(&self, z: &[f64]) -> Vec<f64> {
        (&self.at * nalgebra::DVector::from_column_slice(z))
            .data
            .into()
    }

    fn apply_blocks(&self, scalings: &[Scaling], v: &[f64], inverse: bool) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (bl, w) in self.blocks.iter().zip(scalings) {
            let r = bl.range();
            if inverse {
                w.apply_inv(&v[r.clone()], &mut out[r]);
            } else {
                w.apply(&v[r.clone()], &mut out[r]);
            }
        }
        out
    }

    fn factor(&self, scalings: &[Scaling]) -> Option<Kkt> {
        let (m, n) = (self.m(), self.n());
        let m0 = self.zero_rows.len();
        // W^{-1} A with equality rows zeroed
        let mut wa = DMatrix::zeros(m, n);
        let mut col = vec![0.0; m];
        let mut buf = vec![0.0; m];
        for j in 0..n {
            col.copy_from_slice(self.a.column(j).as_slice());
            for (bl, w) in self.blocks.iter().zip(scalings) {
                let r = bl.range();
                w.apply_inv(&col[r.clone()], &mut buf[r]);
            }
            wa.column_mut(j).copy_from_slice(&buf);
        }
        let normal = wa.tr_mul(&wa);
        let mut reg = STATIC_REG;
        while reg <= 1e-4 {
            let mut k = DMatrix::zeros(n + m0, n + m0);
            k.view_mut((0, 0), (n, n)).copy_from(&normal);
            for i in 0..n {
                k[(i, i)] += reg;
            }
            for (r, &row) in self.zero_rows.iter().enumerate() {
                for j in 0..n {
                    let v = self.a[(row, j)];
                    k[(n + r, j)] = v;
                    k[(j, n + r)] = v;
                }
                k[(n + r, n + r)] = -reg;
            }
            let lu = k.lu();
            if lu.is_invertible() {
                return Some(Kkt { lu, n });
            }
            reg *= 100.0;
        }
        None
    }

    /// Solves `[0 A'; A -W^2] [dx; dz] = [r1; r2]` (with `W = 0` on equality rows).
    fn kkt_solve(
        &self,
        kkt: &Kkt,
        scalings: &[Scaling],
        r1: &[f64],
        r2: &[f64],
    ) -> Option<(Vec<f64>, Vec<f64>)> {
        let (mut dx, mut dz) = self.kkt_solve_once(kkt, scalings, r1, r2)?;
        let rhs_norm = inf_norm(r1).max(inf_norm(r2)).max(1e-300);
        let mut last = f64::INFINITY;
        for _ in 0..5 {
            let atdz = self.mul_at(&dz);
            let adx = self.mul_a(&dx);
            let w_dz = self.apply_blocks(scalings, &dz, false);
            let w2dz = self.apply_blocks(scalings, &w_dz, false);
            let e1: Vec<f64> = r1.iter().zip(&atdz).map(|(r, v)| r - v).collect();
            let e2: Vec<f64> = (0..self.m()).map(|i| r2[i] - (adx[i] - w2dz[i])).collect();
            let err = inf_norm(&e1).max(inf_norm(&e2));
            if err <= 1e-15 * rhs_norm || err >= 0.5 * last {
                break;
            }
            last = err;
            let (cx, cz) = self.kkt_solve_once(kkt, scalings, &e1, &e2)?;
            axpy(1.0, &cx, &mut dx);
            axpy(1.0, &cz, &mut dz);
        }
        Some((dx, dz))
    }

    fn kkt_solve_once(
        &self,
        kkt: &Kkt,
        scalings: &[Scaling],
        r1: &[f64],
        r2: &[f64],
    ) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = kkt.n;
        let t = self.apply_blocks(scalings, &self.apply_blocks(scalings, r2, true), true);
        let at_t = self.mul_at(&t);
        let mut rhs = nalgebra::DVector::zeros(n + self.zero_rows.len());
        for i in 0..n {
            rhs[i] = r1[i] + at_t[i];
        }
        for (r, &row) in self.zero_rows.iter().enumerate() {
            rhs[n + r] = r2[row];
        }
        let sol = kkt.lu.solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let dx: Vec<f64> = sol.as_slice()[..n].to_vec();
        let adx = self.mul_a(&dx);
        let diff: Vec<f64> = adx.iter().zip(r2).map(|(a, r)| a - r).collect();
        let mut dz = self.apply_blocks(scalings, &self.apply_blocks(scalings, &diff, true), true);
        for (r, &row) in self.zero_rows.iter().enumerate() {
            dz[row] = sol[n + r];
        }
        Some((dx, dz))
    }

    fn metrics(&self, it: &Iterate, rx: &[f64], rz: &[f64], ax: &[f64], atz: &[f64]) -> Metrics {
        let tau = it.tau;
        let pres_num = rz
            .iter()
            .zip(&self.drow)
            .fold(0.0f64, |m, (r, d)| m.max((r / d).abs()))
            / tau;
        let ax_norm = ax
            .iter()
            .zip(&self.drow)
            .fold(0.0f64, |m, (r, d)| m.max((r / d).abs()))
            / tau;
        let s_norm =
            it.s.iter()
                .zip(&self.drow)
                .fold(0.0f64, |m, (r, d)| m.max((r / d).abs()))
                / tau;
        let dres_num = rx
            .iter()
            .zip(&self.ecol)
            .fold(0.0f64, |m, (r, e)| m.max((r / e).abs()))
            / tau;
        let atz_norm = atz
            .iter()
            .zip(&self.ecol)
            .fold(0.0f64, |m, (r, e)| m.max((r / e).abs()))
            / tau;
        let pcost = cones::dot(&self.c, &it.x) / tau;
        let dcost = -cones::dot(&self.b, &it.z) / tau;
        let gap_abs = (pcost - dcost).abs();
        let gap_rel = gap_abs / pcost.abs().min(dcost.abs()).max(1.0);
        Metrics {
            pres: pres_num / self.b_norm.max(ax_norm).max(s_norm).max(1.0),
            dres: dres_num / self.c_norm.max(atz_norm).max(1.0),
            pcost,
            dcost,
            gap: gap_abs.min(gap_rel),
        }
    }

    fn initial_point(&self) -> Option<Iterate> {
        let (n, m) = (self.n(), self.m());
        let ident: Vec<Scaling> = self.blocks.iter().map(Scaling::identity).collect();
        let kkt = self.factor(&ident)?;
        let (x, zp) = self.kkt_solve(&kkt, &ident, &vec![0.0; n], &self.b)?;
        let neg_c: Vec<f64> = self.c.iter().map(|v| -v).collect();
        let (_, mut z) = self.kkt_solve(&kkt, &ident, &neg_c, &vec![0.0; m])?;
        let mut s: Vec<f64> = zp.iter().map(|v| -v).collect();
        for &row in &self.zero_rows {
            s[row] = 0.0;
        }
        self.shift_into_cone(&mut s);
        self.shift_into_cone(&mut z);
        Some(Iterate {
            x,
            s,
            z,
            tau: 1.0,
            kappa: 1.0,
        })
    }

    fn shift_into_cone(&self, v: &mut [f64]) {
        let mut alpha = f64::NEG_INFINITY;
        let mut nrm = 0.0f64;
        for bl in self.blocks.iter().filter(|bl| bl.kind != Kind::Zero) {
            alpha = alpha.max(-cones::min_eig(bl.kind, &v[bl.range()]));
            nrm = nrm.max(inf_norm(&v[bl.range()]));
        }
        if alpha >= -1e-8 * nrm.max(1.0) {
            for bl in self.blocks.iter() {
                cones::add_identity(bl.kind, &mut v[bl.range()], 1.0 + alpha);
            }
        }
    }

    fn max_step(&self, it: &Iterate, dir: &Direction) -> f64 {
        let mut alpha = f64::INFINITY;
        for bl in self.blocks.iter().filter(|bl| bl.kind != Kind::Zero) {
            let r = bl.range();
            alpha = alpha.min(cones::max_step(
                bl.kind,
                &it.s[r.clone()],
                &dir.ds[r.clone()],
            ));
            alpha = alpha.min(cones::max_step(bl.kind, &it.z[r.clone()], &dir.dz[r]));
        }
        if dir.dtau < 0.0 {
            alpha = alpha.min(-it.tau / dir.dtau);
        }
        if dir.dkappa < 0.0 {
            alpha = alpha.min(-it.kappa / dir.dkappa);
        }
        alpha
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        it: &Iterate,
        kkt: &Kkt,
        scalings: &[Scaling],
        lambda: &[f64],
        residuals: (&[f64], &[f64], f64),
        base: (&[f64], &[f64]),
        eta: f64,
        d_s: &[f64],
        d_kappa: f64,
    ) -> Option<Direction> {
        let (rx, rz, rtau) = residuals;
        let (x1, z1) = base;
        let m = self.m();
        let mut q = vec![0.0; m];
        for bl in &self.blocks {
            let r = bl.range();
            cones::jordan_divide(bl.kind, &lambda[r.clone()], &d_s[r.clone()], &mut q[r]);
        }
        let wq = self.apply_blocks(scalings, &q, false);
        let r1: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
        let r2: Vec<f64> = (0..m).map(|i| -eta * rz[i] - wq[i]).collect();
        let (x2, z2) = self.kkt_solve(kkt, scalings, &r1, &r2)?;
        let denom = cones::dot(&self.c, x1) + cones::dot(&self.b, z1) - it.kappa / it.tau;
        let dtau =
            (-eta * rtau - cones::dot(&self.c, &x2) - cones::dot(&self.b, &z2) - d_kappa / it.tau)
                / denom;
        let mut dx = x2;
        axpy(dtau, x1, &mut dx);
        let mut dz = z2;
        axpy(dtau, z1, &mut dz);
        let w_dz = self.apply_blocks(scalings, &dz, false);
        let diff: Vec<f64> = q.iter().zip(&w_dz).map(|(a, b)| a - b).collect();
        let ds = self.apply_blocks(scalings, &diff, false);
        let dkappa = (d_kappa - it.kappa * dtau) / it.tau;
        let dir = Direction {
            dx,
            ds,
            dz,
            dtau,
            dkappa,
        };
        let finite = dir
            .dx
            .iter()
            .chain(&dir.ds)
            .chain(&dir.dz)
            .all(|v| v.is_finite())
            && dtau.is_finite()
            && dkappa.is_finite();
        finite.then_some(dir)
    }

    fn run(&self, settings: &SolverSettings) -> Solution {
        let (n, m) = (self.n(), self.m());
        let nu = cones::degree(&self.blocks) as f64;
        let mut trace = Vec::new();
        let Some(mut it) = self.initial_point() else {
            return self.finish(
                SolveStatus::IterLimit,
                &Iterate {
                    x: vec![0.0; n],
                    s: vec![0.0; m],
                    z: vec![0.0; m],
                    tau: 1.0,
                    kappa: 1.0,
                },
                None,
                0,
                trace,
            );
        };
        let mut best: Option<(f64, Iterate)> = None;
        let mut stalls = 0;
        let mut last_step = 0.0;
        let mut iter = 0;
        loop {
            let ax = self.mul_a(&it.x);
            let atz = self.mul_at(&it.z);
            let rx: Vec<f64> = (0..n).map(|i| atz[i] + self.c[i] * it.tau).collect();
            let rz: Vec<f64> = (0..m)
                .map(|i| ax[i] + it.s[i] - self.b[i] * it.tau)
                .collect();
            let sz = cones::dot(&it.s, &it.z);
            let rtau = cones::dot(&self.c, &it.x) + cones::dot(&self.b, &it.z) + it.kappa;
            let mu = (sz + it.tau * it.kappa) / (nu + 1.0);
            let met = self.metrics(&it, &rx, &rz, &ax, &atz);
            if settings.record_trace {
                trace.push(IterateInfo {
                    iteration: iter,
                    primal_objective: met.pcost,
                    dual_objective: met.dcost,
                    primal_residual: met.pres,
                    dual_residual: met.dres,
                    gap: met.gap,
                    mu,
                    tau: it.tau,
                    kappa: it.kappa,
                    step: last_step,
                });
            }
            if met.pres <= settings.feas_tol
                && met.dres <= settings.feas_tol
                && met.gap <= settings.gap_tol
            {
                return self.finish(SolveStatus::Optimal, &it, None, iter, trace);
            }
            if it.tau < it.kappa {
                let bz = cones::dot(&self.b, &it.z);
                if bz < 0.0 {
                    let res = atz
                        .iter()
                        .zip(&self.ecol)
                        .fold(0.0f64, |acc, (v, e)| acc.max((v / e).abs()))
                        / -bz;
                    if res <= settings.feas_tol {
                        return self.finish(SolveStatus::Infeasible, &it, Some(res), iter, trace);
                    }
                }
                let cx = cones::dot(&self.c, &it.x);
                if cx < 0.0 {
                    let res = (0..m)
                        .map(|i| ((ax[i] + it.s[i]) / self.drow[i]).abs())
                        .fold(0.0f64, f64::max)
                        / -cx;
                    if res <= settings.feas_tol {
                        return self.finish(SolveStatus::Unbounded, &it, Some(res), iter, trace);
                    }
                }
            }
            let merit = met.pres.max(met.dres).max(met.gap);
            if best.as_ref().is_none_or(|(b, _)| merit < *b) {
                best = Some((merit, it.clone()));
            }
            if iter >= settings.max_iter || stalls >= 5 {
                break;
            }
            iter += 1;

            let scalings: Vec<Scaling> = self
                .blocks
                .iter()
                .map(|bl| Scaling::nesterov_todd(bl, &it.s[bl.range()], &it.z[bl.range()]))
                .collect();
            let lambda = self.apply_blocks(&scalings, &it.z, false);
            let Some(kkt) = self.factor(&scalings) else {
                break;
            };
            let neg_c: Vec<f64> = self.c.iter().map(|v| -v).collect();
            let Some((x1, z1)) = self.kkt_solve(&kkt, &scalings, &neg_c, &self.b) else {
                break;
            };

            let mut lam_sq = vec![0.0; m];
            for bl in &self.blocks {
                let r = bl.range();
                cones::jordan_product(
                    bl.kind,
                    &lambda[r.clone()],
                    &lambda[r.clone()],
                    &mut lam_sq[r],
                );
            }
            let d_s_aff: Vec<f64> = lam_sq.iter().map(|v| -v).collect();
            let d_k_aff = -it.tau * it.kappa;
            let Some(aff) = self.direction(
                &it,
                &kkt,
                &scalings,
                &lambda,
                (&rx, &rz, rtau),
                (&x1, &z1),
                1.0,
                &d_s_aff,
                d_k_aff,
            ) else {
                break;
            };
            let alpha_aff = self.max_step(&it, &aff).min(1.0);
            let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

            let winv_ds = self.apply_blocks(&scalings, &aff.ds, true);
            let w_dz = self.apply_blocks(&scalings, &aff.dz, false);
            let mut corr = vec![0.0; m];
            for bl in &self.blocks {
                let r = bl.range();
                cones::jordan_product(bl.kind, &winv_ds[r.clone()], &w_dz[r.clone()], &mut corr[r]);
            }
            let mut d_s: Vec<f64> = (0..m).map(|i| -lam_sq[i] - corr[i]).collect();
            for bl in &self.blocks {
                cones::add_identity(bl.kind, &mut d_s[bl.range()], sigma * mu);
            }
            let d_k = -it.tau * it.kappa - aff.dtau * aff.dkappa + sigma * mu;
            let Some(dir) = self.direction(
                &it,
                &kkt,
                &scalings,
                &lambda,
                (&rx, &rz, rtau),
                (&x1, &z1),
                1.0 - sigma,
                &d_s,
                d_k,
            ) else {
                break;
            };
            let alpha = (STEP_FRACTION * self.max_step(&it, &dir)).min(1.0);
            if alpha < 1e-10 {
                stalls += 1;
            } else {
                stalls = 0;
            }
            last_step = alpha;
            axpy(alpha, &dir.dx, &mut it.x);
            axpy(alpha, &dir.ds, &mut it.s);
            axpy(alpha, &dir.dz, &mut it.z);
            it.tau += alpha * dir.dtau;
            it.kappa += alpha * dir.dkappa;
            // rescale the embedding to keep tau + kappa near 1
            let scale = it.tau + it.kappa;
            if scale > 1e6 || scale < 1e-6 {
                it.x.iter_mut()
                    .chain(it.s.iter_mut())
                    .chain(it.z.iter_mut())
                    .for_each(|v| *v /= scale);
                it.tau /= scale;
                it.kappa /= scale;
            }
        }
        let best_it = best.map(|(_, b)| b).unwrap_or(it);
        self.finish(SolveStatus::IterLimit, &best_it, None, iter, trace)
    }

    fn finish(
        &self,
        status: SolveStatus,
        it: &Iterate,
        certificate: Option<f64>,
        iterations: usize,
        trace: Vec<IterateInfo>,
    ) -> Solution {
        let ax = self.mul_a(&it.x);
        let atz = self.mul_at(&it.z);
        let rx: Vec<f64> = (0..self.n()).map(|i| atz[i] + self.c[i] * it.tau).collect();
        let rz: Vec<f64> = (0..self.m())
            .map(|i| ax[i] + it.s[i] - self.b[i] * it.tau)
            .collect();
        let met = self.metrics(it, &rx, &rz, &ax, &atz);
        let (xs, zs) = match status {
            SolveStatus::Infeasible => (0.0, 1.0 / -cones::dot(&self.b, &it.z)),
            SolveStatus::Unbounded => (1.0 / -cones::dot(&self.c, &it.x), 0.0),
            _ => (1.0 / it.tau, 1.0 / it.tau),
        };
        let x: Vec<f64> =
            it.x.iter()
                .zip(&self.ecol)
                .map(|(v, e)| v * e * xs.max(0.0))
                .collect();
        let x = if status == SolveStatus::Infeasible {
            vec![0.0; x.len()]
        } else {
            x
        };
        let s: Vec<f64> =
            it.s.iter()
                .zip(&self.drow)
                .map(|(v, d)| v / d * xs)
                .collect();
        let y: Vec<f64> =
            it.z.iter()
                .zip(&self.drow)
                .map(|(v, d)| v * d * zs)
                .collect();
        let (pobj, dobj) = match status {
            SolveStatus::Infeasible => (f64::INFINITY, -cones::dot(&self.b, &it.z) * zs),
            SolveStatus::Unbounded => (f64::NEG_INFINITY, f64::NEG_INFINITY),
            _ => (met.pcost, met.dcost),
        };
        Solution {
            status,
            x,
            s,
            y,
            primal_objective: pobj,
            dual_objective: dobj,
            gap: met.gap,
            primal_residual: met.pres,
            dual_residual: met.dres,
            certificate_residual: certificate,
            iterations,
            trace,
        }
    }
}
