//! Random conic instances with independently known answers.

use lbro_core::conic::{solve, Affine, ProgramBuilder, Solution, SolveStatus, SolverSettings};
use rand::Rng;

use super::*;

/// Bounded LP `min c'x s.t. G x <= h`: a random box plus a few random cuts.
pub fn random_bounded_lp(rng: &mut SeededRng, d: usize) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let c = normal_vec(rng, d);
    let mut g = Vec::new();
    let mut h = Vec::new();
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        g.push(e.clone());
        h.push(rng.random_range(1.0..3.0));
        e[j] = -1.0;
        g.push(e);
        h.push(rng.random_range(1.0..3.0));
    }
    let extra = rng.random_range(1..6);
    for _ in 0..extra {
        g.push(normal_vec(rng, d));
        h.push(rng.random_range(0.2..2.0));
    }
    (c, g, h)
}

/// Solver outcome and best vertex value of a random bounded LP in dimension `d <= 3`.
pub fn lp_case(rng: &mut SeededRng, d: usize) -> (Solution, f64) {
    let (c, g, h) = random_bounded_lp(rng, d);
    let best = vertices(&g, &h, d)
        .iter()
        .map(|v| dot(&c, v))
        .fold(f64::INFINITY, f64::min);
    let sol = solve(&lp_program(&c, &g, &h), &SolverSettings::default()).unwrap();
    (sol, best)
}

/// `min c'x s.t. ||L^{-1}(x - x0)|| <= r`, whose optimum is `c'x0 - r ||L'c||`.
pub fn socp_case(rng: &mut SeededRng, d: usize) -> (Solution, f64) {
    let c = normal_vec(rng, d);
    let x0 = normal_vec(rng, d);
    let r = rng.random_range(0.5..3.0);
    let l = random_spd(rng, d).cholesky().unwrap().l();
    let linv = l.clone().try_inverse().unwrap();
    let mut b = ProgramBuilder::new();
    let x = b.new_vars(d);
    for j in 0..d {
        b.set_cost(x[j], c[j]);
    }
    let mut block = vec![Affine::constant(r)];
    for i in 0..d {
        let mut e = Affine::default();
        for j in 0..d {
            e.add_term(x[j], linv[(i, j)]);
            e.constant -= linv[(i, j)] * x0[j];
        }
        block.push(e);
    }
    b.add_soc(block);
    let ltc = l.transpose() * DVector::from_column_slice(&c);
    let expected = dot(&c, &x0) - r * ltc.norm();
    (
        solve(&b.build(), &SolverSettings::default()).unwrap(),
        expected,
    )
}

/// Crafted infeasible (even `case`) or unbounded (odd `case`) program, some with a
/// second-order cone block. Returns the expected status and the solver outcome.
pub fn classification_case(rng: &mut SeededRng, case: usize) -> (SolveStatus, Solution) {
    let d = 1 + case % 4;
    let mut b = ProgramBuilder::new();
    let x = b.new_vars(d);
    let infeasible = case % 2 == 0;
    if infeasible {
        // a'x >= 1 and a'x <= -1
        let a = normal_vec(rng, d);
        let terms: Vec<(usize, f64)> = a.iter().enumerate().map(|(j, &v)| (x[j], v)).collect();
        b.add_nonneg(Affine::from_terms(-1.0, terms.clone()));
        let neg: Vec<(usize, f64)> = terms.iter().map(|&(j, v)| (j, -v)).collect();
        b.add_nonneg(Affine::from_terms(-1.0, neg));
        if case % 4 == 0 {
            let mut block = vec![Affine::constant(5.0)];
            block.extend(x.iter().map(|&j| Affine::var(j)));
            b.add_soc(block);
        }
        for j in 0..d {
            b.set_cost(x[j], rng.random_range(-1.0..1.0));
        }
    } else {
        // x >= 0 with one negative cost, optionally inside an unbounded cone
        for j in 0..d {
            b.add_nonneg(Affine::var(x[j]));
            b.set_cost(x[j], rng.random_range(0.1..1.0));
        }
        b.set_cost(x[case % d], -1.0);
        if case % 4 == 1 {
            let t = b.new_var();
            let mut block = vec![Affine::var(t)];
            block.extend(x.iter().map(|&j| Affine::var(j)));
            b.add_soc(block);
        }
    }
    let want = if infeasible {
        SolveStatus::Infeasible
    } else {
        SolveStatus::Unbounded
    };
    (want, solve(&b.build(), &SolverSettings::default()).unwrap())
}
