//! Random conic programs with a planted optimal primal-dual pair.
//!
//! Each instance is generated from `X*`, `Z*` with `X* Z* = 0`, multipliers
//! `y*` of the correct sign and `C` chosen so that `(X*, y*, Z*)` satisfies the
//! optimality conditions. The optimal value `bᵀy*` is then known exactly.

#![allow(dead_code)]

pub mod degenerate;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use irs_isac::matrix::CMatrix;
use irs_isac::sdp::{LinearForm, Relation, SdpProblem, Sense};

pub struct Planted {
    pub problem: SdpProblem,
    pub optimum: f64,
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller keeps the generator free of solver-side helpers.
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    (&a + a.adjoint()).scale(0.5)
}

fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    a.qr().q()
}

fn diag_congruence(u: &CMatrix, d: &[f64]) -> CMatrix {
    let mut s = u.clone();
    for (j, &v) in d.iter().enumerate() {
        s.column_mut(j).scale_mut(v);
    }
    let out = &s * u.adjoint();
    (&out + out.adjoint()).scale(0.5)
}

/// Blocks of dimension ≤ `max_dim`, at most `max_cons` constraints, the first
/// of which is an inactive trace budget.
pub fn planted_sdp<R: Rng>(rng: &mut R, max_dim: usize, max_cons: usize) -> Planted {
    let nblocks = rng.random_range(1..=3);
    let dims: Vec<usize> = (0..nblocks).map(|_| rng.random_range(1..=max_dim)).collect();
    let nonneg = rng.random_range(0..=2);
    let sense = if rng.random_bool(0.5) {
        Sense::Maximize
    } else {
        Sense::Minimize
    };

    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for &n in &dims {
        let u = random_unitary(n, rng);
        let rank = rng.random_range(1..=n);
        let xd: Vec<f64> = (0..n)
            .map(|i| if i < rank { rng.random_range(0.5..2.0) } else { 0.0 })
            .collect();
        let zd: Vec<f64> = (0..n)
            .map(|i| if i >= rank { rng.random_range(0.5..2.0) } else { 0.0 })
            .collect();
        xs.push(diag_congruence(&u, &xd));
        zs.push(diag_congruence(&u, &zd));
    }
    let mut xn = Vec::new();
    let mut zn = Vec::new();
    for _ in 0..nonneg {
        if rng.random_bool(0.5) {
            xn.push(rng.random_range(0.5..2.0));
            zn.push(0.0);
        } else {
            xn.push(0.0);
            zn.push(rng.random_range(0.5..2.0));
        }
    }

    let m = rng.random_range(1..=max_cons);
    let mut problem = SdpProblem::new(dims.clone(), nonneg, sense);
    let mut forms = Vec::new();
    let mut ys = Vec::new();

    // inactive budget row keeps the feasible set bounded
    let mut budget = LinearForm::new();
    for (b, &n) in dims.iter().enumerate() {
        budget.add_block(b, CMatrix::identity(n, n));
    }
    for j in 0..nonneg {
        budget.add_nonneg(j, 1.0);
    }
    let slack = rng.random_range(0.5..2.0);
    let rhs = budget.evaluate(&xs, &xn) + slack;
    problem.add_constraint("budget", budget.clone(), Relation::Le, rhs);
    forms.push(budget);
    ys.push(0.0);

    for i in 1..m {
        let mut form = LinearForm::new();
        for (b, &n) in dims.iter().enumerate() {
            if b == 0 || rng.random_bool(0.7) {
                form.add_block(b, random_hermitian(n, rng));
            }
        }
        for j in 0..nonneg {
            if rng.random_bool(0.7) {
                form.add_nonneg(j, gaussian(rng));
            }
        }
        let value = form.evaluate(&xs, &xn);
        let kind = rng.random_range(0..4);
        let (relation, rhs, y) = match kind {
            0 => (Relation::Eq, value, gaussian(rng)),
            1 => {
                // active inequality, multiplier sign fixed by the sense
                let mag = rng.random_range(0.1..1.5);
                let (rel, y) = match sense {
                    Sense::Maximize => (Relation::Le, mag),
                    Sense::Minimize => (Relation::Ge, mag),
                };
                (rel, value, y)
            }
            2 => {
                let mag = rng.random_range(0.1..1.5);
                let (rel, y) = match sense {
                    Sense::Maximize => (Relation::Ge, -mag),
                    Sense::Minimize => (Relation::Le, -mag),
                };
                (rel, value, y)
            }
            _ => {
                if rng.random_bool(0.5) {
                    (Relation::Le, value + rng.random_range(0.5..2.0), 0.0)
                } else {
                    (Relation::Ge, value - rng.random_range(0.5..2.0), 0.0)
                }
            }
        };
        problem.add_constraint(format!("c{i}"), form.clone(), relation, rhs);
        forms.push(form);
        ys.push(y);
    }

    // stationarity: Z* = s (C - Σ y A), s = +1 for minimisation
    let s = match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut objective = LinearForm::new();
    for b in 0..dims.len() {
        let mut c = zs[b].scale(s);
        for (form, &y) in forms.iter().zip(&ys) {
            if let Some((_, a)) = form.blocks.iter().find(|(bb, _)| *bb == b) {
                c += a.scale(y);
            }
        }
        objective.add_block(b, c);
    }
    for j in 0..nonneg {
        let mut c = s * zn[j];
        for (form, &y) in forms.iter().zip(&ys) {
            c += y * form.nonneg.iter().filter(|(jj, _)| *jj == j).map(|(_, v)| v).sum::<f64>();
        }
        objective.add_nonneg(j, c);
    }
    problem.set_objective(objective);

    let optimum: f64 = problem
        .constraints
        .iter()
        .zip(&ys)
        .map(|(c, y)| c.rhs * y)
        .sum();
    let primal = problem.objective_value(&xs, &xn);
    debug_assert!((primal - optimum).abs() <= 1e-9 * (1.0 + optimum.abs()));
    Planted { problem, optimum }
}
