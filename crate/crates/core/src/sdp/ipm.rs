//! Infeasible-start primal-dual path-following method on the real embedding.
//!
//! Search directions use the HKM scaling with a Mehrotra predictor-corrector.
//! The problem is equilibrated before iterating and unscaled afterwards.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::{Relation, SdpProblem, SdpSolution, Sense, SolveStatus};
use crate::error::Result;
use crate::matrix::{realify, unrealify, RMatrix};

type RVec = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Threshold on the normalised Farkas certificates.
    pub infeasibility_tol: f64,
    /// Equilibrate rows, blocks and the objective before iterating.
    pub scale: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: super::DEFAULT_TOL,
            max_iters: super::DEFAULT_MAX_ITERS,
            infeasibility_tol: 1e-8,
            scale: true,
        }
    }
}

/// A constraint coefficient on one real block.
#[derive(Debug, Clone)]
enum Coeff {
    Dense(RMatrix),
    Sparse(Vec<(usize, usize, f64)>),
}

impl Coeff {
    fn new(a: RMatrix) -> Self {
        let nnz = a.iter().filter(|v| **v != 0.0).count();
        if nnz <= a.nrows() {
            let mut entries = Vec::with_capacity(nnz);
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    if a[(i, j)] != 0.0 {
                        entries.push((i, j, a[(i, j)]));
                    }
                }
            }
            Coeff::Sparse(entries)
        } else {
            Coeff::Dense(a)
        }
    }

    fn dot(&self, m: &RMatrix) -> f64 {
        match self {
            Coeff::Dense(a) => a.dot(m),
            Coeff::Sparse(e) => e.iter().map(|&(i, j, v)| v * m[(i, j)]).sum(),
        }
    }

    fn axpy(&self, alpha: f64, m: &mut RMatrix) {
        match self {
            Coeff::Dense(a) => *m += a * alpha,
            Coeff::Sparse(e) => {
                for &(i, j, v) in e {
                    m[(i, j)] += alpha * v;
                }
            }
        }
    }

    fn norm(&self) -> f64 {
        match self {
            Coeff::Dense(a) => a.norm(),
            Coeff::Sparse(e) => e.iter().map(|&(_, _, v)| v * v).sum::<f64>().sqrt(),
        }
    }

    fn scale(&mut self, f: f64) {
        match self {
            Coeff::Dense(a) => *a *= f,
            Coeff::Sparse(e) => e.iter_mut().for_each(|t| t.2 *= f),
        }
    }
}

struct Row {
    blocks: Vec<(usize, Coeff)>,
    lp: Vec<(usize, f64)>,
}

/// `min <C, X> + cᵀx  s.t.  A(X) + A_lp x = b,  X ⪰ 0, x ≥ 0`.
struct RealProblem {
    dims: Vec<usize>,
    nlp: usize,
    c: Vec<RMatrix>,
    clp: RVec,
    rows: Vec<Row>,
    b: RVec,
    /// For each block, the `(row, position)` pairs that touch it.
    by_block: Vec<Vec<(usize, usize)>>,
    /// Dense `m × nlp` copy of the orthant coefficients.
    alp: DMatrix<f64>,
}

impl RealProblem {
    fn m(&self) -> usize {
        self.rows.len()
    }

    fn index(&mut self) {
        self.by_block = vec![Vec::new(); self.dims.len()];
        self.alp = DMatrix::zeros(self.rows.len(), self.nlp);
        for (i, row) in self.rows.iter().enumerate() {
            for (k, (b, _)) in row.blocks.iter().enumerate() {
                self.by_block[*b].push((i, k));
            }
            for &(j, v) in &row.lp {
                self.alp[(i, j)] += v;
            }
        }
    }

    fn apply(&self, x: &[RMatrix], xl: &RVec) -> RVec {
        let mut out = &self.alp * xl;
        for (i, row) in self.rows.iter().enumerate() {
            for (b, a) in &row.blocks {
                out[i] += a.dot(&x[*b]);
            }
        }
        out
    }

    fn adjoint(&self, y: &RVec) -> (Vec<RMatrix>, RVec) {
        let mut mats: Vec<RMatrix> = self.dims.iter().map(|&n| RMatrix::zeros(n, n)).collect();
        for (i, row) in self.rows.iter().enumerate() {
            for (b, a) in &row.blocks {
                a.axpy(y[i], &mut mats[*b]);
            }
        }
        (mats, self.alp.tr_mul(y))
    }
}

/// How the original problem was laid out in the real program.
struct Layout {
    sign: f64,
    p: usize,
}

fn build(problem: &SdpProblem) -> Result<(RealProblem, Layout)> {
    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let p = problem.nonneg;
    let n_ineq = problem
        .constraints
        .iter()
        .filter(|c| c.relation != Relation::Eq)
        .count();
    let dims: Vec<usize> = problem.blocks.iter().map(|n| 2 * n).collect();
    let nlp = p + n_ineq;

    let mut c: Vec<RMatrix> = dims.iter().map(|&n| RMatrix::zeros(n, n)).collect();
    for (b, a) in &problem.objective.blocks {
        c[*b] += realify(a)? * (0.5 * sign);
    }
    let mut clp = RVec::zeros(nlp);
    for &(j, v) in &problem.objective.nonneg {
        clp[j] += sign * v;
    }

    let mut rows = Vec::with_capacity(problem.constraints.len());
    let mut b = RVec::zeros(problem.constraints.len());
    let mut slack = p;
    for (i, con) in problem.constraints.iter().enumerate() {
        let mut blocks = Vec::with_capacity(con.form.blocks.len());
        for (blk, a) in &con.form.blocks {
            blocks.push((*blk, Coeff::new(realify(a)? * 0.5)));
        }
        let mut lp = con.form.nonneg.clone();
        match con.relation {
            Relation::Eq => {}
            Relation::Le => {
                lp.push((slack, 1.0));
                slack += 1;
            }
            Relation::Ge => {
                lp.push((slack, -1.0));
                slack += 1;
            }
        }
        rows.push(Row { blocks, lp });
        b[i] = con.rhs;
    }

    let mut real = RealProblem {
        dims,
        nlp,
        c,
        clp,
        rows,
        b,
        by_block: Vec::new(),
        alp: DMatrix::zeros(0, 0),
    };
    real.index();
    Ok((real, Layout { sign, p }))
}

/// Drops equality rows that are linear combinations of earlier ones.
///
/// Returns the kept row indices, or `None` when a dropped row contradicts the
/// rows it depends on. Rows with a slack column are always independent.
fn independent_rows(prob: &RealProblem, problem: &SdpProblem) -> Option<Vec<usize>> {
    let flatten = |i: usize| -> RVec {
        let mut parts: Vec<f64> = Vec::new();
        for (b, &n) in prob.dims.iter().enumerate() {
            let mut m = RMatrix::zeros(n, n);
            for (bb, a) in &prob.rows[i].blocks {
                if *bb == b {
                    a.axpy(1.0, &mut m);
                }
            }
            parts.extend(m.iter());
        }
        parts.extend(prob.alp.row(i).iter());
        RVec::from_vec(parts)
    };
    let mut basis: Vec<(RVec, f64)> = Vec::new();
    let mut keep = Vec::with_capacity(prob.m());
    for (i, con) in problem.constraints.iter().enumerate() {
        if con.relation != Relation::Eq {
            keep.push(i);
            continue;
        }
        let mut v = flatten(i);
        let scale = v.norm();
        let mut beta = prob.b[i];
        for (q, bq) in &basis {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
            beta -= c * bq;
        }
        let r = v.norm();
        if r > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            basis.push((v / r, beta / r));
            keep.push(i);
        } else if beta.abs() > 1e-8 * (1.0 + prob.b[i].abs()) {
            return None;
        }
    }
    Some(keep)
}

fn restrict(prob: RealProblem, keep: &[usize]) -> RealProblem {
    let mut rows: Vec<Option<Row>> = prob.rows.into_iter().map(Some).collect();
    let kept: Vec<Row> = keep.iter().map(|&i| rows[i].take().unwrap()).collect();
    let b = RVec::from_iterator(keep.len(), keep.iter().map(|&i| prob.b[i]));
    let mut out = RealProblem {
        dims: prob.dims,
        nlp: prob.nlp,
        c: prob.c,
        clp: prob.clp,
        rows: kept,
        b,
        by_block: Vec::new(),
        alp: DMatrix::zeros(0, 0),
    };
    out.index();
    out
}

/// Variable substitutions `X_b = s_b X'_b`, `x_j = d_j x'_j`, row weights `r_i`
/// and objective divisor `cs`.
struct Scaling {
    r: Vec<f64>,
    s: Vec<f64>,
    d: Vec<f64>,
    cs: f64,
}

fn geometric(mags: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for v in mags.filter(|v| *v > 0.0) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (hi > 0.0).then(|| 1.0 / (lo * hi).sqrt())
}

fn equilibrate(prob: &mut RealProblem, layout: &Layout, enabled: bool) -> Scaling {
    let m = prob.m();
    let mut sc = Scaling {
        r: vec![1.0; m],
        s: vec![1.0; prob.dims.len()],
        d: vec![1.0; prob.nlp],
        cs: 1.0,
    };
    if enabled {
        let norms: Vec<Vec<f64>> = prob
            .rows
            .iter()
            .map(|row| row.blocks.iter().map(|(_, a)| a.norm()).collect())
            .collect();
        let structural = |j: usize| j < layout.p;
        for _ in 0..8 {
            for i in 0..m {
                let row = &prob.rows[i];
                let mags = row
                    .blocks
                    .iter()
                    .zip(&norms[i])
                    .map(|((b, _), n)| n * sc.s[*b])
                    .chain(
                        row.lp
                            .iter()
                            .filter(|(j, _)| structural(*j))
                            .map(|&(j, v)| v.abs() * sc.d[j]),
                    );
                if let Some(f) = geometric(mags) {
                    sc.r[i] = f;
                }
            }
            for (b, list) in prob.by_block.iter().enumerate() {
                if let Some(f) = geometric(list.iter().map(|&(i, k)| norms[i][k] * sc.r[i])) {
                    sc.s[b] = f;
                }
            }
            for j in 0..layout.p {
                if let Some(f) = geometric((0..m).map(|i| prob.alp[(i, j)].abs() * sc.r[i])) {
                    sc.d[j] = f;
                }
            }
        }
        for i in 0..m {
            let row = &prob.rows[i];
            let hi = row
                .blocks
                .iter()
                .zip(&norms[i])
                .map(|((b, _), n)| n * sc.s[*b])
                .chain(
                    row.lp
                        .iter()
                        .filter(|(j, _)| structural(*j))
                        .map(|&(j, v)| v.abs() * sc.d[j]),
                )
                .fold(0.0, f64::max);
            if hi > 0.0 {
                sc.r[i] = 1.0 / hi;
            }
            for &(j, _) in &row.lp {
                if !structural(j) {
                    sc.d[j] = 1.0 / sc.r[i];
                }
            }
        }
    }

    for (i, row) in prob.rows.iter_mut().enumerate() {
        for (b, a) in row.blocks.iter_mut() {
            a.scale(sc.r[i] * sc.s[*b]);
        }
        for (j, v) in row.lp.iter_mut() {
            *v *= sc.r[i] * sc.d[*j];
        }
        prob.b[i] *= sc.r[i];
    }
    for (b, c) in prob.c.iter_mut().enumerate() {
        *c *= sc.s[b];
    }
    for j in 0..prob.nlp {
        prob.clp[j] *= sc.d[j];
    }
    if enabled {
        let cn = prob
            .c
            .iter()
            .map(|c| c.norm())
            .chain(prob.clp.iter().map(|v| v.abs()))
            .fold(0.0, f64::max);
        if cn > 0.0 {
            sc.cs = cn;
        }
    }
    for c in prob.c.iter_mut() {
        *c /= sc.cs;
    }
    prob.clp /= sc.cs;
    prob.index();
    sc
}

#[derive(Clone)]
struct Iterate {
    x: Vec<RMatrix>,
    xl: RVec,
    y: RVec,
    z: Vec<RMatrix>,
    zl: RVec,
}

fn initial_point(prob: &RealProblem) -> Iterate {
    let mut x = Vec::with_capacity(prob.dims.len());
    let mut z = Vec::with_capacity(prob.dims.len());
    for (b, &n) in prob.dims.iter().enumerate() {
        let nf = n as f64;
        let mut xi = 10f64.max(nf.sqrt());
        let mut eta = 10f64.max(nf.sqrt()).max(prob.c[b].norm());
        for &(i, k) in &prob.by_block[b] {
            let an = prob.rows[i].blocks[k].1.norm();
            xi = xi.max(nf * (1.0 + prob.b[i].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        x.push(RMatrix::identity(n, n) * xi);
        z.push(RMatrix::identity(n, n) * eta);
    }
    let mut xl = RVec::zeros(prob.nlp);
    let mut zl = RVec::zeros(prob.nlp);
    for j in 0..prob.nlp {
        let mut xi: f64 = 10.0;
        let mut eta: f64 = 10f64.max(prob.clp[j].abs());
        for i in 0..prob.m() {
            let a = prob.alp[(i, j)].abs();
            if a > 0.0 {
                xi = xi.max((1.0 + prob.b[i].abs()) / (1.0 + a));
                eta = eta.max(a);
            }
        }
        xl[j] = xi;
        zl[j] = eta;
    }
    Iterate {
        x,
        xl,
        y: RVec::zeros(prob.m()),
        z,
        zl,
    }
}

fn sym(a: RMatrix) -> RMatrix {
    let t = a.transpose();
    (a + t) * 0.5
}

fn spd_inverse(a: &RMatrix) -> Option<RMatrix> {
    Cholesky::new(a.clone()).map(|c| c.inverse())
}

/// Largest `α` with `X + α dX ⪰ 0` (infinite when `dX ⪰ 0`).
fn max_step_psd(x: &RMatrix, dx: &RMatrix) -> f64 {
    let Some(chol) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = chol.l();
    let Some(t) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(m) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    let lam = SymmetricEigen::new(sym(m)).eigenvalues.min();
    if lam < 0.0 {
        -1.0 / lam
    } else {
        f64::INFINITY
    }
}

fn max_step_lp(x: &RVec, dx: &RVec) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Direction {
    x: Vec<RMatrix>,
    xl: RVec,
    y: RVec,
    z: Vec<RMatrix>,
    zl: RVec,
}

/// Pseudo-inverse of the Jacobi-scaled Schur complement.
///
/// Degenerate problems make the Schur complement singular near the optimum;
/// truncating the null space keeps the multiplier step bounded.
struct Factor {
    jacobi: RVec,
    vectors: DMatrix<f64>,
    inv_values: RVec,
}

impl Factor {
    fn new(h: DMatrix<f64>) -> Option<Self> {
        let m = h.nrows();
        let jacobi = RVec::from_fn(m, |i, _| {
            let d = h[(i, i)];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        });
        let scaled = DMatrix::from_fn(m, m, |i, j| h[(i, j)] * jacobi[i] * jacobi[j]);
        if scaled.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let eig = SymmetricEigen::new(scaled);
        let top = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
        let cut = 1e-14 * top;
        let inv_values = eig
            .eigenvalues
            .map(|v| if v > cut && v > 0.0 { 1.0 / v } else { 0.0 });
        Some(Self {
            jacobi,
            vectors: eig.eigenvectors,
            inv_values,
        })
    }

    fn solve(&self, rhs: &RVec) -> Option<RVec> {
        let r = rhs.component_mul(&self.jacobi);
        let t = self.vectors.tr_mul(&r).component_mul(&self.inv_values);
        Some((&self.vectors * t).component_mul(&self.jacobi))
    }
}

struct Workspace<'a> {
    prob: &'a RealProblem,
    it: &'a Iterate,
    zinv: Vec<RMatrix>,
    rp: RVec,
    rd: Vec<RMatrix>,
    rdl: RVec,
    factor: Factor,
    /// `A(sym(X Rd Z⁻¹))` plus its orthant counterpart, shared by both solves.
    rd_term: RVec,
}

fn schur(prob: &RealProblem, it: &Iterate, zinv: &[RMatrix]) -> DMatrix<f64> {
    let m = prob.m();
    let mut h = DMatrix::zeros(m, m);
    for (b, list) in prob.by_block.iter().enumerate() {
        let x = &it.x[b];
        let zi = &zinv[b];
        for &(i, k) in list {
            match &prob.rows[i].blocks[k].1 {
                Coeff::Dense(a) => {
                    let g = x * a * zi;
                    for &(j, kj) in list {
                        let v = prob.rows[j].blocks[kj].1.dot(&g);
                        h[(j, i)] += v;
                        if matches!(prob.rows[j].blocks[kj].1, Coeff::Sparse(_)) {
                            h[(i, j)] += v;
                        }
                    }
                }
                Coeff::Sparse(ei) => {
                    for &(j, kj) in list {
                        if let Coeff::Sparse(ej) = &prob.rows[j].blocks[kj].1 {
                            let mut v = 0.0;
                            for &(p, q, a) in ei {
                                for &(r, s, c) in ej {
                                    v += a * c * x[(q, r)] * zi[(s, p)];
                                }
                            }
                            h[(i, j)] += v;
                        }
                    }
                }
            }
        }
    }
    let ratio = it.xl.component_div(&it.zl);
    let scaled = DMatrix::from_fn(m, prob.nlp, |i, j| prob.alp[(i, j)] * ratio[j]);
    h += &scaled * prob.alp.transpose();
    let ht = h.transpose();
    (h + ht) * 0.5
}

impl Workspace<'_> {
    /// Solves for the direction whose complementarity target is `T = Rc Z⁻¹`.
    fn direction(&self, t: &[RMatrix], tl: &RVec) -> Option<Direction> {
        let prob = self.prob;
        let it = self.it;
        let sym_t: Vec<RMatrix> = t.iter().map(|m| sym(m.clone())).collect();
        let rhs = &self.rp - prob.apply(&sym_t, tl) + &self.rd_term;
        let mut dy = self.factor.solve(&rhs)?;
        let mut dx = Vec::new();
        let mut dz = Vec::new();
        let mut dxl = RVec::zeros(0);
        let mut dzl = RVec::zeros(0);
        for round in 0..3 {
            let (atdy, atdyl) = prob.adjoint(&dy);
            dz = self.rd.iter().zip(&atdy).map(|(r, a)| r - a).collect();
            dzl = &self.rdl - atdyl;
            dx = (0..prob.dims.len())
                .map(|b| sym(&t[b] - &it.x[b] * &dz[b] * &self.zinv[b]))
                .collect();
            dxl = tl - it.xl.component_mul(&dzl).component_div(&it.zl);
            if round == 2 {
                break;
            }
            // refine: the primal equation A(dX) = rp is what the reduction loses
            let miss = &self.rp - prob.apply(&dx, &dxl);
            if miss.norm() <= 1e-15 * (1.0 + self.rp.norm()) {
                break;
            }
            dy += self.factor.solve(&miss)?;
        }
        if dy.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Direction {
            x: dx,
            xl: dxl,
            y: dy,
            z: dz,
            zl: dzl,
        })
    }
}

fn step_lengths(it: &Iterate, d: &Direction) -> (f64, f64) {
    let mut ap = max_step_lp(&it.xl, &d.xl);
    let mut ad = max_step_lp(&it.zl, &d.zl);
    for b in 0..it.x.len() {
        ap = ap.min(max_step_psd(&it.x[b], &d.x[b]));
        ad = ad.min(max_step_psd(&it.z[b], &d.z[b]));
    }
    (ap, ad)
}

fn frob(blocks: &[RMatrix], lp: &RVec) -> f64 {
    (blocks.iter().map(|m| m.norm_squared()).sum::<f64>() + lp.norm_squared()).sqrt()
}

fn inner(a: &[RMatrix], al: &RVec, b: &[RMatrix], bl: &RVec) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum::<f64>() + al.dot(bl)
}

struct Outcome {
    status: SolveStatus,
    it: Iterate,
    iterations: usize,
}

fn run(prob: &RealProblem, opt: &SolverOptions) -> Outcome {
    let nu = (prob.dims.iter().sum::<usize>() + prob.nlp) as f64;
    let bnorm = prob.b.norm();
    let cnorm = frob(&prob.c, &prob.clp);
    let mut it = initial_point(prob);
    let mut best: (f64, Iterate) = (f64::INFINITY, it.clone());
    let mut prev_alpha: f64 = 0.0;
    let mut stalls = 0;

    for k in 0..opt.max_iters {
        let ax = prob.apply(&it.x, &it.xl);
        let rp = &prob.b - &ax;
        let (aty, atyl) = prob.adjoint(&it.y);
        let rd: Vec<RMatrix> = (0..prob.dims.len())
            .map(|b| &prob.c[b] - &aty[b] - &it.z[b])
            .collect();
        let rdl = &prob.clp - &atyl - &it.zl;

        let pobj = inner(&prob.c, &prob.clp, &it.x, &it.xl);
        let dobj = prob.b.dot(&it.y);
        let xz = inner(&it.x, &it.xl, &it.z, &it.zl);
        let mu = xz / nu;
        let denom = 1.0 + pobj.abs() + dobj.abs();
        let pinf = rp.norm() / (1.0 + bnorm);
        let dinf = frob(&rd, &rdl) / (1.0 + cnorm);
        let gap = (pobj - dobj).abs().max(xz) / denom;
        let merit = pinf.max(dinf).max(gap);
        if merit < best.0 {
            best = (merit, it.clone());
        }
        if merit <= opt.tol {
            return Outcome {
                status: SolveStatus::Optimal,
                it,
                iterations: k,
            };
        }

        if dobj > 0.0 && pinf > opt.tol {
            let aty_z: Vec<RMatrix> = aty.iter().zip(&it.z).map(|(a, z)| a + z).collect();
            if frob(&aty_z, &(&atyl + &it.zl)) / dobj < opt.infeasibility_tol {
                return Outcome {
                    status: SolveStatus::Infeasible,
                    it,
                    iterations: k,
                };
            }
        }
        if pobj < 0.0 && dinf > opt.tol {
            let ax_norm = ax.norm();
            if ax_norm / (-pobj) < opt.infeasibility_tol {
                return Outcome {
                    status: SolveStatus::Unbounded,
                    it,
                    iterations: k,
                };
            }
        }

        let failure = |it: Iterate, status| Outcome {
            status,
            it,
            iterations: k,
        };
        let Some(zinv) = it.z.iter().map(spd_inverse).collect::<Option<Vec<_>>>() else {
            return failure(best.1, SolveStatus::NumericalFailure);
        };
        let Some(factor) = Factor::new(schur(prob, &it, &zinv)) else {
            return failure(best.1, SolveStatus::NumericalFailure);
        };
        let xrdz: Vec<RMatrix> = (0..prob.dims.len())
            .map(|b| sym(&it.x[b] * &rd[b] * &zinv[b]))
            .collect();
        let xrdzl = it.xl.component_mul(&rdl).component_div(&it.zl);
        let rd_term = prob.apply(&xrdz, &xrdzl);
        let ws = Workspace {
            prob,
            it: &it,
            zinv,
            rp,
            rd,
            rdl,
            factor,
            rd_term,
        };

        // predictor: Rc = -XZ, so T = -X
        let t_aff: Vec<RMatrix> = it.x.iter().map(|x| -x).collect();
        let tl_aff = -&it.xl;
        let Some(aff) = ws.direction(&t_aff, &tl_aff) else {
            return failure(best.1, SolveStatus::NumericalFailure);
        };
        let (ap, ad) = step_lengths(&it, &aff);
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let xs: Vec<RMatrix> = (0..prob.dims.len()).map(|b| &it.x[b] + &aff.x[b] * ap).collect();
        let zs: Vec<RMatrix> = (0..prob.dims.len()).map(|b| &it.z[b] + &aff.z[b] * ad).collect();
        let mu_aff = inner(&xs, &(&it.xl + &aff.xl * ap), &zs, &(&it.zl + &aff.zl * ad)) / nu;
        let expon = 1f64.max(3.0 * ap.min(ad).powi(2));
        let sigma = if mu > 0.0 {
            (mu_aff.max(0.0) / mu).powf(expon).min(1.0)
        } else {
            0.0
        };

        // corrector: Rc = σμI - XZ - dXa dZa
        let t: Vec<RMatrix> = (0..prob.dims.len())
            .map(|b| {
                &ws.zinv[b] * (sigma * mu) - &it.x[b] - &aff.x[b] * &aff.z[b] * &ws.zinv[b]
            })
            .collect();
        let tl = RVec::from_fn(prob.nlp, |j, _| {
            (sigma * mu - aff.xl[j] * aff.zl[j]) / it.zl[j] - it.xl[j]
        });
        let Some(dir) = ws.direction(&t, &tl) else {
            return failure(best.1, SolveStatus::NumericalFailure);
        };
        let (ap, ad) = step_lengths(&it, &dir);
        let gamma = 0.9 + 0.09 * prev_alpha;
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        prev_alpha = ap.min(ad);

        if ap < 1e-12 && ad < 1e-12 {
            stalls += 1;
            if stalls >= 3 {
                return failure(best.1, SolveStatus::NumericalFailure);
            }
        } else {
            stalls = 0;
        }

        for b in 0..prob.dims.len() {
            it.x[b] += &dir.x[b] * ap;
            it.z[b] += &dir.z[b] * ad;
        }
        it.xl += &dir.xl * ap;
        it.zl += &dir.zl * ad;
        it.y += &dir.y * ad;
    }
    Outcome {
        status: SolveStatus::MaxIters,
        it: best.1,
        iterations: opt.max_iters,
    }
}

pub(super) fn solve(problem: &SdpProblem, opt: &SolverOptions) -> Result<SdpSolution> {
    let (prob, layout) = build(problem)?;
    let Some(keep) = independent_rows(&prob, problem) else {
        return Ok(inconsistent(problem));
    };
    let mut prob = restrict(prob, &keep);
    let sc = equilibrate(&mut prob, &layout, opt.scale);
    let out = run(&prob, opt);

    let mut blocks = Vec::with_capacity(prob.dims.len());
    for (b, x) in out.it.x.iter().enumerate() {
        blocks.push(unrealify(&(x * sc.s[b]))?);
    }
    let nonneg: Vec<f64> = (0..layout.p).map(|j| out.it.xl[j] * sc.d[j]).collect();
    let mut duals = vec![0.0; problem.constraints.len()];
    for (k, &i) in keep.iter().enumerate() {
        duals[i] = layout.sign * sc.cs * sc.r[k] * out.it.y[k];
    }

    let objective = problem.objective_value(&blocks, &nonneg);
    let dual_objective: f64 = problem
        .constraints
        .iter()
        .zip(&duals)
        .map(|(c, y)| c.rhs * y)
        .sum();
    let duality_gap =
        (objective - dual_objective).abs() / (1.0 + objective.abs() + dual_objective.abs());
    let max_constraint_violation = problem.max_violation(&blocks, &nonneg);
    Ok(SdpSolution {
        status: out.status,
        blocks,
        nonneg,
        duals,
        objective,
        dual_objective,
        duality_gap,
        max_constraint_violation,
        iterations: out.iterations,
    })
}

/// Result for equality rows that contradict each other.
fn inconsistent(problem: &SdpProblem) -> SdpSolution {
    let blocks: Vec<_> = problem
        .blocks
        .iter()
        .map(|&n| crate::matrix::CMatrix::zeros(n, n))
        .collect();
    let nonneg = vec![0.0; problem.nonneg];
    let objective = problem.objective_value(&blocks, &nonneg);
    let max_constraint_violation = problem.max_violation(&blocks, &nonneg);
    SdpSolution {
        status: SolveStatus::Infeasible,
        blocks,
        nonneg,
        duals: vec![0.0; problem.constraints.len()],
        objective,
        dual_objective: 0.0,
        duality_gap: f64::NAN,
        max_constraint_violation,
        iterations: 0,
    }
}
