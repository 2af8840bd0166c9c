//! Dense two-phase revised simplex for `min cᵀx  s.t.  A x = b, x ≥ 0`.
//!
//! The basis inverse is kept explicitly, updated by eta steps and rebuilt
//! from an LU factorization every [`REFACTOR_EVERY`] pivots. Pricing is
//! Devex with a switch to Bland's rule after a run of degenerate pivots.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 1000;
const MAX_ITERATIONS: usize = 200_000;
const PIVOT_TOL: f64 = 1e-7;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;

/// Problem data; `columns[j]` is column j of A.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    rows: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// Set when the second half of the columns negates the first half.
    mirrored: bool,
}

impl LinearProgram {
    pub fn new(columns: &[Vec<f64>], b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let rows = b.len();
        if columns.len() != c.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                found: c.len(),
            });
        }
        let mut a = Vec::with_capacity(rows * columns.len());
        for col in columns {
            if col.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    found: col.len(),
                });
            }
            a.extend_from_slice(col);
        }
        let half = columns.len() / 2;
        let mirrored = rows > 0
            && half > 0
            && columns.len() % 2 == 0
            && columns[..half].iter().zip(&columns[half..]).all(|(p, q)| p.iter().zip(q).all(|(x, y)| *x == -*y));
        Ok(LinearProgram { rows, a, b, c, mirrored })
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_columns(&self) -> usize {
        self.c.len()
    }

    fn column(&self, j: usize) -> &[f64] {
        &self.a[j * self.rows..(j + 1) * self.rows]
    }
}

/// Optimal primal/dual pair.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Dual multipliers `y` with `Aᵀy ≤ c` at optimality.
    pub dual: Vec<f64>,
    /// `|cᵀx − bᵀy|`.
    pub duality_gap: f64,
    /// Largest violation of `Aᵀy ≤ c`.
    pub dual_infeasibility: f64,
    /// Largest residual of `A x = b`.
    pub primal_residual: f64,
    pub iterations: usize,
    /// Final basis, usable as a [`solve_warm`] hint for a program of the same shape.
    pub basis: Vec<usize>,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    m: usize,
    n: usize,
    /// Row-flipped copies of A and b (all entries of b ≥ 0) and per-row sign.
    a: Vec<f64>,
    b: Vec<f64>,
    sign: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    /// Reduced costs, kept current through pivots.
    d: Vec<f64>,
    /// Scratch for pivot-row products.
    alpha: Vec<f64>,
    /// Devex reference weights.
    weights: Vec<f64>,
    iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Pivoted,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let xc = x.chunks_exact(4);
    let yc = y.chunks_exact(4);
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    for (p, q) in xc.zip(yc) {
        for k in 0..4 {
            acc[k] += p[k] * q[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram) -> Self {
        let m = lp.rows;
        let n = lp.num_columns();
        let sign: Vec<f64> = lp.b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let b: Vec<f64> = lp.b.iter().zip(&sign).map(|(v, s)| v * s).collect();
        let mut a = lp.a.clone();
        if m > 0 {
            for col in a.chunks_exact_mut(m) {
                for (v, s) in col.iter_mut().zip(&sign) {
                    *v *= s;
                }
            }
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let mut in_basis = vec![false; n + m];
        for i in 0..m {
            in_basis[n + i] = true;
        }
        Simplex {
            lp,
            m,
            n,
            a,
            xb: b.clone(),
            b,
            sign,
            basis: (n..n + m).collect(),
            in_basis,
            binv,
            d: vec![0.0; n + m],
            alpha: vec![0.0; n + m],
            weights: vec![1.0; n + m],
            iterations: 0,
        }
    }

    /// Column j of the sign-flipped constraint matrix, artificials included.
    fn column_into(&self, j: usize, out: &mut [f64]) {
        if j < self.n {
            out.copy_from_slice(&self.a[j * self.m..(j + 1) * self.m]);
        } else {
            out.fill(0.0);
            out[j - self.n] = 1.0;
        }
    }

    fn dot_column(&self, y: &[f64], j: usize) -> f64 {
        if j < self.n {
            dot(&self.a[j * self.m..(j + 1) * self.m], y)
        } else {
            y[j - self.n]
        }
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb == 0.0 {
                continue;
            }
            let row = &self.binv[k * m..(k + 1) * m];
            for (yi, r) in y.iter_mut().zip(row) {
                *yi += cb * r;
            }
        }
        y
    }

    /// `out[j] = a_jᵀ y` for every nonbasic column, artificials included.
    fn row_products(&self, y: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        if self.lp.mirrored {
            let h = n / 2;
            for j in 0..h {
                if self.in_basis[j] && self.in_basis[j + h] {
                    continue;
                }
                let v = dot(&self.a[j * m..(j + 1) * m], y);
                out[j] = v;
                out[j + h] = -v;
            }
        } else {
            for j in 0..n {
                if !self.in_basis[j] {
                    out[j] = dot(&self.a[j * m..(j + 1) * m], y);
                }
            }
        }
        out[n..n + m].copy_from_slice(y);
    }

    /// Recomputes every reduced cost from fresh duals.
    fn price(&mut self, cost: &[f64]) {
        let y = self.duals(cost);
        let mut prod = std::mem::take(&mut self.alpha);
        self.row_products(&y, &mut prod);
        for j in 0..self.n + self.m {
            self.d[j] = if self.in_basis[j] { 0.0 } else { cost[j] - prod[j] };
        }
        self.alpha = prod;
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut col = vec![0.0; m];
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            self.column_into(j, &mut col);
            for i in 0..m {
                bmat[(i, k)] = col[i];
            }
        }
        let inv = bmat
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular simplex basis".into()))?;
        for k in 0..m {
            for i in 0..m {
                self.binv[k * m + i] = inv[(k, i)];
            }
        }
        for k in 0..m {
            let v: f64 = (0..m).map(|i| self.binv[k * m + i] * self.b[i]).sum();
            self.xb[k] = if v.abs() < 1e-13 { 0.0 } else { v };
        }
        Ok(())
    }

    fn ftran(&self, j: usize, col: &mut [f64], out: &mut [f64]) {
        self.column_into(j, col);
        let m = self.m;
        for k in 0..m {
            out[k] = dot(&self.binv[k * m..(k + 1) * m], col);
        }
    }

    fn pivot(&mut self, r: usize, entering: usize, u: &[f64]) {
        let m = self.m;
        let theta = self.xb[r] / u[r];
        for k in 0..m {
            if k != r {
                self.xb[k] -= theta * u[k];
                if self.xb[k] < 0.0 && self.xb[k] > -1e-11 {
                    self.xb[k] = 0.0;
                }
            }
        }
        self.xb[r] = theta;
        let inv = 1.0 / u[r];
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].iter().map(|v| v * inv).collect();
        for k in 0..m {
            if k == r || u[k] == 0.0 {
                continue;
            }
            let f = u[k];
            let row = &mut self.binv[k * m..(k + 1) * m];
            for (a, p) in row.iter_mut().zip(&pivot_row) {
                *a -= f * p;
            }
        }
        self.binv[r * m..(r + 1) * m].copy_from_slice(&pivot_row);
        self.in_basis[self.basis[r]] = false;
        self.in_basis[entering] = true;
        self.basis[r] = entering;
        self.iterations += 1;
    }

    /// One pricing + ratio-test step.
    fn step(&mut self, cost: &[f64], enterable: usize, bland: bool, tol: f64, col: &mut [f64], u: &mut [f64]) -> Result<(Step, bool)> {
        let mut entering = None;
        let mut best = 0.0;
        for j in 0..enterable {
            if self.in_basis[j] {
                continue;
            }
            let d = self.d[j];
            if d >= -tol {
                continue;
            }
            if bland {
                entering = Some(j);
                break;
            }
            let score = d * d / self.weights[j];
            if score > best {
                entering = Some(j);
                best = score;
            }
        }
        let Some(q) = entering else {
            return Ok((Step::Optimal, false));
        };
        self.ftran(q, col, u);
        let mut leave: Option<usize> = None;
        let mut ratio = f64::INFINITY;
        for k in 0..self.m {
            if u[k] > PIVOT_TOL {
                let t = self.xb[k].max(0.0) / u[k];
                let better = match leave {
                    None => true,
                    Some(l) => {
                        if t < ratio - 1e-12 {
                            true
                        } else if t <= ratio + 1e-12 {
                            if bland {
                                self.basis[k] < self.basis[l]
                            } else {
                                u[k] > u[l]
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some(k);
                    ratio = ratio.min(t);
                }
            }
        }
        let Some(r) = leave else {
            return Ok((Step::Unbounded, false));
        };
        let degenerate = self.xb[r].abs() < 1e-12;
        self.update_row(r, q, u[r], enterable, !bland);
        self.pivot(r, q, u);
        if self.iterations % REFACTOR_EVERY == 0 {
            self.refactor()?;
            self.price(cost);
        }
        Ok((Step::Pivoted, degenerate))
    }

    /// Reduced-cost and Devex updates from pivot row `r` (before the pivot).
    fn update_row(&mut self, r: usize, q: usize, alpha_q: f64, enterable: usize, devex: bool) {
        let m = self.m;
        let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        let dq = self.d[q];
        let wq = self.weights[q];
        let total = self.n + self.m;
        let mut alpha = std::mem::take(&mut self.alpha);
        self.row_products(&rho, &mut alpha);
        for j in 0..total {
            if self.in_basis[j] || j == q {
                continue;
            }
            let a = alpha[j];
            if a == 0.0 {
                continue;
            }
            let ratio = a / alpha_q;
            self.d[j] -= dq * ratio;
            if devex && j < enterable {
                let cand = ratio * ratio * wq;
                if cand > self.weights[j] {
                    self.weights[j] = cand;
                }
            }
        }
        self.alpha = alpha;
        let leaving = self.basis[r];
        self.d[leaving] = -dq / alpha_q;
        self.d[q] = 0.0;
        if devex {
            self.weights[leaving] = (wq / (alpha_q * alpha_q)).max(1.0);
        }
    }

    fn run(&mut self, cost: &[f64], enterable: usize) -> Result<bool> {
        self.weights.fill(1.0);
        self.price(cost);
        let scale = 1.0 + cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let tol = COST_TOL * scale;
        let mut col = vec![0.0; self.m];
        let mut u = vec![0.0; self.m];
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations > MAX_ITERATIONS {
                return Err(Error::Numerical("simplex iteration limit reached".into()));
            }
            let bland = degenerate_run >= DEGENERATE_RUN;
            match self.step(cost, enterable, bland, tol, &mut col, &mut u)? {
                (Step::Optimal, _) => {
                    // confirm optimality after a fresh factorization
                    self.refactor()?;
                    self.price(cost);
                    if (0..enterable).all(|j| self.in_basis[j] || self.d[j] >= -tol) {
                        return Ok(true);
                    }
                }
                (Step::Unbounded, _) => return Ok(false),
                (Step::Pivoted, deg) => {
                    degenerate_run = if deg { degenerate_run + 1 } else { 0 };
                }
            }
        }
    }

    /// Pivots zero-level artificials out of the basis where possible.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let m = self.m;
        let mut col = vec![0.0; m];
        let mut u = vec![0.0; m];
        for r in 0..m {
            if self.basis[r] < self.n {
                continue;
            }
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.in_basis[j] {
                    continue;
                }
                let v = self.dot_column(&row, j).abs();
                if v > 1e-7 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                self.ftran(j, &mut col, &mut u);
                self.pivot(r, j, &u);
            }
        }
        self.refactor()
    }
}

/// Solves the program; infeasibility and unboundedness are errors.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_warm(lp, &[])
}

/// Like [`solve`], starting phase 2 from `hint` (a basis from
/// [`LpSolution::basis`]) when it is primal feasible for this program.
pub fn solve_warm(lp: &LinearProgram, hint: &[usize]) -> Result<LpSolution> {
    if hint.len() == lp.rows && lp.rows > 0 {
        if let Some(sol) = try_warm(lp, hint)? {
            return Ok(sol);
        }
    }
    let mut s = Simplex::new(lp);
    let (n, m) = (s.n, s.m);
    let bscale = 1.0 + s.b.iter().fold(0.0f64, |a, v| a.max(*v));

    if m > 0 {
        let mut phase1 = vec![0.0; n + m];
        phase1[n..].fill(1.0);
        s.run(&phase1, n + m)?;
        let infeas: f64 = s
            .basis
            .iter()
            .zip(&s.xb)
            .filter(|(j, _)| **j >= n)
            .map(|(_, v)| v.abs())
            .sum();
        if infeas > FEAS_TOL * bscale {
            return Err(Error::Infeasible(format!(
                "target lies outside the candidate cone (phase-1 residual {infeas:.3e})"
            )));
        }
        s.drive_out_artificials()?;
    }

    let mut cost = lp.c.clone();
    cost.extend(std::iter::repeat_n(0.0, m));
    if !s.run(&cost, n)? {
        return Err(Error::Numerical("linear program is unbounded".into()));
    }
    Ok(extract(lp, &s))
}

fn try_warm(lp: &LinearProgram, hint: &[usize]) -> Result<Option<LpSolution>> {
    let mut s = Simplex::new(lp);
    let (n, m) = (s.n, s.m);
    let mut seen = vec![false; n + m];
    for &j in hint {
        if j >= n + m || seen[j] {
            return Ok(None);
        }
        seen[j] = true;
    }
    for (k, &j) in hint.iter().enumerate() {
        s.in_basis[s.basis[k]] = false;
        s.basis[k] = j;
    }
    for &j in hint {
        s.in_basis[j] = true;
    }
    if s.refactor().is_err() {
        return Ok(None);
    }
    let bscale = 1.0 + s.b.iter().fold(0.0f64, |a, v| a.max(*v));
    let feasible = s.basis.iter().zip(&s.xb).all(|(&j, &v)| {
        if j >= n {
            v.abs() <= FEAS_TOL * bscale
        } else {
            v >= -FEAS_TOL * bscale
        }
    });
    if !feasible {
        return Ok(None);
    }
    for v in s.xb.iter_mut() {
        *v = v.max(0.0);
    }
    let mut cost = lp.c.clone();
    cost.extend(std::iter::repeat_n(0.0, m));
    if !s.run(&cost, n)? {
        return Err(Error::Numerical("linear program is unbounded".into()));
    }
    Ok(Some(extract(lp, &s)))
}

fn extract(lp: &LinearProgram, s: &Simplex<'_>) -> LpSolution {
    let n = s.n;
    let mut cost = lp.c.clone();
    cost.extend(std::iter::repeat_n(0.0, s.m));
    let mut x = vec![0.0; n];
    for (k, &j) in s.basis.iter().enumerate() {
        if j < n {
            x[j] = s.xb[k].max(0.0);
        }
    }
    let y_flipped = s.duals(&cost);
    let dual: Vec<f64> = y_flipped.iter().zip(&s.sign).map(|(y, sg)| y * sg).collect();
    let objective: f64 = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
    let dual_obj: f64 = dual.iter().zip(&lp.b).map(|(a, b)| a * b).sum();
    let mut dual_infeasibility = 0.0f64;
    for j in 0..n {
        let aty: f64 = lp.column(j).iter().zip(&dual).map(|(a, y)| a * y).sum();
        dual_infeasibility = dual_infeasibility.max(aty - lp.c[j]);
    }
    let mut residual = lp.b.clone();
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            for (r, a) in residual.iter_mut().zip(lp.column(j)) {
                *r -= a * xj;
            }
        }
    }
    let primal_residual = residual.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    LpSolution {
        x,
        objective,
        duality_gap: (objective - dual_obj).abs(),
        dual,
        dual_infeasibility,
        primal_residual,
        iterations: s.iterations,
        basis: s.basis.clone(),
    }
}

/// True when `b` lies in the cone generated by `columns` (`A x = b, x ≥ 0`).
pub fn is_feasible(columns: &[Vec<f64>], b: &[f64]) -> Result<bool> {
    let lp = LinearProgram::new(columns, b.to_vec(), vec![0.0; columns.len()])?;
    match solve(&lp) {
        Ok(_) => Ok(true),
        Err(Error::Infeasible(_)) => Ok(false),
        Err(e) => Err(e),
    }
}
