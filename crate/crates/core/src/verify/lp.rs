//! Dense two-phase primal simplex.
//!
//! Solves `max c·x` subject to `A x <= b` and `lo <= x <= hi`. Sizes in this
//! crate are small (a handful of inputs, at most a few hundred rows), so a
//! dense tableau with Bland's rule is adequate.

/// Pivot and feasibility tolerance.
pub const TOLERANCE: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub enum LpResult {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpResult {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpResult::Infeasible)
    }
}

/// A linear program over box-bounded variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub bounds: Vec<(f64, f64)>,
    /// Rows `(a, b)` meaning `a · x <= b`.
    pub constraints: Vec<(Vec<f64>, f64)>,
}

impl LinearProgram {
    pub fn new(bounds: Vec<(f64, f64)>) -> LinearProgram {
        LinearProgram {
            bounds,
            constraints: Vec::new(),
        }
    }

    pub fn push(&mut self, a: Vec<f64>, b: f64) {
        debug_assert_eq!(a.len(), self.bounds.len());
        self.constraints.push((a, b));
    }

    pub fn pop(&mut self) {
        self.constraints.pop();
    }

    pub fn maximize(&self, objective: &[f64]) -> LpResult {
        let n = self.bounds.len();
        if self.bounds.iter().any(|&(lo, hi)| lo > hi + TOLERANCE) {
            return LpResult::Infeasible;
        }
        // Shift to z = x - lo >= 0; upper bounds become ordinary rows.
        let lo: Vec<f64> = self.bounds.iter().map(|b| b.0).collect();
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(self.constraints.len() + n);
        for (a, b) in &self.constraints {
            let shift: f64 = a.iter().zip(&lo).map(|(a, l)| a * l).sum();
            rows.push((a.clone(), b - shift));
        }
        for (i, &(l, h)) in self.bounds.iter().enumerate() {
            let mut a = vec![0.0; n];
            a[i] = 1.0;
            rows.push((a, (h - l).max(0.0)));
        }
        let offset: f64 = objective.iter().zip(&lo).map(|(c, l)| c * l).sum();
        match Tableau::new(&rows, n).solve(objective) {
            Solved::Optimal(z, value) => LpResult::Optimal {
                x: z.iter().zip(&self.bounds).map(|(z, &(l, h))| (z + l).clamp(l, h)).collect(),
                value: value + offset,
            },
            Solved::Infeasible => LpResult::Infeasible,
            Solved::Unbounded => LpResult::Unbounded,
        }
    }

    pub fn minimize(&self, objective: &[f64]) -> LpResult {
        let neg: Vec<f64> = objective.iter().map(|c| -c).collect();
        match self.maximize(&neg) {
            LpResult::Optimal { x, value } => LpResult::Optimal { x, value: -value },
            other => other,
        }
    }

    pub fn feasible(&self) -> bool {
        self.maximize(&vec![0.0; self.bounds.len()]).is_feasible()
    }
}

enum Solved {
    Optimal(Vec<f64>, f64),
    Infeasible,
    Unbounded,
}

/// Standard form `A z + s = b`, `z, s >= 0`, with artificials on rows whose
/// right-hand side is negative.
struct Tableau {
    /// `m` constraint rows followed by the objective row; the last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n: usize,
    m: usize,
    artificials: usize,
}

impl Tableau {
    fn new(rows: &[(Vec<f64>, f64)], n: usize) -> Tableau {
        let m = rows.len();
        let negative: Vec<usize> = (0..m).filter(|&i| rows[i].1 < 0.0).collect();
        let k = negative.len();
        let width = n + m + k + 1;
        let mut t = vec![vec![0.0; width]; m + 1];
        let mut basis = vec![0; m];
        let mut art = 0;
        for (i, (a, b)) in rows.iter().enumerate() {
            let sign = if *b < 0.0 { -1.0 } else { 1.0 };
            for (j, &v) in a.iter().enumerate() {
                t[i][j] = sign * v;
            }
            t[i][n + i] = sign;
            t[i][width - 1] = sign * b;
            if *b < 0.0 {
                t[i][n + m + art] = 1.0;
                basis[i] = n + m + art;
                art += 1;
            } else {
                basis[i] = n + i;
            }
        }
        Tableau {
            t,
            basis,
            n,
            m,
            artificials: k,
        }
    }

    fn rhs(&self) -> usize {
        self.t[0].len() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in &mut self.t[row] {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Load `cost` (to be maximized) into the objective row as reduced costs.
    fn set_objective(&mut self, cost: &[f64]) {
        let width = self.t[0].len();
        let mut obj = vec![0.0; width];
        for (j, &c) in cost.iter().enumerate() {
            obj[j] = -c;
        }
        for i in 0..self.m {
            let cb = cost.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(&self.t[i]) {
                    *o += cb * v;
                }
            }
        }
        self.t[self.m] = obj;
    }

    /// Bland's rule over columns `< limit`. Returns false when unbounded.
    fn run(&mut self, limit: usize) -> bool {
        let rhs = self.rhs();
        loop {
            let Some(col) = (0..limit).find(|&j| self.t[self.m][j] < -TOLERANCE) else {
                return true;
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..self.m {
                let a = self.t[i][col];
                if a > TOLERANCE {
                    let ratio = self.t[i][rhs] / a;
                    let better = match best {
                        None => true,
                        Some((r, _, b)) => ratio < r - 1e-12 || (ratio <= r + 1e-12 && self.basis[i] < b),
                    };
                    if better {
                        best = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            let Some((_, row, _)) = best else {
                return false;
            };
            self.pivot(row, col);
        }
    }

    fn solve(mut self, objective: &[f64]) -> Solved {
        let (n, m, k) = (self.n, self.m, self.artificials);
        let rhs = self.rhs();
        if k > 0 {
            let mut cost = vec![0.0; n + m + k];
            for c in &mut cost[n + m..] {
                *c = -1.0;
            }
            self.set_objective(&cost);
            self.run(n + m + k);
            if self.t[m][rhs] < -TOLERANCE {
                return Solved::Infeasible;
            }
            // Drive remaining artificials out of the basis.
            for i in 0..m {
                if self.basis[i] >= n + m {
                    if let Some(col) = (0..n + m).find(|&j| self.t[i][j].abs() > TOLERANCE) {
                        self.pivot(i, col);
                    }
                }
            }
        }
        let mut cost = vec![0.0; n + m + k];
        cost[..n].copy_from_slice(objective);
        self.set_objective(&cost);
        if !self.run(n + m) {
            return Solved::Unbounded;
        }
        let mut z = vec![0.0; n];
        for i in 0..m {
            if self.basis[i] < n {
                z[self.basis[i]] = self.t[i][rhs].max(0.0);
            }
        }
        let value = objective.iter().zip(&z).map(|(c, z)| c * z).sum();
        Solved::Optimal(z, value)
    }
}
