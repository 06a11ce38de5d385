//! Dense two-phase simplex for small linear programs.
//!
//! Problems here have at most a few hundred rows, so a full tableau is
//! simpler and fast enough. Pivoting uses the most-negative reduced cost and
//! falls back to Bland's rule once a run of degenerate pivots is seen, which
//! rules out cycling while keeping the pivot count low. All choices break
//! ties by lowest index, so results are bit-for-bit reproducible.

use std::fmt;

const EPS: f64 = 1e-9;
const PHASE_ONE_TOL: f64 = 1e-7;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub label: String,
}

/// `minimize c·x` subject to `rows`, `x ≥ 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Sensitivity of the optimal objective to each row's right-hand side.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpError {
    /// No feasible point; lists labels of rows whose artificials stayed positive.
    Infeasible(Vec<String>),
    Unbounded,
    IterationLimit,
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::Infeasible(rows) => write!(f, "infeasible (violated: {})", rows.join(", ")),
            LpError::Unbounded => f.write_str("unbounded"),
            LpError::IterationLimit => f.write_str("pivot limit reached"),
        }
    }
}

impl std::error::Error for LpError {}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a variable with the given objective coefficient; returns its index.
    pub fn add_var(&mut self, cost: f64) -> usize {
        self.objective.push(cost);
        self.objective.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn cost(&self, var: usize) -> f64 {
        self.objective[var]
    }

    /// Add a constraint row; returns its index.
    pub fn add_row(&mut self, label: impl Into<String>, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.objective.len()));
        self.rows.push(Row {
            coeffs,
            sense,
            rhs,
            label: label.into(),
        });
        self.rows.len() - 1
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    m: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    /// column holding +e_i at start, per row
    unit_col: Vec<usize>,
    artificial_start: usize,
    /// sign applied to the row when normalizing rhs ≥ 0, times the row scale
    row_factor: Vec<f64>,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let n = lp.objective.len();
        let m = lp.rows.len();
        let n_slack = lp.rows.iter().filter(|r| r.sense != Sense::Eq).count();

        // Normalize each row: scale by its largest coefficient, flip to rhs ≥ 0.
        let mut senses = Vec::with_capacity(m);
        let mut row_factor = Vec::with_capacity(m);
        for r in &lp.rows {
            let scale = r.coeffs.iter().map(|c| c.1.abs()).fold(0.0, f64::max);
            let scale = if scale > 0.0 { 1.0 / scale } else { 1.0 };
            let flip = if r.rhs < 0.0 { -1.0 } else { 1.0 };
            let sense = match (r.sense, flip < 0.0) {
                (Sense::Le, true) => Sense::Ge,
                (Sense::Ge, true) => Sense::Le,
                (s, _) => s,
            };
            senses.push(sense);
            row_factor.push(scale * flip);
        }
        let n_art = senses.iter().filter(|&&s| s != Sense::Le).count();
        let artificial_start = n + n_slack;
        let width = artificial_start + n_art + 1;
        let mut data = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let mut unit_col = vec![0; m];

        let mut slack = n;
        let mut art = artificial_start;
        for (i, r) in lp.rows.iter().enumerate() {
            let f = row_factor[i];
            let row = &mut data[i * width..(i + 1) * width];
            for &(j, c) in &r.coeffs {
                row[j] += c * f;
            }
            row[width - 1] = r.rhs * f;
            match r.sense {
                Sense::Eq => {}
                Sense::Le | Sense::Ge => {
                    // slack sign follows the original sense, then the flip
                    let s = if r.sense == Sense::Le { 1.0 } else { -1.0 };
                    row[slack] = s * f.signum();
                    if senses[i] == Sense::Le {
                        basis[i] = slack;
                        unit_col[i] = slack;
                    }
                    slack += 1;
                }
            }
            if senses[i] != Sense::Le {
                row[art] = 1.0;
                basis[i] = art;
                unit_col[i] = art;
                art += 1;
            }
        }

        Tableau {
            m,
            width,
            data,
            basis,
            unit_col,
            artificial_start,
            row_factor,
            pivots: 0,
            max_pivots: 50_000 + 50 * (m + width),
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, r: usize, c: usize, reduced: &mut [f64]) {
        let w = self.width;
        let p = self.data[r * w + c];
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = reduced[c];
        if f != 0.0 {
            for (v, &pv) in reduced.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            reduced[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Reduced costs (and negated objective in the last slot) for `costs`.
    fn reduced_costs(&self, costs: &[f64]) -> Vec<f64> {
        let mut d = costs.to_vec();
        d.resize(self.width, 0.0);
        for i in 0..self.m {
            let cb = d_cost(costs, self.basis[i]);
            if cb != 0.0 {
                for j in 0..self.width {
                    d[j] -= cb * self.at(i, j);
                }
            }
        }
        d
    }

    /// Simplex iterations over columns `< allowed`. Returns false on unboundedness.
    fn optimize(&mut self, reduced: &mut [f64], allowed: usize) -> Result<bool, LpError> {
        let mut degenerate = 0usize;
        loop {
            if self.pivots > self.max_pivots {
                return Err(LpError::IterationLimit);
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -EPS;
            for (j, &d) in reduced.iter().enumerate().take(allowed) {
                if d < -EPS {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if d < best {
                        best = d;
                        enter = Some(j);
                    }
                }
            }
            let Some(c) = enter else { return Ok(true) };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > EPS {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, r)) => {
                            if ratio < r - EPS || (ratio <= r + EPS && self.basis[i] < self.basis[k]) {
                                Some((i, ratio))
                            } else {
                                Some((k, r))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else { return Ok(false) };
            if ratio <= EPS {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c, reduced);
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let n_total = self.width - 1;
        let n = lp.objective.len();

        if self.artificial_start < n_total {
            let mut phase1 = vec![0.0; n_total];
            for c in &mut phase1[self.artificial_start..] {
                *c = 1.0;
            }
            let mut reduced = self.reduced_costs(&phase1);
            self.optimize(&mut reduced, n_total)?;
            let infeasibility = -reduced[n_total];
            if infeasibility > PHASE_ONE_TOL * (1.0 + self.max_rhs()) {
                let rows = (0..self.m)
                    .filter(|&i| self.basis[i] >= self.artificial_start && self.rhs(i) > PHASE_ONE_TOL)
                    .map(|i| lp.rows[i].label.clone())
                    .collect();
                return Err(LpError::Infeasible(rows));
            }
            // Drive zero-valued artificials out of the basis where possible.
            for i in 0..self.m {
                if self.basis[i] >= self.artificial_start {
                    if let Some(c) = (0..self.artificial_start).find(|&j| self.at(i, j).abs() > 1e-7) {
                        let mut scratch = vec![0.0; self.width];
                        self.pivot(i, c, &mut scratch);
                    }
                }
            }
        }

        let mut costs = lp.objective.clone();
        costs.resize(n_total, 0.0);
        let mut reduced = self.reduced_costs(&costs);
        if !self.optimize(&mut reduced, self.artificial_start)? {
            return Err(LpError::Unbounded);
        }

        let mut x = vec![0.0; n];
        for i in 0..self.m {
            let b = self.basis[i];
            if b < n {
                x[b] = self.rhs(i).max(0.0);
            }
        }
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        let duals = (0..self.m)
            .map(|i| -reduced[self.unit_col[i]] * self.row_factor[i])
            .collect();
        Ok(LpSolution {
            x,
            objective,
            duals,
            pivots: self.pivots,
        })
    }

    fn max_rhs(&self) -> f64 {
        (0..self.m).map(|i| self.rhs(i).abs()).fold(0.0, f64::max)
    }
}

fn d_cost(costs: &[f64], j: usize) -> f64 {
    costs.get(j).copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y st x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  → (2, 6), 36
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-3.0);
        let y = lp.add_var(-5.0);
        lp.add_row("a", vec![(x, 1.0)], Sense::Le, 4.0);
        lp.add_row("b", vec![(y, 2.0)], Sense::Le, 12.0);
        lp.add_row("c", vec![(x, 3.0), (y, 2.0)], Sense::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        assert!((s.objective + 36.0).abs() < 1e-9);
        // shadow prices of the max problem are (0, 1.5, 1); negated for min
        assert!((s.duals[0]).abs() < 1e-9);
        assert!((s.duals[1] + 1.5).abs() < 1e-9);
        assert!((s.duals[2] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn ge_and_eq_rows_with_duals() {
        // min 2a + 3b st a + b ≥ 10, a ≤ 4, b = free → a=4, b=6, dual of demand = 3
        let mut lp = LinearProgram::new();
        let a = lp.add_var(2.0);
        let b = lp.add_var(3.0);
        lp.add_row("demand", vec![(a, 1.0), (b, 1.0)], Sense::Ge, 10.0);
        lp.add_row("cap", vec![(a, 1.0)], Sense::Le, 4.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 26.0).abs() < 1e-9);
        assert!((s.duals[0] - 3.0).abs() < 1e-9);
        assert!((s.duals[1] + 1.0).abs() < 1e-9);

        let mut eq = LinearProgram::new();
        let a = eq.add_var(1.0);
        let b = eq.add_var(1.0);
        eq.add_row("sum", vec![(a, 1.0), (b, 2.0)], Sense::Eq, 8.0);
        let s = eq.solve().unwrap();
        assert!((s.objective - 4.0).abs() < 1e-9);
        assert!((s.duals[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_rows() {
        // -a ≥ -3  (a ≤ 3), min -a → a = 3, dual -1 wrt rhs -3 means d obj / d rhs = 1
        let mut lp = LinearProgram::new();
        let a = lp.add_var(-1.0);
        lp.add_row("neg", vec![(a, -1.0)], Sense::Ge, -3.0);
        let s = lp.solve().unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-9);
        assert!((s.duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_reports_rows() {
        let mut lp = LinearProgram::new();
        let a = lp.add_var(1.0);
        lp.add_row("low", vec![(a, 1.0)], Sense::Ge, 5.0);
        lp.add_row("high", vec![(a, 1.0)], Sense::Le, 2.0);
        match lp.solve() {
            Err(LpError::Infeasible(rows)) => assert_eq!(rows, vec!["low".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new();
        let a = lp.add_var(-1.0);
        lp.add_row("floor", vec![(a, 1.0)], Sense::Ge, 1.0);
        assert_eq!(lp.solve(), Err(LpError::Unbounded));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example (cycles under the largest-coefficient rule without anti-cycling).
        let mut lp = LinearProgram::new();
        let x: Vec<usize> = [-0.75, 150.0, -0.02, 6.0].iter().map(|&c| lp.add_var(c)).collect();
        lp.add_row("r1", vec![(x[0], 0.25), (x[1], -60.0), (x[2], -0.04), (x[3], 9.0)], Sense::Le, 0.0);
        lp.add_row("r2", vec![(x[0], 0.5), (x[1], -90.0), (x[2], -0.02), (x[3], 3.0)], Sense::Le, 0.0);
        lp.add_row("r3", vec![(x[2], 1.0)], Sense::Le, 1.0);
        let s = lp.solve().unwrap();
        assert!((s.objective + 0.05).abs() < 1e-9);
    }
}
