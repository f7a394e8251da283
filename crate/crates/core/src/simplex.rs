//! Dense two-phase primal simplex with bounded variables.
//!
//! Sized for the LPs this crate produces (hundreds of rows): the basis inverse
//! is kept densely and refreshed periodically, constraint columns are stored
//! sparse, and pricing starts with Dantzig's rule, falling back to Bland's
//! rule after a stall so cycling cannot occur.

const FEAS_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize objective · x` subject to the constraints and `lower ≤ x ≤ upper`
/// (entries may be infinite).
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub enum SimplexError {
    Infeasible { row: usize, residual: f64 },
    Unbounded,
    IterationLimit(usize),
    BadInput(String),
}

impl std::fmt::Display for SimplexError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimplexError::Infeasible { row, residual } => {
                write!(f, "infeasible (row {row}, residual {residual:e})")
            }
            SimplexError::Unbounded => write!(f, "unbounded"),
            SimplexError::IterationLimit(n) => write!(f, "iteration limit {n} reached"),
            SimplexError::BadInput(msg) => write!(f, "bad input: {msg}"),
        }
    }
}

impl std::error::Error for SimplexError {}

impl LpProblem {
    pub fn solve(&self) -> Result<LpSolution, SimplexError> {
        Solver::new(self)?.run()
    }
}

/// Sparse column: (row, coefficient) pairs.
type Column = Vec<(usize, f64)>;

struct Solver {
    m: usize,
    /// Structural variable count (slacks and artificials follow).
    n_struct: usize,
    columns: Vec<Column>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    /// Basis column index per row.
    basis: Vec<usize>,
    /// Dense row-major basis inverse.
    b_inv: Vec<Vec<f64>>,
    /// Current value per column (basic values updated in place; nonbasic at a bound).
    value: Vec<f64>,
    is_basic: Vec<bool>,
    n_artificial: usize,
}

impl Solver {
    fn new(p: &LpProblem) -> Result<Self, SimplexError> {
        let n = p.objective.len();
        let m = p.constraints.len();
        if p.lower.len() != n || p.upper.len() != n {
            return Err(SimplexError::BadInput(format!(
                "bounds length {}/{} vs {n} variables",
                p.lower.len(),
                p.upper.len()
            )));
        }
        for c in &p.constraints {
            if c.coeffs.len() != n {
                return Err(SimplexError::BadInput(format!(
                    "constraint has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
        }
        for j in 0..n {
            if p.lower[j] > p.upper[j] {
                return Err(SimplexError::BadInput(format!(
                    "variable {j} has lower {} > upper {}",
                    p.lower[j], p.upper[j]
                )));
            }
        }

        let total = n + m;
        let mut columns: Vec<Column> = Vec::with_capacity(total);
        for j in 0..n {
            let col: Column = p
                .constraints
                .iter()
                .enumerate()
                .filter(|(_, c)| c.coeffs[j] != 0.0)
                .map(|(i, c)| (i, c.coeffs[j]))
                .collect();
            columns.push(col);
        }
        let mut lower = p.lower.clone();
        let mut upper = p.upper.clone();
        let mut rhs = Vec::with_capacity(m);
        for (i, c) in p.constraints.iter().enumerate() {
            columns.push(vec![(i, 1.0)]);
            match c.relation {
                Relation::Le => {
                    lower.push(0.0);
                    upper.push(f64::INFINITY);
                }
                Relation::Ge => {
                    lower.push(f64::NEG_INFINITY);
                    upper.push(0.0);
                }
                Relation::Eq => {
                    lower.push(0.0);
                    upper.push(0.0);
                }
            }
            rhs.push(c.rhs);
        }
        let mut cost = p.objective.clone();
        cost.resize(total, 0.0);

        Ok(Self {
            m,
            n_struct: n,
            columns,
            cost,
            lower,
            upper,
            rhs,
            basis: Vec::new(),
            b_inv: Vec::new(),
            value: vec![0.0; total],
            is_basic: vec![false; total],
            n_artificial: 0,
        })
    }

    fn rest_value(&self, j: usize) -> f64 {
        if self.lower[j].is_finite() {
            self.lower[j]
        } else if self.upper[j].is_finite() {
            self.upper[j]
        } else {
            0.0
        }
    }

    fn run(&mut self) -> Result<LpSolution, SimplexError> {
        // Start: every structural nonbasic at a bound, slacks basic.
        for j in 0..self.n_struct {
            self.value[j] = self.rest_value(j);
        }
        self.basis = (self.n_struct..self.n_struct + self.m).collect();
        for &j in &self.basis {
            self.is_basic[j] = true;
        }
        self.b_inv = identity(self.m);
        let mut x_b = self.basic_values_from_scratch();

        // Phase 1: absorb bound violations of the slack basis into artificials.
        let mut phase1_cost = vec![0.0; self.columns.len()];
        let mut need_phase1 = false;
        for i in 0..self.m {
            let slack = self.n_struct + i;
            let v = x_b[i];
            if v < self.lower[slack] - FEAS_TOL || v > self.upper[slack] + FEAS_TOL {
                need_phase1 = true;
                // Park the slack at its nearest bound and let an artificial
                // variable carry the residual.
                let park = if v < self.lower[slack] { self.lower[slack] } else { self.upper[slack] };
                let residual = v - park;
                let art = self.columns.len();
                self.columns.push(vec![(i, residual.signum())]);
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                self.cost.push(0.0);
                self.is_basic.push(true);
                self.value.push(0.0);
                phase1_cost.push(1.0);
                self.is_basic[slack] = false;
                self.value[slack] = park;
                self.basis[i] = art;
                x_b[i] = residual.abs();
                self.n_artificial += 1;
            } else {
                self.value[slack] = v;
            }
        }
        for i in 0..self.m {
            self.value[self.basis[i]] = x_b[i];
        }

        let mut iterations = 0;
        if need_phase1 {
            phase1_cost.resize(self.columns.len(), 0.0);
            // Artificial columns carry ±1 coefficients, so the identity B⁻¹
            // of the slack basis is stale.
            self.refactorize();
            iterations += self.optimize(&phase1_cost, usize::MAX)?;
            let infeasibility: f64 = (0..self.m)
                .filter(|&i| self.basis[i] >= self.n_struct + self.m)
                .map(|i| self.value[self.basis[i]])
                .sum::<f64>()
                + (self.n_struct + self.m..self.columns.len())
                    .filter(|&j| !self.is_basic[j])
                    .map(|j| self.value[j])
                    .sum::<f64>();
            if infeasibility > 1e-7 {
                let row = (0..self.m)
                    .find(|&i| {
                        self.basis[i] >= self.n_struct + self.m
                            && self.value[self.basis[i]] > 1e-7
                    })
                    .unwrap_or(0);
                return Err(SimplexError::Infeasible { row, residual: infeasibility });
            }
            // Freeze artificials at zero for phase 2.
            for j in self.n_struct + self.m..self.columns.len() {
                self.lower[j] = 0.0;
                self.upper[j] = 0.0;
                if !self.is_basic[j] {
                    self.value[j] = 0.0;
                }
            }
        }

        let cost = self.cost.clone();
        iterations += self.optimize(&cost, self.n_struct + self.m)?;

        let x = self.value[..self.n_struct].to_vec();
        let objective = x
            .iter()
            .zip(&self.cost[..self.n_struct])
            .map(|(v, c)| v * c)
            .sum();
        Ok(LpSolution { x, objective, iterations })
    }

    /// Basic values implied by the current nonbasic rest values.
    fn basic_values_from_scratch(&self) -> Vec<f64> {
        let mut adjusted = self.rhs.clone();
        for (j, col) in self.columns.iter().enumerate() {
            if !self.is_basic[j] && self.value[j] != 0.0 {
                for &(i, a) in col {
                    adjusted[i] -= a * self.value[j];
                }
            }
        }
        // x_B = B⁻¹ · adjusted.
        (0..self.m)
            .map(|i| {
                self.b_inv[i]
                    .iter()
                    .zip(&adjusted)
                    .map(|(b, r)| b * r)
                    .sum()
            })
            .collect()
    }

    fn refactorize(&mut self) {
        let mut b = vec![vec![0.0; self.m]; self.m];
        for (pos, &j) in self.basis.iter().enumerate() {
            for &(i, a) in &self.columns[j] {
                b[i][pos] = a;
            }
        }
        self.b_inv = invert(&b);
        let x_b = self.basic_values_from_scratch();
        for i in 0..self.m {
            self.value[self.basis[i]] = x_b[i];
        }
    }

    /// Run the pivoting loop for a given cost vector. `bland_threshold` is the
    /// iteration count after which pricing switches to Bland's rule; phase 1
    /// uses it from the start cap computation as well.
    fn optimize(&mut self, cost: &[f64], _hint: usize) -> Result<usize, SimplexError> {
        let max_iter = 200 * (self.m + self.columns.len()) + 20_000;
        let stall_window = 4 * (self.m + 1);
        let mut bland = false;
        let mut stall = 0usize;
        let mut last_obj = f64::INFINITY;
        let mut since_refactor = 0usize;

        for iter in 0..max_iter {
            // y = c_B B⁻¹.
            let mut y = vec![0.0; self.m];
            for (pos, &j) in self.basis.iter().enumerate() {
                let cb = cost[j];
                if cb != 0.0 {
                    for (yr, br) in y.iter_mut().zip(&self.b_inv[pos]) {
                        *yr += cb * br;
                    }
                }
            }

            // Pricing.
            let mut entering: Option<(usize, f64, f64)> = None; // (col, reduced, direction)
            for j in 0..self.columns.len() {
                if self.is_basic[j] || self.lower[j] == self.upper[j] {
                    continue;
                }
                let mut d = cost[j];
                for &(i, a) in &self.columns[j] {
                    d -= y[i] * a;
                }
                let at_lower = self.lower[j].is_finite() && self.value[j] <= self.lower[j] + FEAS_TOL;
                let at_upper = self.upper[j].is_finite() && self.value[j] >= self.upper[j] - FEAS_TOL;
                let free = !at_lower && !at_upper;
                let dir = if (at_lower || free) && d < -COST_TOL {
                    1.0
                } else if (at_upper || free) && d > COST_TOL {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, d, dir));
                    break;
                }
                match entering {
                    Some((_, best, _)) if d.abs() <= best.abs() => {}
                    _ => entering = Some((j, d, dir)),
                }
            }

            let Some((j_in, _, dir)) = entering else {
                return Ok(iter);
            };

            // w = B⁻¹ a_j.
            let mut w = vec![0.0; self.m];
            for &(r, a) in &self.columns[j_in] {
                for i in 0..self.m {
                    w[i] += self.b_inv[i][r] * a;
                }
            }

            // Ratio test: the entering variable moves by θ in direction `dir`.
            let own_span = self.upper[j_in] - self.lower[j_in];
            let mut theta = own_span; // may be inf
            let mut leaving: Option<(usize, f64)> = None; // (basis position, bound hit)
            for i in 0..self.m {
                let step = dir * w[i];
                if step.abs() < PIVOT_TOL {
                    continue;
                }
                let jb = self.basis[i];
                let xb = self.value[jb];
                let (limit, bound) = if step > 0.0 {
                    if self.lower[jb].is_finite() {
                        ((xb - self.lower[jb]) / step, self.lower[jb])
                    } else {
                        continue;
                    }
                } else if self.upper[jb].is_finite() {
                    ((self.upper[jb] - xb) / -step, self.upper[jb])
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = match leaving {
                    None => limit < theta - 1e-12,
                    Some((pos, _)) => {
                        limit < theta - 1e-12
                            || (limit < theta + 1e-12 && self.basis[i] < self.basis[pos])
                    }
                };
                if better {
                    theta = limit;
                    leaving = Some((i, bound));
                }
            }

            if theta.is_infinite() {
                return Err(SimplexError::Unbounded);
            }

            match leaving {
                None => {
                    // Bound flip: the entering variable crosses its own span.
                    for i in 0..self.m {
                        let jb = self.basis[i];
                        self.value[jb] -= dir * theta * w[i];
                    }
                    self.value[j_in] += dir * theta;
                }
                Some((pos, bound)) => {
                    for i in 0..self.m {
                        let jb = self.basis[i];
                        self.value[jb] -= dir * theta * w[i];
                    }
                    let j_out = self.basis[pos];
                    self.value[j_out] = bound;
                    self.is_basic[j_out] = false;
                    self.value[j_in] += dir * theta;
                    self.is_basic[j_in] = true;
                    self.basis[pos] = j_in;
                    // B⁻¹ update: eliminate column j_in from other rows.
                    let pivot = w[pos];
                    if pivot.abs() < PIVOT_TOL {
                        self.refactorize();
                    } else {
                        let pivot_row: Vec<f64> =
                            self.b_inv[pos].iter().map(|v| v / pivot).collect();
                        for i in 0..self.m {
                            if i == pos {
                                continue;
                            }
                            let factor = w[i];
                            if factor != 0.0 {
                                for r in 0..self.m {
                                    self.b_inv[i][r] -= factor * pivot_row[r];
                                }
                            }
                        }
                        self.b_inv[pos] = pivot_row;
                    }
                    since_refactor += 1;
                    if since_refactor >= REFACTOR_EVERY {
                        self.refactorize();
                        since_refactor = 0;
                    }
                }
            }

            // Stall detection → Bland's rule.
            let obj: f64 = self
                .basis
                .iter()
                .map(|&j| cost[j] * self.value[j])
                .sum::<f64>()
                + (0..self.columns.len())
                    .filter(|&j| !self.is_basic[j])
                    .map(|j| cost[j] * self.value[j])
                    .sum::<f64>();
            if obj < last_obj - 1e-12 {
                last_obj = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall > stall_window {
                    bland = true;
                }
            }
        }
        Err(SimplexError::IterationLimit(max_iter))
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

/// Gauss-Jordan inverse with partial pivoting; the basis is nonsingular by
/// construction of the pivot rules.
fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut aug: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut inv = identity(n);
    for col in 0..n {
        let mut best = col;
        for row in col + 1..n {
            if aug[row][col].abs() > aug[best][col].abs() {
                best = row;
            }
        }
        aug.swap(col, best);
        inv.swap(col, best);
        let pivot = aug[col][col];
        debug_assert!(pivot.abs() > 1e-14, "singular basis");
        for v in aug[col].iter_mut() {
            *v /= pivot;
        }
        for v in inv[col].iter_mut() {
            *v /= pivot;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = aug[row][col];
            if factor != 0.0 {
                for k in 0..n {
                    aug[row][k] -= factor * aug[col][k];
                    inv[row][k] -= factor * inv[col][k];
                }
            }
        }
    }
    inv
}
