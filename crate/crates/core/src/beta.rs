//! β-bound estimation for the net-charging relaxation: the per-step scalars
//! bracketing `wᵀB̃q / Σq` over the admissible cooling-power box.

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::simplex::{Constraint, LpProblem, Relation};

/// Conservative constant bounds: elementwise min/max of `wᵀB̃`. Valid for every
/// nonnegative `q`, independent of the box.
pub fn beta_conservative(wb: &[f64]) -> (f64, f64) {
    let lo = wb.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = wb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// The ratio `wᵀB̃q / Σq` at a fixed point `q`, with a zero-denominator guard.
pub fn beta_at_point(wb: &[f64], q: &[f64], guard: f64, step: usize) -> Result<f64> {
    let denom: f64 = q.iter().sum();
    if denom <= guard {
        return Err(Error::DegenerateDenominator { step, value: denom, guard });
    }
    Ok(dot(wb, q) / denom)
}

/// Exact min/max of the linear-fractional ratio over the box
/// `[q_min, q_max]`. Quasilinearity puts both extrema at box vertices, so up
/// to 20 zones we enumerate vertices directly (first vertex in lexicographic
/// order wins exact ties); larger instances go through the Charnes–Cooper
/// normalization and the LP solver.
pub fn beta_tight_over_box(
    wb: &[f64],
    q_min: &[f64],
    q_max: &[f64],
) -> Result<(f64, f64)> {
    let n = wb.len();
    if q_min.len() != n || q_max.len() != n {
        return Err(Error::LengthMismatch(format!(
            "wb has {n} zones, box has {}/{}",
            q_min.len(),
            q_max.len()
        )));
    }
    for i in 0..n {
        if q_min[i] < 0.0 || q_min[i] > q_max[i] {
            return Err(Error::InvalidParameter(format!(
                "invalid cooling-power box for zone {i}: [{}, {}]",
                q_min[i], q_max[i]
            )));
        }
    }
    let sum_max: f64 = q_max.iter().sum();
    let guard = 1e-9 * sum_max;
    if sum_max <= 0.0 {
        return Err(Error::DegenerateBox(format!(
            "sum of upper limits is {sum_max}, the ratio is undefined everywhere"
        )));
    }

    if n <= 20 {
        beta_by_vertex_enumeration(wb, q_min, q_max, guard)
    } else {
        let lo = beta_by_lp(wb, q_min, q_max, false)?;
        let hi = beta_by_lp(wb, q_min, q_max, true)?;
        Ok((lo, hi))
    }
}

fn beta_by_vertex_enumeration(
    wb: &[f64],
    q_min: &[f64],
    q_max: &[f64],
    guard: f64,
) -> Result<(f64, f64)> {
    let n = wb.len();
    let mut best_lo = f64::INFINITY;
    let mut best_hi = f64::NEG_INFINITY;
    let mut any = false;
    let mut vertex = vec![0.0; n];
    for idx in 0u64..(1u64 << n) {
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..n {
            // Bit order chosen so idx walks vertices in lexicographic order
            // with q_min < q_max per coordinate.
            let hi_bit = (idx >> (n - 1 - j)) & 1 == 1;
            vertex[j] = if hi_bit { q_max[j] } else { q_min[j] };
            num += wb[j] * vertex[j];
            den += vertex[j];
        }
        if den <= guard {
            continue;
        }
        any = true;
        let ratio = num / den;
        // Strict comparisons: the first vertex reaching a value keeps it.
        if ratio < best_lo {
            best_lo = ratio;
        }
        if ratio > best_hi {
            best_hi = ratio;
        }
    }
    if !any {
        return Err(Error::DegenerateBox(
            "every box vertex fails the denominator guard".into(),
        ));
    }
    Ok((best_lo, best_hi))
}

/// Charnes–Cooper transform: with `y = q·s`, `s = 1/Σq`, minimizing the ratio
/// becomes `min wbᵀy` subject to `Σy = 1`, `q_min·s ≤ y ≤ q_max·s`, `s ≥ 0`.
fn beta_by_lp(wb: &[f64], q_min: &[f64], q_max: &[f64], maximize: bool) -> Result<f64> {
    let n = wb.len();
    // Variables: y_0..y_{n-1}, then s.
    let mut objective: Vec<f64> = wb.iter().map(|&c| if maximize { -c } else { c }).collect();
    objective.push(0.0);
    let mut constraints = Vec::with_capacity(2 * n + 1);
    // Σ y = 1.
    let mut row = vec![1.0; n];
    row.push(0.0);
    constraints.push(Constraint { coeffs: row, relation: Relation::Eq, rhs: 1.0 });
    for i in 0..n {
        let mut upper = vec![0.0; n + 1];
        upper[i] = 1.0;
        upper[n] = -q_max[i];
        constraints.push(Constraint { coeffs: upper, relation: Relation::Le, rhs: 0.0 });
        let mut lower = vec![0.0; n + 1];
        lower[i] = 1.0;
        lower[n] = -q_min[i];
        constraints.push(Constraint { coeffs: lower, relation: Relation::Ge, rhs: 0.0 });
    }
    let mut lower = vec![0.0; n + 1];
    let mut upper = vec![f64::INFINITY; n + 1];
    // y ≤ 1 follows from Σy = 1 with y ≥ 0; keep bounds loose but finite for s.
    for b in upper.iter_mut().take(n) {
        *b = 1.0;
    }
    lower[n] = 0.0;
    upper[n] = f64::INFINITY;
    let problem = LpProblem { objective, constraints, lower, upper };
    let solution = problem.solve().map_err(|e| {
        Error::DegenerateBox(format!("Charnes–Cooper LP failed: {e}"))
    })?;
    let value = dot(wb, &solution.x[..n]);
    Ok(value)
}
