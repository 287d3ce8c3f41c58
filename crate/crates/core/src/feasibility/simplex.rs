//! Exact phase-one simplex on a dense tableau with Bland's rule.

use num_traits::{One, Signed, Zero};

use crate::numerics::{RVector, Rational};

pub(crate) struct PhaseOne {
    /// Optimal `Σ artificials`; zero iff `A·x = b, x ≥ 0` is solvable.
    pub infeasibility: Rational,
    /// Values of the structural variables at the optimum.
    pub solution: Vec<Rational>,
    /// Optimal multipliers `π` of the equality rows: `Aᵀπ ≤ 0` and
    /// `π ≤ 1`, with `bᵀπ` equal to the infeasibility.
    pub multipliers: Vec<Rational>,
}

/// Minimize the sum of artificials for `A·x = b`, `x ≥ 0`, where `A` is
/// given by its columns.
pub(crate) fn phase_one(columns: &[RVector], rhs: &[Rational]) -> PhaseOne {
    let m = rhs.len();
    let n = columns.len();
    let width = n + m + 1;
    let last = width - 1;

    // Rows with negative right-hand side are negated so artificials start
    // feasible; `sign` undoes that when reading back π.
    let sign: Vec<bool> = rhs.iter().map(|b| b.is_negative()).collect();
    let mut t: Vec<Vec<Rational>> = (0..m)
        .map(|i| {
            let mut row = vec![Rational::zero(); width];
            for (j, c) in columns.iter().enumerate() {
                row[j] = if sign[i] { -&c[i] } else { c[i].clone() };
            }
            row[n + i] = Rational::one();
            row[last] = if sign[i] { -&rhs[i] } else { rhs[i].clone() };
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Reduced-cost row: c_j − Σ_i c_{B_i} T_ij, with the negated objective
    // value in the last slot.
    let mut cost = vec![Rational::zero(); width];
    for row in &t {
        for j in 0..n {
            cost[j] -= &row[j];
        }
        cost[last] -= &row[last];
    }

    while let Some(enter) = (0..last).find(|&j| cost[j].is_negative()) {
        let mut leave: Option<(usize, Rational)> = None;
        for (i, row) in t.iter().enumerate() {
            if !row[enter].is_positive() {
                continue;
            }
            let ratio = &row[last] / &row[enter];
            let better = match &leave {
                None => true,
                Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        // Phase one is bounded below by zero, so some row always blocks.
        let (r, _) = leave.expect("phase one is bounded");
        pivot(&mut t, &mut cost, r, enter);
        basis[r] = enter;
    }

    let mut solution = vec![Rational::zero(); n];
    let mut infeasibility = Rational::zero();
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            solution[b] = t[i][last].clone();
        } else {
            infeasibility += &t[i][last];
        }
    }
    let multipliers = (0..m)
        .map(|i| {
            let pi = Rational::one() - &cost[n + i];
            if sign[i] {
                -pi
            } else {
                pi
            }
        })
        .collect();
    PhaseOne {
        infeasibility,
        solution,
        multipliers,
    }
}

fn pivot(t: &mut [Vec<Rational>], cost: &mut [Rational], r: usize, e: usize) {
    let inv = t[r][e].recip();
    let nonzero: Vec<usize> = (0..t[r].len()).filter(|&j| !t[r][j].is_zero()).collect();
    for &j in &nonzero {
        t[r][j] *= &inv;
    }
    let prow: Vec<(usize, Rational)> = nonzero.iter().map(|&j| (j, t[r][j].clone())).collect();
    let eliminate = |row: &mut [Rational]| {
        let factor = row[e].clone();
        if factor.is_zero() {
            return;
        }
        for (j, a) in &prow {
            row[*j] -= &factor * a;
        }
    };
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            eliminate(row);
        }
    }
    eliminate(cost);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::int;

    #[test]
    fn feasible_equality_system() {
        // x1 + x2 = 2, x1 − x2 = 0 → x = (1, 1)
        let cols = vec![RVector::from_ints(&[1, 1]), RVector::from_ints(&[1, -1])];
        let out = phase_one(&cols, &[int(2), int(0)]);
        assert!(out.infeasibility.is_zero());
        assert_eq!(out.solution, vec![int(1), int(1)]);
    }

    #[test]
    fn infeasible_system_has_positive_value_and_multipliers() {
        // x1 = −1 has no nonnegative solution.
        let cols = vec![RVector::from_ints(&[1])];
        let out = phase_one(&cols, &[int(-1)]);
        assert_eq!(out.infeasibility, int(1));
        // π with Aᵀπ ≤ 0 and bᵀπ = 1: π = −1.
        assert_eq!(out.multipliers, vec![int(-1)]);
    }
}
