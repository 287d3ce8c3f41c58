//! Homogeneous systems of weak and strict linear inequalities.
//!
//! A problem asks for `v` with `W·v ≥ 0` and `S·v ≫ 0`. By Motzkin's
//! transposition theorem exactly one of the following exists:
//!
//! * a primal witness `v`;
//! * dual weights `y ≥ 0` on the strict rows and `z ≥ 0` on the weak rows
//!   with `y ≠ 0` and `yᵀS + zᵀW = 0`.
//!
//! [`solve`] returns whichever one exists, and both re-verify by plain
//! substitution.

mod cycles;
mod simplex;

pub use cycles::{decompose_cycles, Cycle, CycleError, WeightedEdge};

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::numerics::{MatrixError, RMatrix, RVector, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeasibilityError {
    #[error("row {label:?} has {found} coefficients, expected {expected}")]
    RowLength {
        label: String,
        expected: usize,
        found: usize,
    },
    #[error("row label {0:?} used twice")]
    DuplicateLabel(String),
    #[error("column {0} out of range")]
    Column(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Weak,
    Strict,
}

/// Position of a row: its kind and index among rows of that kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RowRef {
    pub kind: RowKind,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityProblem {
    columns: Vec<String>,
    weak: RMatrix,
    strict: RMatrix,
}

impl FeasibilityProblem {
    pub fn new(columns: Vec<String>) -> Self {
        let n = columns.len();
        FeasibilityProblem {
            columns,
            weak: RMatrix::new(n),
            strict: RMatrix::new(n),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == label)
    }

    pub fn weak_rows(&self) -> &RMatrix {
        &self.weak
    }

    pub fn strict_rows(&self) -> &RMatrix {
        &self.strict
    }

    fn has_label(&self, label: &str) -> bool {
        self.weak
            .labels()
            .iter()
            .chain(self.strict.labels())
            .any(|l| l == label)
    }

    pub fn add_row(
        &mut self,
        kind: RowKind,
        label: impl Into<String>,
        row: RVector,
    ) -> Result<RowRef, FeasibilityError> {
        let label = label.into();
        if self.has_label(&label) {
            return Err(FeasibilityError::DuplicateLabel(label));
        }
        let target = match kind {
            RowKind::Weak => &mut self.weak,
            RowKind::Strict => &mut self.strict,
        };
        let found = row.len();
        let index = target.push(label.clone(), row).map_err(|e| match e {
            MatrixError::RowLength { .. } => FeasibilityError::RowLength {
                label: label.clone(),
                expected: self.columns.len(),
                found,
            },
            MatrixError::DuplicateLabel(l) => FeasibilityError::DuplicateLabel(l),
        })?;
        Ok(RowRef { kind, index })
    }

    /// Add a row given as `(column, coefficient)` pairs; repeated columns add up.
    pub fn add_sparse(
        &mut self,
        kind: RowKind,
        label: impl Into<String>,
        terms: &[(usize, Rational)],
    ) -> Result<RowRef, FeasibilityError> {
        let mut row = vec![Rational::zero(); self.columns.len()];
        for (c, a) in terms {
            *row.get_mut(*c).ok_or(FeasibilityError::Column(*c))? += a;
        }
        self.add_row(kind, label, RVector::new(row))
    }

    pub fn add_weak(
        &mut self,
        label: impl Into<String>,
        terms: &[(usize, Rational)],
    ) -> Result<RowRef, FeasibilityError> {
        self.add_sparse(RowKind::Weak, label, terms)
    }

    pub fn add_strict(
        &mut self,
        label: impl Into<String>,
        terms: &[(usize, Rational)],
    ) -> Result<RowRef, FeasibilityError> {
        self.add_sparse(RowKind::Strict, label, terms)
    }

    pub fn row(&self, r: RowRef) -> &RVector {
        match r.kind {
            RowKind::Weak => self.weak.row(r.index),
            RowKind::Strict => self.strict.row(r.index),
        }
    }

    pub fn label(&self, r: RowRef) -> &str {
        match r.kind {
            RowKind::Weak => self.weak.label(r.index),
            RowKind::Strict => self.strict.label(r.index),
        }
    }

    /// Whether `v` satisfies every row.
    pub fn is_witness(&self, v: &RVector) -> bool {
        v.len() == self.num_vars()
            && self
                .weak
                .rows()
                .iter()
                .all(|r| !r.dot_unchecked(v).is_negative())
            && self
                .strict
                .rows()
                .iter()
                .all(|r| r.dot_unchecked(v).is_positive())
    }

    /// Whether `(y, z)` is a Motzkin certificate for this system.
    pub fn is_certificate(&self, y: &RVector, z: &RVector) -> bool {
        if y.len() != self.strict.len() || z.len() != self.weak.len() {
            return false;
        }
        if !y.is_nonnegative() || !z.is_nonnegative() || y.is_zero() {
            return false;
        }
        let combo = self
            .strict
            .weighted_row_sum(y.entries())
            .add(&self.weak.weighted_row_sum(z.entries()));
        combo.is_zero()
    }

    /// JSON dump with labeled rows and exact rationals as strings.
    pub fn to_json(&self) -> Value {
        let rows = |m: &RMatrix| -> Vec<Value> {
            m.labels()
                .iter()
                .zip(m.rows())
                .map(|(l, r)| json!({ "label": l, "coefficients": r }))
                .collect()
        };
        json!({
            "columns": self.columns,
            "weak": rows(&self.weak),
            "strict": rows(&self.strict),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimalWitness {
    pub v: RVector,
    pub weak_values: RVector,
    pub strict_values: RVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualCertificate {
    /// Weights on the strict rows; they sum to 1.
    pub strict_weights: RVector,
    pub weak_weights: RVector,
}

impl DualCertificate {
    pub fn weight(&self, r: RowRef) -> &Rational {
        match r.kind {
            RowKind::Weak => &self.weak_weights[r.index],
            RowKind::Strict => &self.strict_weights[r.index],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum FeasibilityOutcome {
    Primal(PrimalWitness),
    Dual(DualCertificate),
}

impl FeasibilityOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityOutcome::Primal(_))
    }

    /// Re-check the returned branch by substitution.
    pub fn verify(&self, p: &FeasibilityProblem) -> bool {
        match self {
            FeasibilityOutcome::Primal(w) => p.is_witness(&w.v),
            FeasibilityOutcome::Dual(c) => p.is_certificate(&c.strict_weights, &c.weak_weights),
        }
    }
}

fn witness(p: &FeasibilityProblem, v: RVector) -> PrimalWitness {
    let weak_values = p.weak.mul_vec(&v).expect("dimensions agree");
    let strict_values = p.strict.mul_vec(&v).expect("dimensions agree");
    PrimalWitness {
        v,
        weak_values,
        strict_values,
    }
}

/// Decide the system exactly. With no strict rows the zero vector is
/// returned as the witness.
pub fn solve(p: &FeasibilityProblem) -> FeasibilityOutcome {
    let s = p.strict.len();
    let w = p.weak.len();
    solve_ordered(p, &(0..s + w).collect::<Vec<_>>())
}

/// Like [`solve`] but with the simplex column order shuffled by `seed`,
/// which generally lands on a different witness.
pub fn solve_seeded(p: &FeasibilityProblem, seed: u64) -> FeasibilityOutcome {
    let mut order: Vec<usize> = (0..p.strict.len() + p.weak.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    solve_ordered(p, &order)
}

/// `order` lists dual variables, strict rows first (`0..s`) then weak ones.
fn solve_ordered(p: &FeasibilityProblem, order: &[usize]) -> FeasibilityOutcome {
    let n = p.num_vars();
    let s = p.strict.len();
    if s == 0 {
        return FeasibilityOutcome::Primal(witness(p, RVector::zeros(n)));
    }
    // Equality system over the dual variables: one equation per primal
    // column plus Σ y = 1.
    let dual_column = |d: usize| -> RVector {
        let (row, strict) = if d < s {
            (p.strict.row(d), true)
        } else {
            (p.weak.row(d - s), false)
        };
        let mut col = row.entries().to_vec();
        col.push(if strict {
            Rational::one()
        } else {
            Rational::zero()
        });
        RVector::new(col)
    };
    let columns: Vec<RVector> = order.iter().map(|&d| dual_column(d)).collect();
    let mut rhs = vec![Rational::zero(); n + 1];
    rhs[n] = Rational::one();
    let result = simplex::phase_one(&columns, &rhs);

    if result.infeasibility.is_zero() {
        let mut y = vec![Rational::zero(); s];
        let mut z = vec![Rational::zero(); p.weak.len()];
        for (pos, &d) in order.iter().enumerate() {
            let val = result.solution[pos].clone();
            if d < s {
                y[d] = val;
            } else {
                z[d - s] = val;
            }
        }
        let cert = DualCertificate {
            strict_weights: RVector::new(y),
            weak_weights: RVector::new(z),
        };
        debug_assert!(p.is_certificate(&cert.strict_weights, &cert.weak_weights));
        return FeasibilityOutcome::Dual(cert);
    }

    // Phase-one multipliers π satisfy S·π′ + π_n ≤ 0 and W·π′ ≤ 0 with
    // π_n > 0, so v = −π′ is a strict witness.
    let mut v = RVector::new(result.multipliers[..n].iter().map(|x| -x).collect());
    let min_slack = p
        .strict
        .rows()
        .iter()
        .map(|r| r.dot_unchecked(&v))
        .min()
        .expect("at least one strict row");
    debug_assert!(min_slack.is_positive());
    v = v.scale(&min_slack.recip());
    let out = witness(p, v);
    debug_assert!(p.is_witness(&out.v));
    FeasibilityOutcome::Primal(out)
}
