//! Exact rational scalars, vectors and small dense matrices.
//!
//! Everything in the decision path of this crate is computed with
//! arbitrary-precision rationals. Weak and strict revealed-preference
//! comparisons are distinguished by exact sign tests, so no tolerance
//! ever appears.

use std::fmt;
use std::ops::Index;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Arbitrary-precision rational, always in lowest terms with a positive denominator.
pub type Rational = BigRational;

/// Integer-valued rational.
pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `n / d` in lowest terms. Panics when `d == 0`.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericsError {
    #[error("cannot parse {0:?} as an exact rational")]
    Parse(String),
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
}

/// Parse an integer (`-3`), a fraction (`29/10`) or a plain decimal (`2.9`)
/// into an exact rational. Exponent notation is rejected.
pub fn parse_rational(text: &str) -> Result<Rational, NumericsError> {
    let err = || NumericsError::Parse(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_integer(num.trim()).ok_or_else(err)?;
        let d = parse_integer(den.trim()).ok_or_else(err)?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (whole, frac) = match body.split_once('.') {
        Some((w, f)) => (w, f),
        None => (body, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{whole}{frac}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| err())?
    };
    let denom = num_traits::pow(BigInt::from(10u32), frac.len());
    let value = Rational::new(numer, denom);
    Ok(if negative { -value } else { value })
}

fn parse_integer(s: &str) -> Option<BigInt> {
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Outcome of a componentwise comparison of two vectors, from the
/// point of view of the left operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VecOrder {
    /// Componentwise equal.
    Eq,
    /// `x ≪ y`: every coordinate strictly smaller.
    Ll,
    /// `x < y`: `x ≤ y` and `x ≠ y`, but not every coordinate strictly smaller.
    Lt,
    /// `x ≫ y`.
    Gg,
    /// `x > y`.
    Gt,
    Incomparable,
}

impl VecOrder {
    /// `x ≤ y`.
    pub fn is_le(self) -> bool {
        matches!(self, VecOrder::Eq | VecOrder::Lt | VecOrder::Ll)
    }

    /// `x ≥ y`.
    pub fn is_ge(self) -> bool {
        matches!(self, VecOrder::Eq | VecOrder::Gt | VecOrder::Gg)
    }
}

/// Fixed-length vector of exact rationals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RVector(Vec<Rational>);

impl RVector {
    pub fn new(entries: Vec<Rational>) -> Self {
        RVector(entries)
    }

    pub fn zeros(len: usize) -> Self {
        RVector(vec![Rational::zero(); len])
    }

    pub fn ones(len: usize) -> Self {
        RVector(vec![Rational::one(); len])
    }

    /// Vector with `value` in every coordinate.
    pub fn constant(len: usize, value: &Rational) -> Self {
        RVector(vec![value.clone(); len])
    }

    /// `1_j`, the j-th unit vector.
    pub fn unit(len: usize, j: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[j] = Rational::one();
        v
    }

    pub fn from_ints(entries: &[i64]) -> Self {
        RVector(entries.iter().map(|&n| int(n)).collect())
    }

    /// Parse every entry with [`parse_rational`].
    pub fn parse<S: AsRef<str>>(entries: &[S]) -> Result<Self, NumericsError> {
        entries
            .iter()
            .map(|s| parse_rational(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()
            .map(RVector)
    }

    /// Parse a comma-separated list such as `"29/10, 1/2"`.
    pub fn parse_list(text: &str) -> Result<Self, NumericsError> {
        let parts: Vec<&str> = text.split(',').collect();
        Self::parse(&parts)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[Rational] {
        &self.0
    }

    pub fn into_entries(self) -> Vec<Rational> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rational> {
        self.0.iter()
    }

    fn check_len(&self, other: &RVector) -> Result<(), NumericsError> {
        if self.len() == other.len() {
            Ok(())
        } else {
            Err(NumericsError::Dimension {
                left: self.len(),
                right: other.len(),
            })
        }
    }

    /// Exact inner product.
    pub fn dot(&self, other: &RVector) -> Result<Rational, NumericsError> {
        self.check_len(other)?;
        Ok(self.dot_unchecked(other))
    }

    /// Inner product of vectors already known to share a length.
    pub(crate) fn dot_unchecked(&self, other: &RVector) -> Rational {
        debug_assert_eq!(self.len(), other.len());
        let mut acc = Rational::zero();
        for (a, b) in self.0.iter().zip(&other.0) {
            if !a.is_zero() && !b.is_zero() {
                acc += a * b;
            }
        }
        acc
    }

    /// Strongest componentwise relation between `self` and `other`.
    pub fn compare(&self, other: &RVector) -> Result<VecOrder, NumericsError> {
        self.check_len(other)?;
        let (mut lt, mut gt) = (0usize, 0usize);
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.cmp(b) {
                std::cmp::Ordering::Less => lt += 1,
                std::cmp::Ordering::Greater => gt += 1,
                std::cmp::Ordering::Equal => {}
            }
        }
        let n = self.len();
        Ok(match (lt, gt) {
            (0, 0) => VecOrder::Eq,
            (_, 0) if lt == n => VecOrder::Ll,
            (_, 0) => VecOrder::Lt,
            (0, _) if gt == n => VecOrder::Gg,
            (0, _) => VecOrder::Gt,
            _ => VecOrder::Incomparable,
        })
    }

    /// `self ≥ other` componentwise.
    pub fn ge_all(&self, other: &RVector) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }

    /// `self ≫ other` componentwise.
    pub fn gg_all(&self, other: &RVector) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a > b)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|a| !a.is_negative())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn sum(&self) -> Rational {
        self.0.iter().fold(Rational::zero(), |acc, a| acc + a)
    }

    pub fn min_entry(&self) -> Option<&Rational> {
        self.0.iter().min()
    }

    pub fn add(&self, other: &RVector) -> RVector {
        debug_assert_eq!(self.len(), other.len());
        RVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &RVector) -> RVector {
        debug_assert_eq!(self.len(), other.len());
        RVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, factor: &Rational) -> RVector {
        RVector(self.0.iter().map(|a| a * factor).collect())
    }

    /// `self += factor · other`.
    pub fn axpy(&mut self, factor: &Rational, other: &RVector) {
        debug_assert_eq!(self.len(), other.len());
        if factor.is_zero() {
            return;
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            if !b.is_zero() {
                *a += factor * b;
            }
        }
    }

    /// `Σ_l w_l · v_l`; the zero vector for an empty list.
    pub fn combination<'a, I>(terms: I, len: usize) -> RVector
    where
        I: IntoIterator<Item = (&'a Rational, &'a RVector)>,
    {
        let mut acc = RVector::zeros(len);
        for (w, v) in terms {
            acc.axpy(w, v);
        }
        acc
    }
}

impl Index<usize> for RVector {
    type Output = Rational;

    fn index(&self, index: usize) -> &Rational {
        &self.0[index]
    }
}

impl From<Vec<Rational>> for RVector {
    fn from(entries: Vec<Rational>) -> Self {
        RVector(entries)
    }
}

impl fmt::Display for RVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Rationals as JSON strings (`"29/10"`). Deserialization also accepts
/// decimal strings and integral or decimal JSON numbers.
pub mod rational_serde {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&value.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        let lit = NumLit::deserialize(deserializer)?;
        lit.to_rational().map_err(de::Error::custom)
    }
}

/// Lists of rationals as JSON string arrays.
pub mod rational_vec_serde {
    use super::*;

    pub fn serialize<S: Serializer>(values: &[Rational], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(values.iter().map(|v| v.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<Vec<Rational>, D::Error> {
        let lits = Vec::<NumLit>::deserialize(deserializer)?;
        lits.iter()
            .map(|l| l.to_rational().map_err(de::Error::custom))
            .collect()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumLit {
    Str(String),
    Num(serde_json::Number),
}

impl NumLit {
    fn to_rational(&self) -> Result<Rational, NumericsError> {
        match self {
            NumLit::Str(s) => parse_rational(s),
            // arbitrary_precision keeps the literal text, so decimals stay exact.
            NumLit::Num(n) => parse_rational(&n.to_string()),
        }
    }
}

impl Serialize for RVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        rational_vec_serde::serialize(&self.0, serializer)
    }
}

impl<'de> Deserialize<'de> for RVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        rational_vec_serde::deserialize(deserializer).map(RVector)
    }
}

/// Dense rectangular matrix with a unique label on every row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RMatrix {
    cols: usize,
    labels: Vec<String>,
    rows: Vec<RVector>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatrixError {
    #[error("row {label:?} has {found} entries, expected {expected}")]
    RowLength {
        label: String,
        found: usize,
        expected: usize,
    },
    #[error("duplicate row label {0:?}")]
    DuplicateLabel(String),
}

impl RMatrix {
    pub fn new(cols: usize) -> Self {
        RMatrix {
            cols,
            labels: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// Append a row. Label uniqueness is checked against existing rows.
    pub fn push(&mut self, label: impl Into<String>, row: RVector) -> Result<usize, MatrixError> {
        let label = label.into();
        if row.len() != self.cols {
            return Err(MatrixError::RowLength {
                label,
                found: row.len(),
                expected: self.cols,
            });
        }
        if self.labels.contains(&label) {
            return Err(MatrixError::DuplicateLabel(label));
        }
        self.labels.push(label);
        self.rows.push(row);
        Ok(self.rows.len() - 1)
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &RVector {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn rows(&self) -> &[RVector] {
        &self.rows
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `M · v`.
    pub fn mul_vec(&self, v: &RVector) -> Result<RVector, NumericsError> {
        self.rows
            .iter()
            .map(|r| r.dot(v))
            .collect::<Result<Vec<_>, _>>()
            .map(RVector)
    }

    /// `wᵀ · M`, a vector of length `cols`.
    pub fn weighted_row_sum(&self, weights: &[Rational]) -> RVector {
        debug_assert_eq!(weights.len(), self.rows.len());
        let mut acc = RVector::zeros(self.cols);
        for (w, r) in weights.iter().zip(&self.rows) {
            acc.axpy(w, r);
        }
        acc
    }
}

/// Solve the square system `a · x = b` exactly by Gaussian elimination.
/// Returns `None` when `a` is singular.
pub fn solve_square(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let n = a.len();
    debug_assert!(a.iter().all(|r| r.len() == n) && b.len() == n);
    let mut m: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        let inv = m[col][col].recip();
        for entry in m[col].iter_mut().skip(col) {
            *entry *= &inv;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in col..=n {
                    let delta = &factor * &m[col][c];
                    m[r][c] -= delta;
                }
            }
        }
    }
    Some(m.into_iter().map(|mut r| r.pop().unwrap()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals_exactly() {
        assert_eq!(parse_rational("29/10").unwrap(), ratio(29, 10));
        assert_eq!(parse_rational("2.9").unwrap(), ratio(29, 10));
        assert_eq!(parse_rational("-0.25").unwrap(), ratio(-1, 4));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("4").unwrap(), int(4));
        assert_eq!(parse_rational("6/-4").unwrap(), ratio(-3, 2));
        for bad in ["", "1e3", "1/0", "x", "1.2.3", "-", "."] {
            assert!(parse_rational(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn normalization_is_canonical() {
        let a = Rational::new(BigInt::from(2), BigInt::from(4));
        let b = ratio(1, 2);
        assert_eq!(a, b);
        assert_eq!(a.numer(), b.numer());
        assert_eq!(a.denom(), b.denom());
        assert_eq!(a.to_string(), "1/2");
    }

    #[test]
    fn compare_reports_strongest_relation() {
        let v = RVector::from_ints;
        assert_eq!(v(&[1, 2]).compare(&v(&[1, 2])).unwrap(), VecOrder::Eq);
        assert_eq!(v(&[1, 2]).compare(&v(&[2, 3])).unwrap(), VecOrder::Ll);
        assert_eq!(
            v(&[1, 2]).compare(&v(&[2, 1])).unwrap(),
            VecOrder::Incomparable
        );
        assert_eq!(v(&[1, 2]).compare(&v(&[1, 3])).unwrap(), VecOrder::Lt);
        assert_eq!(v(&[3, 2]).compare(&v(&[1, 1])).unwrap(), VecOrder::Gg);
        assert_eq!(v(&[3, 1]).compare(&v(&[1, 1])).unwrap(), VecOrder::Gt);
        assert!(v(&[1]).compare(&v(&[1, 2])).is_err());
    }

    #[test]
    fn dot_products() {
        let v = RVector::from_ints;
        assert_eq!(v(&[2, 1]).dot(&v(&[1, 2])).unwrap(), int(4));
        assert_eq!(v(&[1, 1]).dot(&v(&[0, 0])).unwrap(), int(0));
        assert_eq!(v(&[1, 2]).dot(&v(&[2, 1])).unwrap(), int(4));
        assert!(v(&[1, 2]).dot(&v(&[2])).is_err());
    }

    #[test]
    fn matrix_rejects_duplicate_labels_and_bad_rows() {
        let mut m = RMatrix::new(2);
        m.push("a", RVector::from_ints(&[1, 0])).unwrap();
        assert!(matches!(
            m.push("a", RVector::from_ints(&[0, 1])),
            Err(MatrixError::DuplicateLabel(_))
        ));
        assert!(matches!(
            m.push("b", RVector::from_ints(&[0])),
            Err(MatrixError::RowLength { .. })
        ));
        let s = m.weighted_row_sum(&[int(3)]);
        assert_eq!(s, RVector::from_ints(&[3, 0]));
    }

    #[test]
    fn gaussian_elimination() {
        let a = vec![vec![int(2), int(1)], vec![int(1), int(3)]];
        let x = solve_square(&a, &[int(3), int(5)]).unwrap();
        assert_eq!(x, vec![ratio(4, 5), ratio(7, 5)]);
        let singular = vec![vec![int(1), int(2)], vec![int(2), int(4)]];
        assert!(solve_square(&singular, &[int(1), int(2)]).is_none());
    }

    #[test]
    fn vectors_serialize_as_strings() {
        let v = RVector::new(vec![ratio(29, 10), int(1)]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["29/10","1"]"#);
        let back: RVector = serde_json::from_str(r#"["2.9", 1, 0.5]"#).unwrap();
        assert_eq!(back, RVector::new(vec![ratio(29, 10), int(1), ratio(1, 2)]));
        assert!(serde_json::from_str::<RVector>("[1e3]").is_err());
    }
}
