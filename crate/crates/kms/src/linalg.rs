//! Exact linear algebra: fraction-free row echelon forms over the integers
//! (with an `i128` fast path and a `BigInt` fallback) and reduced rational
//! echelon forms with coefficient recovery.
//!
//! * [`Echelon`] — incremental fraction-free echelon of integer rows; rows are
//!   kept primitive (content 1), pivots strictly increase. Supports rank
//!   queries and reduction of further vectors, returning the rational residual
//!   as (integer vector, denominator).
//! * [`QEchelon`] — reduced row echelon over Q with optional tracking of each
//!   stored row as a combination of the inserted vectors, used to express a
//!   vector in a chosen spanning set.
//!
//! All arithmetic is exact. `Echelon<i128>` reports [`LinalgError::Overflow`]
//! instead of wrapping; callers retry with `Echelon<BigInt>`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::scalar::Rational;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum LinalgError {
    #[error("integer overflow in fraction-free elimination")]
    Overflow,
    #[error("row width {got} does not match echelon width {want}")]
    Width { got: usize, want: usize },
}

/// Entry arithmetic needed by the fraction-free echelon: exact ring ops with
/// overflow detection, gcd, and exact division.
pub trait EchelonEntry: Clone + PartialEq {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn checked_mul(&self, other: &Self) -> Option<Self>;
    fn checked_add(&self, other: &Self) -> Option<Self>;
    fn checked_sub(&self, other: &Self) -> Option<Self>;
    fn gcd(&self, other: &Self) -> Self;
    fn exact_div(&self, other: &Self) -> Self;
    fn is_negative(&self) -> bool;
    fn neg(&self) -> Self;
    fn to_rational(&self) -> Rational;
}

impl EchelonEntry for i128 {
    fn zero() -> Self {
        0
    }
    fn one() -> Self {
        1
    }
    fn from_i64(v: i64) -> Self {
        v as i128
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn checked_mul(&self, other: &Self) -> Option<Self> {
        i128::checked_mul(*self, *other)
    }
    fn checked_add(&self, other: &Self) -> Option<Self> {
        i128::checked_add(*self, *other)
    }
    fn checked_sub(&self, other: &Self) -> Option<Self> {
        i128::checked_sub(*self, *other)
    }
    fn gcd(&self, other: &Self) -> Self {
        Integer::gcd(self, other)
    }
    fn exact_div(&self, other: &Self) -> Self {
        self / other
    }
    fn is_negative(&self) -> bool {
        *self < 0
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn to_rational(&self) -> Rational {
        Rational::from(BigInt::from(*self))
    }
}

impl EchelonEntry for BigInt {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn checked_mul(&self, other: &Self) -> Option<Self> {
        Some(self * other)
    }
    fn checked_add(&self, other: &Self) -> Option<Self> {
        Some(self + other)
    }
    fn checked_sub(&self, other: &Self) -> Option<Self> {
        Some(self - other)
    }
    fn gcd(&self, other: &Self) -> Self {
        Integer::gcd(self, other)
    }
    fn exact_div(&self, other: &Self) -> Self {
        self / other
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn to_rational(&self) -> Rational {
        Rational::from(self.clone())
    }
}

/// Divide a row by the gcd of its entries and normalize the leading sign.
fn make_primitive<T: EchelonEntry>(row: &mut [T]) {
    let one = T::one();
    let mut g = T::zero();
    for e in row.iter() {
        if !e.is_zero() {
            g = g.gcd(e);
            if g == one {
                break;
            }
        }
    }
    if g.is_zero() {
        return;
    }
    let lead_negative = row.iter().find(|e| !e.is_zero()).map(|e| e.is_negative()).unwrap_or(false);
    let divisor = if lead_negative { g.neg() } else { g };
    if divisor == T::one() {
        return;
    }
    for e in row.iter_mut() {
        if !e.is_zero() {
            *e = e.exact_div(&divisor);
        }
    }
}

/// Incremental fraction-free row echelon over an exact integer type.
///
/// Stored rows are primitive with strictly increasing pivot columns; inserting
/// a vector cross-multiplies it against each stored row (`v ← p·v − c·row`),
/// keeping everything integral.
#[derive(Clone)]
pub struct Echelon<T: EchelonEntry> {
    width: usize,
    rows: Vec<Vec<T>>,
    pivots: Vec<usize>,
}

impl<T: EchelonEntry> Echelon<T> {
    pub fn new(width: usize) -> Self {
        Echelon { width, rows: Vec::new(), pivots: Vec::new() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    fn reduce_in_place(&self, v: &mut Vec<T>) -> Result<(), LinalgError> {
        for (row, &pc) in self.rows.iter().zip(&self.pivots) {
            if v[pc].is_zero() {
                continue;
            }
            let p = row[pc].clone();
            let c = v[pc].clone();
            for k in 0..self.width {
                let pv = p.checked_mul(&v[k]).ok_or(LinalgError::Overflow)?;
                let cr = c.checked_mul(&row[k]).ok_or(LinalgError::Overflow)?;
                v[k] = pv.checked_sub(&cr).ok_or(LinalgError::Overflow)?;
            }
            make_primitive(v);
        }
        Ok(())
    }

    /// Reduce `v` against the echelon; the returned vector is the residual up
    /// to a positive scalar factor (primitive, leading entry positive).
    pub fn residual(&self, v: &[T]) -> Result<Vec<T>, LinalgError> {
        if v.len() != self.width {
            return Err(LinalgError::Width { got: v.len(), want: self.width });
        }
        let mut w = v.to_vec();
        make_primitive(&mut w);
        self.reduce_in_place(&mut w)?;
        Ok(w)
    }

    /// Reduce `v` exactly: returns (w, s) with s·w equal, entry for entry, to
    /// `v` minus its projection onto the row space.
    pub fn residual_exact(&self, v: &[T]) -> Result<(Vec<T>, Rational), LinalgError> {
        if v.len() != self.width {
            return Err(LinalgError::Width { got: v.len(), want: self.width });
        }
        let mut w = v.to_vec();
        let mut scale = Rational::one();
        for (row, &pc) in self.rows.iter().zip(&self.pivots) {
            if w[pc].is_zero() {
                continue;
            }
            let p = row[pc].clone();
            let c = w[pc].clone();
            for k in 0..self.width {
                let pv = p.checked_mul(&w[k]).ok_or(LinalgError::Overflow)?;
                let cr = c.checked_mul(&row[k]).ok_or(LinalgError::Overflow)?;
                w[k] = pv.checked_sub(&cr).ok_or(LinalgError::Overflow)?;
            }
            scale = scale / p.to_rational();
            let mut g = T::zero();
            for e in w.iter() {
                if !e.is_zero() {
                    g = g.gcd(e);
                    if g == T::one() {
                        break;
                    }
                }
            }
            if !g.is_zero() && g != T::one() {
                for e in w.iter_mut() {
                    if !e.is_zero() {
                        *e = e.exact_div(&g);
                    }
                }
                scale = scale * g.to_rational();
            }
        }
        Ok((w, scale))
    }

    /// Insert `v`; returns true when it was independent of the current rows.
    pub fn insert(&mut self, v: &[T]) -> Result<bool, LinalgError> {
        let mut w = self.residual(v)?;
        let Some(pc) = w.iter().position(|e| !e.is_zero()) else {
            return Ok(false);
        };
        make_primitive(&mut w);
        let at = self.pivots.partition_point(|&q| q < pc);
        self.rows.insert(at, w);
        self.pivots.insert(at, pc);
        Ok(true)
    }

    pub fn contains(&self, v: &[T]) -> Result<bool, LinalgError> {
        Ok(self.residual(v)?.iter().all(|e| e.is_zero()))
    }
}

/// Run `f` with an `i128` echelon; on overflow, redo everything with `BigInt`.
///
/// `f` receives a fresh echelon and must replay its full insertion sequence,
/// so it is handed the generic builder twice at most.
pub fn with_int_fallback<R>(
    width: usize,
    f_small: impl FnOnce(&mut Echelon<i128>) -> Result<R, LinalgError>,
    f_big: impl FnOnce(&mut Echelon<BigInt>) -> Result<R, LinalgError>,
) -> R {
    let mut small = Echelon::<i128>::new(width);
    match f_small(&mut small) {
        Ok(r) => r,
        Err(_) => {
            let mut big = Echelon::<BigInt>::new(width);
            f_big(&mut big).expect("BigInt elimination cannot overflow")
        }
    }
}

/// Reduced row echelon over Q with unit pivots and optional recovery of each
/// inserted vector's expansion coefficients.
pub struct QEchelon {
    width: usize,
    rows: Vec<Vec<Rational>>,
    pivots: Vec<usize>,
    /// When tracking, `combos[r]` expresses stored row r as a linear
    /// combination of the successfully inserted vectors.
    combos: Option<Vec<Vec<Rational>>>,
    inserted: usize,
}

impl QEchelon {
    pub fn new(width: usize) -> Self {
        QEchelon { width, rows: Vec::new(), pivots: Vec::new(), combos: None, inserted: 0 }
    }

    /// Like `new`, but each stored row remembers its expression in terms of
    /// the inserted vectors, enabling [`QEchelon::solve`].
    pub fn new_tracking(width: usize) -> Self {
        QEchelon { combos: Some(Vec::new()), ..QEchelon::new(width) }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Residual of `v` and, when tracking, the combination of inserted vectors
    /// subtracted from it: v = Σ coeff·inserted + residual.
    fn reduce_full(&self, v: &[Rational]) -> (Vec<Rational>, Vec<Rational>) {
        assert_eq!(v.len(), self.width, "vector width mismatch");
        let mut w = v.to_vec();
        let mut used = vec![Rational::zero(); self.inserted];
        for (r, &pc) in self.pivots.iter().enumerate() {
            if w[pc].is_zero() {
                continue;
            }
            let c = w[pc].clone();
            let row = &self.rows[r];
            for k in pc..self.width {
                if !row[k].is_zero() {
                    let delta = &c * &row[k];
                    w[k] = &w[k] - &delta;
                }
            }
            if let Some(combos) = &self.combos {
                for (idx, coef) in combos[r].iter().enumerate() {
                    if !coef.is_zero() {
                        let delta = &c * coef;
                        used[idx] = &used[idx] + &delta;
                    }
                }
            }
        }
        (w, used)
    }

    pub fn residual(&self, v: &[Rational]) -> Vec<Rational> {
        self.reduce_full(v).0
    }

    pub fn contains(&self, v: &[Rational]) -> bool {
        self.residual(v).iter().all(|e| e.is_zero())
    }

    /// Insert `v`; true when independent. Tracking counts every call (also
    /// dependent ones) so solve-coefficients index the insertion sequence.
    pub fn insert(&mut self, v: &[Rational]) -> bool {
        let (mut w, used) = self.reduce_full(v);
        self.inserted += 1;
        let Some(pc) = w.iter().position(|e| !e.is_zero()) else {
            return false;
        };
        let lead = w[pc].clone();
        for e in w.iter_mut() {
            if !e.is_zero() {
                *e = &*e / &lead;
            }
        }
        // Combination for the new row: (v − Σ used·inserted)/lead.
        let combo = self.combos.as_ref().map(|_| {
            let mut c = vec![Rational::zero(); self.inserted];
            for (idx, u) in used.iter().enumerate() {
                if !u.is_zero() {
                    c[idx] = -u / &lead;
                }
            }
            c[self.inserted - 1] = Rational::one() / &lead;
            c
        });
        // Back-substitute into existing rows to keep the form reduced.
        for r in 0..self.rows.len() {
            let c = self.rows[r][pc].clone();
            if c.is_zero() {
                continue;
            }
            for k in 0..self.width {
                if !w[k].is_zero() {
                    let delta = &c * &w[k];
                    self.rows[r][k] = &self.rows[r][k] - &delta;
                }
            }
            if let (Some(combos), Some(new_combo)) = (self.combos.as_mut(), combo.as_ref()) {
                let combo_row = &mut combos[r];
                combo_row.resize(new_combo.len(), Rational::zero());
                for (idx, u) in new_combo.iter().enumerate() {
                    if !u.is_zero() {
                        let delta = &c * u;
                        combo_row[idx] = &combo_row[idx] - &delta;
                    }
                }
            }
        }
        let at = self.pivots.partition_point(|&q| q < pc);
        self.rows.insert(at, w);
        self.pivots.insert(at, pc);
        if let (Some(combos), Some(c)) = (self.combos.as_mut(), combo) {
            combos.insert(at, c);
        }
        true
    }

    /// Express `v` in terms of the inserted vectors (requires tracking);
    /// returns None when `v` is outside the span.
    pub fn solve(&self, v: &[Rational]) -> Option<Vec<Rational>> {
        assert!(self.combos.is_some(), "solve requires a tracking echelon");
        let (w, used) = self.reduce_full(v);
        if w.iter().any(|e| !e.is_zero()) {
            return None;
        }
        let mut out = used;
        out.resize(self.inserted, Rational::zero());
        Some(out)
    }
}

/// Convenience: true when span(a) ⊆ span(b), both given as vector lists.
pub fn subspace_contained(vectors: &[Vec<Rational>], space: &QEchelon) -> bool {
    vectors.iter().all(|v| space.contains(v))
}
