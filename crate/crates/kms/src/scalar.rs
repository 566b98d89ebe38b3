//! Exact scalar domains: arbitrary-precision rationals and small finite fields.
//!
//! Key items:
//! * [`Rational`] — reduced big-integer fractions (canonical sign, positive denominator).
//! * [`FiniteField`] / [`Ff`] — table-driven arithmetic in GF(2), GF(3), GF(4), GF(5), GF(7).
//! * [`Domain`] — runtime-chosen coefficient domain used by all group/graph machinery.
//! * [`rational_arith`] / [`field_arith`] — checked scalar arithmetic entry points.
//! * [`gf4_table`] — the 4×4 addition and multiplication tables of GF(4).

use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Reduced fraction over `BigInt`; `num_rational` keeps gcd = 1 and the
/// denominator positive, and prints `p/q` (or just `p` for integers).
pub type Rational = num_rational::BigRational;

/// Shorthand for an integer rational.
pub fn rat(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

/// Shorthand for `n/d`. Panics on `d == 0`.
pub fn rat_frac(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum ScalarError {
    #[error("cannot parse scalar `{0}`")]
    Parse(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("operands live in different scalar domains")]
    MixedDomains,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Checked rational arithmetic (division by zero reported, not panicked).
pub fn rational_arith(op: ArithOp, x: &Rational, y: &Rational) -> Result<Rational, ScalarError> {
    Ok(match op {
        ArithOp::Add => x + y,
        ArithOp::Sub => x - y,
        ArithOp::Mul => x * y,
        ArithOp::Div => {
            if y.is_zero() {
                return Err(ScalarError::DivisionByZero);
            }
            x / y
        }
    })
}

/// The five supported finite fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FiniteField {
    F2,
    F3,
    F4,
    F5,
    F7,
}

impl FiniteField {
    pub fn order(self) -> usize {
        match self {
            FiniteField::F2 => 2,
            FiniteField::F3 => 3,
            FiniteField::F4 => 4,
            FiniteField::F5 => 5,
            FiniteField::F7 => 7,
        }
    }

    pub fn characteristic(self) -> u8 {
        match self {
            FiniteField::F4 => 2,
            f => f.order() as u8,
        }
    }

    /// Extension degree over the prime field (2 for GF(4), else 1).
    pub fn degree(self) -> u8 {
        if self == FiniteField::F4 {
            2
        } else {
            1
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FiniteField::F2 => "F2",
            FiniteField::F3 => "F3",
            FiniteField::F4 => "F4",
            FiniteField::F5 => "F5",
            FiniteField::F7 => "F7",
        }
    }

    pub fn parse_name(s: &str) -> Option<FiniteField> {
        match s.trim().to_ascii_uppercase().as_str() {
            "F2" | "GF(2)" | "GF2" | "2" => Some(FiniteField::F2),
            "F3" | "GF(3)" | "GF3" | "3" => Some(FiniteField::F3),
            "F4" | "GF(4)" | "GF4" | "4" => Some(FiniteField::F4),
            "F5" | "GF(5)" | "GF5" | "5" => Some(FiniteField::F5),
            "F7" | "GF(7)" | "GF7" | "7" => Some(FiniteField::F7),
            _ => None,
        }
    }

    pub fn elements(self) -> Vec<Ff> {
        (0..self.order() as u8).map(|v| Ff { field: self, v }).collect()
    }
}

/// An element of one of the [`FiniteField`]s.
///
/// GF(4) elements are encoded 0, 1, 2 = y, 3 = y+1 where y² = y + 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ff {
    field: FiniteField,
    v: u8,
}

const GF4_MUL: [[u8; 4]; 4] = [
    [0, 0, 0, 0],
    [0, 1, 2, 3],
    [0, 2, 3, 1], // y*y = y+1, y*(y+1) = 1
    [0, 3, 1, 2], // (y+1)*(y+1) = y
];

/// Addition and multiplication tables of GF(4), indexed by the canonical
/// encoding 0, 1, 2 = y, 3 = y+1.
pub fn gf4_table() -> ([[u8; 4]; 4], [[u8; 4]; 4]) {
    let mut add = [[0u8; 4]; 4];
    for (i, row) in add.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = (i ^ j) as u8;
        }
    }
    (add, GF4_MUL)
}

impl Ff {
    pub fn new(field: FiniteField, v: u8) -> Ff {
        Ff { field, v: v % field.order() as u8 }
    }

    pub fn field(self) -> FiniteField {
        self.field
    }

    /// Canonical encoding in `0..order`.
    pub fn value(self) -> u8 {
        self.v
    }

    pub fn is_zero(self) -> bool {
        self.v == 0
    }

    pub fn add(self, o: Ff) -> Ff {
        assert_eq!(self.field, o.field, "mixed finite-field scalars");
        let v = match self.field {
            FiniteField::F4 => self.v ^ o.v,
            f => (self.v + o.v) % f.order() as u8,
        };
        Ff { field: self.field, v }
    }

    pub fn neg(self) -> Ff {
        let v = match self.field {
            FiniteField::F4 => self.v,
            f => (f.order() as u8 - self.v) % f.order() as u8,
        };
        Ff { field: self.field, v }
    }

    pub fn mul(self, o: Ff) -> Ff {
        assert_eq!(self.field, o.field, "mixed finite-field scalars");
        let v = match self.field {
            FiniteField::F4 => GF4_MUL[self.v as usize][o.v as usize],
            f => (self.v as u16 * o.v as u16 % f.order() as u16) as u8,
        };
        Ff { field: self.field, v }
    }

    pub fn inv(self) -> Option<Ff> {
        if self.is_zero() {
            return None;
        }
        self.field
            .elements()
            .into_iter()
            .find(|w| self.mul(*w).v == 1)
    }

    pub fn from_int(field: FiniteField, n: i64) -> Ff {
        let p = field.characteristic() as i64;
        Ff { field, v: n.rem_euclid(p) as u8 }
    }

    pub fn parse(field: FiniteField, s: &str) -> Result<Ff, ScalarError> {
        let t = s.trim();
        if field == FiniteField::F4 {
            match t {
                "y" => return Ok(Ff { field, v: 2 }),
                "y+1" | "1+y" => return Ok(Ff { field, v: 3 }),
                _ => {}
            }
        }
        let n: i64 = t.parse().map_err(|_| ScalarError::Parse(s.to_string()))?;
        if field == FiniteField::F4 && !(0..=1).contains(&n) {
            return Err(ScalarError::Parse(s.to_string()));
        }
        Ok(Ff::from_int(field, n))
    }
}

impl fmt::Display for Ff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.field, self.v) {
            (FiniteField::F4, 2) => write!(f, "y"),
            (FiniteField::F4, 3) => write!(f, "y+1"),
            (_, v) => write!(f, "{v}"),
        }
    }
}

/// Checked finite-field arithmetic; reports division by zero and mixed domains.
pub fn field_arith(op: ArithOp, x: Ff, y: Ff) -> Result<Ff, ScalarError> {
    if x.field() != y.field() {
        return Err(ScalarError::MixedDomains);
    }
    Ok(match op {
        ArithOp::Add => x.add(y),
        ArithOp::Sub => x.add(y.neg()),
        ArithOp::Mul => x.mul(y),
        ArithOp::Div => x.mul(y.inv().ok_or(ScalarError::DivisionByZero)?),
    })
}

/// A coefficient domain chosen at runtime: the rationals or a finite field.
///
/// Group elements, words and graphs are generic over this trait so that the
/// same collection code runs over Q and over GF(q).
pub trait Domain: Clone + fmt::Debug + PartialEq {
    type Elem: Clone + PartialEq + Eq + std::hash::Hash + fmt::Debug + fmt::Display + Ord;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn from_int(&self, n: i64) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inv(&self, a: &Self::Elem) -> Option<Self::Elem>;
    fn parse(&self, s: &str) -> Result<Self::Elem, ScalarError>;
    fn name(&self) -> String;

    /// All elements, for finite domains; `None` over Q.
    fn enumerate(&self) -> Option<Vec<Self::Elem>>;

    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.add(a, &self.neg(b))
    }

    fn is_zero(&self, a: &Self::Elem) -> bool {
        *a == self.zero()
    }

    fn pow(&self, a: &Self::Elem, k: u32) -> Self::Elem {
        let mut acc = self.one();
        for _ in 0..k {
            acc = self.mul(&acc, a);
        }
        acc
    }
}

/// The rational numbers as a [`Domain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Rationals;

impl Domain for Rationals {
    type Elem = Rational;

    fn zero(&self) -> Rational {
        Rational::zero()
    }
    fn one(&self) -> Rational {
        Rational::one()
    }
    fn from_int(&self, n: i64) -> Rational {
        rat(n)
    }
    fn add(&self, a: &Rational, b: &Rational) -> Rational {
        a + b
    }
    fn neg(&self, a: &Rational) -> Rational {
        -a
    }
    fn mul(&self, a: &Rational, b: &Rational) -> Rational {
        a * b
    }
    fn inv(&self, a: &Rational) -> Option<Rational> {
        if a.is_zero() {
            None
        } else {
            Some(a.recip())
        }
    }
    fn parse(&self, s: &str) -> Result<Rational, ScalarError> {
        parse_rational(s)
    }
    fn name(&self) -> String {
        "Q".to_string()
    }
    fn enumerate(&self) -> Option<Vec<Rational>> {
        None
    }
}

/// A finite field as a [`Domain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gf(pub FiniteField);

impl Domain for Gf {
    type Elem = Ff;

    fn zero(&self) -> Ff {
        Ff { field: self.0, v: 0 }
    }
    fn one(&self) -> Ff {
        Ff { field: self.0, v: 1 }
    }
    fn from_int(&self, n: i64) -> Ff {
        Ff::from_int(self.0, n)
    }
    fn add(&self, a: &Ff, b: &Ff) -> Ff {
        a.add(*b)
    }
    fn neg(&self, a: &Ff) -> Ff {
        a.neg()
    }
    fn mul(&self, a: &Ff, b: &Ff) -> Ff {
        a.mul(*b)
    }
    fn inv(&self, a: &Ff) -> Option<Ff> {
        a.inv()
    }
    fn parse(&self, s: &str) -> Result<Ff, ScalarError> {
        Ff::parse(self.0, s)
    }
    fn name(&self) -> String {
        self.0.name().to_string()
    }
    fn enumerate(&self) -> Option<Vec<Ff>> {
        Some(self.0.elements())
    }
}

/// Parse `p`, `-p` or `p/q` into a reduced rational.
pub fn parse_rational(s: &str) -> Result<Rational, ScalarError> {
    let t = s.trim();
    let r: Rational = t.parse().map_err(|_| ScalarError::Parse(s.to_string()))?;
    Ok(r)
}

/// True when the rational is a nonnegative integer (used by validators).
pub fn is_nonneg_integer(r: &Rational) -> bool {
    r.is_integer() && !r.is_negative()
}
