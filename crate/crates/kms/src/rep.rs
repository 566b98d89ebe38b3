//! The polynomial matrix representation φ of the rank-3 affine-cycle group:
//! exact 3×3 arithmetic over Q[t].
//!
//! * [`phi_generator`] — the generator images x_1(a) ↦ 1 + a·E₁₂,
//!   x_2(a) ↦ 1 + a·E₂₃, x_3(a) ↦ 1 + at·E₃₁.
//! * [`phi_word`] — extends multiplicatively to words; non-simple letters
//!   are first expanded through their defining commutator of simple letters.
//! * [`check_image_invariants`] — det = 1 and "upper triangular modulo t"
//!   (entries below the diagonal divisible by t), which hold on the whole
//!   image.

use num_traits::Zero;
use thiserror::Error;

use crate::poly::Poly;
use crate::scalar::Rational;
use crate::word::GroupWord;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum RepError {
    #[error("generator index {0} outside 1..=3")]
    GeneratorIndex(usize),
    #[error("word has rank {0}; the representation is defined for rank 3")]
    Rank(usize),
    #[error("letter at multidegree {0} is neither simple nor an adjacent-pair root")]
    LetterShape(String),
}

/// A 3×3 matrix with polynomial entries over Q.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyMatrix3 {
    rows: [[Poly; 3]; 3],
}

impl PolyMatrix3 {
    pub fn identity() -> PolyMatrix3 {
        let mut m = PolyMatrix3 {
            rows: std::array::from_fn(|_| std::array::from_fn(|_| Poly::zero())),
        };
        for d in 0..3 {
            m.rows[d][d] = Poly::one();
        }
        m
    }

    /// Identity plus `p` in row `r`, column `c` (0-based).
    pub fn elementary(r: usize, c: usize, p: Poly) -> PolyMatrix3 {
        let mut m = PolyMatrix3::identity();
        m.rows[r][c] = m.rows[r][c].add(&p);
        m
    }

    pub fn entry(&self, r: usize, c: usize) -> &Poly {
        &self.rows[r][c]
    }

    pub fn mul(&self, o: &PolyMatrix3) -> PolyMatrix3 {
        let mut m = PolyMatrix3 {
            rows: std::array::from_fn(|_| std::array::from_fn(|_| Poly::zero())),
        };
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = Poly::zero();
                for k in 0..3 {
                    acc = acc.add(&self.rows[r][k].mul(&o.rows[k][c]));
                }
                m.rows[r][c] = acc;
            }
        }
        m
    }

    pub fn det(&self) -> Poly {
        let m = &self.rows;
        let mut acc = Poly::zero();
        for (c, sign) in [(0usize, 1i64), (1, -1), (2, 1)] {
            let (c1, c2) = match c {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = m[1][c1].mul(&m[2][c2]).sub(&m[1][c2].mul(&m[2][c1]));
            let term = m[0][c].mul(&minor);
            acc = if sign > 0 { acc.add(&term) } else { acc.sub(&term) };
        }
        acc
    }

    pub fn is_identity(&self) -> bool {
        *self == PolyMatrix3::identity()
    }

    pub fn max_degree(&self) -> usize {
        self.rows
            .iter()
            .flatten()
            .filter_map(|p| p.degree())
            .max()
            .unwrap_or(0)
    }
}

impl std::fmt::Display for PolyMatrix3 {
    /// Row-major, rows separated by `;`, entries as polynomial strings.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (r, row) in self.rows.iter().enumerate() {
            if r > 0 {
                write!(f, "; ")?;
            }
            for (c, p) in row.iter().enumerate() {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{p}")?;
            }
        }
        Ok(())
    }
}

/// Image of the i-th simple generator, i ∈ {1, 2, 3} (1-based).
pub fn phi_generator(i: usize, a: &Rational) -> Result<PolyMatrix3, RepError> {
    match i {
        1 => Ok(PolyMatrix3::elementary(0, 1, Poly::constant(a.clone()))),
        2 => Ok(PolyMatrix3::elementary(1, 2, Poly::constant(a.clone()))),
        3 => Ok(PolyMatrix3::elementary(2, 0, Poly::monomial(a.clone(), 1))),
        _ => Err(RepError::GeneratorIndex(i)),
    }
}

/// Image of a rank-3 word. A pair-root letter x_{α_i+α_j}(c) with i < j is
/// expanded as the commutator [x_j(c), x_i(1)] = x_j(−c)x_i(−1)x_j(c)x_i(1),
/// which equals it by the defining rank-2 relations.
pub fn phi_word(w: &GroupWord) -> Result<PolyMatrix3, RepError> {
    if w.rank() != 3 {
        return Err(RepError::Rank(w.rank()));
    }
    let mut acc = PolyMatrix3::identity();
    for (md, c) in w.letters() {
        let support: Vec<usize> = (0..3).filter(|&k| md.0[k] != 0).collect();
        let next = match support.as_slice() {
            [i] if md.0[*i] == 1 => phi_generator(i + 1, c)?,
            [i, j] if md.0[*i] == 1 && md.0[*j] == 1 => {
                let (i, j) = (*i + 1, *j + 1);
                let neg = -c.clone();
                phi_generator(j, &neg)?
                    .mul(&phi_generator(i, &crate::scalar::rat(-1))?)
                    .mul(&phi_generator(j, c)?)
                    .mul(&phi_generator(i, &crate::scalar::rat(1))?)
            }
            _ => return Err(RepError::LetterShape(md.label())),
        };
        acc = acc.mul(&next);
    }
    Ok(acc)
}

/// det = 1 and every entry below the diagonal divisible by t.
pub fn check_image_invariants(m: &PolyMatrix3) -> bool {
    if !m.det().sub(&Poly::one()).is_zero() {
        return false;
    }
    for r in 0..3 {
        for c in 0..r {
            if !m.entry(r, c).coeff(0).is_zero() {
                return false;
            }
        }
    }
    true
}
