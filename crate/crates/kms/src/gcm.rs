//! Generalized Cartan matrices and their root combinatorics.
//!
//! * [`Gcm`] — validated integer matrix (2 on the diagonal, ≤ 0 off it,
//!   symmetric zero pattern), with JSON loading.
//! * [`MultiDegree`] — an element of the root lattice in simple-root
//!   coordinates, ordered so it can key sorted maps.
//! * Sphericity tests via exact principal-minor determinants, the edge labels
//!   m_ij ∈ {2, 3, 4, 6, ∞}, simple reflections, real-root enumeration and
//!   rank-2 subpair classification.
//! * [`Gcm::symmetrizer`] — positive rational weights ε with ε_i a_ij = ε_j a_ji,
//!   when they exist.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Deserialize;
use thiserror::Error;

use crate::rank2::Rank2Kind;
use crate::scalar::{rat, Rational};

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum GcmError {
    #[error("matrix must be square and nonempty, got {rows} rows")]
    NotSquare { rows: usize },
    #[error("row {row} has length {len}, expected {expect}")]
    RowLength { row: usize, len: usize, expect: usize },
    #[error("diagonal entry a[{i}][{i}] = {value}, must be 2")]
    Diagonal { i: usize, value: i64 },
    #[error("off-diagonal entry a[{i}][{j}] = {value}, must be <= 0")]
    OffDiagonalSign { i: usize, j: usize, value: i64 },
    #[error("zero pattern not symmetric: a[{i}][{j}] = 0 but a[{j}][{i}] = {value}")]
    ZeroPattern { i: usize, j: usize, value: i64 },
    #[error("index {0} out of range for rank {1}")]
    IndexRange(usize, usize),
    #[error("indices {0} and {1} must be distinct")]
    EqualIndices(usize, usize),
    #[error("pair ({i}, {j}) is non-spherical: a_ij * a_ji = {product} >= 4")]
    NonSphericalPair { i: usize, j: usize, product: i64 },
    #[error("matrix is not symmetrizable")]
    NotSymmetrizable,
    #[error("invalid JSON for a Cartan matrix: {0}")]
    Json(String),
}

/// A root-lattice element in simple-root coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiDegree(pub Vec<i64>);

impl MultiDegree {
    pub fn zero(rank: usize) -> Self {
        MultiDegree(vec![0; rank])
    }

    pub fn simple(rank: usize, i: usize) -> Self {
        let mut v = vec![0; rank];
        v[i] = 1;
        MultiDegree(v)
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn height(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &MultiDegree) -> MultiDegree {
        MultiDegree(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &MultiDegree) -> MultiDegree {
        MultiDegree(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: i64) -> MultiDegree {
        MultiDegree(self.0.iter().map(|a| a * k).collect())
    }

    /// All coordinates ≥ 0 and at least one > 0.
    pub fn is_positive(&self) -> bool {
        self.0.iter().all(|&a| a >= 0) && self.0.iter().any(|&a| a > 0)
    }

    /// True when `other` divides `self` entrywise with quotient `k`.
    pub fn is_multiple_of(&self, other: &MultiDegree, k: i64) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| *a == b * k)
    }

    pub fn label(&self) -> String {
        let inner: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        format!("({})", inner.join(","))
    }
}

/// Edge label of a rank-2 subpair: the dihedral order m_ij.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mij {
    M(u8),
    Infinite,
}

impl Mij {
    pub fn finite(self) -> Option<u8> {
        match self {
            Mij::M(m) => Some(m),
            Mij::Infinite => None,
        }
    }
}

/// Classification of the rank-2 subsystem spanned by two simple roots, with
/// the short root identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rank2Pair {
    pub kind: Rank2Kind,
    /// Index playing the role of α (short for B2/G2).
    pub alpha: usize,
    /// Index playing the role of β.
    pub beta: usize,
}

#[derive(Deserialize)]
struct GcmJson {
    matrix: Vec<Vec<i64>>,
}

/// A validated generalized Cartan matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gcm {
    a: Vec<Vec<i64>>,
}

impl Gcm {
    pub fn new(a: Vec<Vec<i64>>) -> Result<Gcm, GcmError> {
        let n = a.len();
        if n == 0 {
            return Err(GcmError::NotSquare { rows: 0 });
        }
        for (i, row) in a.iter().enumerate() {
            if row.len() != n {
                return Err(GcmError::RowLength { row: i, len: row.len(), expect: n });
            }
        }
        for i in 0..n {
            if a[i][i] != 2 {
                return Err(GcmError::Diagonal { i, value: a[i][i] });
            }
            for j in 0..n {
                if i != j {
                    if a[i][j] > 0 {
                        return Err(GcmError::OffDiagonalSign { i, j, value: a[i][j] });
                    }
                    if a[i][j] == 0 && a[j][i] != 0 {
                        return Err(GcmError::ZeroPattern { i, j, value: a[j][i] });
                    }
                }
            }
        }
        Ok(Gcm { a })
    }

    /// Parse `{"matrix": [[...], ...]}`.
    pub fn from_json(s: &str) -> Result<Gcm, GcmError> {
        let parsed: GcmJson = serde_json::from_str(s).map_err(|e| GcmError::Json(e.to_string()))?;
        Gcm::new(parsed.matrix)
    }

    pub fn rank(&self) -> usize {
        self.a.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.a[i][j]
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.a
    }

    /// Exact determinant of the principal submatrix on `idx`.
    fn principal_minor(&self, idx: &[usize]) -> BigInt {
        let k = idx.len();
        let mut m: Vec<Vec<BigInt>> = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| BigInt::from(self.a[i][j])).collect())
            .collect();
        // Fraction-free Gaussian elimination (Bareiss).
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for p in 0..k {
            if m[p][p].is_zero() {
                let Some(swap) = (p + 1..k).find(|&r| !m[r][p].is_zero()) else {
                    return BigInt::zero();
                };
                m.swap(p, swap);
                sign = -sign;
            }
            for r in p + 1..k {
                for c in p + 1..k {
                    let num = &m[r][c] * &m[p][p] - &m[r][p] * &m[p][c];
                    m[r][c] = num / &prev;
                }
                m[r][p] = BigInt::zero();
            }
            prev = m[p][p].clone();
        }
        sign * m[k - 1][k - 1].clone()
    }

    /// All principal minors positive (finite/spherical type).
    pub fn is_spherical(&self) -> bool {
        let n = self.rank();
        assert!(n <= 24, "sphericity test enumerates all 2^rank principal submatrices");
        // Leading sequential minors are not enough for the non-symmetric case,
        // so check the minor on every index subset.
        for mask in 1u64..(1u64 << n) {
            let idx: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            if self.principal_minor(&idx) <= BigInt::zero() {
                return false;
            }
        }
        true
    }

    /// Every principal submatrix of order ≤ r is spherical.
    pub fn is_r_spherical(&self, r: usize) -> bool {
        let n = self.rank();
        assert!(n <= 24, "sphericity test enumerates all 2^rank principal submatrices");
        for mask in 1u64..(1u64 << n) {
            let idx: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            if idx.len() <= r && self.principal_minor(&idx) <= BigInt::zero() {
                return false;
            }
        }
        true
    }

    /// Edge label m_ij from the product a_ij a_ji.
    pub fn m(&self, i: usize, j: usize) -> Result<Mij, GcmError> {
        self.check_pair(i, j)?;
        let p = self.a[i][j] * self.a[j][i];
        Ok(match p {
            0 => Mij::M(2),
            1 => Mij::M(3),
            2 => Mij::M(4),
            3 => Mij::M(6),
            _ => Mij::Infinite,
        })
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<(), GcmError> {
        let n = self.rank();
        if i >= n {
            return Err(GcmError::IndexRange(i, n));
        }
        if j >= n {
            return Err(GcmError::IndexRange(j, n));
        }
        if i == j {
            return Err(GcmError::EqualIndices(i, j));
        }
        Ok(())
    }

    /// Classify the subpair {i, j}; for B2/G2 `alpha` is the short root, i.e.
    /// the index s with |a_st| ≥ 2 against the other index t.
    pub fn rank2_kind(&self, i: usize, j: usize) -> Result<Rank2Pair, GcmError> {
        self.check_pair(i, j)?;
        let p = self.a[i][j] * self.a[j][i];
        let kind = match p {
            0 => Rank2Kind::A1xA1,
            1 => Rank2Kind::A2,
            2 => Rank2Kind::B2,
            3 => Rank2Kind::G2,
            _ => return Err(GcmError::NonSphericalPair { i, j, product: p }),
        };
        let (alpha, beta) = match kind {
            Rank2Kind::A1xA1 | Rank2Kind::A2 => (i.min(j), i.max(j)),
            _ => {
                // a_ij = <α_j, α_i^∨>; the short root s has |a_st| ≥ 2 where
                // t is long: row s picks up the long coefficient.
                if self.a[i][j] <= -2 {
                    (i, j)
                } else {
                    (j, i)
                }
            }
        };
        Ok(Rank2Pair { kind, alpha, beta })
    }

    /// Simple reflection s_i acting on the root lattice:
    /// s_i(d) = d − (Σ_j a_ij d_j) α_i.
    pub fn simple_reflection(&self, i: usize, d: &MultiDegree) -> MultiDegree {
        let coef: i64 = (0..self.rank()).map(|j| self.a[i][j] * d.0[j]).sum();
        let mut v = d.0.clone();
        v[i] -= coef;
        MultiDegree(v)
    }

    /// All positive real roots of height ≤ `max_height`, sorted by
    /// (height, coordinates).
    ///
    /// Closure of the simple roots under simple reflections; every positive
    /// real root is reachable while staying positive and of weakly decreasing
    /// height along a suitable chain, so pruning negatives and overweight
    /// vectors loses nothing.
    pub fn real_roots_up_to_height(&self, max_height: i64) -> Vec<MultiDegree> {
        use std::collections::BTreeSet;
        let n = self.rank();
        let mut seen: BTreeSet<MultiDegree> = BTreeSet::new();
        let mut frontier: Vec<MultiDegree> = Vec::new();
        for i in 0..n {
            let s = MultiDegree::simple(n, i);
            if s.height() <= max_height {
                seen.insert(s.clone());
                frontier.push(s);
            }
        }
        while let Some(d) = frontier.pop() {
            for i in 0..n {
                let r = self.simple_reflection(i, &d);
                if r.is_positive() && r.height() <= max_height && !seen.contains(&r) {
                    seen.insert(r.clone());
                    frontier.push(r);
                }
            }
        }
        let mut out: Vec<MultiDegree> = seen.into_iter().collect();
        out.sort_by_key(|d| (d.height(), d.0.clone()));
        out
    }

    /// Positive rational weights ε with ε_i a_ij = ε_j a_ji for all i, j,
    /// normalized so the minimum is 1. Exists iff the matrix is symmetrizable.
    pub fn symmetrizer(&self) -> Result<Vec<Rational>, GcmError> {
        let n = self.rank();
        let mut eps: Vec<Option<Rational>> = vec![None; n];
        for start in 0..n {
            if eps[start].is_some() {
                continue;
            }
            eps[start] = Some(rat(1));
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                let ei = eps[i].clone().unwrap();
                for j in 0..n {
                    if i == j || self.a[i][j] == 0 {
                        continue;
                    }
                    // ε_i a_ij = ε_j a_ji  ⇒  ε_j = ε_i a_ij / a_ji
                    let want = &ei * rat(self.a[i][j]) / rat(self.a[j][i]);
                    match &eps[j] {
                        None => {
                            eps[j] = Some(want);
                            stack.push(j);
                        }
                        Some(have) => {
                            if *have != want {
                                return Err(GcmError::NotSymmetrizable);
                            }
                        }
                    }
                }
            }
        }
        let mut vals: Vec<Rational> = eps.into_iter().map(|e| e.unwrap()).collect();
        if vals.iter().any(|v| !v.is_positive()) {
            return Err(GcmError::NotSymmetrizable);
        }
        let min = vals.iter().cloned().min().unwrap();
        for v in &mut vals {
            *v = &*v / &min;
        }
        Ok(vals)
    }
}

/// Catalog of named matrices used throughout the test and command surfaces.
pub fn named_gcm(name: &str) -> Option<Gcm> {
    let rows: Vec<Vec<i64>> = match name.trim().to_ascii_uppercase().as_str() {
        "A1XA1" | "A1A1" => vec![vec![2, 0], vec![0, 2]],
        "A2" => vec![vec![2, -1], vec![-1, 2]],
        "B2" | "C2" => vec![vec![2, -2], vec![-1, 2]],
        "G2" => vec![vec![2, -3], vec![-1, 2]],
        "A3" => vec![vec![2, -1, 0], vec![-1, 2, -1], vec![0, -1, 2]],
        "A2TILDE" | "A2~" | "AFFINE_A2" => {
            vec![vec![2, -1, -1], vec![-1, 2, -1], vec![-1, -1, 2]]
        }
        "A3TILDE" | "A3~" | "AFFINE_A3" => vec![
            vec![2, -1, 0, -1],
            vec![-1, 2, -1, 0],
            vec![0, -1, 2, -1],
            vec![-1, 0, -1, 2],
        ],
        _ => return None,
    };
    Some(Gcm::new(rows).expect("catalog matrices are valid"))
}
