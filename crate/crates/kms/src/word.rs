//! Words in the root-group generators of a unipotent Kac–Moody–Steinberg
//! group over Q: parsing, flattening, local rewriting inside rank-2
//! subsystems, functorial restriction, and embedding into truncated
//! envelopes.
//!
//! * [`GroupWord`] — a sequence of letters x_γ(a), where γ is a positive real
//!   root lying in the rank-2 subsystem of some node pair and a ∈ Q. Text
//!   input only spells simple-root letters (`x1(2) [x2(1),x3(-1/2)]
//!   inv(x1(3))`); commutators and inverses flatten at parse time, while
//!   rewriting may introduce non-simple letters.
//! * [`GroupWord::local_rewrite`] — collapses maximal runs of letters lying
//!   in a common node pair through exact rank-2 collection, re-emitting them
//!   in the fixed root order; repeated to a fixed point.
//! * [`GroupWord::functoriality_map`] — the natural map to the group of a
//!   dominated Cartan submatrix: letters at roots of the smaller system are
//!   kept, all others are erased.
//! * [`GroupWord::embed`] — the image Π exp(a·e_γ) in a truncated envelope,
//!   via calibrated root vectors.
//! * [`residual_nilpotence_verdict`] — decidable test for the ambient
//!   group: 3-sphericity of the (2-spherical) Cartan matrix.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::env::{EnvElement, EnvError, UEnv};
use crate::gcm::{Gcm, GcmError, MultiDegree};
use crate::lie::LieElement;
use crate::scalar::{parse_rational, Rational, Rationals};

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum WordError {
    #[error("parse error at byte {0}: {1}")]
    Parse(usize, String),
    #[error("generator index {0} out of range 1..={1}")]
    GeneratorRange(usize, usize),
    #[error("{0} is not a positive real root of any node pair")]
    LetterRoot(String),
    #[error("nodes {0},{1} span a non-spherical pair")]
    NonSphericalPair(usize, usize),
    #[error("target matrix is not entrywise dominated on the chosen nodes")]
    NotDominated,
    #[error("node list for restriction is invalid: {0}")]
    NodeList(String),
    #[error("matrix error: {0}")]
    Gcm(#[from] GcmError),
    #[error("envelope error: {0}")]
    Env(#[from] EnvError),
}

/// A word Π x_{γ_k}(a_k) with positive real roots γ_k and rational scalars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupWord {
    rank: usize,
    letters: Vec<(MultiDegree, Rational)>,
}

/// Validate γ as a positive real root of some (spherical) node pair, and
/// return its index in that pair's root order (0 for a simple root).
fn classify_root(gcm: &Gcm, gamma: &MultiDegree) -> Result<usize, WordError> {
    if !gamma.is_positive() {
        return Err(WordError::LetterRoot(gamma.label()));
    }
    let support: Vec<usize> =
        (0..gamma.rank()).filter(|&k| gamma.0[k] != 0).collect();
    match support.len() {
        1 => {
            let i = support[0];
            if gamma.0[i] != 1 {
                return Err(WordError::LetterRoot(gamma.label()));
            }
            Ok(0)
        }
        2 => {
            let (i, j) = (support[0], support[1]);
            let pair = gcm
                .rank2_kind(i, j)
                .map_err(|_| WordError::NonSphericalPair(i + 1, j + 1))?;
            let (r, s) = (gamma.0[pair.alpha], gamma.0[pair.beta]);
            pair.kind
                .roots()
                .iter()
                .position(|&(p, q)| (p as i64, q as i64) == (r, s))
                .ok_or_else(|| WordError::LetterRoot(gamma.label()))
        }
        _ => Err(WordError::LetterRoot(gamma.label())),
    }
}

impl GroupWord {
    /// Validate each letter against the matrix: γ must be a positive real
    /// root of a (spherical) node pair. Zero-scalar letters are dropped.
    pub fn from_letters(
        gcm: &Gcm,
        letters: Vec<(MultiDegree, Rational)>,
    ) -> Result<GroupWord, WordError> {
        for (gamma, _) in &letters {
            classify_root(gcm, gamma)?;
        }
        Ok(GroupWord {
            rank: gcm.rank(),
            letters: letters.into_iter().filter(|(_, a)| !a.is_zero()).collect(),
        })
    }

    /// Parse `x<i>(<scalar>)`, juxtaposition, `[u,v]`, `inv(u)`.
    pub fn parse(gcm: &Gcm, text: &str) -> Result<GroupWord, WordError> {
        let bytes = text.as_bytes();
        let mut pos = 0usize;
        let letters = parse_word(gcm, bytes, &mut pos, &[])?;
        skip_ws(bytes, &mut pos);
        if pos != bytes.len() {
            return Err(WordError::Parse(pos, "unexpected trailing input".into()));
        }
        Ok(GroupWord { rank: gcm.rank(), letters })
    }

    pub fn identity(gcm: &Gcm) -> GroupWord {
        GroupWord { rank: gcm.rank(), letters: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn letters(&self) -> &[(MultiDegree, Rational)] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Concatenation u·v.
    pub fn concat(&self, other: &GroupWord) -> GroupWord {
        assert_eq!(self.rank, other.rank);
        let mut letters = self.letters.clone();
        letters.extend(other.letters.iter().cloned());
        GroupWord { rank: self.rank, letters }
    }

    /// The group inverse: letters reversed with negated scalars.
    pub fn inverse(&self) -> GroupWord {
        GroupWord {
            rank: self.rank,
            letters: self.letters.iter().rev().map(|(g, a)| (g.clone(), -a)).collect(),
        }
    }

    /// [u, v] = u⁻¹ v⁻¹ u v.
    pub fn commutator(u: &GroupWord, v: &GroupWord) -> GroupWord {
        u.inverse().concat(&v.inverse()).concat(u).concat(v)
    }

    /// Apply π_λ: each letter scalar is multiplied by λ^{height of its root}.
    pub fn pi_lambda(&self, lambda: &Rational) -> GroupWord {
        let letters = self
            .letters
            .iter()
            .map(|(g, a)| {
                let mut f = a.clone();
                for _ in 0..g.height() {
                    f = f * lambda;
                }
                (g.clone(), f)
            })
            .filter(|(_, a)| !a.is_zero())
            .collect();
        GroupWord { rank: self.rank, letters }
    }

    /// Collapse maximal runs of letters lying in one node pair via exact
    /// rank-2 collection, re-emitting each run in the fixed root order;
    /// repeats passes until the letter list stabilizes. Preserves the
    /// envelope image of the word at every truncation.
    pub fn local_rewrite(&self, gcm: &Gcm) -> Result<GroupWord, WordError> {
        let mut current = self.letters.clone();
        loop {
            let next = rewrite_pass(gcm, &current)?;
            if next == current {
                return Ok(GroupWord { rank: self.rank, letters: next });
            }
            current = next;
        }
    }

    /// The natural map onto the group of the Cartan matrix `sub` sitting on
    /// `nodes` (a strictly increasing list of node indices of `gcm`), which
    /// must be entrywise dominated: |sub_kl| ≤ |gcm_{n_k n_l}|. Letters whose
    /// root survives in the smaller system are kept (re-indexed); all other
    /// letters map to the identity and are erased.
    pub fn functoriality_map(
        &self,
        gcm: &Gcm,
        sub: &Gcm,
        nodes: &[usize],
    ) -> Result<GroupWord, WordError> {
        if nodes.len() != sub.rank()
            || nodes.windows(2).any(|w| w[0] >= w[1])
            || nodes.iter().any(|&n| n >= gcm.rank())
        {
            return Err(WordError::NodeList(format!("{nodes:?}")));
        }
        for k in 0..sub.rank() {
            for l in 0..sub.rank() {
                if sub.entry(k, l).abs() > gcm.entry(nodes[k], nodes[l]).abs() {
                    return Err(WordError::NotDominated);
                }
            }
        }
        let mut letters = Vec::new();
        'letter: for (gamma, a) in &self.letters {
            let mut small = vec![0i64; sub.rank()];
            for (idx, &c) in gamma.0.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                match nodes.iter().position(|&n| n == idx) {
                    Some(k) => small[k] = c,
                    // Root uses a node outside the sub-datum: erased.
                    None => continue 'letter,
                }
            }
            let small = MultiDegree(small);
            if classify_root(sub, &small).is_ok() {
                letters.push((small, a.clone()));
            }
            // Roots of the big pair that are not roots of the smaller pair
            // map to the identity.
        }
        GroupWord::from_letters(sub, letters)
    }

    /// Π exp(a_k · e_{γ_k}) in the truncated envelope, with calibrated root
    /// vectors.
    pub fn embed(
        &self,
        env: &UEnv,
        roots: &BTreeMap<MultiDegree, LieElement>,
    ) -> Result<EnvElement, WordError> {
        let mut acc = env.one();
        for (gamma, a) in &self.letters {
            acc = env.mul_exp_root(&acc, roots, gamma, a)?;
        }
        Ok(acc)
    }

    /// Render as a product of `x<i>(a)` and `x[(…)](a)` factors.
    pub fn display(&self) -> String {
        if self.letters.is_empty() {
            return "1".to_string();
        }
        let parts: Vec<String> = self
            .letters
            .iter()
            .map(|(g, a)| {
                let support: Vec<usize> = (0..g.rank()).filter(|&k| g.0[k] != 0).collect();
                if support.len() == 1 && g.0[support[0]] == 1 {
                    format!("x{}({})", support[0] + 1, a)
                } else {
                    format!("x[{}]({})", g.label(), a)
                }
            })
            .collect();
        parts.join(" ")
    }
}

fn skip_ws(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
}

/// Parse a juxtaposition of terms until a closing delimiter or end of input.
fn parse_word(
    gcm: &Gcm,
    bytes: &[u8],
    pos: &mut usize,
    stop: &[u8],
) -> Result<Vec<(MultiDegree, Rational)>, WordError> {
    let mut letters = Vec::new();
    loop {
        skip_ws(bytes, pos);
        if *pos >= bytes.len() || stop.contains(&bytes[*pos]) {
            return Ok(letters);
        }
        letters.extend(parse_term(gcm, bytes, pos)?);
    }
}

fn parse_term(
    gcm: &Gcm,
    bytes: &[u8],
    pos: &mut usize,
) -> Result<Vec<(MultiDegree, Rational)>, WordError> {
    skip_ws(bytes, pos);
    if *pos >= bytes.len() {
        return Err(WordError::Parse(*pos, "expected a term".into()));
    }
    match bytes[*pos] {
        b'[' => {
            *pos += 1;
            let u = parse_word(gcm, bytes, pos, b",")?;
            expect(bytes, pos, b',')?;
            let v = parse_word(gcm, bytes, pos, b"]")?;
            expect(bytes, pos, b']')?;
            let mut out = invert(&u);
            out.extend(invert(&v));
            out.extend(u);
            out.extend(v);
            Ok(out)
        }
        b'i' => {
            let tag = b"inv(";
            if bytes.len() - *pos < tag.len() || &bytes[*pos..*pos + tag.len()] != tag {
                return Err(WordError::Parse(*pos, "expected inv(".into()));
            }
            *pos += tag.len();
            let u = parse_word(gcm, bytes, pos, b")")?;
            expect(bytes, pos, b')')?;
            Ok(invert(&u))
        }
        b'x' => {
            *pos += 1;
            let start = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            if *pos == start {
                return Err(WordError::Parse(*pos, "expected generator index".into()));
            }
            let i: usize = std::str::from_utf8(&bytes[start..*pos])
                .unwrap()
                .parse()
                .map_err(|_| WordError::Parse(start, "bad generator index".into()))?;
            if i == 0 || i > gcm.rank() {
                return Err(WordError::GeneratorRange(i, gcm.rank()));
            }
            expect(bytes, pos, b'(')?;
            let sstart = *pos;
            while *pos < bytes.len() && bytes[*pos] != b')' {
                *pos += 1;
            }
            let text = std::str::from_utf8(&bytes[sstart..*pos]).unwrap().trim();
            let a = parse_rational(text)
                .map_err(|e| WordError::Parse(sstart, format!("bad scalar: {e}")))?;
            expect(bytes, pos, b')')?;
            let gamma = MultiDegree::simple(gcm.rank(), i - 1);
            if a.is_zero() {
                Ok(Vec::new())
            } else {
                Ok(vec![(gamma, a)])
            }
        }
        other => Err(WordError::Parse(
            *pos,
            format!("unexpected character '{}'", other as char),
        )),
    }
}

fn expect(bytes: &[u8], pos: &mut usize, want: u8) -> Result<(), WordError> {
    skip_ws(bytes, pos);
    if *pos < bytes.len() && bytes[*pos] == want {
        *pos += 1;
        Ok(())
    } else {
        Err(WordError::Parse(*pos, format!("expected '{}'", want as char)))
    }
}

fn invert(letters: &[(MultiDegree, Rational)]) -> Vec<(MultiDegree, Rational)> {
    letters.iter().rev().map(|(g, a)| (g.clone(), -a.clone())).collect()
}

/// One left-to-right pass: collapse each maximal run supported in a common
/// node pair.
fn rewrite_pass(
    gcm: &Gcm,
    letters: &[(MultiDegree, Rational)],
) -> Result<Vec<(MultiDegree, Rational)>, WordError> {
    let mut out: Vec<(MultiDegree, Rational)> = Vec::new();
    let mut k = 0usize;
    while k < letters.len() {
        // Grow the run [k, end) while all letters fit in ≤ 2 common nodes
        // spanning a spherical pair.
        let mut nodes: Vec<usize> = support_of(&letters[k].0);
        let mut end = k + 1;
        while end < letters.len() {
            let mut union = nodes.clone();
            for n in support_of(&letters[end].0) {
                if !union.contains(&n) {
                    union.push(n);
                }
            }
            union.sort_unstable();
            if union.len() > 2 {
                break;
            }
            if union.len() == 2 && gcm.rank2_kind(union[0], union[1]).is_err() {
                break;
            }
            nodes = union;
            end += 1;
        }
        out.extend(collapse_run(gcm, &letters[k..end], &nodes)?);
        k = end;
    }
    Ok(out)
}

fn support_of(gamma: &MultiDegree) -> Vec<usize> {
    (0..gamma.rank()).filter(|&k| gamma.0[k] != 0).collect()
}

fn collapse_run(
    gcm: &Gcm,
    run: &[(MultiDegree, Rational)],
    nodes: &[usize],
) -> Result<Vec<(MultiDegree, Rational)>, WordError> {
    let rank = gcm.rank();
    match nodes.len() {
        1 => {
            // A run of x_i letters: scalars add.
            let total = run.iter().fold(Rational::zero(), |acc, (_, a)| acc + a);
            if total.is_zero() {
                Ok(Vec::new())
            } else {
                Ok(vec![(MultiDegree::simple(rank, nodes[0]), total)])
            }
        }
        2 => {
            let pair = gcm
                .rank2_kind(nodes[0], nodes[1])
                .map_err(|_| WordError::NonSphericalPair(nodes[0] + 1, nodes[1] + 1))?;
            let word: Vec<(usize, Rational)> = run
                .iter()
                .map(|(gamma, a)| {
                    let pair_index = classify_root(gcm, gamma)?;
                    let idx = if support_of(gamma).len() == 1 {
                        let node = support_of(gamma)[0];
                        if node == pair.alpha {
                            0
                        } else {
                            1
                        }
                    } else {
                        pair_index
                    };
                    Ok((idx, a.clone()))
                })
                .collect::<Result<_, WordError>>()?;
            let collected = pair.kind.collect(&Rationals, &word);
            let mut out = Vec::new();
            for (r, &(p, q)) in pair.kind.roots().iter().enumerate() {
                let c = collected.coord(r);
                if c.is_zero() {
                    continue;
                }
                let gamma = MultiDegree::simple(rank, pair.alpha)
                    .scale(p as i64)
                    .add(&MultiDegree::simple(rank, pair.beta).scale(q as i64));
                out.push((gamma, c.clone()));
            }
            Ok(out)
        }
        _ => unreachable!("runs span at most two nodes"),
    }
}

/// Decides residual nilpotence for the ambient unipotent group of a
/// 2-spherical matrix over Q: the verdict is 3-sphericity. Matrices that are
/// not 2-spherical are outside the decidable range and yield an error.
pub fn residual_nilpotence_verdict(gcm: &Gcm) -> Result<bool, WordError> {
    if !gcm.is_r_spherical(2) {
        return Err(WordError::NonSphericalPair(0, 0));
    }
    Ok(gcm.is_r_spherical(3))
}

/// The standard nontrivial kernel witness for the affine rank-3 matrix:
/// w = [a, [a, b]] with a = [x_1(1), x_2(1)], b = [x_2(1), x_3(1)].
pub fn build_affine_witness(gcm: &Gcm) -> GroupWord {
    assert_eq!(gcm.rank(), 3);
    let x = |i: usize| GroupWord {
        rank: 3,
        letters: vec![(MultiDegree::simple(3, i), Rational::one())],
    };
    let a = GroupWord::commutator(&x(0), &x(1));
    let b = GroupWord::commutator(&x(1), &x(2));
    GroupWord::commutator(&a, &GroupWord::commutator(&a, &b))
}
