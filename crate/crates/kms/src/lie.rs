//! Graded Q-Lie algebras truncated at a height bound: free Lie algebras with
//! Lyndon bases, quotients by Serre relators or by arbitrary left-normed
//! bracket relators, structure constants, and multiplicity oracles.
//!
//! * [`GradedLieAlgebra`] — immutable algebra with a per-multidegree basis;
//!   every basis element carries the bracket word defining it. Constructors:
//!   [`GradedLieAlgebra::free_lie`] (Lyndon-word basis),
//!   [`GradedLieAlgebra::serre_quotient`],
//!   [`GradedLieAlgebra::quotient_by_relators`] (greedy left-normed bases).
//! * [`LieElement`] — sparse coefficient vector over the basis with a sticky
//!   flag recording that components above the height bound were dropped.
//! * [`witt_dimension`] / [`lyndon_words`] — necklace-count dimension oracle
//!   and Lyndon-word enumeration per content vector.
//! * [`peterson_multiplicity`] — independent root-multiplicity oracle via the
//!   Peterson recursion for symmetrizable matrices.
//!
//! Quotients are computed degree by degree: the graded ideal generated by the
//! relators satisfies I_α = R_α + Σ_i [e_i, I_{α−α_i}], so each multidegree
//! needs one exact fraction-free elimination in the coordinates of the
//! associative words of that content (a Lie element is identified with its
//! image in the free associative algebra, where linear independence is
//! preserved). All arithmetic is exact; eliminations run over `i128` and fall
//! back to `BigInt` when an overflow is detected.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::gcm::{Gcm, MultiDegree};
use crate::linalg::{Echelon, EchelonEntry, LinalgError, QEchelon};
use crate::scalar::{rat, Rational};

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum LieError {
    #[error("matrix is not symmetrizable, Peterson recursion unavailable")]
    NotSymmetrizable,
    #[error("Peterson recursion denominator vanishes at {0}")]
    ZeroDenominator(String),
    #[error("multidegree {0} exceeds the height bound {1}")]
    HeightBound(String, usize),
    #[error("basis is not left-normed; operation requires left-normed bracket words")]
    NotLeftNormed,
    #[error("generator index {0} out of range for rank {1}")]
    GeneratorRange(usize, usize),
    #[error("empty relator word")]
    EmptyRelator,
}

/// A bracket word as a binary tree with generator leaves.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BracketTree {
    Leaf(u8),
    Node(Box<BracketTree>, Box<BracketTree>),
}

impl BracketTree {
    /// The right-nested tree [e_{w0}, [e_{w1}, [… , e_{wk}]]].
    pub fn left_normed(word: &[u8]) -> BracketTree {
        assert!(!word.is_empty());
        let mut t = BracketTree::Leaf(word[word.len() - 1]);
        for &i in word[..word.len() - 1].iter().rev() {
            t = BracketTree::Node(Box::new(BracketTree::Leaf(i)), Box::new(t));
        }
        t
    }

    /// Leaves in order.
    pub fn letters(&self) -> Vec<u8> {
        match self {
            BracketTree::Leaf(i) => vec![*i],
            BracketTree::Node(l, r) => {
                let mut v = l.letters();
                v.extend(r.letters());
                v
            }
        }
    }

    /// True when the tree is of the form [a, [b, [c, …]]] with single leaves
    /// hanging off to the left.
    pub fn is_left_normed(&self) -> bool {
        match self {
            BracketTree::Leaf(_) => true,
            BracketTree::Node(l, r) => matches!(**l, BracketTree::Leaf(_)) && r.is_left_normed(),
        }
    }

    /// Expansion in the free associative algebra: Leaf i ↦ word (i);
    /// [u, v] ↦ uv − vu.
    pub fn assoc_expansion(&self) -> BTreeMap<Vec<u8>, i64> {
        match self {
            BracketTree::Leaf(i) => {
                let mut m = BTreeMap::new();
                m.insert(vec![*i], 1);
                m
            }
            BracketTree::Node(l, r) => assoc_commutator(&l.assoc_expansion(), &r.assoc_expansion()),
        }
    }

    /// Render with 1-based generator names: `[x1,[x1,x2]]`.
    pub fn display(&self) -> String {
        match self {
            BracketTree::Leaf(i) => format!("x{}", i + 1),
            BracketTree::Node(l, r) => format!("[{},{}]", l.display(), r.display()),
        }
    }
}

impl fmt::Display for BracketTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display())
    }
}

fn assoc_commutator(
    a: &BTreeMap<Vec<u8>, i64>,
    b: &BTreeMap<Vec<u8>, i64>,
) -> BTreeMap<Vec<u8>, i64> {
    let mut out: BTreeMap<Vec<u8>, i64> = BTreeMap::new();
    for (wa, ca) in a {
        for (wb, cb) in b {
            let mut ab = wa.clone();
            ab.extend_from_slice(wb);
            *out.entry(ab).or_insert(0) += ca * cb;
            let mut ba = wb.clone();
            ba.extend_from_slice(wa);
            *out.entry(ba).or_insert(0) -= ca * cb;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

/// Number of Lyndon words with the given content vector (necklace count):
/// (1/h) Σ_{d | gcd} μ(d) (h/d)! / Π (c_i/d)!.
pub fn witt_dimension(content: &[u64]) -> i128 {
    let h: u64 = content.iter().sum();
    if h == 0 {
        return 0;
    }
    let g = content.iter().fold(0u64, |a, &b| a.gcd(&b));
    let mut total: i128 = 0;
    for d in 1..=g {
        if g % d != 0 {
            continue;
        }
        let mu = moebius(d);
        if mu == 0 {
            continue;
        }
        let mut term: i128 = factorial(h / d);
        for &c in content {
            term /= factorial(c / d);
        }
        total += mu as i128 * term;
    }
    assert!(total % h as i128 == 0, "necklace count must divide evenly");
    total / h as i128
}

fn factorial(n: u64) -> i128 {
    (1..=n as i128).product::<i128>().max(1)
}

fn moebius(n: u64) -> i64 {
    let mut n = n;
    let mut mu = 1i64;
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            mu = -mu;
        }
        p += 1;
    }
    if n > 1 {
        mu = -mu;
    }
    mu
}

/// All Lyndon words (strictly smaller than every proper rotation) with the
/// given content, sorted lexicographically.
pub fn lyndon_words(content: &[u64]) -> Vec<Vec<u8>> {
    let mut remaining: Vec<u64> = content.to_vec();
    let mut word = Vec::new();
    let mut out = Vec::new();
    gen_words(&mut remaining, &mut word, &mut out);
    out.retain(|w| is_lyndon(w));
    out.sort();
    out
}

fn gen_words(remaining: &mut [u64], word: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if remaining.iter().all(|&c| c == 0) {
        out.push(word.clone());
        return;
    }
    for i in 0..remaining.len() {
        if remaining[i] > 0 {
            remaining[i] -= 1;
            word.push(i as u8);
            gen_words(remaining, word, out);
            word.pop();
            remaining[i] += 1;
        }
    }
}

fn is_lyndon(w: &[u8]) -> bool {
    let n = w.len();
    if n == 0 {
        return false;
    }
    for k in 1..n {
        let rotation = w[k..].iter().chain(w[..k].iter());
        if rotation.cmp(w.iter()) != std::cmp::Ordering::Greater {
            return false;
        }
    }
    true
}

/// Standard factorization tree of a Lyndon word: split before the
/// lexicographically least proper suffix; both parts are Lyndon.
pub fn lyndon_tree(w: &[u8]) -> BracketTree {
    if w.len() == 1 {
        return BracketTree::Leaf(w[0]);
    }
    let mut best = 1;
    for k in 2..w.len() {
        if w[k..].cmp(&w[best..]) == std::cmp::Ordering::Less {
            best = k;
        }
    }
    BracketTree::Node(Box::new(lyndon_tree(&w[..best])), Box::new(lyndon_tree(&w[best..])))
}

/// One basis element of a [`GradedLieAlgebra`].
#[derive(Debug, Clone)]
pub struct BasisInfo {
    pub multidegree: MultiDegree,
    pub height: usize,
    pub tree: BracketTree,
    /// Leaf sequence of `tree` (for left-normed bases this is the defining
    /// generator word).
    pub word: Vec<u8>,
}

/// A sparse element Σ c_k·(basis k), tagged when truncation dropped data.
#[derive(Debug, Clone)]
pub struct LieElement {
    pub terms: BTreeMap<u32, Rational>,
    pub truncated: bool,
}

/// Equality compares the stored value only, not the truncation marker.
impl PartialEq for LieElement {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl Eq for LieElement {}

impl LieElement {
    pub fn zero() -> LieElement {
        LieElement { terms: BTreeMap::new(), truncated: false }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn single(idx: u32, c: Rational) -> LieElement {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(idx, c);
        }
        LieElement { terms, truncated: false }
    }

    pub fn add(&self, other: &LieElement) -> LieElement {
        let mut terms = self.terms.clone();
        for (k, c) in &other.terms {
            let e = terms.entry(*k).or_insert_with(Rational::zero);
            *e = &*e + c;
        }
        terms.retain(|_, c| !c.is_zero());
        LieElement { terms, truncated: self.truncated || other.truncated }
    }

    pub fn scale(&self, c: &Rational) -> LieElement {
        if c.is_zero() {
            return LieElement { terms: BTreeMap::new(), truncated: self.truncated };
        }
        LieElement {
            terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect(),
            truncated: self.truncated,
        }
    }

    pub fn neg(&self) -> LieElement {
        self.scale(&-Rational::one())
    }

    pub fn sub(&self, other: &LieElement) -> LieElement {
        self.add(&other.neg())
    }
}

enum BasisMode {
    /// Greedy selection among left-normed words in lexicographic order.
    Greedy,
    /// Lyndon-word basis with standard-factorization trees (free algebra).
    Lyndon,
}

/// A graded Lie algebra over Q, truncated above a height bound.
pub struct GradedLieAlgebra {
    rank: usize,
    height_bound: usize,
    basis: Vec<BasisInfo>,
    by_multidegree: BTreeMap<MultiDegree, Vec<u32>>,
    /// Structure constants for index pairs hi > lo: [hi, lo] = Σ c·basis.
    table: HashMap<(u32, u32), Vec<(u32, Rational)>>,
    left_normed: bool,
}

impl GradedLieAlgebra {
    /// Free Lie algebra on `rank` generators, Lyndon basis, heights ≤ `n`.
    pub fn free_lie(rank: usize, n: usize) -> GradedLieAlgebra {
        assert!(n >= 1 && rank >= 1);
        build_with_fallback(rank, &[], n, BasisMode::Lyndon)
    }

    /// Quotient of the free Lie algebra by the Serre relators
    /// (ad e_i)^{1−a_ij} e_j of a generalized Cartan matrix.
    pub fn serre_quotient(gcm: &Gcm, n: usize) -> GradedLieAlgebra {
        assert!(n >= 1);
        let relators = serre_relator_words(gcm);
        build_with_fallback(gcm.rank(), &relators, n, BasisMode::Greedy)
    }

    /// Quotient by arbitrary left-normed bracket relators, each given as its
    /// generator word (outermost letter first).
    pub fn quotient_by_relators(
        rank: usize,
        relators: &[Vec<u8>],
        n: usize,
    ) -> Result<GradedLieAlgebra, LieError> {
        assert!(n >= 1 && rank >= 1);
        for r in relators {
            if r.is_empty() {
                return Err(LieError::EmptyRelator);
            }
            if let Some(&bad) = r.iter().find(|&&i| i as usize >= rank) {
                return Err(LieError::GeneratorRange(bad as usize, rank));
            }
        }
        Ok(build_with_fallback(rank, relators, n, BasisMode::Greedy))
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn height_bound(&self) -> usize {
        self.height_bound
    }

    pub fn basis(&self) -> &[BasisInfo] {
        &self.basis
    }

    pub fn dim_total(&self) -> usize {
        self.basis.len()
    }

    pub fn basis_at(&self, md: &MultiDegree) -> &[u32] {
        self.by_multidegree.get(md).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn dim_at(&self, md: &MultiDegree) -> usize {
        self.basis_at(md).len()
    }

    pub fn root_multiplicity(&self, md: &MultiDegree) -> usize {
        self.dim_at(md)
    }

    pub fn dim_at_height(&self, h: usize) -> usize {
        self.basis.iter().filter(|b| b.height == h).count()
    }

    pub fn basis_at_height(&self, h: usize) -> Vec<u32> {
        (0..self.basis.len() as u32).filter(|&k| self.basis[k as usize].height == h).collect()
    }

    /// Largest height with a nonzero component (0 when the algebra is zero).
    pub fn nilpotency_class(&self) -> usize {
        self.basis.iter().map(|b| b.height).max().unwrap_or(0)
    }

    /// Sorted (multidegree, dimension) rows, including only nonzero entries.
    pub fn dims_table(&self) -> Vec<(MultiDegree, usize)> {
        self.by_multidegree.iter().map(|(md, v)| (md.clone(), v.len())).collect()
    }

    pub fn left_normed_basis(&self) -> bool {
        self.left_normed
    }

    pub fn generator(&self, i: usize) -> Result<LieElement, LieError> {
        if i >= self.rank {
            return Err(LieError::GeneratorRange(i, self.rank));
        }
        let md = MultiDegree::simple(self.rank, i);
        let idx = self.basis_at(&md);
        // Generators may die in the quotient (e.g. a relator of length 1).
        Ok(match idx.first() {
            Some(&k) => LieElement::single(k, Rational::one()),
            None => LieElement::zero(),
        })
    }

    pub fn basis_element(&self, idx: u32) -> LieElement {
        LieElement::single(idx, Rational::one())
    }

    pub fn bracket(&self, x: &LieElement, y: &LieElement) -> LieElement {
        let mut terms: BTreeMap<u32, Rational> = BTreeMap::new();
        let mut truncated = x.truncated || y.truncated;
        for (&i, ci) in &x.terms {
            for (&j, cj) in &y.terms {
                if i == j {
                    continue;
                }
                let (hi, lo, sign) = if i > j { (i, j, 1) } else { (j, i, -1) };
                let hsum = self.basis[hi as usize].height + self.basis[lo as usize].height;
                if hsum > self.height_bound {
                    truncated = true;
                    continue;
                }
                if let Some(entries) = self.table.get(&(hi, lo)) {
                    let factor = ci * cj * rat(sign);
                    for (k, c) in entries {
                        let e = terms.entry(*k).or_insert_with(Rational::zero);
                        *e = &*e + &(c * &factor);
                    }
                }
            }
        }
        terms.retain(|_, c| !c.is_zero());
        LieElement { terms, truncated }
    }

    /// Evaluate a left-normed generator word [e_{w0}, [e_{w1}, [… e_{wk}]]].
    pub fn evaluate_word(&self, word: &[u8]) -> Result<LieElement, LieError> {
        if word.is_empty() {
            return Err(LieError::EmptyRelator);
        }
        let mut acc = self.generator(word[word.len() - 1] as usize)?;
        for &i in word[..word.len() - 1].iter().rev() {
            let gi = self.generator(i as usize)?;
            acc = self.bracket(&gi, &acc);
        }
        Ok(acc)
    }

    /// Evaluate an arbitrary bracket tree bottom-up.
    pub fn evaluate_tree(&self, tree: &BracketTree) -> Result<LieElement, LieError> {
        match tree {
            BracketTree::Leaf(i) => self.generator(*i as usize),
            BracketTree::Node(l, r) => {
                let a = self.evaluate_tree(l)?;
                let b = self.evaluate_tree(r)?;
                Ok(self.bracket(&a, &b))
            }
        }
    }

    /// The component of `x` in the given height.
    pub fn height_component(&self, x: &LieElement, h: usize) -> LieElement {
        LieElement {
            terms: x
                .terms
                .iter()
                .filter(|(k, _)| self.basis[**k as usize].height == h)
                .map(|(k, c)| (*k, c.clone()))
                .collect(),
            truncated: x.truncated,
        }
    }

    /// Least height with a nonzero component, when x ≠ 0.
    pub fn min_height(&self, x: &LieElement) -> Option<usize> {
        x.terms.keys().map(|k| self.basis[*k as usize].height).min()
    }

    pub fn display_element(&self, x: &LieElement) -> String {
        if x.terms.is_empty() {
            return "0".to_string();
        }
        let parts: Vec<String> = x
            .terms
            .iter()
            .map(|(k, c)| format!("{}·{}", c, self.basis[*k as usize].tree.display()))
            .collect();
        parts.join(" + ")
    }
}

/// The Serre relator words of a generalized Cartan matrix:
/// (ad e_i)^{1−a_ij} e_j for all i ≠ j, as left-normed generator words.
pub fn serre_relator_words(gcm: &Gcm) -> Vec<Vec<u8>> {
    let n = gcm.rank();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let reps = (1 - gcm.entry(i, j)) as usize;
            let mut w = vec![i as u8; reps];
            w.push(j as u8);
            out.push(w);
        }
    }
    out
}

fn build_with_fallback(
    rank: usize,
    relators: &[Vec<u8>],
    n: usize,
    mode: BasisMode,
) -> GradedLieAlgebra {
    match build::<i128>(rank, relators, n, &mode) {
        Ok(alg) => alg,
        Err(_) => build::<BigInt>(rank, relators, n, &mode)
            .expect("BigInt elimination cannot overflow"),
    }
}

/// Enumeration of the associative words of one content, with index lookup.
struct WordSpace {
    words: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, u32>,
}

impl WordSpace {
    fn new(content: &[u64]) -> WordSpace {
        let mut remaining = content.to_vec();
        let mut word = Vec::new();
        let mut words = Vec::new();
        gen_words(&mut remaining, &mut word, &mut words);
        let index = words.iter().enumerate().map(|(k, w)| (w.clone(), k as u32)).collect();
        WordSpace { words, index }
    }

    fn width(&self) -> usize {
        self.words.len()
    }

    fn vectorize<T: EchelonEntry>(&self, m: &BTreeMap<Vec<u8>, i64>) -> Vec<T> {
        let mut v = vec![T::zero(); self.width()];
        for (w, c) in m {
            let idx = self.index[w] as usize;
            v[idx] = T::from_i64(*c);
        }
        v
    }
}

struct Level<T: EchelonEntry> {
    space: WordSpace,
    ideal: Echelon<T>,
    /// Exact residuals (mod the ideal) of the selected basis vectors at this
    /// multidegree, with their global indices, for structure-constant solves.
    basis_res: QEchelon,
    basis_idx: Vec<u32>,
}

fn content_of(md: &MultiDegree) -> Vec<u64> {
    md.0.iter().map(|&c| c as u64).collect()
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; parts];
    fn rec(pos: usize, left: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[pos] = v;
            rec(pos + 1, left - v, cur, out);
        }
    }
    rec(0, total as i64, &mut cur, &mut out);
    out
}

/// Bracket an ideal-row vector (over `prev` words) with a generator on the
/// left: [e_i, v] = e_i·v − v·e_i in associative coordinates.
fn ad_generator_row<T: EchelonEntry>(
    i: u8,
    row: &[T],
    prev: &WordSpace,
    cur: &WordSpace,
) -> Result<Vec<T>, LinalgError> {
    let mut out = vec![T::zero(); cur.width()];
    for (k, c) in row.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let w = &prev.words[k];
        let mut left = Vec::with_capacity(w.len() + 1);
        left.push(i);
        left.extend_from_slice(w);
        let li = cur.index[&left] as usize;
        out[li] = out[li].checked_add(c).ok_or(LinalgError::Overflow)?;
        let mut right = w.clone();
        right.push(i);
        let ri = cur.index[&right] as usize;
        out[ri] = out[ri].checked_sub(c).ok_or(LinalgError::Overflow)?;
    }
    Ok(out)
}

fn assoc_mul_commutator(
    a: &BTreeMap<Vec<u8>, i64>,
    b: &BTreeMap<Vec<u8>, i64>,
) -> BTreeMap<Vec<u8>, i64> {
    assoc_commutator(a, b)
}

fn build<T: EchelonEntry>(
    rank: usize,
    relators: &[Vec<u8>],
    n_max: usize,
    mode: &BasisMode,
) -> Result<GradedLieAlgebra, LinalgError> {
    // Relators expanded once, grouped by multidegree.
    let mut relator_vecs: BTreeMap<MultiDegree, Vec<BTreeMap<Vec<u8>, i64>>> = BTreeMap::new();
    for r in relators {
        let mut md = vec![0i64; rank];
        for &i in r {
            md[i as usize] += 1;
        }
        let md = MultiDegree(md);
        if md.height() as usize > n_max {
            continue;
        }
        let expansion = BracketTree::left_normed(r).assoc_expansion();
        relator_vecs.entry(md).or_default().push(expansion);
    }

    let mut basis: Vec<BasisInfo> = Vec::new();
    let mut basis_assoc: Vec<BTreeMap<Vec<u8>, i64>> = Vec::new();
    let mut by_multidegree: BTreeMap<MultiDegree, Vec<u32>> = BTreeMap::new();
    let mut table: HashMap<(u32, u32), Vec<(u32, Rational)>> = HashMap::new();

    let mut prev_levels: BTreeMap<MultiDegree, Level<T>> = BTreeMap::new();

    for h in 1..=n_max {
        let mut cur_levels: BTreeMap<MultiDegree, Level<T>> = BTreeMap::new();
        // (word, tree, assoc) selected at this height, across multidegrees.
        let mut selected: Vec<(Vec<u8>, BracketTree, BTreeMap<Vec<u8>, i64>, MultiDegree)> =
            Vec::new();

        for md_vec in compositions(h, rank) {
            let md = MultiDegree(md_vec);
            let support = md.0.iter().filter(|&&c| c > 0).count();
            if support <= 1 && h >= 2 {
                // The free Lie component vanishes; nothing lives here.
                continue;
            }
            let space = WordSpace::new(&content_of(&md));
            let mut ideal = Echelon::<T>::new(space.width());

            for i in 0..rank {
                if md.0[i] == 0 {
                    continue;
                }
                let prev_md = md.sub(&MultiDegree::simple(rank, i));
                if let Some(prev) = prev_levels.get(&prev_md) {
                    for row in prev.ideal.rows() {
                        let v = ad_generator_row(i as u8, row, &prev.space, &space)?;
                        ideal.insert(&v)?;
                    }
                }
            }
            if let Some(rels) = relator_vecs.get(&md) {
                for r in rels {
                    let v = space.vectorize::<T>(r);
                    ideal.insert(&v)?;
                }
            }

            // Select the basis of the quotient at this multidegree.
            let mut sel = ideal.clone();
            let mut chosen: Vec<(Vec<u8>, BracketTree, BTreeMap<Vec<u8>, i64>)> = Vec::new();
            match mode {
                BasisMode::Greedy => {
                    if h == 1 {
                        let i = md.0.iter().position(|&c| c == 1).unwrap() as u8;
                        let tree = BracketTree::Leaf(i);
                        let assoc = tree.assoc_expansion();
                        if sel.insert(&space.vectorize::<T>(&assoc))? {
                            chosen.push((vec![i], tree, assoc));
                        }
                    } else {
                        let mut candidates: Vec<(Vec<u8>, BracketTree, BTreeMap<Vec<u8>, i64>)> =
                            Vec::new();
                        for i in 0..rank {
                            if md.0[i] == 0 {
                                continue;
                            }
                            let prev_md = md.sub(&MultiDegree::simple(rank, i));
                            for &b in by_multidegree.get(&prev_md).map(|v| v.as_slice()).unwrap_or(&[]) {
                                let info = &basis[b as usize];
                                let mut word = Vec::with_capacity(info.word.len() + 1);
                                word.push(i as u8);
                                word.extend_from_slice(&info.word);
                                let tree = BracketTree::Node(
                                    Box::new(BracketTree::Leaf(i as u8)),
                                    Box::new(info.tree.clone()),
                                );
                                let assoc = assoc_mul_commutator(
                                    &BTreeMap::from([(vec![i as u8], 1)]),
                                    &basis_assoc[b as usize],
                                );
                                candidates.push((word, tree, assoc));
                            }
                        }
                        candidates.sort_by(|a, b| a.0.cmp(&b.0));
                        for (word, tree, assoc) in candidates {
                            let v = space.vectorize::<T>(&assoc);
                            if sel.insert(&v)? {
                                chosen.push((word, tree, assoc));
                            }
                        }
                    }
                }
                BasisMode::Lyndon => {
                    for w in lyndon_words(&content_of(&md)) {
                        let tree = lyndon_tree(&w);
                        let assoc = tree.assoc_expansion();
                        let v = space.vectorize::<T>(&assoc);
                        let fresh = sel.insert(&v)?;
                        assert!(fresh, "Lyndon basis vectors are independent");
                        chosen.push((w, tree, assoc));
                    }
                }
            }

            for (word, tree, assoc) in chosen {
                selected.push((word, tree, assoc, md.clone()));
            }
            cur_levels.insert(
                md,
                Level { space, ideal, basis_res: QEchelon::new_tracking(0), basis_idx: Vec::new() },
            );
        }

        // Global order within the height: lexicographic on the defining word.
        selected.sort_by(|a, b| a.0.cmp(&b.0));
        for (word, tree, assoc, md) in selected {
            let idx = basis.len() as u32;
            basis.push(BasisInfo { multidegree: md.clone(), height: h, tree, word });
            basis_assoc.push(assoc);
            by_multidegree.entry(md).or_default().push(idx);
        }

        // Exact residuals of the new basis vectors, for coefficient solves.
        for (md, level) in cur_levels.iter_mut() {
            let idxs: Vec<u32> = by_multidegree.get(md).cloned().unwrap_or_default();
            if idxs.is_empty() {
                continue;
            }
            level.basis_res = QEchelon::new_tracking(level.space.width());
            for &bi in &idxs {
                let v = level.space.vectorize::<T>(&basis_assoc[bi as usize]);
                let (w, s) = level.ideal.residual_exact(&v)?;
                let exact: Vec<Rational> = w.iter().map(|e| e.to_rational() * &s).collect();
                let fresh = level.basis_res.insert(&exact);
                assert!(fresh, "basis residuals are independent modulo the ideal");
                level.basis_idx.push(bi);
            }
        }

        // Structure constants for basis pairs whose heights sum to h.
        let count = basis.len() as u32;
        for hi in 0..count {
            for lo in 0..hi {
                let bh = &basis[hi as usize];
                let bl = &basis[lo as usize];
                if bh.height + bl.height != h {
                    continue;
                }
                let md = bh.multidegree.add(&bl.multidegree);
                let expansion =
                    assoc_mul_commutator(&basis_assoc[hi as usize], &basis_assoc[lo as usize]);
                let Some(level) = cur_levels.get(&md) else {
                    // Single-support target: the component is zero.
                    debug_assert!(expansion.is_empty());
                    continue;
                };
                let v = level.space.vectorize::<T>(&expansion);
                let (w, s) = level.ideal.residual_exact(&v)?;
                if w.iter().all(|e| e.is_zero()) {
                    continue;
                }
                let exact: Vec<Rational> = w.iter().map(|e| e.to_rational() * &s).collect();
                let coeffs = level
                    .basis_res
                    .solve(&exact)
                    .expect("bracket of basis elements lies in the span of the basis mod ideal");
                let entries: Vec<(u32, Rational)> = coeffs
                    .into_iter()
                    .enumerate()
                    .filter(|(_, c)| !c.is_zero())
                    .map(|(k, c)| (level.basis_idx[k], c))
                    .collect();
                if !entries.is_empty() {
                    table.insert((hi, lo), entries);
                }
            }
        }

        prev_levels = cur_levels;
    }

    let left_normed = matches!(mode, BasisMode::Greedy);
    Ok(GradedLieAlgebra { rank, height_bound: n_max, basis, by_multidegree, table, left_normed })
}

/// Root multiplicity of a positive multidegree via the Peterson recursion,
/// independent of the quotient machinery.
pub fn peterson_multiplicity(gcm: &Gcm, alpha: &MultiDegree) -> Result<i64, LieError> {
    assert!(alpha.is_positive(), "multiplicity is defined for positive multidegrees");
    let eps = gcm.symmetrizer().map_err(|_| LieError::NotSymmetrizable)?;
    let n = gcm.rank();
    let form = |a: &MultiDegree, b: &MultiDegree| -> Rational {
        let mut s = Rational::zero();
        for i in 0..n {
            for j in 0..n {
                if a.0[i] != 0 && b.0[j] != 0 {
                    s = s + &eps[i] * rat(gcm.entry(i, j)) * rat(a.0[i]) * rat(b.0[j]);
                }
            }
        }
        s
    };
    let rho = |a: &MultiDegree| -> Rational {
        let mut s = Rational::zero();
        for i in 0..n {
            if a.0[i] != 0 {
                s = s + &eps[i] * rat(a.0[i]);
            }
        }
        s
    };

    let mut c_memo: BTreeMap<MultiDegree, Rational> = BTreeMap::new();
    let mut mult_memo: BTreeMap<MultiDegree, Rational> = BTreeMap::new();

    // Enumerate sub-multidegrees in height order so dependencies resolve.
    let mut all: Vec<MultiDegree> = Vec::new();
    fn submds(pos: usize, cur: &mut Vec<i64>, cap: &[i64], out: &mut Vec<MultiDegree>) {
        if pos == cap.len() {
            let md = MultiDegree(cur.clone());
            if md.is_positive() {
                out.push(md);
            }
            return;
        }
        for v in 0..=cap[pos] {
            cur[pos] = v;
            submds(pos + 1, cur, cap, out);
        }
    }
    submds(0, &mut vec![0; n], &alpha.0, &mut all);
    all.sort_by_key(|d| (d.height(), d.0.clone()));

    for beta in &all {
        // c_β = Σ_{k ≥ 1, β/k integral} mult(β/k)/k; the k ≥ 2 part first.
        let mut correction = Rational::zero();
        for k in 2..=beta.height() {
            if beta.0.iter().all(|&c| c % k == 0) {
                let sub = MultiDegree(beta.0.iter().map(|&c| c / k).collect());
                if let Some(m) = mult_memo.get(&sub) {
                    correction = correction + m / rat(k);
                }
            }
        }
        let (c_beta, mult) = if beta.height() == 1 {
            (Rational::one(), Rational::one())
        } else {
            // ((β|β) − 2(ρ|β)) c_β = Σ_{γ+δ=β} (γ|δ) c_γ c_δ
            let denom = form(beta, beta) - rat(2) * rho(beta);
            let mut rhs = Rational::zero();
            let mut parts: Vec<MultiDegree> = Vec::new();
            submds(0, &mut vec![0; n], &beta.0, &mut parts);
            for gamma in &parts {
                let delta = beta.sub(gamma);
                if !delta.is_positive() {
                    continue;
                }
                let (Some(cg), Some(cd)) = (c_memo.get(gamma), c_memo.get(&delta)) else {
                    continue;
                };
                rhs = rhs + form(gamma, &delta) * cg * cd;
            }
            if denom.is_zero() {
                // The defining identity forces the right side to vanish as
                // well; the recursion does not determine c_β here. Such β
                // carry multiplicity 0, but a query asking for β itself is
                // answered with an error rather than a silent convention.
                assert!(rhs.is_zero(), "inconsistent recursion at {}", beta.label());
                if beta == alpha {
                    return Err(LieError::ZeroDenominator(beta.label()));
                }
                (correction.clone(), Rational::zero())
            } else {
                let c = rhs / denom;
                let m = &c - &correction;
                (c, m)
            }
        };
        c_memo.insert(beta.clone(), c_beta);
        mult_memo.insert(beta.clone(), mult);
    }

    let m = mult_memo.remove(alpha).unwrap();
    assert!(m.is_integer(), "Peterson multiplicity must be an integer, got {m}");
    let v = m.to_integer();
    use num_traits::ToPrimitive;
    Ok(v.to_i64().expect("multiplicity fits in i64"))
}
