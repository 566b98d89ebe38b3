//! Free products and amalgamated free products with computable factor
//! normal forms, plus the lower-central-series bounds that drive the
//! residual-nilpotence argument for such products.
//!
//! * [`AmalgamSpec`] — two factors (each a rank-2 coordinate group over Q or
//!   a copy of (Q, +)) glued along a common subgroup C ≅ (Q, +): in a rank-2
//!   factor C sits as a simple-root coordinate subgroup, in a line factor C
//!   is the whole line. Every factor element splits uniquely as `rep · c`
//!   with c ∈ C and `rep` having zero C-coordinate (the coordinate
//!   projection onto C is an additive retraction, so dropping the C
//!   coordinate is a transversal).
//! * [`AmalgamSpec::free_reduce`] — plain free-product reduction: merge
//!   adjacent same-factor letters, delete identities.
//! * [`AmalgamSpec::amalgam_reduce`] — Britton normal form: additionally
//!   every non-final letter is replaced by its transversal representative,
//!   its C-part pushed right; a word is the identity iff the result is
//!   empty.
//! * [`Derivation`] / [`verify_lcs_bound_lie`] — exact span computations on
//!   a finite-dimensional graded Lie algebra h with a commuting space c of
//!   derivations, checking c^{(Nn−n+1)}(γ_n(h)) ⊆ γ_{n+1}(h) and the
//!   L-recursion bound L_{r_n} ⊆ γ_{n+1}(h) with r_n = [`r_n_bound`].

use num_traits::{One, Zero};
use thiserror::Error;

use crate::gcm::{named_gcm, MultiDegree};
use crate::lie::{BracketTree, GradedLieAlgebra, LieElement};
use crate::linalg::{subspace_contained, QEchelon};
use crate::rank2::Rank2Kind;
use crate::scalar::{Rational, Rationals};
use crate::word::GroupWord;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum AmalgamError {
    #[error("factor id {0} out of range (amalgams have factors 0 and 1)")]
    FactorId(usize),
    #[error("element shape does not match factor {0}")]
    ElementShape(usize),
    #[error("common-subgroup root index {0} must name a simple root (0 or 1)")]
    CommonRoot(usize),
    #[error("expected {expected} generator images, got {got}")]
    GeneratorImages { expected: usize, got: usize },
    #[error("images do not extend to a derivation: fails on {0}")]
    NotDerivation(String),
    #[error("derivation space is not abelian: operators {0} and {1} do not commute")]
    NotCommuting(usize, usize),
    #[error("lower-central bounds require N ≥ 2, got {0}")]
    DegenerateBound(usize),
    #[error("derivation-power precondition c^(N)(h) ⊆ [h,h] fails at basis element {0}")]
    Precondition(usize),
}

/// One factor group of an amalgam.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    /// The additive group (Q, +).
    Line,
    /// A rank-2 unipotent coordinate group over Q.
    Rank2(Rank2Kind),
}

/// An element of a factor: a scalar for a line, normal-form coordinates (in
/// the kind's root order) for a rank-2 group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FactorElem {
    Line(Rational),
    Rank2(Vec<Rational>),
}

/// Two factors glued along C ≅ (Q, +); `c_roots[k]` names the simple root
/// (index 0 or 1) of factor k carrying C. Ignored for line factors, where C
/// is the whole line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmalgamSpec {
    factors: [Factor; 2],
    c_roots: [usize; 2],
}

/// A reduced word: alternating factor letters followed by an optional
/// C-tail. After [`AmalgamSpec::amalgam_reduce`] every letter is a
/// transversal representative (zero C-coordinate); after
/// [`AmalgamSpec::free_reduce`] letters are merely merged, and the tail is
/// unused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmalgamWord {
    letters: Vec<(usize, FactorElem)>,
    c_tail: Rational,
}

impl AmalgamWord {
    pub fn letters(&self) -> &[(usize, FactorElem)] {
        &self.letters
    }

    pub fn c_tail(&self) -> &Rational {
        &self.c_tail
    }

    /// Number of syllables, counting a nonzero C-tail as part of the last
    /// letter (or as a lone C-letter when no other letters remain).
    pub fn syllable_length(&self) -> usize {
        if self.letters.is_empty() {
            usize::from(!self.c_tail.is_zero())
        } else {
            self.letters.len()
        }
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty() && self.c_tail.is_zero()
    }

    /// JSON form: an array of {"factor": id, "coords": [...]} objects with
    /// exact rational strings, plus a final {"c": ...} entry when a C-tail
    /// is present.
    pub fn to_json(&self) -> serde_json::Value {
        let mut arr: Vec<serde_json::Value> = self
            .letters
            .iter()
            .map(|(fid, e)| {
                let coords: Vec<String> = match e {
                    FactorElem::Line(t) => vec![t.to_string()],
                    FactorElem::Rank2(cs) => cs.iter().map(|c| c.to_string()).collect(),
                };
                serde_json::json!({ "factor": fid, "coords": coords })
            })
            .collect();
        if !self.c_tail.is_zero() {
            arr.push(serde_json::json!({ "c": self.c_tail.to_string() }));
        }
        serde_json::Value::Array(arr)
    }
}

impl AmalgamSpec {
    pub fn new(factors: [Factor; 2], c_roots: [usize; 2]) -> Result<AmalgamSpec, AmalgamError> {
        for k in 0..2 {
            if matches!(factors[k], Factor::Rank2(_)) && c_roots[k] > 1 {
                return Err(AmalgamError::CommonRoot(c_roots[k]));
            }
        }
        Ok(AmalgamSpec { factors, c_roots })
    }

    pub fn factors(&self) -> &[Factor; 2] {
        &self.factors
    }

    fn validate(&self, fid: usize, e: &FactorElem) -> Result<(), AmalgamError> {
        if fid > 1 {
            return Err(AmalgamError::FactorId(fid));
        }
        let ok = match (&self.factors[fid], e) {
            (Factor::Line, FactorElem::Line(_)) => true,
            (Factor::Rank2(kind), FactorElem::Rank2(cs)) => cs.len() == kind.n_roots(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(AmalgamError::ElementShape(fid))
        }
    }

    pub fn identity(&self, fid: usize) -> FactorElem {
        match self.factors[fid] {
            Factor::Line => FactorElem::Line(Rational::zero()),
            Factor::Rank2(kind) => FactorElem::Rank2(vec![Rational::zero(); kind.n_roots()]),
        }
    }

    pub fn is_identity_elem(&self, e: &FactorElem) -> bool {
        match e {
            FactorElem::Line(t) => t.is_zero(),
            FactorElem::Rank2(cs) => cs.iter().all(Rational::is_zero),
        }
    }

    pub fn multiply(&self, fid: usize, a: &FactorElem, b: &FactorElem) -> FactorElem {
        match (&self.factors[fid], a, b) {
            (Factor::Line, FactorElem::Line(s), FactorElem::Line(t)) => FactorElem::Line(s + t),
            (Factor::Rank2(kind), FactorElem::Rank2(x), FactorElem::Rank2(y)) => {
                let gx = kind.from_coords(x.clone()).expect("validated coords");
                let gy = kind.from_coords(y.clone()).expect("validated coords");
                FactorElem::Rank2(kind.multiply(&Rationals, &gx, &gy).coords().to_vec())
            }
            _ => panic!("factor/element mismatch"),
        }
    }

    pub fn invert(&self, fid: usize, a: &FactorElem) -> FactorElem {
        match (&self.factors[fid], a) {
            (Factor::Line, FactorElem::Line(s)) => FactorElem::Line(-s),
            (Factor::Rank2(kind), FactorElem::Rank2(x)) => {
                let gx = kind.from_coords(x.clone()).expect("validated coords");
                FactorElem::Rank2(kind.inverse(&Rationals, &gx).coords().to_vec())
            }
            _ => panic!("factor/element mismatch"),
        }
    }

    /// The C-coordinate of a factor element (an additive retraction onto C).
    pub fn c_coordinate(&self, fid: usize, e: &FactorElem) -> Rational {
        match e {
            FactorElem::Line(t) => t.clone(),
            FactorElem::Rank2(cs) => cs[self.c_roots[fid]].clone(),
        }
    }

    /// The embedding C → factor `fid`, t ↦ x_C(t).
    pub fn c_embed(&self, fid: usize, t: &Rational) -> FactorElem {
        match self.factors[fid] {
            Factor::Line => FactorElem::Line(t.clone()),
            Factor::Rank2(kind) => {
                let mut cs = vec![Rational::zero(); kind.n_roots()];
                cs[self.c_roots[fid]] = t.clone();
                FactorElem::Rank2(cs)
            }
        }
    }

    /// The unique factorization g = rep · x_C(t) with `rep` of zero
    /// C-coordinate: t is the C-coordinate of g and rep = g · x_C(−t).
    pub fn split(&self, fid: usize, e: &FactorElem) -> (FactorElem, Rational) {
        let t = self.c_coordinate(fid, e);
        let rep = self.multiply(fid, e, &self.c_embed(fid, &(-t.clone())));
        debug_assert!(self.c_coordinate(fid, &rep).is_zero());
        (rep, t)
    }

    /// Free-product reduction: merge adjacent same-factor letters and delete
    /// identity letters (cascading). The C-tail of the result is unused.
    pub fn free_reduce(
        &self,
        letters: &[(usize, FactorElem)],
    ) -> Result<AmalgamWord, AmalgamError> {
        let mut stack: Vec<(usize, FactorElem)> = Vec::new();
        for (fid, e) in letters {
            self.validate(*fid, e)?;
            if self.is_identity_elem(e) {
                continue;
            }
            match stack.last() {
                Some((top, _)) if top == fid => {
                    let (_, t) = stack.pop().unwrap();
                    let merged = self.multiply(*fid, &t, e);
                    if !self.is_identity_elem(&merged) {
                        stack.push((*fid, merged));
                    }
                }
                _ => stack.push((*fid, e.clone())),
            }
        }
        Ok(AmalgamWord { letters: stack, c_tail: Rational::zero() })
    }

    /// Britton normal form rep_1 ⋯ rep_m · c: alternating non-identity
    /// transversal representatives followed by the C-tail. The input word is
    /// the identity iff the result [`AmalgamWord::is_identity`].
    pub fn amalgam_reduce(
        &self,
        letters: &[(usize, FactorElem)],
    ) -> Result<AmalgamWord, AmalgamError> {
        let mut stack: Vec<(usize, FactorElem)> = Vec::new();
        let mut pending = Rational::zero();
        for (fid, e) in letters {
            self.validate(*fid, e)?;
            let mut g = self.multiply(*fid, &self.c_embed(*fid, &pending), e);
            if let Some((top, _)) = stack.last() {
                if top == fid {
                    let (_, t) = stack.pop().unwrap();
                    g = self.multiply(*fid, &t, &g);
                }
            }
            let (rep, t) = self.split(*fid, &g);
            pending = t;
            if !self.is_identity_elem(&rep) {
                stack.push((*fid, rep));
            }
        }
        Ok(AmalgamWord { letters: stack, c_tail: pending })
    }

    /// Reversed, elementwise-inverted letters: the inverse word.
    pub fn invert_letters(
        &self,
        letters: &[(usize, FactorElem)],
    ) -> Vec<(usize, FactorElem)> {
        letters.iter().rev().map(|(f, e)| (*f, self.invert(*f, e))).collect()
    }

    /// [u, v] = u⁻¹ v⁻¹ u v as a letter sequence.
    pub fn commutator_letters(
        &self,
        u: &[(usize, FactorElem)],
        v: &[(usize, FactorElem)],
    ) -> Vec<(usize, FactorElem)> {
        let mut out = self.invert_letters(u);
        out.extend(self.invert_letters(v));
        out.extend(u.iter().cloned());
        out.extend(v.iter().cloned());
        out
    }

    /// Reduced letters with the C-tail absorbed into the final letter (or
    /// kept as a lone letter of factor 0 when no letters remain).
    pub fn absorbed_letters(&self, w: &AmalgamWord) -> Vec<(usize, FactorElem)> {
        let mut letters = w.letters.clone();
        if !w.c_tail.is_zero() {
            match letters.pop() {
                Some((fid, e)) => {
                    letters.push((fid, self.multiply(fid, &e, &self.c_embed(fid, &w.c_tail))));
                }
                None => letters.push((0, self.c_embed(0, &w.c_tail))),
            }
        }
        letters
    }

    /// Length of the cyclically reduced core: conjugate away matching outer
    /// factors until the first and last letters lie in different factors.
    /// This length is a conjugacy invariant.
    pub fn cyclic_core_length(
        &self,
        letters: &[(usize, FactorElem)],
    ) -> Result<usize, AmalgamError> {
        let mut current = self.absorbed_letters(&self.amalgam_reduce(letters)?);
        loop {
            if current.len() < 2 || current.first().unwrap().0 != current.last().unwrap().0 {
                return Ok(current.len());
            }
            // Conjugate by the last letter: g_m (g_1 … g_m) g_m⁻¹.
            let last = current.last().unwrap().clone();
            let mut conj = vec![last.clone()];
            conj.extend(current.iter().cloned());
            conj.push((last.0, self.invert(last.0, &last.1)));
            let next = self.absorbed_letters(&self.amalgam_reduce(&conj)?);
            debug_assert!(next.len() < current.len());
            current = next;
        }
    }
}

/// Node pairs of the two factors of the affine rank-3 edge amalgam
/// U_{12} ∗_{U_2} U_{23} inside the rank-3 group.
pub const AFFINE_EDGE_NODES: [[usize; 2]; 2] = [[0, 1], [1, 2]];

/// The edge amalgam U_{12} ∗_{U_2} U_{23} of the affine rank-3 matrix: two
/// Heisenberg-type factors glued along the middle node's root subgroup (the
/// second simple root of the left factor, the first of the right).
pub fn affine_edge_spec() -> AmalgamSpec {
    AmalgamSpec::new(
        [Factor::Rank2(Rank2Kind::A2), Factor::Rank2(Rank2Kind::A2)],
        [1, 0],
    )
    .expect("valid spec")
}

/// An amalgam letter sequence for [`affine_edge_spec`] as a word in the
/// ambient affine rank-3 group.
pub fn affine_edge_group_word(letters: &[(usize, FactorElem)]) -> GroupWord {
    let gcm = named_gcm("A2~").expect("named matrix");
    let kind = Rank2Kind::A2;
    let mut out = Vec::new();
    for (fid, e) in letters {
        let coords = match e {
            FactorElem::Rank2(cs) => cs,
            FactorElem::Line(_) => panic!("edge amalgam factors are rank-2 groups"),
        };
        let nodes = AFFINE_EDGE_NODES[*fid];
        for (r, &(p, q)) in kind.roots().iter().enumerate() {
            if coords[r].is_zero() {
                continue;
            }
            let gamma = MultiDegree::simple(3, nodes[0])
                .scale(p as i64)
                .add(&MultiDegree::simple(3, nodes[1]).scale(q as i64));
            out.push((gamma, coords[r].clone()));
        }
    }
    GroupWord::from_letters(&gcm, out).expect("valid pair roots")
}

/// r_n = 1 + n + (N−1)·n·(n+1)/2.
pub fn r_n_bound(n_cap: u64, n: u64) -> u64 {
    1 + n + (n_cap - 1) * n * (n + 1) / 2
}

/// A linear operator on a graded Lie algebra recorded by its values on the
/// basis, certified at construction to satisfy the Leibniz rule.
#[derive(Debug, Clone)]
pub struct Derivation {
    images: Vec<LieElement>,
}

impl Derivation {
    /// Extend generator images along the basis bracket tags and certify the
    /// Leibniz rule d[x,y] = [dx,y] + [x,dy] on all basis pairs.
    pub fn from_generator_images(
        h: &GradedLieAlgebra,
        gens: &[LieElement],
    ) -> Result<Derivation, AmalgamError> {
        if gens.len() != h.rank() {
            return Err(AmalgamError::GeneratorImages { expected: h.rank(), got: gens.len() });
        }
        let mut index_of = std::collections::HashMap::new();
        for (k, info) in h.basis().iter().enumerate() {
            index_of.insert(info.tree.clone(), k as u32);
        }
        let mut images: Vec<LieElement> = Vec::with_capacity(h.dim_total());
        for info in h.basis() {
            let img = match &info.tree {
                BracketTree::Leaf(i) => gens[*i as usize].clone(),
                BracketTree::Node(l, r) => {
                    let (vl, dl) = subtree_value(h, gens, &index_of, &images, l)?;
                    let (vr, dr) = subtree_value(h, gens, &index_of, &images, r)?;
                    h.bracket(&dl, &vr).add(&h.bracket(&vl, &dr))
                }
            };
            images.push(img);
        }
        let d = Derivation { images };
        for (i, bi) in h.basis().iter().enumerate() {
            for j in (i + 1)..h.dim_total() {
                let bj = &h.basis()[j];
                let xi = LieElement::single(i as u32, Rational::one());
                let xj = LieElement::single(j as u32, Rational::one());
                let lhs = d.apply(&h.bracket(&xi, &xj));
                let rhs = h.bracket(&d.images[i], &xj).add(&h.bracket(&xi, &d.images[j]));
                if lhs != rhs {
                    return Err(AmalgamError::NotDerivation(format!(
                        "[{}, {}]",
                        bi.multidegree.label(),
                        bj.multidegree.label()
                    )));
                }
            }
        }
        Ok(d)
    }

    /// Linear extension to arbitrary elements.
    pub fn apply(&self, x: &LieElement) -> LieElement {
        let mut out = LieElement::zero();
        for (k, c) in &x.terms {
            out = out.add(&self.images[*k as usize].scale(c));
        }
        out
    }
}

/// Value and derivative of a bracket-tag subtree: subtrees of basis tags are
/// themselves basis tags (or generator leaves), so both are direct lookups.
fn subtree_value(
    h: &GradedLieAlgebra,
    gens: &[LieElement],
    index_of: &std::collections::HashMap<BracketTree, u32>,
    images: &[LieElement],
    t: &BracketTree,
) -> Result<(LieElement, LieElement), AmalgamError> {
    match index_of.get(t) {
        Some(&k) => Ok((h.basis_element(k), images[k as usize].clone())),
        None => match t {
            BracketTree::Leaf(i) => {
                // A generator whose basis tag was eliminated: its value is
                // still defined (possibly zero in the quotient).
                let v = h
                    .generator(*i as usize)
                    .map_err(|e| AmalgamError::NotDerivation(e.to_string()))?;
                Ok((v, gens[*i as usize].clone()))
            }
            BracketTree::Node(_, _) => {
                Err(AmalgamError::NotDerivation(format!("untagged subtree {t}")))
            }
        },
    }
}

fn to_dense(dim: usize, x: &LieElement) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); dim];
    for (k, c) in &x.terms {
        v[*k as usize] = c.clone();
    }
    v
}

/// Insert vectors into a fresh echelon, returning it along with an
/// independent spanning subset.
fn span_of(dim: usize, vecs: &[LieElement]) -> (QEchelon, Vec<LieElement>) {
    let mut ech = QEchelon::new(dim);
    let mut spanning = Vec::new();
    for v in vecs {
        if v.is_zero() {
            continue;
        }
        if ech.insert(&to_dense(dim, v)) {
            spanning.push(v.clone());
        }
    }
    (ech, spanning)
}

/// Images of a spanning set under one application of every derivation.
fn derive_once(dim: usize, c: &[Derivation], vecs: &[LieElement]) -> Vec<LieElement> {
    let mut out = Vec::new();
    for d in c {
        for v in vecs {
            out.push(d.apply(v));
        }
    }
    span_of(dim, &out).1
}

/// Exact verification of the lower-central-series bounds for h ⋊ c with an
/// abelian space c of derivations satisfying c^{(N)}(h) ⊆ [h, h]:
/// for every n ≤ n_max, c^{(Nn−n+1)}(γ_n(h)) ⊆ γ_{n+1}(h) and
/// L_{r_n} ⊆ γ_{n+1}(h), where L_1 = h, L_{k+1} = c(L_k) + [h, L_k].
pub fn verify_lcs_bound_lie(
    h: &GradedLieAlgebra,
    c: &[Derivation],
    n_cap: usize,
    n_max: usize,
) -> Result<bool, AmalgamError> {
    if n_cap < 2 {
        return Err(AmalgamError::DegenerateBound(n_cap));
    }
    let dim = h.dim_total();
    // The derivation space must be abelian.
    for p in 0..c.len() {
        for q in (p + 1)..c.len() {
            for k in 0..dim {
                let b = LieElement::single(k as u32, Rational::one());
                if c[p].apply(&c[q].apply(&b)) != c[q].apply(&c[p].apply(&b)) {
                    return Err(AmalgamError::NotCommuting(p, q));
                }
            }
        }
    }
    let basis: Vec<LieElement> =
        (0..dim).map(|k| LieElement::single(k as u32, Rational::one())).collect();
    // Lower central series γ_1 ⊇ γ_2 ⊇ … with spanning sets and echelons.
    let mut gamma: Vec<(QEchelon, Vec<LieElement>)> = vec![span_of(dim, &basis)];
    for n in 1..=n_max {
        let prev = &gamma[n - 1].1;
        let mut next = Vec::new();
        for b in &basis {
            for v in prev {
                next.push(h.bracket(b, v));
            }
        }
        gamma.push(span_of(dim, &next));
    }
    // Precondition: c^{(N)}(h) ⊆ γ_2(h).
    let mut power = basis.clone();
    for _ in 0..n_cap {
        power = derive_once(dim, c, &power);
    }
    for v in &power {
        if !gamma[1].0.contains(&to_dense(dim, v)) {
            let k = *v.terms.keys().next().unwrap() as usize;
            return Err(AmalgamError::Precondition(k));
        }
    }
    // c^{(Nn−n+1)}(γ_n) ⊆ γ_{n+1}.
    for n in 1..=n_max {
        let mut t = gamma[n - 1].1.clone();
        for _ in 0..(n_cap * n - n + 1) {
            t = derive_once(dim, c, &t);
        }
        let dense: Vec<Vec<Rational>> = t.iter().map(|v| to_dense(dim, v)).collect();
        if !subspace_contained(&dense, &gamma[n].0) {
            return Ok(false);
        }
    }
    // L_1 = h, L_{k+1} = c(L_k) + [h, L_k]; check L_{r_n} ⊆ γ_{n+1}.
    let r_max = r_n_bound(n_cap as u64, n_max as u64) as usize;
    let mut ladder: Vec<Vec<LieElement>> = vec![basis.clone()];
    for _ in 1..r_max {
        let prev = ladder.last().unwrap();
        let mut next = derive_once(dim, c, prev);
        for b in &basis {
            for v in prev {
                next.push(h.bracket(b, v));
            }
        }
        ladder.push(span_of(dim, &next).1);
    }
    for n in 1..=n_max {
        let r = r_n_bound(n_cap as u64, n as u64) as usize;
        let dense: Vec<Vec<Rational>> =
            ladder[r - 1].iter().map(|v| to_dense(dim, v)).collect();
        if !subspace_contained(&dense, &gamma[n].0) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::UEnv;
    use crate::lie::GradedLieAlgebra;
    use crate::scalar::rat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn line_spec() -> AmalgamSpec {
        AmalgamSpec::new([Factor::Line, Factor::Line], [0, 0]).unwrap()
    }

    fn a(t: i64) -> (usize, FactorElem) {
        (0, FactorElem::Line(rat(t)))
    }

    fn b(t: i64) -> (usize, FactorElem) {
        (1, FactorElem::Line(rat(t)))
    }

    fn r2(fid: usize, coords: [i64; 3]) -> (usize, FactorElem) {
        (fid, FactorElem::Rank2(coords.iter().map(|&c| rat(c)).collect()))
    }

    fn random_letters(
        spec: &AmalgamSpec,
        rng: &mut ChaCha8Rng,
        len: usize,
    ) -> Vec<(usize, FactorElem)> {
        (0..len)
            .map(|_| {
                let fid = rng.gen_range(0..2usize);
                let e = match spec.factors()[fid] {
                    Factor::Line => FactorElem::Line(rat(rng.gen_range(-3i64..=3))),
                    Factor::Rank2(kind) => FactorElem::Rank2(
                        (0..kind.n_roots()).map(|_| rat(rng.gen_range(-2i64..=2))).collect(),
                    ),
                };
                (fid, e)
            })
            .collect()
    }

    #[test]
    fn free_reduction_cancels_and_counts() {
        let spec = line_spec();
        // a · a⁻¹ → empty.
        let w = spec.free_reduce(&[a(5), a(-5)]).unwrap();
        assert!(w.is_identity());
        // [a, b] has four alternating syllables.
        let com = spec.commutator_letters(&[a(1)], &[b(1)]);
        assert_eq!(spec.free_reduce(&com).unwrap().syllable_length(), 4);
        // [a, [a, b]] reduces to eight syllables.
        let inner = spec.commutator_letters(&[a(1)], &[b(1)]);
        let outer = spec.commutator_letters(&[a(1)], &inner);
        let w = spec.free_reduce(&outer).unwrap();
        assert_eq!(w.syllable_length(), 8);
        // Identity letters are deleted wherever they occur.
        let w = spec.free_reduce(&[a(1), b(0), a(2), b(3)]).unwrap();
        assert_eq!(w.syllable_length(), 2);
        assert_eq!(w.letters()[0], a(3));
    }

    #[test]
    fn britton_reduction_on_the_affine_edge() {
        let spec = affine_edge_spec();
        assert!(spec.amalgam_reduce(&[]).unwrap().is_identity());
        // A common-subgroup letter from the left factor is absorbed into the
        // following right-factor letter.
        let w = spec
            .amalgam_reduce(&[r2(0, [0, 1, 0]), r2(1, [0, 0, 1])])
            .unwrap();
        assert_eq!(w.letters().len(), 1);
        assert_eq!(w.letters()[0].0, 1);
        // The witness word [a, [a, b]] with a = x_{α1+α2}(1), b = x_{α2+α3}(1)
        // has Britton length 8, hence is nontrivial in the amalgam.
        let a = r2(0, [0, 0, 1]);
        let b = r2(1, [0, 0, 1]);
        let inner = spec.commutator_letters(&[a.clone()], &[b]);
        let outer = spec.commutator_letters(&[a], &inner);
        let w = spec.amalgam_reduce(&outer).unwrap();
        assert_eq!(w.syllable_length(), 8);
        assert!(w.c_tail().is_zero());
        // Pure common-subgroup content survives only as the tail.
        let w = spec
            .amalgam_reduce(&[r2(0, [0, 2, 0]), r2(1, [3, 0, 0])])
            .unwrap();
        assert!(w.letters().is_empty());
        assert_eq!(w.c_tail(), &rat(5));
        assert_eq!(w.to_json().as_array().unwrap().len(), 1);
    }

    #[test]
    fn transversal_splits_match_collection() {
        let spec = affine_edge_spec();
        // g in C: representative is the identity.
        let (rep, t) = spec.split(0, &r2(0, [0, 7, 0]).1);
        assert!(spec.is_identity_elem(&rep));
        assert_eq!(t, rat(7));
        // g = x_α(a): already a representative.
        let g = r2(0, [4, 0, 0]).1;
        let (rep, t) = spec.split(0, &g);
        assert_eq!(rep, g);
        assert!(t.is_zero());
        // g = x_β(b)·x_α(a) collects to coords (a, b, ab); the split drops
        // the β coordinate and keeps the collected α+β part.
        let kind = Rank2Kind::A2;
        let g = kind.collect(&Rationals, &[(1, rat(3)), (0, rat(2))]);
        assert_eq!(g.coords(), &[rat(2), rat(3), rat(6)]);
        let (rep, t) = spec.split(0, &FactorElem::Rank2(g.coords().to_vec()));
        assert_eq!(rep, FactorElem::Rank2(vec![rat(2), rat(0), rat(6)]));
        assert_eq!(t, rat(3));
        // Random split round-trips in both factors, and the C-coordinate is
        // an additive retraction.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            for fid in 0..2 {
                let g = random_letters(&spec, &mut rng, 1)[0].1.clone();
                let (rep, t) = spec.split(fid, &g);
                assert!(spec.c_coordinate(fid, &rep).is_zero());
                assert_eq!(spec.multiply(fid, &rep, &spec.c_embed(fid, &t)), g);
                let h = random_letters(&spec, &mut rng, 1)[0].1.clone();
                assert_eq!(
                    spec.c_coordinate(fid, &spec.multiply(fid, &g, &h)),
                    spec.c_coordinate(fid, &g) + spec.c_coordinate(fid, &h)
                );
            }
        }
    }

    /// Apply random applicable rewrite moves until none remain, then convert
    /// to the rep·tail form; must agree with the left-to-right reducer.
    fn random_strategy_reduce(
        spec: &AmalgamSpec,
        letters: &[(usize, FactorElem)],
        rng: &mut ChaCha8Rng,
        britton: bool,
    ) -> AmalgamWord {
        let mut w: Vec<(usize, FactorElem)> = letters.to_vec();
        loop {
            let mut moves: Vec<usize> = Vec::new();
            for i in 0..w.len() {
                let deletable = spec.is_identity_elem(&w[i].1);
                let mergeable = i + 1 < w.len() && w[i].0 == w[i + 1].0;
                let pushable = britton
                    && i + 1 < w.len()
                    && !spec.c_coordinate(w[i].0, &w[i].1).is_zero();
                if deletable || mergeable || pushable {
                    moves.push(i);
                }
            }
            if moves.is_empty() {
                break;
            }
            let i = moves[rng.gen_range(0..moves.len())];
            let deletable = spec.is_identity_elem(&w[i].1);
            let mergeable = i + 1 < w.len() && w[i].0 == w[i + 1].0;
            if deletable {
                w.remove(i);
            } else if mergeable && rng.gen_bool(0.5) {
                let merged = spec.multiply(w[i].0, &w[i].1, &w[i + 1].1);
                w[i].1 = merged;
                w.remove(i + 1);
            } else if britton && !spec.c_coordinate(w[i].0, &w[i].1).is_zero() && i + 1 < w.len()
            {
                let (rep, t) = spec.split(w[i].0, &w[i].1);
                w[i].1 = rep;
                let next = w[i + 1].clone();
                w[i + 1].1 = spec.multiply(next.0, &spec.c_embed(next.0, &t), &next.1);
            } else if mergeable {
                let merged = spec.multiply(w[i].0, &w[i].1, &w[i + 1].1);
                w[i].1 = merged;
                w.remove(i + 1);
            }
        }
        // Final conversion: split the last letter into rep · tail.
        let mut tail = Rational::zero();
        if britton {
            if let Some((fid, e)) = w.pop() {
                let (rep, t) = spec.split(fid, &e);
                tail = t;
                if !spec.is_identity_elem(&rep) {
                    w.push((fid, rep));
                }
            }
        }
        AmalgamWord { letters: w, c_tail: tail }
    }

    #[test]
    fn reduction_is_confluent_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let specs = [line_spec(), affine_edge_spec()];
        for spec in &specs {
            for _ in 0..30 {
                let len = rng.gen_range(0..10);
                let letters = random_letters(spec, &mut rng, len);
                let canonical = spec.amalgam_reduce(&letters).unwrap();
                let random = random_strategy_reduce(spec, &letters, &mut rng, true);
                assert_eq!(canonical, random);
                let canonical = spec.free_reduce(&letters).unwrap();
                let random = random_strategy_reduce(spec, &letters, &mut rng, false);
                assert_eq!(canonical.letters(), random.letters());
            }
        }
    }

    #[test]
    fn conjugation_preserves_cyclic_core_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let spec = affine_edge_spec();
        for _ in 0..25 {
            let lw = rng.gen_range(0..7);
            let w = random_letters(&spec, &mut rng, lw);
            let lg = rng.gen_range(0..5);
            let g = random_letters(&spec, &mut rng, lg);
            let mut conj = spec.invert_letters(&g);
            conj.extend(w.iter().cloned());
            conj.extend(g.iter().cloned());
            assert_eq!(
                spec.cyclic_core_length(&conj).unwrap(),
                spec.cyclic_core_length(&w).unwrap()
            );
        }
        // When the conjugator's outer letters avoid the ends of w entirely,
        // the raw reduced length grows by exactly 2·len(g): an even shift.
        let w = vec![r2(0, [1, 0, 0]), r2(1, [0, 1, 1]), r2(0, [0, 0, 2])];
        let g = vec![r2(1, [0, 2, 0]), r2(0, [0, 1, 1])];
        let mut conj = spec.invert_letters(&g);
        conj.extend(w.iter().cloned());
        conj.extend(g.iter().cloned());
        let lw = spec.amalgam_reduce(&w).unwrap().syllable_length();
        let lc = spec.amalgam_reduce(&conj).unwrap().syllable_length();
        assert_eq!(lc, lw + 2 * g.len());
    }

    #[test]
    fn reduced_empty_words_embed_trivially() {
        let spec = affine_edge_spec();
        let gcm = named_gcm("A2~").unwrap();
        let alg = Arc::new(GradedLieAlgebra::serre_quotient(&gcm, 5));
        let env = UEnv::new(alg, 5).unwrap();
        let roots = env.calibrate_root_vectors(&gcm).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..10 {
            // w · w⁻¹ with random conjugating noise reduces to empty.
            let lw = rng.gen_range(1..5);
            let w = random_letters(&spec, &mut rng, lw);
            let mut letters = w.clone();
            letters.extend(spec.invert_letters(&w));
            let reduced = spec.amalgam_reduce(&letters).unwrap();
            assert!(reduced.is_identity());
            let gw = affine_edge_group_word(&letters);
            assert!(env.is_one(&gw.embed(&env, &roots).unwrap()));
        }
        // Conversely, short random reduced-nontrivial words embed
        // nontrivially at this depth.
        for _ in 0..10 {
            let ll = rng.gen_range(1..4);
            let letters = random_letters(&spec, &mut rng, ll);
            let reduced = spec.amalgam_reduce(&letters).unwrap();
            if reduced.is_identity() {
                continue;
            }
            let gw = affine_edge_group_word(&letters);
            assert!(!env.is_one(&gw.embed(&env, &roots).unwrap()));
        }
    }

    #[test]
    fn bound_formula_values() {
        assert_eq!(r_n_bound(2, 1), 3);
        assert_eq!(r_n_bound(3, 2), 9);
        assert_eq!(r_n_bound(2, 3), 10);
        // r_1 = N + 1 for every N.
        for n_cap in 2..8 {
            assert_eq!(r_n_bound(n_cap, 1), n_cap + 1);
        }
    }

    #[test]
    fn lcs_bounds_on_lie_models() {
        // Free nilpotent of class 3 on two generators with the shift
        // derivation d(y1) = 0, d(y2) = y1: d² kills the generators, so the
        // precondition holds with N = 2, and all bounds check out.
        let h = GradedLieAlgebra::free_lie(2, 3);
        let shift = Derivation::from_generator_images(
            &h,
            &[LieElement::zero(), h.generator(0).unwrap()],
        )
        .unwrap();
        assert_eq!(verify_lcs_bound_lie(&h, &[shift.clone()], 2, 3), Ok(true));
        // N = 1 is rejected outright.
        assert_eq!(
            verify_lcs_bound_lie(&h, &[shift], 1, 2),
            Err(AmalgamError::DegenerateBound(1))
        );
        // Abelian h: γ_2 = 0 and the zero derivation satisfies everything.
        let ab = GradedLieAlgebra::free_lie(2, 1);
        let zero = Derivation::from_generator_images(
            &ab,
            &[LieElement::zero(), LieElement::zero()],
        )
        .unwrap();
        assert_eq!(verify_lcs_bound_lie(&ab, &[zero], 2, 4), Ok(true));
        let ab_shift = Derivation::from_generator_images(
            &ab,
            &[LieElement::zero(), ab.generator(0).unwrap()],
        )
        .unwrap();
        assert_eq!(verify_lcs_bound_lie(&ab, &[ab_shift], 3, 3), Ok(true));
        // Heisenberg with the shift derivation.
        let heis =
            GradedLieAlgebra::quotient_by_relators(2, &[vec![0, 0, 1], vec![1, 1, 0]], 3)
                .unwrap();
        assert_eq!(heis.dim_total(), 3);
        let heis_shift = Derivation::from_generator_images(
            &heis,
            &[LieElement::zero(), heis.generator(0).unwrap()],
        )
        .unwrap();
        assert_eq!(verify_lcs_bound_lie(&heis, &[heis_shift], 2, 2), Ok(true));
        // A non-commuting pair of derivations is rejected.
        let heis2 =
            GradedLieAlgebra::quotient_by_relators(2, &[vec![0, 0, 1], vec![1, 1, 0]], 3)
                .unwrap();
        let d1 = Derivation::from_generator_images(
            &heis2,
            &[heis2.generator(1).unwrap(), LieElement::zero()],
        )
        .unwrap();
        let d2 = Derivation::from_generator_images(
            &heis2,
            &[LieElement::zero(), heis2.generator(0).unwrap()],
        )
        .unwrap();
        assert_eq!(
            verify_lcs_bound_lie(&heis2, &[d1, d2], 2, 1),
            Err(AmalgamError::NotCommuting(0, 1))
        );
        // A derivation violating the power precondition: scaling by weights
        // never lands in [h, h].
        let scale = Derivation::from_generator_images(
            &h,
            &[h.generator(0).unwrap(), h.generator(1).unwrap()],
        )
        .unwrap();
        assert!(matches!(
            verify_lcs_bound_lie(&h, &[scale], 2, 2),
            Err(AmalgamError::Precondition(_))
        ));
    }
}
