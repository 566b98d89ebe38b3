//! The four spherical rank-2 unipotent groups in root-coordinate normal form.
//!
//! Elements of type A1×A1, A2, B2, G2 are written uniquely as ordered products
//! x_γ1(a_1)···x_γk(a_k) over the fixed positive-root enumeration (with α the
//! short simple root for B2 and G2):
//!
//! * A1×A1: α, β
//! * A2:    α, β, α+β
//! * B2:    α, β, α+β, 2α+β
//! * G2:    α, β, α+β, 2α+β, 3α+β, 3α+2β
//!
//! Key items:
//! * [`Rank2Kind`] — the type, its roots, heights and 2×2 Cartan data.
//! * [`Rank2Elem`] — coordinate tuple over a [`Domain`]; [`Rank2Kind::multiply`]
//!   collects concatenations back into normal form using the frozen swap tables.
//! * [`Rank2Kind::closed_form_product`] — the closed forms A_n, B_n, R_n, S_n,
//!   T_n, U_n for alternating products Π x_β(b_i)x_α(a_i), an independent check
//!   of the collection engine.
//! * [`Rank2Kind::pi_lambda`] — the height-scaling endomorphism x_γ(a) ↦ x_γ(λ^{ht γ} a).
//!
//! The swap tables were solved once and for all from the requirement that
//! collection reproduces the closed forms symbolically (the solution is unique),
//! and are locked by regression tests.

use std::fmt;

use thiserror::Error;

use crate::scalar::Domain;

/// The four spherical rank-2 types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rank2Kind {
    A1xA1,
    A2,
    B2,
    G2,
}

/// One correction factor of a swap rule: when x_hi(b) x_lo(a) is reordered to
/// x_lo(a) x_hi(b) · Π x_γ(c · b^r · a^s), this records (γ, r, s, c).
#[derive(Debug, Clone, Copy)]
pub struct SwapTerm {
    pub gamma: u8,
    pub r: u8,
    pub s: u8,
    pub c: i64,
}

/// Swap rule for the ordered root pair (hi, lo) with hi > lo.
#[derive(Debug, Clone, Copy)]
pub struct SwapRule {
    pub hi: u8,
    pub lo: u8,
    pub terms: &'static [SwapTerm],
}

const fn st(gamma: u8, r: u8, s: u8, c: i64) -> SwapTerm {
    SwapTerm { gamma, r, s, c }
}

// Roots indexed as in the module docs: 0 = α, 1 = β, then increasing height.
const ROOTS_A1XA1: [(u8, u8); 2] = [(1, 0), (0, 1)];
const ROOTS_A2: [(u8, u8); 3] = [(1, 0), (0, 1), (1, 1)];
const ROOTS_B2: [(u8, u8); 4] = [(1, 0), (0, 1), (1, 1), (2, 1)];
const ROOTS_G2: [(u8, u8); 6] = [(1, 0), (0, 1), (1, 1), (2, 1), (3, 1), (3, 2)];

const SWAPS_A2: [SwapRule; 1] = [SwapRule { hi: 1, lo: 0, terms: &[st(2, 1, 1, 1)] }];

const SWAPS_B2: [SwapRule; 2] = [
    SwapRule { hi: 1, lo: 0, terms: &[st(2, 1, 1, 1), st(3, 1, 2, 1)] },
    SwapRule { hi: 2, lo: 0, terms: &[st(3, 1, 1, 2)] },
];

const SWAPS_G2: [SwapRule; 5] = [
    SwapRule {
        hi: 1,
        lo: 0,
        terms: &[st(2, 1, 1, 1), st(3, 1, 2, 1), st(4, 1, 3, 1), st(5, 2, 3, 1)],
    },
    SwapRule { hi: 2, lo: 0, terms: &[st(3, 1, 1, 2), st(4, 1, 2, 3), st(5, 2, 1, 3)] },
    SwapRule { hi: 3, lo: 0, terms: &[st(4, 1, 1, 3)] },
    SwapRule { hi: 3, lo: 2, terms: &[st(5, 1, 1, 3)] },
    SwapRule { hi: 4, lo: 1, terms: &[st(5, 1, 1, -1)] },
];

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum Rank2Error {
    #[error("index {0} is not a positive root of this rank-2 type")]
    NotARoot(usize),
    #[error("coordinate tuple has length {got}, expected {want}")]
    CoordinateLength { got: usize, want: usize },
    #[error("unknown rank-2 type `{0}`")]
    UnknownKind(String),
}

impl Rank2Kind {
    pub fn parse_name(s: &str) -> Result<Rank2Kind, Rank2Error> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A1XA1" | "A1A1" | "A1*A1" => Ok(Rank2Kind::A1xA1),
            "A2" => Ok(Rank2Kind::A2),
            "B2" | "C2" => Ok(Rank2Kind::B2),
            "G2" => Ok(Rank2Kind::G2),
            other => Err(Rank2Error::UnknownKind(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rank2Kind::A1xA1 => "A1xA1",
            Rank2Kind::A2 => "A2",
            Rank2Kind::B2 => "B2",
            Rank2Kind::G2 => "G2",
        }
    }

    /// Positive roots as coefficient pairs (r, s) meaning rα + sβ, in the
    /// normal-form order.
    pub fn roots(self) -> &'static [(u8, u8)] {
        match self {
            Rank2Kind::A1xA1 => &ROOTS_A1XA1,
            Rank2Kind::A2 => &ROOTS_A2,
            Rank2Kind::B2 => &ROOTS_B2,
            Rank2Kind::G2 => &ROOTS_G2,
        }
    }

    pub fn n_roots(self) -> usize {
        self.roots().len()
    }

    pub fn root_height(self, idx: usize) -> usize {
        let (r, s) = self.roots()[idx];
        (r + s) as usize
    }

    /// Human-readable root label, e.g. `3a+2b` for 3α+2β.
    pub fn root_label(self, idx: usize) -> String {
        let (r, s) = self.roots()[idx];
        let part = |coef: u8, name: &str| match coef {
            0 => String::new(),
            1 => name.to_string(),
            c => format!("{c}{name}"),
        };
        match (r, s) {
            (r, 0) => part(r, "a"),
            (0, s) => part(s, "b"),
            (r, s) => format!("{}+{}", part(r, "a"), part(s, "b")),
        }
    }

    /// The 2×2 generalized Cartan matrix with α (index 0) short.
    pub fn cartan(self) -> [[i64; 2]; 2] {
        match self {
            Rank2Kind::A1xA1 => [[2, 0], [0, 2]],
            Rank2Kind::A2 => [[2, -1], [-1, 2]],
            Rank2Kind::B2 => [[2, -2], [-1, 2]],
            Rank2Kind::G2 => [[2, -3], [-1, 2]],
        }
    }

    /// Coxeter number m of the pair: the dihedral order of the edge.
    pub fn coxeter_m(self) -> usize {
        match self {
            Rank2Kind::A1xA1 => 2,
            Rank2Kind::A2 => 3,
            Rank2Kind::B2 => 4,
            Rank2Kind::G2 => 6,
        }
    }

    fn swaps(self) -> &'static [SwapRule] {
        match self {
            Rank2Kind::A1xA1 => &[],
            Rank2Kind::A2 => &SWAPS_A2,
            Rank2Kind::B2 => &SWAPS_B2,
            Rank2Kind::G2 => &SWAPS_G2,
        }
    }

    fn swap_rule(self, hi: u8, lo: u8) -> Option<&'static SwapRule> {
        self.swaps().iter().find(|r| r.hi == hi && r.lo == lo)
    }

    pub fn identity<D: Domain>(self, dom: &D) -> Rank2Elem<D> {
        Rank2Elem { kind: self, coords: vec![dom.zero(); self.n_roots()] }
    }

    /// The one-letter element x_γ(a).
    pub fn generator<D: Domain>(self, dom: &D, root: usize, a: D::Elem) -> Result<Rank2Elem<D>, Rank2Error> {
        if root >= self.n_roots() {
            return Err(Rank2Error::NotARoot(root));
        }
        let mut g = self.identity(dom);
        g.coords[root] = a;
        Ok(g)
    }

    pub fn from_coords<D: Domain>(self, coords: Vec<D::Elem>) -> Result<Rank2Elem<D>, Rank2Error> {
        if coords.len() != self.n_roots() {
            return Err(Rank2Error::CoordinateLength { got: coords.len(), want: self.n_roots() });
        }
        Ok(Rank2Elem { kind: self, coords })
    }

    /// Collect an arbitrary word of root letters into normal form.
    ///
    /// Adjacent out-of-order letters are swapped with the table corrections and
    /// adjacent equal-root letters merged until the word is sorted; the result
    /// is the coordinate tuple of the product.
    pub fn collect<D: Domain>(self, dom: &D, word: &[(usize, D::Elem)]) -> Rank2Elem<D> {
        let mut w: Vec<(u8, D::Elem)> = word
            .iter()
            .filter(|(_, a)| !dom.is_zero(a))
            .map(|(r, a)| {
                assert!(*r < self.n_roots(), "letter root out of range");
                (*r as u8, a.clone())
            })
            .collect();
        let mut i = 0usize;
        while i + 1 < w.len() {
            let (r1, r2) = (w[i].0, w[i + 1].0);
            if r1 == r2 {
                let sum = dom.add(&w[i].1, &w[i + 1].1);
                w.remove(i + 1);
                if dom.is_zero(&sum) {
                    w.remove(i);
                } else {
                    w[i].1 = sum;
                }
                i = i.saturating_sub(1);
            } else if r1 > r2 {
                let (b, a) = (w[i].1.clone(), w[i + 1].1.clone());
                w[i] = (r2, a.clone());
                w[i + 1] = (r1, b.clone());
                if let Some(rule) = self.swap_rule(r1, r2) {
                    let mut at = i + 2;
                    for t in rule.terms {
                        let coef = dom.mul(
                            &dom.from_int(t.c),
                            &dom.mul(&dom.pow(&b, t.r as u32), &dom.pow(&a, t.s as u32)),
                        );
                        if !dom.is_zero(&coef) {
                            w.insert(at, (t.gamma, coef));
                            at += 1;
                        }
                    }
                }
                i = i.saturating_sub(1);
            } else {
                i += 1;
            }
        }
        let mut coords = vec![dom.zero(); self.n_roots()];
        for (r, a) in w {
            coords[r as usize] = a;
        }
        Rank2Elem { kind: self, coords }
    }

    pub fn multiply<D: Domain>(self, dom: &D, g: &Rank2Elem<D>, h: &Rank2Elem<D>) -> Rank2Elem<D> {
        assert_eq!(g.kind, self);
        assert_eq!(h.kind, self);
        let word: Vec<(usize, D::Elem)> = g.letters().into_iter().chain(h.letters()).collect();
        self.collect(dom, &word)
    }

    pub fn inverse<D: Domain>(self, dom: &D, g: &Rank2Elem<D>) -> Rank2Elem<D> {
        assert_eq!(g.kind, self);
        let word: Vec<(usize, D::Elem)> =
            g.letters().into_iter().rev().map(|(r, a)| (r, dom.neg(&a))).collect();
        self.collect(dom, &word)
    }

    /// Group commutator g⁻¹h⁻¹gh.
    pub fn commutator<D: Domain>(self, dom: &D, g: &Rank2Elem<D>, h: &Rank2Elem<D>) -> Rank2Elem<D> {
        let gi = self.inverse(dom, g);
        let hi = self.inverse(dom, h);
        self.multiply(dom, &self.multiply(dom, &gi, &hi), &self.multiply(dom, g, h))
    }

    /// Normal form of X_n = x_β(b_n) x_α(a_n) ··· x_β(b_1) x_α(a_1) by the
    /// closed summation formulas (independent of the collection engine).
    ///
    /// `pairs[i] = (a_{i+1}, b_{i+1})`, i.e. pairs are listed from the right.
    pub fn closed_form_product<D: Domain>(self, dom: &D, pairs: &[(D::Elem, D::Elem)]) -> Rank2Elem<D> {
        let n = pairs.len();
        let mut cap_a = Vec::with_capacity(n); // A_i = a_1 + ... + a_i
        let mut cap_b = Vec::with_capacity(n);
        let mut acc = dom.zero();
        for (a, _) in pairs {
            acc = dom.add(&acc, a);
            cap_a.push(acc.clone());
        }
        acc = dom.zero();
        for (_, b) in pairs {
            acc = dom.add(&acc, b);
            cap_b.push(acc.clone());
        }
        let sum = |f: &dyn Fn(usize) -> D::Elem| {
            let mut s = dom.zero();
            for i in 0..n {
                s = dom.add(&s, &f(i));
            }
            s
        };
        let b = |i: usize| pairs[i].1.clone();
        let a_pow = |i: usize, k: u32| dom.pow(&cap_a[i], k);
        let r_partial = |upto: usize| {
            // R_upto with R_0 = 0
            let mut s = dom.zero();
            for i in 0..upto {
                s = dom.add(&s, &dom.mul(&b(i), &cap_a[i]));
            }
            s
        };
        let coords: Vec<D::Elem> = match self {
            Rank2Kind::A1xA1 => vec![
                cap_a.last().cloned().unwrap_or_else(|| dom.zero()),
                cap_b.last().cloned().unwrap_or_else(|| dom.zero()),
            ],
            Rank2Kind::A2 | Rank2Kind::B2 | Rank2Kind::G2 => {
                let a_n = cap_a.last().cloned().unwrap_or_else(|| dom.zero());
                let b_n = cap_b.last().cloned().unwrap_or_else(|| dom.zero());
                let r_n = sum(&|i| dom.mul(&b(i), &a_pow(i, 1)));
                let mut v = vec![a_n, b_n, r_n];
                if self != Rank2Kind::A2 {
                    v.push(sum(&|i| dom.mul(&b(i), &a_pow(i, 2))));
                }
                if self == Rank2Kind::G2 {
                    v.push(sum(&|i| dom.mul(&b(i), &a_pow(i, 3))));
                    let u1 = sum(&|i| dom.mul(&dom.mul(&b(i), &b(i)), &a_pow(i, 3)));
                    let u2 = sum(&|i| {
                        let bprev = if i == 0 { dom.zero() } else { cap_b[i - 1].clone() };
                        dom.mul(&dom.mul(&b(i), &a_pow(i, 3)), &bprev)
                    });
                    let u3 = sum(&|i| dom.mul(&dom.mul(&b(i), &a_pow(i, 2)), &r_partial(i)));
                    v.push(dom.add(
                        &dom.sub(&u1, &u2),
                        &dom.mul(&dom.from_int(3), &u3),
                    ));
                }
                v
            }
        };
        Rank2Elem { kind: self, coords }
    }

    /// Multiply out the same alternating word letter by letter (collection).
    pub fn alternating_word_product<D: Domain>(
        self,
        dom: &D,
        pairs: &[(D::Elem, D::Elem)],
    ) -> Rank2Elem<D> {
        let mut word: Vec<(usize, D::Elem)> = Vec::new();
        for (a, b) in pairs.iter().rev() {
            word.push((1, b.clone()));
            word.push((0, a.clone()));
        }
        self.collect(dom, &word)
    }

    /// The height-scaling endomorphism x_γ(a) ↦ x_γ(λ^{ht γ} a).
    pub fn pi_lambda<D: Domain>(self, dom: &D, g: &Rank2Elem<D>, lambda: &D::Elem) -> Rank2Elem<D> {
        assert_eq!(g.kind, self);
        let coords = g
            .coords
            .iter()
            .enumerate()
            .map(|(i, a)| dom.mul(&dom.pow(lambda, self.root_height(i) as u32), a))
            .collect();
        Rank2Elem { kind: self, coords }
    }
}

/// A rank-2 group element in root-coordinate normal form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rank2Elem<D: Domain> {
    kind: Rank2Kind,
    coords: Vec<D::Elem>,
}

impl<D: Domain> Rank2Elem<D> {
    pub fn kind(&self) -> Rank2Kind {
        self.kind
    }

    pub fn coords(&self) -> &[D::Elem] {
        &self.coords
    }

    pub fn coord(&self, root: usize) -> &D::Elem {
        &self.coords[root]
    }

    pub fn set_coord(&mut self, root: usize, a: D::Elem) {
        self.coords[root] = a;
    }

    /// Letters in normal-form order (zero coordinates included; collection
    /// drops them).
    pub fn letters(&self) -> Vec<(usize, D::Elem)> {
        self.coords.iter().enumerate().map(|(r, a)| (r, a.clone())).collect()
    }

    pub fn is_identity(&self, dom: &D) -> bool {
        self.coords.iter().all(|a| dom.is_zero(a))
    }

    pub fn display(&self, dom: &D) -> String {
        let parts: Vec<String> = self
            .coords
            .iter()
            .enumerate()
            .filter(|(_, a)| !dom.is_zero(a))
            .map(|(r, a)| format!("x[{}]({})", self.kind.root_label(r), a))
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join(" ")
        }
    }
}

impl<D: Domain> fmt::Display for Rank2Elem<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .coords
            .iter()
            .enumerate()
            .map(|(r, a)| format!("x[{}]({})", self.kind.root_label(r), a))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}
