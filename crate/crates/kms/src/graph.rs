//! Finite coset graphs Γ(U; U_α, U_β) of rank-2 unipotent groups over small
//! fields.
//!
//! * [`CosetGraph::build`] — the bipartite graph with vertex set
//!   U/U_α ⊔ U/U_β and edge set U, where the edge g joins gU_α and gU_β;
//!   cosets are canonicalized by zeroing the corresponding simple-root
//!   coordinate (a transversal, since simple coordinates are additive).
//! * [`CosetGraph::girth`] — the smallest n ≥ 1 with
//!   1 = x_{i'}(a_1) x_{j'}(a_2) ⋯ (alternating types, all a_r ≠ 0),
//!   found by breadth-first search over (element, last-type) states.
//! * [`CosetGraph::edge_distance`] — the word-length metric on edges: the
//!   distance from h to g is the length of a shortest alternating word
//!   expressing h⁻¹g, equivalently the line-graph distance.
//! * [`CosetGraph::cycle_decomposition`] — cycle lengths of a 2-regular
//!   graph (fields of order 2).
//! * [`check_distance_in_link`] — exhaustive verification that distinct
//!   edges in x_{s_j(α_i)}(K) are mutually at distance ≥ m + 1, for both
//!   orientations of the pair.

use thiserror::Error;

use crate::rank2::{Rank2Elem, Rank2Kind};
use crate::scalar::{Ff, FiniteField, Gf};

const EDGE_GUARD: u128 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum GraphError {
    #[error("graph would have {0} edges, above the {EDGE_GUARD} guard")]
    TooLarge(u128),
    #[error("cycle decomposition requires a 2-regular graph; found degree {0}")]
    NotTwoRegular(usize),
    #[error("the distance proposition concerns pairs with m ∈ {{3,4,6}}, not A1xA1")]
    NotApplicable,
}

/// The coset graph of a rank-2 unipotent group over a finite field. Edges
/// are group elements, encoded by mixed-radix ids over their normal-form
/// coordinates; vertices are canonicalized cosets of the two simple root
/// subgroups.
pub struct CosetGraph {
    kind: Rank2Kind,
    dom: Gf,
    q: usize,
    n_roots: usize,
    elements: Vec<Rank2Elem<Gf>>,
    /// endpoints[e] = (vertex of eU_α, vertex of eU_β)
    endpoints: Vec<(u32, u32)>,
    /// adj[v] = incident edge ids
    adj: Vec<Vec<u32>>,
}

impl CosetGraph {
    pub fn build(kind: Rank2Kind, field: FiniteField) -> Result<CosetGraph, GraphError> {
        let q = field.order();
        let n_roots = kind.n_roots();
        let n_edges = (q as u128).pow(n_roots as u32);
        if n_edges > EDGE_GUARD {
            return Err(GraphError::TooLarge(n_edges));
        }
        let n_edges = n_edges as usize;
        let dom = Gf(field);
        let mut elements = Vec::with_capacity(n_edges);
        for id in 0..n_edges {
            elements.push(decode(kind, field, q, n_roots, id));
        }
        let side = q.pow(n_roots as u32 - 1);
        let mut endpoints = Vec::with_capacity(n_edges);
        let mut adj = vec![Vec::with_capacity(q); 2 * side];
        for (id, g) in elements.iter().enumerate() {
            let mut vs = [0u32; 2];
            for (k, v) in vs.iter_mut().enumerate() {
                // Canonical coset representative: zero the k-th simple-root
                // coordinate by right multiplication.
                let mut letter = vec![dom.0.elements()[0]; n_roots];
                letter[k] = g.coord(k).neg();
                let rep = kind.multiply(
                    &dom,
                    g,
                    &kind.from_coords::<Gf>(letter).expect("coords sized"),
                );
                debug_assert!(rep.coord(k).is_zero());
                let mut idx = 0usize;
                for r in (0..n_roots).rev() {
                    if r == k {
                        continue;
                    }
                    idx = idx * q + rep.coord(r).value() as usize;
                }
                *v = (k * side + idx) as u32;
            }
            endpoints.push((vs[0], vs[1]));
            adj[vs[0] as usize].push(id as u32);
            adj[vs[1] as usize].push(id as u32);
        }
        Ok(CosetGraph { kind, dom, q, n_roots, elements, endpoints, adj })
    }

    pub fn kind(&self) -> Rank2Kind {
        self.kind
    }

    pub fn field(&self) -> FiniteField {
        self.dom.0
    }

    pub fn n_edges(&self) -> usize {
        self.elements.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn element(&self, edge: usize) -> &Rank2Elem<Gf> {
        &self.elements[edge]
    }

    pub fn edge_of(&self, g: &Rank2Elem<Gf>) -> usize {
        let mut id = 0usize;
        for r in (0..self.n_roots).rev() {
            id = id * self.q + g.coord(r).value() as usize;
        }
        id
    }

    /// Girth per the word characterization: breadth-first search over
    /// states (element, last letter type), multiplying by nonzero letters of
    /// the other type, until the identity is expressed by a nonempty word.
    /// `None` when the graph is a forest.
    pub fn girth(&self) -> Option<usize> {
        let nonzero: Vec<Ff> =
            self.dom.0.elements().into_iter().filter(|a| !a.is_zero()).collect();
        let mut seen = vec![false; 2 * self.n_edges()];
        let mut frontier: Vec<(u32, u8)> = Vec::new();
        for k in 0..2usize {
            for a in &nonzero {
                let letter = self.single_letter(k, *a);
                let id = self.edge_of(&letter) as u32;
                if !seen[2 * id as usize + k] {
                    seen[2 * id as usize + k] = true;
                    frontier.push((id, k as u8));
                }
            }
        }
        let mut depth = 1usize;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for (id, last) in &frontier {
                let g = &self.elements[*id as usize];
                let k = 1 - *last as usize;
                for a in &nonzero {
                    let prod = self.kind.multiply(&self.dom, g, &self.single_letter(k, *a));
                    let pid = self.edge_of(&prod);
                    if pid == 0 {
                        return Some(depth + 1);
                    }
                    if !seen[2 * pid + k] {
                        seen[2 * pid + k] = true;
                        next.push((pid as u32, k as u8));
                    }
                }
            }
            frontier = next;
            depth += 1;
        }
        None
    }

    fn single_letter(&self, root: usize, a: Ff) -> Rank2Elem<Gf> {
        let mut coords = vec![self.dom.0.elements()[0]; self.n_roots];
        coords[root] = a;
        self.kind.from_coords::<Gf>(coords).expect("coords sized")
    }

    /// Cycle lengths (edge counts per component) of a 2-regular graph,
    /// sorted ascending.
    pub fn cycle_decomposition(&self) -> Result<Vec<usize>, GraphError> {
        for v in 0..self.n_vertices() {
            if self.degree(v) != 2 {
                return Err(GraphError::NotTwoRegular(self.degree(v)));
            }
        }
        let mut seen = vec![false; self.n_vertices()];
        let mut lengths = Vec::new();
        for start in 0..self.n_vertices() {
            if seen[start] {
                continue;
            }
            let mut size = 0usize;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                size += 1;
                for &e in &self.adj[v] {
                    let (a, b) = self.endpoints[e as usize];
                    for w in [a as usize, b as usize] {
                        if !seen[w] {
                            seen[w] = true;
                            stack.push(w);
                        }
                    }
                }
            }
            // A connected 2-regular graph is a cycle with as many edges as
            // vertices.
            lengths.push(size);
        }
        lengths.sort_unstable();
        Ok(lengths)
    }

    /// Distance between two edges in the word metric (= line-graph
    /// distance); `None` when they lie in different components.
    pub fn edge_distance(&self, g: usize, h: usize) -> Option<usize> {
        if g == h {
            return Some(0);
        }
        let mut dist = vec![usize::MAX; self.n_edges()];
        dist[g] = 0;
        let mut queue = std::collections::VecDeque::from([g]);
        while let Some(e) = queue.pop_front() {
            let d = dist[e];
            let (a, b) = self.endpoints[e];
            for v in [a as usize, b as usize] {
                for &f in &self.adj[v] {
                    let f = f as usize;
                    if dist[f] == usize::MAX {
                        dist[f] = d + 1;
                        if f == h {
                            return Some(d + 1);
                        }
                        queue.push_back(f);
                    }
                }
            }
        }
        None
    }

    /// Plain-text export: a commented vertex legend followed by one `u v`
    /// line per edge.
    pub fn export_edge_list(&self) -> String {
        let mut out = String::new();
        let side = self.n_vertices() / 2;
        for v in 0..self.n_vertices() {
            let (k, idx) = (v / side, v % side);
            out.push_str(&format!(
                "# vertex {v}: coset of U_{} with transversal index {idx}\n",
                if k == 0 { "alpha" } else { "beta" }
            ));
        }
        for (a, b) in &self.endpoints {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }
}

fn decode(
    kind: Rank2Kind,
    field: FiniteField,
    q: usize,
    n_roots: usize,
    mut id: usize,
) -> Rank2Elem<Gf> {
    let elems = field.elements();
    let mut coords = Vec::with_capacity(n_roots);
    for _ in 0..n_roots {
        coords.push(elems[id % q]);
        id /= q;
    }
    kind.from_coords::<Gf>(coords).expect("coords sized")
}

/// The root s_j(α_i) = α_i − a_ji·α_j for the orientation (i, j) of the
/// pair, as (r, s) coefficients over (α, β).
fn reflected_simple_root(kind: Rank2Kind, orientation: usize) -> (u8, u8) {
    let a = kind.cartan();
    if orientation == 0 {
        // s_β(α) = α − a_βα β.
        (1, (-a[1][0]) as u8)
    } else {
        // s_α(β) = β − a_αβ α.
        ((-a[0][1]) as u8, 1)
    }
}

/// Exhaustively verify that any two distinct edges of x_θ(K), θ = s_j(α_i),
/// are at distance ≥ m + 1, for both orientations of the pair.
pub fn check_distance_in_link(
    kind: Rank2Kind,
    field: FiniteField,
) -> Result<bool, GraphError> {
    if kind == Rank2Kind::A1xA1 {
        return Err(GraphError::NotApplicable);
    }
    let graph = CosetGraph::build(kind, field)?;
    let m = kind.coxeter_m();
    for orientation in 0..2 {
        let theta = reflected_simple_root(kind, orientation);
        let root = kind
            .roots()
            .iter()
            .position(|&r| r == theta)
            .expect("reflected simple root is a positive root");
        let edges: Vec<usize> = field
            .elements()
            .into_iter()
            .map(|a| graph.edge_of(&graph.single_letter(root, a)))
            .collect();
        for (i, &g) in edges.iter().enumerate() {
            for &h in &edges[i + 1..] {
                // Edges in different components are at infinite distance,
                // which satisfies the bound.
                if let Some(d) = graph.edge_distance(g, h) {
                    if d < m + 1 {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{Domain, Rationals};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sizes_and_regularity() {
        for (kind, field) in [
            (Rank2Kind::A2, FiniteField::F2),
            (Rank2Kind::A2, FiniteField::F5),
            (Rank2Kind::B2, FiniteField::F3),
            (Rank2Kind::G2, FiniteField::F2),
            (Rank2Kind::A1xA1, FiniteField::F7),
        ] {
            let g = CosetGraph::build(kind, field).unwrap();
            let q = field.order();
            assert_eq!(g.n_edges(), q.pow(kind.n_roots() as u32));
            assert_eq!(g.n_vertices(), 2 * q.pow(kind.n_roots() as u32 - 1));
            for v in 0..g.n_vertices() {
                assert_eq!(g.degree(v), q);
            }
            // Edge ids round-trip through elements.
            for e in [0, g.n_edges() / 2, g.n_edges() - 1] {
                assert_eq!(g.edge_of(g.element(e)), e);
            }
        }
    }

    #[test]
    fn girth_values_on_small_fields() {
        let cases = [
            (Rank2Kind::A2, FiniteField::F2, 8),
            (Rank2Kind::A2, FiniteField::F3, 6),
            (Rank2Kind::B2, FiniteField::F2, 8),
            (Rank2Kind::A1xA1, FiniteField::F2, 4),
            (Rank2Kind::A1xA1, FiniteField::F5, 4),
        ];
        for (kind, field, expected) in cases {
            let g = CosetGraph::build(kind, field).unwrap();
            assert_eq!(g.girth(), Some(expected), "{} over {}", kind.name(), field.name());
        }
    }

    #[test]
    fn cycle_decompositions_over_f2() {
        let a2 = CosetGraph::build(Rank2Kind::A2, FiniteField::F2).unwrap();
        assert_eq!(a2.cycle_decomposition().unwrap(), vec![8]);
        let b2 = CosetGraph::build(Rank2Kind::B2, FiniteField::F2).unwrap();
        assert_eq!(b2.cycle_decomposition().unwrap(), vec![8, 8]);
        let g2 = CosetGraph::build(Rank2Kind::G2, FiniteField::F2).unwrap();
        assert_eq!(g2.cycle_decomposition().unwrap(), vec![16, 16, 16, 16]);
        let a2f3 = CosetGraph::build(Rank2Kind::A2, FiniteField::F3).unwrap();
        assert_eq!(a2f3.cycle_decomposition(), Err(GraphError::NotTwoRegular(3)));
    }

    #[test]
    fn edge_distance_is_the_word_metric() {
        let g = CosetGraph::build(Rank2Kind::B2, FiniteField::F3).unwrap();
        // d(e, e) = 0; adjacent edges at distance 1.
        assert_eq!(g.edge_distance(5, 5), Some(0));
        let one = Ff::new(FiniteField::F3, 1);
        let xa = g.edge_of(&g.single_letter(0, one));
        assert_eq!(g.edge_distance(0, xa), Some(1));
        // x_α(1)x_β(1) needs two letters.
        let prod = g.kind().multiply(&Gf(FiniteField::F3), &g.single_letter(0, one), &g.single_letter(1, one));
        assert_eq!(g.edge_distance(0, g.edge_of(&prod)), Some(2));
        // Symmetry on a few random pairs, and left-invariance of the metric:
        // d(g, h) = d(1, g⁻¹h).
        let dom = Gf(FiniteField::F3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..12 {
            let a = rng.gen_range(0..g.n_edges());
            let b = rng.gen_range(0..g.n_edges());
            assert_eq!(g.edge_distance(a, b), g.edge_distance(b, a));
            let quot = g
                .kind()
                .multiply(&dom, &g.kind().inverse(&dom, g.element(a)), g.element(b));
            assert_eq!(g.edge_distance(a, b), g.edge_distance(0, g.edge_of(&quot)));
        }
    }

    #[test]
    fn distance_in_link_spot_checks() {
        assert_eq!(check_distance_in_link(Rank2Kind::A2, FiniteField::F3), Ok(true));
        assert_eq!(check_distance_in_link(Rank2Kind::B2, FiniteField::F2), Ok(true));
        assert_eq!(check_distance_in_link(Rank2Kind::G2, FiniteField::F2), Ok(true));
        assert_eq!(
            check_distance_in_link(Rank2Kind::A1xA1, FiniteField::F2),
            Err(GraphError::NotApplicable)
        );
    }

    /// The explicit shortest-cycle identities behind the girth values,
    /// checked in the coordinate groups over every small field and over Q.
    #[test]
    fn girth_cycle_identities() {
        let fields =
            [FiniteField::F2, FiniteField::F3, FiniteField::F4, FiniteField::F5, FiniteField::F7];
        for field in fields {
            let dom = Gf(field);
            for a in field.elements() {
                for b in field.elements() {
                    check_cycle_identities(&dom, a, b);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let a = crate::scalar::rat(rng.gen_range(-6i64..=6));
            let b = crate::scalar::rat(rng.gen_range(-6i64..=6));
            check_cycle_identities(&Rationals, a, b);
        }
        // Over GF(4) with y² = y + 1, a genuine 12-cycle through the base
        // edge of the G2 graph. This cycle enters the long-root subgroup
        // first (the identity is orientation-sensitive and fails with the
        // roles of the two simple roots exchanged).
        let f4 = FiniteField::F4;
        let dom = Gf(f4);
        let y = Ff::new(f4, 2);
        let y1 = Ff::new(f4, 3);
        let one = Ff::new(f4, 1);
        assert_eq!(y.mul(y), y1);
        let lhs = Rank2Kind::G2.collect(
            &dom,
            &[(1, one), (0, one), (1, y1), (0, one), (1, y), (0, one)],
        );
        let rhs = Rank2Kind::G2.collect(
            &dom,
            &[(0, one), (1, y), (0, one), (1, y1), (0, one), (1, one)],
        );
        assert_eq!(lhs.coords(), rhs.coords());
    }

    fn check_cycle_identities<D: Domain>(dom: &D, a: D::Elem, b: D::Elem) {
        // A2: x_α(a) x_β(b) x_α(b−a) = x_β(b−a) x_α(b) x_β(a).
        let d = dom.sub(&b, &a);
        let lhs = Rank2Kind::A2.collect(dom, &[(0, a.clone()), (1, b.clone()), (0, d.clone())]);
        let rhs = Rank2Kind::A2.collect(dom, &[(1, d), (0, b.clone()), (1, a.clone())]);
        assert_eq!(lhs.coords(), rhs.coords());
        // B2: x_α(a) x_β(b) x_α(−a) x_β(b) = x_β(b) x_α(a) x_β(b) x_α(−a).
        let na = dom.neg(&a);
        let lhs = Rank2Kind::B2.collect(
            dom,
            &[(0, a.clone()), (1, b.clone()), (0, na.clone()), (1, b.clone())],
        );
        let rhs = Rank2Kind::B2.collect(
            dom,
            &[(1, b.clone()), (0, a.clone()), (1, b.clone()), (0, na.clone())],
        );
        assert_eq!(lhs.coords(), rhs.coords());
        // G2: x_α(a) x_β(b³) x_α(−a−b) x_β(a³) x_α(b) x_β(−a³−b³)
        //   = x_β(−a³−b³) x_α(a) x_β(b³) x_α(−a−b) x_β(a³) x_α(b).
        let a3 = dom.pow(&a, 3);
        let b3 = dom.pow(&b, 3);
        let nab = dom.neg(&dom.add(&a, &b));
        let nab3 = dom.neg(&dom.add(&a3, &b3));
        let lhs = Rank2Kind::G2.collect(
            dom,
            &[
                (0, a.clone()),
                (1, b3.clone()),
                (0, nab.clone()),
                (1, a3.clone()),
                (0, b.clone()),
                (1, nab3.clone()),
            ],
        );
        let rhs = Rank2Kind::G2.collect(
            dom,
            &[(1, nab3), (0, a), (1, b3), (0, nab), (1, a3), (0, b)],
        );
        assert_eq!(lhs.coords(), rhs.coords());
    }

    #[test]
    fn export_lists_every_edge() {
        let g = CosetGraph::build(Rank2Kind::A2, FiniteField::F2).unwrap();
        let text = g.export_edge_list();
        let edges: Vec<&str> =
            text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(edges.len(), g.n_edges());
        let legend = text.lines().filter(|l| l.starts_with('#')).count();
        assert_eq!(legend, g.n_vertices());
    }
}
