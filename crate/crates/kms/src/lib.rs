//! Exact computation in Kac–Moody–Steinberg groups, rank-2 Chevalley
//! unipotent groups and truncated Kac–Moody unipotent groups.
//!
//! The crate provides, over the rationals and small finite fields:
//!
//! * validated generalized Cartan matrices, sphericity tests and real-root
//!   enumeration ([`gcm`]);
//! * the four spherical rank-2 unipotent groups with collection to
//!   root-coordinate normal form and closed product formulas ([`rank2`]);
//! * graded nilpotent Lie algebras presented by Serre-type relators, with
//!   dimension counts checkable against the Peterson recursion ([`lie`]);
//! * truncated universal envelopes, exp/log, group-like elements and normal
//!   forms in truncated unipotent groups ([`env`]);
//! * words in Kac–Moody–Steinberg generators: parsing, local rewriting, the
//!   evaluation maps into rank-2 groups and truncated envelopes, and residual
//!   nilpotence verdicts ([`word`]);
//! * free and amalgamated products of unipotent groups with normal-form
//!   reduction and lower-central-series bounds ([`amalgam`]);
//! * opposition/coset graphs of rank-2 groups over finite fields with exact
//!   girth and distance computations ([`graph`]);
//! * the 3×3 polynomial matrix representation of the affine rank-3 group
//!   ([`rep`]).

pub mod amalgam;
pub mod env;
pub mod gcm;
pub mod graph;
pub mod lie;
pub mod linalg;
pub mod poly;
pub mod rank2;
pub mod rep;
pub mod scalar;
pub mod word;
