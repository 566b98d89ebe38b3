//! Command-line front end for the `kms` library: every pipeline as a
//! subcommand with stable text and JSON output.
//!
//! Exit codes: 0 on success or a verified property, 1 on a verification
//! failure, 2 on usage errors (bad flags, unreadable input, words that do
//! not parse).

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use kms::amalgam::{
    affine_edge_spec, r_n_bound, AmalgamSpec, AmalgamWord, Factor, FactorElem,
    AFFINE_EDGE_NODES,
};
use kms::env::UEnv;
use kms::gcm::{named_gcm, Gcm};
use kms::graph::{check_distance_in_link, CosetGraph, GraphError};
use kms::lie::GradedLieAlgebra;
use kms::rank2::Rank2Kind;
use kms::rep::{check_image_invariants, phi_word};
use kms::scalar::{rat, Domain, FiniteField, Gf, Rational, Rationals};
use kms::word::{build_affine_witness, residual_nilpotence_verdict, GroupWord};

#[derive(Parser)]
#[command(
    name = "kms",
    version,
    about = "Exact computations in Kac-Moody-Steinberg and rank-2 unipotent groups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a Cartan matrix and report sphericity and the
    /// residual-nilpotence verdict
    Check {
        /// Path to a JSON file {"matrix": [[2,-1,...],...]}
        #[arg(long)]
        gcm: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Graded dimensions of the quotient Lie algebra up to height N
    LieDims {
        #[arg(long)]
        gcm: PathBuf,
        /// Truncation height, 1..=16
        #[arg(long = "N")]
        n_cap: u64,
        #[arg(long)]
        json: bool,
    },
    /// Multiply a word of generator letters in a rank-2 group and print its
    /// normal-form coordinates
    Mult {
        /// Rank-2 type: A1xA1, A2, B2, G2
        #[arg(long = "type")]
        kind: String,
        /// Coefficient field: Q, F2, F3, F4, F5, F7
        #[arg(long, default_value = "Q")]
        field: String,
        /// Word in simple letters, e.g. "x1(2)x2(1/3)x1(-1)"
        #[arg(long)]
        word: String,
        #[arg(long)]
        json: bool,
    },
    /// Factor a word's truncated image into one-parameter basis factors and
    /// list the exponents
    NormalForm {
        #[arg(long)]
        gcm: PathBuf,
        #[arg(long)]
        word: String,
        /// Truncation height, 1..=16
        #[arg(long = "N")]
        n_cap: u64,
        #[arg(long)]
        json: bool,
    },
    /// Girth (and cycle decomposition when 2-regular) of the coset graph of
    /// a rank-2 unipotent group over a finite field
    Girth {
        #[arg(long = "type")]
        kind: String,
        #[arg(long)]
        field: String,
        #[arg(long)]
        json: bool,
    },
    /// Verify that distinct one-parameter edges through the reflected simple
    /// roots stay at distance at least m+1 in the coset graph
    Distance {
        #[arg(long = "type")]
        kind: String,
        #[arg(long)]
        field: String,
        #[arg(long)]
        json: bool,
    },
    /// Verify the three facets of the distinguished affine-cycle witness
    /// word: trivial polynomial image, trivial truncated embedding, and
    /// syllable length 8 in both the free product and the edge amalgam
    Witness {
        /// Truncation height for the embedding check, 1..=16
        #[arg(long = "N", default_value_t = 10)]
        n_cap: u64,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate the polynomial matrix representation on a rank-3 word
    Rep {
        #[arg(long)]
        word: String,
        #[arg(long)]
        json: bool,
    },
    /// The nilpotency-degree bound r_n for class cap N
    Bound {
        /// Class cap, 1..=16
        #[arg(long = "N")]
        n_cap: u64,
        /// Index of the bound
        #[arg(long)]
        n: u64,
        #[arg(long)]
        json: bool,
    },
    /// Reduce a word of the edge amalgam U_12 *_{U_2} U_23 to its normal
    /// form and report the syllable length
    Reduce {
        /// Word over the rank-3 affine cycle whose letters lie in the node
        /// pairs {1,2} and {2,3}
        #[arg(long)]
        word: String,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<bool, String> {
    match cmd {
        Command::Check { gcm, json } => check(&gcm, json),
        Command::LieDims { gcm, n_cap, json } => lie_dims(&gcm, n_cap, json),
        Command::Mult { kind, field, word, json } => mult(&kind, &field, &word, json),
        Command::NormalForm { gcm, word, n_cap, json } => normal_form(&gcm, &word, n_cap, json),
        Command::Girth { kind, field, json } => girth(&kind, &field, json),
        Command::Distance { kind, field, json } => distance(&kind, &field, json),
        Command::Witness { n_cap, json } => witness(n_cap, json),
        Command::Rep { word, json } => rep(&word, json),
        Command::Bound { n_cap, n, json } => bound(n_cap, n, json),
        Command::Reduce { word, json } => reduce(&word, json),
    }
}

fn load_gcm(path: &PathBuf) -> Result<Result<Gcm, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    Ok(Gcm::from_json(&text).map_err(|e| e.to_string()))
}

fn parse_truncation(n_cap: u64) -> Result<usize, String> {
    if (1..=16).contains(&n_cap) {
        Ok(n_cap as usize)
    } else {
        Err(format!("truncation height {n_cap} outside 1..=16"))
    }
}

fn parse_kind(name: &str) -> Result<Rank2Kind, String> {
    Rank2Kind::parse_name(name).map_err(|e| e.to_string())
}

fn parse_field(name: &str) -> Result<FiniteField, String> {
    FiniteField::parse_name(name)
        .ok_or_else(|| format!("unknown field {name}; use F2, F3, F4, F5 or F7"))
}

fn check(path: &PathBuf, json: bool) -> Result<bool, String> {
    let gcm = match load_gcm(path)? {
        Ok(g) => g,
        Err(reason) => {
            println!("not a valid generalized Cartan matrix: {reason}");
            return Ok(false);
        }
    };
    let yes_no = |b: bool| if b { "yes" } else { "no" };
    let two = gcm.is_r_spherical(2);
    let three = gcm.is_r_spherical(3);
    let verdict = residual_nilpotence_verdict(&gcm).ok();
    if json {
        println!(
            "{}",
            serde_json::json!({
                "rank": gcm.rank(),
                "two_spherical": two,
                "three_spherical": three,
                "residually_nilpotent": verdict,
            })
        );
    } else {
        let v = match verdict {
            Some(true) => "YES",
            Some(false) => "NO",
            None => "not determined (criterion needs a 2-spherical matrix)",
        };
        println!(
            "2-spherical: {}; 3-spherical: {}; residually nilpotent: {v}",
            yes_no(two),
            yes_no(three)
        );
    }
    Ok(true)
}

fn lie_dims(path: &PathBuf, n_cap: u64, json: bool) -> Result<bool, String> {
    let bound = parse_truncation(n_cap)?;
    let gcm = load_gcm(path)?.map_err(|e| format!("invalid matrix: {e}"))?;
    let alg = GradedLieAlgebra::serre_quotient(&gcm, bound);
    let mut dims = vec![0usize; bound];
    for info in alg.basis() {
        dims[info.height - 1] += 1;
    }
    if json {
        println!(
            "{}",
            serde_json::json!({ "dims": dims, "total": alg.dim_total() })
        );
    } else {
        for (h, d) in dims.iter().enumerate() {
            println!("ht={} dim={}", h + 1, d);
        }
        println!("total={}", alg.dim_total());
    }
    Ok(true)
}

/// Parse "x1(a)x2(b)..." with scalars understood by the domain.
fn parse_rank2_letters<D: Domain>(
    dom: &D,
    text: &str,
) -> Result<Vec<(usize, D::Elem)>, String> {
    let bytes = text.as_bytes();
    let mut i = 0usize;
    let mut letters = Vec::new();
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if bytes[i] != b'x' {
            return Err(format!("byte {i}: expected a letter `x1(..)` or `x2(..)`"));
        }
        i += 1;
        let root = match bytes.get(i) {
            Some(b'1') => 0usize,
            Some(b'2') => 1usize,
            _ => return Err(format!("byte {i}: generator index must be 1 or 2")),
        };
        i += 1;
        if bytes.get(i) != Some(&b'(') {
            return Err(format!("byte {i}: expected `(`"));
        }
        i += 1;
        let start = i;
        while i < bytes.len() && bytes[i] != b')' {
            i += 1;
        }
        if i == bytes.len() {
            return Err(format!("byte {start}: unterminated scalar"));
        }
        let scalar = dom
            .parse(text[start..i].trim())
            .map_err(|e| format!("byte {start}: {e}"))?;
        i += 1;
        letters.push((root, scalar));
    }
    Ok(letters)
}

fn mult(kind: &str, field: &str, word: &str, json: bool) -> Result<bool, String> {
    let kind = parse_kind(kind)?;
    if field.trim().eq_ignore_ascii_case("q") {
        mult_in(&Rationals, kind, word, json)
    } else {
        mult_in(&Gf(parse_field(field)?), kind, word, json)
    }
}

fn mult_in<D: Domain>(dom: &D, kind: Rank2Kind, word: &str, json: bool) -> Result<bool, String> {
    let letters = parse_rank2_letters(dom, word)?;
    let product = kind.collect(dom, &letters);
    if json {
        let roots: Vec<String> =
            kind.roots().iter().map(|(p, q)| format!("({p},{q})")).collect();
        let coords: Vec<String> = product.coords().iter().map(|c| c.to_string()).collect();
        println!(
            "{}",
            serde_json::json!({
                "kind": kind.name(),
                "domain": dom.name(),
                "roots": roots,
                "coords": coords,
            })
        );
    } else {
        let parts: Vec<String> = kind
            .roots()
            .iter()
            .zip(product.coords())
            .map(|((p, q), c)| format!("v({p},{q})={c}"))
            .collect();
        println!("{}", parts.join(" "));
    }
    Ok(true)
}

fn normal_form(path: &PathBuf, word: &str, n_cap: u64, json: bool) -> Result<bool, String> {
    let bound = parse_truncation(n_cap)?;
    let gcm = load_gcm(path)?.map_err(|e| format!("invalid matrix: {e}"))?;
    let w = GroupWord::parse(&gcm, word).map_err(|e| e.to_string())?;
    let alg = Arc::new(GradedLieAlgebra::serre_quotient(&gcm, bound));
    let env = UEnv::new(alg.clone(), bound).map_err(|e| e.to_string())?;
    let roots = env.calibrate_root_vectors(&gcm).map_err(|e| e.to_string())?;
    let g = w.embed(&env, &roots).map_err(|e| e.to_string())?;
    let lambdas = env.normal_form(&g).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for (idx, lam) in &lambdas {
        if lam == &Rational::from_integer(0.into()) {
            continue;
        }
        let info = &alg.basis()[*idx as usize];
        rows.push((info.height, info.tree.display(), lam.clone()));
    }
    if json {
        let arr: Vec<serde_json::Value> = rows
            .iter()
            .map(|(h, b, l)| {
                serde_json::json!({ "ht": h, "bracket": b, "lambda": l.to_string() })
            })
            .collect();
        println!("{}", serde_json::Value::Array(arr));
    } else if rows.is_empty() {
        println!("identity");
    } else {
        for (h, b, l) in rows {
            println!("ht={h} bracket={b} lambda={l}");
        }
    }
    Ok(true)
}

fn girth(kind: &str, field: &str, json: bool) -> Result<bool, String> {
    let kind = parse_kind(kind)?;
    let field = parse_field(field)?;
    let graph = CosetGraph::build(kind, field).map_err(|e| e.to_string())?;
    let girth = graph.girth();
    let cycles = graph.cycle_decomposition().ok();
    if json {
        println!(
            "{}",
            serde_json::json!({
                "type": kind.name(),
                "field": field.name(),
                "girth": girth,
                "cycles": cycles,
            })
        );
    } else {
        let g = girth.map_or("inf".to_string(), |g| g.to_string());
        match cycles {
            Some(cs) => {
                let list: Vec<String> = cs.iter().map(usize::to_string).collect();
                println!("girth={g} cycles=[{}]", list.join(","));
            }
            None => println!("girth={g}"),
        }
    }
    Ok(true)
}

fn distance(kind: &str, field: &str, json: bool) -> Result<bool, String> {
    let kind = parse_kind(kind)?;
    let field = parse_field(field)?;
    let ok = match check_distance_in_link(kind, field) {
        Ok(ok) => ok,
        Err(e @ GraphError::NotApplicable) => return Err(e.to_string()),
        Err(e) => return Err(e.to_string()),
    };
    let needed = kind.coxeter_m() + 1;
    if json {
        println!(
            "{}",
            serde_json::json!({
                "type": kind.name(),
                "field": field.name(),
                "min_distance_required": needed,
                "verified": ok,
            })
        );
    } else if ok {
        println!("distance-in-link: verified (every distinct pair at distance >= {needed})");
    } else {
        println!("distance-in-link: FAILED (some pair closer than {needed})");
    }
    Ok(ok)
}

/// The witness in the free product of two lines: w = [a, [a, b]].
fn free_product_syllables() -> Result<usize, String> {
    let spec = AmalgamSpec::new([Factor::Line, Factor::Line], [0, 0])
        .map_err(|e| e.to_string())?;
    let a = vec![(0usize, FactorElem::Line(rat(1)))];
    let b = vec![(1usize, FactorElem::Line(rat(1)))];
    let inner = spec.commutator_letters(&a, &b);
    let outer = spec.commutator_letters(&a, &inner);
    let reduced = spec.free_reduce(&outer).map_err(|e| e.to_string())?;
    Ok(reduced.syllable_length())
}

/// Convert a rank-3 affine-cycle word whose letters lie in the node pairs
/// {1,2} and {2,3} into letters of the edge amalgam.
fn edge_letters(w: &GroupWord) -> Result<Vec<(usize, FactorElem)>, String> {
    let mut out = Vec::new();
    for (md, c) in w.letters() {
        let support: Vec<usize> = (0..3).filter(|&k| md.0[k] != 0).collect();
        let fid = if support.iter().all(|&k| AFFINE_EDGE_NODES[0].contains(&k)) {
            0usize
        } else if support.iter().all(|&k| AFFINE_EDGE_NODES[1].contains(&k)) {
            1usize
        } else {
            return Err(format!(
                "letter at {} lies in neither edge factor (node pairs {{1,2}} and {{2,3}})",
                md.label()
            ));
        };
        let nodes = AFFINE_EDGE_NODES[fid];
        let (p, q) = (md.0[nodes[0]], md.0[nodes[1]]);
        let idx = Rank2Kind::A2
            .roots()
            .iter()
            .position(|&(r, s)| (r as i64, s as i64) == (p, q))
            .ok_or_else(|| format!("letter at {} is not an A2 root", md.label()))?;
        let mut coords = vec![Rational::from_integer(0.into()); Rank2Kind::A2.n_roots()];
        coords[idx] = c.clone();
        out.push((fid, FactorElem::Rank2(coords)));
    }
    Ok(out)
}

fn witness(n_cap: u64, json: bool) -> Result<bool, String> {
    let bound = parse_truncation(n_cap)?;
    let gcm = named_gcm("A2~").expect("catalog");
    let w = build_affine_witness(&gcm);

    let phi_trivial = phi_word(&w).map_err(|e| e.to_string())?.is_identity();

    let alg = Arc::new(GradedLieAlgebra::serre_quotient(&gcm, bound));
    let env = UEnv::new(alg, bound).map_err(|e| e.to_string())?;
    let roots = env.calibrate_root_vectors(&gcm).map_err(|e| e.to_string())?;
    let embed_trivial = env.is_one(&w.embed(&env, &roots).map_err(|e| e.to_string())?);

    let free_len = free_product_syllables()?;

    let spec = affine_edge_spec();
    let reduced = spec
        .amalgam_reduce(&edge_letters(&w)?)
        .map_err(|e| e.to_string())?;
    let edge_len = reduced.syllable_length();

    let ok = phi_trivial && embed_trivial && free_len == 8 && edge_len == 8;
    if json {
        println!(
            "{}",
            serde_json::json!({
                "phi_identity": phi_trivial,
                "embedding_identity_at": bound,
                "embedding_identity": embed_trivial,
                "free_product_syllables": free_len,
                "edge_amalgam_syllables": edge_len,
                "verified": ok,
            })
        );
    } else {
        println!("phi(witness): {}", if phi_trivial { "identity" } else { "NONTRIVIAL" });
        println!(
            "embedding at height {bound}: {}",
            if embed_trivial { "identity" } else { "NONTRIVIAL" }
        );
        println!("free product syllable length: {free_len} (expect 8)");
        println!("edge amalgam syllable length: {edge_len} (expect 8)");
        println!(
            "witness: {}",
            if ok {
                "verified (nontrivial element, trivial nilpotent approximations)"
            } else {
                "FAILED"
            }
        );
    }
    Ok(ok)
}

fn rep(word: &str, json: bool) -> Result<bool, String> {
    let gcm = named_gcm("A2~").expect("catalog");
    let w = GroupWord::parse(&gcm, word).map_err(|e| e.to_string())?;
    let m = phi_word(&w).map_err(|e| e.to_string())?;
    let ok = check_image_invariants(&m);
    if json {
        let rows: Vec<Vec<String>> = (0..3)
            .map(|r| (0..3).map(|c| m.entry(r, c).to_string()).collect())
            .collect();
        println!(
            "{}",
            serde_json::json!({ "matrix": rows, "invariants": ok })
        );
    } else {
        println!("{m}");
        println!("invariants: {}", if ok { "ok" } else { "FAILED" });
    }
    Ok(ok)
}

fn bound(n_cap: u64, n: u64, json: bool) -> Result<bool, String> {
    let cap = parse_truncation(n_cap)? as u64;
    let value = r_n_bound(cap, n);
    if json {
        println!(
            "{}",
            serde_json::json!({ "N": cap, "n": n, "r_n": value })
        );
    } else {
        println!("r_{n}={value}");
    }
    Ok(true)
}

fn render_amalgam_word(word: &AmalgamWord) -> String {
    if word.is_identity() {
        return "identity".to_string();
    }
    let mut parts = Vec::new();
    for (fid, e) in word.letters() {
        let label = if *fid == 0 { "U12" } else { "U23" };
        match e {
            FactorElem::Line(t) => parts.push(format!("{label}({t})")),
            FactorElem::Rank2(cs) => {
                let inner: Vec<String> = cs.iter().map(Rational::to_string).collect();
                parts.push(format!("{label}({})", inner.join(",")));
            }
        }
    }
    let mut text = parts.join(" ");
    if !word.c_tail().eq(&Rational::from_integer(0.into())) {
        if !text.is_empty() {
            text.push(' ');
        }
        text.push_str(&format!("c={}", word.c_tail()));
    }
    text
}

fn reduce(word: &str, json: bool) -> Result<bool, String> {
    let gcm = named_gcm("A2~").expect("catalog");
    let w = GroupWord::parse(&gcm, word).map_err(|e| e.to_string())?;
    let spec = affine_edge_spec();
    let reduced = spec
        .amalgam_reduce(&edge_letters(&w)?)
        .map_err(|e| e.to_string())?;
    if json {
        println!(
            "{}",
            serde_json::json!({
                "syllables": reduced.syllable_length(),
                "normal_form": reduced.to_json(),
            })
        );
    } else {
        println!("syllables={}", reduced.syllable_length());
        println!("normal_form={}", render_amalgam_word(&reduced));
    }
    Ok(true)
}
