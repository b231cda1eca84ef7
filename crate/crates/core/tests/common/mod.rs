//! Fixture loading and random corpora shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use numfix::io::{load_instance, read_text};
use numfix::lang::{parse_constraints, parse_query, parse_schema, ConjunctiveQuery, Constraint, Query};
use numfix::{Instance, Schema, Tuple, Value};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub struct Fixture {
    pub schema: Arc<Schema>,
    pub d: Instance,
    pub ics: Vec<Constraint>,
}

/// Loads `fixtures/<name>` with the constraint file `ic_file` (if present).
pub fn fixture_with(name: &str, ic_file: &str) -> Fixture {
    let dir = fixture_dir(name);
    let schema = Arc::new(parse_schema(&read_text(&dir.join("schema.txt")).unwrap()).unwrap());
    let ic_path = dir.join(ic_file);
    let ics = if ic_path.exists() {
        parse_constraints(&read_text(&ic_path).unwrap(), &schema).unwrap()
    } else {
        Vec::new()
    };
    let d = load_instance(schema.clone(), &dir.join("data")).unwrap();
    Fixture { schema, d, ics }
}

pub fn fixture(name: &str) -> Fixture {
    fixture_with(name, "ic.txt")
}

pub fn fixture_query(name: &str, file: &str, schema: &Schema) -> Query {
    parse_query(&read_text(&fixture_dir(name).join(file)).unwrap(), schema).unwrap()
}

/// Fixes as a set of canonical tuple lists, for order-free comparison.
pub fn canon(fixes: &[Instance]) -> BTreeSet<Vec<Tuple>> {
    fixes.iter().map(|f| f.canonical()).collect()
}

/// A random instance with its constraints and the texts they came from.
pub struct Case {
    pub schema_text: String,
    pub ic_text: String,
    pub d: Instance,
    pub ics: Vec<Constraint>,
}

impl Case {
    fn build(schema_text: String, ic_text: String, rows: Vec<Tuple>) -> Case {
        let schema = Arc::new(parse_schema(&schema_text).unwrap());
        let ics = parse_constraints(&ic_text, &schema).unwrap_or_else(|e| panic!("{e}\n{ic_text}"));
        let d = Instance::from_tuples(schema, rows).unwrap();
        Case {
            schema_text,
            ic_text,
            d,
            ics,
        }
    }

    pub fn query(&self, text: &str) -> Query {
        parse_query(text, self.d.schema()).unwrap_or_else(|e| panic!("{e}\n{text}"))
    }

    pub fn conjunctive(&self, text: &str) -> ConjunctiveQuery {
        self.query(text).conjunctive().clone()
    }
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}", self.schema_text)?;
        writeln!(f, "{}", self.ic_text)?;
        write!(f, "{}", self.d)
    }
}

const WEIGHTS: [&str; 3] = ["1", "2", "1/2"];

fn ops_for(rng: &mut StdRng, lower: bool) -> &'static str {
    if lower {
        ["<", "<="].choose(rng).unwrap()
    } else {
        [">", ">="].choose(rng).unwrap()
    }
}

fn distinct_keys(rng: &mut StdRng, n: usize, lo: i64, hi: i64) -> Vec<i64> {
    let mut all: Vec<i64> = (lo..=hi).collect();
    all.shuffle(rng);
    all.truncate(n);
    all.sort();
    all
}

/// Local denials over `R(k key, a fix, b fix, c)` and `S(k key, d fix, e)`:
/// joins only through rigid positions, every denial compares a fixable
/// attribute with a constant, and each fixable attribute is bounded from
/// one side only. At most six tuples, values in [-8, 8].
pub fn local_case(rng: &mut StdRng) -> Case {
    let schema_text = format!(
        "relation R(k: int key, a: int fix, b: int fix weight {}, c: int)\n\
         relation S(k: int key, d: int fix weight {}, e: int)",
        WEIGHTS.choose(rng).unwrap(),
        WEIGHTS.choose(rng).unwrap()
    );
    // `true`: the attribute is bounded from below (fixes raise it).
    let lower: [bool; 3] = [rng.gen(), rng.gen(), rng.gen()];
    let c = |rng: &mut StdRng| rng.gen_range(-8..=8i64);
    let n_ics = rng.gen_range(1..=3);
    let mut lines = Vec::new();
    for i in 0..n_ics {
        let shape = rng.gen_range(0..4);
        let mut cmps: Vec<String> = Vec::new();
        let atoms = match shape {
            0 => {
                let pick = rng.gen_range(0..3);
                if pick != 1 {
                    cmps.push(format!("a {} {}", ops_for(rng, lower[0]), c(rng)));
                }
                if pick != 0 {
                    cmps.push(format!("b {} {}", ops_for(rng, lower[1]), c(rng)));
                }
                if rng.gen_bool(0.3) {
                    cmps.push(format!("y {} {}", ["=", "!=", "<", ">"].choose(rng).unwrap(), rng.gen_range(0..=3)));
                }
                "R(x, a, b, y)".to_string()
            }
            1 => {
                cmps.push(format!("d {} {}", ops_for(rng, lower[2]), c(rng)));
                if rng.gen_bool(0.3) {
                    cmps.push(format!("e {} {}", ["=", "!=", "<", ">"].choose(rng).unwrap(), c(rng)));
                }
                "S(x, d, e)".to_string()
            }
            2 => {
                if rng.gen_bool(0.7) {
                    cmps.push(format!("a {} {}", ops_for(rng, lower[0]), c(rng)));
                }
                if cmps.is_empty() || rng.gen_bool(0.5) {
                    cmps.push(format!("d {} {}", ops_for(rng, lower[2]), c(rng)));
                }
                "R(x, a, b, y), S(y, d, e)".to_string()
            }
            _ => {
                cmps.push(format!("a1 {} {}", ops_for(rng, lower[0]), c(rng)));
                if rng.gen_bool(0.5) {
                    cmps.push(format!("b2 {} {}", ops_for(rng, lower[1]), c(rng)));
                }
                // Ordered, so each pair violates in one direction only.
                cmps.push("x1 < x2".to_string());
                "R(x1, a1, b1, y), R(x2, a2, b2, y)".to_string()
            }
        };
        lines.push(format!("ic{}: DENY {atoms}, {}.", i + 1, cmps.join(", ")));
    }
    let n_r = rng.gen_range(1..=4);
    let n_s = rng.gen_range(0..=(6 - n_r).min(2));
    let mut rows = Vec::new();
    for k in distinct_keys(rng, n_r, 1, 6) {
        rows.push(Tuple::new(
            "R",
            vec![Value::Int(k), Value::Int(c(rng)), Value::Int(c(rng)), Value::Int(rng.gen_range(0..=3))],
        ));
    }
    for k in distinct_keys(rng, n_s, 0, 3) {
        rows.push(Tuple::new("S", vec![Value::Int(k), Value::Int(c(rng)), Value::Int(c(rng))]));
    }
    Case::build(schema_text, lines.join("\n"), rows)
}

/// One-atom denials over `R(k key, a fix, b fix, c)` with any comparison
/// operator. With `nonneg`, `a` starts in [0, 8] and is only compared with
/// constants in [1, 8], so every candidate keeps `a >= 0`.
pub fn one_atom_case(rng: &mut StdRng, nonneg: bool) -> Case {
    let schema_text = format!(
        "relation R(k: int key, a: int fix, b: int fix weight {}, c: int)\n\
         relation S(k: int key, d: int)",
        WEIGHTS.choose(rng).unwrap()
    );
    let ops = ["<", "<=", ">", ">=", "=", "!="];
    let a_const = |rng: &mut StdRng| if nonneg { rng.gen_range(1..=8i64) } else { rng.gen_range(-8..=8i64) };
    let n_ics = rng.gen_range(1..=3);
    let mut lines = Vec::new();
    for i in 0..n_ics {
        let mut cmps = Vec::new();
        let pick = rng.gen_range(0..3);
        if pick != 1 {
            cmps.push(format!("a {} {}", ops.choose(rng).unwrap(), a_const(rng)));
        }
        if pick != 0 {
            cmps.push(format!("b {} {}", ops.choose(rng).unwrap(), rng.gen_range(-8..=8)));
        }
        if rng.gen_bool(0.25) {
            cmps.push(format!("y {} {}", ["=", "!=", "<", ">"].choose(rng).unwrap(), rng.gen_range(0..=3)));
        }
        lines.push(format!("c{}: DENY R(x, a, b, y), {}.", i + 1, cmps.join(", ")));
    }
    let n_r = rng.gen_range(1..=4);
    let mut rows = Vec::new();
    for k in distinct_keys(rng, n_r, 1, 6) {
        let a = if nonneg { rng.gen_range(0..=8) } else { rng.gen_range(-8..=8) };
        rows.push(Tuple::new(
            "R",
            vec![Value::Int(k), Value::Int(a), Value::Int(rng.gen_range(-8..=8)), Value::Int(rng.gen_range(0..=3))],
        ));
    }
    let n_s = rng.gen_range(0..=2);
    for k in distinct_keys(rng, n_s, 0, 3) {
        rows.push(Tuple::new("S", vec![Value::Int(k), Value::Int(rng.gen_range(-8..=8))]));
    }
    Case::build(schema_text, lines.join("\n"), rows)
}

/// Queries over the `R`/`S` corpora. The first element is always false;
/// the second is true whenever `R` is nonempty.
pub fn corpus_queries(rng: &mut StdRng, with_s_e: bool) -> Vec<String> {
    let t = |rng: &mut StdRng| rng.gen_range(-8..=8i64);
    let s_atom = if with_s_e { "S(y, d, e)" } else { "S(y, d)" };
    vec![
        "q() <- R(x, a, b, y), a > 5, a < 3.".to_string(),
        "q() <- R(x, a, b, y).".to_string(),
        format!("q(x) <- R(x, a, b, y), a > {}.", t(rng)),
        format!("q() <- R(x, a, b, y), b < {}.", t(rng)),
        format!("q(x, d) <- R(x, a, b, y), {s_atom}, d >= {}.", t(rng)),
        "q(y, sum(a)) <- R(x, a, b, y).".to_string(),
        format!("q(x, b) <- R(x, a, b, y), a <= {}.", t(rng)),
    ]
}
