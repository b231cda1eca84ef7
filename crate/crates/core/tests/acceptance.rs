//! Acceptance gate: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so every line is printed; exits nonzero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{canon, corpus_queries, fixture, fixture_query, local_case, one_atom_case, Case};
use numfix::cover::{
    all_optimal_covers, apply_cover, build_from_context, build_mwscp, greedy_cover, primal_dual_cover,
    star_normalize, SetId,
};
use numfix::exact::{ls_fixes, ne, FixSearchConfig};
use numfix::gf2::{build_rwae2, derandomize, guarantee, guarantee_factor, satisfied_weight, Gf2System};
use numfix::lang::{compare_values, parse_constraints, parse_query, Atom, DenialConstraint, Term};
use numfix::query::{
    cqa, cqa_over, enumerate_fixes_1ad, eval_aggregate, eval_query, range_over, Cell, CqaAnswer, FixSource,
    QueryAnswer, Semantics, MAX_ENUMERATED_FIXES,
};
use numfix::repair::{conflict_hypergraph, denials, satisfies_all, CandidateGrid, RepairContext};
use numfix::{tuple, Error, Instance, Rational, Tuple, TupleId, Value};
use rand::rngs::StdRng;
use rand::SeedableRng;

// Pinned limits and tolerances.
const EXAMPLE_TIME_LIMIT: Duration = Duration::from_secs(1);
const CORPUS_TIME_LIMIT: Duration = Duration::from_secs(60);
/// Relative slack when comparing an exact distance with the irrational
/// `1 + ln N` bound in floating point.
const GREEDY_REL_TOL: f64 = 1e-9;
const LOCAL_CORPUS: usize = 200;
const ONE_ATOM_CORPUS: usize = 200;
const GF2_CORPUS: usize = 120;
/// Set-count cap for the exhaustive optimal-cover search on the corpus.
const COVER_SEARCH_MAX_SETS: usize = 64;
/// Largest selection space enumerated by the one-hot oracle.
const ONE_HOT_ORACLE_CAP: u128 = 1_000_000;
const LOCAL_SEED: u64 = 0x5eed_0001;
const ONE_ATOM_SEED: u64 = 0x5eed_0002;
const GF2_SEED: u64 = 0x5eed_0003;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cfg() -> FixSearchConfig {
    FixSearchConfig::default()
}

fn set(ts: &[Tuple]) -> BTreeSet<Tuple> {
    ts.iter().cloned().collect()
}

fn shop_fixes() -> (BTreeSet<Tuple>, BTreeSet<Tuple>) {
    let d1 = set(&[
        tuple!("Client", 1, 15, 50),
        tuple!("Client", 2, 16, 50),
        tuple!("Client", 3, 60, 900),
        tuple!("Buy", 1, "CD", 25),
        tuple!("Buy", 1, "DVD", 25),
        tuple!("Buy", 3, "DVD", 40),
    ]);
    let d2 = set(&[
        tuple!("Client", 1, 18, 52),
        tuple!("Client", 2, 16, 50),
        tuple!("Client", 3, 60, 900),
        tuple!("Buy", 1, "CD", 27),
        tuple!("Buy", 1, "DVD", 26),
        tuple!("Buy", 3, "DVD", 40),
    ]);
    (d1, d2)
}

fn tuple_set(d: &Instance) -> BTreeSet<Tuple> {
    d.tuples().cloned().collect()
}

fn c1_traffic() -> Outcome {
    let f = fixture("traffic");
    let start = Instant::now();
    let r = ls_fixes(&f.d, &f.ics, &cfg()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let expected = set(&[
        tuple!("Traffic", "1.1", "a", 0, 1000),
        tuple!("Traffic", "1.1", "b", 1, 900),
        tuple!("Traffic", "1.3", "b", 1, 850),
    ]);
    ensure(r.fixes.len() == 1, || format!("{} fixes", r.fixes.len()))?;
    ensure(tuple_set(&r.fixes[0]) == expected, || format!("fix {}", r.fixes[0]))?;
    ensure(r.min_distance == Some(Rational::new(1, 10)), || format!("distance {:?}", r.min_distance))?;
    ensure(elapsed < EXAMPLE_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("one fix at distance 1/10 in {elapsed:?}"))
}

fn c2_shop() -> Outcome {
    let f = fixture("shop");
    let start = Instant::now();
    let r = ls_fixes(&f.d, &f.ics, &cfg()).map_err(|e| e.to_string())?;
    let g = conflict_hypergraph(&f.d, &f.ics, &cfg()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (d1, d2) = shop_fixes();
    let got: BTreeSet<BTreeSet<Tuple>> = r.fixes.iter().map(tuple_set).collect();
    ensure(got == [d1, d2].into(), || format!("fixes {got:?}"))?;
    for fix in &r.fixes {
        let dist = f.d.distance(fix).map_err(|e| e.to_string())?;
        ensure(dist == Rational::from_int(10), || format!("distance {dist}"))?;
    }
    let edges: Vec<BTreeSet<TupleId>> = g.edges.iter().map(|e| e.tuples.clone()).collect();
    let t = |ids: &[usize]| ids.iter().map(|&i| TupleId(i - 1)).collect::<BTreeSet<_>>();
    ensure(edges == vec![t(&[1, 4]), t(&[1, 5]), t(&[1]), t(&[2])], || format!("violation sets {edges:?}"))?;
    ensure(elapsed < EXAMPLE_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("two fixes at distance 10, four violation sets, {elapsed:?}"))
}

fn c3_shop_cover() -> Outcome {
    let f = fixture("shop");
    let start = Instant::now();
    let ci = build_mwscp(&f.d, &f.ics, &cfg()).map_err(|e| e.to_string())?;
    let weights: Vec<Rational> = ci.sets.iter().map(|s| s.weight.clone()).collect();
    let expected_w: Vec<Rational> = [4, 9, 1, 4, 1].iter().map(|&w| Rational::from_int(w)).collect();
    ensure(weights == expected_w, || format!("weights {weights:?}"))?;
    let incidence: Vec<(usize, BTreeSet<usize>)> = ci.sets.iter().map(|s| (s.owner.0, s.members.clone())).collect();
    let expected_inc: Vec<(usize, BTreeSet<usize>)> = vec![
        (0, [2].into()),
        (0, [0, 1, 2].into()),
        (1, [3].into()),
        (3, [0].into()),
        (4, [1].into()),
    ];
    ensure(incidence == expected_inc, || format!("incidence {incidence:?}"))?;
    let fixed: Vec<Tuple> = ci.sets.iter().map(|s| s.fix.fixed.clone()).collect();
    ensure(
        fixed
            == vec![
                tuple!("Client", 1, 15, 50),
                tuple!("Client", 1, 18, 52),
                tuple!("Client", 2, 16, 50),
                tuple!("Buy", 1, "CD", 25),
                tuple!("Buy", 1, "DVD", 25),
            ],
        || format!("local fixes {fixed:?}"),
    )?;
    let optimal = all_optimal_covers(&ci, 20).map_err(|e| e.to_string())?;
    let ids = |v: &[usize]| v.iter().map(|&i| SetId(i - 1)).collect::<BTreeSet<_>>();
    let chosen: Vec<BTreeSet<SetId>> = optimal.iter().map(|c| c.chosen.clone()).collect();
    ensure(chosen == vec![ids(&[1, 3, 4, 5]), ids(&[2, 3])], || format!("optimal covers {chosen:?}"))?;
    ensure(optimal.iter().all(|c| c.weight == Rational::from_int(10)), || "optimal weight".into())?;
    let greedy = greedy_cover(&ci).map_err(|e| e.to_string())?;
    let order: Vec<SetId> = greedy.trace.iter().map(|s| s.chosen).collect();
    ensure(order == vec![SetId(2), SetId(4), SetId(0), SetId(3)], || format!("greedy order {order:?}"))?;
    ensure(greedy.weight == Rational::from_int(10), || format!("greedy weight {}", greedy.weight))?;
    let applied = apply_cover(&f.d, &greedy, &ci).map_err(|e| e.to_string())?;
    ensure(tuple_set(&applied) == shop_fixes().0, || format!("applied {applied}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < EXAMPLE_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("weights (4,9,1,4,1), 2 optimal covers, greedy S3,S5,S1,S4 -> D', {elapsed:?}"))
}

fn c4_pigeonhole() -> Outcome {
    let f = fixture("pigeonhole");
    let exists = ne(&f.d, &f.ics, &cfg()).map_err(|e| e.to_string())?;
    ensure(!exists, || "a fix was found".into())?;
    Ok("no fix exists".into())
}

fn c5_grouped() -> Outcome {
    let f = fixture("grouped");
    let q = fixture_query("grouped", "sum.query", &f.schema);
    let rows = eval_aggregate(q.conjunctive(), &f.d).map_err(|e| e.to_string())?.rows;
    let int = |v| Cell::Value(Value::Int(v));
    let expected: BTreeSet<Vec<Cell>> = [
        vec![int(1), int(2), Cell::Number(Rational::from_int(11))],
        vec![int(2), int(3), Cell::Number(Rational::from_int(2))],
    ]
    .into();
    ensure(rows == expected, || format!("rows {rows:?}"))?;
    Ok("{(1,2,11), (2,3,2)}".into())
}

/// A local corpus case with its exact solution.
struct Solved {
    case: Case,
    fixes: Vec<Instance>,
    min: Rational,
}

fn solve_local_corpus() -> Result<(Vec<Solved>, Duration), String> {
    let mut rng = StdRng::seed_from_u64(LOCAL_SEED);
    let start = Instant::now();
    let mut out = Vec::with_capacity(LOCAL_CORPUS);
    for i in 0..LOCAL_CORPUS {
        let case = local_case(&mut rng);
        let report = numfix::repair::is_local(&case.ics, case.d.schema());
        ensure(report.local, || format!("case {i} not local: {:?}\n{case}", report.diagnostics))?;
        let r = ls_fixes(&case.d, &case.ics, &cfg()).map_err(|e| format!("case {i}: {e}\n{case}"))?;
        let min = r.min_distance.ok_or_else(|| format!("case {i}: local instance without a fix\n{case}"))?;
        out.push(Solved {
            case,
            fixes: r.fixes,
            min,
        });
    }
    Ok((out, start.elapsed()))
}

fn c6_greedy(corpus: &[Solved], exact_time: Duration) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 1.0;
    let mut inconsistent = 0;
    for (i, s) in corpus.iter().enumerate() {
        let d = &s.case.d;
        let ctx = RepairContext::new(d, &s.case.ics, &cfg()).map_err(|e| e.to_string())?;
        let n = ctx.hypergraph.edges.len();
        if n == 0 {
            ensure(s.min.is_zero(), || format!("case {i}: consistent but distance {}", s.min))?;
            continue;
        }
        inconsistent += 1;
        let ci = build_from_context(&ctx).map_err(|e| e.to_string())?;
        let greedy = greedy_cover(&ci).map_err(|e| format!("case {i}: {e}"))?;
        let normal = star_normalize(&greedy, &ci, &ctx).map_err(|e| format!("case {i}: {e}\n{}", s.case))?;
        let fixed = apply_cover(d, &normal, &ci).map_err(|e| format!("case {i}: {e}"))?;
        ensure(satisfies_all(&fixed, &s.case.ics).unwrap(), || format!("case {i}: D(C) violates\n{}", s.case))?;
        let dist = d.distance(&fixed).unwrap();
        let bound = (1.0 + (n as f64).ln()) * s.min.to_f64();
        ensure(dist.to_f64() <= bound * (1.0 + GREEDY_REL_TOL), || {
            format!("case {i}: {dist} > (1 + ln {n}) * {}\n{}", s.min, s.case)
        })?;
        worst = worst.max(dist.to_f64() / s.min.to_f64());
    }
    let elapsed = exact_time + start.elapsed();
    ensure(elapsed < CORPUS_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} instances ({inconsistent} inconsistent), worst ratio {worst:.3}, {elapsed:?}",
        corpus.len()
    ))
}

fn c7_primal_dual(corpus: &[Solved]) -> Outcome {
    let mut worst: f64 = 1.0;
    for (i, s) in corpus.iter().enumerate() {
        let ctx = RepairContext::new(&s.case.d, &s.case.ics, &cfg()).unwrap();
        let ci = build_from_context(&ctx).unwrap();
        if ci.elements.is_empty() {
            continue;
        }
        let pd = primal_dual_cover(&ci).map_err(|e| format!("case {i}: {e}"))?;
        ensure(ci.is_cover(&pd.chosen), || format!("case {i}: not a cover"))?;
        let opt = &all_optimal_covers(&ci, COVER_SEARCH_MAX_SETS).map_err(|e| format!("case {i}: {e}"))?[0].weight;
        let f = Rational::from_int(ci.max_frequency() as i64);
        ensure(pd.weight <= f.clone() * opt.clone(), || {
            format!("case {i}: {} > {f} * {opt}\n{}", pd.weight, s.case)
        })?;
        worst = worst.max(pd.weight.to_f64() / opt.to_f64());
    }
    Ok(format!("{} instances, worst ratio {worst:.3}", corpus.len()))
}

fn c8_cover_fix_equivalence(corpus: &[Solved]) -> Outcome {
    let mut covers = 0;
    for (i, s) in corpus.iter().enumerate() {
        let d = &s.case.d;
        let ctx = RepairContext::new(d, &s.case.ics, &cfg()).unwrap();
        let ci = build_from_context(&ctx).unwrap();
        let from_covers: Vec<Instance> = if ci.elements.is_empty() {
            vec![d.clone()]
        } else {
            let optimal = all_optimal_covers(&ci, COVER_SEARCH_MAX_SETS).map_err(|e| format!("case {i}: {e}"))?;
            let mut out = Vec::new();
            for c in &optimal {
                let normal = star_normalize(c, &ci, &ctx).map_err(|e| format!("case {i}: {e}"))?;
                let fixed = apply_cover(d, &normal, &ci).map_err(|e| format!("case {i}: {e}"))?;
                let dist = d.distance(&fixed).unwrap();
                ensure(dist == c.weight, || format!("case {i}: distance {dist} != cover weight {}", c.weight))?;
                out.push(fixed);
            }
            covers += optimal.len();
            out
        };
        ensure(canon(&from_covers) == canon(&s.fixes), || {
            format!(
                "case {i}: covers give {} fixes, exact {}\n{}",
                canon(&from_covers).len(),
                s.fixes.len(),
                s.case
            )
        })?;
    }
    Ok(format!("{} instances, {covers} optimal covers matched", corpus.len()))
}

/// Independent matcher: can `ic` be violated with its atoms mapped onto
/// exactly the tuples of `edge`, with `t` on an atom that compares a
/// fixable attribute with a constant?
fn blamed_by_fixable_comparison(ic: &DenialConstraint, edge: &[&Tuple], t: &Tuple, d: &Instance) -> bool {
    let atoms = ic.atoms();
    let mut choice = vec![0usize; atoms.len()];
    loop {
        let image: BTreeSet<usize> = choice.iter().copied().collect();
        if image.len() == edge.len() {
            if let Some(binding) = bind(atoms, &choice, edge) {
                let holds = ic.comparisons().iter().all(|c| {
                    let v = |term: &Term| match term {
                        Term::Const(c) => c.clone(),
                        Term::Var(x) => binding[x.as_str()].clone(),
                    };
                    compare_values(&v(&c.lhs), c.op, &v(&c.rhs))
                });
                if holds {
                    for (ai, &ti) in choice.iter().enumerate() {
                        if edge[ti] == t && atom_has_fixable_comparison(ic, &atoms[ai], d) {
                            return true;
                        }
                    }
                }
            }
        }
        let mut k = 0;
        loop {
            if k == choice.len() {
                return false;
            }
            choice[k] += 1;
            if choice[k] < edge.len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn bind<'a>(atoms: &'a [Atom], choice: &[usize], edge: &[&Tuple]) -> Option<BTreeMap<&'a str, Value>> {
    let mut b: BTreeMap<&str, Value> = BTreeMap::new();
    for (atom, &ti) in atoms.iter().zip(choice) {
        let t = edge[ti];
        if t.relation != atom.relation {
            return None;
        }
        for (arg, val) in atom.args.iter().zip(&t.values) {
            match arg {
                Term::Const(c) if c != val => return None,
                Term::Const(_) => {}
                Term::Var(x) => {
                    if let Some(prev) = b.insert(x.as_str(), val.clone()) {
                        if &prev != val {
                            return None;
                        }
                    }
                }
            }
        }
    }
    Some(b)
}

fn atom_has_fixable_comparison(ic: &DenialConstraint, atom: &Atom, d: &Instance) -> bool {
    let rel = d.schema().get(&atom.relation).unwrap();
    ic.comparisons().iter().any(|c| match c.var_const() {
        Some((x, _, _)) => atom
            .args
            .iter()
            .enumerate()
            .any(|(p, a)| a.as_var() == Some(x) && rel.attributes[p].is_fixable()),
        None => false,
    })
}

fn c9_local_fix_safety(corpus: &[Solved]) -> Outcome {
    let mut checked_tuples = 0;
    let mut substitutions = 0;
    for (i, s) in corpus.iter().enumerate() {
        let d = &s.case.d;
        let ctx = RepairContext::new(d, &s.case.ics, &cfg()).unwrap();
        let dens = denials(&s.case.ics).unwrap();
        let edges = &ctx.hypergraph.edges;
        let before: BTreeSet<(String, BTreeSet<TupleId>)> =
            edges.iter().map(|e| (e.constraint.clone(), e.tuples.clone())).collect();
        let tuples: Vec<&Tuple> = d.tuples().collect();
        let mut listed: Vec<BTreeSet<Tuple>> = Vec::new();
        for (ti, t) in tuples.iter().enumerate() {
            let lfs = ctx.local_fixes(TupleId(ti)).map_err(|e| e.to_string())?;
            listed.push(lfs.iter().map(|lf| lf.fixed.clone()).collect());
            // Existence, for tuples blamed through a fixable comparison.
            let blamed = edges.iter().any(|e| {
                e.tuples.contains(&TupleId(ti)) && {
                    let ic = dens.iter().find(|ic| ic.label == e.constraint).unwrap();
                    let members: Vec<&Tuple> = e.tuples.iter().map(|id| tuples[id.0]).collect();
                    blamed_by_fixable_comparison(ic, &members, t, d)
                }
            });
            if blamed {
                checked_tuples += 1;
                ensure(!lfs.is_empty(), || format!("case {i}: {t} has no local fix\n{}", s.case))?;
            }
            // Substitution adds no violation set.
            for lf in &lfs {
                substitutions += 1;
                let mut d2 = d.clone();
                d2.replace(lf.fixed.clone()).unwrap();
                let after = conflict_hypergraph(&d2, &s.case.ics, &cfg()).unwrap();
                for e in &after.edges {
                    ensure(before.contains(&(e.constraint.clone(), e.tuples.clone())), || {
                        format!("case {i}: substituting {} creates {:?}\n{}", lf.fixed, e.tuples, s.case)
                    })?;
                }
                for r in &lf.resolved {
                    ensure(!after.edges.contains(&edges[*r]), || {
                        format!("case {i}: {} does not resolve edge {r}", lf.fixed)
                    })?;
                }
            }
        }
        // Fixes differ from D only by listed local fixes, on grid values.
        let grid = CandidateGrid::new(d, &dens, None);
        for fix in &s.fixes {
            for (ti, t) in tuples.iter().enumerate() {
                let rel = d.schema().get(&t.relation).unwrap();
                let key = rel.key_of(&t.values);
                let new = fix.tuple_by_key(&t.relation, &key).unwrap().unwrap();
                if new == *t {
                    continue;
                }
                ensure(listed[ti].contains(new), || format!("case {i}: {new} is not a local fix of {t}\n{}", s.case))?;
                for p in rel.fixable_positions() {
                    let (orig, v) = (t.values[p].as_int().unwrap(), new.values[p].as_int().unwrap());
                    ensure(v == orig || grid.contains(&t.relation, p, orig, v), || {
                        format!("case {i}: {new} position {p} value {v} is off the grid")
                    })?;
                }
            }
        }
    }
    Ok(format!(
        "{} instances, {checked_tuples} blamed tuples, {substitutions} substitutions",
        corpus.len()
    ))
}

fn c10_one_atom() -> Outcome {
    let mut rng = StdRng::seed_from_u64(ONE_ATOM_SEED);
    let mut fixes_total = 0;
    let mut without = 0;
    for i in 0..ONE_ATOM_CORPUS {
        let case = one_atom_case(&mut rng, false);
        let fast = enumerate_fixes_1ad(&case.d, &case.ics, &cfg(), MAX_ENUMERATED_FIXES)
            .map_err(|e| format!("case {i}: {e}\n{case}"))?;
        let exact = ls_fixes(&case.d, &case.ics, &cfg()).map_err(|e| format!("case {i}: {e}\n{case}"))?;
        ensure(canon(&fast) == canon(&exact.fixes), || {
            format!("case {i}: reduction {} fixes, exact {}\n{case}", fast.len(), exact.fixes.len())
        })?;
        fixes_total += fast.len();
        without += usize::from(fast.is_empty());
    }
    Ok(format!("{ONE_ATOM_CORPUS} instances, {fixes_total} fixes, {without} without a fix"))
}

fn answer_subset(a: &CqaAnswer, b: &CqaAnswer) -> bool {
    match (a, b) {
        (CqaAnswer::Boolean(x), CqaAnswer::Boolean(y)) => !*x || *y,
        (CqaAnswer::Rows(x), CqaAnswer::Rows(y)) => x.rows.is_subset(&y.rows),
        _ => false,
    }
}

fn check_semantics(label: &str, case: &Case, fixes: &[Instance], queries: &[String]) -> Result<usize, String> {
    let mut n = 0;
    for (qi, text) in queries.iter().enumerate() {
        let q = case.query(text);
        let run = |s| cqa_over(&q, fixes, s, FixSource::Exact).map_err(|e| format!("{label} {text}: {e}"));
        let (sk, ma, br) = (run(Semantics::Skeptical)?, run(Semantics::Majority)?, run(Semantics::Brave)?);
        let no_fix = fixes.is_empty();
        // Without fixes skeptical is vacuously true and majority false, so
        // the chain only holds over a nonempty set of fixes.
        if !no_fix {
            ensure(answer_subset(&sk.answer, &ma.answer), || format!("{label} {text}: skeptical not within majority"))?;
            ensure(answer_subset(&ma.answer, &br.answer), || format!("{label} {text}: majority not within brave"))?;
        }
        if qi == 0 {
            ensure(sk.answer == CqaAnswer::Boolean(no_fix), || {
                format!("{label}: always-false query under skeptical gave {:?} with {} fixes", sk.answer, fixes.len())
            })?;
        }
        if qi == 1 {
            ensure(ma.answer == CqaAnswer::Boolean(!no_fix), || {
                format!("{label}: always-true query under majority gave {:?} with {} fixes", ma.answer, fixes.len())
            })?;
        }
        n += 1;
    }
    Ok(n)
}

fn c11_cqa(corpus: &[Solved]) -> Outcome {
    let mut rng = StdRng::seed_from_u64(LOCAL_SEED ^ 0xcafe);
    let mut checked = 0;
    for (i, s) in corpus.iter().enumerate() {
        let queries = corpus_queries(&mut rng, true);
        checked += check_semantics(&format!("local case {i}"), &s.case, &s.fixes, &queries)?;
    }
    let mut empty_fix_sets = 0;
    let mut gen = StdRng::seed_from_u64(ONE_ATOM_SEED ^ 0xcafe);
    for i in 0..ONE_ATOM_CORPUS / 2 {
        let case = one_atom_case(&mut gen, false);
        let fixes = ls_fixes(&case.d, &case.ics, &cfg()).unwrap().fixes;
        empty_fix_sets += usize::from(fixes.is_empty());
        let queries = corpus_queries(&mut rng, false);
        checked += check_semantics(&format!("one-atom case {i}"), &case, &fixes, &queries)?;
    }
    // The same cross-checks through the top-level entry point on a fixture
    // without fixes.
    let p = fixture("pigeonhole");
    let always_false = parse_query("q() <- R(x, y), y > 5, y < 3.", &p.schema).unwrap();
    let always_true = parse_query("q() <- R(x, y).", &p.schema).unwrap();
    let sk = cqa(&always_false, &p.d, &p.ics, Semantics::Skeptical, &cfg()).map_err(|e| e.to_string())?;
    let ma = cqa(&always_true, &p.d, &p.ics, Semantics::Majority, &cfg()).map_err(|e| e.to_string())?;
    ensure(sk.answer == CqaAnswer::Boolean(true) && ma.answer == CqaAnswer::Boolean(false), || {
        "vacuous answers on an instance without fixes".into()
    })?;

    let f = fixture("shop");
    let ask = |text: &str, s| {
        let q = parse_query(text, &f.schema).unwrap();
        cqa(&q, &f.d, &f.ics, s, &cfg()).map(|r| r.answer).map_err(|e| e.to_string())
    };
    let yes = CqaAnswer::Boolean(true);
    let no = CqaAnswer::Boolean(false);
    ensure(ask("q() <- Client(3, 60, 900).", Semantics::Skeptical)? == yes, || "Client(3,60,900) skeptical".into())?;
    ensure(ask("q() <- Client(1, 15, 50).", Semantics::Brave)? == yes, || "Client(1,15,50) brave".into())?;
    ensure(ask("q() <- Client(1, 15, 50).", Semantics::Skeptical)? == no, || "Client(1,15,50) skeptical".into())?;
    ensure(ask("q() <- Client(1, 15, 50).", Semantics::Majority)? == no, || "Client(1,15,50) majority".into())?;
    let (d1, d2) = shop_fixes();
    let at_most = parse_query("ASK sum(m) <= 1000 FROM q(sum(m)) <- Client(id, a, m).", &f.schema).unwrap();
    let on = |ts: BTreeSet<Tuple>| {
        let d = Instance::from_tuples(f.schema.clone(), ts).unwrap();
        eval_query(&at_most, &d).unwrap()
    };
    ensure(on(d1) == QueryAnswer::Boolean(true) && on(d2) == QueryAnswer::Boolean(false), || {
        "sum(m) <= 1000 on D' and D''".into()
    })?;
    Ok(format!(
        "{checked} query checks ({empty_fix_sets} one-atom instances without fixes), shop ground answers as expected"
    ))
}

fn c12_range() -> Outcome {
    let f = fixture("shop");
    let q = fixture_query("shop", "sum.query", &f.schema);
    let r = numfix::query::cqa_range(q.conjunctive(), &f.d, &f.ics, &cfg()).map_err(|e| e.to_string())?;
    ensure(r.glb == Rational::from_int(1000) && r.lub == Rational::from_int(1002), || {
        format!("range ({}, {})", r.glb, r.lub)
    })?;
    Ok("(1000, 1002)".into())
}

/// Maximum satisfied weight over every one-hot selection.
fn one_hot_optimum(sys: &Gf2System) -> Option<i128> {
    let space: u128 = sys.bags.iter().map(|b| b.candidates.len() as u128).product();
    if space > ONE_HOT_ORACLE_CAP {
        return None;
    }
    let mut sel = vec![0usize; sys.bags.len()];
    let mut best = satisfied_weight(sys, &sel);
    loop {
        let mut k = 0;
        loop {
            if k == sel.len() {
                return Some(best);
            }
            sel[k] += 1;
            if sel[k] < sys.bags[k].candidates.len() {
                break;
            }
            sel[k] = 0;
            k += 1;
        }
        best = best.max(satisfied_weight(sys, &sel));
    }
}

fn c13_gf2() -> Outcome {
    ensure(guarantee_factor(2, 4) == Rational::new(1, 16), || "guarantee(2, 4)".into())?;
    let mut rng = StdRng::seed_from_u64(GF2_SEED);
    let queries = [
        "q(sum(a)) <- R(x, a, b, y).",
        "q(sum(a)) <- R(x, a, b, y), b > 0.",
        "q(sum(a)) <- R(x, a, b, y), S(y, d).",
        "q(sum(a)) <- R(x, a, b, y), R(z, a2, b2, y), x != z.",
    ];
    let mut systems = 0;
    let mut attempts = 0;
    let mut max_k = 1;
    let mut strict = 0;
    while systems < GF2_CORPUS {
        attempts += 1;
        ensure(attempts < 10 * GF2_CORPUS, || "too few instances with fixes".into())?;
        let case = one_atom_case(&mut rng, true);
        let q = case.conjunctive(queries[attempts % queries.len()]);
        let sys = match build_rwae2(&q, &case.d, &case.ics, &cfg()) {
            Err(Error::NoFix) => continue,
            other => other.map_err(|e| format!("{e}\n{case}"))?,
        };
        systems += 1;
        max_k = max_k.max(sys.k);
        let opt = one_hot_optimum(&sys).ok_or("selection space too large")?;
        let out = derandomize(&sys);
        let w = Rational::from_bigint(out.weight.into());
        let opt_r = Rational::from_bigint(opt.into());
        ensure(guarantee(&sys) * opt_r.clone() <= w && out.weight <= opt, || {
            format!("weight {} outside [{} * {opt}, {opt}]\n{case}", out.weight, guarantee(&sys))
        })?;
        ensure(w >= out.initial, || format!("weight {} below expectation {}", out.weight, out.initial))?;
        let mut prev = out.initial.clone();
        for step in &out.steps {
            ensure(step.expected >= prev, || format!("expectation decreased at bag {}\n{case}", step.bag))?;
            prev = step.expected.clone();
        }
        ensure(prev == w, || "final expectation differs from weight".into())?;
        let fixes = enumerate_fixes_1ad(&case.d, &case.ics, &cfg(), MAX_ENUMERATED_FIXES).unwrap();
        let range = range_over(&q, &fixes).map_err(|e| e.to_string())?;
        ensure(range.lub == opt_r, || format!("optimum {opt} but lub {}\n{case}", range.lub))?;
        strict += usize::from(out.weight < opt);
    }
    Ok(format!(
        "{systems} systems (largest bag {max_k}), {strict} strictly below optimum, guarantee(2,4) = 1/16"
    ))
}

fn c14_unsupported() -> Outcome {
    let f = fixture("traffic");
    let mut ics = f.ics.clone();
    ics.extend(parse_constraints("total: AGG sum(flow) OF Traffic < 5000.", &f.schema).unwrap());
    let unsupported = |r: Result<(), Error>| matches!(r, Err(Error::UnsupportedConstraint(_)));
    ensure(unsupported(ls_fixes(&f.d, &ics, &cfg()).map(|_| ())), || "exact solver".into())?;
    ensure(unsupported(enumerate_fixes_1ad(&f.d, &ics, &cfg(), 10).map(|_| ())), || "one-atom reduction".into())?;
    let q = parse_query("q() <- Traffic(t, l, y, f).", &f.schema).unwrap();
    ensure(unsupported(cqa(&q, &f.d, &ics, Semantics::Brave, &cfg()).map(|_| ())), || "cqa".into())?;
    ensure(matches!(build_mwscp(&f.d, &ics, &cfg()), Err(Error::NotLocal(_))), || "cover".into())?;
    Ok("aggregation constraints rejected by every fix search; complexity bounds are covered by the suites above, not measured".into())
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut run = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let status = if r.is_ok() { "PASS" } else { "FAIL" };
        let detail = match &r {
            Ok(d) | Err(d) => d.clone(),
        };
        println!("criterion {n:>2} {status}  {name}: {detail}");
        results.push((n, name, r));
    };
    run(1, "traffic example, single fix at 1/10", &mut c1_traffic);
    run(2, "shop example, two fixes at 10", &mut c2_shop);
    run(3, "shop set cover and greedy", &mut c3_shop_cover);
    run(4, "pigeonhole instance has no fix", &mut c4_pigeonhole);
    run(5, "grouped sum aggregate", &mut c5_grouped);
    let corpus = catch_unwind(solve_local_corpus).unwrap_or_else(|_| Err("corpus generation panicked".into()));
    let (corpus, exact_time) = match corpus {
        Ok(c) => c,
        Err(e) => {
            for (n, name) in [
                (6, "greedy bound"),
                (7, "primal-dual bound"),
                (8, "cover/fix equivalence"),
                (9, "local-fix safety"),
            ] {
                run(n, name, &mut || Err(format!("exact solutions unavailable: {e}")));
            }
            (Vec::new(), Duration::ZERO)
        }
    };
    if !corpus.is_empty() {
        run(6, "greedy within 1 + ln N of optimum", &mut || c6_greedy(&corpus, exact_time));
        run(7, "primal-dual within max frequency of optimum", &mut || c7_primal_dual(&corpus));
        run(8, "optimal covers give exactly the fixes", &mut || c8_cover_fix_equivalence(&corpus));
        run(9, "local-fix safety", &mut || c9_local_fix_safety(&corpus));
    }
    run(10, "one-atom reduction equals exact fixes", &mut c10_one_atom);
    run(11, "consistent answer semantics", &mut || c11_cqa(&corpus));
    run(12, "range of sum over shop fixes", &mut c12_range);
    run(13, "derandomized sum approximation", &mut c13_gf2);
    run(14, "unsupported constraints fail loudly", &mut c14_unsupported);
    let failed: Vec<u32> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(", failed: {failed:?}")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
