//! Query evaluation, join-graph classification, the one-atom-denial
//! reduction and consistent answers over the set of least-squares fixes.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{ls_fixes, FixSearchConfig};
use crate::lang::{AggFunc, ConjunctiveQuery, Constraint, Query, Term};
use crate::matching::{indexed_rows, CompiledBody, Row};
use crate::model::{Instance, Schema, Tuple, Value};
use crate::rational::Rational;
use crate::repair::{denials, CandidateGrid};

/// One answer column: a database value or an aggregate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Value(Value),
    Number(Rational),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Value(v) => v.fmt(f),
            Cell::Number(r) => r.fmt(f),
        }
    }
}

/// Set-semantics answers. A Boolean query is true iff its answer set holds
/// the empty row.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AnswerSet {
    pub arity: usize,
    pub rows: BTreeSet<Vec<Cell>>,
}

impl AnswerSet {
    pub fn is_true(&self) -> bool {
        self.rows.contains(&Vec::new())
    }
}

fn compile(q: &ConjunctiveQuery, d: &Instance) -> Result<CompiledBody> {
    for atom in &q.body.atoms {
        d.schema().get(&atom.relation)?;
    }
    Ok(CompiledBody::new(&q.body))
}

/// Distinct satisfying assignments of the body, as full variable bindings
/// ordered like `CompiledBody::vars`.
fn witnesses(body: &CompiledBody, d: &Instance) -> BTreeSet<Vec<Value>> {
    let rows = indexed_rows(d);
    let per_atom: Vec<&[Row<'_>]> = body
        .atoms
        .iter()
        .map(|a| rows.get(a.relation.as_str()).map_or(&[][..], Vec::as_slice))
        .collect();
    let mut out = BTreeSet::new();
    body.for_each(&per_atom, &mut |b, _| {
        out.insert(b.to_vec());
        true
    });
    out
}

fn head_slots(q: &ConjunctiveQuery, body: &CompiledBody) -> Result<Vec<usize>> {
    q.head_vars
        .iter()
        .map(|v| {
            body.var_index(v)
                .ok_or_else(|| Error::Invalid(format!("head variable `{v}` does not occur in the body")))
        })
        .collect()
}

/// Answers of the non-aggregate matrix of `q`.
pub fn eval_conjunctive(q: &ConjunctiveQuery, d: &Instance) -> Result<AnswerSet> {
    let body = compile(q, d)?;
    let head = head_slots(q, &body)?;
    let rows = witnesses(&body, d)
        .into_iter()
        .map(|b| head.iter().map(|&i| Cell::Value(b[i].clone())).collect())
        .collect();
    Ok(AnswerSet {
        arity: head.len(),
        rows,
    })
}

fn aggregate(func: AggFunc, zs: &[&Value]) -> Result<Option<Rational>> {
    let int = |v: &Value| -> Result<Rational> {
        v.as_int()
            .map(Rational::from_int)
            .ok_or_else(|| Error::Type(format!("cannot add symbol `{v}`")))
    };
    Ok(match func {
        AggFunc::Count => Some(Rational::from_int(zs.len() as i64)),
        AggFunc::CountDistinct => Some(Rational::from_int(zs.iter().collect::<BTreeSet<_>>().len() as i64)),
        AggFunc::Sum => Some(zs.iter().map(|z| int(z)).collect::<Result<Vec<_>>>()?.into_iter().sum()),
        AggFunc::Avg if zs.is_empty() => None,
        AggFunc::Avg => {
            let total: Rational = zs.iter().map(|z| int(z)).collect::<Result<Vec<_>>>()?.into_iter().sum();
            Some(total / Rational::from_int(zs.len() as i64))
        }
    })
}

/// Grouped aggregate answers: one row per answer of the matrix, extended by
/// the aggregate over its distinct witnesses. A scalar query over no
/// witnesses yields `0` for sum and the counts, and no row for avg.
pub fn eval_aggregate(q: &ConjunctiveQuery, d: &Instance) -> Result<AnswerSet> {
    let Some(agg) = &q.aggregate else {
        return eval_conjunctive(q, d);
    };
    let body = compile(q, d)?;
    let head = head_slots(q, &body)?;
    let z = body
        .var_index(&agg.var)
        .ok_or_else(|| Error::Invalid(format!("aggregation variable `{}` is not in the body", agg.var)))?;
    let all = witnesses(&body, d);
    let mut groups: BTreeMap<Vec<Value>, Vec<&Value>> = BTreeMap::new();
    if head.is_empty() {
        groups.insert(Vec::new(), Vec::new());
    }
    for b in &all {
        let key = head.iter().map(|&i| b[i].clone()).collect();
        groups.entry(key).or_default().push(&b[z]);
    }
    let mut rows = BTreeSet::new();
    for (key, zs) in groups {
        if let Some(value) = aggregate(agg.func, &zs)? {
            let mut row: Vec<Cell> = key.into_iter().map(Cell::Value).collect();
            row.push(Cell::Number(value));
            rows.insert(row);
        }
    }
    Ok(AnswerSet {
        arity: head.len() + 1,
        rows,
    })
}

/// The value of a scalar aggregate query; `None` for avg over nothing.
pub fn scalar_value(q: &ConjunctiveQuery, d: &Instance) -> Result<Option<Rational>> {
    if !q.is_scalar_aggregate() {
        return Err(Error::Invalid(format!("`{}` is not a scalar aggregate query", q.name)));
    }
    let answers = eval_aggregate(q, d)?;
    Ok(answers.rows.into_iter().next().map(|mut row| match row.pop() {
        Some(Cell::Number(r)) => r,
        _ => unreachable!("aggregate column is numeric"),
    }))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComparisonOutcome {
    pub holds: bool,
    /// Set when the aggregate is undefined (avg over no witnesses).
    pub warning: Option<String>,
}

pub fn eval_aggregate_comparison(q: &crate::lang::AggregateComparisonQuery, d: &Instance) -> Result<ComparisonOutcome> {
    Ok(match scalar_value(&q.query, d)? {
        Some(v) => ComparisonOutcome {
            holds: q.op.holds(&v, &Rational::from_int(q.k)),
            warning: None,
        },
        None => ComparisonOutcome {
            holds: false,
            warning: Some("avg over an empty set is undefined".into()),
        },
    })
}

/// The answer of any query on one instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum QueryAnswer {
    Boolean(bool),
    Rows(AnswerSet),
}

pub fn eval_query(q: &Query, d: &Instance) -> Result<QueryAnswer> {
    Ok(match q {
        Query::AggregateComparison(a) => QueryAnswer::Boolean(eval_aggregate_comparison(a, d)?.holds),
        Query::Conjunctive(c) if c.is_boolean() => QueryAnswer::Boolean(eval_conjunctive(c, d)?.is_true()),
        Query::Conjunctive(c) => QueryAnswer::Rows(eval_aggregate(c, d)?),
    })
}

/// Atoms of a query body and the arcs between them: `L -> L'` when a
/// variable at a non-key position of `L` also occurs in `L'`; a self-loop
/// when it occurs twice in `L`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct JoinGraph {
    pub atoms: Vec<String>,
    pub arcs: Vec<(usize, usize)>,
    pub self_loops: Vec<usize>,
}

pub fn join_graph(q: &ConjunctiveQuery, schema: &Schema) -> Result<JoinGraph> {
    let atoms = &q.body.atoms;
    let mut arcs = Vec::new();
    let mut self_loops = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        let rel = schema.get(&a.relation)?;
        let nonkey: BTreeSet<&str> = a
            .args
            .iter()
            .enumerate()
            .filter(|(p, _)| !rel.is_key_position(*p))
            .filter_map(|(_, t)| t.as_var())
            .collect();
        let occurs_twice = nonkey
            .iter()
            .any(|v| a.args.iter().filter(|t| t.as_var() == Some(v)).count() > 1);
        if occurs_twice {
            self_loops.push(i);
        }
        for (j, b) in atoms.iter().enumerate() {
            if i != j && b.vars().any(|v| nonkey.contains(v)) {
                arcs.push((i, j));
            }
        }
    }
    Ok(JoinGraph {
        atoms: atoms.iter().map(|a| a.to_string()).collect(),
        arcs,
        self_loops,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CTreeReport {
    pub in_ctree: bool,
    pub reason: String,
}

/// Membership in the tree class: no repeated relation, a forest-shaped join
/// graph, and every non-key-to-key join covering the whole key. Aggregate
/// queries are judged by their matrix.
pub fn in_ctree(q: &ConjunctiveQuery, schema: &Schema) -> Result<CTreeReport> {
    let no = |reason: String| Ok(CTreeReport { in_ctree: false, reason });
    let atoms = &q.body.atoms;
    let mut seen = BTreeSet::new();
    for a in atoms {
        if !seen.insert(a.relation.as_str()) {
            return no(format!("relation `{}` occurs more than once", a.relation));
        }
    }
    let g = join_graph(q, schema)?;
    if let Some(&i) = g.self_loops.first() {
        return no(format!("atom {} has a self-loop", g.atoms[i]));
    }
    let mut indegree = vec![0usize; atoms.len()];
    for &(_, j) in &g.arcs {
        indegree[j] += 1;
    }
    if let Some(j) = indegree.iter().position(|&d| d > 1) {
        return no(format!("atom {} has more than one incoming arc", g.atoms[j]));
    }
    // With in-degree at most one, a cycle exists iff following parents
    // from some atom revisits it.
    let parent: BTreeMap<usize, usize> = g.arcs.iter().map(|&(i, j)| (j, i)).collect();
    for start in 0..atoms.len() {
        let mut cur = start;
        for _ in 0..atoms.len() {
            match parent.get(&cur) {
                Some(&p) if p == start => return no(format!("join graph has a cycle through {}", g.atoms[start])),
                Some(&p) => cur = p,
                None => break,
            }
        }
    }
    for &(i, j) in &g.arcs {
        let (a, b) = (&atoms[i], &atoms[j]);
        let ra = schema.get(&a.relation)?;
        let rb = schema.get(&b.relation)?;
        let nonkey: BTreeSet<&str> = a
            .args
            .iter()
            .enumerate()
            .filter(|(p, _)| !ra.is_key_position(*p))
            .filter_map(|(_, t)| t.as_var())
            .collect();
        let touches_key = rb
            .key
            .iter()
            .any(|&p| matches!(b.args[p].as_var(), Some(v) if nonkey.contains(v)));
        if !touches_key {
            continue;
        }
        let full = rb.key.iter().all(|&p| match &b.args[p] {
            Term::Const(_) => true,
            Term::Var(v) => nonkey.contains(v.as_str()),
        });
        if !full {
            return no(format!("join from {} to the key of {} is not full", g.atoms[i], g.atoms[j]));
        }
    }
    Ok(CTreeReport {
        in_ctree: true,
        reason: "forest join graph with full non-key-to-key joins".into(),
    })
}

/// The choices for one tuple under one-atom denials: the tuple itself when
/// consistent, otherwise all of its cheapest consistent grid points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Bag {
    pub relation: String,
    pub key: Vec<Value>,
    pub original: Tuple,
    pub candidates: Vec<Tuple>,
    pub cost: Rational,
}

/// Consistent tuples plus every cheapest per-tuple fix, grouped by key.
/// Bags are ordered by relation, then key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KeyRepairInstance {
    pub bags: Vec<Bag>,
}

impl KeyRepairInstance {
    /// The flattened, possibly key-violating tuple collection.
    pub fn tuples(&self) -> impl Iterator<Item = &Tuple> {
        self.bags.iter().flat_map(|b| b.candidates.iter())
    }

    /// Number of distinct fixes the bags encode.
    pub fn fix_count(&self) -> u128 {
        self.bags
            .iter()
            .map(|b| b.candidates.len() as u128)
            .try_fold(1u128, |acc, n| acc.checked_mul(n))
            .unwrap_or(u128::MAX)
    }
}

pub fn all_one_atom(ics: &[Constraint]) -> bool {
    ics.iter()
        .all(|c| matches!(c, Constraint::Denial(d) if d.is_one_atom()))
}

pub fn reduce_1ad(d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<KeyRepairInstance> {
    let dens = denials(ics)?;
    if let Some(ic) = dens.iter().find(|ic| !ic.is_one_atom()) {
        return Err(Error::NotOneAtom(ic.label.clone()));
    }
    let schema = d.schema();
    let grid = CandidateGrid::new(d, &dens, cfg.window_radius_override);
    let bodies: Vec<CompiledBody> = dens.iter().map(|ic| CompiledBody::new(&ic.body)).collect();
    let consistent = |t: &Tuple, values: &[Value]| {
        let row: [Row<'_>; 1] = [(0, values)];
        bodies
            .iter()
            .all(|b| b.atoms[0].relation != t.relation || !b.any(&[&row]))
    };
    let mut bags = Vec::new();
    for rel in schema.relations() {
        let mut rel_bags = Vec::new();
        for t in d.relation_tuples(&rel.name) {
            let key = rel.key_of(&t.values);
            let (candidates, cost) = if consistent(t, &t.values) {
                (vec![t.clone()], Rational::zero())
            } else {
                let mut best: Option<Rational> = None;
                let mut cands: Vec<Vec<Value>> = Vec::new();
                for (values, cost) in grid.tuple_candidates(rel, t, cfg.max_grid_points)? {
                    if !consistent(t, &values) || matches!(&best, Some(b) if cost > *b) {
                        continue;
                    }
                    if best.as_ref() != Some(&cost) {
                        best = Some(cost);
                        cands.clear();
                    }
                    cands.push(values);
                }
                cands.sort();
                (
                    cands.into_iter().map(|v| Tuple::new(&rel.name, v)).collect(),
                    best.unwrap_or_else(Rational::zero),
                )
            };
            rel_bags.push(Bag {
                relation: rel.name.clone(),
                key,
                original: t.clone(),
                candidates,
                cost,
            });
        }
        rel_bags.sort_by(|a, b| a.key.cmp(&b.key));
        bags.extend(rel_bags);
    }
    Ok(KeyRepairInstance { bags })
}

/// Default cap on the number of fixes enumerated from a key-repair instance.
pub const MAX_ENUMERATED_FIXES: u64 = 1_000_000;

/// Every least-squares fix under one-atom denials: one candidate per bag.
pub fn enumerate_fixes_1ad(d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig, cap: u64) -> Result<Vec<Instance>> {
    let kri = reduce_1ad(d, ics, cfg)?;
    fixes_from_bags(d, &kri, cap)
}

pub fn fixes_from_bags(d: &Instance, kri: &KeyRepairInstance, cap: u64) -> Result<Vec<Instance>> {
    let total = kri.fix_count();
    if total > cap as u128 {
        return Err(Error::CapExceeded {
            what: "enumerated fixes",
            limit: cap,
        });
    }
    if total == 0 {
        return Ok(Vec::new());
    }
    let varying: Vec<&Bag> = kri.bags.iter().filter(|b| b.candidates.len() > 1).collect();
    let mut base = d.clone();
    for b in &kri.bags {
        if b.candidates.len() == 1 && b.candidates[0] != b.original {
            base.replace(b.candidates[0].clone())?;
        }
    }
    let mut out = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; varying.len()];
    loop {
        let mut fix = base.clone();
        for (b, &i) in varying.iter().zip(&idx) {
            fix.replace(b.candidates[i].clone())?;
        }
        out.push(fix);
        let mut k = varying.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < varying[k].candidates.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Semantics {
    Skeptical,
    Brave,
    Majority,
    Range,
}

/// How the fixes were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixSource {
    OneAtom,
    Exact,
}

/// All least-squares fixes, through the one-atom fast path when it applies.
pub fn all_fixes(d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<(Vec<Instance>, FixSource)> {
    denials(ics)?;
    if all_one_atom(ics) {
        Ok((enumerate_fixes_1ad(d, ics, cfg, MAX_ENUMERATED_FIXES)?, FixSource::OneAtom))
    } else {
        Ok((ls_fixes(d, ics, cfg)?.fixes, FixSource::Exact))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum CqaAnswer {
    Boolean(bool),
    Rows(AnswerSet),
    Range { glb: Rational, lub: Rational },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CqaResult {
    pub semantics: Semantics,
    pub answer: CqaAnswer,
    pub fix_count: usize,
    pub source: FixSource,
}

/// Consistent answers of `q` under the chosen semantics.
///
/// With no fixes, a Boolean query is vacuously true under skeptical and
/// false otherwise; a non-Boolean query has no answers (check
/// `fix_count`).
pub fn cqa(q: &Query, d: &Instance, ics: &[Constraint], semantics: Semantics, cfg: &FixSearchConfig) -> Result<CqaResult> {
    let (fixes, source) = all_fixes(d, ics, cfg)?;
    cqa_over(q, &fixes, semantics, source)
}

/// [`cqa`] over an explicit list of fixes.
pub fn cqa_over(q: &Query, fixes: &[Instance], semantics: Semantics, source: FixSource) -> Result<CqaResult> {
    let n = fixes.len();
    let keep = |hits: usize| match semantics {
        Semantics::Skeptical => hits == n,
        Semantics::Brave => hits > 0,
        Semantics::Majority => 2 * hits > n,
        Semantics::Range => unreachable!(),
    };
    let answer = if semantics == Semantics::Range {
        let range = range_over(q.conjunctive(), fixes)?;
        CqaAnswer::Range {
            glb: range.glb,
            lub: range.lub,
        }
    } else {
        let boolean = matches!(q, Query::AggregateComparison(_)) || q.conjunctive().is_boolean();
        let answers = fixes.iter().map(|f| eval_query(q, f)).collect::<Result<Vec<_>>>()?;
        if boolean {
            let hits = answers.iter().filter(|a| matches!(a, QueryAnswer::Boolean(true))).count();
            CqaAnswer::Boolean(keep(hits))
        } else {
            let mut counts: BTreeMap<Vec<Cell>, usize> = BTreeMap::new();
            let mut arity = 0;
            for a in answers {
                if let QueryAnswer::Rows(set) = a {
                    arity = set.arity;
                    for row in set.rows {
                        *counts.entry(row).or_default() += 1;
                    }
                }
            }
            let rows = if n == 0 {
                BTreeSet::new()
            } else {
                counts.into_iter().filter(|(_, c)| keep(*c)).map(|(r, _)| r).collect()
            };
            CqaAnswer::Rows(AnswerSet { arity, rows })
        }
    };
    Ok(CqaResult {
        semantics,
        answer,
        fix_count: n,
        source,
    })
}

/// Greatest lower and least upper bound of a scalar aggregate across fixes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RangeAnswer {
    pub glb: Rational,
    pub lub: Rational,
    pub fix_count: usize,
}

impl RangeAnswer {
    /// Min-max decision: is the aggregate at most `k` in every fix?
    pub fn at_most_everywhere(&self, k: &Rational) -> bool {
        self.lub <= *k
    }

    /// Max-min decision: is the aggregate at least `k` in every fix?
    pub fn at_least_everywhere(&self, k: &Rational) -> bool {
        self.glb >= *k
    }
}

pub fn cqa_range(q: &ConjunctiveQuery, d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<RangeAnswer> {
    let (fixes, _) = all_fixes(d, ics, cfg)?;
    range_over(q, &fixes)
}

pub fn range_over(q: &ConjunctiveQuery, fixes: &[Instance]) -> Result<RangeAnswer> {
    if !q.is_scalar_aggregate() {
        return Err(Error::Invalid(
            "range semantics needs a scalar aggregate query (no grouping variables)".into(),
        ));
    }
    let mut values = Vec::with_capacity(fixes.len());
    for f in fixes {
        values.push(
            scalar_value(q, f)?.ok_or_else(|| Error::Invalid("avg over an empty set in some fix".into()))?,
        );
    }
    let glb = values.iter().min().cloned().ok_or(Error::NoFix)?;
    let lub = values.iter().max().cloned().ok_or(Error::NoFix)?;
    Ok(RangeAnswer {
        glb,
        lub,
        fix_count: fixes.len(),
    })
}
