//! Serializable results of the front-end commands, shared by the CLI and
//! the C ABI. Rationals serialize as `"num/den"` strings.

use std::fmt::Write as _;

use serde::Serialize;

use crate::cover::{
    build_from_context, greedy_cover, primal_dual_cover, star_normalize, apply_cover, exact_cover, Cover,
    EXACT_COVER_MAX_SETS,
};
use crate::error::{Error, Result};
use crate::exact::{dfp, ls_fixes, FixSearchConfig};
use crate::gf2::{assignment_to_fix, build_rwae2, derandomize, guarantee, DecisionStep};
use crate::lang::{classify_constraint, ConstraintClass, Constraint, Query};
use crate::model::{Instance, Tuple};
use crate::query::{
    all_fixes, cqa_over, enumerate_fixes_1ad, in_ctree, join_graph, reduce_1ad, Bag, CqaAnswer, FixSource,
    JoinGraph, Semantics, MAX_ENUMERATED_FIXES,
};
use crate::rational::Rational;
use crate::repair::{conflict_hypergraph, is_local, satisfies, RepairContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Greedy,
    PrimalDual,
    #[serde(rename = "1ad")]
    OneAtom,
}

impl Method {
    pub fn parse(text: &str) -> Option<Method> {
        match text {
            "exact" => Some(Method::Exact),
            "greedy" => Some(Method::Greedy),
            "primal-dual" => Some(Method::PrimalDual),
            "1ad" => Some(Method::OneAtom),
            _ => None,
        }
    }
}

impl Semantics {
    pub fn parse(text: &str) -> Option<Semantics> {
        match text {
            "skeptical" => Some(Semantics::Skeptical),
            "brave" => Some(Semantics::Brave),
            "majority" => Some(Semantics::Majority),
            "range" => Some(Semantics::Range),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstraintStatus {
    pub label: String,
    pub satisfied: bool,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ViolationEntry {
    pub constraint: String,
    /// Tuple ids (`t1`, `t2`, ... in canonical order).
    pub ids: Vec<String>,
    pub tuples: Vec<Tuple>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub consistent: bool,
    pub constraints: Vec<ConstraintStatus>,
    pub violations: Vec<ViolationEntry>,
}

/// Satisfaction per constraint; violation sets are listed for denials.
pub fn check(d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<CheckReport> {
    let denials: Vec<Constraint> = ics.iter().filter(|c| c.as_denial().is_some()).cloned().collect();
    let graph = conflict_hypergraph(d, &denials, cfg)?;
    let mut constraints = Vec::with_capacity(ics.len());
    for ic in ics {
        let violations = graph.edges.iter().filter(|e| e.constraint == ic.label()).count();
        let satisfied = match ic {
            Constraint::Denial(_) => violations == 0,
            Constraint::Aggregation(_) => satisfies(d, ic)?,
        };
        constraints.push(ConstraintStatus {
            label: ic.label().to_string(),
            satisfied,
            violations: if satisfied { 0 } else { violations.max(1) },
        });
    }
    let violations = graph
        .edges
        .iter()
        .map(|e| ViolationEntry {
            constraint: e.constraint.clone(),
            ids: e.tuples.iter().map(|t| t.to_string()).collect(),
            tuples: e.tuples.iter().map(|t| graph.vertices[t.0].clone()).collect(),
        })
        .collect();
    Ok(CheckReport {
        consistent: constraints.iter().all(|c| c.satisfied),
        constraints,
        violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverSummary {
    pub chosen: Vec<String>,
    pub weight: Rational,
    pub trace: Vec<crate::cover::TraceStep>,
    /// Number of elements (violation sets) to cover.
    pub elements: usize,
    pub max_frequency: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixReport {
    pub method: Method,
    pub fix_count: usize,
    /// Distance of each reported fix; equal for exact methods.
    pub distance: Option<Rational>,
    /// Proven worst-case ratio to the optimum: 1 for exact methods,
    /// `1 + ln N` for greedy, the largest element frequency for primal-dual.
    pub bound_factor: Option<f64>,
    pub cover: Option<CoverSummary>,
    /// With a budget `k`: does some fix lie within distance `k`?
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_k: Option<bool>,
    #[serde(skip)]
    pub fixes: Vec<Instance>,
}

pub fn fix(
    d: &Instance,
    ics: &[Constraint],
    method: Method,
    k: Option<&Rational>,
    cfg: &FixSearchConfig,
) -> Result<FixReport> {
    let (fixes, cover) = match method {
        Method::Exact => (ls_fixes(d, ics, cfg)?.fixes, None),
        Method::OneAtom => (enumerate_fixes_1ad(d, ics, cfg, MAX_ENUMERATED_FIXES)?, None),
        Method::Greedy | Method::PrimalDual => {
            let report = is_local(ics, d.schema());
            if !report.local {
                return Err(Error::NotLocal(report.diagnostics.join("; ")));
            }
            let ctx = RepairContext::new(d, ics, cfg)?;
            let ci = build_from_context(&ctx)?;
            if ci.elements.is_empty() {
                (vec![d.clone()], None)
            } else {
                let raw = if method == Method::Greedy {
                    greedy_cover(&ci)?
                } else {
                    primal_dual_cover(&ci)?
                };
                let normal = star_normalize(&raw, &ci, &ctx)?;
                let fixed = apply_cover(d, &normal, &ci)?;
                let bound = if method == Method::Greedy {
                    1.0 + (ci.elements.len() as f64).ln()
                } else {
                    ci.max_frequency() as f64
                };
                let summary = CoverSummary {
                    chosen: normal.chosen.iter().map(|s| s.to_string()).collect(),
                    weight: normal.weight.clone(),
                    trace: raw.trace,
                    elements: ci.elements.len(),
                    max_frequency: ci.max_frequency(),
                };
                (vec![fixed], Some((summary, bound)))
            }
        }
    };
    if fixes.is_empty() {
        return Err(Error::NoFix);
    }
    let distance = Some(d.distance(&fixes[0])?);
    let bound_factor = Some(cover.as_ref().map_or(1.0, |(_, b)| *b));
    Ok(FixReport {
        method,
        fix_count: fixes.len(),
        distance,
        bound_factor,
        cover: cover.map(|(c, _)| c),
        within_k: match k {
            Some(k) => Some(dfp(d, ics, k, cfg)?),
            None => None,
        },
        fixes,
    })
}

/// Exact optimum of the set-cover instance, for small instances.
pub fn optimal_cover(d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<Cover> {
    let ctx = RepairContext::new(d, ics, cfg)?;
    exact_cover(&build_from_context(&ctx)?, EXACT_COVER_MAX_SETS)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CqaReport {
    pub query: String,
    pub semantics: Semantics,
    pub source: FixSource,
    pub fix_count: usize,
    /// `"yes"`/`"no"` for Boolean queries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<crate::query::Cell>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub glb: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lub: Option<Rational>,
    /// With a threshold `k` under range semantics: is the aggregate at most
    /// (resp. at least) `k` in every fix?
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at_most_k: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at_least_k: Option<bool>,
    pub warnings: Vec<String>,
}

pub fn cqa(
    q: &Query,
    d: &Instance,
    ics: &[Constraint],
    semantics: Semantics,
    k: Option<&Rational>,
    cfg: &FixSearchConfig,
) -> Result<CqaReport> {
    let (fixes, source) = all_fixes(d, ics, cfg)?;
    let result = cqa_over(q, &fixes, semantics, source)?;
    let mut report = CqaReport {
        query: q.to_string(),
        semantics,
        source,
        fix_count: result.fix_count,
        answer: None,
        rows: None,
        glb: None,
        lub: None,
        at_most_k: None,
        at_least_k: None,
        warnings: Vec::new(),
    };
    if result.fix_count == 0 {
        report.warnings.push("the instance has no fix; answers are vacuous".into());
    }
    match result.answer {
        CqaAnswer::Boolean(b) => report.answer = Some(if b { "yes" } else { "no" }),
        CqaAnswer::Rows(set) => report.rows = Some(set.rows.into_iter().collect()),
        CqaAnswer::Range { glb, lub } => {
            if let Some(k) = k {
                report.at_most_k = Some(lub <= *k);
                report.at_least_k = Some(glb >= *k);
            }
            report.glb = Some(glb);
            report.lub = Some(lub);
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstraintInfo {
    pub label: String,
    pub class: ConstraintClass,
    pub one_atom: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QueryInfo {
    pub query: String,
    pub in_ctree: bool,
    pub reason: String,
    pub join_graph: JoinGraph,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassifyReport {
    pub local: bool,
    pub diagnostics: Vec<String>,
    pub all_one_atom: bool,
    pub constraints: Vec<ConstraintInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query: Option<QueryInfo>,
}

pub fn classify(schema: &crate::model::Schema, ics: &[Constraint], q: Option<&Query>) -> Result<ClassifyReport> {
    let locality = is_local(ics, schema);
    let constraints: Vec<ConstraintInfo> = ics
        .iter()
        .map(|ic| ConstraintInfo {
            label: ic.label().to_string(),
            class: classify_constraint(ic),
            one_atom: ic.as_denial().is_some_and(|d| d.is_one_atom()),
        })
        .collect();
    let query = match q {
        Some(q) => {
            let c = q.conjunctive();
            let tree = in_ctree(c, schema)?;
            Some(QueryInfo {
                query: q.to_string(),
                in_ctree: tree.in_ctree,
                reason: tree.reason,
                join_graph: join_graph(c, schema)?,
            })
        }
        None => None,
    };
    Ok(ClassifyReport {
        local: locality.local,
        diagnostics: locality.diagnostics,
        all_one_atom: constraints.iter().all(|c| c.one_atom),
        constraints,
        query,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ApproxReport {
    pub approx_value: Rational,
    pub guarantee_factor: Rational,
    pub k: usize,
    pub m: usize,
    pub bags: usize,
    pub equations: usize,
    pub expected: Rational,
    pub steps: Vec<DecisionStep>,
    #[serde(skip)]
    pub fix: Instance,
}

pub fn approx_sum(q: &Query, d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<ApproxReport> {
    let sys = build_rwae2(q.conjunctive(), d, ics, cfg)?;
    let out = derandomize(&sys);
    Ok(ApproxReport {
        approx_value: Rational::from_bigint(out.weight.into()),
        guarantee_factor: guarantee(&sys),
        k: sys.k,
        m: sys.m,
        bags: sys.bags.len(),
        equations: sys.equations.len(),
        expected: out.initial,
        fix: assignment_to_fix(d, &sys.bags, &out.selection)?,
        steps: out.steps,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReduceReport {
    /// Number of fixes encoded by the bags, as a decimal string.
    pub fix_count: String,
    pub bags: Vec<Bag>,
}

pub fn reduce(d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<ReduceReport> {
    let kri = reduce_1ad(d, ics, cfg)?;
    Ok(ReduceReport {
        fix_count: kri.fix_count().to_string(),
        bags: kri.bags,
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

/// Plain-text rendering for `--output table`.
pub trait Table {
    fn table(&self) -> String;
}

fn tuples_line(ts: &[Tuple]) -> String {
    ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
}

impl Table for CheckReport {
    fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.constraints {
            let status = if c.satisfied { "ok" } else { "violated" };
            let _ = writeln!(s, "{:<16} {:<9} {}", c.label, status, c.violations);
        }
        for v in &self.violations {
            let _ = writeln!(s, "{:<16} {{{}}} {}", v.constraint, v.ids.join(","), tuples_line(&v.tuples));
        }
        let _ = writeln!(s, "{}", if self.consistent { "consistent" } else { "inconsistent" });
        s
    }
}

impl Table for FixReport {
    fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "method      {}", serde_json::to_value(self.method).unwrap().as_str().unwrap());
        let _ = writeln!(s, "fixes       {}", self.fix_count);
        if let Some(d) = &self.distance {
            let _ = writeln!(s, "distance    {d}");
        }
        if let Some(b) = self.bound_factor {
            let _ = writeln!(s, "bound       {b:.4}");
        }
        if let Some(c) = &self.cover {
            let trace: Vec<String> = c.trace.iter().map(|t| t.chosen.to_string()).collect();
            let _ = writeln!(s, "cover       {} (weight {})", c.chosen.join(","), c.weight);
            let _ = writeln!(s, "trace       {}", trace.join(","));
        }
        for (i, f) in self.fixes.iter().enumerate() {
            let _ = writeln!(s, "fix {}       {}", i + 1, tuples_line(&f.canonical()));
        }
        s
    }
}

impl Table for CqaReport {
    fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "fixes       {}", self.fix_count);
        if let Some(a) = self.answer {
            let _ = writeln!(s, "answer      {a}");
        }
        if let Some(rows) = &self.rows {
            for r in rows {
                let cells: Vec<String> = r.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(s, "({})", cells.join(","));
            }
        }
        if let (Some(g), Some(l)) = (&self.glb, &self.lub) {
            let _ = writeln!(s, "range       [{g}, {l}]");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

impl Table for ClassifyReport {
    fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "local       {}", self.local);
        for d in &self.diagnostics {
            let _ = writeln!(s, "  {d}");
        }
        for c in &self.constraints {
            let class = serde_json::to_value(c.class).unwrap();
            let _ = writeln!(s, "{:<16} {:<10} 1ad={}", c.label, class.as_str().unwrap(), c.one_atom);
        }
        if let Some(q) = &self.query {
            let _ = writeln!(s, "ctree       {} ({})", q.in_ctree, q.reason);
        }
        s
    }
}

impl Table for ApproxReport {
    fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "value       {}", self.approx_value);
        let _ = writeln!(s, "guarantee   {}", self.guarantee_factor);
        let _ = writeln!(s, "expected    {}", self.expected);
        let _ = writeln!(s, "fix         {}", tuples_line(&self.fix.canonical()));
        s
    }
}

impl Table for ReduceReport {
    fn table(&self) -> String {
        let mut s = String::new();
        for b in &self.bags {
            let _ = writeln!(s, "{:<24} cost {:<8} {}", b.original.to_string(), b.cost.to_string(), tuples_line(&b.candidates));
        }
        let _ = writeln!(s, "fixes       {}", self.fix_count);
        s
    }
}
