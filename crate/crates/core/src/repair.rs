//! Constraint satisfaction, violation sets, the conflict hypergraph, the
//! locality test and per-tuple local fixes.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lang::{
    compare_values, integer_bounds, AggBound, AggFunc, AggSide, AggregationConstraint, Bound,
    Constraint, DenialConstraint, Expr, Term,
};
use crate::matching::{indexed_rows, CompiledBody, Row};
use crate::model::{Instance, RelationSchema, Schema, Tuple, TupleId, Value};
use crate::rational::Rational;

/// Search limits shared by violation enumeration, the candidate grid and the
/// exact solver.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FixSearchConfig {
    /// Cap on explored search nodes (exact solver) and on grid products
    /// enumerated for a single tuple.
    pub max_grid_points: u64,
    /// Cap on satisfying assignments enumerated per constraint.
    pub max_assignments: u64,
    /// Replaces the `n + 1` window used around linked attributes.
    pub window_radius_override: Option<i64>,
}

impl Default for FixSearchConfig {
    fn default() -> Self {
        FixSearchConfig {
            max_grid_points: 10_000_000,
            max_assignments: 1_000_000,
            window_radius_override: None,
        }
    }
}

/// Splits off the denials, rejecting aggregation constraints.
pub fn denials(ics: &[Constraint]) -> Result<Vec<DenialConstraint>> {
    ics.iter()
        .map(|c| match c {
            Constraint::Denial(d) => Ok(d.clone()),
            Constraint::Aggregation(a) => Err(Error::UnsupportedConstraint(format!(
                "aggregation constraint `{}` cannot drive fix search",
                a.label
            ))),
        })
        .collect()
}

fn atom_rows<'a>(
    body: &CompiledBody,
    rows: &'a HashMap<&str, Vec<Row<'a>>>,
) -> Vec<&'a [Row<'a>]> {
    body.atoms
        .iter()
        .map(|a| rows.get(a.relation.as_str()).map_or(&[][..], |r| r.as_slice()))
        .collect()
}

/// True iff `d` satisfies `ic`. Aggregation constraints are evaluated by
/// direct aggregation.
pub fn satisfies(d: &Instance, ic: &Constraint) -> Result<bool> {
    match ic {
        Constraint::Denial(den) => {
            let body = CompiledBody::new(&den.body);
            let rows = indexed_rows(d);
            Ok(!body.any(&atom_rows(&body, &rows)))
        }
        Constraint::Aggregation(ac) => satisfies_aggregation(d, ac),
    }
}

pub fn satisfies_all(d: &Instance, ics: &[Constraint]) -> Result<bool> {
    for ic in ics {
        if !satisfies(d, ic)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn eval_expr(e: &Expr, rel: &RelationSchema, values: &[Value]) -> Result<i128> {
    Ok(match e {
        Expr::Attr(a) => {
            let pos = rel
                .position(a)
                .ok_or_else(|| Error::Invalid(format!("`{}` has no attribute `{a}`", rel.name)))?;
            values[pos]
                .as_int()
                .ok_or_else(|| Error::Type(format!("`{a}` is not an integer")))? as i128
        }
        Expr::Const(c) => *c as i128,
        Expr::Neg(x) => -eval_expr(x, rel, values)?,
        Expr::Add(a, b) => eval_expr(a, rel, values)? + eval_expr(b, rel, values)?,
        Expr::Sub(a, b) => eval_expr(a, rel, values)? - eval_expr(b, rel, values)?,
        Expr::Mul(a, b) => eval_expr(a, rel, values)? * eval_expr(b, rel, values)?,
    })
}

/// `None` for `avg` over an empty selection.
fn eval_side(d: &Instance, side: &AggSide) -> Result<Option<Rational>> {
    let rel = d.schema().get(&side.relation)?;
    let term_value = |t: &Term, values: &[Value]| -> Result<Value> {
        match t {
            Term::Const(c) => Ok(c.clone()),
            Term::Var(a) => rel
                .position(a)
                .map(|p| values[p].clone())
                .ok_or_else(|| Error::Invalid(format!("`{}` has no attribute `{a}`", rel.name))),
        }
    };
    let (mut sum, mut count) = (0i128, 0i128);
    for t in d.relation_tuples(&side.relation) {
        let mut keep = true;
        for c in &side.filter {
            if !compare_values(&term_value(&c.lhs, &t.values)?, c.op, &term_value(&c.rhs, &t.values)?) {
                keep = false;
                break;
            }
        }
        if keep {
            count += 1;
            if side.func != AggFunc::Count {
                sum += eval_expr(&side.arg, rel, &t.values)?;
            }
        }
    }
    let big = |v: i128| Rational::from_bigint(v.into());
    Ok(match side.func {
        AggFunc::Sum => Some(big(sum)),
        AggFunc::Count => Some(big(count)),
        AggFunc::Avg if count == 0 => None,
        AggFunc::Avg => Some(big(sum) / big(count)),
        AggFunc::CountDistinct => {
            return Err(Error::UnsupportedConstraint("countd in an aggregation constraint".into()))
        }
    })
}

fn satisfies_aggregation(d: &Instance, ac: &AggregationConstraint) -> Result<bool> {
    let lhs = eval_side(d, &ac.lhs)?;
    let rhs = match &ac.rhs {
        AggBound::Const(k) => Some(Rational::from_int(*k)),
        AggBound::Side(s) => eval_side(d, s)?,
    };
    // An average over nothing constrains nothing.
    Ok(match (lhs, rhs) {
        (Some(l), Some(r)) => ac.op.holds(&l, &r),
        _ => true,
    })
}

/// An inclusion-minimal set of tuples that jointly falsify a denial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ViolationSet {
    pub constraint: String,
    pub tuples: BTreeSet<TupleId>,
}

/// All violation sets of `ic` in `d`, ordered by their sorted tuple ids.
pub fn violation_sets(d: &Instance, ic: &DenialConstraint, cfg: &FixSearchConfig) -> Result<Vec<ViolationSet>> {
    let body = CompiledBody::new(&ic.body);
    let rows = indexed_rows(d);
    let mut found: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
    let mut count = 0u64;
    let mut over = false;
    body.for_each(&atom_rows(&body, &rows), &mut |_, ids| {
        count += 1;
        if count > cfg.max_assignments {
            over = true;
            return false;
        }
        found.insert(ids.iter().copied().collect());
        true
    });
    if over {
        return Err(Error::CapExceeded {
            what: "violation assignments",
            limit: cfg.max_assignments,
        });
    }
    let minimal: Vec<&BTreeSet<usize>> = found
        .iter()
        .filter(|s| !found.iter().any(|o| o.len() < s.len() && o.is_subset(s)))
        .collect();
    Ok(minimal
        .into_iter()
        .map(|s| ViolationSet {
            constraint: ic.label.clone(),
            tuples: s.iter().map(|&i| TupleId(i)).collect(),
        })
        .collect())
}

/// Tuples as vertices, violation sets as labelled hyperedges (constraint
/// order, then tuple-id order). Equal tuple sets under different labels stay
/// separate edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConflictHypergraph {
    pub vertices: Vec<Tuple>,
    pub edges: Vec<ViolationSet>,
}

impl ConflictHypergraph {
    /// Indices of the edges that contain `t`.
    pub fn edges_of(&self, t: TupleId) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edges[e].tuples.contains(&t))
            .collect()
    }
}

pub fn conflict_hypergraph(d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<ConflictHypergraph> {
    let mut edges = Vec::new();
    for ic in denials(ics)? {
        edges.extend(violation_sets(d, &ic, cfg)?);
    }
    Ok(ConflictHypergraph {
        vertices: d.tuples().cloned().collect(),
        edges,
    })
}

/// A database position: relation name and attribute index.
pub type Position = (String, usize);

/// Outcome of the locality test; each diagnostic names the failed clause.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LocalityReport {
    pub local: bool,
    pub diagnostics: Vec<String>,
}

/// Variable occurrences of one denial.
fn occurrences(ic: &DenialConstraint) -> BTreeMap<&str, Vec<Position>> {
    let mut occ: BTreeMap<&str, Vec<Position>> = BTreeMap::new();
    for atom in ic.atoms() {
        for (i, arg) in atom.args.iter().enumerate() {
            if let Term::Var(v) = arg {
                occ.entry(v.as_str()).or_default().push((atom.relation.clone(), i));
            }
        }
    }
    occ
}

fn is_fixable(schema: &Schema, (rel, pos): &Position) -> bool {
    schema
        .get(rel)
        .map(|r| r.attributes[*pos].is_fixable())
        .unwrap_or(false)
}

/// Constant comparisons per fixable position, implicit `R(.., c, ..)`
/// constants included as `= c`.
fn fixable_constant_bounds(ic: &DenialConstraint, schema: &Schema) -> Vec<(Position, Vec<Bound>)> {
    let occ = occurrences(ic);
    let mut out = Vec::new();
    for atom in ic.atoms() {
        for (i, arg) in atom.args.iter().enumerate() {
            if let Term::Const(Value::Int(c)) = arg {
                let p = (atom.relation.clone(), i);
                if is_fixable(schema, &p) {
                    out.push((p, integer_bounds(crate::lang::CompOp::Eq, *c)));
                }
            }
        }
    }
    for cmp in ic.comparisons() {
        if let Some((v, op, Value::Int(c))) = cmp.var_const() {
            for p in occ.get(v).into_iter().flatten() {
                if is_fixable(schema, p) {
                    out.push((p.clone(), integer_bounds(op, *c)));
                }
            }
        }
    }
    out
}

/// The locality test. Clause (c) is applied to fixable attributes only:
/// rigid attributes never change, so bounds on them cannot squeeze a fix.
pub fn is_local(ics: &[Constraint], schema: &Schema) -> LocalityReport {
    let mut diagnostics = Vec::new();
    let mut directions: BTreeMap<Position, (bool, bool)> = BTreeMap::new();
    for ic in ics {
        let Constraint::Denial(ic) = ic else {
            diagnostics.push(format!("`{}` is an aggregation constraint", ic.label()));
            continue;
        };
        let occ = occurrences(ic);
        let mut joined: BTreeSet<&str> = occ
            .iter()
            .filter(|(_, ps)| ps.len() > 1)
            .map(|(v, _)| *v)
            .collect();
        for cmp in ic.comparisons() {
            if let Some((a, _, b)) = cmp.var_var() {
                joined.insert(a);
                joined.insert(b);
            }
        }
        for v in joined {
            for p in occ.get(v).into_iter().flatten() {
                if is_fixable(schema, p) {
                    diagnostics.push(format!(
                        "(a) `{}`: fixable attribute {}.{} takes part in a join or attribute comparison",
                        ic.label,
                        p.0,
                        attr_name(schema, p)
                    ));
                }
            }
        }
        let bounds = fixable_constant_bounds(ic, schema);
        if bounds.is_empty() {
            diagnostics.push(format!(
                "(b) `{}` has no built-in comparison on a fixable attribute",
                ic.label
            ));
        }
        for (p, bs) in bounds {
            let e = directions.entry(p).or_insert((false, false));
            for b in bs {
                match b {
                    Bound::Lt(_) => e.0 = true,
                    Bound::Gt(_) => e.1 = true,
                }
            }
        }
    }
    for (p, (lt, gt)) in &directions {
        if *lt && *gt {
            diagnostics.push(format!(
                "(c) fixable attribute {}.{} is bounded from both sides",
                p.0,
                attr_name(schema, p)
            ));
        }
    }
    diagnostics.dedup();
    LocalityReport {
        local: diagnostics.is_empty(),
        diagnostics,
    }
}

fn attr_name(schema: &Schema, (rel, pos): &Position) -> String {
    schema
        .get(rel)
        .map(|r| r.attributes[*pos].name.clone())
        .unwrap_or_else(|_| pos.to_string())
}

/// Candidate values per fixable cell.
///
/// A fixable position compared only with constants gets `{c-1, c, c+1}` for
/// every such constant. A position linked to others by a shared variable or a
/// variable-to-variable comparison additionally gets a window of radius
/// `n + 1` around every border and every column value in its linked group.
/// The original value is always a candidate.
#[derive(Clone, Debug)]
pub struct CandidateGrid {
    borders: HashMap<Position, BTreeSet<i64>>,
    linked_values: HashMap<Position, BTreeSet<i64>>,
    radius: i64,
}

impl CandidateGrid {
    pub fn new(d: &Instance, ics: &[DenialConstraint], radius_override: Option<i64>) -> Self {
        let schema = d.schema();
        let mut borders: HashMap<Position, BTreeSet<i64>> = HashMap::new();
        let mut parent: HashMap<Position, Position> = HashMap::new();
        let mut linked: HashSet<Position> = HashSet::new();

        fn find(parent: &mut HashMap<Position, Position>, p: &Position) -> Position {
            let up = parent.entry(p.clone()).or_insert_with(|| p.clone()).clone();
            if &up == p {
                return up;
            }
            let root = find(parent, &up);
            parent.insert(p.clone(), root.clone());
            root
        }
        fn union(parent: &mut HashMap<Position, Position>, a: &Position, b: &Position) {
            let (ra, rb) = (find(parent, a), find(parent, b));
            if ra != rb {
                parent.insert(ra, rb);
            }
        }

        for ic in ics {
            let occ = occurrences(ic);
            for (p, bs) in fixable_constant_bounds(ic, schema) {
                let set = borders.entry(p).or_default();
                for b in bs {
                    // Undo the normalization to recover the constant itself.
                    let c = match b {
                        Bound::Lt(c) | Bound::Gt(c) => c,
                    };
                    set.extend([c - 1, c, c + 1]);
                }
            }
            for ps in occ.values() {
                if ps.len() > 1 {
                    for p in ps {
                        linked.insert(p.clone());
                        union(&mut parent, &ps[0], p);
                    }
                }
            }
            for cmp in ic.comparisons() {
                if let Some((a, _, b)) = cmp.var_var() {
                    let pa = occ.get(a).cloned().unwrap_or_default();
                    let pb = occ.get(b).cloned().unwrap_or_default();
                    for p in pa.iter().chain(&pb) {
                        linked.insert(p.clone());
                        union(&mut parent, &pa[0], p);
                    }
                }
            }
        }

        let mut group_values: HashMap<Position, BTreeSet<i64>> = HashMap::new();
        for p in &linked {
            let root = find(&mut parent, p);
            let vals = group_values.entry(root).or_default();
            if let Some(b) = borders.get(p) {
                vals.extend(b.iter().copied());
            }
            vals.extend(
                d.relation_tuples(&p.0)
                    .filter_map(|t| t.values.get(p.1).and_then(Value::as_int)),
            );
        }
        let mut linked_values = HashMap::new();
        for p in linked {
            if is_fixable(schema, &p) {
                let root = find(&mut parent, &p);
                linked_values.insert(p, group_values[&root].clone());
            }
        }
        CandidateGrid {
            borders,
            linked_values,
            radius: radius_override.unwrap_or(d.len() as i64 + 1),
        }
    }

    /// Candidates for one cell, cheapest first (ties by value).
    pub fn cell(&self, relation: &str, pos: usize, original: i64) -> Vec<i64> {
        let key = (relation.to_string(), pos);
        let mut set: BTreeSet<i64> = BTreeSet::new();
        set.insert(original);
        if let Some(b) = self.borders.get(&key) {
            set.extend(b.iter().copied());
        }
        if let Some(vals) = self.linked_values.get(&key) {
            for &v in vals.iter().chain(std::iter::once(&original)) {
                set.extend(v.saturating_sub(self.radius)..=v.saturating_add(self.radius));
            }
        }
        let mut out: Vec<i64> = set.into_iter().collect();
        out.sort_by_key(|&v| ((v as i128 - original as i128).abs(), v));
        out
    }

    /// True iff `value` is a candidate for the cell whose original is `original`.
    pub fn contains(&self, relation: &str, pos: usize, original: i64, value: i64) -> bool {
        self.cell(relation, pos, original).contains(&value)
    }

    /// Every combination of cell candidates for `t`, as full value vectors
    /// with their distance from `t`. Errors beyond `cap` combinations.
    pub fn tuple_candidates(&self, rel: &RelationSchema, t: &Tuple, cap: u64) -> Result<Vec<(Vec<Value>, Rational)>> {
        let cells: Vec<(usize, Vec<i64>)> = rel
            .fixable_positions()
            .map(|p| {
                let orig = t.values[p].as_int().expect("fixable attributes are integers");
                (p, self.cell(&rel.name, p, orig))
            })
            .collect();
        let total = cells
            .iter()
            .try_fold(1u64, |acc, (_, c)| acc.checked_mul(c.len() as u64))
            .unwrap_or(u64::MAX);
        if total > cap {
            return Err(Error::CapExceeded {
                what: "candidate grid",
                limit: cap,
            });
        }
        let mut out = Vec::with_capacity(total as usize);
        let mut idx = vec![0usize; cells.len()];
        loop {
            let mut values = t.values.clone();
            for (k, (p, cands)) in cells.iter().enumerate() {
                values[*p] = Value::Int(cands[idx[k]]);
            }
            let cost = rel.tuple_distance(&t.values, &values);
            out.push((values, cost));
            let mut k = 0;
            loop {
                if k == cells.len() {
                    return Ok(out);
                }
                idx[k] += 1;
                if idx[k] < cells[k].1.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

/// A per-tuple repair candidate together with the hyperedges it resolves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LocalFix {
    pub owner: TupleId,
    pub original: Tuple,
    pub fixed: Tuple,
    /// Indices into the hypergraph's edge list.
    pub resolved: BTreeSet<usize>,
    pub cost: Rational,
}

/// Shared state for local-fix computations over one instance.
pub struct RepairContext<'a> {
    pub instance: &'a Instance,
    pub denials: Vec<DenialConstraint>,
    pub hypergraph: ConflictHypergraph,
    pub grid: CandidateGrid,
    pub config: FixSearchConfig,
    compiled: HashMap<String, CompiledBody>,
}

/// A grid point for one tuple: values, cost and resolved edges.
type Candidate = (Vec<Value>, Rational, BTreeSet<usize>);

impl<'a> RepairContext<'a> {
    pub fn new(d: &'a Instance, ics: &[Constraint], config: &FixSearchConfig) -> Result<Self> {
        let denials = denials(ics)?;
        let hypergraph = conflict_hypergraph(d, ics, config)?;
        let grid = CandidateGrid::new(d, &denials, config.window_radius_override);
        let compiled = denials
            .iter()
            .map(|ic| (ic.label.clone(), CompiledBody::new(&ic.body)))
            .collect();
        Ok(RepairContext {
            instance: d,
            denials,
            hypergraph,
            grid,
            config: config.clone(),
            compiled,
        })
    }

    pub fn tuple_id(&self, t: &Tuple) -> Result<TupleId> {
        self.hypergraph
            .vertices
            .iter()
            .position(|v| v == t)
            .map(TupleId)
            .ok_or_else(|| Error::Data(format!("{t} is not in the instance")))
    }

    /// Whether `(I \ {t}) ∪ {t'}` satisfies the edge's constraint.
    fn resolves(&self, edge: usize, owner: TupleId, replacement: &[Value]) -> bool {
        let e = &self.hypergraph.edges[edge];
        let body = &self.compiled[&e.constraint];
        let mut rows: HashMap<&str, Vec<Row<'_>>> = HashMap::new();
        for &id in &e.tuples {
            let t = &self.hypergraph.vertices[id.0];
            let values = if id == owner { replacement } else { t.values.as_slice() };
            rows.entry(t.relation.as_str()).or_default().push((id.0, values));
        }
        !body.any(&atom_rows(body, &rows))
    }

    fn candidates(&self, owner: TupleId) -> Result<Vec<Candidate>> {
        let t = &self.hypergraph.vertices[owner.0];
        let edges = self.hypergraph.edges_of(owner);
        if edges.is_empty() {
            return Ok(Vec::new());
        }
        let rel = self.instance.schema().get(&t.relation)?;
        let points = self.grid.tuple_candidates(rel, t, self.config.max_grid_points)?;
        Ok(points
            .into_iter()
            .map(|(values, cost)| {
                let resolved = edges
                    .iter()
                    .copied()
                    .filter(|&e| self.resolves(e, owner, &values))
                    .collect();
                (values, cost, resolved)
            })
            .collect())
    }

    fn local_fix(&self, owner: TupleId, (values, cost, resolved): Candidate) -> LocalFix {
        let original = self.hypergraph.vertices[owner.0].clone();
        LocalFix {
            owner,
            fixed: Tuple::new(&original.relation, values),
            original,
            resolved,
            cost,
        }
    }

    /// Local fixes of the tuple with id `owner`: for every achievable
    /// nonempty resolved set, all of its cheapest grid points. Sorted by
    /// cost, then values.
    pub fn local_fixes(&self, owner: TupleId) -> Result<Vec<LocalFix>> {
        let mut best: BTreeMap<BTreeSet<usize>, (Rational, Vec<Vec<Value>>)> = BTreeMap::new();
        for (values, cost, resolved) in self.candidates(owner)? {
            if resolved.is_empty() {
                continue;
            }
            match best.get_mut(&resolved) {
                Some((c, vs)) if *c == cost => vs.push(values),
                Some((c, _)) if *c < cost => {}
                _ => {
                    best.insert(resolved, (cost, vec![values]));
                }
            }
        }
        let mut out: Vec<LocalFix> = best
            .into_iter()
            .flat_map(|(resolved, (cost, vs))| {
                vs.into_iter()
                    .map(move |v| (v, cost.clone(), resolved.clone()))
            })
            .map(|c| self.local_fix(owner, c))
            .collect();
        out.sort_by(|a, b| (&a.cost, &a.fixed.values).cmp(&(&b.cost, &b.fixed.values)));
        Ok(out)
    }

    /// The cheapest grid point (smallest values on ties) resolving at least
    /// the union of the given fixes' resolved sets.
    pub fn combine_local_fixes(&self, owner: TupleId, fixes: &[LocalFix]) -> Result<LocalFix> {
        if fixes.iter().any(|f| f.owner != owner) {
            return Err(Error::Invalid("local fixes belong to different tuples".into()));
        }
        let union: BTreeSet<usize> = fixes.iter().flat_map(|f| f.resolved.iter().copied()).collect();
        let best = self
            .candidates(owner)?
            .into_iter()
            .filter(|(_, _, r)| !union.is_empty() && r.is_superset(&union))
            .min_by(|a, b| (&a.1, &a.0).cmp(&(&b.1, &b.0)));
        match best {
            Some(c) => Ok(self.local_fix(owner, c)),
            None => Err(Error::NoCombinedFix(format!(
                "{} for edges {:?}",
                self.hypergraph.vertices[owner.0], union
            ))),
        }
    }
}

/// Local fixes for `t` in `d`; see [`RepairContext::local_fixes`].
pub fn local_fixes(t: &Tuple, d: &Instance, ics: &[Constraint]) -> Result<Vec<LocalFix>> {
    let ctx = RepairContext::new(d, ics, &FixSearchConfig::default())?;
    let id = ctx.tuple_id(t)?;
    ctx.local_fixes(id)
}

pub fn combine_local_fixes(t: &Tuple, fixes: &[LocalFix], d: &Instance, ics: &[Constraint]) -> Result<LocalFix> {
    let ctx = RepairContext::new(d, ics, &FixSearchConfig::default())?;
    let id = ctx.tuple_id(t)?;
    ctx.combine_local_fixes(id, fixes)
}
