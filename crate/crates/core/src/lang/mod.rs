//! Constraint and query language: ASTs, parsing, printing, classification.
//!
//! The concrete syntax:
//!
//! ```text
//! relation Client(id: int key, a: int fix, m: int fix weight 1/2)
//!
//! ic1: DENY Buy(id, i, p), Client(id, a, m), a < 18, p > 25.
//! ac1: AGG sum(m : a < 18) OF Client <= 100.
//!
//! q(x, y, sum(z)) <- R(x, y), Q(y, z, w), w != 3.
//! ASK sum(z) > 5 FROM q(sum(z)) <- R(x, y), Q(y, z, w), w != 3.
//! ```
//!
//! Bare identifiers in term position are variables; symbol constants are
//! quoted. `#` starts a line comment.

mod lexer;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::model::Value;

pub use parser::{parse_constraints, parse_denials, parse_query, parse_schema};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::as_var)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum CompOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CompOp {
    /// The operator with its operands swapped (`a < b` iff `b > a`).
    pub fn flipped(self) -> CompOp {
        match self {
            CompOp::Lt => CompOp::Gt,
            CompOp::Gt => CompOp::Lt,
            CompOp::Le => CompOp::Ge,
            CompOp::Ge => CompOp::Le,
            op => op,
        }
    }

    pub fn is_order(self) -> bool {
        matches!(self, CompOp::Lt | CompOp::Gt | CompOp::Le | CompOp::Ge)
    }

    pub fn holds<T: Ord>(self, a: &T, b: &T) -> bool {
        match self {
            CompOp::Eq => a == b,
            CompOp::Ne => a != b,
            CompOp::Lt => a < b,
            CompOp::Gt => a > b,
            CompOp::Le => a <= b,
            CompOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CompOp::Eq => "=",
            CompOp::Ne => "!=",
            CompOp::Lt => "<",
            CompOp::Gt => ">",
            CompOp::Le => "<=",
            CompOp::Ge => ">=",
        }
    }
}

/// Evaluates a comparison between two constants. Symbols only support `=`
/// and `!=`; values of different types are never equal.
pub fn compare_values(lhs: &Value, op: CompOp, rhs: &Value) -> bool {
    match (lhs, rhs) {
        (Value::Int(a), Value::Int(b)) => op.holds(a, b),
        (Value::Sym(a), Value::Sym(b)) => match op {
            CompOp::Eq => a == b,
            CompOp::Ne => a != b,
            _ => false,
        },
        _ => op == CompOp::Ne,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Comparison {
    pub lhs: Term,
    pub op: CompOp,
    pub rhs: Term,
}

impl Comparison {
    pub fn new(lhs: Term, op: CompOp, rhs: Term) -> Self {
        Comparison { lhs, op, rhs }
    }

    /// `var op const` orientation when exactly one side is a variable.
    pub fn var_const(&self) -> Option<(&str, CompOp, &Value)> {
        match (&self.lhs, &self.rhs) {
            (Term::Var(v), Term::Const(c)) => Some((v, self.op, c)),
            (Term::Const(c), Term::Var(v)) => Some((v, self.op.flipped(), c)),
            _ => None,
        }
    }

    pub fn var_var(&self) -> Option<(&str, CompOp, &str)> {
        match (&self.lhs, &self.rhs) {
            (Term::Var(a), Term::Var(b)) => Some((a, self.op, b)),
            _ => None,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        [&self.lhs, &self.rhs].into_iter().filter_map(Term::as_var)
    }
}

/// One-sided integer bound after rewriting `<=`, `>=`, `=`, `!=` into `<`
/// and `>` (`x <= c` becomes `x < c + 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Bound {
    Lt(i64),
    Gt(i64),
}

/// Normalized bounds for `var op c` over the integers. For `=` both bounds
/// hold jointly; for `!=` they are alternatives. Either way both directions
/// appear, which is what the locality test inspects.
pub fn integer_bounds(op: CompOp, c: i64) -> Vec<Bound> {
    match op {
        CompOp::Lt => vec![Bound::Lt(c)],
        CompOp::Gt => vec![Bound::Gt(c)],
        CompOp::Le => vec![Bound::Lt(c + 1)],
        CompOp::Ge => vec![Bound::Gt(c - 1)],
        CompOp::Eq => vec![Bound::Gt(c - 1), Bound::Lt(c + 1)],
        CompOp::Ne => vec![Bound::Lt(c), Bound::Gt(c)],
    }
}

/// A conjunction of database atoms and built-in comparisons.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Body {
    pub atoms: Vec<Atom>,
    pub comparisons: Vec<Comparison>,
}

impl Body {
    pub fn vars(&self) -> BTreeSet<&str> {
        self.atoms.iter().flat_map(|a| a.vars()).collect()
    }
}

/// `label: forall x. not (atoms, comparisons)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct DenialConstraint {
    pub label: String,
    pub body: Body,
}

impl DenialConstraint {
    pub fn atoms(&self) -> &[Atom] {
        &self.body.atoms
    }

    pub fn comparisons(&self) -> &[Comparison] {
        &self.body.comparisons
    }

    pub fn is_one_atom(&self) -> bool {
        self.body.atoms.len() == 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFunc {
    Sum,
    Count,
    #[serde(rename = "countd")]
    CountDistinct,
    Avg,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Sum => "sum",
            AggFunc::Count => "count",
            AggFunc::CountDistinct => "countd",
            AggFunc::Avg => "avg",
        }
    }

    pub fn from_name(name: &str) -> Option<AggFunc> {
        match name {
            "sum" => Some(AggFunc::Sum),
            "count" => Some(AggFunc::Count),
            "countd" => Some(AggFunc::CountDistinct),
            "avg" => Some(AggFunc::Avg),
            _ => None,
        }
    }
}

/// Arithmetic over attribute names of a single relation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Expr {
    Attr(String),
    Const(i64),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn attrs(&self, out: &mut Vec<String>) {
        match self {
            Expr::Attr(a) => out.push(a.clone()),
            Expr::Const(_) => {}
            Expr::Neg(e) => e.attrs(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.attrs(out);
                b.attrs(out);
            }
        }
    }
}

/// `agg(expr : filter) OF relation`. Filter terms use `Term::Var` for
/// attribute names.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct AggSide {
    pub func: AggFunc,
    pub arg: Expr,
    pub filter: Vec<Comparison>,
    pub relation: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum AggBound {
    Const(i64),
    Side(AggSide),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct AggregationConstraint {
    pub label: String,
    pub lhs: AggSide,
    pub op: CompOp,
    pub rhs: AggBound,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Constraint {
    Denial(DenialConstraint),
    Aggregation(AggregationConstraint),
}

impl Constraint {
    pub fn label(&self) -> &str {
        match self {
            Constraint::Denial(d) => &d.label,
            Constraint::Aggregation(a) => &a.label,
        }
    }

    pub fn as_denial(&self) -> Option<&DenialConstraint> {
        match self {
            Constraint::Denial(d) => Some(d),
            Constraint::Aggregation(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct QueryAggregate {
    pub func: AggFunc,
    pub var: String,
}

/// `name(head_vars; agg(z)) <- body`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ConjunctiveQuery {
    pub name: String,
    pub head_vars: Vec<String>,
    pub aggregate: Option<QueryAggregate>,
    pub body: Body,
}

impl ConjunctiveQuery {
    /// The non-aggregate matrix: same head and body, aggregate dropped.
    pub fn nam(&self) -> ConjunctiveQuery {
        ConjunctiveQuery {
            aggregate: None,
            ..self.clone()
        }
    }

    pub fn is_boolean(&self) -> bool {
        self.head_vars.is_empty() && self.aggregate.is_none()
    }

    pub fn is_scalar_aggregate(&self) -> bool {
        self.head_vars.is_empty() && self.aggregate.is_some()
    }
}

/// `ASK agg(z) op k FROM q(agg(z)) <- body`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct AggregateComparisonQuery {
    pub query: ConjunctiveQuery,
    pub op: CompOp,
    pub k: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Query {
    Conjunctive(ConjunctiveQuery),
    AggregateComparison(AggregateComparisonQuery),
}

impl Query {
    pub fn conjunctive(&self) -> &ConjunctiveQuery {
        match self {
            Query::Conjunctive(q) => q,
            Query::AggregateComparison(a) => &a.query,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintClass {
    Linear,
    Extended,
    HasAggregation,
}

/// Extended iff some `!=` relates two variables; aggregation constraints
/// form their own class.
pub fn classify_constraint(ic: &Constraint) -> ConstraintClass {
    match ic {
        Constraint::Denial(d) => classify_denial(d),
        Constraint::Aggregation(_) => ConstraintClass::HasAggregation,
    }
}

pub fn classify_denial(ic: &DenialConstraint) -> ConstraintClass {
    let extended = ic
        .comparisons()
        .iter()
        .any(|c| c.op == CompOp::Ne && c.var_var().is_some());
    if extended {
        ConstraintClass::Extended
    } else {
        ConstraintClass::Linear
    }
}

// ---------------------------------------------------------------------------
// Printing. Output re-parses to the same AST.

fn write_sym(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for ch in s.chars() {
        if ch == '"' || ch == '\\' {
            f.write_str("\\")?;
        }
        write!(f, "{ch}")?;
    }
    f.write_str("\"")
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(Value::Int(i)) => write!(f, "{i}"),
            Term::Const(Value::Sym(s)) => write_sym(f, s),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

impl fmt::Display for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for a in &self.atoms {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{a}")?;
        }
        for c in &self.comparisons {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Display for DenialConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: DENY {}.", self.label, self.body)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Attr(a) => f.write_str(a),
            Expr::Const(c) if *c < 0 => write!(f, "({c})"),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
        }
    }
}

impl fmt::Display for AggSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}", self.func.name(), self.arg)?;
        for (i, c) in self.filter.iter().enumerate() {
            f.write_str(if i == 0 { " : " } else { ", " })?;
            write!(f, "{c}")?;
        }
        write!(f, ") OF {}", self.relation)
    }
}

impl fmt::Display for AggregationConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: AGG {} {} ", self.label, self.lhs, self.op.symbol())?;
        match &self.rhs {
            AggBound::Const(k) => write!(f, "{k}.")?,
            AggBound::Side(s) => write!(f, "{s}.")?,
        }
        Ok(())
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Denial(d) => d.fmt(f),
            Constraint::Aggregation(a) => a.fmt(f),
        }
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        let mut items: Vec<String> = self.head_vars.clone();
        if let Some(agg) = &self.aggregate {
            items.push(format!("{}({})", agg.func.name(), agg.var));
        }
        write!(f, "{}) <- {}.", items.join(", "), self.body)
    }
}

impl fmt::Display for AggregateComparisonQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let agg = self
            .query
            .aggregate
            .as_ref()
            .expect("aggregate comparison query carries an aggregate");
        write!(
            f,
            "ASK {}({}) {} {} FROM {}",
            agg.func.name(),
            agg.var,
            self.op.symbol(),
            self.k,
            self.query
        )
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Conjunctive(q) => q.fmt(f),
            Query::AggregateComparison(q) => q.fmt(f),
        }
    }
}
