use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{tokenize, Tok, Token};
use super::*;
use crate::error::{Error, Result};
use crate::model::{AttrKind, AttributeSpec, DataType, RelationSchema, Schema, Value};
use crate::rational::Rational;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        Ok(Parser {
            toks: tokenize(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let t = &self.toks[self.pos];
        Err(Error::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => self.error(format!("expected {what}, found {}", describe(&other))),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.next();
            true
        } else {
            false
        }
    }

    fn integer(&mut self) -> Result<i64> {
        let negative = if *self.peek() == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Number(n) => match n.parse::<i64>() {
                Ok(v) => {
                    self.next();
                    Ok(if negative { -v } else { v })
                }
                Err(_) => self.error(format!("expected an integer, found `{n}`")),
            },
            other => self.error(format!("expected an integer, found {}", describe(&other))),
        }
    }

    fn rational(&mut self) -> Result<Rational> {
        let negative = if *self.peek() == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        let Tok::Number(n) = self.peek().clone() else {
            return self.error("expected a number");
        };
        self.next();
        let mut text = n;
        if *self.peek() == Tok::Slash {
            self.next();
            match self.peek().clone() {
                Tok::Number(d) => {
                    self.next();
                    text = format!("{text}/{d}");
                }
                _ => return self.error("expected a denominator"),
            }
        }
        let value: Rational = text
            .parse()
            .map_err(|e: crate::rational::ParseRationalError| Error::Schema(e.to_string()))?;
        Ok(if negative { -value } else { value })
    }

    fn op(&mut self) -> Result<CompOp> {
        let op = match self.peek() {
            Tok::Eq => CompOp::Eq,
            Tok::Ne => CompOp::Ne,
            Tok::Lt => CompOp::Lt,
            Tok::Gt => CompOp::Gt,
            Tok::Le => CompOp::Le,
            Tok::Ge => CompOp::Ge,
            other => {
                return self.error(format!(
                    "expected a comparison operator, found {}",
                    describe(other)
                ))
            }
        };
        self.next();
        Ok(op)
    }

    fn term(&mut self) -> Result<Term> {
        match self.peek().clone() {
            Tok::Ident(v) => {
                self.next();
                Ok(Term::Var(v))
            }
            Tok::Str(s) => {
                self.next();
                Ok(Term::Const(Value::Sym(s)))
            }
            Tok::Number(n) => {
                self.next();
                // Non-integer numerals such as `1.1` can only be symbols.
                Ok(Term::Const(match n.parse::<i64>() {
                    Ok(v) => Value::Int(v),
                    Err(_) => Value::Sym(n),
                }))
            }
            Tok::Minus => Ok(Term::Const(Value::Int(self.integer()?))),
            other => self.error(format!("expected a term, found {}", describe(&other))),
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let relation = self.ident("relation name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.term()?);
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(Atom { relation, args })
    }

    /// Comma-separated atoms and comparisons up to the closing `.`.
    fn body(&mut self) -> Result<Body> {
        let mut body = Body::default();
        loop {
            let is_atom = matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::LParen;
            if is_atom {
                body.atoms.push(self.atom()?);
            } else {
                let lhs = self.term()?;
                let op = self.op()?;
                let rhs = self.term()?;
                body.comparisons.push(Comparison { lhs, op, rhs });
            }
            match self.peek() {
                Tok::Comma => {
                    self.next();
                }
                Tok::Dot => {
                    self.next();
                    return Ok(body);
                }
                other => {
                    return self.error(format!("expected `,` or `.`, found {}", describe(other)))
                }
            }
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.expr_term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.expr_term()?));
                }
                Tok::Minus => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.expr_term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn expr_term(&mut self) -> Result<Expr> {
        let mut lhs = self.expr_factor()?;
        while *self.peek() == Tok::Star {
            self.next();
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.expr_factor()?));
        }
        Ok(lhs)
    }

    fn expr_factor(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Ident(a) => {
                self.next();
                Ok(Expr::Attr(a))
            }
            Tok::Number(_) => Ok(Expr::Const(self.integer()?)),
            Tok::Minus => {
                if matches!(self.peek_at(1), Tok::Number(_)) {
                    Ok(Expr::Const(self.integer()?))
                } else {
                    self.next();
                    Ok(Expr::Neg(Box::new(self.expr_factor()?)))
                }
            }
            Tok::LParen => {
                self.next();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            other => self.error(format!("expected an expression, found {}", describe(&other))),
        }
    }

    fn agg_side(&mut self) -> Result<AggSide> {
        let name = self.ident("aggregate function")?;
        let Some(func) = AggFunc::from_name(&name) else {
            return self.error(format!("unknown aggregate function `{name}`"));
        };
        if func == AggFunc::CountDistinct {
            return self.error("countd is not available in aggregation constraints");
        }
        self.expect(Tok::LParen, "`(`")?;
        let arg = self.expr()?;
        let mut filter = Vec::new();
        if *self.peek() == Tok::Colon {
            self.next();
            loop {
                let lhs = self.term()?;
                let op = self.op()?;
                let rhs = self.term()?;
                filter.push(Comparison { lhs, op, rhs });
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        if !self.keyword("OF") {
            return self.error("expected `OF`");
        }
        let relation = self.ident("relation name")?;
        Ok(AggSide {
            func,
            arg,
            filter,
            relation,
        })
    }

    /// `name(v1, ..., agg(z)) <- body.`
    fn conjunctive_query(&mut self) -> Result<ConjunctiveQuery> {
        let name = self.ident("query name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut head_vars = Vec::new();
        let mut aggregate = None;
        if *self.peek() != Tok::RParen {
            loop {
                let item = self.ident("head variable or aggregate")?;
                if *self.peek() == Tok::LParen {
                    let Some(func) = AggFunc::from_name(&item) else {
                        return self.error(format!("unknown aggregate function `{item}`"));
                    };
                    self.next();
                    let var = self.ident("aggregation variable")?;
                    self.expect(Tok::RParen, "`)`")?;
                    aggregate = Some(QueryAggregate { func, var });
                } else if aggregate.is_some() {
                    return self.error("the aggregate must be the last head item");
                } else {
                    head_vars.push(item);
                }
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Arrow, "`<-`")?;
        let body = self.body()?;
        Ok(ConjunctiveQuery {
            name,
            head_vars,
            aggregate,
            body,
        })
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Number(n) => format!("`{n}`"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}

/// Parses `relation Name(attr: int|sym [key] [fix [weight R]], ...)` blocks.
pub fn parse_schema(text: &str) -> Result<Schema> {
    let mut p = Parser::new(text)?;
    let mut schema = Schema::new();
    while !p.at_eof() {
        if !p.keyword("relation") {
            return p.error("expected `relation`");
        }
        let name = p.ident("relation name")?;
        p.expect(Tok::LParen, "`(`")?;
        let mut attrs = Vec::new();
        loop {
            let attr = p.ident("attribute name")?;
            p.expect(Tok::Colon, "`:`")?;
            let datatype = if p.keyword("int") {
                DataType::Int
            } else if p.keyword("sym") {
                DataType::Sym
            } else {
                return p.error("expected `int` or `sym`");
            };
            let is_key = p.keyword("key");
            let is_fix = p.keyword("fix");
            let weight = if is_fix && p.keyword("weight") {
                Some(p.rational()?)
            } else if is_fix {
                Some(Rational::one())
            } else {
                None
            };
            if is_key && is_fix {
                return Err(Error::Schema(format!(
                    "attribute `{name}.{attr}` cannot be both key and fixable"
                )));
            }
            if is_fix && datatype != DataType::Int {
                return Err(Error::Schema(format!(
                    "fixable attribute `{name}.{attr}` must be int"
                )));
            }
            let kind = if is_key {
                AttrKind::Key
            } else if is_fix {
                AttrKind::Fixable
            } else {
                AttrKind::Rigid
            };
            attrs.push(AttributeSpec {
                name: attr,
                kind,
                datatype,
                weight,
            });
            if *p.peek() == Tok::Comma {
                p.next();
            } else {
                break;
            }
        }
        p.expect(Tok::RParen, "`)`")?;
        if matches!(p.peek(), Tok::Dot) {
            p.next();
        }
        schema.add(RelationSchema::new(&name, attrs)?)?;
    }
    Ok(schema)
}

/// Parses denial (`DENY`) and aggregation (`AGG`) constraints.
pub fn parse_constraints(text: &str, schema: &Schema) -> Result<Vec<Constraint>> {
    let mut p = Parser::new(text)?;
    let mut out = Vec::new();
    let mut labels = BTreeSet::new();
    while !p.at_eof() {
        let label = p.ident("constraint label")?;
        p.expect(Tok::Colon, "`:`")?;
        if !labels.insert(label.clone()) {
            return Err(Error::Invalid(format!("duplicate constraint label `{label}`")));
        }
        if p.keyword("DENY") {
            let mut body = p.body()?;
            if body.atoms.is_empty() {
                return Err(Error::Invalid(format!("denial `{label}` has no database atom")));
            }
            check_body(&mut body, schema, &label)?;
            out.push(Constraint::Denial(DenialConstraint { label, body }));
        } else if p.keyword("AGG") {
            let mut lhs = p.agg_side()?;
            let op = p.op()?;
            let mut rhs = if matches!(p.peek(), Tok::Number(_) | Tok::Minus) {
                AggBound::Const(p.integer()?)
            } else {
                AggBound::Side(p.agg_side()?)
            };
            p.expect(Tok::Dot, "`.`")?;
            check_agg_side(&mut lhs, schema)?;
            if let AggBound::Side(side) = &mut rhs {
                check_agg_side(side, schema)?;
            }
            out.push(Constraint::Aggregation(AggregationConstraint { label, lhs, op, rhs }));
        } else {
            return p.error("expected `DENY` or `AGG`");
        }
    }
    Ok(out)
}

/// Like [`parse_constraints`] but rejects aggregation constraints.
pub fn parse_denials(text: &str, schema: &Schema) -> Result<Vec<DenialConstraint>> {
    parse_constraints(text, schema)?
        .into_iter()
        .map(|c| match c {
            Constraint::Denial(d) => Ok(d),
            Constraint::Aggregation(a) => Err(Error::UnsupportedConstraint(format!(
                "`{}` is an aggregation constraint",
                a.label
            ))),
        })
        .collect()
}

/// Parses a (possibly aggregate) conjunctive query or an `ASK` comparison.
pub fn parse_query(text: &str, schema: &Schema) -> Result<Query> {
    let mut p = Parser::new(text)?;
    let query = if p.keyword("ASK") {
        let fname = p.ident("aggregate function")?;
        let Some(func) = AggFunc::from_name(&fname) else {
            return p.error(format!("unknown aggregate function `{fname}`"));
        };
        p.expect(Tok::LParen, "`(`")?;
        let var = p.ident("aggregation variable")?;
        p.expect(Tok::RParen, "`)`")?;
        let op = p.op()?;
        let k = p.integer()?;
        if !p.keyword("FROM") {
            return p.error("expected `FROM`");
        }
        let mut q = p.conjunctive_query()?;
        check_query(&mut q, schema)?;
        if !q.head_vars.is_empty() {
            return Err(Error::Invalid(
                "an aggregate comparison needs a query without free head variables".into(),
            ));
        }
        match &q.aggregate {
            Some(agg) if agg.func == func && agg.var == var => {}
            _ => {
                return Err(Error::Invalid(format!(
                    "ASK {}({var}) does not match the query head",
                    func.name()
                )))
            }
        }
        Query::AggregateComparison(AggregateComparisonQuery { query: q, op, k })
    } else {
        let mut q = p.conjunctive_query()?;
        check_query(&mut q, schema)?;
        Query::Conjunctive(q)
    };
    if !p.at_eof() {
        return p.error("trailing input after the query");
    }
    Ok(query)
}

/// Coerces a constant to the datatype of the position it meets. Integer
/// literals become symbols at symbol positions; the reverse is an error.
fn coerce(value: &mut Value, expected: DataType, context: &str) -> Result<()> {
    match (&*value, expected) {
        (Value::Int(_), DataType::Int) | (Value::Sym(_), DataType::Sym) => Ok(()),
        (Value::Int(i), DataType::Sym) => {
            *value = Value::Sym(i.to_string());
            Ok(())
        }
        (Value::Sym(s), DataType::Int) => Err(Error::Type(format!(
            "{context}: symbol \"{s}\" used at an integer position"
        ))),
    }
}

/// Checks relations, arities and types; returns the datatype of every
/// variable bound by an atom.
fn check_body(body: &mut Body, schema: &Schema, context: &str) -> Result<BTreeMap<String, DataType>> {
    let mut types: BTreeMap<String, DataType> = BTreeMap::new();
    for atom in &mut body.atoms {
        let rel = schema.get(&atom.relation)?;
        if rel.arity() != atom.args.len() {
            return Err(Error::Invalid(format!(
                "{context}: `{}` expects {} arguments, found {}",
                atom.relation,
                rel.arity(),
                atom.args.len()
            )));
        }
        for (attr, arg) in rel.attributes.iter().zip(atom.args.iter_mut()) {
            match arg {
                Term::Var(v) => match types.get(v.as_str()) {
                    Some(&t) if t != attr.datatype => {
                        return Err(Error::Type(format!(
                            "{context}: variable `{v}` is used as both int and sym"
                        )))
                    }
                    Some(_) => {}
                    None => {
                        types.insert(v.clone(), attr.datatype);
                    }
                },
                Term::Const(c) => coerce(c, attr.datatype, context)?,
            }
        }
    }
    for cmp in &mut body.comparisons {
        let ty = |t: &Term| -> Result<Option<DataType>> {
            match t {
                Term::Var(v) => types.get(v.as_str()).copied().map(Some).ok_or_else(|| {
                    Error::Invalid(format!(
                        "{context}: variable `{v}` in `{cmp}` is not bound by any atom"
                    ))
                }),
                Term::Const(_) => Ok(None),
            }
        };
        let (lt, rt) = (ty(&cmp.lhs)?, ty(&cmp.rhs)?);
        let expected = match (lt, rt) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Type(format!("{context}: `{cmp}` compares int with sym")))
            }
            (Some(a), _) | (None, Some(a)) => Some(a),
            (None, None) => None,
        };
        if let Some(expected) = expected {
            for side in [&mut cmp.lhs, &mut cmp.rhs] {
                if let Term::Const(c) = side {
                    coerce(c, expected, context)?;
                }
            }
            if expected == DataType::Sym && cmp.op.is_order() {
                return Err(Error::Type(format!(
                    "{context}: order comparison `{}` on a symbol",
                    cmp.op.symbol()
                )));
            }
        }
    }
    Ok(types)
}

fn check_query(q: &mut ConjunctiveQuery, schema: &Schema) -> Result<()> {
    let context = q.name.clone();
    let types = check_body(&mut q.body, schema, &context)?;
    let mut seen = BTreeSet::new();
    for v in &q.head_vars {
        if !types.contains_key(v) {
            return Err(Error::Invalid(format!(
                "{context}: head variable `{v}` does not occur in the body"
            )));
        }
        if !seen.insert(v) {
            return Err(Error::Invalid(format!("{context}: head variable `{v}` repeated")));
        }
    }
    if let Some(agg) = &q.aggregate {
        let Some(ty) = types.get(&agg.var) else {
            return Err(Error::Invalid(format!(
                "{context}: aggregation variable `{}` does not occur in the body",
                agg.var
            )));
        };
        if q.head_vars.contains(&agg.var) {
            return Err(Error::Invalid(format!(
                "{context}: aggregation variable `{}` is also a head variable",
                agg.var
            )));
        }
        if matches!(agg.func, AggFunc::Sum | AggFunc::Avg) && *ty != DataType::Int {
            return Err(Error::Type(format!(
                "{context}: {} over symbol variable `{}`",
                agg.func.name(),
                agg.var
            )));
        }
    }
    Ok(())
}

fn check_agg_side(side: &mut AggSide, schema: &Schema) -> Result<()> {
    let rel = schema.get(&side.relation)?;
    let mut attrs = Vec::new();
    side.arg.attrs(&mut attrs);
    for a in attrs {
        let Some(pos) = rel.position(&a) else {
            return Err(Error::Invalid(format!("`{}` has no attribute `{a}`", rel.name)));
        };
        if rel.attributes[pos].datatype != DataType::Int {
            return Err(Error::Type(format!("aggregate argument `{a}` is not int")));
        }
    }
    for cmp in &mut side.filter {
        let ty = |t: &Term| -> Result<Option<DataType>> {
            match t {
                Term::Var(a) => rel
                    .position(a)
                    .map(|p| Some(rel.attributes[p].datatype))
                    .ok_or_else(|| Error::Invalid(format!("`{}` has no attribute `{a}`", rel.name))),
                Term::Const(_) => Ok(None),
            }
        };
        let expected = match (ty(&cmp.lhs)?, ty(&cmp.rhs)?) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Type(format!("filter `{cmp}` compares int with sym")))
            }
            (Some(a), _) | (None, Some(a)) => Some(a),
            (None, None) => None,
        };
        if let Some(expected) = expected {
            for s in [&mut cmp.lhs, &mut cmp.rhs] {
                if let Term::Const(c) = s {
                    coerce(c, expected, "filter")?;
                }
            }
            if expected == DataType::Sym && cmp.op.is_order() {
                return Err(Error::Type(format!("order comparison in filter `{cmp}` on a symbol")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX4_SCHEMA: &str =
        "relation Traffic(time: sym key, link: sym key, type: int fix weight 1/100000, flow: int fix weight 1)";

    const EX5_SCHEMA: &str = "
        relation Client(id: int key, a: int fix, m: int fix)
        relation Buy(id: int key, i: sym key, p: int fix)
    ";

    #[test]
    fn schema_with_weights() {
        let s = parse_schema(EX4_SCHEMA).unwrap();
        let t = s.get("Traffic").unwrap();
        assert_eq!(t.key, vec![0, 1]);
        assert_eq!(t.attributes[2].weight, Some(Rational::new(1, 100000)));
        assert_eq!(t.attributes[3].weight, Some(Rational::one()));
        assert!(parse_schema("").unwrap().is_empty());
        assert!(parse_schema("  # nothing\n").unwrap().is_empty());
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(
            parse_schema("relation R(x: int key fix weight 1)"),
            Err(Error::Schema(_))
        ));
        assert!(matches!(parse_schema("relation R(k: int key, x: sym fix)"), Err(Error::Schema(_))));
        assert!(matches!(parse_schema("relation R(x: int"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_schema("relation R(x: int)"), Err(Error::Schema(_))));
        let err = parse_schema("relation R(k: int key,\n   x: float)").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 2, .. }), "{err}");
    }

    #[test]
    fn traffic_denial() {
        let s = parse_schema(EX4_SCHEMA).unwrap();
        let ics = parse_denials("ic: DENY Traffic(t,l,y,f), y = 0, f > 1000.", &s).unwrap();
        assert_eq!(ics.len(), 1);
        let ic = &ics[0];
        assert_eq!(ic.label, "ic");
        assert_eq!(ic.atoms().len(), 1);
        assert_eq!(
            ic.comparisons(),
            &[
                Comparison::new(Term::var("y"), CompOp::Eq, Term::Const(Value::Int(0))),
                Comparison::new(Term::var("f"), CompOp::Gt, Term::Const(Value::Int(1000))),
            ]
        );
        assert!(parse_denials("  \n\t ", &s).unwrap().is_empty());
    }

    #[test]
    fn two_atom_denial() {
        let s = parse_schema(EX5_SCHEMA).unwrap();
        let ics = parse_denials(
            "ic1: DENY Buy(id, i, p), Client(id, a, m), a < 18, p > 25.\n\
             ic2: DENY Client(id, a, m), a < 18, m > 50.",
            &s,
        )
        .unwrap();
        assert_eq!(ics[0].atoms().len(), 2);
        assert_eq!(ics[0].comparisons().len(), 2);
        assert_eq!(ics[0].comparisons()[0].to_string(), "a < 18");
        assert_eq!(ics[0].comparisons()[1].to_string(), "p > 25");
        assert_eq!(classify_denial(&ics[0]), ConstraintClass::Linear);
    }

    #[test]
    fn denial_errors() {
        let s = parse_schema(EX5_SCHEMA).unwrap();
        assert!(matches!(
            parse_denials("x: DENY Nope(a).", &s),
            Err(Error::UnknownRelation(_))
        ));
        assert!(matches!(parse_denials("x: DENY Client(a, b).", &s), Err(Error::Invalid(_))));
        assert!(matches!(
            parse_denials("x: DENY Buy(id, i, p), i < \"b\".", &s),
            Err(Error::Type(_))
        ));
        assert!(matches!(
            parse_denials("x: DENY Client(id, a, m), z > 3.", &s),
            Err(Error::Invalid(_))
        ));
        assert!(matches!(parse_denials("x: DENY a > 3.", &s), Err(Error::Invalid(_))));
        assert!(matches!(
            parse_denials("x: DENY Client(i, a, m), Buy(i, a, m).", &s),
            Err(Error::Type(_))
        ));
        assert!(matches!(
            parse_denials("x: DENY Client(i, a, m). x: DENY Client(i, a, m).", &s),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn classification() {
        let s = parse_schema("relation R(x: int key, y: int fix)").unwrap();
        let ics = parse_denials(
            "e: DENY R(x, y), x != y.\n\
             l: DENY R(x, y), y != 3.\n\
             j: DENY R(x1, y), R(x2, y), x1 = 1, x2 = 2.",
            &s,
        )
        .unwrap();
        assert_eq!(classify_denial(&ics[0]), ConstraintClass::Extended);
        assert_eq!(classify_denial(&ics[1]), ConstraintClass::Linear);
        assert_eq!(classify_denial(&ics[2]), ConstraintClass::Linear);
    }

    #[test]
    fn aggregate_query() {
        let s = parse_schema(
            "relation R(x: int key, y: int)\nrelation Q(y: int key, z: int key, w: int key)",
        )
        .unwrap();
        let Query::Conjunctive(q) =
            parse_query("q(x, y, sum(z)) <- R(x,y), Q(y,z,w), w != 3.", &s).unwrap()
        else {
            panic!("expected a conjunctive query");
        };
        assert_eq!(q.head_vars, vec!["x", "y"]);
        assert_eq!(
            q.aggregate,
            Some(QueryAggregate {
                func: AggFunc::Sum,
                var: "z".into()
            })
        );
        assert_eq!(q.body.atoms.len(), 2);
        let nam = q.nam();
        assert!(nam.aggregate.is_none());
        assert_eq!(nam.body, q.body);
        assert_eq!(nam.head_vars, q.head_vars);

        let Query::AggregateComparison(a) = parse_query(
            "ASK sum(z) > 5 FROM q(sum(z)) <- R(x,y), Q(y,z,w), w != 3.",
            &s,
        )
        .unwrap() else {
            panic!("expected ASK");
        };
        assert_eq!(a.op, CompOp::Gt);
        assert_eq!(a.k, 5);
        assert!(a.query.head_vars.is_empty());

        let Query::Conjunctive(b) = parse_query("q() <- R(x,y).", &s).unwrap() else {
            panic!()
        };
        assert!(b.is_boolean());

        assert!(parse_query("q(x, sum(x)) <- R(x,y).", &s).is_err());
        assert!(parse_query("q(v) <- R(x,y).", &s).is_err());
        assert!(parse_query("ASK sum(y) > 5 FROM q(sum(z)) <- Q(y,z,w).", &s).is_err());
        assert!(parse_query("ASK sum(z) > 5 FROM q(y, sum(z)) <- Q(y,z,w).", &s).is_err());
    }

    #[test]
    fn aggregation_constraints() {
        let s = parse_schema(
            "relation R1(k: int key, a1: int fix, a2: int)\nrelation R2(k: int key, a1: int fix)",
        )
        .unwrap();
        let ics = parse_constraints(
            "f: AGG sum(a1 : a2 = 3) OF R1 > 5.\n\
             m: AGG sum(a1 + a2) OF R1 > 5.\n\
             p: AGG sum(a1 * a2) OF R1 > 100.\n\
             r: AGG sum(a1) OF R1 = sum(a1) OF R2.\n\
             d: DENY R1(k, a, b), a < 0.",
            &s,
        )
        .unwrap();
        assert_eq!(ics.len(), 5);
        assert_eq!(classify_constraint(&ics[0]), ConstraintClass::HasAggregation);
        assert_eq!(classify_constraint(&ics[4]), ConstraintClass::Linear);
        let Constraint::Aggregation(r) = &ics[3] else { panic!() };
        assert!(matches!(r.rhs, AggBound::Side(_)));
        assert!(parse_denials("f: AGG sum(a1) OF R1 > 5.", &s).is_err());
        assert!(parse_constraints("f: AGG sum(zz) OF R1 > 5.", &s).is_err());
    }

    #[test]
    fn numeric_literal_at_symbol_position() {
        let s = parse_schema(EX4_SCHEMA).unwrap();
        let q = parse_query("q(f) <- Traffic(1.1, \"a\", y, f).", &s).unwrap();
        let atom = &q.conjunctive().body.atoms[0];
        assert_eq!(atom.args[0], Term::Const(Value::Sym("1.1".into())));
        assert!(parse_query("q(f) <- Traffic(t, l, \"zero\", f).", &s).is_err());
    }
}
