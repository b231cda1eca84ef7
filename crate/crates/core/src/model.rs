//! Relational schema, database instances and the weighted square distance.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::Rational;

/// A database constant: an integer or an uninterpreted symbol.
///
/// Symbols only support equality; integers are totally ordered.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Sym(String),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Sym(_) => None,
        }
    }

    pub fn datatype(&self) -> DataType {
        match self {
            Value::Int(_) => DataType::Int,
            Value::Sym(_) => DataType::Sym,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Sym(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrKind {
    Key,
    Rigid,
    Fixable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Int,
    Sym,
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataType::Int => "int",
            DataType::Sym => "sym",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttrKind,
    pub datatype: DataType,
    /// Present iff the attribute is fixable.
    pub weight: Option<Rational>,
}

impl AttributeSpec {
    pub fn key(name: &str, datatype: DataType) -> Self {
        AttributeSpec {
            name: name.to_string(),
            kind: AttrKind::Key,
            datatype,
            weight: None,
        }
    }

    pub fn rigid(name: &str, datatype: DataType) -> Self {
        AttributeSpec {
            name: name.to_string(),
            kind: AttrKind::Rigid,
            datatype,
            weight: None,
        }
    }

    pub fn fixable(name: &str, weight: Rational) -> Self {
        AttributeSpec {
            name: name.to_string(),
            kind: AttrKind::Fixable,
            datatype: DataType::Int,
            weight: Some(weight),
        }
    }

    pub fn is_fixable(&self) -> bool {
        self.kind == AttrKind::Fixable
    }

    /// The distance weight; zero for non-fixable attributes.
    pub fn weight(&self) -> Rational {
        self.weight.clone().unwrap_or_else(Rational::zero)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelationSchema {
    pub name: String,
    pub attributes: Vec<AttributeSpec>,
    pub key: Vec<usize>,
}

impl RelationSchema {
    /// Validates the attribute list and derives the key from the `Key` kinds.
    pub fn new(name: &str, attributes: Vec<AttributeSpec>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for attr in &attributes {
            if !seen.insert(attr.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate attribute `{}` in relation `{name}`",
                    attr.name
                )));
            }
            match attr.kind {
                AttrKind::Fixable => {
                    if attr.datatype != DataType::Int {
                        return Err(Error::Schema(format!(
                            "fixable attribute `{name}.{}` must be int",
                            attr.name
                        )));
                    }
                    match &attr.weight {
                        Some(w) if w.is_positive() => {}
                        Some(_) => {
                            return Err(Error::Schema(format!(
                                "weight of `{name}.{}` must be positive",
                                attr.name
                            )))
                        }
                        None => {
                            return Err(Error::Schema(format!(
                                "fixable attribute `{name}.{}` has no weight",
                                attr.name
                            )))
                        }
                    }
                }
                AttrKind::Key | AttrKind::Rigid => {
                    if attr.weight.is_some() {
                        return Err(Error::Schema(format!(
                            "only fixable attributes carry a weight (`{name}.{}`)",
                            attr.name
                        )));
                    }
                }
            }
        }
        let key: Vec<usize> = attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.kind == AttrKind::Key)
            .map(|(i, _)| i)
            .collect();
        if key.is_empty() {
            return Err(Error::Schema(format!("relation `{name}` has no key attribute")));
        }
        Ok(RelationSchema {
            name: name.to_string(),
            attributes,
            key,
        })
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn position(&self, attr: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == attr)
    }

    pub fn is_key_position(&self, pos: usize) -> bool {
        self.key.contains(&pos)
    }

    pub fn fixable_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_fixable())
            .map(|(i, _)| i)
    }

    pub fn key_of(&self, values: &[Value]) -> Vec<Value> {
        self.key.iter().map(|&i| values[i].clone()).collect()
    }

    /// Weighted square distance between two versions of the same tuple.
    pub fn tuple_distance(&self, a: &[Value], b: &[Value]) -> Rational {
        let mut total = Rational::zero();
        for pos in self.fixable_positions() {
            if let (Some(x), Some(y)) = (a[pos].as_int(), b[pos].as_int()) {
                if x != y {
                    let diff = (x as i128 - y as i128).pow(2);
                    let sq = Rational::from_int(diff as i64);
                    total += self.attributes[pos].weight() * sq;
                }
            }
        }
        total
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Schema {
    relations: IndexMap<String, RelationSchema>,
}

impl Schema {
    pub fn new() -> Self {
        Schema::default()
    }

    pub fn add(&mut self, relation: RelationSchema) -> Result<()> {
        if self.relations.contains_key(&relation.name) {
            return Err(Error::Schema(format!("duplicate relation `{}`", relation.name)));
        }
        self.relations.insert(relation.name.clone(), relation);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&RelationSchema> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.get_index_of(name)
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationSchema> {
        self.relations.values()
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }
}

/// A ground database atom `R(c1, ..., cn)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Tuple {
    pub relation: String,
    pub values: Vec<Value>,
}

impl Tuple {
    pub fn new(relation: &str, values: Vec<Value>) -> Self {
        Tuple {
            relation: relation.to_string(),
            values,
        }
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Shorthand for building tuples in tests and fixtures: `tuple!("R", 1, "a")`.
#[macro_export]
macro_rules! tuple {
    ($rel:expr $(, $v:expr)* $(,)?) => {
        $crate::model::Tuple::new($rel, vec![$($crate::model::IntoValue::into_value($v)),*])
    };
}

pub trait IntoValue {
    fn into_value(self) -> Value;
}

impl IntoValue for i64 {
    fn into_value(self) -> Value {
        Value::Int(self)
    }
}

impl IntoValue for i32 {
    fn into_value(self) -> Value {
        Value::Int(self as i64)
    }
}

impl IntoValue for &str {
    fn into_value(self) -> Value {
        Value::Sym(self.to_string())
    }
}

impl IntoValue for Value {
    fn into_value(self) -> Value {
        self
    }
}

/// A finite, key-unique database instance.
///
/// Relations are kept in schema order and tuples in insertion order; that
/// order defines tuple identifiers ([`TupleId`]) and all deterministic
/// tie-breaks downstream. Equality is set equality.
#[derive(Clone, Debug)]
pub struct Instance {
    schema: Arc<Schema>,
    relations: IndexMap<String, IndexMap<Vec<Value>, Tuple>>,
}

/// Position of a tuple in the canonical enumeration of an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TupleId(pub usize);

impl fmt::Display for TupleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0 + 1)
    }
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.relations == other.relations
    }
}

impl Eq for Instance {}

impl Instance {
    pub fn empty(schema: Arc<Schema>) -> Self {
        let relations = schema
            .relations()
            .map(|r| (r.name.clone(), IndexMap::new()))
            .collect();
        Instance { schema, relations }
    }

    pub fn from_tuples(schema: Arc<Schema>, tuples: impl IntoIterator<Item = Tuple>) -> Result<Self> {
        let mut inst = Instance::empty(schema);
        for t in tuples {
            inst.insert(t)?;
        }
        Ok(inst)
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    fn validate(&self, tuple: &Tuple) -> Result<&RelationSchema> {
        let rel = self.schema.get(&tuple.relation)?;
        if rel.arity() != tuple.values.len() {
            return Err(Error::Data(format!(
                "{tuple}: expected {} values, found {}",
                rel.arity(),
                tuple.values.len()
            )));
        }
        for (attr, value) in rel.attributes.iter().zip(&tuple.values) {
            if attr.datatype != value.datatype() {
                return Err(Error::Data(format!(
                    "{tuple}: attribute `{}` expects {}",
                    attr.name, attr.datatype
                )));
            }
        }
        Ok(rel)
    }

    /// Adds a tuple; a second tuple with the same key is rejected.
    pub fn insert(&mut self, tuple: Tuple) -> Result<()> {
        let key = self.validate(&tuple)?.key_of(&tuple.values);
        let rows = self
            .relations
            .get_mut(&tuple.relation)
            .expect("validated relation");
        if rows.contains_key(&key) {
            return Err(Error::Data(format!("duplicate key for {tuple}")));
        }
        rows.insert(key, tuple);
        Ok(())
    }

    /// Replaces the tuple sharing `tuple`'s key, keeping its position.
    pub fn replace(&mut self, tuple: Tuple) -> Result<Tuple> {
        let key = self.validate(&tuple)?.key_of(&tuple.values);
        let rows = self
            .relations
            .get_mut(&tuple.relation)
            .expect("validated relation");
        match rows.get_mut(&key) {
            Some(slot) => Ok(std::mem::replace(slot, tuple)),
            None => Err(Error::Data(format!("no tuple with the key of {tuple}"))),
        }
    }

    pub fn remove(&mut self, relation: &str, key: &[Value]) -> Option<Tuple> {
        self.relations.get_mut(relation)?.shift_remove(key)
    }

    pub fn tuple_by_key(&self, relation: &str, key: &[Value]) -> Result<Option<&Tuple>> {
        let rel = self.schema.get(relation)?;
        if key.len() != rel.key.len() {
            return Err(Error::Data(format!(
                "key for `{relation}` has {} values, expected {}",
                key.len(),
                rel.key.len()
            )));
        }
        Ok(self.relations[relation].get(key))
    }

    /// All tuples in canonical order (schema order, then insertion order).
    pub fn tuples(&self) -> impl Iterator<Item = &Tuple> {
        self.relations.values().flat_map(|rows| rows.values())
    }

    pub fn relation_tuples<'a>(&'a self, relation: &str) -> impl Iterator<Item = &'a Tuple> + 'a {
        self.relations
            .get(relation)
            .into_iter()
            .flat_map(|rows| rows.values())
    }

    pub fn len(&self) -> usize {
        self.relations.values().map(|r| r.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True iff both instances have the same keys per relation and agree on
    /// every non-fixable attribute for each key.
    pub fn same_key_space(&self, other: &Instance) -> Result<bool> {
        if self.schema != other.schema {
            return Err(Error::Schema("instances use different schemas".into()));
        }
        for rel in self.schema.relations() {
            let mine = &self.relations[&rel.name];
            let theirs = &other.relations[&rel.name];
            if mine.len() != theirs.len() {
                return Ok(false);
            }
            for (key, t) in mine {
                let Some(u) = theirs.get(key) else {
                    return Ok(false);
                };
                let rigid_differs = rel
                    .attributes
                    .iter()
                    .enumerate()
                    .any(|(i, a)| !a.is_fixable() && t.values[i] != u.values[i]);
                if rigid_differs {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Weighted square distance between two key-aligned instances.
    pub fn distance(&self, other: &Instance) -> Result<Rational> {
        if !self.same_key_space(other)? {
            return Err(Error::KeySpaceMismatch(
                "keys or rigid values differ".into(),
            ));
        }
        let mut total = Rational::zero();
        for rel in self.schema.relations() {
            let theirs = &other.relations[&rel.name];
            for (key, t) in &self.relations[&rel.name] {
                total += rel.tuple_distance(&t.values, &theirs[key].values);
            }
        }
        Ok(total)
    }

    /// Order-independent representation used for hashing and sorting sets of
    /// instances.
    pub fn canonical(&self) -> Vec<Tuple> {
        let mut all: Vec<Tuple> = self.tuples().cloned().collect();
        all.sort();
        all
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, t) in self.tuples().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("}")
    }
}

pub fn tuple_by_key<'a>(d: &'a Instance, relation: &str, key: &[Value]) -> Result<Option<&'a Tuple>> {
    d.tuple_by_key(relation, key)
}

pub fn same_key_space(d: &Instance, d2: &Instance) -> Result<bool> {
    d.same_key_space(d2)
}

pub fn distance(d: &Instance, d2: &Instance, schema: &Schema) -> Result<Rational> {
    if d.schema.as_ref() != schema {
        return Err(Error::Schema("instance does not use the given schema".into()));
    }
    d.distance(d2)
}
