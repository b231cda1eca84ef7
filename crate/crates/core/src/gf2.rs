//! Approximate maximum of a sum query across fixes under one-atom denials.
//!
//! Each tuple contributes a bag of candidate versions; exactly one
//! candidate per bag is selected. Every way of matching the query body to
//! candidates becomes a weighted equation over the selections it needs, and
//! a selection is found by conditional expectation, bag by bag.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::FixSearchConfig;
use crate::lang::{AggFunc, ConjunctiveQuery, Constraint};
use crate::matching::{CompiledBody, Row};
use crate::model::Instance;
use crate::query::{reduce_1ad, Bag};
use crate::rational::Rational;

/// Satisfied when every listed bag selects the listed candidate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Gf2Equation {
    pub requirements: BTreeMap<usize, usize>,
    pub weight: i128,
}

impl Gf2Equation {
    fn satisfied_by(&self, selection: &[usize]) -> bool {
        self.requirements.iter().all(|(&b, &c)| selection[b] == c)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Gf2System {
    pub bags: Vec<Bag>,
    pub equations: Vec<Gf2Equation>,
    /// Atom count of the query.
    pub m: usize,
    /// Largest bag size.
    pub k: usize,
}

/// Builds the system for a scalar `sum` query. All constraints must be
/// one-atom denials and the summed attribute nonnegative in every
/// candidate.
pub fn build_rwae2(q: &ConjunctiveQuery, d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<Gf2System> {
    let agg = match &q.aggregate {
        Some(a) if a.func == AggFunc::Sum && q.head_vars.is_empty() => a,
        _ => {
            return Err(Error::Precondition(format!(
                "`{}` is not a scalar sum query",
                q.name
            )))
        }
    };
    for atom in &q.body.atoms {
        d.schema().get(&atom.relation)?;
    }
    let bags = reduce_1ad(d, ics, cfg)?.bags;
    if bags.iter().any(|b| b.candidates.is_empty()) {
        return Err(Error::NoFix);
    }

    // Candidate rows per relation; a row id indexes `owners`.
    let mut owners: Vec<(usize, usize)> = Vec::new();
    let mut rows: HashMap<&str, Vec<Row<'_>>> = HashMap::new();
    for (b, bag) in bags.iter().enumerate() {
        for (c, t) in bag.candidates.iter().enumerate() {
            rows.entry(bag.relation.as_str())
                .or_default()
                .push((owners.len(), t.values.as_slice()));
            owners.push((b, c));
        }
    }
    let body = CompiledBody::new(&q.body);
    let z = body
        .var_index(&agg.var)
        .ok_or_else(|| Error::Invalid(format!("aggregation variable `{}` is not in the body", agg.var)))?;
    let per_atom: Vec<&[Row<'_>]> = body
        .atoms
        .iter()
        .map(|a| rows.get(a.relation.as_str()).map_or(&[][..], Vec::as_slice))
        .collect();

    let mut merged: BTreeMap<BTreeMap<usize, usize>, i128> = BTreeMap::new();
    let mut failure = None;
    body.for_each(&per_atom, &mut |binding, ids| {
        let weight = match binding[z].as_int() {
            Some(w) if w >= 0 => w as i128,
            other => {
                failure = Some(match other {
                    Some(w) => Error::Precondition(format!("summed value {w} is negative")),
                    None => Error::Type(format!("summed value `{}` is not an integer", binding[z])),
                });
                return false;
            }
        };
        let mut req = BTreeMap::new();
        for &id in ids {
            let (b, c) = owners[id];
            if *req.entry(b).or_insert(c) != c {
                return true;
            }
        }
        *merged.entry(req).or_default() += weight;
        true
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let k = bags.iter().map(|b| b.candidates.len()).max().unwrap_or(1);
    Ok(Gf2System {
        equations: merged
            .into_iter()
            .map(|(requirements, weight)| Gf2Equation { requirements, weight })
            .collect(),
        m: q.body.atoms.len(),
        k,
        bags,
    })
}

/// Expected satisfied weight when the bags in `partial` (a prefix) are
/// decided and every other bag picks uniformly among its candidates.
pub fn expected_weight(sys: &Gf2System, partial: &[usize]) -> Rational {
    let mut total = Rational::zero();
    for eq in &sys.equations {
        let mut denom: i128 = 1;
        let mut live = true;
        for (&b, &c) in &eq.requirements {
            match partial.get(b) {
                Some(&chosen) if chosen != c => {
                    live = false;
                    break;
                }
                Some(_) => {}
                None => denom *= sys.bags[b].candidates.len() as i128,
            }
        }
        if live {
            total += Rational::from_bigint(eq.weight.into()) / Rational::from_bigint(denom.into());
        }
    }
    total
}

/// Total weight of the equations a complete selection satisfies.
pub fn satisfied_weight(sys: &Gf2System, selection: &[usize]) -> i128 {
    sys.equations
        .iter()
        .filter(|e| e.satisfied_by(selection))
        .map(|e| e.weight)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DecisionStep {
    pub bag: usize,
    pub chosen: usize,
    /// Conditional expectation after this decision.
    pub expected: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Derandomized {
    /// Selected candidate index per bag.
    pub selection: Vec<usize>,
    pub weight: i128,
    /// Expectation before any decision.
    pub initial: Rational,
    pub steps: Vec<DecisionStep>,
}

/// Decides bags in order, each time taking the candidate with the highest
/// conditional expectation (lowest index on ties).
pub fn derandomize(sys: &Gf2System) -> Derandomized {
    let initial = expected_weight(sys, &[]);
    let mut selection = Vec::with_capacity(sys.bags.len());
    let mut steps = Vec::with_capacity(sys.bags.len());
    for (b, bag) in sys.bags.iter().enumerate() {
        let mut best: Option<(usize, Rational)> = None;
        for c in 0..bag.candidates.len() {
            selection.push(c);
            let e = expected_weight(sys, &selection);
            selection.pop();
            if best.as_ref().is_none_or(|(_, v)| e > *v) {
                best = Some((c, e));
            }
        }
        let (chosen, expected) = best.expect("bags are nonempty");
        selection.push(chosen);
        steps.push(DecisionStep { bag: b, chosen, expected });
    }
    Derandomized {
        weight: satisfied_weight(sys, &selection),
        selection,
        initial,
        steps,
    }
}

/// The instance picking each bag's selected candidate.
pub fn assignment_to_fix(d: &Instance, bags: &[Bag], selection: &[usize]) -> Result<Instance> {
    if selection.len() != bags.len() {
        return Err(Error::Invalid(format!(
            "selection covers {} bags, expected {}",
            selection.len(),
            bags.len()
        )));
    }
    let mut fix = d.clone();
    for (bag, &c) in bags.iter().zip(selection) {
        let t = bag
            .candidates
            .get(c)
            .ok_or_else(|| Error::Invalid(format!("bag of {} has no candidate {c}", bag.original)))?;
        fix.replace(t.clone())?;
    }
    Ok(fix)
}

/// `1 / k^m`.
pub fn guarantee_factor(k: usize, m: usize) -> Rational {
    Rational::from_bigint((k as u64).into()).pow(m as u32).recip()
}

pub fn guarantee(sys: &Gf2System) -> Rational {
    guarantee_factor(sys.k, sys.m)
}
