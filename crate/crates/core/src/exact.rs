//! Exhaustive least-squares fix search over the candidate grid, and the
//! decision problems built on it.
//!
//! The search assigns fixable cells tuple by tuple, cheapest candidate
//! first. Once a tuple is complete, every constraint is checked against it
//! and the tuples completed before it, so a violation prunes the whole
//! subtree. Branches whose partial distance already exceeds the best known
//! one are cut; equal-distance leaves are all kept.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lang::{CompOp, Constraint, DenialConstraint, Term};
use crate::matching::{CompiledBody, Row};
use crate::model::{DataType, Instance, Schema, Tuple, Value};
use crate::rational::Rational;
use crate::repair::{denials, satisfies_all, CandidateGrid};

pub use crate::repair::FixSearchConfig;

/// All least-squares fixes of an instance.
#[derive(Clone, Debug, Serialize)]
pub struct FixResult {
    #[serde(skip)]
    pub fixes: Vec<Instance>,
    /// `None` iff no fix exists.
    pub min_distance: Option<Rational>,
    /// Search nodes visited.
    pub explored: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FixCheck {
    pub is_fix: bool,
    pub is_ls_fix: bool,
}

fn reject_symbol_inequality(ics: &[DenialConstraint], schema: &Schema) -> Result<()> {
    for ic in ics {
        let mut types: HashMap<&str, DataType> = HashMap::new();
        for atom in ic.atoms() {
            let rel = schema.get(&atom.relation)?;
            for (arg, attr) in atom.args.iter().zip(&rel.attributes) {
                if let Term::Var(v) = arg {
                    types.insert(v, attr.datatype);
                }
            }
        }
        for cmp in ic.comparisons() {
            if let Some((a, CompOp::Ne, _)) = cmp.var_var() {
                if types.get(a) == Some(&DataType::Sym) {
                    return Err(Error::UnsupportedConstraint(format!(
                        "`{}`: `!=` between symbol variables",
                        ic.label
                    )));
                }
            }
        }
    }
    Ok(())
}

struct Cell {
    pos: usize,
    /// (value, scaled integer cost), cheapest first.
    options: Vec<(i64, u128)>,
}

struct Search<'a> {
    relations: Vec<&'a str>,
    cells: Vec<Vec<Cell>>,
    order: Vec<usize>,
    bodies: Vec<CompiledBody>,
    current: Vec<Vec<Value>>,
    completed: HashMap<&'a str, Vec<usize>>,
    best: Option<u128>,
    leaves: Vec<Vec<Vec<Value>>>,
    explored: u64,
    cap: u64,
}

impl<'a> Search<'a> {
    /// Does tuple `i`, together with the completed tuples, violate anything?
    fn violates(&self, i: usize) -> bool {
        let rel = self.relations[i];
        let own: [Row<'_>; 1] = [(i, self.current[i].as_slice())];
        let pools: HashMap<&str, Vec<Row<'_>>> = self
            .completed
            .iter()
            .map(|(name, ids)| (*name, ids.iter().map(|&j| (j, self.current[j].as_slice())).collect()))
            .collect();
        for body in &self.bodies {
            for (a, atom) in body.atoms.iter().enumerate() {
                if atom.relation != rel {
                    continue;
                }
                let mut rows: Vec<&[Row<'_>]> = Vec::with_capacity(body.atoms.len());
                for (b, other) in body.atoms.iter().enumerate() {
                    if a == b {
                        rows.push(&own);
                        continue;
                    }
                    rows.push(pools.get(other.relation.as_str()).map_or(&[][..], Vec::as_slice));
                }
                if body.any(&rows) {
                    return true;
                }
            }
        }
        false
    }

    fn tuple(&mut self, k: usize, cost: u128) -> Result<()> {
        if k == self.order.len() {
            match self.best {
                Some(b) if cost > b => {}
                Some(b) if cost == b => self.leaves.push(self.current.clone()),
                _ => {
                    self.best = Some(cost);
                    self.leaves = vec![self.current.clone()];
                }
            }
            return Ok(());
        }
        self.cell(k, 0, cost)
    }

    fn cell(&mut self, k: usize, c: usize, cost: u128) -> Result<()> {
        let i = self.order[k];
        if c == self.cells[i].len() {
            let rel = self.relations[i];
            self.completed.entry(rel).or_default().push(i);
            let result = if self.violates(i) { Ok(()) } else { self.tuple(k + 1, cost) };
            self.completed.get_mut(rel).expect("just pushed").pop();
            return result;
        }
        let pos = self.cells[i][c].pos;
        let saved = self.current[i][pos].clone();
        for o in 0..self.cells[i][c].options.len() {
            let (value, step) = self.cells[i][c].options[o];
            let next = cost.saturating_add(step);
            if matches!(self.best, Some(b) if next > b) {
                break;
            }
            self.explored += 1;
            if self.explored > self.cap {
                return Err(Error::CapExceeded {
                    what: "explored search nodes",
                    limit: self.cap,
                });
            }
            self.current[i][pos] = Value::Int(value);
            self.cell(k, c + 1, next)?;
        }
        self.current[i][pos] = saved;
        Ok(())
    }
}

/// All least-squares fixes of `d` with respect to `ics`, in canonical order.
pub fn ls_fixes(d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<FixResult> {
    let dens = denials(ics)?;
    let schema = d.schema().clone();
    reject_symbol_inequality(&dens, &schema)?;
    let grid = CandidateGrid::new(d, &dens, cfg.window_radius_override);

    // Scale every weight by the lcm of the denominators so that costs are
    // integers during the search.
    let mut scale = BigInt::one();
    for rel in schema.relations() {
        for p in rel.fixable_positions() {
            scale = scale.lcm(rel.attributes[p].weight().denom());
        }
    }
    let scale_r = Rational::from_bigint(scale.clone());
    let scaled = |w: Rational| -> u128 {
        let v = w * scale_r.clone();
        v.numer().to_u128().unwrap_or(u128::MAX)
    };

    let tuples: Vec<&Tuple> = d.tuples().collect();
    let mut cells = Vec::with_capacity(tuples.len());
    for t in &tuples {
        let rel = schema.get(&t.relation)?;
        let mut row = Vec::new();
        for p in rel.fixable_positions() {
            let orig = t.values[p].as_int().expect("fixable attributes are integers");
            let w = scaled(rel.attributes[p].weight());
            let options = grid
                .cell(&rel.name, p, orig)
                .into_iter()
                .map(|v| {
                    let diff = (v as i128 - orig as i128).unsigned_abs();
                    (v, w.saturating_mul(diff.saturating_mul(diff)))
                })
                .collect();
            row.push(Cell { pos: p, options });
        }
        cells.push(row);
    }
    let mut order: Vec<usize> = (0..tuples.len()).filter(|&i| cells[i].is_empty()).collect();
    order.extend((0..tuples.len()).filter(|&i| !cells[i].is_empty()));

    let mut search = Search {
        relations: tuples.iter().map(|t| t.relation.as_str()).collect(),
        cells,
        order,
        bodies: dens.iter().map(|ic| CompiledBody::new(&ic.body)).collect(),
        current: tuples.iter().map(|t| t.values.clone()).collect(),
        completed: HashMap::new(),
        best: None,
        leaves: Vec::new(),
        explored: 0,
        cap: cfg.max_grid_points,
    };
    search.tuple(0, 0)?;

    let mut fixes = Vec::with_capacity(search.leaves.len());
    let mut seen = BTreeSet::new();
    for leaf in &search.leaves {
        let mut fix = d.clone();
        for (t, values) in tuples.iter().zip(leaf) {
            if &t.values != values {
                fix.replace(Tuple::new(&t.relation, values.clone()))?;
            }
        }
        if seen.insert(fix.canonical()) {
            fixes.push(fix);
        }
    }
    fixes.sort_by_cached_key(Instance::canonical);
    Ok(FixResult {
        fixes,
        min_distance: search
            .best
            .map(|b| Rational::from_bigint(BigInt::from(b)) / scale_r.clone()),
        explored: search.explored,
    })
}

/// Is there any fix at all?
pub fn ne(d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<bool> {
    Ok(ls_fixes(d, ics, cfg)?.min_distance.is_some())
}

/// Is there a fix within distance `k`?
pub fn dfp(d: &Instance, ics: &[Constraint], k: &Rational, cfg: &FixSearchConfig) -> Result<bool> {
    Ok(matches!(dfop(d, ics, cfg)?, Some(m) if &m <= k))
}

/// Distance of the least-squares fixes, `None` when there is no fix.
pub fn dfop(d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<Option<Rational>> {
    Ok(ls_fixes(d, ics, cfg)?.min_distance)
}

/// Checks whether `d2` is a fix of `d`, and whether it is a least-squares one.
pub fn verify_fix(d: &Instance, d2: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<FixCheck> {
    if d.schema() != d2.schema() {
        return Err(Error::Schema("instances use different schemas".into()));
    }
    let is_fix = d.same_key_space(d2)? && satisfies_all(d2, ics)?;
    if !is_fix {
        return Ok(FixCheck {
            is_fix,
            is_ls_fix: false,
        });
    }
    let dist = d.distance(d2)?;
    let is_ls_fix = dfop(d, ics, cfg)? == Some(dist);
    Ok(FixCheck { is_fix, is_ls_fix })
}
