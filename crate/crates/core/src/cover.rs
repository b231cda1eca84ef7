//! Weighted set cover over the conflict hypergraph.
//!
//! Elements are hyperedges; each local fix of an inconsistent tuple
//! contributes one set (the hyperedges it resolves) weighted by its cost.
//! Set ids follow tuple order, then local-fix order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lang::Constraint;
use crate::model::{Instance, TupleId};
use crate::rational::Rational;
use crate::repair::{is_local, FixSearchConfig, LocalFix, RepairContext, ViolationSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetId(pub usize);

impl fmt::Display for SetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0 + 1)
    }
}

impl Serialize for SetId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoverSet {
    pub id: SetId,
    pub owner: TupleId,
    pub fix: LocalFix,
    /// Element (hyperedge) indices.
    pub members: BTreeSet<usize>,
    pub weight: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoverInstance {
    pub elements: Vec<ViolationSet>,
    pub sets: Vec<CoverSet>,
}

impl CoverInstance {
    /// Largest number of sets any element belongs to.
    pub fn max_frequency(&self) -> usize {
        (0..self.elements.len())
            .map(|e| self.sets.iter().filter(|s| s.members.contains(&e)).count())
            .max()
            .unwrap_or(0)
    }

    fn check_feasible(&self) -> Result<()> {
        let covered: BTreeSet<usize> = self.sets.iter().flat_map(|s| s.members.iter().copied()).collect();
        match (0..self.elements.len()).find(|e| !covered.contains(e)) {
            Some(e) => Err(Error::Infeasible(e)),
            None => Ok(()),
        }
    }

    fn weight_of(&self, chosen: &BTreeSet<SetId>) -> Rational {
        chosen.iter().map(|s| &self.sets[s.0].weight).sum()
    }

    pub fn is_cover(&self, chosen: &BTreeSet<SetId>) -> bool {
        let covered: BTreeSet<usize> = chosen
            .iter()
            .flat_map(|s| self.sets[s.0].members.iter().copied())
            .collect();
        covered.len() == self.elements.len()
    }
}

/// One selection made by a cover algorithm. For greedy, `ratio` is newly
/// covered elements per unit weight; for primal-dual it is the dual
/// increase that made the set tight.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub chosen: SetId,
    pub ratio: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cover {
    pub chosen: BTreeSet<SetId>,
    pub weight: Rational,
    pub trace: Vec<TraceStep>,
}

impl Cover {
    fn from_sets(ci: &CoverInstance, chosen: BTreeSet<SetId>) -> Cover {
        Cover {
            weight: ci.weight_of(&chosen),
            chosen,
            trace: Vec::new(),
        }
    }
}

/// The set-cover instance for `d` under local constraints.
pub fn build_mwscp(d: &Instance, ics: &[Constraint], cfg: &FixSearchConfig) -> Result<CoverInstance> {
    let report = is_local(ics, d.schema());
    if !report.local {
        return Err(Error::NotLocal(report.diagnostics.join("; ")));
    }
    let ctx = RepairContext::new(d, ics, cfg)?;
    build_from_context(&ctx)
}

pub fn build_from_context(ctx: &RepairContext<'_>) -> Result<CoverInstance> {
    let mut sets = Vec::new();
    for i in 0..ctx.hypergraph.vertices.len() {
        for fix in ctx.local_fixes(TupleId(i))? {
            sets.push(CoverSet {
                id: SetId(sets.len()),
                owner: TupleId(i),
                members: fix.resolved.clone(),
                weight: fix.cost.clone(),
                fix,
            });
        }
    }
    Ok(CoverInstance {
        elements: ctx.hypergraph.edges.clone(),
        sets,
    })
}

/// Greedy: repeatedly take the set with the most newly covered elements per
/// unit weight, smallest id on ties.
pub fn greedy_cover(ci: &CoverInstance) -> Result<Cover> {
    ci.check_feasible()?;
    let mut uncovered: BTreeSet<usize> = (0..ci.elements.len()).collect();
    let mut chosen = BTreeSet::new();
    let mut trace = Vec::new();
    while !uncovered.is_empty() {
        let mut best: Option<(Rational, SetId)> = None;
        for s in &ci.sets {
            let gain = s.members.intersection(&uncovered).count();
            if gain == 0 || chosen.contains(&s.id) {
                continue;
            }
            let ratio = Rational::from_int(gain as i64) / s.weight.clone();
            if best.as_ref().is_none_or(|(r, _)| ratio > *r) {
                best = Some((ratio, s.id));
            }
        }
        let (ratio, id) = best.expect("feasible instance always has a useful set");
        for e in &ci.sets[id.0].members {
            uncovered.remove(e);
        }
        chosen.insert(id);
        trace.push(TraceStep {
            step: trace.len() + 1,
            chosen: id,
            ratio,
        });
    }
    Ok(Cover {
        weight: ci.weight_of(&chosen),
        chosen,
        trace,
    })
}

/// Primal-dual: for each uncovered element in order, raise its dual until
/// some set containing it becomes tight, then take every newly tight set.
/// The result weighs at most `f` times the optimum, `f` the maximum element
/// frequency.
pub fn primal_dual_cover(ci: &CoverInstance) -> Result<Cover> {
    ci.check_feasible()?;
    let mut slack: Vec<Rational> = ci.sets.iter().map(|s| s.weight.clone()).collect();
    let mut covered = vec![false; ci.elements.len()];
    let mut chosen = BTreeSet::new();
    let mut trace = Vec::new();
    for e in 0..ci.elements.len() {
        if covered[e] {
            continue;
        }
        let containing: Vec<usize> = ci
            .sets
            .iter()
            .filter(|s| s.members.contains(&e))
            .map(|s| s.id.0)
            .collect();
        let delta = containing
            .iter()
            .map(|&s| slack[s].clone())
            .min()
            .expect("feasible instance covers every element");
        // Raising y_e lowers the slack of every set containing e.
        for &s in &containing {
            slack[s] = slack[s].clone() - delta.clone();
        }
        for &s in &containing {
            if slack[s].is_zero() && chosen.insert(SetId(s)) {
                for &m in &ci.sets[s].members {
                    covered[m] = true;
                }
                trace.push(TraceStep {
                    step: trace.len() + 1,
                    chosen: SetId(s),
                    ratio: delta.clone(),
                });
            }
        }
    }
    Ok(Cover {
        weight: ci.weight_of(&chosen),
        chosen,
        trace,
    })
}

/// Default cap on the number of sets for exhaustive cover search.
pub const EXACT_COVER_MAX_SETS: usize = 20;

struct CoverSearch<'a> {
    ci: &'a CoverInstance,
    containing: Vec<Vec<usize>>,
    best: Option<Rational>,
    found: BTreeSet<BTreeSet<SetId>>,
}

impl CoverSearch<'_> {
    fn go(&mut self, count: &mut [usize], chosen: &mut Vec<usize>, weight: Rational) {
        if matches!(&self.best, Some(b) if weight > *b) {
            return;
        }
        let Some(e) = count.iter().position(|&c| c == 0) else {
            if self.best.as_ref().is_none_or(|b| weight < *b) {
                self.best = Some(weight);
                self.found.clear();
            }
            self.found.insert(chosen.iter().map(|&s| SetId(s)).collect());
            return;
        };
        for k in 0..self.containing[e].len() {
            let s = self.containing[e][k];
            if chosen.contains(&s) {
                continue;
            }
            for &m in &self.ci.sets[s].members {
                count[m] += 1;
            }
            chosen.push(s);
            let w = weight.clone() + self.ci.sets[s].weight.clone();
            self.go(count, chosen, w);
            chosen.pop();
            for &m in &self.ci.sets[s].members {
                count[m] -= 1;
            }
        }
    }
}

/// Every minimum-weight cover, ordered by their sorted id lists.
pub fn all_optimal_covers(ci: &CoverInstance, max_sets: usize) -> Result<Vec<Cover>> {
    if ci.sets.len() > max_sets {
        return Err(Error::CapExceeded {
            what: "sets in exhaustive cover search",
            limit: max_sets as u64,
        });
    }
    ci.check_feasible()?;
    let containing = (0..ci.elements.len())
        .map(|e| {
            ci.sets
                .iter()
                .filter(|s| s.members.contains(&e))
                .map(|s| s.id.0)
                .collect()
        })
        .collect();
    let mut search = CoverSearch {
        ci,
        containing,
        best: None,
        found: BTreeSet::new(),
    };
    search.go(&mut vec![0; ci.elements.len()], &mut Vec::new(), Rational::zero());
    let mut covers: Vec<Cover> = search
        .found
        .into_iter()
        .map(|c| Cover::from_sets(ci, c))
        .collect();
    covers.sort_by(|a, b| a.chosen.iter().cmp(b.chosen.iter()));
    Ok(covers)
}

/// A minimum-weight cover; the lexicographically smallest id list on ties.
pub fn exact_cover(ci: &CoverInstance, max_sets: usize) -> Result<Cover> {
    Ok(all_optimal_covers(ci, max_sets)?
        .into_iter()
        .next()
        .expect("a feasible instance has a cover"))
}

/// Replaces several chosen sets of one tuple by a single set resolving
/// their union.
pub fn star_normalize(c: &Cover, ci: &CoverInstance, ctx: &RepairContext<'_>) -> Result<Cover> {
    let mut by_owner: BTreeMap<TupleId, Vec<SetId>> = BTreeMap::new();
    for id in &c.chosen {
        by_owner.entry(ci.sets[id.0].owner).or_default().push(*id);
    }
    let mut chosen = BTreeSet::new();
    for (owner, ids) in by_owner {
        if ids.len() == 1 {
            chosen.insert(ids[0]);
            continue;
        }
        let fixes: Vec<LocalFix> = ids.iter().map(|s| ci.sets[s.0].fix.clone()).collect();
        let combined = ctx.combine_local_fixes(owner, &fixes)?;
        let existing = ci
            .sets
            .iter()
            .find(|s| s.owner == owner && s.fix.fixed == combined.fixed)
            .ok_or_else(|| Error::NoCombinedFix(format!("{} is not a listed local fix", combined.fixed)))?;
        chosen.insert(existing.id);
    }
    let mut out = Cover::from_sets(ci, chosen);
    out.trace = c.trace.clone();
    Ok(out)
}

/// The instance obtained by replacing each owner by its chosen local fix.
pub fn apply_cover(d: &Instance, c: &Cover, ci: &CoverInstance) -> Result<Instance> {
    let mut owners = BTreeSet::new();
    let mut out = d.clone();
    for id in &c.chosen {
        let set = ci
            .sets
            .get(id.0)
            .ok_or_else(|| Error::InvalidCover(format!("unknown set {id}")))?;
        if !owners.insert(set.owner) {
            return Err(Error::InvalidCover(format!(
                "{} owns more than one chosen set; normalize the cover first",
                set.owner
            )));
        }
        out.replace(set.fix.fixed.clone())?;
    }
    if !ci.is_cover(&c.chosen) {
        return Err(Error::InvalidCover("chosen sets do not cover every element".into()));
    }
    Ok(out)
}
