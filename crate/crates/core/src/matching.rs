//! Backtracking evaluation of conjunctive bodies over explicit row lists.

use crate::lang::{compare_values, Body, CompOp, Term};
use crate::model::{Instance, TupleId, Value};

#[derive(Clone, Debug)]
pub(crate) enum Slot {
    Var(usize),
    Const(Value),
}

#[derive(Clone, Debug)]
pub(crate) struct CompiledAtom {
    pub relation: String,
    pub args: Vec<Slot>,
}

/// A body with variables numbered `0..vars.len()` in first-occurrence order.
#[derive(Clone, Debug)]
pub(crate) struct CompiledBody {
    pub atoms: Vec<CompiledAtom>,
    pub vars: Vec<String>,
    comparisons: Vec<(Slot, CompOp, Slot)>,
    /// Comparisons whose variables are all bound once atoms `0..=i` match.
    checks_after: Vec<Vec<usize>>,
    /// False when a variable-free comparison is already false.
    ground_ok: bool,
}

/// A candidate row for an atom: an identifier chosen by the caller and the
/// tuple's values.
pub(crate) type Row<'a> = (usize, &'a [Value]);

impl CompiledBody {
    pub fn new(body: &Body) -> Self {
        let mut vars: Vec<String> = Vec::new();
        let slot = |t: &Term, vars: &mut Vec<String>| match t {
            Term::Const(c) => Slot::Const(c.clone()),
            Term::Var(v) => match vars.iter().position(|x| x == v) {
                Some(i) => Slot::Var(i),
                None => {
                    vars.push(v.clone());
                    Slot::Var(vars.len() - 1)
                }
            },
        };
        let atoms: Vec<CompiledAtom> = body
            .atoms
            .iter()
            .map(|a| CompiledAtom {
                relation: a.relation.clone(),
                args: a.args.iter().map(|t| slot(t, &mut vars)).collect(),
            })
            .collect();
        // Position after which each variable is bound.
        let mut bound_at = vec![usize::MAX; vars.len()];
        for (i, atom) in atoms.iter().enumerate() {
            for s in &atom.args {
                if let Slot::Var(v) = s {
                    bound_at[*v] = bound_at[*v].min(i);
                }
            }
        }
        let comparisons: Vec<(Slot, CompOp, Slot)> = body
            .comparisons
            .iter()
            .map(|c| (slot(&c.lhs, &mut vars), c.op, slot(&c.rhs, &mut vars)))
            .collect();
        let mut checks_after = vec![Vec::new(); atoms.len()];
        let mut ground_ok = true;
        for (ci, (l, op, r)) in comparisons.iter().enumerate() {
            let stage = [l, r]
                .iter()
                .filter_map(|s| match s {
                    Slot::Var(v) => Some(*bound_at.get(*v).unwrap_or(&usize::MAX)),
                    Slot::Const(_) => None,
                })
                .max();
            match stage {
                None => {
                    if let (Slot::Const(a), Slot::Const(b)) = (l, r) {
                        ground_ok &= compare_values(a, *op, b);
                    }
                }
                // Unbound comparison variables are rejected by the parser;
                // such a comparison can never hold.
                Some(usize::MAX) => ground_ok = false,
                Some(s) => checks_after[s].push(ci),
            }
        }
        CompiledBody {
            atoms,
            vars,
            comparisons,
            checks_after,
            ground_ok,
        }
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// Calls `f(binding, row_ids)` for every assignment matching all atoms
    /// (atom `i` ranging over `rows[i]`) and all comparisons. `f` returns
    /// `false` to stop; the return value is `false` iff stopped early.
    pub fn for_each(
        &self,
        rows: &[&[Row<'_>]],
        f: &mut dyn FnMut(&[Value], &[usize]) -> bool,
    ) -> bool {
        debug_assert_eq!(rows.len(), self.atoms.len());
        if !self.ground_ok {
            return true;
        }
        let mut state = State {
            binding: vec![Value::Int(0); self.vars.len()],
            bound: vec![false; self.vars.len()],
            ids: vec![0; self.atoms.len()],
        };
        if self.atoms.is_empty() {
            return f(&state.binding, &state.ids);
        }
        self.search(0, rows, &mut state, f)
    }

    /// True iff at least one assignment exists.
    pub fn any(&self, rows: &[&[Row<'_>]]) -> bool {
        !self.for_each(rows, &mut |_, _| false)
    }

    fn search(
        &self,
        i: usize,
        rows: &[&[Row<'_>]],
        st: &mut State,
        f: &mut dyn FnMut(&[Value], &[usize]) -> bool,
    ) -> bool {
        let atom = &self.atoms[i];
        let mut newly = Vec::with_capacity(atom.args.len());
        for &(id, values) in rows[i] {
            if values.len() != atom.args.len() {
                continue;
            }
            newly.clear();
            let mut ok = true;
            for (slot, v) in atom.args.iter().zip(values) {
                match slot {
                    Slot::Const(c) => {
                        if c != v {
                            ok = false;
                            break;
                        }
                    }
                    Slot::Var(x) => {
                        if st.bound[*x] {
                            if &st.binding[*x] != v {
                                ok = false;
                                break;
                            }
                        } else {
                            st.bound[*x] = true;
                            st.binding[*x] = v.clone();
                            newly.push(*x);
                        }
                    }
                }
            }
            if ok {
                ok = self.checks_after[i].iter().all(|&c| {
                    let (l, op, r) = &self.comparisons[c];
                    compare_values(resolve(l, st), *op, resolve(r, st))
                });
            }
            if ok {
                st.ids[i] = id;
                let go_on = if i + 1 == self.atoms.len() {
                    f(&st.binding, &st.ids)
                } else {
                    self.search(i + 1, rows, st, f)
                };
                if !go_on {
                    return false;
                }
            }
            for &x in &newly {
                st.bound[x] = false;
            }
        }
        true
    }
}

struct State {
    binding: Vec<Value>,
    bound: Vec<bool>,
    ids: Vec<usize>,
}

fn resolve<'a>(slot: &'a Slot, st: &'a State) -> &'a Value {
    match slot {
        Slot::Const(c) => c,
        Slot::Var(v) => &st.binding[*v],
    }
}

/// Rows of every relation keyed by relation name, with canonical tuple ids.
pub(crate) fn indexed_rows(d: &Instance) -> std::collections::HashMap<&str, Vec<Row<'_>>> {
    let mut out: std::collections::HashMap<&str, Vec<Row<'_>>> = std::collections::HashMap::new();
    for rel in d.schema().relations() {
        out.insert(rel.name.as_str(), Vec::new());
    }
    for (i, t) in d.tuples().enumerate() {
        out.entry(t.relation.as_str())
            .or_default()
            .push((TupleId(i).0, t.values.as_slice()));
    }
    out
}
