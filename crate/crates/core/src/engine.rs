//! Fixpoint evaluation and incremental maintenance.
//!
//! Programs are solved one stratum (strongly connected component of the IDB
//! dependency graph) at a time, dependencies first; lower strata are inputs
//! to higher ones.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::delta::{apply_delta, compose_delta, minus_exact, minus_top, BooleanDelta, DeltaError};
use crate::derive::{derive_program, simplify, DeriveConfig, DeriveError, FormulaDerivative};
use crate::frontend::{check_parity_stratification, FrontendError, Program, Strata};
use crate::par::{self, ExecMode};
use crate::relation::{ActiveDomain, Const, Name, Relation, RelationError, Schema, DEFAULT_MAX_RELATION_SIZE};
use crate::semantics::{eval, EvalError, Interpretation};

pub const DEFAULT_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Delta(#[from] DeltaError),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error("no fixed point for {} within {iterations} iterations", .preds.join(", "))]
    Divergence { preds: Vec<String>, iterations: usize },
    #[error("semi-naive iteration {iteration} disagrees with naive iteration for `{pred}`")]
    Unsound { iteration: usize, pred: Name },
    #[error("result for `{pred}` is not a fixed point of the immediate consequence operator")]
    NotFixedPoint { pred: Name },
    #[error("derivative maintenance did not converge within {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        last: BTreeMap<Name, BooleanDelta>,
    },
    #[error("`{0}` is not an EDB predicate of the program")]
    NotEdb(Name),
    #[error("`{pred}` has arity {expected} in the program but {found} in the input")]
    Arity {
        pred: Name,
        expected: usize,
        found: usize,
    },
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum EngineKind {
    Naive,
    #[default]
    SemiNaive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MaintenanceStrategy {
    #[default]
    Derivative,
    Trivial,
}

/// Which derivative of the evaluation map drives maintenance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum EvDerivative {
    /// `∂f(a*, δ) ⋈ δf(a* ⊕ δ)`.
    #[default]
    Ev1,
    /// `δf(a*) ⋈ ∂(f ⊕ δf)(a*, δ)`.
    Ev2,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub engine: EngineKind,
    pub maintenance: MaintenanceStrategy,
    pub ev_derivative: EvDerivative,
    /// Cross-check semi-naive iterates and maintenance results against
    /// naive recomputation.
    pub validate: bool,
    /// Fall back to recomputation when derivative maintenance fails.
    pub fallback: bool,
    pub trace: bool,
    pub derive: DeriveConfig,
    pub max_relation_size: usize,
    pub mode: ExecMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: DEFAULT_MAX_ITERS,
            engine: EngineKind::default(),
            maintenance: MaintenanceStrategy::default(),
            ev_derivative: EvDerivative::default(),
            validate: false,
            fallback: true,
            trace: false,
            derive: DeriveConfig::default(),
            max_relation_size: DEFAULT_MAX_RELATION_SIZE,
            mode: ExecMode::default(),
        }
    }
}

/// One iteration of a solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub stratum: usize,
    /// Naive runs count from 1; semi-naive runs index their changes from 0.
    pub iteration: usize,
    /// Values of the stratum after this iteration.
    pub values: BTreeMap<Name, Relation>,
    /// Naive: the exact change made by this iteration. Semi-naive: the
    /// change `δ_i` as computed by the derivative.
    pub deltas: BTreeMap<Name, BooleanDelta>,
    /// Naive only: facts deduced again although already known.
    pub rederived: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub idb: Interpretation,
    pub iterations: usize,
    pub trace: Option<Vec<TraceStep>>,
}

impl Solution {
    pub fn get(&self, pred: &str) -> Option<&Relation> {
        self.idb.get(pred)
    }
}

/// Everything an engine run needs: stratification, derivatives, and the
/// completed input relations.
struct Session<'a> {
    program: &'a Program,
    strata: Strata,
    dom: ActiveDomain,
    cfg: &'a SolverConfig,
}

impl<'a> Session<'a> {
    fn new(program: &'a Program, inputs: &[&Interpretation], cfg: &'a SolverConfig) -> Result<Self> {
        let strata = match program.strata() {
            Some(s) => s.clone(),
            None => check_parity_stratification(program)?,
        };
        let dom = active_domain(program, inputs.iter().flat_map(|i| i.constants()))
            .with_max_relation_size(cfg.max_relation_size);
        Ok(Session {
            program,
            strata,
            dom,
            cfg,
        })
    }

    fn components(&self) -> impl Iterator<Item = (usize, &[Name])> {
        self.strata.components().iter().map(|c| c.as_slice()).enumerate()
    }

    /// `ℐ` restricted to one stratum.
    fn consequence(&self, preds: &[Name], env: &Interpretation) -> Result<BTreeMap<Name, Relation>> {
        let results = par::map_slice(self.cfg.mode, preds, |pred| {
            let def = self.program.definition(pred).expect("IDB predicates have definitions");
            let schema = self.program.schema(pred).expect("known predicate");
            eval(def, &schema, env, &self.dom)
        });
        preds
            .iter()
            .cloned()
            .zip(results)
            .map(|(p, r)| Ok((p, r?)))
            .collect()
    }

    /// Evaluates `(Δ, ∇)` for each predicate of a stratum.
    fn changes(
        &self,
        preds: &[Name],
        derivs: &BTreeMap<Name, FormulaDerivative>,
        env: &Interpretation,
    ) -> Result<BTreeMap<Name, BooleanDelta>> {
        let results = par::map_slice(self.cfg.mode, preds, |pred| -> Result<BooleanDelta> {
            let d = &derivs[pred];
            let schema = self.program.schema(pred).expect("known predicate");
            let up = eval(&d.up, &schema, env, &self.dom)?;
            let down = eval(&d.down, &schema, env, &self.dom)?;
            Ok(BooleanDelta::new(up, down)?)
        });
        preds.iter().cloned().zip(results).map(|(p, r)| Ok((p, r?))).collect()
    }
}

/// Program constants together with `more`.
pub fn active_domain(p: &Program, more: impl IntoIterator<Item = Const>) -> ActiveDomain {
    let mut dom = ActiveDomain::new(p.constants());
    dom.extend(more);
    dom
}

/// The EDB as given, plus facts written in the program, with every EDB
/// predicate bound (to the empty relation if absent).
pub fn complete_edb(p: &Program, edb: &Interpretation) -> Result<Interpretation> {
    let mut out = Interpretation::new();
    for (pred, rel) in edb.relations() {
        let Some(&arity) = p.edb().get(pred) else {
            if p.is_idb(pred) {
                return Err(EngineError::NotEdb(pred.clone()));
            }
            // Unused input relations are kept; they cannot affect results.
            out.insert(pred.clone(), rel.clone())?;
            continue;
        };
        if rel.schema().len() != arity {
            return Err(EngineError::Arity {
                pred: pred.clone(),
                expected: arity,
                found: rel.schema().len(),
            });
        }
        out.insert(pred.clone(), rel.clone())?;
    }
    for (pred, &arity) in p.edb() {
        if out.get(pred).is_none() {
            out.insert(pred.clone(), Relation::empty(Schema::positional(pred, arity)))?;
        }
    }
    for (pred, row) in p.facts() {
        let mut rel = out.remove(pred).expect("bound above");
        rel.insert_row(row.clone())?;
        out.insert(pred.clone(), rel)?;
    }
    Ok(out)
}

fn empty_values(p: &Program, preds: &[Name]) -> BTreeMap<Name, Relation> {
    preds
        .iter()
        .map(|q| (q.clone(), Relation::empty(p.schema(q).expect("known predicate"))))
        .collect()
}

fn with_values(base: &Interpretation, values: &BTreeMap<Name, Relation>) -> Result<Interpretation> {
    let mut env = base.clone();
    for (p, r) in values {
        env.insert(p.clone(), r.clone())?;
    }
    Ok(env)
}

fn with_deltas(env: &mut Interpretation, deltas: &BTreeMap<Name, BooleanDelta>) -> Result<()> {
    for (p, d) in deltas {
        env.insert_delta(p.clone(), d.clone())?;
    }
    Ok(())
}

fn apply_all(
    values: &BTreeMap<Name, Relation>,
    deltas: &BTreeMap<Name, BooleanDelta>,
) -> Result<BTreeMap<Name, Relation>> {
    values
        .iter()
        .map(|(p, r)| {
            Ok((
                p.clone(),
                match deltas.get(p) {
                    Some(d) => apply_delta(r, d)?,
                    None => r.clone(),
                },
            ))
        })
        .collect()
}

/// Change atoms of predicates outside `keep` read as empty.
fn restrict(
    derivs: &BTreeMap<Name, FormulaDerivative>,
    preds: &[Name],
    changing: &BTreeSet<Name>,
    all: &BTreeSet<Name>,
) -> BTreeMap<Name, FormulaDerivative> {
    let unchanged: BTreeSet<Name> = all.difference(changing).cloned().collect();
    preds
        .iter()
        .map(|p| {
            let d = &derivs[p];
            (
                p.clone(),
                FormulaDerivative {
                    up: simplify(&d.up, &unchanged),
                    down: simplify(&d.down, &unchanged),
                },
            )
        })
        .collect()
}

fn all_predicates(p: &Program) -> BTreeSet<Name> {
    let mut all: BTreeSet<Name> = p.edb().keys().cloned().collect();
    all.extend(p.idb().keys().cloned());
    for def in p.definitions().values() {
        all.extend(def.predicates());
    }
    all
}

fn first_difference(
    a: &BTreeMap<Name, Relation>,
    b: &BTreeMap<Name, Relation>,
) -> Option<Name> {
    a.iter().find(|(p, r)| b.get(*p) != Some(*r)).map(|(p, _)| p.clone())
}

fn exact_changes(
    new: &BTreeMap<Name, Relation>,
    old: &BTreeMap<Name, Relation>,
) -> Result<BTreeMap<Name, BooleanDelta>> {
    new.iter()
        .map(|(p, r)| Ok((p.clone(), minus_exact(r, &old[p])?)))
        .collect()
}

/// Solves with the engine selected in `cfg`.
pub fn solve(p: &Program, edb: &Interpretation, cfg: &SolverConfig) -> Result<Solution> {
    match cfg.engine {
        EngineKind::Naive => naive_lfp(p, edb, cfg),
        EngineKind::SemiNaive => seminaive_lfp(p, edb, cfg),
    }
}

/// `ℐ` on every IDB predicate at `env`.
pub fn immediate_consequence(
    p: &Program,
    env: &Interpretation,
    dom: &ActiveDomain,
    mode: ExecMode,
) -> Result<BTreeMap<Name, Relation>> {
    let preds: Vec<Name> = p.idb().keys().cloned().collect();
    let results = par::map_slice(mode, &preds, |pred| {
        let def = p.definition(pred).expect("IDB predicates have definitions");
        eval(def, &p.schema(pred).expect("known predicate"), env, dom)
    });
    preds.into_iter().zip(results).map(|(q, r)| Ok((q, r?))).collect()
}

/// Kleene iteration `a_{k+1} = ℐ(a_k)` from the empty interpretation.
pub fn naive_lfp(p: &Program, edb: &Interpretation, cfg: &SolverConfig) -> Result<Solution> {
    let edb = complete_edb(p, edb)?;
    let s = Session::new(p, &[&edb], cfg)?;
    let mut inputs = edb;
    let mut idb = Interpretation::new();
    let mut trace = cfg.trace.then(Vec::new);
    let mut total = 0;
    for (index, preds) in s.components() {
        let (values, iterations) = naive_stratum(&s, index, preds, &inputs, trace.as_mut())?;
        total += iterations;
        for (q, r) in values {
            inputs.insert(q.clone(), r.clone())?;
            idb.insert(q, r)?;
        }
    }
    Ok(Solution {
        idb,
        iterations: total,
        trace,
    })
}

fn naive_stratum(
    s: &Session<'_>,
    index: usize,
    preds: &[Name],
    inputs: &Interpretation,
    mut trace: Option<&mut Vec<TraceStep>>,
) -> Result<(BTreeMap<Name, Relation>, usize)> {
    let mut a = empty_values(s.program, preds);
    for k in 1..=s.cfg.max_iters {
        let started = Instant::now();
        let next = s.consequence(preds, &with_values(inputs, &a)?)?;
        if let Some(t) = trace.as_deref_mut() {
            let rederived = next
                .iter()
                .map(|(q, r)| r.intersect(&a[q]).map(|x| x.len()))
                .sum::<Result<usize, _>>()?;
            t.push(TraceStep {
                stratum: index,
                iteration: k,
                values: next.clone(),
                deltas: exact_changes(&next, &a)?,
                rederived,
                elapsed: started.elapsed(),
            });
        }
        if next == a {
            return Ok((a, k));
        }
        a = next;
    }
    Err(EngineError::Divergence {
        preds: preds.iter().map(|q| q.to_string()).collect(),
        iterations: s.cfg.max_iters,
    })
}

/// Iterates `(a_{i+1}, δ_{i+1}) = (a_i ⊕ δ_i, ∂ℐ(a_i, δ_i))` from
/// `(∅, ℐ(∅) ⊖ ∅)` until a change no longer changes anything.
pub fn seminaive_lfp(p: &Program, edb: &Interpretation, cfg: &SolverConfig) -> Result<Solution> {
    let edb = complete_edb(p, edb)?;
    let s = Session::new(p, &[&edb], cfg)?;
    let derivs = derive_program(p, cfg.derive)?;
    let all = all_predicates(p);
    let mut inputs = edb;
    let mut idb = Interpretation::new();
    let mut trace = cfg.trace.then(Vec::new);
    let mut total = 0;
    for (index, preds) in s.components() {
        let changing: BTreeSet<Name> = preds.iter().cloned().collect();
        let local = restrict(&derivs, preds, &changing, &all);
        let (values, iterations) = seminaive_stratum(&s, index, preds, &local, &inputs, trace.as_mut())?;
        total += iterations;
        for (q, r) in values {
            inputs.insert(q.clone(), r.clone())?;
            idb.insert(q, r)?;
        }
    }
    Ok(Solution {
        idb,
        iterations: total,
        trace,
    })
}

fn seminaive_stratum(
    s: &Session<'_>,
    index: usize,
    preds: &[Name],
    derivs: &BTreeMap<Name, FormulaDerivative>,
    inputs: &Interpretation,
    mut trace: Option<&mut Vec<TraceStep>>,
) -> Result<(BTreeMap<Name, Relation>, usize)> {
    let mut a = empty_values(s.program, preds);
    // The seed `ℐ(∅) ⊖⊤ ∅` has nothing to remove.
    let mut delta: BTreeMap<Name, BooleanDelta> = s
        .consequence(preds, &with_values(inputs, &a)?)?
        .into_iter()
        .map(|(q, r)| (q, BooleanDelta::insertions(r)))
        .collect();
    // Naive iterate for validation: ℐ^i(∅).
    let mut naive = a.clone();
    for i in 0..s.cfg.max_iters {
        let started = Instant::now();
        let next = apply_all(&a, &delta)?;
        if s.cfg.validate {
            if let Some(pred) = first_difference(&a, &naive) {
                return Err(EngineError::Unsound { iteration: i, pred });
            }
            naive = s.consequence(preds, &with_values(inputs, &naive)?)?;
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceStep {
                stratum: index,
                iteration: i,
                values: next.clone(),
                deltas: delta.clone(),
                rederived: 0,
                elapsed: started.elapsed(),
            });
        }
        if next == a {
            if s.cfg.validate {
                let check = s.consequence(preds, &with_values(inputs, &a)?)?;
                if let Some(pred) = first_difference(&check, &a) {
                    return Err(EngineError::NotFixedPoint { pred });
                }
            }
            return Ok((a, i + 1));
        }
        let mut env = with_values(inputs, &a)?;
        with_deltas(&mut env, &delta)?;
        delta = s.changes(preds, derivs, &env)?;
        a = next;
    }
    Err(EngineError::Divergence {
        preds: preds.iter().map(|q| q.to_string()).collect(),
        iterations: s.cfg.max_iters,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Maintenance {
    /// Change to each IDB predicate, as produced by the strategy that ran.
    pub deltas: BTreeMap<Name, BooleanDelta>,
    /// IDB values after the change.
    pub updated: Interpretation,
    /// Derivative maintenance failed validation or did not converge, and
    /// the result was recomputed.
    pub fell_back: bool,
    /// Whether the result was checked against recomputation.
    pub validated: bool,
    pub iterations: usize,
}

impl Maintenance {
    /// The precise change: only facts that actually appear or disappear.
    pub fn effective(&self, old: &Solution) -> Result<BTreeMap<Name, BooleanDelta>> {
        self.deltas
            .iter()
            .map(|(p, d)| {
                let base = old
                    .get(p)
                    .cloned()
                    .unwrap_or_else(|| Relation::empty(d.schema().clone()));
                Ok((p.clone(), d.effective_on(&base)?))
            })
            .collect()
    }
}

fn complete_delta(
    p: &Program,
    edb_delta: &BTreeMap<Name, BooleanDelta>,
) -> Result<BTreeMap<Name, BooleanDelta>> {
    let mut out = BTreeMap::new();
    for (pred, d) in edb_delta {
        let Some(&arity) = p.edb().get(pred) else {
            if p.is_idb(pred) {
                return Err(EngineError::NotEdb(pred.clone()));
            }
            continue;
        };
        if d.schema().len() != arity {
            return Err(EngineError::Arity {
                pred: pred.clone(),
                expected: arity,
                found: d.schema().len(),
            });
        }
        out.insert(pred.clone(), d.clone());
    }
    Ok(out)
}

/// Updates a solution after a change to the EDB.
pub fn maintain(
    p: &Program,
    sol: &Solution,
    edb: &Interpretation,
    edb_delta: &BTreeMap<Name, BooleanDelta>,
    cfg: &SolverConfig,
) -> Result<Maintenance> {
    let edb_delta = complete_delta(p, edb_delta)?;
    match cfg.maintenance {
        MaintenanceStrategy::Trivial => trivial(p, sol, edb, &edb_delta, cfg, false),
        MaintenanceStrategy::Derivative => match derivative(p, sol, edb, &edb_delta, cfg) {
            Ok(Some(m)) => Ok(m),
            Ok(None) => trivial(p, sol, edb, &edb_delta, cfg, true),
            Err(EngineError::NonConvergence { .. }) if cfg.fallback => {
                trivial(p, sol, edb, &edb_delta, cfg, true)
            }
            Err(e) => Err(e),
        },
    }
}

fn updated_edb(p: &Program, edb: &Interpretation, edb_delta: &BTreeMap<Name, BooleanDelta>) -> Result<Interpretation> {
    let mut env = complete_edb(p, edb)?;
    with_deltas(&mut env, edb_delta)?;
    Ok(env.updated()?)
}

/// Recompute and return `new ⊖⊤ old`.
fn trivial(
    p: &Program,
    sol: &Solution,
    edb: &Interpretation,
    edb_delta: &BTreeMap<Name, BooleanDelta>,
    cfg: &SolverConfig,
    fell_back: bool,
) -> Result<Maintenance> {
    let quiet = SolverConfig {
        trace: false,
        ..cfg.clone()
    };
    let new = solve(p, &updated_edb(p, edb, edb_delta)?, &quiet)?;
    let mut deltas = BTreeMap::new();
    for (pred, r) in new.idb.relations() {
        let old = sol.get(pred).cloned().unwrap_or_else(|| Relation::empty(r.schema().clone()));
        deltas.insert(pred.clone(), minus_top(r, &old)?);
    }
    Ok(Maintenance {
        deltas,
        updated: new.idb,
        fell_back,
        validated: fell_back || cfg.validate,
        iterations: new.iterations,
    })
}

/// Derivative maintenance. `Ok(None)` asks for the fallback.
fn derivative(
    p: &Program,
    sol: &Solution,
    edb: &Interpretation,
    edb_delta: &BTreeMap<Name, BooleanDelta>,
    cfg: &SolverConfig,
) -> Result<Option<Maintenance>> {
    let old_edb = complete_edb(p, edb)?;
    let new_edb = updated_edb(p, edb, edb_delta)?;
    let s = Session::new(p, &[&old_edb, &new_edb, &sol.idb], cfg)?;
    let derivs = derive_program(p, cfg.derive)?;
    let all = all_predicates(p);
    // Old and new values of everything below the current stratum, and the
    // changes between them.
    let mut old_inputs = old_edb;
    let mut new_inputs = new_edb;
    let mut input_deltas = edb_delta.clone();
    let mut out = BTreeMap::new();
    let mut updated = Interpretation::new();
    let mut total = 0;
    for (_, preds) in s.components() {
        let own: BTreeSet<Name> = preds.iter().cloned().collect();
        let inputs_changing: BTreeSet<Name> = all.difference(&own).cloned().collect();
        let d_idb = restrict(&derivs, preds, &own, &all);
        let d_inputs = restrict(&derivs, preds, &inputs_changing, &all);
        let star: BTreeMap<Name, Relation> = preds
            .iter()
            .map(|q| {
                let r = sol
                    .get(q)
                    .cloned()
                    .unwrap_or_else(|| Relation::empty(p.schema(q).expect("known predicate")));
                (q.clone(), r)
            })
            .collect();
        let ctx = MaintainStratum {
            s: &s,
            preds,
            d_idb: &d_idb,
            d_inputs: &d_inputs,
            old_inputs: &old_inputs,
            new_inputs: &new_inputs,
            input_deltas: &input_deltas,
            star: &star,
        };
        let (delta, iterations) = ctx.run()?;
        total += iterations;
        let new_values = apply_all(&star, &delta)?;
        for q in preds {
            old_inputs.insert(q.clone(), star[q].clone())?;
            new_inputs.insert(q.clone(), new_values[q].clone())?;
            input_deltas.insert(q.clone(), delta[q].clone());
            updated.insert(q.clone(), new_values[q].clone())?;
            out.insert(q.clone(), delta[q].clone());
        }
    }
    if cfg.validate {
        let quiet = SolverConfig {
            trace: false,
            validate: false,
            ..cfg.clone()
        };
        let fresh = solve(p, &updated_edb(p, edb, edb_delta)?, &quiet)?;
        if fresh.idb != updated {
            return Ok(None);
        }
    }
    Ok(Some(Maintenance {
        deltas: out,
        updated,
        fell_back: false,
        validated: cfg.validate,
        iterations: total,
    }))
}

struct MaintainStratum<'s, 'a> {
    s: &'s Session<'a>,
    preds: &'s [Name],
    /// Derivatives with only this stratum's changes.
    d_idb: &'s BTreeMap<Name, FormulaDerivative>,
    /// Derivatives with only the inputs' changes.
    d_inputs: &'s BTreeMap<Name, FormulaDerivative>,
    old_inputs: &'s Interpretation,
    new_inputs: &'s Interpretation,
    input_deltas: &'s BTreeMap<Name, BooleanDelta>,
    star: &'s BTreeMap<Name, Relation>,
}

impl MaintainStratum<'_, '_> {
    /// `∂f(a*, δ)`, at the old or the updated inputs.
    fn df(&self, inputs: &Interpretation, delta: &BTreeMap<Name, BooleanDelta>) -> Result<BTreeMap<Name, BooleanDelta>> {
        let mut env = with_values(inputs, self.star)?;
        with_deltas(&mut env, delta)?;
        self.s.changes(self.preds, self.d_idb, &env)
    }

    /// `δf(x)`: the change to `f` caused by the input change, at `x`.
    fn delta_f(&self, x: &BTreeMap<Name, Relation>) -> Result<BTreeMap<Name, BooleanDelta>> {
        let mut env = with_values(self.old_inputs, x)?;
        let zeros: BTreeMap<Name, BooleanDelta> = self
            .old_inputs
            .relations()
            .iter()
            .filter(|(q, _)| !self.input_deltas.contains_key(*q))
            .map(|(q, r)| (q.clone(), BooleanDelta::zero(r.schema().clone())))
            .collect();
        with_deltas(&mut env, &zeros)?;
        with_deltas(&mut env, self.input_deltas)?;
        self.s.changes(self.preds, self.d_inputs, &env)
    }

    fn step(&self, delta: &BTreeMap<Name, BooleanDelta>) -> Result<BTreeMap<Name, BooleanDelta>> {
        let (first, second) = match self.s.cfg.ev_derivative {
            EvDerivative::Ev1 => (
                self.df(self.old_inputs, delta)?,
                self.delta_f(&apply_all(self.star, delta)?)?,
            ),
            EvDerivative::Ev2 => (self.delta_f(self.star)?, self.df(self.new_inputs, delta)?),
        };
        let mut next = BTreeMap::new();
        for q in self.preds {
            let combined = compose_delta(&first[q], &second[q])?;
            // Keep the iterate canonical so convergence is a syntactic test.
            let x = apply_delta(&self.star[q], &combined)?;
            next.insert(q.clone(), minus_exact(&x, &self.star[q])?);
        }
        Ok(next)
    }

    fn run(&self) -> Result<(BTreeMap<Name, BooleanDelta>, usize)> {
        let mut delta: BTreeMap<Name, BooleanDelta> = self
            .preds
            .iter()
            .map(|q| (q.clone(), BooleanDelta::zero(self.star[q].schema().clone())))
            .collect();
        for k in 1..=self.s.cfg.max_iters {
            let next = self.step(&delta)?;
            if next == delta {
                return Ok((delta, k));
            }
            delta = next;
        }
        Err(EngineError::NonConvergence {
            iterations: self.s.cfg.max_iters,
            last: delta,
        })
    }
}

/// Where two solutions first differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionDiff {
    pub pred: Name,
    /// A tuple in one solution but not the other, with the side holding it.
    pub witness: Option<(Vec<Const>, bool)>,
}

impl std::fmt::Display for SolutionDiff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.witness {
            Some((row, in_first)) => {
                let row: Vec<String> = row.iter().map(|c| c.to_string()).collect();
                let side = if *in_first { "first" } else { "second" };
                write!(f, "`{}` differs: ({}) only in the {side}", self.pred, row.join(", "))
            }
            None => write!(f, "`{}` is missing from one solution", self.pred),
        }
    }
}

/// Per-predicate set equality.
pub fn solution_equal(s1: &Solution, s2: &Solution) -> Result<(), SolutionDiff> {
    interpretations_equal(&s1.idb, &s2.idb)
}

pub fn interpretations_equal(a: &Interpretation, b: &Interpretation) -> Result<(), SolutionDiff> {
    let preds: BTreeSet<&Name> = a.relations().keys().chain(b.relations().keys()).collect();
    for pred in preds {
        match (a.get(pred), b.get(pred)) {
            (Some(x), Some(y)) if x == y => {}
            (Some(x), Some(y)) => {
                let witness = match x.difference(y) {
                    Ok(only) if !only.is_empty() => Some((only.rows().remove(0), true)),
                    _ => y
                        .difference(x)
                        .ok()
                        .and_then(|only| only.rows().into_iter().next())
                        .map(|r| (r, false)),
                };
                return Err(SolutionDiff {
                    pred: pred.clone(),
                    witness,
                });
            }
            _ => {
                return Err(SolutionDiff {
                    pred: pred.clone(),
                    witness: None,
                })
            }
        }
    }
    Ok(())
}

/// Convenience for callers holding a defining formula rather than a program.
pub fn is_fixed_point(p: &Program, edb: &Interpretation, idb: &Interpretation, cfg: &SolverConfig) -> Result<bool> {
    let edb = complete_edb(p, edb)?;
    let s = Session::new(p, &[&edb, idb], cfg)?;
    let mut env = edb;
    for (q, r) in idb.relations() {
        env.insert(q.clone(), r.clone())?;
    }
    let next = immediate_consequence(p, &env, &s.dom, cfg.mode)?;
    Ok(next.iter().all(|(q, r)| idb.get(q) == Some(r)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TC: &str = "tc(X,Y) :- e(X,Y). tc(X,Y) :- e(X,Z), tc(Z,Y).";
    const TREE: &str = "treeP(X) :- p(X), !( child(X,Y), !treeP(Y) ).";

    fn rel(pred: &str, rows: &[[i64; 2]]) -> Relation {
        Relation::from_rows(
            Schema::positional(pred, 2),
            rows.iter().map(|r| r.iter().map(|&v| Const::Int(v))),
        )
        .unwrap()
    }

    fn chain_edb() -> Interpretation {
        let mut edb = Interpretation::new();
        edb.insert("e".into(), rel("e", &[[1, 2], [2, 3], [3, 4]])).unwrap();
        edb
    }

    fn traced(engine: EngineKind) -> SolverConfig {
        SolverConfig {
            engine,
            trace: true,
            validate: true,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn naive_tc_trace() {
        let p = Program::parse(TC).unwrap();
        let sol = naive_lfp(&p, &chain_edb(), &traced(EngineKind::Naive)).unwrap();
        let trace = sol.trace.unwrap();
        let added: Vec<usize> = trace.iter().map(|s| s.deltas["tc"].adds().len()).collect();
        assert_eq!(added, [3, 2, 1, 0]);
        let rederived: Vec<usize> = trace.iter().map(|s| s.rederived).collect();
        assert_eq!(rederived, [0, 3, 5, 6]);
        assert_eq!(sol.idb.get("tc").unwrap().len(), 6);
    }

    #[test]
    fn seminaive_tc_trace() {
        let p = Program::parse(TC).unwrap();
        let sol = seminaive_lfp(&p, &chain_edb(), &traced(EngineKind::SemiNaive)).unwrap();
        let trace = sol.trace.unwrap();
        let deltas: Vec<Relation> = trace.iter().map(|s| s.deltas["tc"].adds().clone()).collect();
        assert_eq!(
            deltas,
            [
                rel("tc", &[[1, 2], [2, 3], [3, 4]]),
                rel("tc", &[[1, 3], [2, 4]]),
                rel("tc", &[[1, 4]]),
                rel("tc", &[]),
            ]
        );
        assert!(trace.iter().all(|s| s.deltas["tc"].removes().is_empty()));
        assert_eq!(trace[2].values["tc"].len(), 6);
    }

    #[test]
    fn engines_agree_with_negation() {
        let p = Program::parse(TREE).unwrap();
        let mut edb = Interpretation::new();
        edb.insert_rows("p", 1, [1, 2, 3, 4, 5].map(|v| [Const::Int(v)])).unwrap();
        edb.insert("child".into(), rel("child", &[[1, 2], [1, 3], [3, 6], [4, 5]])).unwrap();
        let a = naive_lfp(&p, &edb, &SolverConfig::default()).unwrap();
        let b = seminaive_lfp(&p, &edb, &traced(EngineKind::SemiNaive)).unwrap();
        assert_eq!(solution_equal(&a, &b), Ok(()));
        let got: Vec<Vec<Const>> = a.get("treeP").unwrap().rows();
        assert_eq!(got, [2, 4, 5].map(|v| vec![Const::Int(v)]));
    }

    fn tc_change(adds: &[[i64; 2]], removes: &[[i64; 2]]) -> BTreeMap<Name, BooleanDelta> {
        let d = BooleanDelta::new(rel("e", adds), rel("e", removes)).unwrap();
        [(Name::from("e"), d)].into()
    }

    #[test]
    fn maintain_tc_insert() {
        let p = Program::parse(TC).unwrap();
        let edb = chain_edb();
        for ev in [EvDerivative::Ev1, EvDerivative::Ev2] {
            let cfg = SolverConfig {
                ev_derivative: ev,
                validate: true,
                ..SolverConfig::default()
            };
            let sol = solve(&p, &edb, &cfg).unwrap();
            let m = maintain(&p, &sol, &edb, &tc_change(&[[4, 5]], &[]), &cfg).unwrap();
            assert!(!m.fell_back, "{ev:?}");
            let eff = m.effective(&sol).unwrap();
            assert_eq!(eff["tc"].adds(), &rel("tc", &[[1, 5], [2, 5], [3, 5], [4, 5]]));
            assert!(eff["tc"].removes().is_empty());
        }
    }

    #[test]
    fn maintain_tc_delete() {
        let p = Program::parse(TC).unwrap();
        let edb = chain_edb();
        let change = tc_change(&[], &[[2, 3]]);
        let removed = rel("tc", &[[1, 3], [1, 4], [2, 3], [2, 4]]);
        for strategy in [MaintenanceStrategy::Trivial, MaintenanceStrategy::Derivative] {
            let cfg = SolverConfig {
                maintenance: strategy,
                validate: true,
                ..SolverConfig::default()
            };
            let sol = solve(&p, &edb, &cfg).unwrap();
            let m = maintain(&p, &sol, &edb, &change, &cfg).unwrap();
            let eff = m.effective(&sol).unwrap();
            assert_eq!(eff["tc"].removes(), &removed, "{strategy:?}");
            assert!(eff["tc"].adds().is_empty());
        }
    }

    #[test]
    fn maintain_across_strata() {
        let text = "r(X,Y) :- e(X,Y). r(X,Y) :- e(X,Z), r(Z,Y). \
                    n(X) :- v(X), !r(X, X).";
        let p = Program::parse(text).unwrap();
        let mut edb = chain_edb();
        edb.insert_rows("v", 1, [1, 2, 3, 4].map(|v| [Const::Int(v)])).unwrap();
        let cfg = SolverConfig {
            validate: true,
            ..SolverConfig::default()
        };
        let sol = solve(&p, &edb, &cfg).unwrap();
        assert_eq!(sol.get("n").unwrap().len(), 4);
        let m = maintain(&p, &sol, &edb, &tc_change(&[[4, 1]], &[]), &cfg).unwrap();
        assert!(m.updated.get("n").unwrap().is_empty());
        let fresh = solve(&p, &updated_edb(&p, &edb, &tc_change(&[[4, 1]], &[])).unwrap(), &cfg).unwrap();
        assert_eq!(interpretations_equal(&m.updated, &fresh.idb), Ok(()));
    }

    #[test]
    fn program_facts_join_the_edb() {
        let p = Program::parse("e(1,2). e(2,3). tc(X,Y) :- e(X,Y). tc(X,Y) :- e(X,Z), tc(Z,Y).").unwrap();
        let sol = solve(&p, &Interpretation::new(), &SolverConfig::default()).unwrap();
        assert_eq!(sol.get("tc").unwrap().len(), 3);
    }

    #[test]
    fn divergence_is_reported() {
        let p = Program::parse(TC).unwrap();
        let cfg = SolverConfig {
            max_iters: 2,
            ..SolverConfig::default()
        };
        assert!(matches!(solve(&p, &chain_edb(), &cfg), Err(EngineError::Divergence { .. })));
    }

    #[test]
    fn idb_input_is_rejected() {
        let p = Program::parse(TC).unwrap();
        let mut edb = chain_edb();
        edb.insert("tc".into(), rel("tc", &[[1, 1]])).unwrap();
        assert!(matches!(
            solve(&p, &edb, &SolverConfig::default()),
            Err(EngineError::NotEdb(_))
        ));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let p = Program::parse(TC).unwrap();
        let run = |mode| {
            solve(&p, &chain_edb(), &SolverConfig { mode, ..SolverConfig::default() }).unwrap()
        };
        assert_eq!(run(ExecMode::Sequential), run(ExecMode::Parallel));
    }
}
