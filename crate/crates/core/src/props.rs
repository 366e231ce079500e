//! Randomized checks that evaluated `(Δ, ∇)` formulas behave as derivatives.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::delta::{apply_delta, compose_delta, delta_leq, minus_bot, minus_top, BooleanDelta};
use crate::derive::{DeriveConfig, DeriveError, Deriver, FormulaDerivative};
use crate::formula::Formula;
use crate::frontend::{render_delta, render_relation, Program};
use crate::gen::{int_constants, random_formula, random_interpretation, with_random_changes, FormulaShape};
use crate::par::{self, ExecMode};
use crate::relation::{universe, ActiveDomain, Const, Name, Relation, RelationError, Schema, DEFAULT_MAX_RELATION_SIZE};
use crate::semantics::{eval, EvalError, Interpretation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropertyError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error(transparent)]
    Relation(#[from] RelationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Property {
    /// `⟦T⟧(ℛ ⊕ δℛ) = ⟦T⟧(ℛ) ⊕ (⟦ΔT⟧, ⟦∇T⟧)`.
    Correctness,
    Disjointness,
    /// Between the changes built with `⊖⊥` and `⊖⊤`.
    Sandwich,
    RegularityZero,
    /// `∂(a, δ1 + δ2)` and `∂(a, δ1) + ∂(a ⊕ δ1, δ2)` have the same effect
    /// on the value at `a`. See [`strictly_additive`] for equality.
    RegularityAdditivity,
}

impl Property {
    pub const ALL: [Property; 5] = [
        Property::Correctness,
        Property::Disjointness,
        Property::Sandwich,
        Property::RegularityZero,
        Property::RegularityAdditivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Correctness => "derivative correctness",
            Property::Disjointness => "disjointness",
            Property::Sandwich => "sandwich bounds",
            Property::RegularityZero => "regularity (zero)",
            Property::RegularityAdditivity => "regularity (additivity)",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct PropertyConfig {
    pub samples: usize,
    pub seed: u64,
    /// Number of integer constants in the universe, before program constants.
    pub universe: usize,
    pub derive: DeriveConfig,
    pub density: f64,
    pub change_rate: f64,
    pub mode: ExecMode,
    /// Cap on any relation built while sampling or evaluating.
    pub max_relation_size: usize,
}

impl Default for PropertyConfig {
    fn default() -> Self {
        PropertyConfig {
            samples: 200,
            seed: 0,
            universe: 3,
            derive: DeriveConfig::default(),
            density: 0.4,
            change_rate: 0.25,
            mode: ExecMode::default(),
            max_relation_size: DEFAULT_MAX_RELATION_SIZE,
        }
    }
}

/// Relations with a first change bound, and a second change that applies
/// after the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub env: Interpretation,
    pub second: BTreeMap<Name, BooleanDelta>,
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "  relations:")?;
        for (p, r) in self.env.relations() {
            for line in render_relation(p, r).lines() {
                writeln!(f, "    {line}")?;
            }
        }
        writeln!(f, "  change:")?;
        for (p, d) in self.env.deltas() {
            for line in render_delta(p, d).lines() {
                writeln!(f, "    {line}")?;
            }
        }
        writeln!(f, "  second change:")?;
        for (p, d) in &self.second {
            for line in render_delta(p, d).lines() {
                writeln!(f, "    {line}")?;
            }
        }
        Ok(())
    }
}

/// A formula checked against its derivative, over a fixed schema.
#[derive(Debug, Clone)]
pub struct Target {
    pub label: String,
    pub formula: Formula,
    pub schema: Schema,
    pub derivative: FormulaDerivative,
}

impl Target {
    pub fn new(label: impl Into<String>, formula: Formula, schema: Schema, d: &Deriver) -> Result<Self, PropertyError> {
        let derivative = d.derive(&formula)?;
        Ok(Target {
            label: label.into(),
            formula,
            schema,
            derivative,
        })
    }

    /// Over the formula's free variables.
    pub fn free(label: impl Into<String>, formula: Formula, d: &Deriver) -> Result<Self, PropertyError> {
        let schema = Schema::new(formula.free_vars()).expect("a set has no duplicates");
        Self::new(label, formula, schema, d)
    }
}

#[derive(Debug, Clone)]
pub struct Failure {
    pub property: Property,
    pub target: String,
    pub instance: Instance,
    pub detail: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} fails for {}: {}", self.property, self.target, self.detail)?;
        write!(f, "{}", self.instance)
    }
}

#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub samples: usize,
    pub checks: usize,
    /// Samples on which additivity holds in effect but not as an equation
    /// between changes.
    pub strict_additivity_mismatches: usize,
    /// The first failing sample, shrunk.
    pub failure: Option<Failure>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

fn change_of(t: &Target, env: &Interpretation, dom: &ActiveDomain) -> Result<(Relation, Relation), EvalError> {
    Ok((
        eval(&t.derivative.up, &t.schema, env, dom)?,
        eval(&t.derivative.down, &t.schema, env, dom)?,
    ))
}

fn as_delta(t: &Target, env: &Interpretation, dom: &ActiveDomain) -> Result<Result<BooleanDelta, String>, EvalError> {
    let (up, down) = change_of(t, env, dom)?;
    Ok(BooleanDelta::new(up, down).map_err(|e| e.to_string()))
}

fn zero_deltas(env: &Interpretation) -> Interpretation {
    let mut out = env.without_deltas();
    for (p, r) in env.relations() {
        out.insert_delta(p.clone(), BooleanDelta::zero(r.schema().clone()))
            .expect("positional schema");
    }
    out
}

/// Environments for `(a ⊕ δ1, δ2)` and `(a, δ1 + δ2)`.
fn split_envs(inst: &Instance) -> Result<(Interpretation, Interpretation), EvalError> {
    let env = &inst.env;
    let mut later = env.updated()?;
    let mut composed = env.without_deltas();
    for (p, d1) in env.deltas() {
        let d2 = inst
            .second
            .get(p)
            .cloned()
            .unwrap_or_else(|| BooleanDelta::zero(d1.schema().clone()));
        composed.insert_delta(p.clone(), compose_delta(d1, &d2)?)?;
        later.insert_delta(p.clone(), d2)?;
    }
    Ok((later, composed))
}

/// Checks one property on one instance. `Ok(Some(detail))` is a failure.
pub fn check_property(
    prop: Property,
    t: &Target,
    inst: &Instance,
    dom: &ActiveDomain,
) -> Result<Option<String>, EvalError> {
    let env = &inst.env;
    match prop {
        Property::Correctness => {
            let old = eval(&t.formula, &t.schema, &env.without_deltas(), dom)?;
            let new = eval(&t.formula, &t.schema, &env.updated()?, dom)?;
            let (up, down) = change_of(t, env, dom)?;
            let got = old.union(&up)?.difference(&down)?;
            Ok((got != new).then(|| {
                format!("old ⊕ change has {} tuples, updated value has {}", got.len(), new.len())
            }))
        }
        Property::Disjointness => {
            let (up, down) = change_of(t, env, dom)?;
            let both = up.intersect(&down)?;
            Ok((!both.is_empty()).then(|| format!("{} tuples are both added and removed", both.len())))
        }
        Property::Sandwich => {
            let d = match as_delta(t, env, dom)? {
                Ok(d) => d,
                Err(e) => return Ok(Some(e)),
            };
            let old = eval(&t.formula, &t.schema, &env.without_deltas(), dom)?;
            let new = eval(&t.formula, &t.schema, &env.updated()?, dom)?;
            let all = universe(&t.schema, dom)?;
            let low = minus_bot(&new, &old, &all)?;
            let high = minus_top(&new, &old)?;
            if !delta_leq(&low, &d)?.is_le() {
                return Ok(Some("change is not above the ⊖⊥ change".into()));
            }
            if !delta_leq(&d, &high)?.is_le() {
                return Ok(Some("change is not below the ⊖⊤ change".into()));
            }
            Ok(None)
        }
        Property::RegularityZero => {
            let (up, down) = change_of(t, &zero_deltas(env), dom)?;
            Ok((!up.is_empty() || !down.is_empty()).then(|| "zero change has a non-zero derivative".to_string()))
        }
        Property::RegularityAdditivity => {
            let first = match as_delta(t, env, dom)? {
                Ok(d) => d,
                Err(e) => return Ok(Some(e)),
            };
            let (later, composed) = split_envs(inst)?;
            let second = match as_delta(t, &later, dom)? {
                Ok(d) => d,
                Err(e) => return Ok(Some(e)),
            };
            let whole = match as_delta(t, &composed, dom)? {
                Ok(d) => d,
                Err(e) => return Ok(Some(e)),
            };
            let parts = compose_delta(&first, &second)?;
            let old = eval(&t.formula, &t.schema, &env.without_deltas(), dom)?;
            let same = apply_delta(&old, &whole)? == apply_delta(&old, &parts)?;
            Ok((!same).then(|| "derivative of a composite change differs in effect from the composite of derivatives".into()))
        }
    }
}

/// Whether `∂(a, δ1 + δ2) = ∂(a, δ1) + ∂(a ⊕ δ1, δ2)` holds as an equation
/// between changes. The transform does not guarantee this: `∇(T ∧ U)` may
/// remove a tuple that was never present, and such spurious entries depend
/// on how the change was split.
pub fn strictly_additive(t: &Target, inst: &Instance, dom: &ActiveDomain) -> Result<bool, EvalError> {
    let env = &inst.env;
    let (later, composed) = split_envs(inst)?;
    let (Ok(first), Ok(second), Ok(whole)) = (as_delta(t, env, dom)?, as_delta(t, &later, dom)?, as_delta(t, &composed, dom)?)
    else {
        return Ok(false);
    };
    Ok(whole == compose_delta(&first, &second)?)
}

fn first_failure(targets: &[Target], inst: &Instance, dom: &ActiveDomain) -> Result<Option<(usize, Property, String)>, EvalError> {
    for (i, t) in targets.iter().enumerate() {
        for prop in Property::ALL {
            if let Some(detail) = check_property(prop, t, inst, dom)? {
                return Ok(Some((i, prop, detail)));
            }
        }
    }
    Ok(None)
}

/// Smaller instances: one tuple dropped from a relation or change.
fn shrink_candidates(inst: &Instance) -> Vec<Instance> {
    let mut out = Vec::new();
    let drop_one = |r: &Relation| -> Vec<Relation> {
        r.tuples()
            .iter()
            .map(|t| r.filter(|u| u != t.as_slice()))
            .collect()
    };
    for (p, r) in inst.env.relations() {
        for smaller in drop_one(r) {
            let mut c = inst.clone();
            c.env.insert(p.clone(), smaller).expect("positional schema");
            out.push(c);
        }
    }
    let split = |d: &BooleanDelta| -> Vec<BooleanDelta> {
        let mut v: Vec<BooleanDelta> = drop_one(d.adds())
            .into_iter()
            .map(|a| BooleanDelta::new(a, d.removes().clone()).expect("still disjoint"))
            .collect();
        v.extend(
            drop_one(d.removes())
                .into_iter()
                .map(|r| BooleanDelta::new(d.adds().clone(), r).expect("still disjoint")),
        );
        v
    };
    for (p, d) in inst.env.deltas() {
        for smaller in split(d) {
            let mut c = inst.clone();
            c.env.insert_delta(p.clone(), smaller).expect("positional schema");
            out.push(c);
        }
    }
    for (p, d) in &inst.second {
        for smaller in split(d) {
            let mut c = inst.clone();
            c.second.insert(p.clone(), smaller);
            out.push(c);
        }
    }
    out
}

/// Greedily removes tuples while `prop` keeps failing on `t`.
pub fn shrink(t: &Target, prop: Property, inst: Instance, dom: &ActiveDomain) -> Result<(Instance, String), EvalError> {
    let mut best = inst;
    let mut detail = check_property(prop, t, &best, dom)?.unwrap_or_default();
    'outer: loop {
        for c in shrink_candidates(&best) {
            if let Some(d) = check_property(prop, t, &c, dom)? {
                best = c;
                detail = d;
                continue 'outer;
            }
        }
        return Ok((best, detail));
    }
}

fn random_instance<R: Rng>(rng: &mut R, arities: &BTreeMap<Name, usize>, dom: &ActiveDomain, cfg: &PropertyConfig) -> Instance {
    let env = random_interpretation(rng, arities, dom, cfg.density);
    let env = with_random_changes(rng, env, arities, dom, cfg.change_rate);
    let second = with_random_changes(rng, Interpretation::new(), arities, dom, cfg.change_rate)
        .deltas()
        .clone();
    Instance { env, second }
}

fn run_cases(cases: &[(&[Target], &Instance)], dom: &ActiveDomain, cfg: &PropertyConfig) -> Result<PropertyReport, PropertyError> {
    let results = par::map_slice(cfg.mode, cases, |(targets, inst)| -> Result<_, EvalError> {
        let strict = targets
            .iter()
            .map(|t| strictly_additive(t, inst, dom).map(|ok| usize::from(!ok)))
            .sum::<Result<usize, _>>()?;
        Ok((first_failure(targets, inst, dom)?, strict))
    });
    let mut report = PropertyReport {
        samples: cases.len(),
        checks: cases.iter().map(|(t, _)| t.len() * Property::ALL.len()).sum(),
        strict_additivity_mismatches: 0,
        failure: None,
    };
    for ((targets, inst), result) in cases.iter().zip(results) {
        let (failure, strict) = result?;
        report.strict_additivity_mismatches += strict;
        if let (Some((i, prop, _)), None) = (failure, &report.failure) {
            let (instance, detail) = shrink(&targets[i], prop, (*inst).clone(), dom)?;
            report.failure = Some(Failure {
                property: prop,
                target: targets[i].label.clone(),
                instance,
                detail,
            });
        }
    }
    Ok(report)
}

/// Runs every property on `samples` random instances. Instances are drawn
/// up front from the seed, so the report does not depend on `cfg.mode`.
pub fn check_targets(
    targets: &[Target],
    arities: &BTreeMap<Name, usize>,
    dom: &ActiveDomain,
    cfg: &PropertyConfig,
) -> Result<PropertyReport, PropertyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let instances: Vec<Instance> = (0..cfg.samples)
        .map(|_| random_instance(&mut rng, arities, dom, cfg))
        .collect();
    let cases: Vec<(&[Target], &Instance)> = instances.iter().map(|i| (targets, i)).collect();
    run_cases(&cases, dom, cfg)
}

/// The sampling domain, rejected up front if a full relation over any
/// predicate would exceed the cap.
fn sample_domain(
    cfg: &PropertyConfig,
    extra: impl IntoIterator<Item = Const>,
    arities: &BTreeMap<Name, usize>,
) -> Result<ActiveDomain, PropertyError> {
    let mut dom = ActiveDomain::new(int_constants(cfg.universe)).with_max_relation_size(cfg.max_relation_size);
    dom.extend(extra);
    for (pred, &arity) in arities {
        universe(&Schema::positional(pred, arity), &dom)?;
    }
    Ok(dom)
}

/// Checks the defining formula of every IDB predicate of `p`, with all
/// predicates (IDB included) bound to random relations and changes.
pub fn check_program(p: &Program, cfg: &PropertyConfig) -> Result<PropertyReport, PropertyError> {
    let d = Deriver::new(cfg.derive);
    let targets = p
        .definitions()
        .iter()
        .map(|(pred, f)| Target::new(pred.to_string(), f.clone(), p.schema(pred).expect("known predicate"), &d))
        .collect::<Result<Vec<_>, _>>()?;
    let mut arities = p.edb().clone();
    arities.extend(p.idb().iter().map(|(k, v)| (k.clone(), *v)));
    let dom = sample_domain(cfg, p.constants(), &arities)?;
    check_targets(&targets, &arities, &dom, cfg)
}

/// Checks `samples` random formulas, one instance each.
pub fn check_random_formulas(shape: &FormulaShape, cfg: &PropertyConfig) -> Result<PropertyReport, PropertyError> {
    let d = Deriver::new(cfg.derive);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let arities = shape.arities();
    let dom = sample_domain(cfg, shape.constants.iter().cloned(), &arities)?;
    let cases: Vec<(Target, Instance)> = (0..cfg.samples)
        .map(|_| {
            let f = random_formula(&mut rng, shape);
            let inst = random_instance(&mut rng, &arities, &dom, cfg);
            Ok((Target::free(f.to_string(), f, &d)?, inst))
        })
        .collect::<Result<_, PropertyError>>()?;
    let cases: Vec<(&[Target], &Instance)> = cases.iter().map(|(t, i)| (std::slice::from_ref(t), i)).collect();
    run_cases(&cases, &dom, cfg)
}

/// `T` evaluated at the updated relations equals `X(T)` at the change.
pub fn next_matches_update(t: &Formula, inst: &Instance, dom: &ActiveDomain) -> Result<bool, PropertyError> {
    let schema = Schema::new(t.free_vars()).expect("a set has no duplicates");
    let x = crate::derive::next(t)?;
    let want = eval(t, &schema, &inst.env.updated()?, dom)?;
    Ok(eval(&x, &schema, &inst.env, dom)? == want)
}
