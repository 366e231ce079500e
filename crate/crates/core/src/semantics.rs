//! Denotations of formulas as relations over an active domain.
//!
//! A formula denotes a relation whose schema is its set of free variables.
//! Conjunctions are evaluated as joins, with negated conjuncts applied as
//! anti-joins where their variables are already bound; this computes the
//! same relation as intersecting cylindrified operands but never builds the
//! universal relation for a safe rule body.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::delta::{apply_delta, BooleanDelta, DeltaError};
use crate::formula::{Atom, AtomKind, Formula, Term};
use crate::relation::{ActiveDomain, Const, Name, Relation, RelationError, Schema, Tuple};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Delta(#[from] DeltaError),
    #[error("predicate `{0}` has no relation in the interpretation")]
    UnboundPredicate(Name),
    #[error("predicate `{0}` has no change bound for its delta atoms")]
    MissingDelta(Name),
    #[error("`{pred}` is bound to a relation of arity {expected}, but used with {found} arguments")]
    Arity {
        pred: Name,
        expected: usize,
        found: usize,
    },
    #[error("free variables {missing:?} are not in the target schema {schema}")]
    SchemaTooSmall { missing: Vec<Name>, schema: Schema },
    #[error("relation for `{pred}` must have schema {expected}, got {found}")]
    WrongSchema {
        pred: Name,
        expected: Schema,
        found: Schema,
    },
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

/// Relations for predicates, plus optional changes for evaluating delta atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interpretation {
    base: BTreeMap<Name, Relation>,
    deltas: BTreeMap<Name, BooleanDelta>,
}

fn expect_positional(pred: &Name, schema: &Schema) -> Result<()> {
    let expected = Schema::positional(pred, schema.len());
    if *schema != expected {
        return Err(EvalError::WrongSchema {
            pred: pred.clone(),
            expected,
            found: schema.clone(),
        });
    }
    Ok(())
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `pred`; the relation must be over `pred$0 .. pred$(n-1)`.
    pub fn insert(&mut self, pred: Name, rel: Relation) -> Result<()> {
        expect_positional(&pred, rel.schema())?;
        self.base.insert(pred, rel);
        Ok(())
    }

    /// Binds `pred` to the given rows.
    pub fn insert_rows<I, R>(&mut self, pred: &str, arity: usize, rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = Const>,
    {
        let rel = Relation::from_rows(Schema::positional(pred, arity), rows)?;
        self.insert(Name::from(pred), rel)
    }

    pub fn insert_delta(&mut self, pred: Name, d: BooleanDelta) -> Result<()> {
        expect_positional(&pred, d.schema())?;
        self.deltas.insert(pred, d);
        Ok(())
    }

    pub fn get(&self, pred: &str) -> Option<&Relation> {
        self.base.get(pred)
    }

    pub fn delta(&self, pred: &str) -> Option<&BooleanDelta> {
        self.deltas.get(pred)
    }

    pub fn relations(&self) -> &BTreeMap<Name, Relation> {
        &self.base
    }

    pub fn deltas(&self) -> &BTreeMap<Name, BooleanDelta> {
        &self.deltas
    }

    pub fn remove(&mut self, pred: &str) -> Option<Relation> {
        self.base.remove(pred)
    }

    pub fn clear_deltas(&mut self) {
        self.deltas.clear();
    }

    /// Same relations, no changes.
    pub fn without_deltas(&self) -> Interpretation {
        Interpretation {
            base: self.base.clone(),
            deltas: BTreeMap::new(),
        }
    }

    /// `ℛ ⊕ δℛ`: every bound change applied to its relation. A change to an
    /// unbound predicate applies to the empty relation.
    pub fn updated(&self) -> Result<Interpretation> {
        let mut base = self.base.clone();
        for (pred, d) in &self.deltas {
            let old = base
                .remove(pred)
                .unwrap_or_else(|| Relation::empty(d.schema().clone()));
            base.insert(pred.clone(), apply_delta(&old, d)?);
        }
        Ok(Interpretation {
            base,
            deltas: BTreeMap::new(),
        })
    }

    /// Every constant in a relation or change.
    pub fn constants(&self) -> BTreeSet<Const> {
        let mut out = BTreeSet::new();
        for r in self.base.values() {
            out.extend(r.constants());
        }
        for d in self.deltas.values() {
            out.extend(d.adds().constants());
            out.extend(d.removes().constants());
        }
        out
    }
}

/// `⟦f⟧` over `schema`, which must contain the free variables of `f`.
/// Variables of `schema` not free in `f` range over the whole domain.
pub fn eval(f: &Formula, schema: &Schema, env: &Interpretation, dom: &ActiveDomain) -> Result<Relation> {
    let free = Schema::new(f.free_vars()).expect("a set has no duplicates");
    let missing = free.missing_from(schema);
    if !missing.is_empty() {
        return Err(EvalError::SchemaTooSmall {
            missing,
            schema: schema.clone(),
        });
    }
    Ok(denote(f, env, dom)?.extend_to(schema, dom)?)
}

/// `⟦f⟧` over exactly the free variables of `f`.
pub fn denote(f: &Formula, env: &Interpretation, dom: &ActiveDomain) -> Result<Relation> {
    match f {
        Formula::Top => Ok(unit()),
        Formula::Bottom => Ok(Relation::empty(Schema::empty())),
        Formula::Atom(a) => atom(a, env, dom),
        Formula::And(..) => conjunction(f, env, dom),
        Formula::Or(l, r) => {
            let (l, r) = (denote(l, env, dom)?, denote(r, env, dom)?);
            let schema = l.schema().union(r.schema());
            Ok(l.extend_to(&schema, dom)?.union(&r.extend_to(&schema, dom)?)?)
        }
        Formula::Not(g) => Ok(denote(g, env, dom)?.complement(dom)?),
        Formula::Exists(x, g) => {
            let r = denote(g, env, dom)?;
            if r.schema().contains(x) {
                Ok(r.select_to(&r.schema().without(x))?)
            } else if dom.is_empty() {
                Ok(Relation::empty(r.schema().clone()))
            } else {
                Ok(r)
            }
        }
    }
}

fn unit() -> Relation {
    Relation::from_tuples(Schema::empty(), [Vec::new()]).expect("nullary tuple")
}

fn atom(a: &Atom, env: &Interpretation, dom: &ActiveDomain) -> Result<Relation> {
    let source = match a.kind {
        AtomKind::Base => env
            .get(&a.pred)
            .ok_or_else(|| EvalError::UnboundPredicate(a.pred.clone()))?,
        AtomKind::DeltaAdd | AtomKind::DeltaRemove => {
            let d = env
                .delta(&a.pred)
                .ok_or_else(|| EvalError::MissingDelta(a.pred.clone()))?;
            if a.kind == AtomKind::DeltaAdd {
                d.adds()
            } else {
                d.removes()
            }
        }
    };
    if source.schema().len() != a.args.len() {
        return Err(EvalError::Arity {
            pred: a.pred.clone(),
            expected: source.schema().len(),
            found: a.args.len(),
        });
    }
    for t in &a.args {
        if let Term::Const(c) = t {
            if !dom.contains(c) {
                return Err(RelationError::OutOfDomain(c.clone()).into());
            }
        }
    }
    // Output columns: distinct variables in order of first occurrence.
    let mut vars: Vec<Name> = Vec::new();
    for v in a.vars() {
        if !vars.contains(v) {
            vars.push(v.clone());
        }
    }
    let slot: Vec<Option<usize>> = a
        .args
        .iter()
        .map(|t| t.as_var().map(|v| vars.iter().position(|w| w == v).expect("collected")))
        .collect();
    let schema = Schema::new(vars.iter().cloned()).expect("distinct");
    let mut rows = Vec::new();
    'rows: for row in source.rows() {
        let mut out: Vec<Option<Const>> = vec![None; vars.len()];
        for ((value, term), s) in row.into_iter().zip(&a.args).zip(&slot) {
            match (term, s) {
                (Term::Const(c), _) if *c != value => continue 'rows,
                (Term::Const(_), _) => {}
                (Term::Var(_), Some(i)) => match &out[*i] {
                    Some(prev) if *prev != value => continue 'rows,
                    Some(_) => {}
                    None => out[*i] = Some(value),
                },
                (Term::Var(_), None) => unreachable!("variables have slots"),
            }
        }
        rows.push(out.into_iter().map(|c| c.expect("every variable bound")));
    }
    Ok(Relation::from_rows(schema, rows)?)
}

fn conjuncts<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
    match f {
        Formula::And(l, r) => {
            conjuncts(l, out);
            conjuncts(r, out);
        }
        other => out.push(other),
    }
}

fn conjunction(f: &Formula, env: &Interpretation, dom: &ActiveDomain) -> Result<Relation> {
    let mut parts = Vec::new();
    conjuncts(f, &mut parts);
    let target = Schema::new(f.free_vars()).expect("a set has no duplicates");
    let (negated, positive): (Vec<&Formula>, Vec<&Formula>) =
        parts.into_iter().partition(|p| matches!(p, Formula::Not(_)));
    let mut acc = unit();
    for p in positive {
        if acc.is_empty() {
            return Ok(Relation::empty(target));
        }
        acc = join(&acc, &denote(p, env, dom)?);
    }
    for n in negated {
        if acc.is_empty() {
            return Ok(Relation::empty(target));
        }
        let Formula::Not(g) = n else { unreachable!() };
        let g = denote(g, env, dom)?;
        if !g.schema().is_subset(acc.schema()) {
            acc = acc.extend_to(&acc.schema().union(g.schema()), dom)?;
        }
        acc = anti_join(&acc, &g);
    }
    Ok(acc.extend_to(&target, dom)?)
}

/// Natural join.
pub fn join(a: &Relation, b: &Relation) -> Relation {
    let schema = a.schema().union(b.schema());
    let common: Vec<&Name> = a
        .schema()
        .attrs()
        .iter()
        .filter(|n| b.schema().contains(n))
        .collect();
    let key_a: Vec<usize> = common.iter().map(|n| a.schema().index_of(n).expect("common")).collect();
    let key_b: Vec<usize> = common.iter().map(|n| b.schema().index_of(n).expect("common")).collect();
    // For each output column, where to read it from.
    let source: Vec<(bool, usize)> = schema
        .attrs()
        .iter()
        .map(|n| match a.schema().index_of(n) {
            Some(i) => (true, i),
            None => (false, b.schema().index_of(n).expect("in union")),
        })
        .collect();
    let mut index: HashMap<Vec<&Const>, Vec<&Tuple>> = HashMap::new();
    for t in b.tuples() {
        index.entry(key_b.iter().map(|&i| &t[i]).collect()).or_default().push(t);
    }
    let mut tuples = BTreeSet::new();
    for ta in a.tuples() {
        let key: Vec<&Const> = key_a.iter().map(|&i| &ta[i]).collect();
        if let Some(matches) = index.get(&key) {
            for tb in matches {
                tuples.insert(
                    source
                        .iter()
                        .map(|&(left, i)| if left { ta[i].clone() } else { tb[i].clone() })
                        .collect::<Tuple>(),
                );
            }
        }
    }
    Relation::from_tuples(schema, tuples).expect("tuples laid out for the schema")
}

/// Tuples of `a` whose restriction to `b`'s schema is not in `b`.
/// `b`'s schema must be a subset of `a`'s.
pub fn anti_join(a: &Relation, b: &Relation) -> Relation {
    debug_assert!(b.schema().is_subset(a.schema()));
    let idx: Vec<usize> = b
        .schema()
        .attrs()
        .iter()
        .map(|n| a.schema().index_of(n).expect("subset"))
        .collect();
    a.filter(|t| !b.contains(&idx.iter().map(|&i| t[i].clone()).collect::<Vec<_>>()))
}
