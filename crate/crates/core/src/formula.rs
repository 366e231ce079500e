//! Datalog formulas.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::relation::{Const, Name};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Name),
    Const(Const),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Arc::from(name))
    }

    pub fn as_var(&self) -> Option<&Name> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

impl From<i64> for Term {
    fn from(v: i64) -> Self {
        Term::Const(Const::Int(v))
    }
}

/// Which relation an atom reads: the predicate itself, or the adds/removes
/// of its change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AtomKind {
    Base,
    DeltaAdd,
    DeltaRemove,
}

impl AtomKind {
    /// Surface-syntax prefix for the atom's predicate name.
    pub fn prefix(self) -> &'static str {
        match self {
            AtomKind::Base => "",
            AtomKind::DeltaAdd => "delta_",
            AtomKind::DeltaRemove => "nabla_",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: Name,
    pub kind: AtomKind,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Self {
        Atom {
            pred: Arc::from(pred),
            kind: AtomKind::Base,
            args,
        }
    }

    pub fn with_kind(&self, kind: AtomKind) -> Atom {
        Atom {
            kind,
            ..self.clone()
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &Name> {
        self.args.iter().filter_map(Term::as_var)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Top,
    Bottom,
    Atom(Atom),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
    Exists(Name, Box<Formula>),
}

impl Formula {
    pub fn atom(pred: &str, args: Vec<Term>) -> Formula {
        Formula::Atom(Atom::new(pred, args))
    }

    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::Or(Box::new(l), Box::new(r))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn exists(var: &str, f: Formula) -> Formula {
        Formula::Exists(Arc::from(var), Box::new(f))
    }

    /// Free variables.
    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Formula::Top | Formula::Bottom => {}
            Formula::Atom(a) => {
                out.extend(a.vars().filter(|v| !bound.contains(v)).cloned());
            }
            Formula::And(l, r) | Formula::Or(l, r) => {
                l.collect_free(bound, out);
                r.collect_free(bound, out);
            }
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::Exists(v, f) => {
                bound.push(v.clone());
                f.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// Every atom, in left-to-right order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| out.push(a));
        out
    }

    fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            Formula::Top | Formula::Bottom => {}
            Formula::Atom(a) => f(a),
            Formula::And(l, r) | Formula::Or(l, r) => {
                l.visit_atoms(f);
                r.visit_atoms(f);
            }
            Formula::Not(g) | Formula::Exists(_, g) => g.visit_atoms(f),
        }
    }

    /// Predicates read by base atoms.
    pub fn predicates(&self) -> BTreeSet<Name> {
        self.atoms().into_iter().map(|a| a.pred.clone()).collect()
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Top | Formula::Bottom | Formula::Atom(_) => 1,
            Formula::And(l, r) | Formula::Or(l, r) => 1 + l.depth().max(r.depth()),
            Formula::Not(f) | Formula::Exists(_, f) => 1 + f.depth(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::Top | Formula::Bottom | Formula::Atom(_) => 1,
            Formula::And(l, r) | Formula::Or(l, r) => 1 + l.size() + r.size(),
            Formula::Not(f) | Formula::Exists(_, f) => 1 + f.size(),
        }
    }

    /// Replaces free occurrences of variables. Images must not be captured by
    /// binders inside the formula; callers use names that cannot clash.
    pub fn rename_free(&self, mapping: &BTreeMap<Name, Name>) -> Formula {
        match self {
            Formula::Top | Formula::Bottom => self.clone(),
            Formula::Atom(a) => Formula::Atom(Atom {
                args: a
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => Term::Var(mapping.get(v).unwrap_or(v).clone()),
                        c => c.clone(),
                    })
                    .collect(),
                ..a.clone()
            }),
            Formula::And(l, r) => Formula::and(l.rename_free(mapping), r.rename_free(mapping)),
            Formula::Or(l, r) => Formula::or(l.rename_free(mapping), r.rename_free(mapping)),
            Formula::Not(f) => Formula::not(f.rename_free(mapping)),
            Formula::Exists(v, f) => {
                if mapping.contains_key(v) {
                    let mut inner = mapping.clone();
                    inner.remove(v);
                    Formula::Exists(v.clone(), Box::new(f.rename_free(&inner)))
                } else {
                    Formula::Exists(v.clone(), Box::new(f.rename_free(mapping)))
                }
            }
        }
    }

    /// Whether any atom has a delta kind.
    pub fn has_delta_atoms(&self) -> bool {
        self.atoms().iter().any(|a| a.kind != AtomKind::Base)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}(", self.kind.prefix(), self.pred)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

/// Mathematical rendering, mainly for diagnostics.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Top => f.write_str("⊤"),
            Formula::Bottom => f.write_str("⊥"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::And(l, r) => write!(f, "({l} ∧ {r})"),
            Formula::Or(l, r) => write!(f, "({l} ∨ {r})"),
            Formula::Not(g) => write!(f, "¬{g}"),
            Formula::Exists(v, g) => write!(f, "∃{v}.{g}"),
        }
    }
}
