//! Syntactic upward (Δ) and downward (∇) derivatives of formulas.
//!
//! ```text
//! Δ(⊥) = Δ(⊤) = ⊥            ∇(⊥) = ∇(⊤) = ⊥
//! Δ(R) = ΔR                  ∇(R) = ∇R
//! Δ(T ∨ U) = ΔT ∨ ΔU         ∇(T ∨ U) = (∇T ∧ ¬X(U)) ∨ (∇U ∧ ¬X(T))
//! Δ(T ∧ U) = (ΔT ∧ X(U)) ∨ (ΔU ∧ X(T))
//!                            ∇(T ∧ U) = (∇T ∧ U) ∨ (T ∧ ∇U)
//! Δ(¬T) = ∇T                 ∇(¬T) = ΔT
//! Δ(∃x.T) = ∃x.ΔT            ∇(∃x.T) = ∃x.∇T ∧ ¬∃x.X(T)
//! X(T) = (T ∨ ΔT) ∧ ¬∇T
//! ```
//!
//! Evaluated with each predicate's change bound to its `ΔR`/`∇R` atoms, the
//! pair `(⟦ΔT⟧, ⟦∇T⟧)` is a change that takes `⟦T⟧` at the old relations to
//! `⟦T⟧` at the updated ones.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::formula::{Atom, AtomKind, Formula};
use crate::frontend::Program;
use crate::relation::Name;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeriveError {
    #[error("formula already contains the change atom `{0}`; derivatives of derivatives are not supported")]
    AlreadyDifferentiated(Atom),
}

/// Deliberate defects, used to confirm the property checker catches them.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// `Δ(¬T) = ΔT` and `∇(¬T) = ∇T`.
    NegationKeepsPolarity,
    /// `∇(T ∧ U) = ∇T ∧ ∇U`.
    NablaAndIntersects,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeriveConfig {
    /// Use `Δ(T ∨ U) = (ΔT ∧ ¬U) ∨ (ΔU ∧ ¬T)`, which never reports an
    /// addition that was already present.
    pub symmetric_or: bool,
    #[doc(hidden)]
    pub mutation: Option<Mutation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormulaDerivative {
    /// `Δ(T)`: what becomes true.
    pub up: Formula,
    /// `∇(T)`: what becomes false.
    pub down: Formula,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Deriver {
    cfg: DeriveConfig,
}

impl Deriver {
    pub fn new(cfg: DeriveConfig) -> Self {
        Deriver { cfg }
    }

    fn check(t: &Formula) -> Result<(), DeriveError> {
        match t.atoms().into_iter().find(|a| a.kind != AtomKind::Base) {
            Some(a) => Err(DeriveError::AlreadyDifferentiated(a.clone())),
            None => Ok(()),
        }
    }

    pub fn delta(&self, t: &Formula) -> Result<Formula, DeriveError> {
        Self::check(t)?;
        Ok(self.up(t))
    }

    pub fn nabla(&self, t: &Formula) -> Result<Formula, DeriveError> {
        Self::check(t)?;
        Ok(self.down(t))
    }

    pub fn next(&self, t: &Formula) -> Result<Formula, DeriveError> {
        Self::check(t)?;
        Ok(self.x(t))
    }

    pub fn derive(&self, t: &Formula) -> Result<FormulaDerivative, DeriveError> {
        Self::check(t)?;
        Ok(FormulaDerivative {
            up: self.up(t),
            down: self.down(t),
        })
    }

    fn x(&self, t: &Formula) -> Formula {
        Formula::and(Formula::or(t.clone(), self.up(t)), Formula::not(self.down(t)))
    }

    fn up(&self, t: &Formula) -> Formula {
        match t {
            Formula::Top | Formula::Bottom => Formula::Bottom,
            Formula::Atom(a) => Formula::Atom(a.with_kind(AtomKind::DeltaAdd)),
            Formula::Or(l, r) if self.cfg.symmetric_or => Formula::or(
                Formula::and(self.up(l), Formula::not((**r).clone())),
                Formula::and(self.up(r), Formula::not((**l).clone())),
            ),
            Formula::Or(l, r) => Formula::or(self.up(l), self.up(r)),
            Formula::And(l, r) => Formula::or(
                Formula::and(self.up(l), self.x(r)),
                Formula::and(self.up(r), self.x(l)),
            ),
            Formula::Not(g) if self.cfg.mutation == Some(Mutation::NegationKeepsPolarity) => self.up(g),
            Formula::Not(g) => self.down(g),
            Formula::Exists(v, g) => Formula::Exists(v.clone(), Box::new(self.up(g))),
        }
    }

    fn down(&self, t: &Formula) -> Formula {
        match t {
            Formula::Top | Formula::Bottom => Formula::Bottom,
            Formula::Atom(a) => Formula::Atom(a.with_kind(AtomKind::DeltaRemove)),
            Formula::Or(l, r) => Formula::or(
                Formula::and(self.down(l), Formula::not(self.x(r))),
                Formula::and(self.down(r), Formula::not(self.x(l))),
            ),
            Formula::And(l, r) if self.cfg.mutation == Some(Mutation::NablaAndIntersects) => {
                Formula::and(self.down(l), self.down(r))
            }
            Formula::And(l, r) => Formula::or(
                Formula::and(self.down(l), (**r).clone()),
                Formula::and((**l).clone(), self.down(r)),
            ),
            Formula::Not(g) if self.cfg.mutation == Some(Mutation::NegationKeepsPolarity) => self.down(g),
            Formula::Not(g) => self.up(g),
            Formula::Exists(v, g) => Formula::and(
                Formula::Exists(v.clone(), Box::new(self.down(g))),
                Formula::not(Formula::Exists(v.clone(), Box::new(self.x(g)))),
            ),
        }
    }
}

/// `Δ(T)` with the default configuration.
pub fn delta(t: &Formula) -> Result<Formula, DeriveError> {
    Deriver::default().delta(t)
}

/// `∇(T)` with the default configuration.
pub fn nabla(t: &Formula) -> Result<Formula, DeriveError> {
    Deriver::default().nabla(t)
}

/// `X(T) = (T ∨ ΔT) ∧ ¬∇T`, whose value is `T` at the updated relations.
pub fn next(t: &Formula) -> Result<Formula, DeriveError> {
    Deriver::default().next(t)
}

/// Derivatives of every IDB defining formula.
pub fn derive_program(p: &Program, cfg: DeriveConfig) -> Result<BTreeMap<Name, FormulaDerivative>, DeriveError> {
    let d = Deriver::new(cfg);
    p.definitions()
        .iter()
        .map(|(pred, def)| Ok((pred.clone(), d.derive(def)?)))
        .collect()
}

/// Constant folding, with the change atoms of `unchanged` predicates read
/// as `⊥`. Preserves the denotation over any non-empty domain, up to
/// cylindrification onto dropped free variables.
pub fn simplify(f: &Formula, unchanged: &BTreeSet<Name>) -> Formula {
    match f {
        Formula::Top | Formula::Bottom => f.clone(),
        Formula::Atom(a) if a.kind != AtomKind::Base && unchanged.contains(&a.pred) => Formula::Bottom,
        Formula::Atom(_) => f.clone(),
        Formula::And(l, r) => match (simplify(l, unchanged), simplify(r, unchanged)) {
            (Formula::Bottom, _) | (_, Formula::Bottom) => Formula::Bottom,
            (Formula::Top, g) | (g, Formula::Top) => g,
            (l, r) => Formula::and(l, r),
        },
        Formula::Or(l, r) => match (simplify(l, unchanged), simplify(r, unchanged)) {
            (Formula::Top, _) | (_, Formula::Top) => Formula::Top,
            (Formula::Bottom, g) | (g, Formula::Bottom) => g,
            (l, r) => Formula::or(l, r),
        },
        Formula::Not(g) => match simplify(g, unchanged) {
            Formula::Top => Formula::Bottom,
            Formula::Bottom => Formula::Top,
            Formula::Not(h) => *h,
            g => Formula::not(g),
        },
        Formula::Exists(v, g) => match simplify(g, unchanged) {
            Formula::Bottom => Formula::Bottom,
            g => Formula::Exists(v.clone(), Box::new(g)),
        },
    }
}
