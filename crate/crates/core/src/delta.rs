//! Add/remove changes on relations.
//!
//! A [`BooleanDelta`] is a pair `(adds, removes)` of disjoint relations. It
//! acts on a relation by `(base ∪ adds) \ removes`, and two deltas compose as
//! `(p, q) ⋈ (r, s) = ((p \ s) ∪ r, (q \ r) ∪ s)`. The zero change is `(∅, ∅)`.
//!
//! Deltas are ordered by `(p, q) ≤ (r, s)` iff `p ⊆ r` and `q ⊇ s`: a smaller
//! delta adds less and removes more.

use std::fmt;

use thiserror::Error;

use crate::change::{ChangeActionSpec, MinusOperator};
use crate::relation::{Relation, RelationError, Schema, Tuple};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeltaError {
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error("adds and removes overlap on {witness:?} over {schema}")]
    Overlap { schema: Schema, witness: Tuple },
    #[error("{what} is not contained in the universe {universe}")]
    NotContained { what: &'static str, universe: Schema },
    #[error("deltas {first} and {second} have no upper bound in the collection")]
    NotDirected { first: Box<BooleanDelta>, second: Box<BooleanDelta> },
    #[error("supremum of an empty collection")]
    EmptyCollection,
}

pub type Result<T, E = DeltaError> = std::result::Result<T, E>;

/// A disjoint `(adds, removes)` pair over one schema.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BooleanDelta {
    adds: Relation,
    removes: Relation,
}

impl BooleanDelta {
    /// Rejects overlapping pairs; nothing is canonicalized.
    pub fn new(adds: Relation, removes: Relation) -> Result<Self> {
        if adds.schema() != removes.schema() {
            return Err(RelationError::SchemaMismatch {
                left: adds.schema().clone(),
                right: removes.schema().clone(),
            }
            .into());
        }
        if let Some(t) = adds.tuples().iter().find(|t| removes.contains(t)) {
            return Err(DeltaError::Overlap {
                schema: adds.schema().clone(),
                witness: t.clone(),
            });
        }
        Ok(BooleanDelta { adds, removes })
    }

    pub fn zero(schema: Schema) -> Self {
        BooleanDelta {
            adds: Relation::empty(schema.clone()),
            removes: Relation::empty(schema),
        }
    }

    pub fn insertions(adds: Relation) -> Self {
        let removes = Relation::empty(adds.schema().clone());
        BooleanDelta { adds, removes }
    }

    pub fn deletions(removes: Relation) -> Self {
        let adds = Relation::empty(removes.schema().clone());
        BooleanDelta { adds, removes }
    }

    pub fn adds(&self) -> &Relation {
        &self.adds
    }

    pub fn removes(&self) -> &Relation {
        &self.removes
    }

    pub fn schema(&self) -> &Schema {
        self.adds.schema()
    }

    pub fn is_zero(&self) -> bool {
        self.adds.is_empty() && self.removes.is_empty()
    }

    pub fn into_parts(self) -> (Relation, Relation) {
        (self.adds, self.removes)
    }

    /// The part of this delta that changes `base`: `(adds \ base, removes ∩ base)`.
    /// Applying it to `base` gives the same result as applying `self`.
    pub fn effective_on(&self, base: &Relation) -> Result<BooleanDelta> {
        Ok(BooleanDelta {
            adds: self.adds.difference(base)?,
            removes: self.removes.intersect(base)?,
        })
    }

    /// Swaps adds and removes.
    pub fn flipped(&self) -> BooleanDelta {
        BooleanDelta {
            adds: self.removes.clone(),
            removes: self.adds.clone(),
        }
    }
}

/// `(base ∪ adds) \ removes`.
pub fn apply_delta(base: &Relation, d: &BooleanDelta) -> Result<Relation> {
    Ok(base.union(&d.adds)?.difference(&d.removes)?)
}

/// `d1 ⋈ d2`: first `d1`, then `d2`.
pub fn compose_delta(d1: &BooleanDelta, d2: &BooleanDelta) -> Result<BooleanDelta> {
    let adds = d1.adds.difference(&d2.removes)?.union(&d2.adds)?;
    let removes = d1.removes.difference(&d2.adds)?.union(&d2.removes)?;
    debug_assert!(adds.is_disjoint(&removes).unwrap_or(false));
    Ok(BooleanDelta { adds, removes })
}

/// `a ⊖⊥ b = (a \ b, U \ a)`, the least delta sending `b` to `a`.
pub fn minus_bot(a: &Relation, b: &Relation, universe: &Relation) -> Result<BooleanDelta> {
    if !a.is_subset(universe)? {
        return Err(DeltaError::NotContained {
            what: "minuend",
            universe: universe.schema().clone(),
        });
    }
    if !b.is_subset(universe)? {
        return Err(DeltaError::NotContained {
            what: "subtrahend",
            universe: universe.schema().clone(),
        });
    }
    Ok(BooleanDelta {
        adds: a.difference(b)?,
        removes: universe.difference(a)?,
    })
}

/// `a ⊖⊤ b = (a, b \ a)`, the greatest delta sending `b` to `a`.
pub fn minus_top(a: &Relation, b: &Relation) -> Result<BooleanDelta> {
    Ok(BooleanDelta {
        adds: a.clone(),
        removes: b.difference(a)?,
    })
}

/// `(a \ b, b \ a)`: the delta sending `b` to `a` that touches nothing else.
pub fn minus_exact(a: &Relation, b: &Relation) -> Result<BooleanDelta> {
    Ok(BooleanDelta {
        adds: a.difference(b)?,
        removes: b.difference(a)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaOrdering {
    Less,
    Equal,
    Greater,
    Incomparable,
}

impl DeltaOrdering {
    /// True for `Less` and `Equal`.
    pub fn is_le(self) -> bool {
        matches!(self, DeltaOrdering::Less | DeltaOrdering::Equal)
    }

    pub fn is_ge(self) -> bool {
        matches!(self, DeltaOrdering::Greater | DeltaOrdering::Equal)
    }
}

pub fn delta_leq(d1: &BooleanDelta, d2: &BooleanDelta) -> Result<DeltaOrdering> {
    let le = d1.adds.is_subset(&d2.adds)? && d2.removes.is_subset(&d1.removes)?;
    let ge = d2.adds.is_subset(&d1.adds)? && d1.removes.is_subset(&d2.removes)?;
    Ok(match (le, ge) {
        (true, true) => DeltaOrdering::Equal,
        (true, false) => DeltaOrdering::Less,
        (false, true) => DeltaOrdering::Greater,
        (false, false) => DeltaOrdering::Incomparable,
    })
}

/// Least upper bound `(∪ adds, ∩ removes)` of a directed collection.
pub fn delta_sup(ds: &[BooleanDelta]) -> Result<BooleanDelta> {
    let (first, rest) = ds.split_first().ok_or(DeltaError::EmptyCollection)?;
    for (i, a) in ds.iter().enumerate() {
        for b in &ds[i + 1..] {
            let mut bounded = false;
            for c in ds {
                if delta_leq(a, c)?.is_le() && delta_leq(b, c)?.is_le() {
                    bounded = true;
                    break;
                }
            }
            if !bounded {
                return Err(DeltaError::NotDirected {
                    first: Box::new(a.clone()),
                    second: Box::new(b.clone()),
                });
            }
        }
    }
    let mut adds = first.adds.clone();
    let mut removes = first.removes.clone();
    for d in rest {
        adds = adds.union(&d.adds)?;
        removes = removes.intersect(&d.removes)?;
    }
    debug_assert!(adds.is_disjoint(&removes).unwrap_or(false));
    Ok(BooleanDelta { adds, removes })
}

/// Every subset of `universe`, in a fixed order.
pub fn subsets(universe: &Relation) -> Vec<Relation> {
    let tuples: Vec<&Tuple> = universe.tuples().iter().collect();
    assert!(tuples.len() < 20, "powerset enumeration limited to small universes");
    (0u32..1 << tuples.len())
        .map(|mask| {
            Relation::from_tuples(
                universe.schema().clone(),
                tuples
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, t)| (*t).clone()),
            )
            .expect("tuples from the universe")
        })
        .collect()
}

/// Every disjoint `(adds, removes)` pair over `universe` (`3^|U|` of them).
pub fn all_deltas(universe: &Relation) -> Vec<BooleanDelta> {
    let tuples: Vec<&Tuple> = universe.tuples().iter().collect();
    let n = tuples.len();
    assert!(n < 13, "delta enumeration limited to small universes");
    let total = 3usize.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut adds = Vec::new();
            let mut removes = Vec::new();
            for t in &tuples {
                match code % 3 {
                    1 => adds.push((*t).clone()),
                    2 => removes.push((*t).clone()),
                    _ => {}
                }
                code /= 3;
            }
            BooleanDelta {
                adds: Relation::from_tuples(universe.schema().clone(), adds).expect("universe tuples"),
                removes: Relation::from_tuples(universe.schema().clone(), removes)
                    .expect("universe tuples"),
            }
        })
        .collect()
}

/// The add/remove change action on the subsets of `universe`, enumerated.
pub fn twist_action(universe: &Relation) -> ChangeActionSpec<Relation, BooleanDelta> {
    ChangeActionSpec::new(
        subsets(universe),
        all_deltas(universe),
        |a: &Relation, d: &BooleanDelta| apply_delta(a, d).expect("shared schema"),
        |d1: &BooleanDelta, d2: &BooleanDelta| compose_delta(d1, d2).expect("shared schema"),
        BooleanDelta::zero(universe.schema().clone()),
    )
}

/// `⊖⊥` relative to `universe`, packaged for the change-action harness.
pub fn minus_bot_operator(universe: &Relation) -> MinusOperator<Relation, BooleanDelta> {
    let universe = universe.clone();
    MinusOperator::new(
        |b: &Relation, d: &BooleanDelta| apply_delta(b, d).expect("shared schema"),
        move |a: &Relation, b: &Relation| minus_bot(a, b, &universe).expect("subsets of the universe"),
    )
}

pub fn minus_top_operator() -> MinusOperator<Relation, BooleanDelta> {
    MinusOperator::new(
        |b: &Relation, d: &BooleanDelta| apply_delta(b, d).expect("shared schema"),
        |a: &Relation, b: &Relation| minus_top(a, b).expect("shared schema"),
    )
}

impl fmt::Debug for BooleanDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for BooleanDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(+{}, -{})", self.adds, self.removes)
    }
}
