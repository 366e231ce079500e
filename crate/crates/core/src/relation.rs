//! Finite relations over named schemata.
//!
//! A [`Relation`] is a set of tuples whose columns are named by a [`Schema`].
//! Columns are stored in the schema's canonical (sorted) order so that the
//! Boolean operations are plain set operations; the order the names were
//! written in is kept for display.
//!
//! Complements and cylindrifications are taken against an [`ActiveDomain`]:
//! the universal relation over a schema `Γ` is `dom^|Γ|`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Attribute and predicate names.
pub type Name = Arc<str>;

/// Default bound on the number of tuples any single materialized relation
/// may hold.
pub const DEFAULT_MAX_RELATION_SIZE: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelationError {
    #[error("schema mismatch: {left} vs {right}")]
    SchemaMismatch { left: Schema, right: Schema },
    #[error("attributes {missing:?} are not part of schema {schema}")]
    NotSubset { missing: Vec<Name>, schema: Schema },
    #[error("duplicate attribute `{0}` in schema")]
    DuplicateAttribute(Name),
    #[error("renaming is not a bijection on {schema}: {reason}")]
    NotBijective { schema: Schema, reason: String },
    #[error("constant `{0}` is outside the active domain")]
    OutOfDomain(Const),
    #[error("relation over {schema} would hold {size} tuples, above the cap of {cap}; use a smaller domain")]
    TooLarge { schema: Schema, size: u128, cap: usize },
    #[error("row has {got} values but schema {schema} has {expected} attributes")]
    Arity {
        schema: Schema,
        expected: usize,
        got: usize,
    },
}

pub type Result<T, E = RelationError> = std::result::Result<T, E>;

/// An interned, untyped constant. Integers sort before symbols.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Const {
    Int(i64),
    Sym(Name),
}

impl Const {
    pub fn sym(s: &str) -> Self {
        Const::Sym(Arc::from(s))
    }
}

impl From<i64> for Const {
    fn from(v: i64) -> Self {
        Const::Int(v)
    }
}

impl From<&str> for Const {
    fn from(v: &str) -> Self {
        Const::sym(v)
    }
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Int(v) => write!(f, "{v}"),
            Const::Sym(s) => f.write_str(s),
        }
    }
}

/// A duplicate-free set of attribute names.
///
/// Equality and hashing only look at the set of names; the display order is
/// carried along for rendering.
#[derive(Clone)]
pub struct Schema {
    sorted: Arc<[Name]>,
    display: Arc<[Name]>,
}

impl Schema {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<Name>,
    {
        let display: Vec<Name> = names.into_iter().map(Into::into).collect();
        let mut sorted = display.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(RelationError::DuplicateAttribute(w[0].clone()));
        }
        Ok(Schema {
            sorted: sorted.into(),
            display: display.into(),
        })
    }

    pub fn empty() -> Self {
        Schema {
            sorted: Arc::from(Vec::new()),
            display: Arc::from(Vec::new()),
        }
    }

    /// The canonical parameter schema of a predicate: `pred$0 .. pred$(n-1)`.
    pub fn positional(pred: &str, arity: usize) -> Self {
        Schema::new((0..arity).map(|i| positional_name(pred, i)))
            .expect("positional names are distinct")
    }

    /// Attribute names in canonical order; tuples are laid out in this order.
    pub fn attrs(&self) -> &[Name] {
        &self.sorted
    }

    /// Attribute names in the order they were declared.
    pub fn display_attrs(&self) -> &[Name] {
        &self.display
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.sorted.binary_search_by(|n| (**n).cmp(name)).ok()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub fn is_subset(&self, other: &Schema) -> bool {
        self.sorted.iter().all(|n| other.contains(n))
    }

    /// Names of `self` missing from `other`.
    pub fn missing_from(&self, other: &Schema) -> Vec<Name> {
        self.sorted
            .iter()
            .filter(|n| !other.contains(n))
            .cloned()
            .collect()
    }

    pub fn union(&self, other: &Schema) -> Schema {
        let mut display: Vec<Name> = self.display.to_vec();
        display.extend(other.display.iter().filter(|n| !self.contains(n)).cloned());
        Schema::new(display).expect("union of duplicate-free schemata")
    }

    pub fn with(&self, name: &str) -> Schema {
        if self.contains(name) {
            return self.clone();
        }
        let mut display = self.display.to_vec();
        display.push(Arc::from(name));
        Schema::new(display).expect("fresh attribute")
    }

    pub fn without(&self, name: &str) -> Schema {
        Schema::new(self.display.iter().filter(|n| &***n != name).cloned())
            .expect("subset of a duplicate-free schema")
    }
}

pub fn positional_name(pred: &str, i: usize) -> Name {
    Arc::from(format!("{pred}${i}"))
}

impl PartialEq for Schema {
    fn eq(&self, other: &Self) -> bool {
        self.sorted == other.sorted
    }
}

impl Eq for Schema {}

impl std::hash::Hash for Schema {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.sorted.hash(state)
    }
}

impl fmt::Debug for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, n) in self.display.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(n)?;
        }
        f.write_str("}")
    }
}

/// A tuple laid out in its schema's canonical order.
pub type Tuple = Vec<Const>;

/// A single tuple viewed as an assignment of constants to attribute names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct NamedTuple {
    pub bindings: BTreeMap<Name, Const>,
}

impl NamedTuple {
    pub fn get(&self, name: &str) -> Option<&Const> {
        self.bindings.get(name)
    }
}

impl fmt::Display for NamedTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, (k, v)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}\u{21a6}{v}")?;
        }
        f.write_str(")")
    }
}

/// The finite set of constants that realizes the universal relation.
#[derive(Debug, Clone)]
pub struct ActiveDomain {
    constants: BTreeSet<Const>,
    max_relation_size: usize,
}

impl ActiveDomain {
    pub fn new<I: IntoIterator<Item = Const>>(constants: I) -> Self {
        ActiveDomain {
            constants: constants.into_iter().collect(),
            max_relation_size: DEFAULT_MAX_RELATION_SIZE,
        }
    }

    pub fn with_max_relation_size(mut self, cap: usize) -> Self {
        self.max_relation_size = cap;
        self
    }

    pub fn max_relation_size(&self) -> usize {
        self.max_relation_size
    }

    pub fn constants(&self) -> &BTreeSet<Const> {
        &self.constants
    }

    pub fn len(&self) -> usize {
        self.constants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constants.is_empty()
    }

    pub fn contains(&self, c: &Const) -> bool {
        self.constants.contains(c)
    }

    /// Adds constants. The domain only ever grows.
    pub fn extend<I: IntoIterator<Item = Const>>(&mut self, more: I) {
        self.constants.extend(more);
    }

    /// Errors if a relation over `schema` with `extra` unconstrained columns
    /// per base tuple could exceed the cap.
    fn check_size(&self, schema: &Schema, base: usize, extra: usize) -> Result<()> {
        let size = (base as u128).saturating_mul((self.len() as u128).saturating_pow(extra as u32));
        if size > self.max_relation_size as u128 {
            return Err(RelationError::TooLarge {
                schema: schema.clone(),
                size,
                cap: self.max_relation_size,
            });
        }
        Ok(())
    }
}

impl PartialEq for ActiveDomain {
    fn eq(&self, other: &Self) -> bool {
        self.constants == other.constants
    }
}

impl Eq for ActiveDomain {}

/// A finite set of tuples over a schema.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    schema: Schema,
    tuples: BTreeSet<Tuple>,
}

impl Relation {
    pub fn empty(schema: Schema) -> Self {
        Relation {
            schema,
            tuples: BTreeSet::new(),
        }
    }

    /// Builds a relation from rows given in the schema's display order.
    pub fn from_rows<I, R>(schema: Schema, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = Const>,
    {
        let mut rel = Relation::empty(schema);
        for row in rows {
            rel.insert_row(row.into_iter().collect())?;
        }
        Ok(rel)
    }

    /// Builds a relation from tuples already laid out in canonical order.
    pub fn from_tuples<I: IntoIterator<Item = Tuple>>(schema: Schema, tuples: I) -> Result<Self> {
        let tuples: BTreeSet<Tuple> = tuples.into_iter().collect();
        if let Some(t) = tuples.iter().find(|t| t.len() != schema.len()) {
            return Err(RelationError::Arity {
                expected: schema.len(),
                got: t.len(),
                schema,
            });
        }
        Ok(Relation { schema, tuples })
    }

    /// Inserts a row given in display order. Returns whether it was new.
    pub fn insert_row(&mut self, row: Vec<Const>) -> Result<bool> {
        if row.len() != self.schema.len() {
            return Err(RelationError::Arity {
                schema: self.schema.clone(),
                expected: self.schema.len(),
                got: row.len(),
            });
        }
        let mut tuple = row.clone();
        for (name, value) in self.schema.display.iter().zip(row) {
            let idx = self.schema.index_of(name).expect("display name in schema");
            tuple[idx] = value;
        }
        Ok(self.tuples.insert(tuple))
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &BTreeSet<Tuple> {
        &self.tuples
    }

    pub fn contains(&self, tuple: &[Const]) -> bool {
        self.tuples.contains(tuple)
    }

    /// Rows in display order, sorted lexicographically.
    pub fn rows(&self) -> Vec<Vec<Const>> {
        let perm: Vec<usize> = self
            .schema
            .display
            .iter()
            .map(|n| self.schema.index_of(n).expect("display name in schema"))
            .collect();
        let mut rows: Vec<Vec<Const>> = self
            .tuples
            .iter()
            .map(|t| perm.iter().map(|&i| t[i].clone()).collect())
            .collect();
        rows.sort();
        rows
    }

    pub fn named_tuples(&self) -> impl Iterator<Item = NamedTuple> + '_ {
        self.tuples.iter().map(move |t| NamedTuple {
            bindings: self.schema.sorted.iter().cloned().zip(t.iter().cloned()).collect(),
        })
    }

    pub fn constants(&self) -> BTreeSet<Const> {
        self.tuples.iter().flatten().cloned().collect()
    }

    fn same_schema(&self, other: &Relation) -> Result<()> {
        if self.schema != other.schema {
            return Err(RelationError::SchemaMismatch {
                left: self.schema.clone(),
                right: other.schema.clone(),
            });
        }
        Ok(())
    }

    pub fn union(&self, other: &Relation) -> Result<Relation> {
        self.same_schema(other)?;
        let (big, small) = if self.len() >= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut tuples = big.tuples.clone();
        tuples.extend(small.tuples.iter().cloned());
        Ok(Relation {
            schema: self.schema.clone(),
            tuples,
        })
    }

    pub fn intersect(&self, other: &Relation) -> Result<Relation> {
        self.same_schema(other)?;
        let (small, big) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        Ok(Relation {
            schema: self.schema.clone(),
            tuples: small
                .tuples
                .iter()
                .filter(|t| big.tuples.contains(*t))
                .cloned()
                .collect(),
        })
    }

    pub fn difference(&self, other: &Relation) -> Result<Relation> {
        self.same_schema(other)?;
        Ok(Relation {
            schema: self.schema.clone(),
            tuples: self
                .tuples
                .iter()
                .filter(|t| !other.tuples.contains(*t))
                .cloned()
                .collect(),
        })
    }

    pub fn is_subset(&self, other: &Relation) -> Result<bool> {
        self.same_schema(other)?;
        Ok(self.tuples.is_subset(&other.tuples))
    }

    pub fn is_disjoint(&self, other: &Relation) -> Result<bool> {
        self.same_schema(other)?;
        Ok(self.tuples.is_disjoint(&other.tuples))
    }

    /// Keeps the tuples satisfying `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&[Const]) -> bool) -> Relation {
        Relation {
            schema: self.schema.clone(),
            tuples: self.tuples.iter().filter(|t| keep(t)).cloned().collect(),
        }
    }

    /// Restricts every tuple to the `target` attributes, collapsing duplicates.
    pub fn select_to(&self, target: &Schema) -> Result<Relation> {
        let missing = target.missing_from(&self.schema);
        if !missing.is_empty() {
            return Err(RelationError::NotSubset {
                missing,
                schema: self.schema.clone(),
            });
        }
        if *target == self.schema {
            return Ok(Relation {
                schema: target.clone(),
                tuples: self.tuples.clone(),
            });
        }
        let idx: Vec<usize> = target
            .attrs()
            .iter()
            .map(|n| self.schema.index_of(n).expect("checked subset"))
            .collect();
        Ok(Relation {
            schema: target.clone(),
            tuples: self
                .tuples
                .iter()
                .map(|t| idx.iter().map(|&i| t[i].clone()).collect())
                .collect(),
        })
    }

    /// Re-keys the relation along a bijection from its attribute names.
    pub fn rename(&self, mapping: &BTreeMap<Name, Name>) -> Result<Relation> {
        let not_bijective = |reason: String| RelationError::NotBijective {
            schema: self.schema.clone(),
            reason,
        };
        if mapping.len() != self.schema.len() || !self.schema.attrs().iter().all(|n| mapping.contains_key(n)) {
            return Err(not_bijective("mapping domain differs from the schema".into()));
        }
        let new_display: Vec<Name> = self
            .schema
            .display
            .iter()
            .map(|n| mapping[n].clone())
            .collect();
        let target = Schema::new(new_display)
            .map_err(|_| not_bijective("two attributes map to the same name".into()))?;
        // position in the new layout of each old column
        let idx: Vec<usize> = self
            .schema
            .attrs()
            .iter()
            .map(|n| target.index_of(&mapping[n]).expect("image in target"))
            .collect();
        let tuples = self
            .tuples
            .iter()
            .map(|t| {
                let mut out = t.clone();
                for (old, &new) in idx.iter().enumerate() {
                    out[new] = t[old].clone();
                }
                out
            })
            .collect();
        Ok(Relation {
            schema: target,
            tuples,
        })
    }

    /// Cylindrification: every tuple extended in all possible ways with
    /// domain constants on the attributes of `target` not in the schema.
    pub fn extend_to(&self, target: &Schema, dom: &ActiveDomain) -> Result<Relation> {
        let missing = self.schema.missing_from(target);
        if !missing.is_empty() {
            return Err(RelationError::NotSubset {
                missing,
                schema: target.clone(),
            });
        }
        if *target == self.schema {
            return Ok(Relation {
                schema: target.clone(),
                tuples: self.tuples.clone(),
            });
        }
        if self.is_empty() {
            return Ok(Relation::empty(target.clone()));
        }
        let extra = target.len() - self.schema.len();
        dom.check_size(target, self.len(), extra)?;
        // for each target column, either the source column it copies or None
        let source: Vec<Option<usize>> = target
            .attrs()
            .iter()
            .map(|n| self.schema.index_of(n))
            .collect();
        let free: Vec<usize> = source
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.is_none().then_some(i))
            .collect();
        let consts: Vec<&Const> = dom.constants.iter().collect();
        let mut tuples = BTreeSet::new();
        let mut counters = vec![0usize; free.len()];
        for t in &self.tuples {
            let mut out: Tuple = source
                .iter()
                .map(|s| match s {
                    Some(i) => t[*i].clone(),
                    None => Const::Int(0),
                })
                .collect();
            if consts.is_empty() {
                break;
            }
            counters.iter_mut().for_each(|c| *c = 0);
            loop {
                for (k, &pos) in free.iter().enumerate() {
                    out[pos] = consts[counters[k]].clone();
                }
                tuples.insert(out.clone());
                if !advance(&mut counters, consts.len()) {
                    break;
                }
            }
        }
        Ok(Relation {
            schema: target.clone(),
            tuples,
        })
    }

    /// `universe(schema, dom) \ self`.
    pub fn complement(&self, dom: &ActiveDomain) -> Result<Relation> {
        self.check_in_domain(dom)?;
        Ok(universe(&self.schema, dom)?
            .difference(self)
            .expect("same schema"))
    }

    /// Errors with the first constant that lies outside `dom`.
    pub fn check_in_domain(&self, dom: &ActiveDomain) -> Result<()> {
        match self.tuples.iter().flatten().find(|c| !dom.contains(c)) {
            Some(c) => Err(RelationError::OutOfDomain(c.clone())),
            None => Ok(()),
        }
    }
}

/// Odometer increment; false once every combination has been produced.
fn advance(counters: &mut [usize], base: usize) -> bool {
    for c in counters.iter_mut().rev() {
        *c += 1;
        if *c < base {
            return true;
        }
        *c = 0;
    }
    false
}

/// All `|dom|^|schema|` tuples over `schema`.
pub fn universe(schema: &Schema, dom: &ActiveDomain) -> Result<Relation> {
    let unit = Relation::from_tuples(Schema::empty(), [Vec::new()])?;
    dom.check_size(schema, 1, schema.len())?;
    unit.extend_to(schema, dom)
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{", self.schema)?;
        for (i, row) in self.rows().iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str("(")?;
            for (j, c) in row.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(names: &[&str]) -> Schema {
        Schema::new(names.iter().copied()).unwrap()
    }

    fn rel(names: &[&str], rows: &[&[i64]]) -> Relation {
        Relation::from_rows(
            schema(names),
            rows.iter().map(|r| r.iter().map(|&v| Const::Int(v))),
        )
        .unwrap()
    }

    fn dom(values: &[i64]) -> ActiveDomain {
        ActiveDomain::new(values.iter().map(|&v| Const::Int(v)))
    }

    #[test]
    fn schema_rejects_duplicates() {
        assert!(matches!(
            Schema::new(["x", "y", "x"]),
            Err(RelationError::DuplicateAttribute(_))
        ));
    }

    #[test]
    fn schema_equality_ignores_order() {
        assert_eq!(schema(&["y", "x"]), schema(&["x", "y"]));
        assert_eq!(schema(&["y", "x"]).display_attrs()[0].as_ref(), "y");
    }

    #[test]
    fn rows_follow_display_order() {
        let r = rel(&["y", "x"], &[&[1, 2]]);
        assert_eq!(r.rows(), vec![vec![Const::Int(1), Const::Int(2)]]);
        // canonical layout is (x, y)
        assert!(r.contains(&[Const::Int(2), Const::Int(1)]));
    }

    #[test]
    fn select_to_projects_a_singleton() {
        let r = rel(&["x", "y"], &[&[1, 2]]);
        assert_eq!(r.select_to(&schema(&["x"])).unwrap(), rel(&["x"], &[&[1]]));
    }

    #[test]
    fn select_to_same_schema_is_identity() {
        let r = rel(&["x", "y"], &[&[1, 2], &[3, 4]]);
        assert_eq!(r.select_to(&schema(&["y", "x"])).unwrap(), r);
    }

    #[test]
    fn select_to_collapses_duplicates() {
        let r = rel(&["x", "y"], &[&[1, 2], &[1, 3]]);
        let s = r.select_to(&schema(&["x"])).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s, rel(&["x"], &[&[1]]));
    }

    #[test]
    fn select_to_rejects_foreign_attributes() {
        let r = rel(&["x"], &[&[1]]);
        let err = r.select_to(&schema(&["x", "z"])).unwrap_err();
        assert!(matches!(err, RelationError::NotSubset { ref missing, .. } if missing[0].as_ref() == "z"));
    }

    fn mapping(pairs: &[(&str, &str)]) -> BTreeMap<Name, Name> {
        pairs
            .iter()
            .map(|(a, b)| (Arc::from(*a), Arc::from(*b)))
            .collect()
    }

    #[test]
    fn rename_rekeys() {
        let r = rel(&["a"], &[&[1]]);
        assert_eq!(r.rename(&mapping(&[("a", "x")])).unwrap(), rel(&["x"], &[&[1]]));
    }

    #[test]
    fn rename_identity_and_round_trip() {
        let r = rel(&["a", "b"], &[&[1, 2], &[2, 5]]);
        assert_eq!(r.rename(&mapping(&[("a", "a"), ("b", "b")])).unwrap(), r);
        let swapped = r.rename(&mapping(&[("a", "b"), ("b", "a")])).unwrap();
        assert_eq!(swapped.len(), r.len());
        assert!(swapped.contains(&[Const::Int(2), Const::Int(1)]));
        assert_eq!(swapped.rename(&mapping(&[("a", "b"), ("b", "a")])).unwrap(), r);
    }

    #[test]
    fn rename_rejects_non_bijections() {
        let r = rel(&["a", "b"], &[&[1, 2]]);
        assert!(r.rename(&mapping(&[("a", "x"), ("b", "x")])).is_err());
        assert!(r.rename(&mapping(&[("a", "x")])).is_err());
    }

    #[test]
    fn extend_to_enumerates_extensions() {
        let r = rel(&["x"], &[&[1]]);
        let e = r.extend_to(&schema(&["x", "y"]), &dom(&[1, 2])).unwrap();
        assert_eq!(e, rel(&["x", "y"], &[&[1, 1], &[1, 2]]));
    }

    #[test]
    fn extend_to_trivial_cases() {
        let r = rel(&["x"], &[&[1]]);
        assert_eq!(r.extend_to(&schema(&["x"]), &dom(&[1, 2])).unwrap(), r);
        let empty = Relation::empty(schema(&["x"]));
        assert!(empty
            .extend_to(&schema(&["x", "y", "z"]), &dom(&[1, 2]))
            .unwrap()
            .is_empty());
        assert!(r.extend_to(&schema(&["y"]), &dom(&[1])).is_err());
    }

    #[test]
    fn complement_of_empty_is_universe() {
        let c = Relation::empty(schema(&["x"])).complement(&dom(&[1, 2])).unwrap();
        assert_eq!(c, rel(&["x"], &[&[1], &[2]]));
    }

    #[test]
    fn complement_pairs() {
        let r = rel(&["x", "y"], &[&[1, 1]]);
        let c = r.complement(&dom(&[1, 2])).unwrap();
        assert_eq!(c, rel(&["x", "y"], &[&[1, 2], &[2, 1], &[2, 2]]));
        assert_eq!(c.complement(&dom(&[1, 2])).unwrap(), r);
    }

    #[test]
    fn complement_rejects_out_of_domain() {
        let r = rel(&["x"], &[&[7]]);
        assert_eq!(
            r.complement(&dom(&[1, 2])).unwrap_err(),
            RelationError::OutOfDomain(Const::Int(7))
        );
    }

    #[test]
    fn set_operations() {
        let a = rel(&["x"], &[&[1], &[2]]);
        let b = rel(&["x"], &[&[2], &[3]]);
        assert_eq!(a.intersect(&b).unwrap(), rel(&["x"], &[&[2]]));
        assert_eq!(a.union(&b).unwrap(), rel(&["x"], &[&[1], &[2], &[3]]));
        assert_eq!(a.difference(&b).unwrap(), rel(&["x"], &[&[1]]));
        let empty = Relation::empty(schema(&["x"]));
        assert_eq!(a.union(&empty).unwrap(), a);
        let u = universe(&schema(&["x"]), &dom(&[1, 2, 3])).unwrap();
        assert_eq!(a.intersect(&u).unwrap(), a);
        assert!(matches!(
            a.union(&rel(&["y"], &[])),
            Err(RelationError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn universe_sizes() {
        assert_eq!(universe(&schema(&["x"]), &dom(&[1, 2])).unwrap().len(), 2);
        let unit = universe(&Schema::empty(), &dom(&[])).unwrap();
        assert_eq!(unit.len(), 1);
        assert_eq!(universe(&schema(&["x", "y"]), &dom(&[1, 2, 3])).unwrap().len(), 9);
    }

    #[test]
    fn universe_respects_the_cap() {
        let d = dom(&[1, 2, 3]).with_max_relation_size(8);
        assert!(matches!(
            universe(&schema(&["x", "y"]), &d),
            Err(RelationError::TooLarge { size: 9, cap: 8, .. })
        ));
    }
}
