//! Change actions, differential maps, and an exhaustive law checker.
//!
//! A change action is a monoid of changes `(Δ, +, 0)` acting on a base set
//! via `⊕`. A derivative of `f : A → B` is a map `∂f : A × ΔA → ΔB` with
//! `f(a ⊕ δ) = f(a) ⊕ ∂f(a, δ)`. Everything here works on finite, enumerated
//! domains: the checkers quantify over every tuple (or a seeded sample once
//! the count passes the cap) and report each violated law with its witness.

use std::collections::HashMap;
use std::fmt::{self, Debug};
use std::hash::Hash;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::par::{self, ExecMode};

type ApplyFn<A, D> = Arc<dyn Fn(&A, &D) -> A + Send + Sync>;
type CombineFn<D> = Arc<dyn Fn(&D, &D) -> D + Send + Sync>;
type UnaryFn<A, B> = Arc<dyn Fn(&A) -> B + Send + Sync>;
type DerivFn<A, DA, DB> = Arc<dyn Fn(&A, &DA) -> DB + Send + Sync>;
type MinusFn<B, DB> = Arc<dyn Fn(&B, &B) -> DB + Send + Sync>;

/// Bound on the number of tuples a single law is checked on.
pub const DEFAULT_CHECK_CAP: usize = 100_000;

/// Base and change values the harness can enumerate and compare.
pub trait Value: Clone + PartialEq + Debug + Send + Sync + 'static {}
impl<T: Clone + PartialEq + Debug + Send + Sync + 'static> Value for T {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("law `{law}` needs {needed} cases, above the cap of {cap}; supply a sampling seed")]
    DomainTooLarge { law: Law, needed: u128, cap: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct CheckConfig {
    pub cap: usize,
    /// Enables seeded sampling once a law exceeds `cap` cases.
    pub seed: Option<u64>,
    pub mode: ExecMode,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            cap: DEFAULT_CHECK_CAP,
            seed: None,
            mode: ExecMode::default(),
        }
    }
}

impl CheckConfig {
    pub fn with_cap(cap: usize) -> Self {
        CheckConfig {
            cap,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Law {
    MonoidRightIdentity,
    MonoidLeftIdentity,
    MonoidAssociativity,
    ActionIdentity,
    ActionCompatibility,
    DerivativeCondition,
    RegularityZero,
    RegularityAdditivity,
    MinusLaw,
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Law::MonoidRightIdentity => "δ + 0 = δ",
            Law::MonoidLeftIdentity => "0 + δ = δ",
            Law::MonoidAssociativity => "(δ1 + δ2) + δ3 = δ1 + (δ2 + δ3)",
            Law::ActionIdentity => "a ⊕ 0 = a",
            Law::ActionCompatibility => "a ⊕ (δ1 + δ2) = (a ⊕ δ1) ⊕ δ2",
            Law::DerivativeCondition => "f(a ⊕ δ) = f(a) ⊕ ∂f(a, δ)",
            Law::RegularityZero => "∂f(a, 0) = 0",
            Law::RegularityAdditivity => "∂f(a, δ1 + δ2) = ∂f(a, δ1) + ∂f(a ⊕ δ1, δ2)",
            Law::MinusLaw => "b ⊕ (a ⊖ b) = a",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawViolation {
    pub law: Law,
    /// Named witness values, rendered with `Debug`.
    pub witness: Vec<(&'static str, String)>,
}

impl LawViolation {
    fn new(law: Law, witness: Vec<(&'static str, String)>) -> Self {
        LawViolation { law, witness }
    }

    pub fn witness_value(&self, name: &str) -> Option<&str> {
        self.witness
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for LawViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} fails at", self.law)?;
        for (i, (name, value)) in self.witness.iter().enumerate() {
            write!(f, "{} {name}={value}", if i == 0 { "" } else { "," })?;
        }
        Ok(())
    }
}

/// Outcome of a law check. Empty `violations` means every tested case held.
#[derive(Debug, Clone, Default)]
pub struct LawReport {
    pub violations: Vec<LawViolation>,
    pub tested: usize,
    pub exhaustive: bool,
}

impl LawReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, law: Law) -> bool {
        self.violations.iter().any(|v| v.law == law)
    }

    fn absorb(&mut self, other: LawReport) {
        self.violations.extend(other.violations);
        self.tested += other.tested;
        self.exhaustive &= other.exhaustive;
    }
}

/// Checks one law over the index space `dims`, exhaustively under the cap
/// and on `cap` seeded samples above it.
fn check_law<F>(law: Law, dims: &[usize], cfg: &CheckConfig, case: F) -> Result<LawReport, CheckError>
where
    F: Fn(&[usize]) -> Option<Vec<(&'static str, String)>> + Sync + Send,
{
    let total: u128 = dims.iter().map(|&d| d as u128).product();
    let decode = |mut flat: u128| {
        let mut idx = vec![0usize; dims.len()];
        for (slot, &d) in idx.iter_mut().zip(dims).rev() {
            *slot = (flat % d as u128) as usize;
            flat /= d as u128;
        }
        idx
    };
    let run = |flat: u128| case(&decode(flat)).map(|w| LawViolation::new(law, w));
    if total <= cfg.cap as u128 {
        let violations = par::filter_map_range(cfg.mode, total as usize, |i| run(i as u128));
        return Ok(LawReport {
            violations,
            tested: total as usize,
            exhaustive: true,
        });
    }
    let Some(seed) = cfg.seed else {
        return Err(CheckError::DomainTooLarge {
            law,
            needed: total,
            cap: cfg.cap,
        });
    };
    // Derive a per-law stream so every law samples independently.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (law as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let samples: Vec<u128> = (0..cfg.cap).map(|_| rng.gen_range(0..total)).collect();
    let violations = par::filter_map_range(cfg.mode, samples.len(), |i| run(samples[i]));
    Ok(LawReport {
        violations,
        tested: samples.len(),
        exhaustive: false,
    })
}

fn show<T: Debug>(v: &T) -> String {
    format!("{v:?}")
}

/// A change action over enumerated base and change domains.
pub struct ChangeActionSpec<A, D> {
    base_domain: Arc<Vec<A>>,
    change_domain: Arc<Vec<D>>,
    apply: ApplyFn<A, D>,
    combine: CombineFn<D>,
    zero: D,
}

impl<A, D: Clone> Clone for ChangeActionSpec<A, D> {
    fn clone(&self) -> Self {
        ChangeActionSpec {
            base_domain: self.base_domain.clone(),
            change_domain: self.change_domain.clone(),
            apply: self.apply.clone(),
            combine: self.combine.clone(),
            zero: self.zero.clone(),
        }
    }
}

impl<A: Value, D: Value> ChangeActionSpec<A, D> {
    pub fn new(
        base_domain: Vec<A>,
        change_domain: Vec<D>,
        apply: impl Fn(&A, &D) -> A + Send + Sync + 'static,
        combine: impl Fn(&D, &D) -> D + Send + Sync + 'static,
        zero: D,
    ) -> Self {
        ChangeActionSpec {
            base_domain: Arc::new(base_domain),
            change_domain: Arc::new(change_domain),
            apply: Arc::new(apply),
            combine: Arc::new(combine),
            zero,
        }
    }

    pub fn apply(&self, a: &A, d: &D) -> A {
        (self.apply)(a, d)
    }

    pub fn combine(&self, d1: &D, d2: &D) -> D {
        (self.combine)(d1, d2)
    }

    pub fn zero(&self) -> &D {
        &self.zero
    }

    pub fn base_domain(&self) -> &[A] {
        &self.base_domain
    }

    pub fn change_domain(&self) -> &[D] {
        &self.change_domain
    }
}

impl<A: Value> ChangeActionSpec<A, ()> {
    /// The discrete change action: a single (zero) change that does nothing.
    pub fn discrete(base_domain: Vec<A>) -> Self {
        ChangeActionSpec::new(base_domain, vec![()], |a: &A, _: &()| a.clone(), |_: &(), _: &()| (), ())
    }
}

/// Checks the monoid laws on the changes and the action laws on the base.
pub fn verify_change_action<A: Value, D: Value>(
    spec: &ChangeActionSpec<A, D>,
    cfg: &CheckConfig,
) -> Result<LawReport, CheckError> {
    let ds = spec.change_domain();
    let xs = spec.base_domain();
    let zero = spec.zero();
    let mut report = LawReport {
        exhaustive: true,
        ..Default::default()
    };
    report.absorb(check_law(Law::MonoidRightIdentity, &[ds.len()], cfg, |i| {
        let d = &ds[i[0]];
        (spec.combine(d, zero) != *d).then(|| vec![("δ", show(d))])
    })?);
    report.absorb(check_law(Law::MonoidLeftIdentity, &[ds.len()], cfg, |i| {
        let d = &ds[i[0]];
        (spec.combine(zero, d) != *d).then(|| vec![("δ", show(d))])
    })?);
    report.absorb(check_law(
        Law::MonoidAssociativity,
        &[ds.len(), ds.len(), ds.len()],
        cfg,
        |i| {
            let (d1, d2, d3) = (&ds[i[0]], &ds[i[1]], &ds[i[2]]);
            let left = spec.combine(&spec.combine(d1, d2), d3);
            let right = spec.combine(d1, &spec.combine(d2, d3));
            (left != right).then(|| vec![("δ1", show(d1)), ("δ2", show(d2)), ("δ3", show(d3))])
        },
    )?);
    report.absorb(check_law(Law::ActionIdentity, &[xs.len()], cfg, |i| {
        let a = &xs[i[0]];
        (spec.apply(a, zero) != *a).then(|| vec![("a", show(a))])
    })?);
    report.absorb(check_law(
        Law::ActionCompatibility,
        &[xs.len(), ds.len(), ds.len()],
        cfg,
        |i| {
            let (a, d1, d2) = (&xs[i[0]], &ds[i[1]], &ds[i[2]]);
            let joint = spec.apply(a, &spec.combine(d1, d2));
            let stepwise = spec.apply(&spec.apply(a, d1), d2);
            (joint != stepwise).then(|| vec![("a", show(a)), ("δ1", show(d1)), ("δ2", show(d2))])
        },
    )?);
    Ok(report)
}

/// Componentwise product of two change actions.
pub fn product<A1: Value, D1: Value, A2: Value, D2: Value>(
    left: &ChangeActionSpec<A1, D1>,
    right: &ChangeActionSpec<A2, D2>,
) -> ChangeActionSpec<(A1, A2), (D1, D2)> {
    let base = left
        .base_domain()
        .iter()
        .flat_map(|a| right.base_domain().iter().map(move |b| (a.clone(), b.clone())))
        .collect();
    let changes = left
        .change_domain()
        .iter()
        .flat_map(|a| right.change_domain().iter().map(move |b| (a.clone(), b.clone())))
        .collect();
    let (la, ra) = (left.apply.clone(), right.apply.clone());
    let (lc, rc) = (left.combine.clone(), right.combine.clone());
    ChangeActionSpec::new(
        base,
        changes,
        move |(a, b): &(A1, A2), (da, db): &(D1, D2)| (la(a, da), ra(b, db)),
        move |(a1, b1): &(D1, D2), (a2, b2): &(D1, D2)| (lc(a1, a2), rc(b1, b2)),
        (left.zero.clone(), right.zero.clone()),
    )
}

/// A function paired with a candidate derivative.
pub struct DifferentialMap<A, DA, B, DB> {
    underlying: UnaryFn<A, B>,
    derivative: DerivFn<A, DA, DB>,
}

impl<A, DA, B, DB> Clone for DifferentialMap<A, DA, B, DB> {
    fn clone(&self) -> Self {
        DifferentialMap {
            underlying: self.underlying.clone(),
            derivative: self.derivative.clone(),
        }
    }
}

impl<A: Value, DA: Value, B: Value, DB: Value> DifferentialMap<A, DA, B, DB> {
    pub fn new(
        underlying: impl Fn(&A) -> B + Send + Sync + 'static,
        derivative: impl Fn(&A, &DA) -> DB + Send + Sync + 'static,
    ) -> Self {
        DifferentialMap {
            underlying: Arc::new(underlying),
            derivative: Arc::new(derivative),
        }
    }

    /// Builds a map from lookup tables. Missing entries panic when evaluated.
    pub fn from_tables(values: HashMap<A, B>, derivatives: HashMap<(A, DA), DB>) -> Self
    where
        A: Hash + Eq,
        DA: Hash + Eq,
    {
        DifferentialMap::new(
            move |a: &A| values.get(a).cloned().expect("value table covers the domain"),
            move |a: &A, d: &DA| {
                derivatives
                    .get(&(a.clone(), d.clone()))
                    .cloned()
                    .expect("derivative table covers the domain")
            },
        )
    }

    /// Tabulates this map over the enumerated domain of `src`.
    pub fn tabulate(&self, src: &ChangeActionSpec<A, DA>) -> Self
    where
        A: Hash + Eq,
        DA: Hash + Eq,
    {
        let values = src
            .base_domain()
            .iter()
            .map(|a| (a.clone(), self.eval(a)))
            .collect();
        let derivatives = src
            .base_domain()
            .iter()
            .flat_map(|a| src.change_domain().iter().map(move |d| (a, d)))
            .map(|(a, d)| ((a.clone(), d.clone()), self.derive(a, d)))
            .collect();
        DifferentialMap::from_tables(values, derivatives)
    }

    pub fn eval(&self, a: &A) -> B {
        (self.underlying)(a)
    }

    pub fn derive(&self, a: &A, d: &DA) -> DB {
        (self.derivative)(a, d)
    }
}

impl<A: Value, DA: Value> DifferentialMap<A, DA, A, DA> {
    /// The identity with derivative `(a, δ) ↦ δ`.
    pub fn identity() -> Self {
        DifferentialMap::new(|a: &A| a.clone(), |_: &A, d: &DA| d.clone())
    }
}

impl<A: Value, DA: Value, B: Value> DifferentialMap<A, DA, B, ()> {
    /// Any function into a discrete change action, with the zero derivative.
    pub fn into_discrete(f: impl Fn(&A) -> B + Send + Sync + 'static) -> Self {
        DifferentialMap::new(f, |_: &A, _: &DA| ())
    }
}

/// Projection onto the left factor, with derivative `((a, b), (δa, δb)) ↦ δa`.
pub fn project_left<A: Value, DA: Value, B: Value, DB: Value>() -> DifferentialMap<(A, B), (DA, DB), A, DA>
{
    DifferentialMap::new(|(a, _): &(A, B)| a.clone(), |_: &(A, B), (da, _): &(DA, DB)| da.clone())
}

pub fn project_right<A: Value, DA: Value, B: Value, DB: Value>(
) -> DifferentialMap<(A, B), (DA, DB), B, DB> {
    DifferentialMap::new(|(_, b): &(A, B)| b.clone(), |_: &(A, B), (_, db): &(DA, DB)| db.clone())
}

/// Checks the derivative condition and both regularity equations.
pub fn verify_differential<A: Value, DA: Value, B: Value, DB: Value>(
    f: &DifferentialMap<A, DA, B, DB>,
    src: &ChangeActionSpec<A, DA>,
    dst: &ChangeActionSpec<B, DB>,
    cfg: &CheckConfig,
) -> Result<LawReport, CheckError> {
    let mut report = verify_derivative_condition(f, src, dst, cfg)?;
    report.absorb(verify_regularity(f, src, dst, cfg)?);
    Ok(report)
}

pub fn verify_derivative_condition<A: Value, DA: Value, B: Value, DB: Value>(
    f: &DifferentialMap<A, DA, B, DB>,
    src: &ChangeActionSpec<A, DA>,
    dst: &ChangeActionSpec<B, DB>,
    cfg: &CheckConfig,
) -> Result<LawReport, CheckError> {
    let (xs, ds) = (src.base_domain(), src.change_domain());
    check_law(Law::DerivativeCondition, &[xs.len(), ds.len()], cfg, |i| {
        let (a, d) = (&xs[i[0]], &ds[i[1]]);
        let direct = f.eval(&src.apply(a, d));
        let incremental = dst.apply(&f.eval(a), &f.derive(a, d));
        (direct != incremental).then(|| vec![("a", show(a)), ("δ", show(d))])
    })
}

pub fn verify_regularity<A: Value, DA: Value, B: Value, DB: Value>(
    f: &DifferentialMap<A, DA, B, DB>,
    src: &ChangeActionSpec<A, DA>,
    dst: &ChangeActionSpec<B, DB>,
    cfg: &CheckConfig,
) -> Result<LawReport, CheckError> {
    let (xs, ds) = (src.base_domain(), src.change_domain());
    let mut report = check_law(Law::RegularityZero, &[xs.len()], cfg, |i| {
        let a = &xs[i[0]];
        (f.derive(a, src.zero()) != *dst.zero()).then(|| vec![("a", show(a))])
    })?;
    report.absorb(check_law(
        Law::RegularityAdditivity,
        &[xs.len(), ds.len(), ds.len()],
        cfg,
        |i| {
            let (a, d1, d2) = (&xs[i[0]], &ds[i[1]], &ds[i[2]]);
            let joint = f.derive(a, &src.combine(d1, d2));
            let split = dst.combine(&f.derive(a, d1), &f.derive(&src.apply(a, d1), d2));
            (joint != split).then(|| vec![("a", show(a)), ("δ1", show(d1)), ("δ2", show(d2))])
        },
    )?);
    Ok(report)
}

/// `g ∘ f` with derivative `(a, δ) ↦ ∂g(f(a), ∂f(a, δ))`.
pub fn chain<A: Value, DA: Value, B: Value, DB: Value, C: Value, DC: Value>(
    f: &DifferentialMap<A, DA, B, DB>,
    g: &DifferentialMap<B, DB, C, DC>,
) -> DifferentialMap<A, DA, C, DC> {
    let (f1, g1) = (f.clone(), g.clone());
    let (f2, g2) = (f.clone(), g.clone());
    DifferentialMap::new(
        move |a: &A| g1.eval(&f1.eval(a)),
        move |a: &A, d: &DA| g2.derive(&f2.eval(a), &f2.derive(a, d)),
    )
}

/// A change-producing operator with `b ⊕ minus(a, b) = a`.
pub struct MinusOperator<B, DB> {
    apply: ApplyFn<B, DB>,
    minus: MinusFn<B, DB>,
}

impl<B, DB> Clone for MinusOperator<B, DB> {
    fn clone(&self) -> Self {
        MinusOperator {
            apply: self.apply.clone(),
            minus: self.minus.clone(),
        }
    }
}

impl<B: Value, DB: Value> MinusOperator<B, DB> {
    /// `apply` is the action the operator is a minus for.
    pub fn new(
        apply: impl Fn(&B, &DB) -> B + Send + Sync + 'static,
        minus: impl Fn(&B, &B) -> DB + Send + Sync + 'static,
    ) -> Self {
        MinusOperator {
            apply: Arc::new(apply),
            minus: Arc::new(minus),
        }
    }

    /// The change sending `b` to `a`.
    pub fn minus(&self, a: &B, b: &B) -> DB {
        (self.minus)(a, b)
    }

    pub fn apply(&self, b: &B, d: &DB) -> B {
        (self.apply)(b, d)
    }
}

pub fn verify_minus<B: Value, DB: Value>(
    op: &MinusOperator<B, DB>,
    domain: &[B],
    cfg: &CheckConfig,
) -> Result<LawReport, CheckError> {
    check_law(Law::MinusLaw, &[domain.len(), domain.len()], cfg, |i| {
        let (a, b) = (&domain[i[0]], &domain[i[1]]);
        (op.apply(b, &op.minus(a, b)) != *a).then(|| vec![("a", show(a)), ("b", show(b))])
    })
}

/// `∂f(a, δ) = f(a ⊕ δ) ⊖ f(a)`.
///
/// The derivative condition holds by construction. Regularity does not in
/// general and is left to the caller.
pub fn derivative_from_minus<A: Value, DA: Value, B: Value, DB: Value>(
    minus: &MinusOperator<B, DB>,
    f: impl Fn(&A) -> B + Send + Sync + 'static,
    src: &ChangeActionSpec<A, DA>,
) -> DifferentialMap<A, DA, B, DB> {
    let f = Arc::new(f);
    let (f1, f2) = (f.clone(), f);
    let (src, minus) = (src.clone(), minus.clone());
    DifferentialMap::new(
        move |a: &A| f1(a),
        move |a: &A, d: &DA| {
            let (before, after) = (f2(a), f2(&src.apply(a, d)));
            let change = minus.minus(&after, &before);
            debug_assert!(minus.apply(&before, &change) == after, "minus law violated");
            change
        },
    )
}

/// A partial derivative of a binary map in one argument.
pub type PartialDerivative<A, B, D, DC> = Arc<dyn Fn(&(A, B), &D) -> DC + Send + Sync>;

/// The partial derivatives in the first and second argument.
pub type Partials<A, B, DA, DB, DC> = (PartialDerivative<A, B, DA, DC>, PartialDerivative<A, B, DB, DC>);

/// Reassembles a derivative from partials:
/// `∂f((a, b), (δa, δb)) = ∂₁f((a, b), δa) + ∂₂f((a ⊕ δa, b), δb)`.
pub fn combine_partials<A: Value, DA: Value, B: Value, DB: Value, C: Value, DC: Value>(
    f: impl Fn(&(A, B)) -> C + Send + Sync + 'static,
    d1: PartialDerivative<A, B, DA, DC>,
    d2: PartialDerivative<A, B, DB, DC>,
    left: &ChangeActionSpec<A, DA>,
    target: &ChangeActionSpec<C, DC>,
) -> DifferentialMap<(A, B), (DA, DB), C, DC> {
    let (left, target) = (left.clone(), target.clone());
    DifferentialMap::new(f, move |(a, b): &(A, B), (da, db): &(DA, DB)| {
        let moved = (left.apply(a, da), b.clone());
        target.combine(&d1(&(a.clone(), b.clone()), da), &d2(&moved, db))
    })
}

/// The partials induced by a full derivative: `∂f` with the other change zero.
pub fn partials_of<A: Value, DA: Value, B: Value, DB: Value, C: Value, DC: Value>(
    f: &DifferentialMap<(A, B), (DA, DB), C, DC>,
    zero_a: DA,
    zero_b: DB,
) -> Partials<A, B, DA, DB, DC> {
    let (f1, f2) = (f.clone(), f.clone());
    (
        Arc::new(move |ab: &(A, B), da: &DA| f1.derive(ab, &(da.clone(), zero_b.clone()))),
        Arc::new(move |ab: &(A, B), db: &DB| f2.derive(ab, &(zero_a.clone(), db.clone()))),
    )
}

/// Extensional equality of two derivatives over an enumerated source.
pub fn same_derivative<A: Value, DA: Value, B: Value, DB: Value>(
    f: &DifferentialMap<A, DA, B, DB>,
    g: &DifferentialMap<A, DA, B, DB>,
    src: &ChangeActionSpec<A, DA>,
) -> bool {
    src.base_domain().iter().all(|a| {
        f.eval(a) == g.eval(a)
            && src
                .change_domain()
                .iter()
                .all(|d| f.derive(a, d) == g.derive(a, d))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Subsets of {0..n} as bitmasks, with union as both action and monoid.
    fn union_action(n: u32) -> ChangeActionSpec<u32, u32> {
        let all: Vec<u32> = (0..1 << n).collect();
        ChangeActionSpec::new(all.clone(), all, |a: &u32, d: &u32| a | d, |x: &u32, y: &u32| x | y, 0)
    }

    #[test]
    fn discrete_action_is_lawful() {
        let spec = ChangeActionSpec::discrete(vec![1, 2, 3]);
        assert!(verify_change_action(&spec, &CheckConfig::default()).unwrap().is_ok());
    }

    #[test]
    fn union_action_is_lawful() {
        let report = verify_change_action(&union_action(2), &CheckConfig::default()).unwrap();
        assert!(report.is_ok());
        assert!(report.exhaustive);
    }

    #[test]
    fn xor_monoid_does_not_act_by_union() {
        let all: Vec<u32> = (0..4).collect();
        let spec = ChangeActionSpec::new(all.clone(), all, |a: &u32, d: &u32| a | d, |x: &u32, y: &u32| x ^ y, 0);
        let report = verify_change_action(&spec, &CheckConfig::default()).unwrap();
        assert!(report.violates(Law::ActionCompatibility));
        assert!(!report.violates(Law::MonoidAssociativity));
        // a = {1} (bit 0), δ1 = δ2 = {2} (bit 1)
        assert!(report.violations.iter().any(|v| v.law == Law::ActionCompatibility
            && v.witness_value("a") == Some("1")
            && v.witness_value("δ1") == Some("2")
            && v.witness_value("δ2") == Some("2")));
    }

    #[test]
    fn oversized_domains_need_a_seed() {
        let spec = union_action(5); // 32^3 > 10^4
        let cfg = CheckConfig::with_cap(10_000);
        assert!(matches!(
            verify_change_action(&spec, &cfg),
            Err(CheckError::DomainTooLarge { .. })
        ));
        let seeded = CheckConfig {
            seed: Some(7),
            ..cfg
        };
        let report = verify_change_action(&spec, &seeded).unwrap();
        assert!(report.is_ok());
        assert!(!report.exhaustive);
    }

    #[test]
    fn sampling_is_deterministic_for_a_seed() {
        let all: Vec<u32> = (0..32).collect();
        let bad = ChangeActionSpec::new(all.clone(), all, |a: &u32, d: &u32| a | d, |x: &u32, y: &u32| x ^ y, 0);
        let cfg = CheckConfig {
            cap: 500,
            seed: Some(42),
            mode: ExecMode::Parallel,
        };
        let r1 = verify_change_action(&bad, &cfg).unwrap();
        let r2 = verify_change_action(&bad, &CheckConfig { mode: ExecMode::Sequential, ..cfg }).unwrap();
        assert_eq!(r1.violations, r2.violations);
    }

    #[test]
    fn identity_is_differentiable() {
        let spec = union_action(2);
        let id = DifferentialMap::<u32, u32, u32, u32>::identity();
        assert!(verify_differential(&id, &spec, &spec, &CheckConfig::default()).unwrap().is_ok());
    }

    #[test]
    fn maps_into_discrete_targets_need_invariant_values() {
        let spec = union_action(2);
        let target = ChangeActionSpec::discrete(vec![0u32, 1, 2]);
        let constant = DifferentialMap::<u32, u32, u32, ()>::into_discrete(|_: &u32| 1);
        assert!(verify_differential(&constant, &spec, &target, &CheckConfig::default()).unwrap().is_ok());
        let popcount = DifferentialMap::<u32, u32, u32, ()>::into_discrete(|a: &u32| a.count_ones());
        let report = verify_differential(&popcount, &spec, &target, &CheckConfig::default()).unwrap();
        assert!(report.violates(Law::DerivativeCondition));
    }

    #[test]
    fn wrong_derivative_is_reported() {
        let spec = union_action(2);
        let f = DifferentialMap::<u32, u32, u32, u32>::new(|a: &u32| *a, |_: &u32, _: &u32| 0);
        let report = verify_differential(&f, &spec, &spec, &CheckConfig::default()).unwrap();
        assert!(report.violates(Law::DerivativeCondition));
        assert!(!report.violates(Law::RegularityZero));
    }

    #[test]
    fn chain_with_identity_is_neutral() {
        let spec = union_action(2);
        let f = DifferentialMap::<u32, u32, u32, u32>::new(|a: &u32| a | 1, |_: &u32, d: &u32| *d);
        let id = DifferentialMap::identity();
        assert!(same_derivative(&chain(&f, &id), &f, &spec));
        assert!(same_derivative(&chain(&id, &f), &f, &spec));
        assert!(same_derivative(&chain(&id, &id), &id, &spec));
    }

    #[test]
    fn tabulated_maps_behave_like_code() {
        let spec = union_action(2);
        let f = DifferentialMap::<u32, u32, u32, u32>::new(|a: &u32| a | 1, |_: &u32, d: &u32| *d);
        let t = f.tabulate(&spec);
        assert!(same_derivative(&f, &t, &spec));
        assert!(verify_differential(&t, &spec, &spec, &CheckConfig::default()).unwrap().is_ok());
    }

    #[test]
    fn product_of_discrete_is_discrete() {
        let p = product(&ChangeActionSpec::discrete(vec![1, 2]), &ChangeActionSpec::discrete(vec!['a', 'b']));
        assert_eq!(p.change_domain(), &[((), ())]);
        assert_eq!(p.apply(&(1, 'b'), &((), ())), (1, 'b'));
        assert!(verify_change_action(&p, &CheckConfig::default()).unwrap().is_ok());
    }

    #[test]
    fn projections_are_differential_maps() {
        let (l, r) = (union_action(1), union_action(2));
        let p = product(&l, &r);
        let cfg = CheckConfig::default();
        assert!(verify_differential(&project_left(), &p, &l, &cfg).unwrap().is_ok());
        assert!(verify_differential(&project_right(), &p, &r, &cfg).unwrap().is_ok());
    }

    #[test]
    fn constant_map_minus_derivative_fixes_the_constant() {
        let spec = union_action(2);
        // a minus for the union action on a chain-free domain: (a, b) ↦ a
        let op = MinusOperator::new(|b: &u32, d: &u32| b | d, |a: &u32, _: &u32| *a);
        let f = derivative_from_minus(&op, |_: &u32| 3u32, &spec);
        for a in spec.base_domain() {
            for d in spec.change_domain() {
                assert_eq!(f.derive(a, d), op.minus(&3, &3));
                assert_eq!(op.apply(&3, &f.derive(a, d)), 3);
            }
        }
    }

    #[test]
    fn zero_partials_combine_to_zero() {
        let spec = union_action(1);
        let p = product(&spec, &spec);
        let d1: PartialDerivative<u32, u32, u32, u32> = Arc::new(|_, _| 0);
        let d2: PartialDerivative<u32, u32, u32, u32> = Arc::new(|_, _| 0);
        let f = combine_partials(|_: &(u32, u32)| 0u32, d1, d2, &spec, &spec);
        for ab in p.base_domain() {
            for d in p.change_domain() {
                assert_eq!(f.derive(ab, d), 0);
            }
        }
    }
}
