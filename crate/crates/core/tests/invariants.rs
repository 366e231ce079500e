use std::collections::BTreeMap;

use deltalog_core::delta::{
    apply_delta, compose_delta, delta_leq, minus_bot, minus_exact, minus_top, BooleanDelta,
};
use deltalog_core::engine::{
    interpretations_equal, is_fixed_point, maintain, solve, EngineKind, EvDerivative, MaintenanceStrategy,
    SolverConfig,
};
use deltalog_core::frontend::{parse_delta, parse_facts, render_deltas, render_facts, Program};
use deltalog_core::gen::{
    corpus_program, int_constants, random_change, random_interpretation, random_program, random_relation,
    ProgramShape,
};
use deltalog_core::par::ExecMode;
use deltalog_core::relation::{ActiveDomain, Const, Name, Relation, Schema};
use deltalog_core::semantics::Interpretation;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Subsets of {0..5} as masks.
fn set(mask: u8) -> Relation {
    Relation::from_rows(
        Schema::positional("a", 1),
        (0..6).filter(|i| mask & (1 << i) != 0).map(|i| [Const::Int(i)]),
    )
    .unwrap()
}

fn change(adds: u8, removes: u8) -> BooleanDelta {
    BooleanDelta::new(set(adds & !removes), set(removes)).unwrap()
}

fn arb_change() -> impl Strategy<Value = BooleanDelta> {
    (0u8..64, 0u8..64).prop_map(|(a, r)| change(a, r))
}

fn random_edb<R: Rng>(rng: &mut R, p: &Program, dom: &ActiveDomain) -> Interpretation {
    let density = rng.gen_range(0.1..0.6);
    random_interpretation(rng, p.edb(), dom, density)
}

/// A corpus program or a generated one, picked by seed.
fn some_program(rng: &mut ChaCha8Rng) -> Program {
    match rng.gen_range(0..4) {
        0 => corpus_program("tc").unwrap(),
        1 => corpus_program("treeP").unwrap(),
        2 => corpus_program("reach_filtered").unwrap(),
        _ => random_program(rng, ProgramShape::default()),
    }
}

fn apply_all(env: &Interpretation, deltas: &BTreeMap<Name, BooleanDelta>) -> Interpretation {
    let mut out = env.clone();
    for (pred, d) in deltas {
        let base = env.get(pred).cloned().unwrap_or_else(|| Relation::empty(d.schema().clone()));
        out.insert(pred.clone(), apply_delta(&base, d).unwrap()).unwrap();
    }
    out
}

proptest! {
    #[test]
    fn composition_is_associative(a in arb_change(), b in arb_change(), c in arb_change()) {
        let left = compose_delta(&compose_delta(&a, &b).unwrap(), &c).unwrap();
        let right = compose_delta(&a, &compose_delta(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn composition_acts_stepwise(x in 0u8..64, a in arb_change(), b in arb_change()) {
        let x = set(x);
        let joint = apply_delta(&x, &compose_delta(&a, &b).unwrap()).unwrap();
        let stepwise = apply_delta(&apply_delta(&x, &a).unwrap(), &b).unwrap();
        prop_assert_eq!(joint, stepwise);
    }

    #[test]
    fn minus_operators_bracket_every_change(a in 0u8..64, b in 0u8..64, d in arb_change()) {
        let (a, b) = (set(a), set(b));
        let u = set(63);
        let lo = minus_bot(&a, &b, &u).unwrap();
        let hi = minus_top(&a, &b).unwrap();
        let exact = minus_exact(&a, &b).unwrap();
        for m in [&lo, &hi, &exact] {
            prop_assert_eq!(apply_delta(&b, m).unwrap(), a.clone());
        }
        prop_assert!(delta_leq(&lo, &exact).unwrap().is_le());
        prop_assert!(delta_leq(&exact, &hi).unwrap().is_le());
        if apply_delta(&b, &d).unwrap() == a {
            prop_assert!(delta_leq(&lo, &d).unwrap().is_le());
            prop_assert!(delta_leq(&d, &hi).unwrap().is_le());
        }
    }

    #[test]
    fn effective_change_has_the_same_effect(x in 0u8..64, d in arb_change()) {
        let x = set(x);
        let e = d.effective_on(&x).unwrap();
        prop_assert_eq!(apply_delta(&x, &e).unwrap(), apply_delta(&x, &d).unwrap());
        prop_assert!(e.adds().is_disjoint(&x).unwrap());
        prop_assert!(e.removes().is_subset(&x).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn facts_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dom = ActiveDomain::new(int_constants(4));
        dom.extend([Const::sym("a"), Const::sym("b_c")]);
        let arities: BTreeMap<Name, usize> = [("e".into(), 2), ("v".into(), 1), ("w".into(), 3)].into();
        let facts = random_interpretation(&mut rng, &arities, &dom, 0.3);
        let back = parse_facts(&render_facts(&facts)).unwrap();
        for (pred, rel) in facts.relations() {
            match back.get(pred) {
                Some(r) => prop_assert_eq!(r, rel),
                None => prop_assert!(rel.is_empty()),
            }
        }
        let deltas: BTreeMap<Name, BooleanDelta> = arities
            .iter()
            .map(|(p, &n)| (p.clone(), random_change(&mut rng, Schema::positional(p, n), &dom, 0.2)))
            .collect();
        let back = parse_delta(&render_deltas(&deltas)).unwrap();
        for (pred, d) in &deltas {
            match back.get(pred) {
                Some(b) => prop_assert_eq!(b, d),
                None => prop_assert!(d.is_zero()),
            }
        }
    }

    #[test]
    fn engines_agree_and_reach_a_fixed_point(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = some_program(&mut rng);
        let dom = ActiveDomain::new(int_constants(rng.gen_range(1..=5)));
        let edb = random_edb(&mut rng, &p, &dom);
        let semi = solve(&p, &edb, &SolverConfig { validate: true, ..SolverConfig::default() }).unwrap();
        let naive = solve(&p, &edb, &SolverConfig { engine: EngineKind::Naive, ..SolverConfig::default() }).unwrap();
        prop_assert!(interpretations_equal(&semi.idb, &naive.idb).is_ok());
        prop_assert!(is_fixed_point(&p, &edb, &semi.idb, &SolverConfig::default()).unwrap());
    }

    #[test]
    fn execution_modes_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = some_program(&mut rng);
        let dom = ActiveDomain::new(int_constants(4));
        let edb = random_edb(&mut rng, &p, &dom);
        let run = |mode| solve(&p, &edb, &SolverConfig { mode, ..SolverConfig::default() }).unwrap();
        prop_assert_eq!(run(ExecMode::Sequential).idb, run(ExecMode::Parallel).idb);
    }

    #[test]
    fn maintenance_matches_recomputation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = some_program(&mut rng);
        let dom = ActiveDomain::new(int_constants(rng.gen_range(2..=4)));
        let edb = random_edb(&mut rng, &p, &dom);
        let delta: BTreeMap<Name, BooleanDelta> = p
            .edb()
            .iter()
            .map(|(pred, &n)| (pred.clone(), random_change(&mut rng, Schema::positional(pred, n), &dom, 0.15)))
            .collect();
        let base = SolverConfig::default();
        let old = solve(&p, &edb, &base).unwrap();
        let fresh = solve(&p, &apply_all(&edb, &delta), &base).unwrap();
        let configs = [
            SolverConfig { maintenance: MaintenanceStrategy::Trivial, ..base.clone() },
            SolverConfig { validate: true, ..base.clone() },
            SolverConfig { validate: true, ev_derivative: EvDerivative::Ev2, ..base.clone() },
        ];
        for cfg in configs {
            let m = maintain(&p, &old, &edb, &delta, &cfg).unwrap();
            prop_assert!(interpretations_equal(&apply_all(&old.idb, &m.deltas), &fresh.idb).is_ok());
            prop_assert!(interpretations_equal(&m.updated, &fresh.idb).is_ok());
        }
    }

    #[test]
    fn zero_change_maintains_to_zero(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = some_program(&mut rng);
        let dom = ActiveDomain::new(int_constants(3));
        let edb = random_edb(&mut rng, &p, &dom);
        let old = solve(&p, &edb, &SolverConfig::default()).unwrap();
        let m = maintain(&p, &old, &edb, &BTreeMap::new(), &SolverConfig::default()).unwrap();
        prop_assert!(!m.fell_back);
        prop_assert!(m.deltas.values().all(|d| d.is_zero()));
    }

    #[test]
    fn random_relations_stay_in_the_domain(seed in any::<u64>(), k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dom = ActiveDomain::new(int_constants(k));
        let r = random_relation(&mut rng, Schema::positional("r", 2), &dom, 0.5);
        prop_assert!(r.check_in_domain(&dom).is_ok());
        prop_assert!(r.len() <= k * k);
    }
}
