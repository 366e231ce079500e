//! Seeded random formulas, programs, and instances, plus a small corpus of
//! hand-written programs.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::delta::BooleanDelta;
use crate::formula::{Formula, Term};
use crate::frontend::Program;
use crate::relation::{universe, ActiveDomain, Const, Name, Relation, Schema};
use crate::semantics::Interpretation;

/// Named programs used by tests and benches.
pub const CORPUS: &[(&str, &str)] = &[
    ("tc", "tc(X,Y) :- e(X,Y).\ntc(X,Y) :- e(X,Z), tc(Z,Y).\n"),
    ("treeP", "treeP(X) :- p(X), !( child(X,Y), !treeP(Y) ).\n"),
    (
        "same_generation",
        "sg(X,Y) :- flat(X,Y).\nsg(X,Y) :- up(X,A), sg(A,B), down(B,Y).\n",
    ),
    (
        "reach_filtered",
        "reach(X) :- source(X).\nreach(Y) :- reach(X), e(X,Y), !blocked(Y).\n\
         unreached(X) :- node(X), !reach(X).\n",
    ),
    (
        "left_tc",
        "path(X,Y) :- e(X,Y).\npath(X,Y) :- path(X,Z), e(Z,Y).\ncycle(X) :- path(X,X).\n",
    ),
    (
        "win_free",
        "safe(X) :- node(X), !(e(X,Y), !safe(Y)).\nunsafe(X) :- node(X), !safe(X).\n",
    ),
];

pub fn corpus_program(name: &str) -> Option<Program> {
    CORPUS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| crate::frontend::load_program(text).expect("corpus programs certify"))
}

/// `0 .. k` as integer constants.
pub fn int_constants(k: usize) -> Vec<Const> {
    (0..k as i64).map(Const::Int).collect()
}

#[derive(Debug, Clone)]
pub struct FormulaShape {
    pub max_depth: usize,
    pub vars: Vec<Name>,
    pub preds: Vec<(Name, usize)>,
    /// Constants that may appear as atom arguments.
    pub constants: Vec<Const>,
}

impl Default for FormulaShape {
    fn default() -> Self {
        FormulaShape {
            max_depth: 5,
            vars: ["X", "Y", "Z"].map(Arc::from).to_vec(),
            preds: vec![(Arc::from("r"), 1), (Arc::from("s"), 2), (Arc::from("t"), 2)],
            constants: int_constants(2),
        }
    }
}

impl FormulaShape {
    pub fn arities(&self) -> BTreeMap<Name, usize> {
        self.preds.iter().cloned().collect()
    }
}

fn random_atom<R: Rng>(rng: &mut R, shape: &FormulaShape) -> Formula {
    let (pred, arity) = shape.preds.choose(rng).expect("at least one predicate");
    let args = (0..*arity)
        .map(|_| match shape.constants.choose(rng) {
            Some(c) if rng.gen_bool(0.1) => Term::Const(c.clone()),
            _ => Term::Var(shape.vars.choose(rng).expect("at least one variable").clone()),
        })
        .collect();
    Formula::atom(pred, args)
}

/// A formula of depth at most `shape.max_depth`; atoms have depth 1.
pub fn random_formula<R: Rng>(rng: &mut R, shape: &FormulaShape) -> Formula {
    formula_at(rng, shape, shape.max_depth)
}

fn formula_at<R: Rng>(rng: &mut R, shape: &FormulaShape, depth: usize) -> Formula {
    if depth <= 1 || rng.gen_bool(0.2) {
        return match rng.gen_range(0..20) {
            0 => Formula::Top,
            1 => Formula::Bottom,
            _ => random_atom(rng, shape),
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..4) {
        0 => Formula::and(formula_at(rng, shape, d), formula_at(rng, shape, d)),
        1 => Formula::or(formula_at(rng, shape, d), formula_at(rng, shape, d)),
        2 => Formula::not(formula_at(rng, shape, d)),
        _ => {
            let v = shape.vars.choose(rng).expect("at least one variable");
            Formula::exists(v, formula_at(rng, shape, d))
        }
    }
}

/// Each tuple of the universe is present with probability `density`.
pub fn random_relation<R: Rng>(
    rng: &mut R,
    schema: Schema,
    dom: &ActiveDomain,
    density: f64,
) -> Relation {
    let all = universe(&schema, dom).expect("small universe");
    all.filter(|_| rng.gen_bool(density))
}

/// Each tuple of the universe is added with probability `p`, otherwise
/// removed with probability `p`. Adds may hit present tuples and removes
/// absent ones.
pub fn random_change<R: Rng>(rng: &mut R, schema: Schema, dom: &ActiveDomain, p: f64) -> BooleanDelta {
    let all = universe(&schema, dom).expect("small universe");
    let mut adds = Vec::new();
    let mut removes = Vec::new();
    for t in all.tuples() {
        if rng.gen_bool(p) {
            adds.push(t.clone());
        } else if rng.gen_bool(p) {
            removes.push(t.clone());
        }
    }
    BooleanDelta::new(
        Relation::from_tuples(schema.clone(), adds).expect("schema fits"),
        Relation::from_tuples(schema, removes).expect("schema fits"),
    )
    .expect("adds and removes are disjoint")
}

/// Binds every predicate of `arities` to a random relation.
pub fn random_interpretation<R: Rng>(
    rng: &mut R,
    arities: &BTreeMap<Name, usize>,
    dom: &ActiveDomain,
    density: f64,
) -> Interpretation {
    let mut out = Interpretation::new();
    for (pred, &arity) in arities {
        let r = random_relation(rng, Schema::positional(pred, arity), dom, density);
        out.insert(pred.clone(), r).expect("positional schema");
    }
    out
}

/// Binds a random change for every predicate of `arities`.
pub fn with_random_changes<R: Rng>(
    rng: &mut R,
    mut env: Interpretation,
    arities: &BTreeMap<Name, usize>,
    dom: &ActiveDomain,
    p: f64,
) -> Interpretation {
    for (pred, &arity) in arities {
        let d = random_change(rng, Schema::positional(pred, arity), dom, p);
        env.insert_delta(pred.clone(), d).expect("positional schema");
    }
    env
}

/// Shape of randomly generated programs: EDB `e/2` and `v/1`, IDB
/// predicates `p0 ..` of arity 1 or 2.
#[derive(Debug, Clone, Copy)]
pub struct ProgramShape {
    pub idb: usize,
    pub max_rules: usize,
}

impl Default for ProgramShape {
    fn default() -> Self {
        ProgramShape { idb: 3, max_rules: 2 }
    }
}

pub fn random_program_edb() -> BTreeMap<Name, usize> {
    [(Arc::from("e"), 2), (Arc::from("v"), 1)].into()
}

fn atom_text(pred: &str, args: &[&str]) -> String {
    format!("{pred}({})", args.join(","))
}

fn random_rule<R: Rng>(rng: &mut R, head: usize, arities: &[usize], shape: ProgramShape) -> String {
    let vars = ["X", "Y", "Z"];
    let head_vars = &vars[..arities[head]];
    let mut body = Vec::new();
    // Bind every head variable positively.
    for (i, v) in head_vars.iter().enumerate() {
        let pick = rng.gen_range(0..4);
        body.push(match pick {
            0 => atom_text("v", &[v]),
            1 => atom_text("e", &[v, "Z"]),
            2 if i == 0 => atom_text("e", &["Z", v]),
            _ => {
                let q = rng.gen_range(0..shape.idb);
                match arities[q] {
                    1 => atom_text(&format!("p{q}"), &[v]),
                    _ => atom_text(&format!("p{q}"), &[v, "Z"]),
                }
            }
        });
    }
    if rng.gen_bool(0.5) {
        // A recursive or cross-predicate join through Z.
        let q = rng.gen_range(0..shape.idb);
        body.push(match arities[q] {
            1 => atom_text(&format!("p{q}"), &["Z"]),
            _ => atom_text(&format!("p{q}"), &["Z", head_vars[0]]),
        });
    }
    let bound: Vec<&str> = if body.iter().any(|b| b.contains('Z')) {
        head_vars.iter().copied().chain(["Z"]).collect()
    } else {
        head_vars.to_vec()
    };
    let x = *bound.choose(rng).expect("head has a variable");
    match rng.gen_range(0..4) {
        0 => body.push(format!("!{}", atom_text("v", &[x]))),
        1 => {
            let q = rng.gen_range(0..shape.idb);
            let neg = match arities[q] {
                1 => atom_text(&format!("p{q}"), &[x]),
                _ => atom_text(&format!("p{q}"), &[x, x]),
            };
            body.push(format!("!{neg}"));
        }
        2 => {
            let q = rng.gen_range(0..shape.idb);
            let inner = match arities[q] {
                1 => atom_text(&format!("p{q}"), &["W"]),
                _ => atom_text(&format!("p{q}"), &["W", x]),
            };
            body.push(format!("!(e({x},W), !{inner})"));
        }
        _ => {}
    }
    let head_text = atom_text(&format!("p{head}"), head_vars);
    format!("{head_text} :- {}.", body.join(", "))
}

/// A random certified program. Candidates failing safety or parity checks
/// are discarded, so the result is always parity-stratified.
pub fn random_program<R: Rng>(rng: &mut R, shape: ProgramShape) -> Program {
    loop {
        let arities: Vec<usize> = (0..shape.idb).map(|_| rng.gen_range(1..=2)).collect();
        let mut text = String::new();
        for head in 0..shape.idb {
            for _ in 0..rng.gen_range(1..=shape.max_rules) {
                text.push_str(&random_rule(rng, head, &arities, shape));
                text.push('\n');
            }
        }
        // Keep the EDB fixed even when a candidate mentions only part of it.
        text.push_str("anchor(X) :- e(X,X), v(X).\n");
        if let Ok(p) = crate::frontend::load_program(&text) {
            return p;
        }
    }
}
