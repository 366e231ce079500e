//! Surface syntax, static checks, and the [`Program`] they produce.
//!
//! ```text
//! rule    := atom ":-" body "." | atom "."
//! body    := conj (";" conj)*
//! conj    := literal ("," literal)*
//! literal := atom | "!" literal | "(" body ")" | "true" | "false"
//!          | "exists" Var ("," Var)* ":" literal
//! atom    := ident "(" term ("," term)* ")"
//! term    := Var | integer | ident
//! ```
//!
//! Each IDB predicate `p` of arity `n` is lowered to a single defining
//! formula over the positional schema `p$0 .. p$(n-1)`: the disjunction of
//! its rule bodies, with head variables renamed to the positional names.

mod check;
mod facts;
mod lexer;
mod parser;
mod render;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use check::{check_parity_stratification, check_safety, Strata};
pub use facts::{parse_delta, parse_facts, render_delta, render_deltas, render_facts, render_relation};
pub use lexer::Pos;
pub use render::{decode_change_atoms, render_clause, render_formula, render_program, render_rule, QuantifierStyle};

pub(crate) use parser::Parser;

use crate::formula::{Atom, Formula, Term};
use crate::relation::{positional_name, Const, Name, Schema};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: predicate `{pred}` used with arity {found}, but it has arity {expected}")]
    Arity {
        pred: Name,
        expected: usize,
        found: usize,
        pos: Pos,
    },
    #[error("{pos}: head variable `{var}` of `{pred}` does not occur in the body")]
    HeadVarNotInBody { pred: Name, var: Name, pos: Pos },
    #[error("{pos}: rule heads must have distinct variables as arguments (`{pred}`)")]
    HeadNotDistinctVars { pred: Name, pos: Pos },
    #[error("{pos}: `{pred}` has both facts and rules")]
    FactsAndRules { pred: Name, pos: Pos },
    #[error("{pos}: unsafe variable `{var}` in a rule for `{pred}`: it is not bound by a positive atom")]
    Unsafe { pred: Name, var: Name, pos: Pos },
    #[error("recursion through an odd number of negations: {}", render_cycle(.cycle))]
    OddCycle { cycle: Vec<Name> },
    #[error("`{pred}` is not an IDB predicate of the program")]
    UnknownPredicate { pred: Name },
}

fn render_cycle(cycle: &[Name]) -> String {
    cycle.iter().map(|n| n.as_ref()).collect::<Vec<_>>().join(" -> ")
}

pub type Result<T, E = FrontendError> = std::result::Result<T, E>;

/// A source rule after quantifier placement, with its original variable names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub head: Atom,
    pub body: Formula,
    pub pos: Pos,
}

impl Rule {
    pub fn head_vars(&self) -> Vec<Name> {
        self.head.vars().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Fact(Name, Vec<Const>),
    Rule(Rule),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    edb: BTreeMap<Name, usize>,
    idb: BTreeMap<Name, usize>,
    items: Vec<Item>,
    definitions: BTreeMap<Name, Formula>,
    strata: Option<Strata>,
}

impl Program {
    /// Parses and lowers a program without running the static checks.
    pub fn parse(text: &str) -> Result<Program> {
        let mut parser = Parser::new(text)?;
        let mut clauses = Vec::new();
        while !parser.at_eof() {
            clauses.push(parser.clause()?);
        }
        Program::from_clauses(clauses)
    }

    fn from_clauses(clauses: Vec<parser::Clause>) -> Result<Program> {
        let mut arities: BTreeMap<Name, usize> = BTreeMap::new();
        let mut note = |a: &Atom, pos: Pos| -> Result<()> {
            let expected = *arities.entry(a.pred.clone()).or_insert(a.args.len());
            if expected != a.args.len() {
                return Err(FrontendError::Arity {
                    pred: a.pred.clone(),
                    expected,
                    found: a.args.len(),
                    pos,
                });
            }
            Ok(())
        };
        let mut items = Vec::new();
        let mut heads: BTreeMap<Name, Pos> = BTreeMap::new();
        let mut fact_preds: BTreeMap<Name, Pos> = BTreeMap::new();
        for clause in clauses {
            match clause {
                parser::Clause::Fact(head, pos) => {
                    note(&head, pos)?;
                    let mut row = Vec::new();
                    for t in &head.args {
                        match t {
                            Term::Const(c) => row.push(c.clone()),
                            Term::Var(v) => {
                                return Err(FrontendError::HeadVarNotInBody {
                                    pred: head.pred.clone(),
                                    var: v.clone(),
                                    pos,
                                })
                            }
                        }
                    }
                    fact_preds.entry(head.pred.clone()).or_insert(pos);
                    items.push(Item::Fact(head.pred, row));
                }
                parser::Clause::Rule(head, body, pos) => {
                    note(&head, pos)?;
                    let mut head_vars = BTreeSet::new();
                    for t in &head.args {
                        match t {
                            Term::Var(v) if head_vars.insert(v.clone()) => {}
                            _ => {
                                return Err(FrontendError::HeadNotDistinctVars {
                                    pred: head.pred.clone(),
                                    pos,
                                })
                            }
                        }
                    }
                    let body = parser::lower_scope(&body, &head_vars);
                    for a in body.atoms() {
                        note(a, pos)?;
                    }
                    let free = body.free_vars();
                    if let Some(v) = head.vars().find(|v| !free.contains(*v)) {
                        return Err(FrontendError::HeadVarNotInBody {
                            pred: head.pred.clone(),
                            var: v.clone(),
                            pos,
                        });
                    }
                    heads.entry(head.pred.clone()).or_insert(pos);
                    items.push(Item::Rule(Rule { head, body, pos }));
                }
            }
        }
        if let Some((pred, pos)) = fact_preds.iter().find(|(p, _)| heads.contains_key(*p)) {
            return Err(FrontendError::FactsAndRules {
                pred: pred.clone(),
                pos: *pos,
            });
        }
        let (idb, edb): (BTreeMap<_, _>, BTreeMap<_, _>) =
            arities.into_iter().partition(|(p, _)| heads.contains_key(p));
        let mut program = Program {
            edb,
            idb,
            items,
            definitions: BTreeMap::new(),
            strata: None,
        };
        program.definitions = program.lower_definitions();
        Ok(program)
    }

    /// Builds a program directly from defining formulas over positional
    /// schemata. Predicates not defined here are EDB.
    pub fn from_definitions(
        edb: impl IntoIterator<Item = (Name, usize)>,
        idb: impl IntoIterator<Item = (Name, usize, Formula)>,
    ) -> Program {
        let mut idb_arity = BTreeMap::new();
        let mut definitions = BTreeMap::new();
        let mut items = Vec::new();
        for (name, arity, def) in idb {
            idb_arity.insert(name.clone(), arity);
            let head = Atom {
                pred: name.clone(),
                kind: crate::formula::AtomKind::Base,
                args: (0..arity).map(|i| Term::Var(positional_name(&name, i))).collect(),
            };
            items.push(Item::Rule(Rule {
                head,
                body: def.clone(),
                pos: Pos::default(),
            }));
            definitions.insert(name, def);
        }
        Program {
            edb: edb.into_iter().collect(),
            idb: idb_arity,
            items,
            definitions,
            strata: None,
        }
    }

    fn lower_definitions(&self) -> BTreeMap<Name, Formula> {
        let mut defs: BTreeMap<Name, Formula> = BTreeMap::new();
        for rule in self.rules() {
            let mapping: BTreeMap<Name, Name> = rule
                .head_vars()
                .into_iter()
                .enumerate()
                .map(|(i, v)| (v, positional_name(&rule.head.pred, i)))
                .collect();
            let body = rule.body.rename_free(&mapping);
            let merged = match defs.remove(&rule.head.pred) {
                Some(prev) => Formula::or(prev, body),
                None => body,
            };
            defs.insert(rule.head.pred.clone(), merged);
        }
        defs
    }

    /// Runs the safety and parity checks and records the strata.
    pub fn certify(mut self) -> Result<Program> {
        check_safety(&self)?;
        self.strata = Some(check_parity_stratification(&self)?);
        Ok(self)
    }

    pub fn edb(&self) -> &BTreeMap<Name, usize> {
        &self.edb
    }

    pub fn idb(&self) -> &BTreeMap<Name, usize> {
        &self.idb
    }

    pub fn arity(&self, pred: &str) -> Option<usize> {
        self.idb.get(pred).or_else(|| self.edb.get(pred)).copied()
    }

    pub fn is_idb(&self, pred: &str) -> bool {
        self.idb.contains_key(pred)
    }

    /// Positional schema of a predicate.
    pub fn schema(&self, pred: &str) -> Option<Schema> {
        self.arity(pred).map(|n| Schema::positional(pred, n))
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.items.iter().filter_map(|i| match i {
            Item::Rule(r) => Some(r),
            Item::Fact(..) => None,
        })
    }

    /// Ground facts written in the program text.
    pub fn facts(&self) -> impl Iterator<Item = (&Name, &Vec<Const>)> {
        self.items.iter().filter_map(|i| match i {
            Item::Fact(p, row) => Some((p, row)),
            Item::Rule(_) => None,
        })
    }

    pub fn definition(&self, pred: &str) -> Option<&Formula> {
        self.definitions.get(pred)
    }

    pub fn definitions(&self) -> &BTreeMap<Name, Formula> {
        &self.definitions
    }

    /// Set by [`Program::certify`].
    pub fn strata(&self) -> Option<&Strata> {
        self.strata.as_ref()
    }

    /// Constants in the program text.
    pub fn constants(&self) -> BTreeSet<Const> {
        let mut out = BTreeSet::new();
        for item in &self.items {
            match item {
                Item::Fact(_, row) => out.extend(row.iter().cloned()),
                Item::Rule(r) => {
                    for a in r.body.atoms() {
                        out.extend(a.args.iter().filter_map(|t| match t {
                            Term::Const(c) => Some(c.clone()),
                            Term::Var(_) => None,
                        }));
                    }
                }
            }
        }
        out
    }

    pub fn pred_name(&self, pred: &str) -> Option<Name> {
        self.idb
            .get_key_value(pred)
            .or_else(|| self.edb.get_key_value(pred))
            .map(|(k, _)| k.clone())
    }
}

/// Parses clauses without the program-level checks, lowering each body
/// with its head variables in scope. Facts come back with body `⊤`.
pub fn parse_clauses(text: &str) -> Result<Vec<(Atom, Formula)>> {
    let mut parser = Parser::new(text)?;
    let mut out = Vec::new();
    while !parser.at_eof() {
        out.push(match parser.clause()? {
            parser::Clause::Fact(head, _) => (head, Formula::Top),
            parser::Clause::Rule(head, body, _) => {
                let scope: BTreeSet<Name> = head.vars().cloned().collect();
                let body = parser::lower_scope(&body, &scope);
                (head, body)
            }
        });
    }
    Ok(out)
}

/// Parses a program and runs both static checks.
pub fn load_program(text: &str) -> Result<Program> {
    Program::parse(text)?.certify()
}
