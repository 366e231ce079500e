//! Recursive-descent parser and lowering to [`Formula`].
//!
//! Variables that do not occur in a rule head are existentially quantified
//! at the innermost scope holding all their occurrences. Scopes are the rule
//! body, the operand of a negation, each branch of a disjunction, and the
//! body of an explicit `exists`.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::lexer::{tokenize, Pos, Tok, Token};
use super::FrontendError;
use crate::formula::{Atom, AtomKind, Formula, Term};
use crate::relation::{Const, Name};

/// Rule bodies before quantifiers are placed.
#[derive(Debug, Clone)]
pub(crate) enum Body {
    True,
    False,
    Atom(Atom),
    Not(Box<Body>),
    And(Vec<Body>),
    Or(Vec<Body>),
    Exists(Vec<Name>, Box<Body>),
}

#[derive(Debug, Clone)]
pub(crate) enum Clause {
    /// `head.` with no body.
    Fact(Atom, Pos),
    Rule(Atom, Body, Pos),
}

pub(crate) struct Parser {
    toks: Vec<Token>,
    at: usize,
    fresh: usize,
}

impl Parser {
    pub(crate) fn new(text: &str) -> Result<Self, FrontendError> {
        Ok(Parser {
            toks: tokenize(text)?,
            at: 0,
            fresh: 0,
        })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    pub(crate) fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    pub(crate) fn next(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if t.tok != Tok::Eof {
            self.at += 1;
        }
        t
    }

    pub(crate) fn expect(&mut self, want: Tok) -> Result<(), FrontendError> {
        let t = self.next();
        if t.tok == want {
            Ok(())
        } else {
            Err(FrontendError::Syntax {
                pos: t.pos,
                msg: format!("expected {want}, found {}", t.tok),
            })
        }
    }

    fn unexpected<T>(&self, what: &str) -> Result<T, FrontendError> {
        Err(FrontendError::Syntax {
            pos: self.pos(),
            msg: format!("expected {what}, found {}", self.peek()),
        })
    }

    pub(crate) fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub(crate) fn clause(&mut self) -> Result<Clause, FrontendError> {
        let pos = self.pos();
        let head = self.atom()?;
        match self.peek() {
            Tok::Dot => {
                self.next();
                Ok(Clause::Fact(head, pos))
            }
            Tok::If => {
                self.next();
                let body = self.body()?;
                self.expect(Tok::Dot)?;
                Ok(Clause::Rule(head, body, pos))
            }
            _ => self.unexpected("`.` or `:-`"),
        }
    }

    pub(crate) fn body(&mut self) -> Result<Body, FrontendError> {
        let mut branches = vec![self.conj()?];
        while *self.peek() == Tok::Semi {
            self.next();
            branches.push(self.conj()?);
        }
        Ok(if branches.len() == 1 {
            branches.pop().expect("one branch")
        } else {
            Body::Or(branches)
        })
    }

    fn conj(&mut self) -> Result<Body, FrontendError> {
        let mut parts = vec![self.literal()?];
        while *self.peek() == Tok::Comma {
            self.next();
            parts.push(self.literal()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one conjunct")
        } else {
            Body::And(parts)
        })
    }

    fn literal(&mut self) -> Result<Body, FrontendError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.next();
                Ok(Body::Not(Box::new(self.literal()?)))
            }
            Tok::LParen => {
                self.next();
                let b = self.body()?;
                self.expect(Tok::RParen)?;
                Ok(b)
            }
            Tok::Ident(s) if s == "true" => {
                self.next();
                Ok(Body::True)
            }
            Tok::Ident(s) if s == "false" => {
                self.next();
                Ok(Body::False)
            }
            Tok::Ident(s) if s == "exists" && matches!(self.toks[self.at + 1].tok, Tok::Var(_)) => {
                self.next();
                let mut vars = Vec::new();
                loop {
                    match self.next().tok {
                        Tok::Var(v) => vars.push(Name::from(v)),
                        _ => return self.unexpected("a variable"),
                    }
                    if *self.peek() == Tok::Comma {
                        self.next();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::Colon)?;
                Ok(Body::Exists(vars, Box::new(self.literal()?)))
            }
            Tok::Ident(_) => Ok(Body::Atom(self.atom()?)),
            _ => self.unexpected("a literal"),
        }
    }

    /// `pred(t1, ..., tn)`; `delta_`/`nabla_` prefixes are plain name parts.
    pub(crate) fn atom(&mut self) -> Result<Atom, FrontendError> {
        let pred = match self.next().tok {
            Tok::Ident(s) => s,
            _ => {
                self.at -= 1;
                return self.unexpected("a predicate name");
            }
        };
        self.expect(Tok::LParen)?;
        let mut args = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.next();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        Ok(Atom {
            pred: Arc::from(pred),
            kind: AtomKind::Base,
            args,
        })
    }

    fn term(&mut self) -> Result<Term, FrontendError> {
        let t = self.next();
        match t.tok {
            Tok::Var(v) if v == "_" => {
                self.fresh += 1;
                Ok(Term::Var(Arc::from(format!("_{}", self.fresh))))
            }
            Tok::Var(v) => Ok(Term::Var(Arc::from(v))),
            Tok::Int(i) => Ok(Term::Const(Const::Int(i))),
            Tok::Minus => match self.next().tok {
                Tok::Int(i) => Ok(Term::Const(Const::Int(-i))),
                _ => {
                    self.at -= 1;
                    self.unexpected("an integer")
                }
            },
            Tok::Ident(s) => Ok(Term::Const(Const::Sym(Arc::from(s)))),
            _ => {
                self.at -= 1;
                self.unexpected("a variable or constant")
            }
        }
    }
}

/// Free variables of a surface body in order of first occurrence.
fn occurrences(b: &Body) -> Vec<Name> {
    fn walk(b: &Body, bound: &mut Vec<Name>, out: &mut Vec<Name>) {
        match b {
            Body::True | Body::False => {}
            Body::Atom(a) => {
                for v in a.vars() {
                    if !bound.contains(v) && !out.contains(v) {
                        out.push(v.clone());
                    }
                }
            }
            Body::Not(x) => walk(x, bound, out),
            Body::And(xs) | Body::Or(xs) => xs.iter().for_each(|x| walk(x, bound, out)),
            Body::Exists(vs, x) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                walk(x, bound, out);
                bound.truncate(n);
            }
        }
    }
    let mut out = Vec::new();
    walk(b, &mut Vec::new(), &mut out);
    out
}

/// Splits a scope's variables into those occurring outside nested scopes
/// and the free variables of each directly nested scope.
fn scope_shape(b: &Body, direct: &mut BTreeSet<Name>, children: &mut Vec<BTreeSet<Name>>) {
    match b {
        Body::True | Body::False => {}
        Body::Atom(a) => direct.extend(a.vars().cloned()),
        Body::And(xs) => xs.iter().for_each(|x| scope_shape(x, direct, children)),
        Body::Or(xs) => children.extend(xs.iter().map(|x| occurrences(x).into_iter().collect())),
        Body::Not(_) | Body::Exists(..) => children.push(occurrences(b).into_iter().collect()),
    }
}

pub(crate) fn lower_scope(b: &Body, outer: &BTreeSet<Name>) -> Formula {
    let mut direct = BTreeSet::new();
    let mut children = Vec::new();
    scope_shape(b, &mut direct, &mut children);
    let here: Vec<Name> = occurrences(b)
        .into_iter()
        .filter(|v| !outer.contains(v))
        .filter(|v| direct.contains(v) || children.iter().filter(|c| c.contains(v)).count() >= 2)
        .collect();
    let mut inner = outer.clone();
    inner.extend(here.iter().cloned());
    let mut f = translate(b, &inner);
    for v in &here {
        f = Formula::Exists(v.clone(), Box::new(f));
    }
    f
}

fn translate(b: &Body, outer: &BTreeSet<Name>) -> Formula {
    match b {
        Body::True => Formula::Top,
        Body::False => Formula::Bottom,
        Body::Atom(a) => Formula::Atom(a.clone()),
        Body::Not(x) => Formula::not(lower_scope(x, outer)),
        Body::And(xs) => fold(xs.iter().map(|x| translate(x, outer)), Formula::and),
        Body::Or(xs) => fold(xs.iter().map(|x| lower_scope(x, outer)), Formula::or),
        Body::Exists(vs, x) => {
            let mut inner = outer.clone();
            inner.extend(vs.iter().cloned());
            let mut f = lower_scope(x, &inner);
            for v in vs.iter().rev() {
                f = Formula::Exists(v.clone(), Box::new(f));
            }
            f
        }
    }
}

fn fold(mut items: impl Iterator<Item = Formula>, op: fn(Formula, Formula) -> Formula) -> Formula {
    let first = items.next().expect("parser never builds empty lists");
    items.fold(first, op)
}
