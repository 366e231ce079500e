//! Rendering formulas and programs back to surface syntax.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::sync::Arc;

use super::parser::{lower_scope, Parser};
use super::{Item, Program, Rule};
use crate::formula::{Atom, AtomKind, Formula, Term};
use crate::relation::Name;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantifierStyle {
    /// Leave quantifiers implicit when re-parsing places them identically,
    /// otherwise fall back to `exists`.
    #[default]
    Implicit,
    /// Always write `exists V: ...`.
    Explicit,
}

fn is_surface_var(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() || c == '_' => {}
        _ => return false,
    }
    name != "_" && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn collect_names(f: &Formula, out: &mut BTreeSet<Name>) {
    match f {
        Formula::Top | Formula::Bottom => {}
        Formula::Atom(a) => out.extend(a.vars().cloned()),
        Formula::And(l, r) | Formula::Or(l, r) => {
            collect_names(l, out);
            collect_names(r, out);
        }
        Formula::Not(g) => collect_names(g, out),
        Formula::Exists(v, g) => {
            out.insert(v.clone());
            collect_names(g, out);
        }
    }
}

/// Renames every occurrence of a variable, binders included.
fn rename_all(f: &Formula, m: &BTreeMap<Name, Name>) -> Formula {
    let get = |v: &Name| m.get(v).unwrap_or(v).clone();
    match f {
        Formula::Top | Formula::Bottom => f.clone(),
        Formula::Atom(a) => Formula::Atom(Atom {
            args: a
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Term::Var(get(v)),
                    c => c.clone(),
                })
                .collect(),
            ..a.clone()
        }),
        Formula::And(l, r) => Formula::and(rename_all(l, m), rename_all(r, m)),
        Formula::Or(l, r) => Formula::or(rename_all(l, m), rename_all(r, m)),
        Formula::Not(g) => Formula::not(rename_all(g, m)),
        Formula::Exists(v, g) => Formula::Exists(get(v), Box::new(rename_all(g, m))),
    }
}

/// Gives every variable a name the lexer reads back as a variable. The
/// renaming is injective, so it is an alpha-conversion.
fn surface_names(head: &[Name], body: &Formula) -> (Vec<Name>, Formula) {
    let mut names = BTreeSet::new();
    collect_names(body, &mut names);
    names.extend(head.iter().cloned());
    let mut used: BTreeSet<Name> = names.iter().filter(|n| is_surface_var(n)).cloned().collect();
    let mut mapping = BTreeMap::new();
    let mut next = 0usize;
    // Head variables first so they get the small numbers.
    for n in head.iter().chain(names.iter()) {
        if is_surface_var(n) || mapping.contains_key(n) {
            continue;
        }
        let fresh = loop {
            let candidate: Name = Arc::from(format!("V{next}"));
            next += 1;
            if !used.contains(&candidate) {
                break candidate;
            }
        };
        used.insert(fresh.clone());
        mapping.insert(n.clone(), fresh);
    }
    let head = head.iter().map(|h| mapping.get(h).unwrap_or(h).clone()).collect();
    (head, rename_all(body, &mapping))
}

struct Writer {
    explicit: bool,
}

impl Writer {
    /// Implicit quantifiers are dropped wherever a conjunction may stand.
    fn strip<'a>(&self, mut f: &'a Formula) -> &'a Formula {
        while let (false, Formula::Exists(_, g)) = (self.explicit, f) {
            f = g;
        }
        f
    }

    fn body(&self, f: &Formula, out: &mut String) {
        match self.strip(f) {
            Formula::Or(l, r) => {
                self.body(l, out);
                out.push_str(" ; ");
                // A right-nested `;` keeps its association through parentheses.
                match self.strip(r) {
                    Formula::Or(..) => self.parens(r, out),
                    _ => self.conj(r, out),
                }
            }
            g => self.conj(g, out),
        }
    }

    fn conj(&self, f: &Formula, out: &mut String) {
        let f = self.strip(f);
        match f {
            Formula::And(l, r) => {
                self.conj(l, out);
                out.push_str(", ");
                match self.strip(r) {
                    Formula::And(..) | Formula::Or(..) => self.parens(r, out),
                    _ => self.literal(r, out),
                }
            }
            Formula::Or(..) => self.parens(f, out),
            _ => self.literal(f, out),
        }
    }

    fn parens(&self, f: &Formula, out: &mut String) {
        out.push('(');
        self.body(f, out);
        out.push(')');
    }

    fn literal(&self, f: &Formula, out: &mut String) {
        match f {
            Formula::Top => out.push_str("true"),
            Formula::Bottom => out.push_str("false"),
            Formula::Atom(a) => {
                let _ = write!(out, "{a}");
            }
            Formula::Not(g) => {
                out.push('!');
                self.literal(g, out);
            }
            Formula::Exists(..) if !self.explicit => {
                let mut g = f;
                while let Formula::Exists(_, inner) = g {
                    g = inner;
                }
                self.literal(g, out);
            }
            Formula::Exists(..) => {
                let mut vars = Vec::new();
                let mut g = f;
                while let Formula::Exists(v, inner) = g {
                    vars.push(v.as_ref());
                    g = inner;
                }
                let _ = write!(out, "exists {}: ", vars.join(", "));
                self.literal(g, out);
            }
            Formula::And(..) | Formula::Or(..) => self.parens(f, out),
        }
    }
}

/// Renders a formula as a rule body.
pub fn render_formula(f: &Formula, style: QuantifierStyle) -> String {
    let mut out = String::new();
    Writer {
        explicit: style == QuantifierStyle::Explicit,
    }
    .body(f, &mut out);
    out
}

fn relower(text: &str, head: &[Name]) -> Option<Formula> {
    let mut parser = Parser::new(text).ok()?;
    let body = parser.body().ok()?;
    if !parser.at_eof() {
        return None;
    }
    Some(lower_scope(&body, &head.iter().cloned().collect()))
}

/// Renders `head(vars) :- body.` such that parsing it yields `body` again,
/// up to renaming of variables the lexer would not accept.
pub fn render_clause(
    head_pred: &str,
    head_vars: &[Name],
    body: &Formula,
    style: QuantifierStyle,
) -> String {
    let (head, body) = surface_names(head_vars, body);
    let mut text = None;
    if style == QuantifierStyle::Implicit {
        let candidate = render_formula(&body, QuantifierStyle::Implicit);
        if relower(&candidate, &head).as_ref() == Some(&body) {
            text = Some(candidate);
        }
    }
    let text = text.unwrap_or_else(|| render_formula(&body, QuantifierStyle::Explicit));
    let head = head.iter().map(|h| h.as_ref()).collect::<Vec<_>>().join(", ");
    format!("{head_pred}({head}) :- {text}.")
}

pub fn render_rule(rule: &Rule, style: QuantifierStyle) -> String {
    let prefix = rule.head.kind.prefix();
    render_clause(
        &format!("{prefix}{}", rule.head.pred),
        &rule.head_vars(),
        &rule.body,
        style,
    )
}

/// One clause per line, in source order.
pub fn render_program(p: &Program, style: QuantifierStyle) -> String {
    let mut out = String::new();
    for item in p.items() {
        match item {
            Item::Fact(pred, row) => {
                let args: Vec<String> = row.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(out, "{pred}({}).", args.join(", "));
            }
            Item::Rule(rule) => {
                out.push_str(&render_rule(rule, style));
                out.push('\n');
            }
        }
    }
    out
}

/// Reads `delta_p` and `nabla_p` atoms, as written by the derivative
/// printer, back as change atoms of `p`.
pub fn decode_change_atoms(f: &Formula) -> Formula {
    match f {
        Formula::Top | Formula::Bottom => f.clone(),
        Formula::Atom(a) if a.kind == AtomKind::Base => {
            for kind in [AtomKind::DeltaAdd, AtomKind::DeltaRemove] {
                if let Some(rest) = a.pred.strip_prefix(kind.prefix()) {
                    return Formula::Atom(Atom {
                        pred: Arc::from(rest),
                        kind,
                        args: a.args.clone(),
                    });
                }
            }
            f.clone()
        }
        Formula::Atom(_) => f.clone(),
        Formula::And(l, r) => Formula::and(decode_change_atoms(l), decode_change_atoms(r)),
        Formula::Or(l, r) => Formula::or(decode_change_atoms(l), decode_change_atoms(r)),
        Formula::Not(g) => Formula::not(decode_change_atoms(g)),
        Formula::Exists(v, g) => Formula::Exists(v.clone(), Box::new(decode_change_atoms(g))),
    }
}
