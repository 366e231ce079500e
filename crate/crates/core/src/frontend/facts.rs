//! Fact files (`pred(c1, ..., cn).`) and delta files (`+pred(..).` / `-pred(..).`).

use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::Arc;

use super::lexer::{Pos, Tok};
use super::{FrontendError, Parser, Result};
use crate::delta::BooleanDelta;
use crate::relation::{Const, Name, Relation, Schema};
use crate::semantics::Interpretation;

type Rows = BTreeMap<Name, (usize, Pos, Vec<Vec<Const>>)>;

fn syntax(pos: Pos, msg: impl Into<String>) -> FrontendError {
    FrontendError::Syntax { pos, msg: msg.into() }
}

fn ground_fact(p: &mut Parser) -> Result<(Name, Vec<Const>, Pos)> {
    let start = p.pos();
    let pred = match p.next().tok {
        Tok::Ident(s) => s,
        other => return Err(syntax(start, format!("expected a predicate name, found {other}"))),
    };
    p.expect(Tok::LParen)?;
    let mut row = Vec::new();
    loop {
        let t = p.next();
        row.push(match t.tok {
            Tok::Int(v) => Const::Int(v),
            Tok::Ident(s) => Const::sym(&s),
            Tok::Var(v) => return Err(syntax(t.pos, format!("facts must be ground, found variable `{v}`"))),
            other => return Err(syntax(t.pos, format!("expected a constant, found {other}"))),
        });
        match p.next() {
            t if t.tok == Tok::Comma => continue,
            t if t.tok == Tok::RParen => break,
            t => return Err(syntax(t.pos, format!("expected `,` or `)`, found {}", t.tok))),
        }
    }
    p.expect(Tok::Dot)?;
    Ok((Arc::from(pred), row, start))
}

fn record(rows: &mut Rows, pred: Name, row: Vec<Const>, pos: Pos) -> Result<()> {
    let entry = rows.entry(pred.clone()).or_insert_with(|| (row.len(), pos, Vec::new()));
    if entry.0 != row.len() {
        return Err(FrontendError::Arity {
            pred,
            expected: entry.0,
            found: row.len(),
            pos,
        });
    }
    entry.2.push(row);
    Ok(())
}

fn relation(pred: &str, arity: usize, rows: Vec<Vec<Const>>) -> Relation {
    Relation::from_rows(Schema::positional(pred, arity), rows).expect("rows have the schema's arity")
}

/// Parses a fact file into an interpretation over positional schemas.
pub fn parse_facts(text: &str) -> Result<Interpretation> {
    let mut p = Parser::new(text)?;
    let mut rows = Rows::new();
    while *p.peek() != Tok::Eof {
        let (pred, row, pos) = ground_fact(&mut p)?;
        record(&mut rows, pred, row, pos)?;
    }
    let mut out = Interpretation::new();
    for (pred, (arity, _, rows)) in rows {
        out.insert(pred.clone(), relation(&pred, arity, rows))
            .expect("positional schema");
    }
    Ok(out)
}

/// Parses a delta file. A fact may not be both inserted and deleted.
pub fn parse_delta(text: &str) -> Result<BTreeMap<Name, BooleanDelta>> {
    let mut p = Parser::new(text)?;
    let (mut adds, mut removes) = (Rows::new(), Rows::new());
    while *p.peek() != Tok::Eof {
        let t = p.next();
        let target = match t.tok {
            Tok::Plus => &mut adds,
            Tok::Minus => &mut removes,
            other => return Err(syntax(t.pos, format!("expected `+` or `-`, found {other}"))),
        };
        let (pred, row, pos) = ground_fact(&mut p)?;
        record(target, pred, row, pos)?;
    }
    let mut out = BTreeMap::new();
    let preds: Vec<Name> = adds.keys().chain(removes.keys()).cloned().collect();
    for pred in preds {
        if out.contains_key(&pred) {
            continue;
        }
        let (a_arity, a_pos, a_rows) = adds.remove(&pred).unwrap_or((0, Pos::default(), Vec::new()));
        let (r_arity, r_pos, r_rows) = removes.remove(&pred).unwrap_or((a_arity, a_pos, Vec::new()));
        let arity = if a_rows.is_empty() { r_arity } else { a_arity };
        if !a_rows.is_empty() && !r_rows.is_empty() && a_arity != r_arity {
            return Err(FrontendError::Arity {
                pred,
                expected: a_arity,
                found: r_arity,
                pos: r_pos,
            });
        }
        let ins = relation(&pred, arity, a_rows);
        let del = relation(&pred, arity, r_rows);
        let d = BooleanDelta::new(ins, del).map_err(|e| syntax(r_pos, format!("`{pred}`: {e}")))?;
        out.insert(pred, d);
    }
    Ok(out)
}

fn fact_line(out: &mut String, sign: &str, pred: &str, row: &[Const]) {
    let args: Vec<String> = row.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "{sign}{pred}({}).", args.join(","));
}

/// One fact per line, rows in lexicographic order.
pub fn render_relation(pred: &str, rel: &Relation) -> String {
    let mut out = String::new();
    for row in rel.rows() {
        fact_line(&mut out, "", pred, &row);
    }
    out
}

/// Every relation of `interp`, predicates in name order.
pub fn render_facts(interp: &Interpretation) -> String {
    interp
        .relations()
        .iter()
        .map(|(pred, rel)| render_relation(pred, rel))
        .collect()
}

/// `+` lines then `-` lines.
pub fn render_delta(pred: &str, d: &BooleanDelta) -> String {
    let mut out = String::new();
    for row in d.adds().rows() {
        fact_line(&mut out, "+", pred, &row);
    }
    for row in d.removes().rows() {
        fact_line(&mut out, "-", pred, &row);
    }
    out
}

pub fn render_deltas(deltas: &BTreeMap<Name, BooleanDelta>) -> String {
    deltas.iter().map(|(p, d)| render_delta(p, d)).collect()
}
