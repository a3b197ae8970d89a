//! LP text format (the CPLEX-style sectioned layout read by most MIP solvers).
//!
//! The writer emits every variable in the `Bounds` section in declaration
//! order, so [`parse_lp`] rebuilds a structurally identical [`MipModel`].

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{LinExpr, MipModel, Relation, Row, Var, VarKind};
use crate::feasibility::Family;

const LINE_WIDTH: usize = 200;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn write_expr(out: &mut String, m: &MipModel, expr: &LinExpr, mut col: usize) {
    for (k, &(var, coeff)) in expr.terms.iter().enumerate() {
        let name = &m.variables[var].name;
        let mut piece = String::new();
        let magnitude = coeff.abs();
        match (k, coeff < 0.0) {
            (0, false) => {}
            (0, true) => piece.push_str("- "),
            (_, false) => piece.push_str("+ "),
            (_, true) => piece.push_str("- "),
        }
        if magnitude != 1.0 {
            piece.push_str(&fmt_num(magnitude));
            piece.push(' ');
        }
        piece.push_str(name);
        if col + piece.len() > LINE_WIDTH {
            out.push_str("\n   ");
            col = 3;
        }
        out.push(' ');
        out.push_str(&piece);
        col += piece.len() + 1;
    }
}

/// Renders a model as LP text.
pub fn write_lp(m: &MipModel) -> String {
    let mut out = String::new();
    out.push_str("\\ EV fleet assignment model\n");
    out.push_str("Maximize\n obj:");
    if m.objective.is_empty() {
        out.push_str(" 0");
    } else {
        write_expr(&mut out, m, &m.objective, 5);
    }
    out.push_str("\nSubject To\n");
    for row in &m.constraints {
        let _ = write!(out, " {}:", row.name);
        write_expr(&mut out, m, &row.expr, row.name.len() + 2);
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {rel} {}", fmt_num(row.rhs));
    }
    out.push_str("Bounds\n");
    for v in &m.variables {
        if v.upper == f64::INFINITY {
            if v.lower == f64::NEG_INFINITY {
                let _ = writeln!(out, " {} free", v.name);
            } else {
                let _ = writeln!(out, " {} >= {}", v.name, fmt_num(v.lower));
            }
        } else {
            let _ = writeln!(
                out,
                " {} <= {} <= {}",
                fmt_num(v.lower),
                v.name,
                fmt_num(v.upper)
            );
        }
    }
    for (title, kind) in [("Binaries", VarKind::Binary), ("Generals", VarKind::Integer)] {
        let names: Vec<&str> = m
            .variables
            .iter()
            .filter(|v| v.kind == kind)
            .map(|v| v.name.as_str())
            .collect();
        if names.is_empty() {
            continue;
        }
        out.push_str(title);
        out.push('\n');
        let mut col = 0;
        for name in names {
            if col + name.len() > LINE_WIDTH {
                out.push('\n');
                col = 0;
            }
            out.push(' ');
            out.push_str(name);
            col += name.len() + 1;
        }
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(m: &MipModel, path: impl AsRef<Path>) -> Result<(), LpError> {
    std::fs::write(path, write_lp(m))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Plus,
    Minus,
    Colon,
    Rel(Relation),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "_[].!\"#$%&/,;?@'{}|~".contains(c)
}

fn tokenize_line(line: &str, lineno: usize) -> Result<Vec<Tok>, LpError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        if c == '\\' {
            break;
        }
        if c.is_whitespace() {
            k += 1;
            continue;
        }
        match c {
            '+' => {
                toks.push(Tok::Plus);
                k += 1;
            }
            '-' => {
                toks.push(Tok::Minus);
                k += 1;
            }
            ':' => {
                toks.push(Tok::Colon);
                k += 1;
            }
            '<' | '>' | '=' => {
                let mut op = String::from(c);
                k += 1;
                if k < chars.len() && (chars[k] == '=' || chars[k] == '<' || chars[k] == '>') {
                    op.push(chars[k]);
                    k += 1;
                }
                let rel = match op.as_str() {
                    "<" | "<=" | "=<" => Relation::Le,
                    ">" | ">=" | "=>" => Relation::Ge,
                    "=" | "==" => Relation::Eq,
                    _ => {
                        return Err(LpError::Parse {
                            line: lineno,
                            msg: format!("bad operator {op}"),
                        })
                    }
                };
                toks.push(Tok::Rel(rel));
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let begin = k;
                while k < chars.len()
                    && (chars[k].is_ascii_digit()
                        || chars[k] == '.'
                        || chars[k] == 'e'
                        || chars[k] == 'E'
                        || ((chars[k] == '+' || chars[k] == '-')
                            && matches!(chars[k - 1], 'e' | 'E')))
                {
                    k += 1;
                }
                let text: String = chars[begin..k].iter().collect();
                let value = text.parse().map_err(|_| LpError::Parse {
                    line: lineno,
                    msg: format!("bad number {text}"),
                })?;
                toks.push(Tok::Num(value));
            }
            _ if is_ident_char(c) => {
                let begin = k;
                while k < chars.len() && is_ident_char(chars[k]) {
                    k += 1;
                }
                let text: String = chars[begin..k].iter().collect();
                match text.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" => toks.push(Tok::Num(f64::INFINITY)),
                    _ => toks.push(Tok::Ident(text)),
                }
            }
            _ => {
                return Err(LpError::Parse {
                    line: lineno,
                    msg: format!("unexpected character {c:?}"),
                })
            }
        }
    }
    Ok(toks)
}

fn section_header(line: &str) -> Option<Section> {
    let lower = line.trim().to_ascii_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    match words.as_slice() {
        ["maximize"] | ["maximise"] | ["max"] => Some(Section::Objective),
        ["subject", "to"] | ["such", "that"] | ["st"] | ["s.t."] => Some(Section::Constraints),
        ["bounds"] | ["bound"] => Some(Section::Bounds),
        ["binaries"] | ["binary"] | ["bin"] => Some(Section::Binaries),
        ["generals"] | ["general"] | ["gen"] => Some(Section::Generals),
        ["end"] => Some(Section::End),
        _ => None,
    }
}

/// Token stream with the line each token came from.
struct Stream {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Stream {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or(self.toks.last())
            .map(|&(_, l)| l)
            .unwrap_or(0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, LpError> {
        Err(LpError::Parse {
            line: self.line(),
            msg: msg.into(),
        })
    }
}

struct Builder {
    model: MipModel,
    index: std::collections::HashMap<String, usize>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&k) = self.index.get(name) {
            return k;
        }
        self.model.variables.push(Var {
            name: name.to_string(),
            kind: VarKind::Continuous,
            lower: 0.0,
            upper: f64::INFINITY,
        });
        let k = self.model.variables.len() - 1;
        self.index.insert(name.to_string(), k);
        k
    }
}

/// Parses `[name:] terms` until a relation or the end of the stream; returns the
/// expression and any constant collected on the way.
fn parse_terms(st: &mut Stream, b: &mut Builder) -> Result<(LinExpr, f64), LpError> {
    let mut expr = LinExpr::new();
    let mut constant = 0.0;
    loop {
        let mut sign = 1.0;
        let mut saw_sign = false;
        while let Some(Tok::Plus | Tok::Minus) = st.peek() {
            if st.next() == Some(Tok::Minus) {
                sign = -sign;
            }
            saw_sign = true;
        }
        match st.peek().cloned() {
            Some(Tok::Num(x)) => {
                st.next();
                if let Some(Tok::Ident(name)) = st.peek().cloned() {
                    // A coefficient unless the identifier starts the next row.
                    if st.peek2() != Some(&Tok::Colon) {
                        st.next();
                        let v = b.var(&name);
                        expr.add(v, sign * x);
                        continue;
                    }
                }
                constant += sign * x;
            }
            Some(Tok::Ident(name)) if st.peek2() != Some(&Tok::Colon) => {
                st.next();
                let v = b.var(&name);
                expr.add(v, sign);
            }
            _ => {
                if saw_sign {
                    return st.err("dangling sign");
                }
                return Ok((expr, constant));
            }
        }
    }
}

fn parse_signed_num(st: &mut Stream) -> Result<f64, LpError> {
    let mut sign = 1.0;
    while let Some(Tok::Plus | Tok::Minus) = st.peek() {
        if st.next() == Some(Tok::Minus) {
            sign = -sign;
        }
    }
    match st.next() {
        Some(Tok::Num(x)) => Ok(sign * x),
        other => st.err(format!("expected a number, found {other:?}")),
    }
}

/// Parses LP text produced by [`write_lp`] (or any file using the same subset:
/// a maximized objective, named rows, bounds, binaries and generals).
pub fn parse_lp(text: &str) -> Result<MipModel, LpError> {
    let mut sections: Vec<(Section, Vec<(Tok, usize)>)> = Vec::new();
    let mut current = Section::Preamble;
    let mut toks = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        if let Some(next) = section_header(line) {
            sections.push((current, std::mem::take(&mut toks)));
            current = next;
            continue;
        }
        let lower = line.trim().to_ascii_lowercase();
        if lower.starts_with("minimize") || lower.starts_with("minimise") || lower == "min" {
            return Err(LpError::Parse {
                line: lineno,
                msg: "only maximization models are supported".into(),
            });
        }
        for t in tokenize_line(line, lineno)? {
            toks.push((t, lineno));
        }
    }
    sections.push((current, toks));

    let mut b = Builder {
        model: MipModel::default(),
        index: Default::default(),
    };
    let mut bounded: Vec<usize> = Vec::new();
    let mut kinds: Vec<(usize, VarKind)> = Vec::new();
    let mut saw_end = false;

    for (section, toks) in sections {
        let mut st = Stream { toks, pos: 0 };
        match section {
            Section::Preamble | Section::End => {
                saw_end |= section == Section::End;
                if !st.done() {
                    return st.err("unexpected content outside a section");
                }
            }
            Section::Objective => {
                if let (Some(Tok::Ident(_)), Some(Tok::Colon)) = (st.peek(), st.peek2()) {
                    st.next();
                    st.next();
                }
                let (expr, constant) = parse_terms(&mut st, &mut b)?;
                if constant != 0.0 {
                    return st.err("objective constants are not supported");
                }
                if !st.done() {
                    return st.err("trailing tokens after the objective");
                }
                b.model.objective = expr;
            }
            Section::Constraints => {
                while !st.done() {
                    let name = match (st.next(), st.next()) {
                        (Some(Tok::Ident(name)), Some(Tok::Colon)) => name,
                        _ => return st.err("every row needs a name"),
                    };
                    let family = match Family::from_row_name(&name) {
                        Some(f) => f,
                        None => return st.err(format!("row {name} has no constraint family")),
                    };
                    let (expr, constant) = parse_terms(&mut st, &mut b)?;
                    let relation = match st.next() {
                        Some(Tok::Rel(r)) => r,
                        other => return st.err(format!("row {name}: expected relation, found {other:?}")),
                    };
                    let rhs = parse_signed_num(&mut st)? - constant;
                    b.model.constraints.push(Row {
                        name,
                        family,
                        expr,
                        relation,
                        rhs,
                    });
                }
            }
            Section::Bounds => {
                while !st.done() {
                    match st.peek().cloned() {
                        Some(Tok::Ident(name)) => {
                            st.next();
                            let v = b.var(&name);
                            bounded.push(v);
                            match st.next() {
                                Some(Tok::Ident(w)) if w.eq_ignore_ascii_case("free") => {
                                    b.model.variables[v].lower = f64::NEG_INFINITY;
                                    b.model.variables[v].upper = f64::INFINITY;
                                }
                                Some(Tok::Rel(rel)) => {
                                    let x = parse_signed_num(&mut st)?;
                                    let var = &mut b.model.variables[v];
                                    match rel {
                                        Relation::Ge => var.lower = x,
                                        Relation::Le => var.upper = x,
                                        Relation::Eq => {
                                            var.lower = x;
                                            var.upper = x;
                                        }
                                    }
                                }
                                other => return st.err(format!("bad bound for {name}: {other:?}")),
                            }
                        }
                        Some(_) => {
                            let lo = parse_signed_num(&mut st)?;
                            let Some(Tok::Rel(Relation::Le)) = st.next() else {
                                return st.err("expected <= in a double bound");
                            };
                            let Some(Tok::Ident(name)) = st.next() else {
                                return st.err("expected a variable in a double bound");
                            };
                            let v = b.var(&name);
                            bounded.push(v);
                            b.model.variables[v].lower = lo;
                            if let Some(Tok::Rel(Relation::Le)) = st.peek() {
                                st.next();
                                b.model.variables[v].upper = parse_signed_num(&mut st)?;
                            }
                        }
                        None => break,
                    }
                }
            }
            Section::Binaries | Section::Generals => {
                let kind = if section == Section::Binaries {
                    VarKind::Binary
                } else {
                    VarKind::Integer
                };
                while let Some(tok) = st.next() {
                    let Tok::Ident(name) = tok else {
                        return st.err("expected variable names");
                    };
                    let v = b.var(&name);
                    kinds.push((v, kind));
                }
            }
        }
    }
    if !saw_end {
        return Err(LpError::Parse {
            line: text.lines().count(),
            msg: "missing End".into(),
        });
    }

    for (v, kind) in kinds {
        let var = &mut b.model.variables[v];
        var.kind = kind;
        if kind == VarKind::Binary && !bounded.contains(&v) {
            var.lower = 0.0;
            var.upper = 1.0;
        }
    }

    // Declaration order follows the Bounds section; anything else keeps its
    // first appearance.
    let mut order: Vec<usize> = Vec::with_capacity(b.model.variables.len());
    let mut seen = vec![false; b.model.variables.len()];
    for v in bounded.into_iter().chain(0..b.model.variables.len()) {
        if !seen[v] {
            seen[v] = true;
            order.push(v);
        }
    }
    let mut remap = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let mut model = b.model;
    model.variables = order.iter().map(|&old| model.variables[old].clone()).collect();
    let fix = |e: &mut LinExpr| {
        for term in &mut e.terms {
            term.0 = remap[term.0];
        }
    };
    fix(&mut model.objective);
    for row in &mut model.constraints {
        fix(&mut row.expr);
    }
    Ok(model)
}
