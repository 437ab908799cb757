//! Text forms of expressions and model files.
//!
//! Expressions use `Var.prop` references, `+ - * /` with the usual
//! precedence, unary minus, parentheses and `min(..)` / `max(..)`. A minus
//! directly in front of a numeric literal folds into a negative constant.
//!
//! A model file is line oriented:
//!
//! ```text
//! # comment
//! var B = battery.csv
//! power: 4*(M.voltage*M.current) <= B.voltage*B.current
//! B.cost + M.cost <= 1000
//! minimize cost: B.cost + M.cost
//! maximize: B.current
//! declare lhs power M.voltage monotone
//! ```
//!
//! Relations are `<=`, `>=` and `==`; `a >= b` is stored as `b <= a`.
//! Unnamed constraints are called `c1, c2, ..` and unnamed objectives
//! `f1, f2, ..`. `declare` asserts a polarity for one property in one
//! function (`lhs NAME`, `rhs NAME` or `objective NAME`).

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::consistency::{FunctionId, Polarity};
use crate::model::{
    Catalog, Constraint, Direction, Expr, ModelError, Objective, PropertyKey, Relation, SystemModel,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown property `{0}`")]
    UnknownProperty(PropertyKey),
    #[error(transparent)]
    Model(ModelError),
}

impl From<ModelError> for ParseError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::UnknownVariable(v) => ParseError::UnknownVariable(v),
            ModelError::UnknownProperty(k) => ParseError::UnknownProperty(k),
            other => ParseError::Model(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Dot,
    Comma,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(src: &str, line: usize, col0: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = col0 + i + 1;
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                continue;
            }
            '.' if !bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())
                || matches!(out.last(), Some((Tok::Ident(_), _))) =>
            {
                out.push((Tok::Dot, col));
                i += 1;
                continue;
            }
            ',' => out.push((Tok::Comma, col)),
            '(' => out.push((Tok::LParen, col)),
            ')' => out.push((Tok::RParen, col)),
            '+' => out.push((Tok::Plus, col)),
            '-' => out.push((Tok::Minus, col)),
            '*' => out.push((Tok::Star, col)),
            '/' => out.push((Tok::Slash, col)),
            _ if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| syntax(line, col, format!("bad number `{text}`")))?;
                out.push((Tok::Num(v), col));
                continue;
            }
            _ if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && ((bytes[i] as char).is_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), col));
                continue;
            }
            _ => return Err(syntax(line, col, format!("unexpected character `{c}`"))),
        }
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        syntax(self.line, self.col(), msg)
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = acc + self.term()?;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc = acc * self.unary()?;
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    acc = acc / self.unary()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            if let Some(Tok::Num(v)) = self.peek() {
                let v = *v;
                self.pos += 1;
                return Ok(Expr::Const(-v));
            }
            return Ok(-self.unary()?);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if (name == "min" || name == "max") && self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(if name == "min" {
                        Expr::Min(args)
                    } else {
                        Expr::Max(args)
                    });
                }
                self.expect(Tok::Dot, "`.` after variable name")?;
                match self.peek().cloned() {
                    Some(Tok::Ident(prop)) => {
                        self.pos += 1;
                        Ok(Expr::prop(name, prop))
                    }
                    _ => Err(self.err("expected property name")),
                }
            }
            Some(_) => Err(self.err("expected an operand")),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

fn parse_expr_at(src: &str, line: usize, col0: usize) -> Result<Expr, ParseError> {
    let toks = lex(src, line, col0)?;
    let mut p = Parser {
        toks,
        pos: 0,
        line,
        end_col: col0 + src.len() + 1,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

/// Parses one expression.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    parse_expr_at(src, 1, 0)
}

/// A parsed model file before catalogs are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSource {
    /// `(variable, catalog path)` in declaration order.
    pub variables: Vec<(String, String)>,
    pub constraints: Vec<Constraint>,
    pub objectives: Vec<Objective>,
    pub declarations: Vec<(FunctionId, PropertyKey, Polarity)>,
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    cs.next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && cs.all(|c| c.is_alphanumeric() || c == '_')
}

fn offset_in(outer: &str, inner: &str) -> usize {
    inner.as_ptr() as usize - outer.as_ptr() as usize
}

/// Splits a leading `name:` label off.
fn label(body: &str) -> (Option<&str>, &str, usize) {
    if let Some(i) = body.find(':') {
        let head = body[..i].trim();
        if is_ident(head) {
            return (Some(head), &body[i + 1..], i + 1);
        }
    }
    (None, body, 0)
}

fn find_relation(s: &str) -> Option<(usize, &'static str)> {
    ["<=", ">=", "=="]
        .into_iter()
        .filter_map(|op| s.find(op).map(|i| (i, op)))
        .min()
}

pub fn parse_model_source(text: &str) -> Result<ModelSource, ParseError> {
    let mut src = ModelSource {
        variables: Vec::new(),
        constraints: Vec::new(),
        objectives: Vec::new(),
        declarations: Vec::new(),
    };
    let mut pending_decls: Vec<(usize, String, String, String, String)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        let indent = content.len() - content.trim_start().len();
        let body = content.trim();
        if body.is_empty() {
            continue;
        }
        let (keyword, rest) = match body.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r),
            None => (body, ""),
        };
        let rest_col = indent + body.len() - rest.len();
        match keyword.trim_end_matches(':') {
            "var" => {
                let (name, path) = rest
                    .split_once('=')
                    .ok_or_else(|| syntax(line, rest_col + 1, "expected `var NAME = PATH`"))?;
                let name = name.trim();
                if !is_ident(name) {
                    return Err(syntax(
                        line,
                        rest_col + 1,
                        format!("bad variable name `{name}`"),
                    ));
                }
                src.variables
                    .push((name.to_string(), path.trim().to_string()));
            }
            kw @ ("minimize" | "maximize") => {
                let after = &body[kw.len()..];
                let (name, expr_src) = match after.trim_start().strip_prefix(':') {
                    Some(stripped) => (None, stripped),
                    None => match label(after) {
                        (Some(n), e, _) => (Some(n), e),
                        (None, ..) => {
                            return Err(syntax(line, indent + kw.len() + 1, "expected `:`"))
                        }
                    },
                };
                let expr = parse_expr_at(expr_src, line, indent + offset_in(body, expr_src))?;
                let name = name
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("f{}", src.objectives.len() + 1));
                src.objectives.push(Objective {
                    name,
                    expr,
                    direction: if kw == "minimize" {
                        Direction::Minimize
                    } else {
                        Direction::Maximize
                    },
                });
            }
            "declare" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let [role, fname, prop, pol] = parts[..] else {
                    return Err(syntax(
                        line,
                        rest_col + 1,
                        "expected `declare lhs|rhs|objective NAME Var.prop monotone|antitone|constant`",
                    ));
                };
                pending_decls.push((line, role.into(), fname.into(), prop.into(), pol.into()));
            }
            _ => {
                let (name, rel_src, off) = label(body);
                let (i, op) = find_relation(rel_src)
                    .ok_or_else(|| syntax(line, indent + 1, "expected a relation (<=, >=, ==)"))?;
                let lhs = parse_expr_at(&rel_src[..i], line, indent + off)?;
                let rhs = parse_expr_at(&rel_src[i + 2..], line, indent + off + i + 2)?;
                let name = name
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("c{}", src.constraints.len() + 1));
                src.constraints.push(match op {
                    "<=" => Constraint::less_eq(name, lhs, rhs),
                    ">=" => Constraint::less_eq(name, rhs, lhs),
                    _ => Constraint::equal(name, lhs, rhs),
                });
            }
        }
    }
    for (line, role, fname, prop, pol) in pending_decls {
        let function = match role.as_str() {
            "lhs" | "rhs" => {
                let i = src
                    .constraints
                    .iter()
                    .position(|c| c.name == fname)
                    .ok_or_else(|| syntax(line, 1, format!("no constraint named `{fname}`")))?;
                if role == "lhs" {
                    FunctionId::Lhs(i)
                } else {
                    FunctionId::Rhs(i)
                }
            }
            "objective" => FunctionId::Objective(
                src.objectives
                    .iter()
                    .position(|o| o.name == fname)
                    .ok_or_else(|| syntax(line, 1, format!("no objective named `{fname}`")))?,
            ),
            other => return Err(syntax(line, 1, format!("unknown function role `{other}`"))),
        };
        let key = match parse_expr(&prop) {
            Ok(Expr::Prop(k)) => k,
            _ => {
                return Err(syntax(
                    line,
                    1,
                    format!("expected `Var.prop`, got `{prop}`"),
                ))
            }
        };
        let polarity = match pol.as_str() {
            "monotone" => Polarity::Monotone,
            "antitone" => Polarity::Antitone,
            "constant" => Polarity::Constant,
            other => return Err(syntax(line, 1, format!("unknown polarity `{other}`"))),
        };
        src.declarations.push((function, key, polarity));
    }
    Ok(src)
}

impl ModelSource {
    /// Attaches catalogs (keyed by variable name) and validates.
    pub fn build(&self, catalogs: &HashMap<String, Catalog>) -> Result<SystemModel, ParseError> {
        let cats = self
            .variables
            .iter()
            .map(|(v, _)| {
                let mut c = catalogs
                    .get(v)
                    .cloned()
                    .ok_or_else(|| ParseError::UnknownVariable(v.clone()))?;
                c.variable = v.clone();
                Ok(c)
            })
            .collect::<Result<Vec<_>, ParseError>>()?;
        let mut m = SystemModel::new(cats, self.constraints.clone(), self.objectives.clone())?;
        for (f, k, p) in &self.declarations {
            m = m.with_declared_polarity(*f, k.clone(), *p)?;
        }
        Ok(m)
    }
}

/// Parses a model file whose catalogs are already loaded.
pub fn parse_model(
    text: &str,
    catalogs: &HashMap<String, Catalog>,
) -> Result<SystemModel, ParseError> {
    parse_model_source(text)?.build(catalogs)
}

/// Model text that parses back to the same constraints and objectives.
/// `paths` supplies the catalog path printed for each variable.
pub fn print_model(m: &SystemModel, paths: &dyn Fn(&str) -> String) -> String {
    let mut out = String::new();
    for v in m.variable_names() {
        let _ = writeln!(out, "var {v} = {}", paths(v));
    }
    for c in m.constraints() {
        let op = match c.relation {
            Relation::LessOrEqual => "<=",
            Relation::Equal => "==",
        };
        let _ = writeln!(out, "{}: {} {op} {}", c.name, c.lhs, c.rhs);
    }
    for o in m.objectives() {
        let kw = match o.direction {
            Direction::Minimize => "minimize",
            Direction::Maximize => "maximize",
        };
        let _ = writeln!(out, "{kw} {}: {}", o.name, o.expr);
    }
    for d in m.declared_polarities() {
        let (role, name) = match d.function {
            FunctionId::Lhs(i) => ("lhs", &m.constraints()[i].name),
            FunctionId::Rhs(i) => ("rhs", &m.constraints()[i].name),
            FunctionId::Objective(i) => ("objective", &m.objectives()[i].name),
        };
        let pol = match d.polarity {
            Polarity::Monotone => "monotone",
            Polarity::Antitone => "antitone",
            Polarity::Constant => "constant",
            Polarity::Mixed => continue,
        };
        let _ = writeln!(out, "declare {role} {name} {} {pol}", d.property);
    }
    out
}
