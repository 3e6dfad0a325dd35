//! Expression language.
//!
//! ```text
//! # comment
//! input a, b, c;          # optional; when present every free name must be listed
//! out = ~(a | b) ^ c;
//! _t  = a & b             # leading underscore: temporary, not an output
//! y   = _t | 1
//! ```
//!
//! Statements end with `;` or a newline. Precedence from tightest: `~`, `&`,
//! `^`, `|`. `~` applied directly to a parenthesised `|` or `&` produces a
//! NOR or NAND node.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Var(String),
    Const(bool),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
    Nor(Box<Expr>, Box<Expr>),
    Nand(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

impl Expr {
    pub fn new(kind: ExprKind, pos: Pos) -> Self {
        Expr { kind, pos }
    }

    /// Evaluates with `lookup` resolving variable names.
    pub fn eval(&self, lookup: &dyn Fn(&str) -> bool) -> bool {
        use ExprKind::*;
        match &self.kind {
            Var(n) => lookup(n),
            Const(b) => *b,
            Not(x) => !x.eval(lookup),
            And(a, b) => a.eval(lookup) & b.eval(lookup),
            Or(a, b) => a.eval(lookup) | b.eval(lookup),
            Xor(a, b) => a.eval(lookup) ^ b.eval(lookup),
            Nor(a, b) => !(a.eval(lookup) | b.eval(lookup)),
            Nand(a, b) => !(a.eval(lookup) & b.eval(lookup)),
        }
    }

    fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a str, Pos)) {
        use ExprKind::*;
        match &self.kind {
            Var(n) => f(n, self.pos),
            Const(_) => {}
            Not(x) => x.visit_vars(f),
            And(a, b) | Or(a, b) | Xor(a, b) | Nor(a, b) | Nand(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub name: String,
    pub expr: Expr,
    pub pos: Pos,
}

impl Statement {
    pub fn is_output(&self) -> bool {
        !self.name.starts_with('_')
    }
}

/// A parsed program: declared (or inferred) inputs and its statements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Source {
    pub inputs: Vec<String>,
    pub statements: Vec<Statement>,
}

impl Source {
    pub fn outputs(&self) -> impl Iterator<Item = &Statement> {
        self.statements.iter().filter(|s| s.is_output())
    }

    /// Output bits for one assignment of the inputs (in declaration order).
    pub fn eval(&self, inputs: &[bool]) -> Vec<bool> {
        let mut env: Vec<(&str, bool)> = self
            .inputs
            .iter()
            .map(String::as_str)
            .zip(inputs.iter().copied())
            .collect();
        let mut outs = Vec::new();
        for st in &self.statements {
            let v = {
                let env = &env;
                st.expr.eval(&|n| {
                    env.iter()
                        .rev()
                        .find(|(k, _)| *k == n)
                        .map(|(_, v)| *v)
                        .unwrap_or(false)
                })
            };
            env.push((&st.name, v));
            if st.is_output() {
                outs.push(v);
            }
        }
        outs
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(bool),
    Input,
    Tilde,
    Amp,
    Pipe,
    Caret,
    LParen,
    RParen,
    Eq,
    Semi,
    Comma,
    Newline,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(b) => write!(f, "`{}`", *b as u8),
            Tok::Input => f.write_str("`input`"),
            Tok::Tilde => f.write_str("`~`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Newline => f.write_str("end of line"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn syntax(pos: Pos, msg: impl Into<String>) -> Error {
    Error::Syntax {
        line: pos.line,
        col: pos.col,
        msg: msg.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>> {
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1, 1);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        let single = match c {
            '~' => Some(Tok::Tilde),
            '&' => Some(Tok::Amp),
            '|' => Some(Tok::Pipe),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '=' => Some(Tok::Eq),
            ';' => Some(Tok::Semi),
            ',' => Some(Tok::Comma),
            '0' => Some(Tok::Num(false)),
            '1' => Some(Tok::Num(true)),
            _ => None,
        };
        if let Some(t) = single {
            chars.next();
            col += 1;
            if matches!(t, Tok::Num(_)) && chars.peek().is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_') {
                return Err(syntax(pos, "only the constants 0 and 1 are allowed"));
            }
            toks.push((t, pos));
            continue;
        }
        match c {
            '\n' => {
                chars.next();
                toks.push((Tok::Newline, pos));
                line += 1;
                col = 1;
            }
            '#' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    chars.next();
                }
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                toks.push((if s == "input" { Tok::Input } else { Tok::Ident(s) }, pos));
            }
            other => return Err(syntax(pos, format!("unexpected character `{other}`"))),
        }
    }
    toks.push((Tok::Eof, Pos { line, col }));
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    /// Open parentheses; newlines are insignificant inside them.
    depth: usize,
    /// The last primary was a parenthesised group, so `~(a | b)` folds to a
    /// NOR while `~a | b` does not.
    last_paren: bool,
}

impl Parser {
    fn peek(&mut self) -> &(Tok, Pos) {
        if self.depth > 0 {
            while self.toks[self.at].0 == Tok::Newline {
                self.at += 1;
            }
        }
        &self.toks[self.at]
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.peek().clone();
        if t.0 != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn skip_blank(&mut self) {
        while matches!(self.toks[self.at].0, Tok::Newline | Tok::Semi) {
            self.at += 1;
        }
    }

    fn end_statement(&mut self) -> Result<()> {
        let (t, pos) = self.bump();
        match t {
            Tok::Semi | Tok::Newline | Tok::Eof => Ok(()),
            other => Err(syntax(pos, format!("expected `;` or end of line, found {other}"))),
        }
    }

    fn ident(&mut self) -> Result<(String, Pos)> {
        match self.bump() {
            (Tok::Ident(s), pos) => Ok((s, pos)),
            (other, pos) => Err(syntax(pos, format!("expected a name, found {other}"))),
        }
    }

    fn binary(
        &mut self,
        op: Tok,
        next: fn(&mut Self) -> Result<Expr>,
        make: fn(Box<Expr>, Box<Expr>) -> ExprKind,
    ) -> Result<Expr> {
        let mut lhs = next(self)?;
        while self.peek().0 == op {
            let (_, op_pos) = self.bump();
            if !starts_operand(&self.peek().0) {
                let found = self.peek().0.clone();
                return Err(syntax(op_pos, format!("missing operand after {op}, found {found}")));
            }
            let rhs = next(self)?;
            let pos = lhs.pos;
            lhs = Expr::new(make(Box::new(lhs), Box::new(rhs)), pos);
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr> {
        self.binary(Tok::Pipe, Self::xor, ExprKind::Or)
    }

    fn xor(&mut self) -> Result<Expr> {
        self.binary(Tok::Caret, Self::and, ExprKind::Xor)
    }

    fn and(&mut self) -> Result<Expr> {
        self.binary(Tok::Amp, Self::unary, ExprKind::And)
    }

    fn unary(&mut self) -> Result<Expr> {
        // iterative so long `~~~~x` chains do not recurse
        let mut nots = Vec::new();
        while self.peek().0 == Tok::Tilde {
            nots.push(self.bump().1);
        }
        if !nots.is_empty() && !starts_operand(&self.peek().0) {
            let found = self.peek().0.clone();
            return Err(syntax(*nots.last().unwrap(), format!("missing operand after `~`, found {found}")));
        }
        let mut e = self.primary()?;
        while let Some(pos) = nots.pop() {
            let parenthesised = std::mem::take(&mut self.last_paren);
            e = match e.kind {
                ExprKind::Or(a, b) if parenthesised => Expr::new(ExprKind::Nor(a, b), pos),
                ExprKind::And(a, b) if parenthesised => Expr::new(ExprKind::Nand(a, b), pos),
                kind => Expr::new(ExprKind::Not(Box::new(Expr { kind, pos: e.pos })), pos),
            };
        }
        self.last_paren = false;
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr> {
        self.last_paren = false;
        match self.bump() {
            (Tok::Ident(s), pos) => Ok(Expr::new(ExprKind::Var(s), pos)),
            (Tok::Num(b), pos) => Ok(Expr::new(ExprKind::Const(b), pos)),
            (Tok::LParen, pos) => {
                self.depth += 1;
                let inner = self.or()?;
                match self.bump() {
                    (Tok::RParen, _) => {}
                    (other, p) => {
                        return Err(syntax(p, format!("expected `)` to close {pos}, found {other}")))
                    }
                }
                self.depth -= 1;
                self.last_paren = true;
                Ok(inner)
            }
            (other, pos) => Err(syntax(pos, format!("expected an operand, found {other}"))),
        }
    }
}

fn starts_operand(t: &Tok) -> bool {
    matches!(t, Tok::Ident(_) | Tok::Num(_) | Tok::LParen | Tok::Tilde)
}

pub fn parse_program(text: &str) -> Result<Source> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
        depth: 0,
        last_paren: false,
    };
    p.program()
}

impl Parser {
    fn program(&mut self) -> Result<Source> {
        let p = self;
        let mut declared: Option<Vec<String>> = None;
        let mut statements = Vec::new();
        loop {
            p.skip_blank();
            let (tok, pos) = p.peek().clone();
            match tok {
                Tok::Eof => break,
                Tok::Input => {
                    p.bump();
                    if !statements.is_empty() {
                        return Err(syntax(pos, "`input` must precede all statements"));
                    }
                    let list = declared.get_or_insert_with(Vec::new);
                    loop {
                        let (name, npos) = p.ident()?;
                        if list.contains(&name) {
                            return Err(syntax(npos, format!("input `{name}` declared twice")));
                        }
                        list.push(name);
                        if p.peek().0 == Tok::Comma {
                            p.bump();
                        } else {
                            break;
                        }
                    }
                    p.end_statement()?;
                }
                Tok::Ident(_) => {
                    let (name, pos) = p.ident()?;
                    match p.bump() {
                        (Tok::Eq, _) => {}
                        (other, q) => return Err(syntax(q, format!("expected `=`, found {other}"))),
                    }
                    if !starts_operand(&p.peek().0) {
                        let (found, q) = p.peek().clone();
                        return Err(syntax(q, format!("expected an expression, found {found}")));
                    }
                    let expr = p.or()?;
                    p.end_statement()?;
                    statements.push(Statement { name, expr, pos });
                }
                other => return Err(syntax(pos, format!("expected a statement, found {other}"))),
            }
        }
        if statements.is_empty() {
            return Err(Error::Empty);
        }
        resolve(declared, statements)
    }
}

fn resolve(declared: Option<Vec<String>>, statements: Vec<Statement>) -> Result<Source> {
    let strict = declared.is_some();
    let mut inputs = declared.unwrap_or_default();
    let mut assigned: HashSet<&str> = HashSet::new();
    let mut err = None;
    for st in &statements {
        st.expr.visit_vars(&mut |name, pos| {
            if err.is_some() || assigned.contains(name) || inputs.iter().any(|i| i == name) {
                return;
            }
            if strict {
                err = Some(Error::Undeclared {
                    name: name.to_string(),
                    line: pos.line,
                    col: pos.col,
                });
            } else {
                inputs.push(name.to_string());
            }
        });
        if let Some(e) = err.take() {
            return Err(e);
        }
        if inputs.contains(&st.name) {
            return Err(syntax(st.pos, format!("`{}` is an input and cannot be assigned", st.name)));
        }
        if !assigned.insert(&st.name) {
            return Err(syntax(st.pos, format!("`{}` assigned twice", st.name)));
        }
    }
    if statements.iter().all(|s| !s.is_output()) {
        return Err(Error::Usage("program has no outputs (all names start with `_`)".into()));
    }
    Ok(Source { inputs, statements })
}
