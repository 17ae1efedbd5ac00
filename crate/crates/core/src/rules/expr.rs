//! Condition and formula expressions used by rule documents.
//!
//! Conditions: `or` / `and` / `not`, parentheses, and comparison chains such
//! as `0 < max_mem_usage <= 0.55`. Operands are numbers, quoted strings,
//! metric names, parameter names, or `ifnull(name, default)`. Formulas are
//! arithmetic over parameter names and numbers.

use std::fmt;

use thiserror::Error;

use crate::metrics::{metric_index, RuntimeMetrics};
use crate::space::{Configuration, ParamValue, SearchSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("unexpected character `{0}` at offset {1}")]
    Lex(char, usize),
    #[error("unterminated string literal")]
    UnterminatedString,
    #[error("expected {expected}, found {found}")]
    Syntax { expected: String, found: String },
    #[error("unknown metric or parameter `{0}`")]
    UnknownName(String),
    #[error("`{0}` has no value in the configuration")]
    Unresolved(String),
    #[error("cannot compare {0} with {1}")]
    TypeMismatch(String, String),
    #[error("`{0}` is not numeric")]
    NotNumeric(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Str(String),
    LParen,
    RParen,
    Comma,
    Cmp(Comparator),
    Plus,
    Minus,
    Star,
    Slash,
    And,
    Or,
    Not,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Number(n) => write!(f, "number {n}"),
            Token::Ident(s) => write!(f, "`{s}`"),
            Token::Str(s) => write!(f, "'{s}'"),
            Token::LParen => f.write_str("`(`"),
            Token::RParen => f.write_str("`)`"),
            Token::Comma => f.write_str("`,`"),
            Token::Cmp(c) => write!(f, "`{c}`"),
            Token::Plus => f.write_str("`+`"),
            Token::Minus => f.write_str("`-`"),
            Token::Star => f.write_str("`*`"),
            Token::Slash => f.write_str("`/`"),
            Token::And => f.write_str("`and`"),
            Token::Or => f.write_str("`or`"),
            Token::Not => f.write_str("`not`"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        let next = chars.get(i + 1).map(|p| p.1);
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => { out.push(Token::LParen); i += 1 }
            ')' => { out.push(Token::RParen); i += 1 }
            ',' => { out.push(Token::Comma); i += 1 }
            '+' => { out.push(Token::Plus); i += 1 }
            '-' => { out.push(Token::Minus); i += 1 }
            '*' => { out.push(Token::Star); i += 1 }
            '/' => { out.push(Token::Slash); i += 1 }
            '≤' => { out.push(Token::Cmp(Comparator::Le)); i += 1 }
            '≥' => { out.push(Token::Cmp(Comparator::Ge)); i += 1 }
            '≠' => { out.push(Token::Cmp(Comparator::Ne)); i += 1 }
            '<' | '>' | '=' | '!' => {
                let (cmp, width) = match (c, next) {
                    ('<', Some('=')) => (Comparator::Le, 2),
                    ('>', Some('=')) => (Comparator::Ge, 2),
                    ('!', Some('=')) | ('<', Some('>')) => (Comparator::Ne, 2),
                    ('=', Some('=')) => (Comparator::Eq, 2),
                    ('<', _) => (Comparator::Lt, 1),
                    ('>', _) => (Comparator::Gt, 1),
                    ('=', _) => (Comparator::Eq, 1),
                    _ => return Err(ExprError::Lex(c, pos)),
                };
                out.push(Token::Cmp(cmp));
                i += width;
            }
            '\'' | '"' => {
                let quote = c;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(ExprError::UnterminatedString),
                        Some((_, ch)) if *ch == quote => break,
                        Some((_, ch)) => s.push(*ch),
                    }
                    i += 1;
                }
                i += 1;
                out.push(Token::Str(s));
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                    i += 1;
                }
                if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && matches!(chars[j].1, '+' | '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].1.is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].1.is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().map(|p| p.1).collect();
                let n = text.parse().map_err(|_| ExprError::Lex(c, pos))?;
                out.push(Token::Number(n));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].1.is_alphanumeric() || matches!(chars[i].1, '_' | '.')) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().map(|p| p.1).collect();
                out.push(match word.to_ascii_lowercase().as_str() {
                    "and" => Token::And,
                    "or" => Token::Or,
                    "not" => Token::Not,
                    _ => Token::Ident(word),
                });
            }
            _ => return Err(ExprError::Lex(c, pos)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
        })
    }
}

impl Comparator {
    fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Comparator::Lt => ord == Less,
            Comparator::Le => ord != Greater,
            Comparator::Eq => ord == Equal,
            Comparator::Ne => ord != Equal,
            Comparator::Ge => ord != Less,
            Comparator::Gt => ord == Greater,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Literal(Literal),
    Metric(usize),
    Param(String),
    /// Parameter value, or the default when the configuration lacks it.
    IfNull(String, Literal),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Compare { left: Operand, op: Comparator, right: Operand },
    And(Vec<Condition>),
    Or(Vec<Condition>),
    Not(Box<Condition>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Const(f64),
    Param(String),
    Neg(Box<Formula>),
    Binary(Box<Formula>, ArithOp, Box<Formula>),
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    space: &'a SearchSpace,
}

impl<'a> Parser<'a> {
    fn new(src: &str, space: &'a SearchSpace) -> Result<Self, ExprError> {
        Ok(Parser { tokens: lex(src)?, pos: 0, space })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn found(&self) -> String {
        self.peek().map_or_else(|| "end of input".to_string(), |t| t.to_string())
    }

    fn expect(&mut self, want: Token, label: &str) -> Result<(), ExprError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ExprError::Syntax { expected: label.into(), found: self.found() })
        }
    }

    fn finish(&self) -> Result<(), ExprError> {
        if self.pos < self.tokens.len() {
            return Err(ExprError::Syntax { expected: "end of input".into(), found: self.found() });
        }
        Ok(())
    }

    fn condition(&mut self) -> Result<Condition, ExprError> {
        let mut terms = vec![self.conjunction()?];
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            terms.push(self.conjunction()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Condition::Or(terms) })
    }

    fn conjunction(&mut self) -> Result<Condition, ExprError> {
        let mut terms = vec![self.unary()?];
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            terms.push(self.unary()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Condition::And(terms) })
    }

    fn unary(&mut self) -> Result<Condition, ExprError> {
        match self.peek() {
            Some(Token::Not) => {
                self.pos += 1;
                Ok(Condition::Not(Box::new(self.unary()?)))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let c = self.condition()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(c)
            }
            _ => self.comparison(),
        }
    }

    fn comparison(&mut self) -> Result<Condition, ExprError> {
        let mut left = self.operand()?;
        let mut atoms = Vec::new();
        while let Some(Token::Cmp(op)) = self.peek().cloned() {
            self.pos += 1;
            let right = self.operand()?;
            atoms.push(Condition::Compare { left, op, right: right.clone() });
            left = right;
        }
        match atoms.len() {
            0 => Err(ExprError::Syntax { expected: "comparison operator".into(), found: self.found() }),
            1 => Ok(atoms.pop().unwrap()),
            _ => Ok(Condition::And(atoms)),
        }
    }

    fn literal(&mut self) -> Result<Literal, ExprError> {
        match self.bump() {
            Some(Token::Number(n)) => Ok(Literal::Number(n)),
            Some(Token::Minus) => match self.bump() {
                Some(Token::Number(n)) => Ok(Literal::Number(-n)),
                _ => {
                    self.pos -= 1;
                    Err(ExprError::Syntax { expected: "number".into(), found: self.found() })
                }
            },
            Some(Token::Str(s)) => Ok(Literal::Text(s)),
            _ => {
                self.pos -= 1;
                Err(ExprError::Syntax { expected: "literal".into(), found: self.found() })
            }
        }
    }

    fn operand(&mut self) -> Result<Operand, ExprError> {
        match self.peek().cloned() {
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if name.eq_ignore_ascii_case("ifnull") && self.peek() == Some(&Token::LParen) {
                    self.pos += 1;
                    let target = match self.bump() {
                        Some(Token::Ident(n)) => n,
                        _ => {
                            self.pos -= 1;
                            return Err(ExprError::Syntax { expected: "parameter name".into(), found: self.found() });
                        }
                    };
                    self.expect(Token::Comma, "`,`")?;
                    let default = self.literal()?;
                    self.expect(Token::RParen, "`)`")?;
                    return Ok(Operand::IfNull(target, default));
                }
                self.resolve(name)
            }
            _ => Ok(Operand::Literal(self.literal()?)),
        }
    }

    fn resolve(&self, name: String) -> Result<Operand, ExprError> {
        if let Some(i) = metric_index(&name) {
            Ok(Operand::Metric(i))
        } else if self.space.param(&name).is_some() {
            Ok(Operand::Param(name))
        } else {
            Err(ExprError::UnknownName(name))
        }
    }

    fn sum(&mut self) -> Result<Formula, ExprError> {
        let mut acc = self.product()?;
        loop {
            let op = match self.peek() {
                Some(Token::Plus) => ArithOp::Add,
                Some(Token::Minus) => ArithOp::Sub,
                _ => return Ok(acc),
            };
            self.pos += 1;
            acc = Formula::Binary(Box::new(acc), op, Box::new(self.product()?));
        }
    }

    fn product(&mut self) -> Result<Formula, ExprError> {
        let mut acc = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(Token::Star) => ArithOp::Mul,
                Some(Token::Slash) => ArithOp::Div,
                _ => return Ok(acc),
            };
            self.pos += 1;
            acc = Formula::Binary(Box::new(acc), op, Box::new(self.factor()?));
        }
    }

    fn factor(&mut self) -> Result<Formula, ExprError> {
        match self.bump() {
            Some(Token::Number(n)) => Ok(Formula::Const(n)),
            Some(Token::Minus) => Ok(Formula::Neg(Box::new(self.factor()?))),
            Some(Token::LParen) => {
                let f = self.sum()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(f)
            }
            Some(Token::Ident(name)) => match self.space.param(&name) {
                Some(p) if numeric_param(p) => Ok(Formula::Param(name)),
                Some(_) => Err(ExprError::NotNumeric(name)),
                None => Err(ExprError::UnknownName(name)),
            },
            _ => {
                self.pos -= 1;
                Err(ExprError::Syntax { expected: "number, parameter or `(`".into(), found: self.found() })
            }
        }
    }
}

fn numeric_param(p: &crate::space::ParameterDef) -> bool {
    match &p.domain {
        crate::space::Domain::Categorical { choices } => choices.iter().all(|c| c.as_f64().is_some()),
        _ => true,
    }
}

pub fn parse_condition(src: &str, space: &SearchSpace) -> Result<Condition, ExprError> {
    let mut p = Parser::new(src, space)?;
    let c = p.condition()?;
    p.finish()?;
    Ok(c)
}

pub fn parse_formula(src: &str, space: &SearchSpace) -> Result<Formula, ExprError> {
    let mut p = Parser::new(src, space)?;
    let f = p.sum()?;
    p.finish()?;
    Ok(f)
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64),
    Text(String),
}

impl Value {
    fn describe(&self) -> String {
        match self {
            Value::Num(n) => n.to_string(),
            Value::Text(s) => format!("'{s}'"),
        }
    }
}

impl From<&Literal> for Value {
    fn from(l: &Literal) -> Self {
        match l {
            Literal::Number(n) => Value::Num(*n),
            Literal::Text(s) => Value::Text(s.clone()),
        }
    }
}

impl From<&ParamValue> for Value {
    fn from(v: &ParamValue) -> Self {
        match v {
            ParamValue::Number(n) => Value::Num(*n),
            ParamValue::Text(s) => Value::Text(s.clone()),
        }
    }
}

fn operand_value(op: &Operand, metrics: &RuntimeMetrics, config: &Configuration) -> Result<Value, ExprError> {
    match op {
        Operand::Literal(l) => Ok(l.into()),
        Operand::Metric(i) => Ok(Value::Num(metrics.as_array()[*i])),
        Operand::Param(name) => config
            .get(name)
            .map(Value::from)
            .ok_or_else(|| ExprError::Unresolved(name.clone())),
        Operand::IfNull(name, default) => Ok(config.get(name).map_or_else(|| default.into(), Value::from)),
    }
}

fn compare(a: &Value, b: &Value, op: Comparator) -> Result<bool, ExprError> {
    let as_num = |v: &Value| match v {
        Value::Num(n) => Some(*n),
        Value::Text(s) => s.trim().parse::<f64>().ok(),
    };
    if let (Value::Text(x), Value::Text(y)) = (a, b) {
        return Ok(op.holds(x.cmp(y)));
    }
    match (as_num(a), as_num(b)) {
        (Some(x), Some(y)) => Ok(x.partial_cmp(&y).map_or(op == Comparator::Ne, |o| op.holds(o))),
        _ => match op {
            Comparator::Eq => Ok(false),
            Comparator::Ne => Ok(true),
            _ => Err(ExprError::TypeMismatch(a.describe(), b.describe())),
        },
    }
}

pub fn eval_condition(cond: &Condition, metrics: &RuntimeMetrics, config: &Configuration) -> Result<bool, ExprError> {
    match cond {
        Condition::Compare { left, op, right } => {
            compare(&operand_value(left, metrics, config)?, &operand_value(right, metrics, config)?, *op)
        }
        Condition::And(parts) => {
            for p in parts {
                if !eval_condition(p, metrics, config)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Condition::Or(parts) => {
            for p in parts {
                if eval_condition(p, metrics, config)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Condition::Not(inner) => Ok(!eval_condition(inner, metrics, config)?),
    }
}

pub fn eval_formula(f: &Formula, config: &Configuration) -> Result<f64, ExprError> {
    Ok(match f {
        Formula::Const(c) => *c,
        Formula::Param(name) => config
            .get(name)
            .ok_or_else(|| ExprError::Unresolved(name.clone()))?
            .as_f64()
            .ok_or_else(|| ExprError::NotNumeric(name.clone()))?,
        Formula::Neg(inner) => -eval_formula(inner, config)?,
        Formula::Binary(a, op, b) => {
            let (x, y) = (eval_formula(a, config)?, eval_formula(b, config)?);
            match op {
                ArithOp::Add => x + y,
                ArithOp::Sub => x - y,
                ArithOp::Mul => x * y,
                ArithOp::Div => x / y,
            }
        }
    })
}

/// Parameter names a condition reads (including `ifnull` targets).
pub fn referenced_params(cond: &Condition, out: &mut Vec<String>) {
    let mut push = |op: &Operand| match op {
        Operand::Param(n) | Operand::IfNull(n, _) => out.push(n.clone()),
        _ => {}
    };
    match cond {
        Condition::Compare { left, right, .. } => {
            push(left);
            push(right);
        }
        Condition::And(parts) | Condition::Or(parts) => parts.iter().for_each(|p| referenced_params(p, out)),
        Condition::Not(inner) => referenced_params(inner, out),
    }
}
