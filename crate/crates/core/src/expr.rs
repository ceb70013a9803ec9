//! Expression language used in projections, predicates, and channel
//! mappings: attribute references, literals, arithmetic with `ceil`/`floor`,
//! comparisons, boolean connectives, and format strings with embedded
//! attribute references (`f"{T.id}={S.id}"`).

use std::fmt;

use thiserror::Error;

use crate::value::{DomainKind, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("expression syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("type mismatch: {0}")]
    Type(String),
    #[error("division by zero in row {row}")]
    DivisionByZero { row: usize },
    #[error("arithmetic overflow in row {row}")]
    Overflow { row: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Ceil,
    Floor,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FormatPart {
    Lit(String),
    Field { table: Option<String>, name: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Attr { table: Option<String>, name: String },
    IntLit(i64),
    RealLit(f64),
    TextLit(String),
    BoolLit(bool),
    Neg(Box<Expression>),
    Not(Box<Expression>),
    Binary {
        op: BinOp,
        lhs: Box<Expression>,
        rhs: Box<Expression>,
    },
    Call {
        func: Func,
        arg: Box<Expression>,
    },
    Format(Vec<FormatPart>),
}

/// Scalar type of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprType {
    Int,
    Real,
    Text,
    Bool,
}

impl From<DomainKind> for ExprType {
    fn from(k: DomainKind) -> Self {
        match k {
            DomainKind::Integer => ExprType::Int,
            DomainKind::Real => ExprType::Real,
            DomainKind::Text => ExprType::Text,
            DomainKind::Boolean => ExprType::Bool,
        }
    }
}

impl fmt::Display for ExprType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExprType::Int => "integer",
            ExprType::Real => "real",
            ExprType::Text => "text",
            ExprType::Bool => "boolean",
        };
        f.write_str(s)
    }
}

/// Column resolution context: the names an expression may reference, with
/// their kinds. Qualified columns are stored as `"table.attr"`.
#[derive(Debug, Clone, Default)]
pub struct RowSchema {
    cols: Vec<(String, DomainKind)>,
}

impl RowSchema {
    pub fn new(cols: Vec<(String, DomainKind)>) -> RowSchema {
        RowSchema { cols }
    }

    pub fn push(&mut self, name: impl Into<String>, kind: DomainKind) {
        self.cols.push((name.into(), kind));
    }

    /// Resolve a possibly-qualified reference to its column index.
    /// Unqualified names match a bare column; qualified names match only the
    /// `"table.attr"` form, so a wrong qualifier does not silently resolve.
    pub fn resolve(&self, table: Option<&str>, name: &str) -> Option<(usize, DomainKind)> {
        let wanted = match table {
            Some(t) => format!("{t}.{name}"),
            None => name.to_string(),
        };
        self.cols
            .iter()
            .position(|(c, _)| *c == wanted)
            .map(|i| (i, self.cols[i].1))
    }
}

fn display_name(table: &Option<String>, name: &str) -> String {
    match table {
        Some(t) => format!("{t}.{name}"),
        None => name.to_string(),
    }
}

impl Expression {
    /// Attribute references appearing anywhere in the expression, including
    /// inside format strings.
    pub fn references(&self) -> Vec<(Option<String>, String)> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs(&self, out: &mut Vec<(Option<String>, String)>) {
        match self {
            Expression::Attr { table, name } => out.push((table.clone(), name.clone())),
            Expression::Neg(e) | Expression::Not(e) => e.collect_refs(out),
            Expression::Binary { lhs, rhs, .. } => {
                lhs.collect_refs(out);
                rhs.collect_refs(out);
            }
            Expression::Call { arg, .. } => arg.collect_refs(out),
            Expression::Format(parts) => {
                for p in parts {
                    if let FormatPart::Field { table, name } = p {
                        out.push((table.clone(), name.clone()));
                    }
                }
            }
            _ => {}
        }
    }

    /// Whether the expression is a bare attribute reference.
    pub fn as_bare_attr(&self) -> Option<(Option<&str>, &str)> {
        match self {
            Expression::Attr { table, name } => Some((table.as_deref(), name.as_str())),
            _ => None,
        }
    }

    /// Type-check against a row schema.
    pub fn type_of(&self, schema: &RowSchema) -> Result<ExprType, ExprError> {
        match self {
            Expression::Attr { table, name } => schema
                .resolve(table.as_deref(), name)
                .map(|(_, k)| k.into())
                .ok_or_else(|| ExprError::UnknownAttribute(display_name(table, name))),
            Expression::IntLit(_) => Ok(ExprType::Int),
            Expression::RealLit(_) => Ok(ExprType::Real),
            Expression::TextLit(_) => Ok(ExprType::Text),
            Expression::BoolLit(_) => Ok(ExprType::Bool),
            Expression::Neg(e) => match e.type_of(schema)? {
                t @ (ExprType::Int | ExprType::Real) => Ok(t),
                t => Err(ExprError::Type(format!("cannot negate {t}"))),
            },
            Expression::Not(e) => match e.type_of(schema)? {
                ExprType::Bool => Ok(ExprType::Bool),
                t => Err(ExprError::Type(format!("`not` needs a boolean, got {t}"))),
            },
            Expression::Binary { op, lhs, rhs } => {
                let lt = lhs.type_of(schema)?;
                let rt = rhs.type_of(schema)?;
                let numeric =
                    |t: ExprType| matches!(t, ExprType::Int | ExprType::Real);
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul => {
                        if numeric(lt) && numeric(rt) {
                            if lt == ExprType::Int && rt == ExprType::Int {
                                Ok(ExprType::Int)
                            } else {
                                Ok(ExprType::Real)
                            }
                        } else {
                            Err(ExprError::Type(format!(
                                "`{}` needs numeric operands, got {lt} and {rt}",
                                op.symbol()
                            )))
                        }
                    }
                    BinOp::Div => {
                        if numeric(lt) && numeric(rt) {
                            Ok(ExprType::Real)
                        } else {
                            Err(ExprError::Type(format!(
                                "`/` needs numeric operands, got {lt} and {rt}"
                            )))
                        }
                    }
                    BinOp::Mod => {
                        if lt == ExprType::Int && rt == ExprType::Int {
                            Ok(ExprType::Int)
                        } else {
                            Err(ExprError::Type(format!(
                                "`%` needs integer operands, got {lt} and {rt}"
                            )))
                        }
                    }
                    BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        let comparable = lt == rt || (numeric(lt) && numeric(rt));
                        if comparable {
                            Ok(ExprType::Bool)
                        } else {
                            Err(ExprError::Type(format!(
                                "cannot compare {lt} with {rt}"
                            )))
                        }
                    }
                    BinOp::And | BinOp::Or => {
                        if lt == ExprType::Bool && rt == ExprType::Bool {
                            Ok(ExprType::Bool)
                        } else {
                            Err(ExprError::Type(format!(
                                "`{}` needs boolean operands, got {lt} and {rt}",
                                op.symbol()
                            )))
                        }
                    }
                }
            }
            Expression::Call { func: _, arg } => match arg.type_of(schema)? {
                ExprType::Int | ExprType::Real => Ok(ExprType::Int),
                t => Err(ExprError::Type(format!(
                    "ceil/floor need a numeric argument, got {t}"
                ))),
            },
            Expression::Format(parts) => {
                for p in parts {
                    if let FormatPart::Field { table, name } = p {
                        schema
                            .resolve(table.as_deref(), name)
                            .ok_or_else(|| ExprError::UnknownAttribute(display_name(table, name)))?;
                    }
                }
                Ok(ExprType::Text)
            }
        }
    }

    /// Evaluate over one row. `row_index` only labels errors.
    pub fn eval(
        &self,
        row: &[Value],
        schema: &RowSchema,
        row_index: usize,
    ) -> Result<Value, ExprError> {
        match self {
            Expression::Attr { table, name } => {
                let (i, _) = schema
                    .resolve(table.as_deref(), name)
                    .ok_or_else(|| ExprError::UnknownAttribute(display_name(table, name)))?;
                Ok(row[i].clone())
            }
            Expression::IntLit(i) => Ok(Value::Int(*i)),
            Expression::RealLit(r) => Ok(Value::Real(*r)),
            Expression::TextLit(s) => Ok(Value::Text(s.clone())),
            Expression::BoolLit(b) => Ok(Value::Bool(*b)),
            Expression::Neg(e) => match e.eval(row, schema, row_index)? {
                Value::Int(i) => i
                    .checked_neg()
                    .map(Value::Int)
                    .ok_or(ExprError::Overflow { row: row_index }),
                Value::Real(r) => Ok(Value::Real(-r)),
                v => Err(ExprError::Type(format!("cannot negate {v}"))),
            },
            Expression::Not(e) => match e.eval(row, schema, row_index)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                v => Err(ExprError::Type(format!("`not` needs a boolean, got {v}"))),
            },
            Expression::Binary { op, lhs, rhs } => {
                let l = lhs.eval(row, schema, row_index)?;
                let r = rhs.eval(row, schema, row_index)?;
                eval_binary(*op, l, r, row_index)
            }
            Expression::Call { func, arg } => {
                let v = arg.eval(row, schema, row_index)?;
                let r = match v {
                    Value::Int(i) => return Ok(Value::Int(i)),
                    Value::Real(r) => r,
                    v => return Err(ExprError::Type(format!("ceil/floor on {v}"))),
                };
                let rounded = match func {
                    Func::Ceil => r.ceil(),
                    Func::Floor => r.floor(),
                };
                if rounded.is_finite() && rounded.abs() <= i64::MAX as f64 {
                    Ok(Value::Int(rounded as i64))
                } else {
                    Err(ExprError::Overflow { row: row_index })
                }
            }
            Expression::Format(parts) => {
                let mut s = String::new();
                for p in parts {
                    match p {
                        FormatPart::Lit(text) => s.push_str(text),
                        FormatPart::Field { table, name } => {
                            let (i, _) = schema.resolve(table.as_deref(), name).ok_or_else(
                                || ExprError::UnknownAttribute(display_name(table, name)),
                            )?;
                            s.push_str(&row[i].to_string());
                        }
                    }
                }
                Ok(Value::Text(s))
            }
        }
    }
}

fn eval_binary(op: BinOp, l: Value, r: Value, row: usize) -> Result<Value, ExprError> {
    use BinOp::*;
    match op {
        Add | Sub | Mul => match (l, r) {
            (Value::Int(a), Value::Int(b)) => {
                let out = match op {
                    Add => a.checked_add(b),
                    Sub => a.checked_sub(b),
                    Mul => a.checked_mul(b),
                    _ => unreachable!(),
                };
                out.map(Value::Int).ok_or(ExprError::Overflow { row })
            }
            (l, r) => {
                let (a, b) = numeric_pair(l, r, op)?;
                let out = match op {
                    Add => a + b,
                    Sub => a - b,
                    Mul => a * b,
                    _ => unreachable!(),
                };
                finite(out, row)
            }
        },
        Div => {
            let (a, b) = numeric_pair(l, r, op)?;
            if b == 0.0 {
                return Err(ExprError::DivisionByZero { row });
            }
            finite(a / b, row)
        }
        Mod => match (l, r) {
            (Value::Int(a), Value::Int(b)) => {
                if b == 0 {
                    Err(ExprError::DivisionByZero { row })
                } else {
                    Ok(Value::Int(a.rem_euclid(b)))
                }
            }
            (l, r) => Err(ExprError::Type(format!("`%` needs integers, got {l} and {r}"))),
        },
        Eq | Ne | Lt | Le | Gt | Ge => {
            let ord = compare(&l, &r)?;
            let b = match op {
                Eq => ord == std::cmp::Ordering::Equal,
                Ne => ord != std::cmp::Ordering::Equal,
                Lt => ord == std::cmp::Ordering::Less,
                Le => ord != std::cmp::Ordering::Greater,
                Gt => ord == std::cmp::Ordering::Greater,
                Ge => ord != std::cmp::Ordering::Less,
                _ => unreachable!(),
            };
            Ok(Value::Bool(b))
        }
        And | Or => match (l, r) {
            (Value::Bool(a), Value::Bool(b)) => Ok(Value::Bool(match op {
                And => a && b,
                Or => a || b,
                _ => unreachable!(),
            })),
            (l, r) => Err(ExprError::Type(format!(
                "logical operator needs booleans, got {l} and {r}"
            ))),
        },
    }
}

fn numeric_pair(l: Value, r: Value, op: BinOp) -> Result<(f64, f64), ExprError> {
    match (l.as_f64(), r.as_f64()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(ExprError::Type(format!(
            "`{}` needs numeric operands, got {l} and {r}",
            op.symbol()
        ))),
    }
}

fn finite(v: f64, row: usize) -> Result<Value, ExprError> {
    if v.is_finite() {
        Ok(Value::Real(v))
    } else {
        Err(ExprError::Overflow { row })
    }
}

fn compare(l: &Value, r: &Value) -> Result<std::cmp::Ordering, ExprError> {
    match (l, r) {
        (Value::Int(a), Value::Real(b)) => Ok((*a as f64).total_cmp(b)),
        (Value::Real(a), Value::Int(b)) => Ok(a.total_cmp(&(*b as f64))),
        (a, b) if a.kind() == b.kind() => Ok(a.cmp(b)),
        (a, b) => Err(ExprError::Type(format!("cannot compare {a} with {b}"))),
    }
}

// ---------------------------------------------------------------------------
// Parsing

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Int(i64),
    Real(f64),
    Str(String),
    FStr(Vec<FormatPart>),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Dot,
    End,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next_token(&mut self) -> Result<Token, ExprError> {
        self.skip_ws();
        if self.pos >= self.bytes.len() {
            return Ok(Token::End);
        }
        let c = self.bytes[self.pos];
        match c {
            b'(' => {
                self.pos += 1;
                Ok(Token::LParen)
            }
            b')' => {
                self.pos += 1;
                Ok(Token::RParen)
            }
            b'.' => {
                self.pos += 1;
                Ok(Token::Dot)
            }
            b'+' | b'-' | b'*' | b'/' | b'%' => {
                self.pos += 1;
                let op = match c {
                    b'+' => "+",
                    b'-' => "-",
                    b'*' => "*",
                    b'/' => "/",
                    _ => "%",
                };
                Ok(Token::Op(op))
            }
            b'=' | b'!' | b'<' | b'>' => {
                let two = self.src.get(self.pos..self.pos + 2);
                let (op, len) = match (c, two) {
                    (_, Some("==")) => ("==", 2),
                    (_, Some("!=")) => ("!=", 2),
                    (_, Some("<=")) => ("<=", 2),
                    (_, Some(">=")) => (">=", 2),
                    (b'<', _) => ("<", 1),
                    (b'>', _) => (">", 1),
                    _ => return Err(self.error("expected comparison operator")),
                };
                self.pos += len;
                Ok(Token::Op(op))
            }
            b'"' => self.lex_string().map(Token::Str),
            b'0'..=b'9' => self.lex_number(),
            _ if c.is_ascii_alphabetic() || c == b'_' => {
                // f"..." is a format string; any other identifier is a name.
                if c == b'f' && self.bytes.get(self.pos + 1) == Some(&b'"') {
                    self.pos += 1;
                    let raw = self.lex_string()?;
                    return Ok(Token::FStr(parse_format(&raw, self.pos)?));
                }
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Ok(Token::Ident(self.src[start..self.pos].to_string()))
            }
            _ => Err(self.error(format!("unexpected character `{}`", c as char))),
        }
    }

    fn lex_string(&mut self) -> Result<String, ExprError> {
        debug_assert_eq!(self.bytes[self.pos], b'"');
        self.pos += 1;
        let mut out = String::new();
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            match c {
                b'"' => {
                    self.pos += 1;
                    return Ok(out);
                }
                b'\\' => {
                    self.pos += 1;
                    let esc = self
                        .bytes
                        .get(self.pos)
                        .ok_or_else(|| self.error("unterminated escape"))?;
                    let ch = match esc {
                        b'"' => '"',
                        b'\\' => '\\',
                        b'n' => '\n',
                        b't' => '\t',
                        b'{' => '{',
                        b'}' => '}',
                        _ => return Err(self.error("unknown escape")),
                    };
                    out.push(ch);
                    self.pos += 1;
                }
                _ => {
                    let ch = self.src[self.pos..].chars().next().unwrap();
                    out.push(ch);
                    self.pos += ch.len_utf8();
                }
            }
        }
        Err(self.error("unterminated string"))
    }

    fn lex_number(&mut self) -> Result<Token, ExprError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let mut is_real = false;
        if self.pos + 1 < self.bytes.len()
            && self.bytes[self.pos] == b'.'
            && self.bytes[self.pos + 1].is_ascii_digit()
        {
            is_real = true;
            self.pos += 1;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        let text = &self.src[start..self.pos];
        if is_real {
            text.parse::<f64>()
                .map(Token::Real)
                .map_err(|e| self.error(format!("bad number: {e}")))
        } else {
            text.parse::<i64>()
                .map(Token::Int)
                .map_err(|e| self.error(format!("bad number: {e}")))
        }
    }
}

/// Split a format-string body into literal and `{table.attr}` field parts.
fn parse_format(raw: &str, offset: usize) -> Result<Vec<FormatPart>, ExprError> {
    let mut parts = Vec::new();
    let mut lit = String::new();
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '{' {
            if !lit.is_empty() {
                parts.push(FormatPart::Lit(std::mem::take(&mut lit)));
            }
            let mut field = String::new();
            let mut closed = false;
            for c in chars.by_ref() {
                if c == '}' {
                    closed = true;
                    break;
                }
                field.push(c);
            }
            if !closed {
                return Err(ExprError::Syntax {
                    offset,
                    message: "unterminated `{` in format string".into(),
                });
            }
            let field = field.trim();
            if field.is_empty() {
                return Err(ExprError::Syntax {
                    offset,
                    message: "empty field in format string".into(),
                });
            }
            let (table, name) = match field.split_once('.') {
                Some((t, n)) => (Some(t.trim().to_string()), n.trim().to_string()),
                None => (None, field.to_string()),
            };
            parts.push(FormatPart::Field { table, name });
        } else {
            lit.push(c);
        }
    }
    if !lit.is_empty() {
        parts.push(FormatPart::Lit(lit));
    }
    Ok(parts)
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: Token,
}

/// Parse an expression from its textual form.
pub fn parse_expression(src: &str) -> Result<Expression, ExprError> {
    let mut lexer = Lexer::new(src);
    let current = lexer.next_token()?;
    let mut p = Parser { lexer, current };
    let e = p.parse_or()?;
    if p.current != Token::End {
        return Err(p.lexer.error("trailing input after expression"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn advance(&mut self) -> Result<Token, ExprError> {
        let next = self.lexer.next_token()?;
        Ok(std::mem::replace(&mut self.current, next))
    }

    fn expect(&mut self, tok: Token, what: &str) -> Result<(), ExprError> {
        if self.current == tok {
            self.advance()?;
            Ok(())
        } else {
            Err(self.lexer.error(format!("expected {what}")))
        }
    }

    fn parse_or(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.parse_and()?;
        while self.current == Token::Ident("or".into()) {
            self.advance()?;
            let rhs = self.parse_and()?;
            lhs = binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.parse_cmp()?;
        while self.current == Token::Ident("and".into()) {
            self.advance()?;
            let rhs = self.parse_cmp()?;
            lhs = binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_cmp(&mut self) -> Result<Expression, ExprError> {
        let lhs = self.parse_add()?;
        let op = match &self.current {
            Token::Op("==") => Some(BinOp::Eq),
            Token::Op("!=") => Some(BinOp::Ne),
            Token::Op("<") => Some(BinOp::Lt),
            Token::Op("<=") => Some(BinOp::Le),
            Token::Op(">") => Some(BinOp::Gt),
            Token::Op(">=") => Some(BinOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            self.advance()?;
            let rhs = self.parse_add()?;
            Ok(binary(op, lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn parse_add(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.parse_mul()?;
        loop {
            let op = match &self.current {
                Token::Op("+") => BinOp::Add,
                Token::Op("-") => BinOp::Sub,
                _ => break,
            };
            self.advance()?;
            let rhs = self.parse_mul()?;
            lhs = binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_mul(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match &self.current {
                Token::Op("*") => BinOp::Mul,
                Token::Op("/") => BinOp::Div,
                Token::Op("%") => BinOp::Mod,
                _ => break,
            };
            self.advance()?;
            let rhs = self.parse_unary()?;
            lhs = binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expression, ExprError> {
        match &self.current {
            Token::Op("-") => {
                self.advance()?;
                Ok(Expression::Neg(Box::new(self.parse_unary()?)))
            }
            Token::Ident(s) if s == "not" => {
                self.advance()?;
                Ok(Expression::Not(Box::new(self.parse_unary()?)))
            }
            _ => self.parse_primary(),
        }
    }

    fn parse_primary(&mut self) -> Result<Expression, ExprError> {
        match self.advance()? {
            Token::Int(i) => Ok(Expression::IntLit(i)),
            Token::Real(r) => Ok(Expression::RealLit(r)),
            Token::Str(s) => Ok(Expression::TextLit(s)),
            Token::FStr(parts) => Ok(Expression::Format(parts)),
            Token::LParen => {
                let e = self.parse_or()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(e)
            }
            Token::Ident(name) => match name.as_str() {
                "true" => Ok(Expression::BoolLit(true)),
                "false" => Ok(Expression::BoolLit(false)),
                "ceil" | "floor" => {
                    let func = if name == "ceil" { Func::Ceil } else { Func::Floor };
                    self.expect(Token::LParen, "`(`")?;
                    let arg = self.parse_or()?;
                    self.expect(Token::RParen, "`)`")?;
                    Ok(Expression::Call {
                        func,
                        arg: Box::new(arg),
                    })
                }
                _ => {
                    if self.current == Token::Dot {
                        self.advance()?;
                        match self.advance()? {
                            Token::Ident(attr) => Ok(Expression::Attr {
                                table: Some(name),
                                name: attr,
                            }),
                            _ => Err(self.lexer.error("expected attribute after `.`")),
                        }
                    } else {
                        Ok(Expression::Attr { table: None, name })
                    }
                }
            },
            Token::End => Err(self.lexer.error("unexpected end of expression")),
            _ => Err(self.lexer.error("unexpected token")),
        }
    }
}

fn binary(op: BinOp, lhs: Expression, rhs: Expression) -> Expression {
    Expression::Binary {
        op,
        lhs: Box::new(lhs),
        rhs: Box::new(rhs),
    }
}

// ---------------------------------------------------------------------------
// Canonical printing (inverse of parse_expression, up to whitespace)

impl Expression {
    fn precedence(&self) -> u8 {
        match self {
            Expression::Binary { op, .. } => op.precedence(),
            Expression::Neg(_) | Expression::Not(_) => 6,
            _ => 7,
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Attr { table, name } => match table {
                Some(t) => write!(f, "{t}.{name}"),
                None => f.write_str(name),
            },
            Expression::IntLit(i) => write!(f, "{i}"),
            Expression::RealLit(r) => {
                if r.fract() == 0.0 && r.is_finite() {
                    write!(f, "{r:.1}")
                } else {
                    write!(f, "{r}")
                }
            }
            Expression::TextLit(s) => write!(f, "\"{}\"", escape_str(s)),
            Expression::BoolLit(b) => write!(f, "{b}"),
            Expression::Neg(e) => {
                if e.precedence() < 6 {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            Expression::Not(e) => {
                if e.precedence() < 6 {
                    write!(f, "not ({e})")
                } else {
                    write!(f, "not {e}")
                }
            }
            Expression::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                if lhs.precedence() < p {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // Right operand needs parens at equal precedence: the
                // grammar is left-associative.
                if rhs.precedence() <= p {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
            Expression::Call { func, arg } => {
                let name = match func {
                    Func::Ceil => "ceil",
                    Func::Floor => "floor",
                };
                write!(f, "{name}({arg})")
            }
            Expression::Format(parts) => {
                f.write_str("f\"")?;
                for p in parts {
                    match p {
                        FormatPart::Lit(s) => {
                            f.write_str(&escape_str(s).replace('{', "\\{").replace('}', "\\}"))?
                        }
                        FormatPart::Field { table, name } => match table {
                            Some(t) => write!(f, "{{{t}.{name}}}")?,
                            None => write!(f, "{{{name}}}")?,
                        },
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

fn escape_str(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
