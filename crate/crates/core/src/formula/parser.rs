use thiserror::Error;

use super::{BinaryOp, CellRef, Expr, FormulaAst, UnaryOp};
use crate::address::{column_index, MAX_ROW};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("formula parse error at {position}: expected {expected}")]
pub struct FormulaParseError {
    /// Character offset into the formula text.
    pub position: usize,
    pub expected: String,
}

/// Parses `=expr` into a tree. Input is case-insensitive.
pub fn parse_formula(text: &str) -> Result<FormulaAst, FormulaParseError> {
    let mut p = Parser { chars: text.chars().collect(), pos: 0 };
    if p.peek() != Some('=') {
        return Err(p.error("`=` at start of formula"));
    }
    p.pos += 1;
    let expr = p.comparison()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error("operator or end of formula"));
    }
    Ok(expr)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, expected: &str) -> FormulaParseError {
        FormulaParseError { position: self.pos, expected: expected.to_string() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn comparison(&mut self) -> Result<FormulaAst, FormulaParseError> {
        let mut left = self.concat()?;
        loop {
            self.skip_ws();
            let op = match (self.peek(), self.peek_at(1)) {
                (Some('<'), Some('=')) => (BinaryOp::Le, 2),
                (Some('<'), Some('>')) => (BinaryOp::Ne, 2),
                (Some('>'), Some('=')) => (BinaryOp::Ge, 2),
                (Some('<'), _) => (BinaryOp::Lt, 1),
                (Some('>'), _) => (BinaryOp::Gt, 1),
                (Some('='), _) => (BinaryOp::Eq, 1),
                _ => return Ok(left),
            };
            self.pos += op.1;
            let right = self.concat()?;
            left = Expr::Binary(op.0, Box::new(left), Box::new(right));
        }
    }

    fn concat(&mut self) -> Result<FormulaAst, FormulaParseError> {
        let mut left = self.additive()?;
        while self.eat('&') {
            let right = self.additive()?;
            left = Expr::Binary(BinaryOp::Concat, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<FormulaAst, FormulaParseError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = if self.eat('+') {
                BinaryOp::Add
            } else if self.eat('-') {
                BinaryOp::Sub
            } else {
                return Ok(left);
            };
            let right = self.multiplicative()?;
            left = Expr::Binary(op, Box::new(left), Box::new(right));
        }
    }

    fn multiplicative(&mut self) -> Result<FormulaAst, FormulaParseError> {
        let mut left = self.power()?;
        loop {
            let op = if self.eat('*') {
                BinaryOp::Mul
            } else if self.eat('/') {
                BinaryOp::Div
            } else {
                return Ok(left);
            };
            let right = self.power()?;
            left = Expr::Binary(op, Box::new(left), Box::new(right));
        }
    }

    // pow := unary ["^" pow]  (right-associative)
    fn power(&mut self) -> Result<FormulaAst, FormulaParseError> {
        let base = self.unary()?;
        if self.eat('^') {
            let exponent = self.power()?;
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<FormulaAst, FormulaParseError> {
        if self.eat('-') {
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return Ok(Expr::Unary(UnaryOp::Plus, Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<FormulaAst, FormulaParseError> {
        self.skip_ws();
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.comparison()?;
                if !self.eat(')') {
                    return Err(self.error("`)`"));
                }
                Ok(Expr::Paren(Box::new(inner)))
            }
            Some('"') => self.string(),
            Some(c) if c.is_ascii_digit() || (c == '.' && matches!(self.peek_at(1), Some(d) if d.is_ascii_digit())) => {
                self.number()
            }
            Some('\'') => {
                let sheet = self.quoted_sheet()?;
                self.reference(Some(sheet))
            }
            Some(c) if c.is_ascii_alphabetic() || c == '$' || c == '_' => self.word(),
            _ => Err(self.error("number, string, reference, function call or `(`")),
        }
    }

    fn string(&mut self) -> Result<FormulaAst, FormulaParseError> {
        self.pos += 1;
        let mut s = String::new();
        loop {
            match self.peek() {
                None => return Err(self.error("closing `\"`")),
                Some('"') if self.peek_at(1) == Some('"') => {
                    s.push('"');
                    self.pos += 2;
                }
                Some('"') => {
                    self.pos += 1;
                    return Ok(Expr::Text(s));
                }
                Some(c) => {
                    s.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn number(&mut self) -> Result<FormulaAst, FormulaParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some('.') {
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if !matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos = mark;
                return Err(self.error("exponent digits"));
            }
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        let literal: String = self.chars[start..self.pos].iter().collect();
        match literal.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Number(v)),
            _ => {
                self.pos = start;
                Err(self.error("finite number"))
            }
        }
    }

    fn quoted_sheet(&mut self) -> Result<String, FormulaParseError> {
        self.pos += 1;
        let mut name = String::new();
        loop {
            match self.peek() {
                None => return Err(self.error("closing `'`")),
                Some('\'') if self.peek_at(1) == Some('\'') => {
                    name.push('\'');
                    self.pos += 2;
                }
                Some('\'') => {
                    self.pos += 1;
                    break;
                }
                Some(c) => {
                    name.push(c);
                    self.pos += 1;
                }
            }
        }
        if name.is_empty() || self.peek() != Some('!') {
            return Err(self.error("`!` after sheet name"));
        }
        self.pos += 1;
        Ok(name)
    }

    fn read_word(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || matches!(c, '$' | '_' | '.')) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn word(&mut self) -> Result<FormulaAst, FormulaParseError> {
        let start = self.pos;
        let word = self.read_word();
        match self.peek() {
            Some('!') => {
                if word.contains('$') {
                    self.pos = start;
                    return Err(self.error("sheet name"));
                }
                self.pos += 1;
                self.reference(Some(word))
            }
            Some('(') => {
                if word.contains('$') || !word.starts_with(|c: char| c.is_ascii_alphabetic()) {
                    self.pos = start;
                    return Err(self.error("function name"));
                }
                self.pos += 1;
                self.call_args(word.to_ascii_uppercase())
            }
            _ => {
                if word.eq_ignore_ascii_case("TRUE") {
                    return Ok(Expr::Bool(true));
                }
                if word.eq_ignore_ascii_case("FALSE") {
                    return Ok(Expr::Bool(false));
                }
                self.pos = start;
                self.reference(None)
            }
        }
    }

    fn call_args(&mut self, name: String) -> Result<FormulaAst, FormulaParseError> {
        let mut args = Vec::new();
        if self.eat(')') {
            return Ok(Expr::Call(name, args));
        }
        loop {
            args.push(self.comparison()?);
            if self.eat(',') {
                continue;
            }
            if self.eat(')') {
                return Ok(Expr::Call(name, args));
            }
            return Err(self.error("`,` or `)`"));
        }
    }

    fn reference(&mut self, sheet: Option<String>) -> Result<FormulaAst, FormulaParseError> {
        let first = self.cell_ref(sheet)?;
        if self.peek() == Some(':') {
            self.pos += 1;
            let second = self.cell_ref(None)?;
            return Ok(Expr::Range(first, second));
        }
        Ok(Expr::Ref(first))
    }

    fn cell_ref(&mut self, sheet: Option<String>) -> Result<CellRef, FormulaParseError> {
        let start = self.pos;
        let word = self.read_word();
        let fail = |p: &mut Parser, what: &str| {
            p.pos = start;
            Err(p.error(what))
        };
        let bytes = word.as_bytes();
        let mut i = 0;
        let col_abs = bytes.first() == Some(&b'$');
        if col_abs {
            i += 1;
        }
        let letters_start = i;
        while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
            i += 1;
        }
        let letters = &word[letters_start..i];
        let row_abs = bytes.get(i) == Some(&b'$');
        if row_abs {
            i += 1;
        }
        let digits = &word[i..];
        if letters.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return fail(self, "cell reference");
        }
        let Some(col) = column_index(letters) else {
            return fail(self, "column within grid bounds");
        };
        let row = match digits.parse::<u64>() {
            Ok(r) if (1..=MAX_ROW as u64).contains(&r) => r as u32,
            _ => return fail(self, "row within grid bounds"),
        };
        Ok(CellRef { sheet, col, row, col_abs, row_abs })
    }
}
