use std::sync::Arc;

use super::{Expr, ExprError, Func, Symbols};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let Some(&c) = bytes.get(start) else {
            return Ok((Tok::End, start));
        };
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((t, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start).map(|v| (Tok::Num(v), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Tok::Ident(self.src[start..end].to_string()), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ExprError::Syntax { offset: start, message: format!("unexpected character `{ch}`") })
    }

    // digits [ "." digits ] [ ("e"|"E") ["+"|"-"] digits ]
    fn number(&mut self, start: usize) -> Result<f64, ExprError> {
        let bytes = self.src.as_bytes();
        let mut end = start;
        let digits = |mut i: usize| {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            i
        };
        end = digits(end);
        let int_len = end - start;
        let mut frac_len = 0;
        if end < bytes.len() && bytes[end] == b'.' {
            let after = digits(end + 1);
            frac_len = after - end - 1;
            end = after;
        }
        if int_len == 0 && frac_len == 0 {
            return Err(ExprError::Syntax { offset: start, message: "malformed number".into() });
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            let after = digits(k);
            if after == k {
                return Err(ExprError::Syntax { offset: end, message: "exponent has no digits".into() });
            }
            end = after;
        }
        self.pos = end;
        self.src[start..end].parse::<f64>().map_err(|e| ExprError::Syntax { offset: start, message: e.to_string() })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
    symbols: &'a Symbols,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ExprError> {
        let (t, at) = self.lexer.next()?;
        self.tok = t;
        self.at = at;
        Ok(())
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ExprError> {
        if self.tok != want {
            return Err(self.unexpected(what));
        }
        self.bump()
    }

    fn unexpected(&self, what: &str) -> ExprError {
        let found = match &self.tok {
            Tok::End => "end of input".to_string(),
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            other => format!("{other:?}"),
        };
        ExprError::Syntax { offset: self.at, message: format!("expected {what}, found {found}") }
    }

    // expr := term (("+"|"-") term)*
    fn expr(&mut self) -> Result<Arc<Expr>, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let ctor: fn(Arc<Expr>, Arc<Expr>) -> Expr = match self.tok {
                Tok::Plus => Expr::Add,
                Tok::Minus => Expr::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Arc::new(ctor(lhs, rhs));
        }
    }

    // term := factor (("*"|"/") factor)*
    fn term(&mut self) -> Result<Arc<Expr>, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let ctor: fn(Arc<Expr>, Arc<Expr>) -> Expr = match self.tok {
                Tok::Star => Expr::Mul,
                Tok::Slash => Expr::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.factor()?;
            lhs = Arc::new(ctor(lhs, rhs));
        }
    }

    // factor := "-" factor | power
    fn factor(&mut self) -> Result<Arc<Expr>, ExprError> {
        if self.tok == Tok::Minus {
            self.bump()?;
            return Ok(Arc::new(Expr::Neg(self.factor()?)));
        }
        self.power()
    }

    // power := atom ("^" factor)?
    fn power(&mut self) -> Result<Arc<Expr>, ExprError> {
        let base = self.atom()?;
        if self.tok == Tok::Caret {
            self.bump()?;
            let exp = self.factor()?;
            return Ok(Arc::new(Expr::Pow(base, exp)));
        }
        Ok(base)
    }

    // atom := number | symbol | func "(" expr ")" | "(" expr ")"
    fn atom(&mut self) -> Result<Arc<Expr>, ExprError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::num(v))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.at;
                self.bump()?;
                if self.tok == Tok::LParen {
                    let func = Func::from_name(&name).ok_or(ExprError::UnknownFunction { name: name.clone(), offset: at })?;
                    self.bump()?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Arc::new(Expr::Call(func, arg)));
                }
                if Func::from_name(&name).is_some() {
                    return Err(ExprError::Syntax { offset: self.at, message: format!("function `{name}` must be followed by `(`") });
                }
                if name == "pi" {
                    return Ok(Arc::new(Expr::Pi));
                }
                if let Some(k) = self.symbols.index_of(&name) {
                    return Ok(Expr::var(k));
                }
                Err(ExprError::UnknownSymbol { name, offset: at })
            }
            _ => Err(self.unexpected("a number, symbol, function call or `(`")),
        }
    }
}

/// Parses `text` against the declared coordinate `symbols`.
///
/// Precedence from tightest: `^` (right-associative), unary minus, `* /`,
/// `+ -` (both left-associative). `pi` is reserved.
pub fn parse(text: &str, symbols: &Symbols) -> Result<Arc<Expr>, ExprError> {
    let mut p = Parser { lexer: Lexer { src: text, pos: 0 }, tok: Tok::End, at: 0, symbols };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}
