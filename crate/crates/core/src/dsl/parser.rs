use std::collections::BTreeSet;

use super::ast::{Arg, Program, Span, Statement, Value};
use super::builtins::{Builtin, ParamKind};
use super::DslError;
use crate::sim::Approach;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Equals,
    Newline,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: Span,
}

fn perr(span: Span, message: impl Into<String>) -> DslError {
    DslError::Parse { line: span.line, column: span.column, message: message.into() }
}

fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, column: col };
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Equals),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, span });
            i += 1;
            col += 1;
            continue;
        }
        match c {
            '\n' => {
                out.push(Token { tok: Tok::Newline, span });
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                col += 1;
                loop {
                    match chars.get(i) {
                        None | Some('\n') => return Err(perr(span, "unterminated string")),
                        Some('"') => {
                            i += 1;
                            col += 1;
                            break;
                        }
                        Some('\\') => {
                            let esc = match chars.get(i + 1) {
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('"') => '"',
                                Some('\\') => '\\',
                                _ => return Err(perr(Span { line, column: col }, "invalid escape")),
                            };
                            s.push(esc);
                            i += 2;
                            col += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                out.push(Token { tok: Tok::Str(s), span });
            }
            c if c.is_ascii_digit() || c == '-' || c == '.' => {
                let start = i;
                if c == '-' {
                    i += 1;
                }
                let digits = |i: &mut usize| {
                    let s = *i;
                    while *i < chars.len() && chars[*i].is_ascii_digit() {
                        *i += 1;
                    }
                    *i > s
                };
                let mut ok = digits(&mut i);
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    ok &= digits(&mut i);
                }
                if ok && i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    ok &= digits(&mut i);
                }
                let text: String = chars[start..i].iter().collect();
                col += i - start;
                let value = text.parse::<f64>().ok().filter(|v| ok && v.is_finite());
                match value {
                    Some(v) => out.push(Token { tok: Tok::Number(v), span }),
                    None => return Err(perr(span, format!("invalid number {text:?}"))),
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                col += i - start;
                out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), span });
            }
            other => return Err(perr(span, format!("unexpected character {other:?}"))),
        }
    }
    out.push(Token { tok: Tok::Eof, span: Span { line, column: col } });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    bound: BTreeSet<String>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek2(&self) -> Option<&Tok> {
        self.tokens.get(self.pos + 1).map(|t| &t.tok)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn skip_newlines(&mut self) {
        while self.peek().tok == Tok::Newline {
            self.pos += 1;
        }
    }

    fn program(&mut self) -> Result<Program, DslError> {
        let mut statements = Vec::new();
        loop {
            self.skip_newlines();
            if self.peek().tok == Tok::Eof {
                break;
            }
            let stmt = self.statement()?;
            self.validate(&stmt)?;
            if let Some(b) = &stmt.binding {
                self.bound.insert(b.clone());
            }
            statements.push(stmt);
            let t = self.peek();
            match t.tok {
                Tok::Newline | Tok::Eof => {}
                _ => return Err(perr(t.span, "expected end of line")),
            }
        }
        Ok(Program { statements })
    }

    fn ident(&mut self, what: &str) -> Result<(String, Span), DslError> {
        let t = self.bump();
        match t.tok {
            Tok::Ident(s) => Ok((s, t.span)),
            _ => Err(perr(t.span, format!("expected {what}"))),
        }
    }

    fn statement(&mut self) -> Result<Statement, DslError> {
        let start = self.peek().span;
        let (first, _) = self.ident("command")?;
        let (binding, name) = if self.peek().tok == Tok::Equals {
            self.bump();
            (Some(first), self.ident("command")?.0)
        } else {
            (None, first)
        };
        let t = self.bump();
        if t.tok != Tok::LParen {
            return Err(perr(t.span, "expected '('"));
        }
        let mut args = Vec::new();
        self.skip_newlines();
        if self.peek().tok == Tok::RParen {
            self.bump();
        } else {
            let mut expecting = "expected argument or ')'";
            loop {
                self.skip_newlines();
                args.push(self.arg(expecting)?);
                self.skip_newlines();
                let t = self.bump();
                match t.tok {
                    Tok::Comma => expecting = "expected argument",
                    Tok::RParen => break,
                    _ => return Err(perr(t.span, "expected ',' or ')'")),
                }
            }
        }
        let command =
            name.parse::<Builtin>().map_err(|_| DslError::UnknownCommand { span: start, name: name.clone() })?;
        Ok(Statement { binding, command, args, span: start })
    }

    fn arg(&mut self, expecting: &str) -> Result<Arg, DslError> {
        if let (Tok::Ident(name), Some(Tok::Equals)) = (&self.peek().tok, self.peek2()) {
            let name = name.clone();
            self.bump();
            self.bump();
            return Ok(Arg { name: Some(name), value: self.value("expected value")? });
        }
        Ok(Arg { name: None, value: self.value(expecting)? })
    }

    fn number(&mut self) -> Result<f64, DslError> {
        let t = self.bump();
        match t.tok {
            Tok::Number(v) => Ok(v),
            _ => Err(perr(t.span, "expected number")),
        }
    }

    fn value(&mut self, expecting: &str) -> Result<Value, DslError> {
        let t = self.bump();
        Ok(match t.tok {
            Tok::Number(v) => Value::Number(v),
            Tok::Str(s) => Value::Str(s),
            Tok::Ident(s) => Value::Ident(s),
            Tok::LBracket => {
                let mut v = [0.0; 3];
                for (i, slot) in v.iter_mut().enumerate() {
                    self.skip_newlines();
                    *slot = self.number()?;
                    self.skip_newlines();
                    let t = self.bump();
                    let want = if i < 2 { Tok::Comma } else { Tok::RBracket };
                    if t.tok != want {
                        let msg = if i < 2 { "expected ','" } else { "expected ']' after three components" };
                        return Err(perr(t.span, msg));
                    }
                }
                Value::Vector(v)
            }
            _ => return Err(perr(t.span, expecting)),
        })
    }

    fn validate(&self, stmt: &Statement) -> Result<(), DslError> {
        let span = stmt.span;
        let cmd = stmt.command;
        if stmt.binding.is_some() && !cmd.returns_object() {
            return Err(DslError::Arity { span, message: format!("{cmd} does not return a value") });
        }
        let params = cmd.params();
        let mut filled = vec![false; params.len()];
        let mut positional = 0;
        let mut seen_named = false;
        for a in &stmt.args {
            let idx = match &a.name {
                None => {
                    if seen_named {
                        return Err(DslError::Arity {
                            span,
                            message: "positional argument after named argument".into(),
                        });
                    }
                    let i = positional;
                    positional += 1;
                    if i >= params.len() {
                        return Err(DslError::Arity {
                            span,
                            message: format!("{cmd} takes at most {} arguments", params.len()),
                        });
                    }
                    i
                }
                Some(n) => {
                    seen_named = true;
                    params
                        .iter()
                        .position(|p| p.name == n)
                        .ok_or_else(|| DslError::Arity { span, message: format!("{cmd} has no parameter {n:?}") })?
                }
            };
            if filled[idx] {
                return Err(DslError::Arity { span, message: format!("parameter {:?} given twice", params[idx].name) });
            }
            filled[idx] = true;
            let p = params[idx];
            let kind_ok = match (&a.value, p.kind) {
                (Value::Ident(name), ParamKind::Object | ParamKind::ObjectOrVector) => {
                    if !self.bound.contains(name) {
                        return Err(DslError::UnboundIdentifier { span, name: name.clone() });
                    }
                    true
                }
                (Value::Ident(name), _) if !self.bound.contains(name) => {
                    return Err(DslError::UnboundIdentifier { span, name: name.clone() });
                }
                (Value::Number(_), ParamKind::Number) => true,
                (Value::Str(_), ParamKind::Str) => true,
                (Value::Str(s), ParamKind::Orientation) => s.parse::<Approach>().is_ok(),
                (Value::Vector(_), ParamKind::Vector | ParamKind::ObjectOrVector) => true,
                _ => false,
            };
            if !kind_ok {
                return Err(DslError::ArgumentKind { span, param: p.name.to_string(), expected: p.kind });
            }
        }
        if let Some(missing) = params.iter().zip(&filled).find(|(p, f)| p.required && !**f) {
            return Err(DslError::Arity {
                span,
                message: format!("{cmd} is missing required argument {:?}", missing.0.name),
            });
        }
        Ok(())
    }
}

/// Parse program text. Reports the first error only.
pub fn parse(src: &str) -> Result<Program, DslError> {
    let tokens = lex(src)?;
    Parser { tokens, pos: 0, bound: BTreeSet::new() }.program()
}
