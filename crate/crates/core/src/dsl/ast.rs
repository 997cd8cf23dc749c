use std::fmt;

use serde::{Deserialize, Serialize};

use super::Builtin;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Number(f64),
    Str(String),
    Vector([f64; 3]),
    Ident(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arg {
    pub name: Option<String>,
    pub value: Value,
}

impl Arg {
    pub fn positional(value: Value) -> Self {
        Arg { name: None, value }
    }

    pub fn named(name: &str, value: Value) -> Self {
        Arg { name: Some(name.to_string()), value }
    }
}

/// One command invocation. Equality ignores the source span.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Statement {
    pub binding: Option<String>,
    pub command: Builtin,
    pub args: Vec<Arg>,
    pub span: Span,
}

impl PartialEq for Statement {
    fn eq(&self, other: &Self) -> bool {
        self.binding == other.binding && self.command == other.command && self.args == other.args
    }
}

impl Statement {
    pub fn new(binding: Option<&str>, command: Builtin, args: Vec<Arg>) -> Self {
        Statement { binding: binding.map(str::to_string), command, args, span: Span::default() }
    }

    /// The value bound to a parameter, whether passed by position or by name.
    pub fn arg(&self, param: &str) -> Option<&Value> {
        let params = self.command.params();
        let mut positional = 0;
        for a in &self.args {
            match &a.name {
                Some(n) if n == param => return Some(&a.value),
                Some(_) => {}
                None => {
                    if params.get(positional).map(|p| p.name) == Some(param) {
                        return Some(&a.value);
                    }
                    positional += 1;
                }
            }
        }
        None
    }

    /// Replace (or append as named) the argument for `param`.
    pub fn set_arg(&mut self, param: &str, value: Value) {
        let params = self.command.params();
        let mut positional = 0;
        for a in &mut self.args {
            let hit = match &a.name {
                Some(n) => n == param,
                None => {
                    let hit = params.get(positional).map(|p| p.name) == Some(param);
                    positional += 1;
                    hit
                }
            };
            if hit {
                a.value = value;
                return;
            }
        }
        self.args.push(Arg::named(param, value));
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Program {
    pub statements: Vec<Statement>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.statements == other.statements
    }
}

impl Program {
    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::format(self))
    }
}
