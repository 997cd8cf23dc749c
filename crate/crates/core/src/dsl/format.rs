use super::ast::{Program, Statement, Value};

fn number(x: f64) -> String {
    // shortest representation that parses back to the same f64
    format!("{x}")
}

fn string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub(crate) fn value(v: &Value) -> String {
    match v {
        Value::Number(x) => number(*x),
        Value::Str(s) => string(s),
        Value::Vector([a, b, c]) => format!("[{}, {}, {}]", number(*a), number(*b), number(*c)),
        Value::Ident(s) => s.clone(),
    }
}

pub(crate) fn statement(s: &Statement) -> String {
    let args: Vec<String> = s
        .args
        .iter()
        .map(|a| match &a.name {
            Some(n) => format!("{n}={}", value(&a.value)),
            None => value(&a.value),
        })
        .collect();
    let call = format!("{}({})", s.command.name(), args.join(", "));
    match &s.binding {
        Some(b) => format!("{b} = {call}"),
        None => call,
    }
}

/// Canonical text: one statement per line, no trailing newline.
pub fn format(program: &Program) -> String {
    program.statements.iter().map(statement).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Arg, Builtin, Statement};
    use super::*;

    #[test]
    fn empty_program_is_empty_text() {
        assert_eq!(format(&Program::default()), "");
    }

    #[test]
    fn binding_statement() {
        let p = Program {
            statements: vec![Statement::new(
                Some("h"),
                Builtin::Detect,
                vec![Arg::positional(Value::Str("top drawer handle".into()))],
            )],
        };
        assert_eq!(format(&p), "h = detect(\"top drawer handle\")");
    }

    #[test]
    fn escapes_and_numbers_survive() {
        let src = "h = detect(\"say \\\"hi\\\" \\\\ now\")\ngrasp(h, offset=[-0.1, 1e-7, 12345.5], orientation=\"side-left\")\npull(h, 0.15)";
        let p = parse(src).unwrap();
        let text = format(&p);
        assert_eq!(parse(&text).unwrap(), p);
        assert!(text.contains("pull(h, 0.15)"));
    }
}
