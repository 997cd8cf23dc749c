//! Generators shared by the DSL property tests and the acceptance run.

use lessons_core::dsl::{Arg, Builtin, Program, Statement, Value};
use proptest::prelude::*;

fn number() -> impl Strategy<Value = f64> {
    prop_oneof![(-1000i32..1000).prop_map(|n| n as f64 / 100.0), -1e3f64..1e3, Just(0.0), Just(1e-7),]
}

fn vector() -> impl Strategy<Value = Value> {
    [number(), number(), number()].prop_map(Value::Vector)
}

fn label() -> impl Strategy<Value = String> {
    "[a-z \"\\\\\t]{1,12}"
}

fn orientation() -> impl Strategy<Value = Value> {
    prop::sample::select(vec!["top-down", "front", "side-left", "side-right"]).prop_map(|s| Value::Str(s.to_string()))
}

fn maybe_named(param: &'static str, v: Value, named: bool) -> Arg {
    if named {
        Arg::named(param, v)
    } else {
        Arg::positional(v)
    }
}

/// Statements that only reference `o0..o{n}`, all of which are bound up front.
fn statement(n: usize) -> impl Strategy<Value = Statement> {
    let obj = (0..n).prop_map(|i| Value::Ident(format!("o{i}")));
    prop_oneof![
        (vector(), prop::option::of(orientation()), any::<bool>()).prop_map(|(p, o, named)| {
            let mut args = vec![maybe_named("position", p, named)];
            if let Some(o) = o {
                args.push(Arg::named("orientation", o));
            }
            Statement::new(None, Builtin::MoveTo, args)
        }),
        vector().prop_map(|d| Statement::new(None, Builtin::MoveBy, vec![Arg::positional(d)])),
        orientation().prop_map(|o| Statement::new(None, Builtin::Rotate, vec![Arg::positional(o)])),
        Just(Statement::new(None, Builtin::OpenGripper, vec![])),
        Just(Statement::new(None, Builtin::CloseGripper, vec![])),
        (obj.clone(), prop::option::of(vector()), prop::option::of(orientation())).prop_map(|(o, off, ori)| {
            let mut args = vec![Arg::positional(o)];
            args.extend(off.map(|v| Arg::named("offset", v)));
            args.extend(ori.map(|v| Arg::named("orientation", v)));
            Statement::new(None, Builtin::Grasp, args)
        }),
        (obj.clone(), number(), prop::option::of(vector())).prop_map(|(o, d, dir)| {
            let mut args = vec![Arg::positional(o), Arg::positional(Value::Number(d))];
            args.extend(dir.map(|v| Arg::named("direction", v)));
            Statement::new(None, Builtin::Pull, args)
        }),
        (obj.clone(), prop_oneof![obj, vector()]).prop_map(|(o, t)| Statement::new(
            None,
            Builtin::Place,
            vec![Arg::positional(o), Arg::positional(t)]
        )),
    ]
}

pub fn program() -> impl Strategy<Value = Program> {
    (1usize..4).prop_flat_map(|n| {
        (prop::collection::vec(label(), n), prop::collection::vec(statement(n), 0..8)).prop_map(
            move |(labels, body)| {
                let mut statements: Vec<Statement> = labels
                    .into_iter()
                    .enumerate()
                    .map(|(i, l)| {
                        Statement::new(Some(&format!("o{i}")), Builtin::Detect, vec![Arg::positional(Value::Str(l))])
                    })
                    .collect();
                statements.extend(body);
                Program { statements }
            },
        )
    })
}
