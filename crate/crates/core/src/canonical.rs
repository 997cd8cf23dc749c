//! Canonical JSON encoding: object keys sorted, floats printed with exactly
//! six decimals, no insignificant whitespace. Two values that serialize to the
//! same canonical text are considered bit-identical by the determinism checks.

use serde::Serialize;
use serde_json::Value;

pub const DECIMALS: i32 = 6;

/// Serialize any value to canonical JSON text.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, &mut out);
    Ok(out)
}

pub fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(0.0)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string encoding is infallible")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("string encoding is infallible"));
                out.push(':');
                write_value(&map[k], out);
            }
            out.push('}');
        }
    }
}

/// Fixed-precision float text; negative zero prints as zero.
pub fn format_float(x: f64) -> String {
    let s = format!("{:.*}", DECIMALS as usize, x);
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Round to the canonical precision so that values survive a text round-trip exactly.
/// Removes binary noise from sums of short decimals without affecting the
/// accumulated value beyond 1e-12.
pub fn snap(x: f64) -> f64 {
    let q = (x * 1e12).round() / 1e12;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

pub fn quantize(x: f64) -> f64 {
    let scale = 10f64.powi(DECIMALS);
    let q = (x * scale).round() / scale;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}
