//! Deterministic JSON rendering: objects keep insertion order and every
//! float is fixed at 12 significant digits, so equal inputs (and seeds)
//! produce byte-identical output regardless of thread count.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i128),
    Float(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj(pairs: Vec<(&str, Json)>) -> Json {
        Json::Obj(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn floats(vals: &[f64]) -> Json {
        Json::Arr(vals.iter().map(|&v| Json::Float(v)).collect())
    }

    fn is_scalar(&self) -> bool {
        !matches!(self, Json::Arr(_) | Json::Obj(_))
    }
}

/// 12 significant digits: positional for decimal exponents in [-4, 12),
/// scientific outside. Non-finite values degrade to null.
pub fn fmt_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_string();
    }
    if x == 0.0 {
        return "0.0".to_string();
    }
    let sci = format!("{x:.11e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-4..12).contains(&exp) {
        let prec = (11 - exp).max(0) as usize;
        let s = format!("{x:.prec$}");
        if s.contains('.') {
            s
        } else {
            format!("{s}.0")
        }
    } else {
        sci
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

fn write_value(out: &mut String, j: &Json, indent: usize) {
    let pad = "  ".repeat(indent + 1);
    let close = "  ".repeat(indent);
    match j {
        Json::Null => out.push_str("null"),
        Json::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Json::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Json::Float(x) => out.push_str(&fmt_f64(*x)),
        Json::Str(s) => {
            let _ = write!(out, "\"{}\"", escape(s));
        }
        Json::Arr(items) if items.is_empty() => out.push_str("[]"),
        Json::Arr(items) if items.iter().all(Json::is_scalar) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(out, item, indent);
            }
            out.push(']');
        }
        Json::Arr(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad);
                write_value(out, item, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&close);
            out.push(']');
        }
        Json::Obj(pairs) if pairs.is_empty() => out.push_str("{}"),
        Json::Obj(pairs) => {
            out.push_str("{\n");
            for (i, (k, v)) in pairs.iter().enumerate() {
                let _ = write!(out, "{pad}\"{}\": ", escape(k));
                write_value(out, v, indent + 1);
                out.push_str(if i + 1 < pairs.len() { ",\n" } else { "\n" });
            }
            out.push_str(&close);
            out.push('}');
        }
    }
}

pub fn render(j: &Json) -> String {
    let mut out = String::new();
    write_value(&mut out, j, 0);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_f64(0.0), "0.0");
        assert_eq!(fmt_f64(11.0), "11.0000000000");
        assert_eq!(fmt_f64(0.25), "0.250000000000");
        assert_eq!(fmt_f64(-0.5), "-0.500000000000");
        assert_eq!(fmt_f64(2.6406472634), "2.64064726340");
        assert_eq!(fmt_f64(1.0e-4), "0.000100000000000");
        assert_eq!(fmt_f64(3.25e-9), "3.25000000000e-9");
        assert_eq!(fmt_f64(1.5e13), "1.50000000000e13");
        assert_eq!(fmt_f64(f64::NAN), "null");
    }

    #[test]
    fn renders_nested_structure_stably() {
        let doc = Json::obj(vec![
            ("name", Json::Str("a\"b".into())),
            ("vals", Json::floats(&[1.0, 2.5])),
            ("rows", Json::Arr(vec![Json::obj(vec![("k", Json::Int(3))])])),
            ("none", Json::Null),
        ]);
        let text = render(&doc);
        assert_eq!(
            text,
            "{\n  \"name\": \"a\\\"b\",\n  \"vals\": [1.00000000000, 2.50000000000],\n  \"rows\": [\n    {\n      \"k\": 3\n    }\n  ],\n  \"none\": null\n}\n"
        );
        assert_eq!(render(&doc), text);
    }
}
