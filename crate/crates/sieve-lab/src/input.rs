//! Argument decoding shared by the subcommands: tuples as inline JSON
//! or a file, polynomials as comma-separated ascending coefficients,
//! grids with scientific notation.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use sieve_core::forms::{KTuple, LinearForm};
use sieve_core::poly::SievePoly;

#[derive(Debug, Deserialize)]
struct TupleDoc {
    forms: Vec<FormDoc>,
}

#[derive(Debug, Deserialize)]
struct FormDoc {
    a: i64,
    b: i64,
}

/// Inline `{"forms":[{"a":1,"b":0},...]}`, `@path`, or a bare path to a
/// file holding the same JSON.
pub fn parse_tuple(arg: &str) -> Result<KTuple, String> {
    let text = if let Some(path) = arg.strip_prefix('@') {
        fs::read_to_string(path).map_err(|e| format!("cannot read tuple file {path}: {e}"))?
    } else if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else if Path::new(arg).is_file() {
        fs::read_to_string(arg).map_err(|e| format!("cannot read tuple file {arg}: {e}"))?
    } else {
        return Err(format!(
            "tuple must be inline JSON like {{\"forms\":[{{\"a\":1,\"b\":0}}]}} or a file path (got {arg:?})"
        ));
    };
    let doc: TupleDoc = serde_json::from_str(&text).map_err(|e| format!("bad tuple JSON: {e}"))?;
    if doc.forms.is_empty() {
        return Err("tuple needs at least one form".to_string());
    }
    let forms = doc
        .forms
        .iter()
        .map(|f| LinearForm::new(f.a, f.b))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    KTuple::new(forms).map_err(|e| e.to_string())
}

/// "1,22" → 1 + 22x.
pub fn parse_poly(arg: &str) -> Result<SievePoly, String> {
    let coeffs = arg
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| {
            format!("polynomial must be comma-separated coefficients like \"1,22\" (got {arg:?})")
        })?;
    SievePoly::new(coeffs).map_err(|e| e.to_string())
}

/// "1e3,1e4,1e5" → [1000, 10000, 100000].
pub fn parse_grid(arg: &str) -> Result<Vec<u64>, String> {
    let mut grid = Vec::new();
    for t in arg.split(',') {
        let v: f64 = t.trim().parse().map_err(|_| format!("bad grid entry {t:?}"))?;
        if !v.is_finite() || !(2.0..=1e9).contains(&v) {
            return Err(format!("grid entry {t} outside 2..=1e9"));
        }
        grid.push(v.round() as u64);
    }
    Ok(grid)
}

/// "1 + 22x - 3x^2" display form.
pub fn poly_display(coeffs: &[f64]) -> String {
    let mut out = String::new();
    for (i, &c) in coeffs.iter().enumerate() {
        if c == 0.0 && coeffs.len() > 1 {
            continue;
        }
        let mag = c.abs();
        if out.is_empty() {
            if c < 0.0 {
                out.push('-');
            }
        } else {
            out.push_str(if c < 0.0 { " - " } else { " + " });
        }
        let unit = mag == 1.0 && i > 0;
        if !unit {
            if mag == mag.trunc() && mag < 1e15 {
                out.push_str(&format!("{mag}"));
            } else {
                out.push_str(&format!("{mag:.6}"));
            }
        }
        match i {
            0 => {}
            1 => out.push('x'),
            _ => out.push_str(&format!("x^{i}")),
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

/// "2n+1" display form.
pub fn form_display(form: &LinearForm) -> String {
    let head = if form.a == 1 { "n".to_string() } else { format!("{}n", form.a) };
    match form.b {
        0 => head,
        b if b > 0 => format!("{head}+{b}"),
        b => format!("{head}{b}"),
    }
}
