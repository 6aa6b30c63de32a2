//! Curve-spec mini-language.
//!
//! ```text
//! circle:r=<f>[,cx=<f>,cy=<f>]
//! ellipse:a=<f>,b=<f>[,cx=<f>,cy=<f>]
//! kite:[scale=<f>][,cx=<f>,cy=<f>]
//! ```
//!
//! Composites are joined with `+`. Keys and kinds are case-insensitive.

use std::collections::BTreeMap;

use super::{MultiCurve, ParamCurve, Vec2};
use crate::error::{Error, Result};

pub fn parse_curve_spec(spec: &str) -> Result<MultiCurve> {
    let curves = split_terms(spec)
        .into_iter()
        .map(parse_term)
        .collect::<Result<Vec<_>>>()?;
    MultiCurve::new(curves)
}

/// Splits on `+` only where a new curve kind starts, so exponents such as
/// `1e+3` survive.
fn split_terms(spec: &str) -> Vec<&str> {
    let bytes = spec.as_bytes();
    let mut terms = Vec::new();
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        let next_is_alpha = bytes
            .get(i + 1..)
            .and_then(|rest| rest.iter().find(|c| !c.is_ascii_whitespace()))
            .is_some_and(|c| c.is_ascii_alphabetic());
        let prev_is_exp = i > 0 && matches!(bytes[i - 1], b'e' | b'E');
        if b == b'+' && next_is_alpha && !prev_is_exp {
            terms.push(&spec[start..i]);
            start = i + 1;
        }
    }
    terms.push(&spec[start..]);
    terms
}

fn parse_term(term: &str) -> Result<ParamCurve> {
    let term = term.trim().to_ascii_lowercase();
    let (kind, args) = term
        .split_once(':')
        .map(|(k, a)| (k.trim().to_string(), a.trim().to_string()))
        .unwrap_or((term.clone(), String::new()));
    let mut values = BTreeMap::new();
    for pair in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got '{pair}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("'{value}' is not a number")))?;
        if !value.is_finite() {
            return Err(Error::Parse(format!("{key} must be finite")));
        }
        if values.insert(key.trim().to_string(), value).is_some() {
            return Err(Error::Parse(format!("duplicate key '{key}'")));
        }
    }
    let allowed: &[&str] = match kind.as_str() {
        "circle" => &["r", "cx", "cy"],
        "ellipse" => &["a", "b", "cx", "cy"],
        "kite" => &["scale", "cx", "cy"],
        other => return Err(Error::Parse(format!("unknown curve kind '{other}'"))),
    };
    if let Some(key) = values.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::Parse(format!("unknown key '{key}' for {kind}")));
    }
    let required = |key: &str| {
        values
            .get(key)
            .copied()
            .ok_or_else(|| Error::Parse(format!("{kind} requires '{key}'")))
    };
    let center = Vec2::new(
        values.get("cx").copied().unwrap_or(0.0),
        values.get("cy").copied().unwrap_or(0.0),
    );
    match kind.as_str() {
        "circle" => ParamCurve::circle(required("r")?, center),
        "ellipse" => ParamCurve::ellipse(required("a")?, required("b")?, center),
        _ => ParamCurve::kite(values.get("scale").copied().unwrap_or(1.0), center),
    }
}
