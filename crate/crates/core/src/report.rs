//! Serialization of results: JSON whose floats carry 17 significant digits,
//! and CSV tables of point clouds and scans.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::factor::{Polyline, Potential};
use crate::reach::{ReachSample, ScanReport};

fn format_float(x: f64) -> String {
    if x == 0.0 {
        // keep the sign of negative zero out of reports
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // short numeric rows stay on one line
            if items.len() <= 8 && items.iter().all(|i| i.is_number() || i.is_null()) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                pad(out, indent + 2);
                write_value(out, item, indent + 2);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, item, indent + 2);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Pretty JSON in which every float is written as `d.dddddddddddddddde±x`,
/// enough digits to round-trip. Non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

/// One row per endpoint: `x1..xn` (the form's variable names if given) and
/// the steps its rollout had spent.
pub fn write_endpoints_csv<W: Write>(w: W, sample: &ReachSample, names: &[String]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let n = sample.base.len();
    let mut header: Vec<String> = (0..n)
        .map(|i| names.get(i).cloned().unwrap_or_else(|| format!("x{}", i + 1)))
        .collect();
    header.push("steps".into());
    wr.write_record(&header)?;
    for (p, s) in sample.endpoints.iter().zip(&sample.endpoint_steps) {
        let mut row: Vec<String> = p.iter().map(|&x| format_float(x)).collect();
        row.push(s.to_string());
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_scan_csv<W: Write>(w: W, scan: &ScanReport) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["delta", "gap_quarter", "gap_half", "gap_full", "reached"])?;
    for t in &scan.targets {
        wr.write_record([
            format_float(t.delta),
            format_float(t.gap_trend[0]),
            format_float(t.gap_trend[1]),
            format_float(t.gap_trend[2]),
            t.reached.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// `curve, t, <coordinates>` rows, one per polyline vertex.
pub fn write_polylines_csv<W: Write>(w: W, lines: &[Polyline], names: &[String]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["curve".to_string(), "t".to_string()];
    header.extend(names.iter().cloned());
    wr.write_record(&header)?;
    for l in lines {
        for (t, p) in l.params.iter().zip(&l.points) {
            let mut row = vec![l.id.to_string(), format_float(*t)];
            row.extend(p.iter().map(|&x| format_float(x)));
            wr.write_record(&row)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// `<coordinates>, psi, mu` at each sample; unavailable values are empty.
pub fn write_potential_csv<W: Write>(w: W, pot: &dyn Potential, samples: &[Vec<f64>], names: &[String]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = names.to_vec();
    header.push("psi".into());
    header.push("mu".into());
    wr.write_record(&header)?;
    let cell = |v: Option<f64>| v.map(format_float).unwrap_or_default();
    for p in samples {
        let mut row: Vec<String> = p.iter().map(|&x| format_float(x)).collect();
        row.push(cell(pot.psi(p)));
        row.push(cell(pot.mu(p)));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_trip() {
        let x = 0.1 + 0.2;
        let s = to_json(&json!({ "a": x, "n": 3, "v": [1.5, -0.0], "s": "q\"" })).unwrap();
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64().unwrap(), x);
        assert_eq!(back["n"].as_u64(), Some(3));
        assert_eq!(back["s"], "q\"");
        assert!(s.contains("3.0000000000000004e-1"), "{s}");
        assert!(s.contains("[1.5000000000000000e0, 0.0000000000000000e0]"), "{s}");
    }
}
