//! Rendering of responses as canonical JSON, CSV or an aligned text table.

use ppos_core::api::{Params, Response};
use serde_json::Value;

use crate::{Format, Table};

const CURVE_COLUMNS: [&str; 4] = ["estimate", "cp_trend", "ppos_no_prior", "ppos_with_prior"];
const DENSITY_COLUMNS: [&str; 3] = ["x", "density_no_prior", "density_prior"];
const SE_COLUMNS: [&str; 11] = [
    "N", "D", "med", "sd_obs", "sd_1_over_sqrtd", "sd_log2", "ltfu_rate", "M", "sd_obs_se", "undefined", "unreliable",
];

pub fn render(resp: &Response, params: &Params, format: Format, table: Table) -> Result<String, String> {
    if format == Format::Json {
        return Ok(resp.canonical());
    }
    let rows = match resp.command.as_str() {
        "curves" => Some(match table {
            Table::Curve => (&resp.result["curve"], &CURVE_COLUMNS[..]),
            Table::Density => (&resp.result["density"], &DENSITY_COLUMNS[..]),
        }),
        "mc-se" => Some((&resp.result["rows"], &SE_COLUMNS[..])),
        _ => None,
    };
    match (format, rows) {
        (Format::Csv, Some((rows, cols))) => rows_csv(rows, cols),
        (Format::Table, Some((rows, cols))) => Ok(rows_table(rows, cols)),
        (Format::Csv, None) => scalar_csv(resp),
        _ => Ok(scalar_table(resp, params)),
    }
}

fn cell(v: &Value, decimals: Option<usize>) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) if n.is_f64() => match decimals {
            Some(d) => format!("{:.*}", d, n.as_f64().unwrap_or(f64::NAN)),
            None => n.to_string(),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Flattens nested objects to dotted keys; arrays are not expected here.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Null => {}
        other => out.push((prefix.to_string(), other.clone())),
    }
}

fn csv_err(e: csv::Error) -> String {
    e.to_string()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, String> {
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

fn rows_csv(rows: &Value, cols: &[&str]) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(cols).map_err(csv_err)?;
    for row in rows.as_array().into_iter().flatten() {
        w.write_record(cols.iter().map(|c| cell(&row[*c], None))).map_err(csv_err)?;
    }
    finish(w)
}

fn scalar_csv(resp: &Response) -> Result<String, String> {
    let mut fields = Vec::new();
    flatten("", &resp.result, &mut fields);
    let mut internals = Vec::new();
    flatten("", &resp.internals, &mut internals);
    fields.extend(internals);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(fields.iter().map(|(k, _)| k)).map_err(csv_err)?;
    w.write_record(fields.iter().map(|(_, v)| cell(v, None))).map_err(csv_err)?;
    finish(w)
}

fn aligned(header: &[String], body: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|i| body.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    for r in body {
        out += &line(r);
    }
    out
}

fn rows_table(rows: &Value, cols: &[&str]) -> String {
    let header: Vec<String> = cols.iter().map(|c| c.to_string()).collect();
    let body: Vec<Vec<String>> = rows
        .as_array()
        .into_iter()
        .flatten()
        .map(|r| cols.iter().map(|c| cell(&r[*c], Some(4))).collect())
        .collect();
    aligned(&header, &body)
}

fn section(title: &str, v: &Value, out: &mut String) {
    let mut fields = Vec::new();
    flatten("", v, &mut fields);
    if fields.is_empty() {
        return;
    }
    let width = fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    out.push_str(title);
    out.push_str(":\n");
    for (k, x) in fields {
        out.push_str(&format!("  {k:<width$}  {}\n", cell(&x, Some(4))));
    }
}

fn scalar_table(resp: &Response, params: &Params) -> String {
    let mut out = String::new();
    let inputs = serde_json::to_value(params).unwrap_or(Value::Null);
    section("inputs", &inputs, &mut out);
    section("result", &resp.result, &mut out);
    section("internals", &resp.internals, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn resp(command: &str, result: Value) -> Response {
        Response { v: 1, command: command.into(), result, internals: json!({ "k": 0.123456789 }), warnings: vec![] }
    }

    #[test]
    fn table_rounds_to_four_decimals() {
        let r = resp("pos", json!({ "pos": 0.96512345 }));
        let s = render(&r, &Params::default(), Format::Table, Table::Curve).unwrap();
        assert!(s.contains("pos  0.9651"));
        assert!(s.contains("k  0.1235"));
    }

    #[test]
    fn csv_keeps_full_precision_and_quotes() {
        let r = resp("pos", json!({ "pos": 0.96512345, "note": "a,b" }));
        let s = render(&r, &Params::default(), Format::Csv, Table::Curve).unwrap();
        assert_eq!(s, "note,pos,k\n\"a,b\",0.96512345,0.123456789\n");
    }

    #[test]
    fn curve_rows_in_column_order() {
        let r = resp(
            "curves",
            json!({ "curve": [{ "cp_trend": 0.5, "estimate": 1.0, "ppos_no_prior": 0.5, "ppos_with_prior": null }], "density": [] }),
        );
        let s = render(&r, &Params::default(), Format::Csv, Table::Curve).unwrap();
        assert_eq!(s, "estimate,cp_trend,ppos_no_prior,ppos_with_prior\n1.0,0.5,0.5,\n");
        let s = render(&r, &Params::default(), Format::Csv, Table::Density).unwrap();
        assert_eq!(s, "x,density_no_prior,density_prior\n");
    }
}
