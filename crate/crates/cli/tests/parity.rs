//! Executes every row of `docs/parity.md` against the built binary.

use std::path::Path;
use std::process::Command;

use serde_json::Value;

struct Row {
    id: u32,
    args: Vec<String>,
    expected: Vec<(String, f64)>,
}

fn between_backticks(cell: &str) -> &str {
    cell.trim().trim_start_matches('`').trim_end_matches('`')
}

fn rows() -> Vec<Row> {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/parity.md")).unwrap();
    text.lines()
        .filter_map(|line| {
            let cells: Vec<&str> = line.strip_prefix('|')?.strip_suffix('|')?.split('|').collect();
            let id = cells.first()?.trim().parse().ok()?;
            assert_eq!(cells.len(), 4, "row {id} must have four cells");
            let cli = between_backticks(cells[2]);
            let args: Vec<String> = cli.split_whitespace().map(String::from).collect();
            assert_eq!(args[0], "ppos", "row {id}");
            let expected = between_backticks(cells[3])
                .split(", ")
                .map(|kv| {
                    let (k, v) = kv.split_once('=').unwrap();
                    (k.to_string(), v.parse().unwrap())
                })
                .collect();
            Some(Row { id, args: args[1..].to_vec(), expected })
        })
        .collect()
}

#[test]
fn every_r_call_has_a_passing_cli_equivalent() {
    let rows = rows();
    assert_eq!(rows.len(), 10, "one row per published R call");
    for row in rows {
        let out = Command::new(env!("CARGO_BIN_EXE_ppos")).args(&row.args).output().unwrap();
        assert!(out.status.success(), "row {}: {}", row.id, String::from_utf8_lossy(&out.stderr));
        let resp: Value = serde_json::from_slice(&out.stdout).unwrap();
        let tol = if row.args.iter().any(|a| a == "bin") || row.args.iter().any(|a| a == "fisher") { 0.005 } else { 0.002 };
        for (key, want) in &row.expected {
            let got = resp["result"][key].as_f64().unwrap_or_else(|| panic!("row {}: no {key}", row.id));
            assert!((got - want).abs() <= tol, "row {} {key}: {got} vs {want}", row.id);
        }
    }
}
