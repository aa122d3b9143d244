//! CSV serialization of iteration traces.
//!
//! Schema (stable): `k,gap_avg,gap_inst,energy,consensus_residual,`
//! `dissipation_slack,theorem_bound,grad_evals,exchanges`. Floats are
//! written in shortest round-trip exponent form, so identical runs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use rlcmd_core::metrics::IterationRecord;

use crate::HarnessError;

pub const CSV_HEADER: &str =
    "k,gap_avg,gap_inst,energy,consensus_residual,dissipation_slack,theorem_bound,grad_evals,exchanges";

pub fn render_csv(records: &[IterationRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            r.k,
            r.gap_avg,
            r.gap_inst,
            r.energy,
            r.consensus_residual,
            r.dissipation_slack,
            r.theorem_bound,
            r.grad_evals,
            r.exchanges
        );
    }
    out
}

pub fn write_csv(path: &Path, records: &[IterationRecord]) -> Result<(), HarnessError> {
    std::fs::write(path, render_csv(records))
        .map_err(|e| HarnessError::Io(format!("writing {}: {e}", path.display())))
}

pub fn parse_csv(text: &str) -> Result<Vec<IterationRecord>, HarnessError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == CSV_HEADER => {}
        other => {
            return Err(HarnessError::Io(format!(
                "unexpected trace header: {other:?}"
            )))
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(HarnessError::Io(format!(
                "row {}: expected 9 fields, got {}",
                idx + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| HarnessError::Io(format!("row {}: {e}", idx + 2)))
        };
        let parse_u = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| HarnessError::Io(format!("row {}: {e}", idx + 2)))
        };
        records.push(IterationRecord {
            k: parse_u(fields[0])? as usize,
            gap_avg: parse_f(fields[1])?,
            gap_inst: parse_f(fields[2])?,
            energy: parse_f(fields[3])?,
            consensus_residual: parse_f(fields[4])?,
            dissipation_slack: parse_f(fields[5])?,
            theorem_bound: parse_f(fields[6])?,
            grad_evals: parse_u(fields[7])?,
            exchanges: parse_u(fields[8])?,
        });
    }
    Ok(records)
}

pub fn read_csv(path: &Path) -> Result<Vec<IterationRecord>, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io(format!("reading {}: {e}", path.display())))?;
    parse_csv(&text)
}
