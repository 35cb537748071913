//! CSV ingestion of 2×2 tables.

use std::collections::HashSet;
use std::io::Read;

use grrr_core::StudyTable;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const HEADER: [&str; 5] = [
    "study_id",
    "events_treatment",
    "n_treatment",
    "events_control",
    "n_control",
];

/// Reads tables in file order. With `control_first` the first pair of
/// count columns is taken as the control arm.
pub fn parse_dataset<R: Read>(reader: R, control_first: bool) -> Result<Vec<StudyTable>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(CliError::NoStudies),
        Some(r) => r.map_err(|e| csv_error(e, 1))?,
    };
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(CliError::Parse {
            line: 1,
            message: format!("expected header `{}`", HEADER.join(",")),
        });
    }
    let mut tables = Vec::new();
    let mut seen = HashSet::new();
    for record in records {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 5 {
            return Err(CliError::Parse {
                line,
                message: format!("expected 5 fields, found {}", record.len()),
            });
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(CliError::Parse {
                line,
                message: "empty study_id".into(),
            });
        }
        let mut counts = [0u64; 4];
        for (k, c) in counts.iter_mut().enumerate() {
            let field = &record[k + 1];
            *c = field.parse().map_err(|_| CliError::Parse {
                line,
                message: format!("{}: `{field}` is not a non-negative integer", HEADER[k + 1]),
            })?;
        }
        let [e_first, n_first, e_second, n_second] = counts;
        let (ec, nc, et, nt) = if control_first {
            (e_first, n_first, e_second, n_second)
        } else {
            (e_second, n_second, e_first, n_first)
        };
        let table = StudyTable::new(id.clone(), ec, nc, et, nt).map_err(|e| CliError::Parse {
            line,
            message: e.to_string(),
        })?;
        if !seen.insert(id.clone()) {
            return Err(CliError::Parse {
                line,
                message: format!("duplicate study_id `{id}`"),
            });
        }
        tables.push(table);
    }
    if tables.is_empty() {
        return Err(CliError::NoStudies);
    }
    Ok(tables)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> CliError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    CliError::Parse {
        line,
        message: e.to_string(),
    }
}

/// Digest of the tables in canonical form, independent of whitespace and
/// column arrangement in the source file.
pub fn dataset_hash(tables: &[StudyTable]) -> String {
    let mut h = Sha256::new();
    for t in tables {
        h.update(format!(
            "{}\x1f{}\x1f{}\x1f{}\x1f{}\n",
            t.study_id, t.events_treatment, t.n_treatment, t.events_control, t.n_control
        ));
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
