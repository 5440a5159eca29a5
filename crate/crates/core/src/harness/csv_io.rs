//! Learning-curve and error-ledger CSVs.

use std::path::Path;

use crate::engine::{EpisodeRecord, Phase};
use crate::theory::ErrorLedger;
use crate::{format_float, Error, Result};

pub const CURVE_HEADER: [&str; 5] = ["seed", "episode", "end_step", "return", "phase"];
pub const LEDGER_HEADER: [&str; 8] =
    ["seed", "step", "eps_icl", "eps_stat", "eps_label", "m_min", "sup_err", "theorem1_rhs"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

pub fn curve_to_string(rows: &[EpisodeRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CURVE_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.episode.to_string(),
            r.end_step.to_string(),
            format_float(r.ret),
            r.phase.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn ledger_to_string(ledgers: &[(u64, &ErrorLedger)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LEDGER_HEADER).expect("in-memory write");
    for (seed, ledger) in ledgers {
        for r in &ledger.rows {
            w.write_record([
                seed.to_string(),
                r.step.to_string(),
                format_float(r.eps_icl),
                format_float(r.eps_stat),
                format_float(r.eps_label),
                r.m_min.to_string(),
                format_float(r.sup_err),
                format_float(r.theorem1_rhs),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn parse_phase(s: &str) -> Option<Phase> {
    Some(match s {
        "warmup" => Phase::Warmup,
        "icl" => Phase::Icl,
        "train" => Phase::Train,
        "eval" => Phase::Eval,
        _ => return None,
    })
}

/// Reads a learning-curve CSV, checking the header.
pub fn read_curve(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(CURVE_HEADER) {
        return Err(Error::Config(format!("{}: not a learning-curve CSV", path.display())));
    }
    let bad = |line: usize| Error::Config(format!("{}: malformed row {line}", path.display()));
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let field = |j: usize| rec.get(j).ok_or_else(|| bad(i + 2));
        rows.push(EpisodeRecord {
            seed: field(0)?.parse().map_err(|_| bad(i + 2))?,
            episode: field(1)?.parse().map_err(|_| bad(i + 2))?,
            end_step: field(2)?.parse().map_err(|_| bad(i + 2))?,
            ret: field(3)?.parse().map_err(|_| bad(i + 2))?,
            phase: parse_phase(field(4)?).ok_or_else(|| bad(i + 2))?,
        });
    }
    Ok(rows)
}
