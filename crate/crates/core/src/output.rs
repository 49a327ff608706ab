//! File formats: per-round samples as JSON lines or CSV, the results CSV
//! (one row per run), and per-experiment JSON summaries.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{RunSummary, SweepResult, RESULTS_HEADER};
use crate::metrics::RunRecord;
use crate::process::ProcessKind;

pub const SAMPLE_HEADER: [&str; 6] = [
    "process",
    "round",
    "max_load",
    "empty_fraction",
    "legitimate",
    "faulty",
];

#[derive(Serialize)]
struct SampleRow {
    process: ProcessKind,
    round: u64,
    max_load: u32,
    empty_fraction: f64,
    legitimate: bool,
    faulty: bool,
}

fn rows(record: &RunRecord) -> impl Iterator<Item = SampleRow> + '_ {
    record.samples.iter().map(|s| SampleRow {
        process: record.process,
        round: s.round,
        max_load: s.max_load,
        empty_fraction: s.empty_fraction,
        legitimate: s.legitimate,
        faulty: s.faulty,
    })
}

/// One JSON object per sampled round.
pub fn write_samples_jsonl<W: Write>(record: &RunRecord, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for row in rows(record) {
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Same rows as [`write_samples_jsonl`], as CSV with a header.
pub fn write_samples_csv<W: Write>(record: &RunRecord, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows(record) {
        w.serialize(row)?;
    }
    if record.samples.is_empty() {
        w.write_record(SAMPLE_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

fn check_header(found: &csv::StringRecord) -> Result<()> {
    if found.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(Error::Schema(format!(
            "expected header {:?}, found {:?}",
            RESULTS_HEADER.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// Read every row of a results CSV, checking the header first.
pub fn read_results(path: &Path) -> Result<Vec<RunSummary>> {
    let file = File::open(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    read_results_from(file)
}

pub fn read_results_from<R: io::Read>(input: R) -> Result<Vec<RunSummary>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(r.headers()?)?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Schema(e.to_string())))
        .collect()
}

/// Experiment ids already present in a results file; empty if the file is
/// missing or empty.
pub fn completed_ids(path: &Path) -> Result<BTreeSet<String>> {
    if !path.exists() || std::fs::metadata(path)?.len() == 0 {
        return Ok(BTreeSet::new());
    }
    Ok(read_results(path)?
        .into_iter()
        .map(|s| s.experiment_id)
        .collect())
}

/// Append rows to a results CSV, writing the header if the file is new or
/// empty and checking it otherwise.
pub fn append_results<'a>(
    path: &Path,
    rows: impl IntoIterator<Item = &'a RunSummary>,
) -> Result<()> {
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    if !fresh {
        let mut first = String::new();
        BufReader::new(File::open(path)?).read_line(&mut first)?;
        let header = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(first.as_bytes())
            .records()
            .next()
            .transpose()?
            .unwrap_or_default();
        check_header(&header)?;
    }
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    if fresh {
        w.write_record(RESULTS_HEADER)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write results rows to any writer, header included.
pub fn write_results<'a, W: Write>(
    out: W,
    rows: impl IntoIterator<Item = &'a RunSummary>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty-printed JSON summary of one experiment.
pub fn write_summary_json<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut out, result)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}
