//! Chain files: CSV with header `iter,slot,moved,coord_0,…`, one row per
//! recorded state, LF line endings and shortest round-trip decimals.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::ChainRecord;

fn csv_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::Parse(e.to_string()),
    }
}

/// Writes the initial state (row `iter = 0`) and every `thin`-th recorded state.
pub fn write_chain<W: Write>(out: W, record: &ChainRecord, thin: usize) -> Result<()> {
    let thin = thin.max(1);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let dim = record.dim();
    let mut header = vec!["iter".to_string(), "slot".into(), "moved".into()];
    header.extend((0..dim).map(|k| format!("coord_{k}")));
    w.write_record(&header).map_err(csv_err)?;

    let mut row = Vec::with_capacity(dim + 3);
    let mut emit = |iter: usize, slot: usize, moved: bool, state: &[f64]| -> Result<()> {
        row.clear();
        row.push(iter.to_string());
        row.push(slot.to_string());
        row.push(u8::from(moved).to_string());
        // Display for f64 prints the shortest string that parses back exactly
        row.extend(state.iter().map(|x| x.to_string()));
        w.write_record(&row).map_err(csv_err)
    };
    if let Some(init) = record.samples.first() {
        emit(0, 0, false, init)?;
    }
    for i in (thin - 1..record.num_iterations()).step_by(thin) {
        emit(
            i + 1,
            record.selected_indices[i],
            record.moved_flags[i],
            &record.samples[i + 1],
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_chain_file(path: &Path, record: &ChainRecord, thin: usize) -> Result<()> {
    let file =
        std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_chain(std::io::BufWriter::new(file), record, thin)
}

/// Reads a chain file back. The first row becomes the initial state.
pub fn read_chain<R: Read>(input: R) -> Result<ChainRecord> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let fixed = ["iter", "slot", "moved"];
    if header.len() < 3 || header.iter().take(3).ne(fixed) {
        return Err(Error::Parse(
            "chain file header must start with iter,slot,moved".into(),
        ));
    }
    let dim = header.len() - 3;
    for (k, name) in header.iter().skip(3).enumerate() {
        if name != format!("coord_{k}") {
            return Err(Error::Parse(format!("unexpected column {name:?}")));
        }
    }
    let mut record: Option<ChainRecord> = None;
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let field = |i: usize| -> Result<&str> {
            row.get(i)
                .ok_or_else(|| Error::Parse(format!("row {} is short", line + 2)))
        };
        let bad = |what: &str| Error::Parse(format!("row {}: bad {what}", line + 2));
        let slot: usize = field(1)?.parse().map_err(|_| bad("slot"))?;
        let moved = match field(2)? {
            "0" => false,
            "1" => true,
            _ => return Err(bad("moved flag")),
        };
        let state = (0..dim)
            .map(|k| field(k + 3)?.parse::<f64>().map_err(|_| bad("coordinate")))
            .collect::<Result<Vec<_>>>()?;
        match record.as_mut() {
            None => record = Some(ChainRecord::with_init(state)),
            Some(rec) => rec.push(state, slot, moved),
        }
    }
    record.ok_or(Error::EmptyChain)
}

pub fn read_chain_file(path: &Path) -> Result<ChainRecord> {
    let file =
        std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_chain(std::io::BufReader::new(file))
}
