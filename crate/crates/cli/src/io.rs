use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use crate::exit::{Failure, ExitCode};

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn parse_bit(s: &str) -> Option<bool> {
    match s.trim() {
        "0" | "false" => Some(false),
        "1" | "true" => Some(true),
        _ => None,
    }
}

/// One vector per CSV record, reordered to `inputs`. The header must name
/// every input exactly once; extra columns are an error.
pub fn read_vectors(path: &Path, inputs: &[String]) -> Result<Vec<Vec<bool>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = rdr
        .headers()
        .with_context(|| format!("reading header of {}", path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    let width_err = |msg: String| anyhow!(Failure::new(ExitCode::Data, msg));
    if header.len() != inputs.len() {
        return Err(width_err(format!(
            "{} has {} columns, program declares {} inputs ({})",
            path.display(),
            header.len(),
            inputs.len(),
            inputs.join(", ")
        )));
    }
    let order: Vec<usize> = inputs
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| width_err(format!("{} has no column `{name}`", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{} record {}", path.display(), i + 1))?;
        let mut v = Vec::with_capacity(inputs.len());
        for &c in &order {
            let cell = rec.get(c).unwrap_or("");
            match parse_bit(cell) {
                Some(b) => v.push(b),
                None => bail!(Failure::new(
                    ExitCode::Io,
                    format!("{} record {}: `{cell}` is not a bit", path.display(), i + 1)
                )),
            }
        }
        out.push(v);
    }
    Ok(out)
}

pub fn vectors_csv(inputs: &[String], outputs: &[String], vectors: &[Vec<bool>], results: &[Vec<bool>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(inputs.iter().chain(outputs))?;
    for (v, r) in vectors.iter().zip(results) {
        w.write_record(v.iter().chain(r).map(|&b| if b { "1" } else { "0" }))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
