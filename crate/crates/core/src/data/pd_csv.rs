//! Persistence-diagram CSV files: a `birth,death,mult` header followed by one
//! row per distinct point. Floats are written in shortest round-trip form, so
//! a write/read cycle is lossless. A file without the `mult` column is read as
//! a plain point list (duplicates merged into multiplicities).

use std::io::{Read, Write};
use std::path::Path;

use crate::data::synthetic::SyntheticSample;
use crate::error::{MstError, Result};
use crate::multiset::Multiset;
use crate::numerics::Matrix;

pub const PD_HEADER: [&str; 3] = ["birth", "death", "mult"];

pub fn write_pd<W: Write>(out: W, x: &Multiset) -> Result<()> {
    if x.dim() != 2 && !x.is_empty() {
        return Err(MstError::Validation(format!("diagram points must be 2-D, got {}-D", x.dim())));
    }
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| MstError::Validation(format!("csv write failed: {e}"));
    w.write_record(PD_HEADER).map_err(csv_err)?;
    for (row, m) in x.base().row_iter().zip(x.mult()) {
        w.write_record([row[0].to_string(), row[1].to_string(), m.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| MstError::Validation(format!("csv write failed: {e}")))?;
    Ok(())
}

/// Parses a diagram; `origin` names the source in error messages.
pub fn read_pd<R: Read>(input: R, origin: &Path) -> Result<Multiset> {
    let parse_err = |line: usize, msg: String| MstError::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let has_mult = match cols.as_slice() {
        ["birth", "death", "mult"] => true,
        ["birth", "death"] => {
            log::warn!("{}: no mult column, treating every row as multiplicity 1", origin.display());
            false
        }
        _ => return Err(parse_err(1, format!("expected header `birth,death,mult`, found {cols:?}"))),
    };
    let mut values = Vec::new();
    let mut counts = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let float = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or_default();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("column {} is not a finite number: {s:?}", i + 1)))
        };
        values.push(float(0)?);
        values.push(float(1)?);
        counts.push(if has_mult {
            let s = rec.get(2).unwrap_or_default();
            s.parse::<i64>()
                .ok()
                .filter(|&m| m >= 1)
                .ok_or_else(|| parse_err(line, format!("mult must be a positive integer, found {s:?}")))?
        } else {
            1
        });
    }
    let pts = Matrix::new(counts.len(), 2, values)?;
    Multiset::canonicalize(&pts, &counts)
}

pub fn write_pd_csv(path: &Path, x: &Multiset) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| MstError::io(path, e))?;
    write_pd(std::io::BufWriter::new(f), x)
}

pub fn read_pd_csv(path: &Path) -> Result<Multiset> {
    let f = std::fs::File::open(path).map_err(|e| MstError::io(path, e))?;
    read_pd(std::io::BufReader::new(f), path)
}

/// One `sample_NNNNN.csv` per sample plus `labels.csv` (`file,label`).
pub fn write_synthetic(dir: &Path, samples: &[SyntheticSample]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| MstError::io(dir, e))?;
    let mut manifest = String::from("file,label\n");
    for (i, s) in samples.iter().enumerate() {
        let name = format!("sample_{i:05}.csv");
        write_pd_csv(&dir.join(&name), &s.points)?;
        manifest.push_str(&format!("{name},{}\n", s.label));
    }
    let path = dir.join("labels.csv");
    std::fs::write(&path, manifest).map_err(|e| MstError::io(&path, e))
}

pub fn read_synthetic(dir: &Path) -> Result<Vec<SyntheticSample>> {
    let path = dir.join("labels.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| MstError::io(&path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let parse_err = |msg: String| MstError::Parse {
            path: path.clone(),
            line: i + 1,
            msg,
        };
        let (file, label) = line.split_once(',').ok_or_else(|| parse_err(format!("expected `file,label`: {line:?}")))?;
        let label = label.trim().parse().map_err(|_| parse_err(format!("bad label {label:?}")))?;
        out.push(SyntheticSample {
            points: read_pd_csv(&dir.join(file.trim()))?,
            label,
        });
    }
    Ok(out)
}
