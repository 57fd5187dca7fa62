//! Per-trial CSV records (`csdl_csv_v1`).
//!
//! A file starts with `#` comment lines: the first is the version tag, the
//! rest are `key=value` metadata. Then comes a header row and one row per
//! trial. Floats use 12 significant digits; empty cells mean "not applicable".

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::bounds::BoundSet;
use crate::error::{CsdlError, Result};
use crate::harness::experiment::ExperimentKind;
use crate::harness::format::format_g12;
use crate::synthesis::NoiseKind;

pub const CSV_VERSION: &str = "csdl_csv_v1";

pub const TRIAL_COLUMNS: [&str; 19] = [
    "experiment",
    "grid_index",
    "N",
    "n",
    "K",
    "sparsity",
    "lambda",
    "noise_kind",
    "trial",
    "seed",
    "mse_csdl",
    "mse_zero",
    "mse_identity",
    "final_objective",
    "ub_componentwise",
    "ub_joint",
    "lb_componentwise",
    "lb_joint",
    "wall_time_s",
];

/// Ordered `key=value` metadata carried in the comment preamble.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CsvMeta(pub Vec<(String, String)>);

impl CsvMeta {
    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        let value = value.into();
        match self.0.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.0.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub(crate) fn write_preamble(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "# {CSV_VERSION}")?;
        for (k, v) in &self.0 {
            writeln!(out, "# {k}={v}")?;
        }
        Ok(())
    }
}

/// One solved trial. A failed grid point is recorded as a single row whose
/// risk columns are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub experiment: ExperimentKind,
    pub grid_index: usize,
    pub signal_length: usize,
    pub atom_length: usize,
    pub atoms: usize,
    pub sparsity: u64,
    pub lambda: f64,
    pub noise_kind: NoiseKind,
    pub trial: u64,
    pub seed: u64,
    pub mse_csdl: f64,
    pub mse_zero: f64,
    /// Absent when the identity estimator is excluded (heavy-tailed noise).
    pub mse_identity: Option<f64>,
    pub final_objective: f64,
    /// Absent when the sub-Gaussian bounds do not apply.
    pub bounds: Option<BoundSet>,
    /// Only recorded on request; timings would break byte-level reproducibility.
    pub wall_time_s: Option<f64>,
}

impl TrialRecord {
    pub fn is_failure(&self) -> bool {
        self.mse_csdl.is_nan()
    }

    fn to_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(format_g12).unwrap_or_default();
        vec![
            self.experiment.label().to_string(),
            self.grid_index.to_string(),
            self.signal_length.to_string(),
            self.atom_length.to_string(),
            self.atoms.to_string(),
            self.sparsity.to_string(),
            format_g12(self.lambda),
            self.noise_kind.label().to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            format_g12(self.mse_csdl),
            format_g12(self.mse_zero),
            opt(self.mse_identity),
            format_g12(self.final_objective),
            opt(self.bounds.map(|b| b.ub_componentwise)),
            opt(self.bounds.map(|b| b.ub_joint)),
            opt(self.bounds.map(|b| b.lb_componentwise)),
            opt(self.bounds.map(|b| b.lb_joint)),
            opt(self.wall_time_s),
        ]
    }
}

pub fn write_trials(path: &Path, meta: &CsvMeta, records: &[TrialRecord]) -> Result<()> {
    let mut buf = Vec::new();
    meta.write_preamble(&mut buf).expect("writing to memory");
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buf);
        w.write_record(TRIAL_COLUMNS)?;
        for rec in records {
            w.write_record(rec.to_row())?;
        }
        w.flush().map_err(|e| CsdlError::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| CsdlError::io(path, e))
}

/// Splits a `csdl_csv_v1` file into its metadata and the CSV body, returning
/// the number of preamble lines as well so row numbers can be reported.
pub(crate) fn read_versioned(path: &Path) -> Result<(CsvMeta, String, usize)> {
    let text = fs::read_to_string(path).map_err(|e| CsdlError::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first.trim_start_matches('#').trim() == CSV_VERSION => {}
        _ => {
            return Err(CsdlError::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("missing '# {CSV_VERSION}' header"),
            })
        }
    }
    let mut meta = CsvMeta::default();
    let mut preamble = 1;
    for line in lines.by_ref() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        preamble += 1;
        if let Some((k, v)) = rest.trim().split_once('=') {
            meta.insert(k, v);
        }
    }
    let body: String = text
        .lines()
        .skip(preamble)
        .flat_map(|l| [l, "\n"])
        .collect();
    Ok((meta, body, preamble))
}

pub(crate) fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> CsdlError {
    CsdlError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub(crate) fn parse_float(cell: &str) -> std::result::Result<f64, String> {
    match cell {
        "NaN" | "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => cell.parse::<f64>().map_err(|e| format!("bad number '{cell}': {e}")),
    }
}

fn parse_opt(cell: &str) -> std::result::Result<Option<f64>, String> {
    if cell.is_empty() {
        Ok(None)
    } else {
        parse_float(cell).map(Some)
    }
}

fn parse_int<T: std::str::FromStr>(cell: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    cell.parse::<T>().map_err(|e| format!("bad integer '{cell}': {e}"))
}

fn parse_row(row: &csv::StringRecord) -> std::result::Result<TrialRecord, String> {
    if row.len() != TRIAL_COLUMNS.len() {
        return Err(format!("expected {} columns, found {}", TRIAL_COLUMNS.len(), row.len()));
    }
    let ubc = parse_opt(&row[14])?;
    let ubj = parse_opt(&row[15])?;
    let lbc = parse_opt(&row[16])?;
    let lbj = parse_opt(&row[17])?;
    let bounds = match (ubc, ubj, lbc, lbj) {
        (Some(a), Some(b), Some(c), Some(d)) => Some(BoundSet {
            ub_componentwise: a,
            ub_joint: b,
            lb_componentwise: c,
            lb_joint: d,
        }),
        (None, None, None, None) => None,
        _ => return Err("bound columns must be all present or all empty".into()),
    };
    Ok(TrialRecord {
        experiment: row[0].parse().map_err(|e: CsdlError| e.to_string())?,
        grid_index: parse_int(&row[1])?,
        signal_length: parse_int(&row[2])?,
        atom_length: parse_int(&row[3])?,
        atoms: parse_int(&row[4])?,
        sparsity: parse_int(&row[5])?,
        lambda: parse_float(&row[6])?,
        noise_kind: row[7].parse().map_err(|e: CsdlError| e.to_string())?,
        trial: parse_int(&row[8])?,
        seed: parse_int(&row[9])?,
        mse_csdl: parse_float(&row[10])?,
        mse_zero: parse_float(&row[11])?,
        mse_identity: parse_opt(&row[12])?,
        final_objective: parse_float(&row[13])?,
        bounds,
        wall_time_s: parse_opt(&row[18])?,
    })
}

pub fn read_trials(path: &Path) -> Result<(CsvMeta, Vec<TrialRecord>)> {
    let (meta, body, preamble) = read_versioned(path)?;
    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found != TRIAL_COLUMNS {
        return Err(parse_err(
            path,
            preamble + 1,
            format!("unexpected columns {found:?}, expected {TRIAL_COLUMNS:?}"),
        ));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = preamble + row.position().map_or(0, |p| p.line() as usize);
        records.push(parse_row(&row).map_err(|m| parse_err(path, line, m))?);
    }
    Ok((meta, records))
}
