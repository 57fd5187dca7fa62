//! Mean, standard error and range of the per-trial risks at each grid point.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::warn;

use crate::bounds::BoundSet;
use crate::error::{CsdlError, Result};
use crate::harness::experiment::ExperimentKind;
use crate::harness::format::format_g12;
use crate::harness::records::{read_trials, CsvMeta, TrialRecord};
use crate::synthesis::NoiseKind;

pub const SUMMARY_COLUMNS: [&str; 30] = [
    "experiment",
    "grid_index",
    "N",
    "n",
    "K",
    "sparsity",
    "lambda",
    "noise_kind",
    "trials",
    "mse_csdl_mean",
    "mse_csdl_stderr",
    "mse_csdl_min",
    "mse_csdl_max",
    "mse_zero_mean",
    "mse_zero_stderr",
    "mse_zero_min",
    "mse_zero_max",
    "mse_identity_mean",
    "mse_identity_stderr",
    "mse_identity_min",
    "mse_identity_max",
    "final_objective_mean",
    "final_objective_stderr",
    "final_objective_min",
    "final_objective_max",
    "ub_componentwise",
    "ub_joint",
    "lb_componentwise",
    "lb_joint",
    "stderr_degenerate",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStats {
    pub mean: f64,
    /// Sample standard deviation over `√count`; 0 for a single value.
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
}

impl ColumnStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let count = values.len() as f64;
        let mean = values.iter().sum::<f64>() / count;
        let stderr = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
            (var / count).sqrt()
        } else {
            0.0
        };
        Some(ColumnStats {
            mean,
            stderr,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    fn cells(stats: Option<Self>) -> [String; 4] {
        match stats {
            Some(s) => [format_g12(s.mean), format_g12(s.stderr), format_g12(s.min), format_g12(s.max)],
            None => Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: ExperimentKind,
    pub grid_index: usize,
    pub signal_length: usize,
    pub atom_length: usize,
    pub atoms: usize,
    pub sparsity: u64,
    pub lambda: f64,
    pub noise_kind: NoiseKind,
    pub trials: usize,
    pub mse_csdl: ColumnStats,
    pub mse_zero: ColumnStats,
    pub mse_identity: Option<ColumnStats>,
    pub final_objective: ColumnStats,
    pub bounds: Option<BoundSet>,
    /// Set when the group has a single trial, so `stderr = 0` carries no information.
    pub stderr_degenerate: bool,
}

fn mean_bounds(group: &[&TrialRecord]) -> Option<BoundSet> {
    let all: Vec<BoundSet> = group.iter().filter_map(|r| r.bounds).collect();
    if all.len() != group.len() {
        return None;
    }
    let m = |f: fn(&BoundSet) -> f64| all.iter().map(f).sum::<f64>() / all.len() as f64;
    Some(BoundSet {
        ub_componentwise: m(|b| b.ub_componentwise),
        ub_joint: m(|b| b.ub_joint),
        lb_componentwise: m(|b| b.lb_componentwise),
        lb_joint: m(|b| b.lb_joint),
    })
}

/// Groups records by grid point. Failure rows are dropped with a warning, and
/// groups left empty are skipped.
pub fn summarize_records(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(ExperimentKind, usize), Vec<&TrialRecord>> = BTreeMap::new();
    for rec in records {
        if rec.is_failure() {
            warn!("skipping failure row for grid point {}", rec.grid_index);
            groups.entry((rec.experiment, rec.grid_index)).or_default();
            continue;
        }
        groups.entry((rec.experiment, rec.grid_index)).or_default().push(rec);
    }
    let mut rows = Vec::new();
    for ((experiment, grid_index), group) in groups {
        let Some(first) = group.first() else {
            warn!("grid point {grid_index} has no successful trials; skipped");
            continue;
        };
        let column = |f: fn(&TrialRecord) -> f64| {
            ColumnStats::from_values(&group.iter().map(|r| f(r)).collect::<Vec<_>>())
                .expect("non-empty group")
        };
        let identity: Vec<f64> = group.iter().filter_map(|r| r.mse_identity).collect();
        rows.push(SummaryRow {
            experiment,
            grid_index,
            signal_length: first.signal_length,
            atom_length: first.atom_length,
            atoms: first.atoms,
            sparsity: first.sparsity,
            lambda: first.lambda,
            noise_kind: first.noise_kind,
            trials: group.len(),
            mse_csdl: column(|r| r.mse_csdl),
            mse_zero: column(|r| r.mse_zero),
            mse_identity: if identity.len() == group.len() {
                ColumnStats::from_values(&identity)
            } else {
                None
            },
            final_objective: column(|r| r.final_objective),
            bounds: mean_bounds(&group),
            stderr_degenerate: group.len() == 1,
        });
    }
    rows
}

fn summary_cells(row: &SummaryRow) -> Vec<String> {
    let mut cells = vec![
        row.experiment.label().to_string(),
        row.grid_index.to_string(),
        row.signal_length.to_string(),
        row.atom_length.to_string(),
        row.atoms.to_string(),
        row.sparsity.to_string(),
        format_g12(row.lambda),
        row.noise_kind.label().to_string(),
        row.trials.to_string(),
    ];
    cells.extend(ColumnStats::cells(Some(row.mse_csdl)));
    cells.extend(ColumnStats::cells(Some(row.mse_zero)));
    cells.extend(ColumnStats::cells(row.mse_identity));
    cells.extend(ColumnStats::cells(Some(row.final_objective)));
    match row.bounds {
        Some(b) => cells.extend([b.ub_componentwise, b.ub_joint, b.lb_componentwise, b.lb_joint].map(format_g12)),
        None => cells.extend(std::iter::repeat(String::new()).take(4)),
    }
    cells.push(u8::from(row.stderr_degenerate).to_string());
    cells
}

pub fn write_summary(path: &Path, meta: &CsvMeta, rows: &[SummaryRow]) -> Result<()> {
    let mut buf = Vec::new();
    meta.write_preamble(&mut buf).expect("writing to memory");
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buf);
        w.write_record(SUMMARY_COLUMNS)?;
        for row in rows {
            w.write_record(summary_cells(row))?;
        }
        w.flush().map_err(|e| CsdlError::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| CsdlError::io(path, e))
}

/// Reads a per-trial CSV and writes its summary, keeping the metadata.
pub fn summarize_file(input: &Path, output: &Path) -> Result<Vec<SummaryRow>> {
    let (meta, records) = read_trials(input)?;
    let rows = summarize_records(&records);
    write_summary(output, &meta, &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn record(grid_index: usize, trial: u64, mse: f64) -> TrialRecord {
        TrialRecord {
            experiment: ExperimentKind::Exp1,
            grid_index,
            signal_length: 100,
            atom_length: 10,
            atoms: 5,
            sparsity: 10,
            lambda: 10.0,
            noise_kind: NoiseKind::Iid,
            trial,
            seed: trial,
            mse_csdl: mse,
            mse_zero: 1.0,
            mse_identity: Some(0.01),
            final_objective: 2.0,
            bounds: None,
            wall_time_s: None,
        }
    }

    #[test]
    fn known_values() {
        let rows = summarize_records(&[record(0, 0, 1.0), record(0, 1, 3.0)]);
        assert_eq!(rows.len(), 1);
        let s = rows[0].mse_csdl;
        assert_abs_diff_eq!(s.mean, 2.0);
        assert_abs_diff_eq!(s.stderr, 1.0, epsilon = 1e-15);
        assert_eq!((s.min, s.max), (1.0, 3.0));
        assert!(!rows[0].stderr_degenerate);
    }

    #[test]
    fn identical_and_single_trials() {
        let rows = summarize_records(&[record(0, 0, 0.5), record(0, 1, 0.5), record(1, 0, 0.7)]);
        assert_eq!(rows[0].mse_csdl.mean, 0.5);
        assert_eq!(rows[0].mse_csdl.stderr, 0.0);
        assert_eq!(rows[1].mse_csdl.stderr, 0.0);
        assert!(rows[1].stderr_degenerate);
    }

    #[test]
    fn failure_groups_are_skipped() {
        let rows = summarize_records(&[record(0, 0, f64::NAN), record(1, 0, 0.2)]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].grid_index, 1);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let trials = dir.path().join("trials.csv");
        let out = dir.path().join("summary.csv");
        let mut meta = CsvMeta::default();
        meta.insert("experiment", "exp1");
        crate::harness::records::write_trials(&trials, &meta, &[record(0, 0, 1.0), record(0, 1, 3.0)])
            .unwrap();
        let rows = summarize_file(&trials, &out).unwrap();
        assert_eq!(rows.len(), 1);
        let text = std::fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# csdl_csv_v1"));
        assert_eq!(lines.next(), Some("# experiment=exp1"));
        assert_eq!(lines.next().unwrap(), SUMMARY_COLUMNS.join(","));
        let data: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(data.len(), SUMMARY_COLUMNS.len());
        assert_eq!(&data[9..13], &["2", "1", "1", "3"]);
        assert_eq!(data[25], "");
    }
}
