//! Trace, summary and results-table files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MatrixCell, ScenarioConfig, ScenarioResult, TraceRow, UncertaintyLevel, MATRIX_EPSILONS, MATRIX_MODES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Json,
}

impl std::str::FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidConfig(format!("unknown trace format {other:?}"))),
        }
    }
}

impl TraceFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Json => "json",
        }
    }
}

/// Per-run summary written next to the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub e_acc: f64,
    pub d_min: f64,
    pub collided: bool,
    pub infeasible_steps: usize,
    pub seed: u64,
    pub config: ScenarioConfig,
}

impl Summary {
    pub fn new(cfg: &ScenarioConfig, r: &ScenarioResult) -> Self {
        Self {
            e_acc: r.e_acc,
            d_min: r.d_min,
            collided: r.collided,
            infeasible_steps: r.infeasible_steps,
            seed: cfg.seed,
            config: cfg.clone(),
        }
    }
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_trace(path: &Path, rows: &[TraceRow], format: TraceFormat) -> Result<()> {
    match format {
        TraceFormat::Csv => write_trace_csv(path, rows),
        TraceFormat::Json => write_json(path, &rows),
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Writes `<stem>.<ext>` and `<stem>_summary.json` into `dir`; returns the
/// trace path.
pub fn write_run(
    dir: &Path,
    stem: &str,
    cfg: &ScenarioConfig,
    result: &ScenarioResult,
    format: TraceFormat,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let trace = dir.join(format!("{stem}.{}", format.extension()));
    write_trace(&trace, &result.rows, format)?;
    write_json(&dir.join(format!("{stem}_summary.json")), &Summary::new(cfg, result))?;
    Ok(trace)
}

/// Results table with one row per (controller, ε) and `e_acc`, `d_min`
/// column pairs per uncertainty level. Failed cells are written as `NaN`.
pub fn results_table(cells: &[MatrixCell]) -> String {
    let mut out = String::from("controller,epsilon");
    for level in UncertaintyLevel::MATRIX {
        out += &format!(",{0}_e_acc,{0}_d_min", level.name());
    }
    out.push('\n');
    for mode in MATRIX_MODES {
        for eps in MATRIX_EPSILONS {
            out += &format!("{},{}", mode.short_name(), eps);
            for level in UncertaintyLevel::MATRIX {
                let cell = cells
                    .iter()
                    .find(|c| c.mode == mode && c.level == level && c.epsilon == eps);
                match cell.map(|c| &c.result) {
                    Some(Ok(r)) => out += &format!(",{:.3},{:.3}", r.e_acc, r.d_min),
                    _ => out += ",NaN,NaN",
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Writes every cell's trace and summary plus `results.csv` into `dir`.
pub fn write_matrix(dir: &Path, cells: &[MatrixCell], format: TraceFormat) -> Result<()> {
    fs::create_dir_all(dir)?;
    for cell in cells {
        match &cell.result {
            Ok(r) => {
                write_run(dir, &cell.name(), &cell.config, r, format)?;
            }
            Err(e) => {
                let msg = serde_json::json!({ "error": e, "seed": cell.config.seed });
                write_json(&dir.join(format!("{}_summary.json", cell.name())), &msg)?;
            }
        }
    }
    fs::write(dir.join("results.csv"), results_table(cells))?;
    Ok(())
}
