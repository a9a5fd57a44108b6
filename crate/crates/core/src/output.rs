//! File formats: snapshot CSV, trace JSONL, diagnostics CSV and stability CSV.
//!
//! Floats are written with Rust's shortest round-trip `Display` form, which is
//! locale independent and never uses thousands separators. Negative zero is
//! written as `0`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{SimulationTrace, Snapshot, StepDiagnostics};
use crate::model::{PrimitiveCell, VehicleClass};
use crate::stability::StabilityMap;

pub const SNAPSHOT_HEADER: &str = "x,rho_m,v_m,rho_c,v_c";
pub const STABILITY_HEADER: &str = "delta,rho0,k,class,lhs,rhs,margin,max_re_r,stable";
pub const DIAGNOSTICS_HEADER: &str = "step,time,dt,cfl,total_rho_min,total_rho_max,\
rho_min_m,rho_max_m,v_min_m,v_max_m,mass_m,rho_min_c,rho_max_c,v_min_c,v_max_c,mass_c";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no data: {0}")]
    NoData(String),
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Canonical decimal form of a float.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        v.to_string()
    }
}

/// Positions and primitive values of one snapshot, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotTable {
    pub x: Vec<f64>,
    pub cells: Vec<PrimitiveCell>,
}

impl SnapshotTable {
    pub fn new(x: &[f64], snapshot: &Snapshot) -> Self {
        Self {
            x: x.to_vec(),
            cells: snapshot.cells.clone(),
        }
    }
}

pub fn snapshot_csv(table: &SnapshotTable) -> String {
    let mut out = String::with_capacity(64 * (table.cells.len() + 1));
    out.push_str(SNAPSHOT_HEADER);
    out.push('\n');
    for (x, c) in table.x.iter().zip(&table.cells) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_float(*x),
            format_float(c.rho_m),
            format_float(c.v_m),
            format_float(c.rho_c),
            format_float(c.v_c)
        );
    }
    out
}

pub fn parse_snapshot_csv(text: &str, path: &Path) -> Result<SnapshotTable, OutputError> {
    let err = |line: usize, message: String| OutputError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.split('\n');
    match lines.next() {
        Some(SNAPSHOT_HEADER) => {}
        other => {
            return Err(err(
                1,
                format!("expected header `{SNAPSHOT_HEADER}`, found {other:?}"),
            ));
        }
    }
    let mut table = SnapshotTable {
        x: Vec::new(),
        cells: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| err(i + 2, format!("`{f}`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != 5 {
            return Err(err(
                i + 2,
                format!("expected 5 fields, found {}", values.len()),
            ));
        }
        table.x.push(values[0]);
        table.cells.push(PrimitiveCell {
            rho_m: values[1],
            v_m: values[2],
            rho_c: values[3],
            v_c: values[4],
        });
    }
    Ok(table)
}

pub fn write_snapshot(table: &SnapshotTable, path: &Path) -> Result<(), OutputError> {
    fs::write(path, snapshot_csv(table)).map_err(io_error(path))
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotTable, OutputError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    parse_snapshot_csv(&text, path)
}

/// File name for the snapshot at `time`, e.g. `snapshot_t20.csv`.
pub fn snapshot_file_name(time: f64) -> String {
    format!("snapshot_t{}.csv", format_float(time))
}

/// One line of the trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub time: f64,
    pub step: usize,
    pub x: Vec<f64>,
    pub rho_m: Vec<f64>,
    pub v_m: Vec<f64>,
    pub rho_c: Vec<f64>,
    pub v_c: Vec<f64>,
    /// Free-flow speeds, carried so plots can fix their velocity axis.
    pub v_max_m: f64,
    pub v_max_c: f64,
}

impl TraceRecord {
    pub fn density(&self, class: VehicleClass) -> &[f64] {
        match class {
            VehicleClass::Motorcycle => &self.rho_m,
            VehicleClass::Car => &self.rho_c,
        }
    }

    pub fn velocity(&self, class: VehicleClass) -> &[f64] {
        match class {
            VehicleClass::Motorcycle => &self.v_m,
            VehicleClass::Car => &self.v_c,
        }
    }

    pub fn v_max(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Motorcycle => self.v_max_m,
            VehicleClass::Car => self.v_max_c,
        }
    }
}

pub fn trace_records(trace: &SimulationTrace) -> Vec<TraceRecord> {
    let specs = trace.config.class_specs();
    trace
        .snapshots
        .iter()
        .map(|s| TraceRecord {
            time: s.time,
            step: s.step,
            x: trace.x.clone(),
            rho_m: s.cells.iter().map(|c| c.rho_m).collect(),
            v_m: s.cells.iter().map(|c| c.v_m).collect(),
            rho_c: s.cells.iter().map(|c| c.rho_c).collect(),
            v_c: s.cells.iter().map(|c| c.v_c).collect(),
            v_max_m: specs.motorcycle.v_max,
            v_max_c: specs.car.v_max,
        })
        .collect()
}

pub fn trace_jsonl(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("trace record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_trace(text: &str, path: &Path) -> Result<Vec<TraceRecord>, OutputError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| OutputError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, OutputError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    parse_trace(&text, path)
}

pub fn diagnostics_csv(diagnostics: &[StepDiagnostics]) -> String {
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for d in diagnostics {
        let mut fields = vec![
            d.step.to_string(),
            format_float(d.time),
            format_float(d.dt),
            format_float(d.cfl),
            format_float(d.total_rho_min),
            format_float(d.total_rho_max),
        ];
        for class in VehicleClass::ALL {
            let e = &d.classes[class];
            fields.extend(
                [e.rho_min, e.rho_max, e.v_min, e.v_max, e.mass]
                    .into_iter()
                    .map(format_float),
            );
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn stability_csv(map: &StabilityMap) -> String {
    let mut out = String::from(STABILITY_HEADER);
    out.push('\n');
    for p in &map.points {
        for (k, re) in &p.growth {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                format_float(p.delta),
                format_float(p.rho0),
                format_float(*k),
                p.condition.class.name(),
                format_float(p.condition.lhs),
                format_float(p.condition.rhs),
                format_float(p.condition.margin),
                format_float(*re),
                p.condition.stable
            );
        }
    }
    out
}

/// Writes snapshot CSVs, `diagnostics.csv`, `trace.jsonl` and `config.json` as requested.
pub fn write_run_outputs(
    trace: &SimulationTrace,
    dir: &Path,
    csv: bool,
    jsonl: bool,
) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut written = Vec::new();
    let mut put = |name: String, contents: String| -> Result<(), OutputError> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(io_error(&path))?;
        written.push(path);
        Ok(())
    };
    put("config.json".into(), trace.config.to_json() + "\n")?;
    if csv {
        for s in &trace.snapshots {
            put(
                snapshot_file_name(s.time),
                snapshot_csv(&SnapshotTable::new(&trace.x, s)),
            )?;
        }
        put(
            "diagnostics.csv".into(),
            diagnostics_csv(&trace.diagnostics),
        )?;
    }
    if jsonl {
        put("trace.jsonl".into(), trace_jsonl(&trace_records(trace)))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(n: usize) -> SnapshotTable {
        SnapshotTable {
            x: (0..n).map(|j| (j as f64 + 0.5) * 5.0).collect(),
            cells: (0..n)
                .map(|j| PrimitiveCell {
                    rho_m: 0.02 * j as f64,
                    v_m: 10.0 / 3.0,
                    rho_c: 0.1,
                    v_c: if j == 0 { -0.0 } else { 12.149 },
                })
                .collect(),
        }
    }

    #[test]
    fn four_cells_five_lines() {
        let text = snapshot_csv(&table(4));
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("x,rho_m,v_m,rho_c,v_c\n"));
        assert!(!text.contains('\r'));
        assert!(!text.contains("-0"));
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("2.5,0,3.3333333333333335,0.1,0"));
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let text = snapshot_csv(&table(7));
        let back = parse_snapshot_csv(&text, Path::new("mem")).unwrap();
        assert_eq!(snapshot_csv(&back), text);
    }

    #[test]
    fn bad_header_is_reported() {
        let e = parse_snapshot_csv("x;rho\n", Path::new("f.csv")).unwrap_err();
        assert!(matches!(e, OutputError::Parse { line: 1, .. }));
    }

    #[test]
    fn snapshot_names() {
        assert_eq!(snapshot_file_name(0.0), "snapshot_t0.csv");
        assert_eq!(snapshot_file_name(20.0), "snapshot_t20.csv");
        assert_eq!(snapshot_file_name(0.5), "snapshot_t0.5.csv");
    }

    #[test]
    fn tiny_values_stay_plain_decimal() {
        assert_eq!(format_float(1e-10), "0.0000000001");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(1234567.0), "1234567");
    }
}
