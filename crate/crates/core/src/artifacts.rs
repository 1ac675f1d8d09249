//! Trace and figure-data CSV files plus the run manifest.
//!
//! Floats are written with 17 significant digits (`{:.16e}`) so that parsing
//! a file and writing it again reproduces it byte for byte. Cells that do not
//! apply, such as the controls on the final state row, are left empty.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dynamics::{OpennessVector, StubbornControl};
use crate::linalg::Vector;
use crate::scenario::{Scenario, ScenarioConfig};
use crate::stackelberg::{mutual_best_response_residual, GameError, GameTrace};

pub const TRACE_FILE: &str = "trace.csv";
pub const FIG1_FILE: &str = "fig1_stubborn_opinions.csv";
pub const FIG2_FILE: &str = "fig2_optimal_cost.csv";
pub const FIG3_FILE: &str = "fig3_openness.csv";
pub const FIG4_FILE: &str = "fig4_regular_opinions.csv";
pub const AGENTS_FILE: &str = "agents.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(i) => Some(i as f64),
            Cell::Float(x) => Some(x),
            Cell::Empty => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {column}: cannot parse {value:?}")]
    Cell {
        row: usize,
        column: String,
        value: String,
    },
}

/// A CSV table whose integer columns are named up front.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

/// Columns holding integers in every table this crate writes.
const INT_COLUMNS: [&str; 2] = ["k", "inner_iterations"];

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            writer
                .write_record(row.iter().map(Cell::render))
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record?;
            let row = record
                .iter()
                .zip(&header)
                .map(|(value, column)| {
                    let parsed = if value.is_empty() {
                        Some(Cell::Empty)
                    } else if INT_COLUMNS.contains(&column.as_str()) {
                        value.parse().ok().map(Cell::Int)
                    } else {
                        value.parse().ok().map(Cell::Float)
                    };
                    parsed.ok_or_else(|| TableError::Cell {
                        row: r + 1,
                        column: column.clone(),
                        value: value.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }
}

fn names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn floats(v: &Vector) -> impl Iterator<Item = Cell> + '_ {
    v.iter().map(|&x| Cell::Float(x))
}

fn blanks(n: usize) -> impl Iterator<Item = Cell> {
    std::iter::repeat_n(Cell::Empty, n)
}

/// One row per `k = 0..=n`: `k, x_*, v_*, u_*, y_*, V_k, inner_iterations`.
///
/// Agent columns are numbered within their group (regular `x_i`, `y_i`;
/// stubborn `v_j`, `u_j`); `agents.csv` maps them to agent ids.
pub fn trace_table(trace: &GameTrace) -> Table {
    let nr = trace.states[0].len();
    let ns = trace.stubborn[0].len();
    let header = std::iter::once("k".to_string())
        .chain(names("x", nr))
        .chain(names("v", ns))
        .chain(names("u", ns))
        .chain(names("y", nr))
        .chain(["V_k".to_string(), "inner_iterations".to_string()])
        .collect();
    let mut table = Table::new(header);
    for k in 0..trace.states.len() {
        let mut row: Vec<Cell> = vec![Cell::Int(k as u64)];
        row.extend(floats(&trace.states[k]));
        row.extend(floats(&trace.stubborn[k]));
        if k < trace.horizon() {
            row.extend(floats(&trace.controls[k]));
            row.extend(floats(&trace.openness[k]));
            row.push(Cell::Float(trace.values[k]));
            row.push(Cell::Int(trace.inner_iterations[k] as u64));
        } else {
            row.extend(blanks(ns + nr + 2));
        }
        table.rows.push(row);
    }
    table
}

/// Stubborn opinions with `v0` as the dashed reference.
pub fn fig1_table(trace: &GameTrace, v0: &Vector) -> Table {
    let ns = v0.len();
    let header = std::iter::once("k".to_string())
        .chain(names("v", ns))
        .chain(names("v_ref", ns))
        .collect();
    let mut table = Table::new(header);
    for (k, v) in trace.stubborn.iter().enumerate() {
        table.rows.push(
            std::iter::once(Cell::Int(k as u64))
                .chain(floats(v))
                .chain(floats(v0))
                .collect(),
        );
    }
    table
}

pub fn fig2_table(trace: &GameTrace) -> Table {
    let mut table = Table::new(vec!["k".into(), "V_k".into()]);
    for (k, &value) in trace.values.iter().enumerate() {
        table
            .rows
            .push(vec![Cell::Int(k as u64), Cell::Float(value)]);
    }
    table
}

pub fn fig3_table(trace: &GameTrace) -> Table {
    series_table("y", &trace.openness)
}

pub fn fig4_table(trace: &GameTrace) -> Table {
    series_table("x", &trace.states)
}

fn series_table(prefix: &str, series: &[Vector]) -> Table {
    let n = series.first().map_or(0, Vector::len);
    let mut table = Table::new(
        std::iter::once("k".to_string())
            .chain(names(prefix, n))
            .collect(),
    );
    for (k, v) in series.iter().enumerate() {
        table.rows.push(
            std::iter::once(Cell::Int(k as u64))
                .chain(floats(v))
                .collect(),
        );
    }
    table
}

fn agents_csv(scenario: &Scenario) -> String {
    let net = &scenario.network;
    let mut out = String::from("column,agent,role\n");
    for (i, id) in net.regular_ids().iter().enumerate() {
        let _ = writeln!(out, "x_{},{id},regular", i + 1);
    }
    for (j, id) in net.stubborn_ids().iter().enumerate() {
        let _ = writeln!(out, "v_{},{id},stubborn", j + 1);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub k: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub qp_residual: f64,
    pub dp_residual: f64,
    pub max_cross_asymmetry: f64,
    pub min_s11_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest<'a> {
    pub config: &'a ScenarioConfig,
    pub config_hash: String,
    pub trace_sha256: String,
    pub files: Vec<&'static str>,
    pub steps: Vec<StepDiagnostics>,
    pub unconverged_steps: &'a [usize],
}

/// Mutual best-response residuals and recursion health at every step.
pub fn step_diagnostics(
    scenario: &Scenario,
    trace: &GameTrace,
) -> Result<Vec<StepDiagnostics>, GameError> {
    (0..trace.horizon())
        .map(|k| {
            let y = OpennessVector::new(trace.openness[k].clone())
                .map_err(|e| GameError::InvalidConfig(e.to_string()))?;
            let u = StubbornControl(trace.controls[k].clone());
            let (qp_residual, dp_residual) = mutual_best_response_residual(
                k,
                &trace.states[k],
                &y,
                &u,
                &scenario.game,
                &scenario.network,
                &scenario.init,
            )?;
            Ok(StepDiagnostics {
                k,
                inner_iterations: trace.inner_iterations[k],
                converged: !trace.unconverged_steps.contains(&k),
                qp_residual,
                dp_residual,
                max_cross_asymmetry: trace.recursion[k].max_cross_asymmetry,
                min_s11_eigenvalue: trace.recursion[k].min_s11_eigenvalue,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactPaths {
    pub dir: PathBuf,
    pub trace: PathBuf,
    pub manifest: PathBuf,
}

/// Write the trace, the four figure tables, the agent map and the manifest
/// into `config.output_dir`.
pub fn write_artifacts(
    config: &ScenarioConfig,
    scenario: &Scenario,
    trace: &GameTrace,
) -> Result<ArtifactPaths, crate::scenario::RunError> {
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let trace_csv = trace_table(trace).to_csv();
    write(&dir, TRACE_FILE, &trace_csv)?;
    write(
        &dir,
        FIG1_FILE,
        &fig1_table(trace, &scenario.init.v0).to_csv(),
    )?;
    write(&dir, FIG2_FILE, &fig2_table(trace).to_csv())?;
    write(&dir, FIG3_FILE, &fig3_table(trace).to_csv())?;
    write(&dir, FIG4_FILE, &fig4_table(trace).to_csv())?;
    write(&dir, AGENTS_FILE, &agents_csv(scenario))?;

    let manifest = Manifest {
        config,
        config_hash: config.content_hash(),
        trace_sha256: hex::encode(Sha256::digest(trace_csv.as_bytes())),
        files: vec![
            TRACE_FILE,
            FIG1_FILE,
            FIG2_FILE,
            FIG3_FILE,
            FIG4_FILE,
            AGENTS_FILE,
        ],
        steps: step_diagnostics(scenario, trace)?,
        unconverged_steps: &trace.unconverged_steps,
    };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    json.push('\n');
    write(&dir, MANIFEST_FILE, &json)?;
    Ok(ArtifactPaths {
        trace: dir.join(TRACE_FILE),
        manifest: dir.join(MANIFEST_FILE),
        dir,
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    fs::write(dir.join(name), contents)
}
