//! CSV and manifest files.

use std::fs;
use std::path::{Path, PathBuf};

use kakinuma::diagnostics::{DiagnosticsReport, LocalLawSample};
use kakinuma::{CanonicalState, Config, Error, Field, Result, State};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Write rows of preformatted cells.
pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn state_header(n1: usize, n2: usize) -> Vec<String> {
    let mut h = strings(&["x", "zeta"]);
    h.extend((0..n1).map(|i| format!("phi1_{i}")));
    h.extend((0..n2).map(|i| format!("phi2_{i}")));
    h
}

pub fn write_state(path: &Path, x: &[f64], st: &State) -> Result<()> {
    let header = state_header(st.phi1.len(), st.phi2.len());
    let rows = (0..x.len()).map(|n| {
        let mut r = vec![fmt(x[n]), fmt(st.zeta[n])];
        r.extend(st.phi1.iter().chain(&st.phi2).map(|f| fmt(f[n])));
        r
    });
    write_csv(path, &header, rows)
}

/// A state file holds either Kakinuma unknowns (`phi1_*`, `phi2_*`) or
/// canonical ones (`phi`).
#[derive(Clone, Debug)]
pub enum StateFile {
    Kakinuma(State),
    Canonical(CanonicalState),
}

pub fn read_state(path: &Path, m: usize, n1: usize, n2: usize) -> Result<StateFile> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header: Vec<String> = rd.headers().map_err(|e| io_err(path, e))?.iter().map(|s| s.trim().to_string()).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let mut columns: Vec<Field> = vec![Vec::with_capacity(m); header.len()];
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| io_err(path, format!("row {}: `{cell}` is not a number", line + 2)))?;
            columns[c].push(v);
        }
    }
    if columns.iter().any(|c| c.len() != m) {
        return Err(io_err(path, format!("expected {m} rows to match the grid")));
    }
    let take = |name: &str| -> Result<Field> {
        col(name).map(|c| columns[c].clone()).ok_or_else(|| io_err(path, format!("missing column `{name}`")))
    };
    let zeta = take("zeta")?;
    if col("phi1_0").is_some() {
        let phi1 = (0..n1).map(|i| take(&format!("phi1_{i}"))).collect::<Result<Vec<_>>>()?;
        let phi2 = (0..n2).map(|i| take(&format!("phi2_{i}"))).collect::<Result<Vec<_>>>()?;
        if col(&format!("phi1_{n1}")).is_some() || col(&format!("phi2_{n2}")).is_some() {
            return Err(io_err(path, "more potential components than the configuration allows"));
        }
        Ok(StateFile::Kakinuma(State { zeta, phi1, phi2 }))
    } else {
        Ok(StateFile::Canonical(CanonicalState { zeta, phi: take("phi")? }))
    }
}

pub fn report_header() -> Vec<String> {
    strings(&[
        "t",
        "mass",
        "energy",
        "momentum",
        "hamiltonian",
        "stability_margin",
        "compat_residual",
        "min_H1",
        "min_H2",
    ])
}

pub fn report_row(r: &DiagnosticsReport) -> Vec<String> {
    [r.t, r.mass, r.energy, r.momentum, r.hamiltonian, r.margin_min, r.compat_residual, r.min_h1, r.min_h2]
        .iter()
        .map(|v| fmt(*v))
        .collect()
}

pub fn write_local_laws(path: &Path, laws: &[LocalLawSample]) -> Result<()> {
    let rows = laws.iter().map(|l| vec![fmt(l.t), fmt(l.dt), fmt(l.energy_residual), fmt(l.momentum_residual)]);
    write_csv(path, &strings(&["t", "dt", "energy_residual", "momentum_residual"]), rows)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_path: Option<String>,
    run_id: String,
    output_dir: String,
    wall_clock_seconds: f64,
    tool_version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

pub struct Run {
    pub command: &'static str,
    pub config_path: Option<PathBuf>,
    pub out: PathBuf,
    pub started: std::time::Instant,
    pub run_id: String,
}

impl Run {
    /// Create the output directory and write the resolved config. The run id
    /// hashes the command, the resolved config and any input file.
    pub fn start(command: &'static str, config_path: Option<PathBuf>, cfg: &Config, out: &Path, inputs: &[&Path]) -> Result<Run> {
        ensure_dir(out)?;
        let resolved = serde_json::to_string_pretty(&cfg.resolved()).expect("config serializes");
        let path = out.join("config.json");
        fs::write(&path, format!("{resolved}\n")).map_err(|e| io_err(&path, e))?;
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(resolved.as_bytes());
        for p in inputs {
            h.update(fs::read(p).map_err(|e| io_err(p, e))?);
        }
        let run_id = format!("{:x}", h.finalize())[..16].to_string();
        Ok(Run { command, config_path, out: out.to_path_buf(), started: std::time::Instant::now(), run_id })
    }

    pub fn finish(&self, note: Option<String>) -> Result<()> {
        let m = Manifest {
            command: self.command,
            config_path: self.config_path.as_ref().map(|p| p.display().to_string()),
            run_id: self.run_id.clone(),
            output_dir: self.out.display().to_string(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            tool_version: env!("CARGO_PKG_VERSION"),
            note,
        };
        let path = self.out.join("manifest.json");
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        fs::write(&path, format!("{text}\n")).map_err(|e| io_err(&path, e))
    }
}
