//! CSV and JSON writers for run directories.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use cosserat_core::basis::STRAIN_NAMES;
use cosserat_core::dynamics::{CenterlineSample, Diagnostics, State};
use serde::Serialize;

use crate::error::{CliError, Result};

pub const TIMESERIES: &str = "timeseries.csv";
pub const CENTERLINE: &str = "centerline.csv";
pub const SUMMARY: &str = "summary.json";
pub const STIFFNESS_GRID: &str = "stiffness_grid.csv";
pub const PARTIAL_MARKER: &str = "PARTIAL";

/// Round-trip representation of a float.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}

/// Row-by-row CSV file, flushed after every row so a crash leaves usable output.
pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvSink {
    pub fn create(path: PathBuf, header: &[String]) -> Result<Self> {
        let file = File::create(&path).map_err(io_error(&path))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header).map_err(csv_error(&path))?;
        Ok(CsvSink { path, writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields).map_err(csv_error(&self.path))?;
        self.writer.flush().map_err(io_error(&self.path))
    }
}

/// Which diagnostic columns go into `timeseries.csv`.
#[derive(Clone, Debug)]
pub struct TimeseriesLayout {
    pub fields: Vec<String>,
    pub n_xi: usize,
    pub n_rho: usize,
}

impl TimeseriesLayout {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for f in &self.fields {
            if f == "coordinates" {
                for (prefix, n) in [("q_xi", self.n_xi), ("q_rho", self.n_rho), ("qd_xi", self.n_xi), ("qd_rho", self.n_rho)] {
                    h.extend((0..n).map(|i| format!("{prefix}_{i}")));
                }
            } else {
                h.push(f.clone());
            }
        }
        h
    }

    pub fn row(&self, t: f64, d: &Diagnostics, state: &State) -> Vec<String> {
        let mut r = vec![num(t)];
        let bend = d.bend.as_ref();
        let nan = f64::NAN;
        for f in &self.fields {
            let value = match f.as_str() {
                "length" => d.length,
                "delta_volume" => d.delta_volume,
                "bend_s" => bend.map_or(nan, |b| b.s),
                "bend_curvature" => bend.map_or(nan, |b| b.curvature),
                "bend_x" => bend.map_or(nan, |b| b.position.x),
                "bend_y" => bend.map_or(nan, |b| b.position.y),
                "bend_z" => bend.map_or(nan, |b| b.position.z),
                "bend_speed" => bend.map_or(nan, |b| b.speed),
                "tip_x" => d.tip_position.x,
                "tip_y" => d.tip_position.y,
                "tip_z" => d.tip_position.z,
                "elastic_energy" => d.elastic_energy,
                "kinetic_energy" => d.kinetic_energy,
                _ => {
                    for v in [&state.q_xi, &state.q_rho, &state.qd_xi, &state.qd_rho] {
                        r.extend(v.iter().map(|&x| num(x)));
                    }
                    continue;
                }
            };
            r.push(num(value));
        }
        r
    }
}

pub fn centerline_header() -> Vec<String> {
    ["t", "node", "s", "x", "y", "z", "rho"]
        .iter()
        .chain(STRAIN_NAMES.iter())
        .map(|s| s.to_string())
        .collect()
}

pub fn centerline_rows(t: f64, samples: &[CenterlineSample]) -> Vec<Vec<String>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut r = vec![num(t), i.to_string(), num(c.s)];
            r.extend(c.position.iter().map(|&x| num(x)));
            r.push(num(c.rho));
            r.extend(c.strain.0.iter().map(|&x| num(x)));
            r
        })
        .collect()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    std::fs::write(path, text + "\n").map_err(io_error(path))
}

pub fn write_partial_marker(dir: &Path, reason: &str) -> Result<()> {
    let path = dir.join(PARTIAL_MARKER);
    let mut f = File::create(&path).map_err(io_error(&path))?;
    writeln!(f, "{reason}").map_err(io_error(&path))
}
