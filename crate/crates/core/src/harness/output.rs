use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{write_csv, Aggregates, LongRow, RowWriter, WaypointRow};
use super::ControllerKind;
use crate::error::{Error, Result};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

pub const SLOTS_FILE: &str = "slots.csv";
pub const WAYPOINTS_FILE: &str = "waypoints.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Metrics written as per-angle plot series.
pub const PLOT_METRICS: [&str; 5] = ["rx_power_dbw", "snr_db", "t_c_ms", "t_k_ms", "rate_mbps"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// Per-slot rows plus per-waypoint means.
    #[default]
    Csv,
    /// Whitespace-separated per-angle series, one file per metric.
    Plotdata,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Plotdata => "plotdata",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "plotdata" => Ok(OutputFormat::Plotdata),
            other => Err(Error::config(format!("unknown output format '{other}'"))),
        }
    }
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub controllers: Vec<ControllerKind>,
    pub format: OutputFormat,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: String, seeds: Vec<u64>, format: OutputFormat) -> Self {
        Self {
            version: VERSION.to_string(),
            command: command.to_string(),
            config_hash,
            seeds,
            controllers: Vec::new(),
            format,
            files: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Opens the per-slot CSV in `dir`.
pub fn slot_writer(dir: &Path) -> Result<RowWriter<std::io::BufWriter<fs::File>>> {
    RowWriter::create(&dir.join(SLOTS_FILE))
}

pub fn write_waypoints(dir: &Path, agg: &Aggregates) -> Result<String> {
    write_csv(&dir.join(WAYPOINTS_FILE), &agg.waypoint_rows())?;
    Ok(WAYPOINTS_FILE.to_string())
}

pub fn read_waypoints(path: &Path) -> Result<Vec<WaypointRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| Error::Csv {
                path: path.to_path_buf(),
                source: e,
            })
        })
        .collect()
}

pub fn write_sweep(dir: &Path, table: &[LongRow]) -> Result<String> {
    write_csv(&dir.join(SWEEP_FILE), table)?;
    Ok(SWEEP_FILE.to_string())
}

fn metric(row: &WaypointRow, name: &str) -> f64 {
    match name {
        "rx_power_dbw" => row.rx_power_dbw,
        "snr_db" => row.snr_db,
        "t_c_ms" => row.t_c_ms,
        "t_k_ms" => row.t_k_ms,
        "rate_mbps" => row.rate_mbps,
        _ => f64::NAN,
    }
}

/// One file per metric: a header comment, then `angle value...` lines with
/// one column per controller. Missing entries are written as `nan`.
pub fn write_plotdata(dir: &Path, rows: &[WaypointRow]) -> Result<Vec<String>> {
    let mut controllers: Vec<ControllerKind> = rows.iter().map(|r| r.controller).collect();
    controllers.sort_unstable();
    controllers.dedup();
    let mut by_angle: BTreeMap<super::metrics::AngleKey, BTreeMap<ControllerKind, &WaypointRow>> = BTreeMap::new();
    for r in rows {
        by_angle
            .entry(super::metrics::AngleKey::new(r.angle_deg))
            .or_default()
            .insert(r.controller, r);
    }
    let mut files = Vec::new();
    for name in PLOT_METRICS {
        let file = format!("plot_{name}.dat");
        let path = dir.join(&file);
        let mut out = String::new();
        out.push_str("# angle_deg");
        for c in &controllers {
            out.push(' ');
            out.push_str(c.as_str());
        }
        out.push('\n');
        for (angle, cells) in &by_angle {
            out.push_str(&format!("{}", angle.degrees()));
            for c in &controllers {
                match cells.get(c) {
                    Some(r) => out.push_str(&format!(" {}", metric(r, name))),
                    None => out.push_str(" nan"),
                }
            }
            out.push('\n');
        }
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(&path, e))?;
        files.push(file);
    }
    Ok(files)
}
