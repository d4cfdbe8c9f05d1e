use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ControllerKind;
use crate::channel::linear_to_db;
use crate::env::{snr_db, SlotOutcome};
use crate::error::{Error, Result};

/// One slot of one run. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub run_id: u64,
    pub slot: usize,
    pub angle_deg: f64,
    pub controller: ControllerKind,
    pub rx_power_dbw: f64,
    pub snr_db: f64,
    pub t_c_ms: f64,
    pub t_k_ms: f64,
    pub rate_mbps: f64,
}

pub const CSV_HEADER: [&str; 9] = [
    "run_id",
    "slot",
    "angle_deg",
    "controller",
    "rx_power_dbw",
    "snr_db",
    "t_c_ms",
    "t_k_ms",
    "rate_mbps",
];

impl MetricRow {
    pub fn from_outcome(run_id: u64, controller: ControllerKind, o: &SlotOutcome) -> Self {
        Self {
            run_id,
            slot: o.slot,
            angle_deg: o.waypoint_deg,
            controller,
            rx_power_dbw: linear_to_db(o.received_power.max(f64::MIN_POSITIVE)),
            snr_db: snr_db(o.snr),
            t_c_ms: o.timing.config_time * 1e3,
            t_k_ms: o.timing.serving_time * 1e3,
            rate_mbps: o.rate * 1e-6,
        }
    }

    fn sort_key(&self) -> (ControllerKind, u64, usize) {
        (self.controller, self.run_id, self.slot)
    }
}

/// Sorts rows by controller, run and slot.
pub fn sort_rows(rows: &mut [MetricRow]) {
    rows.sort_by_key(MetricRow::sort_key);
}

/// Running sums of the per-slot metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSums {
    pub count: u64,
    pub rx_power_dbw: f64,
    pub snr_db: f64,
    /// Linear SNR, summed before conversion.
    pub snr_linear: f64,
    pub t_c_ms: f64,
    pub t_k_ms: f64,
    pub rate_mbps: f64,
}

impl MetricSums {
    pub fn add(&mut self, row: &MetricRow) {
        self.count += 1;
        self.rx_power_dbw += row.rx_power_dbw;
        self.snr_db += row.snr_db;
        self.snr_linear += 10f64.powf(row.snr_db / 10.0);
        self.t_c_ms += row.t_c_ms;
        self.t_k_ms += row.t_k_ms;
        self.rate_mbps += row.rate_mbps;
    }

    pub fn merge(&mut self, other: &MetricSums) {
        self.count += other.count;
        self.rx_power_dbw += other.rx_power_dbw;
        self.snr_db += other.snr_db;
        self.snr_linear += other.snr_linear;
        self.t_c_ms += other.t_c_ms;
        self.t_k_ms += other.t_k_ms;
        self.rate_mbps += other.rate_mbps;
    }

    pub fn means(&self) -> MetricMeans {
        let n = self.count.max(1) as f64;
        MetricMeans {
            count: self.count,
            rx_power_dbw: self.rx_power_dbw / n,
            snr_db: self.snr_db / n,
            snr_linear: self.snr_linear / n,
            t_c_ms: self.t_c_ms / n,
            t_k_ms: self.t_k_ms / n,
            rate_mbps: self.rate_mbps / n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub count: u64,
    pub rx_power_dbw: f64,
    pub snr_db: f64,
    pub snr_linear: f64,
    pub t_c_ms: f64,
    pub t_k_ms: f64,
    pub rate_mbps: f64,
}

impl MetricMeans {
    /// `(name, value)` pairs in a fixed order.
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("rx_power_dbw", self.rx_power_dbw),
            ("snr_db", self.snr_db),
            ("snr_linear", self.snr_linear),
            ("t_c_ms", self.t_c_ms),
            ("t_k_ms", self.t_k_ms),
            ("rate_mbps", self.rate_mbps),
        ]
    }
}

/// Angle key with a total order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AngleKey(i64);

impl AngleKey {
    pub fn new(angle_deg: f64) -> Self {
        Self((angle_deg * 1e6).round() as i64)
    }

    pub fn degrees(self) -> f64 {
        self.0 as f64 * 1e-6
    }
}

/// Per-controller sums over all slots and over waypoint arrivals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregates {
    pub overall: BTreeMap<ControllerKind, MetricSums>,
    pub waypoints: BTreeMap<(ControllerKind, AngleKey), MetricSums>,
}

impl Aggregates {
    /// Adds one run. `arrivals` holds the slots at which the user is at a waypoint.
    pub fn add_run(&mut self, rows: &[MetricRow], arrivals: &[(usize, f64)]) {
        for r in rows {
            self.overall.entry(r.controller).or_default().add(r);
        }
        for &(slot, angle) in arrivals {
            let hit = match rows.get(slot) {
                Some(r) if r.slot == slot => Some(r),
                _ => rows.iter().find(|r| r.slot == slot),
            };
            if let Some(r) = hit {
                self.waypoints
                    .entry((r.controller, AngleKey::new(angle)))
                    .or_default()
                    .add(r);
            }
        }
    }

    pub fn merge(&mut self, other: &Aggregates) {
        for (k, v) in &other.overall {
            self.overall.entry(*k).or_default().merge(v);
        }
        for (k, v) in &other.waypoints {
            self.waypoints.entry(*k).or_default().merge(v);
        }
    }

    pub fn overall_means(&self, controller: ControllerKind) -> Option<MetricMeans> {
        self.overall.get(&controller).map(MetricSums::means)
    }

    /// Per-waypoint means as table rows, ordered by controller then angle.
    pub fn waypoint_rows(&self) -> Vec<WaypointRow> {
        self.waypoints
            .iter()
            .map(|((c, a), sums)| WaypointRow::new(*c, a.degrees(), &sums.means()))
            .collect()
    }
}

/// Mean metrics at one waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointRow {
    pub controller: ControllerKind,
    pub angle_deg: f64,
    pub count: u64,
    pub rx_power_dbw: f64,
    pub snr_db: f64,
    pub snr_linear: f64,
    pub t_c_ms: f64,
    pub t_k_ms: f64,
    pub rate_mbps: f64,
}

impl WaypointRow {
    fn new(controller: ControllerKind, angle_deg: f64, m: &MetricMeans) -> Self {
        Self {
            controller,
            angle_deg,
            count: m.count,
            rx_power_dbw: m.rx_power_dbw,
            snr_db: m.snr_db,
            snr_linear: m.snr_linear,
            t_c_ms: m.t_c_ms,
            t_k_ms: m.t_k_ms,
            rate_mbps: m.rate_mbps,
        }
    }
}

/// One entry of a long-format comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub axis: String,
    pub axis_value: String,
    pub controller: ControllerKind,
    pub metric: String,
    pub value: f64,
}

/// Serialises `rows` as CSV with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for r in rows {
        w.serialize(r).map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Streaming per-slot CSV writer.
pub struct RowWriter<W: Write> {
    inner: csv::Writer<W>,
    path: std::path::PathBuf,
}

impl RowWriter<std::io::BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(std::io::BufWriter::new(file));
        inner.write_record(CSV_HEADER).map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(Self {
            inner,
            path: path.to_path_buf(),
        })
    }
}

impl<W: Write> RowWriter<W> {
    pub fn write(&mut self, rows: &[MetricRow]) -> Result<()> {
        for r in rows {
            self.inner.serialize(r).map_err(|e| Error::Csv {
                path: self.path.clone(),
                source: e,
            })?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<MetricRow>> {
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
