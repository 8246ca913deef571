//! Trajectory ingestion: column-mapped CSV loading, canonical re-export and
//! synthetic corpora.

mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

pub use synth::{generate_synthetic_corpus, DriverModel, SyntheticLane, SyntheticSpec};

pub type VehicleId = u64;
pub type LaneId = i64;

/// One timestamped observation of one vehicle, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub vehicle_id: VehicleId,
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub accel: f64,
    pub lane_id: Option<LaneId>,
}

impl TrajectorySample {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Samples grouped per vehicle, each group sorted by strictly increasing time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    vehicles: BTreeMap<VehicleId, Vec<TrajectorySample>>,
}

/// A data row dropped during loading.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRow {
    /// 1-based line number in the source file.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadOutcome {
    pub dataset: Dataset,
    pub rejected: Vec<RejectedRow>,
}

impl Dataset {
    /// Groups samples by vehicle and sorts each group by time. Samples repeating an
    /// already-seen `(vehicle, time)` pair are returned as rejects (index into `samples`).
    pub fn from_samples(samples: Vec<TrajectorySample>) -> (Self, Vec<usize>) {
        let mut indexed: Vec<(usize, TrajectorySample)> = samples.into_iter().enumerate().collect();
        indexed.sort_by(|(ia, a), (ib, b)| {
            a.vehicle_id
                .cmp(&b.vehicle_id)
                .then(a.time.total_cmp(&b.time))
                .then(ia.cmp(ib))
        });
        let mut vehicles: BTreeMap<VehicleId, Vec<TrajectorySample>> = BTreeMap::new();
        let mut rejects = Vec::new();
        for (i, s) in indexed {
            let group = vehicles.entry(s.vehicle_id).or_default();
            if group.last().is_some_and(|last| last.time >= s.time) {
                rejects.push(i);
                continue;
            }
            group.push(s);
        }
        rejects.sort_unstable();
        (Self { vehicles }, rejects)
    }

    pub fn vehicle_count(&self) -> usize {
        self.vehicles.len()
    }

    pub fn sample_count(&self) -> usize {
        self.vehicles.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&[TrajectorySample]> {
        self.vehicles.get(&id).map(Vec::as_slice)
    }

    /// Vehicles in ascending id order with their time-ordered samples.
    pub fn vehicles(&self) -> impl Iterator<Item = (VehicleId, &[TrajectorySample])> {
        self.vehicles.iter().map(|(id, s)| (*id, s.as_slice()))
    }

    /// All samples, vehicle-major then time order.
    pub fn samples(&self) -> impl Iterator<Item = &TrajectorySample> {
        self.vehicles.values().flatten()
    }

    pub fn has_lane_ids(&self) -> bool {
        self.samples().any(|s| s.lane_id.is_some())
    }

    pub fn lane_ids(&self) -> BTreeSet<LaneId> {
        self.samples().filter_map(|s| s.lane_id).collect()
    }

    /// Positions of every sample observed on `lane`.
    pub fn lane_positions(&self, lane: LaneId) -> Vec<Point> {
        self.samples()
            .filter(|s| s.lane_id == Some(lane))
            .map(TrajectorySample::position)
            .collect()
    }
}

/// Column reference by header name or zero-based index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

/// Declarative mapping from a source CSV layout to [`TrajectorySample`] fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    #[serde(default = "default_true")]
    pub has_header: bool,
    pub vehicle_id: ColumnRef,
    pub time: ColumnRef,
    pub x: ColumnRef,
    pub y: ColumnRef,
    pub speed: ColumnRef,
    pub accel: ColumnRef,
    #[serde(default)]
    pub lane_id: Option<ColumnRef>,
    /// Multiplier taking source lengths to metres (0.3048 for feet).
    #[serde(default = "default_one")]
    pub length_scale: f64,
    /// Multiplier taking source time stamps to seconds (0.001 for milliseconds).
    #[serde(default = "default_one")]
    pub time_scale: f64,
    /// Defaults to `length_scale` (speed already per second in the source).
    #[serde(default)]
    pub speed_scale: Option<f64>,
    /// Defaults to `length_scale`.
    #[serde(default)]
    pub accel_scale: Option<f64>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self::canonical()
    }
}

pub const CANONICAL_HEADER: [&str; 7] = ["vehicle_id", "time", "x", "y", "speed", "accel", "lane_id"];

impl ColumnMapping {
    /// Mapping for files written by [`write_dataset`].
    pub fn canonical() -> Self {
        let name = |s: &str| ColumnRef::Name(s.to_string());
        Self {
            has_header: true,
            vehicle_id: name("vehicle_id"),
            time: name("time"),
            x: name("x"),
            y: name("y"),
            speed: name("speed"),
            accel: name("accel"),
            lane_id: Some(name("lane_id")),
            length_scale: 1.0,
            time_scale: 1.0,
            speed_scale: None,
            accel_scale: None,
        }
    }

    /// Loads a mapping from a `.json` file, anything else is parsed as TOML.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mapping: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?
        };
        mapping.validate()?;
        Ok(mapping)
    }

    pub fn validate(&self) -> Result<()> {
        let scales = [
            ("length_scale", Some(self.length_scale)),
            ("time_scale", Some(self.time_scale)),
            ("speed_scale", self.speed_scale),
            ("accel_scale", self.accel_scale),
        ];
        for (name, v) in scales {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if !self.has_header {
            let by_name = [
                &self.vehicle_id,
                &self.time,
                &self.x,
                &self.y,
                &self.speed,
                &self.accel,
            ]
            .into_iter()
            .chain(self.lane_id.as_ref())
            .any(|c| matches!(c, ColumnRef::Name(_)));
            if by_name {
                return Err(Error::InvalidConfig(
                    "columns mapped by name require a header row".into(),
                ));
            }
        }
        Ok(())
    }
}

fn resolve(col: &ColumnRef, header: Option<&csv::StringRecord>, field: &str) -> Result<usize> {
    match col {
        ColumnRef::Index(i) => {
            if let Some(h) = header {
                if *i >= h.len() {
                    return Err(Error::MissingColumn(format!("{field} (index {i})")));
                }
            }
            Ok(*i)
        }
        ColumnRef::Name(name) => header
            .and_then(|h| h.iter().position(|c| c.trim() == name))
            .ok_or_else(|| Error::MissingColumn(name.clone())),
    }
}

/// Loads a trajectory CSV. Malformed data rows are skipped and reported; a missing
/// mandatory column or an empty result is fatal.
pub fn load_dataset(path: &Path, mapping: &ColumnMapping) -> Result<LoadOutcome> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, mapping)
}

pub fn read_dataset<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<LoadOutcome> {
    mapping.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(mapping.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = if mapping.has_header {
        Some(rdr.headers()?.clone())
    } else {
        None
    };
    let h = header.as_ref();
    let cols = [
        resolve(&mapping.vehicle_id, h, "vehicle_id")?,
        resolve(&mapping.time, h, "time")?,
        resolve(&mapping.x, h, "x")?,
        resolve(&mapping.y, h, "y")?,
        resolve(&mapping.speed, h, "speed")?,
        resolve(&mapping.accel, h, "accel")?,
    ];
    let lane_col = mapping
        .lane_id
        .as_ref()
        .map(|c| resolve(c, h, "lane_id"))
        .transpose()?;
    let speed_scale = mapping.speed_scale.unwrap_or(mapping.length_scale);
    let accel_scale = mapping.accel_scale.unwrap_or(mapping.length_scale);

    let mut samples = Vec::new();
    let mut lines = Vec::new();
    let mut rejected = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let line = row_idx + 1 + usize::from(mapping.has_header);
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RejectedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        match parse_row(&record, &cols, lane_col) {
            Ok(mut s) => {
                s.time *= mapping.time_scale;
                s.x *= mapping.length_scale;
                s.y *= mapping.length_scale;
                s.speed *= speed_scale;
                s.accel *= accel_scale;
                samples.push(s);
                lines.push(line);
            }
            Err(reason) => rejected.push(RejectedRow { line, reason }),
        }
    }

    let (dataset, dupes) = Dataset::from_samples(samples);
    rejected.extend(dupes.into_iter().map(|i| RejectedRow {
        line: lines[i],
        reason: "non-increasing time for vehicle".into(),
    }));
    rejected.sort_by_key(|r| r.line);
    if dataset.is_empty() {
        return Err(Error::EmptyDataset {
            rejected: rejected.len(),
        });
    }
    for r in &rejected {
        log::warn!("rejected row {}: {}", r.line, r.reason);
    }
    Ok(LoadOutcome { dataset, rejected })
}

fn parse_row(
    record: &csv::StringRecord,
    cols: &[usize; 6],
    lane_col: Option<usize>,
) -> std::result::Result<TrajectorySample, String> {
    let field = |idx: usize, name: &str| -> std::result::Result<f64, String> {
        let raw = record
            .get(idx)
            .ok_or_else(|| format!("missing cell for `{name}`"))?;
        let v: f64 = raw
            .parse()
            .map_err(|_| format!("non-numeric `{name}` value {raw:?}"))?;
        if !v.is_finite() {
            return Err(format!("non-finite `{name}` value {raw:?}"));
        }
        Ok(v)
    };
    let id = field(cols[0], "vehicle_id")?;
    if id < 0.0 || id.fract() != 0.0 {
        return Err(format!("vehicle_id {id} is not a non-negative integer"));
    }
    let speed = field(cols[4], "speed")?;
    if speed < 0.0 {
        return Err(format!("negative speed {speed}"));
    }
    let lane_id = match lane_col.and_then(|c| record.get(c)) {
        None | Some("") => None,
        Some(raw) => {
            let v: f64 = raw
                .parse()
                .map_err(|_| format!("non-numeric `lane_id` value {raw:?}"))?;
            if v.fract() != 0.0 || !v.is_finite() {
                return Err(format!("lane_id {raw:?} is not an integer"));
            }
            Some(v as LaneId)
        }
    };
    Ok(TrajectorySample {
        vehicle_id: id as VehicleId,
        time: field(cols[1], "time")?,
        x: field(cols[2], "x")?,
        y: field(cols[3], "y")?,
        speed,
        accel: field(cols[5], "accel")?,
        lane_id,
    })
}

/// Writes the canonical SI-unit CSV; floats use shortest round-trip formatting.
pub fn write_dataset<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CANONICAL_HEADER)?;
    for s in dataset.samples() {
        wtr.write_record([
            s.vehicle_id.to_string(),
            s.time.to_string(),
            s.x.to_string(),
            s.y.to_string(),
            s.speed.to_string(),
            s.accel.to_string(),
            s.lane_id.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
