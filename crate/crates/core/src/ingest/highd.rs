//! Readers for highD-layout `tracks.csv` and `recordingMeta.csv` files.

use std::collections::BTreeMap;
use std::io::Read;

use crate::error::{Error, Result};
use crate::types::{Direction, TrackPoint, Trajectory};

/// Per-recording metadata needed to interpret track coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingMeta {
    pub recording_id: String,
    pub frame_rate: f64,
    pub lanes_per_direction: usize,
    pub lane_directions: BTreeMap<i32, Direction>,
}

impl RecordingMeta {
    /// Lane numbering used by highD: lane ids start at 2 on the upper
    /// carriageway (driving towards -x), and the lower carriageway (+x)
    /// starts two ids after the last upper lane.
    pub fn highd_layout(
        recording_id: impl Into<String>,
        frame_rate: f64,
        upper_lanes: usize,
        lower_lanes: usize,
    ) -> Result<Self> {
        if !(frame_rate > 0.0) || upper_lanes.max(lower_lanes) == 0 {
            return Err(Error::Config(
                "frame rate must be positive and at least one lane is required".into(),
            ));
        }
        let mut lane_directions = BTreeMap::new();
        for i in 0..upper_lanes {
            lane_directions.insert(2 + i as i32, Direction::NegativeX);
        }
        let lower_start = upper_lanes as i32 + 3;
        for i in 0..lower_lanes {
            lane_directions.insert(lower_start + i as i32, Direction::PositiveX);
        }
        Ok(Self {
            recording_id: recording_id.into(),
            frame_rate,
            lanes_per_direction: upper_lanes.max(lower_lanes),
            lane_directions,
        })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }
}

const TRACK_COLUMNS: [&str; 9] = [
    "frame",
    "id",
    "x",
    "y",
    "xVelocity",
    "yVelocity",
    "xAcceleration",
    "yAcceleration",
    "laneId",
];

fn column_indices(headers: &csv::StringRecord, wanted: &[&str]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("missing mandatory column '{name}'"),
                })
        })
        .collect()
}

/// Parses a highD `tracks.csv` stream into one trajectory per vehicle id,
/// ordered by id. Columns beyond the nine consumed ones are ignored.
pub fn parse_tracks<R: Read>(input: R, meta: &RecordingMeta) -> Result<Vec<Trajectory>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let cols = column_indices(&headers, &TRACK_COLUMNS)?;

    let mut by_vehicle: BTreeMap<i64, Vec<TrackPoint>> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<&str> {
            row.get(cols[i]).map(str::trim).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing value for '{}'", TRACK_COLUMNS[i]),
            })
        };
        let real = |i: usize| -> Result<f64> {
            let raw = field(i)?;
            raw.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid number '{raw}' in column '{}'", TRACK_COLUMNS[i]),
            })
        };
        let integer = |i: usize| -> Result<i64> {
            let raw = field(i)?;
            raw.parse::<i64>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid integer '{raw}' in column '{}'", TRACK_COLUMNS[i]),
            })
        };
        let point = TrackPoint {
            frame: integer(0)?,
            x: real(2)?,
            y: real(3)?,
            vx: real(4)?,
            vy: real(5)?,
            ax: real(6)?,
            ay: real(7)?,
            lane_id: integer(8)? as i32,
        };
        by_vehicle.entry(integer(1)?).or_default().push(point);
    }

    by_vehicle
        .into_iter()
        .map(|(vehicle_id, mut points)| {
            points.sort_by_key(|p| p.frame);
            let mean_vx = points.iter().map(|p| p.vx).sum::<f64>() / points.len() as f64;
            let carriageway = meta
                .lane_directions
                .get(&points[0].lane_id)
                .copied()
                .unwrap_or(if mean_vx < 0.0 {
                    Direction::NegativeX
                } else {
                    Direction::PositiveX
                });
            let traj = Trajectory {
                vehicle_id,
                recording_id: meta.recording_id.clone(),
                carriageway,
                dt: meta.dt(),
                points,
            };
            traj.validate()?;
            Ok(traj)
        })
        .collect()
}

/// Parses a highD `recordingMeta.csv` (first data row).
pub fn parse_recording_meta<R: Read>(input: R) -> Result<RecordingMeta> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let cols = column_indices(
        &headers,
        &["id", "frameRate", "upperLaneMarkings", "lowerLaneMarkings"],
    )?;
    let row = reader.records().next().ok_or_else(|| Error::Parse {
        line: 2,
        message: "recording meta has no data row".into(),
    })??;
    let get = |i: usize| row.get(cols[i]).unwrap_or("").trim().to_string();
    let frame_rate: f64 = get(1).parse().map_err(|_| Error::Parse {
        line: 2,
        message: format!("invalid frameRate '{}'", get(1)),
    })?;
    let lanes = |s: String| s.split(';').filter(|m| !m.trim().is_empty()).count().saturating_sub(1);
    RecordingMeta::highd_layout(get(0), frame_rate, lanes(get(2)), lanes(get(3)))
}

/// Rotates a trajectory recorded on the -x carriageway by 180 degrees so
/// that it drives towards +x. Rotation (rather than a single-axis flip)
/// keeps left and right consistent across both carriageways.
pub fn normalize_direction(traj: &Trajectory, meta: &RecordingMeta) -> Result<Trajectory> {
    let mut direction = None;
    for p in &traj.points {
        let d = meta.lane_directions.get(&p.lane_id).copied().ok_or_else(|| {
            Error::Config(format!(
                "lane {} of vehicle {} has no driving direction in recording {}",
                p.lane_id, traj.vehicle_id, meta.recording_id
            ))
        })?;
        match direction {
            None => direction = Some(d),
            Some(prev) if prev != d => {
                return Err(Error::Config(format!(
                    "vehicle {} crosses carriageways",
                    traj.vehicle_id
                )))
            }
            _ => {}
        }
    }
    let mut out = traj.clone();
    if direction == Some(Direction::NegativeX) {
        out.carriageway = Direction::NegativeX;
        for p in &mut out.points {
            p.x = -p.x;
            p.y = -p.y;
            p.vx = -p.vx;
            p.vy = -p.vy;
            p.ax = -p.ax;
            p.ay = -p.ay;
        }
    }
    Ok(out)
}

/// Keeps recordings with exactly three lanes per driving direction.
pub fn filter_three_lane<T>(recordings: Vec<(RecordingMeta, T)>) -> Vec<(RecordingMeta, T)> {
    recordings
        .into_iter()
        .filter(|(meta, _)| meta.lanes_per_direction == 3)
        .collect()
}
