//! Trajectory sources: highD-layout CSV recordings and scripted synthetic
//! corpora, plus the trajectory set file shared by the CLI stages.

pub mod highd;
pub mod scenes;
pub mod synthetic;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Trajectory;

pub use highd::{filter_three_lane, normalize_direction, parse_recording_meta, parse_tracks, RecordingMeta};
pub use scenes::{generate_scene, generate_scenes, Archetype, Scene, SceneConfig};
pub use synthetic::{
    generate_synthetic, InitialState, Maneuver, ScriptSampler, ScriptedManeuver, Side,
    SyntheticScript,
};

pub const TRAJECTORY_FORMAT: &str = "trajectory-set";
pub const TRAJECTORY_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryHeader {
    format: String,
    version: String,
    count: usize,
}

/// Writes trajectories as a header line followed by one JSON trajectory per
/// line.
pub fn write_trajectories<W: Write>(mut out: W, trajectories: &[Trajectory]) -> Result<()> {
    let header = TrajectoryHeader {
        format: TRAJECTORY_FORMAT.into(),
        version: TRAJECTORY_VERSION.into(),
        count: trajectories.len(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for t in trajectories {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectories<R: BufRead>(input: R) -> Result<Vec<Trajectory>> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing header".into(),
    })??;
    let header: TrajectoryHeader = serde_json::from_str(&first).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.format != TRAJECTORY_FORMAT || header.version != TRAJECTORY_VERSION {
        return Err(Error::Format(format!(
            "unsupported trajectory file {} v{}",
            header.format, header.version
        )));
    }
    let mut out = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Trajectory = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i as u64 + 2,
            message: e.to_string(),
        })?;
        t.validate()?;
        out.push(t);
    }
    Ok(out)
}

pub fn save_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    write_trajectories(BufWriter::new(File::create(path)?), trajectories)
}

pub fn load_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact {
            path: path.to_path_buf(),
        },
        _ => e.into(),
    })?;
    read_trajectories(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DEFAULT_DT;

    #[test]
    fn trajectory_file_round_trip() {
        let scripts = ScriptSampler::default().sample(3, 1);
        let (trajs, _) = generate_synthetic(&scripts, DEFAULT_DT, 4).unwrap();
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &trajs).unwrap();
        assert_eq!(read_trajectories(buf.as_slice()).unwrap(), trajs);
    }
}
