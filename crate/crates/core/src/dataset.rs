//! Line-oriented scenario dataset file.
//!
//! Line 1 is a JSON header carrying the format tag, version and the tensor
//! dimensions. Every following line is one JSON record with provenance,
//! anchor, pseudo-class index, the flattened tensor (row-major slot,
//! feature, frame), the flattened interaction matrix and the presence mask
//! as a string of `0`/`1` characters.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    Augmentation, ChangePoint, InteractionMatrix, Provenance, PseudoClassLabel, ScenarioRecord,
    ScenarioTensor, N_CLASSES, N_FEATURES, N_SLOTS, T_OBS,
};

pub const DATASET_FORMAT: &str = "scenario-dataset";
pub const DATASET_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: String,
    pub n: usize,
    pub f: usize,
    pub t_obs: usize,
    pub s: usize,
    pub dt: f64,
}

impl DatasetHeader {
    pub fn current(dt: f64) -> Self {
        Self {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION.into(),
            n: N_SLOTS,
            f: N_FEATURES,
            t_obs: T_OBS,
            s: N_CLASSES,
            dt,
        }
    }

    fn check(&self) -> Result<()> {
        if self.format != DATASET_FORMAT {
            return Err(Error::Format(format!("unknown dataset format '{}'", self.format)));
        }
        if self.version != DATASET_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset version '{}'",
                self.version
            )));
        }
        if (self.n, self.f, self.t_obs, self.s) != (N_SLOTS, N_FEATURES, T_OBS, N_CLASSES) {
            return Err(Error::Format(format!(
                "dataset dimensions {}x{}x{} (S={}) do not match {}x{}x{} (S={})",
                self.n, self.f, self.t_obs, self.s, N_SLOTS, N_FEATURES, T_OBS, N_CLASSES
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: String,
    recording_id: String,
    ego_vehicle_id: i64,
    anchor_frame: i64,
    label_before: String,
    label_after: String,
    pseudo_class: usize,
    augmentation_parent: Option<String>,
    augmentation_slot: Option<usize>,
    tensor: Vec<f64>,
    interaction: Vec<f64>,
    presence: String,
}

impl RecordLine {
    fn from_record(r: &ScenarioRecord) -> Self {
        Self {
            id: r.id.clone(),
            recording_id: r.provenance.recording_id.clone(),
            ego_vehicle_id: r.provenance.ego_vehicle_id,
            anchor_frame: r.anchor.frame,
            label_before: r.anchor.before.to_string(),
            label_after: r.anchor.after.to_string(),
            pseudo_class: r.pseudo_class.index(),
            augmentation_parent: r.augmentation.as_ref().map(|a| a.parent.clone()),
            augmentation_slot: r.augmentation.as_ref().map(|a| a.slot),
            tensor: r.tensor.values().to_vec(),
            interaction: r.interaction.values().to_vec(),
            presence: r
                .tensor
                .presence()
                .iter()
                .map(|&p| if p { '1' } else { '0' })
                .collect(),
        }
    }

    fn into_record(self, line: u64) -> Result<ScenarioRecord> {
        let parse_err = |message: String| Error::Parse { line, message };
        let presence = self
            .presence
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(parse_err(format!("invalid presence character '{other}'"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        let tensor = ScenarioTensor::from_parts(self.tensor, presence)?;
        let interaction = InteractionMatrix::from_values(self.interaction)?;
        let augmentation = match (self.augmentation_parent, self.augmentation_slot) {
            (Some(parent), Some(slot)) if slot < N_SLOTS => Some(Augmentation { parent, slot }),
            (None, None) => None,
            _ => return Err(parse_err("inconsistent augmentation fields".into())),
        };
        Ok(ScenarioRecord {
            id: self.id,
            tensor,
            pseudo_class: PseudoClassLabel::new(self.pseudo_class)?,
            interaction,
            anchor: ChangePoint {
                frame: self.anchor_frame,
                before: self.label_before.parse()?,
                after: self.label_after.parse()?,
            },
            provenance: Provenance {
                recording_id: self.recording_id,
                ego_vehicle_id: self.ego_vehicle_id,
                anchor_frame: self.anchor_frame,
            },
            augmentation,
        })
    }
}

pub fn write_dataset<W: Write>(mut out: W, dt: f64, records: &[ScenarioRecord]) -> Result<()> {
    serde_json::to_writer(&mut out, &DatasetHeader::current(dt))?;
    out.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut out, &RecordLine::from_record(r))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<(DatasetHeader, Vec<ScenarioRecord>)> {
    let mut lines = input.lines();
    let header_line = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing header".into(),
    })??;
    let header: DatasetHeader = serde_json::from_str(&header_line).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    header.check()?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let number = i as u64 + 2;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: number,
            message: e.to_string(),
        })?;
        records.push(parsed.into_record(number)?);
    }
    Ok((header, records))
}

pub fn save_dataset(path: &Path, dt: f64, records: &[ScenarioRecord]) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), dt, records)
}

pub fn load_dataset(path: &Path) -> Result<(DatasetHeader, Vec<ScenarioRecord>)> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact {
            path: path.to_path_buf(),
        },
        _ => e.into(),
    })?;
    read_dataset(BufReader::new(file))
}
