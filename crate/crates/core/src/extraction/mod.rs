//! Scenario extraction around ego change points.

pub mod augment;
pub mod split;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dgsfm::{interaction_from_tensor, DgsfmConfig};
use crate::error::{Error, Result};
use crate::types::{
    ChangePoint, Lateral, Provenance, PseudoClassLabel, ScenarioRecord, ScenarioTensor, Trajectory,
    N_CLASSES, N_FEATURES, N_SLOTS, T_OBS,
};

pub use augment::{augment_dataset, augment_irrelevant, remove_augmentation, AugmentConfig};
pub use split::split;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub pre_frames: usize,
    pub post_frames: usize,
    /// Tensor start relative to the anchor frame.
    pub tensor_offset: i64,
    /// Allowed `(before.lateral, after.lateral)` pairs; `None` keeps all.
    pub class_filter: Option<Vec<(Lateral, Lateral)>>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            pre_frames: 50,
            post_frames: 75,
            tensor_offset: -25,
            class_filter: None,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pre_frames + self.post_frames + 1 < T_OBS {
            return Err(Error::Config(format!(
                "extraction window of {} frames is shorter than T_obs = {T_OBS}",
                self.pre_frames + self.post_frames + 1
            )));
        }
        let (start, end) = self.tensor_range(0);
        if start < -(self.pre_frames as i64) || end > self.post_frames as i64 {
            return Err(Error::Config(
                "tensor window must lie inside the extraction window".into(),
            ));
        }
        Ok(())
    }

    /// Inclusive extraction window around `t_c`.
    pub fn window(&self, t_c: i64) -> (i64, i64) {
        (t_c - self.pre_frames as i64, t_c + self.post_frames as i64)
    }

    /// Inclusive tensor frame range around `t_c`.
    pub fn tensor_range(&self, t_c: i64) -> (i64, i64) {
        let start = t_c + self.tensor_offset;
        (start, start + T_OBS as i64 - 1)
    }

    pub fn accepts(&self, cp: &ChangePoint) -> bool {
        self.class_filter.as_ref().is_none_or(|allowed| {
            allowed
                .iter()
                .any(|&(b, a)| cp.before.lateral == b && cp.after.lateral == a)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtractionSummary {
    pub emitted: usize,
    pub skipped_windows: usize,
    pub filtered: usize,
    pub per_class: BTreeMap<String, usize>,
}

impl ExtractionSummary {
    pub fn merge(&mut self, other: &ExtractionSummary) {
        self.emitted += other.emitted;
        self.skipped_windows += other.skipped_windows;
        self.filtered += other.filtered;
        for (k, v) in &other.per_class {
            *self.per_class.entry(k.clone()).or_default() += v;
        }
    }

    pub fn counts_by_index(&self) -> [usize; N_CLASSES] {
        let mut out = [0; N_CLASSES];
        for (k, v) in &self.per_class {
            if let Ok(label) = k.parse() {
                out[PseudoClassLabel::from_label(label).index()] += v;
            }
        }
        out
    }
}

pub fn record_id(recording_id: &str, vehicle_id: i64, frame: i64) -> String {
    format!("{recording_id}/{vehicle_id}/{frame}")
}

fn planar_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Up to `N_SLOTS - 1` vehicles nearest to the ego, on the ego's
/// carriageway and present in the tensor range. Distance is taken at the
/// anchor, or at the neighbor's frame closest to it when the neighbor is
/// absent at the anchor. Ties go to the lower vehicle id.
pub fn select_neighbors<'a>(
    ego: &Trajectory,
    others: &'a [Trajectory],
    t_c: i64,
    range: (i64, i64),
) -> Vec<&'a Trajectory> {
    let mut ranked: Vec<(f64, i64, &Trajectory)> = others
        .iter()
        .filter(|o| o.vehicle_id != ego.vehicle_id && o.carriageway == ego.carriageway)
        .filter_map(|o| {
            let lo = range.0.max(o.first_frame());
            let hi = range.1.min(o.last_frame());
            if lo > hi {
                return None;
            }
            let frame = t_c.clamp(lo, hi);
            let p = o.at(frame)?;
            let e = ego.at(frame)?;
            Some((planar_distance((p.x, p.y), (e.x, e.y)), o.vehicle_id, o))
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked
        .into_iter()
        .take(N_SLOTS - 1)
        .map(|(_, _, o)| o)
        .collect()
}

/// Builds the scenario record for one change point, or `None` when the ego
/// does not cover the extraction window.
pub fn extract_one(
    ego: &Trajectory,
    others: &[Trajectory],
    cp: &ChangePoint,
    cfg: &ExtractionConfig,
    dgsfm: &DgsfmConfig,
) -> Option<ScenarioRecord> {
    let (w0, w1) = cfg.window(cp.frame);
    if !ego.covers(w0, w1) {
        return None;
    }
    let origin = ego.at(cp.frame).map(|p| (p.x, p.y))?;
    let range = cfg.tensor_range(cp.frame);
    let mut tensor = ScenarioTensor::zeros();
    let neighbors = select_neighbors(ego, others, cp.frame, range);
    for (slot, traj) in std::iter::once(ego).chain(neighbors).enumerate() {
        for t in 0..T_OBS {
            let Some(p) = traj.at(range.0 + t as i64) else {
                continue;
            };
            let mut f = p.features();
            f[0] -= origin.0;
            f[1] -= origin.1;
            for (k, v) in f.iter().enumerate().take(N_FEATURES) {
                tensor.set(slot, k, t, *v);
            }
            tensor.set_present(slot, t, true);
        }
    }
    let interaction = interaction_from_tensor(&tensor, dgsfm);
    Some(ScenarioRecord {
        id: record_id(&ego.recording_id, ego.vehicle_id, cp.frame),
        tensor,
        pseudo_class: PseudoClassLabel::from_label(cp.after),
        interaction,
        anchor: *cp,
        provenance: Provenance {
            recording_id: ego.recording_id.clone(),
            ego_vehicle_id: ego.vehicle_id,
            anchor_frame: cp.frame,
        },
        augmentation: None,
    })
}

/// Extracts records for every change point of every listed ego in one
/// recording. Change points are keyed by ego vehicle id; egos missing from
/// `trajectories` are ignored.
pub fn extract(
    trajectories: &[Trajectory],
    change_points: &BTreeMap<i64, Vec<ChangePoint>>,
    cfg: &ExtractionConfig,
    dgsfm: &DgsfmConfig,
) -> (Vec<ScenarioRecord>, ExtractionSummary) {
    let mut records = Vec::new();
    let mut summary = ExtractionSummary::default();
    for ego in trajectories {
        let Some(cps) = change_points.get(&ego.vehicle_id) else {
            continue;
        };
        for cp in cps {
            if !cfg.accepts(cp) {
                summary.filtered += 1;
                continue;
            }
            match extract_one(ego, trajectories, cp, cfg, dgsfm) {
                Some(r) => {
                    *summary.per_class.entry(cp.after.to_string()).or_default() += 1;
                    summary.emitted += 1;
                    records.push(r);
                }
                None => summary.skipped_windows += 1,
            }
        }
    }
    (records, summary)
}
