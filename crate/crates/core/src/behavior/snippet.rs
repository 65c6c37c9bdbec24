//! Snippet-cluster baseline: a quantizing autoencoder on fixed-length
//! single-vehicle snippets, with a change declared wherever the code of
//! consecutive snippets differs.

use serde::{Deserialize, Serialize};

use crate::cvqvae::{dims_for, train, ModelConfig, ModelParams, Sample, SampleSet, TrainConfig};
use crate::error::{Error, Result};
use crate::types::{Trajectory, N_FEATURES};

pub const DEFAULT_SNIPPET_LEN: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnippetConfig {
    pub snippet_len: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for SnippetConfig {
    fn default() -> Self {
        Self {
            snippet_len: DEFAULT_SNIPPET_LEN,
            model: ModelConfig {
                hidden: vec![64],
                latent_dim: 16,
                codebook_size: 64,
            },
            train: TrainConfig {
                lambda_cl: 0.0,
                lambda_int: 0.0,
                epochs: 50,
                ..TrainConfig::default()
            },
        }
    }
}

/// Feature-major snippet vector: the six kinematic channels over
/// `len` frames, positions relative to the snippet's first frame.
pub fn snippet_input(points: &[crate::types::TrackPoint]) -> Vec<f64> {
    let len = points.len();
    let mut out = vec![0.0; N_FEATURES * len];
    let (x0, y0) = (points[0].x, points[0].y);
    for (t, p) in points.iter().enumerate() {
        let mut f = p.features();
        f[0] -= x0;
        f[1] -= y0;
        for (k, v) in f.iter().enumerate() {
            out[k * len + t] = *v;
        }
    }
    out
}

/// Consecutive non-overlapping snippets of `traj`; a trailing partial
/// snippet is dropped.
pub fn snippets(traj: &Trajectory, len: usize) -> Vec<Vec<f64>> {
    if len == 0 {
        return Vec::new();
    }
    traj.points.chunks_exact(len).map(snippet_input).collect()
}

/// Training set of all snippets, one input-scale group per channel.
pub fn snippet_set(trajs: &[Trajectory], len: usize) -> SampleSet {
    let samples = trajs
        .iter()
        .flat_map(|t| snippets(t, len))
        .map(|input| Sample {
            mask: vec![1.0; input.len()],
            input,
            class: None,
            interaction: Vec::new(),
            interaction_mask: Vec::new(),
        })
        .collect();
    SampleSet {
        samples,
        groups: (0..N_FEATURES * len).map(|j| j / len.max(1)).collect(),
    }
}

/// Frames at which the code of consecutive snippets differs. Snippet `k`
/// starts at `first_frame + k * snippet_len`.
pub fn change_frames_from_codes(codes: &[usize], first_frame: i64, snippet_len: usize) -> Vec<i64> {
    codes
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(k, _)| first_frame + ((k + 1) * snippet_len) as i64)
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct SnippetClusterDetector {
    pub model: Option<ModelParams>,
    pub snippet_len: usize,
}

impl SnippetClusterDetector {
    pub fn untrained(snippet_len: usize) -> Self {
        Self { model: None, snippet_len }
    }

    pub fn fit(trajs: &[Trajectory], cfg: &SnippetConfig) -> Result<Self> {
        let set = snippet_set(trajs, cfg.snippet_len);
        if set.samples.is_empty() {
            return Err(Error::Input(format!(
                "no trajectory spans a full snippet of {} frames",
                cfg.snippet_len
            )));
        }
        let dims = dims_for(&set, &cfg.model, 0, 0);
        let outcome = train(&set, dims, &cfg.train)?;
        Ok(Self {
            model: Some(outcome.params),
            snippet_len: cfg.snippet_len,
        })
    }

    fn model(&self) -> Result<&ModelParams> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::State("snippet detector has no trained model".into()))
    }

    pub fn codes(&self, traj: &Trajectory) -> Result<Vec<usize>> {
        let model = self.model()?;
        snippets(traj, self.snippet_len).iter().map(|s| model.assign(s)).collect()
    }

    pub fn detect(&self, traj: &Trajectory) -> Result<Vec<i64>> {
        let codes = self.codes(traj)?;
        if traj.is_empty() {
            return Ok(Vec::new());
        }
        Ok(change_frames_from_codes(&codes, traj.first_frame(), self.snippet_len))
    }
}
