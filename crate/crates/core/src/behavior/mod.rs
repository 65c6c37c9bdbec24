//! Ego behavior change detection: threshold rules on longitudinal
//! acceleration and accumulated lateral displacement, two baselines, and
//! scoring against annotations.

pub mod ema;
pub mod evaluation;
pub mod lateral;
pub mod longitudinal;
pub mod postprocess;
pub mod snippet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ChangePoint, Trajectory};

pub use ema::{detect_ema, EmaConfig, PeakThreshold};
pub use evaluation::{evaluate_detection, read_annotations, write_annotations, Annotation, DetectionMatch};
pub use lateral::{detect_lateral, LateralSegment};
pub use longitudinal::{count_onsets, detect_longitudinal};
pub use postprocess::{change_points, postprocess, Segment};
pub use snippet::{change_frames_from_codes, SnippetClusterDetector, SnippetConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// `(tau_up [m/s^2], n_up [frames])` pairs evaluated in parallel.
    pub up_pairs: Vec<(f64, usize)>,
    pub tau_down: f64,
    pub n_down: usize,
    pub tau_extreme: f64,
    /// Lateral displacement threshold in meters.
    pub tau_lc: f64,
    pub min_segment: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            up_pairs: vec![(0.2, 100), (0.3, 50), (0.4, 25)],
            tau_down: 0.1,
            n_down: 25,
            tau_extreme: 2.5,
            tau_lc: 2.0,
            min_segment: 3,
        }
    }
}

impl DetectorConfig {
    pub fn min_tau_up(&self) -> f64 {
        self.up_pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min)
    }

    pub fn max_tau_up(&self) -> f64 {
        self.up_pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_n_up(&self) -> usize {
        self.up_pairs.iter().map(|p| p.1).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("detector: {m}")));
        if self.up_pairs.is_empty() {
            return bad("up_pairs must not be empty");
        }
        if self.up_pairs.iter().any(|&(t, n)| !(t > 0.0) || n == 0) {
            return bad("every up pair needs tau_up > 0 and n_up >= 1");
        }
        if !(self.tau_down > 0.0) || !(self.tau_extreme > 0.0) || !(self.tau_lc > 0.0) {
            return bad("thresholds must be positive");
        }
        if self.n_down == 0 {
            return bad("n_down must be >= 1");
        }
        if self.tau_extreme <= self.max_tau_up() {
            return bad("tau_extreme must exceed every tau_up");
        }
        if self.tau_down > self.min_tau_up() {
            return bad("tau_down must not exceed the smallest tau_up");
        }
        if self.min_segment == 0 {
            return bad("min_segment must be >= 1");
        }
        Ok(())
    }
}

/// Full rule-based detection on one trajectory.
pub fn detect(traj: &Trajectory, cfg: &DetectorConfig) -> (Vec<Segment>, Vec<ChangePoint>) {
    let lon = detect_longitudinal(traj, cfg);
    let lat = detect_lateral(traj, cfg);
    postprocess(&lon, &lat, cfg)
}
