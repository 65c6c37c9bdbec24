use crate::types::{Lateral, Trajectory};

use super::DetectorConfig;

/// Constant-sign lateral velocity interval with its accumulated
/// displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralSegment {
    pub start_frame: i64,
    pub end_frame: i64,
    pub displacement: f64,
    pub lateral: Lateral,
}

impl LateralSegment {
    pub fn len(&self) -> usize {
        (self.end_frame - self.start_frame + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end_frame < self.start_frame
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Sum of `vy * dt` over samples `from..to`.
pub fn displacement(vy: &[f64], dt: f64, from: usize, to: usize) -> f64 {
    vy[from..to].iter().map(|v| v * dt).sum()
}

/// Splits a lateral velocity signal into maximal constant-sign intervals
/// and labels each one a lane change when its accumulated displacement
/// exceeds `tau_lc` in magnitude.
pub fn lateral_segments(
    vy: &[f64],
    dt: f64,
    first_frame: i64,
    cfg: &DetectorConfig,
) -> Vec<LateralSegment> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < vy.len() {
        let s = sign(vy[start]);
        let mut end = start + 1;
        while end < vy.len() && sign(vy[end]) == s {
            end += 1;
        }
        let dy = displacement(vy, dt, start, end);
        out.push(LateralSegment {
            start_frame: first_frame + start as i64,
            end_frame: first_frame + end as i64 - 1,
            displacement: dy,
            lateral: if dy.abs() > cfg.tau_lc {
                Lateral::LaneChange
            } else {
                Lateral::KeepLane
            },
        });
        start = end;
    }
    out
}

pub fn detect_lateral(traj: &Trajectory, cfg: &DetectorConfig) -> Vec<LateralSegment> {
    let vy: Vec<f64> = traj.points.iter().map(|p| p.vy).collect();
    lateral_segments(&vy, traj.dt, traj.first_frame(), cfg)
}
