//! Scripted synthetic trajectories with known behavior changes.
//!
//! Each script lists non-overlapping maneuvers; frames between maneuvers
//! are cruise. Longitudinal kinematics are integrated exactly from the
//! commanded acceleration plus a band-limited (Ornstein-Uhlenbeck) noise
//! term. Lateral drift is white acceleration noise with a lane-keeping
//! restoring term. Lane changes use a raised-cosine lateral velocity pulse whose
//! discrete sum equals one lane width.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    ChangePoint, CompositeLabel, Direction, Lateral, Longitudinal, TrackPoint, Trajectory,
    LANE_WIDTH,
};

/// Correlation time of the longitudinal acceleration noise.
pub const NOISE_CORRELATION_S: f64 = 1.0;
/// Lateral acceleration noise sigma as a fraction of the longitudinal one.
pub const LATERAL_NOISE_RATIO: f64 = 0.5;
/// Time constant pulling lateral velocity drift back to zero.
const LANE_KEEPING_S: f64 = 0.2;
const MAX_RAMP_FRAMES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Maneuver {
    Cruise,
    Accelerate { accel: f64 },
    Decelerate { accel: f64 },
    LaneChange { side: Side },
    ExtremeBrake { accel: f64 },
}

impl Maneuver {
    /// Composite label the maneuver is annotated with.
    pub fn label(self) -> CompositeLabel {
        use Longitudinal::*;
        match self {
            Maneuver::Cruise => CompositeLabel::CRUISE,
            Maneuver::Accelerate { .. } => CompositeLabel::new(Accelerate, Lateral::KeepLane),
            Maneuver::Decelerate { .. } => CompositeLabel::new(Decelerate, Lateral::KeepLane),
            Maneuver::LaneChange { .. } => CompositeLabel::new(Zero, Lateral::LaneChange),
            Maneuver::ExtremeBrake { .. } => {
                CompositeLabel::new(ExtremeDecelerate, Lateral::KeepLane)
            }
        }
    }

    /// Signed commanded acceleration plateau.
    fn plateau(self) -> f64 {
        match self {
            Maneuver::Accelerate { accel } => accel,
            Maneuver::Decelerate { accel } | Maneuver::ExtremeBrake { accel } => -accel,
            Maneuver::Cruise | Maneuver::LaneChange { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedManeuver {
    pub start_frame: usize,
    pub duration: usize,
    pub maneuver: Maneuver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub lane: i32,
}

/// Script for one synthetic vehicle. Maneuver frames are relative to the
/// first frame of the trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScript {
    pub vehicle_id: i64,
    pub recording_id: String,
    pub first_frame: i64,
    pub frames: usize,
    pub initial: InitialState,
    pub maneuvers: Vec<ScriptedManeuver>,
    pub noise_sigma_accel: f64,
}

impl SyntheticScript {
    pub fn cruise(vehicle_id: i64, frames: usize, initial: InitialState) -> Self {
        Self {
            vehicle_id,
            recording_id: "synthetic".into(),
            first_frame: 0,
            frames,
            initial,
            maneuvers: Vec::new(),
            noise_sigma_accel: 0.0,
        }
    }

    pub fn with(mut self, start_frame: usize, duration: usize, maneuver: Maneuver) -> Self {
        self.maneuvers.push(ScriptedManeuver {
            start_frame,
            duration,
            maneuver,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Script(format!("vehicle {}: {m}", self.vehicle_id)));
        if self.frames == 0 {
            return err("script has no frames".into());
        }
        if !(self.noise_sigma_accel >= 0.0 && self.noise_sigma_accel.is_finite()) {
            return err("noise sigma must be finite and non-negative".into());
        }
        let mut end_prev = 0;
        for (i, m) in self.maneuvers.iter().enumerate() {
            if m.duration == 0 {
                return err(format!("maneuver {i} has zero duration"));
            }
            if i > 0 && m.start_frame < end_prev {
                return err(format!("maneuver {i} overlaps or precedes maneuver {}", i - 1));
            }
            if m.start_frame + m.duration > self.frames {
                return err(format!("maneuver {i} runs past the end of the script"));
            }
            let a = m.maneuver.plateau().abs();
            if !a.is_finite() {
                return err(format!("maneuver {i} has a non-finite acceleration"));
            }
            if matches!(
                m.maneuver,
                Maneuver::Accelerate { .. } | Maneuver::Decelerate { .. } | Maneuver::ExtremeBrake { .. }
            ) && a <= 0.0
            {
                return err(format!("maneuver {i} needs a positive acceleration"));
            }
            end_prev = m.start_frame + m.duration;
        }
        Ok(())
    }

    /// Scripted label of every frame (cruise outside maneuvers).
    pub fn frame_labels(&self) -> Vec<CompositeLabel> {
        let mut labels = vec![CompositeLabel::CRUISE; self.frames];
        for m in &self.maneuvers {
            for l in &mut labels[m.start_frame..m.start_frame + m.duration] {
                *l = m.maneuver.label();
            }
        }
        labels
    }

    /// Ground-truth change points: every frame where the scripted label
    /// differs from the previous frame.
    pub fn ground_truth(&self) -> Vec<ChangePoint> {
        let labels = self.frame_labels();
        (1..labels.len())
            .filter(|&k| labels[k] != labels[k - 1])
            .map(|k| ChangePoint {
                frame: self.first_frame + k as i64,
                before: labels[k - 1],
                after: labels[k],
            })
            .collect()
    }
}

/// Stationary first-order Gauss-Markov process.
struct OrnsteinUhlenbeck {
    phi: f64,
    innovation: f64,
    value: f64,
}

impl OrnsteinUhlenbeck {
    fn new(sigma: f64, correlation_s: f64, dt: f64, rng: &mut ChaCha8Rng) -> Self {
        let phi = (-dt / correlation_s).exp();
        let z: f64 = rng.sample(StandardNormal);
        Self {
            phi,
            innovation: sigma * (1.0 - phi * phi).sqrt(),
            value: sigma * z,
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let out = self.value;
        let z: f64 = rng.sample(StandardNormal);
        self.value = self.phi * self.value + self.innovation * z;
        out
    }
}

fn ramp_weight(j: usize, duration: usize) -> f64 {
    let ramp = (duration / 4).clamp(1, MAX_RAMP_FRAMES) as f64;
    let up = (j + 1) as f64 / ramp;
    let down = (duration - j - 1) as f64 / ramp;
    up.min(down).min(1.0)
}

fn generate_one(script: &SyntheticScript, dt: f64, rng: &mut ChaCha8Rng) -> Trajectory {
    let n = script.frames;
    let mut ax_cmd = vec![0.0; n];
    let mut vy_ref = vec![0.0; n];
    let mut ay_ref = vec![0.0; n];
    let mut lane = vec![script.initial.lane; n];
    for m in &script.maneuvers {
        let d = m.duration;
        match m.maneuver {
            Maneuver::LaneChange { side } => {
                let sign = if side == Side::Left { 1.0 } else { -1.0 };
                let period = d as f64 * dt;
                let amp = LANE_WIDTH / period;
                let omega = 2.0 * std::f64::consts::PI / d as f64;
                for j in 0..d {
                    let phase = omega * j as f64;
                    vy_ref[m.start_frame + j] = sign * amp * (1.0 - phase.cos());
                    ay_ref[m.start_frame + j] = sign * amp * (omega / dt) * phase.sin();
                }
                let shift = if side == Side::Left { 1 } else { -1 };
                for l in &mut lane[m.start_frame + d / 2..] {
                    *l += shift;
                }
            }
            other => {
                let plateau = other.plateau();
                for j in 0..d {
                    ax_cmd[m.start_frame + j] = plateau * ramp_weight(j, d);
                }
            }
        }
    }

    let sigma = script.noise_sigma_accel;
    let noisy = sigma > 0.0;
    let mut lon_noise = OrnsteinUhlenbeck::new(sigma, NOISE_CORRELATION_S, dt, rng);
    let lat_sigma = sigma * LATERAL_NOISE_RATIO;

    let mut points = Vec::with_capacity(n);
    let (mut x, mut y, mut vx) = (script.initial.x, script.initial.y, script.initial.vx);
    let mut vy_drift = 0.0;
    for k in 0..n {
        let (nx, ny) = if noisy {
            let z: f64 = rng.sample(StandardNormal);
            (lon_noise.next(rng), lat_sigma * z)
        } else {
            (0.0, 0.0)
        };
        let ax = ax_cmd[k] + nx;
        let drift_accel = ny - vy_drift / LANE_KEEPING_S;
        let vy = vy_ref[k] + vy_drift;
        let ay = ay_ref[k] + drift_accel;
        points.push(TrackPoint {
            frame: script.first_frame + k as i64,
            x,
            y,
            vx,
            vy,
            ax,
            ay,
            lane_id: lane[k],
        });
        x += vx * dt + 0.5 * ax * dt * dt;
        vx += ax * dt;
        y += vy * dt;
        vy_drift += drift_accel * dt;
    }
    Trajectory {
        vehicle_id: script.vehicle_id,
        recording_id: script.recording_id.clone(),
        carriageway: Direction::PositiveX,
        dt,
        points,
    }
}

/// Integrates every script into a trajectory and returns the scripted
/// change points alongside. Script `i` draws its noise from stream `i` of a
/// generator seeded with `seed`, so outputs are independent of script order
/// in the rest of the list.
pub fn generate_synthetic(
    scripts: &[SyntheticScript],
    dt: f64,
    seed: u64,
) -> Result<(Vec<Trajectory>, Vec<Vec<ChangePoint>>)> {
    if !(dt > 0.0) {
        return Err(Error::Script(format!("dt must be positive, got {dt}")));
    }
    let mut trajectories = Vec::with_capacity(scripts.len());
    let mut truths = Vec::with_capacity(scripts.len());
    for (i, script) in scripts.iter().enumerate() {
        script.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        trajectories.push(generate_one(script, dt, &mut rng));
        truths.push(script.ground_truth());
    }
    Ok((trajectories, truths))
}

/// Random maneuver scripts for detection corpora: 3 to 5 maneuvers per
/// vehicle separated by cruise gaps of at least `min_gap` frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptSampler {
    pub frames: usize,
    pub min_gap: usize,
    pub noise_sigma_accel: f64,
}

impl Default for ScriptSampler {
    fn default() -> Self {
        Self {
            frames: 1500,
            min_gap: 100,
            noise_sigma_accel: 0.05,
        }
    }
}

impl ScriptSampler {
    pub fn sample(&self, count: usize, seed: u64) -> Vec<SyntheticScript> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| self.sample_one(i as i64, &mut rng))
            .collect()
    }

    fn sample_one(&self, vehicle_id: i64, rng: &mut ChaCha8Rng) -> SyntheticScript {
        let initial = InitialState {
            x: rng.random_range(0.0..200.0),
            y: LANE_WIDTH * 1.5,
            vx: rng.random_range(24.0..34.0),
            lane: 2,
        };
        let mut script = SyntheticScript::cruise(vehicle_id, self.frames, initial);
        script.noise_sigma_accel = self.noise_sigma_accel;
        let mut lane = 0i32;
        let mut cursor = self.min_gap + rng.random_range(0..self.min_gap);
        let wanted = rng.random_range(3..=5);
        while script.maneuvers.len() < wanted {
            let (maneuver, duration) = match rng.random_range(0..4) {
                0 => (
                    Maneuver::Accelerate {
                        accel: rng.random_range(0.5..1.2),
                    },
                    rng.random_range(75..200),
                ),
                1 => (
                    Maneuver::Decelerate {
                        accel: rng.random_range(0.5..1.5),
                    },
                    rng.random_range(75..200),
                ),
                2 => {
                    let side = match lane {
                        l if l >= 1 => Side::Right,
                        l if l <= -1 => Side::Left,
                        _ if rng.random_bool(0.5) => Side::Left,
                        _ => Side::Right,
                    };
                    lane += if side == Side::Left { 1 } else { -1 };
                    (Maneuver::LaneChange { side }, rng.random_range(100..150))
                }
                _ => (
                    Maneuver::ExtremeBrake {
                        accel: rng.random_range(3.5..5.0),
                    },
                    rng.random_range(40..60),
                ),
            };
            if cursor + duration + self.min_gap > self.frames {
                break;
            }
            script.maneuvers.push(ScriptedManeuver {
                start_frame: cursor,
                duration,
                maneuver,
            });
            cursor += duration + self.min_gap + rng.random_range(0..self.min_gap);
        }
        script
    }
}
