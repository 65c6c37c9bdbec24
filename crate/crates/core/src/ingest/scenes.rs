//! Multi-vehicle synthetic scenes built around one of three ego
//! interaction archetypes, with distant background traffic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::synthetic::{generate_synthetic, InitialState, Maneuver, Side, SyntheticScript};
use crate::error::{Error, Result};
use crate::types::{ChangePoint, Trajectory, LANE_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    /// Ego closes in on a slower lead and changes to the left lane.
    Overtake,
    /// A neighbor merges in front of the ego, which then brakes.
    CutIn,
    /// Ego accelerates on a free lane.
    FreeAcceleration,
}

impl Archetype {
    pub const ALL: [Archetype; 3] = [Archetype::Overtake, Archetype::CutIn, Archetype::FreeAcceleration];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub frames: usize,
    /// Earliest and latest ego maneuver onset.
    pub onset: (usize, usize),
    /// Inclusive range of background vehicle counts.
    pub background: (usize, usize),
    /// Smallest initial longitudinal distance of background vehicles.
    pub background_min_gap: f64,
    /// Probability that a background vehicle performs one maneuver
    /// (acceleration, deceleration or lane change) during the scene.
    pub background_maneuver_prob: f64,
    pub background_max_accel: f64,
    pub noise_sigma_accel: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            frames: 200,
            onset: (60, 80),
            background: (2, 5),
            background_min_gap: 30.0,
            background_maneuver_prob: 0.5,
            background_max_accel: 1.0,
            noise_sigma_accel: 0.05,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.onset.0 < 50 || self.onset.0 > self.onset.1 || self.onset.1 + 120 > self.frames {
            return Err(Error::Config(
                "scenes: onset range must start at >= 50 and leave 120 frames before the end".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.background_maneuver_prob) {
            return Err(Error::Config("scenes: background_maneuver_prob must lie in [0, 1]".into()));
        }
        if self.background.0 > self.background.1 || self.background.1 > 6 {
            return Err(Error::Config("scenes: background range must be ordered and at most 6".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub archetype: Archetype,
    pub ego_id: i64,
    pub trajectories: Vec<Trajectory>,
    /// Scripted ego change points.
    pub ego_truth: Vec<ChangePoint>,
    /// Ids of the background vehicles.
    pub background_ids: Vec<i64>,
}

impl Scene {
    pub fn ego(&self) -> &Trajectory {
        self.trajectories
            .iter()
            .find(|t| t.vehicle_id == self.ego_id)
            .expect("ego is part of the scene")
    }
}

fn lane_y(lane: i32) -> f64 {
    (lane as f64 - 0.5) * LANE_WIDTH
}

const EGO_LANE: i32 = 2;

/// One scene. Vehicle ids are 1 for the ego, 2 for the interacting vehicle
/// when there is one, then background vehicles.
pub fn generate_scene(archetype: Archetype, recording_id: &str, cfg: &SceneConfig, dt: f64, seed: u64) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = cfg.frames;
    let onset = rng.random_range(cfg.onset.0..=cfg.onset.1);
    let ego_v = rng.random_range(26.0..32.0);
    let ego_init = InitialState { x: 0.0, y: lane_y(EGO_LANE), vx: ego_v, lane: EGO_LANE };
    let mut ego = SyntheticScript::cruise(1, frames, ego_init);
    let mut scripts = Vec::new();
    match archetype {
        Archetype::Overtake => {
            ego = ego.with(onset, rng.random_range(100..=130).min(frames - onset), Maneuver::LaneChange { side: Side::Left });
            let lead = InitialState {
                x: rng.random_range(25.0..40.0) + 3.0 * onset as f64 * dt,
                y: lane_y(EGO_LANE),
                vx: ego_v - 3.0 - rng.random_range(0.0..3.0),
                lane: EGO_LANE,
            };
            scripts.push(SyntheticScript::cruise(2, frames, lead));
        }
        Archetype::CutIn => {
            ego = ego.with(onset, frames - onset, Maneuver::Decelerate { accel: rng.random_range(1.0..2.0) });
            let merger = InitialState {
                x: rng.random_range(8.0..18.0),
                y: lane_y(EGO_LANE + 1),
                vx: ego_v - rng.random_range(1.0..3.0),
                lane: EGO_LANE + 1,
            };
            scripts.push(SyntheticScript::cruise(2, frames, merger).with(onset - 40, 100, Maneuver::LaneChange { side: Side::Right }));
        }
        Archetype::FreeAcceleration => {
            ego = ego.with(onset, frames - onset, Maneuver::Accelerate { accel: rng.random_range(0.6..1.2) });
        }
    }
    let n_bg = rng.random_range(cfg.background.0..=cfg.background.1);
    let first_bg = 2 + scripts.len() as i64;
    let mut background_ids = Vec::with_capacity(n_bg);
    for k in 0..n_bg {
        let lane = rng.random_range(1..=3);
        let ahead = lane != EGO_LANE && rng.random_bool(0.5);
        let gap = rng.random_range(cfg.background_min_gap..cfg.background_min_gap + 60.0);
        let init = InitialState {
            x: if ahead { gap } else { -gap },
            y: lane_y(lane),
            vx: ego_v + rng.random_range(-2.0..2.0),
            lane,
        };
        let id = first_bg + k as i64;
        background_ids.push(id);
        let mut script = SyntheticScript::cruise(id, frames, init);
        if rng.random_bool(cfg.background_maneuver_prob) {
            let (m, duration) = match rng.random_range(0..3) {
                0 => (Maneuver::Accelerate { accel: rng.random_range(0.3..cfg.background_max_accel) }, rng.random_range(60..=150)),
                1 => (Maneuver::Decelerate { accel: rng.random_range(0.3..cfg.background_max_accel) }, rng.random_range(60..=150)),
                _ => {
                    let side = match lane {
                        1 => Side::Left,
                        3 => Side::Right,
                        _ if rng.random_bool(0.5) => Side::Left,
                        _ => Side::Right,
                    };
                    (Maneuver::LaneChange { side }, rng.random_range(100..=130))
                }
            };
            let start = rng.random_range(0..frames - duration);
            script = script.with(start, duration, m);
        }
        scripts.push(script);
    }
    scripts.insert(0, ego);
    for s in &mut scripts {
        s.recording_id = recording_id.to_string();
        s.noise_sigma_accel = cfg.noise_sigma_accel;
    }
    let (trajectories, truths) = generate_synthetic(&scripts, dt, rng.random())?;
    Ok(Scene {
        archetype,
        ego_id: 1,
        trajectories,
        ego_truth: truths[0].clone(),
        background_ids,
    })
}

/// `count` scenes cycling through the archetypes, recordings named
/// `scene0000`, `scene0001`, ...
pub fn generate_scenes(count: usize, cfg: &SceneConfig, dt: f64, seed: u64) -> Result<Vec<Scene>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let archetype = Archetype::ALL[i % Archetype::ALL.len()];
            generate_scene(archetype, &format!("scene{i:04}"), cfg, dt, rng.random())
        })
        .collect()
}
