//! Directed-gradient social force scores.
//!
//! Each vehicle carries an egg-shaped potential stretched along its
//! heading. A neighbor's score mixes how far it intrudes into the ego's
//! field now with how the ego's intrusion into the neighbor's field changes
//! over a short constant-velocity extrapolation. Scores are normalized per
//! frame with a softmax over present neighbors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{InteractionMatrix, ScenarioTensor, N_SLOTS, T_OBS};

/// Below this speed the heading falls back to +x.
pub const MIN_HEADING_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EggPotentialParams {
    pub amplitude: f64,
    pub sigma: f64,
    pub forward_stretch: f64,
    pub rear_compress: f64,
    pub lateral_scale: f64,
}

impl Default for EggPotentialParams {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            sigma: 10.0,
            forward_stretch: 2.0,
            rear_compress: 0.5,
            lateral_scale: 0.6,
        }
    }
}

impl EggPotentialParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.amplitude,
            self.sigma,
            self.forward_stretch,
            self.rear_compress,
            self.lateral_scale,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
        if !positive {
            return Err(Error::Config("egg parameters must be positive".into()));
        }
        if !(self.forward_stretch >= 1.0 && self.rear_compress <= 1.0) {
            return Err(Error::Config(
                "egg parameters need forward_stretch >= 1 >= rear_compress".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgsfmConfig {
    pub egg: EggPotentialParams,
    pub tau_sum: f64,
    pub n_dg: usize,
    pub dt: f64,
    pub softmax_temperature: f64,
}

impl Default for DgsfmConfig {
    fn default() -> Self {
        Self {
            egg: EggPotentialParams::default(),
            tau_sum: 0.5,
            n_dg: 25,
            dt: crate::types::DEFAULT_DT,
            softmax_temperature: 1.0,
        }
    }
}

impl DgsfmConfig {
    pub fn validate(&self) -> Result<()> {
        self.egg.validate()?;
        if !(0.0..=1.0).contains(&self.tau_sum) {
            return Err(Error::Config("dgsfm.tau_sum must lie in [0, 1]".into()));
        }
        if self.n_dg == 0 {
            return Err(Error::Config("dgsfm.n_dg must be >= 1".into()));
        }
        if !(self.dt > 0.0) || !(self.softmax_temperature > 0.0) {
            return Err(Error::Config(
                "dgsfm.dt and dgsfm.softmax_temperature must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Planar position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

impl VehicleState {
    pub fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self {
            position: [x, y],
            velocity: [vx, vy],
        }
    }

    /// Constant-velocity position after `steps` frames.
    pub fn extrapolate(&self, steps: usize, dt: f64) -> [f64; 2] {
        let h = steps as f64 * dt;
        [
            self.position[0] + h * self.velocity[0],
            self.position[1] + h * self.velocity[1],
        ]
    }
}

/// Potential of the field centered at `r_self` and oriented along `v_self`,
/// evaluated at `r_other`.
pub fn v_egg(r_other: [f64; 2], r_self: [f64; 2], v_self: [f64; 2], egg: &EggPotentialParams) -> f64 {
    let speed = v_self[0].hypot(v_self[1]);
    let (cos, sin) = if speed < MIN_HEADING_SPEED {
        (1.0, 0.0)
    } else {
        (v_self[0] / speed, v_self[1] / speed)
    };
    let dx = r_other[0] - r_self[0];
    let dy = r_other[1] - r_self[1];
    let d_long = cos * dx + sin * dy;
    let d_lat = -sin * dx + cos * dy;
    let s = if d_long >= 0.0 {
        egg.forward_stretch * egg.sigma
    } else {
        egg.rear_compress * egg.sigma
    };
    let rho = ((d_long / s).powi(2) + (d_lat / (egg.lateral_scale * egg.sigma)).powi(2)).sqrt();
    egg.amplitude * (-rho).exp()
}

/// `(beta_a, beta_b)` of neighbor `j` with respect to ego `i`.
pub fn beta_components(ego: &VehicleState, neighbor: &VehicleState, cfg: &DgsfmConfig) -> (f64, f64) {
    let beta_a = v_egg(neighbor.position, ego.position, ego.velocity, &cfg.egg);
    let ego_star = ego.extrapolate(cfg.n_dg, cfg.dt);
    let nb_star = neighbor.extrapolate(cfg.n_dg, cfg.dt);
    let beta_b = v_egg(ego_star, nb_star, neighbor.velocity, &cfg.egg)
        - v_egg(ego.position, neighbor.position, neighbor.velocity, &cfg.egg);
    (beta_a, beta_b)
}

pub fn combined_beta(ego: &VehicleState, neighbor: &VehicleState, cfg: &DgsfmConfig) -> f64 {
    let (a, b) = beta_components(ego, neighbor, cfg);
    cfg.tau_sum * a + (1.0 - cfg.tau_sum) * b
}

/// Softmax of `betas / temperature` over the `Some` entries; `None` maps to 0.
pub fn masked_softmax(betas: &[Option<f64>], temperature: f64) -> Vec<f64> {
    let max = betas
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |m, &b| m.max(b / temperature));
    let exps: Vec<f64> = betas
        .iter()
        .map(|b| b.map_or(0.0, |b| (b / temperature - max).exp()))
        .collect();
    let total: f64 = exps.iter().sum();
    if total == 0.0 {
        return exps;
    }
    exps.into_iter().map(|e| e / total).collect()
}

/// Interaction matrix for an ego track and up to `N_SLOTS - 1` neighbor
/// tracks, all `T_OBS` frames long. Neighbor `k` fills slot `k + 1`.
pub fn interaction_scores(
    ego: &[VehicleState],
    neighbors: &[Vec<Option<VehicleState>>],
    cfg: &DgsfmConfig,
) -> Result<InteractionMatrix> {
    if ego.len() != T_OBS {
        return Err(Error::Shape {
            expected: T_OBS,
            actual: ego.len(),
        });
    }
    if neighbors.len() >= N_SLOTS {
        return Err(Error::Shape {
            expected: N_SLOTS - 1,
            actual: neighbors.len(),
        });
    }
    if let Some(bad) = neighbors.iter().find(|n| n.len() != T_OBS) {
        return Err(Error::Shape {
            expected: T_OBS,
            actual: bad.len(),
        });
    }
    let mut m = InteractionMatrix::zeros();
    for t in 0..T_OBS {
        m.set(0, t, 1.0);
        let betas: Vec<Option<f64>> = neighbors
            .iter()
            .map(|n| n[t].map(|s| combined_beta(&ego[t], &s, cfg)))
            .collect();
        for (k, p) in masked_softmax(&betas, cfg.softmax_temperature).into_iter().enumerate() {
            m.set(k + 1, t, p);
        }
    }
    Ok(m)
}

fn state_at(tensor: &ScenarioTensor, slot: usize, t: usize) -> VehicleState {
    VehicleState::new(
        tensor.get(slot, 0, t),
        tensor.get(slot, 1, t),
        tensor.get(slot, 2, t),
        tensor.get(slot, 3, t),
    )
}

/// Interaction matrix from the positions and velocities stored in a
/// scenario tensor, honoring its presence mask.
pub fn interaction_from_tensor(tensor: &ScenarioTensor, cfg: &DgsfmConfig) -> InteractionMatrix {
    let ego: Vec<VehicleState> = (0..T_OBS).map(|t| state_at(tensor, 0, t)).collect();
    let neighbors: Vec<Vec<Option<VehicleState>>> = (1..N_SLOTS)
        .map(|slot| {
            (0..T_OBS)
                .map(|t| tensor.present(slot, t).then(|| state_at(tensor, slot, t)))
                .collect()
        })
        .collect();
    interaction_scores(&ego, &neighbors, cfg).expect("tensor tracks have fixed shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_lateral() -> EggPotentialParams {
        EggPotentialParams {
            lateral_scale: 1.0,
            ..EggPotentialParams::default()
        }
    }

    /// Independent evaluation via the polar form: heading angle and the
    /// angle of the offset.
    fn v_egg_polar(other: [f64; 2], me: [f64; 2], v: [f64; 2], p: &EggPotentialParams) -> f64 {
        let heading = if v[0].hypot(v[1]) < 0.1 { 0.0 } else { v[1].atan2(v[0]) };
        let (dx, dy) = (other[0] - me[0], other[1] - me[1]);
        let r = dx.hypot(dy);
        let phi = dy.atan2(dx) - heading;
        let (lon, lat) = (r * phi.cos(), r * phi.sin());
        let s = if lon >= 0.0 { p.forward_stretch } else { p.rear_compress } * p.sigma;
        p.amplitude * (-((lon / s).powi(2) + (lat / (p.lateral_scale * p.sigma)).powi(2)).sqrt()).exp()
    }

    #[test]
    fn coincident_positions_give_amplitude() {
        let p = EggPotentialParams { amplitude: 2.5, ..Default::default() };
        assert_eq!(v_egg([3.0, 4.0], [3.0, 4.0], [20.0, 1.0], &p), 2.5);
    }

    #[test]
    fn on_axis_values() {
        let p = unit_lateral();
        let ahead = v_egg([20.0, 0.0], [0.0, 0.0], [20.0, 0.0], &p);
        let behind = v_egg([-20.0, 0.0], [0.0, 0.0], [20.0, 0.0], &p);
        assert!((ahead - (-1.0f64).exp()).abs() < 1e-15);
        assert!((behind - (-4.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn forward_exceeds_rear_on_a_grid() {
        let p = EggPotentialParams::default();
        for k in 1..=200 {
            let d = k as f64 * 0.5;
            let f = v_egg([d, 0.0], [0.0, 0.0], [25.0, 0.0], &p);
            let r = v_egg([-d, 0.0], [0.0, 0.0], [25.0, 0.0], &p);
            assert!(f > r, "d = {d}");
        }
    }

    #[test]
    fn slow_vehicle_uses_road_heading() {
        let p = EggPotentialParams::default();
        let a = v_egg([15.0, 2.0], [0.0, 0.0], [0.0, 0.05], &p);
        let b = v_egg([15.0, 2.0], [0.0, 0.0], [1.0, 0.0], &p);
        assert_eq!(a, b);
    }

    #[test]
    fn equal_velocities_cancel_beta_b() {
        let cfg = DgsfmConfig::default();
        let ego = VehicleState::new(0.0, 0.0, 27.0, 0.3);
        let nb = VehicleState::new(-14.0, 3.75, 27.0, 0.3);
        let (a, b) = beta_components(&ego, &nb, &cfg);
        assert!(b.abs() <= 1e-12);
        assert!(a > 0.0);
    }

    #[test]
    fn closing_lead_vehicle_example() {
        let cfg = DgsfmConfig {
            egg: unit_lateral(),
            ..DgsfmConfig::default()
        };
        let ego = VehicleState::new(0.0, 0.0, 20.0, 0.0);
        let nb = VehicleState::new(30.0, 0.0, 15.0, 0.0);
        let (a, b) = beta_components(&ego, &nb, &cfg);
        // Ego at (0,0) heading +x sees j 30 m ahead: rho = 30 / 20.
        assert!((a - (-1.5f64).exp()).abs() < 1e-15);
        // After 1 s: ego at (20,0), j at (45,0). Ego sits 25 m behind j
        // (rho = 25 / 5), previously 30 m behind (rho = 30 / 5).
        let expected = (-5.0f64).exp() - (-6.0f64).exp();
        assert!((b - expected).abs() < 1e-15);
        assert!(b > 0.0);
    }

    #[test]
    fn single_neighbor_row_is_one() {
        let ego = vec![VehicleState::new(0.0, 0.0, 30.0, 0.0); T_OBS];
        let nb = vec![Some(VehicleState::new(40.0, 3.75, 28.0, 0.0)); T_OBS];
        let m = interaction_scores(&ego, &[nb], &DgsfmConfig::default()).unwrap();
        assert!(m.row(0).iter().all(|&v| v == 1.0));
        assert!(m.row(1).iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!((2..N_SLOTS).all(|s| m.row(s).iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn absent_frames_are_zero_and_symmetric_pairs_split_evenly() {
        let ego = vec![VehicleState::new(0.0, 0.0, 30.0, 0.0); T_OBS];
        let mut a = vec![Some(VehicleState::new(20.0, 3.75, 30.0, 0.0)); T_OBS];
        let b = vec![Some(VehicleState::new(20.0, -3.75, 30.0, 0.0)); T_OBS];
        for s in &mut a[..10] {
            *s = None;
        }
        let m = interaction_scores(&ego, &[a, b.clone()], &DgsfmConfig::default()).unwrap();
        assert_eq!(m.get(1, 5), 0.0);
        assert!((m.get(2, 5) - 1.0).abs() < 1e-15);
        assert!((m.get(1, 50) - 0.5).abs() < 1e-15);
        assert!((m.get(2, 50) - 0.5).abs() < 1e-15);
        let none: Vec<Option<VehicleState>> = vec![None; T_OBS];
        let m = interaction_scores(&ego, &[none], &DgsfmConfig::default()).unwrap();
        assert!(m.row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_track_length_is_a_shape_error() {
        let ego = vec![VehicleState::default(); 10];
        assert!(matches!(
            interaction_scores(&ego, &[], &DgsfmConfig::default()),
            Err(Error::Shape { .. })
        ));
    }

    fn state() -> impl Strategy<Value = VehicleState> {
        (-80.0f64..80.0, -8.0f64..8.0, 0.0f64..40.0, -2.0f64..2.0)
            .prop_map(|(x, y, vx, vy)| VehicleState::new(x, y, vx, vy))
    }

    proptest! {
        #[test]
        fn matches_polar_oracle(o in state(), s in state()) {
            let p = EggPotentialParams::default();
            let a = v_egg(o.position, s.position, s.velocity, &p);
            let b = v_egg_polar(o.position, s.position, s.velocity, &p);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-15);
        }

        #[test]
        fn translation_invariance(e in state(), n in state(), ox in -1e3f64..1e3, oy in -50.0f64..50.0) {
            let cfg = DgsfmConfig::default();
            let shift = |s: VehicleState| VehicleState::new(s.position[0] + ox, s.position[1] + oy, s.velocity[0], s.velocity[1]);
            let (a1, b1) = beta_components(&e, &n, &cfg);
            let (a2, b2) = beta_components(&shift(e), &shift(n), &cfg);
            prop_assert!((a1 - a2).abs() <= 1e-12);
            prop_assert!((b1 - b2).abs() <= 1e-12);
        }

        #[test]
        fn softmax_is_normalized_and_monotone(
            betas in proptest::collection::vec(proptest::option::of(-3.0f64..3.0), 1..8),
            bump in 0.01f64..2.0,
        ) {
            let p = masked_softmax(&betas, 1.0);
            let present = betas.iter().filter(|b| b.is_some()).count();
            if present > 0 {
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
            for (b, v) in betas.iter().zip(&p) {
                if b.is_none() { prop_assert_eq!(*v, 0.0); }
            }
            if let Some(i) = betas.iter().position(|b| b.is_some()) {
                let mut raised = betas.clone();
                raised[i] = raised[i].map(|b| b + bump);
                let q = masked_softmax(&raised, 1.0);
                prop_assert!(q[i] > p[i] || present == 1);
                for j in 0..betas.len() {
                    if j != i && betas[j].is_some() {
                        prop_assert!(q[j] < p[j]);
                    }
                }
            }
        }

        #[test]
        fn forward_emphasis(d in 0.5f64..150.0, lat in -5.0f64..5.0, speed in 1.0f64..40.0) {
            let p = EggPotentialParams::default();
            let f = v_egg([d, lat], [0.0, 0.0], [speed, 0.0], &p);
            let r = v_egg([-d, lat], [0.0, 0.0], [speed, 0.0], &p);
            prop_assert!(f > r);
        }
    }
}
