//! Directed-gradient social force scores: the egg-shaped potential, the
//! position and extrapolation terms, and a framewise softmax over three
//! neighbors of a cruising ego.

use scenario_mining::dgsfm::{beta_components, interaction_scores, v_egg, DgsfmConfig, VehicleState};
use scenario_mining::types::T_OBS;

fn main() -> scenario_mining::Result<()> {
    let cfg = DgsfmConfig::default();
    let v = [30.0, 0.0];
    for dx in [-30.0, -10.0, 0.0, 10.0, 30.0] {
        println!("V_egg at dx {dx:>5}: {:.4}", v_egg([dx, 0.0], [0.0, 0.0], v, &cfg.egg));
    }

    let ego = VehicleState::new(0.0, 0.0, 30.0, 0.0);
    let cases = [
        ("slower car 20 m ahead", VehicleState::new(20.0, 0.0, 25.0, 0.0)),
        ("faster car 20 m behind", VehicleState::new(-20.0, 0.0, 35.0, 0.0)),
        ("same speed, next lane", VehicleState::new(5.0, 3.75, 30.0, 0.0)),
    ];
    for (name, nb) in &cases {
        let (a, b) = beta_components(&ego, nb, &cfg);
        println!("{name:<24} beta_A {a:.4} beta_B {b:+.4}");
    }

    let ego_track: Vec<VehicleState> = (0..T_OBS).map(|t| VehicleState::new(30.0 * 0.04 * t as f64, 0.0, 30.0, 0.0)).collect();
    let neighbors: Vec<Vec<Option<VehicleState>>> = cases
        .iter()
        .map(|(_, nb)| {
            (0..T_OBS)
                .map(|t| {
                    let s = 0.04 * t as f64;
                    Some(VehicleState::new(nb.position[0] + nb.velocity[0] * s, nb.position[1], nb.velocity[0], 0.0))
                })
                .collect()
        })
        .collect();
    let m = interaction_scores(&ego_track, &neighbors, &cfg)?;
    for t in [0, 50, 99] {
        println!("frame {t:>2}: {:?}", (0..4).map(|s| format!("{:.3}", m.get(s, t))).collect::<Vec<_>>());
    }
    Ok(())
}
