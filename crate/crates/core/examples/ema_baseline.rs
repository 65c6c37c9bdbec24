//! Runs the label-free EMA residual-energy baseline next to the rule-based
//! detector on the same noisy trajectory.

use scenario_mining::behavior::{detect, detect_ema, evaluate_detection, DetectorConfig, EmaConfig};
use scenario_mining::ingest::{generate_synthetic, InitialState, Maneuver, Side, SyntheticScript};
use scenario_mining::types::DEFAULT_DT;

fn main() -> scenario_mining::Result<()> {
    let initial = InitialState { x: 0.0, y: 1.875, vx: 28.0, lane: 1 };
    let script = SyntheticScript::cruise(1, 1200, initial)
        .with(150, 150, Maneuver::Accelerate { accel: 0.8 })
        .with(450, 120, Maneuver::LaneChange { side: Side::Left })
        .with(800, 150, Maneuver::Decelerate { accel: 0.7 });
    let (trajs, truths) = generate_synthetic(&[script], DEFAULT_DT, 11)?;
    let truth: Vec<_> = truths[0].iter().map(|c| (c.frame, c.after)).collect();

    let events = detect_ema(&trajs[0], &EmaConfig::default());
    let ema = evaluate_detection(&events.iter().map(|&f| (f, None)).collect::<Vec<_>>(), &truth, 50);
    let (_, cps) = detect(&trajs[0], &DetectorConfig::default());
    let rule = evaluate_detection(&cps.iter().map(|c| (c.frame, Some(c.after))).collect::<Vec<_>>(), &truth, 50);

    println!("truth frames: {:?}", truth.iter().map(|t| t.0).collect::<Vec<_>>());
    println!("EMA events:   {events:?}");
    println!("rule changes: {:?}", cps.iter().map(|c| c.frame).collect::<Vec<_>>());
    println!("EMA  precision {:.3} recall {:.3}", ema.precision, ema.recall);
    println!("rule precision {:.3} recall {:.3}", rule.precision, rule.recall);
    Ok(())
}
