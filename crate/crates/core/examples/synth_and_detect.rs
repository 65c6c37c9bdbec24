//! Generates scripted single-vehicle trajectories and scores the rule-based
//! behavior-change detector against their ground truth.

use scenario_mining::behavior::{detect, evaluate_detection, DetectionMatch, DetectorConfig};
use scenario_mining::ingest::{generate_synthetic, ScriptSampler};
use scenario_mining::types::DEFAULT_DT;

fn main() -> scenario_mining::Result<()> {
    let scripts = ScriptSampler::default().sample(20, 3);
    let (trajectories, truths) = generate_synthetic(&scripts, DEFAULT_DT, 3)?;
    let cfg = DetectorConfig::default();

    let mut total = DetectionMatch::default();
    for (traj, truth) in trajectories.iter().zip(&truths) {
        let (segments, change_points) = detect(traj, &cfg);
        let predicted: Vec<_> = change_points.iter().map(|c| (c.frame, Some(c.after))).collect();
        let truth: Vec<_> = truth.iter().map(|c| (c.frame, c.after)).collect();
        let m = evaluate_detection(&predicted, &truth, 50);
        println!(
            "vehicle {:>2}: {:>2} segments, {:>2} changes, tp {} fp {} fn {}",
            traj.vehicle_id,
            segments.len(),
            change_points.len(),
            m.tp,
            m.fp,
            m.fn_
        );
        total = total.combine(m);
    }
    let first = &trajectories[0];
    for cp in detect(first, &cfg).1 {
        println!("  vehicle {} frame {:>4}: {} -> {}", first.vehicle_id, cp.frame, cp.before, cp.after);
    }
    println!("precision {:.3} recall {:.3}", total.precision, total.recall);
    Ok(())
}
