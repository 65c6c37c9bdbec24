//! Fits the snippet-clustering baseline: fixed-length trajectory snippets
//! are vector-quantized and a change is reported wherever consecutive
//! snippets land in different codes.

use scenario_mining::behavior::{evaluate_detection, DetectionMatch, SnippetClusterDetector, SnippetConfig};
use scenario_mining::ingest::{generate_synthetic, ScriptSampler};
use scenario_mining::types::DEFAULT_DT;

fn main() -> scenario_mining::Result<()> {
    let scripts = ScriptSampler::default().sample(20, 5);
    let (trajs, truths) = generate_synthetic(&scripts, DEFAULT_DT, 5)?;
    let mut cfg = SnippetConfig::default();
    cfg.train.epochs = 10;
    let detector = SnippetClusterDetector::fit(&trajs, &cfg)?;

    println!("codes of vehicle 0: {:?}", detector.codes(&trajs[0])?);
    let mut total = DetectionMatch::default();
    for (t, truth) in trajs.iter().zip(&truths) {
        let pred: Vec<_> = detector.detect(t)?.into_iter().map(|f| (f, None)).collect();
        let truth: Vec<_> = truth.iter().map(|c| (c.frame, c.after)).collect();
        total = total.combine(evaluate_detection(&pred, &truth, 50));
    }
    println!("snippet baseline: precision {:.3} recall {:.3}", total.precision, total.recall);
    Ok(())
}
