//! Renders detection and clustering tables from raw counts and scores.

use scenario_mining::behavior::DetectionMatch;
use scenario_mining::clustering::Backend;
use scenario_mining::metrics::{report, ClusterScores, ClusteringResult};

fn main() -> scenario_mining::Result<()> {
    let detection = vec![
        ("Rule-based".to_string(), DetectionMatch::from_counts(109, 38, 10)),
        ("EMA".to_string(), DetectionMatch::from_counts(29, 119, 90)),
        ("Snippet clustering".to_string(), DetectionMatch::from_counts(86, 199, 33)),
    ];
    let run = |backend, dk, h, acc| ClusteringResult { backend, domain_knowledge: dk, scores: ClusterScores::new(h, acc, None) };
    let clustering = vec![
        run(Backend::Codebook, false, 2.9, 0.10),
        run(Backend::Codebook, true, 1.2, 0.55),
        run(Backend::KMeans, false, 3.0, 0.09),
        run(Backend::KMeans, true, 1.1, 0.20),
    ];
    let r = report(&detection, &clustering);
    println!("{}", r.to_text());
    println!("{}", r.to_json()?);
    Ok(())
}
