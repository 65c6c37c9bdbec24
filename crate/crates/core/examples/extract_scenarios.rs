//! Builds interaction scenes, extracts one scenario per detected ego change,
//! inserts an irrelevant distant vehicle into one of them and writes the
//! dataset file.

use std::collections::BTreeMap;

use scenario_mining::behavior::{detect, DetectorConfig};
use scenario_mining::dataset::{load_dataset, save_dataset};
use scenario_mining::dgsfm::DgsfmConfig;
use scenario_mining::extraction::{augment_irrelevant, extract, ExtractionConfig};
use scenario_mining::ingest::{generate_scenes, SceneConfig};
use scenario_mining::types::{DEFAULT_DT, N_SLOTS};

fn main() -> scenario_mining::Result<()> {
    let scenes = generate_scenes(6, &SceneConfig::default(), DEFAULT_DT, 2)?;
    let mut records = Vec::new();
    for scene in &scenes {
        let (_, cps) = detect(scene.ego(), &DetectorConfig::default());
        let anchors = BTreeMap::from([(scene.ego_id, cps)]);
        let (recs, summary) = extract(&scene.trajectories, &anchors, &ExtractionConfig::default(), &DgsfmConfig::default());
        println!("{:?}: {} records, {} windows skipped", scene.archetype, summary.emitted, summary.skipped_windows);
        records.extend(recs);
    }
    for r in &records {
        let occupied = (0..N_SLOTS).filter(|&s| !r.tensor.slot_is_empty(s)).count();
        println!("{}: class {} after {}, {occupied} vehicles", r.id, r.pseudo_class.index(), r.anchor.after);
    }

    let donor = scenes[0].trajectories.iter().find(|t| scenes[0].background_ids.contains(&t.vehicle_id)).unwrap();
    match augment_irrelevant(&records[0], donor, 80.0, 9) {
        Ok(child) => {
            let slot = child.augmentation.as_ref().unwrap().slot;
            println!("{} adds a vehicle in slot {slot} starting at x = {:.1} m", child.id, child.tensor.get(slot, 0, 0));
            records.push(child);
        }
        Err(e) => println!("augmentation skipped: {e}"),
    }

    let path = std::env::temp_dir().join("scenarios_example.jsonl");
    save_dataset(&path, DEFAULT_DT, &records)?;
    let (header, back) = load_dataset(&path)?;
    println!("wrote {} records ({} x {} x {}) to {}", back.len(), header.n, header.f, header.t_obs, path.display());
    Ok(())
}
