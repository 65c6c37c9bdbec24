//! Trains the knowledge-guided VQ autoencoder on a small scene corpus,
//! prints the loss curve and round-trips the checkpoint.

use std::collections::BTreeMap;

use scenario_mining::cvqvae::{dims_for, load_checkpoint, save_checkpoint, scenario_set, train, ModelConfig, Optimizer, TrainConfig};
use scenario_mining::dgsfm::DgsfmConfig;
use scenario_mining::extraction::{extract, ExtractionConfig};
use scenario_mining::ingest::{generate_scenes, SceneConfig};
use scenario_mining::types::{InteractionMatrix, DEFAULT_DT, N_CLASSES};

fn main() -> scenario_mining::Result<()> {
    let mut records = Vec::new();
    for scene in generate_scenes(90, &SceneConfig::default(), DEFAULT_DT, 4)? {
        let anchors = BTreeMap::from([(scene.ego_id, scene.ego_truth.clone())]);
        records.extend(extract(&scene.trajectories, &anchors, &ExtractionConfig::default(), &DgsfmConfig::default()).0);
    }
    let set = scenario_set(&records);
    let model = ModelConfig { hidden: vec![32], latent_dim: 8, codebook_size: 8 };
    let dims = dims_for(&set, &model, N_CLASSES, InteractionMatrix::LEN);
    let cfg = TrainConfig { epochs: 150, optimizer: Optimizer::Adam, seed: 4, ..TrainConfig::default() };
    let out = train(&set, dims, &cfg)?;

    println!("{} samples, {} parameters", set.samples.len(), out.params.weights.parameter_count());
    for h in out.history.iter().filter(|h| h.epoch % 10 == 0 || h.epoch + 1 == cfg.epochs) {
        println!(
            "epoch {:>3}: total {:.4} recon {:.4} codebook {:.4} cl {:.4} int {:.4} revived {}",
            h.epoch, h.loss.total, h.loss.recon, h.loss.codebook_term, h.loss.cl, h.loss.int, h.revived
        );
    }
    let path = std::env::temp_dir().join("cvqvae_example.ckpt");
    save_checkpoint(&path, &out.params)?;
    assert_eq!(load_checkpoint(&path)?, out.params);
    let codes: Vec<usize> = records.iter().map(|r| out.params.assign(r.tensor.values())).collect::<Result<_, _>>()?;
    println!("checkpoint {} reloads exactly; first codes {:?}", path.display(), &codes[..10]);
    Ok(())
}
