//! Clusters encoder latents with the codebook, k-means and Ward
//! agglomeration and scores purity and augmentation consistency.

use std::collections::BTreeMap;

use scenario_mining::clustering::{cluster, Backend, ClusteringConfig};
use scenario_mining::cvqvae::{dims_for, scenario_set, train, ModelConfig, Optimizer, TrainConfig};
use scenario_mining::dgsfm::DgsfmConfig;
use scenario_mining::extraction::{augment_dataset, extract, AugmentConfig, ExtractionConfig};
use scenario_mining::ingest::{generate_scenes, SceneConfig};
use scenario_mining::metrics::{augmentation_accuracy, cluster_entropy};
use scenario_mining::types::{InteractionMatrix, DEFAULT_DT, N_CLASSES};

fn main() -> scenario_mining::Result<()> {
    let scenes = generate_scenes(120, &SceneConfig::default(), DEFAULT_DT, 6)?;
    let mut records = Vec::new();
    let mut donors = Vec::new();
    for s in &scenes {
        let anchors = BTreeMap::from([(s.ego_id, s.ego_truth.clone())]);
        records.extend(extract(&s.trajectories, &anchors, &ExtractionConfig::default(), &DgsfmConfig::default()).0);
        donors.extend(s.trajectories.iter().cloned());
    }
    let children = augment_dataset(&records, &donors, &AugmentConfig { count: 20, ..AugmentConfig::default() }, 7)?;

    let set = scenario_set(&records);
    let dims = dims_for(&set, &ModelConfig { hidden: vec![32], latent_dim: 8, codebook_size: 8 }, N_CLASSES, InteractionMatrix::LEN);
    let model = train(&set, dims, &TrainConfig { epochs: 15, optimizer: Optimizer::Adam, seed: 6, ..TrainConfig::default() })?.params;

    let all: Vec<_> = records.iter().chain(&children).collect();
    let inputs: Vec<&[f64]> = all.iter().map(|r| r.tensor.values()).collect();
    let ids: Vec<String> = all.iter().map(|r| r.id.clone()).collect();
    let classes: Vec<_> = all.iter().map(|r| r.pseudo_class).collect();
    let pairs: Vec<(String, String)> = children.iter().map(|c| (c.augmentation.as_ref().unwrap().parent.clone(), c.id.clone())).collect();
    for backend in Backend::ALL {
        let a = cluster(backend, &inputs, &model, &ClusteringConfig::default(), 11)?;
        let h = cluster_entropy(&a, &classes)?;
        let acc = augmentation_accuracy(&ids, &a, &pairs)?;
        println!("{backend:<12} sizes {:?} H_avg {:.3} accuracy {acc:.3}", a.sizes(), h.h_avg);
    }
    Ok(())
}
