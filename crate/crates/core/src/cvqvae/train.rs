use std::io::Write;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::loss::{batch_loss, Batch, LossBreakdown, LossWeights, Sample};
use super::model::{ModelConfig, ModelDims, ModelParams, Weights};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda_cl: f64,
    pub lambda_int: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub commitment_weight: f64,
    pub dead_code_threshold: f64,
    pub revival_noise: f64,
    /// Per-batch decay of the code usage average.
    pub usage_decay: f64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_cl: 1.0,
            lambda_int: 1.0,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 300,
            seed: 0,
            commitment_weight: 0.25,
            dead_code_threshold: 1e-3,
            revival_noise: 0.01,
            usage_decay: 0.99,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train: {m}")));
        if !(self.lambda_cl >= 0.0 && self.lambda_int >= 0.0) {
            return bad("lambda_cl and lambda_int must be >= 0");
        }
        if !(self.learning_rate >= 0.0) || !(self.commitment_weight >= 0.0) {
            return bad("learning_rate and commitment_weight must be >= 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(0.0..1.0).contains(&self.usage_decay) {
            return bad("usage_decay must lie in [0, 1)");
        }
        if !(self.revival_noise >= 0.0) || !(self.dead_code_threshold >= 0.0) {
            return bad("revival_noise and dead_code_threshold must be >= 0");
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_cl: self.lambda_cl,
            lambda_int: self.lambda_int,
            commitment: self.commitment_weight,
        }
    }
}

/// Samples plus a group id per input dimension; dimensions of one group
/// share an input scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub groups: Vec<usize>,
}

impl SampleSet {
    /// Per-dimension scale `1 / rms` of the observed cells of its group.
    /// Groups with no observed energy keep scale 1.
    pub fn input_scale(&self) -> Array1<f64> {
        let n_groups = self.groups.iter().max().map_or(0, |g| g + 1);
        let mut sum = vec![0.0; n_groups];
        let mut count = vec![0.0; n_groups];
        for s in &self.samples {
            for (j, (&v, &m)) in s.input.iter().zip(&s.mask).enumerate() {
                let g = self.groups[j];
                sum[g] += m * v * v;
                count[g] += m;
            }
        }
        let scale: Vec<f64> = (0..n_groups)
            .map(|g| {
                let rms = (sum[g] / count[g].max(1.0)).sqrt();
                if rms > 1e-12 { 1.0 / rms } else { 1.0 }
            })
            .collect();
        self.groups.iter().map(|&g| scale[g]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub revived: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    /// Codes re-initialized after the final epoch.
    pub revived_last_epoch: Vec<usize>,
}

struct Adam {
    m: Weights,
    v: Weights,
    step: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn apply_update(params: &mut Weights, grads: &Weights, lr: f64, adam: Option<&mut Adam>) {
    match adam {
        None => {
            for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                for (p, g) in p.iter_mut().zip(g) {
                    *p -= lr * g;
                }
            }
        }
        Some(state) => {
            state.step += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(state.step);
            let c2 = 1.0 - ADAM_BETA2.powi(state.step);
            let ms = state.m.tensors_mut();
            let vs = state.v.tensors_mut();
            for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
                for k in 0..p.len() {
                    m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g[k];
                    v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
                    p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Dimensions of a model for `set`.
pub fn dims_for(set: &SampleSet, model: &ModelConfig, n_classes: usize, interaction_dim: usize) -> ModelDims {
    ModelDims {
        input_dim: set.groups.len(),
        hidden: model.hidden.clone(),
        latent_dim: model.latent_dim,
        codebook_size: model.codebook_size,
        n_classes,
        interaction_dim,
    }
}

/// Sets the codebook to encoder outputs of randomly drawn samples plus
/// Gaussian noise.
pub fn init_codebook(params: &mut ModelParams, samples: &[Sample], noise: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Input("cannot initialize a codebook from no samples".into()));
    }
    let normal = Normal::new(0.0, noise.max(1e-6)).expect("positive sigma");
    for q in 0..params.dims.codebook_size {
        let s = &samples[rng.random_range(0..samples.len())];
        let z = params.encode_input(&s.input)?;
        for (k, v) in z.iter().enumerate() {
            params.weights.codebook[[q, k]] = v + normal.sample(rng);
        }
    }
    Ok(())
}

/// Fresh model: seeded initialization, input scale fitted on `set`, and a
/// codebook drawn from initial encoder outputs; then [`train_from`].
pub fn train(
    set: &SampleSet,
    dims: ModelDims,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if set.samples.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(dims, &mut rng);
    params.input_scale = set.input_scale();
    init_codebook(&mut params, &set.samples, cfg.revival_noise, &mut rng)?;
    train_from(params, &set.samples, cfg)
}

/// Continues training `params` on `samples` for `cfg.epochs` epochs.
pub fn train_from(mut params: ModelParams, samples: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    let weights = cfg.loss_weights();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut revive_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    revive_rng.set_stream(2);
    let mut adam = (cfg.optimizer == Optimizer::Adam).then(|| Adam {
        m: params.weights.zeros_like(),
        v: params.weights.zeros_like(),
        step: 0,
    });
    let q_count = params.dims.codebook_size;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut revived_last = Vec::new();
    let mut order: Vec<usize> = (0..samples.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = LossBreakdown::default();
        let mut recent: Vec<Array1<f64>> = Vec::with_capacity(samples.len());
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let refs: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let batch = Batch::new(&refs, &params);
            let mut grads = params.weights.zeros_like();
            let result = batch_loss(&params, &batch, &weights, None, Some(&mut grads));
            if !result.loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch: batch_idx,
                    message: format!("non-finite loss {:?}", result.loss),
                });
            }
            epoch_loss.add_scaled(&result.loss, chunk.len() as f64 / samples.len() as f64);
            apply_update(&mut params.weights, &grads, cfg.learning_rate, adam.as_mut());

            let mut counts = vec![0.0; q_count];
            for &q in &result.index {
                counts[q] += 1.0;
            }
            for (u, c) in params.usage.iter_mut().zip(&counts) {
                *u = cfg.usage_decay * *u + (1.0 - cfg.usage_decay) * c / chunk.len() as f64;
            }
            recent.extend(result.z_hat.outer_iter().map(|r| r.to_owned()));
        }

        revived_last.clear();
        let normal = Normal::new(0.0, cfg.revival_noise.max(0.0)).expect("finite sigma");
        for q in 0..q_count {
            if params.usage[q] >= cfg.dead_code_threshold {
                continue;
            }
            let z = &recent[revive_rng.random_range(0..recent.len())];
            for (k, v) in z.iter().enumerate() {
                params.weights.codebook[[q, k]] = v + normal.sample(&mut revive_rng);
            }
            params.usage[q] = 1.0 / q_count as f64;
            revived_last.push(q);
        }
        history.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            revived: revived_last.len(),
        });
        log::debug!("epoch {epoch} total {:.6} revived {}", epoch_loss.total, revived_last.len());
    }
    Ok(TrainOutcome {
        params,
        history,
        revived_last_epoch: revived_last,
    })
}

/// Loss history as CSV with columns epoch, recon, codebook, commit, cl,
/// int, total.
pub fn write_history_csv<W: Write>(out: W, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "recon", "codebook", "commit", "cl", "int", "total"])?;
    for h in history {
        let l = &h.loss;
        w.write_record([
            h.epoch.to_string(),
            l.recon.to_string(),
            l.codebook_term.to_string(),
            l.commit_term.to_string(),
            l.cl.to_string(),
            l.int.to_string(),
            l.total.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean loss of `samples` under `params` without updating anything.
pub fn evaluate_loss(params: &ModelParams, samples: &[Sample], cfg: &TrainConfig) -> LossBreakdown {
    let mut total = LossBreakdown::default();
    let weights = cfg.loss_weights();
    for chunk in samples.chunks(cfg.batch_size.max(1)) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let r = batch_loss(params, &Batch::new(&refs, params), &weights, None, None);
        total.add_scaled(&r.loss, chunk.len() as f64 / samples.len() as f64);
    }
    total
}
