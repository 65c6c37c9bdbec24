use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::loss::{batch_loss, Batch, Frozen, LossWeights, Sample};
use super::model::{ModelDims, ModelParams};
use crate::error::{Error, Result};

/// Denominator floor of the relative error.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Minimum number of parameters to check, spread over every tensor.
    pub n_params: usize,
    pub seed: u64,
    /// Doubles the analytic gradient of `(tensor name, flat index)`.
    pub corrupt: Option<(String, usize)>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            n_params: 100,
            seed: 0,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Largest relative error per parameter tensor.
    pub per_tensor: BTreeMap<String, f64>,
    pub checks: Vec<ParamCheck>,
}

impl GradCheckReport {
    /// Largest error over tensors whose name starts with `prefix`.
    pub fn max_for(&self, prefix: &str) -> Option<f64> {
        self.per_tensor
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, &v)| v)
            .reduce(f64::max)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(REL_ERROR_FLOOR)
}

/// Compares analytic gradients of the total loss on `samples` against
/// central differences. The code assignment, the quantization offset and
/// the stop-gradient operands are frozen at the unperturbed point, so the
/// encoder gradient is checked along the straight-through path.
pub fn grad_check(
    params: &ModelParams,
    samples: &[Sample],
    weights: &LossWeights,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if !(opts.epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be > 0, got {}", opts.epsilon)));
    }
    if samples.is_empty() {
        return Err(Error::Input("gradient check needs at least one sample".into()));
    }
    let refs: Vec<&Sample> = samples.iter().collect();
    let batch = Batch::new(&refs, params);
    let point = batch_loss(params, &batch, weights, None, None);
    let frozen = Frozen {
        index: point.index,
        z_hat: point.z_hat,
        z_q: point.z_q,
    };
    let mut grads = params.weights.zeros_like();
    batch_loss(params, &batch, weights, Some(&frozen), Some(&mut grads));

    let names: Vec<String> = params.weights.named().into_iter().map(|(n, _)| n).collect();
    if let Some((name, idx)) = &opts.corrupt {
        let t = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("no parameter tensor named {name}")))?;
        let g = &mut grads.tensors_mut()[t];
        if *idx >= g.len() {
            return Err(Error::Config(format!("index {idx} out of range for {name}")));
        }
        g[*idx] *= 2.0;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let lens: Vec<usize> = params.weights.tensors().iter().map(|t| t.len()).collect();
    let per_tensor = opts.n_params.div_ceil(lens.len().max(1)).max(1);
    let mut quota: Vec<usize> = lens.iter().map(|&len| per_tensor.min(len)).collect();
    let mut missing = opts.n_params.saturating_sub(quota.iter().sum());
    while missing > 0 && quota.iter().zip(&lens).any(|(q, l)| q < l) {
        for (q, &len) in quota.iter_mut().zip(&lens) {
            if missing > 0 && *q < len {
                *q += 1;
                missing -= 1;
            }
        }
    }
    let mut picks: Vec<(usize, usize)> = Vec::new();
    for (t, (&len, &n)) in lens.iter().zip(&quota).enumerate() {
        let mut idx = sample(&mut rng, len, n).into_vec();
        idx.sort_unstable();
        picks.extend(idx.into_iter().map(|k| (t, k)));
    }
    if let Some((name, idx)) = &opts.corrupt {
        let t = names.iter().position(|n| n == name).expect("checked above");
        if !picks.contains(&(t, *idx)) {
            picks.push((t, *idx));
        }
    }

    let analytic = grads.tensors();
    let mut probe = params.clone();
    let mut checks = Vec::with_capacity(picks.len());
    for (t, k) in picks {
        let original = probe.weights.tensors()[t][k];
        let mut eval = |value: f64| {
            probe.weights.tensors_mut()[t][k] = value;
            batch_loss(&probe, &batch, weights, Some(&frozen), None).loss.total
        };
        let plus = eval(original + opts.epsilon);
        let minus = eval(original - opts.epsilon);
        probe.weights.tensors_mut()[t][k] = original;
        let numeric = (plus - minus) / (2.0 * opts.epsilon);
        let a = analytic[t][k];
        checks.push(ParamCheck {
            tensor: names[t].clone(),
            index: k,
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric),
        });
    }
    let mut per = BTreeMap::new();
    for c in &checks {
        let e = per.entry(c.tensor.clone()).or_insert(0.0f64);
        *e = e.max(c.rel_error);
    }
    Ok(GradCheckReport {
        max_rel_error: checks.iter().map(|c| c.rel_error).fold(0.0, f64::max),
        per_tensor: per,
        checks,
    })
}

/// A small random problem with latent size 8 and 4 codes, both heads
/// active and a few masked cells.
pub fn toy_problem(hidden: Vec<usize>, seed: u64) -> (ModelParams, Vec<Sample>) {
    let dims = ModelDims {
        input_dim: 12,
        hidden,
        latent_dim: 8,
        codebook_size: 4,
        n_classes: 10,
        interaction_dim: 6,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ModelParams::init(dims, &mut rng);
    let samples = (0..5)
        .map(|i| Sample {
            input: (0..12).map(|_| rng.sample(StandardNormal)).collect(),
            mask: (0..12).map(|j| if (i + j) % 5 == 0 { 0.0 } else { 1.0 }).collect(),
            class: Some(i % 10),
            interaction: (0..6).map(|_| rng.random()).collect(),
            interaction_mask: (0..6).map(|j| if j == 5 { 0.0 } else { 1.0 }).collect(),
        })
        .collect();
    (params, samples)
}
