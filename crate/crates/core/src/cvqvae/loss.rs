use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::model::{mlp_backward, mlp_forward, nearest_code, sigmoid, ModelParams, Weights};

/// One training example in the model's raw input units.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    /// 1 where the input cell is observed, 0 for padding.
    pub mask: Vec<f64>,
    pub class: Option<usize>,
    pub interaction: Vec<f64>,
    pub interaction_mask: Vec<f64>,
}

/// Weights of the composite objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_cl: f64,
    pub lambda_int: f64,
    pub commitment: f64,
}

/// Batch means of the objective's terms. `commit_term` already includes
/// the commitment weight; `cl` and `int` are unweighted.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon: f64,
    pub codebook_term: f64,
    pub commit_term: f64,
    pub cl: f64,
    pub int: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn compose(recon: f64, codebook_term: f64, commit_term: f64, cl: f64, int: f64, w: &LossWeights) -> Self {
        Self {
            recon,
            codebook_term,
            commit_term,
            cl,
            int,
            total: recon + codebook_term + commit_term + w.lambda_cl * cl + w.lambda_int * int,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.recon, self.codebook_term, self.commit_term, self.cl, self.int, self.total]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Weighted accumulation used for epoch averages.
    pub fn add_scaled(&mut self, other: &LossBreakdown, weight: f64) {
        self.recon += weight * other.recon;
        self.codebook_term += weight * other.codebook_term;
        self.commit_term += weight * other.commit_term;
        self.cl += weight * other.cl;
        self.int += weight * other.int;
        self.total += weight * other.total;
    }
}

/// Stacked samples with the input scale applied.
pub struct Batch {
    pub x: Array2<f64>,
    pub mask: Array2<f64>,
    pub mask_sum: Array1<f64>,
    pub class: Vec<Option<usize>>,
    pub target: Array2<f64>,
    pub target_mask: Array2<f64>,
    pub target_mask_sum: Array1<f64>,
}

impl Batch {
    pub fn new(samples: &[&Sample], params: &ModelParams) -> Self {
        let b = samples.len();
        let d = params.dims.input_dim;
        let i = params.dims.interaction_dim;
        let mut x = Array2::zeros((b, d));
        let mut mask = Array2::zeros((b, d));
        let mut target = Array2::zeros((b, i));
        let mut target_mask = Array2::zeros((b, i));
        for (r, s) in samples.iter().enumerate() {
            for j in 0..d {
                x[[r, j]] = s.input[j] * params.input_scale[j];
                mask[[r, j]] = s.mask[j];
            }
            for j in 0..i.min(s.interaction.len()) {
                target[[r, j]] = s.interaction[j];
                target_mask[[r, j]] = s.interaction_mask[j];
            }
        }
        Self {
            mask_sum: mask.sum_axis(Axis(1)),
            target_mask_sum: target_mask.sum_axis(Axis(1)),
            x,
            mask,
            class: samples.iter().map(|s| s.class).collect(),
            target,
            target_mask,
        }
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Quantization state held fixed for gradient checking.
#[derive(Debug, Clone)]
pub struct Frozen {
    pub index: Vec<usize>,
    pub z_hat: Array2<f64>,
    pub z_q: Array2<f64>,
}

pub struct BatchResult {
    pub loss: LossBreakdown,
    pub z_hat: Array2<f64>,
    pub index: Vec<usize>,
    pub z_q: Array2<f64>,
}

/// Loss of one batch and, when `grads` is given, its gradient accumulated
/// into `grads`.
///
/// Without `frozen`, the straight-through objective is evaluated at the
/// current parameters. With `frozen`, the code index, the quantization
/// offset `z_q - z_hat`, the stopped encoder output in the codebook term and
/// the stopped code in the commitment term are taken from `frozen`. Both
/// agree in value at the frozen point, and the frozen objective is
/// differentiable with exactly the straight-through gradient.
pub fn batch_loss(
    params: &ModelParams,
    batch: &Batch,
    w: &LossWeights,
    frozen: Option<&Frozen>,
    grads: Option<&mut Weights>,
) -> BatchResult {
    let wts = &params.weights;
    let b = batch.len();
    let bf = b as f64;
    let d = params.dims.latent_dim as f64;

    let enc_acts = mlp_forward(&wts.encoder, batch.x.clone());
    let z_hat = enc_acts.last().expect("non-empty").clone();
    let index: Vec<usize> = match frozen {
        Some(f) => f.index.clone(),
        None => z_hat
            .outer_iter()
            .map(|z| nearest_code(&wts.codebook, z.as_slice().expect("contiguous")))
            .collect(),
    };
    let mut z_q = Array2::zeros(z_hat.raw_dim());
    for (r, &q) in index.iter().enumerate() {
        z_q.row_mut(r).assign(&wts.codebook.row(q));
    }
    let (z_hat_stop, z_q_stop) = match frozen {
        Some(f) => (f.z_hat.clone(), f.z_q.clone()),
        None => (z_hat.clone(), z_q.clone()),
    };
    let z_st = &z_hat + &(&z_q_stop - &z_hat_stop);

    let dec_acts = mlp_forward(&wts.decoder, z_st.clone());
    let x_hat = dec_acts.last().expect("non-empty");
    let logits = wts.cl_head.forward(&z_st);
    let int_logits = wts.int_head.forward(&z_st);
    let t_hat = int_logits.mapv(sigmoid);

    let diff = x_hat - &batch.x;
    let mut recon = 0.0;
    let mut int = 0.0;
    let mut cl = 0.0;
    let mut cb = 0.0;
    let mut commit = 0.0;
    let mut probs = Array2::zeros(logits.raw_dim());
    for r in 0..b {
        let ms = batch.mask_sum[r].max(1.0);
        recon += diff.row(r).iter().zip(batch.mask.row(r)).map(|(e, m)| m * e * e).sum::<f64>() / ms;
        let ts = batch.target_mask_sum[r].max(1.0);
        int += t_hat
            .row(r)
            .iter()
            .zip(batch.target.row(r))
            .zip(batch.target_mask.row(r))
            .map(|((p, t), m)| m * (p - t) * (p - t))
            .sum::<f64>()
            / ts;
        let row = logits.row(r);
        if !row.is_empty() {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for (k, v) in row.iter().enumerate() {
                probs[[r, k]] = (v - lse).exp();
            }
            if let Some(c) = batch.class[r] {
                cl += lse - row[c];
            }
        }
        cb += z_hat_stop.row(r).iter().zip(z_q.row(r)).map(|(a, q)| (a - q) * (a - q)).sum::<f64>() / d;
        commit += z_hat.row(r).iter().zip(z_q_stop.row(r)).map(|(a, q)| (a - q) * (a - q)).sum::<f64>() / d;
    }
    let loss = LossBreakdown::compose(
        recon / bf,
        cb / bf,
        w.commitment * commit / bf,
        cl / bf,
        int / bf,
        w,
    );

    if let Some(g) = grads {
        let mut d_xhat = &diff * &batch.mask;
        for (r, mut row) in d_xhat.outer_iter_mut().enumerate() {
            row *= 2.0 / (batch.mask_sum[r].max(1.0) * bf);
        }
        let mut dz = mlp_backward(&wts.decoder, &dec_acts, d_xhat, &mut g.decoder);

        let mut d_logits = probs;
        for (r, mut row) in d_logits.outer_iter_mut().enumerate() {
            match batch.class[r] {
                Some(c) => {
                    row[c] -= 1.0;
                    row *= w.lambda_cl / bf;
                }
                None => row.fill(0.0),
            }
        }
        g.cl_head.w += &d_logits.t().dot(&z_st);
        g.cl_head.b += &d_logits.sum_axis(Axis(0));
        dz += &d_logits.dot(&wts.cl_head.w);

        let mut d_int = &t_hat - &batch.target;
        d_int *= &batch.target_mask;
        d_int.zip_mut_with(&t_hat, |v, &p| *v *= p * (1.0 - p));
        for (r, mut row) in d_int.outer_iter_mut().enumerate() {
            row *= 2.0 * w.lambda_int / (batch.target_mask_sum[r].max(1.0) * bf);
        }
        g.int_head.w += &d_int.t().dot(&z_st);
        g.int_head.b += &d_int.sum_axis(Axis(0));
        dz += &d_int.dot(&wts.int_head.w);

        dz.scaled_add(2.0 * w.commitment / (d * bf), &(&z_hat - &z_q_stop));
        mlp_backward(&wts.encoder, &enc_acts, dz, &mut g.encoder);

        for (r, &q) in index.iter().enumerate() {
            let mut row = g.codebook.row_mut(q);
            for k in 0..row.len() {
                row[k] += 2.0 * (z_q[[r, k]] - z_hat_stop[[r, k]]) / (d * bf);
            }
        }
    }

    BatchResult {
        loss,
        z_hat,
        index,
        z_q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvqvae::model::ModelDims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims() -> ModelDims {
        ModelDims {
            input_dim: 4,
            hidden: vec![5],
            latent_dim: 2,
            codebook_size: 3,
            n_classes: 10,
            interaction_dim: 3,
        }
    }

    fn sample() -> Sample {
        Sample {
            input: vec![0.5, -1.0, 0.0, 2.0],
            mask: vec![1.0, 1.0, 0.0, 1.0],
            class: Some(4),
            interaction: vec![1.0, 0.3, 0.0],
            interaction_mask: vec![1.0, 1.0, 0.0],
        }
    }

    const ALL: LossWeights = LossWeights { lambda_cl: 1.0, lambda_int: 1.0, commitment: 0.25 };

    #[test]
    fn perfect_model_has_zero_loss() {
        let mut p = ModelParams::zeros(dims());
        let s = Sample {
            input: vec![0.0; 4],
            mask: vec![1.0; 4],
            class: None,
            interaction: vec![0.5; 3],
            interaction_mask: vec![1.0; 3],
        };
        p.weights.codebook.fill(0.0);
        let w = LossWeights { lambda_cl: 0.0, lambda_int: 0.0, commitment: 0.25 };
        let r = batch_loss(&p, &Batch::new(&[&s], &p), &w, None, None);
        assert_eq!(r.loss.total, 0.0);
        assert_eq!(r.loss.int, 0.0);
    }

    #[test]
    fn cross_entropy_of_half_probability_is_ln_two() {
        let p = ModelParams::zeros(ModelDims { n_classes: 2, ..dims() });
        let s = Sample { class: Some(0), ..sample() };
        let r = batch_loss(&p, &Batch::new(&[&s], &p), &ALL, None, None);
        assert!((r.loss.cl - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn decomposition_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = ModelParams::init(dims(), &mut rng);
        let s = sample();
        let w = LossWeights { lambda_cl: 0.7, lambda_int: 2.0, commitment: 0.25 };
        let l = batch_loss(&p, &Batch::new(&[&s, &s], &p), &w, None, None).loss;
        let sum = l.recon + l.codebook_term + l.commit_term + 0.7 * l.cl + 2.0 * l.int;
        assert!((l.total - sum).abs() <= 1e-9);
    }

    #[test]
    fn masked_cells_do_not_contribute() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ModelParams::init(dims(), &mut rng);
        let a = sample();
        let mut b = sample();
        b.input[2] = 1e6;
        b.interaction[2] = 1.0;
        let la = batch_loss(&p, &Batch::new(&[&a], &p), &ALL, None, None).loss;
        let lb = batch_loss(&p, &Batch::new(&[&b], &p), &ALL, None, None).loss;
        assert_eq!(la.int, lb.int);
        // The masked input still feeds the encoder, so only compare masks.
        let zero_mask = Sample { mask: vec![0.0; 4], ..a.clone() };
        let lz = batch_loss(&p, &Batch::new(&[&zero_mask], &p), &ALL, None, None).loss;
        assert_eq!(lz.recon, 0.0);
    }

    #[test]
    fn zero_lambdas_leave_shared_gradients_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = ModelParams::init(dims(), &mut rng);
        let plain = LossWeights { lambda_cl: 0.0, lambda_int: 0.0, commitment: 0.25 };
        let s = sample();
        let other = Sample { class: Some(9), interaction: vec![0.0, 1.0, 1.0], ..sample() };
        let mut g1 = p.weights.zeros_like();
        let mut g2 = p.weights.zeros_like();
        let l1 = batch_loss(&p, &Batch::new(&[&s], &p), &plain, None, Some(&mut g1)).loss;
        let l2 = batch_loss(&p, &Batch::new(&[&other], &p), &plain, None, Some(&mut g2)).loss;
        assert_eq!(l1.total, l2.total);
        assert_eq!(g1.encoder, g2.encoder);
        assert_eq!(g1.decoder, g2.decoder);
        assert_eq!(g1.codebook, g2.codebook);
        assert!(g1.cl_head.w.iter().all(|&v| v == 0.0));
        assert!(g1.int_head.w.iter().all(|&v| v == 0.0));
    }
}
