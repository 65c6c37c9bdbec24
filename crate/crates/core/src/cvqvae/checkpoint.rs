//! Line-oriented checkpoint format.
//!
//! Line 1 is a JSON header:
//!
//! ```text
//! {"format":"cvqvae-checkpoint","version":1,"dims":{...},"n_slots":9,
//!  "n_features":6,"t_obs":100,"codebook_update":"gradient",
//!  "tensors":[{"name":"encoder.0.w","shape":[256,5400]},...]}
//! ```
//!
//! Each following line is a JSON array holding one tensor, row-major, in
//! header order. Weight tensors come first in [`Weights::named`] order,
//! then `usage` and `input_scale`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::model::{ModelDims, ModelParams, Weights};
use crate::error::{Error, Result};
use crate::types::{N_FEATURES, N_SLOTS, T_OBS};

pub const FORMAT: &str = "cvqvae-checkpoint";
pub const VERSION: u32 = 1;
pub const CODEBOOK_UPDATE: &str = "gradient";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub dims: ModelDims,
    pub n_slots: usize,
    pub n_features: usize,
    pub t_obs: usize,
    pub codebook_update: String,
    pub tensors: Vec<TensorInfo>,
}

fn shapes(w: &Weights) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for d in w.encoder.iter().chain(&w.decoder) {
        out.push(d.w.shape().to_vec());
        out.push(d.b.shape().to_vec());
    }
    out.push(w.codebook.shape().to_vec());
    for d in [&w.cl_head, &w.int_head] {
        out.push(d.w.shape().to_vec());
        out.push(d.b.shape().to_vec());
    }
    out
}

fn header(params: &ModelParams) -> Header {
    let mut tensors: Vec<TensorInfo> = params
        .weights
        .named()
        .into_iter()
        .zip(shapes(&params.weights))
        .map(|((name, _), shape)| TensorInfo { name, shape })
        .collect();
    tensors.push(TensorInfo { name: "usage".into(), shape: vec![params.usage.len()] });
    tensors.push(TensorInfo { name: "input_scale".into(), shape: vec![params.input_scale.len()] });
    Header {
        format: FORMAT.into(),
        version: VERSION,
        dims: params.dims.clone(),
        n_slots: N_SLOTS,
        n_features: N_FEATURES,
        t_obs: T_OBS,
        codebook_update: CODEBOOK_UPDATE.into(),
        tensors,
    }
}

pub fn write_checkpoint<W: Write>(mut out: W, params: &ModelParams) -> Result<()> {
    serde_json::to_writer(&mut out, &header(params))?;
    out.write_all(b"\n")?;
    let extra = [
        params.usage.as_slice().expect("contiguous"),
        params.input_scale.as_slice().expect("contiguous"),
    ];
    for t in params.weights.tensors().into_iter().chain(extra) {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<ModelParams> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty checkpoint".into()))??;
    let h: Header = serde_json::from_str(&first)?;
    if h.format != FORMAT || h.version != VERSION {
        return Err(Error::Format(format!("checkpoint {} v{} not supported", h.format, h.version)));
    }
    if h.codebook_update != CODEBOOK_UPDATE {
        return Err(Error::Format(format!("codebook update {} not supported", h.codebook_update)));
    }
    let mut params = ModelParams::zeros(h.dims.clone());
    let expected = header(&params);
    if expected.tensors != h.tensors {
        return Err(Error::Format("tensor layout does not match dims".into()));
    }
    let mut arrays: Vec<Vec<f64>> = Vec::with_capacity(h.tensors.len());
    for info in &h.tensors {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format(format!("missing tensor {}", info.name)))??;
        let values: Vec<f64> = serde_json::from_str(&line)?;
        let len: usize = info.shape.iter().product();
        if values.len() != len {
            return Err(Error::Shape { expected: len, actual: values.len() });
        }
        arrays.push(values);
    }
    let input_scale = arrays.pop().expect("two trailing tensors");
    let usage = arrays.pop().expect("two trailing tensors");
    for (dst, src) in params.weights.tensors_mut().into_iter().zip(&arrays) {
        dst.copy_from_slice(src);
    }
    params.usage = Array1::from(usage);
    params.input_scale = Array1::from(input_scale);
    Ok(params)
}

pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), params)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    if !path.exists() {
        return Err(Error::MissingArtifact { path: path.to_path_buf() });
    }
    read_checkpoint(BufReader::new(File::open(path)?))
}


#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut p = ModelParams::init(ModelDims::scenario(vec![5, 4], 3, 6), &mut rng);
        p.usage[2] = 0.123456789012345;
        p.input_scale.mapv_inplace(|v| v / 3.0);
        p
    }

    #[test]
    fn round_trip_is_exact() {
        let p = model();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, p);
        let mut again = Vec::new();
        write_checkpoint(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn header_names_layout() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &model()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let h: Header = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(h.codebook_update, "gradient");
        assert_eq!(h.tensors[0].name, "encoder.0.w");
        assert_eq!(h.tensors[0].shape, vec![5, N_SLOTS * N_FEATURES * T_OBS]);
        assert_eq!(text.lines().count(), 1 + h.tensors.len());
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &model()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_checkpoint(cut.as_bytes()), Err(Error::Format(_))));
    }
}
