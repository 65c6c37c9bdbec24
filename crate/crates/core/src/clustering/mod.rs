//! Cluster assignments over latent scenario representations: codebook
//! lookup, k-means and agglomerative clustering.

pub mod hierarchical;
pub mod kmeans;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cvqvae::ModelParams;
use crate::error::{Error, Result};

pub use hierarchical::{hierarchical, HierarchicalOutcome, Linkage, Merge};
pub use kmeans::{kmeans, KMeansOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Codebook,
    #[serde(rename = "kmeans")]
    KMeans,
    Hierarchical,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Codebook, Backend::KMeans, Backend::Hierarchical];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Codebook => "codebook",
            Backend::KMeans => "kmeans",
            Backend::Hierarchical => "hierarchical",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Backend::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown clustering backend {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub backend: Backend,
    pub labels: Vec<usize>,
    pub q: usize,
}

impl ClusterAssignment {
    pub fn validate(&self) -> Result<()> {
        match self.labels.iter().find(|&&l| l >= self.q) {
            Some(l) => Err(Error::Input(format!("label {l} is not below Q = {}", self.q))),
            None => Ok(()),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.q];
        for &l in &self.labels {
            out[l] += 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub backends: Vec<Backend>,
    /// Cluster count for k-means and hierarchical; `None` uses the
    /// codebook size.
    pub k: Option<usize>,
    pub max_iter: usize,
    pub linkage: Linkage,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            backends: Backend::ALL.to_vec(),
            k: None,
            max_iter: 300,
            linkage: Linkage::Ward,
        }
    }
}

/// Encoder outputs of raw inputs, one row each.
pub fn latents(inputs: &[&[f64]], model: &ModelParams) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((inputs.len(), model.dims.latent_dim));
    for (i, x) in inputs.iter().enumerate() {
        out.row_mut(i).assign(&model.encode_input(x)?);
    }
    Ok(out)
}

/// Nearest-code label of every input.
pub fn assign_codebook(inputs: &[&[f64]], model: &ModelParams) -> Result<ClusterAssignment> {
    let labels = inputs.iter().map(|x| model.assign(x)).collect::<Result<_>>()?;
    Ok(ClusterAssignment {
        backend: Backend::Codebook,
        labels,
        q: model.dims.codebook_size,
    })
}

/// Runs one backend on the given inputs.
pub fn cluster(
    backend: Backend,
    inputs: &[&[f64]],
    model: &ModelParams,
    cfg: &ClusteringConfig,
    seed: u64,
) -> Result<ClusterAssignment> {
    let k = cfg.k.unwrap_or(model.dims.codebook_size);
    match backend {
        Backend::Codebook => assign_codebook(inputs, model),
        Backend::KMeans => Ok(kmeans(&latents(inputs, model)?, k, seed, cfg.max_iter)?.assignment),
        Backend::Hierarchical => Ok(hierarchical(&latents(inputs, model)?, k, cfg.linkage)?.assignment),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub record_id: String,
    pub backend: Backend,
    pub label: usize,
}

/// CSV with columns record_id, backend, label.
pub fn write_assignments<W: Write>(out: W, ids: &[String], assignments: &[ClusterAssignment]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for a in assignments {
        if a.labels.len() != ids.len() {
            return Err(Error::Shape { expected: ids.len(), actual: a.labels.len() });
        }
        for (id, &label) in ids.iter().zip(&a.labels) {
            w.serialize(AssignmentRow { record_id: id.clone(), backend: a.backend, label })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_assignments<R: Read>(input: R) -> Result<Vec<AssignmentRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
