use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Generated { kind: String, seed: u64, stream_id: u64 },
    File { path: String },
    Derived { from: String },
}

/// Row-major inputs (`n x dim`) with one target per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(dim: usize, inputs: Vec<f64>, targets: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("dataset dimension must be positive"));
        }
        if inputs.len() != dim * targets.len() {
            return Err(Error::contract("dataset inputs do not match targets x dimension"));
        }
        Ok(Dataset {
            dim,
            inputs,
            targets,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.inputs
            .chunks_exact(self.dim)
            .zip(self.targets.iter().copied())
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
            targets.push(self.targets[i]);
        }
        Dataset {
            dim: self.dim,
            inputs,
            targets,
            provenance: Provenance::Derived {
                from: describe(&self.provenance),
            },
        }
    }

    pub(crate) fn from_parts(dim: usize, inputs: Vec<f64>, targets: Vec<f64>, provenance: Provenance) -> Self {
        debug_assert_eq!(inputs.len(), dim * targets.len());
        Dataset {
            dim,
            inputs,
            targets,
            provenance,
        }
    }

    /// Mean squared error of the constant predictor `c`.
    pub fn constant_mse(&self, c: f64) -> f64 {
        let n = self.len() as f64;
        self.targets.iter().map(|&y| (y - c) * (y - c)).sum::<f64>() / n
    }

    pub fn target_mean(&self) -> f64 {
        self.targets.iter().sum::<f64>() / self.len() as f64
    }
}

fn describe(p: &Provenance) -> String {
    use core::fmt::Write;
    let mut s = String::new();
    match p {
        Provenance::Generated {
            kind,
            seed,
            stream_id,
        } => {
            let _ = write!(s, "{kind}(seed={seed},stream={stream_id})");
        }
        Provenance::File { path } => s.push_str(path),
        Provenance::Derived { from } => s.push_str(from),
    }
    s
}
