use std::collections::BTreeMap;

use rand::Rng;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Named matrices; iteration order is the lexical order of names, which
/// keeps checkpoints and optimizer updates deterministic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    entries: BTreeMap<String, Matrix>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) -> Option<Matrix> {
        self.entries.insert(name.into(), value)
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.entries.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Matrix)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(Matrix::len).sum()
    }

    pub fn extend(&mut self, other: ParamSet) {
        self.entries.extend(other.entries);
    }

    pub fn is_finite(&self) -> bool {
        self.entries.values().all(Matrix::is_finite)
    }

    pub fn remove(&mut self, name: &str) -> Option<Matrix> {
        self.entries.remove(name)
    }

    /// Checks that `self` holds exactly the names and shapes of `template`.
    pub fn conform_to(self, template: &ParamSet) -> Result<ParamSet> {
        for (name, t) in template.iter() {
            let v = self
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
            if v.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "`{name}` has shape {:?}, expected {:?}",
                    v.shape(),
                    t.shape()
                )));
            }
        }
        if let Some(extra) = self.entries.keys().find(|k| !template.contains(k)) {
            return Err(Error::Checkpoint(format!("unexpected parameter `{extra}`")));
        }
        Ok(self)
    }
}

/// Glorot-uniform weight matrix.
pub fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Matrix::new(rows, cols, data).expect("shape is consistent")
}

/// Weights and bias of a stack of dense layers `widths[0] → … → widths[n]`,
/// named `{prefix}.w{i}` / `{prefix}.b{i}`.
pub fn init_mlp(prefix: &str, widths: &[usize], rng: &mut impl Rng) -> ParamSet {
    let mut ps = ParamSet::new();
    for (i, pair) in widths.windows(2).enumerate() {
        ps.insert(format!("{prefix}.w{i}"), glorot(pair[0], pair[1], rng));
        ps.insert(format!("{prefix}.b{i}"), Matrix::zeros(1, pair[1]));
    }
    ps
}
