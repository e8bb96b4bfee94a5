//! Pretrained word vectors in the plain GloVe text layout:
//! one `token v1 v2 … vE` line per token.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::autodiff::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(File::open(path)?)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut table = EmbeddingTable::default();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let vector: Vec<f64> = parts
                .map(|v| {
                    v.parse().map_err(|_| Error::Embedding {
                        line: i + 1,
                        message: format!("bad value `{v}`"),
                    })
                })
                .collect::<Result<_>>()?;
            if table.dim == 0 {
                table.dim = vector.len();
            }
            if vector.is_empty() || vector.len() != table.dim {
                return Err(Error::Embedding {
                    line: i + 1,
                    message: format!("expected {} values, got {}", table.dim, vector.len()),
                });
            }
            table.entries.insert(token.to_string(), vector);
        }
        if table.entries.is_empty() {
            return Err(Error::Embedding {
                line: 0,
                message: "no vectors".into(),
            });
        }
        Ok(table)
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::dim(
                "embedding",
                format!("vector of length {} in a {}-d table", vector.len(), self.dim),
            ));
        }
        self.entries.insert(token.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    /// Mean of the vectors of the lowercased whitespace tokens of `phrase`.
    pub fn phrase_vector(&self, phrase: &str) -> Result<Vec<f64>> {
        self.phrase_matrix(&[phrase]).map(|m| m.into_data())
    }

    /// One row per phrase. Fails listing every token the table lacks.
    pub fn phrase_matrix<S: AsRef<str>>(&self, phrases: &[S]) -> Result<Matrix> {
        let mut missing = Vec::new();
        let mut data = Vec::with_capacity(phrases.len() * self.dim);
        for phrase in phrases {
            let tokens: Vec<String> = phrase
                .as_ref()
                .split_whitespace()
                .map(str::to_lowercase)
                .collect();
            if tokens.is_empty() {
                return Err(Error::contract("empty feature phrase"));
            }
            let mut acc = vec![0.0; self.dim];
            for t in &tokens {
                match self.entries.get(t) {
                    Some(v) => acc.iter_mut().zip(v).for_each(|(a, b)| *a += b),
                    None => {
                        if !missing.contains(t) {
                            missing.push(t.clone());
                        }
                    }
                }
            }
            let n = tokens.len() as f64;
            data.extend(acc.into_iter().map(|v| v / n));
        }
        if !missing.is_empty() {
            return Err(Error::Vocabulary(missing));
        }
        Matrix::new(phrases.len(), self.dim, data)
    }
}
