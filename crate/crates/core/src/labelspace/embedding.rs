use std::collections::HashMap;

use super::LabelError;

/// How to embed tokens that are absent from the table.
#[derive(Debug, Clone, PartialEq)]
pub enum Fallback {
    /// Average only the known tokens of a name.
    Skip,
    /// Use the vector of this token instead.
    Token(String),
}

/// Token to unit-norm vector, all of one dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    fallback: Option<Fallback>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    /// Builds a table from raw vectors, normalizing each.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, LabelError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = Self::default();
        for (token, v) in pairs {
            table.insert(token, v)?;
        }
        Ok(table)
    }

    pub fn insert(&mut self, token: impl Into<String>, v: Vec<f64>) -> Result<(), LabelError> {
        let token = token.into().to_lowercase();
        if self.vectors.is_empty() && self.dim == 0 {
            self.dim = v.len();
        }
        if v.is_empty() || v.len() != self.dim {
            return Err(LabelError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        let n = norm(&v);
        if !(n > 0.0 && n.is_finite()) {
            return Err(LabelError::ZeroVector(token));
        }
        self.vectors.insert(token, v.iter().map(|x| x / n).collect());
        Ok(())
    }

    pub fn with_fallback(mut self, fallback: Fallback) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(&token.to_lowercase()).map(Vec::as_slice)
    }

    /// Reads the word2vec text format: `token v1 .. vd` per line with an
    /// optional `<count> <d>` header line.
    pub fn parse(text: &str) -> Result<Self, LabelError> {
        let mut table = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                table.dim = fields[1].parse().unwrap_or_default();
                continue;
            }
            let bad = || LabelError::BadRecord {
                line: i + 1,
                text: raw.to_string(),
            };
            if fields.len() < 2 {
                return Err(bad());
            }
            let v: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad())?;
            table.insert(fields[0], v)?;
        }
        Ok(table)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `u·v / (|u| |v|)`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, LabelError> {
    if u.len() != v.len() {
        return Err(LabelError::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(LabelError::ZeroVector(String::new()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Renormalized mean of the lower-cased whitespace tokens of `name`.
pub fn embed_category(name: &str, table: &EmbeddingTable) -> Result<Vec<f64>, LabelError> {
    let lower = name.to_lowercase();
    let tokens: Vec<&str> = lower.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(LabelError::MissingToken {
            name: name.to_string(),
            token: String::new(),
        });
    }
    let mut found: Vec<&[f64]> = Vec::with_capacity(tokens.len());
    for t in &tokens {
        match (table.get(t), &table.fallback) {
            (Some(v), _) => found.push(v),
            (None, Some(Fallback::Skip)) => {}
            (None, Some(Fallback::Token(fb))) => match table.get(fb) {
                Some(v) => found.push(v),
                None => {
                    return Err(LabelError::MissingToken {
                        name: name.to_string(),
                        token: fb.clone(),
                    })
                }
            },
            (None, None) => {
                return Err(LabelError::MissingToken {
                    name: name.to_string(),
                    token: t.to_string(),
                })
            }
        }
    }
    match found.as_slice() {
        [] => Err(LabelError::MissingToken {
            name: name.to_string(),
            token: tokens[0].to_string(),
        }),
        [single] => Ok(single.to_vec()),
        many => {
            let mut mean = vec![0.0; table.dim];
            for v in many {
                for (m, x) in mean.iter_mut().zip(v.iter()) {
                    *m += x;
                }
            }
            let n = norm(&mean);
            if n == 0.0 {
                return Err(LabelError::ZeroVector(name.to_string()));
            }
            Ok(mean.iter().map(|x| x / n).collect())
        }
    }
}
