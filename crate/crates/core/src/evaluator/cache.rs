//! Append-only evaluation cache.
//!
//! File lines: `key<TAB>fidelity<TAB>task<TAB>metric<TAB>cost_s`, where `key`
//! is [`Architecture::key`](crate::archspace::Architecture::key). Corrupt
//! lines are skipped with a warning at load.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{EvalError, EvalRequest, EvalResult, Evaluator, Fidelity, Provenance};

type CacheKey = (String, Fidelity, String);

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    metric: f64,
    cost_s: f64,
}

#[derive(Debug)]
pub struct EvalCache {
    path: PathBuf,
    entries: HashMap<CacheKey, Entry>,
    skipped: Vec<EvalError>,
}

fn parse_line(line: &str) -> Option<(CacheKey, Entry)> {
    let f: Vec<&str> = line.split('\t').collect();
    let [key, fidelity, task, metric, cost] = f[..] else {
        return None;
    };
    key.parse::<crate::archspace::Architecture>().ok()?;
    let metric: f64 = metric.parse().ok()?;
    if !metric.is_finite() {
        return None;
    }
    Some((
        (key.to_string(), fidelity.parse().ok()?, task.to_string()),
        Entry {
            metric,
            cost_s: cost.parse().ok()?,
        },
    ))
}

impl EvalCache {
    /// Opens (or starts) the cache at `path`.
    pub fn open(path: &Path) -> Result<Self, EvalError> {
        let mut entries = HashMap::new();
        let mut skipped = Vec::new();
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match parse_line(line) {
                    Some((k, e)) => {
                        entries.entry(k).or_insert(e);
                    }
                    None => {
                        let err = EvalError::CacheCorrupt {
                            line: i + 1,
                            text: line.to_string(),
                        };
                        log::warn!("{err}; record skipped");
                        skipped.push(err);
                    }
                }
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
            skipped,
        })
    }

    /// Records that were unreadable at load.
    pub fn skipped(&self) -> &[EvalError] {
        &self.skipped
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn key(req: &EvalRequest) -> CacheKey {
        (req.arch.key(), req.fidelity, req.task.clone())
    }

    pub fn get(&self, req: &EvalRequest) -> Option<EvalResult> {
        self.entries.get(&Self::key(req)).map(|e| EvalResult {
            id: req.id.clone(),
            metric: e.metric,
            metric_name: "cached".into(),
            cost_s: e.cost_s,
            provenance: Provenance::Cached,
        })
    }

    /// Stores a result. Re-putting an identical metric is a no-op; a
    /// different metric for the same key is rejected.
    pub fn put(&mut self, req: &EvalRequest, result: &EvalResult) -> Result<(), EvalError> {
        let key = Self::key(req);
        if let Some(e) = self.entries.get(&key) {
            if e.metric == result.metric {
                return Ok(());
            }
            return Err(EvalError::ConflictingResult {
                key: format!("{}|{}|{}", key.0, key.1, key.2),
                cached: e.metric,
                new: result.metric,
            });
        }
        if let Some(dir) = self.path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let file: File = OpenOptions::new().create(true).append(true).open(&self.path)?;
        let mut w = BufWriter::new(file);
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            key.0, key.1, key.2, result.metric, result.cost_s
        )?;
        w.flush()?;
        self.entries.insert(
            key,
            Entry {
                metric: result.metric,
                cost_s: result.cost_s,
            },
        );
        Ok(())
    }
}

/// Serves hits from the cache and stores misses. Writes are serialized.
pub struct CachedEvaluator<E> {
    inner: E,
    cache: Mutex<EvalCache>,
}

impl<E: Evaluator> CachedEvaluator<E> {
    pub fn new(inner: E, cache: EvalCache) -> Self {
        Self {
            inner,
            cache: Mutex::new(cache),
        }
    }

    pub fn into_cache(self) -> EvalCache {
        self.cache.into_inner().expect("cache lock")
    }
}

impl<E: Evaluator> Evaluator for CachedEvaluator<E> {
    fn evaluate(&self, req: &EvalRequest) -> Result<EvalResult, EvalError> {
        if let Some(hit) = self.cache.lock().expect("cache lock").get(req) {
            return Ok(hit);
        }
        let result = self.inner.evaluate(req)?;
        self.cache.lock().expect("cache lock").put(req, &result)?;
        Ok(result)
    }
}
