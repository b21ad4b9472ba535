//! Uniform evaluation of candidate architectures at three fidelities.
//!
//! [`Simulator`] is a deterministic stand-in for training; [`ExecEvaluator`]
//! forwards requests to an external trainer over the `gaia-eval` line
//! protocol; [`CachedEvaluator`] puts a persistent append-only cache in front
//! of either.

mod cache;
mod external;
mod sim;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::archspace::Architecture;

pub use cache::{CachedEvaluator, EvalCache};
pub use external::{ExecEvaluator, PROTOCOL_NAME, PROTOCOL_VERSION};
pub use sim::{simulate, SimConfig, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fidelity {
    /// Inherited supernet weights, no finetuning.
    Direct,
    /// The 0.2x finetuning schedule.
    FastFinetune,
    /// The full finetuning schedule, used as the ranking reference.
    FullSchedule,
}

impl Fidelity {
    pub const ALL: [Fidelity; 3] = [Fidelity::Direct, Fidelity::FastFinetune, Fidelity::FullSchedule];

    /// Wire name.
    pub fn as_str(&self) -> &'static str {
        match self {
            Fidelity::Direct => "direct",
            Fidelity::FastFinetune => "fast",
            Fidelity::FullSchedule => "full",
        }
    }

    /// Relative training cost, full = 1.
    pub fn cost_units(&self) -> f64 {
        match self {
            Fidelity::Direct => 0.01,
            Fidelity::FastFinetune => 0.2,
            Fidelity::FullSchedule => 1.0,
        }
    }
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fidelity {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Fidelity::Direct),
            "fast" => Ok(Fidelity::FastFinetune),
            "full" => Ok(Fidelity::FullSchedule),
            other => Err(EvalError::ProtocolError(format!("unknown fidelity {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRequest {
    pub id: String,
    pub arch: Architecture,
    pub fidelity: Fidelity,
    pub task: String,
}

impl EvalRequest {
    pub fn new(id: impl Into<String>, arch: Architecture, fidelity: Fidelity, task: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            arch,
            fidelity,
            task: task.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Simulated,
    External,
    Cached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub id: String,
    pub metric: f64,
    pub metric_name: String,
    pub cost_s: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("EndpointDown: {0}")]
    EndpointDown(String),
    #[error("ProtocolError: {0}")]
    ProtocolError(String),
    #[error("RemoteError: {0}")]
    RemoteError(String),
    #[error("CacheCorrupt: line {line}: {text:?}")]
    CacheCorrupt { line: usize, text: String },
    #[error("ConflictingResult: {key} already cached with metric {cached}, got {new}")]
    ConflictingResult { key: String, cached: f64, new: f64 },
    #[error("InvalidArchitecture: {0}")]
    InvalidArchitecture(String),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}

pub trait Evaluator: Sync {
    fn evaluate(&self, req: &EvalRequest) -> Result<EvalResult, EvalError>;
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn evaluate(&self, req: &EvalRequest) -> Result<EvalResult, EvalError> {
        (**self).evaluate(req)
    }
}

impl<E: Evaluator + ?Sized + Send> Evaluator for Box<E> {
    fn evaluate(&self, req: &EvalRequest) -> Result<EvalResult, EvalError> {
        (**self).evaluate(req)
    }
}

/// Evaluates `reqs` on up to `jobs` threads. Results come back in request
/// order whatever the completion order; the first error (by request order)
/// is returned.
pub fn evaluate_batch<E: Evaluator + ?Sized>(
    evaluator: &E,
    reqs: &[EvalRequest],
    jobs: usize,
) -> Result<Vec<EvalResult>, EvalError> {
    let jobs = jobs.max(1).min(reqs.len().max(1));
    if jobs == 1 {
        return reqs.iter().map(|r| evaluator.evaluate(r)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<EvalResult, EvalError>>>> = reqs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= reqs.len() {
                    break;
                }
                let r = evaluator.evaluate(&reqs[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archspace::{RulePool, SubSpace};

    #[test]
    fn fidelity_names() {
        for f in Fidelity::ALL {
            assert_eq!(f.as_str().parse::<Fidelity>().unwrap(), f);
        }
        assert!(Fidelity::FastFinetune.cost_units() < Fidelity::FullSchedule.cost_units());
        assert!("medium".parse::<Fidelity>().is_err());
    }

    #[test]
    fn batch_is_independent_of_jobs() {
        let sim = Simulator::new(SimConfig::default(), 3);
        let space = SubSpace::ar50();
        let reqs: Vec<_> = (0..64)
            .map(|i| {
                let a = crate::archspace::sample(&space, i, &RulePool::standard()).unwrap();
                EvalRequest::new(format!("r{i}"), a, Fidelity::ALL[i as usize % 3], "coco")
            })
            .collect();
        let one = evaluate_batch(&sim, &reqs, 1).unwrap();
        let many = evaluate_batch(&sim, &reqs, 7).unwrap();
        assert_eq!(one, many);
        assert!(one.iter().zip(&reqs).all(|(r, q)| r.id == q.id));
    }
}
