//! Task-specific architecture selection: constraint filtering, the two-step
//! group search and Kendall-tau ranking studies.

mod kendall;
mod search;
mod study;

use std::fmt;

use thiserror::Error;

use crate::archspace::{Architecture, SpaceError, SubSpace};
use crate::costmodel::{detector_flops, HeadConfig, LatencyModel};
use crate::evaluator::EvalError;

pub use kendall::{kendall_tau, kendall_tau_xy, TauError};
pub use search::{feasible_groups, two_step_search, GroupTrace, SearchConfig, SearchTrace, ShortlistEntry};
pub use study::{ranking_study, StudyConfig, StudyReport, StudyRow};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("NoFeasibleGroup: no (scale, total depth) group has a member satisfying the constraint")]
    NoFeasibleGroup,
    #[error("SamplingExhausted: every feasible group ran out of attempts")]
    SamplingExhausted,
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Tau(#[from] TauError),
}

/// Deployment constraint. Every present clause must hold.
#[derive(Debug, Clone, Default)]
pub struct Constraint {
    /// Half-open GFLOPs band `[lo, hi)`.
    pub flops: Option<(f64, f64)>,
    /// Latency model and its upper bound in milliseconds (inclusive).
    pub latency: Option<(LatencyModel, f64)>,
    /// Inclusive input-scale bounds.
    pub scale: Option<(u32, u32)>,
    pub within: Option<SubSpace>,
    pub head: HeadConfig,
}

impl Constraint {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn flops_band(lo: f64, hi: f64) -> Self {
        Self {
            flops: Some((lo, hi)),
            ..Self::default()
        }
    }

    pub fn scale_only(lo: u32, hi: u32) -> Self {
        Self {
            scale: Some((lo, hi)),
            ..Self::default()
        }
    }

    pub fn admits_scale(&self, scale: u32) -> bool {
        self.scale.is_none_or(|(lo, hi)| (lo..=hi).contains(&scale))
    }

    pub fn satisfies(&self, arch: &Architecture) -> bool {
        if !self.admits_scale(arch.scale) {
            return false;
        }
        if let Some(space) = &self.within {
            if !space.contains(arch) {
                return false;
            }
        }
        if let Some((lo, hi)) = self.flops {
            let g = detector_flops(arch, &self.head).total;
            if !(g >= lo && g < hi) {
                return false;
            }
        }
        if let Some((model, max_ms)) = &self.latency {
            if model.estimate(arch) > *max_ms {
                return false;
            }
        }
        true
    }
}

/// A (scale, total depth) group inside one anchor subspace. `space` indexes
/// the slice of subspaces handed to the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupKey {
    pub space: usize,
    pub scale: u32,
    pub total_depth: u32,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.space, self.scale, self.total_depth)
    }
}
