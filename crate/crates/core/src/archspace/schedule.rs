//! Anchor-based progressive-shrinking schedules.
//!
//! Phases run back to back. Warmup epochs are counted inside a phase's epoch
//! budget and always sit at the start of the phase.

use thiserror::Error;

use super::SubSpace;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("invalid phase {index}: {reason}")]
    InvalidPhase { index: usize, reason: String },
    #[error("schedule has no phases")]
    Empty,
    #[error("epoch {epoch} is outside the schedule of {total} epochs")]
    EpochOutOfRange { epoch: u32, total: u32 },
}

/// Spaces that can be ordered by the total depth of their anchor.
pub trait Anchored {
    fn anchor_total_depth(&self) -> u32;
}

impl Anchored for SubSpace {
    fn anchor_total_depth(&self) -> u32 {
        self.anchor.total_depth()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase<S> {
    pub space: S,
    pub epochs: u32,
    pub warmup: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule<S> {
    phases: Vec<Phase<S>>,
}

impl<S: Anchored> Schedule<S> {
    /// Checks: at least one phase, every phase has epochs, warmup is 0 or 1
    /// and fits inside the phase, anchors strictly shrink in total depth.
    pub fn new(phases: Vec<Phase<S>>) -> Result<Self, ScheduleError> {
        if phases.is_empty() {
            return Err(ScheduleError::Empty);
        }
        for (index, p) in phases.iter().enumerate() {
            let invalid = |reason: &str| ScheduleError::InvalidPhase {
                index,
                reason: reason.to_string(),
            };
            if p.epochs == 0 {
                return Err(invalid("zero epochs"));
            }
            if p.warmup > 1 {
                return Err(invalid("warmup must be 0 or 1 epochs"));
            }
            if p.warmup >= p.epochs {
                return Err(invalid("warmup consumes the whole phase"));
            }
            if index > 0 && p.space.anchor_total_depth() >= phases[index - 1].space.anchor_total_depth() {
                return Err(invalid("anchor does not shrink in total depth"));
            }
        }
        Ok(Self { phases })
    }

    /// First phase without warmup, one warmup epoch on every shrink.
    pub fn progressive(phases: Vec<(S, u32)>) -> Result<Self, ScheduleError> {
        Self::new(
            phases
                .into_iter()
                .enumerate()
                .map(|(i, (space, epochs))| Phase {
                    space,
                    epochs,
                    warmup: u32::from(i > 0),
                })
                .collect(),
        )
    }
}

impl<S> Schedule<S> {
    pub fn phases(&self) -> &[Phase<S>] {
        &self.phases
    }

    pub fn total_epochs(&self) -> u32 {
        self.phases.iter().map(|p| p.epochs).sum()
    }

    /// Phase index, phase, and whether `epoch` (0-indexed) is a warmup epoch.
    pub fn locate(&self, epoch: u32) -> Result<(usize, &Phase<S>, bool), ScheduleError> {
        let mut start = 0;
        for (i, p) in self.phases.iter().enumerate() {
            if epoch < start + p.epochs {
                return Ok((i, p, epoch - start < p.warmup));
            }
            start += p.epochs;
        }
        Err(ScheduleError::EpochOutOfRange {
            epoch,
            total: self.total_epochs(),
        })
    }

    /// Space active at `epoch` and its warmup flag.
    pub fn epoch_subspace(&self, epoch: u32) -> Result<(&S, bool), ScheduleError> {
        self.locate(epoch).map(|(_, p, w)| (&p.space, w))
    }
}

pub type ABPSchedule = Schedule<SubSpace>;

/// Builds the detector schedule. `None` gives AR101 for 24 epochs, then
/// AR77 and AR50 for 13 epochs each with one warmup epoch.
pub fn abps_schedule(phases: Option<Vec<(SubSpace, u32)>>) -> Result<ABPSchedule, ScheduleError> {
    let phases =
        phases.unwrap_or_else(|| vec![(SubSpace::ar101(), 24), (SubSpace::ar77(), 13), (SubSpace::ar50(), 13)]);
    Schedule::progressive(phases)
}
