//! Architecture search space: depth, width and input-scale grids around
//! model anchors, enumeration, membership, sampling rules and the
//! progressive-shrinking phase schedule.

mod sample;
mod schedule;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};

pub use sample::{
    depth_targets, depth_targets_for, sample, sample_depths, sample_depths_with_total, sample_widths,
    RulePool, SampleRule, Sampler, DEPTH_QUANTILES,
};
pub use schedule::{abps_schedule, ABPSchedule, Anchored, Phase, Schedule, ScheduleError};

pub const STAGES: usize = 4;
pub const WIDTH_SLOTS: usize = 5;

/// Default cap for [`SubSpace::enumerate`].
pub const DEFAULT_ENUM_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("invalid grid for {dim}: min {min}, max {max}, step {step}")]
    InvalidGrid {
        dim: String,
        min: u32,
        max: u32,
        step: u32,
    },
    #[error("anchor value {value} for {dim} is not on the grid")]
    AnchorOffGrid { dim: String, value: u32 },
    #[error("space has {cardinality} members, above the cap of {cap}")]
    SpaceTooLarge { cardinality: u64, cap: u64 },
    #[error("space is empty")]
    EmptySpace,
    #[error("rule pool probabilities sum to {0}, expected 1")]
    BadRulePool(f64),
    #[error("unknown preset {0:?} (expected ar50, ar77 or ar101)")]
    UnknownPreset(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// One searchable network: residual blocks per stage, stem + stage widths,
/// square input side.
///
/// Field order defines the derived ordering: `(scale, depths, widths)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Architecture {
    pub scale: u32,
    pub depths: [u32; STAGES],
    pub widths: [u32; WIDTH_SLOTS],
}

impl Architecture {
    pub fn new(depths: [u32; STAGES], widths: [u32; WIDTH_SLOTS], scale: u32) -> Self {
        Self {
            scale,
            depths,
            widths,
        }
    }

    pub fn total_depth(&self) -> u32 {
        self.depths.iter().sum()
    }

    /// Deterministic canonical key, e.g. `800:3,4,6,3:64,64,128,256,512`.
    pub fn key(&self) -> String {
        format!("{}:{}:{}", self.scale, join(&self.depths), join(&self.widths))
    }

    pub fn is_valid(&self) -> bool {
        self.scale >= 1 && self.depths.iter().all(|&d| d >= 1) && self.widths.iter().all(|&w| w >= 1)
    }
}

fn join(v: &[u32]) -> String {
    v.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{D: [{}], W: [{}], S: {}}}",
            join(&self.depths),
            join(&self.widths),
            self.scale
        )
    }
}

#[derive(Debug, Error)]
#[error("bad architecture key {0:?}")]
pub struct ParseArchError(pub String);

impl FromStr for Architecture {
    type Err = ParseArchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseArchError(s.to_string());
        let mut parts = s.trim().split(':');
        let scale = parts.next().and_then(|p| p.parse().ok()).ok_or_else(err)?;
        let depths: Vec<u32> = parts
            .next()
            .and_then(crate::config::parse_list)
            .ok_or_else(err)?;
        let widths: Vec<u32> = parts
            .next()
            .and_then(crate::config::parse_list)
            .ok_or_else(err)?;
        if parts.next().is_some() {
            return Err(err());
        }
        Ok(Self {
            scale,
            depths: depths.try_into().map_err(|_| err())?,
            widths: widths.try_into().map_err(|_| err())?,
        })
    }
}

/// Arithmetic grid `{min, min+step, ..., max}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    pub min: u32,
    pub max: u32,
    pub step: u32,
}

impl Grid {
    pub const fn new(min: u32, max: u32, step: u32) -> Self {
        Self { min, max, step }
    }

    pub const fn fixed(v: u32) -> Self {
        Self::new(v, v, 1)
    }

    pub fn is_valid(&self) -> bool {
        self.min >= 1 && self.step >= 1 && self.min <= self.max && (self.max - self.min).is_multiple_of(self.step)
    }

    pub fn len(&self) -> u32 {
        (self.max - self.min) / self.step + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: u32) -> u32 {
        self.min + i * self.step
    }

    pub fn values(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len()).map(|i| self.value(i))
    }

    pub fn contains(&self, v: u32) -> bool {
        v >= self.min && v <= self.max && (v - self.min).is_multiple_of(self.step)
    }
}

/// A sub search space surrounding one anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubSpace {
    pub name: String,
    pub depth: [Grid; STAGES],
    pub width: [Grid; WIDTH_SLOTS],
    pub scale: Grid,
    pub anchor: Architecture,
}

const SHARED_WIDTHS: [Grid; WIDTH_SLOTS] = [
    Grid::new(32, 64, 16),
    Grid::new(48, 80, 16),
    Grid::new(96, 160, 32),
    Grid::new(192, 320, 64),
    Grid::new(384, 640, 128),
];
const ANCHOR_WIDTHS: [u32; WIDTH_SLOTS] = [64, 64, 128, 256, 512];

impl SubSpace {
    /// Validates every grid and the anchor-on-grid invariant.
    pub fn new(
        name: impl Into<String>,
        depth: [Grid; STAGES],
        width: [Grid; WIDTH_SLOTS],
        scale: Grid,
        anchor: Architecture,
    ) -> Result<Self, SpaceError> {
        let space = Self {
            name: name.into(),
            depth,
            width,
            scale,
            anchor,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn ar50() -> Self {
        Self {
            name: "AR50".into(),
            depth: [
                Grid::new(2, 4, 1),
                Grid::new(2, 6, 2),
                Grid::new(4, 8, 2),
                Grid::new(2, 4, 1),
            ],
            width: SHARED_WIDTHS,
            scale: Grid::new(400, 720, 80),
            anchor: Architecture::new([3, 4, 6, 3], ANCHOR_WIDTHS, 560),
        }
    }

    pub fn ar77() -> Self {
        Self {
            name: "AR77".into(),
            depth: [
                Grid::new(2, 4, 1),
                Grid::new(2, 6, 2),
                Grid::new(11, 19, 4),
                Grid::new(2, 4, 1),
            ],
            width: SHARED_WIDTHS,
            scale: Grid::new(480, 800, 80),
            anchor: Architecture::new([3, 4, 15, 3], ANCHOR_WIDTHS, 640),
        }
    }

    pub fn ar101() -> Self {
        Self {
            name: "AR101".into(),
            depth: [
                Grid::new(2, 4, 1),
                Grid::new(2, 6, 2),
                Grid::new(17, 29, 6),
                Grid::new(2, 4, 1),
            ],
            width: SHARED_WIDTHS,
            scale: Grid::new(560, 880, 80),
            anchor: Architecture::new([3, 4, 23, 3], ANCHOR_WIDTHS, 720),
        }
    }

    pub fn preset(name: &str) -> Result<Self, SpaceError> {
        match name.to_ascii_lowercase().as_str() {
            "ar50" => Ok(Self::ar50()),
            "ar77" => Ok(Self::ar77()),
            "ar101" => Ok(Self::ar101()),
            _ => Err(SpaceError::UnknownPreset(name.to_string())),
        }
    }

    /// Space containing only `arch`.
    pub fn degenerate(arch: Architecture) -> Self {
        Self {
            name: "fixed".into(),
            depth: arch.depths.map(Grid::fixed),
            width: arch.widths.map(Grid::fixed),
            scale: Grid::fixed(arch.scale),
            anchor: arch,
        }
    }

    fn dims(&self) -> impl Iterator<Item = (String, &Grid, u32)> {
        let depth = self
            .depth
            .iter()
            .enumerate()
            .map(|(i, g)| (format!("depth.stage{}", i + 1), g, self.anchor.depths[i]));
        let width = self
            .width
            .iter()
            .enumerate()
            .map(|(i, g)| (format!("width.slot{i}"), g, self.anchor.widths[i]));
        depth
            .chain(width)
            .chain(std::iter::once(("scale".to_string(), &self.scale, self.anchor.scale)))
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        for (dim, g, anchor) in self.dims() {
            if !g.is_valid() {
                return Err(SpaceError::InvalidGrid {
                    dim,
                    min: g.min,
                    max: g.max,
                    step: g.step,
                });
            }
            if !g.contains(anchor) {
                return Err(SpaceError::AnchorOffGrid { dim, value: anchor });
            }
        }
        Ok(())
    }

    /// Product of per-dimension grid sizes.
    pub fn cardinality(&self) -> u64 {
        self.grids().map(|g| u64::from(g.len())).product()
    }

    fn grids(&self) -> impl Iterator<Item = &Grid> {
        std::iter::once(&self.scale)
            .chain(self.depth.iter())
            .chain(self.width.iter())
    }

    pub fn contains(&self, arch: &Architecture) -> bool {
        self.scale.contains(arch.scale)
            && self.depth.iter().zip(arch.depths).all(|(g, d)| g.contains(d))
            && self.width.iter().zip(arch.widths).all(|(g, w)| g.contains(w))
    }

    pub fn depth_min_total(&self) -> u32 {
        self.depth.iter().map(|g| g.min).sum()
    }

    pub fn depth_max_total(&self) -> u32 {
        self.depth.iter().map(|g| g.max).sum()
    }

    /// Member at `index` of the lexicographic `(scale, depths, widths)` order.
    pub fn member(&self, index: u64) -> Option<Architecture> {
        if index >= self.cardinality() {
            return None;
        }
        let grids: Vec<&Grid> = self.grids().collect();
        let mut digits = [0u32; 1 + STAGES + WIDTH_SLOTS];
        let mut rest = index;
        for (slot, g) in grids.iter().enumerate().rev() {
            let n = u64::from(g.len());
            digits[slot] = (rest % n) as u32;
            rest /= n;
        }
        let v = |slot: usize| grids[slot].value(digits[slot]);
        Some(Architecture {
            scale: v(0),
            depths: std::array::from_fn(|i| v(1 + i)),
            widths: std::array::from_fn(|i| v(1 + STAGES + i)),
        })
    }

    /// Every member in lexicographic `(scale, depths, widths)` order.
    pub fn enumerate(&self, cap: u64) -> Result<Enumeration<'_>, SpaceError> {
        let cardinality = self.cardinality();
        if cardinality > cap {
            return Err(SpaceError::SpaceTooLarge { cardinality, cap });
        }
        Ok(Enumeration {
            space: self,
            next: 0,
            len: cardinality,
        })
    }

    /// All depth combinations in lexicographic order.
    pub fn depth_combos(&self) -> Vec<[u32; STAGES]> {
        let mut out = vec![[0u32; STAGES]];
        for (s, g) in self.depth.iter().enumerate() {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    g.values().map(move |d| {
                        let mut c = prefix;
                        c[s] = d;
                        c
                    })
                })
                .collect();
        }
        out
    }

    /// Sorted distinct achievable total depths.
    pub fn achievable_totals(&self) -> Vec<u32> {
        let mut totals: Vec<u32> = self.depth_combos().iter().map(|c| c.iter().sum()).collect();
        totals.sort_unstable();
        totals.dedup();
        totals
    }

    /// Loads a space from a key/value file (`depth.stageN.min|max|step`,
    /// `width.slotN.*`, `scale.*`, `anchor.depths|widths|scale`, optional `name`).
    pub fn from_config(kv: &KeyValues) -> Result<Self, SpaceError> {
        let grid = |prefix: &str| -> Result<Grid, ConfigError> {
            Ok(Grid::new(
                kv.require_value(&format!("{prefix}.min"))?,
                kv.require_value(&format!("{prefix}.max"))?,
                kv.require_value(&format!("{prefix}.step"))?,
            ))
        };
        let mut depth = [Grid::fixed(1); STAGES];
        for (i, g) in depth.iter_mut().enumerate() {
            *g = grid(&format!("depth.stage{}", i + 1))?;
        }
        let mut width = [Grid::fixed(1); WIDTH_SLOTS];
        for (i, g) in width.iter_mut().enumerate() {
            *g = grid(&format!("width.slot{i}"))?;
        }
        let scale = grid("scale")?;
        let bad = |key: &str| {
            SpaceError::Config(ConfigError::BadValue {
                key: key.to_string(),
                value: kv.get(key).unwrap_or_default().to_string(),
            })
        };
        let depths: Vec<u32> = kv.require_list("anchor.depths")?;
        let widths: Vec<u32> = kv.require_list("anchor.widths")?;
        let anchor = Architecture {
            scale: kv.require_value("anchor.scale")?,
            depths: depths.try_into().map_err(|_| bad("anchor.depths"))?,
            widths: widths.try_into().map_err(|_| bad("anchor.widths"))?,
        };
        let name = kv.get("name").unwrap_or("custom").to_string();
        Self::new(name, depth, width, scale, anchor)
    }

    pub fn load(path: &Path) -> Result<Self, SpaceError> {
        Self::from_config(&KeyValues::load(path)?)
    }

    /// Serializes to the key/value format read by [`SubSpace::from_config`].
    pub fn to_config(&self) -> String {
        let mut out = format!("name = {}\n", self.name);
        let mut section = |name: String, g: &Grid| {
            out.push_str(&format!(
                "\n[{name}]\nmin = {}\nmax = {}\nstep = {}\n",
                g.min, g.max, g.step
            ));
        };
        for (i, g) in self.depth.iter().enumerate() {
            section(format!("depth.stage{}", i + 1), g);
        }
        for (i, g) in self.width.iter().enumerate() {
            section(format!("width.slot{i}"), g);
        }
        section("scale".into(), &self.scale);
        out.push_str(&format!(
            "\n[anchor]\ndepths = {}\nwidths = {}\nscale = {}\n",
            join(&self.anchor.depths),
            join(&self.anchor.widths),
            self.anchor.scale
        ));
        out
    }
}

/// Returns the built-in `(AR50, AR77, AR101)` subspaces.
pub fn builtin_subspaces() -> (SubSpace, SubSpace, SubSpace) {
    (SubSpace::ar50(), SubSpace::ar77(), SubSpace::ar101())
}

pub fn total_depth(arch: &Architecture) -> u32 {
    arch.total_depth()
}

pub struct Enumeration<'a> {
    space: &'a SubSpace,
    next: u64,
    len: u64,
}

impl Iterator for Enumeration<'_> {
    type Item = Architecture;

    fn next(&mut self) -> Option<Architecture> {
        if self.next >= self.len {
            return None;
        }
        let a = self.space.member(self.next);
        self.next += 1;
        a
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.len - self.next) as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Enumeration<'_> {}

/// Values shared by every grid.
fn common_values(grids: &[Grid]) -> u64 {
    let smallest = grids.iter().min_by_key(|g| g.len()).expect("at least one grid");
    smallest.values().filter(|&v| grids.iter().all(|g| g.contains(v))).count() as u64
}

/// Number of distinct architectures across `spaces`, by inclusion-exclusion
/// over the per-dimension grid intersections. Exponential in the number of
/// spaces, which suits a handful of anchors.
pub fn union_cardinality(spaces: &[SubSpace]) -> u64 {
    let n = spaces.len();
    let mut total: i128 = 0;
    for mask in 1u64..(1u64 << n) {
        let members: Vec<&SubSpace> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| &spaces[i]).collect();
        let mut size: i128 = 1;
        let dims = (0..STAGES)
            .map(|d| members.iter().map(|s| s.depth[d]).collect::<Vec<_>>())
            .chain((0..WIDTH_SLOTS).map(|w| members.iter().map(|s| s.width[w]).collect()))
            .chain(std::iter::once(members.iter().map(|s| s.scale).collect()));
        for grids in dims {
            size *= i128::from(common_values(&grids));
            if size == 0 {
                break;
            }
        }
        if members.len() % 2 == 1 {
            total += size;
        } else {
            total -= size;
        }
    }
    total as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_builtin() -> [SubSpace; 3] {
        [SubSpace::ar50(), SubSpace::ar77(), SubSpace::ar101()]
    }

    #[test]
    fn builtin_anchors_match_table() {
        let (ar50, ar77, ar101) = builtin_subspaces();
        assert_eq!(ar50.anchor, Architecture::new([3, 4, 6, 3], [64, 64, 128, 256, 512], 560));
        assert_eq!(ar77.anchor.depths, [3, 4, 15, 3]);
        assert_eq!(ar77.anchor.scale, 640);
        assert_eq!(ar101.anchor.depths, [3, 4, 23, 3]);
        assert_eq!(ar101.anchor.scale, 720);
        assert_eq!(ar101.depth[2], Grid::new(17, 29, 6));
        assert_eq!(ar101.scale, Grid::new(560, 880, 80));
        for s in all_builtin() {
            s.validate().unwrap();
            assert!(s.contains(&s.anchor));
        }
    }

    #[test]
    fn cardinalities() {
        for s in all_builtin() {
            assert_eq!(s.cardinality(), 98_415);
        }
        let deg = SubSpace::degenerate(SubSpace::ar50().anchor);
        assert_eq!(deg.cardinality(), 1);
        assert_eq!(deg.enumerate(10).unwrap().collect::<Vec<_>>(), vec![deg.anchor]);
    }

    #[test]
    fn enumeration_order() {
        let s = SubSpace::ar50();
        let mut it = s.enumerate(DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(
            it.next().unwrap(),
            Architecture::new([2, 2, 4, 2], [32, 48, 96, 192, 384], 400)
        );
        assert_eq!(
            it.next().unwrap(),
            Architecture::new([2, 2, 4, 2], [32, 48, 96, 192, 512], 400)
        );
        let all: Vec<_> = s.enumerate(DEFAULT_ENUM_CAP).unwrap().collect();
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(all.last().unwrap(), &Architecture::new([4, 6, 8, 4], [64, 80, 160, 320, 640], 720));
    }

    #[test]
    fn union_matches_enumeration() {
        use std::collections::HashSet;
        let distinct = |spaces: &[SubSpace]| {
            let mut seen = HashSet::new();
            for s in spaces {
                seen.extend(s.enumerate(DEFAULT_ENUM_CAP).unwrap());
            }
            seen.len() as u64
        };
        let builtin = all_builtin();
        assert_eq!(union_cardinality(&builtin), 295_245);
        assert_eq!(union_cardinality(&builtin), distinct(&builtin));
        let mut shifted = SubSpace::ar50();
        shifted.scale = Grid::new(480, 800, 40);
        shifted.width[1] = Grid::new(48, 64, 8);
        let mixed = [SubSpace::ar50(), shifted, SubSpace::degenerate(SubSpace::ar50().anchor)];
        assert_eq!(union_cardinality(&mixed), distinct(&mixed));
        assert_eq!(union_cardinality(&[]), 0);
    }

    #[test]
    fn enumerate_respects_cap() {
        let err = SubSpace::ar77().enumerate(1000).err().unwrap();
        assert!(matches!(err, SpaceError::SpaceTooLarge { cardinality: 98_415, cap: 1000 }));
    }

    #[test]
    fn membership() {
        let s = SubSpace::ar50();
        let mut off = s.anchor;
        off.scale = 440;
        assert!(!s.contains(&off));
        let r101 = Architecture::new([3, 4, 23, 3], [64, 64, 128, 256, 512], 720);
        assert!(SubSpace::ar101().contains(&r101));
        assert!(!s.contains(&r101));
    }

    #[test]
    fn total_depths() {
        assert_eq!(total_depth(&SubSpace::ar50().anchor), 16);
        assert_eq!(total_depth(&SubSpace::ar101().anchor), 33);
        assert_eq!(SubSpace::ar101().depth_min_total(), 23);
        assert_eq!(SubSpace::ar50().achievable_totals(), (10..=22).collect::<Vec<_>>());
    }

    #[test]
    fn key_round_trip() {
        let a = SubSpace::ar77().anchor;
        assert_eq!(a.key(), "640:3,4,15,3:64,64,128,256,512");
        assert_eq!(a.key().parse::<Architecture>().unwrap(), a);
        assert!("1:2:3".parse::<Architecture>().is_err());
    }

    #[test]
    fn config_round_trip_and_validation() {
        let s = SubSpace::ar101();
        let kv = KeyValues::parse(&s.to_config()).unwrap();
        assert_eq!(SubSpace::from_config(&kv).unwrap(), s);

        let bad = s.to_config().replace("scale = 720", "scale = 730");
        let err = SubSpace::from_config(&KeyValues::parse(&bad).unwrap()).unwrap_err();
        assert!(matches!(err, SpaceError::AnchorOffGrid { .. }));
    }

    #[test]
    fn citypersons_scale_grid_is_configurable() {
        // Scale grid around 1024 with a 128-pixel step.
        let arch = Architecture::new([3, 2, 4, 3], [64, 64, 96, 192, 384], 1152);
        let mut s = SubSpace::ar50();
        s.scale = Grid::new(768, 1280, 128);
        s.anchor.scale = 1024;
        s.validate().unwrap();
        assert!(s.contains(&arch));
        assert_eq!(s.scale.len(), 5);
    }
}
