//! Rule-pool sampling.
//!
//! A draw first picks a rule from the pool, then realizes it. Depth-quantile
//! rules target a total depth `round(d_min + q * (d_max - d_min))`; when the
//! target is not achievable the nearest achievable total is used (ties go
//! to the smaller total) and a per-stage combination is drawn uniformly
//! among all combinations with that total.

use rand::Rng as _;

use super::{Architecture, Grid, SpaceError, SubSpace};
use crate::rng::{self, Rng};

/// The five depth quantiles of the default pool.
pub const DEPTH_QUANTILES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleRule {
    /// Total depth at the given quantile of `[d_min, d_max]`; widths and
    /// scale uniform.
    DepthQuantile(f64),
    /// Every width at its grid minimum; depths and scale uniform.
    MinWidth,
    /// Every dimension uniform on its grid.
    UniformRandom,
}

impl SampleRule {
    pub fn label(&self) -> String {
        match self {
            SampleRule::DepthQuantile(q) => format!("depth_q{q}"),
            SampleRule::MinWidth => "min_width".into(),
            SampleRule::UniformRandom => "random".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RulePool {
    entries: Vec<(SampleRule, f64)>,
}

impl RulePool {
    pub fn new(entries: Vec<(SampleRule, f64)>) -> Result<Self, SpaceError> {
        let sum: f64 = entries.iter().map(|(_, p)| p).sum();
        if entries.is_empty()
            || entries.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0))
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(SpaceError::BadRulePool(sum));
        }
        Ok(Self { entries })
    }

    /// Five depth-quantile rules at 1/8 each plus uniform random at 3/8.
    pub fn standard() -> Self {
        let mut entries: Vec<_> = DEPTH_QUANTILES
            .iter()
            .map(|&q| (SampleRule::DepthQuantile(q), 1.0 / 8.0))
            .collect();
        entries.push((SampleRule::UniformRandom, 3.0 / 8.0));
        Self { entries }
    }

    /// The standard pool with a min-width rule carved out of the random share.
    pub fn with_min_width(p: f64) -> Result<Self, SpaceError> {
        let mut entries = Self::standard().entries;
        entries[5].1 -= p;
        entries.push((SampleRule::MinWidth, p));
        Self::new(entries)
    }

    pub fn forced(rule: SampleRule) -> Self {
        Self {
            entries: vec![(rule, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(SampleRule, f64)] {
        &self.entries
    }

    /// Index of the drawn rule.
    pub fn draw(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, (_, p)) in self.entries.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding leaves u >= acc only at the very top; pick the last positive entry
        self.entries
            .iter()
            .rposition(|(_, p)| *p > 0.0)
            .unwrap_or(self.entries.len() - 1)
    }
}

impl Default for RulePool {
    fn default() -> Self {
        Self::standard()
    }
}

/// `round(d_min + q * d')` for the five default quantiles.
pub fn depth_targets(space: &SubSpace) -> [u32; 5] {
    depth_targets_for(&space.depth)
}

pub fn depth_targets_for(grids: &[Grid]) -> [u32; 5] {
    DEPTH_QUANTILES.map(|q| quantile_target(grids, q))
}

fn quantile_target(grids: &[Grid], q: f64) -> u32 {
    let lo: u32 = grids.iter().map(|g| g.min).sum();
    let hi: u32 = grids.iter().map(|g| g.max).sum();
    (f64::from(lo) + q * f64::from(hi - lo)).round() as u32
}

/// Number of per-stage combinations reaching each total, stage by stage
/// from the back: `ways[s][t]` counts combos of stages `s..` summing to `t`.
struct DepthCounts {
    ways: Vec<Vec<u128>>,
}

impl DepthCounts {
    fn new(grids: &[Grid]) -> Self {
        let hi: usize = grids.iter().map(|g| g.max as usize).sum();
        let mut ways = vec![vec![0u128; hi + 1]; grids.len() + 1];
        ways[grids.len()][0] = 1;
        for s in (0..grids.len()).rev() {
            for t in 0..=hi {
                let mut n = 0u128;
                for v in grids[s].values() {
                    let v = v as usize;
                    if v <= t {
                        n += ways[s + 1][t - v];
                    }
                }
                ways[s][t] = n;
            }
        }
        Self { ways }
    }

    fn nearest_total(&self, target: u32) -> u32 {
        let achievable = |t: usize| self.ways[0][t] > 0;
        let hi = self.ways[0].len() - 1;
        let target = target as usize;
        for off in 0..=hi.max(target) {
            if target >= off && achievable(target - off) {
                return (target - off) as u32;
            }
            if target + off <= hi && achievable(target + off) {
                return (target + off) as u32;
            }
        }
        unreachable!("at least one total is achievable for valid grids")
    }

    fn draw(&self, grids: &[Grid], total: u32, rng: &mut Rng) -> Vec<u32> {
        let mut rest = total as usize;
        let mut out = Vec::with_capacity(grids.len());
        for (s, g) in grids.iter().enumerate() {
            let mut pick = rng.random_range(0..self.ways[s][rest]);
            let mut chosen = None;
            for v in g.values() {
                let v = v as usize;
                if v > rest {
                    break;
                }
                let n = self.ways[s + 1][rest - v];
                if pick < n {
                    chosen = Some(v);
                    break;
                }
                pick -= n;
            }
            let v = chosen.expect("weighted pick stays within the stage grid");
            out.push(v as u32);
            rest -= v;
        }
        out
    }
}

fn uniform(g: &Grid, rng: &mut Rng) -> u32 {
    g.value(rng.random_range(0..g.len()))
}

/// Per-stage depths for `rule` over arbitrary stage grids.
pub fn sample_depths(grids: &[Grid], rule: &SampleRule, rng: &mut Rng) -> Vec<u32> {
    match rule {
        SampleRule::DepthQuantile(q) => {
            let counts = DepthCounts::new(grids);
            let total = counts.nearest_total(quantile_target(grids, *q));
            counts.draw(grids, total, rng)
        }
        SampleRule::MinWidth | SampleRule::UniformRandom => {
            grids.iter().map(|g| uniform(g, rng)).collect()
        }
    }
}

/// Uniform draw of per-stage depths whose sum is exactly `total`, or `None`
/// when the total is not achievable.
pub fn sample_depths_with_total(grids: &[Grid], total: u32, rng: &mut Rng) -> Option<Vec<u32>> {
    let counts = DepthCounts::new(grids);
    if counts.ways[0].get(total as usize).copied().unwrap_or(0) == 0 {
        return None;
    }
    Some(counts.draw(grids, total, rng))
}

/// Widths for `rule` over arbitrary width grids.
pub fn sample_widths(grids: &[Grid], rule: &SampleRule, rng: &mut Rng) -> Vec<u32> {
    match rule {
        SampleRule::MinWidth => grids.iter().map(|g| g.min).collect(),
        _ => grids.iter().map(|g| uniform(g, rng)).collect(),
    }
}

/// Repeated draws from one space and pool.
#[derive(Debug, Clone)]
pub struct Sampler {
    space: SubSpace,
    pool: RulePool,
}

impl Sampler {
    pub fn new(space: SubSpace, pool: RulePool) -> Result<Self, SpaceError> {
        if space.validate().is_err() {
            return Err(SpaceError::EmptySpace);
        }
        Ok(Self { space, pool })
    }

    pub fn space(&self) -> &SubSpace {
        &self.space
    }

    /// Returns the index of the rule used together with the architecture.
    pub fn draw(&self, rng: &mut Rng) -> (usize, Architecture) {
        let idx = self.pool.draw(rng);
        let rule = self.pool.entries[idx].0;
        (idx, self.realize(&rule, rng))
    }

    pub fn realize(&self, rule: &SampleRule, rng: &mut Rng) -> Architecture {
        let depths = sample_depths(&self.space.depth, rule, rng);
        let widths = sample_widths(&self.space.width, rule, rng);
        let scale = uniform(&self.space.scale, rng);
        Architecture {
            scale,
            depths: to_array(&depths),
            widths: to_array(&widths),
        }
    }
}

fn to_array<const N: usize>(v: &[u32]) -> [u32; N] {
    std::array::from_fn(|i| v[i])
}

/// One draw, a pure function of `(space, seed, pool)`.
pub fn sample(space: &SubSpace, seed: u64, pool: &RulePool) -> Result<Architecture, SpaceError> {
    let sampler = Sampler::new(space.clone(), pool.clone())?;
    let mut rng = rng::seeded(seed);
    Ok(sampler.draw(&mut rng).1)
}
