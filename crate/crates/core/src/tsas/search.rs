use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::{self, Write};

use rand::Rng as _;

use super::{Constraint, GroupKey, SearchError};
use crate::archspace::{Architecture, SubSpace, STAGES};
use crate::costmodel::{detector_flops, HeadConfig};
use crate::evaluator::{evaluate_batch, EvalRequest, Evaluator, Fidelity};
use crate::rng::{self, Rng};

#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Samples per group in step 1.
    pub k: usize,
    /// Fraction of group winners promoted to step 2.
    pub keep: f64,
    /// Rejection-sampling draws per group before giving up.
    pub attempt_cap: usize,
    /// Members probed per group when checking feasibility.
    pub probe_budget: u64,
    pub seed: u64,
    pub jobs: usize,
    pub task: String,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            k: 5,
            keep: 0.5,
            attempt_cap: 1000,
            probe_budget: 512,
            seed: 0,
            jobs: 1,
            task: "default".into(),
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<(), SearchError> {
        if self.k == 0 {
            return Err(SearchError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.keep > 0.0 && self.keep <= 1.0) {
            return Err(SearchError::InvalidConfig(format!("keep {} outside (0, 1]", self.keep)));
        }
        if self.attempt_cap == 0 || self.probe_budget == 0 {
            return Err(SearchError::InvalidConfig("attempt cap and probe budget must be positive".into()));
        }
        Ok(())
    }

    /// `ceil(keep · groups)`, at least 1. The epsilon keeps products such as
    /// 0.3 · 10 from rounding up to 4.
    pub fn shortlist_len(&self, groups: usize) -> usize {
        ((self.keep * groups as f64 - 1e-9).ceil() as usize).clamp(1, groups.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupTrace {
    pub key: GroupKey,
    pub samples: Vec<(Architecture, f64)>,
    /// Index into `samples`.
    pub winner: usize,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortlistEntry {
    pub key: GroupKey,
    pub arch: Architecture,
    pub direct: f64,
    pub fast: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub groups: Vec<GroupTrace>,
    /// Feasible groups where no satisfying member was found within the cap.
    pub dropped: Vec<GroupKey>,
    pub shortlist: Vec<ShortlistEntry>,
    pub winner: Architecture,
    pub direct_evals: usize,
    pub fast_evals: usize,
    /// Sum of reported evaluation seconds.
    pub cost_s: f64,
}

impl SearchTrace {
    /// Line records: `kind<TAB>group<TAB>arch<TAB>fidelity<TAB>metric`.
    pub fn write_lines<W: Write>(&self, mut w: W) -> io::Result<()> {
        for g in &self.groups {
            for (arch, m) in &g.samples {
                writeln!(w, "sample\t{}\t{}\tdirect\t{}", g.key, arch.key(), m)?;
            }
        }
        for key in &self.dropped {
            writeln!(w, "dropped\t{key}\t-\t-\t-")?;
        }
        for e in &self.shortlist {
            writeln!(w, "shortlist\t{}\t{}\tfast\t{}", e.key, e.arch.key(), e.fast)?;
        }
        let win = self
            .shortlist
            .iter()
            .find(|e| e.arch == self.winner)
            .expect("winner is on the shortlist");
        writeln!(w, "winner\t{}\t{}\tfast\t{}", win.key, win.arch.key(), win.fast)?;
        writeln!(
            w,
            "budget\t-\t-\tdirect={},fast={}\t{}",
            self.direct_evals, self.fast_evals, self.cost_s
        )
    }
}

/// Members of one group: depth combos summing to the group total crossed
/// with every width choice, at one scale.
struct Group<'a> {
    key: GroupKey,
    space: &'a SubSpace,
    combos: Vec<[u32; STAGES]>,
    width_count: u64,
}

impl<'a> Group<'a> {
    fn new(key: GroupKey, space: &'a SubSpace, combos: Vec<[u32; STAGES]>) -> Self {
        let width_count = space.width.iter().map(|g| u64::from(g.len())).product();
        Self {
            key,
            space,
            combos,
            width_count,
        }
    }

    fn len(&self) -> u64 {
        self.combos.len() as u64 * self.width_count
    }

    fn member(&self, index: u64) -> Architecture {
        let depths = self.combos[(index / self.width_count) as usize];
        let mut rest = index % self.width_count;
        let mut widths = [0u32; 5];
        for (slot, g) in self.space.width.iter().enumerate().rev() {
            let n = u64::from(g.len());
            widths[slot] = g.value((rest % n) as u32);
            rest /= n;
        }
        Architecture::new(depths, widths, self.key.scale)
    }

    fn draw(&self, rng: &mut Rng) -> Architecture {
        self.member(rng.random_range(0..self.len()))
    }
}

fn groups_of<'a>(spaces: &'a [SubSpace], constraint: &Constraint) -> Vec<Group<'a>> {
    let mut out = Vec::new();
    for (si, space) in spaces.iter().enumerate() {
        let combos = space.depth_combos();
        let totals = space.achievable_totals();
        for scale in space.scale.values() {
            if !constraint.admits_scale(scale) {
                continue;
            }
            for &total in &totals {
                let members: Vec<_> = combos.iter().copied().filter(|c| c.iter().sum::<u32>() == total).collect();
                let key = GroupKey {
                    space: si,
                    scale,
                    total_depth: total,
                };
                out.push(Group::new(key, space, members));
            }
        }
    }
    out
}

fn feasible<'a>(
    spaces: &'a [SubSpace],
    constraint: &Constraint,
    probe_budget: u64,
    seed: u64,
) -> Result<Vec<Group<'a>>, SearchError> {
    if probe_budget == 0 {
        return Err(SearchError::InvalidConfig("probe budget must be positive".into()));
    }
    for s in spaces {
        s.validate()?;
    }
    let out: Vec<_> = groups_of(spaces, constraint)
        .into_iter()
        .filter(|g| {
            if g.len() <= probe_budget {
                (0..g.len()).any(|i| constraint.satisfies(&g.member(i)))
            } else {
                let mut r = rng::derived(seed, &format!("probe|{}", g.key));
                (0..probe_budget).any(|_| constraint.satisfies(&g.draw(&mut r)))
            }
        })
        .collect();
    if out.is_empty() {
        return Err(SearchError::NoFeasibleGroup);
    }
    Ok(out)
}

/// Groups with at least one probed member satisfying `constraint`, in key
/// order. Groups no larger than `probe_budget` are checked exhaustively.
pub fn feasible_groups(
    spaces: &[SubSpace],
    constraint: &Constraint,
    probe_budget: u64,
    seed: u64,
) -> Result<Vec<GroupKey>, SearchError> {
    Ok(feasible(spaces, constraint, probe_budget, seed)?
        .iter()
        .map(|g| g.key)
        .collect())
}

/// Higher metric first, then lower FLOPs, then the lexicographically
/// smaller architecture.
fn rank(a: (f64, &Architecture), b: (f64, &Architecture), head: &HeadConfig) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| {
            let fa = detector_flops(a.1, head).total;
            let fb = detector_flops(b.1, head).total;
            fa.total_cmp(&fb)
        })
        .then_with(|| a.1.cmp(b.1))
}

/// Two-step search over the (scale, total depth) groups of every subspace.
///
/// Step 1 draws up to `k` distinct constraint-satisfying members per group,
/// scores them at [`Fidelity::Direct`] and keeps each group's best. Step 2
/// pools the group winners across subspaces, promotes the best
/// `ceil(keep · G)` by direct metric and returns the best by
/// [`Fidelity::FastFinetune`].
pub fn two_step_search<E: Evaluator + ?Sized>(
    spaces: &[SubSpace],
    constraint: &Constraint,
    evaluator: &E,
    cfg: &SearchConfig,
) -> Result<(Architecture, SearchTrace), SearchError> {
    cfg.validate()?;
    let groups = feasible(spaces, constraint, cfg.probe_budget, cfg.seed)?;
    let head = &constraint.head;

    let mut drawn: Vec<(GroupKey, Vec<Architecture>, usize)> = Vec::new();
    let mut dropped = Vec::new();
    for g in &groups {
        let mut r = rng::derived(cfg.seed, &format!("step1|{}", g.key));
        let mut seen = HashSet::new();
        let mut picked = Vec::new();
        let mut attempts = 0;
        while picked.len() < cfg.k && attempts < cfg.attempt_cap && (seen.len() as u64) < g.len() {
            attempts += 1;
            let a = g.draw(&mut r);
            if seen.insert(a) && constraint.satisfies(&a) {
                picked.push(a);
            }
        }
        if picked.is_empty() {
            log::warn!("SamplingExhausted: group {} dropped after {attempts} attempts", g.key);
            dropped.push(g.key);
        } else {
            if picked.len() < cfg.k {
                log::warn!("group {} contributes {} of {} samples", g.key, picked.len(), cfg.k);
            }
            drawn.push((g.key, picked, attempts));
        }
    }
    if drawn.is_empty() {
        return Err(SearchError::SamplingExhausted);
    }

    let requests: Vec<EvalRequest> = drawn
        .iter()
        .enumerate()
        .flat_map(|(gi, (_, archs, _))| {
            archs
                .iter()
                .enumerate()
                .map(move |(j, a)| EvalRequest::new(format!("d{gi}.{j}"), *a, Fidelity::Direct, cfg.task.clone()))
        })
        .collect();
    let direct = evaluate_batch(evaluator, &requests, cfg.jobs)?;
    let mut cost_s: f64 = direct.iter().map(|r| r.cost_s).sum();

    let mut results = direct.into_iter();
    let mut traces = Vec::with_capacity(drawn.len());
    for (key, archs, attempts) in drawn {
        let samples: Vec<(Architecture, f64)> = archs
            .into_iter()
            .map(|a| (a, results.next().expect("one result per request").metric))
            .collect();
        let winner = (0..samples.len())
            .min_by(|&i, &j| rank((samples[i].1, &samples[i].0), (samples[j].1, &samples[j].0), head))
            .expect("non-empty group");
        traces.push(GroupTrace {
            key,
            samples,
            winner,
            attempts,
        });
    }

    let mut order: Vec<&GroupTrace> = traces.iter().collect();
    order.sort_by(|a, b| {
        let (wa, wb) = (&a.samples[a.winner], &b.samples[b.winner]);
        rank((wa.1, &wa.0), (wb.1, &wb.0), head)
    });
    order.truncate(cfg.shortlist_len(traces.len()));

    let fast_reqs: Vec<EvalRequest> = order
        .iter()
        .enumerate()
        .map(|(i, g)| EvalRequest::new(format!("f{i}"), g.samples[g.winner].0, Fidelity::FastFinetune, cfg.task.clone()))
        .collect();
    let fast = evaluate_batch(evaluator, &fast_reqs, cfg.jobs)?;
    cost_s += fast.iter().map(|r| r.cost_s).sum::<f64>();

    let shortlist: Vec<ShortlistEntry> = order
        .iter()
        .zip(&fast)
        .map(|(g, f)| ShortlistEntry {
            key: g.key,
            arch: g.samples[g.winner].0,
            direct: g.samples[g.winner].1,
            fast: f.metric,
        })
        .collect();
    let winner = shortlist
        .iter()
        .min_by(|a, b| rank((a.fast, &a.arch), (b.fast, &b.arch), head))
        .expect("shortlist is non-empty")
        .arch;

    let trace = SearchTrace {
        direct_evals: requests.len(),
        fast_evals: fast_reqs.len(),
        groups: traces,
        dropped,
        shortlist,
        winner,
        cost_s,
    };
    Ok((winner, trace))
}
