//! Weight-sharing training with anchor-based progressive shrinking.
//!
//! Each iteration samples one subnet from the current phase's space via
//! the rule pool and takes a plain SGD step on the shared tensors. Warmup
//! epochs ramp the learning rate linearly over their iterations. Batch
//! order and subnet sampling use separate seeded streams, so a degenerate
//! one-subnet schedule sees exactly the batches of [`train_plain`].

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use super::net::Targets;
use super::{full_selector, loss, loss_and_grads, Checkpoint, Selector, SupernetError};
use crate::archspace::{Architecture, Grid, Phase, RulePool, Sampler, Schedule, SubSpace};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f32>>,
    pub targets: Targets,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> (Vec<Vec<f32>>, Targets) {
        let inputs = idx.iter().map(|&i| self.inputs[i].clone()).collect();
        let targets = match &self.targets {
            Targets::Classes(c) => Targets::Classes(idx.iter().map(|&i| c[i]).collect()),
            Targets::Values(v) => Targets::Values(idx.iter().map(|&i| v[i].clone()).collect()),
        };
        (inputs, targets)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherTask {
    pub train: Dataset,
    pub val: Dataset,
}

/// Regression targets from a fixed random `tanh` teacher with 16 hidden
/// units; inputs are standard normal.
pub fn teacher_task(input_dim: usize, outputs: usize, n_train: usize, n_val: usize, seed: u64) -> TeacherTask {
    const HIDDEN: usize = 16;
    let mut r = rng::derived(seed, "teacher");
    let normal = |r: &mut Rng| -> f64 { StandardNormal.sample(r) };
    let w1: Vec<f64> = (0..HIDDEN * input_dim).map(|_| normal(&mut r) / (input_dim as f64).sqrt()).collect();
    let w2: Vec<f64> = (0..outputs * HIDDEN).map(|_| normal(&mut r) / (HIDDEN as f64).sqrt()).collect();
    let sample = |n: usize, r: &mut Rng| -> Dataset {
        let mut inputs = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..input_dim).map(|_| normal(r)).collect();
            let h: Vec<f64> = (0..HIDDEN)
                .map(|i| (0..input_dim).map(|j| w1[i * input_dim + j] * x[j]).sum::<f64>().tanh())
                .collect();
            let y: Vec<f32> = (0..outputs)
                .map(|k| (0..HIDDEN).map(|i| w2[k * HIDDEN + i] * h[i]).sum::<f64>() as f32)
                .collect();
            inputs.push(x.into_iter().map(|v| v as f32).collect());
            targets.push(y);
        }
        Dataset {
            inputs,
            targets: Targets::Values(targets),
        }
    };
    let train = sample(n_train, &mut r);
    let val = sample(n_val, &mut r);
    TeacherTask { train, val }
}

/// Three nested toy spaces shrinking in anchor depth (8, 6, 4 blocks),
/// sharing width grids 4..16. The input dimension stands in for the scale.
pub fn toy_spaces(input_dim: u32) -> [SubSpace; 3] {
    let widths = [Grid::new(4, 16, 4); 5];
    let scale = Grid::fixed(input_dim);
    let space = |name: &str, depth: [Grid; 4], anchor: [u32; 4]| SubSpace {
        name: name.into(),
        depth,
        width: widths,
        scale,
        anchor: Architecture::new(anchor, [12; 5], input_dim),
    };
    [
        space("toy-large", [Grid::new(1, 3, 1); 4], [2, 2, 2, 2]),
        space("toy-medium", [Grid::new(1, 3, 1), Grid::new(1, 2, 1), Grid::new(1, 3, 1), Grid::new(1, 2, 1)], [2, 1, 2, 1]),
        space("toy-small", [Grid::new(1, 2, 1); 4], [1, 1, 1, 1]),
    ]
}

pub fn toy_schedule(spaces: [SubSpace; 3], epochs: [u32; 3]) -> Result<Schedule<SubSpace>, SupernetError> {
    Ok(Schedule::progressive(spaces.into_iter().zip(epochs).collect())?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    /// Adam that only touches entries with a non-zero gradient, so
    /// parameters outside the sampled subnet keep their values and moments.
    LazyAdam { beta1: f32, beta2: f32, eps: f32 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::LazyAdam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr: f32,
    pub batch: usize,
    pub seed: u64,
    pub pool: RulePool,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            batch: 16,
            seed: 0,
            pool: RulePool::standard(),
            optimizer: Optimizer::adam(),
        }
    }
}

/// One row per (epoch, rule): iterations drawn with that rule and their
/// mean training loss. Rule `val-anchor` rows carry the phase anchor's
/// validation loss at the end of the epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub epoch: u32,
    pub phase: usize,
    pub rule: String,
    pub loss: f32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
    /// Per-iteration training loss, in order.
    pub losses: Vec<f32>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,phase,rule,loss,count\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.epoch, r.phase, r.rule, r.loss, r.count));
        }
        s
    }

    /// Total draws per rule label over the run, excluding validation rows.
    pub fn rule_counts(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for r in self.rows.iter().filter(|r| r.rule != "val-anchor") {
            match out.iter_mut().find(|(l, _)| *l == r.rule) {
                Some(e) => e.1 += r.count,
                None => out.push((r.rule.clone(), r.count)),
            }
        }
        out
    }
}

/// Per-entry optimizer state; `steps` counts the updates each entry has
/// received, for Adam's bias correction.
struct OptState {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    steps: Vec<Vec<u32>>,
}

impl OptState {
    fn new(ckpt: &Checkpoint) -> Self {
        let shape = |t: &super::Tensor| t.data.len();
        Self {
            m: ckpt.tensors().iter().map(|t| vec![0.0; shape(t)]).collect(),
            v: ckpt.tensors().iter().map(|t| vec![0.0; shape(t)]).collect(),
            steps: ckpt.tensors().iter().map(|t| vec![0; shape(t)]).collect(),
        }
    }

    fn step(&mut self, opt: Optimizer, params: &mut Checkpoint, grads: &Checkpoint, lr: f32) {
        for (ti, (p, g)) in params.tensors_mut().iter_mut().zip(grads.tensors()).enumerate() {
            for (i, (a, &d)) in p.data.iter_mut().zip(&g.data).enumerate() {
                match opt {
                    Optimizer::Sgd => *a -= lr * d,
                    Optimizer::LazyAdam { beta1, beta2, eps } => {
                        if d == 0.0 {
                            continue;
                        }
                        let m = &mut self.m[ti][i];
                        let v = &mut self.v[ti][i];
                        let t = &mut self.steps[ti][i];
                        *t += 1;
                        *m = beta1 * *m + (1.0 - beta1) * d;
                        *v = beta2 * *v + (1.0 - beta2) * d * d;
                        let mh = *m / (1.0 - beta1.powi(*t as i32));
                        let vh = *v / (1.0 - beta2.powi(*t as i32));
                        *a -= lr * mh / (vh.sqrt() + eps);
                    }
                }
            }
        }
    }
}

struct EpochPlan<'a> {
    phase: usize,
    warmup: bool,
    anchor: Option<Selector>,
    pick: &'a mut dyn FnMut() -> (String, Selector),
}

#[allow(clippy::too_many_arguments)]
fn run_epoch(
    ckpt: &mut Checkpoint,
    state: &mut OptState,
    epoch: u32,
    plan: EpochPlan<'_>,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<(), SupernetError> {
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut rng::derived(cfg.seed, &format!("order|{epoch}")));
    let iters = train.len().div_ceil(cfg.batch);
    let mut per_rule: Vec<(String, f32, usize)> = Vec::new();
    for (it, chunk) in order.chunks(cfg.batch).enumerate() {
        let (rule, sel) = (plan.pick)();
        let lr = if plan.warmup {
            cfg.lr * (it + 1) as f32 / iters as f32
        } else {
            cfg.lr
        };
        let (xs, ts) = train.subset(chunk);
        let (l, g) = loss_and_grads(ckpt, &sel, &xs, &ts)?;
        state.step(cfg.optimizer, ckpt, &g, lr);
        log.losses.push(l);
        match per_rule.iter_mut().find(|(r, _, _)| *r == rule) {
            Some(e) => {
                e.1 += l;
                e.2 += 1;
            }
            None => per_rule.push((rule, l, 1)),
        }
    }
    for (rule, sum, count) in per_rule {
        log.rows.push(LogRow {
            epoch,
            phase: plan.phase,
            rule,
            loss: sum / count as f32,
            count,
        });
    }
    if let (Some(v), Some(anchor)) = (val, plan.anchor) {
        log.rows.push(LogRow {
            epoch,
            phase: plan.phase,
            rule: "val-anchor".into(),
            loss: loss(ckpt, &anchor, &v.inputs, &v.targets)?,
            count: v.len(),
        });
    }
    Ok(())
}

fn check_data(train: &Dataset, cfg: &TrainConfig) -> Result<(), SupernetError> {
    if train.is_empty() || cfg.batch == 0 {
        return Err(SupernetError::BadLabels("empty training set or zero batch".into()));
    }
    Ok(())
}

/// Trains shared weights through every phase of `schedule`.
pub fn train_abps(
    ckpt: &Checkpoint,
    schedule: &Schedule<SubSpace>,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(Checkpoint, TrainLog), SupernetError> {
    check_data(train, cfg)?;
    let config = super::ToyConfig::infer(ckpt)?;
    let mut samplers = Vec::new();
    for p in schedule.phases() {
        for a in [p.space.anchor, Architecture::new(p.space.depth.map(|g| g.max), p.space.width.map(|g| g.max), p.space.anchor.scale)] {
            config.check(&Selector::from(&a))?;
        }
        samplers.push(Sampler::new(p.space.clone(), cfg.pool.clone())?);
    }
    let labels: Vec<String> = cfg.pool.entries().iter().map(|(r, _)| r.label()).collect();
    let mut subnet_rng = rng::derived(cfg.seed, "subnets");
    let mut out = ckpt.clone();
    let mut state = OptState::new(ckpt);
    let mut log = TrainLog::default();
    let mut epoch = 0;
    for (pi, Phase { space, epochs, warmup }) in schedule.phases().iter().enumerate() {
        for e in 0..*epochs {
            let sampler = &samplers[pi];
            let rng = &mut subnet_rng;
            let mut pick = || {
                let (idx, arch) = sampler.draw(rng);
                (labels[idx].clone(), Selector::from(&arch))
            };
            let plan = EpochPlan {
                phase: pi,
                warmup: e < *warmup,
                anchor: Some(Selector::from(&space.anchor)),
                pick: &mut pick,
            };
            run_epoch(&mut out, &mut state, epoch, plan, train, val, cfg, &mut log)?;
            epoch += 1;
        }
    }
    Ok((out, log))
}

/// Trains one fixed subnet (the full checkpoint) without sampling.
pub fn train_plain(
    ckpt: &Checkpoint,
    epochs: u32,
    warmup: u32,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(Checkpoint, TrainLog), SupernetError> {
    check_data(train, cfg)?;
    let sel = full_selector(ckpt)?;
    let mut out = ckpt.clone();
    let mut state = OptState::new(ckpt);
    let mut log = TrainLog::default();
    for e in 0..epochs {
        let mut pick = || ("fixed".to_string(), sel);
        let plan = EpochPlan {
            phase: 0,
            warmup: e < warmup,
            anchor: Some(sel),
            pick: &mut pick,
        };
        run_epoch(&mut out, &mut state, e, plan, train, val, cfg, &mut log)?;
    }
    Ok((out, log))
}
