//! A fully-connected, stage-structured toy supernet that exercises weight
//! sharing without an ML framework.
//!
//! Topology for active selector `(d, w)`:
//!
//! ```text
//! h  = relu(stem · x)                       width w[0]
//! h  = relu(stage{s}.transition · h)        width w[s+1]
//! h  = h + relu(stage{s}.block{j} · h)      j < d[s]
//! y  = head · h
//! ```
//!
//! Each linear map keeps the leading rows and columns of its stored
//! matrix, so any selector within the maxima runs on the same tensors.
//! Selectors mirror [`Architecture`] without the input scale: `widths[0]`
//! is the stem and `widths[s + 1]` stage `s`.

mod checkpoint;
mod gradcheck;
mod net;
mod train;

use std::ops::Range;

use rand::Rng as _;
use thiserror::Error;

use crate::archspace::{Architecture, ScheduleError, SpaceError, STAGES, WIDTH_SLOTS};
use crate::labelspace::HeadSurgeryPlan;
use crate::rng;

pub use checkpoint::{Checkpoint, Tensor, MAGIC, VERSION};
pub use gradcheck::{grad_check, rel_error, GradCheck, GradCheckReport, Probe};
pub use net::Targets;
pub use train::{
    teacher_task, toy_schedule, toy_spaces, train_abps, train_plain, Dataset, LogRow, Optimizer, TeacherTask, TrainConfig,
    TrainLog,
};

#[derive(Debug, Error)]
pub enum SupernetError {
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("MissingTensor: {0}")]
    MissingTensor(String),
    #[error("BadCheckpoint: {0}")]
    BadCheckpoint(String),
    #[error("IndexOutOfRange: row {index} of a {rows}-row head")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("InvalidSelector: {0}")]
    InvalidSelector(String),
    #[error("BadLabels: {0}")]
    BadLabels(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Selector {
    pub depths: [usize; STAGES],
    pub widths: [usize; WIDTH_SLOTS],
}

impl From<&Architecture> for Selector {
    fn from(a: &Architecture) -> Self {
        Self {
            depths: a.depths.map(|d| d as usize),
            widths: a.widths.map(|w| w as usize),
        }
    }
}

/// Maxima of the supernet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyConfig {
    pub input_dim: usize,
    pub outputs: usize,
    pub max: Selector,
}

impl ToyConfig {
    pub fn new(input_dim: usize, outputs: usize, max_depths: [usize; STAGES], max_widths: [usize; WIDTH_SLOTS]) -> Self {
        Self {
            input_dim,
            outputs,
            max: Selector {
                depths: max_depths,
                widths: max_widths,
            },
        }
    }

    /// Maxima covering every member of `space`.
    pub fn covering(space: &crate::archspace::SubSpace, input_dim: usize, outputs: usize) -> Self {
        Self::new(
            input_dim,
            outputs,
            space.depth.map(|g| g.max as usize),
            space.width.map(|g| g.max as usize),
        )
    }

    pub fn validate(&self) -> Result<(), SupernetError> {
        if self.input_dim == 0 || self.outputs == 0 {
            return Err(SupernetError::InvalidSelector("input and output sizes must be positive".into()));
        }
        if self.max.depths.contains(&0) || self.max.widths.contains(&0) {
            return Err(SupernetError::InvalidSelector("maxima must be at least 1".into()));
        }
        Ok(())
    }

    pub fn check(&self, sel: &Selector) -> Result<(), SupernetError> {
        let ok = sel.depths.iter().zip(self.max.depths).all(|(&d, m)| (1..=m).contains(&d))
            && sel.widths.iter().zip(self.max.widths).all(|(&w, m)| (1..=m).contains(&w));
        if ok {
            Ok(())
        } else {
            Err(SupernetError::InvalidSelector(format!("{sel:?} outside maxima {:?}", self.max)))
        }
    }

    /// `(name, shape)` of every tensor, weights before their bias.
    pub fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        let w = self.max.widths;
        let mut out = vec![
            ("stem.weight".to_string(), vec![w[0], self.input_dim]),
            ("stem.bias".to_string(), vec![w[0]]),
        ];
        for s in 0..STAGES {
            out.push((format!("stage{s}.transition.weight"), vec![w[s + 1], w[s]]));
            out.push((format!("stage{s}.transition.bias"), vec![w[s + 1]]));
            for j in 0..self.max.depths[s] {
                out.push((format!("stage{s}.block{j}.weight"), vec![w[s + 1], w[s + 1]]));
                out.push((format!("stage{s}.block{j}.bias"), vec![w[s + 1]]));
            }
        }
        out.push(("head.weight".to_string(), vec![self.outputs, w[STAGES]]));
        out.push(("head.bias".to_string(), vec![self.outputs]));
        out
    }

    /// Reads the maxima back from tensor shapes.
    pub fn infer(ckpt: &Checkpoint) -> Result<Self, SupernetError> {
        let shape2 = |name: &str| -> Result<(usize, usize), SupernetError> {
            let t = ckpt.require(name)?;
            match t.shape[..] {
                [r, c] => Ok((r, c)),
                _ => Err(SupernetError::ShapeMismatch(format!("{name} has shape {:?}", t.shape))),
            }
        };
        let (w0, input_dim) = shape2("stem.weight")?;
        let mut widths = [w0; WIDTH_SLOTS];
        let mut depths = [0; STAGES];
        for s in 0..STAGES {
            widths[s + 1] = shape2(&format!("stage{s}.transition.weight"))?.0;
            while ckpt.get(&format!("stage{s}.block{}.weight", depths[s])).is_some() {
                depths[s] += 1;
            }
        }
        let outputs = shape2("head.weight")?.0;
        let config = Self::new(input_dim, outputs, depths, widths);
        config.validate()?;
        let specs = config.tensor_specs();
        if specs.len() != ckpt.len() {
            return Err(SupernetError::BadCheckpoint(format!(
                "{} tensors, topology needs {}",
                ckpt.len(),
                specs.len()
            )));
        }
        for (name, shape) in &specs {
            let t = ckpt.require(name)?;
            if &t.shape != shape {
                return Err(SupernetError::ShapeMismatch(format!(
                    "{name}: expected {shape:?}, found {:?}",
                    t.shape
                )));
            }
        }
        Ok(config)
    }
}

/// Uniform in `±1/sqrt(fan_in)` for weights and biases alike, drawn tensor
/// by tensor in spec order from one seeded stream.
pub fn init_supernet(config: &ToyConfig, seed: u64) -> Result<Checkpoint, SupernetError> {
    config.validate()?;
    let mut r = rng::derived(seed, "supernet-init");
    let specs = config.tensor_specs();
    let mut tensors = Vec::with_capacity(specs.len());
    let mut fan_in = 1;
    for (name, shape) in specs {
        if shape.len() == 2 {
            fan_in = shape[1];
        }
        let bound = 1.0 / (fan_in as f32).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| r.random_range(-bound..=bound)).collect();
        tensors.push(Tensor::new(name, shape, data)?);
    }
    Checkpoint::new(tensors)
}

fn build_plan(ckpt: &Checkpoint, sel: &Selector) -> Result<(ToyConfig, net::Plan), SupernetError> {
    let config = ToyConfig::infer(ckpt)?;
    config.check(sel)?;
    let pos = |n: String| ckpt.position(&n).expect("inferred topology has every tensor");
    let stride = |n: &str| ckpt.get(n).expect("present").shape[1];
    let mut layers = Vec::new();
    let mut layer = |name: String, rows, cols, kind| {
        layers.push(net::Layer {
            weight: pos(format!("{name}.weight")),
            bias: pos(format!("{name}.bias")),
            stride: stride(&format!("{name}.weight")),
            rows,
            cols,
            kind,
        });
    };
    let w = sel.widths;
    layer("stem".into(), w[0], config.input_dim, net::Kind::Relu);
    for s in 0..STAGES {
        layer(format!("stage{s}.transition"), w[s + 1], w[s], net::Kind::Relu);
        for j in 0..sel.depths[s] {
            layer(format!("stage{s}.block{j}"), w[s + 1], w[s + 1], net::Kind::Residual);
        }
    }
    layer("head".into(), config.outputs, w[STAGES], net::Kind::Linear);
    Ok((
        config,
        net::Plan {
            layers,
            input: config.input_dim,
        },
    ))
}

fn check_inputs(config: &ToyConfig, inputs: &[Vec<f32>]) -> Result<(), SupernetError> {
    match inputs.iter().position(|x| x.len() != config.input_dim) {
        Some(i) => Err(SupernetError::ShapeMismatch(format!(
            "input {i} has {} values, expected {}",
            inputs[i].len(),
            config.input_dim
        ))),
        None => Ok(()),
    }
}

fn views(ckpt: &Checkpoint) -> Vec<&[f32]> {
    ckpt.tensors().iter().map(|t| t.data.as_slice()).collect()
}

/// Outputs of the subnet `sel` for each input row.
pub fn forward(ckpt: &Checkpoint, sel: &Selector, inputs: &[Vec<f32>]) -> Result<Vec<Vec<f32>>, SupernetError> {
    let (config, plan) = build_plan(ckpt, sel)?;
    check_inputs(&config, inputs)?;
    let params = views(ckpt);
    Ok(inputs.iter().map(|x| net::forward(&plan, &params, x).0).collect())
}

/// Selector spanning every parameter of `ckpt`.
pub fn full_selector(ckpt: &Checkpoint) -> Result<Selector, SupernetError> {
    Ok(ToyConfig::infer(ckpt)?.max)
}

fn check_targets(config: &ToyConfig, n: usize, targets: &Targets) -> Result<(), SupernetError> {
    if targets.len() != n {
        return Err(SupernetError::BadLabels(format!("{} targets for {n} inputs", targets.len())));
    }
    match targets {
        Targets::Classes(c) => {
            if let Some(&bad) = c.iter().find(|&&y| y >= config.outputs) {
                return Err(SupernetError::BadLabels(format!("class {bad} of {}", config.outputs)));
            }
        }
        Targets::Values(v) => {
            if v.iter().any(|t| t.len() != config.outputs) {
                return Err(SupernetError::BadLabels(format!("targets must have {} values", config.outputs)));
            }
        }
    }
    Ok(())
}

/// Mean loss and full-shape gradients; entries outside the active slices
/// are exactly zero.
pub fn loss_and_grads(
    ckpt: &Checkpoint,
    sel: &Selector,
    inputs: &[Vec<f32>],
    targets: &Targets,
) -> Result<(f32, Checkpoint), SupernetError> {
    let (config, plan) = build_plan(ckpt, sel)?;
    check_inputs(&config, inputs)?;
    check_targets(&config, inputs.len(), targets)?;
    let shapes: Vec<usize> = ckpt.tensors().iter().map(|t| t.data.len()).collect();
    let (loss, grads) = net::loss_and_grads(&plan, &views(ckpt), inputs, targets, &shapes);
    let tensors = ckpt
        .tensors()
        .iter()
        .zip(grads)
        .map(|(t, g)| Tensor {
            name: t.name.clone(),
            shape: t.shape.clone(),
            data: g,
        })
        .collect();
    Ok((loss, Checkpoint::new(tensors)?))
}

/// Mean loss without gradients.
pub fn loss(ckpt: &Checkpoint, sel: &Selector, inputs: &[Vec<f32>], targets: &Targets) -> Result<f32, SupernetError> {
    let (config, plan) = build_plan(ckpt, sel)?;
    check_inputs(&config, inputs)?;
    check_targets(&config, inputs.len(), targets)?;
    let params = views(ckpt);
    let mut total = 0.0f32;
    for (i, x) in inputs.iter().enumerate() {
        let (out, _) = net::forward(&plan, &params, x);
        total += net::loss_head(&out, targets, i, inputs.len()).0;
    }
    Ok(total)
}

/// Kept index ranges per dimension of every tensor the subnet uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlicingPlan {
    pub entries: Vec<(String, Vec<Range<usize>>)>,
}

/// Copies the leading slices used by `sel` into a standalone checkpoint
/// whose maxima equal `sel`.
pub fn extract_subnet(ckpt: &Checkpoint, sel: &Selector) -> Result<(Checkpoint, SlicingPlan), SupernetError> {
    let config = ToyConfig::infer(ckpt)?;
    config.check(sel)?;
    let sub = ToyConfig {
        max: *sel,
        ..config
    };
    let mut tensors = Vec::new();
    let mut entries = Vec::new();
    for (name, shape) in sub.tensor_specs() {
        let src = ckpt.require(&name)?;
        let data = match shape[..] {
            [rows, cols] => {
                let stride = src.shape[1];
                (0..rows).flat_map(|i| src.data[i * stride..i * stride + cols].iter().copied()).collect()
            }
            [n] => src.data[..n].to_vec(),
            _ => unreachable!("toy tensors are rank 1 or 2"),
        };
        entries.push((name.clone(), shape.iter().map(|&d| 0..d).collect()));
        tensors.push(Tensor::new(name, shape, data)?);
    }
    Ok((Checkpoint::new(tensors)?, SlicingPlan { entries }))
}

/// Rebuilds the head with one row per entry of `rows`, copying the weight
/// row and bias of the referenced unified index.
pub fn head_surgery_rows(ckpt: &Checkpoint, rows: &[usize]) -> Result<Checkpoint, SupernetError> {
    let w = ckpt.require("head.weight")?;
    let b = ckpt.require("head.bias")?;
    let (n, cols) = (w.shape[0], w.shape[1]);
    if let Some(&index) = rows.iter().find(|&&r| r >= n) {
        return Err(SupernetError::IndexOutOfRange { index, rows: n });
    }
    if rows.is_empty() {
        return Err(SupernetError::ShapeMismatch("surgery plan has no rows".into()));
    }
    let weight: Vec<f32> = rows.iter().flat_map(|&r| w.data[r * cols..(r + 1) * cols].iter().copied()).collect();
    let bias: Vec<f32> = rows.iter().map(|&r| b.data[r]).collect();
    let mut out = ckpt.clone();
    *out.get_mut("head.weight").expect("checked above") = Tensor::new("head.weight", vec![rows.len(), cols], weight)?;
    *out.get_mut("head.bias").expect("checked above") = Tensor::new("head.bias", vec![rows.len()], bias)?;
    Ok(out)
}

/// [`head_surgery_rows`] driven by a label-space surgery plan. Exact and
/// nearest entries both copy their row.
pub fn head_surgery(ckpt: &Checkpoint, plan: &HeadSurgeryPlan) -> Result<Checkpoint, SupernetError> {
    head_surgery_rows(ckpt, &plan.rows())
}
