//! Central-difference gradient check in f64.
//!
//! Parameters and inputs are promoted to f64 and the analytic gradient is
//! computed by the same generic reverse pass used for training. A probed
//! parameter whose perturbation flips the sign of any hidden
//! pre-activation sits on a ReLU kink, where the central difference is
//! meaningless; such draws are replaced by another parameter.

use rand::Rng as _;

use super::net::{self, Targets};
use super::{build_plan, check_inputs, check_targets, extract_subnet, Checkpoint, Selector, SupernetError};
use crate::rng;

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub params: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            params: 20,
            step: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub probes: Vec<Probe>,
    pub max_rel_error: f64,
    /// Draws rejected for sitting on a kink.
    pub rejected: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn loss_and_patterns(plan: &net::Plan, params: &[Vec<f64>], inputs: &[Vec<f64>], targets: &Targets) -> (f64, Vec<bool>) {
    let views: Vec<&[f64]> = params.iter().map(Vec::as_slice).collect();
    let mut total = 0.0;
    let mut pattern = Vec::new();
    for (i, x) in inputs.iter().enumerate() {
        let (out, cache) = net::forward(plan, &views, x);
        total += net::loss_head(&out, targets, i, inputs.len()).0;
        pattern.extend(cache.pattern(plan));
    }
    (total, pattern)
}

pub fn grad_check(
    ckpt: &Checkpoint,
    sel: &Selector,
    inputs: &[Vec<f32>],
    targets: &Targets,
    cfg: &GradCheck,
) -> Result<GradCheckReport, SupernetError> {
    let (config, plan) = build_plan(ckpt, sel)?;
    check_inputs(&config, inputs)?;
    check_targets(&config, inputs.len(), targets)?;
    let mut params: Vec<Vec<f64>> = ckpt
        .tensors()
        .iter()
        .map(|t| t.data.iter().map(|&v| f64::from(v)).collect())
        .collect();
    let xs: Vec<Vec<f64>> = inputs.iter().map(|x| x.iter().map(|&v| f64::from(v)).collect()).collect();
    let shapes: Vec<usize> = params.iter().map(Vec::len).collect();
    let views: Vec<&[f64]> = params.iter().map(Vec::as_slice).collect();
    let (_, grads) = net::loss_and_grads(&plan, &views, &xs, targets, &shapes);
    let (_, base) = loss_and_patterns(&plan, &params, &xs, targets);

    // active (tensor position, flat index) candidates
    let (_, slicing) = extract_subnet(ckpt, sel)?;
    let mut active = Vec::new();
    for (name, ranges) in &slicing.entries {
        let p = ckpt.position(name).expect("plan names exist");
        let shape = &ckpt.tensors()[p].shape;
        match ranges.as_slice() {
            [r, c] => active.extend(r.clone().flat_map(|i| c.clone().map(move |j| (p, i * shape[1] + j)))),
            [r] => active.extend(r.clone().map(|i| (p, i))),
            _ => unreachable!("toy tensors are rank 1 or 2"),
        }
    }

    let mut r = rng::derived(cfg.seed, "grad-check");
    let mut probes = Vec::with_capacity(cfg.params);
    let mut rejected = 0;
    let max_draws = cfg.params * 50;
    let mut draws = 0;
    while probes.len() < cfg.params && draws < max_draws {
        draws += 1;
        let (p, i) = active[r.random_range(0..active.len())];
        let orig = params[p][i];
        params[p][i] = orig + cfg.step;
        let (up, pu) = loss_and_patterns(&plan, &params, &xs, targets);
        params[p][i] = orig - cfg.step;
        let (down, pd) = loss_and_patterns(&plan, &params, &xs, targets);
        params[p][i] = orig;
        if pu != base || pd != base {
            rejected += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * cfg.step);
        let analytic = grads[p][i];
        probes.push(Probe {
            tensor: ckpt.tensors()[p].name.clone(),
            index: i,
            analytic,
            numeric,
            rel_error: rel_error(analytic, numeric),
        });
    }
    let max_rel_error = probes.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        probes,
        max_rel_error,
        rejected,
    })
}
