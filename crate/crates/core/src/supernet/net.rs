//! Restricted forward and reverse passes, generic over the float type so
//! the gradient check can run in f64 while training runs in f32.
//!
//! Every dot product accumulates from zero in ascending input index and
//! adds the bias last. A restricted supernet and its extracted subnet
//! therefore perform the same operations in the same order.

use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    /// `relu(W x + b)`
    Relu,
    /// `x + relu(W x + b)`
    Residual,
    /// `W x + b`
    Linear,
}

#[derive(Debug, Clone)]
pub(crate) struct Layer {
    pub weight: usize,
    pub bias: usize,
    /// Row stride of the stored weight (its full column count).
    pub stride: usize,
    pub rows: usize,
    pub cols: usize,
    pub kind: Kind,
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub layers: Vec<Layer>,
    pub input: usize,
}

pub(crate) struct Cache<T> {
    inputs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
}

impl<T> Cache<T> {
    /// Signs of every hidden pre-activation, for kink detection.
    pub fn pattern(&self, plan: &Plan) -> Vec<bool>
    where
        T: Float,
    {
        plan.layers
            .iter()
            .zip(&self.pre)
            .filter(|(l, _)| l.kind != Kind::Linear)
            .flat_map(|(_, z)| z.iter().map(|v| *v > T::zero()))
            .collect()
    }
}

fn affine<T: Float>(l: &Layer, w: &[T], b: &[T], x: &[T]) -> Vec<T> {
    (0..l.rows)
        .map(|i| {
            let row = &w[i * l.stride..i * l.stride + l.cols];
            let mut acc = T::zero();
            for (wij, xj) in row.iter().zip(x) {
                acc = acc + *wij * *xj;
            }
            acc + b[i]
        })
        .collect()
}

fn relu<T: Float>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

pub(crate) fn forward<T: Float>(plan: &Plan, params: &[&[T]], x: &[T]) -> (Vec<T>, Cache<T>) {
    let mut cache = Cache {
        inputs: Vec::with_capacity(plan.layers.len()),
        pre: Vec::with_capacity(plan.layers.len()),
    };
    let mut h: Vec<T> = x[..plan.input].to_vec();
    for l in &plan.layers {
        let z = affine(l, params[l.weight], params[l.bias], &h);
        let out = match l.kind {
            Kind::Relu => z.iter().map(|&v| relu(v)).collect(),
            Kind::Residual => h.iter().zip(&z).map(|(&a, &v)| a + relu(v)).collect(),
            Kind::Linear => z.clone(),
        };
        cache.inputs.push(std::mem::replace(&mut h, out));
        cache.pre.push(z);
    }
    (h, cache)
}

/// Accumulates parameter gradients for one sample into `grads`.
pub(crate) fn backward<T: Float>(plan: &Plan, params: &[&[T]], cache: &Cache<T>, dout: &[T], grads: &mut [Vec<T>]) {
    let mut d = dout.to_vec();
    for (li, l) in plan.layers.iter().enumerate().rev() {
        let x = &cache.inputs[li];
        let z = &cache.pre[li];
        let dz: Vec<T> = match l.kind {
            Kind::Linear => d.clone(),
            Kind::Relu | Kind::Residual => d
                .iter()
                .zip(z)
                .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
                .collect(),
        };
        let w = params[l.weight];
        let mut dx = match l.kind {
            Kind::Residual => d.clone(),
            _ => vec![T::zero(); l.cols],
        };
        {
            let gw = &mut grads[l.weight];
            for i in 0..l.rows {
                for j in 0..l.cols {
                    gw[i * l.stride + j] = gw[i * l.stride + j] + dz[i] * x[j];
                }
            }
        }
        {
            let gb = &mut grads[l.bias];
            for i in 0..l.rows {
                gb[i] = gb[i] + dz[i];
            }
        }
        for (j, dxj) in dx.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (i, dzi) in dz.iter().enumerate() {
                acc = acc + w[i * l.stride + j] * *dzi;
            }
            *dxj = *dxj + acc;
        }
        d = dx;
    }
}

/// Loss targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Class indices for softmax cross-entropy.
    Classes(Vec<usize>),
    /// Regression targets for mean squared error.
    Values(Vec<Vec<f32>>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-sample loss and its gradient wrt the outputs, already divided by
/// `batch`.
pub(crate) fn loss_head<T: Float>(out: &[T], targets: &Targets, index: usize, batch: usize) -> (T, Vec<T>) {
    let n = T::from(batch).expect("batch size fits");
    match targets {
        Targets::Classes(c) => {
            let y = c[index];
            let m = out.iter().copied().fold(T::neg_infinity(), T::max);
            let exps: Vec<T> = out.iter().map(|&v| (v - m).exp()).collect();
            let mut s = T::zero();
            for e in &exps {
                s = s + *e;
            }
            let loss = m + s.ln() - out[y];
            let grad = exps
                .iter()
                .enumerate()
                .map(|(k, &e)| {
                    let p = e / s;
                    (if k == y { p - T::one() } else { p }) / n
                })
                .collect();
            (loss / n, grad)
        }
        Targets::Values(v) => {
            let k = T::from(out.len()).expect("output count fits");
            let t = &v[index];
            let mut loss = T::zero();
            let mut grad = Vec::with_capacity(out.len());
            for (&o, &ti) in out.iter().zip(t) {
                let diff = o - T::from(ti).expect("f32 converts");
                loss = loss + diff * diff;
                grad.push((diff + diff) / (k * n));
            }
            (loss / (k * n), grad)
        }
    }
}

/// Mean loss over the batch and summed gradients, in sample order.
pub(crate) fn loss_and_grads<T: Float>(
    plan: &Plan,
    params: &[&[T]],
    inputs: &[Vec<T>],
    targets: &Targets,
    shapes: &[usize],
) -> (T, Vec<Vec<T>>) {
    let mut grads: Vec<Vec<T>> = shapes.iter().map(|&n| vec![T::zero(); n]).collect();
    let mut total = T::zero();
    for (i, x) in inputs.iter().enumerate() {
        let (out, cache) = forward(plan, params, x);
        let (loss, dout) = loss_head(&out, targets, i, inputs.len());
        total = total + loss;
        backward(plan, params, &cache, &dout, &mut grads);
    }
    (total, grads)
}
