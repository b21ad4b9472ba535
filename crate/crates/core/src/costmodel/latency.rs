//! Affine latency model over `(GFLOPs, scale², total depth)` fitted by
//! least squares to user-measured samples.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::{detector_flops, HeadConfig};
use crate::archspace::Architecture;
use crate::config::KeyValues;

#[derive(Debug, Error, PartialEq)]
pub enum LatencyError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("feature matrix is rank deficient")]
    DegenerateFit,
    #[error("line {line}: expected `scale depths widths latency_ms`, got {text:?}")]
    BadLine { line: usize, text: String },
    #[error("bad latency model file: {0}")]
    BadModel(String),
}

pub const FEATURES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyModel {
    /// Intercept, then coefficients of GFLOPs, scale², total depth.
    pub coefficients: [f64; FEATURES],
    pub rmse: f64,
    pub max_abs_residual: f64,
    pub samples: usize,
    head: HeadConfig,
}

fn features(arch: &Architecture, head: &HeadConfig) -> [f64; FEATURES] {
    let s = f64::from(arch.scale);
    [
        1.0,
        detector_flops(arch, head).total,
        s * s,
        f64::from(arch.total_depth()),
    ]
}

impl LatencyModel {
    pub fn estimate(&self, arch: &Architecture) -> f64 {
        features(arch, &self.head)
            .iter()
            .zip(self.coefficients)
            .map(|(x, c)| x * c)
            .sum()
    }

    /// Head configuration the GFLOPs feature is computed with.
    pub fn head(&self) -> &HeadConfig {
        &self.head
    }

    /// Key/value text with the coefficients, fit statistics and head.
    pub fn to_config(&self) -> String {
        let [c0, c1, c2, c3] = self.coefficients;
        format!(
            "[latency]\nintercept = {c0:e}\ngflops = {c1:e}\nscale2 = {c2:e}\ndepth = {c3:e}\n\
             rmse = {:e}\nmax_abs_residual = {:e}\nsamples = {}\n\n{}",
            self.rmse,
            self.max_abs_residual,
            self.samples,
            self.head.to_config("head")
        )
    }

    pub fn from_config(kv: &KeyValues) -> Result<Self, LatencyError> {
        let bad = |e: crate::config::ConfigError| LatencyError::BadModel(e.to_string());
        let get = |k: &str| kv.require_value::<f64>(&format!("latency.{k}")).map_err(bad);
        Ok(Self {
            coefficients: [get("intercept")?, get("gflops")?, get("scale2")?, get("depth")?],
            rmse: get("rmse")?,
            max_abs_residual: get("max_abs_residual")?,
            samples: kv.require_value("latency.samples").map_err(bad)?,
            head: HeadConfig::from_config(kv, "head").map_err(bad)?,
        })
    }
}

/// Least-squares affine fit. Columns are standardized before the solve
/// so the scale² feature does not swamp the conditioning check.
pub fn latency_fit(samples: &[(Architecture, f64)], head: &HeadConfig) -> Result<LatencyModel, LatencyError> {
    if samples.len() < FEATURES {
        return Err(LatencyError::TooFewSamples {
            needed: FEATURES,
            got: samples.len(),
        });
    }
    let n = samples.len();
    let raw: Vec<[f64; FEATURES]> = samples.iter().map(|(a, _)| features(a, head)).collect();
    let mut mean = [0.0; FEATURES];
    let mut sd = [1.0; FEATURES];
    for j in 1..FEATURES {
        mean[j] = raw.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = raw.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n as f64;
        sd[j] = var.sqrt();
        if sd[j] <= 1e-12 * mean[j].abs().max(1.0) {
            return Err(LatencyError::DegenerateFit);
        }
    }
    let x = DMatrix::from_fn(n, FEATURES, |i, j| {
        if j == 0 {
            1.0
        } else {
            (raw[i][j] - mean[j]) / sd[j]
        }
    });
    let y = DVector::from_iterator(n, samples.iter().map(|(_, ms)| *ms));
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-10 * smax {
        return Err(LatencyError::DegenerateFit);
    }
    let beta = svd.solve(&y, 0.0).map_err(|_| LatencyError::DegenerateFit)?;

    let mut coefficients = [0.0; FEATURES];
    coefficients[0] = beta[0];
    for j in 1..FEATURES {
        coefficients[j] = beta[j] / sd[j];
        coefficients[0] -= beta[j] * mean[j] / sd[j];
    }
    let residuals = &y - &x * &beta;
    let rmse = (residuals.norm_squared() / n as f64).sqrt();
    let max_abs_residual = residuals.amax();
    Ok(LatencyModel {
        coefficients,
        rmse,
        max_abs_residual,
        samples: n,
        head: head.clone(),
    })
}

pub fn latency_estimate(model: &LatencyModel, arch: &Architecture) -> f64 {
    model.estimate(arch)
}

/// Parses `scale depths(csv) widths(csv) latency_ms` lines.
pub fn parse_latency_samples(text: &str) -> Result<Vec<(Architecture, f64)>, LatencyError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || LatencyError::BadLine {
            line: i + 1,
            text: raw.to_string(),
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        let [scale, depths, widths, ms] = f[..] else {
            return Err(bad());
        };
        let arch: Architecture = format!("{scale}:{depths}:{widths}").parse().map_err(|_| bad())?;
        let ms: f64 = ms.trim_end_matches("ms").parse().map_err(|_| bad())?;
        out.push((arch, ms));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archspace::SubSpace;

    #[test]
    fn exact_affine_recovery() {
        let head = HeadConfig::default();
        let truth = [3.0, 0.2, 1e-5, 0.5];
        let samples: Vec<_> = SubSpace::ar77()
            .enumerate(u64::MAX)
            .unwrap()
            .step_by(997)
            .map(|a| {
                let f = features(&a, &head);
                (a, f.iter().zip(truth).map(|(x, c)| x * c).sum())
            })
            .collect();
        let m = latency_fit(&samples, &head).unwrap();
        for (a, ms) in &samples {
            assert!((m.estimate(a) - ms).abs() <= 1e-9 * ms.abs());
        }
        for (c, t) in m.coefficients.iter().zip(truth) {
            assert!((c - t).abs() <= 1e-6 * t.abs().max(1e-3), "{c} vs {t}");
        }
    }

    #[test]
    fn model_file_round_trip() {
        let samples: Vec<_> = SubSpace::ar50()
            .enumerate(u64::MAX)
            .unwrap()
            .step_by(1231)
            .map(|a| (a, 5.0 + f64::from(a.total_depth()) + f64::from(a.scale) / 100.0))
            .collect();
        let m = latency_fit(&samples, &HeadConfig::default()).unwrap();
        let back = LatencyModel::from_config(&KeyValues::parse(&m.to_config()).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(matches!(
            LatencyModel::from_config(&KeyValues::default()),
            Err(LatencyError::BadModel(_))
        ));
    }

    #[test]
    fn repeated_sample_is_degenerate() {
        let a = SubSpace::ar50().anchor;
        let samples = vec![(a, 20.0); 6];
        assert_eq!(latency_fit(&samples, &HeadConfig::default()), Err(LatencyError::DegenerateFit));
        assert!(matches!(
            latency_fit(&samples[..2], &HeadConfig::default()),
            Err(LatencyError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn parse_samples() {
        let s = parse_latency_samples("800 3,4,6,3 64,64,128,256,512 39\n# x\n400 4,4,8,4 48,48,96,192,384 17ms\n")
            .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].1, 17.0);
        assert!(parse_latency_samples("800 3,4 1").is_err());
    }
}
