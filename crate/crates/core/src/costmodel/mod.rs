//! Analytic FLOPs model for a ResNet-bottleneck backbone with FPN, RPN and
//! a two-fc RoI head.
//!
//! One FLOP is one multiply-accumulate. Batch norm, activations, pooling
//! and additions are not counted. Every convolution of a stage runs at that
//! stage's output resolution `ceil(S / stride)`; the stem runs at
//! `ceil(S / 2)`.

mod band;
mod latency;

use serde::Serialize;

use crate::archspace::{Architecture, STAGES};
use crate::config::{ConfigError, KeyValues};

pub use band::{flops_band, parse_bands, table2_bands, Band, BandError};
pub use latency::{latency_estimate, latency_fit, parse_latency_samples, LatencyError, LatencyModel};

/// Bottleneck expansion: a stage with base width `w` outputs `4w` channels.
pub const EXPANSION: u64 = 4;

/// `k² · cin · cout · hout · wout` multiply-accumulates.
pub fn conv_flops(kernel: u64, cin: u64, cout: u64, hout: u64, wout: u64) -> u64 {
    kernel * kernel * cin * cout * hout * wout
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Spatial side of stage `s` (0-based) output for input side `scale`.
pub fn stage_side(scale: u32, stage: usize) -> u64 {
    ceil_div(u64::from(scale), 4 << stage)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BackboneCost {
    pub stem: u64,
    pub stages: [u64; STAGES],
}

impl BackboneCost {
    pub fn total(&self) -> u64 {
        self.stem + self.stages.iter().sum::<u64>()
    }
}

/// Backbone multiply-accumulates with the per-stage breakdown.
pub fn backbone_flops(arch: &Architecture) -> BackboneCost {
    let scale = u64::from(arch.scale);
    let stem_side = ceil_div(scale, 2);
    let stem = conv_flops(7, 3, u64::from(arch.widths[0]), stem_side, stem_side);
    let mut cin = u64::from(arch.widths[0]);
    let mut stages = [0u64; STAGES];
    for (s, cost) in stages.iter_mut().enumerate() {
        let side = stage_side(arch.scale, s);
        let w = u64::from(arch.widths[s + 1]);
        let out = EXPANSION * w;
        for block in 0..arch.depths[s] {
            *cost += conv_flops(1, cin, w, side, side)
                + conv_flops(3, w, w, side, side)
                + conv_flops(1, w, out, side, side);
            if block == 0 {
                *cost += conv_flops(1, cin, out, side, side);
            }
            cin = out;
        }
    }
    BackboneCost { stem, stages }
}

/// Detector head hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadConfig {
    pub fpn_channels: u64,
    /// Levels P2.. ; levels beyond the four backbone outputs are subsampled
    /// (stride 64 for the default five) and cost nothing to produce.
    pub levels: usize,
    pub rpn_kernel: u64,
    pub anchors_per_location: u64,
    pub rois: u64,
    pub roi_pool: u64,
    pub hidden: Vec<u64>,
    pub classes: u64,
    /// Per-class box regression (4 outputs per foreground class) when true.
    pub class_specific_boxes: bool,
    /// FLOPs per multiply-accumulate; 2.0 switches to the mul+add convention.
    pub flops_per_mac: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            fpn_channels: 256,
            levels: 5,
            rpn_kernel: 3,
            anchors_per_location: 3,
            rois: 1000,
            roi_pool: 7,
            hidden: vec![1024, 1024],
            classes: 80,
            class_specific_boxes: true,
            flops_per_mac: 1.0,
        }
    }
}

impl HeadConfig {
    /// Reads `<prefix>.<field>` keys; absent keys keep their defaults.
    /// `hidden` is a comma-separated list.
    pub fn from_config(kv: &KeyValues, prefix: &str) -> Result<Self, ConfigError> {
        let mut h = Self::default();
        let key = |f: &str| format!("{prefix}.{f}");
        macro_rules! field {
            ($($name:ident),*) => {
                $(if let Some(v) = kv.parse_value(&key(stringify!($name)))? {
                    h.$name = v;
                })*
            };
        }
        field!(fpn_channels, levels, rpn_kernel, anchors_per_location, rois, roi_pool, classes, class_specific_boxes, flops_per_mac);
        if kv.get(&key("hidden")).is_some() {
            h.hidden = kv.require_list(&key("hidden"))?;
        }
        Ok(h)
    }

    /// `[prefix]` section readable by [`HeadConfig::from_config`].
    pub fn to_config(&self, prefix: &str) -> String {
        let hidden: Vec<String> = self.hidden.iter().map(u64::to_string).collect();
        format!(
            "[{prefix}]\nfpn_channels = {}\nlevels = {}\nrpn_kernel = {}\nanchors_per_location = {}\n\
             rois = {}\nroi_pool = {}\nhidden = {}\nclasses = {}\nclass_specific_boxes = {}\nflops_per_mac = {}\n",
            self.fpn_channels,
            self.levels,
            self.rpn_kernel,
            self.anchors_per_location,
            self.rois,
            self.roi_pool,
            hidden.join(","),
            self.classes,
            self.class_specific_boxes,
            self.flops_per_mac
        )
    }
}

/// Costs in GFLOPs; `total` is the sum of the four parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub backbone: f64,
    pub fpn: f64,
    pub rpn: f64,
    pub roi_head: f64,
    pub total: f64,
}

impl CostBreakdown {
    fn from_macs(parts: [u64; 4], flops_per_mac: f64) -> Self {
        let g = |m: u64| m as f64 * flops_per_mac / 1e9;
        let [backbone, fpn, rpn, roi_head] = parts.map(g);
        Self {
            backbone,
            fpn,
            rpn,
            roi_head,
            total: backbone + fpn + rpn + roi_head,
        }
    }
}

/// Multiply-accumulates of each detector part: backbone, FPN, RPN, RoI head.
pub fn detector_macs(arch: &Architecture, head: &HeadConfig) -> [u64; 4] {
    let backbone = backbone_flops(arch).total();
    let c = head.fpn_channels;

    let mut fpn = 0;
    for s in 0..STAGES {
        let side = stage_side(arch.scale, s);
        let cin = EXPANSION * u64::from(arch.widths[s + 1]);
        fpn += conv_flops(1, cin, c, side, side) + conv_flops(3, c, c, side, side);
    }

    let mut sides: Vec<u64> = (0..STAGES).map(|s| stage_side(arch.scale, s)).collect();
    while sides.len() < head.levels.max(STAGES) {
        let last = *sides.last().expect("four backbone levels");
        sides.push(ceil_div(last, 2));
    }
    let a = head.anchors_per_location;
    let rpn = sides
        .iter()
        .map(|&side| {
            conv_flops(head.rpn_kernel, c, c, side, side)
                + conv_flops(1, c, a, side, side)
                + conv_flops(1, c, 4 * a, side, side)
        })
        .sum();

    let mut fan_in = c * head.roi_pool * head.roi_pool;
    let mut per_roi = 0;
    for &h in &head.hidden {
        per_roi += fan_in * h;
        fan_in = h;
    }
    let box_out = if head.class_specific_boxes { 4 * head.classes } else { 4 };
    per_roi += fan_in * (head.classes + 1) + fan_in * box_out;
    let roi_head = per_roi * head.rois;

    [backbone, fpn, rpn, roi_head]
}

/// GFLOPs of the full detector at a square `[3, S, S]` input.
pub fn detector_flops(arch: &Architecture, head: &HeadConfig) -> CostBreakdown {
    CostBreakdown::from_macs(detector_macs(arch, head), head.flops_per_mac)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r50(scale: u32) -> Architecture {
        Architecture::new([3, 4, 6, 3], [64, 64, 128, 256, 512], scale)
    }

    #[test]
    fn conv_arithmetic() {
        assert_eq!(conv_flops(1, 1, 1, 1, 1), 1);
        assert_eq!(conv_flops(3, 64, 64, 56, 56), 115_605_504);
        assert_eq!(conv_flops(3, 64, 64, 112, 56), 2 * conv_flops(3, 64, 64, 56, 56));
    }

    #[test]
    fn resnet50_at_224_is_near_four_gflops() {
        let g = backbone_flops(&r50(224)).total() as f64 / 1e9;
        assert!((g - 4.1).abs() / 4.1 <= 0.10, "{g}");
    }

    #[test]
    fn backbone_scales_quadratically() {
        let a = backbone_flops(&r50(400)).total() as f64;
        let b = backbone_flops(&r50(800)).total() as f64;
        let r = b / a;
        assert!((3.8..=4.2).contains(&r), "{r}");
    }

    #[test]
    fn breakdown_sums() {
        let c = detector_flops(&r50(800), &HeadConfig::default());
        assert_eq!(c.total, c.backbone + c.fpn + c.rpn + c.roi_head);
    }

    #[test]
    fn head_config_round_trip() {
        let h = HeadConfig {
            classes: 20,
            hidden: vec![512],
            class_specific_boxes: false,
            flops_per_mac: 2.0,
            ..HeadConfig::default()
        };
        let kv = KeyValues::parse(&h.to_config("head")).unwrap();
        assert_eq!(HeadConfig::from_config(&kv, "head").unwrap(), h);
        assert_eq!(HeadConfig::from_config(&KeyValues::default(), "head").unwrap(), HeadConfig::default());
    }

    #[test]
    fn mac_convention_is_a_scalar() {
        let one = detector_flops(&r50(640), &HeadConfig::default());
        let two = detector_flops(
            &r50(640),
            &HeadConfig {
                flops_per_mac: 2.0,
                ..HeadConfig::default()
            },
        );
        assert_eq!(two.backbone, 2.0 * one.backbone);
        assert_eq!(two.roi_head, 2.0 * one.roi_head);
    }
}
