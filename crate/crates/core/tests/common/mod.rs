//! Independent oracles and published reference data shared by the
//! integration tests. Nothing here calls into the code under test except to
//! read plain data (architectures, simulator constants).

#![allow(dead_code)]

use gaia_core::archspace::Architecture;
use gaia_core::costmodel::{detector_flops, HeadConfig};
use gaia_core::evaluator::SimConfig;

/// One published row: architecture, GFLOPs, latency in ms, band label.
pub struct PublishedRow {
    pub name: &'static str,
    pub arch: Architecture,
    pub gflops: f64,
    pub latency_ms: f64,
    pub band: Option<&'static str>,
}

fn row(
    name: &'static str,
    scale: u32,
    depths: [u32; 4],
    widths: [u32; 5],
    gflops: f64,
    latency_ms: f64,
    band: Option<&'static str>,
) -> PublishedRow {
    PublishedRow {
        name,
        arch: Architecture::new(depths, widths, scale),
        gflops,
        latency_ms,
        band,
    }
}

/// The two ResNet baselines followed by the ten searched rows, in band order.
pub fn published_rows() -> Vec<PublishedRow> {
    vec![
        row("ResNet50", 800, [3, 4, 6, 3], [64, 64, 128, 256, 512], 137.4, 39.0, None),
        row("ResNet101", 800, [3, 4, 23, 3], [64, 64, 128, 256, 512], 188.5, 51.0, None),
        row("g30", 400, [4, 4, 8, 4], [48, 48, 96, 192, 384], 44.3, 17.0, Some("30-45B")),
        row("g45", 480, [4, 6, 8, 4], [48, 48, 96, 256, 384], 59.4, 19.0, Some("45-60B")),
        row("g60", 560, [4, 6, 15, 4], [48, 80, 96, 192, 512], 74.4, 26.0, Some("60-75B")),
        row("g75", 560, [4, 6, 21, 4], [64, 80, 96, 192, 512], 88.1, 28.0, Some("75-90B")),
        row("g90", 560, [4, 6, 21, 4], [64, 80, 160, 192, 512], 101.1, 30.0, Some("90-105B")),
        row("g105", 640, [4, 6, 21, 4], [64, 80, 160, 192, 512], 119.2, 33.0, Some("105-120B")),
        row("g120", 720, [3, 4, 23, 3], [64, 64, 128, 192, 640], 133.9, 38.0, Some("120-135B")),
        row("g135", 800, [4, 6, 23, 3], [48, 48, 96, 192, 640], 149.1, 44.0, Some("135-150B")),
        row("g150", 800, [3, 4, 23, 3], [64, 64, 96, 256, 512], 178.7, 47.0, Some("150-180B")),
        row("g180", 880, [3, 4, 25, 4], [48, 48, 96, 256, 384], 209.8, 53.0, Some("180-210B")),
    ]
}

/// Kendall tau-b by literal pair counting.
pub fn brute_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tie_x += 1;
            }
            if dy == 0.0 {
                tie_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    (concordant - discordant) as f64 / (((n0 - tie_x) * (n0 - tie_y)) as f64).sqrt()
}

/// Backbone multiply-accumulates from an explicit layer list: a 7x7 stride-2
/// stem, a stride-2 pool, then bottleneck blocks whose first block in each
/// stage carries a 1x1 projection shortcut. Stages two to four halve the
/// feature map on entry.
pub fn backbone_macs_by_layer(arch: &Architecture) -> u64 {
    struct Layer {
        k: u64,
        cin: u64,
        cout: u64,
        side: u64,
    }
    let halve = |s: u64| s.div_ceil(2);
    let mut layers = Vec::new();
    let mut side = halve(u64::from(arch.scale));
    layers.push(Layer {
        k: 7,
        cin: 3,
        cout: u64::from(arch.widths[0]),
        side,
    });
    side = halve(side);
    let mut channels = u64::from(arch.widths[0]);
    for stage in 0..4 {
        if stage > 0 {
            side = halve(side);
        }
        let mid = u64::from(arch.widths[stage + 1]);
        let out = 4 * mid;
        for block in 0..arch.depths[stage] {
            layers.push(Layer { k: 1, cin: channels, cout: mid, side });
            layers.push(Layer { k: 3, cin: mid, cout: mid, side });
            layers.push(Layer { k: 1, cin: mid, cout: out, side });
            if block == 0 {
                layers.push(Layer { k: 1, cin: channels, cout: out, side });
            }
            channels = out;
        }
    }
    layers.iter().map(|l| l.k * l.k * l.cin * l.cout * l.side * l.side).sum()
}

/// Latent quality written out from its definition.
pub fn latent_q(arch: &Architecture, sim: &SimConfig) -> f64 {
    let flops = detector_flops(arch, &sim.head).total;
    let total_depth: u32 = arch.depths.iter().sum();
    let rho = f64::from(arch.scale) / f64::from(total_depth);
    let z = (rho - sim.rho_star) / sim.sigma_rho;
    sim.beta0 + sim.beta1 * (flops / sim.flops_ref).log10() + sim.beta2 * (-(z * z)).exp()
}

pub fn gflops(arch: &Architecture) -> f64 {
    detector_flops(arch, &HeadConfig::default()).total
}

/// Cosine similarity straight from the definition.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// `(image, category, vector)` records.
pub type Records = Vec<(String, u32, Vec<f64>)>;

/// Exhaustive most-similar selection: score every same-category
/// (target, source) pair, sort by score descending with ties on source id,
/// target id, category, then keep first occurrences of each source.
pub fn most_similar_oracle(source: &Records, target: &Records, budget: usize) -> Vec<(String, f64)> {
    let mut pairs: Vec<(f64, &str, &str, u32)> = Vec::new();
    for (t, tc, tv) in target {
        for (s, sc, sv) in source {
            if sc == tc {
                pairs.push((cosine(sv, tv), s, t, *tc));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.cmp(b.1))
            .then_with(|| a.2.cmp(b.2))
            .then_with(|| a.3.cmp(&b.3))
    });
    let mut out: Vec<(String, f64)> = Vec::new();
    for (score, s, _, _) in pairs {
        if out.len() == budget {
            break;
        }
        if !out.iter().any(|(o, _)| o == s) {
            out.push((s.to_string(), score));
        }
    }
    out
}

/// Best source per `(target, category)` unit, units in key order.
pub fn per_target_argmax(source: &Records, target: &Records) -> Vec<(String, String)> {
    let mut units: Vec<&(String, u32, Vec<f64>)> = target.iter().collect();
    units.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
    let mut out = Vec::new();
    for (t, tc, tv) in units {
        let best = source
            .iter()
            .filter(|(_, sc, _)| sc == tc)
            .map(|(s, _, sv)| (cosine(sv, tv), s))
            .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(a.1)));
        if let Some((_, s)) = best {
            out.push((t.clone(), s.clone()));
        }
    }
    out
}
