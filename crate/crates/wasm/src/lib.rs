//! Browser demo: three toolkit operations exposed to JavaScript.
//!
//! Every export returns a JSON string. The `*_json` functions hold the logic
//! and are plain Rust so they can be tested off the browser.

use gaia_core::archspace::{Architecture, RulePool, SampleRule, Sampler, SubSpace};
use gaia_core::config::parse_list;
use gaia_core::costmodel::{backbone_flops, detector_flops, flops_band, table2_bands, HeadConfig};
use gaia_core::evaluator::{SimConfig, Simulator};
use gaia_core::report::{scatter_svg, PlotOptions, Series};
use gaia_core::rng;
use gaia_core::tsas::{ranking_study, StudyConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_DRAWS: u32 = 200_000;
const MAX_MODELS: usize = 500;

fn parse_arch(scale: u32, depths: &str, widths: &str) -> Result<Architecture, String> {
    let d: Vec<u32> = parse_list(depths).ok_or("depths must be comma-separated integers")?;
    let w: Vec<u32> = parse_list(widths).ok_or("widths must be comma-separated integers")?;
    let d: [u32; 4] = d.try_into().map_err(|_| "need 4 depths")?;
    let w: [u32; 5] = w.try_into().map_err(|_| "need 5 widths")?;
    let arch = Architecture::new(d, w, scale);
    if !arch.is_valid() || scale > 4096 || d.iter().any(|&x| x > 64) || w.iter().any(|&x| x > 4096) {
        return Err("depths, widths and scale must be positive and modest".into());
    }
    Ok(arch)
}

pub fn flops_json(scale: u32, depths: &str, widths: &str) -> Result<String, String> {
    let arch = parse_arch(scale, depths, widths)?;
    let c = detector_flops(&arch, &HeadConfig::default());
    let b = backbone_flops(&arch);
    let bands = table2_bands();
    Ok(json!({
        "arch": arch.key(),
        "breakdown": c,
        "stem": b.stem as f64 / 1e9,
        "stages": b.stages.map(|s| s as f64 / 1e9),
        "band": flops_band(c.total, &bands),
    })
    .to_string())
}

fn pool_named(name: &str) -> Result<RulePool, String> {
    match name {
        "standard" => Ok(RulePool::standard()),
        "random" => Ok(RulePool::forced(SampleRule::UniformRandom)),
        "min-width" => Ok(RulePool::forced(SampleRule::MinWidth)),
        other => Err(format!("unknown pool {other:?}")),
    }
}

/// Rule frequencies and the total-depth histogram of `draws` samples.
pub fn histogram_json(preset: &str, pool: &str, draws: u32, seed: u64) -> Result<String, String> {
    if draws == 0 || draws > MAX_DRAWS {
        return Err(format!("draws must be in 1..={MAX_DRAWS}"));
    }
    let space = SubSpace::preset(preset).map_err(|e| e.to_string())?;
    let pool = pool_named(pool)?;
    let sampler = Sampler::new(space.clone(), pool.clone()).map_err(|e| e.to_string())?;
    let mut r = rng::derived(seed, "demo-histogram");
    let mut rule_counts = vec![0u32; pool.entries().len()];
    let lo = space.depth_min_total();
    let mut depth_counts = vec![0u32; (space.depth_max_total() - lo + 1) as usize];
    for _ in 0..draws {
        let (rule, arch) = sampler.draw(&mut r);
        rule_counts[rule] += 1;
        depth_counts[(arch.total_depth() - lo) as usize] += 1;
    }
    let rules: Vec<_> = pool
        .entries()
        .iter()
        .zip(&rule_counts)
        .map(|((rule, p), &n)| json!({"rule": rule.label(), "expected": p, "observed": f64::from(n) / f64::from(draws)}))
        .collect();
    let depths: Vec<_> = depth_counts
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(i, &n)| json!({"total_depth": lo + i as u32, "count": n}))
        .collect();
    Ok(json!({"space": space.name, "draws": draws, "rules": rules, "depths": depths}).to_string())
}

/// One simulated ranking study: proxy-vs-full scatter as SVG plus tau.
pub fn ranking_json(preset: &str, n: usize, seed: u64) -> Result<String, String> {
    if !(10..=MAX_MODELS).contains(&n) {
        return Err(format!("models must be in 10..={MAX_MODELS}"));
    }
    let space = SubSpace::preset(preset).map_err(|e| e.to_string())?;
    let cfg = StudyConfig {
        n,
        seeds: vec![seed],
        ..StudyConfig::default()
    };
    let report = ranking_study(|s| Simulator::new(SimConfig::default(), s), &space, &cfg).map_err(|e| e.to_string())?;
    let taus = &report.taus[0].1;
    let series: Vec<Series> = report
        .proxies
        .iter()
        .enumerate()
        .map(|(i, p)| Series {
            name: p.to_string(),
            points: report.rows.iter().map(|r| (r.reference, r.proxies[i])).collect(),
        })
        .collect();
    let title = report
        .proxies
        .iter()
        .zip(taus)
        .map(|(p, t)| format!("τ({p}, full) = {t:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    let svg = scatter_svg(
        &series,
        &PlotOptions {
            title,
            x_label: "full metric".into(),
            y_label: "proxy metric".into(),
            diagonal: true,
            ..PlotOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let tau: serde_json::Map<String, serde_json::Value> =
        report.proxies.iter().zip(taus).map(|(p, t)| (p.to_string(), json!(t))).collect();
    Ok(json!({"tau": tau, "svg": svg}).to_string())
}

#[wasm_bindgen]
pub fn flops(scale: u32, depths: &str, widths: &str) -> Result<String, JsError> {
    flops_json(scale, depths, widths).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sample_histogram(preset: &str, pool: &str, draws: u32, seed: u32) -> Result<String, JsError> {
    histogram_json(preset, pool, draws, u64::from(seed)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ranking_scatter(preset: &str, models: u32, seed: u32) -> Result<String, JsError> {
    ranking_json(preset, models as usize, u64::from(seed)).map_err(|e| JsError::new(&e))
}
