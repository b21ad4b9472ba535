use std::collections::HashSet;
use std::io::{self, Write};

use super::{kendall_tau, SearchError};
use crate::archspace::{Architecture, RulePool, SampleRule, Sampler, SubSpace};
use crate::costmodel::{detector_flops, HeadConfig};
use crate::evaluator::{evaluate_batch, EvalRequest, Evaluator, Fidelity};
use crate::rng;

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub n: usize,
    /// Proxy fidelities, each ranked against `reference`.
    pub proxies: Vec<Fidelity>,
    pub reference: Fidelity,
    pub seeds: Vec<u64>,
    pub pool: RulePool,
    /// Optional `[lo, hi)` GFLOPs band for models of similar cost.
    pub band: Option<(f64, f64)>,
    pub head: HeadConfig,
    pub task: String,
    pub jobs: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n: 100,
            proxies: vec![Fidelity::FastFinetune, Fidelity::Direct],
            reference: Fidelity::FullSchedule,
            seeds: (0..20).collect(),
            pool: RulePool::forced(SampleRule::UniformRandom),
            band: None,
            head: HeadConfig::default(),
            task: "default".into(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub seed: u64,
    pub arch: Architecture,
    pub gflops: f64,
    pub reference: f64,
    /// Same order as [`StudyConfig::proxies`].
    pub proxies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub reference: Fidelity,
    pub proxies: Vec<Fidelity>,
    /// `(seed, tau per proxy)`.
    pub taus: Vec<(u64, Vec<f64>)>,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn mean_tau(&self, proxy: Fidelity) -> Option<f64> {
        let i = self.proxies.iter().position(|&p| p == proxy)?;
        let n = self.taus.len() as f64;
        Some(self.taus.iter().map(|(_, t)| t[i]).sum::<f64>() / n)
    }

    /// CSV with columns `seed,arch,gflops,<reference>,<proxy>...`; the
    /// architecture key is quoted since it contains commas.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "seed,arch,gflops,{}", self.reference)?;
        for p in &self.proxies {
            write!(w, ",{p}")?;
        }
        writeln!(w)?;
        for r in &self.rows {
            write!(w, "{},\"{}\",{},{}", r.seed, r.arch.key(), r.gflops, r.reference)?;
            for m in &r.proxies {
                write!(w, ",{m}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// CSV with columns `seed,<proxy>...` holding tau per seed.
    pub fn write_tau_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "seed")?;
        for p in &self.proxies {
            write!(w, ",{p}")?;
        }
        writeln!(w)?;
        for (seed, t) in &self.taus {
            write!(w, "{seed}")?;
            for v in t {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn draw_models(space: &SubSpace, cfg: &StudyConfig, seed: u64) -> Result<Vec<Architecture>, SearchError> {
    let sampler = Sampler::new(space.clone(), cfg.pool.clone())?;
    let mut r = rng::derived(seed, "study");
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(cfg.n);
    let cap = cfg.n * 1000;
    let mut attempts = 0;
    while out.len() < cfg.n {
        if attempts == cap {
            return Err(SearchError::SamplingExhausted);
        }
        attempts += 1;
        let a = sampler.draw(&mut r).1;
        let in_band = cfg.band.is_none_or(|(lo, hi)| {
            let g = detector_flops(&a, &cfg.head).total;
            g >= lo && g < hi
        });
        if in_band && seen.insert(a) {
            out.push(a);
        }
    }
    Ok(out)
}

/// For each seed, samples `n` distinct architectures, evaluates them at
/// the reference and every proxy fidelity with `make(seed)`, and records
/// tau-b of each proxy against the reference.
pub fn ranking_study<E, F>(make: F, space: &SubSpace, cfg: &StudyConfig) -> Result<StudyReport, SearchError>
where
    E: Evaluator,
    F: Fn(u64) -> E,
{
    if cfg.n < 10 {
        return Err(SearchError::InvalidConfig(format!("n = {} (need at least 10)", cfg.n)));
    }
    if cfg.seeds.is_empty() || cfg.proxies.is_empty() {
        return Err(SearchError::InvalidConfig("need at least one seed and one proxy".into()));
    }
    let mut taus = Vec::with_capacity(cfg.seeds.len());
    let mut rows = Vec::with_capacity(cfg.seeds.len() * cfg.n);
    for &seed in &cfg.seeds {
        let ev = make(seed);
        let models = draw_models(space, cfg, seed)?;
        let score = |f: Fidelity| -> Result<Vec<f64>, SearchError> {
            let reqs: Vec<_> = models
                .iter()
                .enumerate()
                .map(|(i, a)| EvalRequest::new(format!("{seed}.{f}.{i}"), *a, f, cfg.task.clone()))
                .collect();
            Ok(evaluate_batch(&ev, &reqs, cfg.jobs)?.into_iter().map(|r| r.metric).collect())
        };
        let reference = score(cfg.reference)?;
        let proxies: Vec<Vec<f64>> = cfg.proxies.iter().map(|&p| score(p)).collect::<Result<_, _>>()?;
        let t = proxies
            .iter()
            .map(|p| {
                let pairs: Vec<_> = reference.iter().copied().zip(p.iter().copied()).collect();
                kendall_tau(&pairs)
            })
            .collect::<Result<Vec<_>, _>>()?;
        taus.push((seed, t));
        for (i, a) in models.iter().enumerate() {
            rows.push(StudyRow {
                seed,
                arch: *a,
                gflops: detector_flops(a, &cfg.head).total,
                reference: reference[i],
                proxies: proxies.iter().map(|p| p[i]).collect(),
            });
        }
    }
    Ok(StudyReport {
        reference: cfg.reference,
        proxies: cfg.proxies.clone(),
        taus,
        rows,
    })
}
