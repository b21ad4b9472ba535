use std::path::PathBuf;

use clap::{Args, Subcommand};
use gaia_core::config::KeyValues;
use gaia_core::costmodel::{detector_flops, LatencyModel};
use gaia_core::evaluator::{Evaluator, Simulator};
use gaia_core::report::{scatter_svg, PlotOptions, Series, Table};
use gaia_core::tsas::{kendall_tau_xy, ranking_study, two_step_search, Constraint, SearchConfig, StudyConfig};

use super::cost::{load_bands, HeadArgs};
use super::space::{PoolKind, SpaceSource};
use crate::ctx::{pair, read, usage, Ctx};

#[derive(Args)]
pub struct EvalArgs {
    /// `sim` or `exec:<command>` (a gaia-eval endpoint).
    #[arg(long)]
    evaluator: Option<String>,
    /// Parallel evaluations (and endpoint processes for exec).
    #[arg(long)]
    jobs: Option<usize>,
    /// Task name sent with every request.
    #[arg(long)]
    task: Option<String>,
}

impl EvalArgs {
    fn resolve(&self, ctx: &Ctx) -> anyhow::Result<(String, usize, String)> {
        let spec = ctx.pick(self.evaluator.clone(), "eval.evaluator", "sim".to_string())?;
        let jobs = ctx.pick(self.jobs, "eval.jobs", 1)?;
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        let task = ctx.pick(self.task.clone(), "eval.task", "default".to_string())?;
        Ok((spec, jobs, task))
    }
}

#[derive(Subcommand)]
pub enum SearchCmd {
    /// Two-step search under a deployment constraint.
    Run {
        #[command(flatten)]
        source: SpaceSource,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        head: HeadArgs,
        /// GFLOPs band `lo,hi` (half-open).
        #[arg(long, conflicts_with = "band")]
        flops: Option<String>,
        /// Named band from the band table, e.g. 60-75B.
        #[arg(long)]
        band: Option<String>,
        #[arg(long)]
        bands: Option<PathBuf>,
        /// Model written by `cost latency-fit`.
        #[arg(long, requires = "max_latency")]
        latency_model: Option<PathBuf>,
        /// Latency bound in milliseconds (inclusive).
        #[arg(long, requires = "latency_model")]
        max_latency: Option<f64>,
        /// Inclusive input-scale bounds `lo,hi`.
        #[arg(long)]
        scale_range: Option<String>,
        /// Step-1 samples per group.
        #[arg(long)]
        k: Option<usize>,
        /// Fraction of group winners promoted to step 2.
        #[arg(long)]
        keep: Option<f64>,
    },
    /// Rank agreement of proxy fidelities with the full schedule.
    RankStudy {
        #[command(flatten)]
        source: SpaceSource,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        head: HeadArgs,
        /// Models per seed.
        #[arg(long, short)]
        n: Option<usize>,
        /// Number of study seeds, counted up from --seed.
        #[arg(long)]
        seeds: Option<u64>,
        /// Only models inside this GFLOPs band `lo,hi`.
        #[arg(long)]
        flops: Option<String>,
        #[arg(long, value_enum)]
        pool: Option<PoolKind>,
    },
    /// Kendall tau-b between two numeric CSV columns.
    Tau {
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
}

pub fn run(ctx: &Ctx, cmd: SearchCmd) -> anyhow::Result<()> {
    match cmd {
        SearchCmd::Run {
            source,
            eval,
            head,
            flops,
            band,
            bands,
            latency_model,
            max_latency,
            scale_range,
            k,
            keep,
        } => {
            let spaces = source.resolve(ctx, &["ar50", "ar77", "ar101"])?;
            let (spec, jobs, task) = eval.resolve(ctx)?;
            let mut constraint = Constraint {
                head: head.resolve(ctx)?,
                ..Constraint::none()
            };
            let flops = flops.or_else(|| ctx.config.get("search.flops").map(str::to_string));
            if let Some(raw) = flops {
                constraint.flops = Some(pair(&raw, "--flops")?);
            }
            let band = band.or_else(|| ctx.config.get("search.band").map(str::to_string));
            if let Some(label) = band {
                let table = load_bands(ctx, bands.as_ref())?;
                let b = table
                    .iter()
                    .find(|b| b.label == label)
                    .ok_or_else(|| usage(format!("unknown band {label:?}")))?;
                constraint.flops = Some((b.lo, b.hi));
            }
            if let (Some(path), Some(ms)) = (latency_model, max_latency) {
                let model = LatencyModel::from_config(&KeyValues::load(&path)?)?;
                constraint.latency = Some((model, ms));
            }
            let scale_range = scale_range.or_else(|| ctx.config.get("search.scale").map(str::to_string));
            if let Some(raw) = scale_range {
                constraint.scale = Some(pair(&raw, "--scale-range")?);
            }
            let defaults = SearchConfig::default();
            let cfg = SearchConfig {
                k: ctx.pick(k, "search.k", defaults.k)?,
                keep: ctx.pick(keep, "search.keep", defaults.keep)?,
                attempt_cap: ctx.pick(None, "search.attempt_cap", defaults.attempt_cap)?,
                probe_budget: ctx.pick(None, "search.probe_budget", defaults.probe_budget)?,
                seed: ctx.seed,
                jobs,
                task,
            };
            let ev = ctx.evaluator(&spec, ctx.sim_config()?, jobs)?;
            let (winner, trace) = two_step_search(&spaces, &constraint, &ev, &cfg)?;
            let mut lines = Vec::new();
            trace.write_lines(&mut lines)?;
            let path = ctx.write("search_trace.tsv", lines)?;
            let g = detector_flops(&winner, &constraint.head).total;
            println!(
                "groups {} (dropped {}), shortlist {}, evaluations direct={} fast={}",
                trace.groups.len(),
                trace.dropped.len(),
                trace.shortlist.len(),
                trace.direct_evals,
                trace.fast_evals
            );
            println!("winner {} {winner} {g:.2} GFLOPs", winner.key());
            println!("wrote {}", path.display());
        }
        SearchCmd::RankStudy {
            source,
            eval,
            head,
            n,
            seeds,
            flops,
            pool,
        } => {
            let spaces = source.resolve(ctx, &["ar50"])?;
            let [space] = &spaces[..] else {
                return Err(usage("rank-study takes exactly one subspace"));
            };
            let (spec, jobs, task) = eval.resolve(ctx)?;
            let defaults = StudyConfig::default();
            let count = ctx.pick(seeds, "study.seeds", defaults.seeds.len() as u64)?;
            let mut cfg = StudyConfig {
                n: ctx.pick(n, "study.n", defaults.n)?,
                seeds: (ctx.seed..ctx.seed + count).collect(),
                head: head.resolve(ctx)?,
                task,
                jobs,
                ..defaults
            };
            if let Some(p) = pool {
                cfg.pool = p.pool();
            }
            let flops = flops.or_else(|| ctx.config.get("study.flops").map(str::to_string));
            if let Some(raw) = flops {
                cfg.band = Some(pair(&raw, "--flops")?);
            }
            let sim = ctx.sim_config()?;
            let report = if spec == "sim" {
                // every seed is its own simulated study, so results are not cached
                ranking_study(|s| Simulator::new(sim.clone(), s), space, &cfg)?
            } else {
                let shared = ctx.evaluator(&spec, sim, jobs)?;
                ranking_study(|_| -> &dyn Evaluator { &*shared }, space, &cfg)?
            };
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            ctx.write("study.csv", csv)?;
            let mut tau_csv = Vec::new();
            report.write_tau_csv(&mut tau_csv)?;
            ctx.write("study_tau.csv", tau_csv)?;

            let mut title = Vec::new();
            for p in &report.proxies {
                let m = report.mean_tau(*p).unwrap_or(f64::NAN);
                title.push(format!("τ({p}, {}) = {m:.3}", report.reference));
                println!("mean tau {p} vs {}: {m:.4}", report.reference);
            }
            let series: Vec<Series> = report
                .proxies
                .iter()
                .enumerate()
                .map(|(i, p)| Series {
                    name: p.to_string(),
                    points: report.rows.iter().map(|r| (r.reference, r.proxies[i])).collect(),
                })
                .collect();
            let svg = scatter_svg(
                &series,
                &PlotOptions {
                    title: title.join(", "),
                    x_label: format!("{} metric", report.reference),
                    y_label: "proxy metric".into(),
                    diagonal: true,
                    ..PlotOptions::default()
                },
            )?;
            let path = ctx.write("study.svg", svg)?;
            println!("wrote study.csv, study_tau.csv and {}", path.display());
        }
        SearchCmd::Tau { csv, x, y } => {
            let table = Table::parse(&read(&csv)?)?;
            let s = table.series(&x, &[&y], None)?;
            let (xs, ys): (Vec<f64>, Vec<f64>) = s[0].points.iter().copied().unzip();
            println!("{}", kendall_tau_xy(&xs, &ys)?);
        }
    }
    Ok(())
}
