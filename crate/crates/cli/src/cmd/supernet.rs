use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use gaia_core::archspace::Schedule;
use gaia_core::config::parse_list;
use gaia_core::supernet::{
    extract_subnet, full_selector, grad_check, init_supernet, loss, teacher_task, toy_schedule, toy_spaces,
    train_abps, Checkpoint, GradCheck, Optimizer, Selector, TrainConfig, ToyConfig,
};

use super::space::PoolKind;
use crate::ctx::{usage, Ctx};
use crate::errors::CliError;

/// Pass threshold of `supernet grad-check`.
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Args, Default)]
pub struct SelectorArgs {
    /// Four active stage depths; defaults to the full supernet.
    #[arg(long)]
    depths: Option<String>,
    /// Five active widths (stem, then stages).
    #[arg(long)]
    widths: Option<String>,
}

impl SelectorArgs {
    fn resolve(&self, ckpt: &Checkpoint) -> anyhow::Result<Selector> {
        let full = full_selector(ckpt)?;
        let list = |raw: &Option<String>, n: usize, what: &str| -> anyhow::Result<Option<Vec<usize>>> {
            raw.as_deref()
                .map(|r| {
                    parse_list(r)
                        .filter(|v: &Vec<usize>| v.len() == n)
                        .ok_or_else(|| usage(format!("--{what} needs {n} comma-separated values")))
                })
                .transpose()
        };
        let mut sel = full;
        if let Some(d) = list(&self.depths, 4, "depths")? {
            sel.depths.copy_from_slice(&d);
        }
        if let Some(w) = list(&self.widths, 5, "widths")? {
            sel.widths.copy_from_slice(&w);
        }
        Ok(sel)
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Subcommand)]
pub enum SupernetCmd {
    /// Write a freshly initialised supernet covering the toy spaces.
    Init {
        #[arg(long)]
        input_dim: Option<usize>,
        #[arg(long)]
        outputs: Option<usize>,
    },
    /// Progressive-shrinking training on the synthetic teacher task.
    Train {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Epochs of the three phases (large, medium, small).
        #[arg(long)]
        epochs: Option<String>,
        /// Sample from the largest space for the whole run instead.
        #[arg(long)]
        single_phase: bool,
        #[arg(long)]
        lr: Option<f32>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long, value_enum)]
        optimizer: Option<OptimizerKind>,
        #[arg(long, value_enum)]
        pool: Option<PoolKind>,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_val: Option<usize>,
    },
    /// Slice a standalone subnet out of a supernet checkpoint.
    Extract {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        selector: SelectorArgs,
    },
    /// Compare reverse-mode gradients with central differences.
    GradCheck {
        /// Defaults to a fresh supernet from --seed.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        selector: SelectorArgs,
        /// Parameters probed.
        #[arg(long)]
        params: Option<usize>,
        #[arg(long)]
        step: Option<f64>,
        /// Teacher samples the loss is taken over.
        #[arg(long)]
        batch: Option<usize>,
    },
}

fn save(ctx: &Ctx, name: &str, ckpt: &Checkpoint) -> anyhow::Result<PathBuf> {
    ctx.write(name, ckpt.to_bytes())
}

fn default_config(ctx: &Ctx, input_dim: Option<usize>, outputs: Option<usize>) -> anyhow::Result<ToyConfig> {
    let input_dim = ctx.pick(input_dim, "supernet.input_dim", 8)?;
    let outputs = ctx.pick(outputs, "supernet.outputs", 2)?;
    let dim = u32::try_from(input_dim).map_err(|_| usage("--input-dim too large"))?;
    Ok(ToyConfig::covering(&toy_spaces(dim)[0], input_dim, outputs))
}

pub fn run(ctx: &Ctx, cmd: SupernetCmd) -> anyhow::Result<()> {
    match cmd {
        SupernetCmd::Init { input_dim, outputs } => {
            let config = default_config(ctx, input_dim, outputs)?;
            let ckpt = init_supernet(&config, ctx.seed)?;
            let path = save(ctx, "supernet.ckpt", &ckpt)?;
            let params: usize = ckpt.tensors().iter().map(|t| t.data.len()).sum();
            println!("{} tensors, {params} parameters; wrote {}", ckpt.len(), path.display());
        }
        SupernetCmd::Train {
            checkpoint,
            epochs,
            single_phase,
            lr,
            batch,
            optimizer,
            pool,
            n_train,
            n_val,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let config = ToyConfig::infer(&ckpt)?;
            let dim = u32::try_from(config.input_dim).map_err(|_| usage("input dimension too large"))?;
            let raw = epochs.or_else(|| ctx.config.get("supernet.epochs").map(str::to_string));
            let epochs: [u32; 3] = match raw {
                Some(r) => parse_list::<u32>(&r)
                    .and_then(|v| v.try_into().ok())
                    .ok_or_else(|| usage("--epochs needs three comma-separated values"))?,
                None => [8, 6, 6],
            };
            let spaces = toy_spaces(dim);
            let schedule = if single_phase {
                Schedule::progressive(vec![(spaces[0].clone(), epochs.iter().sum())])?
            } else {
                toy_schedule(spaces, epochs)?
            };
            let defaults = TrainConfig::default();
            let optimizer = match optimizer {
                Some(o) => o,
                None => match ctx.config.get("supernet.optimizer") {
                    Some(raw) => OptimizerKind::from_str(raw, true).map_err(usage)?,
                    None => OptimizerKind::Adam,
                },
            };
            let optimizer = match optimizer {
                OptimizerKind::Adam => Optimizer::adam(),
                OptimizerKind::Sgd => Optimizer::Sgd,
            };
            let cfg = TrainConfig {
                lr: ctx.pick(lr, "supernet.lr", defaults.lr)?,
                batch: ctx.pick(batch, "supernet.batch", defaults.batch)?,
                seed: ctx.seed,
                pool: pool.map_or(defaults.pool, PoolKind::pool),
                optimizer,
            };
            let task = teacher_task(
                config.input_dim,
                config.outputs,
                ctx.pick(n_train, "supernet.n_train", 512)?,
                ctx.pick(n_val, "supernet.n_val", 128)?,
                ctx.seed,
            );
            let (trained, log) = train_abps(&ckpt, &schedule, &task.train, Some(&task.val), &cfg)?;
            save(ctx, "trained.ckpt", &trained)?;
            ctx.write("train_log.csv", log.to_csv())?;
            let mut summary = String::from("anchor\tval_before\tval_after\tratio\n");
            for p in toy_schedule(toy_spaces(dim), [2, 2, 2])?.phases() {
                let sel = Selector::from(&p.space.anchor);
                let before = loss(&ckpt, &sel, &task.val.inputs, &task.val.targets)?;
                let after = loss(&trained, &sel, &task.val.inputs, &task.val.targets)?;
                let _ = writeln!(summary, "{}\t{before:.5}\t{after:.5}\t{:.3}", p.space.name, after / before);
            }
            print!("{summary}");
            for (rule, count) in log.rule_counts() {
                println!("draws {rule}: {count}");
            }
            println!("wrote trained.ckpt and train_log.csv to {}", ctx.out.display());
        }
        SupernetCmd::Extract { checkpoint, selector } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let sel = selector.resolve(&ckpt)?;
            let (sub, plan) = extract_subnet(&ckpt, &sel)?;
            save(ctx, "subnet.ckpt", &sub)?;
            let mut text = String::new();
            for (name, ranges) in &plan.entries {
                let dims: Vec<String> = ranges.iter().map(|r| format!("{}..{}", r.start, r.end)).collect();
                let _ = writeln!(text, "{name}\t{}", dims.join(","));
            }
            let path = ctx.write("slicing.tsv", text)?;
            println!(
                "extracted {} tensors for depths {:?} widths {:?}; plan in {}",
                sub.len(),
                sel.depths,
                sel.widths,
                path.display()
            );
        }
        SupernetCmd::GradCheck {
            checkpoint,
            selector,
            params,
            step,
            batch,
        } => {
            let ckpt = match checkpoint {
                Some(p) => Checkpoint::load(&p)?,
                None => init_supernet(&default_config(ctx, None, None)?, ctx.seed)?,
            };
            let sel = selector.resolve(&ckpt)?;
            let config = ToyConfig::infer(&ckpt)?;
            let data = teacher_task(config.input_dim, config.outputs, ctx.pick(batch, "gradcheck.batch", 4)?, 0, ctx.seed).train;
            let defaults = GradCheck::default();
            let cfg = GradCheck {
                params: ctx.pick(params, "gradcheck.params", defaults.params)?,
                step: ctx.pick(step, "gradcheck.step", defaults.step)?,
                seed: ctx.seed,
            };
            let report = grad_check(&ckpt, &sel, &data.inputs, &data.targets, &cfg)?;
            let mut text = String::from("tensor\tindex\tanalytic\tnumeric\trel_error\n");
            for p in &report.probes {
                let _ = writeln!(text, "{}\t{}\t{:e}\t{:e}\t{:e}", p.tensor, p.index, p.analytic, p.numeric, p.rel_error);
            }
            ctx.write("gradcheck.tsv", &text)?;
            println!(
                "{} probes ({} kink draws rejected), max relative error {:e}",
                report.probes.len(),
                report.rejected,
                report.max_rel_error
            );
            if report.max_rel_error > GRAD_TOLERANCE {
                return Err(CliError::GradCheckFailed(report.max_rel_error, GRAD_TOLERANCE).into());
            }
        }
    }
    Ok(())
}
