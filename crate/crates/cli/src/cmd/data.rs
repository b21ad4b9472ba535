use std::path::PathBuf;

use clap::{Subcommand, ValueEnum};
use gaia_core::tsds::{check_categories, load_features, represent_vectors, select, Strategy, DEFAULT_BUDGET};

use crate::ctx::Ctx;

#[derive(Clone, Copy, ValueEnum)]
pub enum StrategyKind {
    TopK,
    MostSimilar,
    Random,
}

#[derive(Subcommand)]
pub enum DataCmd {
    /// Pick upstream images whose represent vectors resemble the target's.
    Select {
        /// Source (upstream) instance features, GAIAFEAT binary or CSV.
        #[arg(long)]
        source: PathBuf,
        /// Target (downstream) instance features.
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_enum)]
        strategy: Option<StrategyKind>,
        /// Images to return.
        #[arg(long)]
        budget: Option<usize>,
        /// Neighbours per target unit for top-k.
        #[arg(long)]
        k: Option<usize>,
        /// Rank against whole target images instead of (image, category) pairs.
        #[arg(long)]
        per_image: bool,
        /// Size of the unified label space; category ids must be below it.
        #[arg(long)]
        categories: Option<usize>,
    },
}

pub fn run(ctx: &Ctx, cmd: DataCmd) -> anyhow::Result<()> {
    let DataCmd::Select {
        source,
        target,
        strategy,
        budget,
        k,
        per_image,
        categories,
    } = cmd;
    let src = load_features(&source)?;
    let tgt = load_features(&target)?;
    if let Some(size) = ctx.pick_opt(categories, "data.categories")? {
        check_categories(&src, size)?;
        check_categories(&tgt, size)?;
    }
    let kind = match strategy {
        Some(s) => s,
        None => match ctx.config.get("data.strategy") {
            Some(raw) => StrategyKind::from_str(raw, true).map_err(crate::ctx::usage)?,
            None => StrategyKind::TopK,
        },
    };
    let strategy = match kind {
        StrategyKind::TopK => Strategy::TopK {
            k: ctx.pick_opt(k, "data.k")?,
            per_image: per_image || ctx.pick(None, "data.per_image", false)?,
        },
        StrategyKind::MostSimilar => Strategy::MostSimilar,
        StrategyKind::Random => Strategy::Random,
    };
    let budget = ctx.pick(budget, "data.budget", DEFAULT_BUDGET)?;
    let result = select(strategy, &represent_vectors(&src), &represent_vectors(&tgt), budget, ctx.seed)?;
    let mut lines = b"rank\timage\tscore\ttarget\tcategory\n".to_vec();
    result.write_lines(&mut lines)?;
    let path = ctx.write("selection.tsv", lines)?;
    println!(
        "selected {} of {} requested images from {} source instances; wrote {}",
        result.selected.len(),
        budget,
        src.len(),
        path.display()
    );
    Ok(())
}
