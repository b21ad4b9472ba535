use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use gaia_core::labelspace::{
    apply_overrides, build_unified, head_surgery_plan, merge_new_dataset, parse_label_space, parse_overrides,
    parse_unified, write_plan, write_report, write_unified, EmbeddingTable, LabelSpace, DEFAULT_THRESHOLD,
};
use gaia_core::supernet::{head_surgery, Checkpoint};

use crate::ctx::{read, Ctx};

#[derive(Subcommand)]
pub enum LabelsCmd {
    /// Build a unified label space from several datasets.
    Unify {
        #[command(flatten)]
        common: Common,
        /// Human verification lines (accept/reject/redirect).
        #[arg(long)]
        overrides: Option<PathBuf>,
        /// Label-space files, one category per line.
        #[arg(required = true)]
        spaces: Vec<PathBuf>,
    },
    /// Merge one new dataset into an existing unified space.
    Merge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        unified: PathBuf,
        space: PathBuf,
    },
    /// Plan (and optionally apply) classifier-head surgery for a target dataset.
    Surgery {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        unified: PathBuf,
        /// Target label-space file.
        #[arg(long)]
        target: PathBuf,
        /// Supernet checkpoint whose head rows are selected.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(Args)]
pub struct Common {
    /// Word-embedding table in word2vec text format.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Strict similarity threshold for a match.
    #[arg(long)]
    threshold: Option<f64>,
}

impl Common {
    fn resolve(&self, ctx: &Ctx) -> anyhow::Result<(EmbeddingTable, f64)> {
        let path = match &self.embeddings {
            Some(p) => p.clone(),
            None => PathBuf::from(ctx.config.require("labels.embeddings")?),
        };
        let table = EmbeddingTable::parse(&read(&path)?)?;
        let threshold = ctx.pick(self.threshold, "labels.threshold", DEFAULT_THRESHOLD)?;
        Ok((table, threshold))
    }
}

fn load_space(path: &Path) -> anyhow::Result<LabelSpace> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    Ok(parse_label_space(&read(path)?, stem)?)
}

pub fn run(ctx: &Ctx, cmd: LabelsCmd) -> anyhow::Result<()> {
    match cmd {
        LabelsCmd::Unify {
            common,
            overrides,
            spaces,
        } => {
            let (table, threshold) = common.resolve(ctx)?;
            let spaces = spaces.iter().map(|p| load_space(p)).collect::<anyhow::Result<Vec<_>>>()?;
            let (mut unified, mut report) = build_unified(&spaces, &table, threshold)?;
            if let Some(path) = overrides {
                let list = parse_overrides(&read(&path)?)?;
                (unified, report) = apply_overrides(&unified, &report, &list, &table)?;
            }
            let u = ctx.write("unified.tsv", write_unified(&unified))?;
            let r = ctx.write("report.tsv", write_report(&report))?;
            println!(
                "{} unified categories from {} datasets ({} matched, {} novel, {} ambiguous)",
                unified.len(),
                spaces.len(),
                report.matches.len(),
                report.novel.len(),
                report.ambiguous.len()
            );
            println!("wrote {} and {}", u.display(), r.display());
        }
        LabelsCmd::Merge { common, unified, space } => {
            let (table, threshold) = common.resolve(ctx)?;
            let current = parse_unified(&read(&unified)?)?;
            let space = load_space(&space)?;
            let (next, ext, report) = merge_new_dataset(&current, &space, &table, threshold)?;
            ctx.write("unified.tsv", write_unified(&next))?;
            ctx.write("report.tsv", write_report(&report))?;
            let mut lines = format!("prefix\t{}\n", ext.prefix_len);
            for (i, c) in ext.appended.iter().enumerate() {
                lines.push_str(&format!("append\t{}\t{c}\n", ext.prefix_len + i));
            }
            ctx.write("extension.tsv", lines)?;
            println!(
                "merged {}: {} existing rows kept, {} rows appended",
                space.dataset_id,
                ext.prefix_len,
                ext.appended.len()
            );
        }
        LabelsCmd::Surgery {
            common,
            unified,
            target,
            checkpoint,
        } => {
            let (table, threshold) = common.resolve(ctx)?;
            let unified = parse_unified(&read(&unified)?)?;
            let target = load_space(&target)?;
            let plan = head_surgery_plan(&unified, &target, &table, threshold)?;
            let text = write_plan(&plan, &unified);
            ctx.write("surgery.tsv", &text)?;
            print!("{text}");
            if let Some(path) = checkpoint {
                let ckpt = Checkpoint::load(&path)?;
                let out = head_surgery(&ckpt, &plan)?;
                let p = ctx.out.join("surgery.ckpt");
                std::fs::create_dir_all(&ctx.out)?;
                out.save(&p)?;
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}
