use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use gaia_core::archspace::{
    abps_schedule, union_cardinality, RulePool, SampleRule, Sampler, SubSpace, DEFAULT_ENUM_CAP,
};
use gaia_core::rng;

use crate::ctx::{usage, Ctx};

/// Where the subspaces come from: built-in presets and/or config files.
#[derive(Args, Clone, Default)]
pub struct SpaceSource {
    /// Built-in subspace (ar50, ar77, ar101); repeatable.
    #[arg(long = "preset")]
    pub presets: Vec<String>,
    /// Subspace config file; repeatable.
    #[arg(long = "space")]
    pub files: Vec<PathBuf>,
}

impl SpaceSource {
    /// Falls back to the `space.presets` config key, then to `fallback`.
    pub fn resolve(&self, ctx: &Ctx, fallback: &[&str]) -> anyhow::Result<Vec<SubSpace>> {
        let mut presets = self.presets.clone();
        if presets.is_empty() && self.files.is_empty() {
            presets = match ctx.config.get("space.presets") {
                Some(raw) => raw.split(',').map(|s| s.trim().to_string()).collect(),
                None => fallback.iter().map(|s| s.to_string()).collect(),
            };
        }
        let mut out = Vec::new();
        for p in &presets {
            out.push(SubSpace::preset(p)?);
        }
        for f in &self.files {
            out.push(SubSpace::load(f)?);
        }
        if out.is_empty() {
            return Err(usage("no subspace given (use --preset or --space)"));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PoolKind {
    /// Five depth quantiles at 1/8 each plus uniform random at 3/8.
    Standard,
    /// Always uniform random.
    Random,
    /// Always minimum widths.
    MinWidth,
}

impl PoolKind {
    pub fn pool(self) -> RulePool {
        match self {
            PoolKind::Standard => RulePool::standard(),
            PoolKind::Random => RulePool::forced(SampleRule::UniformRandom),
            PoolKind::MinWidth => RulePool::forced(SampleRule::MinWidth),
        }
    }
}

#[derive(Subcommand)]
pub enum SpaceCmd {
    /// Cardinality of each subspace and of their union.
    Count {
        #[command(flatten)]
        source: SpaceSource,
    },
    /// Write every member of one subspace, one key per line.
    Enum {
        #[command(flatten)]
        source: SpaceSource,
        /// Refuse spaces larger than this.
        #[arg(long)]
        cap: Option<u64>,
    },
    /// Draw architectures with a sampling-rule pool.
    Sample {
        #[command(flatten)]
        source: SpaceSource,
        #[arg(long, short)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        pool: Option<PoolKind>,
    },
    /// Print the progressive-shrinking phase schedule.
    Schedule {
        /// `preset:epochs` list in shrinking order, e.g. ar101:24,ar77:13,ar50:13.
        #[arg(long)]
        phases: Option<String>,
    },
}

pub fn run(ctx: &Ctx, cmd: SpaceCmd) -> anyhow::Result<()> {
    match cmd {
        SpaceCmd::Count { source } => {
            let spaces = source.resolve(ctx, &["ar50"])?;
            if let [only] = &spaces[..] {
                println!("{}", only.cardinality());
            } else {
                for s in &spaces {
                    println!("{}\t{}", s.name, s.cardinality());
                }
                println!("union\t{}", union_cardinality(&spaces));
            }
        }
        SpaceCmd::Enum { source, cap } => {
            let spaces = source.resolve(ctx, &["ar50"])?;
            let [space] = &spaces[..] else {
                return Err(usage("space enum takes exactly one subspace"));
            };
            let cap = ctx.pick(cap, "space.cap", DEFAULT_ENUM_CAP)?;
            let mut text = String::new();
            for a in space.enumerate(cap)? {
                let _ = writeln!(text, "{}", a.key());
            }
            let path = ctx.write(&format!("{}.enum.txt", space.name.to_lowercase()), text)?;
            println!("{} architectures written to {}", space.cardinality(), path.display());
        }
        SpaceCmd::Sample { source, n, pool } => {
            let spaces = source.resolve(ctx, &["ar50"])?;
            let n = ctx.pick(n, "space.samples", 10)?;
            let pool = ctx.pick_opt(pool.map(PoolName), "space.pool")?.map_or(PoolKind::Standard, |p| p.0);
            let mut text = String::from("space\trule\tarch\n");
            let pool = pool.pool();
            for space in spaces {
                let sampler = Sampler::new(space.clone(), pool.clone())?;
                let mut r = rng::derived(ctx.seed, &format!("space-sample|{}", space.name));
                for _ in 0..n {
                    let (rule, arch) = sampler.draw(&mut r);
                    let label = pool.entries()[rule].0.label();
                    let _ = writeln!(text, "{}\t{label}\t{}", space.name, arch.key());
                }
            }
            print!("{text}");
            ctx.write("samples.tsv", text)?;
        }
        SpaceCmd::Schedule { phases } => {
            let raw = phases.or_else(|| ctx.config.get("space.schedule").map(str::to_string));
            let phases = match raw {
                None => None,
                Some(raw) => Some(parse_phases(&raw)?),
            };
            let schedule = abps_schedule(phases)?;
            let mut start = 0;
            println!("phase\tspace\tepochs\twarmup\tfirst_epoch");
            for (i, p) in schedule.phases().iter().enumerate() {
                println!("{i}\t{}\t{}\t{}\t{start}", p.space.name, p.epochs, p.warmup);
                start += p.epochs;
            }
            println!("total\t{}", schedule.total_epochs());
        }
    }
    Ok(())
}

fn parse_phases(raw: &str) -> anyhow::Result<Vec<(SubSpace, u32)>> {
    raw.split(',')
        .map(|item| {
            let (name, epochs) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| usage(format!("phase {item:?} is not preset:epochs")))?;
            let epochs = epochs
                .parse()
                .map_err(|_| usage(format!("bad epoch count in {item:?}")))?;
            Ok((SubSpace::preset(name)?, epochs))
        })
        .collect()
}

/// `--pool` spelled in a config file.
#[derive(Clone, Copy)]
struct PoolName(PoolKind);

impl std::str::FromStr for PoolName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        PoolKind::from_str(s, true).map(PoolName)
    }
}
