use std::path::PathBuf;

use clap::{Args, Subcommand};
use gaia_core::archspace::{Architecture, SubSpace};
use gaia_core::config::parse_list;
use gaia_core::costmodel::{
    detector_flops, flops_band, latency_fit, parse_bands, parse_latency_samples, table2_bands, Band, HeadConfig,
};

use crate::ctx::{read, usage, Ctx};

/// One architecture given by key, by preset anchor, or by its parts.
#[derive(Args, Default)]
pub struct ArchArgs {
    /// Canonical key `scale:d1,..,d4:w0,..,w4`.
    #[arg(long, conflicts_with_all = ["anchor", "scale", "depths", "widths"])]
    pub arch: Option<String>,
    /// Anchor of a built-in subspace (ar50, ar77, ar101).
    #[arg(long, conflicts_with_all = ["scale", "depths", "widths"])]
    pub anchor: Option<String>,
    #[arg(long)]
    pub scale: Option<u32>,
    /// Four comma-separated stage depths.
    #[arg(long)]
    pub depths: Option<String>,
    /// Five comma-separated widths (stem, then stages).
    #[arg(long)]
    pub widths: Option<String>,
}

impl ArchArgs {
    pub fn resolve(&self) -> anyhow::Result<Architecture> {
        if let Some(key) = &self.arch {
            return Ok(key.parse()?);
        }
        if let Some(name) = &self.anchor {
            return Ok(SubSpace::preset(name)?.anchor);
        }
        let (Some(scale), Some(d), Some(w)) = (self.scale, &self.depths, &self.widths) else {
            return Err(usage("give --arch, --anchor, or all of --scale --depths --widths"));
        };
        let depths: Vec<u32> = parse_list(d).ok_or_else(|| usage(format!("bad --depths {d:?}")))?;
        let widths: Vec<u32> = parse_list(w).ok_or_else(|| usage(format!("bad --widths {w:?}")))?;
        let depths = depths.try_into().map_err(|_| usage("--depths needs 4 values"))?;
        let widths = widths.try_into().map_err(|_| usage("--widths needs 5 values"))?;
        let arch = Architecture::new(depths, widths, scale);
        if !arch.is_valid() {
            return Err(usage("depths, widths and scale must be positive"));
        }
        Ok(arch)
    }
}

/// Detector head overrides on top of the `[head]` config section.
#[derive(Args, Default)]
pub struct HeadArgs {
    /// Foreground classes of the box head.
    #[arg(long)]
    pub classes: Option<u64>,
    /// FLOPs per multiply-accumulate (1 or 2).
    #[arg(long)]
    pub flops_per_mac: Option<f64>,
}

impl HeadArgs {
    pub fn resolve(&self, ctx: &Ctx) -> anyhow::Result<HeadConfig> {
        let mut head = HeadConfig::from_config(&ctx.config, "head")?;
        if let Some(c) = self.classes {
            head.classes = c;
        }
        if let Some(f) = self.flops_per_mac {
            head.flops_per_mac = f;
        }
        Ok(head)
    }
}

pub fn load_bands(ctx: &Ctx, path: Option<&PathBuf>) -> anyhow::Result<Vec<Band>> {
    let path = path.cloned().or_else(|| ctx.config.get("cost.bands").map(PathBuf::from));
    Ok(match path {
        Some(p) => parse_bands(&read(&p)?)?,
        None => table2_bands(),
    })
}

#[derive(Subcommand)]
pub enum CostCmd {
    /// GFLOPs breakdown of one detector.
    Flops {
        #[command(flatten)]
        arch: ArchArgs,
        #[command(flatten)]
        head: HeadArgs,
    },
    /// FLOPs band of a GFLOPs value or an architecture.
    Band {
        #[arg(long)]
        gflops: Option<f64>,
        #[command(flatten)]
        arch: ArchArgs,
        #[command(flatten)]
        head: HeadArgs,
        /// `label lo hi` lines; defaults to the ten 30B..210B groups.
        #[arg(long)]
        bands: Option<PathBuf>,
    },
    /// Fit the affine latency model to measured samples.
    LatencyFit {
        /// `scale depths widths latency_ms` lines.
        samples: PathBuf,
        #[command(flatten)]
        head: HeadArgs,
    },
}

pub fn run(ctx: &Ctx, cmd: CostCmd) -> anyhow::Result<()> {
    match cmd {
        CostCmd::Flops { arch, head } => {
            let arch = arch.resolve()?;
            let c = detector_flops(&arch, &head.resolve(ctx)?);
            println!("arch      {}", arch.key());
            println!("backbone  {:.2}", c.backbone);
            println!("fpn       {:.2}", c.fpn);
            println!("rpn       {:.2}", c.rpn);
            println!("roi_head  {:.2}", c.roi_head);
            println!("total     {:.2} GFLOPs", c.total);
        }
        CostCmd::Band {
            gflops,
            arch,
            head,
            bands,
        } => {
            let g = match gflops {
                Some(g) => g,
                None => detector_flops(&arch.resolve()?, &head.resolve(ctx)?).total,
            };
            let bands = load_bands(ctx, bands.as_ref())?;
            println!("{g:.2}\t{}", flops_band(g, &bands).unwrap_or("none"));
        }
        CostCmd::LatencyFit { samples, head } => {
            let samples = parse_latency_samples(&read(&samples)?)?;
            let model = latency_fit(&samples, &head.resolve(ctx)?)?;
            let path = ctx.write("latency.model", model.to_config())?;
            let [c0, c1, c2, c3] = model.coefficients;
            println!("latency_ms = {c0:.4} + {c1:.6}*GFLOPs + {c2:.3e}*scale^2 + {c3:.4}*depth");
            println!(
                "rmse {:.4} ms, max |residual| {:.4} ms over {} samples",
                model.rmse, model.max_abs_residual, model.samples
            );
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
