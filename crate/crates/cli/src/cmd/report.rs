use std::path::PathBuf;

use clap::{Args, ValueEnum};
use gaia_core::report::{line_svg, scatter_svg, PlotOptions, Table};

use crate::ctx::{read, Ctx};

#[derive(Clone, Copy, ValueEnum)]
pub enum Kind {
    Scatter,
    Line,
}

#[derive(Args)]
pub struct ReportArgs {
    csv: PathBuf,
    #[arg(long)]
    x: String,
    /// Y column; repeatable for several series.
    #[arg(long = "y", required = true)]
    ys: Vec<String>,
    /// Split every y column into one series per value of this column.
    #[arg(long)]
    group: Option<String>,
    #[arg(long, value_enum, default_value = "scatter")]
    kind: Kind,
    #[arg(long, default_value = "")]
    title: String,
    /// Draw the y = x line.
    #[arg(long)]
    diagonal: bool,
    /// Output file name inside --out.
    #[arg(long, default_value = "report.svg")]
    name: String,
}

pub fn run(ctx: &Ctx, a: ReportArgs) -> anyhow::Result<()> {
    let table = Table::parse(&read(&a.csv)?)?;
    let ys: Vec<&str> = a.ys.iter().map(String::as_str).collect();
    let series = table.series(&a.x, &ys, a.group.as_deref())?;
    let opts = PlotOptions {
        title: a.title,
        x_label: a.x.clone(),
        y_label: ys.join(", "),
        diagonal: a.diagonal,
        ..PlotOptions::default()
    };
    let svg = match a.kind {
        Kind::Scatter => scatter_svg(&series, &opts)?,
        Kind::Line => line_svg(&series, &opts)?,
    };
    let name = std::path::Path::new(&a.name)
        .file_name()
        .ok_or_else(|| crate::ctx::usage("--name must be a file name"))?
        .to_string_lossy()
        .into_owned();
    let path = ctx.write(&name, svg)?;
    println!("wrote {}", path.display());
    Ok(())
}
