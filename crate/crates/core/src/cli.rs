//! Command-line front end: `run`, `plot` and `compare`.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::io::compare::compare_runs;
use crate::io::plots::emit_plots;
use crate::scenario::{load_scenario, Scenario};
use crate::sim;

#[derive(Debug, Parser)]
#[command(
    name = "crowdsim",
    version,
    about = "Pedestrian flow with contagion on a mesh-free particle cloud"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write frames, summary series and metadata.
    Run(RunArgs),
    /// Render figures from one or more run directories.
    Plot(PlotArgs),
    /// Tabulate the exposure series of two runs side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file (TOML).
    pub scenario: PathBuf,
    /// Time step (s).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time (s).
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Relative-velocity factor of the infection kernel.
    #[arg(long, value_enum)]
    pub contact_time: Option<Switch>,
    /// Re-solve the eikonal fields every this many steps.
    #[arg(long)]
    pub eikonal_every: Option<u32>,
    /// Output directory (overrides the scenario's).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Render figures into `<out>/plots` after the run.
    #[arg(long)]
    pub plots: bool,
    /// Write Φ and descent fields next to every frame.
    #[arg(long)]
    pub dump_eikonal: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Run directories; the exposure figure overlays all of them.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Figure directory (default: `<first run>/plots`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub run_a: PathBuf,
    pub run_b: PathBuf,
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Apply command-line overrides to a loaded scenario and re-validate it.
pub fn apply_overrides(mut scenario: Scenario, args: &RunArgs) -> anyhow::Result<Scenario> {
    let p = &mut scenario.params;
    if let Some(dt) = args.dt {
        p.dt = dt;
    }
    if let Some(t) = args.t_end {
        p.t_end = t;
    }
    if let Some(c) = args.contact_time {
        p.contact_time_enabled = c == Switch::On;
    }
    if let Some(k) = args.eikonal_every {
        p.eikonal_every = k;
    }
    if let Some(out) = &args.out {
        scenario.run.output_dir = Some(out.clone());
    }
    if args.dump_eikonal {
        scenario.run.dump_eikonal = true;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn run_command(args: &RunArgs) -> anyhow::Result<()> {
    let scenario = load_scenario(&args.scenario)?;
    let scenario = apply_overrides(scenario, args)?;
    let Some(out) = scenario.run.output_dir.clone() else {
        bail!("no output directory: pass --out or set run.output_dir in the scenario");
    };
    let outcome = match args.threads {
        Some(n) => crate::exec::with_threads(n, || sim::run(&scenario)),
        None => sim::run(&scenario),
    }
    .with_context(|| format!("run of '{}' failed; partial output in {}", scenario.name, out.display()))?;
    println!(
        "{}: final exposed {:.3} %, {} exited, {} steps in {:.1} s -> {}",
        scenario.name,
        outcome.final_exposed_percent,
        outcome.exited,
        outcome.steps,
        outcome.wall_clock.as_secs_f64(),
        out.display()
    );
    if args.plots {
        let written = emit_plots(&[out.clone()], &out.join("plots"))?;
        info!("wrote {} figures", written.len());
    }
    Ok(())
}

fn plot_command(args: &PlotArgs) -> anyhow::Result<()> {
    let out = args.out.clone().unwrap_or_else(|| args.runs[0].join("plots"));
    let written = emit_plots(&args.runs, &out)?;
    for p in &written {
        println!("{}", p.display());
    }
    Ok(())
}

fn compare_command(args: &CompareArgs) -> anyhow::Result<()> {
    let table = compare_runs(&args.run_a, &args.run_b)?.to_table();
    match &args.out {
        Some(path) => std::fs::write(path, table).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{table}"),
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Run(a) => run_command(a),
        Command::Plot(a) => plot_command(a),
        Command::Compare(a) => compare_command(a),
    }
}

/// Parse `args` and run; returns the process exit code (2 for usage
/// errors, 1 for runtime errors).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
