use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hetnet::{
    run_campaign, sweep, Algorithm, CampaignOutput, FemtoLayout, InterferenceModel, Placement,
    SimConfig,
};

/// Uplink HetNet simulator: joint power control, sub-channel assignment
/// and cell association over seeded Monte Carlo drops.
#[derive(Parser, Debug)]
#[command(name = "hetnet-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one campaign and write its output directory.
    Run(RunArgs),
    /// Run one campaign per value of a parameter.
    Sweep(SweepArgs),
    /// Print the effective configuration as TOML and exit.
    Config(Overrides),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Parameter to vary: num_users or macro_subchannels.
    #[arg(long)]
    param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// TOML or JSON configuration file; flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, env = "HETNET_OUTPUT_DIR")]
    output: Option<PathBuf>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    femtos: Option<usize>,
    #[arg(long)]
    subchannels: Option<usize>,
    #[arg(long)]
    macro_subchannels: Option<usize>,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// proposed | max-sinr
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long, overrides_with = "no_fairness")]
    fairness: bool,
    #[arg(long)]
    no_fairness: bool,
    /// uniform | near-macro | near-femto
    #[arg(long)]
    placement: Option<Placement>,
    /// ring | uniform | explicit
    #[arg(long)]
    femto_layout: Option<FemtoLayout>,
    /// co-channel | other-cells
    #[arg(long)]
    interference: Option<InterferenceModel>,
    /// Power loop tolerance as a fraction of p_max.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// Outage threshold (bps/Hz).
    #[arg(long)]
    gamma_th: Option<f64>,
    /// Number of leading drops whose convergence trace is kept.
    #[arg(long)]
    trace_drops: Option<usize>,
}

fn load_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text)?,
        Some("toml") | None => toml::from_str(&text)?,
        Some(other) => bail!("unsupported config extension .{other} (use .toml or .json)"),
    };
    Ok(cfg)
}

impl Overrides {
    fn resolve(&self) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => SimConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {$(
                if let Some(v) = self.$flag {
                    cfg.$field = v;
                }
            )*};
        }
        set!(
            users => num_users,
            femtos => num_femtos,
            subchannels => num_subchannels,
            macro_subchannels => macro_subchannels,
            drops => drops,
            seed => seed,
            algorithm => algorithm,
            placement => placement,
            femto_layout => femto_layout,
            tol => power_tol_rel,
            max_sweeps => max_sweeps,
            gamma_th => gamma_th,
            trace_drops => trace_drops
        );
        if let Some(model) = self.interference {
            cfg.channel.interference = model;
        }
        // Shrinking K without saying otherwise keeps full reuse.
        if self.subchannels.is_some() && self.macro_subchannels.is_none() {
            cfg.macro_subchannels = cfg.macro_subchannels.min(cfg.num_subchannels);
        }
        if self.fairness {
            cfg.fairness = true;
        }
        if self.no_fairness {
            cfg.fairness = false;
        }
        if let Some(out) = &self.output {
            cfg.output = Some(out.display().to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output_dir(cfg: &SimConfig) -> PathBuf {
    PathBuf::from(cfg.output.as_deref().unwrap_or("hetnet-out"))
}

fn summarize(label: &str, out: &CampaignOutput) {
    let r = &out.report;
    println!(
        "{label}: {} drops, mean sum rate {:.2} ± {:.2} bps/Hz, {:.1}% users > 6 bps/Hz, outage {:.1}%",
        r.drops,
        r.mean_sum_rate,
        r.sum_rate_stderr,
        100.0 * r.fraction_above(6.0),
        100.0 * r.outage
    );
    let unconverged = out.drops.iter().filter(|d| !d.converged).count();
    if unconverged > 0 {
        eprintln!("warning: {unconverged} drop(s) hit the sweep cap in some power stage");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.overrides.resolve()?;
            let out = run_campaign(&cfg)?;
            let dir = output_dir(&cfg);
            out.write_to(&dir)?;
            summarize("campaign", &out);
            println!("wrote {}", dir.display());
        }
        Command::Sweep(args) => {
            let cfg = args.overrides.resolve()?;
            let out = sweep(&cfg, &args.param, &args.values)?;
            let dir = output_dir(&cfg);
            out.write_to(&dir)?;
            for (row, campaign) in out.rows.iter().zip(&out.campaigns) {
                summarize(&format!("{}={}", out.parameter.name(), row.value), campaign);
            }
            println!("wrote {}", dir.display());
        }
        Command::Config(overrides) => {
            let cfg = overrides.resolve()?;
            print!("{}", toml::to_string(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
