//! Seeded Monte Carlo campaigns, parameter sweeps, and their on-disk form.
//!
//! A campaign directory holds:
//!
//! * `campaign.json`: schema tag, config echo, per-drop summaries, pooled
//!   [`RateReport`], and the full convergence traces of the first
//!   `trace_drops` drops.
//! * `user_rates.csv`: `drop,user,rate_bpshz`
//! * `cdf.csv`: `rate,cdf`
//! * `drops.csv`: `drop,seed,sum_rate,removals,stages,converged,conflicts`
//! * `traces.csv`: one row per power stage of every traced drop.
//!
//! A sweep directory holds `sweep_summary.csv`
//! (`value,mean_sum_rate,stderr,outage,drops`) and one campaign directory
//! per value named `<parameter>-<value>`.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve, AllocationResult, SolveOptions};
use crate::baseline::max_sinr_baseline;
use crate::channel::{generate_channel_tensor, generate_topology, stream_rng, NetworkTopology};
use crate::config::{Algorithm, SimConfig};
use crate::error::{Error, Result};
use crate::metrics::{aggregate_rates, RateReport};
use crate::power::ConvergenceTrace;

pub const SCHEMA_VERSION: &str = "hetnet-campaign/1";

const SEED_STREAM: u64 = 0;

/// Per-drop seeds, derived from the base seed in drop order.
pub fn drop_seeds(base_seed: u64, drops: usize) -> Vec<u64> {
    let mut rng = stream_rng(base_seed, SEED_STREAM);
    (0..drops).map(|_| rng.next_u64()).collect()
}

/// Generates one drop and runs the configured algorithm on it.
pub fn run_drop(config: &SimConfig, seed: u64) -> Result<(NetworkTopology, AllocationResult)> {
    let topology = generate_topology(config, seed)?;
    let h = generate_channel_tensor(&topology, &config.channel, seed);
    let result = match config.algorithm {
        Algorithm::Proposed => {
            let options = SolveOptions {
                fairness: config.fairness,
                tol: config.power_tol(),
                max_sweeps: config.max_sweeps,
            };
            solve(&topology, &h, &config.channel, &options)?
        }
        Algorithm::MaxSinr => max_sinr_baseline(&topology, &h, &config.channel)?,
    };
    Ok((topology, result))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropSummary {
    pub drop: usize,
    pub seed: u64,
    pub sum_rate: f64,
    pub user_rates: Vec<f64>,
    pub subchannels_per_user: Vec<usize>,
    pub removals: usize,
    pub stages: usize,
    pub converged: bool,
    pub conflicts: usize,
    /// Users with no sub-channel at the end.
    pub unserved_users: usize,
    /// Largest number of users sharing one `(bs, sub)` at the end.
    pub max_occupancy: usize,
    /// Largest per-user total power (W).
    pub max_user_power: f64,
    pub initial_bss: Vec<Vec<usize>>,
    pub final_bss: Vec<Vec<usize>>,
}

impl DropSummary {
    fn new(drop: usize, seed: u64, r: &AllocationResult) -> Self {
        let d = r.association.dims();
        let max_occupancy = (0..d.bss)
            .flat_map(|j| (0..d.subchannels).map(move |k| (j, k)))
            .map(|(j, k)| r.association.occupancy(j, k))
            .max()
            .unwrap_or(0);
        let counts = r.subchannels_per_user();
        Self {
            drop,
            seed,
            sum_rate: r.sum_rate,
            user_rates: r.user_rates.clone(),
            unserved_users: counts.iter().filter(|&&c| c == 0).count(),
            subchannels_per_user: counts,
            removals: r.removals,
            stages: r.trace.stages.len(),
            converged: r.converged,
            conflicts: r.conflicts.len(),
            max_occupancy,
            max_user_power: (0..d.users)
                .map(|i| r.powers.user_total(i))
                .fold(0.0, f64::max),
            initial_bss: r.initial_bss.clone(),
            final_bss: r.final_bss.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropTrace {
    pub drop: usize,
    pub trace: ConvergenceTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignOutput {
    pub schema: String,
    pub config: SimConfig,
    pub drops: Vec<DropSummary>,
    pub report: RateReport,
    pub traces: Vec<DropTrace>,
}

/// Runs `config.drops` independent drops (in parallel) and pools them.
/// The output does not depend on thread scheduling.
pub fn run_campaign(config: &SimConfig) -> Result<CampaignOutput> {
    run_campaign_with(config, |_, _, _| {})
}

/// As [`run_campaign`], also handing every drop's full result to `inspect`
/// in drop order.
pub fn run_campaign_with(
    config: &SimConfig,
    mut inspect: impl FnMut(usize, &NetworkTopology, &AllocationResult),
) -> Result<CampaignOutput> {
    config.validate()?;
    let seeds = drop_seeds(config.seed, config.drops);
    let results: Vec<(NetworkTopology, AllocationResult)> = seeds
        .par_iter()
        .map(|&seed| run_drop(config, seed))
        .collect::<Result<_>>()?;

    let mut drops = Vec::with_capacity(results.len());
    let mut traces = Vec::new();
    for (d, ((topology, result), &seed)) in results.iter().zip(&seeds).enumerate() {
        inspect(d, topology, result);
        drops.push(DropSummary::new(d, seed, result));
        if d < config.trace_drops && !result.trace.stages.is_empty() {
            traces.push(DropTrace {
                drop: d,
                trace: result.trace.clone(),
            });
        }
    }
    let report = aggregate_rates(
        drops
            .iter()
            .map(|d| (d.user_rates.as_slice(), d.subchannels_per_user.clone())),
        config.gamma_th,
    )?;
    Ok(CampaignOutput {
        schema: SCHEMA_VERSION.to_string(),
        config: config.clone(),
        drops,
        report,
        traces,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    NumUsers,
    MacroSubchannels,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::NumUsers => "num_users",
            SweepParameter::MacroSubchannels => "macro_subchannels",
        }
    }

    fn apply(self, config: &mut SimConfig, value: usize) {
        match self {
            SweepParameter::NumUsers => config.num_users = value,
            SweepParameter::MacroSubchannels => config.macro_subchannels = value,
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "num_users" | "users" => Ok(SweepParameter::NumUsers),
            "macro_subchannels" => Ok(SweepParameter::MacroSubchannels),
            _ => Err(Error::UnknownParameter(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub mean_sum_rate: f64,
    pub stderr: f64,
    pub outage: f64,
    pub drops: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
    pub campaigns: Vec<CampaignOutput>,
}

/// One campaign per value. Every campaign reuses the base seed, so sweep
/// points share their drop seeds.
pub fn sweep(config: &SimConfig, parameter: &str, values: &[usize]) -> Result<SweepOutput> {
    let parameter: SweepParameter = parameter.parse()?;
    if values.is_empty() {
        return Err(Error::Empty("sweep needs at least one value"));
    }
    let mut campaigns = Vec::with_capacity(values.len());
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut cfg = config.clone();
        parameter.apply(&mut cfg, value);
        let out = run_campaign(&cfg)?;
        rows.push(SweepRow {
            value,
            mean_sum_rate: out.report.mean_sum_rate,
            stderr: out.report.sum_rate_stderr,
            outage: out.report.outage,
            drops: out.report.drops,
        });
        campaigns.push(out);
    }
    Ok(SweepOutput {
        parameter,
        rows,
        campaigns,
    })
}

/// Writes `bytes` to `path` through a temp file in the same directory.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn csv_bytes(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w)?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

impl CampaignOutput {
    /// Writes every campaign file under `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        write_atomic(&dir.join("campaign.json"), &json)?;

        let rates = csv_bytes(|w| {
            w.write_record(["drop", "user", "rate_bpshz"])?;
            for d in &self.drops {
                for (u, r) in d.user_rates.iter().enumerate() {
                    w.serialize((d.drop, u, r))?;
                }
            }
            Ok(())
        })?;
        write_atomic(&dir.join("user_rates.csv"), &rates)?;

        let cdf = csv_bytes(|w| {
            w.write_record(["rate", "cdf"])?;
            for row in &self.report.cdf {
                w.serialize(row)?;
            }
            Ok(())
        })?;
        write_atomic(&dir.join("cdf.csv"), &cdf)?;

        let drops = csv_bytes(|w| {
            w.write_record(["drop", "seed", "sum_rate", "removals", "stages", "converged", "conflicts"])?;
            for d in &self.drops {
                w.serialize((d.drop, d.seed, d.sum_rate, d.removals, d.stages, d.converged, d.conflicts))?;
            }
            Ok(())
        })?;
        write_atomic(&dir.join("drops.csv"), &drops)?;

        let traces = csv_bytes(|w| {
            w.write_record([
                "drop",
                "stage",
                "removed_user",
                "removed_bs",
                "removed_sub",
                "active_entries",
                "sum_rate",
                "max_delta",
                "sweeps",
                "converged",
            ])?;
            for t in &self.traces {
                for s in &t.trace.stages {
                    let (u, b, k) = match s.removed {
                        Some(r) => (Some(r.user), Some(r.bs), Some(r.sub)),
                        None => (None, None, None),
                    };
                    w.serialize((
                        t.drop,
                        s.stage,
                        u,
                        b,
                        k,
                        s.active_entries,
                        s.sum_rate,
                        s.max_delta,
                        s.sweeps,
                        s.converged,
                    ))?;
                }
            }
            Ok(())
        })?;
        write_atomic(&dir.join("traces.csv"), &traces)?;
        Ok(())
    }
}

impl SweepOutput {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let summary = csv_bytes(|w| {
            w.write_record(["value", "mean_sum_rate", "stderr", "outage", "drops"])?;
            for r in &self.rows {
                w.serialize((r.value, r.mean_sum_rate, r.stderr, r.outage, r.drops))?;
            }
            Ok(())
        })?;
        write_atomic(&dir.join("sweep_summary.csv"), &summary)?;
        for (row, campaign) in self.rows.iter().zip(&self.campaigns) {
            campaign.write_to(&dir.join(format!("{}-{}", self.parameter.name(), row.value)))?;
        }
        Ok(())
    }
}
