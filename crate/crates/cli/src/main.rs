//! Command-line front end: single scenario runs, parameter sweeps, and
//! convergence traces, emitted as CSV or JSON.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use pcdsim_core::config::{Config, RawConfig};
use pcdsim_core::engine::{run_scenario, Approach, MetricsSeries, Simulation};
use pcdsim_core::game::Node;
use pcdsim_core::spectrum::reference_sensed_count;

#[derive(Parser)]
#[command(name = "pcdsim", version, about = "Cognitive-radio VANET content distribution simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct CommonOpts {
    /// Path to a key=value config file; defaults apply when omitted.
    config: Option<PathBuf>,
    /// Override any config key, e.g. --set k_sensed=5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output format.
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    /// Write output to a file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and emit its per-slot metrics.
    Run {
        #[command(flatten)]
        common: CommonOpts,
        /// Link-selection approach.
        #[arg(long, default_value = "cooperative")]
        approach: String,
        /// Seed override; the config seed is used when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of slots to simulate.
        #[arg(long, default_value_t = 100)]
        slots: u32,
        /// Write a per-slot fleet trace CSV (slot,obu,lane,x,v) here.
        #[arg(long, value_name = "PATH")]
        trace_fleet: Option<PathBuf>,
        /// Write a per-slot transmission-graph trace CSV (slot,src,dst) here.
        #[arg(long, value_name = "PATH")]
        trace_graph: Option<PathBuf>,
    },
    /// Sweep one axis over a range of values, multiple approaches/seeds.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Axis to sweep.
        #[arg(long, value_parser = ["k_sensed", "k_channels", "n_obus"])]
        axis: String,
        /// Range as `lo..hi` (inclusive) or a comma list like `2,4,8`.
        #[arg(long)]
        range: String,
        /// Comma-separated approaches.
        #[arg(long, default_value = "cooperative,noncooperative,broadcast")]
        approaches: String,
        /// Number of seeds per point; seeds are base, base+1, ...
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Base seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Slots per scenario.
        #[arg(long, default_value_t = 100)]
        slots: u32,
    },
    /// Per-iteration average possessed packets for several network sizes
    /// (cooperative approach).
    Convergence {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated network sizes.
        #[arg(long = "n-list", default_value = "5,10,15")]
        n_list: String,
        /// Seeds per network size.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Base seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Slots per scenario.
        #[arg(long, default_value_t = 100)]
        slots: u32,
    },
}

/// Loads the optional config file and applies --set overrides, returning
/// the raw (pre-finalize) form so sweeps can rederive dependent defaults.
fn load_raw(common: &CommonOpts) -> Result<RawConfig> {
    let mut raw = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            RawConfig::parse(&text)
                .with_context(|| format!("parsing config file {}", path.display()))?
        }
        None => RawConfig::default(),
    };
    for kv in &common.set {
        let (key, value) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
        raw.set(key.trim(), value.trim(), 0)
            .with_context(|| format!("applying --set {kv}"))?;
    }
    Ok(raw)
}

fn finalize(raw: &RawConfig) -> Result<Config> {
    let cfg = raw.finalize().context("validating configuration")?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn parse_approaches(s: &str) -> Result<Vec<Approach>> {
    s.split(',')
        .map(|a| {
            Approach::parse(a.trim())
                .with_context(|| format!("unknown approach `{}`", a.trim()))
        })
        .collect()
}

fn parse_range(s: &str) -> Result<Vec<u64>> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u64 = lo.trim().parse().context("range start")?;
        let hi: u64 = hi.trim().parse().context("range end")?;
        if lo > hi {
            bail!("empty range {s}");
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|v| v.trim().parse::<u64>().with_context(|| format!("range value `{v}`")))
        .collect()
}

fn emit(common: &CommonOpts, csv: String, json: String) -> Result<()> {
    let body = match common.format {
        OutputFormat::Csv => csv,
        OutputFormat::Json => json,
    };
    match &common.out {
        Some(path) => fs::write(path, body)
            .with_context(|| format!("writing output to {}", path.display()))?,
        None => print!("{body}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct RunRow {
    slot: u32,
    approach: &'static str,
    seed: u64,
    total_possessed: u64,
    throughput: u64,
    formation_iters: u64,
}

fn run_rows(series: &MetricsSeries) -> Vec<RunRow> {
    series
        .slots
        .iter()
        .map(|s| RunRow {
            slot: s.slot,
            approach: series.approach.label(),
            seed: series.seed,
            total_possessed: s.total_possessed,
            throughput: s.throughput,
            formation_iters: s.formation_iters,
        })
        .collect()
}

fn cmd_run(
    common: CommonOpts,
    approach: &str,
    seed: Option<u64>,
    slots: u32,
    trace_fleet: Option<PathBuf>,
    trace_graph: Option<PathBuf>,
) -> Result<()> {
    let approach = Approach::parse(approach).with_context(|| format!("unknown approach `{approach}`"))?;
    let cfg = finalize(&load_raw(&common)?)?;
    let seed = seed.unwrap_or(cfg.seed);

    let mut fleet_trace = trace_fleet.is_some().then(|| String::from("slot,obu,lane,x,v\n"));
    let mut graph_trace = trace_graph.is_some().then(|| String::from("slot,src,dst\n"));
    let mut sim = Simulation::new(&cfg, approach, seed)?;
    for _ in 0..slots {
        let m = sim.step()?;
        if let Some(trace) = fleet_trace.as_mut() {
            for (i, o) in sim.fleet().obus.iter().enumerate() {
                trace.push_str(&format!("{},{},{},{},{}\n", m.slot, i, o.lane, o.x, o.v));
            }
        }
        if let Some(trace) = graph_trace.as_mut() {
            for (src, dst) in sim.graph().edges() {
                let src = match src {
                    Node::Rsu => "rsu".to_string(),
                    Node::Obu(j) => j.to_string(),
                };
                trace.push_str(&format!("{},{src},{dst}\n", m.slot));
            }
        }
    }
    let series = sim.into_series();
    if let (Some(path), Some(body)) = (&trace_fleet, fleet_trace) {
        fs::write(path, body).with_context(|| format!("writing fleet trace {}", path.display()))?;
    }
    if let (Some(path), Some(body)) = (&trace_graph, graph_trace) {
        fs::write(path, body).with_context(|| format!("writing graph trace {}", path.display()))?;
    }
    let rows = run_rows(&series);
    let mut csv = String::from("slot,approach,seed,total_possessed,throughput,formation_iters\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.slot, r.approach, r.seed, r.total_possessed, r.throughput, r.formation_iters
        ));
    }
    let json = serde_json::to_string_pretty(&rows)? + "\n";
    emit(&common, csv, json)
}

#[derive(Serialize)]
struct SweepRow {
    axis: String,
    axis_value: u64,
    approach: &'static str,
    seed: u64,
    p_final: u64,
}

fn cmd_sweep(
    common: CommonOpts,
    axis: &str,
    range: &str,
    approaches: &str,
    seeds: u64,
    seed: Option<u64>,
    slots: u32,
) -> Result<()> {
    let approaches = parse_approaches(approaches)?;
    let values = parse_range(range)?;
    let raw = load_raw(&common)?;
    let base_seed = seed.unwrap_or(finalize(&raw)?.seed);

    // Build every (value, approach) point's config up front so invalid
    // axis values fail before any work starts.
    let mut points = Vec::new();
    for &value in &values {
        let mut raw_pt = raw.clone();
        raw_pt
            .set(axis, &value.to_string(), 0)
            .with_context(|| format!("axis value {value}"))?;
        if axis == "k_channels" {
            // The sensed-channel count follows its reference value when the
            // channel count itself is the axis.
            let k_ref = reference_sensed_count(value as usize);
            raw_pt.set("k_sensed", &k_ref.to_string(), 0).unwrap();
        }
        let cfg = raw_pt
            .finalize()
            .with_context(|| format!("axis value {value} yields an invalid configuration"))?;
        for &approach in &approaches {
            if approach == Approach::Optimal
                && cfg.n_obus > pcdsim_core::baselines::MAX_ENUMERATION_OBUS
            {
                continue;
            }
            for s in 0..seeds {
                points.push((value, approach, base_seed + s, cfg.clone()));
            }
        }
    }

    let mut rows: Vec<SweepRow> = points
        .par_iter()
        .map(|(value, approach, run_seed, cfg)| {
            let series = run_scenario(cfg, *approach, *run_seed, slots)?;
            Ok(SweepRow {
                axis: axis.to_string(),
                axis_value: *value,
                approach: approach.label(),
                seed: *run_seed,
                p_final: series.final_possessed(),
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| (r.axis_value, r.approach, r.seed));

    let mut csv = String::from("axis,axis_value,approach,seed,p_final\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.axis, r.axis_value, r.approach, r.seed, r.p_final
        ));
    }
    let json = serde_json::to_string_pretty(&rows)? + "\n";
    emit(&common, csv, json)
}

#[derive(Serialize)]
struct ConvergenceRow {
    n: usize,
    iteration: u64,
    seed: u64,
    avg_possessed: f64,
}

fn cmd_convergence(
    common: CommonOpts,
    n_list: &str,
    seeds: u64,
    seed: Option<u64>,
    slots: u32,
) -> Result<()> {
    let sizes: Vec<usize> = n_list
        .split(',')
        .map(|v| v.trim().parse::<usize>().with_context(|| format!("network size `{v}`")))
        .collect::<Result<_>>()?;
    let raw = load_raw(&common)?;
    let base_seed = seed.unwrap_or(finalize(&raw)?.seed);

    let mut points = Vec::new();
    for &n in &sizes {
        let mut raw_pt = raw.clone();
        raw_pt.set("n_obus", &n.to_string(), 0).unwrap();
        let cfg = raw_pt
            .finalize()
            .with_context(|| format!("network size {n} yields an invalid configuration"))?;
        for s in 0..seeds {
            points.push((n, base_seed + s, cfg.clone()));
        }
    }

    let groups: Vec<Vec<ConvergenceRow>> = points
        .par_iter()
        .map(|(n, run_seed, cfg)| {
            let series = run_scenario(cfg, Approach::Cooperative, *run_seed, slots)?;
            // Cumulative formation iterations against the average packets
            // held after each slot; iteration 0 is the pre-formation state.
            let mut rows = vec![ConvergenceRow {
                n: *n,
                iteration: 0,
                seed: *run_seed,
                avg_possessed: 0.0,
            }];
            let mut cum = 0u64;
            for s in &series.slots {
                cum += s.formation_iters;
                rows.push(ConvergenceRow {
                    n: *n,
                    iteration: cum,
                    seed: *run_seed,
                    avg_possessed: s.total_possessed as f64 / *n as f64,
                });
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<ConvergenceRow> = groups.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.n, r.seed, r.iteration));

    let mut csv = String::from("n,iteration,seed,avg_possessed\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.n, r.iteration, r.seed, r.avg_possessed
        ));
    }
    let json = serde_json::to_string_pretty(&rows)? + "\n";
    emit(&common, csv, json)
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            common,
            approach,
            seed,
            slots,
            trace_fleet,
            trace_graph,
        } => cmd_run(common, &approach, seed, slots, trace_fleet, trace_graph),
        Command::Sweep {
            common,
            axis,
            range,
            approaches,
            seeds,
            seed,
            slots,
        } => cmd_sweep(common, &axis, &range, &approaches, seeds, seed, slots),
        Command::Convergence {
            common,
            n_list,
            seeds,
            seed,
            slots,
        } => cmd_convergence(common, &n_list, seeds, seed, slots),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
