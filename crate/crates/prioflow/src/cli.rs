//! Command-line shell: scenario runner, live service mode, the scale
//! calculator, and document validation. Log verbosity comes from the
//! `PRIOFLOW_LOG` environment variable.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::engine::{SimConfig, Simulation};
use crate::report::emit_report;
use crate::rse::{load_rse, Rse};
use crate::scale::{annual_volume, raw_rate, site_average_rate, InstrumentProfile};
use crate::scenario::{load_bundle, run_bundle};
use crate::server::Server;
use crate::topology::{load_topology, validate_topology, Topology};
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "prioflow",
    about = "Priority data-movement orchestration over a deterministic flow-level network simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Run a scenario file to completion and write report artifacts.
    Run(RunArgs),
    /// Serve the request API against a live simulation.
    Serve(ServeArgs),
    /// Instrument scale arithmetic: raw rate, annual volume, site averages.
    Scale(ScaleArgs),
    /// Validate topology and RSE documents without running anything.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Topology document.
    #[arg(long)]
    topology: PathBuf,
    /// Directory of RSE documents (*.json).
    #[arg(long)]
    rses: PathBuf,
    /// Virtual seconds per wall-clock second.
    #[arg(long, default_value_t = 1.0)]
    time_scale: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct ScaleArgs {
    /// Bytes per collision, in decimal megabytes.
    #[arg(long, default_value_t = 6.5)]
    event_size_mb: f64,
    /// Trigger rate in kHz.
    #[arg(long, default_value_t = 7.5)]
    rate_khz: f64,
    /// Instrument duty cycle in (0, 1].
    #[arg(long, default_value_t = 0.3)]
    duty: f64,
    /// Daily outbound volume in decimal petabytes.
    #[arg(long, default_value_t = 5.0)]
    daily_pb: f64,
    /// Archive share per site, e.g. FNAL=0.4 (repeatable).
    #[arg(long, value_parser = parse_share)]
    share: Vec<(String, f64)>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    topology: PathBuf,
    /// Directory of RSE documents (*.json).
    #[arg(long)]
    rses: Option<PathBuf>,
}

fn parse_share(raw: &str) -> std::result::Result<(String, f64), String> {
    let (site, share) = raw
        .split_once('=')
        .ok_or_else(|| format!("expected SITE=FRACTION, got {raw}"))?;
    let share: f64 = share.parse().map_err(|e| format!("bad fraction: {e}"))?;
    Ok((site.to_string(), share))
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn load_rse_dir(dir: &Path, topo: &Topology) -> Result<Vec<Rse>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir.display().to_string(), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|path| load_rse(&read_to_string(path)?, topo))
        .collect()
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let mut bundle = load_bundle(&args.scenario)?;
    if let Some(seed) = args.seed {
        bundle.scenario.seed = seed;
    }
    let report = run_bundle(&bundle)?;
    emit_report(&report, &args.out)?;
    println!(
        "ran scenario seed={} events={} completions={} failed_jobs={}",
        report.seed,
        report.dispatched_events,
        report.completions.len(),
        report.failed_jobs.len()
    );
    for (name, ok) in [
        ("cap-reserve", report.audits.cap_reserve_ok),
        ("subnet-unique", report.audits.subnet_unique_ok),
        ("rules-consistent", report.audits.rules_consistent_ok),
        ("conservation", report.audits.conservation_ok),
    ] {
        println!("audit {name}: {}", if ok { "ok" } else { "VIOLATED" });
    }
    println!("report written to {}", args.out.display());
    if report.passes(bundle.scenario.expect_failures) {
        Ok(0)
    } else {
        eprintln!("run failed audits or had unexpected job failures");
        Ok(2)
    }
}

fn cmd_serve(args: &ServeArgs) -> Result<i32> {
    let topo = load_topology(&read_to_string(&args.topology)?)?;
    let rses = load_rse_dir(&args.rses, &topo)?;
    let sim = Simulation::new(topo, rses, SimConfig::default(), args.seed)?;
    let server = Server::spawn(sim, args.port, args.time_scale)?;
    println!("listening on {}", server.addr());
    server.join();
    Ok(0)
}

fn cmd_scale(args: &ScaleArgs) -> Result<i32> {
    let shares: BTreeMap<String, f64> = args.share.iter().cloned().collect();
    let profile = InstrumentProfile {
        event_size_bytes: args.event_size_mb * 1e6,
        trigger_rate_hz: args.rate_khz * 1e3,
        duty_cycle: args.duty,
        archive_shares: shares,
    };
    let raw = raw_rate(&profile)?;
    println!("raw_rate_gb_per_s={}", raw / 1e9);
    println!("annual_volume_pb={}", annual_volume(&profile)? / 1e15);
    let daily = args.daily_pb * 1e15;
    for site in profile.archive_shares.keys() {
        let rate = site_average_rate(&profile, daily, site)?;
        println!(
            "site={site} avg_gb_per_s={} avg_gbps={}",
            rate.bytes_per_sec / 1e9,
            rate.gbps
        );
    }
    Ok(0)
}

fn cmd_validate(args: &ValidateArgs) -> Result<i32> {
    let topo = load_topology(&read_to_string(&args.topology)?)?;
    let rses = match &args.rses {
        Some(dir) => load_rse_dir(dir, &topo)?,
        None => Vec::new(),
    };
    let rse_sites: Vec<&str> = rses.iter().map(|r| r.site.as_str()).collect();
    let violations = validate_topology(&topo, &rse_sites);
    if violations.is_empty() {
        println!(
            "ok: {} sites, {} links, {} rses",
            topo.sites.len(),
            topo.links.len(),
            rses.len()
        );
        Ok(0)
    } else {
        for violation in &violations {
            eprintln!("violation: {violation}");
        }
        Ok(2)
    }
}

/// Entry point for the `prioflow` binary; returns the process exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PRIOFLOW_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        CliCommand::Run(args) => cmd_run(args),
        CliCommand::Serve(args) => cmd_serve(args),
        CliCommand::Scale(args) => cmd_scale(args),
        CliCommand::Validate(args) => cmd_validate(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}
