#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use relaynet::engine::{apply_axis, max_stable_rate, replicate, SweepAxis, SweepValue};
use relaynet::protocols::ProtocolKind;

mod config;
mod output;
mod validate;

use config::{parse_family, parse_protocols, parse_values, resolve_table, Experiment, SearchSpec, PRESETS};
use output::{gnuplot, long_csv, num, rows_for, wide_csv, write, Row};

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    /// Bad flags, unreadable or invalid configuration.
    pub fn usage(msg: String) -> Self {
        Self { code: 2, msg }
    }

    /// The built-in validation suite found a mismatch.
    pub fn validation(msg: String) -> Self {
        Self { code: 1, msg }
    }

    pub fn runtime(msg: String) -> Self {
        Self { code: 2, msg }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<relaynet::Error> for Failure {
    fn from(e: relaynet::Error) -> Self {
        Failure::runtime(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "obdwf", version, about = "Buffered mobile-relay network simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment file (TOML) layered over the defaults and any preset.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in experiment, see `obdwf presets`.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Base seed; replication i uses seed + i.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Directory receiving the result files.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Override one setting, e.g. `--set network.relays=60`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Replicate the configured setting once per protocol.
    Run,
    /// Replicate over a list of values of one parameter.
    Sweep {
        /// K, q, lambda_s, gamma, M or protocol.
        #[arg(long)]
        axis: Option<String>,
        /// `start:stop:step` or a comma list.
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        /// `all` or a comma list such as `obdwf,ddf,afsc:5`.
        #[arg(long)]
        protocols: Option<String>,
        /// Metric shown in the wide table and plot.
        #[arg(long)]
        metric: Option<String>,
    },
    /// Bisect the largest stable arrival rate per protocol.
    Stability {
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long)]
        resolution: Option<f64>,
        /// `batch` or `bernoulli`.
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        protocols: Option<String>,
    },
    /// Run the built-in theory-versus-simulation checks.
    Validate {
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// List the built-in presets.
    Presets,
}

fn load(common: &Common) -> Result<Experiment, Failure> {
    let mut sets = common.set.clone();
    if let Some(seed) = common.seed {
        sets.push(format!("run.seed={seed}"));
    }
    let table = resolve_table(common.preset.as_deref(), common.config.as_deref(), &sets)?;
    Experiment::from_table(table)
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn cmd_run(common: &Common) -> Result<(), Failure> {
    let e = load(common)?;
    output::prepare_dir(&common.out)?;
    let results = e
        .protocols
        .par_iter()
        .map(|&p| replicate(&e.config_for(p), e.traffic, e.reps))
        .collect::<Result<Vec<_>, _>>()?;
    let value = e.sim.relays.to_string();
    let rows: Vec<Row> = results.iter().flat_map(|r| rows_for("K", &value, r, e.sim.phy.tau)).collect();
    if let Some(d) = &e.description {
        println!("{d}");
    }
    println!("K = {}, {} replications from seed {}", e.sim.relays, e.reps, e.sim.seed);
    println!("{:<8} {:>16} {:>14} {:>12} {:>8}", "protocol", "throughput b/s", "delay frames", "delay s", "stable");
    for r in &results {
        let d = r.get("delay_mean").mean;
        println!(
            "{:<8} {:>16.6e} {:>14.4} {:>12.6} {:>8.3}",
            r.protocol.name(),
            r.get("throughput").mean,
            d,
            d * e.sim.phy.tau,
            r.get("stable_fraction").mean
        );
        if r.unstable_runs > 0 {
            eprintln!("warning: {}: {} of {} replications unstable", r.protocol.name(), r.unstable_runs, r.n_reps);
        }
    }
    announce(&write(&common.out, "run.csv", &long_csv(&rows))?);
    announce(&write(&common.out, "run_wide.csv", &wide_csv(&rows, "K", "throughput"))?);
    Ok(())
}

fn cmd_sweep(
    common: &Common,
    axis: Option<&str>,
    values: Option<&str>,
    reps: Option<usize>,
    protocols: Option<&str>,
    metric: Option<&str>,
) -> Result<(), Failure> {
    let mut e = load(common)?;
    if let Some(r) = reps {
        e.reps = r;
    }
    if let Some(p) = protocols {
        e.protocols = parse_protocols(p)?;
    }
    let axis = match axis {
        Some(a) => SweepAxis::parse(a).map_err(|err| Failure::usage(err.to_string()))?,
        None => e.sweep.as_ref().map(|s| s.axis).ok_or_else(|| Failure::usage("no sweep axis given".into()))?,
    };
    let values = match values {
        Some(v) => parse_values(axis, v)?,
        None => match &e.sweep {
            Some(s) if s.axis == axis => s.values.clone(),
            _ => return Err(Failure::usage("no sweep values given".into())),
        },
    };
    let metric = metric
        .map(str::to_string)
        .or_else(|| e.sweep.as_ref().map(|s| s.metric.clone()))
        .unwrap_or_else(|| "throughput".into());
    if !output::METRIC_NAMES.contains(&metric.as_str()) {
        return Err(Failure::usage(format!("unknown metric {metric:?}")));
    }
    e.validate()?;
    output::prepare_dir(&common.out)?;

    // Protocol sweeps vary the protocol itself; otherwise every protocol is
    // run at every value.
    let protocols: Vec<ProtocolKind> =
        if axis == SweepAxis::Protocol { vec![e.sim.protocol] } else { e.protocols.clone() };
    let mut jobs = Vec::new();
    for &v in &values {
        for &p in &protocols {
            let c = apply_axis(&e.config_for(p), axis, v)?;
            jobs.push((v, c));
        }
    }
    let results = jobs
        .par_iter()
        .map(|(v, c)| replicate(c, e.traffic, e.reps).map(|r| (*v, c.phy.tau, r)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    for (v, tau, r) in &results {
        rows.extend(rows_for(axis.name(), &v.to_string(), r, *tau));
        if r.unstable_runs > 0 {
            eprintln!(
                "warning: {} at {} = {v}: {} of {} replications unstable",
                r.protocol.name(),
                axis.name(),
                r.unstable_runs,
                r.n_reps
            );
        }
    }
    let wide = wide_csv(&rows, axis.name(), &metric);
    print!("{wide}");
    announce(&write(&common.out, "sweep.csv", &long_csv(&rows))?);
    announce(&write(&common.out, "sweep_wide.csv", &wide)?);
    let n_cols = wide.lines().next().map(|h| h.split(',').count() - 1).unwrap_or(0);
    announce(&write(&common.out, "sweep.gp", &gnuplot("sweep_wide.csv", axis.name(), &metric, n_cols))?);
    Ok(())
}

fn cmd_stability(
    common: &Common,
    lo: Option<f64>,
    hi: Option<f64>,
    resolution: Option<f64>,
    family: Option<&str>,
    protocols: Option<&str>,
) -> Result<(), Failure> {
    let mut e = load(common)?;
    if let Some(p) = protocols {
        e.protocols = parse_protocols(p)?;
    }
    let defaults = e.search.unwrap_or(SearchSpec {
        family: relaynet::engine::ArrivalFamily::infer(&e.sim.arrivals),
        lo: 0.001,
        hi: 1.0,
        resolution: 0.01,
    });
    let search = SearchSpec {
        family: match family {
            Some(f) => parse_family(
                f,
                match defaults.family {
                    relaynet::engine::ArrivalFamily::Batch { size } => size,
                    relaynet::engine::ArrivalFamily::Bernoulli => 15,
                },
            )?,
            None => defaults.family,
        },
        lo: lo.unwrap_or(defaults.lo),
        hi: hi.unwrap_or(defaults.hi),
        resolution: resolution.unwrap_or(defaults.resolution),
    };
    if !(search.lo > 0.0 && search.lo < search.hi) {
        return Err(Failure::usage(format!(
            "rate bounds need 0 < lo < hi, got lo = {}, hi = {}",
            search.lo, search.hi
        )));
    }
    if !(search.resolution > 0.0) {
        return Err(Failure::usage(format!("resolution must be positive, got {}", search.resolution)));
    }
    if let relaynet::engine::ArrivalFamily::Bernoulli = search.family {
        if search.hi > 1.0 {
            return Err(Failure::usage("Bernoulli arrival rates cannot exceed 1".into()));
        }
    }
    output::prepare_dir(&common.out)?;

    let (axis, values) = match &e.sweep {
        Some(s) if s.axis != SweepAxis::Protocol => (s.axis, s.values.clone()),
        _ => (SweepAxis::K, vec![SweepValue::Num(e.sim.relays as f64)]),
    };
    let mut jobs = Vec::new();
    for &v in &values {
        for &p in &e.protocols {
            jobs.push((v, p, apply_axis(&e.config_for(p), axis, v)?));
        }
    }
    let results = jobs
        .par_iter()
        .map(|(v, p, c)| {
            max_stable_rate(c, search.family, search.lo, search.hi, search.resolution).map(|b| (*v, *p, c.seed, b))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut csv = String::from("axis,value,protocol,lambda_stable,lambda_unstable,evaluations,seed\n");
    println!("{:<10} {:<8} {:>12} {:>12}", axis.name(), "protocol", "stable", "unstable");
    for (v, p, seed, b) in &results {
        csv.push_str(&format!(
            "{},{v},{},{},{},{},{seed}\n",
            axis.name(),
            p.name(),
            num(b.lambda_stable),
            num(b.lambda_unstable),
            b.evaluations.len()
        ));
        println!("{:<10} {:<8} {:>12.6} {:>12.6}", v.to_string(), p.name(), b.lambda_stable, b.lambda_unstable);
    }
    announce(&write(&common.out, "stability.csv", &csv)?);
    Ok(())
}

fn cmd_validate(common: &Common, fault: Option<&str>) -> Result<(), Failure> {
    let fault = fault.map(validate::Fault::parse).transpose()?;
    output::prepare_dir(&common.out)?;
    let checks = validate::run_suite(common.seed.unwrap_or(1), fault);
    print!("{}", validate::summary(&checks));
    announce(&write(&common.out, "validate.csv", &validate::report_csv(&checks))?);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::validation(format!("failed checks: {}", failed.join(", "))))
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.common.jobs {
        if n == 0 {
            return Err(Failure::usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::runtime(format!("cannot start worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Run => cmd_run(&cli.common),
        Command::Sweep { axis, values, reps, protocols, metric } => {
            cmd_sweep(&cli.common, axis.as_deref(), values.as_deref(), *reps, protocols.as_deref(), metric.as_deref())
        }
        Command::Stability { lo, hi, resolution, family, protocols } => {
            cmd_stability(&cli.common, *lo, *hi, *resolution, family.as_deref(), protocols.as_deref())
        }
        Command::Validate { inject_fault } => cmd_validate(&cli.common, inject_fault.as_deref()),
        Command::Presets => {
            for (name, text) in PRESETS {
                let about = text.lines().next().unwrap_or("").trim_start_matches('#').trim();
                println!("{name:<6} {about}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
