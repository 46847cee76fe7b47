use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use relaynet::engine::{Replicated, Summary, METRICS};

use crate::Failure;

pub const HEADER: &str = "axis,value,protocol,metric,mean,ci_low,ci_high,n_reps,seed_base";

/// Engine metrics plus the mean delay in seconds.
pub const METRIC_NAMES: [&str; 12] = [
    METRICS[0],
    METRICS[1],
    METRICS[2],
    METRICS[3],
    METRICS[4],
    METRICS[5],
    METRICS[6],
    METRICS[7],
    METRICS[8],
    METRICS[9],
    "delay_mean_s",
    "unstable_runs",
];

/// Fifteen significant digits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.14e}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub axis: String,
    pub value: String,
    pub protocol: String,
    pub metric: String,
    pub summary: Summary,
    pub n_reps: usize,
    pub seed_base: u64,
}

/// One row per metric of a replicated result; `tau` converts frames to seconds.
pub fn rows_for(axis: &str, value: &str, r: &Replicated, tau: f64) -> Vec<Row> {
    let row = |metric: &str, summary: Summary| Row {
        axis: axis.into(),
        value: value.into(),
        protocol: r.protocol.name().into(),
        metric: metric.into(),
        summary,
        n_reps: r.n_reps,
        seed_base: r.seed_base,
    };
    let mut rows: Vec<Row> = METRICS.iter().map(|m| row(m, r.get(m))).collect();
    let d = r.get("delay_mean");
    rows.push(row(
        "delay_mean_s",
        Summary { mean: d.mean * tau, ci_low: d.ci_low * tau, ci_high: d.ci_high * tau, n: d.n },
    ));
    let unstable = r.unstable_runs as f64;
    rows.push(row("unstable_runs", Summary { mean: unstable, ci_low: unstable, ci_high: unstable, n: r.n_reps }));
    rows
}

pub fn long_csv(rows: &[Row]) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.axis,
            r.value,
            r.protocol,
            r.metric,
            num(r.summary.mean),
            num(r.summary.ci_low),
            num(r.summary.ci_high),
            r.n_reps,
            r.seed_base
        );
    }
    s
}

/// Axis values down, protocols across, means of `metric` in the cells.
pub fn wide_csv(rows: &[Row], axis: &str, metric: &str) -> String {
    let mut values: Vec<&str> = Vec::new();
    let mut protocols: Vec<&str> = Vec::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        if !values.contains(&r.value.as_str()) {
            values.push(&r.value);
        }
        if !protocols.contains(&r.protocol.as_str()) {
            protocols.push(&r.protocol);
        }
    }
    let mut s = format!("{axis},{}\n", protocols.join(","));
    for v in &values {
        s.push_str(v);
        for p in &protocols {
            let cell = rows
                .iter()
                .find(|r| r.metric == metric && r.value == *v && r.protocol == *p)
                .map(|r| num(r.summary.mean))
                .unwrap_or_default();
            s.push(',');
            s.push_str(&cell);
        }
        s.push('\n');
    }
    s
}

/// Gnuplot commands plotting every protocol column of a wide CSV.
pub fn gnuplot(data_file: &str, axis: &str, metric: &str, protocols: usize) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel '{axis}'\n\
         set ylabel '{metric}'\n\
         set grid\n\
         set terminal pngcairo size 900,600\n\
         set output '{stem}.png'\n\
         plot for [i=2:{last}] '{data_file}' using 1:i with linespoints\n",
        stem = data_file.trim_end_matches(".csv"),
        last = protocols + 1,
    )
}

/// Creates `dir` and checks that it accepts files.
pub fn prepare_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::usage(format!("cannot create output directory {}: {e}", dir.display())))?;
    let probe = dir.join(".write-test");
    fs::write(&probe, b"")
        .map_err(|e| Failure::usage(format!("output directory {} is not writable: {e}", dir.display())))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}
