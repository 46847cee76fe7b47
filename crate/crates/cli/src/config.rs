//! Experiment files: TOML sections layered over the built-in defaults, then
//! `--set section.key=value` overrides.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use toml::{Table, Value};

use relaynet::channel::FadingModel;
use relaynet::engine::{ArrivalFamily, PhyConfig, SimConfig, StabilityThresholds, SweepAxis, SweepValue, Traffic};
use relaynet::geometry::MobilityModel;
use relaynet::protocols::ProtocolKind;
use relaynet::traffic::ArrivalDistribution;

use crate::Failure;

const BASE: &str = include_str!("../presets/base.toml");

pub const PRESETS: [(&str, &str); 8] = [
    ("fig3a", include_str!("../presets/fig3a.toml")),
    ("fig3b", include_str!("../presets/fig3b.toml")),
    ("fig4a", include_str!("../presets/fig4a.toml")),
    ("fig4b", include_str!("../presets/fig4b.toml")),
    ("fig5a", include_str!("../presets/fig5a.toml")),
    ("fig5b", include_str!("../presets/fig5b.toml")),
    ("fig6", include_str!("../presets/fig6.toml")),
    ("fig7", include_str!("../presets/fig7.toml")),
];

/// Keys that select an enum variant; a table carrying one replaces the
/// default wholesale instead of being merged field by field.
const TAGS: [&str; 4] = ["model", "kind", "rule", "family"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    #[serde(default)]
    description: Option<String>,
    network: Network,
    mobility: MobilityModel,
    phy: PhyConfig,
    fading: FadingModel,
    traffic: TrafficSection,
    protocols: Protocols,
    run: RunSection,
    stability: StabilityThresholds,
    #[serde(default)]
    sweep: Option<SweepSection>,
    #[serde(default)]
    search: Option<SearchSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Network {
    relays: usize,
    radius: f64,
    regions: usize,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TrafficMode {
    Arrivals,
    InfiniteBacklog,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrafficSection {
    mode: TrafficMode,
    arrivals: ArrivalDistribution,
    #[serde(default)]
    source_capacity: Option<usize>,
    #[serde(default)]
    relay_capacity: Option<usize>,
    #[serde(default)]
    packet_bits: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Protocols {
    names: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    horizon: u64,
    warmup: u64,
    seed: u64,
    reps: usize,
    direct_link: bool,
    resample_on_stay: bool,
    track_connectivity: bool,
    trajectory_stride: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    axis: String,
    values: Value,
    #[serde(default = "default_metric")]
    metric: String,
}

fn default_metric() -> String {
    "throughput".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchSection {
    family: String,
    #[serde(default = "default_batch")]
    batch_size: u32,
    lo: f64,
    hi: f64,
    resolution: f64,
}

fn default_batch() -> u32 {
    15
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<SweepValue>,
    pub metric: String,
}

#[derive(Clone, Copy, Debug)]
pub struct SearchSpec {
    pub family: ArrivalFamily,
    pub lo: f64,
    pub hi: f64,
    pub resolution: f64,
}

/// A fully resolved and validated experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub description: Option<String>,
    pub sim: SimConfig,
    pub traffic: Traffic,
    pub protocols: Vec<ProtocolKind>,
    pub reps: usize,
    pub sweep: Option<SweepSpec>,
    pub search: Option<SearchSpec>,
}

fn parse_toml(text: &str, origin: &str) -> Result<Table, Failure> {
    text.parse::<Table>().map_err(|e| Failure::usage(format!("{origin}: {e}")))
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) if !TAGS.iter().any(|t| o.contains_key(*t)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies one `section.key=value` override.
fn apply_set(table: &mut Table, assignment: &str) -> Result<(), Failure> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::usage(format!("--set expects section.key=value, got {assignment:?}")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.len() < 2 || keys.iter().any(|k| k.is_empty()) {
        return Err(Failure::usage(format!("--set key must look like section.key, got {path:?}")));
    }
    let mut t = table;
    for k in &keys[..keys.len() - 1] {
        let entry = t.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        t = entry.as_table_mut().ok_or_else(|| Failure::usage(format!("--set {path}: {k} is not a section")))?;
    }
    t.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

pub fn preset_text(name: &str) -> Result<&'static str, Failure> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        Failure::usage(format!("unknown preset {name:?}; available: {}", names.join(", ")))
    })
}

/// Layers defaults, preset, config file and overrides into one table.
pub fn resolve_table(preset: Option<&str>, config: Option<&Path>, sets: &[String]) -> Result<Table, Failure> {
    let mut table = parse_toml(BASE, "built-in defaults")?;
    if let Some(name) = preset {
        merge(&mut table, parse_toml(preset_text(name)?, &format!("preset {name}"))?);
    }
    if let Some(path) = config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config file {}: {e}", path.display())))?;
        merge(&mut table, parse_toml(&text, &path.display().to_string())?);
    }
    for s in sets {
        apply_set(&mut table, s)?;
    }
    Ok(table)
}

/// Parses `a:b:step` (inclusive) or a comma-separated list.
pub fn parse_values(axis: SweepAxis, spec: &str) -> Result<Vec<SweepValue>, Failure> {
    let bad = |why: String| Failure::usage(format!("sweep values {spec:?}: {why}"));
    if axis == SweepAxis::Protocol {
        return parse_protocols(spec).map(|ps| ps.into_iter().map(SweepValue::Protocol).collect());
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("{s:?} is not a number ({e})")));
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(bad("a range needs start <= stop and a positive step".into()));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            // Rounding keeps 0.1:0.3:0.1 from producing 0.30000000000000004.
            (0..=n).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12).collect()
        }
        [_] => spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad("expected start:stop:step or a comma list".into())),
    };
    if values.is_empty() {
        return Err(bad("no values".into()));
    }
    Ok(values.into_iter().map(SweepValue::Num).collect())
}

fn values_from_toml(axis: SweepAxis, v: &Value) -> Result<Vec<SweepValue>, Failure> {
    match v {
        Value::String(s) => parse_values(axis, s),
        Value::Array(items) => {
            let parts: Vec<String> = items
                .iter()
                .map(|i| match i {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            parse_values(axis, &parts.join(","))
        }
        Value::Integer(_) | Value::Float(_) => parse_values(axis, &v.to_string()),
        _ => Err(Failure::usage(format!("sweep.values has unsupported type: {v}"))),
    }
}

/// `all` or a comma list such as `obdwf,ddf,afsc:3`.
pub fn parse_protocols(spec: &str) -> Result<Vec<ProtocolKind>, Failure> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(ProtocolKind::all(5, 5).to_vec());
    }
    let list = spec
        .split(',')
        .map(|s| ProtocolKind::parse(s.trim()).map_err(|e| Failure::usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if list.is_empty() {
        return Err(Failure::usage("no protocols selected".into()));
    }
    Ok(list)
}

pub fn parse_family(name: &str, batch_size: u32) -> Result<ArrivalFamily, Failure> {
    match name.trim().to_ascii_lowercase().as_str() {
        "bernoulli" => Ok(ArrivalFamily::Bernoulli),
        "batch" => Ok(ArrivalFamily::Batch { size: batch_size }),
        other => Err(Failure::usage(format!("unknown arrival family {other:?}; use batch or bernoulli"))),
    }
}

impl Experiment {
    pub fn from_table(table: Table) -> Result<Self, Failure> {
        let f: File = table.try_into().map_err(|e: toml::de::Error| Failure::usage(format!("config: {e}")))?;
        let sim = SimConfig {
            relays: f.network.relays,
            radius: f.network.radius,
            regions: f.network.regions,
            mobility: f.mobility,
            phy: f.phy,
            fading: f.fading,
            arrivals: f.traffic.arrivals,
            protocol: ProtocolKind::Obdwf,
            source_capacity: f.traffic.source_capacity,
            relay_capacity: f.traffic.relay_capacity,
            horizon: f.run.horizon,
            warmup: f.run.warmup,
            seed: f.run.seed,
            packet_bits: f.traffic.packet_bits,
            direct_link: f.run.direct_link,
            resample_on_stay: f.run.resample_on_stay,
            track_connectivity: f.run.track_connectivity,
            trajectory_stride: f.run.trajectory_stride,
            stability: f.stability,
        };
        let protocols = parse_protocols(&f.protocols.names)?;
        let sweep = f
            .sweep
            .map(|s| -> Result<SweepSpec, Failure> {
                let axis = SweepAxis::parse(&s.axis).map_err(|e| Failure::usage(e.to_string()))?;
                Ok(SweepSpec { axis, values: values_from_toml(axis, &s.values)?, metric: s.metric })
            })
            .transpose()?;
        let search = f
            .search
            .map(|s| -> Result<SearchSpec, Failure> {
                Ok(SearchSpec {
                    family: parse_family(&s.family, s.batch_size)?,
                    lo: s.lo,
                    hi: s.hi,
                    resolution: s.resolution,
                })
            })
            .transpose()?;
        let e = Experiment {
            description: f.description,
            sim,
            traffic: match f.traffic.mode {
                TrafficMode::Arrivals => Traffic::Arrivals,
                TrafficMode::InfiniteBacklog => Traffic::InfiniteBacklog,
            },
            protocols,
            reps: f.run.reps,
            sweep,
            search,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.reps == 0 {
            return Err(Failure::usage("run.reps must be at least 1".into()));
        }
        for p in &self.protocols {
            let mut c = self.sim.clone();
            c.protocol = *p;
            c.validate().map_err(|e| Failure::usage(format!("config: {e}")))?;
        }
        if let Some(s) = &self.sweep {
            if !crate::output::METRIC_NAMES.contains(&s.metric.as_str()) {
                return Err(Failure::usage(format!("unknown sweep metric {:?}", s.metric)));
            }
        }
        Ok(())
    }

    /// The base configuration for one protocol.
    pub fn config_for(&self, protocol: ProtocolKind) -> SimConfig {
        let mut c = self.sim.clone();
        c.protocol = protocol;
        c
    }
}
