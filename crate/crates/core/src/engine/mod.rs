//! Frame loop, replications, sweeps and stability search.

mod config;
mod experiment;
mod sim;
mod stability;

pub use config::{PhyConfig, RateRule, SimConfig, StabilityThresholds};
pub use experiment::{
    aggregate, apply_axis, max_stable_rate, replicate, replicate_runs, sweep, ArrivalFamily, Replicated,
    StableRateBracket, Summary, SweepAxis, SweepRow, SweepValue, METRICS,
};
pub use sim::{
    infinite_backlog_run, run, run_with, ConnectivityStats, DelayStats, FrameObserver, NoObserver, RoleCounts,
    RunMetrics, ServiceStats, Traffic,
};
pub use stability::{assess_stability, StabilityVerdict, Trajectory};
