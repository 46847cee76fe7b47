use serde::{Deserialize, Serialize};

use super::StabilityThresholds;
use crate::analysis::linear_fit;
use crate::{Error, Result};

/// Queue length sampled as block means over `stride` consecutive frames.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub stride: u64,
    pub samples: Vec<f64>,
}

impl Trajectory {
    pub fn new(stride: u64) -> Self {
        assert!(stride > 0);
        Self { stride, samples: Vec::new() }
    }

    /// One sample per frame.
    pub fn from_frames(samples: Vec<f64>) -> Self {
        Self { stride: 1, samples }
    }

    pub fn frames(&self) -> u64 {
        self.samples.len() as u64 * self.stride
    }

    /// Mean over samples whose block starts at or after frame `from`.
    pub fn mean_from(&self, from: u64) -> f64 {
        let s = &self.samples[self.first_sample(from).min(self.samples.len())..];
        if s.is_empty() {
            return f64::NAN;
        }
        s.iter().sum::<f64>() / s.len() as f64
    }

    fn first_sample(&self, frame: u64) -> usize {
        frame.div_ceil(self.stride) as usize
    }
}

/// Accumulates per-frame values into a [`Trajectory`].
#[derive(Clone, Debug)]
pub(crate) struct TrajectoryRecorder {
    traj: Trajectory,
    acc: f64,
    count: u64,
}

impl TrajectoryRecorder {
    pub fn new(stride: u64) -> Self {
        Self { traj: Trajectory::new(stride), acc: 0.0, count: 0 }
    }

    pub fn push(&mut self, v: f64) {
        self.acc += v;
        self.count += 1;
        if self.count == self.traj.stride {
            self.traj.samples.push(self.acc / self.count as f64);
            self.acc = 0.0;
            self.count = 0;
        }
    }

    /// Drops an incomplete final block.
    pub fn finish(self) -> Trajectory {
        self.traj
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// Least-squares drift over the post-warmup window, packets per frame.
    pub slope: f64,
    /// Mean over the final tenth of the window.
    pub tail_mean: f64,
    /// Mean over the whole post-warmup window.
    pub window_mean: f64,
}

/// Judges a queue trajectory stable when its post-warmup drift is below
/// `slope_eps` and its final-decile mean stays within `c_tail` times the
/// window mean.
pub fn assess_stability(traj: &Trajectory, warmup: u64, th: &StabilityThresholds) -> Result<StabilityVerdict> {
    let first = traj.first_sample(warmup);
    let n = traj.samples.len().saturating_sub(first);
    if n < 10 {
        return Err(Error::Domain(format!(
            "trajectory of {} frames leaves {n} samples after warmup {warmup}; need at least 10",
            traj.frames()
        )));
    }
    let window = &traj.samples[first..];
    let xs: Vec<f64> = (0..n).map(|i| ((first + i) as u64 * traj.stride) as f64).collect();
    let slope = linear_fit(&xs, window)?.slope;
    let window_mean = window.iter().sum::<f64>() / n as f64;
    let tail = &window[n - n / 10..];
    let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let stable = slope < th.slope_eps && tail_mean <= th.c_tail * window_mean;
    Ok(StabilityVerdict { stable, slope, tail_mean, window_mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_trajectory_is_stable() {
        let t = Trajectory::from_frames(vec![0.0; 1000]);
        let v = assess_stability(&t, 100, &StabilityThresholds::default()).unwrap();
        assert!(v.stable);
        assert_eq!(v.slope, 0.0);
    }

    #[test]
    fn linear_growth_is_unstable() {
        let t = Trajectory::from_frames((0..1000).map(|i| i as f64).collect());
        let v = assess_stability(&t, 100, &StabilityThresholds::default()).unwrap();
        assert!(!v.stable);
        assert!((v.slope - 1.0).abs() < 1e-9);
        // Same drift seen through decimated samples.
        let t = Trajectory { stride: 10, samples: (0..100).map(|i| (10 * i) as f64 + 4.5).collect() };
        let v = assess_stability(&t, 100, &StabilityThresholds::default()).unwrap();
        assert!((v.slope - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tail_spike_is_unstable() {
        let mut s = vec![1.0; 1000];
        for v in &mut s[950..] {
            *v = 100.0;
        }
        let t = Trajectory::from_frames(s);
        let th = StabilityThresholds { slope_eps: 1e9, c_tail: 3.0 };
        let v = assess_stability(&t, 0, &th).unwrap();
        assert!(!v.stable);
        assert!(v.tail_mean > 3.0 * v.window_mean);
    }

    #[test]
    fn short_trajectory_is_an_error() {
        let t = Trajectory::from_frames(vec![0.0; 50]);
        assert!(assess_stability(&t, 45, &StabilityThresholds::default()).is_err());
        assert!(assess_stability(&t, 100, &StabilityThresholds::default()).is_err());
    }

    #[test]
    fn recorder_block_means() {
        let mut r = TrajectoryRecorder::new(4);
        for i in 0..10 {
            r.push(i as f64);
        }
        let t = r.finish();
        assert_eq!(t.samples, vec![1.5, 5.5]);
        assert_eq!(t.frames(), 8);
    }
}
