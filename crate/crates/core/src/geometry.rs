//! Disk geometry, equal-area regions and relay mobility.
//!
//! The source sits at `(0, 0)` and the destination at `(2r, 0)`, the two ends
//! of a horizontal diameter of a disk of radius `r`. The disk is cut by
//! vertical lines into `M` strips of equal area, numbered `1..=M` from the
//! source side.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const BISECTION_X_TOL: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;
const AREA_REL_TOL: f64 = 1e-9;
/// Points this far outside the boundary (relative to the radius) still count as inside.
const INSIDE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Area of the part of a disk (center `cx`, radius `r`) lying left of the vertical line at `x`.
pub fn segment_area_left_of(x: f64, cx: f64, r: f64) -> f64 {
    let u = (cx - x).clamp(-r, r);
    r * r * (u / r).acos() - u * (r * r - u * u).max(0.0).sqrt()
}

/// Strip boundaries along the source–destination diameter, from the source
/// x-coordinate (0) to the destination x-coordinate (2r).
pub fn compute_region_boundaries(radius: f64, regions: usize) -> Result<Vec<f64>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!("radius must be positive, got {radius}")));
    }
    if regions == 0 {
        return Err(Error::Domain("at least one region is required".into()));
    }
    let total = PI * radius * radius;
    let mut bounds = Vec::with_capacity(regions + 1);
    bounds.push(0.0);
    for i in 1..regions {
        let target = total * i as f64 / regions as f64;
        let (mut lo, mut hi) = (0.0, 2.0 * radius);
        let mut iter = 0;
        while hi - lo > BISECTION_X_TOL {
            iter += 1;
            if iter > BISECTION_MAX_ITER {
                return Err(Error::Numerical(format!("region boundary {i} did not converge (bracket [{lo}, {hi}])")));
            }
            let mid = 0.5 * (lo + hi);
            if segment_area_left_of(mid, radius, radius) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        let area = segment_area_left_of(x, radius, radius);
        if ((area - target) / total).abs() > AREA_REL_TOL {
            return Err(Error::Numerical(format!("region boundary {i}: area {area} misses target {target}")));
        }
        bounds.push(x);
    }
    bounds.push(2.0 * radius);
    Ok(bounds)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiskGeometry {
    radius: f64,
    center: Point,
    source: Point,
    destination: Point,
    boundaries: Vec<f64>,
}

impl DiskGeometry {
    pub fn new(radius: f64, regions: usize) -> Result<Self> {
        let boundaries = compute_region_boundaries(radius, regions)?;
        Ok(Self {
            radius,
            center: Point::new(radius, 0.0),
            source: Point::new(0.0, 0.0),
            destination: Point::new(2.0 * radius, 0.0),
            boundaries,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn center(&self) -> Point {
        self.center
    }
    pub fn source(&self) -> Point {
        self.source
    }
    pub fn destination(&self) -> Point {
        self.destination
    }
    pub fn num_regions(&self) -> usize {
        self.boundaries.len() - 1
    }
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn contains(&self, p: Point) -> bool {
        p.distance(self.center) <= self.radius * (1.0 + INSIDE_TOL)
    }

    /// Region index in `1..=M`. A point exactly on an interior boundary
    /// belongs to the region on its right; the destination end is inclusive.
    pub fn region_of(&self, p: Point) -> Result<usize> {
        if !self.contains(p) {
            return Err(Error::Domain(format!("point ({}, {}) lies outside the disk", p.x, p.y)));
        }
        let m = self.num_regions();
        // Number of interior boundaries <= x.
        let idx = self.boundaries[1..m].partition_point(|&b| b <= p.x);
        Ok(idx + 1)
    }

    pub fn sample_uniform_disk<R: Rng + ?Sized>(&self, rng: &mut R) -> RelayPosition {
        let rho = self.radius * rng.gen::<f64>().sqrt();
        let theta = 2.0 * PI * rng.gen::<f64>();
        let point = Point::new(self.center.x + rho * theta.cos(), rho * theta.sin());
        self.position_at(point)
    }

    /// Uniform point in strip `region`, by rejection from the strip's bounding box.
    pub fn sample_uniform_in_region<R: Rng + ?Sized>(&self, region: usize, rng: &mut R) -> RelayPosition {
        assert!((1..=self.num_regions()).contains(&region), "region {region} outside 1..={}", self.num_regions());
        let (x0, x1) = (self.boundaries[region - 1], self.boundaries[region]);
        let r2 = self.radius * self.radius;
        let nearest = if x0 <= self.center.x && self.center.x <= x1 {
            0.0
        } else {
            (x0 - self.center.x).abs().min((x1 - self.center.x).abs())
        };
        let half_height = (r2 - nearest * nearest).max(0.0).sqrt();
        loop {
            let x = x0 + (x1 - x0) * rng.gen::<f64>();
            let y = half_height * (2.0 * rng.gen::<f64>() - 1.0);
            let dx = x - self.center.x;
            if dx * dx + y * y <= r2 && x < x1 {
                return RelayPosition { region, point: Point::new(x, y) };
            }
        }
    }

    fn position_at(&self, point: Point) -> RelayPosition {
        let region = self.region_of(point).expect("sampled point must lie inside the disk");
        RelayPosition { region, point }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelayPosition {
    pub region: usize,
    pub point: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum MobilityModel {
    /// Region-level random walk with transition probability `q`.
    RandomWalk { q: f64 },
    /// Continuous random waypoint on the disk.
    RandomWaypoint { speed_min: f64, speed_max: f64, pause_set: Vec<u32> },
}

impl MobilityModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            MobilityModel::RandomWalk { q } => {
                if !(*q > 0.0 && *q <= 0.5) {
                    return Err(Error::Config(format!("random walk q must lie in (0, 1/2], got {q}")));
                }
            }
            MobilityModel::RandomWaypoint { speed_min, speed_max, pause_set } => {
                if !(*speed_min >= 0.0 && speed_min <= speed_max && speed_max.is_finite()) {
                    return Err(Error::Config(format!(
                        "waypoint speeds need 0 <= min <= max, got [{speed_min}, {speed_max}]"
                    )));
                }
                if pause_set.is_empty() {
                    return Err(Error::Config("waypoint pause set is empty".into()));
                }
            }
        }
        Ok(())
    }
}

/// One step of the region random walk.
pub fn step_random_walk<R: Rng + ?Sized>(region: usize, q: f64, regions: usize, rng: &mut R) -> usize {
    debug_assert!((1..=regions).contains(&region));
    let u = rng.gen::<f64>();
    if regions == 1 {
        return region;
    }
    if region == 1 {
        if u < q {
            2
        } else {
            1
        }
    } else if region == regions {
        if u < q {
            regions - 1
        } else {
            regions
        }
    } else if u < q {
        region - 1
    } else if u < 2.0 * q {
        region + 1
    } else {
        region
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaypointState {
    pub point: Point,
    pub target: Point,
    /// Length units per frame.
    pub speed: f64,
    pub pause_remaining: u32,
}

impl WaypointState {
    pub fn start<R: Rng + ?Sized>(
        point: Point,
        geometry: &DiskGeometry,
        speed_min: f64,
        speed_max: f64,
        rng: &mut R,
    ) -> Self {
        let target = geometry.sample_uniform_disk(rng).point;
        let speed = uniform_speed(speed_min, speed_max, rng);
        Self { point, target, speed, pause_remaining: 0 }
    }
}

fn uniform_speed<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Advances one frame of random-waypoint motion. Returns `true` when the
/// relay arrived at its target during this frame.
pub fn step_waypoint<R: Rng + ?Sized>(
    state: &mut WaypointState,
    geometry: &DiskGeometry,
    speed_min: f64,
    speed_max: f64,
    pause_set: &[u32],
    rng: &mut R,
) -> bool {
    if state.pause_remaining > 0 {
        state.pause_remaining -= 1;
        return false;
    }
    let dx = state.target.x - state.point.x;
    let dy = state.target.y - state.point.y;
    let dist = dx.hypot(dy);
    if dist > state.speed {
        let f = state.speed / dist;
        state.point = Point::new(state.point.x + f * dx, state.point.y + f * dy);
        return false;
    }
    state.point = state.target;
    state.pause_remaining = pause_set[rng.gen_range(0..pause_set.len())];
    state.target = geometry.sample_uniform_disk(rng).point;
    state.speed = uniform_speed(speed_min, speed_max, rng);
    true
}
