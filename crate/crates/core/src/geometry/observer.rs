//! Observer (own-ship) path construction.
//!
//! The observer moves at constant speed; its turn rate is a piecewise-constant
//! table smoothed by a C-infinity bump blend so the whole path is smooth. The
//! kinematics `(x', y', psi') = (v cos psi, v sin psi, omega(s))` are
//! integrated by fixed-step RK4 and cached on a fine grid; queries take one
//! partial RK4 step from the nearest cached state.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One leg of the turn-rate table, in physical seconds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
    /// rad/s; zero for uniform linear motion legs.
    pub turn_rate_rad_s: f64,
}

/// Declarative observer description; see [`build_observer_path`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSpec {
    /// km.
    pub position_km: [f64; 2],
    /// rad, from the x-axis.
    pub heading_rad: f64,
    /// km/s, constant along the path.
    pub speed_km_s: f64,
    /// Half-width of the smoothed transition around each segment boundary,
    /// in seconds.
    pub transition_half_width_s: f64,
    pub segments: Vec<Segment>,
    /// Total observation time in seconds.
    pub duration_s: f64,
}

/// Number of RK4 steps used for the cached integration.
const INTEGRATION_STEPS: usize = 4000;

/// Immutable observer path on unit time `t in [0, 1]`.
#[derive(Debug, Clone)]
pub struct ObserverPath {
    spec: ObserverSpec,
    boundaries: Vec<(f64, f64, f64)>, // (boundary s, rate before, rate after)
    first_rate: f64,
    /// Cached `(x, y, heading)` at `s_j = j * duration / INTEGRATION_STEPS`.
    cache: Vec<(f64, f64, f64)>,
    step: f64,
}

fn smooth_step(u: f64) -> f64 {
    // C-infinity monotone step from 0 at u<=0 to 1 at u>=1.
    fn bump(x: f64) -> f64 {
        if x > 0.0 {
            (-1.0 / x).exp()
        } else {
            0.0
        }
    }
    let a = bump(u);
    let b = bump(1.0 - u);
    a / (a + b)
}

/// Builds and integrates an observer path, checking the segment table tiles
/// `[0, duration]` without overlap and transitions do not collide.
pub fn build_observer_path(spec: ObserverSpec) -> Result<ObserverPath> {
    if spec.segments.is_empty() {
        return Err(Error::Config("observer needs at least one segment".into()));
    }
    if !(spec.duration_s.is_finite() && spec.duration_s > 0.0) {
        return Err(Error::Config("observer duration must be positive".into()));
    }
    if !(spec.speed_km_s.is_finite() && spec.speed_km_s > 0.0) {
        return Err(Error::Config("observer speed must be positive".into()));
    }
    if !(spec.transition_half_width_s >= 0.0) {
        return Err(Error::Config("transition half-width must be nonnegative".into()));
    }
    let tol = 1e-9 * spec.duration_s.max(1.0);
    if spec.segments[0].start_s.abs() > tol {
        return Err(Error::Config("first segment must start at 0".into()));
    }
    if (spec.segments.last().unwrap().end_s - spec.duration_s).abs() > tol {
        return Err(Error::Config("last segment must end at the duration".into()));
    }
    let mut boundaries = Vec::new();
    for w in spec.segments.windows(2) {
        if (w[0].end_s - w[1].start_s).abs() > tol {
            return Err(Error::Config(format!(
                "segments must tile [0, T]: gap or overlap between {} and {}",
                w[0].end_s, w[1].start_s
            )));
        }
        boundaries.push((w[0].end_s, w[0].turn_rate_rad_s, w[1].turn_rate_rad_s));
    }
    for s in &spec.segments {
        if s.end_s <= s.start_s {
            return Err(Error::Config("segment must have positive length".into()));
        }
    }
    let w = spec.transition_half_width_s;
    for pair in boundaries.windows(2) {
        if pair[1].0 - pair[0].0 < 2.0 * w {
            return Err(Error::Config("transition bands around segment boundaries overlap".into()));
        }
    }

    let mut path = ObserverPath {
        first_rate: spec.segments[0].turn_rate_rad_s,
        boundaries,
        cache: Vec::with_capacity(INTEGRATION_STEPS + 1),
        step: spec.duration_s / INTEGRATION_STEPS as f64,
        spec,
    };
    path.integrate();
    Ok(path)
}

impl ObserverPath {
    /// Mollified turn rate at physical time `s`, rad/s.
    pub fn turn_rate(&self, s: f64) -> f64 {
        let w = self.spec.transition_half_width_s;
        let mut rate = self.first_rate;
        for &(b, r0, r1) in &self.boundaries {
            if w == 0.0 {
                if s >= b {
                    rate = r1;
                }
            } else {
                let u = (s - (b - w)) / (2.0 * w);
                rate = r0 + (r1 - r0) * smooth_step(u.clamp(0.0, 1.0));
            }
            if s < b + w {
                break;
            }
        }
        rate
    }

    fn rk4_step(&self, s: f64, state: (f64, f64, f64), h: f64) -> (f64, f64, f64) {
        let v = self.spec.speed_km_s;
        let deriv = |s: f64, st: (f64, f64, f64)| {
            (v * st.2.cos(), v * st.2.sin(), self.turn_rate(s))
        };
        let k1 = deriv(s, state);
        let mid1 = (state.0 + 0.5 * h * k1.0, state.1 + 0.5 * h * k1.1, state.2 + 0.5 * h * k1.2);
        let k2 = deriv(s + 0.5 * h, mid1);
        let mid2 = (state.0 + 0.5 * h * k2.0, state.1 + 0.5 * h * k2.1, state.2 + 0.5 * h * k2.2);
        let k3 = deriv(s + 0.5 * h, mid2);
        let end = (state.0 + h * k3.0, state.1 + h * k3.1, state.2 + h * k3.2);
        let k4 = deriv(s + h, end);
        (
            state.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            state.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            state.2 + h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
        )
    }

    fn integrate(&mut self) {
        let mut state = (
            self.spec.position_km[0],
            self.spec.position_km[1],
            self.spec.heading_rad,
        );
        self.cache.push(state);
        for j in 0..INTEGRATION_STEPS {
            let s = j as f64 * self.step;
            state = self.rk4_step(s, state, self.step);
            self.cache.push(state);
        }
    }

    /// Observer position `O(t)` in km at unit time `t in [0, 1]`.
    pub fn position(&self, t: f64) -> Vector2<f64> {
        let t = t.clamp(0.0, 1.0);
        let s = t * self.spec.duration_s;
        let j = ((s / self.step) as usize).min(INTEGRATION_STEPS);
        let base = self.cache[j];
        let rem = s - j as f64 * self.step;
        if rem <= 0.0 {
            return Vector2::new(base.0, base.1);
        }
        let st = self.rk4_step(j as f64 * self.step, base, rem);
        Vector2::new(st.0, st.1)
    }

    /// Heading at unit time `t`, rad.
    pub fn heading(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        let s = t * self.spec.duration_s;
        let j = ((s / self.step) as usize).min(INTEGRATION_STEPS);
        let base = self.cache[j];
        let rem = s - j as f64 * self.step;
        if rem <= 0.0 {
            return base.2;
        }
        self.rk4_step(j as f64 * self.step, base, rem).2
    }

    pub fn duration(&self) -> f64 {
        self.spec.duration_s
    }

    pub fn speed(&self) -> f64 {
        self.spec.speed_km_s
    }

    pub fn spec(&self) -> &ObserverSpec {
        &self.spec
    }

    /// Polyline length of the cached path, km.
    pub fn cached_length(&self) -> f64 {
        self.cache
            .windows(2)
            .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
            .sum()
    }
}

/// The default maneuvering observer used throughout the tests: constant speed
/// 0.25 km/s over 20 s, turn rates +0.2, 0, -0.22, 0 rad/s with 1 s smooth
/// transitions.
pub fn default_maneuvering_spec() -> ObserverSpec {
    ObserverSpec {
        position_km: [-1.0, -4.0],
        heading_rad: 0.8,
        speed_km_s: 0.25,
        transition_half_width_s: 0.5,
        segments: vec![
            Segment { start_s: 0.0, end_s: 6.5, turn_rate_rad_s: 0.2 },
            Segment { start_s: 6.5, end_s: 10.5, turn_rate_rad_s: 0.0 },
            Segment { start_s: 10.5, end_s: 14.5, turn_rate_rad_s: -0.22 },
            Segment { start_s: 14.5, end_s: 20.0, turn_rate_rad_s: 0.0 },
        ],
        duration_s: 20.0,
    }
}
