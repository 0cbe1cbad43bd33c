//! Scenario description, validity checks and dataset generation.
//!
//! A dataset holds observation times `t_k = k/n` and bearings
//! `Y_k = Psi(S_theta*(t_k) + eps_k, t_k) + V_k` wrapped to `(-pi, pi]`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector2;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{bearing_from, wrap_angle, ObserverPath, TrajectoryModel};
use crate::inference::info_ir;
use crate::noise::{stream, ObservationNoise, StreamRole, TrajectoryNoise};

/// Condition-number threshold above which a scenario is flagged as an
/// observability risk.
pub const OBSERVABILITY_COND_LIMIT: f64 = 1e8;

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: TrajectoryModel,
    /// True parameter, internal `(a_1..a_p, b_1..b_p)` ordering.
    pub theta_star: nalgebra::DVector<f64>,
    pub path: ObserverPath,
    pub traj_noise: TrajectoryNoise,
    pub obs_noise: ObservationNoise,
    pub n: usize,
    /// Prior lower bound on the target-observer range, km.
    pub r_min: f64,
}

impl Scenario {
    /// Canonical digest of all scenario parameters, used to tie datasets and
    /// summaries back to their source.
    pub fn fingerprint(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "p={};T={};theta=", self.model.p(), self.model.duration());
        for v in self.theta_star.iter() {
            let _ = write!(s, "{v:.17e},");
        }
        let spec = self.path.spec();
        let _ = write!(
            s,
            ";obs={:?},{},{},{}",
            spec.position_km, spec.heading_rad, spec.speed_km_s, spec.transition_half_width_s
        );
        for seg in &spec.segments {
            let _ = write!(s, ";{},{},{}", seg.start_s, seg.end_s, seg.turn_rate_rad_s);
        }
        let _ = write!(s, ";noise={:?};sigma={};n={};rmin={}", self.traj_noise, self.obs_noise.sigma, self.n, self.r_min);
        let hash = Sha256::digest(s.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Outcome of the scenario validity checks on a dense time grid.
#[derive(Debug, Clone)]
pub struct ValidityReport {
    pub min_range: f64,
    pub bearing_span: f64,
    pub range_ok: bool,
    pub span_ok: bool,
    /// cond(I_R(theta*)); `None` when the matrix could not be evaluated.
    pub cond_ir: Option<f64>,
    pub observability_risk: bool,
}

impl ValidityReport {
    pub fn pass(&self) -> bool {
        self.range_ok && self.span_ok
    }
}

/// Evaluates range and bearing-window constraints on a 10^4-point grid and
/// the conditioning of `I_R(theta*)`. Failed flags are reported, not thrown.
pub fn validate_scenario(scenario: &Scenario) -> ValidityReport {
    let grid = 10_000;
    let mut min_range = f64::INFINITY;
    let mut min_bearing = f64::INFINITY;
    let mut max_bearing = f64::NEG_INFINITY;
    let mut reference = None;
    for k in 0..=grid {
        let t = k as f64 / grid as f64;
        let target = match scenario.model.position(&scenario.theta_star, t) {
            Ok(x) => x,
            Err(_) => continue,
        };
        let obs = scenario.path.position(t);
        let range = (target - obs).norm();
        min_range = min_range.min(range);
        if let Ok(b) = bearing_from(target, obs, t) {
            // unwrap relative to the first bearing so the span is measured on
            // a continuous branch
            let reference = *reference.get_or_insert(b);
            let unwrapped = reference + crate::geometry::bearing_residual(b, reference);
            min_bearing = min_bearing.min(unwrapped);
            max_bearing = max_bearing.max(unwrapped);
        }
    }
    let bearing_span = if min_bearing.is_finite() {
        max_bearing - min_bearing
    } else {
        f64::INFINITY
    };
    let cond_ir = info_ir(&scenario.model, &scenario.theta_star, &scenario.path, 2000)
        .ok()
        .map(|m| {
            let sv = m.singular_values();
            sv.max() / sv.min().max(f64::MIN_POSITIVE)
        });
    ValidityReport {
        min_range,
        bearing_span,
        range_ok: min_range >= scenario.r_min,
        span_ok: bearing_span < std::f64::consts::PI,
        observability_risk: cond_ir.map_or(true, |c| c > OBSERVABILITY_COND_LIMIT),
        cond_ir,
    }
}

/// Simulated observations, optionally with the latent noisy positions for
/// diagnostics (estimators never read them).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Unit times `t_k = k/n`, k = 1..n.
    pub t: Vec<f64>,
    /// Bearings, rad, in `(-pi, pi]`.
    pub y: Vec<f64>,
    pub latent: Option<Vec<Vector2<f64>>>,
    pub seed: u64,
    pub fingerprint: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Draws one dataset from the model. Deterministic given `(scenario, seed)`.
pub fn simulate(scenario: &Scenario, seed: u64) -> Result<Dataset> {
    simulate_with_latent(scenario, seed, false)
}

pub fn simulate_with_latent(scenario: &Scenario, seed: u64, keep_latent: bool) -> Result<Dataset> {
    let n = scenario.n;
    if n == 0 {
        return Err(Error::Config("scenario needs n >= 1".into()));
    }
    if n < scenario.model.dim() {
        return Err(Error::Config(format!(
            "underdetermined scenario: n = {n} observations for m = {} parameters",
            scenario.model.dim()
        )));
    }
    scenario.traj_noise.validate()?;
    let mut traj_rng = stream(seed, 0, StreamRole::TrajectoryNoise);
    let mut obs_rng = stream(seed, 0, StreamRole::ObservationNoise);
    let eps = scenario.traj_noise.sample(n, &mut traj_rng)?;
    let v = scenario.obs_noise.sample(n, &mut obs_rng);
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut latent = keep_latent.then(|| Vec::with_capacity(n));
    for k in 1..=n {
        let tk = k as f64 / n as f64;
        let x = scenario.model.position(&scenario.theta_star, tk)? + eps[k - 1];
        let psi = bearing_from(x, scenario.path.position(tk), tk)?;
        t.push(tk);
        y.push(wrap_angle(psi + v[k - 1]));
        if let Some(l) = latent.as_mut() {
            l.push(x);
        }
    }
    Ok(Dataset { t, y, latent, seed, fingerprint: scenario.fingerprint() })
}

/// Writes a dataset as CSV with header `k,t,Y[,X1,X2]`, 17 significant
/// digits.
pub fn write_dataset_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    if dataset.latent.is_some() {
        out.push_str("k,t,Y,X1,X2\n");
    } else {
        out.push_str("k,t,Y\n");
    }
    for (i, (t, y)) in dataset.t.iter().zip(&dataset.y).enumerate() {
        let _ = write!(out, "{},{:.16e},{:.16e}", i + 1, t, y);
        if let Some(l) = &dataset.latent {
            let _ = write!(out, ",{:.16e},{:.16e}", l[i].x, l[i].y);
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset_csv`]. The seed and fingerprint
/// are not stored in the CSV and come back empty.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    let with_latent = match header {
        "k,t,Y" => false,
        "k,t,Y,X1,X2" => true,
        other => return Err(Error::Parse(format!("unexpected dataset header: {other}"))),
    };
    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut latent = with_latent.then(Vec::new);
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expect = if with_latent { 5 } else { 3 };
        if fields.len() != expect {
            return Err(Error::Parse(format!("line {}: expected {expect} fields", lineno + 2)));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
        };
        t.push(parse(fields[1])?);
        y.push(parse(fields[2])?);
        if let Some(l) = latent.as_mut() {
            l.push(Vector2::new(parse(fields[3])?, parse(fields[4])?));
        }
    }
    Ok(Dataset { t, y, latent, seed: 0, fingerprint: String::new() })
}
