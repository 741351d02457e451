//! Dryden vertical turbulence, fixed-step closed-loop simulation and
//! trajectory statistics.
//!
//! The vertical gust filter is the low-altitude MIL-F-8785C form
//!
//! ```text
//! H_w(s) = σ_w·√(L_w/(πV))·(1 + √3·(L_w/V)s) / (1 + (L_w/V)s)²
//! ```
//!
//! with `σ_w = 0.1·W₂₀` and `L_w = h`. It is driven by white noise of
//! two-sided spectral density `π`, for which the stationary output variance is
//! `σ_w²`. Noise samples come from ChaCha20 (`rand_chacha::ChaCha20Rng`,
//! seeded with `seed_from_u64`) through `rand_distr::StandardNormal`.

use nalgebra::{DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lincore::{solve_discrete_lyapunov, zoh_discretize, LinalgError, Matrix};
use crate::models::StateSpaceModel;
use crate::pidtune::PidClosedLoop;
use crate::tolerances::DIVERGENCE_LIMIT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation setting: {0}")]
    InvalidConfig(String),
    #[error("wind series has {got} samples, simulation needs {needed}")]
    WindTooShort { needed: usize, got: usize },
    #[error("simulation diverged at t = {time:.6} s")]
    Diverged { time: f64 },
    #[error("step metrics need a nonzero reference step")]
    ZeroReference,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Two-sided spectral density of the driving noise; with it the filter's
/// stationary variance equals `σ_w²`.
pub const NOISE_INTENSITY: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrydenConfig {
    /// Wind speed at 20 ft (m/s).
    pub mean_wind_w20: f64,
    /// Airspeed (m/s).
    pub airspeed: f64,
    /// Altitude (m).
    pub altitude: f64,
    /// Sample time (s).
    pub dt: f64,
    pub seed: u64,
}

impl Default for DrydenConfig {
    fn default() -> Self {
        Self { mean_wind_w20: 5.0, airspeed: 5.0, altitude: 10.0, dt: 0.001, seed: 42 }
    }
}

impl DrydenConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mean_wind_w20", self.mean_wind_w20),
            ("airspeed", self.airspeed),
            ("altitude", self.altitude),
            ("dt", self.dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.dt > 0.01 {
            return Err(SimError::InvalidConfig(format!("dt must be at most 0.01 s, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Discretized Dryden vertical-gust shaping filter.
#[derive(Debug, Clone, PartialEq)]
pub struct DrydenFilter {
    /// Continuous realization; noise enters through `b_w`, `b_u` is zero.
    pub model: StateSpaceModel,
    pub sigma_w: f64,
    pub length_scale: f64,
    pub airspeed: f64,
    pub dt: f64,
    ad: Matrix,
    bd: Matrix,
}

impl DrydenFilter {
    /// `sigma_w = 0` gives a silent filter.
    pub fn new(sigma_w: f64, length_scale: f64, airspeed: f64, dt: f64) -> Result<Self> {
        if !(sigma_w.is_finite() && sigma_w >= 0.0) {
            return Err(SimError::InvalidConfig(format!("sigma_w must be non-negative, got {sigma_w}")));
        }
        let tau = length_scale / airspeed;
        if !(tau.is_finite() && tau > 0.0 && dt > 0.0) {
            return Err(SimError::InvalidConfig(format!("bad time constant L/V = {tau} or dt = {dt}")));
        }
        let gain = sigma_w * (length_scale / (std::f64::consts::PI * airspeed)).sqrt();
        // Controllable canonical form of gain·(1 + √3τs)/(τs + 1)².
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0 / (tau * tau), -2.0 / tau]);
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let c = Matrix::from_row_slice(1, 2, &[gain / (tau * tau), gain * 3f64.sqrt() / tau]);
        let model = StateSpaceModel::new(a, Matrix::zeros(2, 1), b, c, vec!["gust1".into(), "gust2".into()])?;
        let (ad, bd) = zoh_discretize(&model.a, &model.b_w, dt)?;
        Ok(Self { model, sigma_w, length_scale, airspeed, dt, ad, bd })
    }

    /// Per-sample injection scale: held noise of density `π` has variance `π/dt`.
    fn noise_scale(&self) -> f64 {
        (NOISE_INTENSITY / self.dt).sqrt()
    }

    /// Stationary state covariance of the sampled filter.
    pub fn stationary_state_covariance(&self) -> Result<Matrix> {
        let q = &self.bd * self.bd.transpose() * (self.noise_scale() * self.noise_scale());
        Ok(solve_discrete_lyapunov(&self.ad, &q)?)
    }

    /// Stationary variance of the sampled output.
    pub fn stationary_variance(&self) -> Result<f64> {
        let p = self.stationary_state_covariance()?;
        Ok((&self.model.c * p * self.model.c.transpose())[(0, 0)])
    }
}

/// Low-altitude Dryden vertical filter for `cfg`.
pub fn dryden_vertical_filter(cfg: &DrydenConfig) -> Result<DrydenFilter> {
    cfg.validate()?;
    DrydenFilter::new(0.1 * cfg.mean_wind_w20, cfg.altitude, cfg.airspeed, cfg.dt)
}

fn covariance_sqrt(p: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(p.clone());
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

/// `n_steps` gust samples (m/s). The filter starts from a draw of its
/// stationary distribution, so the series has no start-up transient.
pub fn generate_wind(filter: &DrydenFilter, seed: u64, n_steps: usize) -> Result<Vec<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let root = covariance_sqrt(&filter.stationary_state_covariance()?);
    let mut x = &root * DVector::from_fn(2, |_, _| draw());
    let scale = filter.noise_scale();
    let c = &filter.model.c;
    let bd = filter.bd.column(0) * scale;
    let mut out = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        out.push((c * &x)[(0, 0)]);
        x = &filter.ad * &x + &bd * draw();
    }
    Ok(out)
}

/// Closed-loop time series, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub r: Vec<f64>,
}

impl SimTrajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `t,r,y,u,w` with 9 significant digits and LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.len() + 1));
        out.push_str("t,r,y,u,w\n");
        for k in 0..self.len() {
            out.push_str(&format!(
                "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}\n",
                self.t[k], self.r[k], self.y[k], self.u[k], self.w[k]
            ));
        }
        out
    }

    /// Root-mean-square of `y − r` over the whole horizon.
    pub fn rms_tracking_error(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.y.iter().zip(&self.r).map(|(y, r)| (y - r) * (y - r)).sum();
        (sum / self.len() as f64).sqrt()
    }
}

/// Integrates the PID loop with RK4 at `dt` for a reference step of size
/// `r_step` at `t = 0`. Wind sample `k` is held over `[t_k, t_{k+1})`.
pub fn simulate_step(cl: &PidClosedLoop, wind: &[f64], r_step: f64, dt: f64, horizon: f64) -> Result<SimTrajectory> {
    if !(dt.is_finite() && dt > 0.0 && horizon.is_finite() && horizon > 0.0) {
        return Err(SimError::InvalidConfig(format!("dt = {dt}, T = {horizon}")));
    }
    if cl.model.disturbances() != 1 {
        return Err(SimError::InvalidConfig("simulation expects a single disturbance channel".into()));
    }
    let steps = (horizon / dt).round() as usize;
    if wind.len() < steps {
        return Err(SimError::WindTooShort { needed: steps, got: wind.len() });
    }
    let a = &cl.model.a;
    let b_r = cl.model.b_u.column(0);
    let b_w = cl.model.b_w.column(0);
    let c = cl.model.c.row(0);
    let k_x = cl.control_state.row(0);
    let k_w = cl.control_disturbance[(0, 0)];

    let n = a.nrows();
    let mut x = DVector::<f64>::zeros(n);
    let mut traj = SimTrajectory {
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        y: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        w: Vec::with_capacity(steps + 1),
        r: Vec::with_capacity(steps + 1),
    };
    for k in 0..=steps {
        let t = k as f64 * dt;
        let w = wind.get(k).or(wind.last()).copied().unwrap_or(0.0);
        traj.t.push(t);
        traj.x.push(x.iter().copied().collect());
        traj.y.push(c.dot(&x.transpose()));
        traj.u.push(k_x.dot(&x.transpose()) + cl.control_reference * r_step + k_w * w);
        traj.w.push(w);
        traj.r.push(r_step);
        if k == steps {
            break;
        }
        let drive = b_r * r_step + b_w * w;
        let f = |s: &DVector<f64>| a * s + &drive;
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (0.5 * dt)));
        let k3 = f(&(&x + &k2 * (0.5 * dt)));
        let k4 = f(&(&x + &k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            return Err(SimError::Diverged { time: (k + 1) as f64 * dt });
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputStats {
    pub mean: f64,
    pub variance: f64,
}

/// Sample mean and unbiased sample variance of the control input.
pub fn input_stats(traj: &SimTrajectory) -> InputStats {
    let n = traj.u.len();
    if n == 0 {
        return InputStats { mean: f64::NAN, variance: f64::NAN };
    }
    let mean = traj.u.iter().sum::<f64>() / n as f64;
    let variance =
        if n > 1 { traj.u.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    InputStats { mean, variance }
}

/// Step-response figures; `None` marks a level never reached in the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// 10% → 90% of the final value.
    pub rise_time_s: Option<f64>,
    /// Peak excursion past the reference, in percent.
    pub overshoot_pct: f64,
    /// Time after which `y` stays within ±2% of the reference.
    pub settling_time_s: Option<f64>,
}

fn crossing_time(t: &[f64], y: &[f64], level: f64) -> Option<f64> {
    if y.first()? >= &level {
        return Some(t[0]);
    }
    y.windows(2)
        .zip(t.windows(2))
        .find_map(|(yy, tt)| (yy[1] >= level).then(|| tt[0] + (level - yy[0]) / (yy[1] - yy[0]) * (tt[1] - tt[0])))
}

pub fn step_metrics(traj: &SimTrajectory) -> Result<StepMetrics> {
    let reference = *traj.r.last().ok_or(SimError::ZeroReference)?;
    if reference == 0.0 {
        return Err(SimError::ZeroReference);
    }
    let normalized: Vec<f64> = traj.y.iter().map(|y| y / reference).collect();
    let last = normalized[normalized.len() - 1];
    let rise_time_s = if last > 0.0 {
        match (crossing_time(&traj.t, &normalized, 0.1 * last), crossing_time(&traj.t, &normalized, 0.9 * last)) {
            (Some(lo), Some(hi)) => Some(hi - lo),
            _ => None,
        }
    } else {
        None
    };
    let peak = normalized.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let overshoot_pct = ((peak - 1.0) * 100.0).max(0.0);
    let settling_time_s = match normalized.iter().rposition(|v| (v - 1.0).abs() > 0.02) {
        None => Some(traj.t[0]),
        Some(last) if last + 1 < traj.len() => Some(traj.t[last + 1]),
        Some(_) => None,
    };
    Ok(StepMetrics { rise_time_s, overshoot_pct, settling_time_s })
}
