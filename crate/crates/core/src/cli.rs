//! Command-line front end: `tune`, `certify`, `simulate` and `report`.
//!
//! Every command reads one JSON [`RunConfig`] (all fields optional, defaults
//! embedded) and writes its artifacts below the output directory. Exit codes:
//! 0 success or feasible, 1 usage or I/O error, 2 numerical failure,
//! 3 infeasible certificate or instability.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lincore::{eigenvalues, LinalgError, Matrix};
use crate::models::{
    augment_with_row, build_position_plant, build_velocity_plant, IntegratorRow, QuadVerticalParams, StateSpaceModel,
};
use crate::pidtune::{pid_closed_loop, pid_from_state_gain, state_gain_from_pid, PidError, PidGains, PidLaw};
use crate::simkit::{
    dryden_vertical_filter, generate_wind, input_stats, simulate_step, step_metrics, DrydenConfig, InputStats,
    SimError, SimTrajectory, StepMetrics,
};
use crate::synthesis::{
    certify_h2_lmi, certify_lqr_lmi, close_loop, h2_gain, h2_norm, lqr_gain, FeedbackGain, LmiCertificate,
    PerformanceSpec, SynthesisError, WuMode,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Json { .. } => 1,
            CliError::Numerical(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NotHurwitz { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::Unstable(_) => CliError::Infeasible(e.to_string()),
            SynthesisError::Linalg(inner) => inner.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<PidError> for CliError {
    fn from(e: PidError) -> Self {
        match e {
            PidError::Linalg(inner) => inner.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Diverged { .. } => CliError::Infeasible(e.to_string()),
            SimError::InvalidConfig(_) | SimError::WindTooShort { .. } | SimError::ZeroReference => {
                CliError::Usage(e.to_string())
            }
            SimError::Linalg(inner) => inner.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    #[default]
    Velocity,
    Position,
}

impl Case {
    pub fn label(self) -> &'static str {
        match self {
            Case::Velocity => "velocity",
            Case::Position => "position",
        }
    }

    pub fn plant(self) -> StateSpaceModel {
        match self {
            Case::Velocity => build_velocity_plant(),
            Case::Position => build_position_plant(),
        }
    }

    /// Performance rows over the augmented state and the input weight.
    pub fn default_perf(self) -> PerfConfig {
        match self {
            Case::Velocity => PerfConfig { state_rows: vec![vec![0.0, 0.0, 100.0]], input_weight: 0.01 },
            Case::Position => PerfConfig { state_rows: vec![vec![0.0, 0.0, 100.0, 1000.0]], input_weight: 0.1 },
        }
    }

    pub fn default_lqr_q_diag(self) -> Vec<f64> {
        match self {
            Case::Velocity => vec![0.0, 1e4, 1e4],
            Case::Position => vec![0.0, 0.0, 1e3, 1e4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    H2,
    Lqr,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::H2 => "h2",
            Method::Lqr => "lqr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WuModeArg {
    Weighted,
    Scaled,
}

impl From<WuModeArg> for WuMode {
    fn from(m: WuModeArg) -> Self {
        match m {
            WuModeArg::Weighted => WuMode::WeightedChannel,
            WuModeArg::Scaled => WuMode::ScaledDu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerfConfig {
    pub state_rows: Vec<Vec<f64>>,
    pub input_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub r_step: f64,
    /// Generate Dryden wind; `false` runs the disturbance-free step.
    pub wind: bool,
    /// Operating-point offset added to the reported input (PPM).
    pub hover_trim_ppm: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let hover_trim_ppm = QuadVerticalParams::default().hover_input();
        Self { dt: 0.001, horizon: 20.0, r_step: 1.0, wind: true, hover_trim_ppm }
    }
}

/// One run definition. Optional fields fall back to the defaults of `case`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: Case,
    pub method: Method,
    pub perf: Option<PerfConfig>,
    pub lqr_q_diag: Option<Vec<f64>>,
    pub lqr_r: f64,
    pub dryden: DrydenConfig,
    pub sim: SimConfig,
    pub wu_mode: WuMode,
    pub integrator_row: IntegratorRow,
    pub pid_law: PidLaw,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: Case::Velocity,
            method: Method::H2,
            perf: None,
            lqr_q_diag: None,
            lqr_r: 1.0,
            dryden: DrydenConfig::default(),
            sim: SimConfig::default(),
            wu_mode: WuMode::WeightedChannel,
            integrator_row: IntegratorRow::Output,
            pid_law: PidLaw::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
    }

    pub fn perf_config(&self) -> PerfConfig {
        self.perf.clone().unwrap_or_else(|| self.case.default_perf())
    }

    pub fn q_diag(&self) -> Vec<f64> {
        self.lqr_q_diag.clone().unwrap_or_else(|| self.case.default_lqr_q_diag())
    }

    pub fn base_plant(&self) -> StateSpaceModel {
        self.case.plant()
    }

    pub fn augmented_plant(&self) -> Result<StateSpaceModel> {
        augment_with_row(&self.base_plant(), self.integrator_row)
            .map(|m| m.aug)
            .map_err(|e| CliError::Numerical(e.to_string()))
    }

    pub fn performance(&self) -> Result<PerformanceSpec> {
        let perf = self.perf_config();
        let n = self.base_plant().states() + 1;
        if perf.state_rows.is_empty() || perf.state_rows.iter().any(|row| row.len() != n) {
            return Err(CliError::Usage(format!("perf.state_rows must be non-empty rows of length {n}")));
        }
        let flat: Vec<f64> = perf.state_rows.iter().flatten().copied().collect();
        let rows = Matrix::from_row_slice(perf.state_rows.len(), n, &flat);
        PerformanceSpec::new(rows, 1, perf.input_weight, self.wu_mode).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn lqr_weights(&self) -> Result<(Matrix, Matrix)> {
        let q = self.q_diag();
        let n = self.base_plant().states() + 1;
        if q.len() != n {
            return Err(CliError::Usage(format!("lqr_q_diag must have {n} entries, got {}", q.len())));
        }
        if !(self.lqr_r.is_finite() && self.lqr_r > 0.0) {
            return Err(CliError::Usage(format!("lqr_r must be positive, got {}", self.lqr_r)));
        }
        Ok((Matrix::from_diagonal(&nalgebra::DVector::from_vec(q)), Matrix::from_element(1, 1, self.lqr_r)))
    }

    pub fn validate(&self) -> Result<()> {
        self.performance()?;
        self.lqr_weights()?;
        self.dryden.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let sim = &self.sim;
        if !(sim.dt > 0.0 && sim.horizon > 0.0 && sim.horizon.is_finite() && sim.r_step.is_finite()) {
            return Err(CliError::Usage(format!("bad sim settings: dt = {}, T = {}", sim.dt, sim.horizon)));
        }
        Ok(())
    }
}

/// Output of `tune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub case: Case,
    pub method: Method,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Frobenius residual of the `[K_P K_D]` solve.
    pub residual: f64,
    pub relative_residual: f64,
    /// `‖G_zw‖₂` of the PID loop `u = −[M L]x` under the run's performance output.
    pub h2_norm_closed_loop: Option<f64>,
    /// `‖G_zw‖₂` of the augmented state-feedback loop before extraction.
    pub h2_norm_state_feedback: f64,
    pub wu_mode: WuMode,
    pub state_gain: Vec<f64>,
    pub care_relative_residual: f64,
    pub warnings: Vec<String>,
}

impl TuneReport {
    pub fn gains(&self) -> PidGains {
        PidGains::new(self.kp, self.ki, self.kd)
    }
}

/// `‖G_zw‖₂` of the loop closed by `u = −k·x`, or `None` when it is unstable.
fn loop_norm(aug: &StateSpaceModel, perf: &PerformanceSpec, k: &FeedbackGain) -> Result<Option<f64>> {
    match h2_norm(&close_loop(aug, perf, k)?) {
        Ok(v) => Ok(Some(v)),
        Err(SynthesisError::Precondition(_)) | Err(SynthesisError::Unstable(_)) => Ok(None),
        Err(SynthesisError::Linalg(LinalgError::NotHurwitz { .. })) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn tune(cfg: &RunConfig) -> Result<TuneReport> {
    cfg.validate()?;
    let base = cfg.base_plant();
    let aug = cfg.augmented_plant()?;
    let perf = cfg.performance()?;
    let syn = match cfg.method {
        Method::H2 => h2_gain(&aug, &perf)?,
        Method::Lqr => {
            let (q, r) = cfg.lqr_weights()?;
            lqr_gain(&aug, &q, &r)?
        }
    };
    let extraction = pid_from_state_gain(&syn.gain, &base)?;
    let mut warnings = extraction.warnings.clone();
    let g = extraction.gains;
    if g.kp == 0.0 && g.ki == 0.0 && g.kd == 0.0 {
        return Err(CliError::Numerical("synthesis returned zero gains; nothing to tune".into()));
    }
    let pid_gain = state_gain_from_pid(&g, &base)?;
    let h2_norm_closed_loop = loop_norm(&aug, &perf, &pid_gain)?;
    if h2_norm_closed_loop.is_none() {
        warnings.push("PID loop with the extracted gains is not Hurwitz".into());
    }
    let h2_norm_state_feedback = h2_norm(&close_loop(&aug, &perf, &syn.gain)?)?;
    Ok(TuneReport {
        case: cfg.case,
        method: cfg.method,
        kp: g.kp,
        ki: g.ki,
        kd: g.kd,
        residual: extraction.residual,
        relative_residual: extraction.relative_residual,
        h2_norm_closed_loop,
        h2_norm_state_feedback,
        wu_mode: cfg.wu_mode,
        state_gain: syn.gain.k.iter().copied().collect(),
        care_relative_residual: syn.care.relative_residual,
        warnings,
    })
}

/// Which gain `certify` checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum CertifyTarget {
    /// `u = −[M L]x` rebuilt from the PID gains.
    #[default]
    Pid,
    /// The augmented state-feedback gain before extraction.
    State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub case: Case,
    pub method: Method,
    pub gains: PidGains,
    pub target: String,
    pub certificate: LmiCertificate,
}

/// `gamma_factor` scales the loop's own H₂ norm; `gamma` overrides it.
pub fn certify(
    cfg: &RunConfig,
    tuned: &TuneReport,
    target: CertifyTarget,
    gamma: Option<f64>,
    gamma_factor: f64,
) -> Result<CertifyReport> {
    if !tuned.gains().is_finite() {
        return Err(CliError::Usage("gains must be finite".into()));
    }
    let base = cfg.base_plant();
    let aug = cfg.augmented_plant()?;
    let k = match target {
        CertifyTarget::Pid => state_gain_from_pid(&tuned.gains(), &base)?,
        CertifyTarget::State => {
            if tuned.state_gain.len() != aug.states() {
                return Err(CliError::Usage(format!(
                    "state_gain has {} entries, expected {}",
                    tuned.state_gain.len(),
                    aug.states()
                )));
            }
            FeedbackGain::new(Matrix::from_row_slice(1, aug.states(), &tuned.state_gain))
        }
    };
    let certificate = match cfg.method {
        Method::H2 => {
            let perf = cfg.performance()?;
            let gamma = match gamma {
                Some(g) => g,
                None => loop_norm(&aug, &perf, &k)?.map_or(0.0, |n| gamma_factor * n),
            };
            certify_h2_lmi(&aug, &perf, &k, gamma)?
        }
        Method::Lqr => {
            let (q, r) = cfg.lqr_weights()?;
            certify_lqr_lmi(&aug, &q, &r, &k)?
        }
    };
    let target = match target {
        CertifyTarget::Pid => "pid",
        CertifyTarget::State => "state",
    };
    Ok(CertifyReport { case: cfg.case, method: cfg.method, gains: tuned.gains(), target: target.into(), certificate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub case: Case,
    pub method: Method,
    pub seed: u64,
    pub wind: bool,
    pub gains: PidGains,
    pub input: InputStats,
    pub rms_tracking_error: f64,
    pub step: StepMetrics,
}

pub struct SimulateOutput {
    pub trajectory: SimTrajectory,
    pub stats: SimStats,
}

pub fn simulate(cfg: &RunConfig, gains: &PidGains) -> Result<SimulateOutput> {
    cfg.validate()?;
    let cl = pid_closed_loop(&cfg.base_plant(), gains, cfg.pid_law)?;
    let steps = (cfg.sim.horizon / cfg.sim.dt).round() as usize;
    let wind = if cfg.sim.wind {
        let filter = dryden_vertical_filter(&DrydenConfig { dt: cfg.sim.dt, ..cfg.dryden })?;
        generate_wind(&filter, cfg.dryden.seed, steps)?
    } else {
        vec![0.0; steps]
    };
    let mut trajectory = simulate_step(&cl, &wind, cfg.sim.r_step, cfg.sim.dt, cfg.sim.horizon)?;
    if cfg.sim.hover_trim_ppm != 0.0 {
        trajectory.u.iter_mut().for_each(|u| *u += cfg.sim.hover_trim_ppm);
    }
    let stats = SimStats {
        case: cfg.case,
        method: cfg.method,
        seed: cfg.dryden.seed,
        wind: cfg.sim.wind,
        gains: *gains,
        input: input_stats(&trajectory),
        rms_tracking_error: trajectory.rms_tracking_error(),
        step: step_metrics(&trajectory)?,
    };
    Ok(SimulateOutput { trajectory, stats })
}

/// Markdown table of input mean and variance for both methods of one case.
pub fn report_table(case: Case, h2: &SimStats, lqr: &SimStats) -> String {
    let mut out = format!("Control input, {} case\n\n", case.label());
    out.push_str("| Tuning | Mean (PPM) | Variance (PPM^2) | RMS tracking error |\n");
    out.push_str("|---|---|---|---|\n");
    for (name, s) in [("H2-PID", h2), ("LQR-PID", lqr)] {
        out.push_str(&format!(
            "| {name} | {:.4} | {:.4} | {:.6} |\n",
            s.input.mean, s.input.variance, s.rms_tracking_error
        ));
    }
    out
}

pub fn gains_path(dir: &Path, case: Case, method: Method) -> PathBuf {
    dir.join(format!("gains_{}_{}.json", case.label(), method.label()))
}

pub fn stats_path(dir: &Path, case: Case, method: Method) -> PathBuf {
    dir.join(format!("stats_{}_{}.json", case.label(), method.label()))
}

pub fn trajectory_path(dir: &Path, case: Case, method: Method) -> PathBuf {
    dir.join(format!("trajectory_{}_{}.csv", case.label(), method.label()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Parser)]
#[command(name = "h2pid", about = "H2 and LQR optimal PID tuning for a quadcopter vertical channel", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, value_enum)]
    pub case: Option<Case>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "wu-mode", value_enum)]
    pub wu_mode: Option<WuModeArg>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(case) = self.case {
            cfg.case = case;
        }
        if let Some(method) = self.method {
            cfg.method = method;
        }
        if let Some(seed) = self.seed {
            cfg.dryden.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(mode) = self.wu_mode {
            cfg.wu_mode = mode.into();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize the optimal gain and extract PID gains.
    Tune {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check gains against the LMI conditions.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        /// Gains JSON written by `tune`; tuned inline when absent.
        #[arg(long)]
        gains: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "pid")]
        target: CertifyTarget,
        /// Absolute attenuation level.
        #[arg(long, conflicts_with = "gamma_factor")]
        gamma: Option<f64>,
        /// Attenuation level relative to the loop's H2 norm.
        #[arg(long = "gamma-factor", default_value_t = 1.001)]
        gamma_factor: f64,
    },
    /// Simulate a reference step under wind.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        gains: Option<PathBuf>,
        /// Run without wind.
        #[arg(long = "no-wind")]
        no_wind: bool,
    },
    /// Tabulate input statistics of both methods.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        /// Run both simulations instead of reading prior outputs.
        #[arg(long)]
        inline: bool,
    },
    /// Print the fully resolved configuration.
    Config {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn load_or_tune(cfg: &RunConfig, gains: &Option<PathBuf>) -> Result<TuneReport> {
    match gains {
        Some(path) => read_json(path),
        None => tune(cfg),
    }
}

fn simulate_and_write(cfg: &RunConfig, gains: &PidGains) -> Result<SimStats> {
    let out = simulate(cfg, gains)?;
    let dir = &cfg.output_dir;
    write_file(&trajectory_path(dir, cfg.case, cfg.method), &out.trajectory.to_csv())?;
    write_file(&stats_path(dir, cfg.case, cfg.method), &to_json(&out.stats))?;
    Ok(out.stats)
}

/// Runs one command, writing human-facing output to `stdout`.
pub fn execute(command: &Command, stdout: &mut dyn Write) -> Result<()> {
    let emit = |stdout: &mut dyn Write, text: &str| -> Result<()> {
        stdout.write_all(text.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e))
    };
    match command {
        Command::Tune { common } => {
            let cfg = common.resolve()?;
            let report = tune(&cfg)?;
            let json = to_json(&report);
            write_file(&gains_path(&cfg.output_dir, cfg.case, cfg.method), &json)?;
            write_file(
                &cfg.output_dir.join(format!("model_{}.csv", cfg.case.label())),
                &cfg.augmented_plant()?.to_csv(),
            )?;
            emit(stdout, &json)
        }
        Command::Certify { common, gains, target, gamma, gamma_factor } => {
            let cfg = common.resolve()?;
            let tuned = load_or_tune(&cfg, gains)?;
            let report = certify(&cfg, &tuned, *target, *gamma, *gamma_factor)?;
            let json = to_json(&report);
            let name = format!("certificate_{}_{}.json", cfg.case.label(), cfg.method.label());
            write_file(&cfg.output_dir.join(name), &json)?;
            emit(stdout, &json)?;
            if report.certificate.feasible {
                Ok(())
            } else {
                let mut why = format!("certificate infeasible for {} {}", cfg.case.label(), cfg.method.label());
                if !report.certificate.closed_loop_hurwitz {
                    why.push_str("; closed-loop eigenvalues:");
                    for [re, im] in &report.certificate.closed_loop_eigenvalues {
                        why.push_str(&format!(" ({re:.6}{im:+.6}i)"));
                    }
                }
                Err(CliError::Infeasible(why))
            }
        }
        Command::Simulate { common, gains, no_wind } => {
            let mut cfg = common.resolve()?;
            if *no_wind {
                cfg.sim.wind = false;
            }
            let tuned = load_or_tune(&cfg, gains)?;
            let stats = simulate_and_write(&cfg, &tuned.gains())?;
            emit(stdout, &to_json(&stats))
        }
        Command::Report { common, inline } => {
            let cfg = common.resolve()?;
            let mut rows = Vec::with_capacity(2);
            for method in [Method::H2, Method::Lqr] {
                let run = RunConfig { method, ..cfg.clone() };
                let path = stats_path(&cfg.output_dir, cfg.case, method);
                let stats = if *inline {
                    simulate_and_write(&run, &tune(&run)?.gains())?
                } else if path.is_file() {
                    read_json(&path)?
                } else {
                    return Err(CliError::Io {
                        path,
                        source: std::io::Error::new(
                            std::io::ErrorKind::NotFound,
                            "simulation stats not found; run `simulate` first or pass --inline",
                        ),
                    });
                };
                rows.push(stats);
            }
            let table = report_table(cfg.case, &rows[0], &rows[1]);
            write_file(&cfg.output_dir.join(format!("report_{}.md", cfg.case.label())), &table)?;
            emit(stdout, &table)
        }
        Command::Config { common } => {
            let cfg = common.resolve()?;
            cfg.validate()?;
            let mut json = cfg.to_json();
            json.push('\n');
            emit(stdout, &json)
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli.command, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Closed-loop eigenvalues of the PID loop, for diagnostics.
pub fn pid_loop_eigenvalues(cfg: &RunConfig, gains: &PidGains) -> Result<Vec<[f64; 2]>> {
    let cl = pid_closed_loop(&cfg.base_plant(), gains, cfg.pid_law)?;
    Ok(eigenvalues(&cl.model.a)?.iter().map(|z| [z.re, z.im]).collect())
}
