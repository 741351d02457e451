//! LQR and H2 state-feedback synthesis, closed-loop H2 norm, and LMI
//! certificates.
//!
//! Gains are computed through the Riccati equation; the LMI conditions are
//! then evaluated on witnesses built from the gain, so each inequality becomes a
//! set of eigenvalue checks rather than a semidefinite program.
//!
//! Convention: `u = −Kx` everywhere. A gain quoted for `u = Kx` is the
//! negation of the one computed here.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lincore::{
    eigenvalues_of, hurwitz_from_spectrum, solve_care, solve_lyapunov, symmetrize, CareSolution, LinalgError, Matrix,
};
use crate::models::StateSpaceModel;
use crate::tolerances::{H2_LMI_MARGIN, H2_LMI_STRICTNESS, H2_LMI_TRACE_BUDGET, LQR_LMI_SLACK};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("{0}")]
    Precondition(String),
    #[error("synthesized closed loop is not Hurwitz (spectral abscissa {0:e})")]
    Unstable(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, SynthesisError>;

/// Where the input weight `W_u` enters the performance output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WuMode {
    /// `z = [C_z x; W_u u]`, so `D_uᵀD_u = W_u²` and no cross term.
    #[default]
    #[serde(alias = "weighted")]
    WeightedChannel,
    /// `z = C_z x + W_u u` on the same channel(s).
    #[serde(alias = "scaled")]
    ScaledDu,
}

impl WuMode {
    pub fn label(self) -> &'static str {
        match self {
            WuMode::WeightedChannel => "weighted",
            WuMode::ScaledDu => "scaled",
        }
    }
}

/// Performance output `z = C_z x + D_u u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceSpec {
    pub c_z: Matrix,
    pub d_u: Matrix,
    pub input_weight: f64,
    pub mode: WuMode,
}

impl PerformanceSpec {
    /// Builds `(C_z, D_u)` from state-weight rows and an input weight.
    pub fn new(state_rows: Matrix, inputs: usize, input_weight: f64, mode: WuMode) -> Result<Self> {
        if !(input_weight.is_finite() && input_weight > 0.0) {
            return Err(SynthesisError::Precondition(format!("input weight must be positive, got {input_weight}")));
        }
        let (m, n) = state_rows.shape();
        let (c_z, d_u) = match mode {
            WuMode::WeightedChannel => {
                let mut c_z = Matrix::zeros(m + inputs, n);
                c_z.view_mut((0, 0), (m, n)).copy_from(&state_rows);
                let mut d_u = Matrix::zeros(m + inputs, inputs);
                d_u.view_mut((m, 0), (inputs, inputs)).fill_diagonal(input_weight);
                (c_z, d_u)
            }
            WuMode::ScaledDu => (state_rows, Matrix::from_element(m, inputs, input_weight)),
        };
        let spec = Self { c_z, d_u, input_weight, mode };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_z.nrows() != self.d_u.nrows() {
            return Err(SynthesisError::Precondition(format!(
                "C_z has {} rows but D_u has {}",
                self.c_z.nrows(),
                self.d_u.nrows()
            )));
        }
        let r = self.r();
        if r.nrows() == 0 || nalgebra::Cholesky::new(r).is_none() {
            return Err(SynthesisError::Precondition("D_uᵀD_u is not positive definite".into()));
        }
        Ok(())
    }

    /// State weight `C_zᵀC_z`.
    pub fn q(&self) -> Matrix {
        self.c_z.transpose() * &self.c_z
    }

    /// Input weight `D_uᵀD_u`.
    pub fn r(&self) -> Matrix {
        self.d_u.transpose() * &self.d_u
    }

    /// Cross weight `C_zᵀD_u`.
    pub fn s(&self) -> Matrix {
        self.c_z.transpose() * &self.d_u
    }
}

/// State-feedback gain for `u = −Kx`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackGain {
    pub k: Matrix,
}

impl FeedbackGain {
    pub fn new(k: Matrix) -> Self {
        Self { k }
    }

    pub fn zeros(inputs: usize, states: usize) -> Self {
        Self { k: Matrix::zeros(inputs, states) }
    }
}

/// A synthesized gain with its Riccati solution and closed-loop spectrum.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub gain: FeedbackGain,
    pub care: CareSolution,
    pub closed_loop_eigenvalues: Vec<Complex64>,
}

fn check_gain_shape(sys: &StateSpaceModel, k: &FeedbackGain) -> Result<()> {
    if k.k.shape() != (sys.inputs(), sys.states()) {
        return Err(LinalgError::Dimension {
            op: "feedback gain",
            detail: format!("expected {}x{}, got {}x{}", sys.inputs(), sys.states(), k.k.nrows(), k.k.ncols()),
        }
        .into());
    }
    Ok(())
}

fn finish(sys: &StateSpaceModel, care: CareSolution) -> Result<Synthesis> {
    let gain = FeedbackGain::new(care.gain.clone());
    let eig = eigenvalues_of("closed loop A - B_u K", &(&sys.a - &sys.b_u * &gain.k))?;
    if !hurwitz_from_spectrum(&eig) {
        let abscissa = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        return Err(SynthesisError::Unstable(abscissa));
    }
    Ok(Synthesis { gain, care, closed_loop_eigenvalues: eig })
}

fn map_care_error(e: LinalgError) -> SynthesisError {
    match e {
        LinalgError::NotStabilizable => SynthesisError::Precondition("(A, B_u) is not stabilizable".to_string()),
        other => other.into(),
    }
}

/// LQR gain minimizing `∫ xᵀqx + uᵀru dt`: `K = r⁻¹B_uᵀP`.
pub fn lqr_gain(sys: &StateSpaceModel, q: &Matrix, r: &Matrix) -> Result<Synthesis> {
    let s = Matrix::zeros(sys.states(), sys.inputs());
    let care = solve_care(&sys.a, &sys.b_u, q, r, &s).map_err(map_care_error)?;
    finish(sys, care)
}

/// H2-optimal state feedback for `w → z`:
/// `K = (D_uᵀD_u)⁻¹(B_uᵀP + D_uᵀC_z)`.
///
/// For full state feedback the optimal gain does not depend on `B_w`.
pub fn h2_gain(sys: &StateSpaceModel, perf: &PerformanceSpec) -> Result<Synthesis> {
    perf.validate()?;
    if perf.c_z.ncols() != sys.states() || perf.d_u.ncols() != sys.inputs() {
        return Err(SynthesisError::Precondition(format!(
            "performance spec is sized for {} states / {} inputs, system has {} / {}",
            perf.c_z.ncols(),
            perf.d_u.ncols(),
            sys.states(),
            sys.inputs()
        )));
    }
    let care = solve_care(&sys.a, &sys.b_u, &perf.q(), &perf.r(), &perf.s()).map_err(map_care_error)?;
    finish(sys, care)
}

/// `ẋ = (A − B_uK)x + B_w w`, `z = (C_z − D_uK)x`.
///
/// `B_u` is kept as an additive input on top of the feedback.
pub fn close_loop(sys: &StateSpaceModel, perf: &PerformanceSpec, k: &FeedbackGain) -> Result<StateSpaceModel> {
    check_gain_shape(sys, k)?;
    let a = &sys.a - &sys.b_u * &k.k;
    let c = &perf.c_z - &perf.d_u * &k.k;
    Ok(StateSpaceModel::new(a, sys.b_u.clone(), sys.b_w.clone(), c, sys.state_labels.clone())?)
}

/// `‖C(sI − A)⁻¹B_w‖₂ = √trace(B_wᵀ Q_o B_w)` with `AᵀQ_o + Q_oA + CᵀC = 0`.
pub fn h2_norm(cl: &StateSpaceModel) -> Result<f64> {
    let qo = solve_lyapunov(&cl.a, &(cl.c.transpose() * &cl.c))?;
    let energy = (cl.b_w.transpose() * qo * &cl.b_w).trace();
    Ok(energy.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmiKind {
    LqrRiccati,
    H2StateFeedback,
}

/// One matrix inequality `block < threshold` evaluated at the witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiBlock {
    pub name: String,
    pub max_eigenvalue: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

impl LmiBlock {
    fn new(name: &str, block: &Matrix, threshold: f64) -> Self {
        let max_eigenvalue = max_sym_eigenvalue(block);
        Self { name: name.to_string(), max_eigenvalue, threshold, satisfied: max_eigenvalue < threshold }
    }
}

/// Outcome of an LMI feasibility check at a given gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiCertificate {
    pub which: LmiKind,
    pub blocks: Vec<LmiBlock>,
    pub gamma: Option<f64>,
    /// `trace(Z) − γ²`; must be negative.
    pub trace_gap: Option<f64>,
    pub closed_loop_hurwitz: bool,
    pub closed_loop_eigenvalues: Vec<[f64; 2]>,
    pub feasible: bool,
    pub diagnostics: Vec<String>,
}

fn max_sym_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.max()
}

fn spectrum_pairs(eig: &[Complex64]) -> Vec<[f64; 2]> {
    eig.iter().map(|z| [z.re, z.im]).collect()
}

/// Riccati LMI at the CARE witness `Y = P⁻¹`, `W = −KY`:
/// `AY + YAᵀ + WᵀB_uᵀ + B_uW + YqY + WᵀrW ≤ slack`.
///
/// The optimal gain makes this matrix zero, so the check allows a small
/// positive slack instead of strict negativity.
pub fn certify_lqr_lmi(sys: &StateSpaceModel, q: &Matrix, r: &Matrix, k: &FeedbackGain) -> Result<LmiCertificate> {
    check_gain_shape(sys, k)?;
    let s = Matrix::zeros(sys.states(), sys.inputs());
    let care = solve_care(&sys.a, &sys.b_u, q, r, &s).map_err(map_care_error)?;
    let y = care.p.clone().try_inverse().ok_or(LinalgError::Singular("Riccati solution P"))?;
    let y = symmetrize(&y);
    let w = -&k.k * &y;
    let ay = &sys.a * &y;
    let bw = &sys.b_u * &w;
    let yqy = &y * q * &y;
    let wrw = w.transpose() * r * &w;
    let block = &ay + ay.transpose() + bw.transpose() + &bw + &yqy + &wrw;
    let scale = [ay.norm(), bw.norm(), yqy.norm(), wrw.norm()].into_iter().fold(0.0, f64::max);
    let lmi = LmiBlock::new("riccati_inequality", &block, LQR_LMI_SLACK * scale.max(f64::MIN_POSITIVE));

    let eig = eigenvalues_of("closed loop A - B_u K", &(&sys.a - &sys.b_u * &k.k))?;
    let hurwitz = hurwitz_from_spectrum(&eig);
    let mut diagnostics = Vec::new();
    if !hurwitz {
        diagnostics.push("closed loop is not Hurwitz".to_string());
    }
    if !lmi.satisfied {
        diagnostics.push(format!("Riccati inequality violated: λ_max = {:e}", lmi.max_eigenvalue));
    }
    let feasible = hurwitz && lmi.satisfied;
    Ok(LmiCertificate {
        which: LmiKind::LqrRiccati,
        blocks: vec![lmi],
        gamma: None,
        trace_gap: None,
        closed_loop_hurwitz: hurwitz,
        closed_loop_eigenvalues: spectrum_pairs(&eig),
        feasible,
        diagnostics,
    })
}

/// H2 LMIs at witnesses built from the gain.
///
/// `X` is the closed-loop controllability Gramian plus a small `εX_I`
/// (`A_cl X_I + X_I A_clᵀ + I = 0`) so the Lyapunov inequality is strict;
/// `W = −KX`; `Z = (C_zX + D_uW)X⁻¹(C_zX + D_uW)ᵀ + ε_z I`. The performance
/// block `[[−Z, C_zX + D_uW], [*, −X]] < 0` is checked through its Schur
/// complement: `X > 0` and `Z − (C_zX + D_uW)X⁻¹(·)ᵀ > 0`.
pub fn certify_h2_lmi(
    sys: &StateSpaceModel,
    perf: &PerformanceSpec,
    k: &FeedbackGain,
    gamma: f64,
) -> Result<LmiCertificate> {
    check_gain_shape(sys, k)?;
    perf.validate()?;
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(SynthesisError::Precondition(format!("gamma must be non-negative, got {gamma}")));
    }
    let n = sys.states();
    let a_cl = &sys.a - &sys.b_u * &k.k;
    let eig = eigenvalues_of("closed loop A - B_u K", &a_cl)?;
    let hurwitz = hurwitz_from_spectrum(&eig);
    if !hurwitz {
        let abscissa = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        return Ok(LmiCertificate {
            which: LmiKind::H2StateFeedback,
            blocks: Vec::new(),
            gamma: Some(gamma),
            trace_gap: None,
            closed_loop_hurwitz: false,
            closed_loop_eigenvalues: spectrum_pairs(&eig),
            feasible: false,
            diagnostics: vec![format!(
                "closed loop is not Hurwitz (spectral abscissa {abscissa:e}); no Gramian witness exists"
            )],
        });
    }

    let bwbw = &sys.b_w * sys.b_w.transpose();
    let c_cl = &perf.c_z - &perf.d_u * &k.k;
    let at = a_cl.transpose();
    let x0 = solve_lyapunov(&at, &bwbw)?;
    let x_unit = solve_lyapunov(&at, &Matrix::identity(n, n))?;
    let t0 = (&c_cl * &x0 * c_cl.transpose()).trace();
    let t_unit = (&c_cl * &x_unit * c_cl.transpose()).trace();
    let mut eps = H2_LMI_STRICTNESS * bwbw.norm().max(1e-12);
    if t_unit > 0.0 && t0 > 0.0 {
        eps = eps.min(H2_LMI_TRACE_BUDGET * t0 / t_unit);
    }
    let x = symmetrize(&(&x0 + &x_unit * eps));
    let w = -&k.k * &x;

    let ax_bw = &sys.a * &x + &sys.b_u * &w;
    let lyap_block = &ax_bw + ax_bw.transpose() + &bwbw;
    let lyap_scale = ax_bw.norm().max(bwbw.norm());

    let g = &perf.c_z * &x + &perf.d_u * &w;
    let x_inv = x.clone().try_inverse().ok_or(LinalgError::Singular("H2 witness X"))?;
    let gxg = symmetrize(&(&g * &x_inv * g.transpose()));
    let m = gxg.nrows();
    let eps_z = H2_LMI_STRICTNESS * (gxg.trace() / m.max(1) as f64).max(1e-300);
    let z = &gxg + Matrix::identity(m, m) * eps_z;

    let margin = |scale: f64| -H2_LMI_MARGIN * scale.max(f64::MIN_POSITIVE);
    let blocks = vec![
        LmiBlock::new("closed_loop_lyapunov", &lyap_block, margin(lyap_scale)),
        LmiBlock::new("witness_x_positive", &(-&x), margin(x.norm())),
        LmiBlock::new("performance_schur_complement", &(&gxg - &z), margin(z.norm())),
    ];
    let trace_gap = z.trace() - gamma * gamma;

    let mut diagnostics = Vec::new();
    for b in blocks.iter().filter(|b| !b.satisfied) {
        diagnostics.push(format!("{} violated: λ_max = {:e} ≥ {:e}", b.name, b.max_eigenvalue, b.threshold));
    }
    if trace_gap >= 0.0 {
        diagnostics.push(format!("trace(Z) = {:.9e} is not below γ² = {:.9e}", z.trace(), gamma * gamma));
    }
    let feasible = blocks.iter().all(|b| b.satisfied) && trace_gap < 0.0;
    Ok(LmiCertificate {
        which: LmiKind::H2StateFeedback,
        blocks,
        gamma: Some(gamma),
        trace_gap: Some(trace_gap),
        closed_loop_hurwitz: true,
        closed_loop_eigenvalues: spectrum_pairs(&eig),
        feasible,
        diagnostics,
    })
}
