//! PID gains from an optimal state-feedback gain on the integrator-augmented
//! plant.
//!
//! A PID law `u = −K_P y − K_I ∫y − K_D ẏ` on `ẋ = Ax + B_u u + B_w w`,
//! `y = Cx` resolves (solving the algebraic loop through `ẏ`) to
//!
//! ```text
//! u = −Mx − Nw − Lζ,   f = 1 + K_D·CB_u
//! M = (K_P C + K_D CA)/f,   N = K_D CB_w/f,   L = K_I/f
//! ```
//!
//! with `ζ = ∫y`. An augmented gain `[K₁ K₂]` is matched term by term
//! (`M = K₁`, `L = K₂`) and inverted with
//! `[K_P K_D] = M·[C; CA − CB_uM]⁺`, `K_I = f·L`. The `Nw` term is not
//! matched: `w` is not measured.
//!
//! Only SISO plants are supported.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lincore::{pinv_with_rank, LinalgError, Matrix};
use crate::models::StateSpaceModel;
use crate::synthesis::FeedbackGain;
use crate::tolerances::EXTRACTION_WARN_RESIDUAL;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PidError {
    #[error("PID extraction needs a SISO plant, got {inputs} inputs and {outputs} outputs")]
    NotSiso { inputs: usize, outputs: usize },
    #[error("degenerate derivative loop: 1 + K_D·CB_u = {factor:e}")]
    Degenerate { factor: f64 },
    #[error("augmented gain has {got} columns, expected {expected}")]
    GainShape { expected: usize, got: usize },
    #[error("[C; CA - CB_u M] has rank {rank}, need 2")]
    RankDeficient { rank: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, PidError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd }
    }

    pub fn is_finite(&self) -> bool {
        self.kp.is_finite() && self.ki.is_finite() && self.kd.is_finite()
    }

    pub fn negated(&self) -> Self {
        Self::new(-self.kp, -self.ki, -self.kd)
    }
}

/// Resolved PID feedback maps onto state, disturbance and integral.
#[derive(Debug, Clone, PartialEq)]
pub struct MnlMatrices {
    pub m: Matrix,
    pub n: Matrix,
    pub l: Matrix,
    /// `1 + K_D·CB_u`.
    pub factor: f64,
}

fn siso_cb(sys: &StateSpaceModel) -> Result<f64> {
    if sys.inputs() != 1 || sys.outputs() != 1 {
        return Err(PidError::NotSiso { inputs: sys.inputs(), outputs: sys.outputs() });
    }
    Ok((&sys.c * &sys.b_u)[(0, 0)])
}

fn loop_factor(kd: f64, cb: f64) -> Result<f64> {
    let factor = 1.0 + kd * cb;
    if !factor.is_finite() || factor.abs() < 1e-12 {
        return Err(PidError::Degenerate { factor });
    }
    Ok(factor)
}

pub fn extract_mnl(g: &PidGains, sys: &StateSpaceModel) -> Result<MnlMatrices> {
    let cb = siso_cb(sys)?;
    let factor = loop_factor(g.kd, cb)?;
    let m = (&sys.c * g.kp + &sys.c * &sys.a * g.kd) / factor;
    let n = &sys.c * &sys.b_w * (g.kd / factor);
    let l = Matrix::from_element(1, 1, g.ki / factor);
    Ok(MnlMatrices { m, n, l, factor })
}

/// `[M L]`: the augmented state gain a PID law is equivalent to.
pub fn state_gain_from_pid(g: &PidGains, sys: &StateSpaceModel) -> Result<FeedbackGain> {
    let mnl = extract_mnl(g, sys)?;
    let n = sys.states();
    let mut k = Matrix::zeros(1, n + 1);
    k.view_mut((0, 0), (1, n)).copy_from(&mnl.m);
    k[(0, n)] = mnl.l[(0, 0)];
    Ok(FeedbackGain::new(k))
}

/// PID gains recovered from an augmented state gain, with the fit quality.
#[derive(Debug, Clone, PartialEq)]
pub struct PidExtraction {
    pub gains: PidGains,
    pub mnl: MnlMatrices,
    /// `‖[K_P K_D]·[C; CA − CB_uM] − M‖`.
    pub residual: f64,
    pub relative_residual: f64,
    /// True when the stacked matrix is square and invertible.
    pub exact: bool,
    pub warnings: Vec<String>,
}

pub fn pid_from_state_gain(k_aug: &FeedbackGain, sys: &StateSpaceModel) -> Result<PidExtraction> {
    let cb = siso_cb(sys)?;
    let n = sys.states();
    if k_aug.k.shape() != (1, n + 1) {
        return Err(PidError::GainShape { expected: n + 1, got: k_aug.k.ncols() });
    }
    let m = k_aug.k.columns(0, n).into_owned();
    let l = k_aug.k[(0, n)];

    let ca = &sys.c * &sys.a;
    let mut stack = Matrix::zeros(2, n);
    stack.row_mut(0).copy_from(&sys.c.row(0));
    stack.row_mut(1).copy_from(&(ca - &m * cb).row(0));
    let (pinv, rank) = pinv_with_rank(&stack);
    if rank < 2 {
        return Err(PidError::RankDeficient { rank });
    }
    let pd = &m * pinv;
    let (kp, kd) = (pd[(0, 0)], pd[(0, 1)]);
    let factor = loop_factor(kd, cb)?;
    let ki = factor * l;

    let residual = (&pd * &stack - &m).norm();
    let m_norm = m.norm();
    let relative_residual = if m_norm > 0.0 { residual / m_norm } else { residual };
    let mut warnings = Vec::new();
    if relative_residual > EXTRACTION_WARN_RESIDUAL {
        warnings.push(format!(
            "least-squares PID fit leaves relative residual {relative_residual:.3e} on M (‖M‖ = {m_norm:.3e})"
        ));
    }
    let gains = PidGains::new(kp, ki, kd);
    let mnl = extract_mnl(&gains, sys)?;
    Ok(PidExtraction { gains, mnl, residual, relative_residual, exact: n == 2, warnings })
}

/// Where the reference enters the PID law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceInjection {
    /// Integral on `y − r`, proportional and derivative on `y` only.
    #[default]
    IntegralOnError,
    /// All three terms on `y − r`. The derivative of a step is an impulse at
    /// `t = 0` and is not represented.
    FullError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PidLaw {
    #[serde(default)]
    pub reference: ReferenceInjection,
    /// Feed back the `−Nw` term (needs a measured disturbance).
    #[serde(default)]
    pub feed_disturbance: bool,
}

/// PID closed loop on `[x; ζ]` with `ζ̇ = y − r`.
///
/// `model.b_u` is the reference column and `model.c = [C 0]`. The applied
/// input is `u = control_state·[x; ζ] + control_reference·r + control_disturbance·w`.
#[derive(Debug, Clone, PartialEq)]
pub struct PidClosedLoop {
    pub model: StateSpaceModel,
    pub control_state: Matrix,
    pub control_reference: f64,
    pub control_disturbance: Matrix,
    pub gains: PidGains,
    pub mnl: MnlMatrices,
}

impl PidClosedLoop {
    pub fn control(&self, state: &Matrix, r: f64, w: &Matrix) -> f64 {
        (&self.control_state * state)[(0, 0)] + self.control_reference * r + (&self.control_disturbance * w)[(0, 0)]
    }
}

pub fn pid_closed_loop(sys: &StateSpaceModel, g: &PidGains, law: PidLaw) -> Result<PidClosedLoop> {
    let mnl = extract_mnl(g, sys)?;
    let n = sys.states();
    let p = sys.disturbances();

    let mut control_state = Matrix::zeros(1, n + 1);
    control_state.view_mut((0, 0), (1, n)).copy_from(&(-&mnl.m));
    control_state[(0, n)] = -mnl.l[(0, 0)];
    let control_reference = match law.reference {
        ReferenceInjection::IntegralOnError => 0.0,
        ReferenceInjection::FullError => g.kp / mnl.factor,
    };
    let control_disturbance = if law.feed_disturbance { -&mnl.n } else { Matrix::zeros(1, p) };

    // Open-loop augmented dynamics plus B_u times the control law.
    let mut a = Matrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    a.view_mut((n, 0), (1, n)).copy_from(&sys.c);
    let mut b_u_aug = Matrix::zeros(n + 1, 1);
    b_u_aug.view_mut((0, 0), (n, 1)).copy_from(&sys.b_u);
    a += &b_u_aug * &control_state;

    let mut b_r = &b_u_aug * control_reference;
    b_r[(n, 0)] -= 1.0;

    let mut b_w = Matrix::zeros(n + 1, p);
    b_w.view_mut((0, 0), (n, p)).copy_from(&sys.b_w);
    b_w += &b_u_aug * &control_disturbance;

    let mut c = Matrix::zeros(1, n + 1);
    c.view_mut((0, 0), (1, n)).copy_from(&sys.c);

    let mut labels = sys.state_labels.clone();
    labels.push("zeta".into());
    let model = StateSpaceModel::new(a, b_r, b_w, c, labels)?;
    Ok(PidClosedLoop { model, control_state, control_reference, control_disturbance, gains: *g, mnl })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincore::{eigenvalues, spectra_match};
    use crate::models::{augment_with_integrator, build_position_plant, build_velocity_plant};

    #[test]
    fn no_derivative_gives_plain_maps() {
        let sys = build_velocity_plant();
        let mnl = extract_mnl(&PidGains::new(3.0, 2.0, 0.0), &sys).unwrap();
        assert_eq!(mnl.m, &sys.c * 3.0);
        assert_eq!(mnl.n.norm(), 0.0);
        assert_eq!(mnl.l[(0, 0)], 2.0);
        let zero = extract_mnl(&PidGains::new(0.0, 0.0, 0.0), &sys).unwrap();
        assert_eq!(zero.m.norm() + zero.n.norm() + zero.l.norm(), 0.0);
    }

    #[test]
    fn velocity_plant_has_unit_loop_factor() {
        let sys = build_velocity_plant();
        for kd in [-115.1, 0.0, 42.0] {
            let mnl = extract_mnl(&PidGains::new(1.0, 1.0, kd), &sys).unwrap();
            assert_eq!(mnl.factor, 1.0);
            // N = K_D·CB_w = −K_D for the scaled velocity state.
            assert!((mnl.n[(0, 0)] + kd).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_loop_factor_is_reported() {
        let mut sys = build_velocity_plant();
        sys.c[(0, 0)] = 0.5; // CB_u = 0.5
        let err = extract_mnl(&PidGains::new(1.0, 1.0, -2.0), &sys).unwrap_err();
        assert!(matches!(err, PidError::Degenerate { .. }));
    }

    #[test]
    fn round_trip_with_nonzero_cb() {
        let mut sys = build_velocity_plant();
        sys.c[(0, 0)] = 0.3;
        let g = PidGains::new(-12.5, -3.25, 0.75);
        let k = state_gain_from_pid(&g, &sys).unwrap();
        let back = pid_from_state_gain(&k, &sys).unwrap();
        assert!(back.exact);
        assert!((back.gains.kp - g.kp).abs() < 1e-9);
        assert!((back.gains.ki - g.ki).abs() < 1e-9);
        assert!((back.gains.kd - g.kd).abs() < 1e-9);
        assert!(back.warnings.is_empty());
    }

    #[test]
    fn position_extraction_reports_residual() {
        let sys = build_position_plant();
        let k = FeedbackGain::new(Matrix::from_row_slice(1, 4, &[3.28, 38.2, 57.2, -100.0]));
        let ext = pid_from_state_gain(&k, &sys).unwrap();
        assert!(!ext.exact);
        assert!(ext.residual > 0.0);
        assert!(!ext.warnings.is_empty());
    }

    #[test]
    fn wrong_gain_width_rejected() {
        let sys = build_velocity_plant();
        let err = pid_from_state_gain(&FeedbackGain::zeros(1, 2), &sys).unwrap_err();
        assert_eq!(err, PidError::GainShape { expected: 3, got: 2 });
    }

    #[test]
    fn zero_gains_leave_open_loop_augmented_dynamics() {
        let sys = build_velocity_plant();
        let cl = pid_closed_loop(&sys, &PidGains::new(0.0, 0.0, 0.0), PidLaw::default()).unwrap();
        assert_eq!(cl.model.a, augment_with_integrator(&sys).unwrap().aug.a);
    }

    #[test]
    fn closed_loop_poles_match_augmented_state_feedback() {
        for sys in [build_velocity_plant(), build_position_plant()] {
            let g = PidGains::new(-300.0, -50.0, -40.0);
            let cl = pid_closed_loop(&sys, &g, PidLaw::default()).unwrap();
            let aug = augment_with_integrator(&sys).unwrap().aug;
            let k = state_gain_from_pid(&g, &sys).unwrap();
            let direct = eigenvalues(&(&aug.a - &aug.b_u * &k.k)).unwrap();
            assert!(spectra_match(&eigenvalues(&cl.model.a).unwrap(), &direct, 1e-8));
        }
    }

    #[test]
    fn full_error_law_feeds_reference_through_kp() {
        let sys = build_velocity_plant();
        let cl = pid_closed_loop(
            &sys,
            &PidGains::new(-2.0, -1.0, -0.5),
            PidLaw { reference: ReferenceInjection::FullError, feed_disturbance: true },
        )
        .unwrap();
        assert_eq!(cl.control_reference, -2.0);
        assert_eq!(cl.model.b_u[(0, 0)], -2.0);
        assert_eq!(cl.model.b_u[(2, 0)], -1.0);
        assert!((cl.control_disturbance[(0, 0)] - (-0.5)).abs() < 1e-12);
    }
}
