//! Plant models for the vertical channel.
//!
//! Units: states follow their labels (m, m/s, rad/s, or scaled internal
//! coordinates for the minimal realizations); the control input is a PPM
//! motor command; the disturbance is an additive vertical acceleration
//! (m/s² equivalent) on the velocity state.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lincore::{ensure_finite, LinalgError, Matrix};

/// Static gain of the minimal-realization velocity plant `−k/(s(s+10))`.
pub const VELOCITY_PLANT_GAIN: f64 = 0.2968;

/// Motor pole of the minimal realizations (1/s).
pub const MOTOR_POLE: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter {name}: {value} (must be positive and finite)")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("rotor {index} speed {value} is negative")]
    NegativeRotorSpeed { index: usize, value: f64 },
    #[error("model has no outputs to integrate")]
    NoOutputs,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Linear plant `ẋ = Ax + B_u u + B_w w`, `y = Cx`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: Matrix,
    pub b_u: Matrix,
    pub b_w: Matrix,
    pub c: Matrix,
    pub state_labels: Vec<String>,
}

impl StateSpaceModel {
    pub fn new(a: Matrix, b_u: Matrix, b_w: Matrix, c: Matrix, state_labels: Vec<String>) -> Result<Self, LinalgError> {
        let n = a.nrows();
        let dim = |detail: String| LinalgError::Dimension { op: "StateSpaceModel::new", detail };
        if !a.is_square() {
            return Err(dim(format!("a is {}x{}", a.nrows(), a.ncols())));
        }
        if b_u.nrows() != n || b_w.nrows() != n || c.ncols() != n {
            return Err(dim(format!(
                "n = {n}, b_u {}x{}, b_w {}x{}, c {}x{}",
                b_u.nrows(),
                b_u.ncols(),
                b_w.nrows(),
                b_w.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if state_labels.len() != n {
            return Err(dim(format!("{} labels for {n} states", state_labels.len())));
        }
        ensure_finite("StateSpaceModel a", &a)?;
        ensure_finite("StateSpaceModel b_u", &b_u)?;
        ensure_finite("StateSpaceModel b_w", &b_w)?;
        ensure_finite("StateSpaceModel c", &c)?;
        Ok(Self { a, b_u, b_w, c, state_labels })
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b_u.ncols()
    }

    pub fn disturbances(&self) -> usize {
        self.b_w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// `C(sI − A)⁻¹B` for the given input matrix.
    fn transfer(&self, b: &Matrix, s: Complex64) -> Option<DMatrix<Complex64>> {
        let n = self.states();
        let resolvent = DMatrix::<Complex64>::identity(n, n) * s - self.a.map(Complex64::from);
        let x = resolvent.lu().solve(&b.map(Complex64::from))?;
        Some(self.c.map(Complex64::from) * x)
    }

    /// Transfer matrix from `u` to `y` at `s`; `None` when `s` is a pole.
    pub fn transfer_u(&self, s: Complex64) -> Option<DMatrix<Complex64>> {
        self.transfer(&self.b_u, s)
    }

    /// Transfer matrix from `w` to `y` at `s`; `None` when `s` is a pole.
    pub fn transfer_w(&self, s: Complex64) -> Option<DMatrix<Complex64>> {
        self.transfer(&self.b_w, s)
    }

    /// Long-format CSV dump with header `matrix,row,col,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("matrix,row,col,value\n");
        for (name, m) in [("A", &self.a), ("B_u", &self.b_u), ("B_w", &self.b_w), ("C", &self.c)] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    out.push_str(&format!("{name},{i},{j},{:.9e}\n", m[(i, j)]));
                }
            }
        }
        out
    }
}

/// Physical constants of the hover-linearized vertical model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadVerticalParams {
    /// Thrust coefficient `b` (kg·m).
    pub thrust_coeff: f64,
    /// Vehicle mass (kg).
    pub mass: f64,
    /// Hover rotor speed `Ω₀` (rad/s).
    pub hover_speed: f64,
    /// Motor pole (1/s).
    pub motor_pole: f64,
    /// Motor gain (rad/s per PPM).
    pub motor_gain: f64,
    /// Yaw drag coefficient `d` (kg·m²), used only by the mixer.
    pub drag_coeff: f64,
}

impl QuadVerticalParams {
    pub const DEFAULT_THRUST_COEFF: f64 = 1.5108e-5;
    pub const DEFAULT_MASS: f64 = 1.07;
    /// Rotor-to-acceleration coupling `2Ω₀b/m` of the reference model.
    pub const DEFAULT_COUPLING: f64 = 0.0106;

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [
            ("thrust_coeff", self.thrust_coeff),
            ("mass", self.mass),
            ("hover_speed", self.hover_speed),
            ("motor_pole", self.motor_pole),
            ("motor_gain", self.motor_gain),
            ("drag_coeff", self.drag_coeff),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParam { name, value });
            }
        }
        Ok(())
    }

    /// `2Ω₀b/m`, the magnitude of each rotor's entry in the `ẇ_v` row.
    pub fn coupling(&self) -> f64 {
        2.0 * self.hover_speed * self.thrust_coeff / self.mass
    }

    /// Steady motor command holding `Ω₀`: `motor_pole·Ω₀ / motor_gain` (PPM).
    pub fn hover_input(&self) -> f64 {
        self.motor_pole * self.hover_speed / self.motor_gain
    }
}

impl Default for QuadVerticalParams {
    fn default() -> Self {
        let thrust_coeff = Self::DEFAULT_THRUST_COEFF;
        let mass = Self::DEFAULT_MASS;
        Self {
            thrust_coeff,
            mass,
            // Chosen so that 2Ω₀b/m gives the coupling 0.0106.
            hover_speed: Self::DEFAULT_COUPLING * mass / (2.0 * thrust_coeff),
            motor_pole: MOTOR_POLE,
            motor_gain: 7.0,
            drag_coeff: 7.5e-7,
        }
    }
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Six-state model with `x = (z, w_v, Ω₁, Ω₂, Ω₃, Ω₄)` and `y = (z, w_v)`.
pub fn build_vertical_full(p: &QuadVerticalParams) -> Result<StateSpaceModel, ModelError> {
    p.validate()?;
    let k = p.coupling();
    let mut a = Matrix::zeros(6, 6);
    a[(0, 1)] = 1.0;
    for (j, sign) in [(2, -1.0), (3, 1.0), (4, -1.0), (5, 1.0)] {
        a[(1, j)] = sign * k;
        a[(j, j)] = -p.motor_pole;
    }
    let b_u = Matrix::from_column_slice(6, 1, &[0.0, 0.0, p.motor_gain, -p.motor_gain, p.motor_gain, -p.motor_gain]);
    let b_w = Matrix::from_column_slice(6, 1, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let mut c = Matrix::zeros(2, 6);
    c[(0, 0)] = 1.0;
    c[(1, 1)] = 1.0;
    Ok(StateSpaceModel::new(a, b_u, b_w, c, labels(&["z", "w_v", "omega_1", "omega_2", "omega_3", "omega_4"]))?)
}

/// Minimal realization of `−0.2968/(s(s+10))` from PPM input to vertical speed.
///
/// `x₂` is the velocity scaled by `−1/0.2968`, so the disturbance enters with
/// the reciprocal gain.
pub fn build_velocity_plant() -> StateSpaceModel {
    let k = VELOCITY_PLANT_GAIN;
    StateSpaceModel::new(
        Matrix::from_row_slice(2, 2, &[-MOTOR_POLE, 0.0, 1.0, 0.0]),
        Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
        Matrix::from_column_slice(2, 1, &[0.0, 1.0 / k]),
        Matrix::from_row_slice(1, 2, &[0.0, -k]),
        labels(&["x1", "x2"]),
    )
    .expect("velocity plant dimensions are fixed")
}

/// `−0.2968/(s²(s+10))`: the velocity realization followed by an output
/// integrator, disturbance still entering at the velocity state.
pub fn build_position_plant() -> StateSpaceModel {
    let k = VELOCITY_PLANT_GAIN;
    #[rustfmt::skip]
    let a = Matrix::from_row_slice(3, 3, &[
        -MOTOR_POLE, 0.0, 0.0,
        1.0, 0.0, 0.0,
        0.0, 1.0, 0.0,
    ]);
    StateSpaceModel::new(
        a,
        Matrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
        Matrix::from_column_slice(3, 1, &[0.0, 1.0 / k, 0.0]),
        Matrix::from_row_slice(1, 3, &[0.0, 0.0, -k]),
        labels(&["x1", "x2", "x3"]),
    )
    .expect("position plant dimensions are fixed")
}

/// How the integrator row `ζ̇ = (·)x` of the augmented model is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorRow {
    /// `ζ̇ = y = Cx`.
    #[default]
    Output,
    /// `ζ̇ = Cx / 0.2968²`, which for the velocity plant gives the row
    /// `(0, −1/0.2968)`.
    Printed,
}

/// Plant together with its integrator-augmented form, state `[x; ζ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedModel {
    pub base: StateSpaceModel,
    pub aug: StateSpaceModel,
}

pub fn augment_with_integrator(sys: &StateSpaceModel) -> Result<AugmentedModel, ModelError> {
    augment_with_row(sys, IntegratorRow::Output)
}

pub fn augment_with_row(sys: &StateSpaceModel, row: IntegratorRow) -> Result<AugmentedModel, ModelError> {
    let n = sys.states();
    let l = sys.outputs();
    if l == 0 {
        return Err(ModelError::NoOutputs);
    }
    let lower = match row {
        IntegratorRow::Output => sys.c.clone(),
        IntegratorRow::Printed => &sys.c / (VELOCITY_PLANT_GAIN * VELOCITY_PLANT_GAIN),
    };
    let mut a = Matrix::zeros(n + l, n + l);
    a.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    a.view_mut((n, 0), (l, n)).copy_from(&lower);
    let mut b_u = Matrix::zeros(n + l, sys.inputs());
    b_u.view_mut((0, 0), (n, sys.inputs())).copy_from(&sys.b_u);
    let mut b_w = Matrix::zeros(n + l, sys.disturbances());
    b_w.view_mut((0, 0), (n, sys.disturbances())).copy_from(&sys.b_w);
    let mut c = Matrix::zeros(l, n + l);
    c.view_mut((0, 0), (l, n)).copy_from(&sys.c);
    let mut state_labels = sys.state_labels.clone();
    state_labels.extend((0..l).map(|i| if l == 1 { "zeta".to_string() } else { format!("zeta{}", i + 1) }));
    let aug = StateSpaceModel::new(a, b_u, b_w, c, state_labels)?;
    Ok(AugmentedModel { base: sys.clone(), aug })
}

/// Rotor speeds `Ω₁..Ω₄` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorCommand(pub [f64; 4]);

/// `(U₁, U₂, U₃, U₄)`: collective thrust, roll, pitch and yaw inputs.
pub fn rotor_mixer(cmd: &RotorCommand, p: &QuadVerticalParams) -> Result<[f64; 4], ModelError> {
    for (i, &w) in cmd.0.iter().enumerate() {
        if w < 0.0 || !w.is_finite() {
            return Err(ModelError::NegativeRotorSpeed { index: i + 1, value: w });
        }
    }
    let sq = cmd.0.map(|w| w * w);
    let b = p.thrust_coeff;
    let d = p.drag_coeff;
    Ok([
        b * (sq[0] + sq[1] + sq[2] + sq[3]),
        b * (sq[1] - sq[3]),
        b * (sq[0] - sq[2]),
        d * (sq[0] - sq[1] + sq[2] - sq[3]),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincore::{eigenvalues, spectra_match};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn full_model_matches_reference_matrices() {
        let sys = build_vertical_full(&QuadVerticalParams::default()).unwrap();
        let row: Vec<f64> = (2..6).map(|j| sys.a[(1, j)]).collect();
        for (got, want) in row.iter().zip([-0.0106, 0.0106, -0.0106, 0.0106]) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
        assert_eq!(sys.b_u.as_slice(), &[0.0, 0.0, 7.0, -7.0, 7.0, -7.0]);
        assert_eq!(sys.b_w.as_slice(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let ev = eigenvalues(&sys.a).unwrap();
        assert!(spectra_match(&ev, &[c(0.0), c(0.0), c(-10.0), c(-10.0), c(-10.0), c(-10.0)], 1e-12));
    }

    #[test]
    fn heavier_vehicle_halves_coupling() {
        let base = QuadVerticalParams::default();
        let heavy = QuadVerticalParams { mass: 2.0 * base.mass, ..base };
        let a0 = build_vertical_full(&base).unwrap().a;
        let a1 = build_vertical_full(&heavy).unwrap().a;
        for j in 2..6 {
            assert!((a1[(1, j)] - 0.5 * a0[(1, j)]).abs() < 1e-16);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let p = QuadVerticalParams { mass: 0.0, ..Default::default() };
        assert!(matches!(build_vertical_full(&p), Err(ModelError::InvalidParam { name: "mass", .. })));
    }

    #[test]
    fn velocity_plant_tf_and_structure() {
        let sys = build_velocity_plant();
        let g = sys.transfer_u(c(1.0)).unwrap()[(0, 0)];
        assert!((g.re + 0.2968 / 11.0).abs() < 1e-15 && g.im.abs() < 1e-15);
        assert_eq!((sys.c.clone() * &sys.b_u)[(0, 0)], 0.0);
        // w drives the velocity output with unit (negative) gain through x₂.
        assert!((sys.b_w[(1, 0)] * sys.c[(0, 1)] + 1.0).abs() < 1e-15);
        assert!(spectra_match(&eigenvalues(&sys.a).unwrap(), &[c(0.0), c(-10.0)], 1e-12));
    }

    #[test]
    fn position_plant_is_velocity_plus_integrator() {
        let vel = build_velocity_plant();
        let pos = build_position_plant();
        for s in [c(1.0), Complex64::new(0.3, 2.0), Complex64::new(-1.0, 0.5)] {
            let gv = vel.transfer_u(s).unwrap()[(0, 0)];
            let gp = pos.transfer_u(s).unwrap()[(0, 0)];
            assert!((gp - gv / s).norm() < 1e-14);
        }
        let g1 = pos.transfer_u(c(1.0)).unwrap()[(0, 0)];
        assert!((g1.re + 0.2968 / 11.0).abs() < 1e-15);
        // The double zero is a Jordan block; its computed pair spreads like sqrt(eps).
        assert!(spectra_match(&eigenvalues(&pos.a).unwrap(), &[c(0.0), c(0.0), c(-10.0)], 1e-7));
    }

    #[test]
    fn augmentation_blocks() {
        let aug = augment_with_integrator(&build_velocity_plant()).unwrap().aug;
        assert_eq!(aug.states(), 3);
        assert_eq!(aug.a.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, -0.2968, 0.0]);
        assert_eq!(aug.b_u.as_slice(), &[1.0, 0.0, 0.0]);
        let printed = augment_with_row(&build_velocity_plant(), IntegratorRow::Printed).unwrap().aug;
        assert!((printed.a[(2, 1)] + 1.0 / 0.2968).abs() < 1e-12);
        assert_eq!(augment_with_integrator(&build_position_plant()).unwrap().aug.states(), 4);
    }

    #[test]
    fn augmentation_adds_zero_eigenvalues() {
        let full = build_vertical_full(&QuadVerticalParams::default()).unwrap();
        let aug = augment_with_integrator(&full).unwrap().aug;
        let ev = eigenvalues(&aug.a).unwrap();
        let mut want = eigenvalues(&full.a).unwrap();
        want.extend([c(0.0), c(0.0)]);
        assert!(spectra_match(&ev, &want, 1e-6));
    }

    #[test]
    fn mixer_examples() {
        let p = QuadVerticalParams::default();
        let w = 100.0;
        let u = rotor_mixer(&RotorCommand([w; 4]), &p).unwrap();
        assert!((u[0] - 0.60432).abs() < 1e-12);
        assert_eq!(&u[1..], &[0.0, 0.0, 0.0]);
        let u = rotor_mixer(&RotorCommand([0.0, w, 0.0, 0.0]), &p).unwrap();
        let bw2 = p.thrust_coeff * w * w;
        assert!((u[0] - bw2).abs() < 1e-15 && (u[1] - bw2).abs() < 1e-15 && u[2] == 0.0);
        assert!((u[3] + p.drag_coeff * w * w).abs() < 1e-15);
        assert!(matches!(
            rotor_mixer(&RotorCommand([1.0, -1.0, 0.0, 0.0]), &p),
            Err(ModelError::NegativeRotorSpeed { index: 2, .. })
        ));
    }

    #[test]
    fn csv_export_has_every_entry() {
        let csv = build_velocity_plant().to_csv();
        assert!(csv.starts_with("matrix,row,col,value\n"));
        assert_eq!(csv.lines().count(), 1 + 4 + 2 + 2 + 2);
    }
}
