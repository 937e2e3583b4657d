//! Integrated driver–vehicle–road model.
//!
//! A preview-point steering driver sits on top of a linear-tire bicycle model
//! expressed in global coordinates. The eight-component state is
//! `[v_x, v_y, r, phi, X, Y, delta_f, delta_f_dot]` and the control is the
//! lateral coordinate of the driver's preview point. Longitudinal acceleration
//! enters as an exogenous, held input.

use nalgebra::{DMatrix, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

pub type StateVector = SVector<f64, 8>;
pub type StateMatrix = SMatrix<f64, 8, 8>;
pub type InputMatrix = SMatrix<f64, 8, 1>;

/// Speed below which the model is clamped; the tire slip angles divide by `v_x`.
pub const V_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    /// Longitudinal velocity (m/s).
    pub vx: f64,
    /// Lateral velocity (m/s).
    pub vy: f64,
    /// Yaw rate (rad/s).
    pub yaw_rate: f64,
    /// Yaw angle (rad).
    pub yaw: f64,
    /// Global longitudinal position (m).
    pub x: f64,
    /// Global lateral position (m).
    pub y: f64,
    /// Front-wheel steering angle (rad).
    pub steer: f64,
    /// Steering angle rate (rad/s).
    pub steer_rate: f64,
}

impl VehicleState {
    /// A vehicle driving straight along the X axis.
    pub fn straight(vx: f64, x: f64, y: f64) -> Self {
        Self {
            vx,
            x,
            y,
            ..Self::default()
        }
    }

    pub fn to_vector(&self) -> StateVector {
        StateVector::from([
            self.vx,
            self.vy,
            self.yaw_rate,
            self.yaw,
            self.x,
            self.y,
            self.steer,
            self.steer_rate,
        ])
    }

    pub fn from_vector(v: &StateVector) -> Self {
        Self {
            vx: v[0],
            vy: v[1],
            yaw_rate: v[2],
            yaw: v[3],
            x: v[4],
            y: v[5],
            steer: v[6],
            steer_rate: v[7],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }

    fn check(&self) -> Result<(), ModelError> {
        if !self.is_finite() {
            return Err(ModelError::NonFinite("state"));
        }
        if self.vx <= 0.0 {
            return Err(ModelError::NonPositiveSpeed(self.vx));
        }
        Ok(())
    }
}

/// Bicycle-model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Mass (kg).
    pub mass: f64,
    /// Yaw moment of inertia (kg·m²).
    pub yaw_inertia: f64,
    /// CoG to front axle (m).
    pub lf: f64,
    /// CoG to rear axle (m).
    pub lr: f64,
    /// Front cornering stiffness (N/rad).
    pub kf: f64,
    /// Rear cornering stiffness (N/rad).
    pub kr: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1300.0,
            yaw_inertia: 2500.0,
            lf: 1.25,
            lr: 1.32,
            kf: 35000.0,
            kr: 38000.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        positive("mass", self.mass)?;
        positive("yaw_inertia", self.yaw_inertia)?;
        positive("lf", self.lf)?;
        positive("lr", self.lr)?;
        positive("kf", self.kf)?;
        positive("kr", self.kr)
    }
}

/// Steering-wheel to front-wheel transmission ratio used when none is given.
///
/// The driver gain acts on the steering wheel; fed straight to the front wheel
/// the loop goes unstable above walking pace. 1/25 keeps every built-in style
/// stable up to 25 m/s.
pub const DEFAULT_STEERING_RATIO: f64 = 0.04;

fn default_steering_ratio() -> f64 {
    DEFAULT_STEERING_RATIO
}

/// Preview driver parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverParams {
    /// Physical delay time T_d (s).
    pub delay: f64,
    /// Preview time T_p (s).
    pub preview: f64,
    /// Steering proportional gain G_s (rad of steering wheel per m).
    pub gain: f64,
    /// Damping-rate parameter a.
    pub damping: f64,
    /// Transmission ratio K_s from steering wheel to front wheel.
    #[serde(default = "default_steering_ratio")]
    pub steering_ratio: f64,
}

impl DriverParams {
    pub const fn new(delay: f64, preview: f64, gain: f64, damping: f64) -> Self {
        Self { delay, preview, gain, damping, steering_ratio: DEFAULT_STEERING_RATIO }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        positive("delay", self.delay)?;
        positive("preview", self.preview)?;
        positive("gain", self.gain)?;
        positive("damping", self.damping)?;
        positive("steering_ratio", self.steering_ratio)
    }

    /// Coefficient multiplying the preview error in the steering-acceleration row.
    pub fn preview_coefficient(&self) -> f64 {
        self.steering_ratio * self.gain / (self.damping * self.delay * self.delay)
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Preview-point lateral coordinate Y_p (m).
    pub preview_y: f64,
    /// Longitudinal acceleration command (m/s²).
    pub accel: f64,
}

struct TireForces {
    front: f64,
    rear: f64,
}

fn tire_forces(s: &VehicleState, vp: &VehicleParams) -> TireForces {
    let alpha_f = -s.steer + (s.vy + vp.lf * s.yaw_rate) / s.vx;
    let alpha_r = (s.vy - vp.lr * s.yaw_rate) / s.vx;
    TireForces {
        front: -vp.kf * alpha_f,
        rear: -vp.kr * alpha_r,
    }
}

fn rhs(s: &VehicleState, u: &ControlInput, vp: &VehicleParams, dp: &DriverParams) -> StateVector {
    let f = tire_forces(s, vp);
    let cos_d = s.steer.cos();
    let (sin_phi, cos_phi) = s.yaw.sin_cos();
    let ad = dp.damping * dp.delay;
    let add = ad * dp.delay;
    let preview_error = u.preview_y - (s.y + dp.preview * s.vx * s.yaw);
    StateVector::from([
        s.vy * s.yaw_rate + u.accel,
        -s.vx * s.yaw_rate + (f.front * cos_d + f.rear) / vp.mass,
        (vp.lf * f.front * cos_d - vp.lr * f.rear) / vp.yaw_inertia,
        s.yaw_rate,
        s.vx * cos_phi - s.vy * sin_phi,
        s.vx * sin_phi + s.vy * cos_phi,
        s.steer_rate,
        -s.steer_rate / ad - s.steer / add + dp.preview_coefficient() * preview_error,
    ])
}

/// Time derivative of the integrated state.
pub fn derivatives(
    state: &VehicleState,
    input: &ControlInput,
    vp: &VehicleParams,
    dp: &DriverParams,
) -> Result<StateVector, ModelError> {
    state.check()?;
    if !(input.preview_y.is_finite() && input.accel.is_finite()) {
        return Err(ModelError::NonFinite("input"));
    }
    Ok(rhs(state, input, vp, dp))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: VehicleState,
    /// Set when `vx` had to be clamped to [`V_FLOOR`].
    pub clamped: bool,
}

/// One classical RK4 step. A negative `dt` integrates backwards.
pub fn step(
    state: &VehicleState,
    input: &ControlInput,
    dt: f64,
    vp: &VehicleParams,
    dp: &DriverParams,
) -> Result<StepOutcome, ModelError> {
    if !dt.is_finite() || dt == 0.0 {
        return Err(ModelError::InvalidParameter { name: "dt", value: dt });
    }
    derivatives(state, input, vp, dp)?;

    let mut clamped = false;
    let mut eval = |x: &StateVector| {
        let mut s = VehicleState::from_vector(x);
        if s.vx < V_FLOOR {
            s.vx = V_FLOOR;
            clamped = true;
        }
        rhs(&s, input, vp, dp)
    };
    let x0 = state.to_vector();
    let k1 = eval(&x0);
    let k2 = eval(&(x0 + k1 * (0.5 * dt)));
    let k3 = eval(&(x0 + k2 * (0.5 * dt)));
    let k4 = eval(&(x0 + k3 * dt));
    let x1 = x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);

    let mut next = VehicleState::from_vector(&x1);
    if !next.is_finite() {
        return Err(ModelError::NonFinite("integrated state"));
    }
    if next.vx < V_FLOOR {
        next.vx = V_FLOOR;
        clamped = true;
    }
    Ok(StepOutcome { state: next, clamped })
}

/// Analytic Jacobians `(df/dx, df/du)` at the given operating point, with `u = Y_p`.
pub fn linearize(
    state: &VehicleState,
    input: &ControlInput,
    vp: &VehicleParams,
    dp: &DriverParams,
) -> Result<(StateMatrix, InputMatrix), ModelError> {
    derivatives(state, input, vp, dp)?;
    let s = state;
    let f = tire_forces(s, vp);
    let (sin_d, cos_d) = s.steer.sin_cos();
    let (sin_phi, cos_phi) = s.yaw.sin_cos();
    let vx2 = s.vx * s.vx;

    // slip-angle partials w.r.t. (vx, vy, r, delta)
    let daf = [-(s.vy + vp.lf * s.yaw_rate) / vx2, 1.0 / s.vx, vp.lf / s.vx, -1.0];
    let dar = [-(s.vy - vp.lr * s.yaw_rate) / vx2, 1.0 / s.vx, -vp.lr / s.vx, 0.0];
    let dff: Vec<f64> = daf.iter().map(|d| -vp.kf * d).collect();
    let dfr: Vec<f64> = dar.iter().map(|d| -vp.kr * d).collect();
    // d(F_yf cos delta)/d delta
    let dfront_cos_ddelta = dff[3] * cos_d - f.front * sin_d;

    let mut a = StateMatrix::zeros();
    // row 0: vy*r + ax
    a[(0, 1)] = s.yaw_rate;
    a[(0, 2)] = s.vy;
    // row 1: -vx*r + (Fyf cos d + Fyr)/m
    a[(1, 0)] = -s.yaw_rate + (dff[0] * cos_d + dfr[0]) / vp.mass;
    a[(1, 1)] = (dff[1] * cos_d + dfr[1]) / vp.mass;
    a[(1, 2)] = -s.vx + (dff[2] * cos_d + dfr[2]) / vp.mass;
    a[(1, 6)] = dfront_cos_ddelta / vp.mass;
    // row 2: (lf Fyf cos d - lr Fyr)/Iz
    a[(2, 0)] = (vp.lf * dff[0] * cos_d - vp.lr * dfr[0]) / vp.yaw_inertia;
    a[(2, 1)] = (vp.lf * dff[1] * cos_d - vp.lr * dfr[1]) / vp.yaw_inertia;
    a[(2, 2)] = (vp.lf * dff[2] * cos_d - vp.lr * dfr[2]) / vp.yaw_inertia;
    a[(2, 6)] = vp.lf * dfront_cos_ddelta / vp.yaw_inertia;
    // row 3: r
    a[(3, 2)] = 1.0;
    // row 4: vx cos phi - vy sin phi
    a[(4, 0)] = cos_phi;
    a[(4, 1)] = -sin_phi;
    a[(4, 3)] = -s.vx * sin_phi - s.vy * cos_phi;
    // row 5: vx sin phi + vy cos phi
    a[(5, 0)] = sin_phi;
    a[(5, 1)] = cos_phi;
    a[(5, 3)] = s.vx * cos_phi - s.vy * sin_phi;
    // row 6: delta_dot
    a[(6, 7)] = 1.0;
    // row 7: driver
    let ad = dp.damping * dp.delay;
    let add = ad * dp.delay;
    let g = dp.preview_coefficient();
    a[(7, 0)] = -g * dp.preview * s.yaw;
    a[(7, 3)] = -g * dp.preview * s.vx;
    a[(7, 5)] = -g;
    a[(7, 6)] = -1.0 / add;
    a[(7, 7)] = -1.0 / ad;

    let mut b = InputMatrix::zeros();
    b[7] = g;
    Ok((a, b))
}

/// Zero-order-hold discretization of `x' = A x + B u`.
///
/// Returns `(e^{A dt}, ∫_0^dt e^{A τ} dτ B)`, both read off the exponential of
/// the augmented matrix `[[A, B], [0, 0]] * dt`.
pub fn discretize<const C: usize>(
    a: &StateMatrix,
    b: &SMatrix<f64, 8, C>,
    dt: f64,
) -> Result<(StateMatrix, SMatrix<f64, 8, C>), ModelError> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(ModelError::InvalidParameter { name: "dt", value: dt });
    }
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(ModelError::NonFinite("system matrices"));
    }
    let n = 8 + C;
    let mut m = DMatrix::<f64>::zeros(n, n);
    m.view_mut((0, 0), (8, 8)).copy_from(&(a * dt));
    m.view_mut((0, 8), (8, C)).copy_from(&(b * dt));
    let e = m.exp();
    let ak = StateMatrix::from_fn(|i, j| e[(i, j)]);
    let bk = SMatrix::<f64, 8, C>::from_fn(|i, j| e[(i, 8 + j)]);
    Ok((ak, bk))
}
