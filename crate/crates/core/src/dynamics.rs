//! Yaw-constrained vessel model.
//!
//! The state is `[p_x, p_y, φ, v]` with inputs `[a, ω]`:
//!
//! ```text
//! ṗ_x = cos(φ) v    ṗ_y = sin(φ) v    φ̇ = ω    v̇ = a
//! ```
//!
//! The simulation plant integrates this with RK4; the MPC uses a forward-Euler
//! discretization of its first-order Taylor expansion.

use nalgebra::{Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Angle, Vec2};
use crate::predicates::PredicateParams;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VesselState {
    pub x: f64,
    pub y: f64,
    pub phi: Angle,
    pub v: f64,
}

impl VesselState {
    pub fn new(x: f64, y: f64, phi: f64, v: f64) -> Self {
        VesselState {
            x,
            y,
            phi: Angle::new(phi),
            v,
        }
    }

    #[inline]
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Velocity vector `v · rad2vec(φ)`.
    #[inline]
    pub fn velocity(&self) -> Vec2 {
        self.phi.unit() * self.v
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.x, self.y, self.phi.rad(), self.v)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.phi.rad().is_finite() && self.v.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub a: f64,
    pub omega: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { a: 0.0, omega: 0.0 };

    pub fn new(a: f64, omega: f64) -> Self {
        ControlInput { a, omega }
    }

    pub fn clamped(self, p: &VesselParams) -> Self {
        ControlInput {
            a: self.a.clamp(-p.a_max, p.a_max),
            omega: self.omega.clamp(-p.omega_max, p.omega_max),
        }
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.a, self.omega)
    }
}

/// Physical limits and ISM tuning of one vessel type. Distances in meters,
/// angles in radians, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselParams {
    pub v_max: f64,
    pub v_des: f64,
    pub omega_max: f64,
    pub a_max: f64,
    pub length: f64,
    pub width: f64,

    /// Head-on turning angle and distances.
    pub alpha_h1: f64,
    pub d_h1: f64,
    pub d_h2: f64,
    /// Crossing turning angle and distances.
    pub alpha_c1: f64,
    pub d_c1: f64,
    pub d_c2: f64,
    pub d_c3: f64,
    /// Overtaking turning angle and distances.
    pub alpha_o1: f64,
    pub d_o1: f64,
    pub d_o2: f64,
    /// Stable-orientation window and tolerance.
    pub t_so: f64,
    pub alpha_so: f64,

    /// MPC prediction horizon.
    pub horizon: f64,
    pub d_wp: f64,
    pub d_term: f64,
    /// How far ahead guiding waypoints are placed.
    pub d_guide: f64,
    /// How long a classification must persist before the engine reacts.
    pub t_react: f64,

    pub predicates: PredicateParams,
}

impl VesselParams {
    /// Builds a parameter set from physical limits, deriving every
    /// length-dependent default from the vessel dimensions.
    pub fn with_limits(
        v_max: f64,
        v_des: f64,
        omega_max: f64,
        a_max: f64,
        length: f64,
        width: f64,
    ) -> Self {
        let alpha_c1 = 0.785;
        VesselParams {
            v_max,
            v_des,
            omega_max,
            a_max,
            length,
            width,
            alpha_h1: 0.8,
            d_h1: length + width,
            d_h2: 2.0 * length,
            alpha_c1,
            d_c1: 1.5 * alpha_c1 * v_des / omega_max,
            d_c2: 2.0 * length,
            d_c3: 2.0 * length + 2.0 * width,
            alpha_o1: 0.261,
            d_o1: 2.0 * length + 2.0 * width,
            d_o2: 2.0 * length,
            t_so: 10.0,
            alpha_so: 0.005,
            horizon: 90.0,
            d_wp: 0.5 * length,
            d_term: 0.25 * length,
            d_guide: 1e6,
            t_react: 30.0,
            predicates: PredicateParams::default(),
        }
    }

    /// Container ship.
    pub fn type1() -> Self {
        Self::with_limits(16.8, 8.4, 0.03, 0.24, 175.0, 25.4)
    }

    /// Tanker.
    pub fn type2() -> Self {
        Self::with_limits(7.02, 7.02, 0.0078, 0.0127, 304.8, 32.0)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "type1" => Ok(Self::type1()),
            "type2" => Ok(Self::type2()),
            other => Err(Error::Config(format!("unknown vessel type {other:?}"))),
        }
    }

    /// Returns a copy with a different desired speed; `d_c1` follows it.
    pub fn with_desired_speed(&self, v_des: f64) -> Self {
        let mut p = self.clone();
        p.v_des = v_des;
        p.d_c1 = 1.5 * p.alpha_c1 * v_des / p.omega_max;
        p
    }

    /// Radius of the disc used for velocity-obstacle tests.
    pub fn disc_radius(&self) -> f64 {
        (self.length + self.width) / 4.0
    }

    pub fn horizon_steps(&self, dt: f64) -> usize {
        (self.horizon / dt).round().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_max", self.v_max),
            ("v_des", self.v_des),
            ("omega_max", self.omega_max),
            ("a_max", self.a_max),
            ("length", self.length),
            ("width", self.width),
            ("horizon", self.horizon),
            ("d_wp", self.d_wp),
            ("d_term", self.d_term),
            ("t_so", self.t_so),
            ("alpha_so", self.alpha_so),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        if self.v_des > self.v_max {
            return Err(Error::Config(format!(
                "v_des {} exceeds v_max {}",
                self.v_des, self.v_max
            )));
        }
        if self.t_react < 0.0 {
            return Err(Error::Config("t_react must be non-negative".into()));
        }
        let reach = self.horizon * self.v_max;
        if self.d_guide <= reach {
            return Err(Error::Config(format!(
                "guiding distance {} is reachable within the horizon ({reach} m)",
                self.d_guide
            )));
        }
        self.predicates.validate()
    }
}

/// Affine discrete-time model `x⁺ = A x + B u + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDiscreteModel {
    pub a: Matrix4<f64>,
    pub b: Matrix4x2<f64>,
    pub c: Vector4<f64>,
    pub dt: f64,
}

impl LinearDiscreteModel {
    pub fn predict(&self, x: &Vector4<f64>, u: &Vector2<f64>) -> Vector4<f64> {
        self.a * x + self.b * u + self.c
    }
}

/// Continuous state derivative `[ṗ_x, ṗ_y, φ̇, v̇]`.
pub fn derivative(s: &VesselState, u: &ControlInput) -> Vector4<f64> {
    rates(&s.to_vector(), u)
}

fn rates(x: &Vector4<f64>, u: &ControlInput) -> Vector4<f64> {
    let (sin, cos) = x[2].sin_cos();
    Vector4::new(cos * x[3], sin * x[3], u.omega, u.a)
}

/// Advances the plant by `dt` with RK4 under a constant input.
pub fn step(s: &VesselState, u: &ControlInput, dt: f64, v_max: f64) -> VesselState {
    let x = s.to_vector();
    let k1 = rates(&x, u);
    let k2 = rates(&(x + k1 * (dt / 2.0)), u);
    let k3 = rates(&(x + k2 * (dt / 2.0)), u);
    let k4 = rates(&(x + k3 * dt), u);
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    VesselState {
        x: next[0],
        y: next[1],
        phi: Angle::new(next[2]),
        v: next[3].clamp(0.0, v_max),
    }
}

/// Jacobians of the continuous dynamics at `(s0, u0)`.
pub fn jacobians(s0: &VesselState) -> (Matrix4<f64>, Matrix4x2<f64>) {
    let (sin, cos) = s0.phi.rad().sin_cos();
    let v = s0.v;
    #[rustfmt::skip]
    let a_c = Matrix4::new(
        0.0, 0.0, -sin * v, cos,
        0.0, 0.0,  cos * v, sin,
        0.0, 0.0,  0.0,     0.0,
        0.0, 0.0,  0.0,     0.0,
    );
    #[rustfmt::skip]
    let b_c = Matrix4x2::new(
        0.0, 0.0,
        0.0, 0.0,
        0.0, 1.0,
        1.0, 0.0,
    );
    (a_c, b_c)
}

/// First-order Taylor expansion at `(s0, u0)` discretized with forward Euler.
pub fn linearize_discretize(s0: &VesselState, u0: &ControlInput, dt: f64) -> LinearDiscreteModel {
    let (a_c, b_c) = jacobians(s0);
    let x0 = s0.to_vector();
    let u = u0.to_vector();
    let f0 = derivative(s0, u0);
    LinearDiscreteModel {
        a: Matrix4::identity() + a_c * dt,
        b: b_c * dt,
        c: (f0 - a_c * x0 - b_c * u) * dt,
        dt,
    }
}
