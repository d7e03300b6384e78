//! Linearized MPC that tracks a desired-position trajectory.
//!
//! The dynamics are linearized around the current state and substituted into
//! the tracking cost, leaving a QP over the input sequence with box bounds
//! only.

pub mod qp;
pub mod reference;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x4, Vector2, Vector4};

use crate::dynamics::{linearize_discretize, ControlInput, LinearDiscreteModel, VesselParams, VesselState};
use crate::geometry::Vec2;
use crate::waypoint::WaypointPlan;

pub use qp::{BoxQp, QpSolution, SolverOptions, SolverStatus};
pub use reference::{get_reference, ReferenceTrajectory};

/// Relative Tikhonov term. The last input of the horizon never reaches a
/// costed position, so the Hessian is singular without it.
const RIDGE: f64 = 1e-5;

/// Condensed tracking problem over `u_0 .. u_{T-1}`, stored as
/// `[a_0, ω_0, a_1, ω_1, ...]`.
#[derive(Debug, Clone)]
pub struct CondensedQp {
    pub qp: BoxQp,
    /// Positions predicted with zero input, `k = 1..=T`.
    pub free_positions: Vec<Vec2>,
    /// Position response `C Aⁱ B` for `i = 0..T`.
    pub markov: Vec<Matrix2<f64>>,
}

fn position_rows() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

/// Builds `½ uᵀHu + qᵀu + const = Σ_{k=1}^{T} ‖p_k − p^d_k‖²`.
pub fn build_qp(s0: &VesselState, model: &LinearDiscreteModel, reference: &ReferenceTrajectory, params: &VesselParams) -> CondensedQp {
    let t = reference.horizon();
    let n = 2 * t;
    let c = position_rows();

    let mut free_positions = Vec::with_capacity(t);
    let mut errors = Vec::with_capacity(t);
    let mut x = s0.to_vector();
    for k in 1..=t {
        x = model.a * x + model.c;
        let p = c * x;
        free_positions.push(Vec2::new(p[0], p[1]));
        let d = reference.positions[k];
        errors.push(Vector2::new(p[0] - d.x, p[1] - d.y));
    }

    let mut markov = Vec::with_capacity(t);
    let mut power_b = model.b;
    for _ in 0..t {
        markov.push(c * power_b);
        power_b = model.a * power_b;
    }

    // H(j,l) = 2 Σ_{k>max(j,l)} M_{k-1-j}ᵀ M_{k-1-l}, filled diagonal by
    // diagonal from the end: S(j,l) = S(j+1,l+1) + M_{T-1-j}ᵀ M_{T-1-l}.
    let mut h = DMatrix::zeros(n, n);
    for offset in 0..t {
        let mut acc = Matrix2::zeros();
        for j in (0..t - offset).rev() {
            let l = j + offset;
            acc += markov[t - 1 - j].transpose() * markov[t - 1 - l];
            let block = acc * 2.0;
            h.fixed_view_mut::<2, 2>(2 * j, 2 * l).copy_from(&block);
            if offset > 0 {
                h.fixed_view_mut::<2, 2>(2 * l, 2 * j).copy_from(&block.transpose());
            }
        }
    }
    // Per channel, so each channel's block stays a multiple of a fixed matrix
    // as the speed changes and cached factorizations remain valid.
    for channel in 0..2 {
        let max_diag = (channel..n).step_by(2).map(|i| h[(i, i)]).fold(0.0f64, f64::max);
        let ridge = if max_diag > 0.0 { RIDGE * max_diag } else { RIDGE };
        for i in (channel..n).step_by(2) {
            h[(i, i)] += ridge;
        }
    }

    let mut q = DVector::zeros(n);
    for j in 0..t {
        let mut acc = Vector2::zeros();
        for k in (j + 1)..=t {
            acc += markov[k - 1 - j].transpose() * errors[k - 1];
        }
        q[2 * j] = 2.0 * acc[0];
        q[2 * j + 1] = 2.0 * acc[1];
    }
    let constant = errors.iter().map(|e| e.norm_squared()).sum();

    let lower = DVector::from_fn(n, |i, _| if i % 2 == 0 { -params.a_max } else { -params.omega_max });
    let upper = -&lower;
    CondensedQp {
        qp: BoxQp { h, q, lower, upper, constant },
        free_positions,
        markov,
    }
}

/// States `x_1..=x_T` of the linear model under the stacked input sequence.
pub fn predict_states(model: &LinearDiscreteModel, s0: &VesselState, inputs: &DVector<f64>) -> Vec<Vector4<f64>> {
    let mut x = s0.to_vector();
    (0..inputs.len() / 2)
        .map(|k| {
            x = model.predict(&x, &Vector2::new(inputs[2 * k], inputs[2 * k + 1]));
            x
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MpcOutput {
    pub input: ControlInput,
    pub reference: ReferenceTrajectory,
    pub solution: QpSolution,
}

/// Receding-horizon controller with warm starts from the shifted previous
/// solution.
#[derive(Debug, Clone)]
pub struct MpcController {
    pub params: VesselParams,
    pub dt: f64,
    pub options: SolverOptions,
    warm: Option<DVector<f64>>,
    workspace: qp::Workspace,
}

impl MpcController {
    pub fn new(params: VesselParams, dt: f64) -> Self {
        MpcController {
            params,
            dt,
            options: SolverOptions::default(),
            warm: None,
            workspace: qp::Workspace::default(),
        }
    }

    pub fn steps(&self) -> usize {
        self.params.horizon_steps(self.dt)
    }

    pub fn step(&mut self, s0: &VesselState, u_prev: &ControlInput, plan: &WaypointPlan) -> MpcOutput {
        let speed = plan.hold_speed.unwrap_or(self.params.v_des);
        let reference = get_reference(plan, s0.position(), speed, self.dt, self.steps());
        let model = linearize_discretize(s0, u_prev, self.dt);
        let condensed = build_qp(s0, &model, &reference, &self.params);
        let solution = qp::solve_with(&condensed.qp, self.warm.as_ref(), &self.options, &mut self.workspace);
        if solution.status != SolverStatus::Optimal {
            log::warn!(
                "QP ended with {:?} after {} iterations (residual {:.3e})",
                solution.status,
                solution.iterations,
                solution.residual
            );
        }
        let x = &solution.x;
        let n = x.len();
        let mut shifted = DVector::zeros(n);
        shifted.rows_mut(0, n - 2).copy_from(&x.rows(2, n - 2));
        shifted[n - 2] = x[n - 2];
        shifted[n - 1] = x[n - 1];
        self.warm = Some(shifted);
        MpcOutput {
            input: ControlInput::new(x[0], x[1]),
            reference,
            solution,
        }
    }
}

/// One cold-started MPC solve.
pub fn mpc_step(s0: &VesselState, u_prev: &ControlInput, plan: &WaypointPlan, params: &VesselParams, dt: f64) -> ControlInput {
    MpcController::new(params.clone(), dt).step(s0, u_prev, plan).input
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::step;
    use crate::geometry::Angle;
    use crate::waypoint::make_guiding;
    use proptest::prelude::*;

    fn t1() -> VesselParams {
        VesselParams::type1()
    }

    fn straight_plan(from: Vec2, to: Vec2) -> WaypointPlan {
        WaypointPlan::new(from, vec![to]).unwrap()
    }

    /// Tracking cost by explicit rollout of the linear model.
    fn rollout_cost(model: &LinearDiscreteModel, s0: &VesselState, r: &ReferenceTrajectory, u: &DVector<f64>) -> f64 {
        predict_states(model, s0, u)
            .iter()
            .zip(&r.positions[1..])
            .map(|(x, d)| (x[0] - d.x).powi(2) + (x[1] - d.y).powi(2))
            .sum()
    }

    #[test]
    fn dimensions_and_symmetry() {
        let s0 = VesselState::new(0.0, 0.0, 0.2, 8.0);
        let plan = straight_plan(Vec2::ZERO, Vec2::new(1e4, 0.0));
        let r = get_reference(&plan, s0.position(), 8.4, 1.0, 90);
        let m = linearize_discretize(&s0, &ControlInput::ZERO, 1.0);
        let c = build_qp(&s0, &m, &r, &t1());
        assert_eq!(c.qp.dim(), 180);
        let asym = (&c.qp.h - c.qp.h.transpose()).amax();
        assert!(asym <= 1e-12 * c.qp.h.amax());
    }

    #[test]
    fn aligned_vessel_needs_no_input() {
        let s0 = VesselState::new(0.0, 0.0, 0.0, 8.4);
        let plan = straight_plan(Vec2::ZERO, Vec2::new(1e4, 0.0));
        let out = MpcController::new(t1(), 1.0).step(&s0, &ControlInput::ZERO, &plan);
        assert!(out.solution.status == SolverStatus::Optimal);
        assert!(out.input.a.abs() <= 1e-3 && out.input.omega.abs() <= 1e-3, "{:?}", out.input);
    }

    #[test]
    fn stand_on_guiding_waypoint_gives_zero_input() {
        let s0 = VesselState::new(100.0, -40.0, 0.7, 8.4);
        let mut plan = straight_plan(Vec2::ZERO, Vec2::new(1e4, 0.0));
        let w = make_guiding(s0.position(), s0.phi, &t1()).unwrap();
        plan.replace(s0.position(), vec![w]);
        let u = mpc_step(&s0, &ControlInput::ZERO, &plan, &t1(), 1.0);
        assert!(u.a.abs() <= 1e-6 && u.omega.abs() <= 1e-6, "{u:?}");
    }

    #[test]
    fn sharp_course_change_saturates_the_turn_rate() {
        let p = t1();
        let s0 = VesselState::new(0.0, 0.0, 0.0, 8.4);
        let mut plan = straight_plan(Vec2::ZERO, Vec2::new(1e4, 0.0));
        let w = make_guiding(s0.position(), Angle::new(-0.8), &p).unwrap();
        plan.replace(s0.position(), vec![w]);
        let u = mpc_step(&s0, &ControlInput::ZERO, &plan, &p, 1.0);
        assert_eq!(u.omega, -p.omega_max);
    }

    #[test]
    fn zero_deviation_reference_makes_zero_optimal() {
        let s0 = VesselState::new(5.0, 5.0, 1.0, 6.0);
        let m = linearize_discretize(&s0, &ControlInput::ZERO, 1.0);
        let positions = std::iter::once(s0.position())
            .chain(predict_states(&m, &s0, &DVector::zeros(180)).iter().map(|x| Vec2::new(x[0], x[1])))
            .collect();
        let r = ReferenceTrajectory { positions, dt: 1.0 };
        let c = build_qp(&s0, &m, &r, &t1());
        assert!(c.qp.q.amax() <= 1e-9);
        let sol = qp::solve(&c.qp, None, &SolverOptions::default());
        assert!(sol.x.amax() <= 1e-12);
    }

    #[test]
    fn tracking_converges_from_a_lateral_offset() {
        let p = t1();
        let plan = straight_plan(Vec2::new(0.0, 0.0), Vec2::new(5000.0, 0.0));
        let mut s = VesselState::new(0.0, 50.0, 0.0, 8.4);
        let mut ctrl = MpcController::new(p.clone(), 1.0);
        let mut u = ControlInput::ZERO;
        let mut errors = Vec::new();
        for k in 0..500 {
            u = ctrl.step(&s, &u, &plan).input;
            s = step(&s, &u, 1.0, p.v_max);
            if k >= 200 {
                errors.push(s.y.abs());
            }
        }
        let worst = errors.iter().cloned().fold(0.0, f64::max);
        assert!(worst < 5.0, "cross-track error {worst}");
    }

    fn state() -> impl Strategy<Value = VesselState> {
        (-100.0..100.0f64, -100.0..100.0f64, -3.1..3.1f64, 0.0..16.0f64)
            .prop_map(|(x, y, phi, v)| VesselState::new(x, y, phi, v))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gradient_matches_finite_differences(s0 in state(), seed in proptest::collection::vec(-0.02..0.02f64, 40)) {
            let plan = straight_plan(Vec2::ZERO, Vec2::new(800.0, 300.0));
            let r = get_reference(&plan, s0.position(), 8.4, 1.0, 20);
            let m = linearize_discretize(&s0, &ControlInput::ZERO, 1.0);
            let c = build_qp(&s0, &m, &r, &t1());
            let u = DVector::from_vec(seed);
            let ridge = DVector::from_fn(40, |i, _| {
                let max = (i % 2..40).step_by(2).map(|j| c.qp.h[(j, j)]).fold(0.0f64, f64::max);
                RIDGE * max / (1.0 + RIDGE)
            });
            // Analytic gradient of the tracking cost alone.
            let g = c.qp.gradient(&u) - ridge.component_mul(&u);
            let obj = |v: &DVector<f64>| rollout_cost(&m, &s0, &r, v);
            prop_assert!((c.qp.objective(&u) - 0.5 * u.dot(&ridge.component_mul(&u)) - obj(&u)).abs() <= 1e-6 * obj(&u).max(1.0));
            for i in 0..40 {
                // Central differences are exact on a quadratic up to rounding.
                let h = 1e-3;
                let mut up = u.clone();
                let mut um = u.clone();
                up[i] += h;
                um[i] -= h;
                let fd = (obj(&up) - obj(&um)) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0), "i={} fd={} g={}", i, fd, g[i]);
            }
        }

        #[test]
        fn inputs_stay_in_the_box_and_predictions_are_consistent(s0 in state(), gx in -2e3..2e3f64, gy in -2e3..2e3f64) {
            let p = t1();
            let plan = straight_plan(Vec2::ZERO, Vec2::new(gx, gy));
            let out = MpcController::new(p.clone(), 1.0).step(&s0, &ControlInput::ZERO, &plan);
            let x = &out.solution.x;
            for i in 0..x.len() {
                let lim = if i % 2 == 0 { p.a_max } else { p.omega_max };
                prop_assert!(x[i].abs() <= lim);
            }
            let m = linearize_discretize(&s0, &ControlInput::ZERO, 1.0);
            let c = build_qp(&s0, &m, &out.reference, &p);
            let states = predict_states(&m, &s0, x);
            for (k, xk) in states.iter().enumerate() {
                let mut pk = c.free_positions[k];
                for j in 0..=k {
                    let mj = c.markov[k - j];
                    let du = mj * Vector2::new(x[2 * j], x[2 * j + 1]);
                    pk = pk + Vec2::new(du[0], du[1]);
                }
                prop_assert!((pk.x - xk[0]).abs() <= 1e-8 * xk[0].abs().max(1.0));
                prop_assert!((pk.y - xk[1]).abs() <= 1e-8 * xk[1].abs().max(1.0));
            }
        }
    }
}
