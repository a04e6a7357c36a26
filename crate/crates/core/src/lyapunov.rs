//! Energy-based boundary-feedback benchmark controller.
//!
//! The control law feeds back the hub tracking error, hub rate, and the
//! beam-root curvature and curvature rate:
//!
//! ```text
//!   τ = (−EI y_xx(0) + a₂ y_xxt(0) − a₁ a₂ θ_t) − (EI/a₂) θ_t − k₁ Δ
//!       + k₂ (J θ_t + a₂ y_xx(0) − a₁ a₂ e),
//!   Δ = J θ_t + a₂ (−y_xx(0) + a₁ e).
//! ```
//!
//! Its gains must satisfy an eight-part inequality system for the closed
//! loop's energy functional to decrease; [`check_constraints`] evaluates
//! every inequality with its margin, and [`construct_params`] builds a
//! feasible set from (a₂, ε₁, ε₂, δ) through the closed-form recipe that
//! pins a₃ and a₄ to the coupling equalities.

use crate::beam::BeamModel;
use crate::error::{Error, Result};

/// Gains of the boundary-feedback law. All strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub k1: f64,
    pub k2: f64,
    pub delta: f64,
    pub eta: f64,
}

impl LyapunovParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a1: f64,
        a2: f64,
        a3: f64,
        a4: f64,
        k1: f64,
        k2: f64,
        delta: f64,
        eta: f64,
    ) -> Result<Self> {
        let params = Self { a1, a2, a3, a4, k1, k2, delta, eta };
        for (name, v) in [
            ("a1", a1),
            ("a2", a2),
            ("a3", a3),
            ("a4", a4),
            ("k1", k1),
            ("k2", k2),
            ("delta", delta),
            ("eta", eta),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(params)
    }

    /// Complete a gain set from the four primary gains: a₃ and a₄ are pinned
    /// by the coupling equalities a₃ = 2k₂a₂²/(L·EI) and a₄ = 2k₂a₁a₂²/EI.
    pub fn from_gains(
        a1: f64,
        a2: f64,
        k1: f64,
        k2: f64,
        delta: f64,
        eta: f64,
        model: &BeamModel,
    ) -> Result<Self> {
        let a3 = 2.0 * k2 * a2 * a2 / (model.length * model.ei);
        let a4 = 2.0 * k2 * a1 * a2 * a2 / model.ei;
        Self::new(a1, a2, a3, a4, k1, k2, delta, eta)
    }
}

/// Boundary measurements the control law consumes.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundarySignals {
    /// Tracking error e = θ − θ_d (rad).
    pub tracking_error: f64,
    /// Hub angular velocity θ_t (rad/s).
    pub hub_rate: f64,
    /// Beam-root curvature y_xx(0) (1/m).
    pub root_curvature: f64,
    /// Beam-root curvature rate y_xxt(0) (1/(m·s)).
    pub root_curvature_rate: f64,
}

/// Auxiliary signal Δ = J θ_t + a₂ (−y_xx(0) + a₁ e).
pub fn delta_signal(signals: &BoundarySignals, params: &LyapunovParams, model: &BeamModel) -> f64 {
    model.hub_inertia * signals.hub_rate
        + params.a2 * (-signals.root_curvature + params.a1 * signals.tracking_error)
}

/// Hub torque of the boundary-feedback law.
pub fn control_torque(
    signals: &BoundarySignals,
    params: &LyapunovParams,
    model: &BeamModel,
) -> f64 {
    let ei = model.ei;
    let j = model.hub_inertia;
    let delta = delta_signal(signals, params, model);
    (-ei * signals.root_curvature + params.a2 * signals.root_curvature_rate
        - params.a1 * params.a2 * signals.hub_rate)
        - (ei / params.a2) * signals.hub_rate
        - params.k1 * delta
        + params.k2
            * (j * signals.hub_rate + params.a2 * signals.root_curvature
                - params.a1 * params.a2 * signals.tracking_error)
}

/// One evaluated feasibility inequality.
#[derive(Debug, Clone)]
pub struct ConstraintCheck {
    pub name: &'static str,
    /// Left-hand side of the inequality written as `margin > 0` (or `>= 0`).
    pub margin: f64,
    /// Whether the inequality is strict.
    pub strict: bool,
    pub satisfied: bool,
}

/// Result of evaluating the full feasibility system.
#[derive(Debug, Clone)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintReport {
    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn first_failure(&self) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| !c.satisfied)
    }
}

/// Evaluate the eight feasibility inequalities, reporting each margin.
///
/// Non-strict inequalities pass at margin ≥ −1e−12·scale to absorb the
/// floating-point noise of parameter sets constructed to sit exactly on
/// the boundary.
pub fn check_constraints(params: &LyapunovParams, model: &BeamModel) -> ConstraintReport {
    let LyapunovParams { a1, a2, a3, a4, k1, k2, delta, eta } = *params;
    let (ei, rho, l, j) = (model.ei, model.rho, model.length, model.hub_inertia);
    let pi2 = std::f64::consts::PI.powi(2);
    let pi4 = pi2 * pi2;

    let positivity = [a1, a2, a3, a4, k1, k2, delta, eta]
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v));

    let m7 = k2 * a2 * a2 - eta * k2 * a1 * a2 * a2 + ei * eta * a4 / 2.0
        - l * ei * a3 / 2.0;
    let m7_scale = (k2 * a2 * a2).abs().max(l * ei * a3 / 2.0).max(1e-300);

    let checks = vec![
        ConstraintCheck {
            name: "positivity of all eight parameters",
            margin: positivity,
            strict: true,
            satisfied: positivity > 0.0,
        },
        ConstraintCheck {
            name: "1 - L a3 - a4 > 0",
            margin: 1.0 - l * a3 - a4,
            strict: true,
            satisfied: 1.0 - l * a3 - a4 > 0.0,
        },
        ConstraintCheck {
            name: "EI/2 - 2 rho L^3 a3 / pi^2 - 8 rho L^4 a4 / pi^4 > 0",
            margin: ei / 2.0 - 2.0 * rho * l.powi(3) * a3 / pi2 - 8.0 * rho * l.powi(4) * a4 / pi4,
            strict: true,
            satisfied: ei / 2.0 - 2.0 * rho * l.powi(3) * a3 / pi2
                - 8.0 * rho * l.powi(4) * a4 / pi4
                > 0.0,
        },
        ConstraintCheck {
            name: "EI a1 / 2 - 2 rho L^3 a4 / pi^2 > 0",
            margin: ei * a1 / 2.0 - 2.0 * rho * l.powi(3) * a4 / pi2,
            strict: true,
            satisfied: ei * a1 / 2.0 - 2.0 * rho * l.powi(3) * a4 / pi2 > 0.0,
        },
        ConstraintCheck {
            name: "J EI / a2 - k2 J^2 - rho L^2 a3 / (2 delta) - 2 rho L^3 a4 / 3 > 0",
            margin: j * ei / a2
                - k2 * j * j
                - rho * l * l * a3 / (2.0 * delta)
                - 2.0 * rho * l.powi(3) * a4 / 3.0,
            strict: true,
            satisfied: j * ei / a2
                - k2 * j * j
                - rho * l * l * a3 / (2.0 * delta)
                - 2.0 * rho * l.powi(3) * a4 / 3.0
                > 0.0,
        },
        ConstraintCheck {
            name: "(1 - L delta) a3 - 4 a4 > 0",
            margin: (1.0 - l * delta) * a3 - 4.0 * a4,
            strict: true,
            satisfied: (1.0 - l * delta) * a3 - 4.0 * a4 > 0.0,
        },
        ConstraintCheck {
            name: "k2 a2^2 - eta k2 a1 a2^2 + EI eta a4 / 2 - L EI a3 / 2 >= 0",
            margin: m7,
            strict: false,
            satisfied: m7 >= -1e-12 * m7_scale,
        },
        ConstraintCheck {
            name: "k2 a1^2 a2^2 - k2 a1 a2^2 / eta + EI a4 / (2 eta) > 0",
            margin: k2 * a1 * a1 * a2 * a2 - k2 * a1 * a2 * a2 / eta + ei * a4 / (2.0 * eta),
            strict: true,
            satisfied: k2 * a1 * a1 * a2 * a2 - k2 * a1 * a2 * a2 / eta
                + ei * a4 / (2.0 * eta)
                > 0.0,
        },
    ];
    ConstraintReport { checks }
}

/// Build a feasible gain set from (a₂, ε₁, ε₂, δ):
///
/// ```text
///   a₁ = ((1 − Lδ) / 4L) ε₁,
///   k₂ = ε₂ · min(four k₂ caps),
///   a₃ = 2k₂ a₂² / (L·EI),   a₄ = 2k₂ a₁ a₂² / EI,   η = 1,
/// ```
///
/// then certifies the result with [`check_constraints`].
pub fn construct_params(
    a2: f64,
    epsilon1: f64,
    epsilon2: f64,
    delta: f64,
    model: &BeamModel,
) -> Result<LyapunovParams> {
    construct_params_with_k1(a2, epsilon1, epsilon2, delta, 0.1, model)
}

/// [`construct_params`] with an explicit k₁ (free positive gain).
pub fn construct_params_with_k1(
    a2: f64,
    epsilon1: f64,
    epsilon2: f64,
    delta: f64,
    k1: f64,
    model: &BeamModel,
) -> Result<LyapunovParams> {
    let l = model.length;
    if !(delta > 0.0 && delta < 1.0 / l) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1/L) = (0, {}), got {delta}",
            1.0 / l
        )));
    }
    for (name, eps) in [("epsilon1", epsilon1), ("epsilon2", epsilon2)] {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must lie in (0, 1), got {eps}"
            )));
        }
    }
    if !(a2 > 0.0) {
        return Err(Error::InvalidParameter(format!("a2 must be > 0, got {a2}")));
    }
    if !(k1 > 0.0) {
        return Err(Error::InvalidParameter(format!("k1 must be > 0, got {k1}")));
    }

    let a1 = (1.0 - l * delta) / (4.0 * l) * epsilon1;
    let k2 = epsilon2 * k2_cap(a1, a2, delta, model);
    let params = LyapunovParams::from_gains(a1, a2, k1, k2, delta, 1.0, model)?;

    let report = check_constraints(&params, model);
    if let Some(failure) = report.first_failure() {
        return Err(Error::InvalidParameter(format!(
            "constructed parameters fail '{}' with margin {:.3e}",
            failure.name, failure.margin
        )));
    }
    Ok(params)
}

/// The four-way minimum capping k₂ so every a₄ upper bound holds.
pub fn k2_cap(a1: f64, a2: f64, delta: f64, model: &BeamModel) -> f64 {
    let (ei, rho, l, j) = (model.ei, model.rho, model.length, model.hub_inertia);
    let pi2 = std::f64::consts::PI.powi(2);
    let pi4 = pi2 * pi2;
    let t1 = ei / (2.0 * a2 * a2 * (a1 + 1.0));
    let t2 = pi4 * ei * ei / (8.0 * rho * l * l * a2 * a2 * (4.0 * l * l * a1 + pi2));
    let t3 = pi2 * ei * ei / (8.0 * rho * l.powi(3) * a2 * a2);
    let t4 = 3.0 * j * ei * ei * delta
        / (a2
            * (4.0 * rho * l.powi(3) * delta * a1 * a2 * a2
                + 3.0 * ei * j * j * delta
                + 3.0 * rho * l * a2 * a2));
    t1.min(t2).min(t3).min(t4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference_model() -> BeamModel {
        BeamModel::new(120.0, 20.0, 5.0, 400.0, 20, 0.05).unwrap()
    }

    fn published_gain_params(model: &BeamModel) -> LyapunovParams {
        LyapunovParams::from_gains(0.0428, 3000.0, 0.1, 2.1e-10, 0.0098, 1.0, model).unwrap()
    }

    #[test]
    fn torque_vanishes_exactly_at_the_setpoint() {
        let model = reference_model();
        let params = published_gain_params(&model);
        let tau = control_torque(&BoundarySignals::default(), &params, &model);
        assert_eq!(tau, 0.0);
    }

    #[test]
    fn torque_matches_hand_substitution_for_pure_error() {
        let model = reference_model();
        let params = published_gain_params(&model);
        let signals = BoundarySignals { tracking_error: 0.1, ..Default::default() };
        // Delta = a2 a1 e = 3000 * 0.0428 * 0.1 = 12.84;
        // tau = -k1*Delta + k2*(-a1 a2 e) = -1.284 - 2.6964e-9.
        let delta = delta_signal(&signals, &params, &model);
        assert_relative_eq!(delta, 12.84, max_relative = 1e-12);
        let tau = control_torque(&signals, &params, &model);
        assert_relative_eq!(tau, -1.284 - 2.1e-10 * 12.84, max_relative = 1e-12);
        assert_abs_diff_eq!(tau, -1.28400, epsilon = 1e-5);
    }

    #[test]
    fn torque_matches_hand_substitution_for_pure_rate() {
        let model = reference_model();
        let params = published_gain_params(&model);
        let signals = BoundarySignals { hub_rate: 0.01, ..Default::default() };
        // tau = -a1 a2 θt - (EI/a2) θt - k1 J θt + k2 J θt
        //     = -1.284 - 4e-4 - 0.4 + 8.4e-10.
        let oracle = -0.0428 * 3000.0 * 0.01 - (120.0 / 3000.0) * 0.01 - 0.1 * 400.0 * 0.01
            + 2.1e-10 * 400.0 * 0.01;
        assert_relative_eq!(oracle, -1.6844, max_relative = 1e-9);
        let tau = control_torque(&signals, &params, &model);
        assert_relative_eq!(tau, oracle, max_relative = 1e-12);
    }

    #[test]
    fn torque_is_linear_in_the_boundary_signals() {
        let model = reference_model();
        let params = published_gain_params(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let s1 = BoundarySignals {
                tracking_error: rng.gen_range(-1.0..1.0),
                hub_rate: rng.gen_range(-1.0..1.0),
                root_curvature: rng.gen_range(-1.0..1.0),
                root_curvature_rate: rng.gen_range(-1.0..1.0),
            };
            let s2 = BoundarySignals {
                tracking_error: rng.gen_range(-1.0..1.0),
                hub_rate: rng.gen_range(-1.0..1.0),
                root_curvature: rng.gen_range(-1.0..1.0),
                root_curvature_rate: rng.gen_range(-1.0..1.0),
            };
            let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let combined = BoundarySignals {
                tracking_error: alpha * s1.tracking_error + beta * s2.tracking_error,
                hub_rate: alpha * s1.hub_rate + beta * s2.hub_rate,
                root_curvature: alpha * s1.root_curvature + beta * s2.root_curvature,
                root_curvature_rate: alpha * s1.root_curvature_rate
                    + beta * s2.root_curvature_rate,
            };
            let lhs = control_torque(&combined, &params, &model);
            let rhs = alpha * control_torque(&s1, &params, &model)
                + beta * control_torque(&s2, &params, &model);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn zero_parameters_fail_positivity() {
        let model = reference_model();
        assert!(LyapunovParams::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0).is_err());
        // Bypass the constructor to exercise the report itself.
        let params = LyapunovParams {
            a1: 0.0,
            a2: 0.0,
            a3: 0.0,
            a4: 0.0,
            k1: 0.0,
            k2: 0.0,
            delta: 0.0,
            eta: 0.0,
        };
        let report = check_constraints(&params, &model);
        assert!(!report.all_satisfied());
        assert_eq!(
            report.first_failure().unwrap().name,
            "positivity of all eight parameters"
        );
    }

    #[test]
    fn oversized_a3_fails_the_first_sum_constraint() {
        let model = reference_model();
        let mut params = published_gain_params(&model);
        params.a3 = 1.0;
        let report = check_constraints(&params, &model);
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.satisfied)
            .map(|c| c.name)
            .collect();
        assert!(failed.contains(&"1 - L a3 - a4 > 0"), "failed: {failed:?}");
        // 1 - 5*1 = -4 dominates the margin.
        let check = &report.checks[1];
        assert!(check.margin < -3.9);
    }

    #[test]
    fn constructor_reproduces_the_published_gains() {
        let model = reference_model();
        // delta = 0.0098, eps1 = 0.9 gives a1 = (1 - 0.049)/20 * 0.9 ≈ 0.0428.
        let cap = k2_cap((1.0 - 5.0 * 0.0098) / 20.0 * 0.9, 3000.0, 0.0098, &model);
        let eps2 = 2.1e-10 / cap;
        assert!(eps2 > 0.0 && eps2 < 1.0, "eps2 = {eps2}");
        let params = construct_params(3000.0, 0.9, eps2, 0.0098, &model).unwrap();
        assert_relative_eq!(params.a1, 0.0428, max_relative = 2e-3);
        assert_relative_eq!(params.k2, 2.1e-10, max_relative = 1e-9);
        let report = check_constraints(&params, &model);
        assert!(report.all_satisfied());
        for check in &report.checks {
            if check.strict {
                assert!(check.margin > 0.0, "{} margin {}", check.name, check.margin);
            }
        }
    }

    #[test]
    fn constructor_rejects_delta_outside_its_range() {
        let model = reference_model();
        assert!(construct_params(3000.0, 0.9, 0.5, 0.2, &model).is_err());
        assert!(construct_params(3000.0, 0.9, 0.5, 0.0, &model).is_err());
        assert!(construct_params(3000.0, 1.5, 0.5, 0.01, &model).is_err());
        assert!(construct_params(-3000.0, 0.9, 0.5, 0.01, &model).is_err());
    }

    #[test]
    fn tiny_epsilon1_remains_feasible() {
        let model = reference_model();
        for eps1 in [1e-3, 1e-6, 1e-9] {
            let params = construct_params(3000.0, eps1, 0.01, 0.0098, &model).unwrap();
            assert!(params.a1 > 0.0);
            assert!(check_constraints(&params, &model).all_satisfied());
        }
    }

    #[test]
    fn constructor_output_is_always_certified() {
        let model = reference_model();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let delta = rng.gen_range(1e-4..0.2 - 1e-6);
            let eps1 = rng.gen_range(1e-3..1.0 - 1e-9);
            let eps2 = rng.gen_range(1e-3..1.0 - 1e-9);
            let a2 = 10.0_f64.powf(rng.gen_range(0.0..5.0));
            let params = construct_params(a2, eps1, eps2, delta, &model)
                .expect("valid inputs construct a feasible set");
            let report = check_constraints(&params, &model);
            assert!(report.all_satisfied(), "{:?}", report.first_failure());
            for check in report.checks.iter().filter(|c| c.strict) {
                assert!(check.margin > 0.0, "{}: {}", check.name, check.margin);
            }
        }
    }
}
