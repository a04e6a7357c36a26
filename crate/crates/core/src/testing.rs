//! Test-support utilities: small LTI systems, a random controllable-system
//! generator, and a condensed model-based MPC oracle.
//!
//! Everything here is an independent reference path used by the test suites
//! and benches; production code must not depend on it.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::deepc::Plant;

/// Discrete LTI system x⁺ = A x + B u, sampled with the convention that the
/// output is measured after the input is applied: y_k = C x_{k+1}.
#[derive(Debug, Clone)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
}

impl LtiSystem {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    /// Simulate from `x0`, returning one output per input sample.
    pub fn simulate(&self, x0: &DVector<f64>, us: &[f64]) -> Vec<f64> {
        let mut x = x0.clone();
        let mut ys = Vec::with_capacity(us.len());
        for &u in us {
            x = &self.a * &x + &self.b * u;
            ys.push((&self.c * &x)[0]);
        }
        ys
    }

    fn spectral_radius(&self) -> f64 {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|e| e.norm())
            .fold(0.0, f64::max)
    }
}

/// Double integrator with sample time `dt` and position output.
pub fn double_integrator(dt: f64) -> LtiSystem {
    LtiSystem {
        a: DMatrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]),
        b: DVector::from_column_slice(&[dt * dt / 2.0, dt]),
        c: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
    }
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * max).count()
}

/// Random stable SISO system of the given order, resampled until it is
/// controllable and observable (through the after-step output map).
pub fn random_controllable(rng: &mut impl Rng, n: usize) -> LtiSystem {
    loop {
        let a_raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let sys = LtiSystem {
            a: a_raw,
            b: DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
            c: DMatrix::from_fn(1, n, |_, _| rng.gen_range(-1.0..1.0)),
        };
        let radius = sys.spectral_radius();
        if radius == 0.0 {
            continue;
        }
        let scale = rng.gen_range(0.5..0.9) / radius;
        let sys = LtiSystem { a: sys.a * scale, ..sys };

        let mut ctrb = DMatrix::zeros(n, n);
        let mut col = sys.b.clone();
        for j in 0..n {
            ctrb.set_column(j, &col);
            col = &sys.a * col;
        }
        // Output map for the after-step convention is C·A.
        let mut obsv = DMatrix::zeros(n, n);
        let mut row = (&sys.c * &sys.a).row(0).into_owned();
        for i in 0..n {
            obsv.set_row(i, &row);
            row = (row * &sys.a).row(0).into_owned();
        }
        if numerical_rank(&ctrb) == n && numerical_rank(&obsv) == n {
            return sys;
        }
    }
}

/// An [`LtiSystem`] with state, usable as a closed-loop plant.
pub struct LtiPlant {
    pub sys: LtiSystem,
    pub x: DVector<f64>,
    dt: f64,
}

impl LtiPlant {
    pub fn new(sys: LtiSystem, dt: f64) -> Self {
        let n = sys.n_states();
        Self { sys, x: DVector::zeros(n), dt }
    }
}

impl Plant for LtiPlant {
    fn apply(&mut self, torque: f64) -> f64 {
        self.x = &self.sys.a * &self.x + &self.sys.b * torque;
        (&self.sys.c * &self.x)[0]
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}

/// Condensed model-based MPC built directly from (A, B, C): the reference
/// behavior a data-driven controller with hard past equalities must match
/// on noiseless data.
///
/// The current state is reconstructed from the past window by least
/// squares, the future outputs are condensed as y = O x + G u, and the
/// strictly convex QP in u is solved by Cholesky.
pub struct MpcOracle {
    sys: LtiSystem,
    t_ini: usize,
    horizon: usize,
    q: f64,
    /// Maps (x_start, u_ini) to the past outputs: obs_past x + g_past u_ini.
    obs_past: DMatrix<f64>,
    g_past: DMatrix<f64>,
    /// Propagates the window-start state to the current state.
    a_pow_tini: DMatrix<f64>,
    reach_past: DMatrix<f64>,
    /// Future condensing: y = obs_fut x_now + g_fut u.
    obs_fut: DMatrix<f64>,
    g_fut: DMatrix<f64>,
    /// Cholesky factor of (G' Q G + R).
    qp: Cholesky<f64, nalgebra::Dyn>,
}

impl MpcOracle {
    pub fn new(sys: LtiSystem, t_ini: usize, horizon: usize, q: f64, r: f64) -> Self {
        let n = sys.n_states();
        let c_after = &sys.c * &sys.a; // output row for the after-step convention
        let d_after = (&sys.c * &sys.b)[0];

        let window = |len: usize| {
            let mut obs = DMatrix::zeros(len, n);
            let mut g = DMatrix::zeros(len, len);
            let mut a_pow = DMatrix::identity(n, n);
            for j in 0..len {
                obs.row_mut(j).copy_from(&(&c_after * &a_pow).row(0));
                g[(j, j)] = d_after;
                // u_i contributes C A^{j-i} B for i < j (via C_after A^{j-1-i}).
                let mut a_pow_ji = DMatrix::identity(n, n);
                for i in (0..j).rev() {
                    g[(j, i)] = (&c_after * &a_pow_ji * &sys.b)[0];
                    a_pow_ji = &a_pow_ji * &sys.a;
                }
                a_pow = &a_pow * &sys.a;
            }
            (obs, g)
        };
        let (obs_past, g_past) = window(t_ini);
        let (obs_fut, g_fut) = window(horizon);

        let mut a_pow_tini = DMatrix::identity(n, n);
        let mut reach_past = DMatrix::zeros(n, t_ini);
        for _ in 0..t_ini {
            a_pow_tini = &a_pow_tini * &sys.a;
        }
        // x_now = A^t_ini x_start + sum A^{t_ini-1-i} B u_i.
        let mut a_pow = DMatrix::identity(n, n);
        for i in (0..t_ini).rev() {
            reach_past.set_column(i, &(&a_pow * &sys.b));
            a_pow = &a_pow * &sys.a;
        }

        let mut h = g_fut.transpose() * &g_fut * q;
        for i in 0..horizon {
            h[(i, i)] += r;
        }
        let qp = Cholesky::new(h).expect("R > 0 makes the condensed QP strictly convex");

        Self {
            sys,
            t_ini,
            horizon,
            q,
            obs_past,
            g_past,
            a_pow_tini,
            reach_past,
            obs_fut,
            g_fut,
            qp,
        }
    }

    /// Reconstruct the current state from the past window.
    pub fn estimate_state(&self, u_ini: &[f64], y_ini: &[f64]) -> DVector<f64> {
        assert_eq!(u_ini.len(), self.t_ini);
        assert_eq!(y_ini.len(), self.t_ini);
        let u = DVector::from_column_slice(u_ini);
        let y = DVector::from_column_slice(y_ini);
        let rhs = y - &self.g_past * &u;
        let x_start = SvdSolve::solve(&self.obs_past, &rhs);
        &self.a_pow_tini * x_start + &self.reach_past * u
    }

    /// Optimal input sequence for a constant reference.
    pub fn control(&self, u_ini: &[f64], y_ini: &[f64], reference: f64) -> Vec<f64> {
        let x_now = self.estimate_state(u_ini, y_ini);
        let r_vec = DVector::from_element(self.horizon, reference);
        let rhs = self.g_fut.transpose() * (r_vec - &self.obs_fut * x_now) * self.q;
        self.qp.solve(&rhs).iter().cloned().collect()
    }

    pub fn system(&self) -> &LtiSystem {
        &self.sys
    }
}

struct SvdSolve;

impl SvdSolve {
    fn solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        let svd = nalgebra::SVD::new(m.clone(), true, true);
        let eps = 1e-12 * svd.singular_values.iter().cloned().fold(0.0, f64::max).max(1e-300);
        svd.solve(rhs, eps).expect("least-squares solve")
    }
}
