//! Data-driven predictive control from recorded input/output trajectories.
//!
//! Each step solves, over the trajectory-combination vector g,
//!
//! ```text
//!   min  ||y - y_r||²_Q + ||u||²_R + λ_y ||σ_y||² + λ_g ||g||²
//!   s.t. [U_p; U_f; Y_p; Y_f] g = (u_ini, u, y_ini, y) + (0, 0, σ_y, 0)
//! ```
//!
//! with the slack σ_y on the past-output rows only. Eliminating u, y and
//! σ_y leaves a convex quadratic in g with the hard equality U_p g = u_ini,
//! solved through a KKT system whose matrix is constant for fixed data and
//! weights: the factorization is computed once and reused every step.
//! Setting `lambda_y: None` disables the slack (hard past-output equality),
//! and `lambda_g = 0` is accepted for oracle comparisons; the then-singular
//! KKT system is solved in the minimum-norm sense, which is a valid
//! optimizer of the convex program. Box bounds on u and y, when configured,
//! are handled by an active-set iteration over the same KKT structure.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, LU, SVD};

use crate::error::{Error, Result};
use crate::trajectory::{HankelSystem, ReducedHankel, Trajectory};

/// Controller weights, horizons, and optional constraints.
#[derive(Debug, Clone)]
pub struct DeePCConfig {
    /// Past window length.
    pub t_ini: usize,
    /// Prediction horizon.
    pub horizon: usize,
    /// Per-step output tracking weight (Q ≥ 0).
    pub q_weight: f64,
    /// Per-step input weight (R > 0).
    pub r_weight: f64,
    /// Regularization weight on g (λ_g ≥ 0; > 0 in normal operation).
    pub lambda_g: f64,
    /// Slack weight on the past-output rows; `None` enforces the past
    /// outputs as hard equalities (no slack).
    pub lambda_y: Option<f64>,
    /// Optional box bounds on every input sample.
    pub input_bounds: Option<(f64, f64)>,
    /// Optional box bounds on every predicted output sample.
    pub output_bounds: Option<(f64, f64)>,
    /// Output reference, held constant over the horizon.
    pub reference: f64,
}

impl DeePCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        if !(self.q_weight >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "q_weight must be >= 0, got {}",
                self.q_weight
            )));
        }
        if !(self.r_weight > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "r_weight must be > 0, got {}",
                self.r_weight
            )));
        }
        if !(self.lambda_g >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda_g must be >= 0, got {}",
                self.lambda_g
            )));
        }
        if let Some(ly) = self.lambda_y {
            if !(ly > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "lambda_y must be > 0 when present, got {ly}"
                )));
            }
        }
        for (name, bounds) in [("input", self.input_bounds), ("output", self.output_bounds)] {
            if let Some((lo, hi)) = bounds {
                if !(lo <= hi) {
                    return Err(Error::InvalidParameter(format!(
                        "{name} bounds must satisfy lower <= upper, got ({lo}, {hi})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Rolling record of the last `t_ini` applied inputs and measured outputs,
/// oldest first.
#[derive(Debug, Clone)]
pub struct ControllerState {
    t_ini: usize,
    u_ini: VecDeque<f64>,
    y_ini: VecDeque<f64>,
}

impl ControllerState {
    pub fn new(t_ini: usize) -> Self {
        Self {
            t_ini,
            u_ini: VecDeque::with_capacity(t_ini),
            y_ini: VecDeque::with_capacity(t_ini),
        }
    }

    /// Record one applied input and the output measured after it.
    pub fn push(&mut self, u: f64, y: f64) {
        if self.t_ini == 0 {
            return;
        }
        if self.u_ini.len() == self.t_ini {
            self.u_ini.pop_front();
            self.y_ini.pop_front();
        }
        self.u_ini.push_back(u);
        self.y_ini.push_back(y);
    }

    /// True once `t_ini` samples have been recorded.
    pub fn is_full(&self) -> bool {
        self.u_ini.len() == self.t_ini
    }

    pub fn t_ini(&self) -> usize {
        self.t_ini
    }

    pub fn u_vec(&self) -> DVector<f64> {
        DVector::from_iterator(self.u_ini.len(), self.u_ini.iter().cloned())
    }

    pub fn y_vec(&self) -> DVector<f64> {
        DVector::from_iterator(self.y_ini.len(), self.y_ini.iter().cloned())
    }
}

/// One solved step of the predictive controller.
#[derive(Debug, Clone)]
pub struct DeePCSolution {
    /// Optimal trajectory-combination vector (g or its reduced counterpart).
    pub g: DVector<f64>,
    /// Optimal input sequence over the horizon.
    pub u_star: Vec<f64>,
    /// Predicted output sequence over the horizon.
    pub y_star: Vec<f64>,
    /// Slack on the past-output rows (zeros in hard-equality mode).
    pub sigma_y: Vec<f64>,
    /// Optimal cost of the solved program.
    pub objective: f64,
}

/// Data matrices the controller predicts with: either the four raw blocks
/// or the SVD-reduced matrix with the same row layout.
#[derive(Debug, Clone, Copy)]
pub enum DeePCData<'a> {
    Full(&'a HankelSystem),
    Reduced(&'a ReducedHankel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BoundSide {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BoundVar {
    Input,
    Output,
}

type ActiveConstraint = (BoundVar, usize, BoundSide);

enum Factorization {
    Lu(LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    MinNorm { svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, eps: f64 },
}

/// Receding-horizon solver with the KKT factorization precomputed.
pub struct DeePCSolver {
    config: DeePCConfig,
    uf: DMatrix<f64>,
    yp: DMatrix<f64>,
    yf: DMatrix<f64>,
    /// Hessian of the eliminated quadratic (without the factor of 2).
    hessian: DMatrix<f64>,
    /// Equality-constraint matrix: U_p alone, or [U_p; Y_p] in hard mode.
    eq: DMatrix<f64>,
    factorization: Factorization,
    /// Working set carried between solves as a warm start.
    active_set: Vec<ActiveConstraint>,
    g_dim: usize,
}

impl DeePCSolver {
    pub fn new(data: DeePCData<'_>, config: DeePCConfig) -> Result<Self> {
        config.validate()?;
        let (up, uf, yp, yf) = extract_blocks(data, &config)?;
        let g_dim = uf.ncols();

        let q = config.q_weight;
        let r = config.r_weight;
        let mut hessian =
            yf.transpose() * &yf * q + uf.transpose() * &uf * r;
        if let Some(ly) = config.lambda_y {
            hessian += yp.transpose() * &yp * ly;
        }
        for i in 0..g_dim {
            hessian[(i, i)] += config.lambda_g;
        }

        let eq = if config.lambda_y.is_some() {
            up.clone()
        } else {
            let mut eq = DMatrix::zeros(up.nrows() + yp.nrows(), g_dim);
            eq.view_mut((0, 0), (up.nrows(), g_dim)).copy_from(&up);
            eq.view_mut((up.nrows(), 0), (yp.nrows(), g_dim)).copy_from(&yp);
            eq
        };

        let kkt = build_kkt(&hessian, &eq);
        let factorization = factorize(kkt, config.lambda_g > 0.0 && config.lambda_y.is_some())?;

        Ok(Self {
            config,
            uf,
            yp,
            yf,
            hessian,
            eq,
            factorization,
            active_set: Vec::new(),
            g_dim,
        })
    }

    pub fn config(&self) -> &DeePCConfig {
        &self.config
    }

    /// Solve one receding-horizon step from the recorded past window.
    pub fn solve(&mut self, state: &ControllerState) -> Result<DeePCSolution> {
        if !state.is_full() || state.t_ini() != self.config.t_ini {
            return Err(Error::Dimension(format!(
                "controller state holds {} of {} required samples",
                state.u_vec().len(),
                self.config.t_ini
            )));
        }
        let u_ini = state.u_vec();
        let y_ini = state.y_vec();

        let gradient = self.gradient_const(&y_ini);
        let eq_rhs = self.eq_rhs(&u_ini, &y_ini);

        if self.config.input_bounds.is_none() && self.config.output_bounds.is_none() {
            let g = solve_kkt(&self.factorization, &gradient, &eq_rhs, self.g_dim)?;
            return Ok(self.extract(g, &y_ini));
        }
        self.solve_bounded(&gradient, &eq_rhs, &y_ini)
    }

    /// Linear term c with ∇φ(g) = 2 (H g − c).
    fn gradient_const(&self, y_ini: &DVector<f64>) -> DVector<f64> {
        let n = self.config.horizon;
        let y_ref = DVector::from_element(n, self.config.reference);
        let mut c = self.yf.transpose() * y_ref * self.config.q_weight;
        if let Some(ly) = self.config.lambda_y {
            c += self.yp.transpose() * y_ini * ly;
        }
        c
    }

    fn eq_rhs(&self, u_ini: &DVector<f64>, y_ini: &DVector<f64>) -> DVector<f64> {
        if self.config.lambda_y.is_some() {
            u_ini.clone()
        } else {
            let mut b = DVector::zeros(u_ini.len() + y_ini.len());
            b.rows_mut(0, u_ini.len()).copy_from(u_ini);
            b.rows_mut(u_ini.len(), y_ini.len()).copy_from(y_ini);
            b
        }
    }

    fn extract(&self, g: DVector<f64>, y_ini: &DVector<f64>) -> DeePCSolution {
        let u_star: Vec<f64> = (&self.uf * &g).iter().cloned().collect();
        let y_star: Vec<f64> = (&self.yf * &g).iter().cloned().collect();
        let sigma_y: Vec<f64> = if self.config.lambda_y.is_some() {
            (&self.yp * &g - y_ini).iter().cloned().collect()
        } else {
            vec![0.0; self.config.t_ini]
        };
        let q = self.config.q_weight;
        let r = self.config.r_weight;
        let mut objective = 0.0;
        for &y in &y_star {
            objective += q * (y - self.config.reference).powi(2);
        }
        for &u in &u_star {
            objective += r * u * u;
        }
        if let Some(ly) = self.config.lambda_y {
            objective += ly * sigma_y.iter().map(|s| s * s).sum::<f64>();
        }
        objective += self.config.lambda_g * g.norm_squared();
        DeePCSolution {
            g,
            u_star,
            y_star,
            sigma_y,
            objective,
        }
    }

    /// Active-set iteration over the box bounds: solve with the working set
    /// pinned as equalities, add the most violated bound, drop the active
    /// bound with the most wrong-signed multiplier, repeat.
    fn solve_bounded(
        &mut self,
        gradient: &DVector<f64>,
        eq_rhs: &DVector<f64>,
        y_ini: &DVector<f64>,
    ) -> Result<DeePCSolution> {
        const MAX_ITERS: usize = 100;
        let n_eq = self.eq.nrows();

        for _ in 0..MAX_ITERS {
            let n_act = self.active_set.len();
            let mut eq = DMatrix::zeros(n_eq + n_act, self.g_dim);
            eq.view_mut((0, 0), (n_eq, self.g_dim)).copy_from(&self.eq);
            let mut rhs = DVector::zeros(n_eq + n_act);
            rhs.rows_mut(0, n_eq).copy_from(eq_rhs);
            for (j, &(var, idx, side)) in self.active_set.iter().enumerate() {
                let (block, bounds) = match var {
                    BoundVar::Input => (&self.uf, self.config.input_bounds),
                    BoundVar::Output => (&self.yf, self.config.output_bounds),
                };
                eq.row_mut(n_eq + j).copy_from(&block.row(idx));
                let (lo, hi) = bounds.expect("active bound implies configured bounds");
                rhs[n_eq + j] = match side {
                    BoundSide::Lower => lo,
                    BoundSide::Upper => hi,
                };
            }

            let kkt = build_kkt(&self.hessian, &eq);
            let fact = factorize(kkt, self.config.lambda_g > 0.0)?;
            let full = solve_kkt_full(&fact, gradient, &rhs, self.g_dim)?;
            let g = full.rows(0, self.g_dim).into_owned();

            // Most violated inactive bound.
            let u = &self.uf * &g;
            let y = &self.yf * &g;
            let mut worst: Option<(f64, ActiveConstraint)> = None;
            let mut consider = |var: BoundVar, values: &DVector<f64>, bounds: Option<(f64, f64)>| {
                let Some((lo, hi)) = bounds else { return };
                for i in 0..values.len() {
                    for (side, violation) in [
                        (BoundSide::Lower, lo - values[i]),
                        (BoundSide::Upper, values[i] - hi),
                    ] {
                        let entry = (var, i, side);
                        if violation > 1e-9 && !self.active_set.contains(&entry) {
                            if worst.map_or(true, |(v, _)| violation > v) {
                                worst = Some((violation, entry));
                            }
                        }
                    }
                }
            };
            consider(BoundVar::Input, &u, self.config.input_bounds);
            consider(BoundVar::Output, &y, self.config.output_bounds);
            if let Some((_, entry)) = worst {
                self.active_set.push(entry);
                continue;
            }

            // Multiplier signs: upper bounds need μ >= 0, lower bounds μ <= 0.
            let mut drop: Option<(f64, usize)> = None;
            for (j, &(_, _, side)) in self.active_set.iter().enumerate() {
                let mu = full[self.g_dim + n_eq + j];
                let wrong = match side {
                    BoundSide::Upper => -mu,
                    BoundSide::Lower => mu,
                };
                if wrong > 1e-9 && drop.map_or(true, |(w, _)| wrong > w) {
                    drop = Some((wrong, j));
                }
            }
            if let Some((_, j)) = drop {
                self.active_set.remove(j);
                continue;
            }

            return Ok(self.extract(g, y_ini));
        }
        Err(Error::Solver(format!(
            "active-set iteration did not converge within {MAX_ITERS} iterations"
        )))
    }
}

fn extract_blocks(
    data: DeePCData<'_>,
    config: &DeePCConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    match data {
        DeePCData::Full(hs) => {
            if hs.t_ini != config.t_ini || hs.horizon != config.horizon {
                return Err(Error::Dimension(format!(
                    "data windows (t_ini={}, horizon={}) do not match config (t_ini={}, horizon={})",
                    hs.t_ini, hs.horizon, config.t_ini, config.horizon
                )));
            }
            Ok((hs.up.clone(), hs.uf.clone(), hs.yp.clone(), hs.yf.clone()))
        }
        DeePCData::Reduced(r) => {
            if r.t_ini != config.t_ini || r.horizon != config.horizon {
                return Err(Error::Dimension(format!(
                    "reduced data windows (t_ini={}, horizon={}) do not match config (t_ini={}, horizon={})",
                    r.t_ini, r.horizon, config.t_ini, config.horizon
                )));
            }
            let l = r.depth();
            let h = &r.h_bar;
            if h.nrows() != 2 * l {
                return Err(Error::Dimension(format!(
                    "reduced matrix has {} rows, expected {}",
                    h.nrows(),
                    2 * l
                )));
            }
            Ok((
                h.rows(0, r.t_ini).into_owned(),
                h.rows(r.t_ini, r.horizon).into_owned(),
                h.rows(l, r.t_ini).into_owned(),
                h.rows(l + r.t_ini, r.horizon).into_owned(),
            ))
        }
    }
}

fn build_kkt(hessian: &DMatrix<f64>, eq: &DMatrix<f64>) -> DMatrix<f64> {
    let g_dim = hessian.nrows();
    let n_eq = eq.nrows();
    let n = g_dim + n_eq;
    let mut kkt = DMatrix::zeros(n, n);
    kkt.view_mut((0, 0), (g_dim, g_dim)).copy_from(hessian);
    kkt.view_mut((0, g_dim), (g_dim, n_eq)).copy_from(&eq.transpose());
    kkt.view_mut((g_dim, 0), (n_eq, g_dim)).copy_from(eq);
    kkt
}

/// Factor the KKT matrix. A strictly convex, full-row-rank system takes the
/// LU path; otherwise (or when LU detects singularity) an SVD supports a
/// minimum-norm solve.
fn factorize(kkt: DMatrix<f64>, expect_nonsingular: bool) -> Result<Factorization> {
    if expect_nonsingular {
        let lu = kkt.clone().lu();
        let probe = DVector::zeros(kkt.nrows());
        if lu.solve(&probe).is_some() {
            return Ok(Factorization::Lu(lu));
        }
    }
    let svd = SVD::new(kkt, true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if max_sv == 0.0 {
        return Err(Error::Numerical("KKT matrix is zero".into()));
    }
    Ok(Factorization::MinNorm { svd, eps: 1e-12 * max_sv })
}

fn solve_kkt_full(
    fact: &Factorization,
    gradient: &DVector<f64>,
    eq_rhs: &DVector<f64>,
    g_dim: usize,
) -> Result<DVector<f64>> {
    let mut rhs = DVector::zeros(g_dim + eq_rhs.len());
    rhs.rows_mut(0, g_dim).copy_from(gradient);
    rhs.rows_mut(g_dim, eq_rhs.len()).copy_from(eq_rhs);
    match fact {
        Factorization::Lu(lu) => lu.solve(&rhs).ok_or_else(|| {
            Error::Numerical(
                "KKT matrix is singular; the data is likely not persistently exciting".into(),
            )
        }),
        Factorization::MinNorm { svd, eps } => svd
            .solve(&rhs, *eps)
            .map_err(|e| Error::Numerical(format!("KKT minimum-norm solve failed: {e}"))),
    }
}

fn solve_kkt(
    fact: &Factorization,
    gradient: &DVector<f64>,
    eq_rhs: &DVector<f64>,
    g_dim: usize,
) -> Result<DVector<f64>> {
    Ok(solve_kkt_full(fact, gradient, eq_rhs, g_dim)?
        .rows(0, g_dim)
        .into_owned())
}

/// One-shot solve; loops should construct a [`DeePCSolver`] and reuse it.
pub fn solve(
    data: DeePCData<'_>,
    state: &ControllerState,
    config: &DeePCConfig,
) -> Result<DeePCSolution> {
    DeePCSolver::new(data, config.clone())?.solve(state)
}

/// Per-step tracking cost: Q (y − y_r)² + R u².
pub fn stage_cost(y_k: f64, u_k: f64, config: &DeePCConfig) -> f64 {
    config.q_weight * (y_k - config.reference).powi(2) + config.r_weight * u_k * u_k
}

/// Anything the controller can drive: apply a torque for one step and get
/// the measured output back.
pub trait Plant {
    fn apply(&mut self, torque: f64) -> f64;
    /// Sample period (s).
    fn dt(&self) -> f64;
}

impl Plant for crate::beam::SpacecraftPlant {
    fn apply(&mut self, torque: f64) -> f64 {
        self.apply_torque(torque)
    }

    fn dt(&self) -> f64 {
        self.model.dt
    }
}

/// Per-step diagnostics of the receding-horizon loop. Solver fields are NaN
/// during the zero-input initialization phase.
#[derive(Debug, Clone)]
pub struct StepDiagnostic {
    pub k: usize,
    pub t: f64,
    pub u_applied: f64,
    pub y_measured: f64,
    pub objective: f64,
    pub slack_norm: f64,
    pub g_norm: f64,
}

/// Render diagnostics as CSV with header
/// `k,t,u_applied,y_measured,objective,slack_norm,g_norm`.
pub fn diagnostics_csv(diags: &[StepDiagnostic]) -> String {
    let mut out = String::from("k,t,u_applied,y_measured,objective,slack_norm,g_norm\n");
    for d in diags {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            d.k, d.t, d.u_applied, d.y_measured, d.objective, d.slack_norm, d.g_norm
        ));
    }
    out
}

/// Receding-horizon loop: zero torque while the past window fills, then
/// solve, apply the first optimal input, measure, shift, repeat.
///
/// `disturbance[k]`, when provided, is added to the applied torque at step
/// k; the controller records only its own commanded input.
pub fn run_closed_loop(
    plant: &mut dyn Plant,
    data: DeePCData<'_>,
    config: &DeePCConfig,
    k_end: usize,
    disturbance: Option<&[f64]>,
) -> Result<(Trajectory, Vec<StepDiagnostic>)> {
    if let Some(d) = disturbance {
        if d.len() < k_end {
            return Err(Error::Dimension(format!(
                "disturbance has {} samples, need {k_end}",
                d.len()
            )));
        }
    }
    let mut solver = DeePCSolver::new(data, config.clone())?;
    let mut state = ControllerState::new(config.t_ini);
    let dt = plant.dt();

    let mut u_hist = Vec::with_capacity(k_end);
    let mut y_hist = Vec::with_capacity(k_end);
    let mut diags = Vec::with_capacity(k_end);

    for k in 0..k_end {
        let (u_cmd, objective, slack_norm, g_norm) = if k < config.t_ini {
            (0.0, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let sol = solver.solve(&state)?;
            let slack = sol.sigma_y.iter().map(|s| s * s).sum::<f64>().sqrt();
            (sol.u_star[0], sol.objective, slack, sol.g.norm())
        };
        let torque = u_cmd + disturbance.map_or(0.0, |d| d[k]);
        let y = plant.apply(torque);
        state.push(u_cmd, y);
        u_hist.push(u_cmd);
        y_hist.push(y);
        diags.push(StepDiagnostic {
            k,
            t: k as f64 * dt,
            u_applied: u_cmd,
            y_measured: y,
            objective,
            slack_norm,
            g_norm,
        });
    }

    Ok((Trajectory::new(u_hist, y_hist, dt)?, diags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{double_integrator, LtiPlant};
    use crate::trajectory::split_past_future;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_config(t_ini: usize, horizon: usize) -> DeePCConfig {
        DeePCConfig {
            t_ini,
            horizon,
            q_weight: 10.0,
            r_weight: 0.1,
            lambda_g: 1.0,
            lambda_y: Some(1e5),
            input_bounds: None,
            output_bounds: None,
            reference: 0.0,
        }
    }

    fn collected_data(t: usize, seed: u64) -> Trajectory {
        let sys = double_integrator(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let us: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ys = sys.simulate(&nalgebra::DVector::zeros(2), &us);
        Trajectory::new(us, ys, 0.1).unwrap()
    }

    fn filled_state(t_ini: usize, u: f64, y: f64) -> ControllerState {
        let mut s = ControllerState::new(t_ini);
        for _ in 0..t_ini {
            s.push(u, y);
        }
        s
    }

    #[test]
    fn stage_cost_matches_hand_arithmetic() {
        let mut cfg = test_config(4, 8);
        cfg.q_weight = 1000.0;
        cfg.r_weight = 0.25e-3;
        cfg.reference = 0.0;
        assert_relative_eq!(stage_cost(0.1, 10.0, &cfg), 10.025, max_relative = 1e-12);
        assert_eq!(stage_cost(0.0, 0.0, &cfg), 0.0);
        cfg.q_weight = 0.0;
        assert_eq!(stage_cost(123.0, 2.0, &cfg), stage_cost(-55.0, 2.0, &cfg));
    }

    #[test]
    fn config_validation_rejects_bad_weights() {
        let mut cfg = test_config(4, 8);
        cfg.r_weight = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = test_config(4, 8);
        cfg.lambda_y = Some(0.0);
        assert!(cfg.validate().is_err());
        let mut cfg = test_config(4, 8);
        cfg.lambda_g = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = test_config(4, 8);
        cfg.input_bounds = Some((1.0, -1.0));
        assert!(cfg.validate().is_err());
        let mut cfg = test_config(4, 8);
        cfg.lambda_g = 0.0;
        cfg.lambda_y = None;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn controller_state_keeps_the_latest_window_oldest_first() {
        let mut s = ControllerState::new(3);
        assert!(!s.is_full());
        for k in 0..5 {
            s.push(k as f64, 10.0 + k as f64);
        }
        assert!(s.is_full());
        assert_eq!(s.u_vec().as_slice(), &[2.0, 3.0, 4.0]);
        assert_eq!(s.y_vec().as_slice(), &[12.0, 13.0, 14.0]);
    }

    #[test]
    fn natural_response_needs_no_input() {
        // Q = 0, R > 0, lambda_g = 0, hard past equality: the zero-input
        // continuation is feasible, so the optimal input is zero.
        let traj = collected_data(80, 17);
        let hs = split_past_future(&traj, 4, 8).unwrap();
        let mut cfg = test_config(4, 8);
        cfg.q_weight = 0.0;
        cfg.lambda_g = 0.0;
        cfg.lambda_y = None;
        cfg.reference = 3.7;
        let state = filled_state(4, 0.0, 0.0);
        let sol = solve(DeePCData::Full(&hs), &state, &cfg).unwrap();
        for &u in &sol.u_star {
            assert_abs_diff_eq!(u, 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn solution_satisfies_the_stacked_constraints() {
        let traj = collected_data(100, 4);
        let hs = split_past_future(&traj, 4, 8).unwrap();
        let cfg = test_config(4, 8);
        let mut solver = DeePCSolver::new(DeePCData::Full(&hs), cfg).unwrap();

        // Past window taken from the recorded data so it is consistent.
        let mut state = ControllerState::new(4);
        for k in 30..34 {
            state.push(traj.u[k], traj.y[k]);
        }
        let sol = solver.solve(&state).unwrap();

        let u_from_g = &hs.uf * &sol.g;
        let y_from_g = &hs.yf * &sol.g;
        let up_g = &hs.up * &sol.g;
        for i in 0..8 {
            assert_abs_diff_eq!(u_from_g[i], sol.u_star[i], epsilon = 1e-8);
            assert_abs_diff_eq!(y_from_g[i], sol.y_star[i], epsilon = 1e-8);
        }
        let u_ini = state.u_vec();
        for i in 0..4 {
            assert_abs_diff_eq!(up_g[i], u_ini[i], epsilon = 1e-8);
        }
        // Slack equals the past-output residual by construction.
        let yp_g = &hs.yp * &sol.g;
        let y_ini = state.y_vec();
        for i in 0..4 {
            assert_abs_diff_eq!(yp_g[i] - y_ini[i], sol.sigma_y[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn stronger_regularization_never_grows_g() {
        let traj = collected_data(90, 23);
        let hs = split_past_future(&traj, 4, 8).unwrap();
        let mut state = ControllerState::new(4);
        for k in 50..54 {
            state.push(traj.u[k], traj.y[k]);
        }
        let mut prev_norm = f64::INFINITY;
        for lambda_g in [1e-3, 1e-1, 1.0, 10.0, 1e3, 1e5] {
            let mut cfg = test_config(4, 8);
            cfg.lambda_g = lambda_g;
            cfg.reference = 0.5;
            let sol = solve(DeePCData::Full(&hs), &state, &cfg).unwrap();
            let norm = sol.g.norm();
            assert!(
                norm <= prev_norm * (1.0 + 1e-9),
                "||g|| grew from {prev_norm} to {norm} at lambda_g={lambda_g}"
            );
            prev_norm = norm;
        }
    }

    #[test]
    fn box_constrained_solution_matches_enumeration_oracle() {
        // Small problem: enumerate every active-set combination of the input
        // bounds, solve each equality-constrained QP by pseudo-inverse, keep
        // the best feasible point. The active-set iteration must match it.
        let traj = collected_data(60, 41);
        let horizon = 3;
        let hs = split_past_future(&traj, 2, horizon).unwrap();
        let mut cfg = test_config(2, horizon);
        cfg.reference = 0.4;
        cfg.q_weight = 50.0;
        cfg.input_bounds = Some((-0.3, 0.3));
        let mut state = ControllerState::new(2);
        for k in 20..22 {
            state.push(traj.u[k], traj.y[k]);
        }
        let mut solver = DeePCSolver::new(DeePCData::Full(&hs), cfg.clone()).unwrap();
        let sol = solver.solve(&state).unwrap();
        for &u in &sol.u_star {
            assert!(u >= -0.3 - 1e-8 && u <= 0.3 + 1e-8);
        }

        // Oracle: brute force over {free, lower, upper}^horizon.
        let g_dim = hs.uf.ncols();
        let q = cfg.q_weight;
        let r = cfg.r_weight;
        let ly = cfg.lambda_y.unwrap();
        let lg = cfg.lambda_g;
        let u_ini = state.u_vec();
        let y_ini = state.y_vec();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0..3usize.pow(horizon as u32) {
            let mut sides = Vec::new();
            let mut m = mask;
            for _ in 0..horizon {
                sides.push(m % 3);
                m /= 3;
            }
            let n_act = sides.iter().filter(|&&s| s != 0).count();
            let mut eq = DMatrix::zeros(2 + n_act, g_dim);
            eq.view_mut((0, 0), (2, g_dim)).copy_from(&hs.up);
            let mut rhs = DVector::zeros(2 + n_act);
            rhs.rows_mut(0, 2).copy_from(&u_ini);
            let mut row = 2;
            for (i, &s) in sides.iter().enumerate() {
                if s != 0 {
                    eq.row_mut(row).copy_from(&hs.uf.row(i));
                    rhs[row] = if s == 1 { -0.3 } else { 0.3 };
                    row += 1;
                }
            }
            let mut h = hs.yf.transpose() * &hs.yf * q
                + hs.uf.transpose() * &hs.uf * r
                + hs.yp.transpose() * &hs.yp * ly;
            for i in 0..g_dim {
                h[(i, i)] += lg;
            }
            let kkt = build_kkt(&h, &eq);
            let y_ref = DVector::from_element(horizon, cfg.reference);
            let mut full_rhs = DVector::zeros(g_dim + 2 + n_act);
            full_rhs
                .rows_mut(0, g_dim)
                .copy_from(&(hs.yf.transpose() * &y_ref * q + hs.yp.transpose() * &y_ini * ly));
            full_rhs.rows_mut(g_dim, 2 + n_act).copy_from(&rhs);
            let svd = SVD::new(kkt, true, true);
            let Ok(z) = svd.solve(&full_rhs, 1e-12) else { continue };
            let g = z.rows(0, g_dim).into_owned();
            let u_try = &hs.uf * &g;
            if u_try.iter().any(|&u| !(-0.3 - 1e-7..=0.3 + 1e-7).contains(&u)) {
                continue;
            }
            let y_try = &hs.yf * &g;
            let sig = &hs.yp * &g - &y_ini;
            let mut obj = lg * g.norm_squared() + ly * sig.norm_squared();
            for i in 0..horizon {
                obj += q * (y_try[i] - cfg.reference).powi(2) + r * u_try[i] * u_try[i];
            }
            if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                best = Some((obj, u_try.iter().cloned().collect()));
            }
        }
        let (oracle_obj, oracle_u) = best.expect("some active set is feasible");
        assert_relative_eq!(sol.objective, oracle_obj, epsilon = 1e-8, max_relative = 1e-6);
        for i in 0..horizon {
            assert_abs_diff_eq!(sol.u_star[i], oracle_u[i], epsilon = 1e-6);
        }
    }

    #[test]
    fn closed_loop_matches_manual_receding_horizon_bookkeeping() {
        let traj = collected_data(120, 8);
        let hs = split_past_future(&traj, 4, 8).unwrap();
        let mut cfg = test_config(4, 8);
        cfg.reference = 0.25;
        let k_end = 30;

        let mut plant = LtiPlant::new(double_integrator(0.1), 0.1);
        let (loop_traj, diags) =
            run_closed_loop(&mut plant, DeePCData::Full(&hs), &cfg, k_end, None).unwrap();
        assert_eq!(loop_traj.len(), k_end);
        assert_eq!(diags.len(), k_end);

        // Manual replication: identical solver and explicit window updates.
        let mut plant2 = LtiPlant::new(double_integrator(0.1), 0.1);
        let mut solver = DeePCSolver::new(DeePCData::Full(&hs), cfg.clone()).unwrap();
        let mut state = ControllerState::new(4);
        let mut applied = Vec::new();
        for k in 0..k_end {
            let u = if k < 4 {
                0.0
            } else {
                // The window must hold exactly the last t_ini applied inputs.
                let expect: Vec<f64> = applied[k - 4..].to_vec();
                assert_eq!(state.u_vec().as_slice(), expect.as_slice());
                solver.solve(&state).unwrap().u_star[0]
            };
            let y = plant2.apply(u);
            state.push(u, y);
            applied.push(u);
        }
        for k in 0..k_end {
            assert_eq!(loop_traj.u[k], applied[k], "step {k}");
        }
        // Warmup steps are zero-torque and flagged NaN in the diagnostics.
        for k in 0..4 {
            assert_eq!(loop_traj.u[k], 0.0);
            assert!(diags[k].objective.is_nan());
        }
        assert!(diags[5].objective.is_finite());
    }

    #[test]
    fn solver_rejects_mismatched_windows() {
        let traj = collected_data(60, 2);
        let hs = split_past_future(&traj, 4, 8).unwrap();
        let cfg = test_config(3, 8);
        assert!(DeePCSolver::new(DeePCData::Full(&hs), cfg).is_err());

        let cfg = test_config(4, 8);
        let mut solver = DeePCSolver::new(DeePCData::Full(&hs), cfg).unwrap();
        let state = ControllerState::new(4); // not yet filled
        assert!(solver.solve(&state).is_err());
    }
}
