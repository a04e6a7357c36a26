//! Experiment harness: PD-based data collection, the comparison scenarios,
//! metrics, and CSV export.
//!
//! A scenario owns its plant and controller instances and is fully
//! reproducible from its spec and seed: the disturbance sequence is drawn
//! from a seeded generator keyed by the scenario seed alone, so both
//! controllers face identical noise within a scenario, and reruns are
//! bitwise identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::beam::{boundary_curvature, tip_deflection, BeamModel, SpacecraftPlant};
use crate::config::RunConfig;
use crate::deepc::{
    run_closed_loop, stage_cost, DeePCData, Plant, StepDiagnostic,
};
use crate::error::{Error, Result};
use crate::lyapunov::{control_torque, BoundarySignals, LyapunovParams};
use crate::trajectory::{persistency_report, split_past_future, svd_reduce, RankRule, Trajectory};

/// Experiment condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Nominal,
    /// Executed plant density doubled (configurable); data and gains stay
    /// nominal.
    Uncertainty,
    /// Additive zero-mean Gaussian torque disturbance every step.
    ProcessNoise,
    /// Impulse then no control.
    FreeVibration,
    DataCollection,
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ScenarioKind::Nominal => "nominal",
            ScenarioKind::Uncertainty => "uncertainty",
            ScenarioKind::ProcessNoise => "process_noise",
            ScenarioKind::FreeVibration => "free_vibration",
            ScenarioKind::DataCollection => "data_collection",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nominal" => Ok(ScenarioKind::Nominal),
            "uncertainty" => Ok(ScenarioKind::Uncertainty),
            "process_noise" => Ok(ScenarioKind::ProcessNoise),
            "free_vibration" => Ok(ScenarioKind::FreeVibration),
            "data_collection" => Ok(ScenarioKind::DataCollection),
            _ => Err(Error::InvalidParameter(format!(
                "unknown scenario '{s}' (expected nominal, uncertainty, process_noise, \
                 free_vibration, or data_collection)"
            ))),
        }
    }
}

/// Which controller closes the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Deepc,
    Lyapunov,
    Pd,
    None,
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ControllerKind::Deepc => "deepc",
            ControllerKind::Lyapunov => "lyapunov",
            ControllerKind::Pd => "pd",
            ControllerKind::None => "none",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deepc" => Ok(ControllerKind::Deepc),
            "lyapunov" => Ok(ControllerKind::Lyapunov),
            "pd" => Ok(ControllerKind::Pd),
            "none" => Ok(ControllerKind::None),
            _ => Err(Error::InvalidParameter(format!(
                "unknown controller '{s}' (expected deepc, lyapunov, pd, or none)"
            ))),
        }
    }
}

/// Fully specified experiment run.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub controller: ControllerKind,
    /// Reference angle (rad).
    pub theta_d: f64,
    /// Run length (s).
    pub duration: f64,
    /// Process-noise standard deviation (N·m); 0 disables the disturbance.
    pub noise_std: f64,
    pub seed: u64,
    /// Density multiplier applied to the executed plant only.
    pub rho_multiplier: f64,
    /// Free-vibration impulse torque (N·m) and how long it is held (s).
    pub impulse: f64,
    pub impulse_duration: f64,
}

impl ScenarioSpec {
    /// Standard spec for a kind/controller pair with everything else taken
    /// from the config.
    pub fn from_config(kind: ScenarioKind, controller: ControllerKind, cfg: &RunConfig) -> Self {
        Self {
            kind,
            controller,
            theta_d: if kind == ScenarioKind::FreeVibration {
                0.0
            } else {
                cfg.theta_d
            },
            duration: cfg.duration,
            noise_std: if kind == ScenarioKind::ProcessNoise {
                cfg.noise_std
            } else {
                0.0
            },
            seed: cfg.seed,
            rho_multiplier: if kind == ScenarioKind::Uncertainty {
                cfg.rho_multiplier
            } else {
                1.0
            },
            impulse: cfg.impulse,
            impulse_duration: cfg.impulse_duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "duration must be > 0, got {}",
                self.duration
            )));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise_std must be >= 0, got {}",
                self.noise_std
            )));
        }
        if !(self.rho_multiplier > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rho_multiplier must be > 0, got {}",
                self.rho_multiplier
            )));
        }
        Ok(())
    }
}

/// Outcome of one scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    /// Commanded inputs and measured tip-angle outputs.
    pub trajectory: Trajectory,
    /// Hub angle per step.
    pub theta_history: Vec<f64>,
    /// Tip deflection y(L) per step (m).
    pub tip_deflection_history: Vec<f64>,
    /// Total mechanical energy per step (J).
    pub energy_history: Vec<f64>,
    /// Per-step tracking cost and its sum over the whole run.
    pub stage_costs: Vec<f64>,
    pub accumulated_cost: f64,
    /// First time after which the output stays inside the settling band;
    /// `None` when the run never settles (or the band is undefined).
    pub settling_time: Option<f64>,
    /// Largest commanded torque magnitude (N·m).
    pub peak_torque: f64,
    /// Solver diagnostics (predictive controller only).
    pub diagnostics: Option<Vec<StepDiagnostic>>,
}

/// PD gains for data collection.
#[derive(Debug, Clone, Copy)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

/// Data-collection recipe.
#[derive(Debug, Clone)]
pub struct CollectSpec {
    pub duration: f64,
    pub pd: PdGains,
    /// Uniform dither amplitude (N·m): torque noise of ±dither.
    pub dither: f64,
    /// Reference angles the PD loop cycles through.
    pub references: Vec<f64>,
    /// Dwell time per reference (s).
    pub dwell: f64,
    pub seed: u64,
    /// Estimated plant state dimension for the excitation-order check.
    pub n_est: usize,
    /// Window depth L = t_ini + horizon the data must support.
    pub depth: usize,
}

impl CollectSpec {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            duration: cfg.collect_duration,
            pd: PdGains { kp: cfg.kp, kd: cfg.kd },
            dither: cfg.dither,
            references: cfg.collect_refs.clone(),
            dwell: cfg.dwell,
            seed: cfg.seed,
            n_est: cfg.n_est,
            depth: cfg.t_ini + cfg.horizon,
        }
    }
}

/// Run the PD + dither collection loop and verify the recorded input is
/// persistently exciting of order `n_est + depth`.
pub fn collect_data(model: &BeamModel, rho_inf: f64, spec: &CollectSpec) -> Result<Trajectory> {
    if spec.references.is_empty() {
        return Err(Error::InvalidParameter(
            "collection needs at least one reference angle".into(),
        ));
    }
    if !(spec.dwell > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dwell must be > 0, got {}",
            spec.dwell
        )));
    }
    let n_steps = (spec.duration / model.dt).round() as usize;
    let pe_order = spec.n_est + spec.depth;
    if n_steps < 2 * pe_order - 1 {
        return Err(Error::Collection(format!(
            "{n_steps} samples cannot be persistently exciting of order {pe_order}; \
             collect for at least {} steps",
            2 * pe_order - 1
        )));
    }

    let mut plant = SpacecraftPlant::new(model.clone(), rho_inf)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut u = Vec::with_capacity(n_steps);
    let mut y = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let t = k as f64 * model.dt;
        let reference = spec.references[(t / spec.dwell) as usize % spec.references.len()];
        let dither = if spec.dither > 0.0 {
            rng.gen_range(-spec.dither..spec.dither)
        } else {
            0.0
        };
        let torque = spec.pd.kp * (reference - plant.state.theta)
            - spec.pd.kd * plant.state.theta_t
            + dither;
        let output = plant.apply_torque(torque);
        u.push(torque);
        y.push(output);
    }

    let report = persistency_report(&u, pe_order)?;
    if !report.excited {
        return Err(Error::Collection(format!(
            "collected input is not persistently exciting of order {pe_order} ({:?}); \
             increase the dither amplitude or collect for longer",
            report.failure
        )));
    }
    Trajectory::new(u, y, model.dt)
}

/// Band definition for settling-time measurement.
#[derive(Debug, Clone, Copy)]
pub enum SettlingBand {
    /// Fraction of |target|; invalid when the target is zero.
    Relative(f64),
    /// Absolute half-width in output units.
    Absolute(f64),
}

/// First time after which `|y(t) − target| ≤ band` for every remaining
/// sample; `Ok(None)` when the run never settles.
pub fn settling_time(
    times: &[f64],
    outputs: &[f64],
    target: f64,
    band: SettlingBand,
) -> Result<Option<f64>> {
    if times.len() != outputs.len() {
        return Err(Error::Dimension(format!(
            "times and outputs differ in length: {} vs {}",
            times.len(),
            outputs.len()
        )));
    }
    let tol = match band {
        SettlingBand::Relative(frac) => {
            if !(frac > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "band fraction must be > 0, got {frac}"
                )));
            }
            if target == 0.0 {
                return Err(Error::InvalidParameter(
                    "relative band is undefined for a zero target; use an absolute band".into(),
                ));
            }
            frac * target.abs()
        }
        SettlingBand::Absolute(half_width) => {
            if !(half_width > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "band half-width must be > 0, got {half_width}"
                )));
            }
            half_width
        }
    };
    let last_violation = (0..outputs.len())
        .rev()
        .find(|&i| (outputs[i] - target).abs() > tol);
    Ok(match last_violation {
        None => Some(0.0),
        Some(i) if i + 1 == outputs.len() => None,
        Some(i) => Some(times[i + 1]),
    })
}

/// Plant wrapper that records hub angle, tip deflection, and energy after
/// every applied torque.
struct RecordingPlant {
    inner: SpacecraftPlant,
    thetas: Vec<f64>,
    tips: Vec<f64>,
    energies: Vec<f64>,
}

impl RecordingPlant {
    fn new(inner: SpacecraftPlant) -> Self {
        Self {
            inner,
            thetas: Vec::new(),
            tips: Vec::new(),
            energies: Vec::new(),
        }
    }
}

impl Plant for RecordingPlant {
    fn apply(&mut self, torque: f64) -> f64 {
        let y = self.inner.apply_torque(torque);
        self.thetas.push(self.inner.state.theta);
        self.tips.push(tip_deflection(&self.inner.state));
        self.energies.push(self.inner.energy());
        y
    }

    fn dt(&self) -> f64 {
        self.inner.model.dt
    }
}

fn noise_sequence(spec: &ScenarioSpec, n_steps: usize) -> Result<Option<Vec<f64>>> {
    if spec.noise_std == 0.0 {
        return Ok(None);
    }
    // Keyed by the scenario seed only: both controllers face the same
    // disturbance within a scenario.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.noise_std)
        .map_err(|e| Error::InvalidParameter(format!("bad noise std: {e}")))?;
    Ok(Some((0..n_steps).map(|_| normal.sample(&mut rng)).collect()))
}

/// Run one scenario. Predictive-controller scenarios require a trajectory
/// collected from the nominal plant; the executed plant carries the
/// scenario's density multiplier while data and gains stay nominal.
pub fn run_scenario(
    spec: &ScenarioSpec,
    cfg: &RunConfig,
    data: Option<&Trajectory>,
) -> Result<ScenarioResult> {
    spec.validate()?;
    let nominal = cfg.beam_model()?;
    let executed = BeamModel {
        rho: nominal.rho * spec.rho_multiplier,
        ..nominal.clone()
    };
    let n_steps = (spec.duration / executed.dt).round() as usize;
    let noise = noise_sequence(spec, n_steps)?;
    let noise_slice = noise.as_deref();

    let mut plant = RecordingPlant::new(SpacecraftPlant::new(executed, cfg.rho_inf)?);
    let deepc_cfg = {
        let mut c = cfg.deepc_config();
        c.reference = spec.theta_d;
        c
    };

    let (trajectory, diagnostics) = match spec.controller {
        ControllerKind::Deepc => {
            let data = data.ok_or_else(|| Error::InvalidParameter(
                "a trajectory collected from the nominal plant is required for this controller"
                    .into(),
            ))?;
            let hankel = split_past_future(data, cfg.t_ini, cfg.horizon)?;
            let reduced = svd_reduce(&hankel, RankRule::TurningPoint)?;
            let (traj, diags) = run_closed_loop(
                &mut plant,
                DeePCData::Reduced(&reduced),
                &deepc_cfg,
                n_steps,
                noise_slice,
            )?;
            (traj, Some(diags))
        }
        ControllerKind::Lyapunov => {
            // Gains computed from the nominal model; the law also uses the
            // nominal EI and J (the controller's belief, not the plant's).
            let params = cfg.lyapunov_params()?;
            (
                run_boundary_feedback(
                    &mut plant,
                    &nominal,
                    &params,
                    spec.theta_d,
                    n_steps,
                    noise_slice,
                )?,
                None,
            )
        }
        ControllerKind::Pd => {
            let mut u_hist = Vec::with_capacity(n_steps);
            let mut y_hist = Vec::with_capacity(n_steps);
            for k in 0..n_steps {
                let torque = cfg.kp * (spec.theta_d - plant.inner.state.theta)
                    - cfg.kd * plant.inner.state.theta_t;
                let y = plant.apply(torque + noise_slice.map_or(0.0, |d| d[k]));
                u_hist.push(torque);
                y_hist.push(y);
            }
            (Trajectory::new(u_hist, y_hist, plant.dt())?, None)
        }
        ControllerKind::None => {
            let mut u_hist = Vec::with_capacity(n_steps);
            let mut y_hist = Vec::with_capacity(n_steps);
            for k in 0..n_steps {
                let t = k as f64 * plant.dt();
                let torque = if t < spec.impulse_duration { spec.impulse } else { 0.0 };
                let y = plant.apply(torque + noise_slice.map_or(0.0, |d| d[k]));
                u_hist.push(torque);
                y_hist.push(y);
            }
            (Trajectory::new(u_hist, y_hist, plant.dt())?, None)
        }
    };

    let stage_costs: Vec<f64> = trajectory
        .u
        .iter()
        .zip(trajectory.y.iter())
        .map(|(&u, &y)| stage_cost(y, u, &deepc_cfg))
        .collect();
    let accumulated_cost = stage_costs.iter().sum();
    let times: Vec<f64> = (0..trajectory.len())
        .map(|k| k as f64 * trajectory.dt)
        .collect();
    let settling = if spec.theta_d != 0.0 {
        settling_time(
            &times,
            &trajectory.y,
            spec.theta_d,
            SettlingBand::Relative(cfg.settle_band),
        )?
    } else {
        None
    };
    let peak_torque = trajectory.u.iter().fold(0.0_f64, |m, &u| m.max(u.abs()));

    Ok(ScenarioResult {
        theta_history: plant.thetas,
        tip_deflection_history: plant.tips,
        energy_history: plant.energies,
        stage_costs,
        accumulated_cost,
        settling_time: settling,
        peak_torque,
        diagnostics,
        trajectory,
    })
}

/// Boundary-feedback closed loop sharing the recording plant.
fn run_boundary_feedback(
    plant: &mut RecordingPlant,
    nominal: &BeamModel,
    params: &LyapunovParams,
    theta_d: f64,
    n_steps: usize,
    noise: Option<&[f64]>,
) -> Result<Trajectory> {
    let mut u_hist = Vec::with_capacity(n_steps);
    let mut y_hist = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let state = &plant.inner.state;
        let (y_xx0, y_xxt0) = boundary_curvature(state, &plant.inner.model);
        let signals = BoundarySignals {
            tracking_error: state.theta - theta_d,
            hub_rate: state.theta_t,
            root_curvature: y_xx0,
            root_curvature_rate: y_xxt0,
        };
        let torque = control_torque(&signals, params, nominal);
        let y = plant.apply(torque + noise.map_or(0.0, |d| d[k]));
        u_hist.push(torque);
        y_hist.push(y);
    }
    Trajectory::new(u_hist, y_hist, plant.dt())
}

/// One line of the comparison table.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub scenario: String,
    pub controller: String,
    pub cost: f64,
    pub settling_time: Option<f64>,
    pub peak_torque: f64,
}

/// Render the per-step result CSV:
/// `k,t,u,y,theta,tip_deflection,stage_cost`.
pub fn result_csv(result: &ScenarioResult) -> String {
    let mut out = String::from("k,t,u,y,theta,tip_deflection,stage_cost\n");
    for k in 0..result.trajectory.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            k,
            k as f64 * result.trajectory.dt,
            result.trajectory.u[k],
            result.trajectory.y[k],
            result.theta_history[k],
            result.tip_deflection_history[k],
            result.stage_costs[k],
        ));
    }
    out
}

/// Write the result CSV to disk.
pub fn export_result(result: &ScenarioResult, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, result_csv(result))?;
    Ok(())
}

/// Render the summary CSV:
/// `scenario,controller,cost,settling_time,peak_torque`.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("scenario,controller,cost,settling_time,peak_torque\n");
    for row in rows {
        let settling = match row.settling_time {
            Some(t) => t.to_string(),
            None => "not_settled".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.scenario, row.controller, row.cost, settling, row.peak_torque
        ));
    }
    out
}

/// Collect nominal data once, then run both controllers through the
/// nominal, uncertainty, and process-noise scenarios.
pub fn compare(cfg: &RunConfig) -> Result<Vec<(SummaryRow, ScenarioResult)>> {
    let model = cfg.beam_model()?;
    let data = collect_data(&model, cfg.rho_inf, &CollectSpec::from_config(cfg))?;
    let mut out = Vec::new();
    for kind in [
        ScenarioKind::Nominal,
        ScenarioKind::Uncertainty,
        ScenarioKind::ProcessNoise,
    ] {
        for controller in [ControllerKind::Deepc, ControllerKind::Lyapunov] {
            let spec = ScenarioSpec::from_config(kind, controller, cfg);
            let result = run_scenario(&spec, cfg, Some(&data))?;
            out.push((
                SummaryRow {
                    scenario: kind.to_string(),
                    controller: controller.to_string(),
                    cost: result.accumulated_cost,
                    settling_time: result.settling_time,
                    peak_torque: result.peak_torque,
                },
                result,
            ));
        }
    }
    Ok(out)
}
