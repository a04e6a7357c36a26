//! Finite-element model of a rigid hub with a flexible cantilever appendage.
//!
//! The appendage is an Euler-Bernoulli beam discretized with cubic Hermite
//! elements (two DOFs per node: transverse deflection and slope). The hub
//! rotation couples to the beam through the first moment of the mass
//! distribution, which yields a symmetric augmented system
//!
//! ```text
//!   [ M   m  ] [ a_tt     ]   [ K  0 ] [ a     ]   [ 0   ]
//!   [ m'  J~ ] [ theta_tt ] + [ 0  0 ] [ theta ] = [ tau ]
//! ```
//!
//! with `J~ = J + rho L^3 / 3` the total inertia of hub plus beam. Time
//! integration uses the Generalized-α method (Chung-Hulbert), second-order
//! accurate with tunable high-frequency dissipation.
//!
//! DOF layout: node 0 is clamped (both DOFs eliminated); the free DOFs are
//! `[w_1, phi_1, ..., w_n, phi_n]` for nodes 1..n_elements, followed by the
//! hub angle in the augmented vectors.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Physical and discretization parameters of the hub-beam plant.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamModel {
    /// Bending stiffness EI (kg·m³/s²).
    pub ei: f64,
    /// Linear mass density ρ (kg/m).
    pub rho: f64,
    /// Beam length L (m).
    pub length: f64,
    /// Hub moment of inertia J (kg·m²).
    pub hub_inertia: f64,
    /// Number of beam elements.
    pub n_elements: usize,
    /// Time step (s).
    pub dt: f64,
}

impl BeamModel {
    pub fn new(
        ei: f64,
        rho: f64,
        length: f64,
        hub_inertia: f64,
        n_elements: usize,
        dt: f64,
    ) -> Result<Self> {
        if !(ei > 0.0) {
            return Err(Error::InvalidParameter(format!("ei must be > 0, got {ei}")));
        }
        if !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be > 0, got {rho}")));
        }
        if !(length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "length must be > 0, got {length}"
            )));
        }
        if !(hub_inertia > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "hub_inertia must be > 0, got {hub_inertia}"
            )));
        }
        if n_elements < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_elements must be >= 2, got {n_elements}"
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        Ok(Self {
            ei,
            rho,
            length,
            hub_inertia,
            n_elements,
            dt,
        })
    }

    /// Element length h = L / n_elements.
    pub fn element_length(&self) -> f64 {
        self.length / self.n_elements as f64
    }

    /// Number of free elastic DOFs (node 0 clamped).
    pub fn n_dof(&self) -> usize {
        2 * self.n_elements
    }
}

/// Full dynamic state of the plant at one time instant.
#[derive(Debug, Clone)]
pub struct PlantState {
    /// Elastic nodal DOFs: alternating deflection (m) and slope (rad).
    pub a: DVector<f64>,
    /// First time derivatives of `a`.
    pub a_t: DVector<f64>,
    /// Second time derivatives of `a`.
    pub a_tt: DVector<f64>,
    /// Hub angle (rad).
    pub theta: f64,
    /// Hub angular velocity (rad/s).
    pub theta_t: f64,
    /// Hub angular acceleration (rad/s²).
    pub theta_tt: f64,
    /// Simulation clock (s).
    pub time: f64,
}

impl PlantState {
    /// State at rest (all zeros) for the given model.
    pub fn rest(model: &BeamModel) -> Self {
        let n = model.n_dof();
        Self {
            a: DVector::zeros(n),
            a_t: DVector::zeros(n),
            a_tt: DVector::zeros(n),
            theta: 0.0,
            theta_t: 0.0,
            theta_tt: 0.0,
            time: 0.0,
        }
    }

    /// State at rest with a nonzero hub angle.
    pub fn rest_at_angle(model: &BeamModel, theta: f64) -> Self {
        Self {
            theta,
            ..Self::rest(model)
        }
    }
}

/// Assembled global matrices of the hub-beam system.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    /// Symmetric augmented mass matrix, size (2n_e + 1)².
    pub mass_aug: DMatrix<f64>,
    /// Augmented stiffness matrix (elastic K padded with a zero hub row/column).
    pub stiff_aug: DMatrix<f64>,
    /// Coupling vector m with m_i = ∫ ρ x φ_i dx.
    pub coupling: DVector<f64>,
    /// Total inertia J~ = J + ρL³/3.
    pub total_inertia: f64,
    /// Number of elastic DOFs.
    pub n_dof: usize,
    /// Element length (m).
    pub element_length: f64,
    /// Plant time step (s), carried over from the model.
    pub dt: f64,
}

impl AssembledSystem {
    /// Elastic mass block M (without the hub row/column).
    pub fn mass_elastic(&self) -> DMatrix<f64> {
        self.mass_aug.view((0, 0), (self.n_dof, self.n_dof)).into_owned()
    }

    /// Elastic stiffness block K.
    pub fn stiff_elastic(&self) -> DMatrix<f64> {
        self.stiff_aug.view((0, 0), (self.n_dof, self.n_dof)).into_owned()
    }
}

/// Cubic Hermite element stiffness and mass matrices.
///
/// Returns `(stiffness, mass)` for an element of length `h`:
///
/// ```text
/// K_e = EI/h³ [ 12   6h  -12   6h ]      M_e = ρh/420 [ 156   22h   54  -13h ]
///             [ 6h  4h²  -6h  2h² ]                   [ 22h   4h²  13h  -3h² ]
///             [-12  -6h   12  -6h ]                   [ 54   13h   156  -22h ]
///             [ 6h  2h²  -6h  4h² ]                   [-13h  -3h²  -22h  4h² ]
/// ```
pub fn element_matrices(ei: f64, rho: f64, h: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(ei >= 0.0) || !(rho >= 0.0) || !(h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "element_matrices requires ei >= 0, rho >= 0, h > 0 (got ei={ei}, rho={rho}, h={h})"
        )));
    }
    let k = ei / (h * h * h);
    let stiffness = DMatrix::from_row_slice(
        4,
        4,
        &[
            12.0 * k,
            6.0 * h * k,
            -12.0 * k,
            6.0 * h * k,
            6.0 * h * k,
            4.0 * h * h * k,
            -6.0 * h * k,
            2.0 * h * h * k,
            -12.0 * k,
            -6.0 * h * k,
            12.0 * k,
            -6.0 * h * k,
            6.0 * h * k,
            2.0 * h * h * k,
            -6.0 * h * k,
            4.0 * h * h * k,
        ],
    );
    let m = rho * h / 420.0;
    let mass = DMatrix::from_row_slice(
        4,
        4,
        &[
            156.0 * m,
            22.0 * h * m,
            54.0 * m,
            -13.0 * h * m,
            22.0 * h * m,
            4.0 * h * h * m,
            13.0 * h * m,
            -3.0 * h * h * m,
            54.0 * m,
            13.0 * h * m,
            156.0 * m,
            -22.0 * h * m,
            -13.0 * h * m,
            -3.0 * h * h * m,
            -22.0 * h * m,
            4.0 * h * h * m,
        ],
    );
    Ok((stiffness, mass))
}

/// Element contribution to the hub coupling vector ∫ ρ x φ_k dx over one
/// element starting at `x_left`, split as x_left·∫φ + ∫s·φ with the exact
/// Hermite integrals ∫φ = [h/2, h²/12, h/2, −h²/12] and
/// ∫s·φ = [3h²/20, h³/30, 7h²/20, −h³/20].
fn element_coupling(rho: f64, h: f64, x_left: f64) -> [f64; 4] {
    let i0 = [h / 2.0, h * h / 12.0, h / 2.0, -h * h / 12.0];
    let i1 = [
        3.0 * h * h / 20.0,
        h * h * h / 30.0,
        7.0 * h * h / 20.0,
        -h * h * h / 20.0,
    ];
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = rho * (x_left * i0[k] + i1[k]);
    }
    out
}

/// Assemble the global system: elastic M and K with node-0 DOFs eliminated,
/// the coupling vector, and the augmented blocks.
pub fn assemble(model: &BeamModel) -> Result<AssembledSystem> {
    let n = model.n_dof();
    let h = model.element_length();
    let (ke, me) = element_matrices(model.ei, model.rho, h)?;

    let mut mass = DMatrix::zeros(n, n);
    let mut stiff = DMatrix::zeros(n, n);
    let mut coupling = DVector::zeros(n);

    for e in 0..model.n_elements {
        // Element DOFs map to global indices; node 0 entries map to None.
        let left = if e == 0 {
            [None, None]
        } else {
            [Some(2 * (e - 1)), Some(2 * (e - 1) + 1)]
        };
        let right = [Some(2 * e), Some(2 * e + 1)];
        let dofs = [left[0], left[1], right[0], right[1]];

        for (i, gi) in dofs.iter().enumerate() {
            let Some(gi) = gi else { continue };
            for (j, gj) in dofs.iter().enumerate() {
                let Some(gj) = gj else { continue };
                mass[(*gi, *gj)] += me[(i, j)];
                stiff[(*gi, *gj)] += ke[(i, j)];
            }
        }

        let fe = element_coupling(model.rho, h, e as f64 * h);
        for (i, gi) in dofs.iter().enumerate() {
            if let Some(gi) = gi {
                coupling[*gi] += fe[i];
            }
        }
    }

    let total_inertia = model.hub_inertia + model.rho * model.length.powi(3) / 3.0;

    let mut mass_aug = DMatrix::zeros(n + 1, n + 1);
    mass_aug.view_mut((0, 0), (n, n)).copy_from(&mass);
    for i in 0..n {
        mass_aug[(i, n)] = coupling[i];
        mass_aug[(n, i)] = coupling[i];
    }
    mass_aug[(n, n)] = total_inertia;

    let mut stiff_aug = DMatrix::zeros(n + 1, n + 1);
    stiff_aug.view_mut((0, 0), (n, n)).copy_from(&stiff);

    Ok(AssembledSystem {
        mass_aug,
        stiff_aug,
        coupling,
        total_inertia,
        n_dof: n,
        element_length: h,
        dt: model.dt,
    })
}

/// Generalized-α integrator parameters via the spectral radius ρ∞ ∈ [0, 1].
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub rho_inf: f64,
}

impl IntegratorConfig {
    pub fn new(rho_inf: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho_inf) {
            return Err(Error::InvalidParameter(format!(
                "rho_inf must lie in [0, 1], got {rho_inf}"
            )));
        }
        Ok(Self { rho_inf })
    }

    pub fn alpha_m(&self) -> f64 {
        (2.0 * self.rho_inf - 1.0) / (self.rho_inf + 1.0)
    }

    pub fn alpha_f(&self) -> f64 {
        self.rho_inf / (self.rho_inf + 1.0)
    }

    pub fn gamma(&self) -> f64 {
        0.5 - self.alpha_m() + self.alpha_f()
    }

    pub fn beta(&self) -> f64 {
        let s = 1.0 - self.alpha_m() + self.alpha_f();
        s * s / 4.0
    }
}

impl Default for IntegratorConfig {
    /// Mild high-frequency dissipation suitable for long closed-loop runs.
    fn default() -> Self {
        Self { rho_inf: 0.9 }
    }
}

/// Generalized-α time stepper with the effective matrix factored once.
///
/// The system is linear time-invariant with a fixed step, so
/// `S = (1 − α_m) M + (1 − α_f) β dt² K` is constant and its Cholesky
/// factor is reused every step. The applied torque is zero-order-held over
/// the step.
pub struct GeneralizedAlpha {
    cfg: IntegratorConfig,
    dt: f64,
    n_dof: usize,
    mass: DMatrix<f64>,
    stiff: DMatrix<f64>,
    effective: Cholesky<f64, Dyn>,
}

impl GeneralizedAlpha {
    pub fn new(system: &AssembledSystem, cfg: IntegratorConfig, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        let s = &system.mass_aug * (1.0 - cfg.alpha_m())
            + &system.stiff_aug * ((1.0 - cfg.alpha_f()) * cfg.beta() * dt * dt);
        let effective = Cholesky::new(s).ok_or_else(|| {
            Error::Numerical("effective matrix is not positive definite".into())
        })?;
        Ok(Self {
            cfg,
            dt,
            n_dof: system.n_dof,
            mass: system.mass_aug.clone(),
            stiff: system.stiff_aug.clone(),
            effective,
        })
    }

    fn check_dims(&self, state: &PlantState) -> Result<()> {
        if state.a.len() != self.n_dof
            || state.a_t.len() != self.n_dof
            || state.a_tt.len() != self.n_dof
        {
            return Err(Error::Dimension(format!(
                "state has {} elastic DOFs, system expects {}",
                state.a.len(),
                self.n_dof
            )));
        }
        Ok(())
    }

    fn gather(&self, state: &PlantState) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let n = self.n_dof;
        let mut d = DVector::zeros(n + 1);
        let mut v = DVector::zeros(n + 1);
        let mut acc = DVector::zeros(n + 1);
        d.rows_mut(0, n).copy_from(&state.a);
        v.rows_mut(0, n).copy_from(&state.a_t);
        acc.rows_mut(0, n).copy_from(&state.a_tt);
        d[n] = state.theta;
        v[n] = state.theta_t;
        acc[n] = state.theta_tt;
        (d, v, acc)
    }

    fn scatter(&self, d: &DVector<f64>, v: &DVector<f64>, acc: &DVector<f64>, time: f64) -> PlantState {
        let n = self.n_dof;
        PlantState {
            a: d.rows(0, n).into_owned(),
            a_t: v.rows(0, n).into_owned(),
            a_tt: acc.rows(0, n).into_owned(),
            theta: d[n],
            theta_t: v[n],
            theta_tt: acc[n],
            time,
        }
    }

    /// Advance one time step under the given hub torque.
    pub fn step(&self, state: &PlantState, torque: f64) -> Result<PlantState> {
        self.check_dims(state)?;
        let n = self.n_dof;
        let dt = self.dt;
        let (am, af) = (self.cfg.alpha_m(), self.cfg.alpha_f());
        let (gamma, beta) = (self.cfg.gamma(), self.cfg.beta());

        let (d0, v0, acc0) = self.gather(state);

        // Displacement predictor: d1 = dp + dt² β acc1.
        let dp = &d0 + &v0 * dt + &acc0 * (dt * dt * (0.5 - beta));

        let mut force = DVector::zeros(n + 1);
        force[n] = torque;

        let rhs = force
            - &self.mass * &acc0 * am
            - &self.stiff * (&dp * (1.0 - af) + &d0 * af);
        let acc1 = self.effective.solve(&rhs);

        let v1 = &v0 + (&acc0 * (1.0 - gamma) + &acc1 * gamma) * dt;
        let d1 = dp + &acc1 * (dt * dt * beta);

        Ok(self.scatter(&d1, &v1, &acc1, state.time + dt))
    }

    /// Consistent accelerations for arbitrary initial conditions:
    /// acc = M⁻¹ (F − K d). Useful before starting a run from a state
    /// whose stored accelerations are stale.
    pub fn consistent_accelerations(&self, state: &PlantState, torque: f64) -> Result<PlantState> {
        self.check_dims(state)?;
        let n = self.n_dof;
        let (d, v, _) = self.gather(state);
        let mut force = DVector::zeros(n + 1);
        force[n] = torque;
        let rhs = force - &self.stiff * &d;
        let chol = Cholesky::new(self.mass.clone())
            .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?;
        let acc = chol.solve(&rhs);
        Ok(self.scatter(&d, &v, &acc, state.time))
    }
}

/// Advance one time step (convenience wrapper that builds the stepper).
///
/// Loops should construct a [`GeneralizedAlpha`] once and reuse it: the
/// effective-matrix factorization is constant for a fixed model and step.
pub fn step(
    system: &AssembledSystem,
    state: &PlantState,
    torque: f64,
    cfg: IntegratorConfig,
) -> Result<PlantState> {
    GeneralizedAlpha::new(system, cfg, system.dt)?.step(state, torque)
}

/// Total mechanical energy: ½ v_aug' M_aug v_aug + ½ a' K a with
/// v_aug = (a_t, θ_t).
pub fn total_energy(system: &AssembledSystem, state: &PlantState) -> f64 {
    let n = system.n_dof;
    let mut v = DVector::zeros(n + 1);
    v.rows_mut(0, n).copy_from(&state.a_t);
    v[n] = state.theta_t;
    let kinetic = 0.5 * (&system.mass_aug * &v).dot(&v);
    let ka = system.stiff_aug.view((0, 0), (n, n)) * &state.a;
    let potential = 0.5 * ka.dot(&state.a);
    kinetic + potential
}

/// Ascending natural frequencies (rad/s) of the generalized problem
/// K φ = ω² M φ.
///
/// With `lock_hub` the hub row/column is removed, which yields the clamped
/// cantilever spectrum; otherwise the smallest frequency is the rigid mode
/// at zero.
pub fn modal_frequencies(system: &AssembledSystem, lock_hub: bool) -> Result<Vec<f64>> {
    let n = if lock_hub {
        system.n_dof
    } else {
        system.n_dof + 1
    };
    let mass: DMatrix<f64> = system.mass_aug.view((0, 0), (n, n)).into_owned();
    let stiff: DMatrix<f64> = system.stiff_aug.view((0, 0), (n, n)).into_owned();

    let chol = Cholesky::new(mass)
        .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // G = L⁻¹ K L⁻ᵀ, formed by two triangular solves.
    let x = l
        .solve_lower_triangular(&stiff)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let g = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?
        .transpose();
    let g = (&g + g.transpose()) * 0.5;

    let eig = SymmetricEigen::new(g);
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let mut freqs: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&lam| {
            // Clamp eigensolver noise around zero (rigid mode).
            if lam.abs() < 1e-12 * scale.max(1.0) {
                0.0
            } else {
                lam
            }
        })
        .map(|lam| if lam <= 0.0 { 0.0 } else { lam.sqrt() })
        .collect();
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(freqs)
}

/// Curvature and curvature rate of the beam root, `(y_xx(0), y_xxt(0))`.
///
/// Evaluates the first element's Hermite interpolant at x = 0 with the
/// clamped node-0 convention: y_xx(0) = (6/h²) w₁ − (2/h) φ₁ where
/// (w₁, φ₁) are the node-1 DOFs; the rate applies the same stencil to a_t.
pub fn boundary_curvature(state: &PlantState, model: &BeamModel) -> (f64, f64) {
    let h = model.element_length();
    let c_w = 6.0 / (h * h);
    let c_phi = -2.0 / h;
    let y_xx0 = c_w * state.a[0] + c_phi * state.a[1];
    let y_xxt0 = c_w * state.a_t[0] + c_phi * state.a_t[1];
    (y_xx0, y_xxt0)
}

/// Measured plant output: the tip angle θ + y(L)/L.
pub fn tip_output(state: &PlantState, model: &BeamModel) -> f64 {
    state.theta + tip_deflection(state) / model.length
}

/// Transverse deflection of the beam tip, y(L) (m).
pub fn tip_deflection(state: &PlantState) -> f64 {
    state.a[state.a.len() - 2]
}

/// Ready-to-run plant: assembled system, stepper, and current state.
pub struct SpacecraftPlant {
    pub model: BeamModel,
    pub system: AssembledSystem,
    stepper: GeneralizedAlpha,
    pub state: PlantState,
}

impl SpacecraftPlant {
    pub fn new(model: BeamModel, rho_inf: f64) -> Result<Self> {
        let system = assemble(&model)?;
        let stepper = GeneralizedAlpha::new(&system, IntegratorConfig::new(rho_inf)?, model.dt)?;
        let state = PlantState::rest(&model);
        Ok(Self {
            model,
            system,
            stepper,
            state,
        })
    }

    /// Apply a hub torque for one step and return the measured tip angle.
    pub fn apply_torque(&mut self, torque: f64) -> f64 {
        self.state = self
            .stepper
            .step(&self.state, torque)
            .expect("state dimensions fixed at construction");
        tip_output(&self.state, &self.model)
    }

    /// Total mechanical energy of the current state.
    pub fn energy(&self) -> f64 {
        total_energy(&self.system, &self.state)
    }
}
