//! Optimal lockdown control by Pontryagin's maximum principle.
//!
//! The running reward is `c1 P - exp(c2 u)` and the Hamiltonian is taken over
//! the explicit `(P, S_j, E_j, I_j, R_j)` system. Maximising it in `u` gives
//!
//! ```text
//! u* = max(0, ln(sum_j S_j I_j beta_j (phi_S_j - phi_E_j) / c2) / c2)
//! ```
//!
//! projected onto `[0, 1]`. [`fbsm_solve`] finds a schedule consistent with
//! that law by alternating forward state and backward co-state sweeps.

use crate::error::{Error, Result};
use crate::integrator::{simulate, ControlSchedule, SeedEvent, TimeGrid, Trajectory};
use crate::model::{active_mask, full, full_system_rhs, ControlValue, EpidemicState, StrainParams};

/// Weights of the running reward `c1 P - exp(c2 u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    pub c1: f64,
    pub c2: f64,
}

impl CostParams {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        for (name, v) in [("c1", c1), ("c2", c2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be finite and > 0",
                });
            }
        }
        Ok(Self { c1, c2 })
    }
}

/// Co-states of one strain's `S, E, I, R`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StrainCostate {
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostateState {
    pub t: f64,
    pub phi_p: f64,
    pub strains: Vec<StrainCostate>,
}

impl CostateState {
    /// All co-states zero: the transversality condition at the horizon.
    pub fn terminal(t: f64, n_strains: usize) -> Self {
        Self {
            t,
            phi_p: 0.0,
            strains: vec![StrainCostate::default(); n_strains],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.phi_p.is_finite()
            && self
                .strains
                .iter()
                .all(|c| c.s.is_finite() && c.e.is_finite() && c.i.is_finite() && c.r.is_finite())
    }

    /// Flattened in the layout of [`crate::model::full`].
    pub fn to_full_coordinates(&self) -> Vec<f64> {
        let mut v = vec![0.0; full::dim(self.strains.len())];
        v[full::P] = self.phi_p;
        for (j, c) in self.strains.iter().enumerate() {
            v[full::s(j)] = c.s;
            v[full::e(j)] = c.e;
            v[full::i(j)] = c.i;
            v[full::r(j)] = c.r;
        }
        v
    }
}

/// Time derivative of a [`CostateState`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostateDerivative {
    pub phi_p: f64,
    pub strains: Vec<StrainCostate>,
}

impl CostateDerivative {
    pub fn to_full_coordinates(&self) -> Vec<f64> {
        CostateState {
            t: 0.0,
            phi_p: self.phi_p,
            strains: self.strains.clone(),
        }
        .to_full_coordinates()
    }
}

pub fn running_cost(population: f64, u: ControlValue, costs: &CostParams) -> f64 {
    costs.c1 * population - (costs.c2 * u.value()).exp()
}

/// Trapezoid integral of the running reward along a trajectory.
pub fn objective(traj: &Trajectory, costs: &CostParams) -> Result<f64> {
    if traj.controls.len() != traj.states.len() || traj.states.len() != traj.grid.len() {
        return Err(Error::Config(format!(
            "trajectory has {} states and {} controls on a grid of {} points",
            traj.states.len(),
            traj.controls.len(),
            traj.grid.len()
        )));
    }
    let rate =
        |k: usize| costs.c1 * traj.states[k].population - (costs.c2 * traj.controls[k]).exp();
    let n = traj.grid.steps();
    if n == 0 {
        return Ok(0.0);
    }
    let interior: f64 = (1..n).map(rate).sum();
    Ok(traj.grid.dt() * (interior + 0.5 * (rate(0) + rate(n))))
}

/// Hamiltonian of the explicit system at the point `x` (see
/// [`crate::model::full`]) with co-states `phi` in the same layout.
pub fn hamiltonian(
    x: &[f64],
    phi: &[f64],
    u: f64,
    params: &[StrainParams],
    costs: &CostParams,
) -> f64 {
    let dx = full_system_rhs(x, params, u);
    let reward = costs.c1 * x[full::P] - (costs.c2 * u).exp();
    reward + phi.iter().zip(&dx).map(|(p, d)| p * d).sum::<f64>()
}

/// `sum_j S_j I_j beta_j (phi_S_j - phi_E_j)` over active strains.
pub fn switching_sum(
    state: &EpidemicState,
    costate: &CostateState,
    params: &[StrainParams],
    active: &[bool],
) -> f64 {
    params
        .iter()
        .enumerate()
        .filter(|&(j, _)| active[j])
        .map(|(j, p)| {
            let c = &costate.strains[j];
            state.susceptible_raw(j) * state.strains[j].infected * p.beta * (c.s - c.e)
        })
        .sum()
}

fn control_law(switching: f64, costs: &CostParams) -> ControlValue {
    let arg = switching / costs.c2;
    if !(arg > 1.0) {
        return ControlValue::NONE;
    }
    ControlValue::clamped(arg.ln() / costs.c2)
}

/// Pointwise maximiser of the Hamiltonian in `u`, projected onto `[0, 1]`.
pub fn optimal_u(
    state: &EpidemicState,
    costate: &CostateState,
    params: &[StrainParams],
    costs: &CostParams,
) -> ControlValue {
    let active = active_mask(params, state.t);
    control_law(switching_sum(state, costate, params, &active), costs)
}

pub(crate) fn costate_derivatives_masked(
    state: &EpidemicState,
    costate: &CostateState,
    u: f64,
    params: &[StrainParams],
    costs: &CostParams,
    active: &[bool],
) -> CostateDerivative {
    let open = 1.0 - u;
    let total_phi_s: f64 = costate
        .strains
        .iter()
        .zip(active)
        .filter(|(_, &on)| on)
        .map(|(c, _)| c.s)
        .sum();
    let strains = params
        .iter()
        .enumerate()
        .map(|(j, p)| {
            if !active[j] {
                return StrainCostate::default();
            }
            let c = &costate.strains[j];
            let x = &state.strains[j];
            let s = state.susceptible_raw(j);
            let gap = c.s - c.e;
            StrainCostate {
                s: gap * open * p.beta * x.infected,
                e: p.sigma * (c.e - c.i),
                i: gap * open * p.beta * s + c.i * p.removal_rate() - c.r * p.gamma
                    + costate.phi_p * p.mu
                    + p.mu * (total_phi_s - c.s),
                r: p.delta * (c.r - c.s),
            }
        })
        .collect();
    CostateDerivative {
        phi_p: -costs.c1,
        strains,
    }
}

/// Adjoint system `d phi / dt = -dH/dx`, with `S_j` taken algebraically
/// from `state`.
pub fn costate_derivatives(
    state: &EpidemicState,
    costate: &CostateState,
    u: ControlValue,
    params: &[StrainParams],
    costs: &CostParams,
) -> Result<CostateDerivative> {
    if state.n_strains() != params.len() || costate.strains.len() != params.len() {
        return Err(Error::StrainCountMismatch {
            expected: params.len(),
            actual: state.n_strains().min(costate.strains.len()),
        });
    }
    state.validate()?;
    if !costate.is_finite() {
        return Err(Error::Solver {
            iteration: 0,
            reason: "non-finite co-state".into(),
        });
    }
    let active = active_mask(params, state.t);
    Ok(costate_derivatives_masked(
        state,
        costate,
        u.value(),
        params,
        costs,
        &active,
    ))
}

fn costate_axpy(c: &CostateState, d: &CostateDerivative, h: f64, t: f64) -> CostateState {
    CostateState {
        t,
        phi_p: c.phi_p + h * d.phi_p,
        strains: c
            .strains
            .iter()
            .zip(&d.strains)
            .map(|(a, b)| StrainCostate {
                s: a.s + h * b.s,
                e: a.e + h * b.e,
                i: a.i + h * b.i,
                r: a.r + h * b.r,
            })
            .collect(),
    }
}

fn midpoint_state(a: &EpidemicState, b: &EpidemicState) -> EpidemicState {
    EpidemicState {
        t: 0.5 * (a.t + b.t),
        population: 0.5 * (a.population + b.population),
        strains: a
            .strains
            .iter()
            .zip(&b.strains)
            .map(|(x, y)| crate::model::Compartments {
                exposed: 0.5 * (x.exposed + y.exposed),
                infected: 0.5 * (x.infected + y.infected),
                removed: 0.5 * (x.removed + y.removed),
            })
            .collect(),
    }
}

/// State at grid point `k` just before any seed applied there.
fn pre_seed_state(traj: &Trajectory, events: &[SeedEvent], k: usize) -> EpidemicState {
    let mut s = traj.states[k].clone();
    for ev in events
        .iter()
        .filter(|e| traj.grid.index_of(e.time) == Some(k))
    {
        let c = &mut s.strains[ev.strain];
        c.exposed -= ev.seed.exposed;
        c.infected -= ev.seed.infected;
        c.removed -= ev.seed.removed;
    }
    s
}

/// Integrates the adjoint system backward from the zero terminal condition,
/// with RK4 reversed in time on the forward grid. States at the half steps
/// are linear interpolants of the recorded trajectory.
pub fn backward_sweep(
    traj: &Trajectory,
    params: &[StrainParams],
    events: &[SeedEvent],
    costs: &CostParams,
) -> Result<Vec<CostateState>> {
    let grid = &traj.grid;
    let n = grid.steps();
    let dt = grid.dt();
    let mut out = vec![CostateState::terminal(grid.horizon(), params.len()); n + 1];
    for k in (1..=n).rev() {
        let right = pre_seed_state(traj, events, k);
        let left = &traj.states[k - 1];
        let mid = midpoint_state(left, &right);
        let active = active_mask(params, grid.time(k - 1));
        let (u_right, u_left) = (traj.controls[k], traj.controls[k - 1]);
        let u_mid = 0.5 * (u_left + u_right);
        let c = &out[k];
        let t = grid.time(k);
        let h = -dt;
        let k1 = costate_derivatives_masked(&right, c, u_right, params, costs, &active);
        let c2 = costate_axpy(c, &k1, 0.5 * h, t + 0.5 * h);
        let k2 = costate_derivatives_masked(&mid, &c2, u_mid, params, costs, &active);
        let c3 = costate_axpy(c, &k2, 0.5 * h, t + 0.5 * h);
        let k3 = costate_derivatives_masked(&mid, &c3, u_mid, params, costs, &active);
        let c4 = costate_axpy(c, &k3, h, t + h);
        let k4 = costate_derivatives_masked(left, &c4, u_left, params, costs, &active);
        let w = h / 6.0;
        let step = |a: f64, b: f64, cc: f64, d: f64, x: f64| x + w * (a + 2.0 * b + 2.0 * cc + d);
        let next = CostateState {
            t: grid.time(k - 1),
            phi_p: step(k1.phi_p, k2.phi_p, k3.phi_p, k4.phi_p, c.phi_p),
            strains: (0..params.len())
                .map(|j| {
                    let (a, b, cc, d, x) = (
                        &k1.strains[j],
                        &k2.strains[j],
                        &k3.strains[j],
                        &k4.strains[j],
                        &c.strains[j],
                    );
                    StrainCostate {
                        s: step(a.s, b.s, cc.s, d.s, x.s),
                        e: step(a.e, b.e, cc.e, d.e, x.e),
                        i: step(a.i, b.i, cc.i, d.i, x.i),
                        r: step(a.r, b.r, cc.r, d.r, x.r),
                    }
                })
                .collect(),
        };
        if !next.is_finite() {
            return Err(Error::Solver {
                iteration: 0,
                reason: format!("non-finite co-state at t = {}", next.t),
            });
        }
        out[k - 1] = next;
    }
    Ok(out)
}

/// Control law evaluated at every grid point of a trajectory.
pub fn control_update(
    traj: &Trajectory,
    costates: &[CostateState],
    params: &[StrainParams],
    costs: &CostParams,
) -> Vec<f64> {
    traj.states
        .iter()
        .zip(costates)
        .enumerate()
        .map(|(k, (x, c))| {
            let active = active_mask(params, traj.grid.time(k));
            control_law(switching_sum(x, c, params, &active), costs).value()
        })
        .collect()
}

/// Sweep settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbsmConfig {
    /// Weight of the new control in `u <- a u_new + (1 - a) u_old`.
    pub relaxation: f64,
    /// Stop when the sup-norm gap between the control law and the current
    /// schedule drops below this. The relaxed update is then smaller still.
    pub tol: f64,
    pub max_iter: usize,
    /// Halve the relaxation whenever the update grows, down to this floor.
    /// Equal to `relaxation` for a fixed weight.
    pub min_relaxation: f64,
}

impl Default for FbsmConfig {
    fn default() -> Self {
        Self {
            relaxation: 0.5,
            tol: 1e-6,
            max_iter: 500,
            min_relaxation: 0.5 / 64.0,
        }
    }
}

impl FbsmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "relaxation",
                value: self.relaxation,
                reason: "must lie in (0, 1]",
            });
        }
        if !(self.min_relaxation > 0.0 && self.min_relaxation <= self.relaxation) {
            return Err(Error::InvalidParameter {
                name: "min_relaxation",
                value: self.min_relaxation,
                reason: "must lie in (0, relaxation]",
            });
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tol",
                value: self.tol,
                reason: "must be > 0",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FbsmReport {
    pub converged: bool,
    pub iterations: usize,
    /// Objective of the final schedule.
    pub objective: f64,
    /// Sup-norm of the last (relaxed) control update.
    pub last_update: f64,
    /// Sup-norm distance between the control law and the schedule it was
    /// evaluated on, at the last iteration. Convergence is declared when
    /// this drops below the tolerance.
    pub residual: f64,
    /// Relaxation weight in use at the end.
    pub relaxation: f64,
    pub schedule: ControlSchedule,
    /// Forward trajectory under the final schedule.
    pub trajectory: Trajectory,
    /// Co-states along the final trajectory.
    pub costates: Vec<CostateState>,
    /// Residual per iteration.
    pub history: Vec<f64>,
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Forward-backward sweep.
///
/// Each iteration simulates the states under the current schedule,
/// integrates the co-states backward from zero, evaluates the control law
/// pointwise and blends it into the schedule. Running out of iterations is
/// reported through `converged = false`, not as an error.
#[allow(clippy::too_many_arguments)]
pub fn fbsm_solve(
    initial: &EpidemicState,
    params: &[StrainParams],
    events: &[SeedEvent],
    grid: &TimeGrid,
    costs: &CostParams,
    u_init: &ControlSchedule,
    config: &FbsmConfig,
) -> Result<FbsmReport> {
    config.validate()?;
    let mut schedule = u_init.clone();
    let mut relaxation = config.relaxation;
    let mut history = Vec::new();
    let mut converged = false;
    let mut last_update = f64::INFINITY;
    let mut prev_residual = f64::INFINITY;
    let mut last_residual = f64::INFINITY;

    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let traj = simulate(initial, params, &schedule, events, grid)
            .map_err(|e| solver_err(e, iterations))?;
        let costates =
            backward_sweep(&traj, params, events, costs).map_err(|e| solver_err(e, iterations))?;
        let proposal = control_update(&traj, &costates, params, costs);
        let residual = sup_diff(&proposal, schedule.values());
        if residual > prev_residual && relaxation > config.min_relaxation {
            relaxation = (0.5 * relaxation).max(config.min_relaxation);
        }
        prev_residual = residual;
        let blended: Vec<f64> = proposal
            .iter()
            .zip(schedule.values())
            .map(|(new, old)| (relaxation * new + (1.0 - relaxation) * old).clamp(0.0, 1.0))
            .collect();
        last_update = sup_diff(&blended, schedule.values());
        last_residual = residual;
        history.push(residual);
        if blended.iter().any(|u| u.is_nan()) {
            return Err(Error::Solver {
                iteration: iterations,
                reason: "NaN in control update".into(),
            });
        }
        schedule = ControlSchedule::new(*grid, blended)?;
        if residual < config.tol {
            converged = true;
            break;
        }
    }

    let trajectory = simulate(initial, params, &schedule, events, grid)?;
    let costates = backward_sweep(&trajectory, params, events, costs)?;
    let objective = objective(&trajectory, costs)?;
    Ok(FbsmReport {
        converged,
        iterations,
        objective,
        last_update,
        residual: last_residual,
        relaxation,
        schedule,
        trajectory,
        costates,
        history,
    })
}

fn solver_err(e: Error, iteration: usize) -> Error {
    match e {
        Error::Integration { reason, t, .. } => Error::Solver {
            iteration,
            reason: format!("state blow-up at t = {t}: {reason}"),
        },
        Error::Solver { reason, .. } => Error::Solver { iteration, reason },
        other => other,
    }
}
