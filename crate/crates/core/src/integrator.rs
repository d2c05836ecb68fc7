//! Fixed-step RK4 integration with timed seeding of new strains.

use crate::error::{Error, Result};
use crate::model::{
    active_mask, derivatives_masked, Compartments, ControlValue, EpidemicState, StateDerivative,
    StrainParams,
};

/// Relative slack when deciding whether a time sits on the grid.
const GRID_SLACK: f64 = 1e-6;

/// Uniform grid `t0, t0 + dt, ..., t0 + steps * dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    /// The horizon is rounded to the nearest whole number of steps.
    pub fn new(t0: f64, horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be > 0, got {dt}")));
        }
        if !(horizon >= t0 && horizon.is_finite() && t0.is_finite()) {
            return Err(Error::Config(format!(
                "horizon {horizon} must not precede start {t0}"
            )));
        }
        let steps = ((horizon - t0) / dt).round() as usize;
        Ok(Self { t0, dt, steps })
    }

    pub fn with_steps(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        Self::new(t0, t0, dt).map(|g| Self { steps, ..g })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Grid index of `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if (x - k).abs() <= GRID_SLACK && k >= 0.0 && (k as usize) <= self.steps {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Whether `t - t0` is an integer multiple of `dt`, ignoring the horizon.
    pub fn divides(&self, t: f64) -> bool {
        let x = (t - self.t0) / self.dt;
        (x - x.round()).abs() <= GRID_SLACK
    }
}

/// Piecewise-linear control `u(t)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl ControlSchedule {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "schedule has {} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(&bad) = values.iter().find(|u| !(0.0..=1.0).contains(*u)) {
            return Err(Error::ControlOutOfRange(bad));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, u: ControlValue) -> Self {
        Self {
            grid,
            values: vec![u.value(); grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Linear interpolation at the middle of step `k -> k + 1`.
    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.values[k] + self.values[k + 1])
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Seeds added to one strain's compartments at a grid time. The seeds are
/// taken out of that strain's susceptible pool, so `P` is unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedEvent {
    pub time: f64,
    pub strain: usize,
    pub seed: Compartments,
}

impl SeedEvent {
    pub fn new(time: f64, strain: usize, exposed: f64, infected: f64, removed: f64) -> Self {
        Self {
            time,
            strain,
            seed: Compartments::new(exposed, infected, removed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<EpidemicState>,
    pub controls: Vec<f64>,
}

impl Trajectory {
    pub fn n_strains(&self) -> usize {
        self.states[0].n_strains()
    }

    pub fn initial_population(&self) -> f64 {
        self.states[0].population
    }

    pub fn final_state(&self) -> &EpidemicState {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn infected(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.strains[j].infected).collect()
    }

    /// `P(0) - P(T)`.
    pub fn deaths(&self) -> f64 {
        self.initial_population() - self.final_state().population
    }
}

fn axpy(state: &EpidemicState, d: &StateDerivative, h: f64, t: f64) -> EpidemicState {
    EpidemicState {
        t,
        population: state.population + h * d.population,
        strains: state
            .strains
            .iter()
            .zip(&d.strains)
            .map(|(c, dc)| Compartments {
                exposed: c.exposed + h * dc.exposed,
                infected: c.infected + h * dc.infected,
                removed: c.removed + h * dc.removed,
            })
            .collect(),
    }
}

/// Classical RK4 without validation or clamping. The activity mask is taken
/// at the start of the step and held over all four stages.
pub(crate) fn rk4_raw(
    state: &EpidemicState,
    params: &[StrainParams],
    controls: [f64; 3],
    dt: f64,
) -> EpidemicState {
    let [u_now, u_mid, u_next] = controls;
    let active = active_mask(params, state.t);
    let half = 0.5 * dt;
    let k1 = derivatives_masked(state, params, u_now, &active);
    let x2 = axpy(state, &k1, half, state.t + half);
    let k2 = derivatives_masked(&x2, params, u_mid, &active);
    let x3 = axpy(state, &k2, half, state.t + half);
    let k3 = derivatives_masked(&x3, params, u_mid, &active);
    let x4 = axpy(state, &k3, dt, state.t + dt);
    let k4 = derivatives_masked(&x4, params, u_next, &active);
    let w = dt / 6.0;
    let combine = |a: f64, b: f64, c: f64, d: f64, x: f64| x + w * (a + 2.0 * b + 2.0 * c + d);
    EpidemicState {
        t: state.t + dt,
        population: combine(
            k1.population,
            k2.population,
            k3.population,
            k4.population,
            state.population,
        ),
        strains: (0..state.n_strains())
            .map(|j| {
                let c = &state.strains[j];
                let (a, b, cc, d) = (
                    &k1.strains[j],
                    &k2.strains[j],
                    &k3.strains[j],
                    &k4.strains[j],
                );
                Compartments {
                    exposed: combine(a.exposed, b.exposed, cc.exposed, d.exposed, c.exposed),
                    infected: combine(a.infected, b.infected, cc.infected, d.infected, c.infected),
                    removed: combine(a.removed, b.removed, cc.removed, d.removed, c.removed),
                }
            })
            .collect(),
    }
}

/// One RK4 step using `u_now` at the first stage, `u_mid` at the two middle
/// stages and `u_next` at the last.
pub fn rk4_step(
    state: &EpidemicState,
    params: &[StrainParams],
    u_now: ControlValue,
    u_mid: ControlValue,
    u_next: ControlValue,
    dt: f64,
) -> Result<EpidemicState> {
    if state.n_strains() != params.len() {
        return Err(Error::StrainCountMismatch {
            expected: params.len(),
            actual: state.n_strains(),
        });
    }
    state.validate()?;
    let next = rk4_raw(
        state,
        params,
        [u_now.value(), u_mid.value(), u_next.value()],
        dt,
    );
    finish_step(next, state.population, 0)
}

fn finish_step(mut next: EpidemicState, reference: f64, step: usize) -> Result<EpidemicState> {
    if !next.is_finite() {
        return Err(Error::Integration {
            step,
            t: next.t,
            reason: "non-finite state".into(),
        });
    }
    next.clamp_small_negatives(reference)
        .map_err(|e| Error::Integration {
            step,
            t: next.t,
            reason: e.to_string(),
        })?;
    Ok(next)
}

fn apply_seeds(
    state: &mut EpidemicState,
    events: &[SeedEvent],
    grid: &TimeGrid,
    k: usize,
) -> Result<()> {
    for ev in events.iter().filter(|e| grid.index_of(e.time) == Some(k)) {
        let s = state.susceptible_raw(ev.strain);
        let c = &ev.seed;
        if c.exposed < 0.0 || c.infected < 0.0 || c.removed < 0.0 {
            return Err(Error::Config(format!(
                "negative seed for strain {} at t = {}",
                ev.strain, ev.time
            )));
        }
        if c.total() > s {
            return Err(Error::Config(format!(
                "seed of {} exceeds the {} susceptibles of strain {} at t = {}",
                c.total(),
                s,
                ev.strain,
                ev.time
            )));
        }
        let target = &mut state.strains[ev.strain];
        target.exposed += c.exposed;
        target.infected += c.infected;
        target.removed += c.removed;
    }
    Ok(())
}

fn check_events(events: &[SeedEvent], grid: &TimeGrid, n_strains: usize) -> Result<()> {
    for ev in events {
        if ev.strain >= n_strains {
            return Err(Error::StrainIndex(ev.strain));
        }
        if grid.index_of(ev.time).is_none() {
            return Err(Error::Config(format!(
                "seed event at t = {} is not on the grid (t0 = {}, dt = {}, T = {})",
                ev.time,
                grid.t0(),
                grid.dt(),
                grid.horizon()
            )));
        }
    }
    if events.windows(2).any(|w| w[0].time > w[1].time) {
        return Err(Error::Config("seed events must be sorted by time".into()));
    }
    Ok(())
}

/// Integrates from `initial` over `grid`, applying seed events at their grid
/// times. The returned trajectory has one state per grid point.
pub fn simulate(
    initial: &EpidemicState,
    params: &[StrainParams],
    schedule: &ControlSchedule,
    events: &[SeedEvent],
    grid: &TimeGrid,
) -> Result<Trajectory> {
    if params.is_empty() {
        return Err(Error::NoStrains);
    }
    if initial.n_strains() != params.len() {
        return Err(Error::StrainCountMismatch {
            expected: params.len(),
            actual: initial.n_strains(),
        });
    }
    if schedule.grid() != grid {
        return Err(Error::Config(
            "control schedule is defined on a different grid".into(),
        ));
    }
    if (initial.t - grid.t0()).abs() > GRID_SLACK * grid.dt() {
        return Err(Error::Config(format!(
            "initial state at t = {} but grid starts at {}",
            initial.t,
            grid.t0()
        )));
    }
    check_events(events, grid, params.len())?;
    initial.validate()?;

    let reference = initial.population;
    let mut state = initial.clone();
    state.t = grid.t0();
    apply_seeds(&mut state, events, grid, 0)?;
    let mut states = Vec::with_capacity(grid.len());
    states.push(state);
    for k in 0..grid.steps() {
        let current = &states[k];
        let mut next = rk4_raw(
            current,
            params,
            [schedule.at(k), schedule.midpoint(k), schedule.at(k + 1)],
            grid.dt(),
        );
        next.t = grid.time(k + 1);
        let mut next = finish_step(next, reference, k + 1)?;
        apply_seeds(&mut next, events, grid, k + 1)?;
        states.push(next);
    }
    Ok(Trajectory {
        grid: *grid,
        states,
        controls: schedule.values().to_vec(),
    })
}
