//! Multi-strain SEIR dynamics with reinfection.
//!
//! The state stores the total population `P` and, per strain, the exposed,
//! infected and removed counts. The susceptible pool of strain `j` is always
//! the algebraic value `S_j = P - E_j - I_j - R_j`; strains share nothing
//! except deaths (through `P`) and the common mitigation control `u`.
//!
//! A strain is excluded from every sum until its activation time. Before
//! that its compartments are held at zero.

use nalgebra::Complex;

use crate::error::{Error, Result};

/// Slack on activation comparisons: grid times are computed as `t0 + k * dt`.
pub const ACTIVATION_SLACK: f64 = 1e-7;

/// Negative values down to `-NEGATIVE_TOLERANCE * P` are treated as zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Per-strain rates. `beta` is per person per day; the others are per day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainParams {
    pub beta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub delta: f64,
    pub mu: f64,
    pub activation_time: f64,
}

impl StrainParams {
    pub fn new(beta: f64, sigma: f64, gamma: f64, delta: f64, mu: f64) -> Result<Self> {
        let p = Self {
            beta,
            sigma,
            gamma,
            delta,
            mu,
            activation_time: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn activated_at(mut self, t: f64) -> Result<Self> {
        self.activation_time = t;
        self.validate()?;
        Ok(self)
    }

    /// Positivity of all rates except `mu`, which may be zero.
    pub fn validate(&self) -> Result<()> {
        positive("beta", self.beta)?;
        positive("sigma", self.sigma)?;
        positive("gamma", self.gamma)?;
        positive("delta", self.delta)?;
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "mu",
                value: self.mu,
                reason: "must be finite and >= 0",
            });
        }
        if !(self.activation_time >= 0.0 && self.activation_time.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "activation_time",
                value: self.activation_time,
                reason: "must be finite and >= 0",
            });
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate) but also requires `mu > 0`, as the
    /// equilibrium results divide by the death rates.
    pub fn validate_strict(&self) -> Result<()> {
        self.validate()?;
        positive("mu", self.mu)
    }

    /// Total outflow rate from the infected compartment, `mu + gamma`.
    pub fn removal_rate(&self) -> f64 {
        self.mu + self.gamma
    }

    pub fn is_active(&self, t: f64) -> bool {
        t + ACTIVATION_SLACK >= self.activation_time
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

/// Activity flag per strain at time `t`.
pub fn active_mask(params: &[StrainParams], t: f64) -> Vec<bool> {
    params.iter().map(|p| p.is_active(t)).collect()
}

/// Mitigation effect in `[0, 1]`; 0 is no intervention, 1 a fully
/// effective lockdown.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct ControlValue(f64);

impl ControlValue {
    pub const NONE: ControlValue = ControlValue(0.0);
    pub const FULL: ControlValue = ControlValue(1.0);

    pub fn new(u: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&u) {
            Ok(Self(u))
        } else {
            Err(Error::ControlOutOfRange(u))
        }
    }

    /// Projects onto `[0, 1]`. NaN maps to 0.
    pub fn clamped(u: f64) -> Self {
        if u.is_nan() {
            Self(0.0)
        } else {
            Self(u.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Exposed, infected and removed counts of one strain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Compartments {
    pub exposed: f64,
    pub infected: f64,
    pub removed: f64,
}

impl Compartments {
    pub fn new(exposed: f64, infected: f64, removed: f64) -> Self {
        Self {
            exposed,
            infected,
            removed,
        }
    }

    pub fn total(&self) -> f64 {
        self.exposed + self.infected + self.removed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicState {
    pub t: f64,
    pub population: f64,
    pub strains: Vec<Compartments>,
}

impl EpidemicState {
    pub fn new(t: f64, population: f64, strains: Vec<Compartments>) -> Self {
        Self {
            t,
            population,
            strains,
        }
    }

    /// A state with the given population and no infection in any strain.
    pub fn infection_free(t: f64, population: f64, n_strains: usize) -> Self {
        Self::new(t, population, vec![Compartments::default(); n_strains])
    }

    pub fn n_strains(&self) -> usize {
        self.strains.len()
    }

    /// Algebraic susceptible pool of strain `j`, without any checks.
    #[inline]
    pub fn susceptible_raw(&self, j: usize) -> f64 {
        self.population - self.strains[j].total()
    }

    /// Checks non-negativity of every compartment and every susceptible pool.
    pub fn validate(&self) -> Result<()> {
        let tol = NEGATIVE_TOLERANCE * self.population.abs();
        if !(self.population >= 0.0) {
            return Err(Error::NegativeCompartment {
                compartment: "P",
                strain: None,
                value: self.population,
            });
        }
        for (j, c) in self.strains.iter().enumerate() {
            for (name, v) in [("E", c.exposed), ("I", c.infected), ("R", c.removed)] {
                if !(v >= -tol) {
                    return Err(Error::NegativeCompartment {
                        compartment: name,
                        strain: Some(j),
                        value: v,
                    });
                }
            }
            let s = self.susceptible_raw(j);
            if !(s >= -tol) {
                return Err(Error::InconsistentState {
                    strain: j,
                    value: s,
                });
            }
        }
        Ok(())
    }

    /// Zeroes compartments inside the negative tolerance band; fails below it.
    pub fn clamp_small_negatives(&mut self, reference_population: f64) -> Result<()> {
        let tol = NEGATIVE_TOLERANCE * reference_population.abs();
        let clamp = |name: &'static str, strain: Option<usize>, v: &mut f64| -> Result<()> {
            if *v < 0.0 {
                if *v >= -tol {
                    *v = 0.0;
                } else {
                    return Err(Error::NegativeCompartment {
                        compartment: name,
                        strain,
                        value: *v,
                    });
                }
            }
            Ok(())
        };
        clamp("P", None, &mut self.population)?;
        for (j, c) in self.strains.iter_mut().enumerate() {
            clamp("E", Some(j), &mut c.exposed)?;
            clamp("I", Some(j), &mut c.infected)?;
            clamp("R", Some(j), &mut c.removed)?;
        }
        for j in 0..self.strains.len() {
            let s = self.susceptible_raw(j);
            if s < -tol {
                return Err(Error::InconsistentState {
                    strain: j,
                    value: s,
                });
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.population.is_finite()
            && self
                .strains
                .iter()
                .all(|c| c.exposed.is_finite() && c.infected.is_finite() && c.removed.is_finite())
    }
}

/// Time derivative of an [`EpidemicState`], same shape minus the clock.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateDerivative {
    pub population: f64,
    pub strains: Vec<Compartments>,
}

/// `S_j = P - E_j - I_j - R_j`, with small negative round-off reported as 0.
pub fn susceptible(state: &EpidemicState, j: usize) -> Result<f64> {
    if j >= state.n_strains() {
        return Err(Error::StrainIndex(j));
    }
    let s = state.susceptible_raw(j);
    let tol = NEGATIVE_TOLERANCE * state.population.abs();
    if s < -tol || s.is_nan() {
        Err(Error::InconsistentState {
            strain: j,
            value: s,
        })
    } else {
        Ok(s.max(0.0))
    }
}

fn check_shape(state: &EpidemicState, params: &[StrainParams]) -> Result<()> {
    if params.is_empty() {
        return Err(Error::NoStrains);
    }
    if state.n_strains() != params.len() {
        return Err(Error::StrainCountMismatch {
            expected: params.len(),
            actual: state.n_strains(),
        });
    }
    Ok(())
}

/// Right-hand side of the system with activity flags supplied by the caller
/// and no input validation. Used inside integrator stages, where transient
/// round-off below zero is expected.
pub fn derivatives_masked(
    state: &EpidemicState,
    params: &[StrainParams],
    u: f64,
    active: &[bool],
) -> StateDerivative {
    let mut deaths = 0.0;
    let strains = state
        .strains
        .iter()
        .zip(params)
        .zip(active)
        .enumerate()
        .map(|(j, ((c, p), &on))| {
            if !on {
                return Compartments::default();
            }
            deaths += p.mu * c.infected;
            let s = state.susceptible_raw(j);
            let infections = (1.0 - u) * p.beta * s * c.infected;
            Compartments {
                exposed: infections - p.sigma * c.exposed,
                infected: p.sigma * c.exposed - p.removal_rate() * c.infected,
                removed: p.gamma * c.infected - p.delta * c.removed,
            }
        })
        .collect();
    StateDerivative {
        population: -deaths,
        strains,
    }
}

/// Time derivative of `(P, E_j, I_j, R_j)` under control `u`.
pub fn derivatives(
    state: &EpidemicState,
    params: &[StrainParams],
    u: ControlValue,
) -> Result<StateDerivative> {
    check_shape(state, params)?;
    state.validate()?;
    let active = active_mask(params, state.t);
    Ok(derivatives_masked(state, params, u.value(), &active))
}

/// Differential form of `dS_j/dt`:
/// `-(1-u) beta_j S_j I_j + delta_j R_j - sum_{i != j} mu_i I_i`.
///
/// It must agree with `d/dt (P - E_j - I_j - R_j)` taken from [`derivatives`].
pub fn susceptible_derivative(
    state: &EpidemicState,
    params: &[StrainParams],
    u: ControlValue,
    j: usize,
) -> Result<f64> {
    check_shape(state, params)?;
    state.validate()?;
    if j >= params.len() {
        return Err(Error::StrainIndex(j));
    }
    let active = active_mask(params, state.t);
    let other_deaths: f64 = params
        .iter()
        .zip(&state.strains)
        .zip(&active)
        .enumerate()
        .filter(|&(i, (_, &on))| i != j && on)
        .map(|(_, ((p, c), _))| p.mu * c.infected)
        .sum();
    if !active[j] {
        return Ok(-other_deaths);
    }
    let p = &params[j];
    let c = &state.strains[j];
    let s = state.susceptible_raw(j);
    Ok(-(1.0 - u.value()) * p.beta * s * c.infected + p.delta * c.removed - other_deaths)
}

/// Index layout of the explicit `(4n + 1)`-dimensional system in which the
/// susceptible pools are independent coordinates:
/// `[P, S_1, E_1, I_1, R_1, S_2, E_2, I_2, R_2, ...]`.
pub mod full {
    pub const P: usize = 0;

    pub fn dim(n_strains: usize) -> usize {
        4 * n_strains + 1
    }
    pub fn s(j: usize) -> usize {
        1 + 4 * j
    }
    pub fn e(j: usize) -> usize {
        2 + 4 * j
    }
    pub fn i(j: usize) -> usize {
        3 + 4 * j
    }
    pub fn r(j: usize) -> usize {
        4 + 4 * j
    }
}

/// Embeds a state into the explicit coordinates, using the algebraic `S_j`.
pub fn to_full_coordinates(state: &EpidemicState) -> Vec<f64> {
    let mut x = vec![0.0; full::dim(state.n_strains())];
    x[full::P] = state.population;
    for (j, c) in state.strains.iter().enumerate() {
        x[full::s(j)] = state.susceptible_raw(j);
        x[full::e(j)] = c.exposed;
        x[full::i(j)] = c.infected;
        x[full::r(j)] = c.removed;
    }
    x
}

/// Right-hand side of the explicit system, every strain active.
///
/// Here `S_j` is read from `x` rather than derived from `P`.
pub fn full_system_rhs(x: &[f64], params: &[StrainParams], u: f64) -> Vec<f64> {
    let n = params.len();
    debug_assert_eq!(x.len(), full::dim(n));
    let deaths: Vec<f64> = params
        .iter()
        .enumerate()
        .map(|(j, p)| p.mu * x[full::i(j)])
        .collect();
    let total_deaths: f64 = deaths.iter().sum();
    let mut dx = vec![0.0; x.len()];
    dx[full::P] = -total_deaths;
    for (j, p) in params.iter().enumerate() {
        let (s, e, i, r) = (x[full::s(j)], x[full::e(j)], x[full::i(j)], x[full::r(j)]);
        let infections = (1.0 - u) * p.beta * s * i;
        dx[full::s(j)] = -infections + p.delta * r - (total_deaths - deaths[j]);
        dx[full::e(j)] = infections - p.sigma * e;
        dx[full::i(j)] = p.sigma * e - p.removal_rate() * i;
        dx[full::r(j)] = p.gamma * i - p.delta * r;
    }
    dx
}

/// `R0 = max_j (1-u) beta_j S_j / (mu_j + gamma_j)` with its per-strain terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproductionNumber {
    pub value: f64,
    pub per_strain: Vec<f64>,
    /// Strain attaining the maximum (first one on ties).
    pub dominant: usize,
}

pub fn reproduction_number(
    params: &[StrainParams],
    s_bar: &[f64],
    u: ControlValue,
) -> Result<ReproductionNumber> {
    if params.is_empty() {
        return Err(Error::NoStrains);
    }
    if s_bar.len() != params.len() {
        return Err(Error::StrainCountMismatch {
            expected: params.len(),
            actual: s_bar.len(),
        });
    }
    if let Some(&s) = s_bar.iter().find(|&&s| !(s >= 0.0)) {
        return Err(Error::NegativeCompartment {
            compartment: "S",
            strain: None,
            value: s,
        });
    }
    let per_strain: Vec<f64> = params
        .iter()
        .zip(s_bar)
        .map(|(p, &s)| (1.0 - u.value()) * p.beta * s / p.removal_rate())
        .collect();
    let (dominant, value) =
        per_strain
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (j, r)| {
                if r > best.1 {
                    (j, r)
                } else {
                    best
                }
            });
    Ok(ReproductionNumber {
        value,
        per_strain,
        dominant,
    })
}

/// Smallest constant control with `R0 <= 1` at the infection-free point:
/// `max(0, 1 - min_j (mu_j + gamma_j) / (beta_j S_j))`.
///
/// Any control strictly above the returned value gives `R0 < 1`.
pub fn min_stabilizing_control(params: &[StrainParams], s_bar: &[f64]) -> Result<ControlValue> {
    if params.is_empty() {
        return Err(Error::NoStrains);
    }
    if s_bar.len() != params.len() {
        return Err(Error::StrainCountMismatch {
            expected: params.len(),
            actual: s_bar.len(),
        });
    }
    let binding = params
        .iter()
        .zip(s_bar)
        .filter(|(_, &s)| s > 0.0)
        .map(|(p, &s)| p.removal_rate() / (p.beta * s))
        .fold(f64::INFINITY, f64::min);
    Ok(ControlValue::clamped(1.0 - binding))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    Trivial,
    NonTrivial,
}

/// Equilibrium values of one strain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainEquilibrium {
    pub susceptible: f64,
    pub exposed: f64,
    pub infected: f64,
    pub removed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPoint {
    pub kind: EquilibriumKind,
    pub strains: Vec<StrainEquilibrium>,
    /// False when any compartment is negative.
    pub feasible: bool,
}

impl EquilibriumPoint {
    /// The point in explicit coordinates, with `P` supplied by the caller
    /// (the equilibrium conditions leave it free).
    pub fn to_full_coordinates(&self, population: f64) -> Vec<f64> {
        let mut x = vec![0.0; full::dim(self.strains.len())];
        x[full::P] = population;
        for (j, s) in self.strains.iter().enumerate() {
            x[full::s(j)] = s.susceptible;
            x[full::e(j)] = s.exposed;
            x[full::i(j)] = s.infected;
            x[full::r(j)] = s.removed;
        }
        x
    }
}

/// Closed-form endemic point of the explicit system.
///
/// Each strain sits at `S_j = (mu_j + gamma_j) / ((1-u) beta_j)`,
/// `E_j = (mu_j + gamma_j) I_j / sigma_j`, `R_j = gamma_j I_j / delta_j`, and
/// the death balance `sum_j mu_j I_j = 0` fixes
/// `I_1 = -(sum_{j>1} mu_j I_j) / mu_1`. `free_infected` holds `I_2..I_n`.
/// With two strains that gives `I_1 = -(mu_2/mu_1) I_2`, so any positive
/// `I_2` forces a negative `I_1`.
pub fn nontrivial_equilibrium(
    params: &[StrainParams],
    u: ControlValue,
    free_infected: &[f64],
) -> Result<EquilibriumPoint> {
    let n = params.len();
    if n < 2 {
        return Err(Error::EquilibriumStrainCount(n));
    }
    if free_infected.len() != n - 1 {
        return Err(Error::StrainCountMismatch {
            expected: n - 1,
            actual: free_infected.len(),
        });
    }
    for p in params {
        p.validate_strict()?;
    }
    if u.value() >= 1.0 {
        return Err(Error::DegenerateControl);
    }
    let open = 1.0 - u.value();
    let first_infected = -params[1..]
        .iter()
        .zip(free_infected)
        .map(|(p, &i)| p.mu * i)
        .sum::<f64>()
        / params[0].mu;
    let infected = std::iter::once(first_infected).chain(free_infected.iter().copied());
    let strains: Vec<StrainEquilibrium> = params
        .iter()
        .zip(infected)
        .map(|(p, i)| StrainEquilibrium {
            susceptible: p.removal_rate() / (open * p.beta),
            exposed: p.removal_rate() * i / p.sigma,
            infected: i,
            removed: p.gamma * i / p.delta,
        })
        .collect();
    let trivial = strains
        .iter()
        .all(|s| s.exposed == 0.0 && s.infected == 0.0 && s.removed == 0.0);
    let feasible = strains
        .iter()
        .all(|s| s.susceptible >= 0.0 && s.exposed >= 0.0 && s.infected >= 0.0 && s.removed >= 0.0);
    Ok(EquilibriumPoint {
        kind: if trivial {
            EquilibriumKind::Trivial
        } else {
            EquilibriumKind::NonTrivial
        },
        strains,
        feasible,
    })
}

/// Eigenvalues of the explicit system's Jacobian at the infection-free point.
///
/// Order: `n + 1` zeros, then `-delta_j` per strain, then per strain the
/// pair `-(mu_j+gamma_j+sigma_j)/2 +/- sqrt(4(1-u) beta_j sigma_j S_j +
/// (mu_j+gamma_j-sigma_j)^2)/2`.
pub fn analytic_eigenvalues(
    params: &[StrainParams],
    s_bar: &[f64],
    u: ControlValue,
) -> Result<Vec<Complex<f64>>> {
    if s_bar.len() != params.len() {
        return Err(Error::StrainCountMismatch {
            expected: params.len(),
            actual: s_bar.len(),
        });
    }
    let n = params.len();
    let mut eig = Vec::with_capacity(4 * n + 1);
    eig.extend(std::iter::repeat_n(Complex::new(0.0, 0.0), n + 1));
    eig.extend(params.iter().map(|p| Complex::new(-p.delta, 0.0)));
    for (p, &s) in params.iter().zip(s_bar) {
        let centre = -0.5 * (p.removal_rate() + p.sigma);
        let gap = p.removal_rate() - p.sigma;
        let disc = 4.0 * (1.0 - u.value()) * p.beta * p.sigma * s + gap * gap;
        let half_root = 0.5 * Complex::new(disc, 0.0).sqrt();
        eig.push(centre + half_root);
        eig.push(centre - half_root);
    }
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn experiment1() -> StrainParams {
        StrainParams::new(2.41e-9, 1.0 / 7.0, 1.0 / 21.0, 1.0 / 90.0, 1.152e-5).unwrap()
    }

    fn exp1_state() -> EpidemicState {
        EpidemicState::new(0.0, 217e6 + 255.0, vec![Compartments::new(252.0, 2.0, 1.0)])
    }

    #[test]
    fn infection_free_state_is_fixed() {
        let p = [experiment1(), experiment1()];
        let s = EpidemicState::infection_free(0.0, 1e6, 2);
        for u in [0.0, 0.4, 1.0] {
            let d = derivatives(&s, &p, ControlValue::new(u).unwrap()).unwrap();
            assert_eq!(d.population, 0.0);
            assert!(d.strains.iter().all(|c| *c == Compartments::default()));
        }
    }

    #[test]
    fn experiment1_initial_exposed_rate() {
        // Hand evaluation: 2.41e-9 * 217e6 * 2 - 252/7 = 1.04594 - 36 = -34.95406
        let d = derivatives(&exp1_state(), &[experiment1()], ControlValue::NONE).unwrap();
        let expected = 2.41e-9 * 217e6 * 2.0 - 252.0 / 7.0;
        assert!((d.strains[0].exposed - expected).abs() < 1e-12);
        assert!((d.strains[0].exposed - -34.954_06).abs() < 1e-5);
        assert!((d.population - -2.0 * 1.152e-5).abs() < 1e-18);
    }

    #[test]
    fn full_lockdown_removes_transmission() {
        let d = derivatives(&exp1_state(), &[experiment1()], ControlValue::FULL).unwrap();
        assert_eq!(d.strains[0].exposed, -(1.0 / 7.0) * 252.0);
    }

    #[test]
    fn susceptible_values() {
        let s = EpidemicState::new(0.0, 100.0, vec![Compartments::new(10.0, 20.0, 30.0)]);
        assert_eq!(susceptible(&s, 0).unwrap(), 40.0);
        let free = EpidemicState::infection_free(0.0, 5e5, 3);
        assert_eq!(susceptible(&free, 2).unwrap(), 5e5);
        assert_eq!(susceptible(&exp1_state(), 0).unwrap(), 217e6);
        assert!(matches!(susceptible(&s, 1), Err(Error::StrainIndex(1))));
    }

    #[test]
    fn inconsistent_susceptible_is_reported() {
        let s = EpidemicState::new(0.0, 100.0, vec![Compartments::new(50.0, 40.0, 20.0)]);
        assert!(matches!(
            susceptible(&s, 0),
            Err(Error::InconsistentState { strain: 0, .. })
        ));
    }

    #[test]
    fn input_validation() {
        let bad = EpidemicState::new(0.0, 100.0, vec![Compartments::new(-1.0, 0.0, 0.0)]);
        assert!(matches!(
            derivatives(&bad, &[experiment1()], ControlValue::NONE),
            Err(Error::NegativeCompartment {
                compartment: "E",
                ..
            })
        ));
        assert!(matches!(
            ControlValue::new(1.2),
            Err(Error::ControlOutOfRange(_))
        ));
        assert!(ControlValue::new(-0.01).is_err());
        assert!(StrainParams::new(0.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(StrainParams::new(1.0, 1.0, 1.0, 1.0, 0.0).is_ok());
        assert!(StrainParams::new(1.0, 1.0, 1.0, 1.0, 0.0)
            .unwrap()
            .validate_strict()
            .is_err());
    }

    #[test]
    fn susceptible_derivative_cases() {
        let p = [experiment1()];
        let free = EpidemicState::infection_free(0.0, 1e6, 1);
        assert_eq!(
            susceptible_derivative(&free, &p, ControlValue::NONE, 0).unwrap(),
            0.0
        );
        let s = EpidemicState::new(0.0, 1e6, vec![Compartments::new(10.0, 5.0, 0.0)]);
        let got = susceptible_derivative(&s, &p, ControlValue::NONE, 0).unwrap();
        let expected = -p[0].beta * (1e6 - 15.0) * 5.0;
        assert!((got - expected).abs() <= 1e-15 * expected.abs());
    }

    #[test]
    fn inactive_strain_is_frozen() {
        let a = experiment1();
        let b = experiment1().activated_at(180.0).unwrap();
        let s = EpidemicState::new(
            10.0,
            1e6,
            vec![Compartments::new(10.0, 5.0, 1.0), Compartments::default()],
        );
        let d = derivatives(&s, &[a, b], ControlValue::NONE).unwrap();
        assert_eq!(d.strains[1], Compartments::default());
        assert!(d.strains[0].exposed != 0.0);
        let ds1 = susceptible_derivative(&s, &[a, b], ControlValue::NONE, 1).unwrap();
        assert_eq!(ds1, d.population);
    }

    #[test]
    fn reproduction_number_cases() {
        let p = [experiment1()];
        let r = reproduction_number(&p, &[217e6], ControlValue::NONE).unwrap();
        // 2.41e-9 * 2.17e8 / (1.152e-5 + 1/21) = 0.52297 / 0.0476305 = 10.9797
        assert!((r.value - 10.9797).abs() < 1e-3, "{}", r.value);
        assert_eq!(r.dominant, 0);
        let r1 = reproduction_number(&p, &[217e6], ControlValue::FULL).unwrap();
        assert_eq!(r1.value, 0.0);
        assert!(matches!(
            reproduction_number(&[], &[], ControlValue::NONE),
            Err(Error::NoStrains)
        ));

        let mut fast = experiment1();
        fast.beta *= 1.7;
        let r2 = reproduction_number(&[experiment1(), fast], &[217e6, 217e6], ControlValue::NONE)
            .unwrap();
        assert_eq!(r2.dominant, 1);
        assert!((r2.value / r.value - 1.7).abs() < 1e-12);
    }

    #[test]
    fn min_control_cases() {
        let p = [experiment1()];
        let u = min_stabilizing_control(&p, &[217e6]).unwrap().value();
        // 1 - 1/10.9797
        assert!((u - 0.908_92).abs() < 1e-4, "{u}");
        let r = reproduction_number(&p, &[217e6], ControlValue::new(u + 1e-9).unwrap()).unwrap();
        assert!(r.value < 1.0);
        assert_eq!(min_stabilizing_control(&p, &[1e6]).unwrap().value(), 0.0);

        let mut fast = experiment1();
        fast.beta *= 1.7;
        let both = min_stabilizing_control(&[experiment1(), fast], &[217e6, 217e6]).unwrap();
        let alone = min_stabilizing_control(&[fast], &[217e6]).unwrap();
        assert_eq!(both, alone);
    }

    #[test]
    fn two_strain_equilibrium() {
        let p = [experiment1(), experiment1()];
        let zero = nontrivial_equilibrium(&p, ControlValue::NONE, &[0.0]).unwrap();
        assert_eq!(zero.kind, EquilibriumKind::Trivial);
        assert!(zero.feasible);
        // (1.152e-5 + 1/21) / 2.41e-9 = 1.97637e7
        assert!((zero.strains[0].susceptible - 1.976_37e7).abs() < 1e3);

        let eq = nontrivial_equilibrium(&p, ControlValue::NONE, &[1000.0]).unwrap();
        assert_eq!(eq.kind, EquilibriumKind::NonTrivial);
        assert!(!eq.feasible);
        assert!((eq.strains[0].infected + 1000.0).abs() < 1e-9);
        assert!(matches!(
            nontrivial_equilibrium(&p, ControlValue::FULL, &[1.0]),
            Err(Error::DegenerateControl)
        ));
        assert!(matches!(
            nontrivial_equilibrium(&p[..1], ControlValue::NONE, &[]),
            Err(Error::EquilibriumStrainCount(1))
        ));
    }

    #[test]
    fn eigenvalue_layout() {
        let mut b = experiment1();
        b.delta = 0.02;
        let eig =
            analytic_eigenvalues(&[experiment1(), b], &[1e6, 2e6], ControlValue::FULL).unwrap();
        assert_eq!(eig.len(), 9);
        assert!(eig[..3].iter().all(|z| z.norm() == 0.0));
        assert_eq!(eig[3].re, -1.0 / 90.0);
        assert_eq!(eig[4].re, -0.02);
        let p = experiment1();
        // u = 1: roots are -(mu + gamma) and -sigma
        assert!((eig[5].re + p.removal_rate()).abs() < 1e-15);
        assert!((eig[6].re + p.sigma).abs() < 1e-15);
    }

    #[test]
    fn eigen_sign_matches_threshold() {
        let p = [experiment1()];
        for s in [1e6, 1.9e7, 2.0e7, 2.17e8] {
            let eig = analytic_eigenvalues(&p, &[s], ControlValue::NONE).unwrap();
            let stable = eig[2..].iter().all(|z| z.re < 0.0);
            assert_eq!(stable, p[0].beta * s < p[0].removal_rate());
        }
    }
}
