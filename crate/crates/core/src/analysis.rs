//! Stability classification, a finite-difference Jacobian and trajectory
//! summaries.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::{
    full_system_rhs, reproduction_number, to_full_coordinates, ControlValue, EpidemicState,
    ReproductionNumber, StrainParams,
};

/// Largest max-min spread (in shares of `P(0)`) for a window to count as a
/// plateau.
pub const PLATEAU_SPREAD: f64 = 0.02;

/// Default trailing window for plateau detection, in days.
pub const DEFAULT_WINDOW: f64 = 90.0;

/// Central-difference Jacobian of the explicit `(4n + 1)` system at `state`,
/// in the coordinate order of [`crate::model::full`]. Coordinate `i` is
/// perturbed by `h * max(|x_i|, 1)`.
pub fn numeric_jacobian(
    state: &EpidemicState,
    params: &[StrainParams],
    u: ControlValue,
    h: f64,
) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter {
            name: "h",
            value: h,
            reason: "must be > 0",
        });
    }
    if state.n_strains() != params.len() {
        return Err(Error::StrainCountMismatch {
            expected: params.len(),
            actual: state.n_strains(),
        });
    }
    let x = to_full_coordinates(state);
    Ok(jacobian_at(&x, params, u.value(), h))
}

/// Same as [`numeric_jacobian`] for a point given directly in explicit
/// coordinates, where `S_j` need not match `P - E_j - I_j - R_j`.
pub fn jacobian_at(x: &[f64], params: &[StrainParams], u: f64, h: f64) -> DMatrix<f64> {
    let dim = x.len();
    let mut jac = DMatrix::zeros(dim, dim);
    let mut probe = x.to_vec();
    for col in 0..dim {
        let step = h * x[col].abs().max(1.0);
        probe[col] = x[col] + step;
        let plus = full_system_rhs(&probe, params, u);
        probe[col] = x[col] - step;
        let minus = full_system_rhs(&probe, params, u);
        probe[col] = x[col];
        for row in 0..dim {
            jac[(row, col)] = (plus[row] - minus[row]) / (2.0 * step);
        }
    }
    jac
}

/// Eigenvalues of a dense real matrix, via the real Schur form.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    m.clone().complex_eigenvalues().iter().copied().collect()
}

/// Sorts eigenvalues by real part, then imaginary part.
pub fn sort_eigenvalues(v: &mut [Complex<f64>]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub stability: Stability,
    pub reproduction: ReproductionNumber,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.stability == Stability::Stable
    }

    /// The strain whose threshold binds.
    pub fn binding_strain(&self) -> usize {
        self.reproduction.dominant
    }
}

/// Local stability of the infection-free point: stable iff `R0 < 1`.
pub fn classify_stability(
    params: &[StrainParams],
    s_bar: &[f64],
    u: ControlValue,
) -> Result<StabilityReport> {
    let reproduction = reproduction_number(params, s_bar, u)?;
    let stability = if reproduction.value < 1.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    Ok(StabilityReport {
        stability,
        reproduction,
    })
}

/// Mean share of `P(0)` over the trailing window and its spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauShare {
    pub mean: f64,
    pub spread: f64,
}

impl PlateauShare {
    pub fn is_plateau(&self) -> bool {
        self.spread < PLATEAU_SPREAD
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrainSummary {
    pub peak_infected: f64,
    pub peak_day: f64,
    /// Strain with the most infected individuals at this strain's peak.
    pub dominant_at_peak: usize,
    pub susceptible: PlateauShare,
    pub exposed: PlateauShare,
    pub infected: PlateauShare,
    pub removed: PlateauShare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    pub window: f64,
    pub initial_population: f64,
    pub strains: Vec<StrainSummary>,
    /// `P(0) - P(T)`.
    pub deaths: f64,
}

impl TrajectorySummary {
    pub fn death_share(&self) -> f64 {
        self.deaths / self.initial_population
    }
}

fn share_stats(values: impl Iterator<Item = f64>, scale: f64) -> PlateauShare {
    let (mut sum, mut n, mut lo, mut hi) = (0.0, 0usize, f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        let s = v / scale;
        sum += s;
        n += 1;
        lo = lo.min(s);
        hi = hi.max(s);
    }
    PlateauShare {
        mean: sum / n as f64,
        spread: hi - lo,
    }
}

/// Peaks per strain (grid resolution) and plateau shares of `P(0)` over the
/// trailing `window` days.
pub fn summarize(traj: &Trajectory, window: f64) -> Result<TrajectorySummary> {
    let span = traj.grid.horizon() - traj.grid.t0();
    if !(window > 0.0) || window > span + 1e-9 {
        return Err(Error::InvalidParameter {
            name: "window",
            value: window,
            reason: "must lie in (0, horizon]",
        });
    }
    let p0 = traj.initial_population();
    let start = traj.grid.horizon() - window;
    let tail: Vec<&EpidemicState> = traj
        .states
        .iter()
        .enumerate()
        .filter(|(k, _)| traj.grid.time(*k) >= start - 1e-9)
        .map(|(_, s)| s)
        .collect();

    let strains = (0..traj.n_strains())
        .map(|j| {
            let (peak_k, peak) = traj
                .states
                .iter()
                .map(|s| s.strains[j].infected)
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, v)| {
                    if v > best.1 {
                        (k, v)
                    } else {
                        best
                    }
                });
            let at_peak = &traj.states[peak_k];
            let dominant_at_peak = (0..traj.n_strains()).fold(j, |best, i| {
                if at_peak.strains[i].infected > at_peak.strains[best].infected {
                    i
                } else {
                    best
                }
            });
            StrainSummary {
                peak_infected: peak,
                peak_day: traj.grid.time(peak_k),
                dominant_at_peak,
                susceptible: share_stats(tail.iter().map(|s| s.susceptible_raw(j)), p0),
                exposed: share_stats(tail.iter().map(|s| s.strains[j].exposed), p0),
                infected: share_stats(tail.iter().map(|s| s.strains[j].infected), p0),
                removed: share_stats(tail.iter().map(|s| s.strains[j].removed), p0),
            }
        })
        .collect();

    Ok(TrajectorySummary {
        window,
        initial_population: p0,
        strains,
        deaths: traj.deaths(),
    })
}
