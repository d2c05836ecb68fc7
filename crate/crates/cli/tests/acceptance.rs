//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::time::{Duration, Instant};

use multistrain_cli::config::{build_scenario, parse_config, ControlPlan, Scenario};
use multistrain_cli::presets::preset;
use multistrain_cli::run::{run_scenario, Mode};
use multistrain_core::analysis::{eigenvalues, jacobian_at, sort_eigenvalues};
use multistrain_core::control::{hamiltonian, switching_sum};
use multistrain_core::model::{active_mask, full, full_system_rhs, to_full_coordinates};
use multistrain_core::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

struct Check {
    pass: bool,
    detail: String,
}

fn scenario(name: &str) -> Scenario {
    let cfg = parse_config(&preset(name).expect("preset exists")).expect("preset parses");
    build_scenario(&cfg, None).expect("preset builds")
}

fn costs_of(sc: &Scenario) -> (CostParams, FbsmConfig) {
    match sc.control {
        ControlPlan::Optimize { costs, fbsm, .. } => (costs, fbsm),
        _ => panic!("{} is not an optimization preset", sc.name),
    }
}

fn run_plain(sc: &Scenario) -> Trajectory {
    simulate(
        &sc.initial,
        &sc.params,
        &sc.base_schedule(),
        &sc.events,
        &sc.grid,
    )
    .expect("simulation succeeds")
}

fn constant_run(sc: &Scenario, u: f64) -> Trajectory {
    let s = ControlSchedule::constant(sc.grid, ControlValue::new(u).unwrap());
    simulate(&sc.initial, &sc.params, &s, &sc.events, &sc.grid).expect("simulation succeeds")
}

fn in_band(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn mean_over(grid: &TimeGrid, u: &[f64], from: f64, to: f64) -> f64 {
    let pick: Vec<f64> = (0..grid.len())
        .filter(|&k| grid.time(k) >= from - 1e-9 && grid.time(k) <= to + 1e-9)
        .map(|k| u[k])
        .collect();
    pick.iter().sum::<f64>() / pick.len() as f64
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let mut c = f();
    let took = start.elapsed();
    c.detail.push_str(&format!("; {:.2} s", took.as_secs_f64()));
    if let Some(lim) = limit {
        if took > lim {
            c.pass = false;
            c.detail.push_str(&format!(" exceeds {} s", lim.as_secs()));
        }
    }
    c
}

fn experiment1_plateau() -> Check {
    let sc = scenario("experiment1");
    let traj = run_plain(&sc);
    let sum = summarize(&traj, 90.0).unwrap();
    let s = &sum.strains[0];
    let bands = [
        ("S", s.susceptible.mean, 0.07, 0.13),
        ("E", s.exposed.mean, 0.02, 0.08),
        ("I", s.infected.mean, 0.12, 0.18),
        ("R", s.removed.mean, 0.55, 0.65),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, v, lo, hi) in bands {
        let ok = in_band(v, lo, hi);
        pass &= ok;
        parts.push(format!(
            "{name} {:.2}% in [{:.0}, {:.0}]%{}",
            100.0 * v,
            100.0 * lo,
            100.0 * hi,
            if ok { "" } else { " NO" }
        ));
    }
    Check {
        pass,
        detail: parts.join(", "),
    }
}

fn reproduction_and_stability() -> Check {
    let sc = scenario("experiment1");
    let s_bar = [sc.initial.susceptible_raw(0)];
    let r0 = reproduction_number(&sc.params, &s_bar, ControlValue::NONE)
        .unwrap()
        .value;
    let umin = min_stabilizing_control(&sc.params, &s_bar).unwrap().value();
    let load = |u: f64| -> Vec<f64> {
        constant_run(&sc, u)
            .states
            .iter()
            .map(|s| s.strains[0].exposed + s.strains[0].infected)
            .collect()
    };
    let above = load(umin + 0.01);
    let k30 = sc.grid.index_of(30.0).unwrap();
    let decays = above[k30..].windows(2).all(|w| w[1] < w[0]);
    let below = load(umin - 0.05);
    let k365 = sc.grid.index_of(365.0).unwrap();
    let grows = below[k365] > 10.0 * below[0];
    Check {
        pass: (r0 - 10.98).abs() <= 0.01 && decays && grows,
        detail: format!(
            "R0 {r0:.4}, u_min {umin:.5}; u_min+0.01 monotone decay after day 30: {decays}; u_min-0.05 E+I day 365 / day 0 = {:.3e}",
            below[k365] / below[0]
        ),
    }
}

fn eigenvalue_oracle() -> Check {
    let mut rng = StdRng::seed_from_u64(20_240_101);
    let mut worst: f64 = 0.0;
    let mut count_ok = true;
    for n in 1..=3 {
        for _ in 0..20 {
            let s_bar: Vec<f64> = (0..n).map(|_| rng.random_range(1e3..1e9)).collect();
            let params: Vec<StrainParams> = s_bar
                .iter()
                .map(|&s| {
                    StrainParams::new(
                        rng.random_range(0.05..3.0) / s,
                        rng.random_range(0.05..1.0),
                        rng.random_range(0.01..0.5),
                        rng.random_range(0.001..0.1),
                        rng.random_range(1e-6..1e-2),
                    )
                    .unwrap()
                })
                .collect();
            let u = rng.random_range(0.0..1.0);
            let mut x = vec![0.0; full::dim(n)];
            x[full::P] = s_bar.iter().copied().fold(0.0, f64::max);
            for (j, &s) in s_bar.iter().enumerate() {
                x[full::s(j)] = s;
            }
            let mut num = eigenvalues(&jacobian_at(&x, &params, u, 1e-6));
            let mut ana =
                analytic_eigenvalues(&params, &s_bar, ControlValue::new(u).unwrap()).unwrap();
            count_ok &=
                num.len() == 4 * n + 1 && ana.iter().filter(|z| z.norm() == 0.0).count() == n + 1;
            sort_eigenvalues(&mut num);
            sort_eigenvalues(&mut ana);
            let scale = ana.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for (a, b) in num.iter().zip(&ana) {
                worst = worst.max((a - b).norm() / scale);
            }
        }
    }
    Check {
        pass: worst < 1e-7 && count_ok,
        detail: format!("60 parameter sets over 1-3 strains, worst relative error {worst:.2e} (< 1e-7), spectrum sizes ok: {count_ok}"),
    }
}

fn equilibrium_infeasibility() -> Check {
    let mut rng = StdRng::seed_from_u64(7);
    let base = scenario("experiment1").params[0];
    let mut all_infeasible = true;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p2 = StrainParams::new(
            base.beta * rng.random_range(0.2..5.0),
            rng.random_range(0.05..1.0),
            rng.random_range(0.01..0.5),
            rng.random_range(0.001..0.1),
            rng.random_range(1e-6..1e-2),
        )
        .unwrap();
        let params = [base, p2];
        let i2 = rng.random_range(1.0..1e7);
        let u = ControlValue::new(rng.random_range(0.0..0.95)).unwrap();
        let eq = nontrivial_equilibrium(&params, u, &[i2]).unwrap();
        all_infeasible &= !eq.feasible && eq.strains[0].infected < 0.0;
        let x = eq.to_full_coordinates(217e6);
        let res = full_system_rhs(&x, &params, u.value());
        let scale = params
            .iter()
            .zip(&eq.strains)
            .map(|(p, s)| {
                (p.beta * s.susceptible * s.infected)
                    .abs()
                    .max((p.delta * s.removed).abs())
            })
            .fold(0.0, f64::max);
        worst = worst.max(res.iter().map(|r| r.abs()).fold(0.0, f64::max) / scale);
    }
    Check {
        pass: all_infeasible && worst < 1e-9,
        detail: format!("100 draws with I_2 > 0: all infeasible with I_1 < 0: {all_infeasible}; worst residual {worst:.2e} (< 1e-9)"),
    }
}

fn random_state(rng: &mut StdRng, n: usize) -> (Vec<StrainParams>, EpidemicState) {
    let pop = rng.random_range(1e3..1e9);
    let params = (0..n)
        .map(|_| {
            StrainParams::new(
                rng.random_range(0.01..2.0) / pop,
                rng.random_range(0.05..1.0),
                rng.random_range(0.01..0.5),
                rng.random_range(0.001..0.1),
                rng.random_range(1e-6..1e-2),
            )
            .unwrap()
        })
        .collect();
    let strains = (0..n)
        .map(|_| {
            let occ = rng.random_range(0.0..1.0) * pop;
            let (a, b, c): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
            let t = (a + b + c).max(1e-12);
            Compartments::new(occ * a / t, occ * b / t, occ * c / t)
        })
        .collect();
    (params, EpidemicState::new(0.0, pop, strains))
}

fn consistency_identity() -> Check {
    let mut rng = StdRng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let (params, state) = random_state(&mut rng, 1 + trial % 3);
        let u = ControlValue::new(rng.random_range(0.0..=1.0)).unwrap();
        let d = derivatives(&state, &params, u).unwrap();
        for j in 0..params.len() {
            let c = &d.strains[j];
            let via_p = d.population - c.exposed - c.infected - c.removed;
            let direct = susceptible_derivative(&state, &params, u, j).unwrap();
            let scale = [d.population, c.exposed, c.infected, c.removed, direct]
                .iter()
                .map(|x| x.abs())
                .fold(f64::MIN_POSITIVE, f64::max);
            worst = worst.max((via_p - direct).abs() / scale);
        }
    }
    Check {
        pass: worst < 1e-12,
        detail: format!("100 random states, worst relative gap {worst:.2e} (< 1e-12)"),
    }
}

fn adjoint_agreement(case_a: &FbsmReport, sc: &Scenario) -> Check {
    let mut rng = StdRng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let n = 1 + trial % 3;
        let (params, state) = random_state(&mut rng, n);
        let costs =
            CostParams::new(rng.random_range(0.1..10.0), rng.random_range(0.1..20.0)).unwrap();
        let costate = CostateState {
            t: 0.0,
            phi_p: rng.random_range(-1e3..1e3),
            strains: (0..n)
                .map(|_| StrainCostate {
                    s: rng.random_range(-1e3..1e3),
                    e: rng.random_range(-1e3..1e3),
                    i: rng.random_range(-1e3..1e3),
                    r: rng.random_range(-1e3..1e3),
                })
                .collect(),
        };
        let u = rng.random_range(0.0..=1.0);
        let dphi = costate_derivatives(
            &state,
            &costate,
            ControlValue::new(u).unwrap(),
            &params,
            &costs,
        )
        .unwrap()
        .to_full_coordinates();
        let x = to_full_coordinates(&state);
        let phi = costate.to_full_coordinates();
        let norm = dphi.iter().map(|d| d.abs()).fold(0.0, f64::max);
        for k in 0..x.len() {
            let h = 1e-6 * x[k].abs().max(x[full::P]);
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += h;
            xm[k] -= h;
            let fd = -(hamiltonian(&xp, &phi, u, &params, &costs)
                - hamiltonian(&xm, &phi, u, &params, &costs))
                / (2.0 * h);
            worst = worst.max((fd - dphi[k]).abs() / norm);
        }
    }
    let (costs, _) = costs_of(sc);
    let horizon = sc.grid.horizon();
    let phi_p_gap = case_a
        .costates
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let expect = costs.c1 * (horizon - sc.grid.time(k));
            (c.phi_p - expect).abs() / expect.max(1.0)
        })
        .fold(0.0, f64::max);
    Check {
        pass: worst < 1e-6 && phi_p_gap < 1e-9,
        detail: format!(
            "50 random pairs, worst gap to -grad H {worst:.2e} of the gradient sup-norm (< 1e-6); phi_P vs c1 (T - t) {phi_p_gap:.2e} (< 1e-9)"
        ),
    }
}

const CASES: [&str; 6] = ["case_a", "case_b", "case_c", "case_d", "case_e", "case_f"];

fn interior_stationarity() -> Check {
    let worst: Vec<(f64, usize, bool)> = CASES
        .par_iter()
        .map(|name| {
            let sc = scenario(name);
            let (costs, base) = costs_of(&sc);
            // Tight tolerance: a sup-norm residual r in u gives a relative
            // stationarity gap of about c2 * r.
            let cfg = FbsmConfig {
                tol: 1e-10,
                max_iter: 5000,
                ..base
            };
            let rep = fbsm_solve(
                &sc.initial,
                &sc.params,
                &sc.events,
                &sc.grid,
                &costs,
                &sc.base_schedule(),
                &cfg,
            )
            .unwrap();
            let mut gap: f64 = 0.0;
            let mut interior = 0;
            for (k, (x, c)) in rep.trajectory.states.iter().zip(&rep.costates).enumerate() {
                let u = rep.schedule.at(k);
                if u > 0.01 && u < 0.99 {
                    interior += 1;
                    let active = active_mask(&sc.params, sc.grid.time(k));
                    let lhs = costs.c2 * (costs.c2 * u).exp();
                    let rhs = switching_sum(x, c, &sc.params, &active);
                    gap = gap.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
                }
            }
            (gap, interior, rep.converged)
        })
        .collect();
    let max_gap = worst.iter().map(|w| w.0).fold(0.0, f64::max);
    let all_conv = worst.iter().all(|w| w.2);
    let points: usize = worst.iter().map(|w| w.1).sum();
    Check {
        pass: max_gap < 1e-6 && all_conv && points > 0,
        detail: format!("Cases A-F solved to residual 1e-10, {points} interior points, worst relative gap {max_gap:.2e} (< 1e-6)"),
    }
}

struct CaseRun {
    scenario: Scenario,
    report: FbsmReport,
}

fn solve_cases() -> (Vec<CaseRun>, Duration) {
    let start = Instant::now();
    let runs = CASES
        .par_iter()
        .map(|name| {
            let sc = scenario(name);
            let (costs, cfg) = costs_of(&sc);
            let report = fbsm_solve(
                &sc.initial,
                &sc.params,
                &sc.events,
                &sc.grid,
                &costs,
                &sc.base_schedule(),
                &cfg,
            )
            .unwrap();
            CaseRun {
                scenario: sc,
                report,
            }
        })
        .collect();
    (runs, start.elapsed())
}

fn cases_reproduction(runs: &[CaseRun], took: Duration) -> Check {
    let g = runs[0].scenario.grid;
    let ua = runs[0].report.schedule.values();
    let plateau = mean_over(&g, ua, 15.0, 105.0);
    let (k_min, relax) = (0..g.len())
        .filter(|&k| in_band(g.time(k), 105.0, 250.0))
        .map(|k| (k, ua[k]))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    let rebound = (k_min..g.len())
        .filter(|&k| g.time(k) <= 400.0)
        .map(|k| ua[k])
        .fold(f64::NEG_INFINITY, f64::max);
    let e = mean_over(&g, runs[4].report.schedule.values(), 30.0, 600.0);
    let f = mean_over(&g, runs[5].report.schedule.values(), 30.0, 600.0);
    let means: Vec<f64> = runs.iter().map(|r| r.report.schedule.mean()).collect();
    let monotone = means.windows(2).all(|w| w[1] >= w[0]);
    let converged = runs
        .iter()
        .all(|r| r.report.converged && r.report.iterations <= 500);
    let checks = [
        ("A plateau", plateau, 0.45, 0.55),
        ("A relaxation", relax, 0.325, 0.425),
        ("A rebound", rebound, 0.35, 0.45),
        ("E plateau", e, 0.75, 0.85),
        ("F plateau", f, 0.83, 0.93),
    ];
    let mut pass = monotone && converged && took < Duration::from_secs(300);
    let mut parts = Vec::new();
    for (name, v, lo, hi) in checks {
        let ok = in_band(v, lo, hi);
        pass &= ok;
        parts.push(format!(
            "{name} {v:.4} in [{lo}, {hi}]{}",
            if ok { "" } else { " NO" }
        ));
    }
    let iters: Vec<String> = runs
        .iter()
        .map(|r| r.report.iterations.to_string())
        .collect();
    let means_s: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
    parts.push(format!(
        "means A-F [{}] monotone: {monotone}",
        means_s.join(", ")
    ));
    parts.push(format!(
        "iterations [{}] converged: {converged}",
        iters.join(", ")
    ));
    parts.push(format!("six cases {:.1} s (< 300 s)", took.as_secs_f64()));
    Check {
        pass,
        detail: parts.join("; "),
    }
}

fn objective_improvement(runs: &[CaseRun]) -> Check {
    let mut pass = true;
    let mut worst_margin = f64::INFINITY;
    for r in runs {
        let (costs, _) = costs_of(&r.scenario);
        for c in [0.0, 0.25, 0.5, 0.75] {
            let j = objective(&constant_run(&r.scenario, c), &costs).unwrap();
            let margin = (r.report.objective - j) / j.abs();
            worst_margin = worst_margin.min(margin);
            pass &= r.report.objective >= j;
        }
    }
    Check {
        pass,
        detail: format!("Cases A-F against u = 0, 0.25, 0.5, 0.75: smallest relative margin {worst_margin:.3e} (>= 0)"),
    }
}

fn two_strain_structure() -> Check {
    let sc2 = scenario("experiment2");
    let t2 = run_plain(&sc2);
    let g = sc2.grid;
    let shift = g.index_of(180.0).unwrap();
    let window = g.index_of(120.0).unwrap();
    let (i1, i2) = (t2.infected(0), t2.infected(1));
    let gap = (0..=window)
        .map(|k| (i2[shift + k] - i1[k]).abs())
        .fold(0.0, f64::max);
    let norm = (0..=window).map(|k| i1[k].abs()).fold(0.0, f64::max);
    let delayed = gap / norm;

    let sc3 = scenario("experiment3");
    let t3 = run_plain(&sc3);
    let peak = |v: Vec<f64>| v.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let (p1, p2) = (peak(t3.infected(0)), peak(t3.infected(1)));
    let (d2, d3) = (t2.deaths(), t3.deaths());
    Check {
        pass: delayed < 0.05 && p2 > p1 && d3 > d2,
        detail: format!(
            "identical strains: shifted sup-norm gap {:.3}% (< 5%); 1.7x strain: peak I_2 {p2:.3e} vs I_1 {p1:.3e}, deaths {d3:.4e} vs {d2:.4e}",
            100.0 * delayed
        ),
    }
}

fn determinism_and_order() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let mut same = true;
    for name in ["experiment1", "experiment3"] {
        let sc = scenario(name);
        let a = dir.path().join(format!("{name}-a"));
        let b = dir.path().join(format!("{name}-b"));
        run_scenario(&sc, &a, Mode::Auto, false).unwrap();
        run_scenario(&sc, &b, Mode::Auto, false).unwrap();
        for f in ["trajectory.csv", "summary.csv"] {
            same &= std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap();
        }
    }
    let final_at = |dt: f64| {
        let sc = scenario("experiment1");
        let grid = TimeGrid::new(0.0, 730.0, dt).unwrap();
        let s = ControlSchedule::constant(grid, ControlValue::NONE);
        to_full_coordinates(
            simulate(&sc.initial, &sc.params, &s, &[], &grid)
                .unwrap()
                .final_state(),
        )
    };
    let (x1, x2, x3) = (final_at(0.1), final_at(0.05), final_at(0.025));
    let sup = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let ratio = sup(&x1, &x2) / sup(&x2, &x3);
    Check {
        pass: same && in_band(ratio, 8.0, 32.0),
        detail: format!("byte-identical CSVs for repeated runs: {same}; error ratio for dt 0.1 / 0.05 / 0.025: {ratio:.2} in [8, 32]"),
    }
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let mut results: Vec<(u32, &str, Check)> = vec![
        (
            1,
            "Experiment 1 plateau",
            timed(secs(5), experiment1_plateau),
        ),
        (
            2,
            "R0 and stability threshold",
            timed(secs(10), reproduction_and_stability),
        ),
        (3, "eigenvalue oracle", timed(secs(5), eigenvalue_oracle)),
        (
            4,
            "second-strain equilibrium infeasible",
            timed(secs(1), equilibrium_infeasibility),
        ),
        (
            5,
            "susceptible consistency identity",
            timed(secs(1), consistency_identity),
        ),
    ];

    let (runs, took) = solve_cases();
    let case_a_sc = runs[0].scenario.clone();
    results.push((
        6,
        "adjoint vs Hamiltonian gradient",
        timed(secs(5), || adjoint_agreement(&runs[0].report, &case_a_sc)),
    ));
    results.push((
        7,
        "interior stationarity of u*",
        timed(None, interior_stationarity),
    ));
    results.push((
        8,
        "Cases A-F schedules",
        timed(None, || cases_reproduction(&runs, took)),
    ));
    results.push((
        9,
        "objective improvement",
        timed(None, || objective_improvement(&runs)),
    ));
    results.push((
        10,
        "delayed and stronger second strain",
        timed(None, two_strain_structure),
    ));
    results.push((
        11,
        "determinism and RK4 order",
        timed(None, determinism_and_order),
    ));

    let mut failed = 0;
    for (n, name, c) in &results {
        if !c.pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {} {name}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
