//! Built-in scenarios, shipped as commented TOML so that `presets write`
//! doubles as schema documentation.

const STRAIN_1: &str = r#"
# Strain 1. Rates are per day; beta is per person per day.
[[strains]]
beta = 2.41e-9
sigma = 0.14285714285714285    # 1/7: mean latency of 7 days
gamma = 0.047619047619047616   # 1/21: mean infectious period of 21 days
delta = 0.011111111111111112   # 1/90: immunity lasts about 90 days
mu = 1.152e-5
exposed = 252.0
infected = 2.0
removed = 1.0
"#;

const HEADER: &str = r#"
[grid]
t0 = 0.0
horizon = 730.0
dt = 0.05

[initial]
# S_1(0). The population is S + E + I + R = 217000255.
susceptible = 217e6
"#;

const OUTPUT: &str = r#"
[output]
summary_window = 90.0   # trailing days used for plateau shares
svg = true
"#;

fn second_strain(beta_ratio: &str) -> String {
    format!(
        r#"
# Strain 2 enters on day 180 with 252 exposed, 2 infected and 1 removed,
# drawn from the susceptible pool. Before that its compartments are zero.
[[strains]]
beta_ratio = {beta_ratio}   # beta_2 / beta_1
sigma = 0.14285714285714285
gamma = 0.047619047619047616
delta = 0.011111111111111112
mu = 1.152e-5
activation_time = 180.0
seed = {{ exposed = 252.0, infected = 2.0, removed = 1.0 }}
"#
    )
}

fn experiment1() -> String {
    format!(
        r#"# Single strain, no intervention.
name = "experiment1"
{HEADER}{STRAIN_1}
# The parameter table of the source study lists u = 1.0 for this run, while
# its prose and figures describe an unmitigated outbreak. u = 1 would stop
# transmission altogether, so the unmitigated reading is used here.
[control]
mode = "none"
{OUTPUT}"#
    )
}

fn two_strain(name: &str, ratio: &str, blurb: &str) -> String {
    format!(
        r#"# {blurb}
name = "{name}"
{HEADER}{STRAIN_1}{}
[control]
mode = "none"
{OUTPUT}"#,
        second_strain(ratio)
    )
}

fn case(name: &str, k: &str) -> String {
    format!(
        r#"# Optimal lockdown, single strain. Running cost c1 * P - exp(c2 * u)
# with c2 = c2_factor * ln P(0).
name = "{name}"
{HEADER}{STRAIN_1}
[control]
mode = "optimize"
c1 = 1.0
c2_factor = {k}
log_population = "total"   # or "susceptible" for ln S(0) = ln 217e6
relaxation = 0.5           # initial weight of the new control per sweep
min_relaxation = 0.0078125 # the weight halves when the residual grows
tol = 1e-6                 # sup-norm residual of the control law
max_iter = 500
u_init = 0.0
{OUTPUT}"#
    )
}

/// `(name, description)` of every preset.
pub const PRESETS: &[(&str, &str)] = &[
    ("experiment1", "one strain, no control"),
    ("experiment2", "second identical strain seeded on day 180"),
    (
        "experiment3",
        "second strain with 1.7x transmission seeded on day 180",
    ),
    ("case_a", "optimal control, c2 = 1.0 ln P(0)"),
    ("case_b", "optimal control, c2 = 0.9 ln P(0)"),
    ("case_c", "optimal control, c2 = 0.8 ln P(0)"),
    ("case_d", "optimal control, c2 = 0.7 ln P(0)"),
    ("case_e", "optimal control, c2 = 0.6 ln P(0)"),
    ("case_f", "optimal control, c2 = 0.5 ln P(0)"),
];

/// TOML text of a preset. Names are case-insensitive.
pub fn preset(name: &str) -> Option<String> {
    let text = match name.to_ascii_lowercase().as_str() {
        "experiment1" => experiment1(),
        "experiment2" => two_strain(
            "experiment2",
            "1.0",
            "Two identical strains, the second delayed by 180 days.",
        ),
        "experiment3" => two_strain(
            "experiment3",
            "1.7",
            "A more transmissible second strain, delayed by 180 days.",
        ),
        "case_a" => case("case_a", "1.0"),
        "case_b" => case("case_b", "0.9"),
        "case_c" => case("case_c", "0.8"),
        "case_d" => case("case_d", "0.7"),
        "case_e" => case("case_e", "0.6"),
        "case_f" => case("case_f", "0.5"),
        _ => return None,
    };
    Some(text)
}
