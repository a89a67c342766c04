//! Catalog text for `describe`.

use plastlab::model::{builtin_models, describe_model};
use plastlab::ModelParams;

use crate::error::CliError;

const EXPERIMENTS: &[(&str, &str)] = &[
    (
        "forward",
        "forward: solves the time-discrete problem for the configured load.\n\
         checks:\n\
         - complementarity 0 <= lambda, phi <= 0, lambda*phi = 0 at every step and point\n\
         - kinematic consistency C^-1 sigma - eps(u) - H^-1 chi = 0 at every node\n\
         - multiplier identity |lambda|_L2 = |H^-1 chi'|_L2 / sigma0\n\
         outputs: trajectory.json, trajectory.csv, summary.json\n",
    ),
    (
        "converge",
        "converge: refinement study against a fine reference grid.\n\
         checks:\n\
         - uniform convergence of the stress in L-infinity with observed order >= min_order\n\
         - strong H1 convergence of stress and displacement: monotone errors and a finest/coarsest ratio bound\n\
         - per-cell certificate |Sigma_l' - 2 Sigma'|_A <= |Sigma_l'|_A\n\
         - multiplier identity on every run and L2 convergence of the multiplier\n\
         reported only: weak-convergence probe with oscillating loads, Hoelder and Lipschitz ratios of the forward map\n\
         outputs: convergence.csv (tau, error, observed_order), trajectory.json (reference run), summary.json\n",
    ),
    (
        "evi-check",
        "evi-check: randomized input pairs for the play operator on an interval, a 2D ball and the von Mises cylinder.\n\
         checks:\n\
         - local 1/2-Hoelder estimate |xi1 - xi2|^2_Linf <= 2(|u1'|_Lq + |u2'|_Lq)|u1 - u2|_Lp + |xi1(0) - xi2(0)|^2 for each p\n\
         - discrete dissipation inequalities of the catching-up scheme\n\
         reported only: stop-operator Lipschitz ratio L-infinity against W11\n\
         outputs: holder.csv, summary.json\n",
    ),
    (
        "control",
        "control: projected gradient in H1(0,T;U) for the reduced objective psi(u) + nu/2 |g|^2_H1.\n\
         checks:\n\
         - strictly decreasing objective history\n\
         - termination by stationarity or step size\n\
         - with approximation_steps: nonincreasing distances of successive minimizers, and the anchored problem started at its anchor takes no step\n\
         outputs: optimization.csv, control.json, trajectory.json, summary.json\n",
    ),
];

pub fn describe(name: &str) -> Result<String, CliError> {
    if let Some((_, text)) = EXPERIMENTS.iter().find(|(n, _)| *n == name) {
        return Ok((*text).to_string());
    }
    if builtin_models().iter().any(|(n, _)| *n == name) {
        let mut text = describe_model(name, &ModelParams::default()).map_err(|e| CliError::config(e.to_string()))?;
        text.push_str(
            "parameters: mu, lam (Lame constants), k1 (kinematic hardening modulus), sigma0 (yield stress), mesh (patch2d cells per side)\n",
        );
        return Ok(text);
    }
    let known: Vec<&str> =
        builtin_models().iter().map(|(n, _)| *n).chain(EXPERIMENTS.iter().map(|(n, _)| *n)).collect();
    Err(CliError::config(format!("unknown name `{name}`; known: {}", known.join(", "))))
}
