// SPDX-License-Identifier: Apache-2.0
//! Validation harness: closed forms against dense numerics, dynamical
//! cross-checks, and the Monte Carlo noise-power comparison.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg;
use crate::model::{assemble_generator, build_h_p, build_h_x, build_chain};
use crate::oracle::{
    first_row_elements, chain_inverse, closed_form_h11, ideal_log10_normalized_snr, scaled_inverse_element,
    BeyondLinearSeries, Sector,
};
use crate::params::SensorParams;
use crate::response::{information_matrices, noise_power_linear, steady_state_mean, ResponseEngine};
use crate::scenarios::Scenario;
use crate::timedomain::{lyapunov_covariance, lyapunov_residual, monte_carlo_noise_power, steady_mean_ode, DiffusionModel, TrajectoryEnsemble};

pub const ORACLE_TOL: f64 = 1e-9;

/// One line of the pass/fail table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub element: String,
    pub closed_form: f64,
    pub numeric: f64,
    pub rel_err: f64,
    pub tol: f64,
    pub pass: bool,
}

impl OracleCheck {
    /// Relative error, except that an exactly-zero closed form is compared
    /// against `scale` (the magnitude of the surrounding matrix).
    pub fn new(element: String, closed_form: f64, numeric: f64, scale: f64, tol: f64) -> Self {
        let denom = if closed_form == 0.0 { scale.max(f64::MIN_POSITIVE) } else { closed_form.abs() };
        let rel_err = (closed_form - numeric).abs() / denom;
        Self {
            element,
            closed_form,
            numeric,
            rel_err,
            tol,
            pass: rel_err <= tol && numeric.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub tol: f64,
    /// Build the numeric `h^P` with the sign of `A` flipped.
    pub inject_fault: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            tol: ORACLE_TOL,
            inject_fault: false,
        }
    }
}

/// Oracle grid: odd `N`, amplification values and `eps0 / kappa` ratios.
pub const GRID_N: [usize; 3] = [3, 5, 7];
pub const GRID_A: [f64; 3] = [0.5, 1.0, 2.0];
pub const GRID_EPS_RATIO: [f64; 3] = [1e-3, 1e-2, 1e-1];
const GRID_KAPPA: f64 = 10.0;
const GRID_J: f64 = 1.0;

/// Dense `H[eps]^-1` of the noiseless chain, optionally with the fault.
pub fn numeric_inverse(p: &SensorParams, eps: f64, fault: bool) -> Result<DMatrix<f64>> {
    let n = p.n_sites;
    let empty = DMatrix::zeros(n, 0);
    let mut h = assemble_generator(p, &empty, &empty, eps)?.to_matrix();
    if fault {
        h.view_mut((n, n), (n, n)).copy_from(&build_h_x(p));
    }
    linalg::inverse_checked(&h, "validation inverse", linalg::RESIDUAL_TOL)
}

fn numeric_block_inverse(p: &SensorParams, sector: Sector, fault: bool) -> Result<DMatrix<f64>> {
    let h = match (sector, fault) {
        (Sector::X, _) | (Sector::P, true) => build_h_x(p),
        (Sector::P, false) => build_h_p(p),
    };
    linalg::inverse_checked(&h, "validation block inverse", linalg::RESIDUAL_TOL)
}

/// The closed-form oracle suite over the fixed grid.
pub fn oracle_suite(opts: &ValidationOptions) -> Result<Vec<OracleCheck>> {
    let tol = opts.tol;
    let fault = opts.inject_fault;
    let mut out = Vec::new();
    for &n in &GRID_N {
        let chain = chain_inverse(n, GRID_KAPPA, GRID_J)?;
        let dense = linalg::inverse_checked(&build_chain(n, GRID_KAPPA, GRID_J, 0.0), "chain", linalg::RESIDUAL_TOL)?;
        let scale = dense.amax();
        for (i, j) in [(1, 1), (n, 1), (1, n), (n, n)] {
            out.push(OracleCheck::new(
                format!("chain_inverse[N={n}]({i},{j})"),
                chain[(i - 1, j - 1)],
                dense[(i - 1, j - 1)],
                scale,
                tol,
            ));
        }
        for &a in &GRID_A {
            let p = SensorParams::from_hopping(n, GRID_J, a, GRID_KAPPA, 1.0, 1.0)?;
            let tag = format!("N={n},A={a}");
            for sector in [Sector::X, Sector::P] {
                let num = numeric_block_inverse(&p, sector, fault)?;
                let scale = num.amax();
                for (i, j) in [(n, 1), (1, n), (n, n), (2, 1)] {
                    out.push(OracleCheck::new(
                        format!("scaled_inverse_{sector:?}[{tag}]({i},{j})"),
                        scaled_inverse_element(chain[(i - 1, j - 1)], i, j, a, sector),
                        num[(i - 1, j - 1)],
                        scale,
                        tol,
                    ));
                }
            }
            let engine = ResponseEngine::default();
            let empty = DMatrix::zeros(n, 0);
            let log10 = if fault {
                let im = crate::response::InformationMatrices {
                    q_x: numeric_block_inverse(&p, Sector::X, true)?,
                    q_p: numeric_block_inverse(&p, Sector::P, true)?,
                };
                let noise = noise_power_linear(&p, &im, &empty, &empty);
                let col: f64 = im.q_x.column(0).norm_squared();
                (2.0 * p.kappa * (im.qx_n1() * im.qp_1n()).powi(2) / (noise * col)).log10()
            } else {
                engine.snr_per_photon_linear(&p, &empty, &empty, 1.0)?.log10_snr_per_photon_normalized
            };
            out.push(OracleCheck::new(
                format!("ideal_log10_snr[{tag}]"),
                ideal_log10_normalized_snr(n, GRID_KAPPA, a),
                log10,
                1.0,
                tol,
            ));
            for &ratio in &GRID_EPS_RATIO {
                let eps0 = ratio * GRID_KAPPA;
                let tag = format!("N={n},A={a},eps0/kappa={ratio:e}");
                let num = numeric_inverse(&p, eps0, fault)?;
                let scale = num.amax();
                out.push(OracleCheck::new(
                    format!("h11[{tag}]"),
                    closed_form_h11(GRID_KAPPA, eps0),
                    num[(0, 0)],
                    scale,
                    tol,
                ));
                let series = BeyondLinearSeries::new(chain.clone(), eps0, a, 1e-17)?;
                for (r, c) in [(1, 1), (n, 1), (n + 1, 1), (2 * n, n), (n + 1, n + 1), (1, 2 * n), (n, 2 * n)] {
                    out.push(OracleCheck::new(
                        format!("series[{tag}]({r},{c})"),
                        series.element(r, c).value,
                        num[(r - 1, c - 1)],
                        scale,
                        tol,
                    ));
                }
                let row = first_row_elements(&p, eps0)?;
                for i in 1..=n {
                    out.push(OracleCheck::new(
                        format!("row_x[{tag}]({},{i})", n + 1),
                        row.x_sector[i - 1],
                        num[(n, i - 1)],
                        scale,
                        tol,
                    ));
                    out.push(OracleCheck::new(
                        format!("row_p[{tag}]({},{})", n + 1, n + i),
                        row.p_sector[i - 1],
                        num[(n, n + i - 1)],
                        scale,
                        tol,
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// Parameters of the Monte Carlo reference runs: slow enough dynamics
/// for a coarse step, amplification large enough to matter.
pub fn monte_carlo_params() -> Result<SensorParams> {
    SensorParams::from_hopping(3, 3.0, 1.0, 10.0, 1.0, 1.0)
}

pub const MC_SEED: u64 = 2024;
pub const MC_N_TRAJ: usize = 10_000;
pub const MC_DT: f64 = 0.04;
pub const MC_BURN_IN: f64 = 30.0;
pub const MC_TAU_WINDOW: f64 = 200.0;
pub const MC_ALPHA: f64 = 0.5;
/// Scenarios compared against the analytic noise power.
pub const MC_SCENARIOS: [Scenario; 3] = [Scenario::Ideal, Scenario::TunedBalanced, Scenario::Z1];

pub fn reference_ensemble(seed: u64, n_traj: usize) -> TrajectoryEnsemble {
    TrajectoryEnsemble {
        seed,
        n_traj,
        dt: MC_DT,
        t_end: MC_BURN_IN + MC_TAU_WINDOW,
        tau_window: MC_TAU_WINDOW,
    }
}

/// Dynamical cross-checks that need no sampling: mean ODE against the
/// linear solve and the Lyapunov residual, per Monte Carlo scenario.
pub fn timedomain_suite() -> Result<Vec<OracleCheck>> {
    let p = monte_carlo_params()?;
    let mut out = Vec::new();
    for sc in MC_SCENARIOS {
        let m = sc.model(p, MC_ALPHA)?;
        let (z, y) = (m.loss_matrix()?, m.gain_matrix()?);
        let eps = 0.05;
        let exact = steady_state_mean(&p, &z, &y, eps)?;
        let ode = steady_mean_ode(&m.generator(eps)?, 1e-12)?;
        let scale = exact.amax();
        for i in 0..exact.len() {
            out.push(OracleCheck::new(
                format!("ode_mean[{}]({})", sc.name(), i + 1),
                exact[i],
                ode[i],
                scale,
                1e-8,
            ));
        }
        let dm = DiffusionModel::from_params(&p, &z, &y, 0.0)?;
        let sigma = lyapunov_covariance(&dm)?;
        let res = lyapunov_residual(&dm, &sigma);
        out.push(OracleCheck {
            element: format!("lyapunov_residual[{}]", sc.name()),
            closed_form: 0.0,
            numeric: res,
            rel_err: res,
            tol: linalg::RESIDUAL_TOL,
            pass: res <= linalg::RESIDUAL_TOL,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloCheck {
    pub case: String,
    /// Window-extrapolated variance; see `raw_estimate` for the plain one.
    pub estimate: f64,
    pub std_error: f64,
    pub analytic: f64,
    pub z_score: f64,
    pub raw_estimate: f64,
    pub raw_std_error: f64,
    pub half_step_estimate: f64,
    pub pass: bool,
}

/// Runs the ensemble and compares it with the analytic noise power.
pub fn monte_carlo_check(
    case: &str,
    p: &SensorParams,
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    ens: &TrajectoryEnsemble,
) -> Result<MonteCarloCheck> {
    let im = information_matrices(p, z, y)?;
    let analytic = noise_power_linear(p, &im, z, y);
    let mc = monte_carlo_noise_power(p, z, y, ens)?;
    let z_score = (mc.tau_extrapolated - analytic) / mc.tau_extrapolated_std_error;
    Ok(MonteCarloCheck {
        case: case.to_string(),
        estimate: mc.tau_extrapolated,
        std_error: mc.tau_extrapolated_std_error,
        analytic,
        z_score,
        raw_estimate: mc.estimate,
        raw_std_error: mc.std_error,
        half_step_estimate: mc.estimate_half_step,
        pass: z_score.abs() <= 3.0,
    })
}

/// The three reference Monte Carlo comparisons.
pub fn monte_carlo_suite(ens: &TrajectoryEnsemble) -> Result<Vec<MonteCarloCheck>> {
    let p = monte_carlo_params()?;
    MC_SCENARIOS
        .iter()
        .map(|sc| {
            let m = sc.model(p, MC_ALPHA)?;
            monte_carlo_check(sc.name(), &p, &m.loss_matrix()?, &m.gain_matrix()?, ens)
        })
        .collect()
}

/// Fixed-width pass/fail table.
pub fn format_table(checks: &[OracleCheck]) -> String {
    let mut s = format!(
        "{:<48} {:>24} {:>24} {:>10} {:>8} {}\n",
        "element", "closed_form", "numeric", "rel_err", "tol", "result"
    );
    for c in checks {
        s.push_str(&format!(
            "{:<48} {:>24.16e} {:>24.16e} {:>10.2e} {:>8.0e} {}\n",
            c.element,
            c.closed_form,
            c.numeric,
            c.rel_err,
            c.tol,
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_suite_passes() {
        let checks = oracle_suite(&ValidationOptions::default()).unwrap();
        let bad: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
        assert!(bad.is_empty(), "{}", format_table(&checks));
    }

    #[test]
    fn injected_fault_is_caught() {
        let checks = oracle_suite(&ValidationOptions {
            inject_fault: true,
            ..Default::default()
        })
        .unwrap();
        let bad = checks.iter().filter(|c| !c.pass).count();
        assert!(bad > 10, "only {bad} failures");
        assert!(checks.iter().any(|c| !c.pass && c.element.starts_with("scaled_inverse_P")));
    }

    #[test]
    fn timedomain_suite_passes() {
        let checks = timedomain_suite().unwrap();
        assert!(checks.iter().all(|c| c.pass), "{}", format_table(&checks));
    }
}
