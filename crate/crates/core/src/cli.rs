// SPDX-License-Identifier: Apache-2.0
//! Command-line front end. [`run`] does all the work and returns the
//! text and exit code, so the binary is a two-line wrapper.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 unstable
//! configuration, 3 validation failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::conditions::{repair_template, robustness_probe, CONDITION_TOL};
use crate::config::{RunConfig, SweepSpec, SweepVariable};
use crate::error::{Error, Result};
use crate::response::ResponseEngine;
use crate::stability::{self, necessary_bound_case1, necessary_bound_case2, CouplingCase};
use crate::sweep::{run_sweep, to_csv};
use crate::timedomain::TrajectoryEnsemble;
use crate::validate::{self, ValidationOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_UNSTABLE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nhsense", version, about = "Noisy non-Hermitian lattice sensor laboratory")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tolerance for condition checks (report, tune) or oracle comparisons (validate).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads for sweeps, scans and trajectories.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Master seed for Monte Carlo runs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sensing, condition and stability report as JSON.
    Report,
    /// Parameter sweep as CSV; uses the [sweep] section unless overridden.
    Sweep {
        #[arg(long)]
        variable: Option<String>,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        grid: Option<Vec<f64>>,
    },
    /// Gamma-coupling stability scan as CSV.
    Stability {
        /// 1: site 1 to N-1, 2: site 1 to N.
        #[arg(long, default_value_t = 2)]
        case: u8,
        #[arg(long)]
        gamma_min: Option<f64>,
        /// Defaults to 10x the necessary bound.
        #[arg(long)]
        gamma_max: Option<f64>,
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Repair the loss template toward C1 and report the conditions.
    Tune {
        /// Also emit the balanced gain Y = Z'.
        #[arg(long)]
        balance: bool,
        /// Robustness probe on loss entry ROW,COL (1-based).
        #[arg(long, value_delimiter = ',', value_name = "ROW,COL")]
        perturb: Option<Vec<usize>>,
        /// Scale factors for the probed entry.
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        factors: Vec<f64>,
    },
    /// Closed-form and dynamical validation suites.
    Validate {
        #[arg(long)]
        monte_carlo: bool,
        #[arg(long)]
        n_traj: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        tau_window: Option<f64>,
        /// Flip the sign of A in the numeric h^P (mutation check).
        #[arg(long)]
        inject_fault: bool,
    },
}

/// Everything a CLI invocation produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String, code: i32) -> Self {
        Self {
            stdout,
            stderr: String::new(),
            code,
        }
    }

    fn fail(err: &Error) -> Self {
        let code = match err {
            Error::Unstable { .. } => EXIT_UNSTABLE,
            _ => EXIT_USAGE,
        };
        Self {
            stdout: String::new(),
            stderr: format!("error: {err}\n"),
            code,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome::ok(text, code)
            } else {
                Outcome {
                    stdout: String::new(),
                    stderr: text,
                    code,
                }
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return Outcome::fail(&crate::error::invalid("threads", e.to_string())),
    };
    let result = pool.install(|| dispatch(&cli));
    match result {
        Ok((text, code)) => match &cli.out {
            Some(path) => match std::fs::write(path, &text) {
                Ok(()) => Outcome::ok(String::new(), code),
                Err(e) => Outcome::fail(&Error::Io(e)),
            },
            None => Outcome::ok(text, code),
        },
        Err(e) => Outcome::fail(&e),
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| crate::error::invalid("config", "this command needs --config PATH"))?;
    RunConfig::load(path)
}

fn dispatch(cli: &Cli) -> Result<(String, i32)> {
    match &cli.command {
        Command::Report => cmd_report(cli),
        Command::Sweep { variable, grid } => cmd_sweep(cli, variable.as_deref(), grid.as_deref()),
        Command::Stability {
            case,
            gamma_min,
            gamma_max,
            points,
        } => cmd_stability(cli, *case, *gamma_min, *gamma_max, *points),
        Command::Tune {
            balance,
            perturb,
            factors,
        } => cmd_tune(cli, *balance, perturb.as_deref(), factors),
        Command::Validate {
            monte_carlo,
            n_traj,
            dt,
            tau_window,
            inject_fault,
        } => cmd_validate(cli, *monte_carlo, *n_traj, *dt, *tau_window, *inject_fault),
    }
}

fn params_json(cfg: &RunConfig) -> Value {
    let p = &cfg.params;
    json!({
        "n_sites": p.n_sites,
        "hop_w": p.hop_w,
        "drive_delta": p.drive_delta,
        "hop_j": p.hop_j(),
        "amp_a": p.amp_a(),
        "kappa": p.kappa,
        "beta": p.beta,
        "tau": p.tau,
    })
}

fn cmd_report(cli: &Cli) -> Result<(String, i32)> {
    let cfg = load(cli)?;
    let model = cfg.model()?;
    let tol = cli.tol.unwrap_or(CONDITION_TOL);
    // Linear response needs the unperturbed generator to be stable.
    let m = model.generator(0.0)?.to_matrix();
    let stab = stability::analyze(&m, stability::default_tol(&m))?;
    let conditions = model.conditions(tol)?;
    let engine = ResponseEngine::default();
    let (z, y) = (model.loss_matrix()?, model.gain_matrix()?);
    let linear = match engine.snr_per_photon_linear(&model.params, &z, &y, cfg.eps) {
        Ok(r) => Some(r),
        Err(Error::Unstable { .. }) => None,
        Err(e) => return Err(e),
    };
    let beyond = match cfg.eps0 {
        Some(e0) if linear.is_some() => match engine.snr_beyond(&model.params, &z, &y, e0) {
            Ok(r) => Some(r),
            Err(Error::Unstable { .. }) => None,
            Err(e) => return Err(e),
        },
        _ => None,
    };
    let stable = stab.stable && linear.is_some();
    let report = json!({
        "params": params_json(&cfg),
        "eps": cfg.eps,
        "eps0": cfg.eps0,
        "stable": stable,
        "linear": linear,
        "beyond_linear": beyond,
        "conditions": conditions,
        "stability": stab,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    Ok((text, if stable { EXIT_OK } else { EXIT_UNSTABLE }))
}

fn cmd_sweep(cli: &Cli, variable: Option<&str>, grid: Option<&[f64]>) -> Result<(String, i32)> {
    let cfg = load(cli)?;
    let mut spec = match (&cfg.sweep, variable) {
        (_, Some(v)) => SweepSpec {
            variable: SweepVariable::parse(v).ok_or_else(|| crate::error::invalid("variable", format!("unknown sweep variable `{v}`")))?,
            grid: Vec::new(),
            case: CouplingCase::Two,
            beyond_linear: v == "eps0",
        },
        (Some(s), None) => s.clone(),
        (None, None) => {
            return Err(crate::error::invalid("sweep", "no [sweep] section and no --variable given"))
        }
    };
    if let Some(g) = grid {
        spec.grid = g.to_vec();
    } else if variable.is_some() {
        spec.grid = cfg.sweep.as_ref().map(|s| s.grid.clone()).unwrap_or_default();
    }
    SweepSpec::validate_grid(&spec.grid).map_err(|m| crate::error::invalid("grid", m))?;
    let rows = run_sweep(&cfg, &spec, &ResponseEngine::default())?;
    Ok((to_csv(&cfg, &spec, &rows), EXIT_OK))
}

fn cmd_stability(
    cli: &Cli,
    case: u8,
    gamma_min: Option<f64>,
    gamma_max: Option<f64>,
    points: usize,
) -> Result<(String, i32)> {
    let cfg = load(cli)?;
    let p = &cfg.params;
    let case = match case {
        1 => CouplingCase::One,
        2 => CouplingCase::Two,
        _ => return Err(crate::error::invalid("case", "expected 1 or 2")),
    };
    if points == 0 {
        return Err(crate::error::invalid("points", "need at least one point"));
    }
    let (n, a) = (p.n_sites, p.amp_a());
    let b1 = necessary_bound_case1(n, p.hop_j(), a);
    let b2 = necessary_bound_case2(n, p.kappa, a);
    let bound = match case {
        CouplingCase::One => b1.asymptotic,
        CouplingCase::Two => b2.bound,
    };
    let lo = gamma_min.unwrap_or(0.0);
    let hi = gamma_max.unwrap_or(10.0 * bound);
    let gammas: Vec<f64> = if points == 1 {
        vec![lo]
    } else {
        (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
    };
    let scan = stability::gamma_stability_scan(p, case, &gammas)?;
    let mut out = format!(
        "# nhsense {} stability case={} n_sites={} amp_a={:e} case1_exact=[{:e},{:e}] case2_one_sided=[{:e},{:e}]\n",
        env!("CARGO_PKG_VERSION"),
        case.number(),
        n,
        a,
        b1.root_lo,
        b1.root_hi,
        b2.l2_lower,
        b2.r2_upper
    );
    out.push_str("gamma,abscissa_x,abscissa_p,stable,bound_case,bound_value\n");
    for g in scan {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{},{},{:.16e}\n",
            g.gamma,
            g.abscissa_x,
            g.abscissa_p,
            g.stable,
            case.number(),
            bound
        ));
    }
    Ok((out, EXIT_OK))
}

fn cmd_tune(cli: &Cli, balance: bool, perturb: Option<&[usize]>, factors: &[f64]) -> Result<(String, i32)> {
    let cfg = load(cli)?;
    let model = cfg.model()?;
    let tol = cli.tol.unwrap_or(CONDITION_TOL);
    let before = model.conditions(tol)?;
    let repaired = repair_template(&model.loss, &model.params)?;
    let new_loss = repaired.to_template();
    let new_gain = if balance { new_loss.clone() } else { model.gain.clone() };
    let tuned = crate::model::SensorModel::new(model.params, new_loss, new_gain)?;
    let after = tuned.conditions(tol)?;
    let probe = match perturb {
        Some([r, c]) => Some(robustness_probe(&model, *r, *c, factors, cfg.eps)?),
        Some(_) => return Err(crate::error::invalid("perturb", "expected ROW,COL")),
        None => None,
    };
    let out = json!({
        "params": params_json(&cfg),
        "before": before,
        "after": after,
        "repaired_loss": repaired,
        "balanced_gain": if balance { Some(&repaired) } else { None },
        "unchanged": tuned.loss == model.loss,
        "probe": probe,
    });
    Ok((serde_json::to_string_pretty(&out).expect("tune output serializes") + "\n", EXIT_OK))
}

fn cmd_validate(
    cli: &Cli,
    monte_carlo: bool,
    n_traj: Option<usize>,
    dt: Option<f64>,
    tau_window: Option<f64>,
    inject_fault: bool,
) -> Result<(String, i32)> {
    let opts = ValidationOptions {
        tol: cli.tol.unwrap_or(validate::ORACLE_TOL),
        inject_fault,
    };
    let mut checks = validate::oracle_suite(&opts)?;
    checks.extend(validate::timedomain_suite()?);
    let failures = checks.iter().filter(|c| !c.pass).count();
    let mut text = validate::format_table(&checks);
    text.push_str(&format!("# {} checks, {} failures\n", checks.len(), failures));
    let mut ok = failures == 0;
    if monte_carlo {
        let seed = cli.seed.unwrap_or(validate::MC_SEED);
        let results = match &cli.config {
            Some(_) => {
                let cfg = load(cli)?;
                let model = cfg.model()?;
                let m = model.generator(0.0)?.to_matrix();
                let mut ens = TrajectoryEnsemble::for_drift(&m, seed, n_traj.unwrap_or(validate::MC_N_TRAJ))?;
                let burn = ens.burn_in();
                if let Some(d) = dt {
                    ens.dt = d;
                }
                if let Some(w) = tau_window {
                    ens.tau_window = w;
                }
                ens.t_end = burn + ens.tau_window;
                vec![validate::monte_carlo_check(
                    "config",
                    &model.params,
                    &model.loss_matrix()?,
                    &model.gain_matrix()?,
                    &ens,
                )?]
            }
            None => {
                let mut ens = validate::reference_ensemble(seed, n_traj.unwrap_or(validate::MC_N_TRAJ));
                if let Some(d) = dt {
                    ens.dt = d;
                }
                if let Some(w) = tau_window {
                    ens.tau_window = w;
                    ens.t_end = validate::MC_BURN_IN + w;
                }
                validate::monte_carlo_suite(&ens)?
            }
        };
        ok &= results.iter().all(|r| r.pass);
        text.push_str(&serde_json::to_string_pretty(&results).expect("monte carlo output serializes"));
        text.push('\n');
    }
    Ok((text, if ok { EXIT_OK } else { EXIT_VALIDATION }))
}
