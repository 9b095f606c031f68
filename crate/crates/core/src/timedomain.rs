// SPDX-License-Identifier: Apache-2.0
//! Dynamical oracles: mean-field ODE integration, the stationary
//! covariance from a Lyapunov equation, and seeded Euler-Maruyama
//! ensembles of the quadrature Langevin equations
//!
//! `dq = (M q - drive) dt - L dW`,
//!
//! where each channel of `dW` is vacuum white noise with
//! `<dW dW> = dt / 2`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, inf_norm, spectral_abscissa};
use crate::model::{assemble_generator, build_noise_input_map, NoiseInputMap, QuadratureGenerator};
use crate::params::SensorParams;
use crate::stability::STABILITY_TOL_REL;

/// Drift, diffusion and drive of the linear Langevin system.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionModel {
    pub drift: DMatrix<f64>,
    /// `L L^T / 2`.
    pub diffusion: DMatrix<f64>,
    pub drive: DVector<f64>,
}

impl DiffusionModel {
    pub fn new(gen: &QuadratureGenerator, noise: &NoiseInputMap) -> Result<Self> {
        if noise.matrix.nrows() != gen.dim() {
            return Err(crate::error::mismatch("DiffusionModel", gen.dim(), noise.matrix.nrows()));
        }
        Ok(Self {
            drift: gen.to_matrix(),
            diffusion: 0.5 * &noise.matrix * noise.matrix.transpose(),
            drive: gen.drive.clone(),
        })
    }

    pub fn from_params(p: &SensorParams, z: &DMatrix<f64>, y: &DMatrix<f64>, eps: f64) -> Result<Self> {
        Self::new(&assemble_generator(p, z, y, eps)?, &build_noise_input_map(p, z, y)?)
    }
}

fn require_stable(m: &DMatrix<f64>) -> Result<f64> {
    let a = spectral_abscissa(m)?;
    let tol = STABILITY_TOL_REL * inf_norm(m);
    if a < -tol {
        Ok(a)
    } else {
        Err(Error::Unstable { abscissa: a, tol })
    }
}

/// Largest number of RK4 steps before giving up.
pub const ODE_MAX_STEPS: usize = 5_000_000;

/// Integrates `dq/dt = M q - drive` from `q = 0` with classical RK4
/// until `||M q - drive|| < tol ||drive||`.
pub fn steady_mean_ode(gen: &QuadratureGenerator, tol: f64) -> Result<DVector<f64>> {
    integrate_mean(&gen.to_matrix(), &gen.drive, tol)
}

/// [`steady_mean_ode`] for an explicit drift and drive.
pub fn integrate_mean(m: &DMatrix<f64>, drive: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    let norm = inf_norm(m);
    if norm == 0.0 {
        return Err(Error::NoConvergence("zero drift matrix".into()));
    }
    let h = 0.5 / norm;
    let target = tol * drive.norm().max(f64::MIN_POSITIVE);
    let f = |q: &DVector<f64>| m * q - drive;
    let mut q = DVector::zeros(drive.len());
    for step in 0..ODE_MAX_STEPS {
        let k1 = f(&q);
        if k1.norm() < target {
            return Ok(q);
        }
        if !k1.iter().all(|v| v.is_finite()) || q.amax() > 1e150 {
            return Err(Error::NoConvergence(format!("mean diverged after {step} steps")));
        }
        let k2 = f(&(&q + 0.5 * h * &k1));
        let k3 = f(&(&q + 0.5 * h * &k2));
        let k4 = f(&(&q + h * &k3));
        q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Err(Error::NoConvergence(format!(
        "mean not stationary after {ODE_MAX_STEPS} steps (horizon {:.3e})",
        ODE_MAX_STEPS as f64 * h
    )))
}

/// Stationary symmetrized covariance: `M S + S M^T + D = 0`, solved in
/// Kronecker form. With this convention a single damped vacuum mode has
/// variance 1/2.
pub fn lyapunov_covariance(dm: &DiffusionModel) -> Result<DMatrix<f64>> {
    let m = &dm.drift;
    require_stable(m)?;
    let n = m.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(m) + m.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, dm.diffusion.iter().map(|v| -v));
    let sol = linalg::solve_vec_checked(&k, &rhs, "Lyapunov", linalg::RESIDUAL_TOL)?;
    let s = DMatrix::from_column_slice(n, n, sol.as_slice());
    let s = 0.5 * (&s + s.transpose());
    let residual = lyapunov_residual(dm, &s);
    if residual > linalg::RESIDUAL_TOL {
        return Err(Error::Residual {
            context: "Lyapunov",
            residual,
            tol: linalg::RESIDUAL_TOL,
        });
    }
    Ok(s)
}

/// `||M S + S M^T + D||_F / ||D||_F`.
pub fn lyapunov_residual(dm: &DiffusionModel, s: &DMatrix<f64>) -> f64 {
    let r = &dm.drift * s + s * dm.drift.transpose() + &dm.diffusion;
    r.norm() / dm.diffusion.norm().max(f64::MIN_POSITIVE)
}

/// Ensemble settings. The temporal mode is integrated over the last
/// `tau_window` of `[0, t_end]`; the rest is burn-in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub seed: u64,
    pub n_traj: usize,
    pub dt: f64,
    pub t_end: f64,
    pub tau_window: f64,
}

/// Burn-in in units of the slowest relaxation time `1/|abscissa|`.
pub const BURN_IN_RELAXATIONS: f64 = 20.0;
/// Default window in units of the slowest relaxation time.
pub const WINDOW_RELAXATIONS: f64 = 500.0;

impl TrajectoryEnsemble {
    /// Defaults from the drift: `dt = 0.01 / ||M||_inf`, burn-in
    /// `20/|a|`, window `500/|a|`.
    pub fn for_drift(m: &DMatrix<f64>, seed: u64, n_traj: usize) -> Result<Self> {
        let a = require_stable(m)?;
        let relax = 1.0 / a.abs();
        let tau_window = WINDOW_RELAXATIONS * relax;
        Ok(Self {
            seed,
            n_traj,
            dt: 0.01 / inf_norm(m),
            t_end: BURN_IN_RELAXATIONS * relax + tau_window,
            tau_window,
        })
    }

    pub fn burn_in(&self) -> f64 {
        self.t_end - self.tau_window
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj < 2 {
            return Err(invalid("n_traj", "need at least 2 trajectories"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be finite and > 0"));
        }
        if !(self.tau_window > 0.0 && self.tau_window <= self.t_end) {
            return Err(invalid("tau_window", "need 0 < tau_window <= t_end"));
        }
        if self.tau_window / self.dt < 2.0 {
            return Err(invalid("tau_window", "window shorter than two steps"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    /// Variance of the temporal-mode observable at step `dt`.
    pub estimate: f64,
    pub std_error: f64,
    /// Same Brownian paths integrated at `dt / 2`.
    pub estimate_half_step: f64,
    /// `2 V(tau) - V(tau/2)` on the `dt / 2` paths, cancelling the
    /// leading `1/tau` bias. `V(tau/2)` averages both halves of the window.
    pub tau_extrapolated: f64,
    pub tau_extrapolated_std_error: f64,
    /// Ensemble mean of `q` at `t_end`.
    pub mean_state: Vec<f64>,
    pub n_traj: usize,
    pub dt: f64,
    pub tau_window: f64,
    pub burn_in: f64,
}

/// Sparse row storage used in the inner loop.
struct Csr {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Csr {
    fn new(m: &DMatrix<f64>) -> Self {
        Self {
            rows: (0..m.nrows())
                .map(|i| (0..m.ncols()).filter(|&j| m[(i, j)] != 0.0).map(|j| (j, m[(i, j)])).collect())
                .collect(),
        }
    }

    fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, a)| a * v[j]).sum()
    }
}

struct Kernel {
    drift: Csr,
    noise: Csr,
    drive: Vec<f64>,
    q0: Vec<f64>,
    /// Index of the site-1 P quadrature.
    p1: usize,
    sqrt_kappa: f64,
    channels: usize,
}

impl Kernel {
    /// One Euler-Maruyama step `q += (M q - drive) h - L dw`.
    fn step(&self, q: &mut [f64], scratch: &mut [f64], dw: &[f64], h: f64) {
        for (i, s) in scratch.iter_mut().enumerate().take(q.len()) {
            *s = (self.drift.row_dot(i, q) - self.drive[i]) * h - self.noise.row_dot(i, dw);
        }
        for (x, d) in q.iter_mut().zip(scratch.iter()) {
            *x += d;
        }
    }
}

struct TrajectoryOut {
    coarse: f64,
    fine: f64,
    first_half: f64,
    second_half: f64,
    final_state: Vec<f64>,
}

fn run_trajectory(k: &Kernel, ens: &TrajectoryEnsemble, index: u64) -> TrajectoryOut {
    let mut rng = ChaCha8Rng::seed_from_u64(ens.seed);
    rng.set_stream(index);
    let n_steps = (ens.t_end / ens.dt).round() as usize;
    let window = (ens.tau_window / ens.dt).round() as usize;
    let start = n_steps - window;
    let half_start = n_steps - window / 2;
    let h = ens.dt;
    let sd_half = (0.25 * h).sqrt(); // each half-step increment has variance dt/4
    let d = k.q0.len();
    let (mut qc, mut qf) = (k.q0.clone(), k.q0.clone());
    let mut scratch = vec![0.0; d];
    let (mut a, mut b, mut sum) = (vec![0.0; k.channels], vec![0.0; k.channels], vec![0.0; k.channels]);
    let (mut acc_c, mut acc_f, mut acc_h1, mut acc_h2) = (0.0, 0.0, 0.0, 0.0);
    for s in 0..n_steps {
        for c in 0..k.channels {
            a[c] = sd_half * rng.sample::<f64, _>(StandardNormal);
            b[c] = sd_half * rng.sample::<f64, _>(StandardNormal);
            sum[c] = a[c] + b[c];
        }
        let in_window = s >= start;
        let mut inc_f = 0.0;
        if in_window {
            acc_c += sum[1] + k.sqrt_kappa * qc[k.p1] * h;
            inc_f += a[1] + k.sqrt_kappa * qf[k.p1] * 0.5 * h;
        }
        k.step(&mut qc, &mut scratch, &sum, h);
        k.step(&mut qf, &mut scratch, &a, 0.5 * h);
        if in_window {
            inc_f += b[1] + k.sqrt_kappa * qf[k.p1] * 0.5 * h;
            acc_f += inc_f;
            if s >= half_start {
                acc_h2 += inc_f;
            } else {
                acc_h1 += inc_f;
            }
        }
        k.step(&mut qf, &mut scratch, &b, 0.5 * h);
    }
    let tau = window as f64 * h;
    let tau_second = (n_steps - half_start) as f64 * h;
    let tau_first = tau - tau_second;
    TrajectoryOut {
        coarse: acc_c / tau.sqrt(),
        fine: acc_f / tau.sqrt(),
        first_half: acc_h1 / tau_first.sqrt(),
        second_half: acc_h2 / tau_second.sqrt(),
        final_state: qc,
    }
}

/// Sample variance and its standard error from the fourth central moment.
pub fn variance_with_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    let var_of_var = ((m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n).max(0.0);
    (var, var_of_var.sqrt())
}

/// `2 Var(x) - (Var(y1) + Var(y2)) / 2` with a delta-method standard
/// error from the per-trajectory contributions.
pub fn richardson(x: &[f64], y1: &[f64], y2: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (mx, m1, m2) = (mean(x), mean(y1), mean(y2));
    let u: Vec<f64> = (0..x.len())
        .map(|i| 2.0 * (x[i] - mx).powi(2) - 0.5 * ((y1[i] - m1).powi(2) + (y2[i] - m2).powi(2)))
        .collect();
    let mu = mean(&u);
    let var_u = u.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0);
    (mu * n / (n - 1.0), (var_u / n).sqrt())
}

/// Noise power of the optimal observable at `eps = 0`, estimated from an
/// ensemble of trajectories.
///
/// Every trajectory draws from its own ChaCha8 stream (`seed`, stream =
/// trajectory index), so results do not depend on scheduling. The same
/// Brownian path is also integrated at `dt/2`; if the two estimates
/// differ by more than one standard error the step is rejected.
pub fn monte_carlo_noise_power(
    p: &SensorParams,
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    ens: &TrajectoryEnsemble,
) -> Result<MonteCarloEstimate> {
    ens.validate()?;
    let gen = assemble_generator(p, z, y, 0.0)?;
    let noise = build_noise_input_map(p, z, y)?;
    let m = gen.to_matrix();
    require_stable(&m)?;
    let em = DMatrix::<f64>::identity(m.nrows(), m.ncols()) + &m * ens.dt;
    let radius = linalg::eigenvalues(&em)?.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if radius >= 1.0 {
        return Err(Error::StepTooCoarse(format!(
            "Euler-Maruyama is unstable at dt = {:.3e} (spectral radius {radius:.6})",
            ens.dt
        )));
    }
    let q0 = linalg::solve_vec_checked(&m, &gen.drive, "Monte Carlo initial mean", linalg::RESIDUAL_TOL)?;
    let kernel = Kernel {
        drift: Csr::new(&m),
        noise: Csr::new(&noise.matrix),
        drive: gen.drive.iter().copied().collect(),
        q0: q0.iter().copied().collect(),
        p1: p.n_sites,
        sqrt_kappa: p.kappa.sqrt(),
        channels: noise.channels(),
    };
    let outs: Vec<TrajectoryOut> = (0..ens.n_traj as u64)
        .into_par_iter()
        .map(|i| run_trajectory(&kernel, ens, i))
        .collect();

    let coarse: Vec<f64> = outs.iter().map(|o| o.coarse).collect();
    let fine: Vec<f64> = outs.iter().map(|o| o.fine).collect();
    let first: Vec<f64> = outs.iter().map(|o| o.first_half).collect();
    let second: Vec<f64> = outs.iter().map(|o| o.second_half).collect();
    let (estimate, std_error) = variance_with_error(&coarse);
    let (estimate_half_step, _) = variance_with_error(&fine);
    let (tau_extrapolated, tau_extrapolated_std_error) = richardson(&fine, &first, &second);
    if (estimate - estimate_half_step).abs() >= std_error {
        return Err(Error::StepTooCoarse(format!(
            "halving dt moved the estimate from {estimate:.6} to {estimate_half_step:.6} (std error {std_error:.2e})"
        )));
    }
    let d = kernel.q0.len();
    let mut mean_state = vec![0.0; d];
    for o in &outs {
        for (m, v) in mean_state.iter_mut().zip(&o.final_state) {
            *m += v;
        }
    }
    for m in &mut mean_state {
        *m /= ens.n_traj as f64;
    }
    Ok(MonteCarloEstimate {
        estimate,
        std_error,
        estimate_half_step,
        tau_extrapolated,
        tau_extrapolated_std_error,
        mean_state,
        n_traj: ens.n_traj,
        dt: ens.dt,
        tau_window: ens.tau_window,
        burn_in: ens.burn_in(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::steady_state_mean;

    #[test]
    fn scalar_fixed_point() {
        let m = -DMatrix::<f64>::identity(1, 1);
        let drive = DVector::from_vec(vec![1.0]);
        let q = integrate_mean(&m, &drive, 1e-12).unwrap();
        assert!((q[0] + 1.0).abs() < 1e-11);
    }

    #[test]
    fn ode_matches_linear_solve() {
        let p = SensorParams::from_hopping(3, 1.0, 0.6, 10.0, 1.0, 1.0).unwrap();
        let z = DMatrix::zeros(3, 0);
        let gen = assemble_generator(&p, &z, &z, 0.05).unwrap();
        let q = steady_mean_ode(&gen, 1e-11).unwrap();
        let exact = steady_state_mean(&p, &z, &z, 0.05).unwrap();
        assert!((q - &exact).amax() < 1e-8 * exact.amax());
    }

    #[test]
    fn ode_diverges_when_unstable() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -1.0]);
        let drive = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(integrate_mean(&m, &drive, 1e-10), Err(Error::NoConvergence(_))));
    }

    #[test]
    fn single_mode_vacuum_variance() {
        let kappa: f64 = 3.0;
        let dm = DiffusionModel {
            drift: DMatrix::from_element(1, 1, -kappa / 2.0),
            diffusion: DMatrix::from_element(1, 1, 0.5 * kappa),
            drive: DVector::zeros(1),
        };
        let s = lyapunov_covariance(&dm).unwrap();
        assert!((s[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn passive_chain_is_vacuum() {
        let p = SensorParams::from_hopping(5, 1.3, 0.0, 10.0, 1.0, 1.0).unwrap();
        let z = DMatrix::zeros(5, 0);
        let dm = DiffusionModel::from_params(&p, &z, &z, 0.0).unwrap();
        let s = lyapunov_covariance(&dm).unwrap();
        assert!((s - 0.5 * DMatrix::<f64>::identity(10, 10)).amax() < 1e-10);
        assert!(lyapunov_residual(&dm, &lyapunov_covariance(&dm).unwrap()) < 1e-9);
    }

    #[test]
    fn variance_error_of_known_sample() {
        let xs = [1.0, -1.0, 1.0, -1.0];
        let (v, se) = variance_with_error(&xs);
        assert!((v - 4.0 / 3.0).abs() < 1e-15);
        assert!(se >= 0.0);
    }

    #[test]
    fn ensemble_is_reproducible() {
        let p = SensorParams::from_hopping(3, 3.0, 1.0, 10.0, 1.0, 1.0).unwrap();
        let z = DMatrix::zeros(3, 0);
        let ens = TrajectoryEnsemble {
            seed: 7,
            n_traj: 64,
            dt: 0.02,
            t_end: 30.0,
            tau_window: 20.0,
        };
        let a = monte_carlo_noise_power(&p, &z, &z, &ens).unwrap();
        let b = monte_carlo_noise_power(&p, &z, &z, &ens).unwrap();
        assert_eq!(a, b);
        assert!(a.estimate > 0.2 && a.estimate < 1.0);
    }

    #[test]
    fn coarse_step_rejected() {
        let p = SensorParams::from_hopping(3, 3.0, 1.0, 10.0, 1.0, 1.0).unwrap();
        let z = DMatrix::zeros(3, 0);
        let ens = TrajectoryEnsemble {
            seed: 7,
            n_traj: 8,
            dt: 1.0,
            t_end: 30.0,
            tau_window: 20.0,
        };
        assert!(matches!(
            monte_carlo_noise_power(&p, &z, &z, &ens),
            Err(Error::StepTooCoarse(_))
        ));
    }
}
