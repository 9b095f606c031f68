// SPDX-License-Identifier: Apache-2.0
//! Steady states, signal and noise power, photon number and SNR per photon.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, inf_norm, solve_checked, solve_vec_checked};
use crate::model::{assemble_generator, build_h_p, build_h_x, net_noise, SensorModel};
use crate::params::{SensorParams, DEFAULT_CONDITIONING_CAP};
use crate::stability::STABILITY_TOL_REL;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    /// Largest accepted `A*(N-1)`.
    pub conditioning_cap: f64,
    /// Normalized residual accepted for every factorized solve.
    pub residual_tol: f64,
    /// Stability requires abscissa `< -stability_tol_rel * ||M||_inf`.
    pub stability_tol_rel: f64,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            conditioning_cap: DEFAULT_CONDITIONING_CAP,
            residual_tol: linalg::RESIDUAL_TOL,
            stability_tol_rel: STABILITY_TOL_REL,
        }
    }
}

/// `q_x = (h^X + YY^T - ZZ^T)^-1`, `q_p = (h^P + YY^T - ZZ^T)^-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationMatrices {
    pub q_x: DMatrix<f64>,
    pub q_p: DMatrix<f64>,
}

impl InformationMatrices {
    pub fn n_sites(&self) -> usize {
        self.q_x.nrows()
    }

    /// `q_x[N,1]`, the end-to-end X-sector response.
    pub fn qx_n1(&self) -> f64 {
        self.q_x[(self.n_sites() - 1, 0)]
    }

    /// `q_p[1,N]`.
    pub fn qp_1n(&self) -> f64 {
        self.q_p[(0, self.n_sites() - 1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Linear,
    BeyondLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingReport {
    pub signal: f64,
    pub noise: f64,
    pub n_tot: f64,
    pub snr: f64,
    pub snr_per_photon: f64,
    /// `log10(SNR_per_photon / (tau eps^2))`, accumulated in log space.
    pub log10_snr_per_photon_normalized: f64,
    pub regime: Regime,
    pub stable: bool,
}

/// Response computations with configurable tolerances.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ResponseEngine {
    pub opts: EngineOptions,
}

fn require_stable(m: &DMatrix<f64>, tol_rel: f64) -> Result<()> {
    let a = linalg::spectral_abscissa(m)?;
    let tol = tol_rel * inf_norm(m);
    if a < -tol {
        Ok(())
    } else {
        Err(Error::Unstable { abscissa: a, tol })
    }
}

/// Squared norm of `row * B` for `B` with columns as baths.
fn weighted_sq(row: &DVector<f64>, b: &DMatrix<f64>) -> f64 {
    (b.transpose() * row).norm_squared()
}

/// Pieces of one generator inverse needed beyond linear response.
struct InverseProbe {
    /// `H^-1_{N+1,1}`.
    g_n1_1: f64,
    /// `sum_i (H^-1_{i,1})^2` over all `2N` rows.
    col1_sq: f64,
    /// Noise power with this generator (the general form).
    noise: f64,
}

impl ResponseEngine {
    pub fn new(opts: EngineOptions) -> Self {
        Self { opts }
    }

    fn preflight(&self, p: &SensorParams) -> Result<()> {
        p.check_conditioning(self.opts.conditioning_cap)
    }

    pub fn information_matrices(
        &self,
        p: &SensorParams,
        z: &DMatrix<f64>,
        y: &DMatrix<f64>,
    ) -> Result<InformationMatrices> {
        self.preflight(p)?;
        let w = net_noise(z, y)?;
        if z.nrows() != p.n_sites {
            return Err(crate::error::mismatch("information_matrices", p.n_sites, z.nrows()));
        }
        let mx = build_h_x(p) + &w;
        let mp = build_h_p(p) + &w;
        require_stable(&mx, self.opts.stability_tol_rel)?;
        require_stable(&mp, self.opts.stability_tol_rel)?;
        Ok(InformationMatrices {
            q_x: linalg::inverse_checked(&mx, "q_x", self.opts.residual_tol)?,
            q_p: linalg::inverse_checked(&mp, "q_p", self.opts.residual_tol)?,
        })
    }

    /// Solves `H[eps] q = drive`.
    pub fn steady_state_mean(
        &self,
        p: &SensorParams,
        z: &DMatrix<f64>,
        y: &DMatrix<f64>,
        eps: f64,
    ) -> Result<DVector<f64>> {
        self.preflight(p)?;
        let g = assemble_generator(p, z, y, eps)?;
        let h = g.to_matrix();
        require_stable(&h, self.opts.stability_tol_rel)?;
        solve_vec_checked(&h, &g.drive, "steady state", self.opts.residual_tol)
    }

    fn probe(
        &self,
        p: &SensorParams,
        z: &DMatrix<f64>,
        y: &DMatrix<f64>,
        eps: f64,
    ) -> Result<InverseProbe> {
        let n = p.n_sites;
        let h = assemble_generator(p, z, y, eps)?.to_matrix();
        require_stable(&h, self.opts.stability_tol_rel)?;
        let mut e1 = DMatrix::zeros(2 * n, 1);
        e1[(0, 0)] = 1.0;
        let col = solve_checked(&h, &e1, "H^-1 column 1", self.opts.residual_tol)?;
        let mut en = DMatrix::zeros(2 * n, 1);
        en[(n, 0)] = 1.0;
        let row = solve_checked(&h.transpose(), &en, "H^-1 row N+1", self.opts.residual_tol)?;
        let rx: DVector<f64> = row.view((0, 0), (n, 1)).column(0).into_owned();
        let rp: DVector<f64> = row.view((n, 0), (n, 1)).column(0).into_owned();
        let k = p.kappa;
        let bath = weighted_sq(&rx, y) + weighted_sq(&rp, y) + weighted_sq(&rx, z) + weighted_sq(&rp, z);
        let noise = 0.5 * (k * row[(0, 0)]).powi(2) + 0.5 * (1.0 + k * row[(n, 0)]).powi(2) + k * bath;
        Ok(InverseProbe {
            g_n1_1: row[(0, 0)],
            col1_sq: col.norm_squared(),
            noise,
        })
    }

    pub fn signal_power_beyond(
        &self,
        p: &SensorParams,
        z: &DMatrix<f64>,
        y: &DMatrix<f64>,
        eps0: f64,
    ) -> Result<f64> {
        self.preflight(p)?;
        let at0 = self.probe(p, z, y, 0.0)?;
        let at = self.probe(p, z, y, eps0)?;
        Ok(beyond_signal(p, at.g_n1_1 - at0.g_n1_1))
    }

    /// Average of the noise powers at `0` and `eps0`.
    pub fn noise_power_beyond(
        &self,
        p: &SensorParams,
        z: &DMatrix<f64>,
        y: &DMatrix<f64>,
        eps0: f64,
    ) -> Result<f64> {
        self.preflight(p)?;
        let at0 = self.probe(p, z, y, 0.0)?;
        let at = self.probe(p, z, y, eps0)?;
        Ok(0.5 * (at0.noise + at.noise))
    }

    pub fn snr_per_photon_linear(
        &self,
        p: &SensorParams,
        z: &DMatrix<f64>,
        y: &DMatrix<f64>,
        eps: f64,
    ) -> Result<SensingReport> {
        if p.beta == 0.0 {
            return Err(Error::ZeroPhotonDrive);
        }
        let im = self.information_matrices(p, z, y)?;
        let signal = signal_power_linear(p, &im, eps);
        let noise = noise_power_linear(p, &im, z, y);
        let n_tot = n_tot_linear(p, &im);
        let col_sq: f64 = im.q_x.column(0).norm_squared();
        let ln_norm = 2f64.ln() + p.kappa.ln() + 2.0 * im.qx_n1().abs().ln() + 2.0 * im.qp_1n().abs().ln()
            - noise.ln()
            - col_sq.ln();
        let snr = signal / noise;
        Ok(SensingReport {
            signal,
            noise,
            n_tot,
            snr,
            snr_per_photon: snr / n_tot,
            log10_snr_per_photon_normalized: ln_norm / std::f64::consts::LN_10,
            regime: Regime::Linear,
            stable: true,
        })
    }

    pub fn snr_beyond(
        &self,
        p: &SensorParams,
        z: &DMatrix<f64>,
        y: &DMatrix<f64>,
        eps0: f64,
    ) -> Result<SensingReport> {
        self.preflight(p)?;
        if p.beta == 0.0 {
            return Err(Error::ZeroPhotonDrive);
        }
        if !(eps0.is_finite() && eps0 != 0.0) {
            return Err(crate::error::invalid("eps0", "must be finite and nonzero"));
        }
        let at0 = self.probe(p, z, y, 0.0)?;
        let at = self.probe(p, z, y, eps0)?;
        let dg = at.g_n1_1 - at0.g_n1_1;
        let signal = beyond_signal(p, dg);
        let noise = 0.5 * (at0.noise + at.noise);
        let photon_factor = 0.5 * (at0.col1_sq + at.col1_sq);
        let n_tot = p.kappa * p.beta * p.beta * photon_factor;
        // signal / (noise n_tot tau eps0^2) = 2 kappa dg^2 / (eps0^2 noise factor)
        let ln_norm = 2f64.ln() + p.kappa.ln() + 2.0 * (dg.abs().ln() - eps0.abs().ln())
            - noise.ln()
            - photon_factor.ln();
        let snr = signal / noise;
        Ok(SensingReport {
            signal,
            noise,
            n_tot,
            snr,
            snr_per_photon: signal / (noise * n_tot),
            log10_snr_per_photon_normalized: ln_norm / std::f64::consts::LN_10,
            regime: Regime::BeyondLinear,
            stable: true,
        })
    }
}

fn beyond_signal(p: &SensorParams, dg: f64) -> f64 {
    2.0 * p.tau * p.kappa * p.kappa * p.beta * p.beta * dg * dg
}

/// `2 eps^2 kappa^2 beta^2 tau q_x[N,1]^2 q_p[1,N]^2`.
pub fn signal_power_linear(p: &SensorParams, im: &InformationMatrices, eps: f64) -> f64 {
    let k = p.kappa;
    2.0 * eps * eps * k * k * p.beta * p.beta * p.tau * im.qx_n1().powi(2) * im.qp_1n().powi(2)
}

/// `1/2 (1 + kappa q_p[1,1])^2 + kappa [q_p (YY^T + ZZ^T) q_p^T]_{1,1}`.
pub fn noise_power_linear(
    p: &SensorParams,
    im: &InformationMatrices,
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> f64 {
    let row: DVector<f64> = im.q_p.row(0).transpose();
    let k = p.kappa;
    0.5 * (1.0 + k * im.q_p[(0, 0)]).powi(2) + k * (weighted_sq(&row, y) + weighted_sq(&row, z))
}

/// `kappa beta^2 sum_n q_x[n,1]^2`.
pub fn n_tot_linear(p: &SensorParams, im: &InformationMatrices) -> f64 {
    p.kappa * p.beta * p.beta * im.q_x.column(0).norm_squared()
}

pub fn information_matrices(
    p: &SensorParams,
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<InformationMatrices> {
    ResponseEngine::default().information_matrices(p, z, y)
}

pub fn steady_state_mean(
    p: &SensorParams,
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    eps: f64,
) -> Result<DVector<f64>> {
    ResponseEngine::default().steady_state_mean(p, z, y, eps)
}

pub fn snr_per_photon_linear(
    p: &SensorParams,
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    eps: f64,
) -> Result<SensingReport> {
    ResponseEngine::default().snr_per_photon_linear(p, z, y, eps)
}

pub fn signal_power_beyond(p: &SensorParams, z: &DMatrix<f64>, y: &DMatrix<f64>, eps0: f64) -> Result<f64> {
    ResponseEngine::default().signal_power_beyond(p, z, y, eps0)
}

pub fn noise_power_beyond(p: &SensorParams, z: &DMatrix<f64>, y: &DMatrix<f64>, eps0: f64) -> Result<f64> {
    ResponseEngine::default().noise_power_beyond(p, z, y, eps0)
}

pub fn snr_beyond(p: &SensorParams, z: &DMatrix<f64>, y: &DMatrix<f64>, eps0: f64) -> Result<SensingReport> {
    ResponseEngine::default().snr_beyond(p, z, y, eps0)
}

impl SensorModel {
    pub fn information_matrices(&self) -> Result<InformationMatrices> {
        information_matrices(&self.params, &self.loss_matrix()?, &self.gain_matrix()?)
    }

    pub fn linear_report(&self, eps: f64) -> Result<SensingReport> {
        snr_per_photon_linear(&self.params, &self.loss_matrix()?, &self.gain_matrix()?, eps)
    }

    pub fn beyond_report(&self, eps0: f64) -> Result<SensingReport> {
        snr_beyond(&self.params, &self.loss_matrix()?, &self.gain_matrix()?, eps0)
    }

    pub fn steady_state_mean(&self, eps: f64) -> Result<DVector<f64>> {
        steady_state_mean(&self.params, &self.loss_matrix()?, &self.gain_matrix()?, eps)
    }
}
