// SPDX-License-Identifier: Apache-2.0
//! Physical parameters of the driven chain.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default cap on `A*(N-1)`; above it dense solves are refused.
pub const DEFAULT_CONDITIONING_CAP: f64 = 30.0;

/// Hopping strength `J` and amplification factor `A` derived from `(w, Delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub hop_j: f64,
    pub amp_a: f64,
}

/// Which pair of inputs is held fixed when `A` is swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    /// `w` fixed, `Delta = w tanh A`, so `J = w / cosh A`.
    FixedHopW,
    /// `J` fixed, `w = J cosh A`, `Delta = J sinh A`.
    FixedHopJ,
}

/// Sensor parameters. Construct through [`SensorParams::new`] or
/// [`SensorParams::from_hopping`]; both validate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensorParams {
    pub n_sites: usize,
    pub hop_w: f64,
    pub drive_delta: f64,
    pub kappa: f64,
    pub beta: f64,
    pub tau: f64,
    hop_j: f64,
    amp_a: f64,
    parameterization: Parameterization,
}

/// `J = sqrt(w^2 - Delta^2)`, `A = atanh(Delta / w)`.
pub fn derive_params(hop_w: f64, drive_delta: f64) -> Result<DerivedParams> {
    if !(hop_w.is_finite() && drive_delta.is_finite()) {
        return Err(Error::NonFinite("hop_w/drive_delta"));
    }
    if drive_delta < 0.0 {
        return Err(invalid("drive_delta", "must be >= 0"));
    }
    if hop_w <= drive_delta {
        return Err(invalid(
            "hop_w",
            format!("need hop_w > drive_delta (got {hop_w} <= {drive_delta}); amplification undefined"),
        ));
    }
    let hop_j = ((hop_w - drive_delta) * (hop_w + drive_delta)).sqrt();
    let amp_a = (drive_delta / hop_w).atanh();
    Ok(DerivedParams { hop_j, amp_a })
}

fn check_common(n_sites: usize, kappa: f64, beta: f64, tau: f64) -> Result<()> {
    if n_sites < 3 || n_sites.is_multiple_of(2) {
        return Err(invalid(
            "n_sites",
            format!("must be odd and >= 3 (got {n_sites}); even chains are not supported"),
        ));
    }
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(invalid("kappa", "must be finite and > 0"));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(invalid("beta", "must be finite and >= 0"));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid("tau", "must be finite and > 0"));
    }
    Ok(())
}

impl SensorParams {
    /// From the bare hopping `w` and the nonreciprocal drive `Delta`.
    pub fn new(
        n_sites: usize,
        hop_w: f64,
        drive_delta: f64,
        kappa: f64,
        beta: f64,
        tau: f64,
    ) -> Result<Self> {
        check_common(n_sites, kappa, beta, tau)?;
        let d = derive_params(hop_w, drive_delta)?;
        Ok(Self {
            n_sites,
            hop_w,
            drive_delta,
            kappa,
            beta,
            tau,
            hop_j: d.hop_j,
            amp_a: d.amp_a,
            parameterization: Parameterization::FixedHopW,
        })
    }

    /// From `(J, A)` directly.
    pub fn from_hopping(
        n_sites: usize,
        hop_j: f64,
        amp_a: f64,
        kappa: f64,
        beta: f64,
        tau: f64,
    ) -> Result<Self> {
        check_common(n_sites, kappa, beta, tau)?;
        if !(hop_j.is_finite() && hop_j > 0.0) {
            return Err(invalid("hop_j", "must be finite and > 0"));
        }
        if !(amp_a.is_finite() && amp_a >= 0.0) {
            return Err(invalid("amp_a", "must be finite and >= 0"));
        }
        Ok(Self {
            n_sites,
            hop_w: hop_j * amp_a.cosh(),
            drive_delta: hop_j * amp_a.sinh(),
            kappa,
            beta,
            tau,
            hop_j,
            amp_a,
            parameterization: Parameterization::FixedHopJ,
        })
    }

    /// Bare hopping `w` held fixed while `A` varies: `J = w / cosh A`.
    ///
    /// Equivalently `J = w * 2e^A / (e^{2A} + 1)`.
    pub fn from_hop_w_and_amp(
        n_sites: usize,
        hop_w: f64,
        amp_a: f64,
        kappa: f64,
        beta: f64,
        tau: f64,
    ) -> Result<Self> {
        if !(amp_a.is_finite() && amp_a >= 0.0) {
            return Err(invalid("amp_a", "must be finite and >= 0"));
        }
        if !(hop_w.is_finite() && hop_w > 0.0) {
            return Err(invalid("hop_w", "must be finite and > 0"));
        }
        check_common(n_sites, kappa, beta, tau)?;
        Ok(Self {
            n_sites,
            hop_w,
            drive_delta: hop_w * amp_a.tanh(),
            kappa,
            beta,
            tau,
            hop_j: hop_w / amp_a.cosh(),
            amp_a,
            parameterization: Parameterization::FixedHopW,
        })
    }

    pub fn derived(&self) -> DerivedParams {
        DerivedParams {
            hop_j: self.hop_j,
            amp_a: self.amp_a,
        }
    }

    pub fn hop_j(&self) -> f64 {
        self.hop_j
    }

    pub fn amp_a(&self) -> f64 {
        self.amp_a
    }

    pub fn parameterization(&self) -> Parameterization {
        self.parameterization
    }

    /// `A*(N-1)`, the exponent governing the condition number.
    pub fn conditioning_exponent(&self) -> f64 {
        self.amp_a * (self.n_sites - 1) as f64
    }

    pub fn check_conditioning(&self, cap: f64) -> Result<()> {
        let value = self.conditioning_exponent();
        if value > cap {
            return Err(Error::IllConditioned { value, cap });
        }
        Ok(())
    }

    /// Same sensor at a different `A`, holding `w` or `J` according to
    /// how these parameters were built.
    pub fn with_amp_a(&self, amp_a: f64) -> Result<Self> {
        match self.parameterization {
            Parameterization::FixedHopW => Self::from_hop_w_and_amp(
                self.n_sites,
                self.hop_w,
                amp_a,
                self.kappa,
                self.beta,
                self.tau,
            ),
            Parameterization::FixedHopJ => Self::from_hopping(
                self.n_sites,
                self.hop_j,
                amp_a,
                self.kappa,
                self.beta,
                self.tau,
            ),
        }
    }

    pub fn with_n_sites(&self, n_sites: usize) -> Result<Self> {
        match self.parameterization {
            Parameterization::FixedHopW => Self::from_hop_w_and_amp(
                n_sites,
                self.hop_w,
                self.amp_a,
                self.kappa,
                self.beta,
                self.tau,
            ),
            Parameterization::FixedHopJ => Self::from_hopping(
                n_sites,
                self.hop_j,
                self.amp_a,
                self.kappa,
                self.beta,
                self.tau,
            ),
        }
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        check_common(self.n_sites, self.kappa, beta, self.tau)?;
        Ok(Self { beta, ..*self })
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        check_common(self.n_sites, kappa, self.beta, self.tau)?;
        Ok(Self { kappa, ..*self })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn reciprocal_limit() {
        let d = derive_params(5.0, 0.0).unwrap();
        assert_eq!(d.hop_j, 5.0);
        assert_eq!(d.amp_a, 0.0);
    }

    #[test]
    fn five_three_gives_four_ln2() {
        let d = derive_params(5.0, 3.0).unwrap();
        assert!(rel(d.hop_j, 4.0) < 1e-15);
        assert!(rel(d.amp_a, 2f64.ln()) < 1e-15);
    }

    #[test]
    fn figure_parameterization_round_trips() {
        let a = 2.0f64;
        let j = 1e5 * 2.0 * a.exp() / ((2.0 * a).exp() + 1.0);
        let p = SensorParams::from_hopping(3, j, a, 10.0, 1.0, 1.0).unwrap();
        let d = derive_params(p.hop_w, p.drive_delta).unwrap();
        assert!(rel(d.amp_a, a) < 1e-12);
        assert!(rel(d.hop_j, j) < 1e-12);
        assert!(rel(p.hop_w, 1e5) < 1e-12);

        let q = SensorParams::from_hop_w_and_amp(3, 1e5, a, 10.0, 1.0, 1.0).unwrap();
        assert!(rel(q.hop_j(), j) < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(derive_params(3.0, 3.0).is_err());
        assert!(derive_params(3.0, 4.0).is_err());
        assert!(SensorParams::new(4, 5.0, 3.0, 1.0, 1.0, 1.0).is_err());
        assert!(SensorParams::new(1, 5.0, 3.0, 1.0, 1.0, 1.0).is_err());
        assert!(SensorParams::new(3, 5.0, 3.0, 0.0, 1.0, 1.0).is_err());
        assert!(SensorParams::new(3, 5.0, 3.0, 1.0, -1.0, 1.0).is_err());
        assert!(SensorParams::new(3, 5.0, 3.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn conditioning_cap() {
        let p = SensorParams::from_hopping(7, 1.0, 5.1, 10.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            p.check_conditioning(DEFAULT_CONDITIONING_CAP),
            Err(Error::IllConditioned { .. })
        ));
        assert!(p.check_conditioning(31.0).is_ok());
    }

    #[test]
    fn sweeping_a_keeps_the_right_quantity() {
        let p = SensorParams::from_hop_w_and_amp(3, 1e5, 1.0, 10.0, 1.0, 1.0).unwrap();
        let q = p.with_amp_a(3.0).unwrap();
        assert_eq!(q.hop_w, 1e5);
        let p = SensorParams::from_hopping(3, 2.0, 1.0, 10.0, 1.0, 1.0).unwrap();
        let q = p.with_amp_a(3.0).unwrap();
        assert_eq!(q.hop_j(), 2.0);
    }
}
