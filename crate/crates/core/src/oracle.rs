// SPDX-License-Identifier: Apache-2.0
//! Closed-form inverse elements of the chain and the generator, used as
//! independent checks on the dense numerical paths.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::params::SensorParams;

/// A real number stored as sign and natural log of its magnitude, so
/// closed forms stay finite past the range of `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLog {
    /// `-1`, `0` or `1`.
    pub sign: i8,
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: Self = Self {
        sign: 0,
        ln_abs: f64::NEG_INFINITY,
    };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: if x > 0.0 { 1 } else { -1 },
                ln_abs: x.abs().ln(),
            }
        }
    }

    /// `sign * e^{ln_abs}`.
    pub fn new(sign: i8, ln_abs: f64) -> Self {
        if sign == 0 {
            Self::ZERO
        } else {
            Self {
                sign: sign.signum(),
                ln_abs,
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        self.sign as f64 * self.ln_abs.exp()
    }

    pub fn powi(self, k: i32) -> Self {
        let sign = if k % 2 == 0 { self.sign.abs() } else { self.sign };
        Self::new(sign, self.ln_abs * k as f64)
    }

    pub fn scale_exp(self, exponent: f64) -> Self {
        Self::new(self.sign, self.ln_abs + exponent)
    }

    pub fn log10_abs(self) -> f64 {
        self.ln_abs / std::f64::consts::LN_10
    }
}

impl std::ops::Mul for SignedLog {
    type Output = Self;
    fn mul(self, other: Self) -> Self {
        Self::new(self.sign * other.sign, self.ln_abs + other.ln_abs)
    }
}

impl std::ops::Div for SignedLog {
    type Output = Self;
    fn div(self, other: Self) -> Self {
        Self::new(self.sign * other.sign, self.ln_abs - other.ln_abs)
    }
}

/// `ln(sum_i e^{x_i})` without overflow.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `T = diag(1, e^A, ..., e^{A(N-1)})`, with `h^X = T h T^-1` and
/// `h^P = T^-1 h T` for `h` the chain at `A = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedTransform {
    pub diag: DVector<f64>,
}

impl BalancedTransform {
    pub fn new(n: usize, amp_a: f64) -> Self {
        Self {
            diag: DVector::from_fn(n, |i, _| (amp_a * i as f64).exp()),
        }
    }

    /// `T m T^-1`.
    pub fn conjugate(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| self.diag[i] * m[(i, j)] / self.diag[j])
    }

    /// `T^-1 m T`.
    pub fn conjugate_inv(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| self.diag[j] * m[(i, j)] / self.diag[i])
    }
}

/// Inverse of the `A = 0` chain by the three-term recurrence, column by
/// column (no factorization involved).
///
/// Requires odd `n`; for even `n` the undamped part is singular on the
/// recursion used here.
pub fn chain_inverse(n: usize, kappa: f64, hop_j: f64) -> Result<DMatrix<f64>> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(invalid("n_sites", "closed-form chain inverse needs odd N >= 3"));
    }
    let mut inv = DMatrix::zeros(n, n);
    for c in 0..n {
        let delta = |i: usize| if i == c { 1.0 } else { 0.0 };
        let mut x = vec![0.0; n + 1];
        // Rows n-1, n-3, ..., 2 fix the odd (0-based) entries.
        let mut i = n - 1;
        while i >= 2 {
            x[i - 1] = x[i + 1] + delta(i) / hop_j;
            i -= 2;
        }
        x[0] = -(2.0 / kappa) * (delta(0) + hop_j * x[1]);
        // Rows 1, 3, ..., n-2 fix the even entries.
        let mut i = 1;
        while i + 1 < n {
            x[i + 1] = x[i - 1] - delta(i) / hop_j;
            i += 2;
        }
        for r in 0..n {
            inv[(r, c)] = x[r];
        }
    }
    Ok(inv)
}

/// First column of the `A = 0` chain inverse: `-2/kappa` on odd sites,
/// zero on even ones.
pub fn h_inverse_first_column(n: usize, kappa: f64) -> Result<DVector<f64>> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(invalid("n_sites", "closed-form first column needs odd N >= 3"));
    }
    Ok(DVector::from_fn(n, |i, _| if i % 2 == 0 { -2.0 / kappa } else { 0.0 }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sector {
    X,
    P,
}

impl Sector {
    fn exponent(self, i: usize, j: usize, amp_a: f64) -> f64 {
        let d = i as f64 - j as f64;
        match self {
            Sector::X => amp_a * d,
            Sector::P => -amp_a * d,
        }
    }
}

/// `(h^X)^-1_{ij} = h^-1_{ij} e^{A(i-j)}`, `(h^P)^-1_{ij} = h^-1_{ij} e^{A(j-i)}`
/// (1-based `i`, `j`).
pub fn scaled_inverse_element(h_inv_elem: f64, i: usize, j: usize, amp_a: f64, which: Sector) -> f64 {
    h_inv_elem * which.exponent(i, j, amp_a).exp()
}

/// [`scaled_inverse_element`] in log space.
pub fn scaled_inverse_element_log(
    h_inv_elem: f64,
    i: usize,
    j: usize,
    amp_a: f64,
    which: Sector,
) -> SignedLog {
    SignedLog::from_f64(h_inv_elem).scale_exp(which.exponent(i, j, amp_a))
}

/// First-order Dyson approximant `G - G H_N G` of `H[eps]^-1`, with
/// `G = blockdiag(q_x, q_p)`.
pub fn dyson_first_order(h_x_inv: &DMatrix<f64>, h_p_inv: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let n = h_x_inv.nrows();
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    g.view_mut((0, 0), (n, n)).copy_from(h_x_inv);
    g.view_mut((n, n), (n, n)).copy_from(h_p_inv);
    let mut hn = DMatrix::zeros(2 * n, 2 * n);
    hn[(n - 1, 2 * n - 1)] = eps;
    hn[(2 * n - 1, n - 1)] = -eps;
    &g - &g * hn * &g
}

/// `eps q_x[N,1] q_p[1,N]`, the leading term of `H[eps]^-1_{N+1,1}`.
pub fn dyson_signal_element(h_x_inv: &DMatrix<f64>, h_p_inv: &DMatrix<f64>, eps: f64) -> f64 {
    let n = h_x_inv.nrows();
    eps * h_x_inv[(n - 1, 0)] * h_p_inv[(0, n - 1)]
}

/// Result of summing the geometric series for one element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesElement {
    pub value: f64,
    /// Orders of `eps0` summed.
    pub terms: usize,
}

/// All-orders expansion of `H[eps0]^-1` for the noiseless (or balanced)
/// chain, summed in the balanced coordinates where both blocks equal `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeyondLinearSeries {
    h_inv: DMatrix<f64>,
    eps0: f64,
    amp_a: f64,
    truncation_tol: f64,
}

/// Hard cap on summed orders.
pub const SERIES_MAX_TERMS: usize = 200;

impl BeyondLinearSeries {
    /// `h_inv` is the inverse of the `A = 0` chain. Fails when
    /// `|eps0 h^-1_{NN}| >= 1`.
    pub fn new(h_inv: DMatrix<f64>, eps0: f64, amp_a: f64, truncation_tol: f64) -> Result<Self> {
        let n = h_inv.nrows();
        let ratio = (eps0 * h_inv[(n - 1, n - 1)]).abs();
        if !(ratio < 1.0) {
            return Err(Error::DivergentSeries { ratio });
        }
        Ok(Self {
            h_inv,
            eps0,
            amp_a,
            truncation_tol,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.h_inv.nrows()
    }

    /// Entry of `blockdiag(h^-1, h^-1)` (0-based).
    fn g(&self, r: usize, c: usize) -> f64 {
        let n = self.n_sites();
        match (r < n, c < n) {
            (true, true) => self.h_inv[(r, c)],
            (false, false) => self.h_inv[(r - n, c - n)],
            _ => 0.0,
        }
    }

    /// `ln s_r` for the coordinate change `H^-1 = S Ht^-1 S^-1`.
    fn ln_s(&self, r: usize) -> f64 {
        let n = self.n_sites();
        if r < n {
            self.amp_a * r as f64
        } else {
            -self.amp_a * (r - n) as f64
        }
    }

    /// `H[eps0]^-1_{r,c}` (1-based, `1..=2N`).
    pub fn element(&self, r: usize, c: usize) -> SeriesElement {
        let n = self.n_sites();
        let (r, c) = (r - 1, c - 1);
        let (nn, n2) = (n - 1, 2 * n - 1);
        let e = self.eps0;
        let gnn = self.h_inv[(nn, nn)];
        let big = 2.0 * self.amp_a * (n as f64 - 1.0);
        let even = self.g(r, nn) * self.g(nn, c) + self.g(r, n2) * self.g(n2, c);
        let odd_a = -self.g(r, nn) * self.g(n2, c) * (-big).exp();
        let odd_b = self.g(r, n2) * self.g(nn, c) * big.exp();

        let mut sum = self.g(r, c);
        let mut terms = 1;
        // Order eps^{2k+1}: (-1)^k eps^{2k+1} g^{2k} (odd_a + odd_b)
        // Order eps^{2k}:   (-1)^k eps^{2k} g^{2k-1} even, k >= 1
        let mut pw = 1.0; // (-1)^k (eps g)^{2k}
        for k in 0..SERIES_MAX_TERMS {
            let t_odd = pw * e * (odd_a + odd_b);
            let next = -pw * (e * gnn) * (e * gnn);
            let t_even = if gnn != 0.0 { next / gnn * even } else { 0.0 };
            let step = t_odd + t_even;
            sum += step;
            terms = 2 * k + 3;
            if step.abs() <= self.truncation_tol * sum.abs() || (step == 0.0 && k > 0) {
                break;
            }
            pw = next;
        }
        SeriesElement {
            value: sum * (self.ln_s(r) - self.ln_s(c)).exp(),
            terms,
        }
    }
}

/// `H[eps0]^-1_{1,1} = -(2/kappa) / (1 + 4 eps0^2 / kappa^2)`.
pub fn closed_form_h11(kappa: f64, eps0: f64) -> f64 {
    -(2.0 / kappa) / (1.0 + 4.0 * eps0 * eps0 / (kappa * kappa))
}

/// Row `N+1` of `H[eps0]^-1` for the noiseless (or balanced) chain,
/// split into X-sector entries `i = 1..N` and P-sector entries `N+i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowElements {
    pub x_sector: Vec<f64>,
    pub p_sector: Vec<f64>,
}

pub fn first_row_elements(p: &SensorParams, eps0: f64) -> Result<RowElements> {
    let n = p.n_sites;
    let k = p.kappa;
    if !(2.0 * eps0.abs() / k < 1.0) {
        return Err(Error::DivergentSeries {
            ratio: 2.0 * eps0.abs() / k,
        });
    }
    let h = chain_inverse(n, k, p.hop_j())?;
    let a = p.amp_a();
    let g = 1.0 / (1.0 + 4.0 * eps0 * eps0 / (k * k));
    let x_sector = (1..=n)
        .map(|i| -(2.0 * eps0 / k) * h[(n - 1, i - 1)] * g * (a * (2 * n - 1 - i) as f64).exp())
        .collect();
    let p_sector = (1..=n)
        .map(|i| (h[(n - 1, i - 1)] * (g - 1.0) + h[(0, i - 1)]) * (a * (i - 1) as f64).exp())
        .collect();
    Ok(RowElements { x_sector, p_sector })
}

/// `log10(SNR_per_photon / (tau eps^2))` of the noiseless chain:
/// `(16/kappa) e^{4A(N-1)} / sum_{k=0}^{(N-1)/2} e^{4Ak}`.
pub fn ideal_log10_normalized_snr(n: usize, kappa: f64, amp_a: f64) -> f64 {
    let ln = 16f64.ln() - kappa.ln() + 4.0 * amp_a * (n as f64 - 1.0)
        - log_sum_exp((0..=(n - 1) / 2).map(|k| 4.0 * amp_a * k as f64));
    ln / std::f64::consts::LN_10
}

/// `2 eps^2 kappa^2 beta^2 tau (2/kappa)^4 e^{4A(N-1)}`.
pub fn ideal_signal_power(p: &SensorParams, eps: f64) -> SignedLog {
    let k = p.kappa;
    let pre = 2.0 * eps * eps * k * k * p.beta * p.beta * p.tau * (2.0 / k).powi(4);
    SignedLog::from_f64(pre).scale_exp(4.0 * p.amp_a() * (p.n_sites as f64 - 1.0))
}

/// `kappa beta^2 (4/kappa^2) sum_{odd n} e^{2A(n-1)}`.
pub fn ideal_n_tot(p: &SensorParams) -> SignedLog {
    let k = p.kappa;
    let pre = k * p.beta * p.beta * 4.0 / (k * k);
    let lse = log_sum_exp((0..p.n_sites).step_by(2).map(|m| 2.0 * p.amp_a() * m as f64));
    SignedLog::from_f64(pre).scale_exp(lse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_chain;

    #[test]
    fn first_column_values() {
        let c = h_inverse_first_column(3, 10.0).unwrap();
        assert_eq!(c.as_slice(), &[-0.2, 0.0, -0.2]);
        let c = h_inverse_first_column(5, 4.0).unwrap();
        assert_eq!(c.as_slice(), &[-0.5, 0.0, -0.5, 0.0, -0.5]);
        assert!(h_inverse_first_column(4, 4.0).is_err());
    }

    #[test]
    fn recurrence_matches_dense_inverse() {
        for n in [3, 5, 7, 9] {
            let h = build_chain(n, 10.0, 1.3, 0.0);
            let dense = h.clone().try_inverse().unwrap();
            let rec = chain_inverse(n, 10.0, 1.3).unwrap();
            assert!((&dense - &rec).amax() < 1e-12, "n = {n}");
            let col = h_inverse_first_column(n, 10.0).unwrap();
            assert!((dense.column(0) - col).amax() < 1e-14);
        }
    }

    #[test]
    fn element_scaling() {
        let (n, k, a) = (5usize, 10.0, 0.8);
        let h = chain_inverse(n, k, 1.0).unwrap();
        let x = scaled_inverse_element(h[(n - 1, 0)], n, 1, a, Sector::X);
        let pp = scaled_inverse_element(h[(0, n - 1)], 1, n, a, Sector::P);
        let want = -(2.0 / k) * (a * (n - 1) as f64).exp();
        assert!((x - want).abs() < 1e-14 * want.abs());
        assert!((pp - want).abs() < 1e-14 * want.abs());
        assert_eq!(scaled_inverse_element(0.3, 2, 2, a, Sector::X), 0.3);
    }

    #[test]
    fn log_representation_survives_overflow() {
        let l = scaled_inverse_element_log(-0.2, 401, 1, 2.0, Sector::X);
        assert_eq!(l.sign, -1);
        assert!((l.ln_abs - (0.2f64.ln() + 800.0)).abs() < 1e-12);
        assert!(l.to_f64().is_infinite());
        let v = ideal_log10_normalized_snr(201, 10.0, 2.0);
        assert!(v.is_finite() && v > 300.0);
        assert!((log_sum_exp([1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn series_closed_form_h11() {
        assert_eq!(closed_form_h11(10.0, 0.0), -0.2);
        assert!((closed_form_h11(10.0, 1.0) + 0.2 / 1.04).abs() < 1e-16);
        let h = chain_inverse(3, 10.0, 1.0).unwrap();
        let s = BeyondLinearSeries::new(h, 1.0, 0.5, 1e-16).unwrap();
        let e = s.element(1, 1);
        assert!((e.value - closed_form_h11(10.0, 1.0)).abs() < 1e-15);
        assert!(BeyondLinearSeries::new(chain_inverse(3, 10.0, 1.0).unwrap(), 5.0, 0.5, 1e-16).is_err());
    }

    #[test]
    fn ideal_series_helpers() {
        let p = SensorParams::from_hopping(3, 1.0, 1.0, 10.0, 2.0, 3.0).unwrap();
        let nt = ideal_n_tot(&p).to_f64();
        assert!((nt - 10.0 * 4.0 * 4.0 / 100.0 * (1.0 + 4f64.exp())).abs() < 1e-12 * nt);
        let s = ideal_signal_power(&p, 1e-3).to_f64();
        let want = 2e-6 * 100.0 * 4.0 * 3.0 * 0.2f64.powi(4) * 8f64.exp();
        assert!((s - want).abs() < 1e-12 * want);
    }
}
