// SPDX-License-Identifier: Apache-2.0
//! The three-site reference scenario: `kappa = 10`, `w = 1e5`,
//! `J = w 2e^A / (e^{2A} + 1)` and two loss baths scaled by `alpha`.

use crate::model::SensorModel;
use crate::params::SensorParams;
use crate::template::{CouplingTemplate, TemplateEntry};
use crate::Result;

pub const REF_KAPPA: f64 = 10.0;
pub const REF_HOP_W: f64 = 1e5;
pub const REF_ALPHA: f64 = 0.5;

fn t(c: f64, m: i32) -> TemplateEntry {
    TemplateEntry::new(c, m)
}

fn build(alpha: f64, rows: [[TemplateEntry; 2]; 3]) -> CouplingTemplate {
    let rows: Vec<Vec<TemplateEntry>> = rows.iter().map(|r| r.to_vec()).collect();
    CouplingTemplate::from_rows(&rows)
        .expect("3x2 template")
        .scaled(alpha)
}

/// `alpha [[-e^A, -e^A], [0, 1], [e^-A, 0]]`; violates C1.
pub fn loss_z1(alpha: f64) -> CouplingTemplate {
    build(
        alpha,
        [[t(-1.0, 1), t(-1.0, 1)], [t(0.0, 0), t(1.0, 0)], [t(1.0, -1), t(0.0, 0)]],
    )
}

/// `alpha [[-e^A, 0], [0, 1], [e^-A, e^-A]]`; violates C1.
pub fn loss_z2(alpha: f64) -> CouplingTemplate {
    build(
        alpha,
        [[t(-1.0, 1), t(0.0, 0)], [t(0.0, 0), t(1.0, 0)], [t(1.0, -1), t(1.0, -1)]],
    )
}

/// `alpha [[-e^A, -e^A], [0, 1], [e^-A, e^-A]]`; satisfies C1.
pub fn loss_tuned(alpha: f64) -> CouplingTemplate {
    build(
        alpha,
        [[t(-1.0, 1), t(-1.0, 1)], [t(0.0, 0), t(1.0, 0)], [t(1.0, -1), t(1.0, -1)]],
    )
}

/// Reference parameters at amplification `amp_a` (`beta = tau = 1`).
pub fn reference_params(amp_a: f64) -> Result<SensorParams> {
    SensorParams::from_hop_w_and_amp(3, REF_HOP_W, amp_a, REF_KAPPA, 1.0, 1.0)
}

/// Named loss/gain combinations of the reference scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Ideal,
    Z1,
    Z2,
    /// C1 only, no gain.
    Tuned,
    /// C1 and C2: tuned loss with `Y = Z`.
    TunedBalanced,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [Self::Ideal, Self::Z1, Self::Z2, Self::Tuned, Self::TunedBalanced];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ideal => "ideal",
            Self::Z1 => "z1",
            Self::Z2 => "z2",
            Self::Tuned => "tuned",
            Self::TunedBalanced => "tuned_balanced",
        }
    }

    pub fn model(self, params: SensorParams, alpha: f64) -> Result<SensorModel> {
        let n = params.n_sites;
        let none = CouplingTemplate::empty(n);
        match self {
            Self::Ideal => Ok(SensorModel::ideal(params)),
            Self::Z1 => SensorModel::new(params, loss_z1(alpha), none),
            Self::Z2 => SensorModel::new(params, loss_z2(alpha), none),
            Self::Tuned => SensorModel::new(params, loss_tuned(alpha), none),
            Self::TunedBalanced => SensorModel::balanced(params, loss_tuned(alpha)),
        }
    }

    pub fn reference(self, amp_a: f64) -> Result<SensorModel> {
        self.model(reference_params(amp_a)?, REF_ALPHA)
    }
}
