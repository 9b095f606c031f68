//! Check the loss conditions for Z1, repair it toward C1, add balanced
//! gain, and compare the figure of merit at each step.

use nhsense::conditions::{repair_template, CONDITION_TOL};
use nhsense::scenarios::Scenario;
use nhsense::SensorModel;

pub struct TuningSummary {
    pub ideal: f64,
    pub z1: f64,
    pub repaired: f64,
    pub repaired_balanced: f64,
}

pub fn run_example() -> nhsense::Result<TuningSummary> {
    let a = 3.0;
    let z1 = Scenario::Z1.reference(a)?;
    let before = z1.conditions(CONDITION_TOL)?;
    println!("Z1: c1 residual {:.3e} (holds: {})", before.c1.residual, before.c1.holds);

    let repaired = repair_template(&z1.loss, &z1.params)?;
    println!("repaired template: {}", serde_json::to_string(&repaired).expect("serializes"));
    let fixed = SensorModel::new(z1.params, repaired.to_template(), z1.gain.clone())?;
    let after = fixed.conditions(CONDITION_TOL)?;
    println!("repaired: c1 residual {:.3e} (holds: {})", after.c1.residual, after.c1.holds);

    let balanced = SensorModel::balanced(z1.params, repaired.to_template())?;
    let eps = 1e-3;
    let s = TuningSummary {
        ideal: Scenario::Ideal.reference(a)?.linear_report(eps)?.log10_snr_per_photon_normalized,
        z1: z1.linear_report(eps)?.log10_snr_per_photon_normalized,
        repaired: fixed.linear_report(eps)?.log10_snr_per_photon_normalized,
        repaired_balanced: balanced.linear_report(eps)?.log10_snr_per_photon_normalized,
    };
    println!(
        "log10 figure of merit at A = {a}: ideal {:.4}, Z1 {:.4}, repaired {:.4}, repaired + balanced gain {:.4}",
        s.ideal, s.z1, s.repaired, s.repaired_balanced
    );
    Ok(s)
}

#[allow(dead_code)]
fn main() -> nhsense::Result<()> {
    run_example().map(|_| ())
}
