//! Beyond-linear figure of merit approaching linear response as the
//! perturbation shrinks, for the noiseless and the balanced tuned chain.

use nhsense::response::snr_beyond;
use nhsense::scenarios::{loss_tuned, REF_ALPHA};
use nhsense::{SensorModel, SensorParams};

/// `(eps0 / kappa, beyond / linear)` for the noiseless chain.
pub fn run_example() -> nhsense::Result<Vec<(f64, f64)>> {
    let p = SensorParams::from_hopping(3, 1.0, 0.5, 10.0, 1.0, 1.0)?;
    let ideal = SensorModel::ideal(p);
    let linear = ideal.linear_report(1.0)?.log10_snr_per_photon_normalized;
    let mut out = Vec::new();
    for ratio in [1e-1, 1e-2, 1e-3, 1e-4] {
        let r = ideal.beyond_report(ratio * p.kappa)?;
        let rel = 10f64.powf(r.log10_snr_per_photon_normalized - linear);
        println!("eps0/kappa = {ratio:.0e}: beyond/linear = {rel:.10}");
        out.push((ratio, rel));
    }
    let balanced = SensorModel::balanced(p, loss_tuned(REF_ALPHA))?;
    let (z, y) = (balanced.loss_matrix()?, balanced.gain_matrix()?);
    let r = snr_beyond(&p, &z, &y, 0.1)?;
    println!("balanced tuned loss, eps0 = 0.1: noise {:.12}", r.noise);
    Ok(out)
}

#[allow(dead_code)]
fn main() -> nhsense::Result<()> {
    run_example().map(|_| ())
}
