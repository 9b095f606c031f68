//! Noiseless chain at the reference parameters: sensing report against
//! the closed-form figure of merit.

use nhsense::oracle::ideal_log10_normalized_snr;
use nhsense::scenarios::Scenario;

pub fn run_example() -> nhsense::Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::new();
    for a in [0.0, 1.0, 2.0, 3.0, 4.0, 5.0] {
        let model = Scenario::Ideal.reference(a)?;
        let r = model.linear_report(1e-3)?;
        let exact = ideal_log10_normalized_snr(3, model.params.kappa, a);
        println!(
            "A = {a:.1}  noise = {:.12}  log10(SNR/(tau eps^2)) = {:.6}  closed form = {:.6}",
            r.noise, r.log10_snr_per_photon_normalized, exact
        );
        rows.push((a, r.log10_snr_per_photon_normalized, exact));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> nhsense::Result<()> {
    run_example().map(|_| ())
}
