//! Scan a symmetric coupling between the chain ends and compare the
//! first unstable strength with the necessary bound.

use nhsense::stability::{analyze, default_tol, gamma_stability_scan, necessary_bound_case2, CouplingCase};
use nhsense::SensorParams;

/// `(bound, smallest unstable gamma on the scan)`.
pub fn run_example() -> nhsense::Result<(f64, Option<f64>)> {
    let p = SensorParams::from_hopping(5, 1.0, 1.0, 10.0, 1.0, 1.0)?;
    let h = nhsense::model::build_h_x(&p);
    let rep = analyze(&h, default_tol(&h))?;
    println!(
        "h^X: abscissa {:.6}, spectral stable {}, Routh verdict {:?}",
        rep.spectral_abscissa, rep.stable, rep.routh_verdict
    );
    let bound = necessary_bound_case2(p.n_sites, p.kappa, p.amp_a());
    let gammas: Vec<f64> = (0..=40).map(|i| bound.bound * 0.05 * i as f64).collect();
    let scan = gamma_stability_scan(&p, CouplingCase::Two, &gammas)?;
    let first = scan.iter().find(|g| !g.stable).map(|g| g.gamma);
    println!("necessary bound kappa e^(-A(N-1)) = {:.6e}", bound.bound);
    match first {
        Some(g) => println!("first unstable gamma on the scan: {g:.6e} ({:.2} x bound)", g / bound.bound),
        None => println!("no instability on the scan"),
    }
    Ok((bound.bound, first))
}

#[allow(dead_code)]
fn main() -> nhsense::Result<()> {
    run_example().map(|_| ())
}
