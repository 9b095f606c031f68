//! Closed-form inverse elements against dense inversion, with and
//! without a deliberately wrong h^P.

use nhsense::validate::{oracle_suite, ValidationOptions};

/// `(checks, failures, failures with the fault injected)`.
pub fn run_example() -> nhsense::Result<(usize, usize, usize)> {
    let clean = oracle_suite(&ValidationOptions::default())?;
    let worst = clean.iter().map(|c| c.rel_err).fold(0.0, f64::max);
    let failures = clean.iter().filter(|c| !c.pass).count();
    println!("{} checks, {failures} failures, worst relative error {worst:.2e}", clean.len());
    let faulty = oracle_suite(&ValidationOptions {
        inject_fault: true,
        ..Default::default()
    })?;
    let caught = faulty.iter().filter(|c| !c.pass).count();
    println!("with h^P sign fault: {caught} failures, e.g.");
    for c in faulty.iter().filter(|c| !c.pass).take(3) {
        println!("  {}: closed form {:.6e}, numeric {:.6e}", c.element, c.closed_form, c.numeric);
    }
    Ok((clean.len(), failures, caught))
}

#[allow(dead_code)]
fn main() -> nhsense::Result<()> {
    run_example().map(|_| ())
}
