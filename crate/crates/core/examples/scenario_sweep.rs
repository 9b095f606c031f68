//! Figure of merit against A for the reference scenarios, with unstable
//! points left blank.

use nhsense::scenarios::Scenario;
use nhsense::Error;

/// `(A, [ideal, Z1, Z2, tuned])`; `None` marks unstable points.
pub fn run_example() -> nhsense::Result<Vec<(f64, [Option<f64>; 4])>> {
    let scenarios = [Scenario::Ideal, Scenario::Z1, Scenario::Z2, Scenario::Tuned];
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "A", "ideal", "Z1", "Z2", "tuned");
    let mut rows = Vec::new();
    for k in 0..=10 {
        let a = 0.5 * k as f64;
        let mut vals = [None; 4];
        for (v, sc) in vals.iter_mut().zip(scenarios) {
            *v = match sc.reference(a)?.linear_report(1e-3) {
                Ok(r) => Some(r.log10_snr_per_photon_normalized),
                Err(Error::Unstable { .. }) => None,
                Err(e) => return Err(e),
            };
        }
        let cell = |v: Option<f64>| v.map_or_else(|| "unstable".to_string(), |x| format!("{x:.4}"));
        println!(
            "{a:>5.1} {:>10} {:>10} {:>10} {:>10}",
            cell(vals[0]),
            cell(vals[1]),
            cell(vals[2]),
            cell(vals[3])
        );
        rows.push((a, vals));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> nhsense::Result<()> {
    run_example().map(|_| ())
}
