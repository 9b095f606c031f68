//! Time-domain check of the noise power: a small seeded ensemble of
//! Langevin trajectories against the steady-state formula.

use nhsense::timedomain::TrajectoryEnsemble;
use nhsense::validate::{monte_carlo_check, monte_carlo_params, MonteCarloCheck, MC_ALPHA};
use nhsense::scenarios::Scenario;

pub fn run_example() -> nhsense::Result<Vec<MonteCarloCheck>> {
    let p = monte_carlo_params()?;
    let ens = TrajectoryEnsemble {
        seed: 11,
        n_traj: 1000,
        dt: 0.04,
        t_end: 130.0,
        tau_window: 100.0,
    };
    let mut out = Vec::new();
    for sc in [Scenario::Ideal, Scenario::Z1] {
        let m = sc.model(p, MC_ALPHA)?;
        let c = monte_carlo_check(sc.name(), &p, &m.loss_matrix()?, &m.gain_matrix()?, &ens)?;
        println!(
            "{:<8} estimate {:.4} +- {:.4}  analytic {:.4}  z = {:+.2}",
            c.case, c.estimate, c.std_error, c.analytic, c.z_score
        );
        out.push(c);
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> nhsense::Result<()> {
    run_example().map(|_| ())
}
