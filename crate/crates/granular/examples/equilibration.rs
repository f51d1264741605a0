//! Heated near-elastic gas relaxing toward its steady temperature.
//!
//! Runs a 2-D Maxwell-kernel gas with restitution e = 0.95 and heat-bath
//! strength tau = 0.05, then prints the numerical temperature against the
//! closed-form relaxation law
//!
//!   T(t) = (T0 - T_inf) exp(-rho0 (1-e^2) t / 4) + T_inf,
//!   T_inf = 8 tau / (1 - e^2).
//!
//! Takes about 20 seconds.

use granular::diagnostics::analytic_temperature;
use granular::grid::GridSpec;
use granular::integrator::{run, Method, SolverConfig};
use granular::physics::{InitialCondition, KernelSpec, RestitutionModel};

fn main() -> granular::Result<()> {
    let grid = GridSpec::new(2, 32, 10.0)?;
    let e = 0.95;
    let tau = 0.05;
    let config = SolverConfig {
        tau,
        dt: 0.01,
        t_final: 10.0,
        method: Method::Fast,
        output_every: 100,
        ..SolverConfig::default()
    };
    let ic = InitialCondition::Maxwellian2D {
        rho0: 1.0,
        u0: [0.0, 0.0],
        t0: 8.0,
    };
    let output = run(
        grid,
        &KernelSpec::maxwell_2d(),
        &RestitutionModel::Constant { e },
        &ic,
        &config,
    )?;

    println!("heated Maxwell gas, e = {e}, tau = {tau}");
    println!("{:>6} {:>12} {:>12} {:>10}", "t", "T(num)", "T(law)", "rel err");
    for record in &output.trajectory {
        let law = analytic_temperature(record.time, 1.0, 8.0, e, tau)?;
        let rel = (record.moments.temperature - law).abs() / law;
        println!(
            "{:>6.2} {:>12.6} {:>12.6} {:>10.2e}",
            record.time, record.moments.temperature, law, rel
        );
    }
    let t_inf = 8.0 * tau / (1.0 - e * e);
    println!("steady temperature T_inf = {t_inf:.6} (reached around t = 190)");
    Ok(())
}
