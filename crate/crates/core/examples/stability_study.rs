//! Lipschitz behaviour of the regularized minimizer in the data: doubling
//! the noise at fixed `N`, then sweeping `N` at fixed noise.

use radcoef::experiments::{manufacture, run_stability_study, InitialDatum, Profile, StabilityConfig};
use radcoef::grid::{Coefficient, Mesh};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = Mesh::new(1.0, 100, 1.0, 1000)?;
    let bench = manufacture(
        Profile::standard_bump(),
        &mesh,
        Coefficient::Quadratic,
        InitialDatum::Constant { value: 1.0 },
        (0.5, 2.0),
    )?;
    let report = run_stability_study(&bench, &StabilityConfig::default())?;
    print!("{}", report.to_csv_string()?);
    println!("doubling factors {:?}", report.doubling_factors);
    for fit in &report.fits {
        println!("{} ~ {}^{:.3}", fit.y, fit.x, fit.slope);
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    Ok(())
}
