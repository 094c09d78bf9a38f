//! Noise-level study with `N = delta` and pinned endpoints; prints the
//! table and the fitted log-log slopes.

use radcoef::experiments::{manufacture, run_convergence_study, ConvergenceConfig, InitialDatum, Profile};
use radcoef::grid::{Coefficient, Mesh};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = Mesh::new(1.0, 100, 1.0, 1000)?;
    let bench = manufacture(
        Profile::Parabola { base: 1.0, height: 0.3 },
        &mesh,
        Coefficient::Quadratic,
        InitialDatum::Constant { value: 1.0 },
        (0.5, 2.0),
    )?;
    let report = run_convergence_study(&bench, &ConvergenceConfig::default())?;
    print!("{}", report.to_csv_string()?);
    for fit in &report.fits {
        println!("{} ~ {}^{:.3} (rms log residual {:.2e})", fit.y, fit.x, fit.slope, fit.residual);
    }
    Ok(())
}
