//! Run the randomized property checks, then again against a deliberately
//! broken explicit scheme to show the suite catching it.

use radcoef::experiments::{run_property_suite, PropertySuite};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for inject_fault in [false, true] {
        let report = run_property_suite(&PropertySuite { seed: 7, inject_fault, ..Default::default() })?;
        println!("inject_fault = {inject_fault}: {}", if report.passed() { "all passed" } else { "FAILED" });
        for c in &report.checks {
            println!(
                "  {:<22} {:>3}/{:<3} worst {:.2e} (tol {:.0e})",
                c.name,
                c.trials - c.failures,
                c.trials,
                c.worst,
                c.tolerance
            );
        }
    }
    Ok(())
}
