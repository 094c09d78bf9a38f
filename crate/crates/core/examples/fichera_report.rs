//! Classify the sides of the space-time rectangle for several principal
//! coefficients and show which boundary treatment each one calls for.

use radcoef::fichera::{classify_rectangle, FicheraOperator, Side};
use radcoef::grid::{Coefficient, Mesh};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = Mesh::new(1.0, 100, 1.0, 100)?;
    let catalog = [
        Coefficient::Quadratic,
        Coefficient::Power { alpha: 2.0, beta: 1.5 },
        Coefficient::Power { alpha: 0.5, beta: 0.5 },
        Coefficient::Constant { value: 0.3 },
    ];
    for coefficient in catalog {
        let report = classify_rectangle(&FicheraOperator::for_coefficient(coefficient, 1.0), &mesh)?;
        println!("{coefficient:?}");
        for side in [Side::Left, Side::Right, Side::Initial, Side::Terminal] {
            println!("  {side:?}: {:?}", report.class_of(side));
        }
        println!("  treatment: {:?}", report.recommendation);
        for note in &report.notes {
            println!("  note: {note}");
        }
    }
    Ok(())
}
