//! Classification of several model/kernel/weight combinations.

use coagfrag::{
    becker_doring_model, classify_assumptions, uniform_binary_model, CoagulationKernel, KernelShape, Rates,
    TimeProfile, WeightSequence,
};

fn main() -> coagfrag::Result<()> {
    let grid = [0.0, 0.5, 1.0];
    let rates = Rates::Power { scale: 1.0, exponent: 1.0, monomer: 0.0 };
    let cases = [
        ("BD, k = 1, w = n", becker_doring_model(), CoagulationKernel::constant(1.0), WeightSequence::power(1.0)?, 0.0),
        ("BD, k = 1, w = 3^n", becker_doring_model(), CoagulationKernel::constant(1.0), WeightSequence::geometric(3.0)?, 0.0),
        ("BD, k = nj, w = n", becker_doring_model(), CoagulationKernel::new(KernelShape::ProductCapped { cap: f64::MAX }, 1.0, TimeProfile::Constant)?, WeightSequence::power(1.0)?, 0.0),
        (
            "binary, k = (1+a)^0.5 (1+a)^0.5, w = 2.5^n, alpha 0.5",
            uniform_binary_model(rates.clone())?,
            CoagulationKernel::new(KernelShape::RatePower { rates, exponent: 0.5 }, 1.0, TimeProfile::Constant)?,
            WeightSequence::geometric(2.5)?,
            0.5,
        ),
    ];
    for (name, model, kernel, w, alpha) in cases {
        let r = classify_assumptions(&model, &kernel, &w, alpha, 256, &grid)?;
        println!("{name}");
        println!("  case {}  kappa_J {:.6}  c_J {:.6}", r.case, r.kappa_j, r.coag_constant_c);
        for reason in &r.reasons {
            println!("  reason: {reason}");
        }
    }
    Ok(())
}
