//! Fragmentation dissipativity constants `κ_J` for the built-in daughter
//! distributions, plus a search for weights that make them strictly below one.

use coagfrag::weights::analytic_kappa;
use coagfrag::{find_kappa_certificate, kappa_estimate, Daughters, WeightFamily, WeightSequence};

fn main() -> coagfrag::Result<()> {
    let j = 2000;
    let families = [
        ("becker-doring", Daughters::BeckerDoring),
        ("uniform binary", Daughters::UniformBinary),
        ("power law x^0", Daughters::PowerLaw { nu: 0.0 }),
        ("power law x^1", Daughters::PowerLaw { nu: 1.0 }),
    ];
    let weights = [
        ("n", WeightSequence::power(1.0)?),
        ("n^2", WeightSequence::power(2.0)?),
        ("3^n", WeightSequence::geometric(3.0)?),
    ];
    println!("kappa_J for J = {j} (closed-form supremum in brackets)");
    for (name, b) in &families {
        let mut line = format!("{name:>16}:");
        for (wname, w) in &weights {
            let k = kappa_estimate(b, w, j)?;
            let sup = analytic_kappa(b, w).map_or(String::new(), |s| format!(" [{s:.4}]"));
            line += &format!("  w={wname} {k:.6}{sup}");
        }
        println!("{line}");
    }

    println!("\nsmallest grid weight with kappa <= 0.9:");
    for (name, b) in &families {
        for family in [WeightFamily::Power, WeightFamily::Geometric] {
            match find_kappa_certificate(b, family, j, 0.9) {
                Some(c) => println!("{name:>16} {family:?}: parameter {} gives kappa_J = {:.6}", c.parameter, c.kappa_j),
                None => println!("{name:>16} {family:?}: none on the grid"),
            }
        }
    }
    Ok(())
}
