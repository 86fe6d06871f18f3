//! Laplace exponent, drift coefficient and the Cramér-type value that decides
//! whether the process leaves zero continuously.

use ssmp::measures::{
    cramer_value, drift_coefficient, folded_triplet, laplace_exponent, Density, JumpMeasureSpec, LevyTriplet,
    Quintuple,
};

fn main() -> ssmp::Result<()> {
    let pi = JumpMeasureSpec::zero().with_density(Density::exponential(1.0, 2.0));
    let q = Quintuple::new(
        LevyTriplet::new(0.1, 0.5, pi, 0.05)?,
        JumpMeasureSpec::atom(-0.5, 0.5).with_atom(-1.0, 0.2),
    )?;
    for lam in [0.0, 0.5, 1.0, 2.0] {
        println!("Psi({lam}) = {:.6}", laplace_exponent(&q.triplet, lam)?);
    }
    let k = cramer_value(&q)?;
    println!("drift coefficient = {:.6}", drift_coefficient(&q)?);
    println!("cramer value      = {k:.6} (folded Psi(1) = {:.6})", laplace_exponent(&folded_triplet(&q)?, 1.0)?);
    println!("leaves zero continuously: {}", k > 0.0);
    Ok(())
}
