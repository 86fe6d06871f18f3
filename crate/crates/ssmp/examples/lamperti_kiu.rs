//! Real-valued process glued from alternating Lévy stages with sign-change jumps.

use ssmp::lamperti::{lamperti_kiu_traced, KiuStage};
use ssmp::measures::{JumpMeasureSpec, LevyTriplet, Quintuple};
use ssmp::rng::path_stream;

fn main() -> ssmp::Result<()> {
    let q = Quintuple::new(
        LevyTriplet::with_psi1(1.0, 1.0, JumpMeasureSpec::zero(), 0.0)?,
        JumpMeasureSpec::atom(-0.5, 2.0),
    )?;
    let stage = KiuStage::from_quintuple(&q)?;
    let trace = lamperti_kiu_traced(&stage, &stage, 1.0, 1.0, 1e-3, true, &mut path_stream(3, 0))?;
    println!("{} stages, sign changes at {:?}", trace.stages.len(), trace.path.sign_change_times);
    for s in trace.stages.iter().take(4) {
        println!("stage {}: positive = {}, zeta = {:.4}", s.index, s.positive, s.zeta);
    }
    println!("Z_1 = {:.4}", trace.path.value_at(1.0).unwrap());
    Ok(())
}
