//! Euler scheme for the real-valued jump SDE started away from zero; the path
//! is stopped when it reaches zero.

use ssmp::jump_sde::{simulate_sde, SdeConfig};
use ssmp::measures::{JumpMeasureSpec, LevyTriplet, Quintuple};
use ssmp::rng::path_stream;

fn main() -> ssmp::Result<()> {
    let q = Quintuple::new(
        LevyTriplet::with_psi1(0.5, 1.0, JumpMeasureSpec::atom(-1.0, 1.0), 0.0)?,
        JumpMeasureSpec::atom(-0.5, 0.5),
    )?;
    let cfg = SdeConfig { record_jumps: true, ..SdeConfig::default() };
    for id in 0..3 {
        let p = simulate_sde(&q, 1.0, &cfg, &mut path_stream(5, id))?;
        println!(
            "path {id}: {} jumps, {} sign changes, Z_1 = {:.4}, T0 = {:?}",
            p.jumps.len(),
            p.sign_change_times.len(),
            p.last_value().unwrap(),
            p.absorption_time
        );
    }
    Ok(())
}
