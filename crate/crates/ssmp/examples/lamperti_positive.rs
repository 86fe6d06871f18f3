//! Positive self-similar process through Lamperti's time change, absorbed at zero
//! when the underlying Lévy process is killed.

use ssmp::lamperti::lamperti_positive;
use ssmp::measures::{JumpMeasureSpec, LevyTriplet};
use ssmp::rng::path_stream;

fn main() -> ssmp::Result<()> {
    let triplet = LevyTriplet::new(0.5, 1.0, JumpMeasureSpec::atom(-(2f64.ln()), 0.5), 0.3)?;
    for id in 0..5 {
        let p = lamperti_positive(&triplet, 1.0, 2.0, 1e-3, &mut path_stream(1, id))?;
        println!(
            "path {id}: Z_1 = {:.4}, Z_2 = {:.4}, absorbed at {:?}",
            p.value_at(1.0).unwrap(),
            p.value_at(2.0).unwrap(),
            p.absorption_time
        );
    }
    Ok(())
}
