//! A killed spectrally negative Lévy path and the inverse of its exponential functional.

use ssmp::levy_sim::{exponential_functional_inverse, simulate_levy};
use ssmp::measures::{Density, JumpMeasureSpec, LevyTriplet};
use ssmp::rng::path_stream;

fn main() -> ssmp::Result<()> {
    let pi = JumpMeasureSpec::atom(-0.5, 2.0)
        .with_density(Density::truncated_stable(0.3, 1.2))
        .with_cutoff(1e-3);
    let triplet = LevyTriplet::new(0.4, 0.5, pi, 0.2)?;
    let path = simulate_levy(&triplet, 2.0, 0.01, &mut path_stream(7, 0))?;
    println!("{} grid points, kill time {:?}", path.times.len(), path.kill_time);
    for t in [0.0, 0.5, 1.0, 1.5] {
        println!("tau({t}) = {}", exponential_functional_inverse(&path, t)?);
    }
    let mut csv = Vec::new();
    path.write_csv(&mut csv)?;
    for line in String::from_utf8_lossy(&csv).lines().take(5) {
        println!("{line}");
    }
    Ok(())
}
