//! The level-m approximation restarted from zero: occupation of zero shrinks as m grows.

use ssmp::jump_sde::{par_paths, SdeConfig, SdeModel};
use ssmp::measures::{JumpMeasureSpec, LevyTriplet, Quintuple};
use ssmp::validate::occupation_fraction;

fn main() -> ssmp::Result<()> {
    let q = Quintuple::new(
        LevyTriplet::with_psi1(1.0, 1.0, JumpMeasureSpec::zero(), 0.0)?,
        JumpMeasureSpec::atom(-0.5, 0.5),
    )?;
    for m in [4, 16, 64, 256] {
        let cfg = SdeConfig { m, n_paths: 1000, ..SdeConfig::default() };
        let model = SdeModel::new(&q, &cfg)?;
        let f = par_paths(cfg.n_paths, 0, |_, rng| Ok(occupation_fraction(&model.simulate_approx(0.0, rng), 1e-6)))?;
        println!("m = {m:>3}: occupation of zero {:.5}", f.iter().sum::<f64>() / f.len() as f64);
    }
    Ok(())
}
