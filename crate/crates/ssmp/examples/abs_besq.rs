//! The absolute-value equation with no jumps is a squared Bessel process:
//! from zero, X_t / t is chi-square with one degree of freedom.

use ssmp::jump_sde::{batch_marginals, SdeConfig, SdeModel};
use ssmp::measures::{JumpMeasureSpec, LevyTriplet, Quintuple};
use ssmp::stats::ks_one_sample;
use ssmp::validate::besq1_cdf;

fn main() -> ssmp::Result<()> {
    let q = Quintuple::new(
        LevyTriplet::with_psi1(1.0, 4.0, JumpMeasureSpec::zero(), 0.0)?,
        JumpMeasureSpec::zero(),
    )?;
    let cfg = SdeConfig { n_paths: 5000, ..SdeConfig::default() };
    let model = SdeModel::new(&q, &cfg)?;
    let t = [0.25, 0.5, 1.0];
    let x = batch_marginals(cfg.n_paths, 1, &t, |rng| model.simulate_abs(0.0, rng))?;
    for (j, &s) in t.iter().enumerate() {
        let (d, p) = ks_one_sample(&x[j], |v| besq1_cdf(s, v))?;
        println!("t = {s}: KS = {d:.4}, p = {p:.3}");
    }
    Ok(())
}
