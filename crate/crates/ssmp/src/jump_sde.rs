//! Euler schemes for the jump-type SDEs: the symmetric real-valued equation,
//! its level-`m` approximation restarted from zero, and the equation for the
//! absolute value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    build_bar_pi, cramer_value, drift_coefficient, sign, sign0, JumpKernel, Quintuple,
};
use crate::path::{uniform_grid, JumpRecord, SamplePath};
use crate::rng::{self, PathRng};

/// Numerical settings shared by all solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Marks of infinite-activity densities within this distance of `u = 1` are not sampled.
    pub cutoff: f64,
    /// Approximation level of the restarted equation.
    pub m: u32,
    /// Cap on the `1/|z|` jump-rate factor of the unrestarted equation.
    pub rate_cap: f64,
    /// Keep a [`JumpRecord`] for every applied jump.
    pub record_jumps: bool,
    /// Relative step control near zero: an Euler sub-step from `z` is at most
    /// `substep·|z| / max(σ², |drift|)`, but never shorter than `dt / max_substeps`.
    /// Zero disables sub-stepping.
    pub substep: f64,
    pub max_substeps: u32,
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 1.0,
            n_paths: 10_000,
            seed: 0,
            cutoff: 1e-4,
            m: 256,
            rate_cap: 1e4,
            record_jumps: false,
            substep: 0.05,
            max_substeps: 64,
        }
    }
}

impl SdeConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!("{path}.horizon"), "must be positive and finite"));
        }
        if !(self.dt > 0.0 && self.dt < self.horizon) {
            return Err(Error::config(format!("{path}.dt"), "must satisfy 0 < dt < horizon"));
        }
        if self.n_paths == 0 {
            return Err(Error::config(format!("{path}.n_paths"), "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.cutoff) {
            return Err(Error::config(format!("{path}.cutoff"), "must lie in [0, 1)"));
        }
        if self.m == 0 {
            return Err(Error::config(format!("{path}.m"), "must be at least 1"));
        }
        if !(self.substep >= 0.0 && self.substep.is_finite()) {
            return Err(Error::config(format!("{path}.substep"), "must be finite and >= 0"));
        }
        if !(self.rate_cap >= f64::from(self.m)) {
            return Err(Error::config(format!("{path}.rate_cap"), "must be at least m"));
        }
        Ok(())
    }
}

/// The restart point process: from zero, wait `Exp(m)` and land at
/// `±scale/m`, the sign drawn with `P(+) = (1 + skew)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestartProcess {
    pub rate: f64,
    pub scale: f64,
    pub skew: f64,
}

impl RestartProcess {
    pub fn symmetric(m: u32, scale: f64) -> Self {
        Self { rate: f64::from(m), scale, skew: 0.0 }
    }

    /// The two landing sites `∓1/m`, each with intensity `m/2` in the symmetric case.
    pub fn sites(&self) -> [(f64, f64); 2] {
        let m = self.rate;
        [(-1.0 / m, m * (1.0 - self.skew) / 2.0), (1.0 / m, m * (1.0 + self.skew) / 2.0)]
    }

    pub fn sample_wait(&self, rng: &mut PathRng) -> f64 {
        rng::exponential(rng, self.rate)
    }

    pub fn sample_landing(&self, rng: &mut PathRng) -> f64 {
        use rand::Rng;
        let up = rng.random::<f64>() < (1.0 + self.skew) / 2.0;
        let site = if up { 1.0 } else { -1.0 } / self.rate;
        self.scale * site
    }
}

/// `κ·sign(z)·dt` plus the compensator of the sampled jump marks, moved
/// into the drift: `-sign(z)·dt·∫ (u-1) barΠ(du)`.
pub fn step_drift(quintuple: &Quintuple, z_prev: f64, dt: f64) -> Result<f64> {
    let kappa = drift_coefficient(quintuple)?;
    let kernel = build_bar_pi(quintuple, SdeConfig::default().cutoff)?.jump_kernel(1.0)?;
    Ok(drift_with(kappa, kernel.signed_compensator, sign(z_prev), dt))
}

/// As [`step_drift`] with the `sign₀` convention (zero drift at zero).
pub fn step_drift_sign0(quintuple: &Quintuple, z_prev: f64, dt: f64) -> Result<f64> {
    let kappa = drift_coefficient(quintuple)?;
    let kernel = build_bar_pi(quintuple, SdeConfig::default().cutoff)?.jump_kernel(1.0)?;
    Ok(drift_with(kappa, kernel.signed_compensator, sign0(z_prev), dt))
}

#[inline]
fn drift_with(kappa: f64, compensator: f64, s: f64, dt: f64) -> f64 {
    s * dt * (kappa - compensator)
}

/// Largest admissible expected number of jumps in one output step at the rate cap.
const MAX_JUMPS_PER_STEP: f64 = 1e6;

/// Everything the solvers need from a quintuple, computed once.
#[derive(Debug, Clone)]
pub struct SdeModel {
    pub kappa: f64,
    pub kappa_tilde: f64,
    sigma: f64,
    full: JumpKernel,
    truncated: JumpKernel,
    pub restart: RestartProcess,
    pub config: SdeConfig,
}

impl SdeModel {
    pub fn new(quintuple: &Quintuple, config: &SdeConfig) -> Result<Self> {
        config.validate("sde")?;
        let bar = build_bar_pi(quintuple, config.cutoff)?;
        let kappa_tilde = cramer_value(quintuple)?;
        let m = f64::from(config.m);
        let full = bar.jump_kernel(1.0)?;
        let worst = full.sampler.total_mass() * config.rate_cap * config.dt;
        if worst > MAX_JUMPS_PER_STEP {
            return Err(Error::config(
                "sde.rate_cap",
                format!(
                    "up to {worst:.3e} expected jumps in one step (sampled jump mass {:.3e} x rate_cap x dt); \
                     raise sde.cutoff, or lower sde.rate_cap or sde.dt",
                    full.sampler.total_mass()
                ),
            ));
        }
        Ok(Self {
            kappa: drift_coefficient(quintuple)?,
            kappa_tilde,
            sigma: quintuple.triplet.sigma2.sqrt(),
            full,
            truncated: bar.jump_kernel(1.0 - 1.0 / m)?,
            restart: RestartProcess::symmetric(config.m, kappa_tilde),
            config: config.clone(),
        })
    }

    /// Length of the next Euler step from `z` when `remaining` is left until the next grid time.
    #[inline]
    fn local_step(&self, z: f64, drift_rate: f64, remaining: f64) -> f64 {
        let eta = self.config.substep;
        if eta <= 0.0 {
            return remaining;
        }
        let scale = (self.sigma * self.sigma).max(drift_rate.abs());
        if scale <= 0.0 {
            return remaining;
        }
        let floor = self.config.dt / f64::from(self.config.max_substeps.max(1));
        remaining.min((eta * z.abs() / scale).max(floor))
    }

    pub fn with_skew(mut self, skew: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&skew) {
            return Err(Error::config("skew", "must lie in [-1, 1]"));
        }
        self.restart.skew = skew;
        Ok(self)
    }

    /// Euler scheme for the real-valued equation from `z ≠ 0`, stopped at the
    /// first time the path reaches zero (continuously or by the killing atom).
    pub fn simulate(&self, z: f64, rng: &mut PathRng) -> Result<SamplePath> {
        if z == 0.0 {
            return Err(Error::Precondition(
                "the equation is not solved from exactly zero; use the approximating \
                 solver (simulate-approx) with a large level m"
                    .into(),
            ));
        }
        Ok(self.run(z, rng, Scheme::Stopped))
    }

    /// Euler scheme for the level-`m` approximation, restarted from zero.
    pub fn simulate_approx(&self, z: f64, rng: &mut PathRng) -> SamplePath {
        self.run(z, rng, Scheme::Restarted)
    }

    fn run(&self, z0: f64, rng: &mut PathRng, scheme: Scheme) -> SamplePath {
        let cfg = &self.config;
        let grid = uniform_grid(cfg.horizon, cfg.dt);
        let mut out = SamplePath::with_capacity(grid.len());
        let (kernel, cap, sgn): (&JumpKernel, f64, fn(f64) -> f64) = match scheme {
            Scheme::Stopped => (&self.full, cfg.rate_cap, sign),
            Scheme::Restarted => (&self.truncated, f64::from(cfg.m), sign0),
        };
        let mass = kernel.total_mass();
        let mut t = 0.0;
        let mut z = z0;
        out.push(0.0, z);
        let mut k = 1;
        while k < grid.len() {
            if z == 0.0 {
                match scheme {
                    Scheme::Stopped => {
                        out.absorbed = true;
                        out.absorption_time = Some(t);
                        while k < grid.len() {
                            out.push(grid[k], 0.0);
                            k += 1;
                        }
                        break;
                    }
                    Scheme::Restarted => {
                        let leave = t + self.restart.sample_wait(rng);
                        while k < grid.len() && grid[k] <= leave {
                            out.push(grid[k], 0.0);
                            k += 1;
                        }
                        if k == grid.len() {
                            break;
                        }
                        t = leave;
                        z = self.restart.sample_landing(rng);
                        if z == 0.0 {
                            continue;
                        }
                    }
                }
            }
            let rate = cap.min(1.0 / z.abs());
            let drift_rate = sgn(z) * self.kappa - z * rate * kernel.signed_compensator;
            let h = self.local_step(z, drift_rate, grid[k] - t);
            let to_grid = h == grid[k] - t;
            let drift = drift_rate * h;
            let mut next = z + drift;
            if self.sigma > 0.0 {
                next += self.sigma * (z.abs() * h).sqrt() * rng::normal(rng);
            }
            if next == 0.0 || next.signum() != z.signum() {
                // the continuous part reached zero inside the step
                t += h * z / (z - next);
                z = 0.0;
                continue;
            }
            let n = if mass > 0.0 { rng::poisson(rng, rate * mass * h) } else { 0 };
            let mut hit_zero = None;
            if n > 0 {
                let mut times: Vec<f64> = (0..n).map(|_| t + h * uniform(rng)).collect();
                times.sort_by(f64::total_cmp);
                for s in times {
                    let u = kernel.sample(rng);
                    let before = next;
                    next *= u;
                    debug_assert!(next.abs() <= before.abs());
                    if cfg.record_jumps {
                        out.jumps.push(JumpRecord { time: s, before, after: next, factor: u });
                    }
                    if u < 0.0 {
                        out.sign_change_times.push(s);
                    }
                    if next == 0.0 {
                        hit_zero = Some(s);
                        break;
                    }
                }
            }
            if let Some(s) = hit_zero {
                t = s;
                z = 0.0;
                continue;
            }
            z = next;
            if to_grid {
                t = grid[k];
                out.push(t, z);
                k += 1;
            } else {
                t += h;
            }
        }
        out
    }

    /// Euler scheme for the absolute value from `x0 ≥ 0`, negative overshoots clamped to zero.
    pub fn simulate_abs(&self, x0: f64, rng: &mut PathRng) -> Result<SamplePath> {
        if !(x0 >= 0.0 && x0.is_finite()) {
            return Err(Error::Domain(format!("starting point must be >= 0, got {x0}")));
        }
        let cfg = &self.config;
        let grid = uniform_grid(cfg.horizon, cfg.dt);
        let mut out = SamplePath::with_capacity(grid.len());
        let kernel = &self.full;
        let mass = kernel.total_mass();
        let mut x = x0;
        out.push(0.0, x);
        let mut t = 0.0;
        let mut k = 1;
        while k < grid.len() {
            let rate = if x > 0.0 { cfg.rate_cap.min(1.0 / x) } else { 0.0 };
            let drift_rate = self.kappa_tilde - x * rate * kernel.abs_compensator;
            let h = self.local_step(x, drift_rate, grid[k] - t);
            let to_grid = h == grid[k] - t;
            let mut next = x + drift_rate * h;
            if self.sigma > 0.0 && x > 0.0 {
                next += self.sigma * (x * h).sqrt() * rng::normal(rng);
            }
            next = next.max(0.0);
            let n = if mass > 0.0 && x > 0.0 { rng::poisson(rng, rate * mass * h) } else { 0 };
            if n > 0 {
                let mut times: Vec<f64> = (0..n).map(|_| t + h * uniform(rng)).collect();
                times.sort_by(f64::total_cmp);
                for s in times {
                    let u = kernel.sample(rng).abs();
                    let before = next;
                    next *= u;
                    if cfg.record_jumps {
                        out.jumps.push(JumpRecord { time: s, before, after: next, factor: u });
                    }
                }
            }
            x = next;
            if to_grid {
                t = grid[k];
                out.push(t, x);
                k += 1;
            } else {
                t += h;
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy)]
enum Scheme {
    Stopped,
    Restarted,
}

fn uniform(rng: &mut PathRng) -> f64 {
    use rand::Rng;
    rng.random::<f64>()
}

/// Euler scheme for the real-valued equation from `z ≠ 0`.
pub fn simulate_sde(
    quintuple: &Quintuple,
    z: f64,
    config: &SdeConfig,
    rng: &mut PathRng,
) -> Result<SamplePath> {
    SdeModel::new(quintuple, config)?.simulate(z, rng)
}

/// Euler scheme for the level-`config.m` approximation, restarted from zero.
pub fn simulate_approx_sde(
    quintuple: &Quintuple,
    z: f64,
    config: &SdeConfig,
    rng: &mut PathRng,
) -> Result<SamplePath> {
    Ok(SdeModel::new(quintuple, config)?.simulate_approx(z, rng))
}

/// Euler scheme for the absolute-value equation from `x0 ≥ 0`.
pub fn simulate_abs_sde(
    quintuple: &Quintuple,
    x0: f64,
    config: &SdeConfig,
    rng: &mut PathRng,
) -> Result<SamplePath> {
    SdeModel::new(quintuple, config)?.simulate_abs(x0, rng)
}

pub use crate::path::fold_to_abs;

/// Runs `n_paths` independent paths (path `i` on stream `(seed, i)`) in
/// parallel and returns the per-path results in path order.
pub fn par_paths<T, F>(n_paths: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut PathRng) -> Result<T> + Sync,
{
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::path_stream(seed, i);
            f(i, &mut rng)
        })
        .collect()
}

/// Value of a grid path at time `t` (the grid point at or just below `t`).
pub fn value_at_time(path: &SamplePath, t: f64) -> f64 {
    path.value_at(t + 1e-9 * t.abs().max(1.0))
        .expect("time inside the path's grid")
}

/// Marginal samples `marginals[j][i] = path_i(t_points[j])`.
pub fn batch_marginals<F>(
    n_paths: usize,
    seed: u64,
    t_points: &[f64],
    simulate: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&mut PathRng) -> Result<SamplePath> + Sync,
{
    let rows = par_paths(n_paths, seed, |_, rng| {
        let p = simulate(rng)?;
        Ok(t_points.iter().map(|&t| value_at_time(&p, t)).collect::<Vec<_>>())
    })?;
    Ok((0..t_points.len())
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{JumpMeasureSpec, LevyTriplet};
    use crate::rng::path_stream;
    use approx::assert_relative_eq;

    fn quint(psi1: f64, sigma2: f64, pi: JumpMeasureSpec, q: f64, v: JumpMeasureSpec) -> Quintuple {
        Quintuple::new(LevyTriplet::with_psi1(psi1, sigma2, pi, q).unwrap(), v).unwrap()
    }

    #[test]
    fn drift_examples() {
        let q0 = quint(1.0, 0.0, JumpMeasureSpec::zero(), 0.0, JumpMeasureSpec::zero());
        assert_relative_eq!(step_drift(&q0, -0.5, 0.01).unwrap(), -0.01, epsilon = 1e-15);
        assert_relative_eq!(step_drift(&q0, 0.0, 0.01).unwrap(), -0.01, epsilon = 1e-15);
        assert_eq!(step_drift_sign0(&q0, 0.0, 0.01).unwrap(), 0.0);
        // one barΠ atom at 1/2 with mass 1, i.e. Π = δ_{-ln 2}, and κ = 1
        let q1 = quint(1.0, 0.0, JumpMeasureSpec::atom(-(2f64.ln()), 1.0), 0.0, JumpMeasureSpec::zero());
        assert_relative_eq!(step_drift(&q1, 0.3, 0.01).unwrap(), 0.015, epsilon = 1e-14);
    }

    #[test]
    fn zero_start_is_a_precondition_error() {
        let q = quint(1.0, 4.0, JumpMeasureSpec::zero(), 0.0, JumpMeasureSpec::zero());
        let mut rng = path_stream(0, 0);
        let err = simulate_sde(&q, 0.0, &SdeConfig::default(), &mut rng).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert!(err.to_string().contains("simulate-approx"));
    }

    #[test]
    fn zero_quintuple_gives_constant_abs_path() {
        let q = quint(0.0, 0.0, JumpMeasureSpec::zero(), 0.0, JumpMeasureSpec::zero());
        let mut rng = path_stream(0, 0);
        let p = simulate_abs_sde(&q, 0.7, &SdeConfig::default(), &mut rng).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn jumps_are_multiplicative_and_shrink() {
        let q = quint(
            0.5,
            1.0,
            JumpMeasureSpec::atom(-0.3, 2.0),
            0.2,
            JumpMeasureSpec::atom(-0.5, 1.0).with_atom(-1.0, 0.5),
        );
        let cfg = SdeConfig { record_jumps: true, horizon: 2.0, ..SdeConfig::default() };
        let model = SdeModel::new(&q, &cfg).unwrap();
        for i in 0..20 {
            let mut rng = path_stream(3, i);
            let p = model.simulate_approx(0.0, &mut rng);
            for j in &p.jumps {
                assert_eq!(j.after, j.before * j.factor);
                assert!(j.after.abs() <= j.before.abs());
            }
            let flips = p.jumps.iter().filter(|j| j.factor < 0.0).count();
            assert_eq!(flips, p.sign_change_times.len());
        }
    }

    #[test]
    fn stopped_solver_absorbs_on_killing_atom() {
        let q = quint(0.0, 0.0, JumpMeasureSpec::zero(), 5.0, JumpMeasureSpec::zero());
        let cfg = SdeConfig::default();
        let mut rng = path_stream(1, 0);
        let p = simulate_sde(&q, 1.0, &cfg, &mut rng).unwrap();
        assert!(p.absorbed);
        let t0 = p.absorption_time.unwrap();
        for (s, v) in p.times.iter().zip(&p.values) {
            if *s >= t0 {
                assert_eq!(*v, 0.0);
            } else {
                // Ψ(1) = 0 leaves only the compensator of the killing atom: Z_t = 1 + 5t
                assert_relative_eq!(*v, 1.0 + 5.0 * s, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn restart_only_path_leaves_zero() {
        // everything zero except κ̃ = 1: waits at zero, lands at ±1/m, drifts away
        let q = quint(1.0, 0.0, JumpMeasureSpec::zero(), 0.0, JumpMeasureSpec::zero());
        let cfg = SdeConfig { m: 1, ..SdeConfig::default() };
        let model = SdeModel::new(&q, &cfg).unwrap();
        let mut rng = path_stream(2, 0);
        let p = model.simulate_approx(0.0, &mut rng);
        let last = p.last_value().unwrap();
        assert!(last == 0.0 || last.abs() >= 1.0);
    }

    #[test]
    fn restart_sites_are_balanced() {
        let r = RestartProcess::symmetric(8, 1.5);
        let [(lo, wl), (hi, wh)] = r.sites();
        assert_eq!((lo, hi), (-0.125, 0.125));
        assert_eq!(wl, 4.0);
        assert_eq!(wh, 4.0);
        let mut rng = path_stream(0, 0);
        let ups = (0..10_000).filter(|_| r.sample_landing(&mut rng) > 0.0).count();
        assert!((ups as f64 - 5000.0).abs() < 4.0 * 50.0);
    }

    #[test]
    fn config_validation() {
        let bad = SdeConfig { rate_cap: 10.0, m: 256, ..SdeConfig::default() };
        assert!(matches!(bad.validate("sde"), Err(Error::Config { .. })));
        let bad = SdeConfig { dt: 2.0, ..SdeConfig::default() };
        assert!(bad.validate("sde").is_err());
    }

    #[test]
    fn unsimulable_jump_intensity_is_a_config_error() {
        use crate::measures::Density;
        let pi = JumpMeasureSpec::zero().with_density(Density::truncated_stable(1.0, 1.8)).with_cutoff(1e-4);
        let q = quint(1.0, 0.0, pi, 0.0, JumpMeasureSpec::zero());
        match SdeModel::new(&q, &SdeConfig::default()) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "sde.rate_cap"),
            other => panic!("{other:?}"),
        }
        let relaxed = SdeConfig { cutoff: 1e-2, ..SdeConfig::default() };
        assert!(SdeModel::new(&q, &relaxed).is_ok());
    }

    #[test]
    fn batches_are_deterministic() {
        let q = quint(1.0, 4.0, JumpMeasureSpec::zero(), 0.0, JumpMeasureSpec::zero());
        let cfg = SdeConfig::default();
        let model = SdeModel::new(&q, &cfg).unwrap();
        let run = || batch_marginals(64, 9, &[0.5, 1.0], |rng| model.simulate_abs(0.0, rng)).unwrap();
        assert_eq!(run(), run());
    }
}
