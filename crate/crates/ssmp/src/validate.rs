//! Statistical and analytic checks of the constructions, collected in a
//! [`ValidationReport`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jump_sde::{batch_marginals, par_paths, value_at_time, SdeConfig, SdeModel};
use crate::lamperti::{lamperti_kiu, lamperti_positive_with, KiuStage};
use crate::levy_sim::LevyDriver;
use crate::measures::{
    build_bar_pi, cramer_value, folded_triplet, laplace_exponent, sign, LevyTriplet, Quintuple,
};
use crate::path::SamplePath;
use crate::rng::{self, PathRng};
use crate::stats::{self, fit_line_over_paths, mean_se};

pub use crate::stats::ks_two_sample;

/// Whether an entry passes when its statistic is below or above the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEntry {
    pub test_name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub direction: Direction,
    pub passed: bool,
    pub n_samples: usize,
    pub seeds: Vec<u64>,
    pub time_points: Vec<f64>,
    /// Supporting numbers (per-time statistics, estimates, ...).
    pub details: BTreeMap<String, f64>,
}

impl ReportEntry {
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64, direction: Direction) -> Self {
        let passed = match direction {
            Direction::AtMost => statistic <= threshold,
            Direction::AtLeast => statistic >= threshold,
        };
        Self {
            test_name: name.into(),
            statistic,
            threshold,
            direction,
            passed,
            n_samples: 0,
            seeds: Vec::new(),
            time_points: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn samples(mut self, n: usize, seeds: &[u64], time_points: &[f64]) -> Self {
        self.n_samples = n;
        self.seeds = seeds.to_vec();
        self.time_points = time_points.to_vec();
        self
    }

    pub fn detail(mut self, key: impl Into<String>, value: f64) -> Self {
        self.details.insert(key.into(), value);
        self
    }

    /// Fails the entry regardless of the statistic (used for extra conditions).
    pub fn require(mut self, ok: bool) -> Self {
        self.passed &= ok;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub entries: Vec<ReportEntry>,
}

impl ValidationReport {
    pub fn push(&mut self, e: ReportEntry) {
        self.entries.push(e);
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fixed-width human-readable table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<34} {:>12} {:>4} {:>12} {:>8} {:>6}",
            "test", "statistic", "", "threshold", "n", "result"
        );
        for e in &self.entries {
            let op = match e.direction {
                Direction::AtMost => "<=",
                Direction::AtLeast => ">=",
            };
            let _ = writeln!(
                s,
                "{:<34} {:>12} {:>4} {:>12} {:>8} {:>6}",
                e.test_name,
                table_number(e.statistic),
                op,
                table_number(e.threshold),
                e.n_samples,
                if e.passed { "PASS" } else { "FAIL" }
            );
        }
        s
    }
}

fn table_number(x: f64) -> String {
    if x != 0.0 && x.is_finite() && (x.abs() < 1e-3 || x.abs() >= 1e6) {
        format!("{x:.3e}")
    } else {
        format!("{x:.6}")
    }
}

/// Pass/fail thresholds; all overridable from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub ks: f64,
    pub p_value: f64,
    pub standard_errors: f64,
    pub generator_standard_errors: f64,
    pub occupation: f64,
    pub scalar: f64,
    pub null_pass_rate: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            ks: 0.02,
            p_value: 0.01,
            standard_errors: 3.0,
            generator_standard_errors: 4.0,
            occupation: 0.01,
            scalar: 1e-9,
            null_pass_rate: 0.95,
        }
    }
}

/// `{0.25, 0.5, 1}·horizon`.
pub fn default_time_points(horizon: f64) -> Vec<f64> {
    vec![0.25 * horizon, 0.5 * horizon, horizon]
}

/// Seed of the second, independent batch in two-batch tests.
pub fn companion_seed(seed: u64) -> u64 {
    seed ^ 0x5DEE_CE66_D1CE_4E5B
}

fn max_ks(name: &str, a: &[Vec<f64>], b: &[Vec<f64>], t_points: &[f64], th: &Thresholds) -> Result<ReportEntry> {
    let mut worst: f64 = 0.0;
    let mut details = BTreeMap::new();
    for (j, t) in t_points.iter().enumerate() {
        let (d, p) = ks_two_sample(&a[j], &b[j])?;
        worst = worst.max(d);
        details.insert(format!("ks@{t}"), d);
        details.insert(format!("p@{t}"), p);
    }
    let mut e = ReportEntry::new(name, worst, th.ks, Direction::AtMost);
    e.details = details;
    Ok(e)
}

/// Scaling: `c^{-1} Z_{ct}` started from `z` against `Z_t` started from `z/c`.
///
/// From `z = 0` the restarted level-`m` solver is used, otherwise the
/// stopped solver. The rescaled batch runs on `[0, c·horizon]` with step `c·dt`.
pub fn test_scaling(
    quintuple: &Quintuple,
    z: f64,
    c: f64,
    t_points: &[f64],
    config: &SdeConfig,
    th: &Thresholds,
) -> Result<ReportEntry> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("scaling factor must be positive, got {c}")));
    }
    let tmax = t_points.iter().copied().fold(0.0, f64::max);
    let wide = SdeConfig { horizon: c * tmax, dt: c * config.dt, ..config.clone() };
    let narrow = SdeConfig { horizon: tmax, ..config.clone() };
    let ma = SdeModel::new(quintuple, &wide)?;
    let mb = SdeModel::new(quintuple, &narrow)?;
    let scaled_t: Vec<f64> = t_points.iter().map(|t| c * t).collect();
    let seeds = [config.seed, companion_seed(config.seed)];
    let run = |m: &SdeModel, z0: f64, rng: &mut PathRng| -> Result<SamplePath> {
        if z0 == 0.0 {
            Ok(m.simulate_approx(0.0, rng))
        } else {
            m.simulate(z0, rng)
        }
    };
    let mut a = batch_marginals(config.n_paths, seeds[0], &scaled_t, |rng| run(&ma, z, rng))?;
    for col in &mut a {
        col.iter_mut().for_each(|v| *v /= c);
    }
    let b = batch_marginals(config.n_paths, seeds[1], t_points, |rng| run(&mb, z / c, rng))?;
    let mut e = max_ks(&format!("scaling(c={c})"), &a, &b, t_points, th)?
        .samples(config.n_paths, &seeds, t_points)
        .detail("c", c);
    let at_zero = |col: &Vec<f64>| col.iter().filter(|v| **v == 0.0).count() as f64 / col.len() as f64;
    for (j, t) in t_points.iter().enumerate() {
        e = e
            .detail(format!("zero_rescaled@{t}"), at_zero(&a[j]))
            .detail(format!("zero_direct@{t}"), at_zero(&b[j]));
    }
    Ok(e)
}

/// Symmetry: from `z = 0`, `Z_t` against `-Z_t`; otherwise `Z_t` from `z`
/// against `-Z_t` from `-z`.
pub fn test_symmetry(
    quintuple: &Quintuple,
    z: f64,
    t_points: &[f64],
    config: &SdeConfig,
    th: &Thresholds,
) -> Result<ReportEntry> {
    let model = SdeModel::new(quintuple, config)?;
    if z == 0.0 {
        let a = batch_marginals(config.n_paths, config.seed, t_points, |rng| {
            Ok(model.simulate_approx(0.0, rng))
        })?;
        let b: Vec<Vec<f64>> = a.iter().map(|c| c.iter().map(|v| -v).collect()).collect();
        Ok(max_ks("symmetry(z=0)", &a, &b, t_points, th)?.samples(
            config.n_paths,
            &[config.seed],
            t_points,
        ))
    } else {
        let seeds = [config.seed, companion_seed(config.seed)];
        let a = batch_marginals(config.n_paths, seeds[0], t_points, |rng| model.simulate(z, rng))?;
        let mut b = batch_marginals(config.n_paths, seeds[1], t_points, |rng| model.simulate(-z, rng))?;
        b.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v = -*v));
        Ok(max_ks(&format!("symmetry(z={z})"), &a, &b, t_points, th)?
            .samples(config.n_paths, &seeds, t_points))
    }
}

/// Fraction of grid points before absorption with `|Z| <= band`.
pub fn occupation_fraction(path: &SamplePath, band: f64) -> f64 {
    let live = path
        .times
        .iter()
        .zip(&path.values)
        .filter(|(t, _)| path.absorption_time.is_none_or(|t0| **t < t0));
    let (mut inside, mut total) = (0usize, 0usize);
    for (_, v) in live {
        total += 1;
        if v.abs() <= band {
            inside += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        inside as f64 / total as f64
    }
}

/// Mean occupation fraction at zero of a batch of paths.
pub fn test_occupation_zero(paths: &[SamplePath], band: f64) -> f64 {
    if paths.is_empty() {
        return 0.0;
    }
    paths.iter().map(|p| occupation_fraction(p, band)).sum::<f64>() / paths.len() as f64
}

/// Occupation fraction of the restarted solver from zero for each level in
/// `levels`; passes when it decreases strictly and ends below the threshold.
pub fn test_occupation_levels(
    quintuple: &Quintuple,
    levels: &[u32],
    band: f64,
    config: &SdeConfig,
    th: &Thresholds,
) -> Result<ReportEntry> {
    if levels.is_empty() || !(band > 0.0) {
        return Err(Error::Domain("need at least one level and a positive band".into()));
    }
    let mut fractions = Vec::with_capacity(levels.len());
    for &m in levels {
        let cfg = SdeConfig { m, rate_cap: config.rate_cap.max(f64::from(m)), ..config.clone() };
        let model = SdeModel::new(quintuple, &cfg)?;
        let per_path = par_paths(config.n_paths, config.seed, |_, rng| {
            Ok(occupation_fraction(&model.simulate_approx(0.0, rng), band))
        })?;
        fractions.push(per_path.iter().sum::<f64>() / per_path.len() as f64);
    }
    let decreasing = fractions.windows(2).all(|w| w[1] < w[0]);
    let last = *fractions.last().unwrap();
    let mut e = ReportEntry::new("occupation_zero", last, th.occupation, Direction::AtMost)
        .require(decreasing)
        .samples(config.n_paths, &[config.seed], &[config.horizon])
        .detail("band", band)
        .detail("strictly_decreasing", decreasing as u8 as f64);
    for (m, f) in levels.iter().zip(&fractions) {
        e = e.detail(format!("fraction@m={m}"), *f);
    }
    Ok(e)
}

/// Per-path rows of `|Z|` at `t_points` from the absolute-value solver started at 0.
pub fn abs_rows(model: &SdeModel, t_points: &[f64], seed: u64, n: usize) -> Result<Vec<Vec<f64>>> {
    par_paths(n, seed, |_, rng| {
        let p = model.simulate_abs(0.0, rng)?;
        Ok(t_points.iter().map(|&t| value_at_time(&p, t)).collect())
    })
}

/// First-moment linearity: `E[|Z_t|] = κ̃ t` from zero.
///
/// The statistic is the larger of `|slope - κ̃| / SE` and `|intercept| / SE`.
pub fn test_moment_linearity(
    quintuple: &Quintuple,
    t_points: &[f64],
    config: &SdeConfig,
    th: &Thresholds,
) -> Result<ReportEntry> {
    let kappa_tilde = cramer_value(quintuple)?;
    let folded = laplace_exponent(&folded_triplet(quintuple)?, 1.0)?;
    let model = SdeModel::new(quintuple, config)?;
    let rows = abs_rows(&model, t_points, config.seed, config.n_paths)?;
    moment_entry(&rows, t_points, kappa_tilde, th).map(|e| {
        e.samples(config.n_paths, &[config.seed], t_points)
            .detail("folded_psi1", folded)
            .require((folded - kappa_tilde).abs() <= th.scalar * kappa_tilde.abs().max(1.0))
    })
}

/// The moment-linearity entry for given per-path rows.
pub fn moment_entry(rows: &[Vec<f64>], t_points: &[f64], expected_slope: f64, th: &Thresholds) -> Result<ReportEntry> {
    let fit = fit_line_over_paths(t_points, rows)?;
    let zs = (fit.slope - expected_slope).abs() / fit.slope_se;
    let zi = fit.intercept.abs() / fit.intercept_se;
    Ok(ReportEntry::new("moment_linearity", zs.max(zi), th.standard_errors, Direction::AtMost)
        .detail("slope", fit.slope)
        .detail("slope_se", fit.slope_se)
        .detail("intercept", fit.intercept)
        .detail("intercept_se", fit.intercept_se)
        .detail("cramer_value", expected_slope))
}

/// Smooth bump `exp(-1 / (1 - r²))`, `r = (x - center)/width`, zero for `|r| >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
}

impl Bump {
    pub fn new(center: f64, width: f64) -> Self {
        Self { center, width }
    }

    /// `(f, f', f'')` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let r = (x - self.center) / self.width;
        if r.abs() >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let s = 1.0 - r * r;
        let g = (-1.0 / s).exp();
        let g1 = g * (-2.0 * r / (s * s));
        let g2 = g * (4.0 * r * r / s.powi(4) - 2.0 / (s * s) - 8.0 * r * r / s.powi(3));
        (g, g1 / self.width, g2 / (self.width * self.width))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// `f(uz) - f(z) - f'(z)·z(u-1)`, switching to the second-order Taylor
    /// term when `z(u-1)` is small enough for the difference to cancel.
    pub fn jump_increment(&self, z: f64, u: f64, um1: f64) -> f64 {
        let (f, f1, f2) = self.eval(z);
        let h = z * um1;
        if h.abs() < 1e-5 * self.width {
            0.5 * f2 * h * h
        } else {
            self.value(u * z) - f - f1 * h
        }
    }
}

/// The generator of the real-valued equation applied to a bump, with the
/// `1/|z|` jump-rate factor capped at `rate_cap`.
#[derive(Debug, Clone)]
pub struct Generator {
    kappa: f64,
    half_sigma2: f64,
    rate_cap: f64,
    bump: Bump,
    /// `(u, u - 1, weight)` quadrature nodes of `barΠ`; atoms are exact nodes.
    nodes: Vec<(f64, f64, f64)>,
}

const GENERATOR_DYADIC_LEVELS: usize = 48;

impl Generator {
    pub fn new(quintuple: &Quintuple, bump: Bump, rate_cap: f64) -> Result<Self> {
        let bar = build_bar_pi(quintuple, 0.0)?;
        let mut nodes = Vec::new();
        if bar.zero_atom > 0.0 {
            nodes.push((0.0, -1.0, bar.zero_atom));
        }
        for part in [&bar.positive_part, &bar.negative_part] {
            for a in &part.atoms {
                if a.mass > 0.0 {
                    nodes.push((a.location, a.location - 1.0, a.mass));
                }
            }
            for d in &part.densities {
                let (lo, hi) = d.support();
                let (lo, hi) = (lo.max(-1.0), hi.min(1.0));
                match d.singular_point() {
                    Some(s) if (s - hi).abs() < 1e-300 => {
                        // dyadic pieces toward the singular point, in the distance to it
                        let mut far = hi - lo;
                        for _ in 0..GENERATOR_DYADIC_LEVELS {
                            let near = 0.5 * far;
                            push_gl(&mut nodes, near, far, |dist| {
                                let u = s - dist;
                                (u, u - 1.0, d.density_at(u))
                            });
                            far = near;
                        }
                    }
                    Some(_) => {
                        return Err(Error::NotIntegrable(
                            "generator quadrature expects the singular point at the right end".into(),
                        ))
                    }
                    None => push_gl(&mut nodes, lo, hi, |u| (u, u - 1.0, d.density_at(u))),
                }
            }
        }
        Ok(Self {
            kappa: crate::measures::drift_coefficient(quintuple)?,
            half_sigma2: 0.5 * quintuple.triplet.sigma2,
            rate_cap,
            bump,
            nodes,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// `(Af)(z)`.
    pub fn apply(&self, z: f64) -> f64 {
        let (_, f1, f2) = self.bump.eval(z);
        let mut out = self.kappa * sign(z) * f1 + self.half_sigma2 * z.abs() * f2;
        if !self.nodes.is_empty() && z != 0.0 {
            let rate = self.rate_cap.min(1.0 / z.abs());
            let mut jump = 0.0;
            for &(u, um1, w) in &self.nodes {
                jump += w * self.bump.jump_increment(z, u, um1);
            }
            out += rate * jump;
        }
        out
    }
}

fn push_gl<F: Fn(f64) -> (f64, f64, f64)>(nodes: &mut Vec<(f64, f64, f64)>, a: f64, b: f64, at: F) {
    if !(b > a) {
        return;
    }
    let (x, w) = crate::quad::legendre_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for (xi, wi) in x.iter().zip(w) {
        let (u, um1, dens) = at(mid + half * xi);
        if dens > 0.0 {
            nodes.push((u, um1, wi * half * dens));
        }
    }
}

/// Per-path martingale residual `f(Z_t) - f(z) - Σ (Af)(Z_{s_k}) Δs` on the path grid up to `t`.
pub fn generator_residual(path: &SamplePath, generator: &Generator, t: f64) -> (f64, f64) {
    let mut integral = 0.0;
    let mut sup: f64 = 0.0;
    for w in 0..path.times.len() - 1 {
        let (s0, s1) = (path.times[w], path.times[w + 1]);
        if s0 >= t {
            break;
        }
        let a = generator.apply(path.values[w]);
        sup = sup.max(a.abs());
        integral += a * (s1.min(t) - s0);
    }
    let f_end = generator.bump.value(value_at_time(path, t));
    (f_end - generator.bump.value(path.values[0]) - integral, sup)
}

/// Martingale-problem check `E[f(Z_t)] - f(z) - E∫(Af)(Z_s)ds ≈ 0` with the stopped solver from `z ≠ 0`.
///
/// Passes when `|residual| <= k·(SE + dt·t·sup|Af|)`, `k` the generator multiplier.
pub fn test_generator_residual(
    quintuple: &Quintuple,
    z: f64,
    bump: Bump,
    t: f64,
    config: &SdeConfig,
    th: &Thresholds,
) -> Result<ReportEntry> {
    let cfg = SdeConfig { horizon: config.horizon.max(t), ..config.clone() };
    let model = SdeModel::new(quintuple, &cfg)?;
    let generator = Generator::new(quintuple, bump, cfg.rate_cap)?;
    let per_path = par_paths(cfg.n_paths, cfg.seed, |_, rng| {
        let p = model.simulate(z, rng)?;
        Ok(generator_residual(&p, &generator, t))
    })?;
    let residuals: Vec<f64> = per_path.iter().map(|r| r.0).collect();
    let sup = per_path.iter().map(|r| r.1).fold(0.0, f64::max);
    let (mean, se) = mean_se(&residuals);
    let budget = cfg.dt * t * sup;
    let tol = th.generator_standard_errors * (se + budget);
    Ok(ReportEntry::new(
        format!("generator_residual(c={},w={})", bump.center, bump.width),
        mean.abs(),
        tol,
        Direction::AtMost,
    )
    .samples(cfg.n_paths, &[cfg.seed], &[t])
    .detail("residual", mean)
    .detail("standard_error", se)
    .detail("dt_budget", budget))
}

/// Marginals of the time-change construction against the stopped SDE
/// solver from `z > 0`: Lamperti's representation when `V = 0`, the
/// Lamperti–Kiu gluing otherwise.
pub fn test_cross_construction(
    quintuple: &Quintuple,
    z: f64,
    t_points: &[f64],
    config: &SdeConfig,
    th: &Thresholds,
) -> Result<Vec<ReportEntry>> {
    if !(z > 0.0) {
        return Err(Error::Domain("cross-construction starts from z > 0".into()));
    }
    let model = SdeModel::new(quintuple, config)?;
    let seeds = [config.seed, companion_seed(config.seed)];
    let horizon = config.horizon;
    let dt = config.dt;
    let mut entries = Vec::new();
    if quintuple.v.is_zero() {
        let driver = LevyDriver::new(&quintuple.triplet)?;
        let a = batch_marginals(config.n_paths, seeds[0], t_points, |rng| {
            lamperti_positive_with(&driver, z, horizon, dt, rng)
        })?;
        let b = batch_marginals(config.n_paths, seeds[1], t_points, |rng| model.simulate(z, rng))?;
        entries.push(
            max_ks("cross_construction", &a, &b, t_points, th)?.samples(config.n_paths, &seeds, t_points),
        );
    } else {
        let stage = KiuStage::from_quintuple(quintuple)?;
        let run_kiu = |rng: &mut PathRng| lamperti_kiu(&stage, &stage, z, horizon, dt, rng);
        let tc = par_paths(config.n_paths, seeds[0], |_, rng| run_kiu(rng).map(|p| summary(&p, t_points)))?;
        let sde = par_paths(config.n_paths, seeds[1], |_, rng| model.simulate(z, rng).map(|p| summary(&p, t_points)))?;
        let (a, fa) = split(tc, t_points.len());
        let (b, fb) = split(sde, t_points.len());
        entries.push(
            max_ks("cross_construction", &a, &b, t_points, th)?.samples(config.n_paths, &seeds, t_points),
        );
        let (stat, df, p) = stats::chi_square_two_sample(&fa, &fb)?;
        entries.push(
            ReportEntry::new("cross_construction.sign_changes", p, th.p_value, Direction::AtLeast)
                .samples(config.n_paths, &seeds, &[horizon])
                .detail("chi_square", stat)
                .detail("df", df),
        );
    }
    Ok(entries)
}

fn summary(p: &SamplePath, t_points: &[f64]) -> (Vec<f64>, u64) {
    (
        t_points.iter().map(|&t| value_at_time(p, t)).collect(),
        p.sign_change_times.len() as u64,
    )
}

fn split(rows: Vec<(Vec<f64>, u64)>, k: usize) -> (Vec<Vec<f64>>, Vec<u64>) {
    let cols = (0..k).map(|j| rows.iter().map(|r| r.0[j]).collect()).collect();
    (cols, rows.iter().map(|r| r.1).collect())
}

/// With `V = 0` the Lamperti–Kiu engine must reproduce Lamperti's representation.
pub fn test_kiu_reduction(
    triplet: &LevyTriplet,
    z: f64,
    t_points: &[f64],
    config: &SdeConfig,
    th: &Thresholds,
) -> Result<ReportEntry> {
    let stage = KiuStage::new(triplet, &crate::measures::JumpMeasureSpec::zero())?;
    let driver = LevyDriver::new(triplet)?;
    let seeds = [config.seed, companion_seed(config.seed)];
    let (horizon, dt) = (config.horizon, config.dt);
    let a = batch_marginals(config.n_paths, seeds[0], t_points, |rng| {
        lamperti_kiu(&stage, &stage, z, horizon, dt, rng)
    })?;
    let b = batch_marginals(config.n_paths, seeds[1], t_points, |rng| {
        lamperti_positive_with(&driver, z, horizon, dt, rng)
    })?;
    Ok(max_ks("kiu_reduction", &a, &b, t_points, th)?.samples(config.n_paths, &seeds, t_points))
}

/// One-sample KS of batch marginals against a CDF `cdf(t, x)`, worst over time points.
pub fn test_marginal_law<C: Fn(f64, f64) -> f64>(
    name: &str,
    marginals: &[Vec<f64>],
    t_points: &[f64],
    cdf: C,
    th: &Thresholds,
) -> Result<ReportEntry> {
    let mut worst: f64 = 0.0;
    let mut e = ReportEntry::new(name, 0.0, th.ks, Direction::AtMost);
    for (j, &t) in t_points.iter().enumerate() {
        let (d, p) = stats::ks_one_sample(&marginals[j], |x| cdf(t, x))?;
        worst = worst.max(d);
        e = e.detail(format!("ks@{t}"), d).detail(format!("p@{t}"), p);
    }
    let details = e.details;
    let mut e = ReportEntry::new(name, worst, th.ks, Direction::AtMost);
    e.details = details;
    Ok(e)
}

/// CDF of `t·χ²₁`, the law of squared Bessel of dimension one from zero at time `t`.
pub fn besq1_cdf(t: f64, x: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if x <= 0.0 {
        return 0.0;
    }
    ChiSquared::new(1.0).expect("one degree of freedom").cdf(x / t)
}

/// Smallest relative second difference of `λ ↦ Ψ(λ)` on an even grid of `[0, lam_max]`.
pub fn convexity_defect(triplet: &LevyTriplet, lam_max: f64, n: usize) -> Result<f64> {
    let h = lam_max / n as f64;
    let psi: Vec<f64> = (0..=n)
        .map(|k| laplace_exponent(triplet, k as f64 * h))
        .collect::<Result<_>>()?;
    let mut worst = f64::INFINITY;
    for w in psi.windows(3) {
        let scale = w.iter().map(|v| v.abs()).fold(1.0, f64::max);
        worst = worst.min((w[0] - 2.0 * w[1] + w[2]) / scale);
    }
    Ok(worst)
}

/// Scalar checks: convexity of the Laplace exponent and the folded-measure
/// identity for the Cramér-type value.
pub fn test_scalars(quintuple: &Quintuple, th: &Thresholds) -> Result<Vec<ReportEntry>> {
    let defect = convexity_defect(&quintuple.triplet, 2.0, 64)?;
    let direct = cramer_value(quintuple)?;
    let folded = laplace_exponent(&folded_triplet(quintuple)?, 1.0)?;
    let rel = (direct - folded).abs() / direct.abs().max(1.0);
    Ok(vec![
        ReportEntry::new("laplace_convexity", -defect, th.scalar, Direction::AtMost)
            .detail("min_second_difference", defect),
        ReportEntry::new("folded_identity", rel, th.scalar, Direction::AtMost)
            .detail("cramer_value", direct)
            .detail("folded_psi1", folded),
    ])
}

/// Null calibration: each statistical test is run on `reps` pairs of
/// same-law samples of size `n` and must pass in at least
/// `null_pass_rate·reps` of them. Samples are exact draws of `W_t²` paths.
pub fn null_calibration(reps: usize, n: usize, seed: u64, th: &Thresholds) -> Result<Vec<ReportEntry>> {
    let t_points = [0.25, 0.5, 1.0];
    let draw = |s: u64| -> Vec<Vec<f64>> {
        (0..n as u64)
            .map(|i| {
                let mut rng = rng::path_stream(s, i);
                let mut w = 0.0;
                let mut prev = 0.0f64;
                t_points
                    .iter()
                    .map(|&t| {
                        w += (t - prev).sqrt() * rng::normal(&mut rng);
                        prev = t;
                        w * w
                    })
                    .collect()
            })
            .collect()
    };
    let cols = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..t_points.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
    };
    let results = par_paths(reps, seed, |r, _| {
        let s1 = rng::salted_stream(seed, 1, r).next_u64_seed();
        let s2 = rng::salted_stream(seed, 2, r).next_u64_seed();
        let (ra, rb) = (draw(s1), draw(s2));
        let (a, b) = (cols(&ra), cols(&rb));
        let ks2 = max_ks("ks", &a, &b, &t_points, th)?.passed;
        let ks1 = test_marginal_law("marginal", &a, &t_points, besq1_cdf, th)?.passed;
        let moment = moment_entry(&ra, &t_points, 1.0, th)?.passed;
        // residual-type z-test: f(X_1) - E f(X_1) has mean zero
        let bump = Bump::new(0.5, 0.4);
        let mean_f = exact_bump_mean(bump, 1.0);
        let res: Vec<f64> = ra.iter().map(|row| bump.value(row[2]) - mean_f).collect();
        let (m, se) = mean_se(&res);
        let generator = m.abs() <= th.generator_standard_errors * se;
        let counts = |rows: &[Vec<f64>]| -> Vec<u64> {
            rows.iter().map(|row| (row[2] * 3.0).floor().min(20.0) as u64).collect()
        };
        let chi = stats::chi_square_two_sample(&counts(&ra), &counts(&rb))?.2 >= th.p_value;
        Ok([ks2, ks1, moment, generator, chi])
    })?;
    let names = [
        "null.ks_two_sample",
        "null.ks_one_sample",
        "null.moment_linearity",
        "null.generator_residual",
        "null.chi_square",
    ];
    let need = (th.null_pass_rate * reps as f64).ceil();
    Ok(names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let passes = results.iter().filter(|r| r[k]).count() as f64;
            ReportEntry::new(*name, passes, need, Direction::AtLeast)
                .samples(n, &[seed], &t_points)
                .detail("repetitions", reps as f64)
        })
        .collect())
}

/// `E[f(W_t²)]` by quadrature over the Gaussian law.
fn exact_bump_mean(bump: Bump, t: f64) -> f64 {
    let s = t.sqrt();
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let g = |x: f64| bump.value(s * s * x * x) * phi(x);
    let mut total = 0.0;
    for k in 0..64 {
        let a = -8.0 + k as f64 * 0.25;
        total += crate::quad::gauss_legendre(&g, a, a + 0.25);
    }
    total
}

trait SeedFromStream {
    fn next_u64_seed(self) -> u64;
}

impl SeedFromStream for PathRng {
    fn next_u64_seed(mut self) -> u64 {
        use rand::RngCore;
        self.next_u64()
    }
}

/// The checks that apply to a single quintuple, as run by the `validate` mode.
pub fn validate_quintuple(quintuple: &Quintuple, config: &SdeConfig, th: &Thresholds) -> Result<ValidationReport> {
    let t_points = default_time_points(config.horizon);
    let mut report = ValidationReport::default();
    for e in test_scalars(quintuple, th)? {
        report.push(e);
    }
    report.push(test_symmetry(quintuple, 0.0, &t_points, config, th)?);
    report.push(test_moment_linearity(quintuple, &t_points, config, th)?);
    report.push(test_scaling(quintuple, 0.0, 2.0, &t_points, config, th)?);
    for (c, w) in [(0.6, 0.4), (1.0, 0.5), (1.6, 0.8)] {
        report.push(test_generator_residual(quintuple, 1.0, Bump::new(c, w), config.horizon, config, th)?);
    }
    if cramer_value(quintuple)? > 0.0 {
        report.push(test_occupation_levels(quintuple, &[4, 16, 64, 256], 1e-6, config, th)?);
    }
    if quintuple.v.is_zero() || quintuple.v.atoms.iter().all(|a| a.location == -1.0) {
        for e in test_cross_construction(quintuple, 1.0, &t_points, config, th)? {
            report.push(e);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::JumpMeasureSpec;

    #[test]
    fn entry_direction() {
        assert!(ReportEntry::new("a", 0.01, 0.02, Direction::AtMost).passed);
        assert!(!ReportEntry::new("a", 0.03, 0.02, Direction::AtMost).passed);
        assert!(ReportEntry::new("p", 0.5, 0.01, Direction::AtLeast).passed);
        assert!(!ReportEntry::new("a", 0.0, 1.0, Direction::AtMost).require(false).passed);
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let b = Bump::new(1.0, 0.7);
        let h = 1e-5;
        for x in [0.5, 0.9, 1.2, 1.6] {
            let (_, d1, d2) = b.eval(x);
            let fd1 = (b.value(x + h) - b.value(x - h)) / (2.0 * h);
            let fd2 = (b.value(x + h) - 2.0 * b.value(x) + b.value(x - h)) / (h * h);
            assert!((d1 - fd1).abs() < 1e-6, "{x}");
            assert!((d2 - fd2).abs() < 1e-3, "{x}");
        }
        assert_eq!(b.eval(2.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn zero_quintuple_has_zero_generator() {
        let q = Quintuple::new(LevyTriplet::brownian(0.0, 0.0), JumpMeasureSpec::zero()).unwrap();
        let g = Generator::new(&q, Bump::new(1.0, 0.5), 1e4).unwrap();
        for z in [-2.0, 0.0, 0.8, 1.1] {
            assert_eq!(g.apply(z), 0.0);
        }
    }

    #[test]
    fn generator_jump_part_matches_single_atom() {
        // Π = δ_{-ln 2}: barΠ = δ_{1/2}; Af(z) = κ f'(z) + (1/z)(f(z/2) - f(z) + f'(z) z/2)
        let q = Quintuple::new(
            LevyTriplet::with_psi1(0.3, 0.0, JumpMeasureSpec::atom(-(2f64.ln()), 1.0), 0.0).unwrap(),
            JumpMeasureSpec::zero(),
        )
        .unwrap();
        let b = Bump::new(1.0, 0.8);
        let g = Generator::new(&q, b, 1e4).unwrap();
        let kappa = crate::measures::drift_coefficient(&q).unwrap();
        for z in [0.6, 1.0, 1.5] {
            let (f, f1, _) = b.eval(z);
            let expect = kappa * f1 + (b.value(z / 2.0) - f + f1 * z / 2.0) / z;
            assert!((g.apply(z) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_density_quadrature_matches_direct_integral() {
        use crate::measures::Density;
        let pi = JumpMeasureSpec::zero().with_density(Density::truncated_stable(0.4, 1.3));
        let q = Quintuple::new(LevyTriplet::with_psi1(0.5, 0.0, pi, 0.0).unwrap(), JumpMeasureSpec::zero()).unwrap();
        let b = Bump::new(1.0, 0.6);
        let g = Generator::new(&q, b, 1e4).unwrap();
        let bar = build_bar_pi(&q, 0.0).unwrap();
        let kappa = crate::measures::drift_coefficient(&q).unwrap();
        let z = 1.1;
        let (_, f1, _) = b.eval(z);
        let jump = bar
            .integrate(|u, um1| b.jump_increment(z, u, um1))
            .unwrap();
        let expect = kappa * f1 + jump / z;
        assert!((g.apply(z) - expect).abs() < 1e-7 * expect.abs().max(1.0), "{} vs {expect}", g.apply(z));
    }

    #[test]
    fn deterministic_flow_has_zero_residual() {
        // pure drift κ = 1 from z = 1: Z_s = 1 + s, bump centred at 1 + t
        let q = Quintuple::new(LevyTriplet::brownian(1.0, 0.0), JumpMeasureSpec::zero()).unwrap();
        let cfg = SdeConfig { n_paths: 4, ..SdeConfig::default() };
        let e = test_generator_residual(&q, 1.0, Bump::new(2.0, 0.8), 1.0, &cfg, &Thresholds::default()).unwrap();
        assert!(e.passed, "{e:?}");
        assert!(e.details["residual"].abs() < 2e-3);
    }

    #[test]
    fn occupation_of_positive_path_is_zero() {
        let mut p = SamplePath::default();
        for k in 0..10 {
            p.push(k as f64 * 0.1, 1.0 + k as f64);
        }
        assert_eq!(occupation_fraction(&p, 0.5), 0.0);
        p.values[3] = 0.0;
        assert_eq!(occupation_fraction(&p, 0.5), 0.1);
    }

    #[test]
    fn scalar_checks_pass_for_valid_quintuple() {
        let q = Quintuple::new(
            LevyTriplet::with_psi1(1.0, 4.0, JumpMeasureSpec::zero(), 0.0).unwrap(),
            JumpMeasureSpec::atom(-0.5, 0.5),
        )
        .unwrap();
        for e in test_scalars(&q, &Thresholds::default()).unwrap() {
            assert!(e.passed, "{e:?}");
        }
    }

    #[test]
    fn report_table_lists_every_entry() {
        let mut r = ValidationReport::default();
        r.push(ReportEntry::new("first", 0.01, 0.02, Direction::AtMost));
        r.push(ReportEntry::new("second", 0.5, 0.01, Direction::AtLeast));
        let t = r.table();
        assert!(t.contains("first") && t.contains("second"));
        assert_eq!(t.matches("PASS").count(), 2);
        assert!(r.all_passed());
        assert!(r.to_json().unwrap().contains("\"direction\": \"at_least\""));
    }
}
