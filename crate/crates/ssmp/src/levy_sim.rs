//! Killed spectrally negative Lévy paths and the inverse of their exponential functional.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{LevyTriplet, MarkSampler};
use crate::path::fmt_f64;
use crate::rng::{self, PathRng};

/// Path of `ξ` on a strictly increasing grid starting at 0.
///
/// Jump times are grid points carrying the post-jump value. A killed path
/// stops before `kill_time`; the value `-∞` after killing is implicit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub killed: bool,
    pub kill_time: Option<f64>,
    /// Right end of the last cell: the horizon, or the kill time.
    pub end_time: f64,
}

impl LevyPath {
    /// No points yet; generators fill it in.
    pub fn empty() -> Self {
        LevyPath {
            times: Vec::new(),
            values: Vec::new(),
            killed: false,
            kill_time: None,
            end_time: 0.0,
        }
    }

    /// The path identically zero on `[0, horizon]`, sampled every `dt`.
    pub fn constant_zero(horizon: f64, dt: f64) -> Self {
        Self::from_fn(horizon, dt, |_| 0.0)
    }

    /// Deterministic path `t ↦ f(t)` on a `dt` grid.
    pub fn from_fn<F: Fn(f64) -> f64>(horizon: f64, dt: f64, f: F) -> Self {
        let mut times = crate::path::uniform_grid(horizon, dt);
        times.pop();
        let values = times.iter().map(|&t| f(t)).collect();
        LevyPath {
            times,
            values,
            killed: false,
            kill_time: None,
            end_time: horizon,
        }
    }

    /// Rows `time,value,killed`; a killed path gets a closing row at the kill time with value `-inf`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "time,value,killed")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(out, "{},{},0", fmt_f64(*t), fmt_f64(*v))?;
        }
        if let Some(k) = self.kill_time {
            writeln!(out, "{},-inf,1", fmt_f64(k))?;
        }
        Ok(())
    }
}

/// Precomputed simulation data for one triplet: sampled jump marks and the
/// drift that compensates them.
#[derive(Debug, Clone)]
pub struct LevyDriver {
    drift: f64,
    sigma: f64,
    kill_rate: f64,
    jumps: MarkSampler,
}

impl LevyDriver {
    pub fn new(triplet: &LevyTriplet) -> Result<Self> {
        let band = triplet.pi.small_jump_cutoff;
        let jumps = triplet
            .pi
            .sampler(f64::NEG_INFINITY, 0.0, band)
            .map_err(|e| Error::config("triplet.pi.small_jump_cutoff", e.to_string()))?;
        // sampled jumps inside [-1, 0) carry the 1_{|u|<=1} compensator
        let mut compensated = 0.0;
        for a in &triplet.pi.atoms {
            if a.location >= -1.0 {
                compensated += a.mass * a.location;
            }
        }
        for d in &triplet.pi.densities {
            let upper = match d.singular_point() {
                Some(s) => s - band,
                None => 0.0,
            };
            let one = crate::measures::JumpMeasureSpec::zero().with_density(*d);
            compensated += one.integrate_in(|x| x, -1.0, upper)?;
        }
        Ok(Self {
            drift: triplet.a - compensated,
            sigma: triplet.sigma2.sqrt(),
            kill_rate: triplet.q,
            jumps,
        })
    }

    /// Effective linear drift between sampled jumps.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn jump_rate(&self) -> f64 {
        self.jumps.total_mass()
    }

    pub fn kill_rate(&self) -> f64 {
        self.kill_rate
    }

    /// Gaussian-plus-drift increment over an interval of length `h`.
    #[inline]
    pub fn continuous_increment(&self, h: f64, rng: &mut PathRng) -> f64 {
        let mut x = self.drift * h;
        if self.sigma > 0.0 {
            x += self.sigma * h.sqrt() * rng::normal(rng);
        }
        x
    }

    #[inline]
    pub fn sample_jump(&self, rng: &mut PathRng) -> f64 {
        self.jumps.sample(rng)
    }

    /// Fresh generator started at `ξ_0 = 0`.
    pub fn start(&self, rng: &mut PathRng) -> LevyGenerator<'_> {
        LevyGenerator {
            next_jump: rng::exponential(rng, self.jump_rate()),
            kill_time: rng::exponential(rng, self.kill_rate),
            driver: self,
            time: 0.0,
            value: 0.0,
            steps: 0,
        }
    }
}

/// Incremental simulation of one path, extendable in chunks.
pub struct LevyGenerator<'a> {
    driver: &'a LevyDriver,
    time: f64,
    value: f64,
    next_jump: f64,
    kill_time: f64,
    steps: u64,
}

impl LevyGenerator<'_> {
    pub fn killed(&self) -> bool {
        self.time >= self.kill_time
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Advances to `until` on a `dt` grid (grid points at multiples of `dt`),
    /// inserting jump times as extra points. Appends to `path`.
    pub fn advance(&mut self, until: f64, dt: f64, rng: &mut PathRng, path: &mut LevyPath) {
        if path.times.is_empty() {
            path.times.push(0.0);
            path.values.push(0.0);
        } else if self.time > *path.times.last().unwrap() && !self.killed() {
            // resuming: the previous chunk's end point was not stored yet
            path.times.push(self.time);
            path.values.push(self.value);
        }
        while self.time < until && !self.killed() {
            self.steps += 1;
            let grid = ((self.time / dt + 1e-9).floor() + 1.0) * dt;
            let grid = grid.min(until);
            let next = grid.min(self.next_jump).min(self.kill_time);
            let h = next - self.time;
            self.value += self.driver.continuous_increment(h, rng);
            self.time = next;
            if next == self.kill_time {
                path.killed = true;
                path.kill_time = Some(next);
                path.end_time = next;
                return;
            }
            if next == self.next_jump {
                self.value += self.driver.sample_jump(rng);
                self.next_jump = next + rng::exponential(rng, self.driver.jump_rate());
            }
            if next < until {
                path.times.push(next);
                path.values.push(self.value);
            }
        }
        path.end_time = until;
    }
}

/// Simulates `ξ` on `[0, horizon]` with grid step `dt`.
pub fn simulate_levy(
    triplet: &LevyTriplet,
    horizon: f64,
    dt: f64,
    rng: &mut PathRng,
) -> Result<LevyPath> {
    if !(horizon > 0.0 && dt > 0.0 && dt <= horizon) {
        return Err(Error::Domain(format!(
            "need 0 < dt <= horizon, got dt = {dt}, horizon = {horizon}"
        )));
    }
    let driver = LevyDriver::new(triplet)?;
    let mut path = LevyPath::empty();
    driver.start(rng).advance(horizon, dt, rng, &mut path);
    Ok(path)
}

/// Cumulative left-endpoint integral `A(s) = ∫_0^s e^{ξ_r} dr` on a path's cells.
#[derive(Debug, Clone)]
pub struct ExpFunctional {
    /// `cum[i] = A(times[i])`, plus one trailing entry `A(end_time)`.
    cum: Vec<f64>,
}

impl ExpFunctional {
    pub fn new(path: &LevyPath) -> Self {
        let mut f = Self { cum: Vec::new() };
        f.update(path);
        f
    }

    /// Brings the integral up to date after `path` was extended; only the
    /// previously last cell and the new cells are recomputed.
    pub fn update(&mut self, path: &LevyPath) {
        let start = self.cum.len().saturating_sub(2);
        self.cum.truncate(start + 1);
        if self.cum.is_empty() {
            self.cum.push(0.0);
        }
        let mut acc = self.cum[start];
        for i in start..path.times.len() {
            let right = path.times.get(i + 1).copied().unwrap_or(path.end_time);
            acc += path.values[i].exp() * (right - path.times[i]);
            self.cum.push(acc);
        }
    }

    /// `A(end_time)`.
    pub fn total(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    /// `τ(t) = inf{s : A(s) > t}` together with the index of the cell containing it,
    /// or `None` when `A` never exceeds `t` on the path.
    pub fn inverse(&self, path: &LevyPath, t: f64) -> Option<(f64, usize)> {
        // first i with cum[i+1] > t
        let k = self.cum.partition_point(|&a| a <= t);
        if k == 0 || k >= self.cum.len() {
            return None;
        }
        let i = k - 1;
        let rate = path.values[i].exp();
        let s = path.times[i] + (t - self.cum[i]) / rate;
        Some((s, i))
    }
}

/// Generalized inverse of `s ↦ ∫_0^s e^{ξ_r} dr` at `t`; `+∞` when the
/// integral along the path never exceeds `t`.
pub fn exponential_functional_inverse(path: &LevyPath, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time change needs t >= 0, got {t}")));
    }
    Ok(ExpFunctional::new(path)
        .inverse(path, t)
        .map_or(f64::INFINITY, |(s, _)| s))
}
