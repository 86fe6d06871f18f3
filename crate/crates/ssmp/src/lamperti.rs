//! Time-change constructions: Lamperti's representation of positive
//! self-similar processes and the Lamperti–Kiu gluing for real-valued ones.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy_sim::{ExpFunctional, LevyDriver, LevyPath};
use crate::measures::{LevyTriplet, MarkSampler, Quintuple};
use crate::path::{uniform_grid, JumpRecord, SamplePath};
use crate::rng::{self, PathRng};

/// Growth of the time change per internal chunk below `ABSORPTION_RATIO * horizon`
/// is treated as having reached the absorption time.
pub const ABSORPTION_RATIO: f64 = 1e-15;

/// Hard ceiling on internal steps per path; reaching it counts as absorption.
const MAX_INTERNAL_STEPS: u64 = 50_000_000;

/// Lamperti's representation `Z_t = z exp(ξ_{τ(t/z)})` on the grid `0, dt, ..., horizon`.
///
/// `ξ` is simulated on an internal grid of step `dt / z` and extended in
/// chunks until its exponential functional covers the horizon, the path is
/// killed, or the functional stops growing.
pub fn lamperti_positive(
    triplet: &LevyTriplet,
    z: f64,
    horizon: f64,
    dt: f64,
    rng: &mut PathRng,
) -> Result<SamplePath> {
    let driver = LevyDriver::new(triplet)?;
    lamperti_positive_with(&driver, z, horizon, dt, rng)
}

/// As [`lamperti_positive`] with a prepared driver (for batches).
pub fn lamperti_positive_with(
    driver: &LevyDriver,
    z: f64,
    horizon: f64,
    dt: f64,
    rng: &mut PathRng,
) -> Result<SamplePath> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("starting point must be positive, got {z}")));
    }
    check_horizon(horizon, dt)?;
    let inner_dt = dt / z;
    let chunk = (horizon / z).max(1.0);
    let target = horizon / z;

    let mut xi = LevyPath::empty();
    let mut gen = driver.start(rng);
    let mut functional = ExpFunctional::new(&xi);
    let mut absorbed = false;
    let mut until = 0.0;
    loop {
        let before = functional.total();
        until += chunk;
        gen.advance(until, inner_dt, rng, &mut xi);
        functional.update(&xi);
        let total = functional.total();
        if xi.killed {
            absorbed = true;
            break;
        }
        if total > target {
            break;
        }
        if z * (total - before) < ABSORPTION_RATIO * horizon
            || xi.times.len() as u64 > MAX_INTERNAL_STEPS
        {
            absorbed = true;
            break;
        }
    }

    let grid = uniform_grid(horizon, dt);
    let mut out = SamplePath::with_capacity(grid.len());
    for &t in &grid {
        match functional.inverse(&xi, t / z) {
            Some((_, cell)) => out.push(t, z * xi.values[cell].exp()),
            None => out.push(t, 0.0),
        }
    }
    if absorbed {
        let t0 = z * functional.total();
        out.absorbed = t0 <= horizon;
        if out.absorbed {
            out.absorption_time = Some(t0);
        }
    }
    Ok(out)
}

fn check_horizon(horizon: f64, dt: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt > 0.0 && dt <= horizon) {
        return Err(Error::Domain(format!("need 0 < dt <= horizon, got dt = {dt}")));
    }
    Ok(())
}

/// Data for the stages of one parity: the Lévy process run between sign
/// changes, the sign-change rate `p = V(ℝ)` and the law of the factor `V / p`.
#[derive(Debug, Clone)]
pub struct KiuStage {
    driver: LevyDriver,
    sign_change_rate: f64,
    factor: MarkSampler,
}

impl KiuStage {
    pub fn new(triplet: &LevyTriplet, v: &crate::measures::JumpMeasureSpec) -> Result<Self> {
        let factor = v.sampler(-1.0, 0.0, 0.0)?;
        Ok(Self {
            driver: LevyDriver::new(triplet)?,
            sign_change_rate: factor.total_mass(),
            factor,
        })
    }

    pub fn from_quintuple(q: &Quintuple) -> Result<Self> {
        Self::new(&q.triplet, &q.v)
    }

    pub fn sign_change_rate(&self) -> f64 {
        self.sign_change_rate
    }
}

/// Summary of one completed stage of the alternating sequence.
///
/// `xi_at_end` is `ξ^k` evaluated at the stage lifetime `zeta` (internal
/// time) and `u_jump = log|V|` the log-factor applied at the sign change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlternatingStage {
    pub index: usize,
    pub positive: bool,
    pub zeta: f64,
    pub xi_at_end: f64,
    pub u_jump: f64,
}

/// Full output of the Lamperti–Kiu engine.
#[derive(Debug, Clone)]
pub struct KiuTrace {
    pub path: SamplePath,
    pub stages: Vec<AlternatingStage>,
}

/// Lamperti–Kiu construction started from `z ≠ 0`; `plus` drives the
/// stages where the process is positive, `minus` those where it is negative.
pub fn lamperti_kiu(
    plus: &KiuStage,
    minus: &KiuStage,
    z: f64,
    horizon: f64,
    dt: f64,
    rng: &mut PathRng,
) -> Result<SamplePath> {
    Ok(lamperti_kiu_traced(plus, minus, z, horizon, dt, false, rng)?.path)
}

#[derive(Clone, Copy, PartialEq)]
enum Event {
    Target,
    Step,
    Jump,
    Kill,
    SignChange,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// The Lamperti–Kiu engine, optionally recording jumps and completed stages.
///
/// Internal time advances in steps of at most `dt / |z|`, shortened so that
/// the time change lands exactly on every output time and on every event
/// (Lévy jump, killing, end of stage). The log-magnitude is the running sum
/// over all completed stages of `ξ^k_{ζ^k} + U^k` plus the current stage's
/// `ξ`; the sign is `sign(z)` times the parity of the stage count.
pub fn lamperti_kiu_traced(
    plus: &KiuStage,
    minus: &KiuStage,
    z: f64,
    horizon: f64,
    dt: f64,
    record: bool,
    rng: &mut PathRng,
) -> Result<KiuTrace> {
    if z == 0.0 || !z.is_finite() {
        return Err(Error::Domain(format!("starting point must be non-zero, got {z}")));
    }
    check_horizon(horizon, dt)?;
    let scale = z.abs();
    let max_h = dt / scale;
    let grid = uniform_grid(horizon, dt);
    let mut out = SamplePath::with_capacity(grid.len());
    let mut stages = Vec::new();

    let mut sign = z.signum();
    let mut log_mag = CompensatedSum::default();
    let mut t = 0.0;
    let mut stage_start = 0.0_f64;
    let mut stage_xi_start = 0.0_f64;
    let mut internal = 0.0_f64;
    let mut steps = 0_u64;

    let stage_of = |s: f64| if s > 0.0 { plus } else { minus };
    let mut st = stage_of(sign);
    let mut clock_jump = rng::exponential(rng, st.driver.jump_rate());
    let mut clock_kill = rng::exponential(rng, st.driver.kill_rate());
    let mut clock_stage = rng::exponential(rng, st.sign_change_rate);

    out.push(0.0, z);
    let mut next_target = 1;
    while next_target < grid.len() {
        let level = scale * log_mag.value().exp();
        if level < ABSORPTION_RATIO * horizon || steps > MAX_INTERNAL_STEPS {
            absorb(&mut out, &grid, next_target, t);
            break;
        }
        steps += 1;
        let h_target = (grid[next_target] - t) / level;
        let mut h = h_target;
        let mut event = Event::Target;
        for (cand, ev) in [
            (max_h, Event::Step),
            (clock_jump, Event::Jump),
            (clock_kill, Event::Kill),
            (clock_stage, Event::SignChange),
        ] {
            if cand < h {
                h = cand;
                event = ev;
            }
        }
        t += level * h;
        internal += h;
        log_mag.add(st.driver.continuous_increment(h, rng));
        clock_jump -= h;
        clock_kill -= h;
        clock_stage -= h;
        match event {
            Event::Target => {
                t = grid[next_target];
                out.push(t, sign * scale * log_mag.value().exp());
                next_target += 1;
            }
            Event::Step => {}
            Event::Jump => {
                let before = sign * scale * log_mag.value().exp();
                let x = st.driver.sample_jump(rng);
                log_mag.add(x);
                if record {
                    let after = sign * scale * log_mag.value().exp();
                    out.jumps.push(JumpRecord { time: t, before, after, factor: x.exp() });
                }
                clock_jump = rng::exponential(rng, st.driver.jump_rate());
            }
            Event::Kill => {
                if record {
                    let before = sign * scale * log_mag.value().exp();
                    out.jumps.push(JumpRecord { time: t, before, after: 0.0, factor: 0.0 });
                }
                absorb(&mut out, &grid, next_target, t);
                break;
            }
            Event::SignChange => {
                let v = st.factor.sample(rng);
                let u = v.abs().ln();
                let before = sign * scale * log_mag.value().exp();
                if record {
                    stages.push(AlternatingStage {
                        index: stages.len(),
                        positive: sign > 0.0,
                        zeta: internal - stage_start,
                        xi_at_end: log_mag.value() - stage_xi_start,
                        u_jump: u,
                    });
                }
                log_mag.add(u);
                sign = -sign;
                out.sign_change_times.push(t);
                if record {
                    let after = sign * scale * log_mag.value().exp();
                    out.jumps.push(JumpRecord { time: t, before, after, factor: v });
                }
                stage_start = internal;
                stage_xi_start = log_mag.value();
                st = stage_of(sign);
                clock_jump = rng::exponential(rng, st.driver.jump_rate());
                clock_kill = rng::exponential(rng, st.driver.kill_rate());
                clock_stage = rng::exponential(rng, st.sign_change_rate);
            }
        }
    }
    Ok(KiuTrace { path: out, stages })
}

fn absorb(out: &mut SamplePath, grid: &[f64], from: usize, t0: f64) {
    out.absorbed = true;
    out.absorption_time = Some(t0);
    for &s in &grid[from..] {
        out.push(s, 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::JumpMeasureSpec;
    use crate::rng::path_stream;

    fn stage(t: LevyTriplet, v: JumpMeasureSpec) -> KiuStage {
        KiuStage::new(&t, &v).unwrap()
    }

    #[test]
    fn zero_exponent_keeps_start_point() {
        let t = LevyTriplet::brownian(0.0, 0.0);
        let mut rng = path_stream(1, 0);
        let p = lamperti_positive(&t, 2.5, 1.0, 0.01, &mut rng).unwrap();
        assert!(p.values.iter().all(|&v| v == 2.5));
        assert!(!p.absorbed);
    }

    #[test]
    fn deterministic_drift_matches_closed_form() {
        // ξ_s = c s gives Z_t = z + c t
        let c = 0.5;
        let t = LevyTriplet::brownian(c, 0.0);
        let mut rng = path_stream(1, 0);
        let dt = 1e-3;
        let p = lamperti_positive(&t, 1.0, 2.0, dt, &mut rng).unwrap();
        for (s, v) in p.times.iter().zip(&p.values) {
            assert!((v - (1.0 + c * s)).abs() < 5.0 * dt, "{s}: {v}");
        }
        let s = stage(t, JumpMeasureSpec::zero());
        let k = lamperti_kiu(&s, &s, 1.0, 2.0, dt, &mut rng).unwrap();
        for (s, v) in k.times.iter().zip(&k.values) {
            assert!((v - (1.0 + c * s)).abs() < 5.0 * dt, "{s}: {v}");
        }
    }

    #[test]
    fn negative_drift_is_absorbed_and_stays_zero() {
        // ξ_s = -s gives Z_t = z - t, absorbed at t = z
        let t = LevyTriplet::brownian(-1.0, 0.0);
        let mut rng = path_stream(1, 0);
        let p = lamperti_positive(&t, 0.5, 1.0, 1e-3, &mut rng).unwrap();
        assert!(p.absorbed);
        let t0 = p.absorption_time.unwrap();
        assert!((t0 - 0.5).abs() < 1e-2, "{t0}");
        for (s, v) in p.times.iter().zip(&p.values) {
            if *s >= t0 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn killing_absorbs() {
        let t = LevyTriplet::new(0.0, 0.0, JumpMeasureSpec::zero(), 50.0).unwrap();
        let mut rng = path_stream(2, 0);
        let p = lamperti_positive(&t, 1.0, 1.0, 1e-2, &mut rng).unwrap();
        assert!(p.absorbed);
        assert_eq!(*p.values.last().unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = LevyTriplet::brownian(0.0, 1.0);
        let mut rng = path_stream(1, 0);
        assert!(lamperti_positive(&t, 0.0, 1.0, 0.1, &mut rng).is_err());
        let s = stage(t, JumpMeasureSpec::zero());
        assert!(lamperti_kiu(&s, &s, 0.0, 1.0, 0.1, &mut rng).is_err());
        assert!(lamperti_kiu(&s, &s, 1.0, -1.0, 0.1, &mut rng).is_err());
    }

    #[test]
    fn unit_factor_flips_sign_without_changing_magnitude() {
        // V = p δ_{-1}, ξ_s = s: |Z_t| = |z| + t, sign flips only
        let t = LevyTriplet::brownian(1.0, 0.0);
        let s = stage(t, JumpMeasureSpec::atom(-1.0, 3.0));
        let mut rng = path_stream(4, 0);
        let tr = lamperti_kiu_traced(&s, &s, -1.0, 2.0, 1e-3, true, &mut rng).unwrap();
        let p = &tr.path;
        assert!(!p.sign_change_times.is_empty());
        for (s, v) in p.times.iter().zip(&p.values) {
            assert!((v.abs() - (1.0 + s)).abs() < 1e-2);
            let flips = p.sign_change_times.iter().filter(|&&h| h <= *s).count();
            let expected = if flips % 2 == 0 { -1.0 } else { 1.0 };
            assert_eq!(v.signum(), expected);
        }
        assert!(tr.stages.iter().all(|st| st.u_jump == 0.0));
    }

    #[test]
    fn sign_change_multiplies_by_factor() {
        let t = LevyTriplet::new(0.2, 1.0, JumpMeasureSpec::atom(-0.3, 1.0), 0.0).unwrap();
        let v = JumpMeasureSpec::atom(-0.5, 1.0).with_atom(-0.25, 2.0);
        let s = stage(t, v);
        let mut rng = path_stream(6, 0);
        let tr = lamperti_kiu_traced(&s, &s, 1.0, 3.0, 1e-3, true, &mut rng).unwrap();
        let flips: Vec<_> = tr.path.jumps.iter().filter(|j| j.factor < 0.0).collect();
        assert_eq!(flips.len(), tr.path.sign_change_times.len());
        assert_eq!(flips.len(), tr.stages.len());
        for (j, st) in flips.iter().zip(&tr.stages) {
            assert!(j.before * j.after < 0.0);
            let ratio = (j.after / j.before).abs();
            assert!((ratio - st.u_jump.exp()).abs() <= 1e-12 * ratio);
        }
    }
}
