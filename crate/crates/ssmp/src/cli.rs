//! Run orchestration behind the `ssmp` binary: dispatch on the mode, write
//! paths, summaries, reports and the manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

pub use crate::config::{Formats, Mode, RunConfig};
use crate::error::{Error, Result};
use crate::jump_sde::{value_at_time, SdeModel};
use crate::lamperti::{lamperti_kiu, lamperti_positive_with, KiuStage};
use crate::levy_sim::{LevyDriver, LevyGenerator, LevyPath};
use crate::measures::{cramer_value, drift_coefficient, laplace_exponent, Quintuple};
use crate::path::{SamplePath, PATH_CSV_HEADER, SIGN_CHANGE_CSV_HEADER};
use crate::rng::{path_stream, PathRng};
use crate::validate::{companion_seed, default_time_points, validate_quintuple, ValidationReport};

/// Paths are simulated and written in blocks of this many.
const BLOCK: u64 = 1024;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PATHS_FILE: &str = "paths.csv";
pub const SIGN_CHANGES_FILE: &str = "sign_changes.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TABLE_FILE: &str = "report.txt";

#[derive(Debug)]
pub struct RunOutcome {
    /// 0 on success, 1 when a validation entry failed.
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub report: Option<ValidationReport>,
}

/// `Ψ(1)`, the drift coefficient, the Cramér-type value and whether the
/// process leaves zero continuously.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedScalars {
    pub psi1: f64,
    pub drift_coefficient: f64,
    pub cramer_value: f64,
    pub leaves_zero_continuously: bool,
}

impl DerivedScalars {
    pub fn of(q: &Quintuple) -> Result<Self> {
        let cramer = cramer_value(q)?;
        Ok(Self {
            psi1: laplace_exponent(&q.triplet, 1.0)?,
            drift_coefficient: drift_coefficient(q)?,
            cramer_value: cramer,
            leaves_zero_continuously: cramer > 0.0,
        })
    }
}

pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.check()?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    let scalars = DerivedScalars::of(&config.quintuple)?;
    let mut outcome = RunOutcome { exit_code: 0, files: Vec::new(), warnings: Vec::new(), report: None };
    if config.mode == Mode::SimulateApprox && !scalars.leaves_zero_continuously {
        outcome.warnings.push(format!(
            "cramer_value = {} <= 0: the limiting process may be trapped at zero",
            scalars.cramer_value
        ));
    }
    match config.mode {
        Mode::Validate => {
            let report = validate_quintuple(&config.quintuple, &config.sde, &config.thresholds)?;
            if config.formats.json {
                outcome.files.push(write_file(dir, REPORT_JSON_FILE, report.to_json()?.as_bytes())?);
            }
            outcome.files.push(write_file(dir, REPORT_TABLE_FILE, report.table().as_bytes())?);
            if !report.all_passed() {
                outcome.exit_code = 1;
            }
            outcome.report = Some(report);
        }
        _ => {
            let files = simulate_batch(config)?;
            outcome.files.extend(files);
        }
    }
    outcome.files.push(write_file(dir, MANIFEST_FILE, manifest(config, &scalars)?.as_bytes())?);
    Ok(outcome)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let p = dir.join(name);
    fs::write(&p, bytes)?;
    Ok(p)
}

/// The manifest document with keys `config`, `derived_scalars`, `seeds`, `versions`.
pub fn manifest(config: &RunConfig, scalars: &DerivedScalars) -> Result<String> {
    let mut derived = json!({ "quintuple": scalars });
    if let Some(m) = &config.minus {
        derived["minus"] = serde_json::to_value(DerivedScalars::of(m)?)?;
    }
    let mut seeds = json!({
        "seed": config.sde.seed,
        "n_paths": config.sde.n_paths,
        "path_streams": "ChaCha8 keyed by seed, stream = path_id",
    });
    if config.mode == Mode::Validate {
        seeds["companion_seed"] = json!(companion_seed(config.sde.seed));
    }
    let doc = json!({
        "config": {
            "document": config.document,
            "resolved": {
                "mode": config.mode,
                "start": config.start,
                "skew": config.skew,
                "sde": config.sde,
                "thresholds": config.thresholds,
                "formats": config.formats,
            },
        },
        "derived_scalars": derived,
        "seeds": seeds,
        "versions": {
            "ssmp": env!("CARGO_PKG_VERSION"),
            "manifest_format": 1,
        },
    });
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

/// A killed Lévy path as a grid path: the cemetery `-∞` is entered at the kill time.
fn levy_as_sample_path(p: LevyPath) -> SamplePath {
    let mut out = SamplePath { times: p.times, values: p.values, ..SamplePath::default() };
    if let Some(k) = p.kill_time {
        out.times.push(k);
        out.values.push(f64::NEG_INFINITY);
        out.absorbed = true;
        out.absorption_time = Some(k);
    }
    out
}

enum Engine {
    Levy(LevyDriver),
    Lamperti(LevyDriver),
    Kiu(KiuStage, KiuStage),
    Sde(SdeModel),
    Approx(SdeModel),
    Abs(SdeModel),
}

impl Engine {
    fn new(config: &RunConfig) -> Result<Self> {
        let q = &config.quintuple;
        Ok(match config.mode {
            Mode::SimulateLevy => Engine::Levy(LevyDriver::new(&q.triplet)?),
            Mode::SimulateLamperti => Engine::Lamperti(LevyDriver::new(&q.triplet)?),
            Mode::SimulateKiu => {
                let plus = KiuStage::from_quintuple(q)?;
                let minus = match &config.minus {
                    Some(m) => KiuStage::from_quintuple(m)?,
                    None => plus.clone(),
                };
                Engine::Kiu(plus, minus)
            }
            Mode::SimulateSde => Engine::Sde(SdeModel::new(q, &config.sde)?),
            Mode::SimulateApprox => Engine::Approx(SdeModel::new(q, &config.sde)?.with_skew(config.skew)?),
            Mode::SimulateAbs => Engine::Abs(SdeModel::new(q, &config.sde)?),
            Mode::Validate => unreachable!("validate does not simulate a batch"),
        })
    }

    fn path(&self, config: &RunConfig, rng: &mut PathRng) -> Result<SamplePath> {
        let (z, horizon, dt) = (config.start, config.sde.horizon, config.sde.dt);
        match self {
            Engine::Levy(d) => {
                let mut p = LevyPath::empty();
                let mut g: LevyGenerator<'_> = d.start(rng);
                g.advance(horizon, dt, rng, &mut p);
                Ok(levy_as_sample_path(p))
            }
            Engine::Lamperti(d) => lamperti_positive_with(d, z, horizon, dt, rng),
            Engine::Kiu(plus, minus) => lamperti_kiu(plus, minus, z, horizon, dt, rng),
            Engine::Sde(m) => m.simulate(z, rng),
            Engine::Approx(m) => Ok(m.simulate_approx(z, rng)),
            Engine::Abs(m) => m.simulate_abs(z, rng),
        }
    }

    fn changes_sign(&self) -> bool {
        matches!(self, Engine::Kiu(..) | Engine::Sde(_) | Engine::Approx(_))
    }
}

fn simulate_batch(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let engine = Engine::new(config)?;
    let dir = &config.output_dir;
    let n = config.sde.n_paths as u64;
    let t_points = default_time_points(config.sde.horizon);
    let mut files = Vec::new();
    let mut paths_out = None;
    let mut signs_out = None;
    if config.formats.csv {
        let mut w = BufWriter::new(File::create(dir.join(PATHS_FILE))?);
        writeln!(w, "{PATH_CSV_HEADER}")?;
        paths_out = Some(w);
        files.push(dir.join(PATHS_FILE));
        if engine.changes_sign() {
            let mut w = BufWriter::new(File::create(dir.join(SIGN_CHANGES_FILE))?);
            writeln!(w, "{SIGN_CHANGE_CSV_HEADER}")?;
            signs_out = Some(w);
            files.push(dir.join(SIGN_CHANGES_FILE));
        }
    }
    let mut marginals: Vec<Vec<f64>> = vec![Vec::with_capacity(n as usize); t_points.len()];
    let mut absorbed_by: Vec<usize> = vec![0; t_points.len()];
    let mut sign_changes = 0u64;
    let mut lo = 0;
    while lo < n {
        let hi = (lo + BLOCK).min(n);
        let block: Vec<SamplePath> = (lo..hi)
            .into_par_iter()
            .map(|i| engine.path(config, &mut path_stream(config.sde.seed, i)))
            .collect::<Result<_>>()?;
        for (k, p) in block.iter().enumerate() {
            let id = lo + k as u64;
            if let Some(w) = paths_out.as_mut() {
                p.write_csv_rows(id, w)?;
            }
            if let Some(w) = signs_out.as_mut() {
                p.write_sign_changes(id, w)?;
            }
            sign_changes += p.sign_change_times.len() as u64;
            for (j, &t) in t_points.iter().enumerate() {
                marginals[j].push(value_at_time(p, t));
                if p.absorption_time.is_some_and(|t0| t0 <= t) {
                    absorbed_by[j] += 1;
                }
            }
        }
        lo = hi;
    }
    for w in [paths_out, signs_out].into_iter().flatten() {
        w.into_inner().map_err(|e| Error::Io(e.into_error()))?.sync_all()?;
    }
    if config.formats.json {
        let per_time: Vec<Value> = t_points
            .iter()
            .zip(&marginals)
            .zip(&absorbed_by)
            .map(|((&t, xs), &a)| marginal_summary(t, xs, a))
            .collect();
        let doc = json!({
            "mode": config.mode,
            "start": config.start,
            "n_paths": n,
            "seed": config.sde.seed,
            "mean_sign_changes": sign_changes as f64 / n.max(1) as f64,
            "time_points": per_time,
        });
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        files.push(write_file(dir, SUMMARY_FILE, s.as_bytes())?);
    }
    Ok(files)
}

/// Mean, spread and quantiles of the finite values at one time point.
fn marginal_summary(t: f64, xs: &[f64], absorbed: usize) -> Value {
    let mut finite: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let n = finite.len();
    let mean = finite.iter().sum::<f64>() / n.max(1) as f64;
    let var = if n > 1 {
        finite.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let q = |p: f64| -> Value {
        if n == 0 {
            Value::Null
        } else {
            json!(finite[((p * (n - 1) as f64).round() as usize).min(n - 1)])
        }
    };
    json!({
        "time": t,
        "n_finite": n,
        "mean": if n > 0 { json!(mean) } else { Value::Null },
        "std": if n > 1 { json!(var.sqrt()) } else { Value::Null },
        "fraction_absorbed": absorbed as f64 / xs.len().max(1) as f64,
        "fraction_zero": xs.iter().filter(|x| **x == 0.0).count() as f64 / xs.len().max(1) as f64,
        "fraction_negative": xs.iter().filter(|x| **x < 0.0).count() as f64 / xs.len().max(1) as f64,
        "quantiles": {
            "0.05": q(0.05), "0.25": q(0.25), "0.5": q(0.5), "0.75": q(0.75), "0.95": q(0.95),
        },
    })
}
