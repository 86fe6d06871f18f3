//! Configuration documents.
//!
//! A run is described by one JSON document. Measures and quintuples are
//! parsed by hand so that every error names the offending key path; the
//! flat numeric blocks (`sde`, `thresholds`) go through serde.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::jump_sde::SdeConfig;
use crate::measures::{Density, JumpMeasureSpec, LevyTriplet, Quintuple};
use crate::validate::Thresholds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SimulateLevy,
    SimulateLamperti,
    SimulateKiu,
    SimulateSde,
    SimulateApprox,
    SimulateAbs,
    Validate,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::SimulateLevy,
        Mode::SimulateLamperti,
        Mode::SimulateKiu,
        Mode::SimulateSde,
        Mode::SimulateApprox,
        Mode::SimulateAbs,
        Mode::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::SimulateLevy => "simulate-levy",
            Mode::SimulateLamperti => "simulate-lamperti",
            Mode::SimulateKiu => "simulate-kiu",
            Mode::SimulateSde => "simulate-sde",
            Mode::SimulateApprox => "simulate-approx",
            Mode::SimulateAbs => "simulate-abs",
            Mode::Validate => "validate",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Self { csv: true, json: true }
    }
}

/// Everything a run needs. `document` is the parsed input, echoed into the manifest.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub quintuple: Quintuple,
    /// Stage used on the negative half-line by `simulate-kiu`; defaults to `quintuple`.
    pub minus: Option<Quintuple>,
    pub start: f64,
    pub skew: f64,
    pub sde: SdeConfig,
    pub thresholds: Thresholds,
    pub output_dir: PathBuf,
    pub formats: Formats,
    pub document: Value,
}

impl RunConfig {
    pub fn from_file(path: &Path, mode: Option<Mode>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text, mode)
    }

    /// Parse a document. A `mode` argument takes precedence over a `mode` key.
    pub fn from_str(text: &str, mode: Option<Mode>) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::config("$", e.to_string()))?;
        Self::from_value(doc, mode)
    }

    pub fn from_value(doc: Value, mode: Option<Mode>) -> Result<Self> {
        let root = object(&doc, "$")?;
        check_keys(
            root,
            "$",
            &["mode", "quintuple", "minus", "start", "skew", "sde", "thresholds", "output"],
        )?;
        let mode = match (mode, root.get("mode")) {
            (Some(m), _) => m,
            (None, Some(v)) => {
                let s = v.as_str().ok_or_else(|| Error::config("mode", "expected a string"))?;
                Mode::parse(s).ok_or_else(|| Error::config("mode", format!("unknown mode `{s}`")))?
            }
            (None, None) => return Err(Error::config("mode", "missing")),
        };
        let quintuple = parse_quintuple(required(root, "quintuple", "$")?, "quintuple")?;
        let minus = root.get("minus").map(|v| parse_quintuple(v, "minus")).transpose()?;
        let start = optional_number(root, "start", "$")?.unwrap_or(match mode {
            Mode::SimulateApprox | Mode::SimulateAbs => 0.0,
            _ => 1.0,
        });
        let skew = optional_number(root, "skew", "$")?.unwrap_or(0.0);
        let sde: SdeConfig = typed_block(root, "sde")?;
        let thresholds: Thresholds = typed_block(root, "thresholds")?;
        let (output_dir, formats) = parse_output(root.get("output"))?;
        let cfg = Self {
            mode,
            quintuple,
            minus,
            start,
            skew,
            sde,
            thresholds,
            output_dir,
            formats,
            document: doc,
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Mode-specific requirements.
    pub fn check(&self) -> Result<()> {
        self.sde.validate("sde")?;
        if !self.start.is_finite() {
            return Err(Error::config("start", "must be finite"));
        }
        if !(self.skew.abs() <= 1.0) {
            return Err(Error::config("skew", "must lie in [-1, 1]"));
        }
        match self.mode {
            Mode::SimulateLamperti if self.start <= 0.0 => {
                Err(Error::config("start", "simulate-lamperti needs start > 0"))
            }
            Mode::SimulateKiu | Mode::SimulateSde if self.start == 0.0 => Err(Error::config(
                "start",
                format!("{} cannot start at 0; use simulate-approx", self.mode.name()),
            )),
            Mode::SimulateAbs if self.start < 0.0 => {
                Err(Error::config("start", "simulate-abs needs start >= 0"))
            }
            _ => Ok(()),
        }
    }
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::config(path, "expected an object"))
}

fn join(path: &str, key: &str) -> String {
    if path == "$" {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn check_keys(map: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<()> {
    for k in map.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::config(
                join(path, k),
                format!("unknown key; expected one of {}", allowed.join(", ")),
            ));
        }
    }
    Ok(())
}

fn required<'a>(map: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    map.get(key).ok_or_else(|| Error::config(join(path, key), "missing"))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::config(path, "expected a number"))
}

fn optional_number(map: &Map<String, Value>, key: &str, path: &str) -> Result<Option<f64>> {
    map.get(key).map(|v| number(v, &join(path, key))).transpose()
}

fn typed_block<T: for<'de> Deserialize<'de> + Default>(root: &Map<String, Value>, key: &str) -> Result<T> {
    match root.get(key) {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::config(key, e.to_string())),
    }
}

fn parse_output(v: Option<&Value>) -> Result<(PathBuf, Formats)> {
    let Some(v) = v else {
        return Ok((PathBuf::from("out"), Formats::default()));
    };
    let map = object(v, "output")?;
    check_keys(map, "output", &["dir", "formats"])?;
    let dir = match map.get("dir") {
        None => PathBuf::from("out"),
        Some(d) => PathBuf::from(d.as_str().ok_or_else(|| Error::config("output.dir", "expected a string"))?),
    };
    let formats = match map.get("formats") {
        None => Formats::default(),
        Some(f) => {
            let list = f
                .as_array()
                .ok_or_else(|| Error::config("output.formats", "expected a list"))?;
            let mut fm = Formats { csv: false, json: false };
            for (i, item) in list.iter().enumerate() {
                match item.as_str() {
                    Some("csv") => fm.csv = true,
                    Some("json") => fm.json = true,
                    _ => {
                        return Err(Error::config(
                            format!("output.formats[{i}]"),
                            "expected \"csv\" or \"json\"",
                        ))
                    }
                }
            }
            fm
        }
    };
    Ok((dir, formats))
}

/// A quintuple: `{a | psi1, sigma2, q, pi, v}`. `psi1` fixes the drift through `Ψ(1)`.
pub fn parse_quintuple(v: &Value, path: &str) -> Result<Quintuple> {
    let map = object(v, path)?;
    check_keys(map, path, &["a", "psi1", "sigma2", "q", "pi", "v"])?;
    let sigma2 = optional_number(map, "sigma2", path)?.unwrap_or(0.0);
    let q = optional_number(map, "q", path)?.unwrap_or(0.0);
    let pi = match map.get("pi") {
        Some(m) => parse_measure(m, &join(path, "pi"))?,
        None => JumpMeasureSpec::zero(),
    };
    let v_measure = match map.get("v") {
        Some(m) => parse_measure(m, &join(path, "v"))?,
        None => JumpMeasureSpec::zero(),
    };
    let rebase = |e: Error| match e {
        Error::Config { path: p, message } => {
            // the triplet validator names its own fields `triplet.x`
            let field = p.rsplit_once("triplet.").map_or(p.as_str(), |(_, f)| f);
            Error::config(join(path, field), message)
        }
        other => other,
    };
    let triplet = match (map.get("a"), map.get("psi1")) {
        (Some(_), Some(_)) => {
            return Err(Error::config(join(path, "psi1"), "give either `a` or `psi1`, not both"))
        }
        (Some(a), None) => LevyTriplet::new(number(a, &join(path, "a"))?, sigma2, pi, q),
        (None, Some(p)) => LevyTriplet::with_psi1(number(p, &join(path, "psi1"))?, sigma2, pi, q),
        (None, None) => LevyTriplet::new(0.0, sigma2, pi, q),
    }
    .map_err(rebase)?;
    let quintuple = Quintuple { triplet, v: v_measure };
    quintuple.validate("quintuple").map_err(|e| match e {
        Error::Config { path: p, message } => {
            let tail = p.strip_prefix("quintuple.").unwrap_or(&p);
            let tail = tail.strip_prefix("triplet.").unwrap_or(tail);
            Error::config(join(path, tail), message)
        }
        other => other,
    })?;
    Ok(quintuple)
}

/// A measure: `{atoms: [{location, mass}], densities: [{family, ...}], small_jump_cutoff}`.
pub fn parse_measure(v: &Value, path: &str) -> Result<JumpMeasureSpec> {
    let map = object(v, path)?;
    check_keys(map, path, &["atoms", "densities", "small_jump_cutoff"])?;
    let mut spec = JumpMeasureSpec::zero();
    if let Some(atoms) = map.get("atoms") {
        let list = atoms
            .as_array()
            .ok_or_else(|| Error::config(join(path, "atoms"), "expected a list"))?;
        for (i, a) in list.iter().enumerate() {
            let p = format!("{path}.atoms[{i}]");
            let m = object(a, &p)?;
            check_keys(m, &p, &["location", "mass"])?;
            let location = number(required(m, "location", &p)?, &join(&p, "location"))?;
            let mass = number(required(m, "mass", &p)?, &join(&p, "mass"))?;
            if !(mass >= 0.0 && mass.is_finite()) {
                return Err(Error::config(join(&p, "mass"), "must be finite and >= 0"));
            }
            spec = spec.with_atom(location, mass);
        }
    }
    if let Some(densities) = map.get("densities") {
        let list = densities
            .as_array()
            .ok_or_else(|| Error::config(join(path, "densities"), "expected a list"))?;
        for (i, d) in list.iter().enumerate() {
            let p = format!("{path}.densities[{i}]");
            spec = spec.with_density(parse_density(d, &p)?);
        }
    }
    if let Some(c) = optional_number(map, "small_jump_cutoff", path)? {
        spec = spec.with_cutoff(c);
    }
    Ok(spec)
}

fn parse_density(v: &Value, path: &str) -> Result<Density> {
    let m = object(v, path)?;
    let family = required(m, "family", path)?
        .as_str()
        .ok_or_else(|| Error::config(join(path, "family"), "expected a string"))?;
    let get = |k: &str| -> Result<f64> { number(required(m, k, path)?, &join(path, k)) };
    match family {
        "exponential" => {
            check_keys(m, path, &["family", "c", "beta"])?;
            Ok(Density::exponential(get("c")?, get("beta")?))
        }
        "truncated_stable" => {
            check_keys(m, path, &["family", "c", "alpha"])?;
            Ok(Density::truncated_stable(get("c")?, get("alpha")?))
        }
        "uniform" => {
            check_keys(m, path, &["family", "c", "lo", "hi"])?;
            Ok(Density::uniform(get("c")?, get("lo")?, get("hi")?))
        }
        other => Err(Error::config(
            join(path, "family"),
            format!("unknown family `{other}`; expected exponential, truncated_stable or uniform"),
        )),
    }
}
