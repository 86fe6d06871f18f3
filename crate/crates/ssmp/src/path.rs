//! Sample paths of the real-valued process and their delimited-text export.

use std::io::Write;

use serde::Serialize;

/// One multiplicative jump `after = before * factor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRecord {
    pub time: f64,
    pub before: f64,
    pub after: f64,
    pub factor: f64,
}

/// A path on a non-decreasing time grid.
///
/// After `absorption_time` every value is exactly zero. Sign changes happen
/// only at the recorded `sign_change_times`.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub absorbed: bool,
    pub absorption_time: Option<f64>,
    pub sign_change_times: Vec<f64>,
    /// Jumps are recorded only when the caller asks for them.
    pub jumps: Vec<JumpRecord>,
}

impl SamplePath {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            ..Self::default()
        }
    }

    pub fn push(&mut self, time: f64, value: f64) {
        self.times.push(time);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_value(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// Value at the last grid time `<= t`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            None
        } else {
            Some(self.values[idx - 1])
        }
    }

    /// Writes rows `path_id,time,value,absorbed`. `absorbed` is 1 on rows at
    /// or after the absorption time.
    pub fn write_csv_rows<W: Write>(&self, path_id: u64, out: &mut W) -> std::io::Result<()> {
        for (t, v) in self.times.iter().zip(&self.values) {
            let absorbed = match self.absorption_time {
                Some(t0) => *t >= t0,
                None => false,
            };
            writeln!(out, "{path_id},{},{},{}", fmt_f64(*t), fmt_f64(*v), absorbed as u8)?;
        }
        Ok(())
    }

    /// Sidecar rows `path_id,index,time` for the sign-change times.
    pub fn write_sign_changes<W: Write>(&self, path_id: u64, out: &mut W) -> std::io::Result<()> {
        for (i, t) in self.sign_change_times.iter().enumerate() {
            writeln!(out, "{path_id},{i},{}", fmt_f64(*t))?;
        }
        Ok(())
    }
}

pub const PATH_CSV_HEADER: &str = "path_id,time,value,absorbed";
pub const SIGN_CHANGE_CSV_HEADER: &str = "path_id,index,time";

/// Shortest representation that round-trips through `f64::from_str`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Pointwise absolute value; absorption and sign-change metadata are kept.
pub fn fold_to_abs(path: &SamplePath) -> SamplePath {
    SamplePath {
        values: path.values.iter().map(|v| v.abs()).collect(),
        jumps: path
            .jumps
            .iter()
            .map(|j| JumpRecord {
                time: j.time,
                before: j.before.abs(),
                after: j.after.abs(),
                factor: j.factor.abs(),
            })
            .collect(),
        ..path.clone()
    }
}

/// Uniform grid `0, dt, 2dt, ..., horizon` (the last step may be shorter).
pub fn uniform_grid(horizon: f64, dt: f64) -> Vec<f64> {
    let n = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    let mut grid: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    grid.push(horizon);
    grid
}
