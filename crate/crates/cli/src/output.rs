use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Formats a float with 12 significant digits, shortest form.
pub fn fmt_f(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    if (1e-5..1e16).contains(&rounded.abs()) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

/// Rounds every float in a JSON tree to 12 significant digits.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or_default();
            let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
            serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
        }
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_json).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// One run's output directory and the files written to it.
pub struct RunDir {
    pub dir: PathBuf,
    pub artifacts: Vec<String>,
    pub verdicts: BTreeMap<String, bool>,
    started: Instant,
}

impl RunDir {
    pub fn create(root: &Path, command: &str, label: Option<&str>) -> Result<Self> {
        let name = match label {
            Some(l) => l.to_string(),
            None => chrono::Local::now().format("%Y%m%dT%H%M%S%.3f").to_string(),
        };
        let dir = root.join(command).join(name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(RunDir { dir, artifacts: Vec::new(), verdicts: BTreeMap::new(), started: Instant::now() })
    }

    pub fn verdict(&mut self, name: &str, ok: bool) {
        self.verdicts.insert(name.to_string(), ok);
    }

    pub fn write_json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<()> {
        let v = round_json(serde_json::to_value(value)?);
        let path = self.dir.join(file);
        fs::write(&path, serde_json::to_string_pretty(&v)? + "\n").with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.push(file.to_string());
        Ok(())
    }

    pub fn write_csv(&mut self, file: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.dir.join(file);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.artifacts.push(file.to_string());
        Ok(())
    }

    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }

    /// Writes `run_report.json` and returns whether every verdict passed.
    pub fn finish(mut self, command: &str, config: Value, seed: Option<u64>) -> Result<(bool, PathBuf)> {
        let pass = self.passed();
        let report = RunReport {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            verdicts: self.verdicts.clone(),
            pass,
            artifacts: self.artifacts.iter().cloned().chain(["run_report.json".to_string()]).collect(),
        };
        let path = self.dir.join("run_report.json");
        self.artifacts.push("run_report.json".into());
        fs::write(&path, serde_json::to_string_pretty(&round_json(serde_json::to_value(&report)?))? + "\n")?;
        Ok((pass, self.dir))
    }
}

#[derive(Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub wall_time_s: f64,
    pub verdicts: BTreeMap<String, bool>,
    pub pass: bool,
    pub artifacts: Vec<String>,
}

pub fn b(x: bool) -> String {
    x.to_string()
}
