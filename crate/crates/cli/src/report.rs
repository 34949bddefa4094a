use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::args::RunArgs;
use crate::CliResult;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Flags {
    pub tau: Vec<f64>,
    pub eps: f64,
    pub step: f64,
    pub tol_red: f64,
    pub margin: f64,
    pub grid: usize,
}

impl From<&RunArgs> for Flags {
    fn from(a: &RunArgs) -> Self {
        Self {
            tau: a.tau.clone(),
            eps: a.eps,
            step: a.step,
            tol_red: a.tol_red,
            margin: a.margin,
            grid: a.grid,
        }
    }
}

/// Summary of one command run. Wall time is kept out of the serialized
/// form so that reruns write identical files.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub problem: String,
    pub params: BTreeMap<String, f64>,
    pub flags: Flags,
    pub outputs: Vec<PathBuf>,
    pub verdicts: BTreeMap<String, String>,
    pub max_residuals: BTreeMap<String, f64>,
    /// Error messages and other remarks, keyed like `verdicts`.
    pub notes: BTreeMap<String, String>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

pub const FAIL: &str = "fail";
pub const PASS: &str = "pass";

pub fn pass_fail(ok: bool) -> String {
    if ok { PASS } else { FAIL }.to_string()
}

impl RunReport {
    pub fn new(command: &str, problem: &str, params: BTreeMap<String, f64>, args: &RunArgs) -> Self {
        Self {
            command: command.to_string(),
            problem: problem.to_string(),
            params,
            flags: Flags::from(args),
            outputs: Vec::new(),
            verdicts: BTreeMap::new(),
            max_residuals: BTreeMap::new(),
            notes: BTreeMap::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn verdict(&mut self, key: impl Into<String>, verdict: impl Into<String>) {
        self.verdicts.insert(key.into(), verdict.into());
    }

    pub fn note(&mut self, key: impl Into<String>, note: impl Into<String>) {
        self.notes.insert(key.into(), note.into());
    }

    pub fn failures(&self) -> Vec<(&str, &str)> {
        self.verdicts
            .iter()
            .filter(|(_, v)| v.as_str() == FAIL)
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    /// Writes the report as `<out>/<problem>-<command>.report.json`, listing
    /// itself among the outputs.
    pub fn write(&mut self, out: &Path) -> CliResult<PathBuf> {
        let path = out.join(format!("{}-{}.report.json", self.problem, self.command));
        self.outputs.push(path.clone());
        write_json(&path, self)?;
        Ok(path)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Keeps `[A-Za-z0-9._-]` and replaces everything else with `_`.
pub fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems() {
        assert_eq!(file_stem("key-yellow-tau0.3"), "key-yellow-tau0.3");
        assert_eq!(file_stem("a b/c"), "a_b_c");
    }
}
