//! `key: value` documents for run reports and calibration files.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! a document gives back the exact bits that were written.

use std::fmt::Display;
use std::str::FromStr;

use uhdtest::tuning::{CalibrationParams, CalibrationResult};
use uhdtest::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: Vec<(String, String)>,
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Display) -> &mut Self {
        let v = value.to_string();
        debug_assert!(!v.contains('\n'), "values are single-line");
        self.entries.push((key.to_string(), v));
        self
    }

    pub fn push_list<T: Display>(&mut self, key: &str, values: &[T]) -> &mut Self {
        let joined = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        self.push(key, joined)
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once(": ")
                .or_else(|| line.strip_suffix(':').map(|k| (k, "")))
                .ok_or_else(|| Error::Parse(format!("line {}: expected 'key: value'", i + 1)))?;
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Parse(format!("missing key '{key}'")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self.raw(key)?;
        raw.parse::<T>().map_err(|e| Error::Parse(format!("{key}: '{raw}': {e}")))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        let raw = self.raw(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| s.parse::<T>().map_err(|e| Error::Parse(format!("{key}: '{s}': {e}"))))
            .collect()
    }

    fn check_schema(&self, kind: &str) -> Result<()> {
        let version: u32 = self.get("schema_version")?;
        if version != SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported schema_version {version}")));
        }
        let found = self.raw("kind")?;
        if found != kind {
            return Err(Error::Parse(format!("expected a {kind} document, found {found}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub tool_version: String,
    pub reject: bool,
    pub dr: f64,
    pub delta: f64,
    pub delta_source: String,
    pub alpha: f64,
    pub theta: f64,
    pub theta_source: String,
    pub n: usize,
    pub k_splits: usize,
    pub n_auto_reject: usize,
    pub n_efficient: usize,
    pub n_discarded: usize,
    pub rounds: usize,
    pub eps: f64,
    pub eps1: f64,
    pub seed: u64,
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
}

impl RunReport {
    pub fn verdict(&self) -> &'static str {
        if self.reject {
            "reject"
        } else {
            "accept"
        }
    }

    pub fn to_doc(&self) -> KvDoc {
        let mut d = KvDoc::new();
        d.push("schema_version", SCHEMA_VERSION)
            .push("kind", "run_report")
            .push("tool_version", &self.tool_version)
            .push("verdict", self.verdict())
            .push("dr", self.dr)
            .push("delta", self.delta)
            .push("delta_source", &self.delta_source)
            .push("alpha", self.alpha)
            .push("theta", self.theta)
            .push("theta_source", &self.theta_source)
            .push("n", self.n)
            .push("k_splits", self.k_splits)
            .push("n_auto_reject", self.n_auto_reject)
            .push("n_efficient", self.n_efficient)
            .push("n_discarded", self.n_discarded)
            .push("rounds", self.rounds)
            .push("eps", self.eps)
            .push("eps1", self.eps1)
            .push("seed", self.seed)
            .push("n1", self.n1)
            .push("n2", self.n2)
            .push("p", self.p);
        d
    }

    pub fn render(&self) -> String {
        self.to_doc().render()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let d = KvDoc::parse(text)?;
        d.check_schema("run_report")?;
        let reject = match d.raw("verdict")? {
            "reject" => true,
            "accept" => false,
            other => return Err(Error::Parse(format!("unknown verdict '{other}'"))),
        };
        Ok(Self {
            tool_version: d.get("tool_version")?,
            reject,
            dr: d.get("dr")?,
            delta: d.get("delta")?,
            delta_source: d.get("delta_source")?,
            alpha: d.get("alpha")?,
            theta: d.get("theta")?,
            theta_source: d.get("theta_source")?,
            n: d.get("n")?,
            k_splits: d.get("k_splits")?,
            n_auto_reject: d.get("n_auto_reject")?,
            n_efficient: d.get("n_efficient")?,
            n_discarded: d.get("n_discarded")?,
            rounds: d.get("rounds")?,
            eps: d.get("eps")?,
            eps1: d.get("eps1")?,
            seed: d.get("seed")?,
            n1: d.get("n1")?,
            n2: d.get("n2")?,
            p: d.get("p")?,
        })
    }
}

pub fn render_calibration(c: &CalibrationResult) -> String {
    let p = &c.params;
    let mut d = KvDoc::new();
    d.push("schema_version", SCHEMA_VERSION)
        .push("kind", "calibration")
        .push("delta", c.delta)
        .push("b", c.b)
        .push("n1", p.n1)
        .push("n2", p.n2)
        .push("n", p.n)
        .push("p", p.p)
        .push("k_splits", p.k_splits)
        .push("alpha", p.alpha)
        .push("theta", p.theta)
        .push("seed", p.seed)
        .push_list("dr_samples", &c.dr_samples);
    d.render()
}

pub fn parse_calibration(text: &str) -> Result<CalibrationResult> {
    let d = KvDoc::parse(text)?;
    d.check_schema("calibration")?;
    let dr_samples: Vec<f64> = d.list("dr_samples")?;
    let b: usize = d.get("b")?;
    if dr_samples.len() != b {
        return Err(Error::Parse(format!("calibration lists {} samples but b = {b}", dr_samples.len())));
    }
    Ok(CalibrationResult {
        delta: d.get("delta")?,
        dr_samples,
        b,
        params: CalibrationParams {
            n1: d.get("n1")?,
            n2: d.get("n2")?,
            n: d.get("n")?,
            p: d.get("p")?,
            k_splits: d.get("k_splits")?,
            alpha: d.get("alpha")?,
            theta: d.get("theta")?,
            seed: d.get("seed")?,
        },
    })
}
