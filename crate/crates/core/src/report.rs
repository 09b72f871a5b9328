//! Bound ledgers and report serialization.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped(String),
}

/// One checked inequality: `measured` against `threshold`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub name: String,
    /// What is being claimed, in words.
    pub claim: String,
    pub measured: Option<f64>,
    pub threshold: Option<f64>,
    pub verdict: Verdict,
    /// Whether a failure counts against the exit status.
    pub enforced: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Ledger {
    pub checks: Vec<BoundCheck>,
}

impl Ledger {
    pub fn new() -> Self {
        Ledger::default()
    }

    fn push(&mut self, name: &str, claim: &str, measured: f64, threshold: f64, ok: bool, enforced: bool) {
        self.checks.push(BoundCheck {
            name: name.into(),
            claim: claim.into(),
            measured: Some(measured),
            threshold: Some(threshold),
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            enforced,
        });
    }

    /// Records `measured <= threshold`.
    pub fn at_most(&mut self, name: &str, claim: &str, measured: f64, threshold: f64, enforced: bool) {
        self.push(name, claim, measured, threshold, measured <= threshold, enforced);
    }

    /// Records `measured >= threshold`.
    pub fn at_least(&mut self, name: &str, claim: &str, measured: f64, threshold: f64, enforced: bool) {
        self.push(name, claim, measured, threshold, measured >= threshold, enforced);
    }

    /// Records a yes/no property as 1/0 against 1.
    pub fn holds(&mut self, name: &str, claim: &str, ok: bool, enforced: bool) {
        let v = if ok { 1.0 } else { 0.0 };
        self.push(name, claim, v, 1.0, ok, enforced);
    }

    pub fn skip(&mut self, name: &str, claim: &str, reason: &str) {
        self.checks.push(BoundCheck {
            name: name.into(),
            claim: claim.into(),
            measured: None,
            threshold: None,
            verdict: Verdict::Skipped(reason.into()),
            enforced: false,
        });
    }

    pub fn extend(&mut self, other: Ledger) {
        self.checks.extend(other.checks);
    }

    pub fn enforced_failures(&self) -> Vec<&BoundCheck> {
        self.checks
            .iter()
            .filter(|c| c.enforced && c.verdict == Verdict::Fail)
            .collect()
    }

    pub fn all_pass(&self) -> bool {
        self.enforced_failures().is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Hex SHA-256 of a serializable value's JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Version string embedded in every report.
pub fn version_string() -> String {
    match option_env!("EWA_MCMC_GIT_DESCRIBE") {
        Some(g) => format!("v{}-{}", env!("CARGO_PKG_VERSION"), g),
        None => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

/// CSV `k,tv,bound`.
pub fn write_tv_csv<W: Write>(tv: &[f64], bound: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "k,tv,bound")?;
    for (k, (t, b)) in tv.iter().zip(bound).enumerate() {
        writeln!(out, "{k},{t:.16e},{b:.16e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_verdicts() {
        let mut l = Ledger::new();
        l.at_most("a", "a <= 1", 0.5, 1.0, true);
        l.at_least("b", "b >= 1", 0.5, 1.0, false);
        l.skip("c", "needs enumeration", "skipped: over cap");
        assert!(l.all_pass());
        l.at_most("d", "d <= 1", 2.0, 1.0, true);
        assert_eq!(l.enforced_failures().len(), 1);
        assert_eq!(l.get("b").unwrap().verdict, Verdict::Fail);
        let json = serde_json::to_string(&l.get("c").unwrap().verdict).unwrap();
        assert_eq!(json, r#"{"status":"skipped","reason":"skipped: over cap"}"#);
    }

    #[test]
    fn hash_is_stable() {
        let a = config_hash(&vec![1, 2, 3]).unwrap();
        assert_eq!(a, config_hash(&vec![1, 2, 3]).unwrap());
        assert_ne!(a, config_hash(&vec![1, 2, 4]).unwrap());
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn tv_csv_rows() {
        let mut buf = Vec::new();
        write_tv_csv(&[0.5, 0.25], &[1.0, 0.9], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("k,tv,bound\n0,"));
    }
}
