//! The full pipeline on the golden config, printing the bound ledger.
//! Artifacts go to a temporary directory unless EWA_MCMC_OUTPUT_DIR is set.
//!
//! cargo run --release --example pipeline

use std::path::Path;

use ewa_mcmc::harness::OUTPUT_DIR_ENV;
use ewa_mcmc::{run_pipeline, ExperimentConfig, Stages, Verdict};

fn main() -> ewa_mcmc::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/golden.toml");
    let mut e = ExperimentConfig::from_file(&path)?;
    e.outputs = std::env::temp_dir().join("ewa-mcmc-golden");
    let (summary, reports) = run_pipeline(&e, Stages::ALL, true)?;
    for c in &reports[0].ledger.checks {
        let v = match &c.verdict {
            Verdict::Pass => "pass".to_string(),
            Verdict::Fail => "FAIL".to_string(),
            Verdict::Skipped(r) => r.clone(),
        };
        let kind = if c.enforced { "enforced" } else { "info" };
        println!("{:<24} {:<9} {:<6} {}", c.name, kind, v, c.claim);
    }
    let out = std::env::var(OUTPUT_DIR_ENV).map_or(e.outputs.clone(), Into::into);
    println!(
        "config {} -> {}: {}",
        &summary.config_hash[..12],
        out.display(),
        if summary.all_pass() { "all pass" } else { "failures" }
    );
    Ok(())
}
