//! Run the lazy chain and compare its visit frequencies with the exact
//! posterior on a weak-signal instance where the posterior is spread out.
//!
//! cargo run --release --example sampler

use std::path::Path;

use ewa_mcmc::oracle::tv_distance;
use ewa_mcmc::{exact_distribution, generate_instance, run_chain, ExperimentConfig};

fn main() -> ewa_mcmc::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/flat.toml");
    let e = ExperimentConfig::from_file(&path)?;
    let g = generate_instance(&e, 42)?;
    let post = exact_distribution(&g.inst, &g.cfg)?;
    for steps in [1_000, 10_000, 100_000] {
        let trace = run_chain(&g.inst, &g.cfg, steps, true)?;
        let acc = trace.accepts.iter().filter(|a| **a).count() as f64 / steps as f64;
        let tv = tv_distance(&trace.histogram(), post.probs());
        println!("{steps:>7} lazy steps: acceptance {acc:.3}, TV to exact pi {tv:.4}");
    }
    Ok(())
}
