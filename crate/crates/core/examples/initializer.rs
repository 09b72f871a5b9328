//! Thresholded lasso: fit, threshold, and the size and risk guarantees.
//!
//! cargo run --release --example initializer

use std::path::Path;

use ewa_mcmc::{generate_instance, ExperimentConfig};

fn main() -> ewa_mcmc::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/initializer-ensemble.toml");
    let e = ExperimentConfig::from_file(&path)?;
    let seeds = &e.effective_seeds()[..10];
    println!(
        "alpha = {}, failure probability bound {:.4}",
        e.lasso.alpha,
        e.lasso.failure_probability(e.p)
    );
    for &seed in seeds {
        let g = generate_instance(&e, seed)?;
        let r = g.init.as_ref().expect("lasso initializer");
        println!(
            "seed {seed}: support {:?}, T-hat {:?}, kappa {:.3}, threshold {:.2}, risk {:.2e} <= {:.2}, KKT {:.1e}, {} sweeps",
            g.inst.support().indices().collect::<Vec<_>>(),
            r.t_hat,
            r.kappa,
            r.threshold,
            r.risk_norm,
            r.risk_bound,
            r.kkt_residual,
            r.sweeps
        );
    }
    Ok(())
}
