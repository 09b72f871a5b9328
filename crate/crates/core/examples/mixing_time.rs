//! Exact TV decay from T-hat against the spectral bound, and mixing times.
//!
//! cargo run --example mixing_time

use std::path::Path;

use ewa_mcmc::{build_exact_chain, generate_instance, ExperimentConfig};

fn main() -> ewa_mcmc::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/flat.toml");
    let g = generate_instance(&ExperimentConfig::from_file(&path)?, 42)?;
    let chain = build_exact_chain(&g.inst, &g.cfg)?;
    let start = g.cfg.t_hat;
    let tv = chain.tv_decay(start, 200);
    println!("{:>4} {:>12} {:>12}", "k", "tv", "bound");
    for k in [0, 1, 2, 5, 10, 20, 50, 100, 200] {
        println!("{k:>4} {:>12.4e} {:>12.4e}", tv[k], chain.tv_bound(start, k));
    }
    for eps in [0.25, 0.05, 0.01] {
        let m = chain.mixing_time(&g.inst, &g.cfg, start, eps)?;
        println!(
            "eps {eps}: exact {:?}, spectral bound {:.1}, closed form {:.0}",
            m.exact, m.analytic, m.theorem
        );
    }
    Ok(())
}
