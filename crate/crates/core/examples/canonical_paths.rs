//! The parent-map tree, edge loadings and the Sinclair bound. Writes the
//! tree as DOT to stdout when given `--dot`.
//!
//! cargo run --example canonical_paths [-- --dot]

use ewa_mcmc::paths::Direction;
use ewa_mcmc::{analyze_paths, build_exact_chain, generate_instance, ExperimentConfig};

fn main() -> ewa_mcmc::Result<()> {
    let e = ExperimentConfig {
        p: 7,
        s_star: 2,
        ..ExperimentConfig::default()
    };
    let g = generate_instance(&e, 1)?;
    let chain = build_exact_chain(&g.inst, &g.cfg)?;
    let pa = analyze_paths(&g.inst, &g.cfg, chain.posterior())?;
    if std::env::args().any(|a| a == "--dot") {
        return pa.tree.write_dot(std::io::stdout().lock());
    }
    println!(
        "root T = {}, T-hat = {}, {} edges",
        pa.tree.root(),
        g.cfg.t_hat,
        pa.tree.edge_count()
    );
    let mut heavy: Vec<_> = pa.loadings.iter().collect();
    heavy.sort_by(|a, b| b.rho().total_cmp(&a.rho()));
    for e in heavy.iter().take(5) {
        let dir = match e.direction {
            Direction::Up => "up",
            Direction::Down => "down",
        };
        println!(
            "{} -> {} ({dir}): rho exact {:.4}, descendant-mass formula {:.4}",
            e.from,
            e.to,
            e.rho_exact.unwrap_or(f64::NAN),
            e.rho_bound
        );
    }
    let gap = chain.spectral_gap(false);
    println!(
        "1/gap = {:.3} <= (max path length {}) x (max rho {:.3}) = {:.3}",
        1.0 / gap,
        pa.max_path_length,
        pa.max_rho,
        pa.sinclair
    );
    Ok(())
}
