//! Exact transition matrix, detailed balance and the spectral gap against
//! the 60 p s* bound over a range of p.
//!
//! cargo run --release --example spectral_gap

use ewa_mcmc::oracle::{check_assumptions, check_events, theorem_gap_bound};
use ewa_mcmc::{build_exact_chain, generate_instance, ExperimentConfig};

fn main() -> ewa_mcmc::Result<()> {
    println!(
        "{:>3} {:>3} {:>10} {:>10} {:>10} {:>6}",
        "p", "s*", "1/gap", "60ps*", "balance", "good"
    );
    for p in 5..=9 {
        for s_star in [1, 2] {
            let g = generate_instance(
                &ExperimentConfig {
                    p,
                    s_star,
                    ..ExperimentConfig::default()
                },
                2,
            )?;
            let chain = build_exact_chain(&g.inst, &g.cfg)?;
            let good = check_events(&g.inst, &g.cfg)?.h_n && check_assumptions(&g.inst, &g.cfg)?.holds;
            println!(
                "{p:>3} {s_star:>3} {:>10.3} {:>10.0} {:>10.1e} {good:>6}",
                1.0 / chain.spectral_gap(false),
                theorem_gap_bound(&g.inst),
                chain.detailed_balance_error()
            );
        }
    }
    Ok(())
}
