//! Log-weights and the exact posterior over all 2^p states of the golden
//! instance.
//!
//! cargo run --example posterior

use ewa_mcmc::{exact_distribution, generate_instance, log_ratio, ExperimentConfig};

fn main() -> ewa_mcmc::Result<()> {
    let g = generate_instance(&ExperimentConfig::default(), 42)?;
    let (inst, cfg) = (&g.inst, &g.cfg);
    println!(
        "n = {}, p = {}, true support {}, T-hat {}",
        inst.n(),
        inst.p(),
        inst.support(),
        cfg.t_hat
    );
    println!(
        "beta = {}, D = {:.3}, L = {:.3}, c = {:.3}, nu = {:.3}",
        cfg.beta, cfg.d, cfg.l, cfg.c, cfg.nu
    );

    let post = exact_distribution(inst, cfg)?;
    let mut ranked: Vec<_> = post.states().map(|s| (s, post.prob(s))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("{:>10} {:>12} {:>12} {:>12}", "state", "g", "m", "pi");
    for (s, pr) in ranked.iter().take(6) {
        let w = post.weight(*s);
        println!("{:>10} {:>12.4} {:>12.4} {:>12.4e}", s.to_string(), w.g, w.m, pr);
    }
    let (a, b) = (ranked[0].0, ranked[1].0);
    println!("log pi({a}) - log pi({b}) = {:.4}", log_ratio(b, a, inst, cfg)?);
    println!("mass beyond 4s*: {:.3e}", post.mass(|s| s.size() > 4 * inst.s_star()));
    Ok(())
}
