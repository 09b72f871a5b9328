//! Good-event checks on one instance, then their frequencies over an
//! ensemble of seeds.
//!
//! cargo run --release --example events

use ewa_mcmc::oracle::{check_assumptions, check_events};
use ewa_mcmc::{generate_instance, run_pipeline, ExperimentConfig, Stages};

fn main() -> ewa_mcmc::Result<()> {
    let e = ExperimentConfig::default();
    let g = generate_instance(&e, 42)?;
    let ev = check_events(&g.inst, &g.cfg)?;
    println!(
        "initializer event {}, noise event {} (max {:.2} <= {:.2}, smallest L {:.3}), norm event {} ({:.1} <= {:.0})",
        ev.a_n.holds,
        ev.e_n.holds,
        ev.e_n.max_inner_sq,
        ev.e_n.threshold,
        ev.e_n.min_l,
        ev.f_n.holds,
        ev.f_n.eps_sq,
        ev.f_n.threshold
    );
    let a = check_assumptions(&g.inst, &g.cfg)?;
    println!(
        "assumptions: design {} signal {} D {}",
        a.design_ok, a.signal_ok, a.d_ok
    );

    let ens = ExperimentConfig {
        seeds: vec![1],
        replications: 50,
        ..e
    };
    let (summary, _) = run_pipeline(
        &ens,
        Stages {
            events: true,
            ..Stages::NONE
        },
        false,
    )?;
    let f = summary.event_frequencies.expect("several seeds");
    println!(
        "over {} seeds: A {:.2}, E {:.2}, F {:.2}, all {:.2}",
        f.runs, f.a_n, f.e_n, f.f_n, f.h_n
    );
    Ok(())
}
