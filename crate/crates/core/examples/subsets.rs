//! Bit-mask states: construction, set algebra, neighbors and enumeration.
//!
//! cargo run --example subsets

use ewa_mcmc::subset::{binomial, count_states};
use ewa_mcmc::{enumerate_states, Subset};

fn main() -> ewa_mcmc::Result<()> {
    let p = 8;
    let s = Subset::from_indices(p, &[0, 3, 5])?;
    let t = Subset::from_indices(p, &[3, 4])?;
    println!("S = {s} (hex {}), T = {t}", s.to_hex());
    println!(
        "S u T = {}, S n T = {}, S \\ T = {}",
        s.union(&t),
        s.intersection(&t),
        s.difference(&t)
    );
    println!("hamming(S, T) = {}", s.hamming(&t));
    println!("S has {} single-flip neighbors", s.neighbors().len());

    // states with at most 3 members
    let small: Vec<Subset> = enumerate_states(p, Some(3))?.collect();
    let by_formula: u128 = (0..=3).map(|k| binomial(p, k)).sum();
    println!(
        "{} states of size <= 3 (formula {by_formula}, counter {})",
        small.len(),
        count_states(p, Some(3))
    );

    let subs = s.submasks().count();
    println!("S has {subs} submasks, including the empty set and S");
    Ok(())
}
