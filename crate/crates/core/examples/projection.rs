//! Incremental projections onto column spans, checked against a dense
//! least-squares fit.
//!
//! cargo run --example projection

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use ewa_mcmc::projection::telescoping_bound_terms;
use ewa_mcmc::{normalize_columns, restricted_nu, rng, ProjectionState, Subset};

fn main() -> ewa_mcmc::Result<()> {
    let (n, p) = (30, 6);
    let mut r = rng::stream(3, rng::STREAM_DESIGN);
    let x = normalize_columns(&DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut r)))?;
    let y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r));

    let mut st = ProjectionState::empty(&x)?;
    for k in [0, 2, 5] {
        let upd = st.add_column(k)?;
        println!(
            "add {k}: ||Phi y||^2 = {:.6}, increment {:.6}",
            st.project_sq_norm(&y)?,
            upd.delta(&y)
        );
    }
    st.remove_column(2)?;
    let cols = [0usize, 5];
    let xs = x.select_columns(&cols);
    let dense = &xs * xs.clone().svd(true, true).solve(&y, 1e-12).unwrap();
    println!(
        "after removing 2: incremental vs dense projection differ by {:.2e}, orthonormality error {:.2e}",
        (st.project(&y)? - dense).norm(),
        st.orthonormality_error()
    );

    let nu = restricted_nu(&x, p)?;
    let a = Subset::from_indices(p, &[0])?;
    let b = Subset::from_indices(p, &[1, 3, 4])?;
    let terms = telescoping_bound_terms(&x, a, b, &y, nu)?;
    println!(
        "nu = {nu:.4}; adding {b} to {a}: increment {:.4} <= telescoping bound {:.4}",
        terms.exact_increment,
        terms.bound()
    );
    Ok(())
}
