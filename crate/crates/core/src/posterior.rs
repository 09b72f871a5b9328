//! Unnormalized log-weights of the aggregation distribution
//!
//! ```text
//! pi(S) = exp(G(S) - m(S)) / Z
//! G(S)  = ||Phi_S Y||^2 / beta
//! m(S)  = D |S| log p + 2 trace(Phi_S) / beta + (4n / beta) 1{|S| > 4 s*}
//! ```
//!
//! `log p` is the natural logarithm. trace(Phi_S) is the numerical rank of
//! X_S, which equals |S| whenever the columns are independent.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{ChainConfig, ProblemInstance};
use crate::projection::ProjectionState;
use crate::subset::{enumerate_states_with_cap, Subset};

/// Default cap on exact enumeration: p <= 12.
pub const ORACLE_STATE_CAP: u128 = 1 << 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogWeight {
    pub g: f64,
    pub m: f64,
    pub log_w: f64,
}

fn check_dims(s: Subset, inst: &ProblemInstance, cfg: &ChainConfig) -> Result<()> {
    for found in [s.dim(), cfg.t_hat.dim()] {
        if found != inst.p() {
            return Err(Error::DimensionMismatch {
                expected: inst.p(),
                found,
            });
        }
    }
    Ok(())
}

/// Penalty m(S) for a set of the given size and projection rank.
pub fn penalty(size: usize, rank: usize, inst: &ProblemInstance, cfg: &ChainConfig) -> f64 {
    let n = inst.n() as f64;
    let boundary = if size > 4 * inst.s_star() {
        4.0 * n / cfg.beta
    } else {
        0.0
    };
    cfg.d * size as f64 * inst.log_p() + 2.0 * rank as f64 / cfg.beta + boundary
}

/// Log-weight from an already-built projection onto span(X_S).
pub fn log_weight_from_state(
    state: &ProjectionState<'_>,
    inst: &ProblemInstance,
    cfg: &ChainConfig,
) -> Result<LogWeight> {
    // an empty float sum is -0.0
    let g = state.project_sq_norm(inst.y())? / cfg.beta + 0.0;
    let m = penalty(state.active().size(), state.rank(), inst, cfg);
    Ok(LogWeight { g, m, log_w: g - m })
}

pub fn log_weight(s: Subset, inst: &ProblemInstance, cfg: &ChainConfig) -> Result<LogWeight> {
    check_dims(s, inst, cfg)?;
    let st = ProjectionState::from_subset(inst.x(), s)?;
    log_weight_from_state(&st, inst, cfg)
}

/// log pi(s2) - log pi(s). Neighboring pairs take one column update on the
/// smaller set instead of two full evaluations.
pub fn log_ratio(s: Subset, s2: Subset, inst: &ProblemInstance, cfg: &ChainConfig) -> Result<f64> {
    check_dims(s, inst, cfg)?;
    check_dims(s2, inst, cfg)?;
    match s.hamming(&s2) {
        0 => Ok(0.0),
        1 => {
            let (small, big) = if s.size() < s2.size() { (s, s2) } else { (s2, s) };
            let k = big.difference(&small).smallest().expect("sets differ");
            let st = ProjectionState::from_subset(inst.x(), small)?;
            let upd = st.preview_column(k)?;
            let dg = upd.delta(inst.y()) / cfg.beta;
            let dim_gain = usize::from(upd.direction.is_some());
            let dm = penalty(big.size(), st.rank() + dim_gain, inst, cfg) - penalty(small.size(), st.rank(), inst, cfg);
            let up = dg - dm;
            Ok(if s2 == big { up } else { -up })
        }
        _ => Ok(log_weight(s2, inst, cfg)?.log_w - log_weight(s, inst, cfg)?.log_w),
    }
}

/// pi over every state, indexed by bit pattern.
#[derive(Clone, Debug)]
pub struct ExactPosterior {
    p: usize,
    weights: Vec<LogWeight>,
    log_z: f64,
    log_pi: Vec<f64>,
    pi: Vec<f64>,
}

pub(crate) fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

impl ExactPosterior {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = Subset> + '_ {
        (0..self.pi.len() as u64).map(move |b| Subset::from_bits(self.p, b).expect("in range"))
    }

    pub fn weight(&self, s: Subset) -> LogWeight {
        self.weights[s.bits() as usize]
    }

    pub fn prob(&self, s: Subset) -> f64 {
        self.pi[s.bits() as usize]
    }

    pub fn log_prob(&self, s: Subset) -> f64 {
        self.log_pi[s.bits() as usize]
    }

    pub fn probs(&self) -> &[f64] {
        &self.pi
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_pi
    }

    /// log Z(Y).
    pub fn log_normalizer(&self) -> f64 {
        self.log_z
    }

    /// Mass of the states selected by `pred`.
    pub fn mass(&self, pred: impl Fn(Subset) -> bool) -> f64 {
        self.states().filter(|s| pred(*s)).map(|s| self.prob(s)).sum()
    }

    /// One CSV record per state: `state_hex,g,m,log_w,pi`, 17 significant
    /// digits.
    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "state_hex,g,m,log_w,pi")?;
        for s in self.states() {
            let w = self.weight(s);
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.to_hex(),
                w.g,
                w.m,
                w.log_w,
                self.prob(s)
            )?;
        }
        Ok(())
    }
}

pub fn exact_distribution(inst: &ProblemInstance, cfg: &ChainConfig) -> Result<ExactPosterior> {
    exact_distribution_with_cap(inst, cfg, ORACLE_STATE_CAP)
}

pub fn exact_distribution_with_cap(inst: &ProblemInstance, cfg: &ChainConfig, cap: u128) -> Result<ExactPosterior> {
    let p = inst.p();
    check_dims(cfg.t_hat, inst, cfg)?;
    let states: Vec<Subset> = enumerate_states_with_cap(p, None, cap)?.collect();
    let weights = states
        .iter()
        .map(|&s| log_weight(s, inst, cfg))
        .collect::<Result<Vec<_>>>()?;
    let log_z = log_sum_exp(weights.iter().map(|w| w.log_w));
    let log_pi: Vec<f64> = weights.iter().map(|w| w.log_w - log_z).collect();
    let pi = log_pi.iter().map(|l| l.exp()).collect();
    Ok(ExactPosterior {
        p,
        weights,
        log_z,
        log_pi,
        pi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::normalize_columns;
    use crate::rng;
    use nalgebra::{DMatrix, DVector};
    use rand_distr::{Distribution, StandardNormal};

    fn instance(seed: u64, n: usize, p: usize, support: &[usize]) -> ProblemInstance {
        let mut r = rng::stream(seed, rng::STREAM_DESIGN);
        let x = normalize_columns(&DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut r))).unwrap();
        let mut theta = DVector::zeros(p);
        for &j in support {
            theta[j] = 1.5;
        }
        let mut r = rng::stream(seed, rng::STREAM_NOISE);
        let eps = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r));
        ProblemInstance::new(x, theta, eps, 1).unwrap()
    }

    fn cfg(p: usize, d: f64) -> ChainConfig {
        ChainConfig::new(Subset::from_indices(p, &[0]).unwrap(), 2.0, 1.0, 1.0, 0.5, 0)
            .unwrap()
            .with_d(d)
    }

    #[test]
    fn empty_set_weight_is_zero() {
        let inst = instance(1, 10, 4, &[0]);
        let w = log_weight(Subset::empty(4).unwrap(), &inst, &cfg(4, 3.0)).unwrap();
        assert_eq!(
            w,
            LogWeight {
                g: 0.0,
                m: 0.0,
                log_w: 0.0
            }
        );
    }

    #[test]
    fn boundary_indicator_adds_4n_over_beta() {
        let inst = instance(2, 20, 8, &[0]);
        let c = cfg(8, 1.0);
        let s = Subset::from_indices(8, &[0, 1, 2, 3, 4]).unwrap();
        let w = log_weight(s, &inst, &c).unwrap();
        let without = c.d * 5.0 * inst.log_p() + 2.0 * 5.0 / c.beta;
        assert!((w.m - without - 40.0).abs() < 1e-12);
    }

    #[test]
    fn weight_matches_direct_formula() {
        let inst = instance(42, 16, 5, &[1]);
        let c = cfg(5, 2.0);
        let s = Subset::from_indices(5, &[0, 2]).unwrap();
        // dense least squares fit of Y on X_S
        let xs = DMatrix::from_columns(&[inst.x().column(0).into_owned(), inst.x().column(2).into_owned()]);
        let coef = (xs.transpose() * &xs)
            .cholesky()
            .unwrap()
            .solve(&(xs.transpose() * inst.y()));
        let fit = (xs * coef).norm_squared();
        let want_g = fit / 2.0;
        let want_m = 2.0 * 2.0 * 5f64.ln() + 2.0 * 2.0 / 2.0;
        let w = log_weight(s, &inst, &c).unwrap();
        assert!((w.g - want_g).abs() < 1e-9);
        assert!((w.m - want_m).abs() < 1e-12);
        assert!((w.log_w - (want_g - want_m)).abs() < 1e-9);
    }

    #[test]
    fn ratio_is_antisymmetric_and_matches_recompute() {
        let inst = instance(42, 16, 6, &[1]);
        let c = cfg(6, 2.0);
        let states: Vec<_> = crate::subset::enumerate_states(6, None).unwrap().collect();
        for &a in &states {
            assert_eq!(log_ratio(a, a, &inst, &c).unwrap(), 0.0);
            for b in a.neighbors() {
                let inc = log_ratio(a, b, &inst, &c).unwrap();
                let full = log_weight(b, &inst, &c).unwrap().log_w - log_weight(a, &inst, &c).unwrap().log_w;
                assert!((inc - full).abs() <= 1e-9 * full.abs().max(1.0), "{a} -> {b}");
                assert!((inc + log_ratio(b, a, &inst, &c).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_column_orthogonal_response() {
        // p = 1 and Y orthogonal to X_1: only the trace penalty differs
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let theta = DVector::zeros(1);
        let eps = DVector::from_vec(vec![1.0, -1.0]);
        let inst = ProblemInstance::new(x, theta, eps, 1).unwrap();
        let c = ChainConfig::new(Subset::full(1).unwrap(), 2.0, 1.0, 1.0, 1.0, 0).unwrap();
        let post = exact_distribution(&inst, &c).unwrap();
        let ratio = post.prob(Subset::empty(1).unwrap()) / post.prob(Subset::full(1).unwrap());
        assert!((ratio - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn zero_response_gives_prior_shape() {
        let x = normalize_columns(&DMatrix::from_fn(8, 3, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0)).unwrap();
        let inst = ProblemInstance::new(x, DVector::zeros(3), DVector::zeros(8), 1).unwrap();
        let c = cfg(3, 1.5);
        let post = exact_distribution(&inst, &c).unwrap();
        let z: f64 = post
            .states()
            .map(|s| (-penalty(s.size(), s.size(), &inst, &c)).exp())
            .sum();
        for s in post.states() {
            let want = (-penalty(s.size(), s.size(), &inst, &c)).exp() / z;
            assert!((post.prob(s) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn probabilities_normalize() {
        let inst = instance(42, 16, 8, &[2]);
        let post = exact_distribution(&inst, &cfg(8, 1.0)).unwrap();
        let total: f64 = post.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_has_one_row_per_state() {
        let inst = instance(3, 10, 3, &[2]);
        let post = exact_distribution(&inst, &cfg(3, 1.0)).unwrap();
        let mut buf = Vec::new();
        post.write_table(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0], "state_hex,g,m,log_w,pi");
        assert!(lines[1].starts_with("0,0.0000000000000000e0,"), "{}", lines[1]);
    }

    #[test]
    fn oracle_refuses_large_p() {
        let inst = instance(4, 20, 13, &[0]);
        assert!(matches!(
            exact_distribution(&inst, &cfg(13, 1.0)),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }
}
