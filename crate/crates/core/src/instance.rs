//! Problem instances and chain constants.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subset::{Subset, MAX_DIM};

/// Relative tolerance used when checking that columns have length sqrt(n).
pub const COLUMN_NORM_RTOL: f64 = 1e-10;

/// Rescale every column of `x` to Euclidean length sqrt(n), keeping its
/// direction.
pub fn normalize_columns(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let target = (x.nrows() as f64).sqrt();
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        let scale = target / norm;
        if scale != 1.0 {
            col *= scale;
        }
    }
    Ok(out)
}

/// Design, response, truth, and noise for one regression problem.
///
/// `y = x * theta + epsilon` holds exactly as stored: `y` is computed from
/// the other three at construction.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    x: DMatrix<f64>,
    y: DVector<f64>,
    theta: DVector<f64>,
    epsilon: DVector<f64>,
    support: Subset,
    s_star: usize,
    sigma: f64,
    mean: DVector<f64>,
}

impl ProblemInstance {
    pub fn new(x: DMatrix<f64>, theta: DVector<f64>, epsilon: DVector<f64>, s_star: usize) -> Result<Self> {
        let n = x.nrows();
        let p = x.ncols();
        if p == 0 || p > MAX_DIM {
            return Err(Error::DimensionTooLarge(p));
        }
        if theta.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: theta.len(),
            });
        }
        if epsilon.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: epsilon.len(),
            });
        }
        if s_star == 0 {
            return Err(Error::ConfigInvalid("s_star must be at least 1".into()));
        }
        let support_idx: Vec<usize> = (0..p).filter(|&j| theta[j] != 0.0).collect();
        let support = Subset::from_indices(p, &support_idx)?;
        let mean = &x * &theta;
        let y = &mean + &epsilon;
        Ok(ProblemInstance {
            x,
            y,
            theta,
            epsilon,
            support,
            s_star,
            sigma: 1.0,
            mean,
        })
    }

    /// Build from an observed response; the noise is recovered as `y - x theta`.
    pub fn from_response(x: DMatrix<f64>, y: DVector<f64>, theta: DVector<f64>, s_star: usize) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if theta.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                found: theta.len(),
            });
        }
        let epsilon = &y - &x * &theta;
        let mut inst = Self::new(x, theta, epsilon, s_star)?;
        inst.y = y;
        Ok(inst)
    }

    /// Record the noise scale used to draw epsilon (reporting only).
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn epsilon(&self) -> &DVector<f64> {
        &self.epsilon
    }

    /// `x * theta`.
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Support T of theta.
    pub fn support(&self) -> Subset {
        self.support
    }

    pub fn s_star(&self) -> usize {
        self.s_star
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Natural log of p.
    pub fn log_p(&self) -> f64 {
        (self.p() as f64).ln()
    }

    /// Whether every column has length sqrt(n) to [`COLUMN_NORM_RTOL`].
    pub fn columns_normalized(&self) -> bool {
        let target = (self.n() as f64).sqrt();
        self.x
            .column_iter()
            .all(|c| ((c.norm() - target) / target).abs() <= COLUMN_NORM_RTOL)
    }

    /// Smallest |theta_j| over the support; infinite when theta is zero.
    pub fn theta_min(&self) -> f64 {
        self.support
            .indices()
            .map(|j| self.theta[j].abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Constants of the chain and of the good events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub beta: f64,
    /// Per-coordinate dimension penalty D.
    pub d: f64,
    pub c: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub nu: f64,
    /// Initializer state T-hat.
    #[serde(with = "subset_serde")]
    pub t_hat: Subset,
    pub seed: u64,
}

pub const DEFAULT_BETA: f64 = 2.0;

impl ChainConfig {
    /// Config with D auto-selected at the smallest value allowed by
    /// `D >= 4 + (4L + 2c)/beta`.
    pub fn new(t_hat: Subset, beta: f64, l: f64, c: f64, nu: f64, seed: u64) -> Result<Self> {
        for (name, v) in [("beta", beta), ("c", c), ("L", l)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::ConfigInvalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::ConfigInvalid(format!("nu must lie in (0, 1], got {nu}")));
        }
        if t_hat.is_empty() {
            eprintln!("warning: an empty initializer leaves pi(T-hat) tiny; mixing guarantees do not apply");
        }
        Ok(ChainConfig {
            beta,
            d: Self::min_d(beta, l, c),
            c,
            l,
            nu,
            t_hat,
            seed,
        })
    }

    /// Smallest D permitted by the choice rule.
    pub fn min_d(beta: f64, l: f64, c: f64) -> f64 {
        4.0 + (4.0 * l + 2.0 * c) / beta
    }

    /// Override D; values below [`ChainConfig::min_d`] are kept but flagged
    /// by [`ChainConfig::d_is_valid`].
    pub fn with_d(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    pub fn with_t_hat(mut self, t_hat: Subset) -> Self {
        self.t_hat = t_hat;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn d_is_valid(&self) -> bool {
        self.d >= Self::min_d(self.beta, self.l, self.c)
    }
}

/// Subsets serialize as their sorted member list plus the dimension.
pub mod subset_serde {
    use super::Subset;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        p: usize,
        members: Vec<usize>,
    }

    pub fn serialize<S: Serializer>(s: &Subset, ser: S) -> Result<S::Ok, S::Error> {
        Repr {
            p: s.dim(),
            members: s.indices().collect(),
        }
        .serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Subset, D::Error> {
        let r = Repr::deserialize(de)?;
        Subset::from_indices(r.p, &r.members).map_err(serde::de::Error::custom)
    }
}
