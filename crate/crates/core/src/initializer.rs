//! Thresholded lasso initializer.
//!
//! The lasso objective is `||Y - X t||^2 + alpha * lambda_n * ||t||_1` with
//! `lambda_n = sqrt(log p / n)` and no further scaling. T-hat keeps the
//! coordinates with `|theta_hat_j| > 8 alpha lambda_n / kappa^2`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::projection::{gram, principal_submatrix, supports_of_size, sym_eigen_extremes, ProjectionState};
use crate::subset::Subset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub alpha: f64,
    /// Restricted-eigenvalue constant kappa(s*, 3).
    pub kappa: f64,
    pub max_iter: usize,
    /// Bound on the KKT residual at the returned point.
    pub tol: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            alpha: 2.0,
            kappa: 1.0,
            max_iter: 10_000,
            tol: 1e-8,
        }
    }
}

impl LassoConfig {
    /// sqrt(log p / n).
    pub fn lambda_n(p: usize, n: usize) -> f64 {
        ((p as f64).ln() / n as f64).sqrt()
    }

    /// Penalty weight alpha * lambda_n.
    pub fn penalty(&self, p: usize, n: usize) -> f64 {
        self.alpha * Self::lambda_n(p, n)
    }

    /// Hard threshold 8 alpha lambda_n / kappa^2.
    pub fn threshold(&self, p: usize, n: usize) -> f64 {
        8.0 * self.penalty(p, n) / self.kappa.powi(2)
    }

    /// Bound on ||theta_hat - theta||_1: 8 alpha lambda_n s* / kappa^2.
    pub fn l1_error_bound(&self, p: usize, n: usize, s_star: usize) -> f64 {
        self.threshold(p, n) * s_star as f64
    }

    /// Probability bound p^(1 - alpha^2/32) on the failure of the lasso
    /// error bounds.
    pub fn failure_probability(&self, p: usize) -> f64 {
        (p as f64).powf(1.0 - self.alpha.powi(2) / 32.0)
    }

    /// Bound on ||(I - Phi_That) X theta||: 2 alpha sqrt(Lambda_max s* log p) / kappa^2.
    pub fn risk_bound(&self, lambda_max: f64, s_star: usize, p: usize) -> f64 {
        2.0 * self.alpha * (lambda_max * s_star as f64 * (p as f64).ln()).sqrt() / self.kappa.powi(2)
    }

    /// Event constant c = 4 alpha^2 Lambda_max / kappa^4, for which the
    /// risk bound implies the initializer event.
    pub fn default_c(&self, lambda_max: f64) -> f64 {
        4.0 * self.alpha.powi(2) * lambda_max / self.kappa.powi(4)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LassoFit {
    pub theta_hat: Vec<f64>,
    pub sweeps: usize,
    pub kkt_residual: f64,
    pub duality_gap: f64,
    pub objective: f64,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Largest violation of the optimality conditions at `t` given the residual
/// `r = y - X t`.
pub fn kkt_residual(x: &DMatrix<f64>, r: &DVector<f64>, t: &[f64], penalty: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (j, &tj) in t.iter().enumerate() {
        // gradient of the smooth part: 2 X_j^T (X t - y)
        let grad = -2.0 * x.column(j).dot(r);
        let v = if tj == 0.0 {
            (grad.abs() - penalty).max(0.0)
        } else {
            (grad + penalty * tj.signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

fn duality_gap(x: &DMatrix<f64>, y: &DVector<f64>, r: &DVector<f64>, t: &[f64], penalty: f64) -> f64 {
    // Dual of (1/2)||y - X t||^2 + (penalty/2)||t||_1, rescaled by 2.
    let mu = penalty / 2.0;
    let xtr = x.transpose() * r;
    let scale = if xtr.amax() > mu { mu / xtr.amax() } else { 1.0 };
    let u = r * scale;
    let primal = 0.5 * r.norm_squared() + mu * t.iter().map(|v| v.abs()).sum::<f64>();
    let dual = 0.5 * y.norm_squared() - 0.5 * (y - &u).norm_squared();
    (2.0 * (primal - dual)).max(0.0)
}

/// Cyclic coordinate descent in ascending index order, alternating full
/// sweeps with sweeps over the nonzero coordinates.
pub fn fit_lasso(inst: &ProblemInstance, lcfg: &LassoConfig) -> Result<LassoFit> {
    fit_lasso_raw(inst.x(), inst.y(), lcfg.penalty(inst.p(), inst.n()), lcfg)
}

pub fn fit_lasso_raw(x: &DMatrix<f64>, y: &DVector<f64>, penalty: f64, lcfg: &LassoConfig) -> Result<LassoFit> {
    if !(penalty > 0.0) {
        return Err(Error::ConfigInvalid(format!(
            "lasso penalty must be positive, got {penalty}"
        )));
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let p = x.ncols();
    let sq_norms: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();
    let mut t = vec![0.0; p];
    let mut r = y.clone();
    let half = penalty / 2.0;

    let update = |j: usize, t: &mut [f64], r: &mut DVector<f64>| -> f64 {
        let col = x.column(j);
        let rho = col.dot(r) + sq_norms[j] * t[j];
        let new = soft_threshold(rho, half) / sq_norms[j];
        let delta = new - t[j];
        if delta != 0.0 {
            r.axpy(-delta, &col, 1.0);
            t[j] = new;
        }
        delta.abs() * sq_norms[j]
    };

    let mut sweeps = 0;
    let mut kkt = f64::INFINITY;
    while sweeps < lcfg.max_iter {
        for j in 0..p {
            update(j, &mut t, &mut r);
        }
        sweeps += 1;
        // inner sweeps over the active set
        while sweeps < lcfg.max_iter {
            let mut biggest: f64 = 0.0;
            for j in 0..p {
                if t[j] != 0.0 {
                    biggest = biggest.max(update(j, &mut t, &mut r));
                }
            }
            sweeps += 1;
            if biggest <= lcfg.tol / 8.0 {
                break;
            }
        }
        // recompute the residual to shed accumulated rounding
        r = y - x * DVector::from_column_slice(&t);
        kkt = kkt_residual(x, &r, &t, penalty);
        if kkt <= lcfg.tol {
            let gap = duality_gap(x, y, &r, &t, penalty);
            let objective = r.norm_squared() + penalty * t.iter().map(|v| v.abs()).sum::<f64>();
            return Ok(LassoFit {
                theta_hat: t,
                sweeps,
                kkt_residual: kkt,
                duality_gap: gap,
                objective,
            });
        }
    }
    Err(Error::NoConvergence {
        max_iter: lcfg.max_iter,
        kkt_residual: kkt,
        best: t,
    })
}

/// Indices with |theta_hat_j| strictly above the hard threshold.
pub fn threshold_support(theta_hat: &[f64], lcfg: &LassoConfig, p: usize, n: usize) -> Result<Subset> {
    let tau = lcfg.threshold(p, n);
    let idx: Vec<usize> = (0..theta_hat.len()).filter(|&j| theta_hat[j].abs() > tau).collect();
    Subset::from_indices(p, &idx)
}

#[derive(Clone, Debug, Serialize)]
pub struct EventACheck {
    pub holds: bool,
    pub size: usize,
    pub size_limit: usize,
    /// ||(I - Phi_That) X theta||^2.
    pub risk: f64,
    /// c s* log p.
    pub risk_limit: f64,
}

/// |T-hat| <= 2 s* and ||(I - Phi_That) X theta||^2 <= c s* log p.
pub fn check_event_a(t_hat: Subset, inst: &ProblemInstance, c: f64) -> Result<EventACheck> {
    let st = ProjectionState::from_subset(inst.x(), t_hat)?;
    let risk = st.residual(inst.mean())?.norm_squared();
    let size_limit = 2 * inst.s_star();
    let risk_limit = c * inst.s_star() as f64 * inst.log_p();
    Ok(EventACheck {
        holds: t_hat.size() <= size_limit && risk <= risk_limit,
        size: t_hat.size(),
        size_limit,
        risk,
        risk_limit,
    })
}

/// Max over |S| <= s* of lambda_max(X_S^T X_S / n).
pub fn lambda_max_restricted(x: &DMatrix<f64>, s_star: usize) -> Result<f64> {
    let p = x.ncols();
    if s_star == 0 {
        return Err(Error::ConfigInvalid("s_star must be at least 1".into()));
    }
    let n = x.nrows() as f64;
    let g = gram(x);
    let mut best: f64 = 0.0;
    for s in supports_of_size(p, s_star.min(p))? {
        let (_, hi) = sym_eigen_extremes(principal_submatrix(&g, s));
        best = best.max(hi / n);
    }
    Ok(best)
}

/// Random-search estimate of kappa(s*, 3): the running minimum of
/// `||X delta|| / (sqrt(n) ||delta_T'||)` over sampled supports
/// `|T'| <= s*` and sampled directions in the cone
/// `||delta_{T'^c}||_1 <= 3 ||delta_T'||_1`. Sampling can only miss the
/// minimizer, so the estimate is an upper bound on the true constant.
pub fn estimate_kappa<R: Rng + ?Sized>(x: &DMatrix<f64>, s_star: usize, samples: usize, rng: &mut R) -> f64 {
    let (n, p) = x.shape();
    let s_max = s_star.min(p).max(1);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let k = rng.random_range(1..=s_max);
        let support = index::sample(rng, p, k).into_vec();
        let mut delta = DVector::<f64>::zeros(p);
        for &j in &support {
            delta[j] = StandardNormal.sample(rng);
        }
        let on_l1: f64 = support.iter().map(|&j| delta[j].abs()).sum();
        let on_l2: f64 = support.iter().map(|&j| delta[j].powi(2)).sum::<f64>().sqrt();
        let off: Vec<usize> = (0..p).filter(|j| !support.contains(j)).collect();
        if !off.is_empty() {
            // sparse off-support part, scaled into the cone
            let m = rng.random_range(1..=off.len().min(s_max.max(2)));
            let chosen = index::sample(rng, off.len(), m).into_vec();
            let mut raw = DVector::<f64>::zeros(p);
            for &c in &chosen {
                raw[off[c]] = StandardNormal.sample(rng);
            }
            let raw_l1 = raw.iter().map(|v| v.abs()).sum::<f64>();
            if raw_l1 > 0.0 {
                let budget = 3.0 * on_l1 * rng.random::<f64>();
                delta += raw * (budget / raw_l1);
            }
        }
        let ratio = (x * &delta).norm() / ((n as f64).sqrt() * on_l2);
        best = best.min(ratio);
    }
    best
}

/// Summary of one initializer run.
#[derive(Clone, Debug, Serialize)]
pub struct InitializerReport {
    pub lambda_n: f64,
    pub penalty: f64,
    pub threshold: f64,
    pub kappa: f64,
    /// Nonzero lasso coefficients as (index, value).
    pub theta_hat_nonzero: Vec<(usize, f64)>,
    /// ||theta_hat - theta||_1.
    pub l1_error: f64,
    pub l1_error_bound: f64,
    pub t_hat: Vec<usize>,
    pub event_a: EventACheck,
    pub lambda_max: f64,
    /// ||(I - Phi_That) X theta||.
    pub risk_norm: f64,
    pub risk_bound: f64,
    pub kkt_residual: f64,
    pub duality_gap: f64,
    pub sweeps: usize,
}

impl InitializerReport {
    pub fn t_hat_subset(&self, p: usize) -> Subset {
        Subset::from_indices(p, &self.t_hat).expect("indices in range")
    }

    /// Size and risk guarantees both hold.
    pub fn guarantee_holds(&self) -> bool {
        self.event_a.size <= self.event_a.size_limit && self.risk_norm <= self.risk_bound
    }
}

/// Fit, threshold, and check the initializer event with constant `c`.
pub fn run_initializer(inst: &ProblemInstance, lcfg: &LassoConfig, c: f64) -> Result<InitializerReport> {
    let fit = fit_lasso(inst, lcfg)?;
    report_from_fit(inst, lcfg, c, fit)
}

/// Like [`run_initializer`], but a fit that runs out of iterations is
/// reported from its best iterate instead of failing. The report's
/// `kkt_residual` then exceeds `lcfg.tol`.
pub fn run_initializer_best_effort(inst: &ProblemInstance, lcfg: &LassoConfig, c: f64) -> Result<InitializerReport> {
    let fit = match fit_lasso(inst, lcfg) {
        Ok(f) => f,
        Err(Error::NoConvergence { kkt_residual, best, .. }) => {
            let penalty = lcfg.penalty(inst.p(), inst.n());
            let r = inst.y() - inst.x() * DVector::from_column_slice(&best);
            LassoFit {
                duality_gap: duality_gap(inst.x(), inst.y(), &r, &best, penalty),
                objective: r.norm_squared() + penalty * best.iter().map(|v| v.abs()).sum::<f64>(),
                theta_hat: best,
                sweeps: lcfg.max_iter,
                kkt_residual,
            }
        }
        Err(e) => return Err(e),
    };
    report_from_fit(inst, lcfg, c, fit)
}

fn report_from_fit(inst: &ProblemInstance, lcfg: &LassoConfig, c: f64, fit: LassoFit) -> Result<InitializerReport> {
    let (p, n) = (inst.p(), inst.n());
    let t_hat = threshold_support(&fit.theta_hat, lcfg, p, n)?;
    let event_a = check_event_a(t_hat, inst, c)?;
    let lambda_max = lambda_max_restricted(inst.x(), inst.s_star())?;
    let l1_error = fit
        .theta_hat
        .iter()
        .zip(inst.theta().iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(InitializerReport {
        lambda_n: LassoConfig::lambda_n(p, n),
        penalty: lcfg.penalty(p, n),
        threshold: lcfg.threshold(p, n),
        kappa: lcfg.kappa,
        theta_hat_nonzero: fit
            .theta_hat
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect(),
        l1_error,
        l1_error_bound: lcfg.l1_error_bound(p, n, inst.s_star()),
        t_hat: t_hat.indices().collect(),
        risk_norm: event_a.risk.sqrt(),
        event_a,
        lambda_max,
        risk_bound: lcfg.risk_bound(lambda_max, inst.s_star(), p),
        kkt_residual: fit.kkt_residual,
        duality_gap: fit.duality_gap,
        sweeps: fit.sweeps,
    })
}
