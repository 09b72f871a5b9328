//! Exact analysis of the chain at desk scale: the full transition matrix,
//! its spectrum, total-variation decay, mixing times, and the good events
//! and assumptions under which the gap bound is guaranteed.

use std::io::Write;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::initializer::{check_event_a, EventACheck};
use crate::instance::{ChainConfig, ProblemInstance, COLUMN_NORM_RTOL};
use crate::paths::transition_prob;
use crate::posterior::{exact_distribution_with_cap, ExactPosterior, ORACLE_STATE_CAP};
use crate::projection::{restricted_nu, telescoping_bound_terms, ProjectionState, RANK_RTOL, SUPPORT_SWEEP_CAP};
use crate::proposal::ProposalKernel;
use crate::subset::{count_states, enumerate_states_with_cap, Subset};

/// Relative slack allowed in the inclusive comparisons of the assumption
/// checks, so that a value placed exactly on a boundary passes.
pub const BOUNDARY_RTOL: f64 = 1e-12;

const BALANCE_MAX_SWEEPS: usize = 10_000;

/// Exact P over all 2^p states, stored as sparse off-diagonal rows plus the
/// diagonal. Spectra are computed on first use.
#[derive(Debug)]
pub struct ExactChain {
    p: usize,
    kernel: ProposalKernel,
    post: ExactPosterior,
    rows: Vec<Vec<(u32, f64)>>,
    diag: Vec<f64>,
    spectrum: OnceLock<Vec<f64>>,
    lazy_spectrum: OnceLock<Vec<f64>>,
}

pub fn build_exact_chain(inst: &ProblemInstance, cfg: &ChainConfig) -> Result<ExactChain> {
    build_exact_chain_with_cap(inst, cfg, ORACLE_STATE_CAP)
}

pub fn build_exact_chain_with_cap(inst: &ProblemInstance, cfg: &ChainConfig, cap: u128) -> Result<ExactChain> {
    let post = exact_distribution_with_cap(inst, cfg, cap)?;
    let kernel = ProposalKernel::for_instance(inst, cfg)?;
    let p = inst.p();
    let n = post.len();
    let rows: Vec<Vec<(u32, f64)>> = (0..n as u64)
        .into_par_iter()
        .map(|b| {
            let s = Subset::from_bits(p, b).expect("in range");
            kernel
                .row(s)
                .into_iter()
                .filter(|(t, _)| *t != s)
                .map(|(t, _)| (t.bits() as u32, transition_prob(&kernel, &post, s, t)))
                .filter(|(_, v)| *v > 0.0)
                .collect()
        })
        .collect();
    let diag = rows
        .iter()
        .map(|r| 1.0 - r.iter().map(|(_, v)| v).sum::<f64>())
        .collect();
    Ok(ExactChain {
        p,
        kernel,
        post,
        rows,
        diag,
        spectrum: OnceLock::new(),
        lazy_spectrum: OnceLock::new(),
    })
}

impl ExactChain {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn posterior(&self) -> &ExactPosterior {
        &self.post
    }

    pub fn kernel(&self) -> &ProposalKernel {
        &self.kernel
    }

    pub fn pi(&self) -> &[f64] {
        self.post.probs()
    }

    /// P(s, s2).
    pub fn prob(&self, s: Subset, s2: Subset) -> f64 {
        let b = s.bits() as usize;
        if s == s2 {
            return self.diag[b];
        }
        self.rows[b]
            .iter()
            .find(|(t, _)| *t as u64 == s2.bits())
            .map_or(0.0, |(_, v)| *v)
    }

    /// Off-diagonal entries of row `s`.
    pub fn row(&self, s: Subset) -> Vec<(Subset, f64)> {
        self.rows[s.bits() as usize]
            .iter()
            .map(|(t, v)| (Subset::from_bits(self.p, *t as u64).expect("in range"), *v))
            .collect()
    }

    /// Dense P, or (I + P)/2 when `lazy`.
    pub fn dense(&self, lazy: bool) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            m[(i, i)] = self.diag[i];
            for &(j, v) in row {
                m[(i, j as usize)] = v;
            }
        }
        if lazy {
            m = (m + DMatrix::identity(n, n)) * 0.5;
        }
        m
    }

    /// R as a dense matrix.
    pub fn proposal_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n as u64 {
            let s = Subset::from_bits(self.p, i).expect("in range");
            for (t, r) in self.kernel.row(s) {
                m[(i as usize, t.bits() as usize)] += r;
            }
        }
        m
    }

    /// Max over pairs of |pi(S) P(S,S') - pi(S') P(S',S)|.
    pub fn detailed_balance_error(&self) -> f64 {
        let pi = self.pi();
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                let back = self.prob(self.state(j as usize), self.state(i));
                worst = worst.max((pi[i] * v - pi[j as usize] * back).abs());
            }
        }
        worst
    }

    /// Max relative mismatch of detailed balance in the log domain, which
    /// stays meaningful where pi underflows.
    pub fn log_detailed_balance_error(&self) -> f64 {
        let lp = self.post.log_probs();
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                let back = self.prob(self.state(j as usize), self.state(i));
                let a = lp[i] + v.ln();
                let b = lp[j as usize] + back.ln();
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
            }
        }
        worst
    }

    fn state(&self, b: usize) -> Subset {
        Subset::from_bits(self.p, b as u64).expect("in range")
    }

    /// Max deviation of a row sum from one.
    pub fn row_sum_error(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.diag)
            .map(|(r, d)| (r.iter().map(|(_, v)| v).sum::<f64>() + d - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest diagonal entry; negative would mean an invalid matrix.
    pub fn min_diagonal(&self) -> f64 {
        self.diag.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// v P (or v (I+P)/2).
    pub fn step_distribution(&self, v: &[f64], lazy: bool) -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().zip(&self.diag).map(|(a, d)| a * d).collect();
        for (i, row) in self.rows.iter().enumerate() {
            if v[i] == 0.0 {
                continue;
            }
            for &(j, pij) in row {
                out[j as usize] += v[i] * pij;
            }
        }
        if lazy {
            out.iter_mut().zip(v).for_each(|(o, a)| *o = 0.5 * (*o + a));
        }
        out
    }

    /// ||pi P - pi||_1.
    pub fn stationarity_error(&self) -> f64 {
        let pi = self.pi();
        self.step_distribution(pi, false)
            .iter()
            .zip(pi)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    fn symmetrized(&self, lazy: bool) -> DMatrix<f64> {
        // D^{1/2} P D^{-1/2} has entries sqrt(P_ij P_ji) under detailed
        // balance; that form avoids dividing by tiny pi values
        let n = self.len();
        let mut a = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            a[(i, i)] = self.diag[i];
            for &(j, v) in row {
                let back = self.prob(self.state(j as usize), self.state(i));
                a[(i, j as usize)] = (v * back).sqrt();
            }
        }
        if lazy {
            a = (a + DMatrix::identity(n, n)) * 0.5;
        }
        // remove rounding asymmetry
        (&a + a.transpose()) * 0.5
    }

    /// Eigenvalues in decreasing order, from the symmetrized matrix.
    pub fn eigenvalues(&self, lazy: bool) -> &[f64] {
        let cell = if lazy { &self.lazy_spectrum } else { &self.spectrum };
        cell.get_or_init(|| {
            let mut ev: Vec<f64> = self.symmetrized(lazy).symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(|a, b| b.total_cmp(a));
            ev
        })
    }

    /// Real parts of the eigenvalues of P from a direct nonsymmetric solve,
    /// decreasing, with the largest imaginary part seen.
    /// Eigenvalues of P from a general (nonsymmetric) solve: power-of-two
    /// diagonal balancing, then Hessenberg QR. Returns the real
    /// parts in decreasing order and the largest imaginary part, or `None`
    /// when the iteration does not converge.
    pub fn nonsymmetric_eigenvalues(&self) -> Option<(Vec<f64>, f64)> {
        let mut m = self.dense(false);
        balance(&mut m);
        let ev = faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
            .eigenvalues()
            .ok()?;
        let max_im = ev.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| b.total_cmp(a));
        Some((re, max_im))
    }

    /// 1 - lambda_2.
    pub fn spectral_gap(&self, lazy: bool) -> f64 {
        let ev = self.eigenvalues(lazy);
        if ev.len() < 2 {
            return 1.0;
        }
        1.0 - ev[1]
    }

    /// Exact TV distance of the lazy chain from `start` to pi, for k = 0..=k_max.
    pub fn tv_decay(&self, start: Subset, k_max: usize) -> Vec<f64> {
        let pi = self.pi();
        let mut v = vec![0.0; self.len()];
        v[start.bits() as usize] = 1.0;
        let mut out = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            if k > 0 {
                v = self.step_distribution(&v, true);
            }
            out.push(tv_distance(&v, pi));
        }
        out
    }

    /// (1/2) pi(start)^{-1/2} exp(-k gap / 2) with the gap of P.
    pub fn tv_bound(&self, start: Subset, k: usize) -> f64 {
        let gap = self.spectral_gap(false);
        0.5 * (-0.5 * self.post.log_prob(start) - k as f64 * gap / 2.0).exp()
    }

    /// Exact mixing time of the lazy chain from `start` together with the
    /// spectral and closed-form bounds.
    pub fn mixing_time(
        &self,
        inst: &ProblemInstance,
        cfg: &ChainConfig,
        start: Subset,
        eps: f64,
    ) -> Result<MixingTime> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::ConfigInvalid(format!("eps must lie in (0, 1), got {eps}")));
        }
        let gap = self.spectral_gap(false);
        let log_term = (1.0 / (2.0 * eps)).ln();
        let analytic = (2.0 * log_term - self.post.log_prob(start)) / gap;
        let theorem = theorem_mixing_bound(inst, cfg, eps);
        let k_cap = (2.0 * analytic).ceil().clamp(10_000.0, 1e7) as usize;
        let pi = self.pi();
        let mut v = vec![0.0; self.len()];
        v[start.bits() as usize] = 1.0;
        let mut exact = None;
        for k in 0..=k_cap {
            if k > 0 {
                v = self.step_distribution(&v, true);
            }
            if tv_distance(&v, pi) <= eps {
                exact = Some(k);
                break;
            }
        }
        Ok(MixingTime {
            eps,
            exact,
            analytic,
            theorem,
            gap,
        })
    }

    /// CSV of the nonzero entries of P: `from_hex,to_hex,p`.
    pub fn write_transitions<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "from_hex,to_hex,p")?;
        for i in 0..self.len() {
            let mut entries: Vec<(usize, f64)> = self.rows[i].iter().map(|(j, v)| (*j as usize, *v)).collect();
            entries.push((i, self.diag[i]));
            entries.sort_by_key(|e| e.0);
            for (j, v) in entries {
                writeln!(out, "{},{},{:.16e}", self.state(i).to_hex(), self.state(j).to_hex(), v)?;
            }
        }
        Ok(())
    }
}

/// Parlett-Reinsch balancing in place: a diagonal similarity by powers of
/// two that evens out off-diagonal row and column 1-norms.
fn balance(m: &mut DMatrix<f64>) {
    const RADIX: f64 = 2.0;
    let n = m.nrows();
    for _ in 0..BALANCE_MAX_SWEEPS {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                m.row_mut(i).scale_mut(1.0 / f);
                m.column_mut(i).scale_mut(f);
            }
        }
        if done {
            break;
        }
    }
}

pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// 120 p s* (log(1/(2 eps)) + 2 D s* log p).
pub fn theorem_mixing_bound(inst: &ProblemInstance, cfg: &ChainConfig, eps: f64) -> f64 {
    let (p, s) = (inst.p() as f64, inst.s_star() as f64);
    120.0 * p * s * ((1.0 / (2.0 * eps)).ln() + 2.0 * cfg.d * s * inst.log_p())
}

/// 60 p s*.
pub fn theorem_gap_bound(inst: &ProblemInstance) -> f64 {
    60.0 * (inst.p() * inst.s_star()) as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingTime {
    pub eps: f64,
    /// Smallest k with tv(k) <= eps, if reached before the iteration cap.
    pub exact: Option<usize>,
    /// (2 log(1/(2 eps)) + log(1/pi(start))) / gap.
    pub analytic: f64,
    /// 120 p s* (log(1/(2 eps)) + 2 D s* log p).
    pub theorem: f64,
    pub gap: f64,
}

/// Max over |S| < `size_limit`, j not in S of <(I - Phi_S) X_j, eps>^2,
/// by depth-first enumeration with a stack of orthonormal vectors.
pub fn noise_projection_max(x: &DMatrix<f64>, eps: &DVector<f64>, size_limit: usize) -> Result<(f64, u128)> {
    let (n, p) = x.shape();
    if eps.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: eps.len(),
        });
    }
    let max_size = size_limit.saturating_sub(1).min(p);
    let count = count_states(p, Some(max_size));
    if count > SUPPORT_SWEEP_CAP {
        return Err(Error::EnumerationTooLarge {
            count,
            cap: SUPPORT_SWEEP_CAP,
        });
    }
    let tol = RANK_RTOL * (n as f64).sqrt();
    let mut basis: Vec<Option<DVector<f64>>> = Vec::new();
    let mut best: f64 = 0.0;
    let mut visited: u128 = 0;

    fn residual(basis: &[Option<DVector<f64>>], v: &DVector<f64>) -> DVector<f64> {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in basis.iter().flatten() {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        r
    }

    // explicit stack: (next index to try, whether a column was pushed)
    let mut members: Vec<usize> = Vec::new();
    let mut visit = |basis: &[Option<DVector<f64>>], members: &[usize]| {
        let r = residual(basis, eps);
        let xtr = x.transpose() * r;
        for j in 0..p {
            if !members.contains(&j) {
                best = best.max(xtr[j].powi(2));
            }
        }
        visited += 1;
    };
    visit(&basis, &members);
    let mut next = 0usize;
    loop {
        if members.len() < max_size && next < p {
            let k = next;
            let z = residual(&basis, &x.column(k).into_owned());
            let nz = z.norm();
            basis.push(if nz > tol { Some(z / nz) } else { None });
            members.push(k);
            visit(&basis, &members);
            next = k + 1;
        } else {
            match members.pop() {
                Some(k) => {
                    basis.pop();
                    next = k + 1;
                }
                None => break,
            }
        }
    }
    Ok((best, visited))
}

#[derive(Clone, Debug, Serialize)]
pub struct NoiseEventCheck {
    pub holds: bool,
    /// Max squared inner product over |S| < 6s*, j not in S.
    pub max_inner_sq: f64,
    /// n L nu log p.
    pub threshold: f64,
    /// Smallest L for which the event holds.
    pub min_l: f64,
    pub sets_checked: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormEventCheck {
    pub holds: bool,
    pub eps_sq: f64,
    /// 2n.
    pub threshold: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EventReport {
    pub a_n: EventACheck,
    pub e_n: NoiseEventCheck,
    pub f_n: NormEventCheck,
    pub h_n: bool,
}

pub fn check_noise_event(inst: &ProblemInstance, cfg: &ChainConfig) -> Result<NoiseEventCheck> {
    let (max_inner_sq, sets_checked) = noise_projection_max(inst.x(), inst.epsilon(), 6 * inst.s_star())?;
    let unit = inst.n() as f64 * cfg.nu * inst.log_p();
    let threshold = unit * cfg.l;
    Ok(NoiseEventCheck {
        holds: max_inner_sq <= threshold,
        max_inner_sq,
        threshold,
        min_l: max_inner_sq / unit,
        sets_checked,
    })
}

pub fn check_norm_event(inst: &ProblemInstance) -> NormEventCheck {
    let eps_sq = inst.epsilon().norm_squared();
    let threshold = 2.0 * inst.n() as f64;
    NormEventCheck {
        holds: eps_sq <= threshold,
        eps_sq,
        threshold,
    }
}

pub fn check_events(inst: &ProblemInstance, cfg: &ChainConfig) -> Result<EventReport> {
    let a_n = check_event_a(cfg.t_hat, inst, cfg.c)?;
    let e_n = check_noise_event(inst, cfg)?;
    let f_n = check_norm_event(inst);
    let h_n = a_n.holds && e_n.holds && f_n.holds;
    Ok(EventReport { a_n, e_n, f_n, h_n })
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub columns_normalized: bool,
    /// Largest |‖X_j‖/sqrt(n) - 1|.
    pub column_norm_deviation: f64,
    /// restricted_nu over supports of size up to min(6s*, p).
    pub nu_measured: f64,
    pub nu_configured: f64,
    pub design_ok: bool,
    pub theta_min_sq: f64,
    /// 8 beta D log p / (n nu^2).
    pub theta_min_sq_required: f64,
    pub signal_ok: bool,
    pub d: f64,
    /// 4 + (4L + 2c)/beta.
    pub d_required: f64,
    pub d_ok: bool,
    pub holds: bool,
}

fn at_least(v: f64, bound: f64) -> bool {
    v >= bound - BOUNDARY_RTOL * bound.abs()
}

pub fn check_assumptions(inst: &ProblemInstance, cfg: &ChainConfig) -> Result<AssumptionReport> {
    let n = inst.n() as f64;
    let dev = inst
        .x()
        .column_iter()
        .map(|c| (c.norm() / n.sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    let nu_measured = restricted_nu(inst.x(), (6 * inst.s_star()).min(inst.p()))?;
    let design_ok = cfg.nu > 0.0 && at_least(nu_measured, cfg.nu);
    let theta_min_sq = inst.theta_min().powi(2);
    let required = 8.0 * cfg.beta * cfg.d * inst.log_p() / (n * cfg.nu.powi(2));
    let signal_ok = at_least(theta_min_sq, required);
    let d_required = ChainConfig::min_d(cfg.beta, cfg.l, cfg.c);
    let d_ok = at_least(cfg.d, d_required);
    let columns_normalized = dev <= COLUMN_NORM_RTOL;
    Ok(AssumptionReport {
        columns_normalized,
        column_norm_deviation: dev,
        nu_measured,
        nu_configured: cfg.nu,
        design_ok,
        theta_min_sq,
        theta_min_sq_required: required,
        signal_ok,
        d: cfg.d,
        d_required,
        d_ok,
        holds: columns_normalized && design_ok && signal_ok && d_ok,
    })
}

/// Worst relative shortfall of one projection identity or inequality over
/// an enumeration; it holds when `worst <= tolerance`.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub checked: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl IdentityCheck {
    fn new(name: &str, tolerance: f64) -> Self {
        IdentityCheck {
            name: name.into(),
            checked: 0,
            worst: 0.0,
            tolerance,
        }
    }

    fn record(&mut self, shortfall: f64) {
        self.checked += 1;
        self.worst = self.worst.max(shortfall);
    }

    pub fn holds(&self) -> bool {
        self.worst <= self.tolerance
    }
}

/// Sweep every disjoint pair (A, B), B nonempty, |A| + |B| <= `size_cap`,
/// and check with constant `nu`:
///
/// * `||(I - Phi_A) X_B t|| >= sqrt(n nu) ||t||` for a random t;
/// * `lambda_min(X_B^T (I - Phi_A) X_B) >= n nu`;
/// * for |B| = 1, the one-step increment of `||Phi w||^2` equals
///   `<z, w>^2 / ||z||^2` and is at most `<z, w>^2 / (n nu)`;
/// * the telescoping bound over B in ascending order.
///
/// Increments are measured against `||w||^2` and the singular-value checks
/// against `n ||t||^2` and `n`.
pub fn check_projection_identities<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    ws: &[DVector<f64>],
    nu: f64,
    size_cap: usize,
    tol: f64,
    rng: &mut R,
) -> Result<[IdentityCheck; 5]> {
    let (n, p) = x.shape();
    let nf = n as f64;
    let mut sing = IdentityCheck::new("residual columns have singular values at least sqrt(n nu)", tol);
    let mut eig = IdentityCheck::new("residual Gram matrix has eigenvalues at least n nu", tol);
    let mut one_eq = IdentityCheck::new("one-step increment equals the rank-one projection", tol);
    let mut one_le = IdentityCheck::new("one-step increment is at most <z,w>^2/(n nu)", tol);
    let mut tele = IdentityCheck::new("telescoping increments bound the total increment", tol);
    for u in enumerate_states_with_cap(p, Some(size_cap.min(p)), SUPPORT_SWEEP_CAP)? {
        for b in u.submasks() {
            if b.is_empty() {
                continue;
            }
            let a = u.difference(&b);
            let st = ProjectionState::from_subset(x, a)?;
            let cols: Vec<usize> = b.indices().collect();
            let mut w_mat = DMatrix::zeros(n, cols.len());
            for (c, &k) in cols.iter().enumerate() {
                w_mat.set_column(c, &st.column_residual(k)?);
            }
            let t = DVector::from_fn(cols.len(), |_, _| StandardNormal.sample(rng));
            let lhs = (&w_mat * &t).norm_squared();
            let rhs = nf * nu * t.norm_squared();
            sing.record((rhs - lhs) / (nf * t.norm_squared()));
            let lam = (w_mat.transpose() * &w_mat).symmetric_eigenvalues().min();
            eig.record((nf * nu - lam) / nf);
            for w in ws {
                let scale = w.norm_squared().max(f64::MIN_POSITIVE);
                if cols.len() == 1 {
                    let k = cols[0];
                    let z = w_mat.column(0).into_owned();
                    let mut grown = st.clone();
                    grown.add_column(k)?;
                    let inc = grown.project_sq_norm(w)? - st.project_sq_norm(w)?;
                    let zw = z.dot(w);
                    let zz = z.norm_squared();
                    if zz > (RANK_RTOL * nf.sqrt()).powi(2) {
                        one_eq.record((inc - zw * zw / zz).abs() / scale);
                    }
                    one_le.record((inc - zw * zw / (nf * nu)) / scale);
                }
                let terms = telescoping_bound_terms(x, a, b, w, nu)?;
                tele.record((terms.exact_increment - terms.bound()) / scale);
            }
        }
    }
    Ok([sing, eig, one_eq, one_le, tele])
}
