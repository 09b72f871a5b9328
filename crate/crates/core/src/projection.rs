//! Orthogonal projections onto column spans, updated one column at a time.
//!
//! A [`ProjectionState`] keeps an orthonormal basis of span(X_S) built by
//! Gram-Schmidt with a second orthogonalization pass. Adding column k
//! appends the unit vector along z_k = (I - Phi_S) X_k, so the gain in
//! squared projection norm of any w is <z_k, w>^2 / |z_k|^2. Removing a
//! column rebuilds the basis from the remaining columns in insertion order.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::subset::{count_states, enumerate_states_with_cap, Subset};

/// A new column is treated as dependent when |z_k| <= RANK_RTOL * sqrt(n).
pub const RANK_RTOL: f64 = 1e-8;

/// Cap on the number of supports any restricted-eigenvalue sweep visits.
pub const SUPPORT_SWEEP_CAP: u128 = 1 << 22;

#[derive(Clone, Debug)]
pub struct ProjectionState<'x> {
    design: &'x DMatrix<f64>,
    active: Subset,
    basis: Vec<DVector<f64>>,
    col_order: Vec<usize>,
}

/// Result of appending one column.
#[derive(Clone, Debug)]
pub struct ColumnUpdate {
    /// Unit vector along (I - Phi_S) X_k, absent for a dependent column.
    pub direction: Option<DVector<f64>>,
    /// |(I - Phi_S) X_k|.
    pub residual_norm: f64,
}

impl ColumnUpdate {
    /// ||Phi_{S+k} w||^2 - ||Phi_S w||^2.
    pub fn delta(&self, w: &DVector<f64>) -> f64 {
        self.direction.as_ref().map_or(0.0, |q| q.dot(w).powi(2))
    }
}

impl<'x> ProjectionState<'x> {
    pub fn empty(design: &'x DMatrix<f64>) -> Result<Self> {
        Ok(ProjectionState {
            design,
            active: Subset::empty(design.ncols())?,
            basis: Vec::new(),
            col_order: Vec::new(),
        })
    }

    /// Projection onto span(X_S), columns inserted in ascending order.
    pub fn from_subset(design: &'x DMatrix<f64>, s: Subset) -> Result<Self> {
        if s.dim() != design.ncols() {
            return Err(Error::DimensionMismatch {
                expected: design.ncols(),
                found: s.dim(),
            });
        }
        let mut st = Self::empty(design)?;
        for k in s.indices() {
            st.add_column(k)?;
        }
        Ok(st)
    }

    pub fn design(&self) -> &'x DMatrix<f64> {
        self.design
    }

    pub fn active(&self) -> Subset {
        self.active
    }

    /// trace(Phi_S), the dimension of span(X_S).
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    pub fn column_order(&self) -> &[usize] {
        &self.col_order
    }

    fn check_len(&self, w: &DVector<f64>) -> Result<()> {
        if w.len() != self.design.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.design.nrows(),
                found: w.len(),
            });
        }
        Ok(())
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.design.ncols() {
            return Err(Error::IndexOutOfRange {
                index: k,
                p: self.design.ncols(),
            });
        }
        Ok(())
    }

    /// ||Phi_S w||^2.
    pub fn project_sq_norm(&self, w: &DVector<f64>) -> Result<f64> {
        self.check_len(w)?;
        Ok(self.basis.iter().map(|q| q.dot(w).powi(2)).sum())
    }

    /// Phi_S w.
    pub fn project(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(w)?;
        let mut out = DVector::zeros(w.len());
        for q in &self.basis {
            out.axpy(q.dot(w), q, 1.0);
        }
        Ok(out)
    }

    /// (I - Phi_S) w, orthogonalized twice.
    pub fn residual(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(w)?;
        let mut z = w.clone();
        for _ in 0..2 {
            for q in &self.basis {
                let c = q.dot(&z);
                z.axpy(-c, q, 1.0);
            }
        }
        Ok(z)
    }

    /// (I - Phi_S) X_k.
    pub fn column_residual(&self, k: usize) -> Result<DVector<f64>> {
        self.check_index(k)?;
        self.residual(&self.design.column(k).into_owned())
    }

    /// The update that adding column k would make, without applying it.
    pub fn preview_column(&self, k: usize) -> Result<ColumnUpdate> {
        if self.active.contains(k) {
            return Err(Error::AlreadyActive(k));
        }
        let z = self.column_residual(k)?;
        let norm = z.norm();
        let tol = RANK_RTOL * (self.design.nrows() as f64).sqrt();
        Ok(ColumnUpdate {
            direction: (norm > tol).then(|| z / norm),
            residual_norm: norm,
        })
    }

    /// Append column k. A dependent column joins the active set without
    /// changing the basis.
    pub fn add_column(&mut self, k: usize) -> Result<ColumnUpdate> {
        let upd = self.preview_column(k)?;
        if let Some(q) = &upd.direction {
            self.basis.push(q.clone());
        }
        self.active = self.active.with(k);
        self.col_order.push(k);
        Ok(upd)
    }

    /// Drop column k, rebuilding from the remaining columns in insertion
    /// order.
    pub fn remove_column(&mut self, k: usize) -> Result<()> {
        self.check_index(k)?;
        if !self.active.contains(k) {
            return Err(Error::NotActive(k));
        }
        let order: Vec<usize> = self.col_order.iter().copied().filter(|&j| j != k).collect();
        self.basis.clear();
        self.col_order.clear();
        self.active = self.active.without(k);
        let kept = self.active;
        self.active = Subset::empty(self.design.ncols())?;
        for j in order {
            self.add_column(j)?;
        }
        debug_assert_eq!(self.active, kept);
        Ok(())
    }

    /// Largest |<q_a, q_b> - delta_ab| over the basis.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, qa) in self.basis.iter().enumerate() {
            for (b, qb) in self.basis.iter().enumerate().skip(a) {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((qa.dot(qb) - target).abs());
            }
        }
        worst
    }
}

/// Per-step bounds for the growth of ||Phi w||^2 when B is appended to A.
#[derive(Clone, Debug)]
pub struct TelescopingTerms {
    /// <(I - Phi_{A_l}) X_{k[l+1]}, w>^2 / (n nu), in insertion order.
    pub terms: Vec<f64>,
    /// Exact ||Phi_{A+B} w||^2 - ||Phi_A w||^2.
    pub exact_increment: f64,
}

impl TelescopingTerms {
    pub fn bound(&self) -> f64 {
        self.terms.iter().sum()
    }
}

/// Insert the members of `b` into span(X_A) in ascending order and record
/// each step's `<z, w>^2 / (n nu)` bound alongside the exact increment.
pub fn telescoping_bound_terms(
    design: &DMatrix<f64>,
    a: Subset,
    b: Subset,
    w: &DVector<f64>,
    nu: f64,
) -> Result<TelescopingTerms> {
    if !a.is_disjoint(&b) {
        return Err(Error::NotDisjoint);
    }
    let n = design.nrows() as f64;
    let mut st = ProjectionState::from_subset(design, a)?;
    let start = st.project_sq_norm(w)?;
    let mut terms = Vec::with_capacity(b.size());
    for k in b.indices() {
        let z = st.column_residual(k)?;
        terms.push(z.dot(w).powi(2) / (n * nu));
        st.add_column(k)?;
    }
    let exact_increment = st.project_sq_norm(w)? - start;
    Ok(TelescopingTerms { terms, exact_increment })
}

/// Gram matrix X^T X.
pub fn gram(design: &DMatrix<f64>) -> DMatrix<f64> {
    design.transpose() * design
}

pub(crate) fn principal_submatrix(g: &DMatrix<f64>, s: Subset) -> DMatrix<f64> {
    let idx: Vec<usize> = s.indices().collect();
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| g[(idx[a], idx[b])])
}

pub(crate) fn sym_eigen_extremes(m: DMatrix<f64>) -> (f64, f64) {
    let ev = m.symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Supports of exactly `size` columns; by eigenvalue interlacing the
/// extreme restricted eigenvalues over |S| <= size are attained there.
pub(crate) fn supports_of_size(p: usize, size: usize) -> Result<Vec<Subset>> {
    let size = size.min(p);
    let count = crate::subset::binomial(p, size);
    if count > SUPPORT_SWEEP_CAP {
        return Err(Error::EnumerationTooLarge {
            count,
            cap: SUPPORT_SWEEP_CAP,
        });
    }
    // walk the size-capped enumeration only when it is small; otherwise
    // generate combinations directly
    if count_states(p, Some(size)) <= SUPPORT_SWEEP_CAP {
        return Ok(enumerate_states_with_cap(p, Some(size), SUPPORT_SWEEP_CAP)?
            .filter(|s| s.size() == size)
            .collect());
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(Subset::from_indices(p, &idx)?);
        let mut i = size;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if idx[i] != i + p - size {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Largest nu with ||X_S w||^2 >= n nu ||w||^2 for all nonempty |S| <= cap:
/// min over those supports of lambda_min(X_S^T X_S)/n, clamped at zero.
pub fn restricted_nu(design: &DMatrix<f64>, size_cap: usize) -> Result<f64> {
    let p = design.ncols();
    if size_cap == 0 || size_cap > p {
        return Err(Error::ConfigInvalid(format!("size cap {size_cap} must lie in 1..={p}")));
    }
    let n = design.nrows() as f64;
    let g = gram(design);
    let mut nu = f64::INFINITY;
    for s in supports_of_size(p, size_cap)? {
        let (lo, _) = sym_eigen_extremes(principal_submatrix(&g, s));
        nu = nu.min(lo / n);
    }
    Ok(nu.max(0.0))
}
