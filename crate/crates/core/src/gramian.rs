//! Hyperbolic distance matrices, H-Gramians and the semidefinite membership
//! certificate.
//!
//! An H-Gramian `G = X^T H X` of points on `L^d` splits as `G = G+ - G-` with
//! both parts PSD, `rank G+ <= d`, `rank G- <= 1`, `diag G = -1` and all
//! entries `<= -1`. Conversely any matrix with that structure is the Gramian
//! of some point set, which is what [`certify_h_gramian`] checks numerically.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{HdmError, Result};
use crate::lorentz::{inner_unchecked, loid_distance, LoidPoint, TOL_CLAMP};

/// Symmetric matrix of hyperbolic distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Hdm {
    values: DMatrix<f64>,
}

impl Hdm {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (r, c) = values.shape();
        if r != c {
            return Err(HdmError::NotSquare { rows: r, cols: c });
        }
        let scale = values.amax().max(1.0);
        let mut out = values;
        for i in 0..r {
            if out[(i, i)] != 0.0 {
                return Err(HdmError::InvalidHdm(format!(
                    "diagonal entry ({i},{i}) = {} is not zero",
                    out[(i, i)]
                )));
            }
            for j in (i + 1)..r {
                let (a, b) = (out[(i, j)], out[(j, i)]);
                if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 {
                    return Err(HdmError::InvalidHdm(format!(
                        "entry ({i},{j}) must be finite and nonnegative"
                    )));
                }
                if (a - b).abs() > 1e-12 * scale {
                    return Err(HdmError::NotSymmetric((a - b).abs()));
                }
                let m = 0.5 * (a + b);
                out[(i, j)] = m;
                out[(j, i)] = m;
            }
        }
        Ok(Self { values: out })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: DMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn max_value(&self) -> f64 {
        self.values.max()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }
}

/// Symmetric 0/1 mask of measured entries (zero diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMask {
    entries: DMatrix<f64>,
}

impl ObservationMask {
    pub fn empty(n: usize) -> Self {
        Self {
            entries: DMatrix::zeros(n, n),
        }
    }

    /// All off-diagonal entries measured.
    pub fn full(n: usize) -> Self {
        let mut entries = DMatrix::from_element(n, n, 1.0);
        entries.fill_diagonal(0.0);
        Self { entries }
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut mask = Self::empty(n);
        for &(i, j) in pairs {
            if i >= n || j >= n {
                return Err(HdmError::InvalidArgument(format!(
                    "pair ({i},{j}) out of range for n = {n}"
                )));
            }
            if i == j {
                return Err(HdmError::InvalidArgument(format!(
                    "diagonal pair ({i},{i}) cannot be measured"
                )));
            }
            mask.set(i, j, true);
        }
        Ok(mask)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn set(&mut self, i: usize, j: usize, measured: bool) {
        let v = if measured && i != j { 1.0 } else { 0.0 };
        self.entries[(i, j)] = v;
        self.entries[(j, i)] = v;
    }

    pub fn is_measured(&self, i: usize, j: usize) -> bool {
        self.entries[(i, j)] != 0.0
    }

    /// Measured pairs `(i, j)` with `i < j`, in row-major order.
    pub fn measured_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.is_measured(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn count(&self) -> usize {
        self.measured_pairs().len()
    }

    /// Fraction of unordered pairs that are *not* measured.
    pub fn sampling_density(&self) -> f64 {
        let n = self.n();
        let total = n * n.saturating_sub(1) / 2;
        if total == 0 {
            return 0.0;
        }
        1.0 - self.count() as f64 / total as f64
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// The PSD pair `(G+, G-)` with `G = G+ - G-`.
#[derive(Debug, Clone, PartialEq)]
pub struct HGramianSplit {
    pub g_plus: DMatrix<f64>,
    pub g_minus: DMatrix<f64>,
}

impl HGramianSplit {
    pub fn gramian(&self) -> DMatrix<f64> {
        &self.g_plus - &self.g_minus
    }

    /// Spectral split of a symmetric matrix into positive and negative parts.
    pub fn from_gramian(g: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(g.clone());
        let n = g.nrows();
        let mut g_plus = DMatrix::zeros(n, n);
        let mut g_minus = DMatrix::zeros(n, n);
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            let outer = v * v.transpose();
            if lambda > 0.0 {
                g_plus += outer * lambda;
            } else if lambda < 0.0 {
                g_minus -= outer * lambda;
            }
        }
        Self { g_plus, g_minus }
    }
}

/// Result of checking the semidefinite characterization on a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramCertificate {
    pub valid: bool,
    pub neg_eigs: usize,
    pub pos_eigs: usize,
    pub diag_violation: f64,
    pub offdiag_violation: f64,
}

/// `G = X^T H X` for a list of points on a common hyperboloid.
pub fn h_gramian(points: &[LoidPoint]) -> Result<DMatrix<f64>> {
    let first = points
        .first()
        .ok_or_else(|| HdmError::NoData("empty point list".into()))?;
    let dim = first.coords().len();
    for p in points {
        if p.coords().len() != dim {
            return Err(HdmError::DimensionMismatch {
                expected: dim,
                got: p.coords().len(),
            });
        }
    }
    let n = points.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = inner_unchecked(points[i].coords(), points[j].coords());
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// `D = acosh[-G]` elementwise, with the standard roundoff window.
pub fn hdm_from_gramian(g: &DMatrix<f64>) -> Result<Hdm> {
    hdm_from_gramian_with_tol(g, TOL_CLAMP)
}

/// Like [`hdm_from_gramian`] but with an explicit clamp window, measured
/// relative to `max(1, |g_ij|)`.
pub fn hdm_from_gramian_with_tol(g: &DMatrix<f64>, tol: f64) -> Result<Hdm> {
    let (r, c) = g.shape();
    if r != c {
        return Err(HdmError::NotSquare { rows: r, cols: c });
    }
    for i in 0..r {
        if (g[(i, i)] + 1.0).abs() > tol {
            return Err(HdmError::InvalidHdm(format!(
                "diagonal entry ({i},{i}) = {} is not -1",
                g[(i, i)]
            )));
        }
    }
    let mut d = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in (i + 1)..r {
            let arg = -0.5 * (g[(i, j)] + g[(j, i)]);
            if arg.is_nan() || arg < 1.0 - tol * arg.abs().max(1.0) {
                return Err(HdmError::InvalidHdm(format!(
                    "-G({i},{j}) = {arg} is below 1"
                )));
            }
            let v = arg.max(1.0).acosh();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(Hdm { values: d })
}

/// Inverse of [`hdm_from_gramian`]: `G = -cosh[D]`.
pub fn gramian_from_hdm(d: &Hdm) -> DMatrix<f64> {
    d.values().map(|v| -v.cosh())
}

/// Pairwise geodesic distances of a point list.
pub fn distance_matrix(points: &[LoidPoint]) -> Result<Hdm> {
    let n = points.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = loid_distance(&points[i], &points[j])?;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(Hdm { values: d })
}

/// `||a - b||_F / ||a||_F` (0 when both vanish).
pub fn relative_error(reference: &DMatrix<f64>, estimate: &DMatrix<f64>) -> f64 {
    let denom = reference.norm();
    let num = (reference - estimate).norm();
    if denom == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / denom
    }
}

/// [`relative_error`] restricted to the measured pairs of `mask`.
pub fn masked_relative_error(reference: &DMatrix<f64>, estimate: &DMatrix<f64>, mask: &ObservationMask) -> f64 {
    let w = mask.entries();
    relative_error(&reference.component_mul(w), &estimate.component_mul(w))
}

pub(crate) fn max_asymmetry(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((g[(i, j)] - g[(j, i)]).abs());
        }
    }
    worst
}

/// Sorted (ascending) eigenvalues of a symmetric matrix.
pub fn sorted_eigenvalues(g: &DMatrix<f64>) -> Vec<f64> {
    let mut vals: Vec<f64> = SymmetricEigen::new(g.clone()).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Checks whether `g` is the H-Gramian of points on `L^d`.
///
/// Rank conditions count eigenvalues beyond `tol * ||g||_2`; the diagonal must
/// equal -1 within `tol` and off-diagonal entries may exceed -1 by at most `tol`.
pub fn certify_h_gramian(g: &DMatrix<f64>, d: usize, tol: f64) -> Result<GramCertificate> {
    let (r, c) = g.shape();
    if r != c {
        return Err(HdmError::NotSquare { rows: r, cols: c });
    }
    let asym = max_asymmetry(g);
    if asym > tol * g.amax().max(1.0) {
        return Err(HdmError::NotSymmetric(asym));
    }
    let sym = (g + g.transpose()) * 0.5;
    let eigs = sorted_eigenvalues(&sym);
    let spectral = eigs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = tol * spectral;
    let neg_eigs = eigs.iter().filter(|&&v| v < -threshold).count();
    let pos_eigs = eigs.iter().filter(|&&v| v > threshold).count();

    let mut diag_violation: f64 = 0.0;
    let mut offdiag_violation: f64 = 0.0;
    for i in 0..r {
        diag_violation = diag_violation.max((sym[(i, i)] + 1.0).abs());
        for j in (i + 1)..r {
            offdiag_violation = offdiag_violation.max((sym[(i, j)] + 1.0).max(0.0));
        }
    }
    let valid =
        neg_eigs == 1 && pos_eigs <= d && diag_violation <= tol && offdiag_violation <= tol;
    Ok(GramCertificate {
        valid,
        neg_eigs,
        pos_eigs,
        diag_violation,
        offdiag_violation,
    })
}
