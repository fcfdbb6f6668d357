//! Lorentzian linear algebra and the maps between the hyperboloid ('Loid)
//! and Poincaré ball models.
//!
//! Points of the hyperboloid live in `R^{d+1}` with the indefinite form
//! `[x, y] = -x0*y0 + x1*y1 + ... + xd*yd`. The signature matrix `H` is never
//! stored; applying it flips the sign of component 0.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{HdmError, Result};

/// Tolerance on `[x, x] = -1`, relative to `max(1, x0^2)`.
pub const TOL_NORM: f64 = 1e-9;
/// Window below 1 in which an acosh argument is clamped instead of rejected.
pub const TOL_CLAMP: f64 = 1e-9;
/// Poincaré points with norm above `1 - BALL_MARGIN` are rejected.
pub const BALL_MARGIN: f64 = 1e-12;

/// The diagonal signature `(-1, +1, ..., +1)` on `R^{dim}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinkowskiForm {
    pub dim: usize,
}

impl MinkowskiForm {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        out[0] = -out[0];
        out
    }

    /// Dense `H`. Only meant for tests and callers that inspect it.
    pub fn dense(&self) -> DMatrix<f64> {
        let mut h = DMatrix::identity(self.dim, self.dim);
        h[(0, 0)] = -1.0;
        h
    }
}

/// Lorentzian inner product of two coordinate slices.
pub fn lorentz_inner(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(HdmError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(HdmError::InvalidArgument(format!(
            "Lorentz vectors need at least 2 components, got {}",
            x.len()
        )));
    }
    Ok(inner_unchecked(x, y))
}

#[inline]
pub(crate) fn inner_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let spatial: f64 = x[1..].iter().zip(&y[1..]).map(|(a, b)| a * b).sum();
    spatial - x[0] * y[0]
}

/// A point on the upper sheet of the hyperboloid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LoidPoint(Vec<f64>);

impl LoidPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(HdmError::InvalidArgument(format!(
                "a point of L^d needs d+1 >= 2 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(HdmError::OffManifold("non-finite coordinate".into()));
        }
        let x0 = coords[0];
        let norm = inner_unchecked(&coords, &coords);
        let scale = x0 * x0;
        if (norm + 1.0).abs() > TOL_NORM * scale.max(1.0) {
            return Err(HdmError::OffManifold(format!(
                "[x,x] = {norm} instead of -1"
            )));
        }
        if x0 < 1.0 - TOL_NORM {
            return Err(HdmError::OffManifold(format!(
                "x0 = {x0} is below the upper sheet"
            )));
        }
        Ok(Self(coords))
    }

    /// Lifts a spatial part `xbar` onto the sheet with `x0 = sqrt(1 + |xbar|^2)`.
    pub fn from_spatial(spatial: &[f64]) -> Self {
        let sq: f64 = spatial.iter().map(|v| v * v).sum();
        let mut coords = Vec::with_capacity(spatial.len() + 1);
        coords.push((1.0 + sq).sqrt());
        coords.extend_from_slice(spatial);
        Self(coords)
    }

    /// The apex `(1, 0, ..., 0)` of `L^d`.
    pub fn apex(d: usize) -> Self {
        let mut coords = vec![0.0; d + 1];
        coords[0] = 1.0;
        Self(coords)
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    /// Hyperbolic dimension `d` (one less than the ambient dimension).
    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn time(&self) -> f64 {
        self.0[0]
    }

    pub fn spatial(&self) -> &[f64] {
        &self.0[1..]
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

impl TryFrom<Vec<f64>> for LoidPoint {
    type Error = HdmError;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<LoidPoint> for Vec<f64> {
    fn from(p: LoidPoint) -> Self {
        p.0
    }
}

/// A point of the open unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PoincarePoint(Vec<f64>);

impl PoincarePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(HdmError::InvalidArgument(
                "a Poincaré point needs at least one coordinate".into(),
            ));
        }
        let norm = coords.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm >= 1.0 {
            return Err(HdmError::OutsideBall(norm));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for PoincarePoint {
    type Error = HdmError;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<PoincarePoint> for Vec<f64> {
    fn from(p: PoincarePoint) -> Self {
        p.0
    }
}

/// `acosh` with the argument clamped up to 1 inside the roundoff window.
pub fn acosh_clamped(arg: f64) -> Result<f64> {
    if arg.is_nan() || arg < 1.0 - TOL_CLAMP {
        return Err(HdmError::OffManifold(format!(
            "acosh argument {arg} is below 1"
        )));
    }
    Ok(arg.max(1.0).acosh())
}

/// Geodesic distance `acosh(-[x, y])` on the hyperboloid.
pub fn loid_distance(x: &LoidPoint, y: &LoidPoint) -> Result<f64> {
    let a = x.coords();
    let b = y.coords();
    if a.len() != b.len() {
        return Err(HdmError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let neg_inner = -inner_unchecked(a, b);
    let scale = (a[0] * b[0]).max(1.0);
    if neg_inner.is_nan() || neg_inner < 1.0 - TOL_CLAMP * scale {
        return Err(HdmError::OffManifold(format!(
            "-[x,y] = {neg_inner} is below 1"
        )));
    }
    // [x-y, x-y] = 4 sinh^2(d/2); far better conditioned than acosh near 0.
    let chord_sq: f64 = {
        let t = a[0] - b[0];
        let s: f64 = a[1..].iter().zip(&b[1..]).map(|(p, q)| (p - q) * (p - q)).sum();
        s - t * t
    };
    Ok(2.0 * (chord_sq.max(0.0).sqrt() / 2.0).asinh())
}

/// Distance in the Poincaré ball.
pub fn poincare_distance(u: &PoincarePoint, v: &PoincarePoint) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(HdmError::DimensionMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    let nu = u.norm();
    let nv = v.norm();
    for n in [nu, nv] {
        if n > 1.0 - BALL_MARGIN {
            return Err(HdmError::OutsideBall(n));
        }
    }
    let diff_sq: f64 = u
        .coords()
        .iter()
        .zip(v.coords())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    // cosh d = 1 + 2 s^2  <=>  sinh(d/2) = s
    let s = (diff_sq / ((1.0 - nu * nu) * (1.0 - nv * nv))).sqrt();
    Ok(2.0 * s.asinh())
}

/// Stereographic projection `y_i = x_{i+1} / (x0 + 1)`.
pub fn to_poincare(x: &LoidPoint) -> PoincarePoint {
    let denom = x.time() + 1.0;
    PoincarePoint(x.spatial().iter().map(|v| v / denom).collect())
}

/// Inverse stereographic projection.
pub fn from_poincare(y: &PoincarePoint) -> Result<LoidPoint> {
    let sq: f64 = y.coords().iter().map(|v| v * v).sum();
    if sq >= 1.0 {
        return Err(HdmError::OutsideBall(sq.sqrt()));
    }
    let f = 1.0 / (1.0 - sq);
    let mut coords = Vec::with_capacity(y.dim() + 1);
    coords.push((1.0 + sq) * f);
    coords.extend(y.coords().iter().map(|v| 2.0 * v * f));
    Ok(LoidPoint(coords))
}

/// `H^{-1} R^T H`, the adjoint of `R` with respect to the Lorentzian form.
pub fn h_adjoint(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !r.is_square() {
        return Err(HdmError::NotSquare {
            rows: r.nrows(),
            cols: r.ncols(),
        });
    }
    let mut adj = r.transpose();
    let n = adj.nrows();
    for k in 1..n {
        adj[(0, k)] = -adj[(0, k)];
        adj[(k, 0)] = -adj[(k, 0)];
    }
    Ok(adj)
}

/// True iff `|| R^T H R - H ||_F <= tol`.
pub fn is_h_unitary(r: &DMatrix<f64>, tol: f64) -> bool {
    if !r.is_square() || r.nrows() < 1 {
        return false;
    }
    let n = r.nrows();
    let h = MinkowskiForm::new(n);
    let mut hr = r.clone();
    hr.row_mut(0).neg_mut();
    let residual = r.transpose() * hr - h.dense();
    residual.norm() <= tol
}

/// `n` seeded random points of `L^d`: Gaussian spatial parts with standard
/// deviation `spread`, lifted onto the sheet.
pub fn random_loid_points(n: usize, d: usize, seed: u64, spread: f64) -> Result<Vec<LoidPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_loid_points_with(&mut rng, n, d, spread)
}

pub fn random_loid_points_with<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    d: usize,
    spread: f64,
) -> Result<Vec<LoidPoint>> {
    if n == 0 || d == 0 {
        return Err(HdmError::InvalidArgument(format!(
            "need n >= 1 and d >= 1, got n = {n}, d = {d}"
        )));
    }
    let normal = Normal::new(0.0, spread)
        .map_err(|e| HdmError::InvalidArgument(format!("spread {spread}: {e}")))?;
    Ok((0..n)
        .map(|_| {
            let spatial: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
            LoidPoint::from_spatial(&spatial)
        })
        .collect())
}
