//! PSD-cone projection, log-det reweighting and the scaled half-vectorization
//! used by the splitting solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{HdmError, Result};
use crate::gramian::HGramianSplit;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Index map for the scaled half-vectorization of an `n x n` symmetric matrix.
/// Off-diagonal entries carry a factor `sqrt(2)` so the Frobenius inner
/// product becomes the plain dot product.
#[derive(Debug, Clone)]
pub(crate) struct SvecLayout {
    n: usize,
    offsets: Vec<usize>,
}

impl SvecLayout {
    pub fn new(n: usize) -> Self {
        // Column-major upper triangle: entries (0..=j, j) for each column j.
        let offsets = (0..n).map(|j| j * (j + 1) / 2).collect();
        Self { n, offsets }
    }

    pub fn len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.offsets[b] + a
    }

    pub fn svec(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(self.len());
        for j in 0..self.n {
            for i in 0..=j {
                let val = if i == j {
                    m[(i, i)]
                } else {
                    SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)])
                };
                v[self.offsets[j] + i] = val;
            }
        }
        v
    }

    pub fn smat(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for i in 0..=j {
                let val = v[self.offsets[j] + i];
                if i == j {
                    m[(i, i)] = val;
                } else {
                    m[(i, j)] = val / SQRT2;
                    m[(j, i)] = val / SQRT2;
                }
            }
        }
        m
    }
}

fn eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(HdmError::Numeric("non-finite entry in symmetric matrix".into()));
    }
    SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| HdmError::Numeric("symmetric eigensolver did not converge".into()))
}

/// Frobenius-nearest PSD matrix: negative eigenvalues clipped to zero.
pub fn psd_project(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(HdmError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = eigen(&sym)?;
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return Ok(sym);
    }
    let n = sym.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 0.0 {
            let v = eig.eigenvectors.column(k);
            out.ger(lambda, &v, &v, 1.0);
        }
    }
    Ok((&out + out.transpose()) * 0.5)
}

/// Linearization weights of `log det(G+ + delta I) + log det(G- + delta I)`:
/// `((G+ + delta I)^{-1}, (G- + delta I)^{-1})`.
pub fn logdet_reweight(
    split: &HGramianSplit,
    delta: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(delta > 0.0) {
        return Err(HdmError::InvalidArgument(format!(
            "log-det regularization must be positive, got {delta}"
        )));
    }
    Ok((
        shifted_inverse(&split.g_plus, delta)?,
        shifted_inverse(&split.g_minus, delta)?,
    ))
}

fn shifted_inverse(g: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    let sym = (g + g.transpose()) * 0.5;
    let eig = eigen(&sym)?;
    let n = sym.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        // G is PSD up to roundoff; keep the shifted spectrum positive.
        let shifted = lambda.max(0.0) + delta;
        let v = eig.eigenvectors.column(k);
        out.ger(1.0 / shifted, &v, &v, 1.0);
    }
    Ok((&out + out.transpose()) * 0.5)
}

/// `log det(G + delta I)` with negative roundoff eigenvalues clipped.
pub fn logdet_shifted(g: &DMatrix<f64>, delta: f64) -> Result<f64> {
    let sym = (g + g.transpose()) * 0.5;
    let eig = eigen(&sym)?;
    Ok(eig.eigenvalues.iter().map(|&l| (l.max(0.0) + delta).ln()).sum())
}

/// Eigen-clipping applied in place to a scaled half-vector.
pub(crate) fn project_svec_psd(layout: &SvecLayout, v: &mut DVector<f64>) -> Result<()> {
    let m = layout.smat(v);
    let eig = eigen(&m)?;
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return Ok(());
    }
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 0.0 {
            let col = eig.eigenvectors.column(k);
            out.ger(lambda, &col, &col, 1.0);
        }
    }
    *v = layout.svec(&out);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gramian::sorted_eigenvalues;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn svec_preserves_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layout = SvecLayout::new(5);
        let a = random_sym(&mut rng, 5);
        let b = random_sym(&mut rng, 5);
        let frob = a.component_mul(&b).sum();
        assert_abs_diff_eq!(layout.svec(&a).dot(&layout.svec(&b)), frob, epsilon = 1e-12);
        assert!((layout.smat(&layout.svec(&a)) - &a).amax() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((psd_project(&p).unwrap() - &p).amax() < 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -2.0]));
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 0.0]));
        assert!((psd_project(&d).unwrap() - expect).amax() < 1e-14);
        assert!(psd_project(&DMatrix::from_element(2, 2, f64::NAN)).is_err());
        assert!(psd_project(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn projection_beats_every_clip_pattern() {
        // Oracle: within the eigenbasis of M, every subset of eigenvalues
        // replaced by an arbitrary nonnegative grid value is a PSD candidate.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let m = random_sym(&mut rng, 4);
            let p = psd_project(&m).unwrap();
            let best = (&p - &m).norm();
            let eig = SymmetricEigen::new(m.clone());
            let grid = [0.0, 0.05, 0.1, 0.5, 1.0];
            for mask in 0u32..16 {
                for &g in &grid {
                    let vals: Vec<f64> = (0..4)
                        .map(|k| {
                            let l = eig.eigenvalues[k];
                            if mask & (1 << k) != 0 {
                                l.max(0.0)
                            } else {
                                g
                            }
                        })
                        .collect();
                    let cand = &eig.eigenvectors
                        * DMatrix::from_diagonal(&DVector::from_vec(vals))
                        * eig.eigenvectors.transpose();
                    assert!(best <= (&cand - &m).norm() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let a = random_sym(&mut rng, 6);
            let b = random_sym(&mut rng, 6);
            let pa = psd_project(&a).unwrap();
            let pb = psd_project(&b).unwrap();
            assert!((psd_project(&pa).unwrap() - &pa).amax() < 1e-12);
            assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-9);
            assert!(sorted_eigenvalues(&pa)[0] > -1e-12);
        }
    }

    #[test]
    fn reweight_examples() {
        let n = 3;
        let zero = HGramianSplit {
            g_plus: DMatrix::zeros(n, n),
            g_minus: DMatrix::identity(n, n),
        };
        let (wp, wm) = logdet_reweight(&zero, 0.1).unwrap();
        assert!((wp - DMatrix::identity(n, n) * 10.0).amax() < 1e-12);
        assert!((wm - DMatrix::identity(n, n) / 1.1).amax() < 1e-12);

        let id = HGramianSplit {
            g_plus: DMatrix::identity(n, n),
            g_minus: DMatrix::zeros(n, n),
        };
        let (wp, _) = logdet_reweight(&id, 1.0).unwrap();
        assert!((wp - DMatrix::identity(n, n) * 0.5).amax() < 1e-12);
        assert!(logdet_reweight(&id, 0.0).is_err());
        assert!(logdet_reweight(&id, -1.0).is_err());
    }

    #[test]
    fn reweight_inverts_shifted_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        let g = &a * a.transpose();
        let split = HGramianSplit {
            g_plus: g.clone(),
            g_minus: g.clone(),
        };
        let (wp, _) = logdet_reweight(&split, 0.05).unwrap();
        let prod = wp * (g + DMatrix::identity(5, 5) * 0.05);
        assert!((prod - DMatrix::identity(5, 5)).amax() < 1e-8);
    }
}
