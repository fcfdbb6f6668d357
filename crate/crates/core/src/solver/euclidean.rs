//! Least-squares Euclidean distance matrix fit over centered PSD Gramians:
//! `minimize ||dsq - K(G)||_F^2` subject to `G PSD`, `G 1 = 0`.

use nalgebra::{DMatrix, DVector};

use super::psd::psd_project;
use super::SolverConfig;
use crate::error::{HdmError, Result};

/// Result of the Euclidean fit.
#[derive(Debug, Clone)]
pub struct PsdLeastSquares {
    pub gramian: DMatrix<f64>,
    pub iterations: usize,
    /// Relative projected-gradient residual.
    pub stationarity: f64,
    pub converged: bool,
}

/// `K(G) = -2G + diag(G) 1^T + 1 diag(G)^T`.
pub fn k_operator(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    DMatrix::from_fn(n, n, |i, j| g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)])
}

/// Adjoint of `K`: `-2R + 2 Diag(R 1)` for symmetric `R`.
fn k_adjoint(r: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = r * -2.0;
    for i in 0..r.nrows() {
        out[(i, i)] += 2.0 * r.row(i).sum();
    }
    out
}

/// Orthonormal basis of the complement of the all-ones vector (n x (n-1)),
/// from the Householder reflector swapping `e_0` and `1/sqrt(n)`.
fn centered_basis(n: usize) -> DMatrix<f64> {
    let s = 1.0 / (n as f64).sqrt();
    let mut w = DVector::from_element(n, s);
    w[0] -= 1.0;
    let nw = w.norm_squared();
    let q = DMatrix::identity(n, n) - (&w * w.transpose()) * (2.0 / nw);
    q.columns(1, n - 1).into_owned()
}

pub fn solve_psd_least_squares(dsq: &DMatrix<f64>, config: &SolverConfig) -> Result<PsdLeastSquares> {
    config.validate()?;
    let n = dsq.nrows();
    if !dsq.is_square() {
        return Err(HdmError::NotSquare {
            rows: dsq.nrows(),
            cols: dsq.ncols(),
        });
    }
    if dsq.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(HdmError::InvalidArgument(
            "squared distances must be finite and nonnegative".into(),
        ));
    }
    let scale = dsq.amax().max(1.0);
    if (dsq - dsq.transpose()).amax() > 1e-12 * scale {
        return Err(HdmError::NotSymmetric((dsq - dsq.transpose()).amax()));
    }
    if (0..n).any(|i| dsq[(i, i)].abs() > 1e-12 * scale) {
        return Err(HdmError::InvalidArgument("nonzero diagonal in squared distances".into()));
    }
    if n <= 1 || dsq.amax() == 0.0 {
        return Ok(PsdLeastSquares {
            gramian: DMatrix::zeros(n, n),
            iterations: 0,
            stationarity: 0.0,
            converged: true,
        });
    }

    let v = centered_basis(n);
    let vt = v.transpose();
    let lift = |s: &DMatrix<f64>| &v * s * &vt;
    let grad = |s: &DMatrix<f64>| {
        let r = k_operator(&lift(s)) - dsq;
        let g = &vt * k_adjoint(&r) * &v * 2.0;
        (&g + g.transpose()) * 0.5
    };

    // Lipschitz constant of the reduced gradient by power iteration.
    let mut p = DMatrix::<f64>::identity(n - 1, n - 1);
    p /= p.norm();
    let mut lip = 0.0;
    for _ in 0..100 {
        let kp = &vt * k_adjoint(&k_operator(&lift(&p))) * &v * 2.0;
        let nk = kp.norm();
        if nk == 0.0 {
            break;
        }
        lip = nk;
        p = kp / nk;
    }
    let lip = 1.1 * lip.max(f64::MIN_POSITIVE);
    let step = 1.0 / lip;

    let g0 = grad(&DMatrix::zeros(n - 1, n - 1)).norm().max(1e-300);
    let mut s = DMatrix::zeros(n - 1, n - 1);
    let mut y = s.clone();
    let mut t = 1.0f64;
    let mut stationarity = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut prev_obj = f64::INFINITY;

    for it in 1..=config.max_iters {
        iterations = it;
        let s_next = psd_project(&(&y - grad(&y) * step))?;
        let obj = (k_operator(&lift(&s_next)) - dsq).norm_squared();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if obj > prev_obj {
            // Adaptive restart.
            y = s.clone();
            t = 1.0;
            continue;
        }
        y = &s_next + (&s_next - &s) * ((t - 1.0) / t_next);
        t = t_next;
        s = s_next;
        prev_obj = obj;

        if it % config.check_every == 0 || it == config.max_iters {
            let pg = (&s - psd_project(&(&s - grad(&s) * step))?) * lip;
            stationarity = pg.norm() / g0;
            if stationarity <= config.tol_dual {
                converged = true;
                break;
            }
        }
    }
    let g = lift(&s);
    Ok(PsdLeastSquares {
        gramian: (&g + g.transpose()) * 0.5,
        iterations,
        stationarity,
        converged,
    })
}
