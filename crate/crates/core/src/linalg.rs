//! Small dense linear-algebra helpers over nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Numerically stable `ln Σ e^{x_i}`; `-∞` for an empty input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Combines two log-domain partial sums.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    a.lu()
        .solve(&b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::InvalidParameter("singular linear system".into()))
}

/// Stationary row vector `π P = π` of an irreducible row-stochastic matrix.
pub fn stationary(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let pi = solve(a, b)?;
    if pi.iter().any(|&v| v < -1e-12) {
        return Err(Error::NotProbability("stationary vector has negative entries".into()));
    }
    Ok(pi.iter().map(|v| v.max(0.0)).collect())
}

/// Perron root and right/left vectors of a nonnegative primitive matrix.
#[derive(Clone, Debug)]
pub struct Perron {
    pub value: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
}

pub fn perron(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<Perron> {
    let (value, right) = power(m, tol, max_iter)?;
    let (_, left) = power(&m.transpose(), tol, max_iter)?;
    Ok(Perron {
        value,
        right: right.iter().copied().collect(),
        left: left.iter().copied().collect(),
    })
}

fn power(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<(f64, DVector<f64>)> {
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let w = m * &v;
        let norm = w.amax();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("matrix annihilates the positive cone".into()));
        }
        let next = w / norm;
        residual = (&next - &v).amax();
        v = next;
        if residual <= tol {
            let mv = m * &v;
            let value = mv.dot(&v) / v.dot(&v);
            return Ok((value, v));
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}
