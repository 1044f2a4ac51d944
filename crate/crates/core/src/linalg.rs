//! Dense linear-algebra helpers shared by the chain, walk and annealing code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

pub type C64 = Complex64;
pub type RMatrix = DMatrix<f64>;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigen(m: &RMatrix) -> (Vec<f64>, RMatrix) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = RMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn spectral_norm(m: &RMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn spectral_norm_c(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &RMatrix) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn condition_number_c(m: &CMatrix) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Max column sum.
pub fn norm_one(m: &RMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Max row sum.
pub fn norm_inf(m: &RMatrix) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Frobenius norm of `U^dagger U - I`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    (u.adjoint() * u - CMatrix::identity(n, n)).norm()
}

/// Largest entry modulus.
pub fn max_abs_c(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}

/// Eigendecomposition of a normal matrix through its complex Schur form.
#[derive(Debug, Clone)]
pub struct NormalEigen {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
    /// Frobenius norm of the strictly upper triangle left by Schur.
    pub off_diagonal: f64,
}

pub fn normal_eigen(m: &CMatrix) -> Result<NormalEigen> {
    let n = m.nrows();
    if n == 0 {
        return Ok(NormalEigen { values: vec![], vectors: CMatrix::zeros(0, 0), off_diagonal: 0.0 });
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 100_000)
        .ok_or_else(|| CoreError::Numerical("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let values = (0..n).map(|i| t[(i, i)]).collect();
    let mut off = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            off += t[(i, j)].norm_sqr();
        }
    }
    Ok(NormalEigen { values, vectors: q, off_diagonal: off.sqrt() })
}

/// Eigenvalues and unit eigenvectors of a general square matrix, from the
/// Schur form by back substitution. Exactly repeated eigenvalues get a
/// slightly shifted denominator, so defective input shows up as an
/// ill-conditioned eigenvector matrix.
pub fn general_eigen(m: &CMatrix) -> Result<(Vec<C64>, CMatrix)> {
    let n = m.nrows();
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 100_000)
        .ok_or_else(|| CoreError::Numerical("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let scale = t.norm().max(1.0);
    let mut y = CMatrix::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = ONE;
        for i in (0..k).rev() {
            let mut acc = ZERO;
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut den = t[(i, i)] - t[(k, k)];
            if den.norm() < 1e-14 * scale {
                den = C64::new(1e-14 * scale, 0.0);
            }
            y[(i, k)] = -acc / den;
        }
        let nrm = y.column(k).norm();
        y.column_mut(k).unscale_mut(nrm);
    }
    Ok(((0..n).map(|i| t[(i, i)]).collect(), q * y))
}

/// Orthonormal basis for the column span, dropping directions whose residual
/// norm falls below `tol` after two Gram-Schmidt passes.
pub fn orthonormal_span(cols: &CMatrix, tol: f64) -> CMatrix {
    let n = cols.nrows();
    let mut basis: Vec<DVector<C64>> = Vec::new();
    for j in 0..cols.ncols() {
        let mut v: DVector<C64> = cols.column(j).into_owned();
        let scale = v.norm();
        if scale == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let r = v.norm();
        if r > tol * scale.max(1.0) {
            basis.push(v / C64::new(r, 0.0));
        }
    }
    let mut out = CMatrix::zeros(n, basis.len());
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    out
}

/// Real orthogonal matrix whose first column is the unit vector `v`.
pub fn complete_orthonormal(v: &[f64]) -> RMatrix {
    let m = v.len();
    let mut basis: Vec<DVector<f64>> = vec![DVector::from_column_slice(v).normalize()];
    for k in 0..m {
        if basis.len() == m {
            break;
        }
        let mut e = DVector::<f64>::zeros(m);
        e[k] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&e);
                e -= b * c;
            }
        }
        let r = e.norm();
        if r > 1e-8 {
            basis.push(e / r);
        }
    }
    let mut out = RMatrix::zeros(m, m);
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    out
}

/// In-place unnormalized Walsh-Hadamard transform; length must be a power of two.
pub fn fwht(v: &mut [C64]) {
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_phase(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = theta % two_pi;
    if t > std::f64::consts::PI {
        t -= two_pi;
    } else if t <= -std::f64::consts::PI {
        t += two_pi;
    }
    t
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Probability that the phase-estimation register of `2^t = k` levels reads
/// each outcome when the true eigenphase is `theta`.
pub fn qpe_distribution(theta: f64, k: usize) -> Vec<f64> {
    let kf = k as f64;
    (0..k)
        .map(|m| {
            let d = wrap_phase(theta - 2.0 * std::f64::consts::PI * m as f64 / kf);
            if d.abs() < 1e-14 {
                1.0
            } else {
                let num = (kf * d / 2.0).sin();
                let den = kf * (d / 2.0).sin();
                (num / den).powi(2)
            }
        })
        .collect()
}
