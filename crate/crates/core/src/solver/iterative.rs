//! ILU(0)-preconditioned BiCGSTAB.

use super::sparse::CsrMatrix;
use crate::{Error, Result};

/// Incomplete LU with the sparsity pattern of the matrix itself.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for p in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.cols[p] == i {
                    diag[i] = p;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::Precondition(format!("ILU(0): row {i} has no diagonal")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in start..end {
                pos[lu.cols[p]] = p;
            }
            for p in start..end {
                let k = lu.cols[p];
                if k >= i {
                    break;
                }
                let pivot = lu.vals[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::Precondition(format!("ILU(0): zero pivot at row {k}")));
                }
                let l = lu.vals[p] / pivot;
                lu.vals[p] = l;
                for q in diag[k] + 1..lu.row_ptr[k + 1] {
                    let j = lu.cols[q];
                    let t = pos[j];
                    if t != usize::MAX {
                        lu.vals[t] -= l * lu.vals[q];
                    }
                }
            }
            for p in start..end {
                pos[lu.cols[p]] = usize::MAX;
            }
        }
        Ok(Self { lu, diag })
    }

    /// `z = (LU)^{-1} r`
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.lu.n;
        for i in 0..n {
            let mut s = r[i];
            for p in self.lu.row_ptr[i]..self.diag[i] {
                s -= self.lu.vals[p] * z[self.lu.cols[p]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for p in self.diag[i] + 1..self.lu.row_ptr[i + 1] {
                s -= self.lu.vals[p] * z[self.lu.cols[p]];
            }
            z[i] = s / self.lu.vals[self.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Normwise backward error `‖b − Ax‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞)`.
pub fn backward_error(a: &CsrMatrix, a_norm: f64, x: &[f64], b: &[f64], scratch: &mut [f64]) -> f64 {
    a.matvec(x, scratch);
    let r = scratch.iter().zip(b).fold(0.0f64, |m, (ax, bi)| m.max((bi - ax).abs()));
    let denom = a_norm * norm_inf(x) + norm_inf(b);
    if denom == 0.0 {
        0.0
    } else {
        r / denom
    }
}

/// Solves `Ax = b` starting from the content of `x`.
pub fn bicgstab(
    a: &CsrMatrix,
    a_norm: f64,
    pre: &Ilu0,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = a.n;
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let b_norm = norm_inf(b);
    let done = |x: &[f64], r: &[f64]| norm_inf(r) <= tol * (a_norm * norm_inf(x) + b_norm);
    if done(x, &r) {
        return Ok(0);
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut y);
        a.matvec(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            break;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
            x[i] += alpha * y[i];
        }
        if done(x, &s) {
            return Ok(it);
        }
        pre.apply(&s, &mut z);
        a.matvec(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt == 0.0 { 0.0 } else { dot(&t, &s) / tt };
        for i in 0..n {
            x[i] += omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if done(x, &r) {
            return Ok(it);
        }
    }
    let mut scratch = vec![0.0; n];
    let res = backward_error(a, a_norm, x, b, &mut scratch);
    if res <= tol {
        Ok(max_iter)
    } else {
        Err(Error::NonConvergence { iterations: max_iter, residual: res })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace2d(n: usize, shift: f64, skew: f64) -> CsrMatrix {
        let mut t = Vec::new();
        let id = |i: usize, j: usize| i * n + j;
        for i in 0..n {
            for j in 0..n {
                t.push((id(i, j), id(i, j), 4.0 + shift));
                if i > 0 {
                    t.push((id(i, j), id(i - 1, j), -1.0 - skew));
                }
                if i + 1 < n {
                    t.push((id(i, j), id(i + 1, j), -1.0 + skew));
                }
                if j > 0 {
                    t.push((id(i, j), id(i, j - 1), -1.0));
                }
                if j + 1 < n {
                    t.push((id(i, j), id(i, j + 1), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(n * n, t)
    }

    #[test]
    fn nonsymmetric_system() {
        let a = laplace2d(20, 0.1, 0.3);
        let x_true: Vec<f64> = (0..400).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let mut b = vec![0.0; 400];
        a.matvec(&x_true, &mut b);
        let pre = Ilu0::new(&a).unwrap();
        let mut x = vec![0.0; 400];
        let its = bicgstab(&a, a.norm_inf(), &pre, &b, &mut x, 1e-12, 500).unwrap();
        assert!(its < 200);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        let n = 10;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.5));
            }
        }
        let a = CsrMatrix::from_triplets(n, t);
        let pre = Ilu0::new(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut z = vec![0.0; n];
        pre.apply(&b, &mut z);
        let mut az = vec![0.0; n];
        a.matvec(&z, &mut az);
        for (u, v) in az.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
