//! Banded LU factorization with partial pivoting.

use super::sparse::CsrMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// row i holds columns i−kl ..= i+ku+kl (extra kl for pivot fill-in)
    width: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn factor(m: &CsrMatrix) -> Result<Self> {
        let n = m.n;
        let (kl, ku) = m.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut lu = Self { n, kl, ku, width, a: vec![0.0; n * width], piv: vec![0; n] };
        for i in 0..n {
            for (j, v) in m.row(i) {
                let p = lu.idx(i, j);
                lu.a[p] = v;
            }
        }
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for j in 0..n {
            let last_row = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.a[self.idx(j, j)].abs();
            for i in j + 1..=last_row {
                let v = self.a[self.idx(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::NonConvergence { iterations: j, residual: f64::INFINITY });
            }
            self.piv[j] = p;
            let last_col = (j + ku + kl).min(n - 1);
            if p != j {
                for c in j..=last_col {
                    let (x, y) = (self.idx(j, c), self.idx(p, c));
                    self.a.swap(x, y);
                }
            }
            let pivot = self.a[self.idx(j, j)];
            for i in j + 1..=last_row {
                let lij = self.idx(i, j);
                let l = self.a[lij] / pivot;
                self.a[lij] = l;
                if l != 0.0 {
                    for c in j + 1..=last_col {
                        let u = self.a[self.idx(j, c)];
                        let t = self.idx(i, c);
                        self.a[t] -= l * u;
                    }
                }
            }
        }
        Ok(())
    }

    /// Solves in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                for i in j + 1..=(j + kl).min(n - 1) {
                    b[i] -= self.a[self.idx(i, j)] * bj;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for c in i + 1..=(i + ku + kl).min(n - 1) {
                s -= self.a[self.idx(i, c)] * b[c];
            }
            b[i] = s / self.a[self.idx(i, i)];
        }
    }
}
