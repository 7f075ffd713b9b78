//! Coefficients given as closures; derivatives by central differences.

use std::fmt;

use super::{Coefficients, SystemDims};

type MatFn = dyn Fn(usize, &[f64], &mut [f64]) + Send + Sync;
type PotFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// User-supplied coefficients. `D_i q_ij` and `div b` use central differences
/// with step `cbrt(ε_mach)·(1+|x|)`.
pub struct FnCoefficients {
    dims: SystemDims,
    q: Box<MatFn>,
    b: Box<MatFn>,
    v: Box<PotFn>,
    nonzero: Vec<bool>,
}

impl fmt::Debug for FnCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnCoefficients")
            .field("dims", &self.dims)
            .field("nonzero", &self.nonzero)
            .finish_non_exhaustive()
    }
}

impl FnCoefficients {
    /// `nonzero` is the m×m row-major pattern of entries of V that may be
    /// nonzero; it cannot be inferred by sampling.
    pub fn new(
        dims: SystemDims,
        q: impl Fn(usize, &[f64], &mut [f64]) + Send + Sync + 'static,
        b: impl Fn(usize, &[f64], &mut [f64]) + Send + Sync + 'static,
        v: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        nonzero: Vec<bool>,
    ) -> Self {
        assert_eq!(nonzero.len(), dims.m * dims.m, "nonzero pattern must be m×m");
        Self { dims, q: Box::new(q), b: Box::new(b), v: Box::new(v), nonzero }
    }

    fn step(x: &[f64]) -> f64 {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        f64::EPSILON.cbrt() * (1.0 + norm)
    }
}

impl Coefficients for FnCoefficients {
    fn dims(&self) -> SystemDims {
        self.dims
    }

    fn diffusion(&self, h: usize, x: &[f64], out: &mut [f64]) {
        (self.q)(h, x, out)
    }

    fn diffusion_derivs(&self, h: usize, x: &[f64], out: &mut [f64]) {
        let d = self.dims.d;
        let step = Self::step(x);
        let mut qp = vec![0.0; d * d];
        let mut qm = vec![0.0; d * d];
        let mut xs = x.to_vec();
        for i in 0..d {
            xs[i] = x[i] + step;
            (self.q)(h, &xs, &mut qp);
            xs[i] = x[i] - step;
            (self.q)(h, &xs, &mut qm);
            xs[i] = x[i];
            for j in 0..d {
                out[i * d + j] = (qp[i * d + j] - qm[i * d + j]) / (2.0 * step);
            }
        }
    }

    fn drift(&self, h: usize, x: &[f64], out: &mut [f64]) {
        (self.b)(h, x, out)
    }

    fn drift_div(&self, h: usize, x: &[f64]) -> f64 {
        let d = self.dims.d;
        let step = Self::step(x);
        let mut bp = vec![0.0; d];
        let mut bm = vec![0.0; d];
        let mut xs = x.to_vec();
        let mut div = 0.0;
        for i in 0..d {
            xs[i] = x[i] + step;
            (self.b)(h, &xs, &mut bp);
            xs[i] = x[i] - step;
            (self.b)(h, &xs, &mut bm);
            xs[i] = x[i];
            div += (bp[i] - bm[i]) / (2.0 * step);
        }
        div
    }

    fn potential(&self, x: &[f64], out: &mut [f64]) {
        (self.v)(x, out)
    }

    fn coupling_nonzero(&self, h: usize, k: usize) -> bool {
        self.nonzero[h * self.dims.m + k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_difference_derivatives() {
        let dims = SystemDims::new(2, 1).unwrap();
        let c = FnCoefficients::new(
            dims,
            |_, x: &[f64], q: &mut [f64]| {
                q[0] = 1.0 + x[0] * x[0];
                q[1] = 0.1 * x[1];
                q[2] = 0.1 * x[1];
                q[3] = 2.0 + x[0].sin();
            },
            |_, x: &[f64], b: &mut [f64]| {
                b[0] = -x[0] * x[0] * x[0];
                b[1] = x[0] * x[1];
            },
            |_, v: &mut [f64]| v[0] = 1.0,
            vec![false],
        );
        let x = [0.7, -1.2];
        let mut r = [0.0; 4];
        c.diffusion_derivs(0, &x, &mut r);
        let exact = [2.0 * x[0], 0.0, 0.1, 0.0];
        for (a, b) in r.iter().zip(exact) {
            assert!((a - b).abs() < 1e-8);
        }
        let div = c.drift_div(0, &x);
        assert!((div - (-3.0 * x[0] * x[0] + x[0])).abs() < 1e-8);
    }
}
