//! Closed-form kernels and integrals used as independent references.

use nalgebra::DMatrix;

use crate::solver::{mollifier, KernelField};
use crate::{Error, Result};

/// Heat kernel of `Δ` on `ℝ^d`: `(4πt)^{−d/2} e^{−|x−y|²/(4t)}`.
pub fn heat_kernel(t: f64, x: &[f64], y: &[f64]) -> f64 {
    let d = x.len() as f64;
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (4.0 * std::f64::consts::PI * t).powf(-d / 2.0) * (-r2 / (4.0 * t)).exp()
}

/// Mehler kernel of `u'' − x u'`: the density of `N(x e^{−t}, 1 − e^{−2t})` at `y`.
pub fn mehler_kernel(t: f64, x: f64, y: f64) -> f64 {
    let var = 1.0 - (-2.0 * t).exp();
    let mean = x * (-t).exp();
    (2.0 * std::f64::consts::PI * var).powf(-0.5) * (-(y - mean) * (y - mean) / (2.0 * var)).exp()
}

/// `e^{−tV}` for a constant potential.
pub fn potential_propagator(v: &[Vec<f64>], t: f64) -> Result<DMatrix<f64>> {
    let m = v.len();
    if v.iter().any(|r| r.len() != m) {
        return Err(Error::Dimension(format!("potential must be {m}×{m}")));
    }
    let mat = DMatrix::from_fn(m, m, |i, j| -t * v[i][j]);
    Ok(mat.exp())
}

/// `∫ e^{εt(1+y²)} (4πt)^{−1/2} e^{−(x−y)²/(4t)} dy` in closed form; finite iff `4εt² < 1`.
pub fn heat_weight_integral(eps: f64, t: f64, x: f64) -> Result<f64> {
    let q = 1.0 - 4.0 * eps * t * t;
    if !(q > 0.0) {
        return Err(Error::Domain(format!("Gaussian integral diverges: 4εt² = {} ≥ 1", 1.0 - q)));
    }
    Ok((eps * t + eps * t * x * x / q).exp() / q.sqrt())
}

/// Relative discrete L¹ distance between a kernel field and
/// `ref_h(z) = Σ_s μ(s) oracle(z, s, h) h^d`, where `μ` is the field's
/// mollifier at its source and `z` is the free variable.
pub fn oracle_l1_error(kf: &KernelField, oracle: impl Fn(&[f64], &[f64], usize) -> f64) -> Result<f64> {
    let grid = kf.grid();
    let moll = mollifier(grid, kf.source_node, kf.mollifier_width)?;
    let support: Vec<(Vec<f64>, f64)> = moll
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(p, w)| (grid.coords(p), *w * grid.cell_volume()))
        .collect();
    let (mut num, mut den) = (0.0, 0.0);
    for p in 0..grid.num_nodes() {
        let z = grid.coords(p);
        for h in 0..kf.m() {
            let r: f64 = support.iter().map(|(s, w)| w * oracle(&z, s, h)).sum();
            num += (kf.get(p, h) - r).abs();
            den += r.abs();
        }
    }
    if !(den > 0.0) {
        return Err(Error::Precondition("oracle vanishes on the grid".into()));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    #[test]
    fn kernels_have_unit_mass() {
        let m = integrate(|y| heat_kernel(0.3, &[0.2], &[y]), -20.0, 20.0, 1e-12).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
        let m = integrate(|y| mehler_kernel(0.5, 1.0, y), -20.0, 20.0, 1e-12).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mehler_small_time_is_heat() {
        let (a, b) = (mehler_kernel(1e-4, 0.0, 0.01), heat_kernel(1e-4, &[0.0], &[0.01]));
        assert!((a / b - 1.0).abs() < 1e-3);
    }

    #[test]
    fn weight_integral_matches_quadrature() {
        let (eps, t, x) = (0.25, 0.5, 1.5);
        let q =
            integrate(|y| (eps * t * (1.0 + y * y)).exp() * heat_kernel(t, &[x], &[y]), -40.0, 40.0, 1e-12).unwrap();
        assert!((heat_weight_integral(eps, t, x).unwrap() / q - 1.0).abs() < 1e-9);
        assert!(heat_weight_integral(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn matrix_exponential_of_diagonal() {
        let e = potential_propagator(&[vec![1.0, 0.0], vec![0.0, 2.0]], 0.5).unwrap();
        assert!((e[(0, 0)] - (-0.5f64).exp()).abs() < 1e-14);
        assert!((e[(1, 1)] - (-1.0f64).exp()).abs() < 1e-14);
        assert_eq!(e[(0, 1)], 0.0);
    }
}
