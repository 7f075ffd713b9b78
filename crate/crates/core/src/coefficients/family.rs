//! The two parametric coefficient families.
//!
//! With `r = 1 + |x|²` the polynomial family is
//! `q^k_ij = ζ^k_ij r^{α^k_ij}`, `b^k_i = −η^k_i x_i r^{β^k_i}`, `v_hk = θ_hk r^{γ_hk}`;
//! the exponential family replaces each power `r^a` by `exp(r^a)`.

use super::{min_sym_eigenvalue, Coefficients, OperatorSpec, SystemDims};
use crate::logspace::SignedLogSum;
use crate::{Error, Result};

/// Parameters shared by both families, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyParams {
    pub dims: SystemDims,
    /// m×d×d
    zeta: Vec<f64>,
    /// m×d×d
    alpha: Vec<f64>,
    /// m×d
    eta: Vec<f64>,
    /// m×d
    beta: Vec<f64>,
    /// m×m
    theta: Vec<f64>,
    /// m×m
    gamma: Vec<f64>,
}

fn flatten3(name: &str, v: &[Vec<Vec<f64>>], m: usize, d: usize) -> Result<Vec<f64>> {
    if v.len() != m || v.iter().any(|k| k.len() != d || k.iter().any(|row| row.len() != d)) {
        return Err(Error::Dimension(format!("{name} must be {m}×{d}×{d}")));
    }
    Ok(v.iter().flatten().flatten().copied().collect())
}

fn flatten2(name: &str, v: &[Vec<f64>], rows: usize, cols: usize) -> Result<Vec<f64>> {
    if v.len() != rows || v.iter().any(|r| r.len() != cols) {
        return Err(Error::Dimension(format!("{name} must be {rows}×{cols}")));
    }
    Ok(v.iter().flatten().copied().collect())
}

impl FamilyParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: usize,
        m: usize,
        zeta: &[Vec<Vec<f64>>],
        alpha: &[Vec<Vec<f64>>],
        eta: &[Vec<f64>],
        beta: &[Vec<f64>],
        theta: &[Vec<f64>],
        gamma: &[Vec<f64>],
    ) -> Result<Self> {
        let dims = SystemDims::new(d, m)?;
        let p = Self {
            dims,
            zeta: flatten3("zeta", zeta, m, d)?,
            alpha: flatten3("alpha", alpha, m, d)?,
            eta: flatten2("eta", eta, m, d)?,
            beta: flatten2("beta", beta, m, d)?,
            theta: flatten2("theta", theta, m, m)?,
            gamma: flatten2("gamma", gamma, m, m)?,
        };
        let all = [&p.zeta, &p.alpha, &p.eta, &p.beta, &p.theta, &p.gamma];
        if all.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Format("family parameters must be finite".into()));
        }
        Ok(p)
    }

    /// Isotropic parameters: `ζ^k = zeta·I`, all `α`, `η`, `β` equal, and the
    /// given potential matrices.
    pub fn isotropic(
        d: usize,
        zeta: f64,
        alpha: f64,
        eta: f64,
        beta: f64,
        theta: &[Vec<f64>],
        gamma: &[Vec<f64>],
    ) -> Result<Self> {
        let m = theta.len();
        let z: Vec<Vec<Vec<f64>>> = (0..m)
            .map(|_| (0..d).map(|i| (0..d).map(|j| if i == j { zeta } else { 0.0 }).collect()).collect())
            .collect();
        let a = vec![vec![vec![alpha; d]; d]; m];
        Self::new(d, m, &z, &a, &vec![vec![eta; d]; m], &vec![vec![beta; d]; m], theta, gamma)
    }

    pub fn d(&self) -> usize {
        self.dims.d
    }

    pub fn m(&self) -> usize {
        self.dims.m
    }

    pub fn zeta(&self, k: usize, i: usize, j: usize) -> f64 {
        let d = self.dims.d;
        self.zeta[(k * d + i) * d + j]
    }

    pub fn alpha(&self, k: usize, i: usize, j: usize) -> f64 {
        let d = self.dims.d;
        self.alpha[(k * d + i) * d + j]
    }

    pub fn eta(&self, k: usize, i: usize) -> f64 {
        self.eta[k * self.dims.d + i]
    }

    pub fn beta(&self, k: usize, i: usize) -> f64 {
        self.beta[k * self.dims.d + i]
    }

    pub fn theta(&self, h: usize, k: usize) -> f64 {
        self.theta[h * self.dims.m + k]
    }

    pub fn gamma(&self, h: usize, k: usize) -> f64 {
        self.gamma[h * self.dims.m + k]
    }

    fn diag_fold(&self, f: impl Fn(usize) -> f64, min: bool) -> f64 {
        let it = (0..self.dims.d).map(f);
        if min {
            it.fold(f64::INFINITY, f64::min)
        } else {
            it.fold(f64::NEG_INFINITY, f64::max)
        }
    }

    /// `min_i α^k_ii`
    pub fn alpha_min(&self, k: usize) -> f64 {
        self.diag_fold(|i| self.alpha(k, i, i), true)
    }

    /// `max_i α^k_ii`
    pub fn alpha_max(&self, k: usize) -> f64 {
        self.diag_fold(|i| self.alpha(k, i, i), false)
    }

    pub fn beta_min(&self, k: usize) -> f64 {
        self.diag_fold(|i| self.beta(k, i), true)
    }

    pub fn beta_max(&self, k: usize) -> f64 {
        self.diag_fold(|i| self.beta(k, i), false)
    }

    pub fn eta_min(&self, k: usize) -> f64 {
        self.diag_fold(|i| self.eta(k, i), true)
    }

    pub fn eta_max(&self, k: usize) -> f64 {
        self.diag_fold(|i| self.eta(k, i), false)
    }

    /// `max_i ζ^k_ii`
    pub fn zeta_max(&self, k: usize) -> f64 {
        self.diag_fold(|i| self.zeta(k, i, i), false)
    }

    /// `ᾱ = max_k α^k_max`
    pub fn alpha_bar(&self) -> f64 {
        (0..self.dims.m).map(|k| self.alpha_max(k)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `β̄ = max_k β^k_max`
    pub fn beta_bar(&self) -> f64 {
        (0..self.dims.m).map(|k| self.beta_max(k)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_k γ_kk`
    pub fn gamma_max(&self) -> f64 {
        (0..self.dims.m).map(|k| self.gamma(k, k)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min_k γ_kk`
    pub fn gamma_min(&self) -> f64 {
        (0..self.dims.m).map(|k| self.gamma(k, k)).fold(f64::INFINITY, f64::min)
    }

    /// `Z^k` with `z_ii = ζ_ii` and `z_ij = −|ζ_ij|`, row-major.
    pub fn z_matrix(&self, k: usize) -> Vec<f64> {
        let d = self.dims.d;
        let mut z = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let v = self.zeta(k, i, j);
                z[i * d + j] = if i == j { v } else { -v.abs() };
            }
        }
        z
    }

    /// Smallest eigenvalue `λ_{Z^k}` of `Z^k`.
    ///
    /// Ellipticity then holds with `η_k(x) ≥ λ_{Z^k}(1+|x|²)^{α^k_min}` for the
    /// polynomial family and `λ_{Z^k} e^{(1+|x|²)^{α^k_min}}` for the exponential one.
    pub fn min_ellipticity(&self, k: usize) -> Result<f64> {
        if k >= self.dims.m {
            return Err(Error::Dimension(format!("component {k} out of range")));
        }
        let lam = min_sym_eigenvalue(&self.z_matrix(k), self.dims.d);
        if lam > 0.0 {
            Ok(lam)
        } else {
            Err(Error::Hypothesis(format!("Z^{} is not positive definite (smallest eigenvalue {lam})", k + 1)))
        }
    }
}

fn r_of(x: &[f64]) -> f64 {
    1.0 + x.iter().map(|v| v * v).sum::<f64>()
}

/// `q = ζ r^α`, `b_i = −η_i x_i r^{β_i}`, `v = θ r^γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFamily {
    pub params: FamilyParams,
}

/// `q = ζ e^{r^α}`, `b_i = −η_i x_i e^{r^{β_i}}`, `v = θ e^{r^γ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFamily {
    pub params: FamilyParams,
}

impl Coefficients for PolynomialFamily {
    fn dims(&self) -> SystemDims {
        self.params.dims
    }

    fn diffusion(&self, h: usize, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let d = p.d();
        let r = r_of(x);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = p.zeta(h, i, j) * r.powf(p.alpha(h, i, j));
            }
        }
    }

    fn diffusion_derivs(&self, h: usize, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let d = p.d();
        let r = r_of(x);
        for i in 0..d {
            for j in 0..d {
                let a = p.alpha(h, i, j);
                out[i * d + j] = if a == 0.0 { 0.0 } else { p.zeta(h, i, j) * a * r.powf(a - 1.0) * 2.0 * x[i] };
            }
        }
    }

    fn drift(&self, h: usize, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let r = r_of(x);
        for i in 0..p.d() {
            out[i] = -p.eta(h, i) * x[i] * r.powf(p.beta(h, i));
        }
    }

    fn drift_div(&self, h: usize, x: &[f64]) -> f64 {
        let p = &self.params;
        let r = r_of(x);
        (0..p.d())
            .map(|i| {
                let be = p.beta(h, i);
                -p.eta(h, i) * (r.powf(be) + 2.0 * be * x[i] * x[i] * r.powf(be - 1.0))
            })
            .sum()
    }

    fn potential(&self, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let m = p.m();
        let r = r_of(x);
        for h in 0..m {
            for k in 0..m {
                out[h * m + k] = p.theta(h, k) * r.powf(p.gamma(h, k));
            }
        }
    }

    fn coupling_nonzero(&self, h: usize, k: usize) -> bool {
        self.params.theta(h, k) != 0.0
    }
}

impl ExponentialFamily {
    fn cooperative_sum(&self, x: &[f64], fixed: usize, rows: bool) -> f64 {
        let p = &self.params;
        let r = r_of(x);
        let mut s = SignedLogSum::new();
        for j in 0..p.m() {
            let (h, k) = if rows { (fixed, j) } else { (j, fixed) };
            let th = p.theta(h, k);
            if th == 0.0 {
                continue;
            }
            let sign = if h == k { th.signum() } else { -1.0 };
            s.push_log(sign, th.abs().ln() + r.powf(p.gamma(h, k)));
        }
        s.value()
    }
}

impl Coefficients for ExponentialFamily {
    fn dims(&self) -> SystemDims {
        self.params.dims
    }

    fn diffusion(&self, h: usize, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let d = p.d();
        let r = r_of(x);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = p.zeta(h, i, j) * r.powf(p.alpha(h, i, j)).exp();
            }
        }
    }

    fn diffusion_derivs(&self, h: usize, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let d = p.d();
        let r = r_of(x);
        for i in 0..d {
            for j in 0..d {
                let a = p.alpha(h, i, j);
                out[i * d + j] =
                    if a == 0.0 { 0.0 } else { p.zeta(h, i, j) * r.powf(a).exp() * a * r.powf(a - 1.0) * 2.0 * x[i] };
            }
        }
    }

    fn drift(&self, h: usize, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let r = r_of(x);
        for i in 0..p.d() {
            out[i] = -p.eta(h, i) * x[i] * r.powf(p.beta(h, i)).exp();
        }
    }

    fn drift_div(&self, h: usize, x: &[f64]) -> f64 {
        let p = &self.params;
        let r = r_of(x);
        (0..p.d())
            .map(|i| {
                let be = p.beta(h, i);
                -p.eta(h, i) * r.powf(be).exp() * (1.0 + 2.0 * be * x[i] * x[i] * r.powf(be - 1.0))
            })
            .sum()
    }

    fn potential(&self, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let m = p.m();
        let r = r_of(x);
        for h in 0..m {
            for k in 0..m {
                out[h * m + k] = p.theta(h, k) * r.powf(p.gamma(h, k)).exp();
            }
        }
    }

    fn coupling_nonzero(&self, h: usize, k: usize) -> bool {
        self.params.theta(h, k) != 0.0
    }

    fn potential_p_row_sum(&self, h: usize, x: &[f64]) -> f64 {
        self.cooperative_sum(x, h, true)
    }

    fn potential_p_col_sum(&self, k: usize, x: &[f64]) -> f64 {
        self.cooperative_sum(x, k, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Polynomial,
    Exponential,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Polynomial => "polynomial",
            FamilyKind::Exponential => "exponential",
        }
    }
}

/// Either family, behind one type.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Polynomial(PolynomialFamily),
    Exponential(ExponentialFamily),
}

impl Family {
    pub fn polynomial(params: FamilyParams) -> Self {
        Family::Polynomial(PolynomialFamily { params })
    }

    pub fn exponential(params: FamilyParams) -> Self {
        Family::Exponential(ExponentialFamily { params })
    }

    pub fn params(&self) -> &FamilyParams {
        match self {
            Family::Polynomial(f) => &f.params,
            Family::Exponential(f) => &f.params,
        }
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::Polynomial(_) => FamilyKind::Polynomial,
            Family::Exponential(_) => FamilyKind::Exponential,
        }
    }

    pub fn dims(&self) -> SystemDims {
        self.params().dims
    }

    pub fn operator(&self) -> OperatorSpec {
        match self {
            Family::Polynomial(f) => OperatorSpec::new(f.clone()),
            Family::Exponential(f) => OperatorSpec::new(f.clone()),
        }
    }

    /// Growth profile `g(a, r)` of the family: `r^a` or `e^{r^a}`.
    pub fn profile(&self, a: f64, r: f64) -> f64 {
        match self {
            Family::Polynomial(_) => r.powf(a),
            Family::Exponential(_) => r.powf(a).exp(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{FieldJet, Variant};

    fn example() -> FamilyParams {
        FamilyParams::isotropic(
            1,
            1.0,
            0.0,
            1.0,
            1.0,
            &[vec![1.0, 0.5], vec![0.5, 1.0]],
            &[vec![2.0, 1.0], vec![1.0, 2.0]],
        )
        .unwrap()
    }

    #[test]
    fn ellipticity_examples() {
        let two_d = |z: [f64; 4]| {
            FamilyParams::new(
                2,
                1,
                &[vec![vec![z[0], z[1]], vec![z[2], z[3]]]],
                &[vec![vec![0.0; 2]; 2]],
                &[vec![1.0; 2]],
                &[vec![0.0; 2]],
                &[vec![1.0]],
                &[vec![0.0]],
            )
            .unwrap()
        };
        assert!((two_d([2.0, -1.0, -1.0, 2.0]).min_ellipticity(0).unwrap() - 1.0).abs() < 1e-12);
        assert!((two_d([1.0, 0.0, 0.0, 1.0]).min_ellipticity(0).unwrap() - 1.0).abs() < 1e-12);
        let expected = (5.0 - 13f64.sqrt()) / 2.0;
        assert!((two_d([4.0, -1.0, -1.0, 1.0]).min_ellipticity(0).unwrap() - expected).abs() < 1e-12);
        // ζ_12 = +1 enters Z with a minus sign
        assert!((two_d([4.0, 1.0, 1.0, 1.0]).min_ellipticity(0).unwrap() - expected).abs() < 1e-12);
        assert!(matches!(two_d([1.0, 2.0, 2.0, 1.0]).min_ellipticity(0), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn aggregates() {
        let p = example();
        assert_eq!(p.alpha_bar(), 0.0);
        assert_eq!(p.beta_bar(), 1.0);
        assert_eq!(p.gamma_max(), 2.0);
        assert_eq!(p.gamma_min(), 2.0);
        assert_eq!(p.eta_min(1), 1.0);
        assert_eq!(p.zeta_max(0), 1.0);
    }

    fn fd_check(f: &dyn Coefficients, x: &[f64]) {
        let d = f.dims().d;
        let m = f.dims().m;
        let eps = 1e-6;
        for h in 0..m {
            let mut r = vec![0.0; d * d];
            f.diffusion_derivs(h, x, &mut r);
            for i in 0..d {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += eps;
                xm[i] -= eps;
                let mut qp = vec![0.0; d * d];
                let mut qm = vec![0.0; d * d];
                f.diffusion(h, &xp, &mut qp);
                f.diffusion(h, &xm, &mut qm);
                for j in 0..d {
                    let fd = (qp[i * d + j] - qm[i * d + j]) / (2.0 * eps);
                    assert!((fd - r[i * d + j]).abs() < 1e-5 * (1.0 + fd.abs()), "R[{i}][{j}]");
                }
            }
            let mut div = 0.0;
            for i in 0..d {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += eps;
                xm[i] -= eps;
                let mut bp = vec![0.0; d];
                let mut bm = vec![0.0; d];
                f.drift(h, &xp, &mut bp);
                f.drift(h, &xm, &mut bm);
                div += (bp[i] - bm[i]) / (2.0 * eps);
            }
            let exact = f.drift_div(h, x);
            assert!((div - exact).abs() < 1e-5 * (1.0 + exact.abs()), "div b");
        }
    }

    fn anisotropic() -> FamilyParams {
        FamilyParams::new(
            2,
            2,
            &[vec![vec![2.0, 0.3], vec![0.3, 1.5]], vec![vec![1.0, -0.2], vec![-0.2, 1.0]]],
            &[vec![vec![0.8, 0.2], vec![0.2, 0.6]], vec![vec![0.5, 0.1], vec![0.1, 0.7]]],
            &[vec![1.0, 2.0], vec![0.5, 1.5]],
            &[vec![0.4, 0.9], vec![0.3, 0.2]],
            &[vec![1.0, -0.5], vec![0.25, 2.0]],
            &[vec![2.0, 1.0], vec![0.5, 1.5]],
        )
        .unwrap()
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let p = anisotropic();
        for x in [[0.3, -0.7], [1.1, 0.4], [-0.2, 0.0]] {
            fd_check(&PolynomialFamily { params: p.clone() }, &x);
            fd_check(&ExponentialFamily { params: p.clone() }, &x);
        }
    }

    #[test]
    fn polynomial_ellipticity_floor_holds() {
        let p = anisotropic();
        let f = PolynomialFamily { params: p.clone() };
        for k in 0..2 {
            let lam = p.min_ellipticity(k).unwrap();
            for x in [[0.0, 0.0], [1.0, 2.0], [-3.0, 0.5], [5.0, -5.0]] {
                let mut q = [0.0; 4];
                f.diffusion(k, &x, &mut q);
                let ev = min_sym_eigenvalue(&q, 2);
                let floor = lam * r_of(&x).powf(p.alpha_min(k));
                assert!(ev >= floor - 1e-9 * floor.abs(), "k={k} x={x:?}: {ev} < {floor}");
            }
        }
    }

    #[test]
    fn exponential_row_sums_survive_overflow() {
        let p = FamilyParams::isotropic(
            1,
            1.0,
            0.0,
            1.0,
            0.0,
            &[vec![1.0, 0.5], vec![0.5, 1.0]],
            &[vec![1.0, 0.5], vec![0.5, 1.0]],
        )
        .unwrap();
        let f = ExponentialFamily { params: p };
        let small = f.potential_p_row_sum(0, &[1.0]);
        let direct = 2f64.exp() - 0.5 * 2f64.sqrt().exp();
        assert!((small - direct).abs() < 1e-12);
        assert_eq!(f.potential_p_row_sum(0, &[40.0]), f64::INFINITY);
        assert_eq!(f.potential_p_col_sum(1, &[40.0]), f64::INFINITY);
    }

    #[test]
    fn family_operator_matches_hand_computation() {
        // polynomial example at x=1: q=1, b=−2x·... check 𝓐^P applied to (1,1)
        let fam = Family::polynomial(example());
        let spec = fam.operator();
        let u = FieldJet::broadcast(spec.dims(), 1.0, &[0.0], &[0.0]);
        let x = 1.0;
        let r = 1.0 + x * x;
        let got = spec.eval_operator(Variant::P, &u, 0, &[x]).unwrap();
        assert!((got - (-(r * r) + 0.5 * r)).abs() < 1e-12);
    }
}
