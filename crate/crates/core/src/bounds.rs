//! The kernel-bound machinery: the majorant `𝓗_{a,b}`, the `X ≤ X₀` algebra,
//! the decay exponents `λ` and the final pointwise bound functions.

use std::fmt;

use crate::coefficients::{FamilyKind, FamilyParams};
use crate::hypotheses::AnalyticForm;
use crate::logspace::LogValue;
use crate::lyapunov::{eval_G, r_of, LyapunovForm, Shape, TimeLyapunovSpec};
use crate::quadrature::integrate;
use crate::{Error, Result};

/// Relative tolerance of the time integrals in `𝓗`.
pub const H_QUAD_TOL: f64 = 1e-9;

/// Time window `0 < a₀ < a < b < b₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub a0: f64,
    pub a: f64,
    pub b: f64,
    pub b0: f64,
}

impl Window {
    pub fn new(a0: f64, a: f64, b: f64, b0: f64) -> Result<Self> {
        if !(a0 > 0.0 && a0 < a && a < b && b < b0 && b0.is_finite()) {
            return Err(Error::Precondition(format!(
                "window must satisfy 0 < a₀ < a < b < b₀, got ({a0}, {a}, {b}, {b0})"
            )));
        }
        Ok(Self { a0, a, b, b0 })
    }

    /// `(τ/8, τ/4, τ/2, 3τ/4)`.
    pub fn anchored(tau: f64) -> Result<Self> {
        Self::new(tau / 8.0, tau / 4.0, tau / 2.0, 0.75 * tau)
    }

    /// The anchored window with `τ = 3t`, whose open core `(3t/4, 3t/2)`
    /// contains `t`.
    pub fn around(t: f64) -> Result<Self> {
        Self::anchored(3.0 * t)
    }

    /// `(a − a₀) ∧ (b₀ − b)`
    pub fn gap(&self) -> f64 {
        (self.a - self.a0).min(self.b0 - self.b)
    }

    pub fn contains(&self, t: f64) -> bool {
        t > self.a && t < self.b
    }
}

/// How the window follows the evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowMode {
    Fixed(Window),
    /// [`Window::around`] the evaluation time
    Proportional,
}

impl WindowMode {
    pub fn name(&self) -> &'static str {
        match self {
            WindowMode::Fixed(_) => "fixed",
            WindowMode::Proportional => "t-proportional",
        }
    }

    pub fn window_for(&self, t: f64) -> Result<Window> {
        match self {
            WindowMode::Fixed(w) => {
                if w.contains(t) {
                    Ok(*w)
                } else {
                    Err(Error::Domain(format!("t = {t} outside the window core ({}, {})", w.a, w.b)))
                }
            }
            WindowMode::Proportional => Window::around(t),
        }
    }
}

impl fmt::Display for WindowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Constants of the weighted estimate on one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsLedger {
    pub s: f64,
    pub window: Window,
    pub c: [f64; 8],
    pub c_star: Option<[f64; 8]>,
    pub m: f64,
    pub m_star: Option<f64>,
}

impl ConstantsLedger {
    pub fn new(d: usize, s: f64, window: Window, c: [f64; 8]) -> Result<Self> {
        if !(s > (d + 2) as f64) {
            return Err(Error::Precondition(format!("s = {s} must exceed d + 2 = {}", d + 2)));
        }
        check_constants(&c)?;
        Ok(Self { s, window, c, c_star: None, m: 0.0, m_star: None })
    }

    pub fn with_star(mut self, c_star: [f64; 8]) -> Result<Self> {
        check_constants(&c_star)?;
        self.c_star = Some(c_star);
        Ok(self)
    }

    pub fn with_row_sums(mut self, m: f64, m_star: Option<f64>) -> Self {
        self.m = m;
        self.m_star = m_star;
        self
    }
}

fn check_constants(c: &[f64; 8]) -> Result<()> {
    if let Some(i) = c.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Precondition(format!("c_{} = {} must be finite and nonnegative", i + 1, c[i])));
    }
    Ok(())
}

/// The two brackets of `𝓗`: coefficients of `ν₁(0,x)∫e^{G₁}` and `ν₂(0,x)∫e^{G₂}`.
pub fn h_brackets(s: f64, gap: f64, c: &[f64; 8]) -> (f64, f64) {
    let p = |v: f64, e: f64| v.powf(e);
    let [c1, c2, c3, c4, c5, c6, c7, c8] = *c;
    let b1 = p(c1, s / 2.0)
        + p(c1, s / 2.0) / p(gap, s / 2.0)
        + p(c2, s)
        + p(c3, s / 2.0)
        + p(c4, s / 2.0)
        + p(c1, s / 4.0) * p(c2, s / 2.0)
        + p(c1, s / 4.0) * p(c7, s / 2.0)
        + p(c7, s)
        + p(c8, s / 2.0);
    let b2 = p(c1, s / 4.0) * p(c6, s / 2.0) + p(c2, s / 2.0) * p(c6, s / 2.0) + p(c5, s / 2.0) + p(c6, s);
    (b1, b2)
}

/// `∫_{a₀}^{b₀} e^{G(t)} dt`
pub fn exp_integral(g: impl Fn(f64) -> f64, a0: f64, b0: f64) -> Result<f64> {
    let v = integrate(|t| g(t).exp(), a0, b0, H_QUAD_TOL)?;
    if !v.is_finite() {
        return Err(Error::Quadrature(format!("∫ e^G over [{a0}, {b0}] is not finite")));
    }
    Ok(v)
}

/// `𝓗_{a,b}(x)` from the constants `c` (plain or starred), the values
/// `ν₁(0,x)`, `ν₂(0,x)` and the primitives `G₁`, `G₂`.
#[allow(non_snake_case)]
pub fn eval_H(
    ledger: &ConstantsLedger,
    c: &[f64; 8],
    nu1_at_0: f64,
    nu2_at_0: f64,
    G1: impl Fn(f64) -> f64,
    G2: impl Fn(f64) -> f64,
) -> Result<f64> {
    let w = ledger.window;
    let (b1, b2) = h_brackets(ledger.s, w.gap(), c);
    let i1 = exp_integral(G1, w.a0, w.b0)?;
    let i2 = if b2 == 0.0 { 0.0 } else { exp_integral(G2, w.a0, w.b0)? };
    let h = b1 * nu1_at_0 * i1 + b2 * nu2_at_0 * i2;
    if !h.is_finite() {
        return Err(Error::Quadrature(format!("𝓗 is not finite ({h})")));
    }
    Ok(h)
}

/// Upper bound for every `X ≥ 0` with `X^s ≤ αX^{s/2} + βX^{s−1} + γX^{s−2}`:
/// `X₀ = (4/3)β + √((4/3)γ) + ((4/3)α²)^{1/s}`.
#[allow(non_snake_case)]
pub fn solve_X0(alpha: f64, beta: f64, gamma: f64, s: f64) -> f64 {
    4.0 / 3.0 * beta + (4.0 / 3.0 * gamma).sqrt() + (4.0 / 3.0 * alpha * alpha).powf(1.0 / s)
}

/// `λ` of the polynomial family from `ᾱ`, `β̄`, `γ_max` and the synthesized `(σ, ρ)`.
pub fn lambda_poly(alpha_bar: f64, beta_bar: f64, gamma_max: f64, sigma: f64, rho: f64) -> f64 {
    let k = sigma / (2.0 * rho);
    let mut l = 0.5f64.max(sigma / rho * alpha_bar).max(k * gamma_max).max(k * (2.0 * beta_bar + 1.0));
    if alpha_bar > 0.5 {
        l = l.max(k * (alpha_bar + beta_bar));
    }
    l
}

pub fn eval_lambda_poly(p: &FamilyParams, sigma: f64, rho: f64) -> f64 {
    lambda_poly(p.alpha_bar(), p.beta_bar(), p.gamma_max(), sigma, rho)
}

/// Default `ĉ = (d+3)/4`, inside the admissible range `ĉ > (d+2)/4`.
pub fn default_c_hat(d: usize) -> f64 {
    (d as f64 + 3.0) / 4.0
}

/// One side of a bound: `exp(−ε t^σ S(1+|y|²))` and, for the polynomial
/// family, the power `t^{−λs}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayProfile {
    pub form: LyapunovForm,
    pub eps: f64,
    pub sigma: f64,
    pub rho: f64,
    pub lambda: f64,
}

impl DecayProfile {
    fn ln_decay(&self, t: f64, z: &[f64]) -> Result<f64> {
        let shape = Shape::new(self.form, self.rho)?;
        Ok(self.eps * t.powf(self.sigma) * LogValue(shape.ln_value(r_of(z))?).exp()?)
    }
}

/// Evaluable pointwise bounds on `|p_hk(t,x,y)|` with full provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCertificate {
    pub kind: FamilyKind,
    pub d: usize,
    pub s: f64,
    pub forward: DecayProfile,
    pub adjoint: Option<DecayProfile>,
    /// exponential family only
    pub c_hat: f64,
    pub c_cal: f64,
    pub window_mode: WindowMode,
    pub ledger: Option<ConstantsLedger>,
    pub provenance: Vec<(String, String)>,
}

impl BoundCertificate {
    fn check_t(&self, t: f64) -> Result<()> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("bound needs t > 0, got {t}")));
        }
        Ok(())
    }

    fn adjoint_profile(&self) -> Result<DecayProfile> {
        self.adjoint.ok_or_else(|| Error::Precondition("two-sided bound needs the adjoint profile".into()))
    }
}

/// `ln` of the polynomial-family bound.
pub fn ln_bound_poly(cert: &BoundCertificate, t: f64, x: &[f64], y: &[f64], two_sided: bool) -> Result<f64> {
    cert.check_t(t)?;
    if cert.kind != FamilyKind::Polynomial {
        return Err(Error::Precondition("certificate is not for the polynomial family".into()));
    }
    if !(cert.c_cal > 0.0) {
        return Err(Error::Precondition("calibrated constant must be positive".into()));
    }
    let f = cert.forward;
    let lc = cert.c_cal.ln();
    if !two_sided {
        return Ok(lc + (1.0 - f.lambda * cert.s) * t.ln() - f.ln_decay(t, y)?);
    }
    let a = cert.adjoint_profile()?;
    let half = |p: DecayProfile| DecayProfile { eps: p.eps / 2.0, ..p };
    Ok(lc + (1.0 - (f.lambda + a.lambda) * cert.s / 2.0) * t.ln() - half(f).ln_decay(t, y)? - half(a).ln_decay(t, x)?)
}

/// `C t^{1−λs} e^{−εt^σ(1+|y|²)^ρ}`, or the two-sided form.
pub fn eval_bound_poly(cert: &BoundCertificate, t: f64, x: &[f64], y: &[f64], two_sided: bool) -> Result<f64> {
    LogValue(ln_bound_poly(cert, t, x, y, two_sided)?).exp()
}

/// `ln` of the exponential-family bound.
pub fn ln_bound_exp(cert: &BoundCertificate, t: f64, x: &[f64], y: &[f64], two_sided: bool) -> Result<f64> {
    cert.check_t(t)?;
    if cert.kind != FamilyKind::Exponential {
        return Err(Error::Precondition("certificate is not for the exponential family".into()));
    }
    let floor = (cert.d as f64 + 2.0) / 4.0;
    if !(cert.c_hat > floor) {
        return Err(Error::Precondition(format!("ĉ = {} must exceed (d+2)/4 = {floor}", cert.c_hat)));
    }
    if !(cert.c_cal > 0.0) {
        return Err(Error::Precondition("calibrated constant must be positive".into()));
    }
    let f = cert.forward;
    let base = cert.c_cal.ln() + t.ln() + cert.c_hat * t.powf(-f.sigma);
    if !two_sided {
        return Ok(base - f.ln_decay(t, y)?);
    }
    let half = DecayProfile { eps: f.eps / 2.0, ..f };
    Ok(base - half.ln_decay(t, y)? - half.ln_decay(t, x)?)
}

/// `C t exp(ĉ t^{−σ} − ε t^σ ∫₀^{1+|y|²} e^{τ^ρ/2} dτ)`, or the two-sided form.
pub fn eval_bound_exp(cert: &BoundCertificate, t: f64, x: &[f64], y: &[f64], two_sided: bool) -> Result<f64> {
    LogValue(ln_bound_exp(cert, t, x, y, two_sided)?).exp()
}

/// Dispatches on the certificate's family.
pub fn ln_bound(cert: &BoundCertificate, t: f64, x: &[f64], y: &[f64], two_sided: bool) -> Result<f64> {
    match cert.kind {
        FamilyKind::Polynomial => ln_bound_poly(cert, t, x, y, two_sided),
        FamilyKind::Exponential => ln_bound_exp(cert, t, x, y, two_sided),
    }
}

/// `𝓗` as a function of the evaluation time: constants `c̃_i · max env_i`
/// over the active window, `ν₁ = ν(ε₁)`, `ν₂ = ν(ε₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Majorant {
    pub s: f64,
    pub c_tilde: [f64; 8],
    pub analytic: AnalyticForm,
    pub nu1: TimeLyapunovSpec,
    pub nu2: TimeLyapunovSpec,
    pub mode: WindowMode,
}

impl Majorant {
    pub fn ledger_at(&self, d: usize, t: f64) -> Result<ConstantsLedger> {
        let w = self.mode.window_for(t)?;
        ConstantsLedger::new(d, self.s, w, self.analytic.constants(&self.c_tilde, w.a0, w.b0))
    }

    /// `𝓗_{a,b}(x)` for the window active at `t`.
    pub fn eval(&self, d: usize, t: f64, x: &[f64]) -> Result<f64> {
        let ledger = self.ledger_at(d, t)?;
        let w = ledger.window;
        for nu in [&self.nu1, &self.nu2] {
            if w.b0 > nu.horizon * (1.0 + 1e-12) {
                return Err(Error::Domain(format!("window end b₀ = {} exceeds the horizon T = {}", w.b0, nu.horizon)));
            }
        }
        let n1 = LogValue(self.nu1.ln_nu(0.0, x)?).exp()?;
        let n2 = LogValue(self.nu2.ln_nu(0.0, x)?).exp()?;
        let g1 = |s: f64| eval_G(&self.nu1, s).unwrap_or(f64::NAN);
        let g2 = |s: f64| eval_G(&self.nu2, s).unwrap_or(f64::NAN);
        eval_H(&ledger, &ledger.c, n1, n2, g1, g2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_hand_example() {
        let w = Window::new(1.0, 2.0, 3.0, 4.0).unwrap();
        let mut c = [0.0; 8];
        c[0] = 1.0;
        let l = ConstantsLedger::new(1, 4.0, w, c).unwrap();
        let h = eval_H(&l, &l.c, 1.0, 1.0, |_| 0.0, |_| 0.0).unwrap();
        assert!((h - 6.0).abs() < 1e-12);
        let h2 = eval_H(&l, &l.c, 2.0, 1.0, |_| 0.0, |_| 0.0).unwrap();
        assert!((h2 - 12.0).abs() < 1e-12);
    }

    #[test]
    fn windows() {
        assert!(Window::new(1.0, 1.0, 3.0, 4.0).is_err());
        let w = Window::around(1.0).unwrap();
        assert!(w.contains(1.0));
        assert_eq!((w.a0, w.a, w.b, w.b0), (0.375, 0.75, 1.5, 2.25));
        assert!(WindowMode::Fixed(w).window_for(2.0).is_err());
    }

    #[test]
    fn x0_examples() {
        assert_eq!(solve_X0(0.0, 0.0, 0.0, 4.0), 0.0);
        let a = 0.75f64.sqrt();
        assert!((solve_X0(a, 0.75, 0.75, 4.0) - 3.0).abs() < 1e-12);
        let x0 = solve_X0(1.0, 0.0, 0.0, 4.0);
        assert!((x0 - (4.0f64 / 3.0).powf(0.25)).abs() < 1e-15 && x0 > 1.0);
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_poly(0.5, 0.0, 2.0, 1.0, 2.0), 0.5);
        assert_eq!(lambda_poly(1.0, 1.0, 2.0, 1.0, 1.0), 1.5);
        assert_eq!(lambda_poly(0.0, 0.0, 0.0, 1.0, 1.0), 0.5);
    }

    fn poly_cert() -> BoundCertificate {
        let prof = DecayProfile { form: LyapunovForm::PolyExp, eps: 1.0, sigma: 1.0, rho: 1.0, lambda: 0.5 };
        BoundCertificate {
            kind: FamilyKind::Polynomial,
            d: 1,
            s: 4.0,
            forward: prof,
            adjoint: Some(prof),
            c_hat: default_c_hat(1),
            c_cal: 1.0,
            window_mode: WindowMode::Proportional,
            ledger: None,
            provenance: vec![],
        }
    }

    #[test]
    fn poly_bound_examples() {
        let c = poly_cert();
        let v = eval_bound_poly(&c, 1.0, &[0.0], &[1.0], false).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        assert!(eval_bound_poly(&c, 0.0, &[0.0], &[0.0], false).is_err());
        // slope in log t is 1 − λs at y = 0 up to the −εt term
        let f = |t: f64| ln_bound_poly(&c, t, &[0.0], &[0.0], false).unwrap() + t;
        let slope = (f(0.2) - f(0.1)) / (0.2f64.ln() - 0.1f64.ln());
        assert!((slope - (1.0 - 0.5 * 4.0)).abs() < 1e-10);
        // two-sided symmetric under x ↔ y with identical profiles
        let a = eval_bound_poly(&c, 0.5, &[0.3], &[1.2], true).unwrap();
        let b = eval_bound_poly(&c, 0.5, &[1.2], &[0.3], true).unwrap();
        assert!((a - b).abs() <= 1e-15 * a);
    }

    #[test]
    fn exp_bound_examples() {
        let mut c = poly_cert();
        c.kind = FamilyKind::Exponential;
        c.forward.form = LyapunovForm::IteratedExp;
        let inner = 2.0 * (0.5f64.exp() - 1.0);
        let v = ln_bound_exp(&c, 0.5, &[0.0], &[0.0], false).unwrap();
        assert!((v - (0.5f64.ln() + 1.0 / 0.5 - 0.5 * inner)).abs() < 1e-9);
        assert!(
            ln_bound_exp(&c, 1e-3, &[0.0], &[0.0], false).unwrap()
                > ln_bound_exp(&c, 1e-2, &[0.0], &[0.0], false).unwrap()
        );
        c.c_hat = 0.75;
        assert!(matches!(ln_bound_exp(&c, 0.5, &[0.0], &[0.0], false), Err(Error::Precondition(_))));
    }
}
