//! Lyapunov functions `φ` and time-dependent Lyapunov functions `ν`:
//! evaluation in log-space, parameter synthesis for both families and grid
//! certification.

mod certify;
mod synth;

pub use certify::{
    certify_nu, certify_phi, verify_certificate, CertificatePlan, CertificateReport, NuCertificate, PhiCertificate,
};
pub use synth::{synth, synth_exp, synth_poly, SynthOverrides};

use std::fmt;

use crate::coefficients::{FieldJet, OperatorSpec, Variant};
use crate::logspace::LogValue;
use crate::quadrature;
use crate::{Error, Result};

/// Operator a certificate is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    P,
    PAdjoint,
}

impl Target {
    pub fn variant(self) -> Variant {
        match self {
            Target::P => Variant::P,
            Target::PAdjoint => Variant::PAdjoint,
        }
    }

    pub fn name(self) -> &'static str {
        self.variant().name()
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Radial profile `S(r)`, `r = 1+|x|²`, of the exponent of `φ = exp(ε̂ S)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LyapunovForm {
    /// `S(r) = r^ρ`
    PolyExp,
    /// `S(r) = ∫₀^r e^{τ^ρ/2} dτ`
    IteratedExp,
}

impl LyapunovForm {
    pub fn name(self) -> &'static str {
        match self {
            LyapunovForm::PolyExp => "poly-exp",
            LyapunovForm::IteratedExp => "iterated-exp",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "poly-exp" => Some(LyapunovForm::PolyExp),
            "iterated-exp" => Some(LyapunovForm::IteratedExp),
            _ => None,
        }
    }
}

/// Relative tolerance of the iterated-exp inner integral.
pub const SHAPE_QUAD_TOL: f64 = 1e-10;

/// `S`, `S'`, `S''` at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeJet {
    pub s: f64,
    pub ds: f64,
    pub d2s: f64,
}

/// The profile `S` with its exponent `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub form: LyapunovForm,
    pub rho: f64,
}

impl Shape {
    pub fn new(form: LyapunovForm, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Precondition(format!("ρ must be positive, got {rho}")));
        }
        Ok(Self { form, rho })
    }

    /// `ln S(r)`
    pub fn ln_value(&self, r: f64) -> Result<f64> {
        match self.form {
            LyapunovForm::PolyExp => Ok(self.rho * r.ln()),
            LyapunovForm::IteratedExp => {
                // S = e^{r^ρ/2} ∫₀^r e^{(τ^ρ − r^ρ)/2} dτ
                let top = r.powf(self.rho);
                let j = quadrature::integrate(|tau| ((tau.powf(self.rho) - top) / 2.0).exp(), 0.0, r, SHAPE_QUAD_TOL)?;
                Ok(top / 2.0 + j.ln())
            }
        }
    }

    pub fn jet(&self, r: f64) -> Result<ShapeJet> {
        let rho = self.rho;
        let s = LogValue(self.ln_value(r)?).exp()?;
        let (ds, d2s) = match self.form {
            LyapunovForm::PolyExp => (rho * r.powf(rho - 1.0), rho * (rho - 1.0) * r.powf(rho - 2.0)),
            LyapunovForm::IteratedExp => {
                let e = (r.powf(rho) / 2.0).exp();
                (e, e * 0.5 * rho * r.powf(rho - 1.0))
            }
        };
        Ok(ShapeJet { s, ds, d2s })
    }
}

pub(crate) fn r_of(x: &[f64]) -> f64 {
    1.0 + x.iter().map(|v| v * v).sum::<f64>()
}

/// `exp(coef · t^σ · S(1+|x|²))`; with `σ = 0` it is time independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpWeight {
    pub shape: Shape,
    pub sigma: f64,
    pub coef: f64,
}

/// Log of a weight with its derivatives: `l`, `∇l`, `D²l` (row-major), `∂_t l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub dt: f64,
}

impl ExpWeight {
    fn time_factor(&self, t: f64) -> f64 {
        if self.sigma == 0.0 {
            1.0
        } else {
            t.powf(self.sigma)
        }
    }

    pub fn ln_value(&self, t: f64, x: &[f64]) -> Result<f64> {
        let c = self.coef * self.time_factor(t);
        if c == 0.0 {
            return Ok(0.0);
        }
        Ok(c * LogValue(self.shape.ln_value(r_of(x))?).exp()?)
    }

    /// Log-jet at `(t, x)` from a precomputed shape jet at `r = 1+|x|²`.
    pub fn log_jet(&self, t: f64, x: &[f64], sj: &ShapeJet) -> LogJet {
        let d = x.len();
        let c = self.coef * self.time_factor(t);
        let grad = x.iter().map(|xi| c * sj.ds * 2.0 * xi).collect();
        let mut hess = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                hess[i * d + j] = c * sj.d2s * 4.0 * x[i] * x[j] + if i == j { c * sj.ds * 2.0 } else { 0.0 };
            }
        }
        let dt =
            if self.sigma == 0.0 || t <= 0.0 { 0.0 } else { self.coef * self.sigma * t.powf(self.sigma - 1.0) * sj.s };
        LogJet { value: c * sj.s, grad, hess, dt }
    }
}

/// `(𝓐 e^l)_h / e^l` for the given variant, with `e^l` in every component.
pub fn operator_quotient(op: &OperatorSpec, variant: Variant, h: usize, x: &[f64], lj: &LogJet) -> Result<f64> {
    let d = x.len();
    let mut hess = lj.hess.clone();
    for i in 0..d {
        for j in 0..d {
            hess[i * d + j] += lj.grad[i] * lj.grad[j];
        }
    }
    let jet = FieldJet::broadcast(op.dims(), 1.0, &lj.grad, &hess);
    op.eval_operator(variant, &jet, h, x)
}

/// `φ(x) = exp(ε̂ S(1+|x|²))` with certificate bound `𝓐φ ≤ λφ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSpec {
    pub form: LyapunovForm,
    pub rho: f64,
    pub eps_hat: f64,
    /// 0 until certified
    pub lambda: f64,
    pub target: Target,
    /// how each parameter was chosen
    pub provenance: Vec<(String, String)>,
}

impl LyapunovSpec {
    pub fn shape(&self) -> Shape {
        Shape { form: self.form, rho: self.rho }
    }

    pub fn weight(&self) -> ExpWeight {
        ExpWeight { shape: self.shape(), sigma: 0.0, coef: self.eps_hat }
    }

    pub fn ln_phi(&self, x: &[f64]) -> Result<f64> {
        self.weight().ln_value(0.0, x)
    }
}

/// `ν(t, x) = exp(ε_T t^σ S(1+|x|²))` with `g(t) = c̃₀ + ε_T δ t^p`, `p = σ(δ−1)/δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeLyapunovSpec {
    pub base: LyapunovSpec,
    pub horizon: f64,
    pub sigma: f64,
    pub delta: f64,
    pub eps_t: f64,
    /// calibrated additive constant of `g`; 0 until certified
    pub c0: f64,
}

impl TimeLyapunovSpec {
    /// `p = σ(δ−1)/δ`
    pub fn p(&self) -> f64 {
        self.sigma * (self.delta - 1.0) / self.delta
    }

    pub fn g(&self, t: f64) -> f64 {
        self.c0 + self.eps_t * self.delta * t.powf(self.p())
    }

    pub fn weight(&self) -> ExpWeight {
        ExpWeight { shape: self.base.shape(), sigma: self.sigma, coef: self.eps_t }
    }

    /// The same construction with a smaller coefficient `ε ≤ ε_T` and `c̃₀` reset.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= self.eps_t * (1.0 + 1e-12)) {
            return Err(Error::Precondition(format!("coefficient {eps} must lie in (0, ε_T = {}]", self.eps_t)));
        }
        Ok(Self { eps_t: eps, c0: 0.0, ..self.clone() })
    }

    pub fn ln_nu(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check_time(t)?;
        self.weight().ln_value(t, x)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.horizon * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("t = {t} outside [0, T = {}]", self.horizon)));
        }
        Ok(())
    }
}

/// `φ(x)`; fails with the log-value when it is not representable.
pub fn eval_lyapunov(spec: &LyapunovSpec, x: &[f64]) -> Result<f64> {
    LogValue(spec.ln_phi(x)?).exp()
}

/// `ν(t, x)`
pub fn eval_nu(spec: &TimeLyapunovSpec, t: f64, x: &[f64]) -> Result<f64> {
    LogValue(spec.ln_nu(t, x)?).exp()
}

/// `G(t) = ∫₀ᵗ g = c̃₀ t + ε_T δ t^{p+1}/(p+1)`.
#[allow(non_snake_case)]
pub fn eval_G(spec: &TimeLyapunovSpec, t: f64) -> Result<f64> {
    spec.check_time(t)?;
    let p = spec.p();
    if !(p > -1.0) {
        return Err(Error::Precondition(format!("g is not integrable: p = {p} ≤ −1")));
    }
    Ok(spec.c0 * t + spec.eps_t * spec.delta * t.powf(p + 1.0) / (p + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(form: LyapunovForm, rho: f64, eps_hat: f64) -> LyapunovSpec {
        LyapunovSpec { form, rho, eps_hat, lambda: 0.0, target: Target::P, provenance: vec![] }
    }

    fn time_spec(c0: f64, eps_t: f64, sigma: f64, delta: f64) -> TimeLyapunovSpec {
        TimeLyapunovSpec { base: spec(LyapunovForm::PolyExp, 1.0, eps_t), horizon: 1.0, sigma, delta, eps_t, c0 }
    }

    #[test]
    fn phi_examples() {
        let s = spec(LyapunovForm::PolyExp, 1.0, 1.0);
        assert!((eval_lyapunov(&s, &[0.0]).unwrap() - std::f64::consts::E).abs() < 1e-14);
        let s = spec(LyapunovForm::IteratedExp, 1.0, 1.0);
        let want = (2.0 * (0.5f64.exp() - 1.0)).exp();
        assert!((eval_lyapunov(&s, &[0.0]).unwrap() - want).abs() < 1e-9 * want);
    }

    #[test]
    fn nu_is_one_at_time_zero() {
        let ts = time_spec(0.0, 0.5, 2.0, 5.0 / 6.0);
        for x in [0.0, 3.0, 40.0] {
            assert_eq!(eval_nu(&ts, 0.0, &[x]).unwrap(), 1.0);
        }
        assert!(eval_nu(&ts, 1.5, &[0.0]).is_err());
    }

    #[test]
    fn saturation_carries_log_value() {
        let s = spec(LyapunovForm::PolyExp, 1.0, 1.0);
        match eval_lyapunov(&s, &[30.0]) {
            Err(Error::Saturation { log_value }) => assert!((log_value - 901.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn g_primitive() {
        assert_eq!(eval_G(&time_spec(1.0, 2.0, 1.0, 0.75), 0.0).unwrap(), 0.0);
        let g = eval_G(&time_spec(1.0, 2.0, 1.0, 0.75), 1.0).unwrap();
        assert!((g - 3.25).abs() < 1e-14);
        let g = eval_G(&time_spec(0.0, 1.0, 1.0, 1.0), 0.7).unwrap();
        assert!((g - 0.7).abs() < 1e-15);
        let ts = time_spec(0.3, 0.5, 2.0, 5.0 / 6.0);
        let q = quadrature::integrate(|t| ts.g(t), 0.0, 1.0, 1e-12).unwrap();
        assert!((q - eval_G(&ts, 1.0).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn shape_derivatives_match_differences() {
        for form in [LyapunovForm::PolyExp, LyapunovForm::IteratedExp] {
            let sh = Shape::new(form, 0.7).unwrap();
            let r = 3.3;
            let e = 1e-4;
            let j = sh.jet(r).unwrap();
            let jp = sh.jet(r + e).unwrap();
            let jm = sh.jet(r - e).unwrap();
            assert!(((jp.s - jm.s) / (2.0 * e) - j.ds).abs() < 1e-6 * j.ds.abs().max(1.0));
            assert!(((jp.ds - jm.ds) / (2.0 * e) - j.d2s).abs() < 1e-6 * j.d2s.abs().max(1.0));
        }
    }

    #[test]
    fn quotient_of_constant_weight_is_minus_row_sum() {
        use crate::coefficients::{Family, FamilyParams};
        let p = FamilyParams::isotropic(
            1,
            1.0,
            0.0,
            1.0,
            1.0,
            &[vec![1.0, 0.5], vec![0.5, 1.0]],
            &[vec![2.0, 1.0], vec![1.0, 2.0]],
        )
        .unwrap();
        let op = Family::polynomial(p).operator();
        let w = ExpWeight { shape: Shape::new(LyapunovForm::PolyExp, 1.0).unwrap(), sigma: 1.0, coef: 1.0 };
        let x = [0.7];
        let sj = w.shape.jet(r_of(&x)).unwrap();
        let lj = w.log_jet(0.0, &x, &sj);
        let q = operator_quotient(&op, Variant::P, 0, &x, &lj).unwrap();
        let r: f64 = 1.49;
        assert!((q - -(r * r - 0.5 * r)).abs() < 1e-12);
    }
}
