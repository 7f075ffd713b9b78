use super::{LyapunovForm, LyapunovSpec, Target, TimeLyapunovSpec};
use crate::coefficients::{Family, FamilyParams};
use crate::hypotheses::{check_exponential, check_polynomial, MarginGroup};
use crate::{Error, Result};

/// Equality in a feasibility constraint is detected up to this slack.
const EQ_TOL: f64 = 1e-12;
/// `ε̂` cap when no constraint applies.
const EPS_CAP: f64 = 1.0;

/// User-fixed parameters; each is validated against the synthesis constraints.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SynthOverrides {
    pub rho: Option<f64>,
    pub eps_hat: Option<f64>,
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
}

fn fail(constraint: impl Into<String>, k: Option<usize>) -> Error {
    Error::Synthesis { constraint: constraint.into(), k }
}

/// Synthesizes `(φ, ν)` for the family and target.
pub fn synth(
    family: &Family,
    horizon: f64,
    target: Target,
    ov: &SynthOverrides,
) -> Result<(LyapunovSpec, TimeLyapunovSpec)> {
    match family {
        Family::Polynomial(f) => synth_poly(&f.params, horizon, target, ov),
        Family::Exponential(f) => synth_exp(&f.params, horizon, target, ov),
    }
}

fn require_groups(report: &crate::hypotheses::HypothesisReport, target: Target) -> Result<()> {
    let groups: &[MarginGroup] = match target {
        Target::P => &[MarginGroup::Structure, MarginGroup::Forward],
        Target::PAdjoint => &[MarginGroup::Structure, MarginGroup::Adjoint],
    };
    if let Some(m) = report.margins.iter().find(|m| groups.contains(&m.group) && !m.holds()) {
        return Err(fail(format!("hypothesis {} fails (slack {})", m.id, m.slack), m.k));
    }
    Ok(())
}

/// Picks a value in `(lo, hi)` (or validates an override); `hi_closed` admits `hi`.
fn pick(name: &str, lo: f64, hi: f64, hi_closed: bool, ov: Option<f64>, k: Option<usize>) -> Result<(f64, String)> {
    let ok = |v: f64| v > lo && (v < hi || (hi_closed && v <= hi));
    let interval = format!("({lo}, {hi}{}", if hi_closed { "]" } else { ")" });
    if let Some(v) = ov {
        return if ok(v) {
            Ok((v, format!("override inside {interval}")))
        } else {
            Err(fail(format!("{name} = {v} outside the feasible interval {interval}"), k))
        };
    }
    if !(hi > lo) {
        return Err(fail(format!("{name}: empty feasible interval {interval}"), k));
    }
    let v = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo.max(0.0) + if lo > 0.0 { 0.0 } else { 1.0 } };
    let how =
        if hi.is_finite() { format!("midpoint of {interval}") } else { format!("twice the lower end of {interval}") };
    Ok((v, how))
}

/// `δ ∈ (σ/(σ+1), σ)` with `ρσ/(σ−δ) < f` for every `f` in `floors`.
fn pick_delta(sigma: f64, rho: f64, f_min: f64, ov: Option<f64>) -> Result<(f64, String)> {
    let hi = sigma.min(sigma * (1.0 - rho / f_min));
    pick("δ", sigma / (sigma + 1.0), hi, false, ov, None)
}

fn assemble(
    form: LyapunovForm,
    target: Target,
    horizon: f64,
    rho: (f64, String),
    eps: (f64, String),
    sigma: (f64, String),
    delta: (f64, String),
) -> Result<(LyapunovSpec, TimeLyapunovSpec)> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
    }
    let base = LyapunovSpec {
        form,
        rho: rho.0,
        eps_hat: eps.0,
        lambda: 0.0,
        target,
        provenance: vec![
            ("rho".into(), rho.1),
            ("eps_hat".into(), eps.1),
            ("sigma".into(), sigma.1),
            ("delta".into(), delta.1),
        ],
    };
    let ts = TimeLyapunovSpec {
        eps_t: eps.0 * horizon.powf(-sigma.0),
        base: base.clone(),
        horizon,
        sigma: sigma.0,
        delta: delta.0,
        c0: 0.0,
    };
    Ok((base, ts))
}

/// Largest `ρ` with `max{γ, β+ρ} + 1 ≥ 2ρ + α`.
fn rho_cap_growth(gamma: f64, beta: f64, alpha: f64) -> f64 {
    let r1 = (gamma + 1.0 - alpha) / 2.0;
    if gamma - beta > 0.0 && r1 <= gamma - beta {
        r1
    } else {
        beta + 1.0 - alpha
    }
}

/// Synthesis for the polynomial family (poly-exp form).
pub fn synth_poly(
    p: &FamilyParams,
    horizon: f64,
    target: Target,
    ov: &SynthOverrides,
) -> Result<(LyapunovSpec, TimeLyapunovSpec)> {
    require_groups(&check_polynomial(p), target)?;
    let m = p.m();
    match target {
        Target::P => {
            // ρ: growth balance (closed) and f_k(ρ) = max{γ_kk, β_min+ρ} > ρ (open when β_min = 0)
            let mut hi = f64::INFINITY;
            let mut closed = true;
            let mut arg = None;
            for k in 0..m {
                let (g, b, a) = (p.gamma(k, k), p.beta_min(k), p.alpha_max(k));
                let c = rho_cap_growth(g, b, a);
                if c < hi || (c == hi && !closed) {
                    hi = c;
                    closed = true;
                    arg = Some(k);
                }
                if b == 0.0 && g <= hi {
                    if g < hi || closed {
                        arg = Some(k);
                    }
                    hi = g;
                    closed = false;
                }
            }
            let rho = pick("ρ", 0.0, hi, closed, ov.rho, arg)?;
            let r = rho.0;
            let f = |k: usize| p.gamma(k, k).max(p.beta_min(k) + r);
            for k in 0..m {
                let h = f(k) + 1.0 - 2.0 * r - p.alpha_max(k);
                if h < -EQ_TOL {
                    return Err(fail("ρ violates max{γ_kk, β_min+ρ} + 1 ≥ 2ρ + α_max", Some(k)));
                }
                if f(k) <= r {
                    return Err(fail("ρ violates max{γ_kk, β_min+ρ} > ρ", Some(k)));
                }
            }
            // ε̂ table at equality indices
            let mut cap = f64::INFINITY;
            for k in 0..m {
                let h = f(k) + 1.0 - 2.0 * r - p.alpha_max(k);
                if h.abs() > EQ_TOL {
                    continue;
                }
                let (g, th, z, e) = (p.gamma(k, k), p.theta(k, k), p.zeta_max(k), p.eta_min(k));
                let pivot = 2.0 * p.beta_min(k) + 1.0 - p.alpha_max(k);
                let bound = if g > pivot + EQ_TOL {
                    (th / (4.0 * r * r * z)).sqrt()
                } else if g < pivot - EQ_TOL {
                    e / (2.0 * r * z)
                } else {
                    (e + (e * e + 4.0 * z * th).sqrt()) / (4.0 * r * z)
                };
                cap = cap.min(bound);
            }
            let (cap, closed) = if cap.is_finite() { (cap, false) } else { (EPS_CAP, true) };
            let eps = pick("ε̂", 0.0, cap, closed, ov.eps_hat, None)?;
            // σ: ρ(σ+1)/σ < f_k  ⇔  σ > ρ/(f_k − ρ)
            let f_min = (0..m).map(f).fold(f64::INFINITY, f64::min);
            let lo = (0..m).map(|k| r / (f(k) - r)).fold(0.0, f64::max);
            let sigma = pick("σ", lo, f64::INFINITY, false, ov.sigma, None)?;
            let delta = pick_delta(sigma.0, r, f_min, ov.delta)?;
            assemble(LyapunovForm::PolyExp, target, horizon, rho, eps, sigma, delta)
        }
        Target::PAdjoint => {
            let mut hi = f64::INFINITY;
            let mut arg = None;
            for k in 0..m {
                let g = p.gamma(k, k);
                let c = ((g - p.alpha_max(k) + 1.0) / 2.0).min(g - p.beta_max(k));
                if c < hi {
                    hi = c;
                    arg = Some(k);
                }
            }
            let g_min = p.gamma_min();
            // ρ* < γ_kk is implied when the cap is below γ_min; otherwise it is the binding open bound
            let (hi, closed) = if hi < g_min { (hi, true) } else { (g_min, false) };
            let rho = pick("ρ*", 0.0, hi, closed, ov.rho, arg)?;
            let r = rho.0;
            let mut cap = f64::INFINITY;
            for k in 0..m {
                let g = p.gamma(k, k);
                let need = (p.alpha_max(k) + 2.0 * r - 1.0).max(p.beta_max(k) + r);
                if g < need - EQ_TOL || g <= r {
                    return Err(fail("ρ* violates γ_kk ≥ max{α_max + 2ρ* − 1, β_max + ρ*}, γ_kk > ρ*", Some(k)));
                }
                if (g - need).abs() > EQ_TOL {
                    continue;
                }
                let (th, z, e) = (p.theta(k, k), p.zeta_max(k), p.eta_max(k));
                let pivot = 2.0 * p.beta_max(k) - p.alpha_max(k) + 1.0;
                let bound = if g > pivot + EQ_TOL {
                    (th / (4.0 * r * r * z)).sqrt()
                } else if g < pivot - EQ_TOL {
                    th / (2.0 * r * e)
                } else {
                    (-e + (e * e + 4.0 * z * th).sqrt()) / (4.0 * r * z)
                };
                cap = cap.min(bound);
            }
            let (cap, closed) = if cap.is_finite() { (cap, false) } else { (EPS_CAP, true) };
            let eps = pick("ε̂*", 0.0, cap, closed, ov.eps_hat, None)?;
            let sigma = pick("σ*", r / (g_min - r), f64::INFINITY, false, ov.sigma, None)?;
            let delta = pick_delta(sigma.0, r, g_min, ov.delta)?;
            assemble(LyapunovForm::PolyExp, target, horizon, rho, eps, sigma, delta)
        }
    }
}

/// Synthesis for the exponential family (iterated-exp form).
pub fn synth_exp(
    p: &FamilyParams,
    horizon: f64,
    target: Target,
    ov: &SynthOverrides,
) -> Result<(LyapunovSpec, TimeLyapunovSpec)> {
    require_groups(&check_exponential(p), target)?;
    let m = p.m();
    let (rho, sigma) = match target {
        Target::P => {
            let (mut hi, mut arg) = (f64::INFINITY, None);
            for k in 0..m {
                let c = p.beta_min(k).max(p.gamma(k, k));
                if c < hi {
                    hi = c;
                    arg = Some(k);
                }
            }
            let rho = pick("ρ", 0.0, hi, false, ov.rho, arg)?;
            let sigma = match ov.sigma {
                Some(s) => pick("σ", 0.0, f64::INFINITY, false, Some(s), None)?,
                None => (1.0, "free choice (no constraint on σ for this operator)".to_string()),
            };
            (rho, sigma)
        }
        Target::PAdjoint => {
            let g_min = p.gamma_min();
            let arg = (0..m).find(|&k| p.gamma(k, k) == g_min);
            let rho = pick("ρ*", 0.0, g_min, false, ov.rho, arg)?;
            let sigma = pick("σ*", rho.0 / (g_min - rho.0), f64::INFINITY, false, ov.sigma, None)?;
            (rho, sigma)
        }
    };
    let eps = pick("ε̂", 0.0, EPS_CAP, true, ov.eps_hat, None)?;
    let delta = pick("δ", sigma.0 / (sigma.0 + 1.0), sigma.0, false, ov.delta, None)?;
    assemble(LyapunovForm::IteratedExp, target, horizon, rho, eps, sigma, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(m: usize, alpha: f64, beta: f64, gamma_diag: f64, gamma_off: f64) -> FamilyParams {
        let theta: Vec<Vec<f64>> = (0..m).map(|h| (0..m).map(|k| if h == k { 1.0 } else { 0.5 }).collect()).collect();
        let gamma: Vec<Vec<f64>> =
            (0..m).map(|h| (0..m).map(|k| if h == k { gamma_diag } else { gamma_off }).collect()).collect();
        FamilyParams::isotropic(1, 1.0, alpha, 1.0, beta, &theta, &gamma).unwrap()
    }

    #[test]
    fn example_family_forward() {
        let (phi, nu) = synth_poly(&poly(2, 0.0, 1.0, 2.0, 1.0), 1.0, Target::P, &SynthOverrides::default()).unwrap();
        assert_eq!(phi.rho, 1.0);
        assert_eq!(phi.eps_hat, 0.5);
        assert_eq!(nu.sigma, 2.0);
        assert!((nu.delta - 5.0 / 6.0).abs() < 1e-15);
        assert!((nu.p() + 0.4).abs() < 1e-15);
        assert_eq!(nu.eps_t, 0.5);
    }

    #[test]
    fn example_family_adjoint() {
        let (phi, nu) =
            synth_poly(&poly(2, 0.0, 1.0, 2.0, 1.0), 1.0, Target::PAdjoint, &SynthOverrides::default()).unwrap();
        assert_eq!(phi.rho, 0.5);
        assert!((nu.sigma - 2.0 / 3.0).abs() < 1e-15);
        assert!(nu.delta > nu.sigma / (nu.sigma + 1.0) && nu.delta < nu.sigma);
    }

    #[test]
    fn scalar_examples() {
        let (phi, nu) = synth_poly(&poly(1, 0.0, 1.0, 2.0, 0.0), 1.0, Target::P, &SynthOverrides::default()).unwrap();
        assert_eq!(phi.rho, 1.0);
        assert!(phi.rho * (nu.sigma + 1.0) / nu.sigma < 2.0);
        let (phi, _) = synth_poly(&poly(1, 0.0, 0.0, 0.5, 0.0), 1.0, Target::P, &SynthOverrides::default()).unwrap();
        assert_eq!(phi.rho, 0.25);
        // override outside the interval names the constraint
        let ov = SynthOverrides { rho: Some(0.6), ..Default::default() };
        assert!(matches!(synth_poly(&poly(1, 0.0, 0.0, 0.5, 0.0), 1.0, Target::P, &ov), Err(Error::Synthesis { .. })));
        // growth balance fails: α_max = 3, β = 0, γ = 1
        assert!(matches!(
            synth_poly(&poly(1, 3.0, 0.0, 1.0, 0.0), 1.0, Target::P, &SynthOverrides::default()),
            Err(Error::Synthesis { k: Some(0), .. })
        ));
    }

    #[test]
    fn equality_index_uses_table() {
        let ov = SynthOverrides { rho: Some(2.0), ..Default::default() };
        // equality at ρ=2 with γ below 2β+1−α: cap η_min/(2ρζ_max) = 1/4
        let (phi, _) = synth_poly(&poly(2, 0.0, 1.0, 2.0, 1.0), 1.0, Target::P, &ov).unwrap();
        assert_eq!(phi.eps_hat, 0.125);
    }

    #[test]
    fn exponential_examples() {
        let theta = [vec![1.0, 0.5], vec![0.5, 1.0]];
        let gamma = [vec![1.0, 0.5], vec![0.5, 1.0]];
        let p = FamilyParams::isotropic(1, 1.0, 0.0, 1.0, 0.0, &theta, &gamma).unwrap();
        let (phi, nu) = synth_exp(&p, 1.0, Target::P, &SynthOverrides::default()).unwrap();
        assert_eq!((phi.rho, nu.sigma, nu.delta), (0.5, 1.0, 0.75));
        assert_eq!(phi.form, LyapunovForm::IteratedExp);
        let (phi, nu) = synth_exp(&p, 1.0, Target::PAdjoint, &SynthOverrides::default()).unwrap();
        assert_eq!((phi.rho, nu.sigma), (0.5, 2.0));
        let p2 = FamilyParams::isotropic(1, 1.0, 0.0, 1.0, 2.0, &[vec![1.0]], &[vec![1.0]]).unwrap();
        let (phi, _) = synth_exp(&p2, 1.0, Target::P, &SynthOverrides::default()).unwrap();
        assert_eq!(phi.rho, 1.0);
        let bad = FamilyParams::isotropic(1, 1.0, 1.0, 1.0, 0.5, &[vec![1.0]], &[vec![1.0]]).unwrap();
        assert!(synth_exp(&bad, 1.0, Target::PAdjoint, &SynthOverrides::default()).is_err());
    }

    #[test]
    fn deterministic() {
        let p = poly(2, 0.0, 1.0, 2.0, 1.0);
        let a = synth_poly(&p, 1.0, Target::P, &SynthOverrides::default()).unwrap();
        let b = synth_poly(&p, 1.0, Target::P, &SynthOverrides::default()).unwrap();
        assert_eq!(a, b);
    }
}
