//! The weighted kernel bound `w(t,y) Σ_k |p_hk(t,x,y)| ≤ C 𝓗_{a,b}(x)`, its
//! two-sided form and the decay shape of the kernel tail.
//!
//! `y ↦ p_hk(t,x,y)` is read off the adjoint column with source `(x, h)`,
//! since the discrete adjoint is the transpose of the cooperative operator.

use super::{fingerprint_of, node_of, sorted_times, CheckResult, Location, Sample, SolveSettings, Source};
use crate::bounds::{default_c_hat, eval_lambda_poly, BoundCertificate, DecayProfile, Majorant, WindowMode};
use crate::coefficients::{Family, FamilyKind, OperatorSpec, Variant};
use crate::hypotheses::{estimate_ledger, AnalyticForm, LedgerEstimate, LedgerSetup, SamplePlan};
use crate::lyapunov::{
    certify_nu, synth, CertificatePlan, ExpWeight, LyapunovSpec, SynthOverrides, Target, TimeLyapunovSpec,
};
use crate::solver::{assemble, kernel_columns, GridSpec, KernelField, Propagator};
use crate::{Error, Result};

/// How the majorants are built.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedConfig {
    pub horizon: f64,
    pub s: f64,
    pub mode: WindowMode,
    pub overrides: SynthOverrides,
    /// time range `[a₀, b₀]` over which `c̃` is estimated
    pub ledger_window: (f64, f64),
    pub ledger_plan: SamplePlan,
    pub cert_plan: CertificatePlan,
    pub two_sided: bool,
}

impl WeightedConfig {
    pub fn new(d: usize, horizon: f64, s: f64) -> Self {
        Self {
            horizon,
            s,
            mode: WindowMode::Proportional,
            overrides: SynthOverrides::default(),
            ledger_window: (horizon / 64.0, horizon),
            ledger_plan: SamplePlan::default_for(d),
            cert_plan: CertificatePlan::new(8.0),
            two_sided: true,
        }
    }
}

/// One side of the estimate: weight `w = ν(ε_T/4)`, majorant built from
/// `ν₁ = ν(ε_T/2)` and `ν₂ = ν(ε_T)`, each with its own calibrated `c̃₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct Side {
    pub phi: LyapunovSpec,
    pub nu: TimeLyapunovSpec,
    pub w: ExpWeight,
    pub majorant: Majorant,
    pub ledger: LedgerEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSetup {
    pub kind: FamilyKind,
    pub d: usize,
    pub lambda: f64,
    pub forward: Side,
    pub adjoint: Option<Side>,
}

impl WeightedSetup {
    /// The same setup with every `c̃_i` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        for side in std::iter::once(&mut s.forward).chain(s.adjoint.as_mut()) {
            for c in &mut side.majorant.c_tilde {
                *c *= factor;
            }
        }
        s
    }

    /// Certificate with the explicit decay profiles and the calibrated constant.
    pub fn certificate(&self, c_cal: f64) -> BoundCertificate {
        let profile = |side: &Side| DecayProfile {
            form: side.phi.form,
            eps: side.w.coef,
            sigma: side.w.sigma,
            rho: side.w.shape.rho,
            lambda: self.lambda,
        };
        let mut provenance = vec![
            ("w".to_string(), "ν with coefficient ε_T/4".to_string()),
            ("nu1".to_string(), "ν with coefficient ε_T/2".to_string()),
            ("nu2".to_string(), "ν with coefficient ε_T".to_string()),
            ("c_cal".to_string(), "max weighted ratio on the training grid".to_string()),
        ];
        provenance.extend(self.forward.phi.provenance.iter().cloned());
        BoundCertificate {
            kind: self.kind,
            d: self.d,
            s: self.forward.majorant.s,
            forward: profile(&self.forward),
            adjoint: self.adjoint.as_ref().map(profile),
            c_hat: default_c_hat(self.d),
            c_cal,
            window_mode: self.forward.majorant.mode,
            ledger: None,
            provenance,
        }
    }
}

fn build_side(family: &Family, op: &OperatorSpec, cfg: &WeightedConfig, target: Target) -> Result<Side> {
    let (phi, nu) = synth(family, cfg.horizon, target, &cfg.overrides)?;
    let eps = nu.eps_t;
    let calibrated = |e: f64| -> Result<TimeLyapunovSpec> {
        let mut n = nu.with_eps(e)?;
        let cert = certify_nu(op, &n, &cfg.cert_plan)?;
        if !cert.pass {
            return Err(Error::Certificate(format!(
                "ν with coefficient {e} fails on held-out points (excess {:.3e})",
                cert.holdout_max_excess
            )));
        }
        n.c0 = cert.c0;
        Ok(n)
    };
    let nu1 = calibrated(eps / 2.0)?;
    let nu2 = calibrated(eps)?;
    let w = nu.with_eps(eps / 4.0)?.weight();
    let analytic = AnalyticForm::for_family(family, nu.sigma, nu.base.rho);
    let setup = LedgerSetup {
        w,
        nu1: nu1.weight(),
        nu2: nu2.weight(),
        adjoint: target == Target::PAdjoint,
        analytic: Some(analytic),
    };
    let ledger = estimate_ledger(op, &setup, cfg.s, cfg.ledger_window, &cfg.ledger_plan)?;
    let c_tilde = ledger.c_tilde().ok_or_else(|| Error::Precondition("ledger has no closed-form envelopes".into()))?;
    Ok(Side { phi, nu, w, majorant: Majorant { s: cfg.s, c_tilde, analytic, nu1, nu2, mode: cfg.mode }, ledger })
}

/// Synthesis, `c̃₀` calibration and ledger estimation for both sides.
pub fn prepare_weighted(family: &Family, cfg: &WeightedConfig) -> Result<WeightedSetup> {
    let op = family.operator();
    let forward = build_side(family, &op, cfg, Target::P)?;
    let adjoint = if cfg.two_sided { Some(build_side(family, &op, cfg, Target::PAdjoint)?) } else { None };
    let lambda = match family.kind() {
        FamilyKind::Polynomial => eval_lambda_poly(family.params(), forward.nu.sigma, forward.nu.base.rho),
        FamilyKind::Exponential => 0.0,
    };
    Ok(WeightedSetup { kind: family.kind(), d: family.dims().d, lambda, forward, adjoint })
}

/// Sample plan: evaluation times, points `x`, and an optional bound on `|y|_∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPlan {
    pub times: Vec<f64>,
    pub xs: Vec<Vec<f64>>,
    pub y_radius: Option<f64>,
}

impl WeightedPlan {
    /// Times `T/20 … 2T/5` (8 values) and `x ∈ {0, ±1, ±2}` (d = 1) or the
    /// analogous points on the diagonal.
    pub fn default_for(d: usize, horizon: f64) -> Self {
        let times = (1..=8).map(|i| horizon * 0.05 * i as f64).collect();
        let xs = [0.0, 1.0, -1.0, 2.0, -2.0].iter().map(|&c| vec![c; d]).collect();
        Self { times, xs, y_radius: None }
    }
}

/// Supremum of the one-sided (and two-sided) ratio, with per-sample maxima.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSup {
    pub one_sided: f64,
    pub two_sided: Option<f64>,
    /// per `(t, x, h)`: one-sided sample, two-sided sample
    pub samples: Vec<(Sample, Option<Sample>)>,
}

fn adjoint_fields(
    op: &OperatorSpec,
    grid: &GridSpec,
    times: &[f64],
    xs: &[Vec<f64>],
    settings: &SolveSettings,
) -> Result<Vec<Vec<KernelField>>> {
    let m = op.dims().m;
    let dop = assemble(op, Variant::PAdjoint, grid)?;
    let prop = Propagator::new(&dop, settings.theta, settings.dt_for(times, grid.mesh), times)?;
    let sources = xs
        .iter()
        .flat_map(|x| (0..m).map(move |h| Source::new(x.clone(), h)))
        .map(|s| Ok((node_of(grid, &s.y)?, s.k)))
        .collect::<Result<Vec<_>>>()?;
    kernel_columns(&prop, &sources, settings.width(grid), settings.exec)
}

/// Evaluates the ratios over the plan on one grid.
pub fn weighted_sup(
    op: &OperatorSpec,
    setup: &WeightedSetup,
    grid: &GridSpec,
    plan: &WeightedPlan,
    settings: &SolveSettings,
) -> Result<WeightedSup> {
    let times = sorted_times(&plan.times)?;
    let (d, m) = (op.dims().d, op.dims().m);
    let fields = adjoint_fields(op, grid, &times, &plan.xs, settings)?;
    let y_lim = plan.y_radius.unwrap_or(grid.radius);
    let ys: Vec<usize> = (0..grid.num_nodes()).filter(|&p| grid.coords(p).iter().all(|c| c.abs() <= y_lim)).collect();
    let fwd = &setup.forward;
    let mut samples = Vec::new();
    let (mut sup1, mut sup2) = (0.0f64, None::<f64>);
    for (ti, &t) in times.iter().enumerate() {
        // 𝓗 and 𝓗* depend on the point only through ν(0,·) ≡ 1
        let ln_h = fwd.majorant.eval(d, t, &vec![0.0; d])?.ln();
        let ln_hs = match &setup.adjoint {
            Some(a) => Some(a.majorant.eval(d, t, &vec![0.0; d])?.ln()),
            None => None,
        };
        for (xi, x) in plan.xs.iter().enumerate() {
            let ln_ws_x = match &setup.adjoint {
                Some(a) => Some(a.w.ln_value(t, x)?),
                None => None,
            };
            for h in 0..m {
                let kf = &fields[xi * m + h][ti];
                let mut best1 = (f64::NEG_INFINITY, 0usize, 0.0);
                let mut best2 = (f64::NEG_INFINITY, 0usize, 0.0);
                for &p in &ys {
                    let mass: f64 = (0..m).map(|k| kf.get(p, k).abs()).sum();
                    if mass == 0.0 {
                        continue;
                    }
                    let y = grid.coords(p);
                    let ln_w = fwd.w.ln_value(t, &y)?;
                    let r1 = (ln_w + mass.ln() - ln_h).exp();
                    if r1 > best1.0 {
                        best1 = (r1, p, mass);
                    }
                    if let (Some(lhs), Some(lwx)) = (ln_hs, ln_ws_x) {
                        let r2 = (0.5 * (ln_w + lwx) + mass.ln() - 0.5 * (ln_h + lhs)).exp();
                        if r2 > best2.0 {
                            best2 = (r2, p, mass);
                        }
                    }
                }
                let loc = |p: usize| Location {
                    t: Some(t),
                    x: Some(x.clone()),
                    y: Some(grid.coords(p)),
                    h: Some(h),
                    k: None,
                };
                sup1 = sup1.max(best1.0);
                let s1 = Sample { location: loc(best1.1), value: best1.0, reference: best1.2, violation: best1.0 };
                let s2 = ln_hs.map(|_| {
                    sup2 = Some(sup2.unwrap_or(0.0).max(best2.0));
                    Sample { location: loc(best2.1), value: best2.0, reference: best2.2, violation: best2.0 }
                });
                samples.push((s1, s2));
            }
        }
    }
    if !sup1.is_finite() || sup2.is_some_and(|v| !v.is_finite()) {
        return Err(Error::Saturation { log_value: f64::INFINITY });
    }
    Ok(WeightedSup { one_sided: sup1, two_sided: sup2, samples })
}

/// `C_cal` (one- and two-sided) as the sup over the training grid.
pub fn calibrate_weighted_bound(
    op: &OperatorSpec,
    setup: &WeightedSetup,
    grid: &GridSpec,
    plan: &WeightedPlan,
    settings: &SolveSettings,
) -> Result<(f64, Option<f64>)> {
    let s = weighted_sup(op, setup, grid, plan, settings)?;
    Ok((s.one_sided, s.two_sided))
}

/// Compares the held-out ratios with the calibrated constants:
/// violation `ratio / C_cal − 1` per `(t, x, h)`. Returns `weighted_bound`
/// and, when the setup is two-sided, `weighted_bound_two_sided`.
#[allow(clippy::too_many_arguments)]
pub fn check_weighted_bound(
    op: &OperatorSpec,
    setup: &WeightedSetup,
    c_cal: (f64, Option<f64>),
    grid: &GridSpec,
    plan: &WeightedPlan,
    settings: &SolveSettings,
    tol: f64,
) -> Result<Vec<CheckResult>> {
    if !(c_cal.0 > 0.0) {
        return Err(Error::Precondition(format!("C_cal must be positive, got {}", c_cal.0)));
    }
    let sup = weighted_sup(op, setup, grid, plan, settings)?;
    let extra = format!("{:?}|{grid:?}|{plan:?}|{settings:?}|{c_cal:?}", setup.forward.majorant);
    let rel = |s: &Sample, c: f64| Sample { violation: s.value / c - 1.0, reference: c, ..s.clone() };
    let one: Vec<Sample> = sup.samples.iter().map(|(s, _)| rel(s, c_cal.0)).collect();
    let mut out =
        vec![CheckResult::from_samples("weighted_bound", tol, &fingerprint_of("weighted_bound", op, &extra), one)
            .with_metric("c_cal", c_cal.0)
            .with_metric("holdout_sup", sup.one_sided)
            .with_metric("relative_change", sup.one_sided / c_cal.0 - 1.0)
            .with_note("checked on Dirichlet approximants, which are dominated by the whole-space kernels")];
    if let (Some(c2), Some(s2)) = (c_cal.1, sup.two_sided) {
        let two: Vec<Sample> = sup.samples.iter().filter_map(|(_, s)| s.as_ref().map(|s| rel(s, c2))).collect();
        out.push(
            CheckResult::from_samples(
                "weighted_bound_two_sided",
                tol,
                &fingerprint_of("weighted_bound_two_sided", op, &extra),
                two,
            )
            .with_metric("c_cal", c2)
            .with_metric("holdout_sup", s2)
            .with_metric("relative_change", s2 / c2 - 1.0),
        );
    }
    Ok(out)
}

/// `q(y) = ln Σ_k |p_hk(t,x,y)| + ln w(t,y)` must stay bounded over the
/// sampled range `|y|_∞ ≤ R/2`: the violation is the maximum of `q` over the
/// outer half of the range minus its maximum over the inner half.
pub fn check_decay_shape(
    op: &OperatorSpec,
    w: &ExpWeight,
    grid: &GridSpec,
    times: &[f64],
    xs: &[Vec<f64>],
    settings: &SolveSettings,
    tol: f64,
) -> Result<CheckResult> {
    let times = sorted_times(times)?;
    let m = op.dims().m;
    let fields = adjoint_fields(op, grid, &times, xs, settings)?;
    let outer = grid.radius / 2.0;
    let split = outer / 2.0;
    let mut samples = Vec::new();
    for (ti, &t) in times.iter().enumerate() {
        for (xi, x) in xs.iter().enumerate() {
            for h in 0..m {
                let kf = &fields[xi * m + h][ti];
                let (mut core, mut tail) = ((f64::NEG_INFINITY, 0usize), (f64::NEG_INFINITY, 0usize));
                for p in 0..grid.num_nodes() {
                    let y = grid.coords(p);
                    let dist = y.iter().fold(0.0f64, |a, c| a.max(c.abs()));
                    if dist > outer {
                        continue;
                    }
                    let mass: f64 = (0..m).map(|k| kf.get(p, k).abs()).sum();
                    if !(mass > f64::MIN_POSITIVE) {
                        continue;
                    }
                    let q = mass.ln() + w.ln_value(t, &y)?;
                    let slot = if dist <= split { &mut core } else { &mut tail };
                    if q > slot.0 {
                        *slot = (q, p);
                    }
                }
                if !core.0.is_finite() {
                    return Err(Error::Precondition(format!("kernel vanishes near x = {x:?}")));
                }
                let v = if tail.0.is_finite() { tail.0 - core.0 } else { f64::NEG_INFINITY };
                samples.push(Sample {
                    location: Location {
                        t: Some(t),
                        x: Some(x.clone()),
                        y: Some(grid.coords(tail.1)),
                        h: Some(h),
                        k: None,
                    },
                    value: tail.0,
                    reference: core.0,
                    violation: v,
                });
            }
        }
    }
    let fp = fingerprint_of("decay_shape", op, &format!("{w:?}|{grid:?}|{times:?}|{xs:?}|{settings:?}"));
    Ok(CheckResult::from_samples("decay_shape", tol, &fp, samples).with_note(
        "q = ln Σ_k|p_hk| + ln w; violation = max over the outer half of the range minus max over the inner half",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn decay_shape_detects_too_strong_weights() {
        let fam = presets::polynomial_example();
        let op = fam.operator();
        let grid = GridSpec::new(1, 8.0, 1.0 / 16.0).unwrap();
        let (_, nu) = synth(&fam, 1.0, Target::P, &SynthOverrides::default()).unwrap();
        let w = nu.with_eps(nu.eps_t / 4.0).unwrap().weight();
        let s = SolveSettings::positivity();
        let r = check_decay_shape(&op, &w, &grid, &[0.25, 0.5], &[vec![0.0]], &s, 0.02).unwrap();
        assert!(r.passed(), "{}", r.line());
        // a weight growing like e^{y⁴} beats the kernel tail
        let strong = ExpWeight {
            coef: 5.0,
            sigma: 0.0,
            shape: crate::lyapunov::Shape::new(crate::lyapunov::LyapunovForm::PolyExp, 2.0).unwrap(),
        };
        let r = check_decay_shape(&op, &strong, &grid, &[0.5], &[vec![0.0]], &s, 0.02).unwrap();
        assert!(!r.passed());
    }
}
