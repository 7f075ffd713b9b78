//! Grid verification of `𝓐φ ≤ λφ` and `D_tν + 𝓐ν ≤ gν`, with calibration of
//! `λ` and `c̃₀`.

use super::{operator_quotient, r_of, LyapunovSpec, TimeLyapunovSpec};
use crate::coefficients::OperatorSpec;
use crate::par::{self, Exec};
use crate::{Error, Result};

/// Growth of the `φ` supremum under radius doubling that counts as unbounded.
pub const UNBOUNDED_GROWTH: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct CertificatePlan {
    /// inner radius `R`; stability compares `R` with `2R`
    pub radius: f64,
    /// grid spacing; defaults to `R/512` (d=1) or `R/32` (d=2)
    pub spacing: Option<f64>,
    /// allowed relative change of the `φ` supremum when `R` doubles
    pub tolerance: f64,
    /// dyadic times `T·2^{−j}`, `j = 0..=dyadic_levels`
    pub dyadic_levels: u32,
    /// uniform times `T·i/uniform_times`, `i = 1..=uniform_times`
    pub uniform_times: usize,
    /// relative slack allowed on held-out points
    pub holdout_rel: f64,
    pub exec: Exec,
}

impl CertificatePlan {
    pub fn new(radius: f64) -> Self {
        Self {
            radius,
            spacing: None,
            tolerance: 0.01,
            dyadic_levels: 10,
            uniform_times: 64,
            holdout_rel: 1e-2,
            exec: Exec::Parallel,
        }
    }

    fn spacing(&self, d: usize) -> f64 {
        self.spacing.unwrap_or(self.radius / if d == 1 { 512.0 } else { 32.0 })
    }

    /// Grid points of `[−rad, rad]^d` at the plan spacing, shifted by `offset`
    /// (in units of the spacing).
    fn points(&self, d: usize, rad: f64, offset: f64) -> Vec<Vec<f64>> {
        let hs = self.spacing(d);
        let n = (rad / hs).round() as i64;
        let coords: Vec<f64> = (-n..=n).map(|i| (i as f64 + offset) * hs).filter(|c| c.abs() <= rad).collect();
        match d {
            1 => coords.iter().map(|&c| vec![c]).collect(),
            _ => coords.iter().flat_map(|&b| coords.iter().map(move |&a| vec![a, b])).collect(),
        }
    }

    fn times(&self, horizon: f64) -> Vec<f64> {
        let mut t: Vec<f64> = (0..=self.dyadic_levels)
            .map(|j| horizon * 0.5f64.powi(j as i32))
            .chain((1..=self.uniform_times).map(|i| horizon * i as f64 / self.uniform_times as f64))
            .collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiCertificate {
    pub sup_r: f64,
    pub sup_2r: f64,
    pub relative_change: f64,
    pub lambda: f64,
    pub worst_x: Vec<f64>,
    pub worst_k: usize,
    /// points where the coefficients are not representable in f64
    pub skipped: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuCertificate {
    pub c0: f64,
    pub worst_t: f64,
    pub worst_x: Vec<f64>,
    pub worst_k: usize,
    /// largest excess of the residual over `c̃₀` on held-out points
    pub holdout_max_excess: f64,
    pub samples: usize,
    pub skipped: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub phi: PhiCertificate,
    pub nu: NuCertificate,
    /// `φ` with the certified `λ`
    pub lyapunov: LyapunovSpec,
    /// `ν` with the calibrated `c̃₀`
    pub time: TimeLyapunovSpec,
}

impl CertificateReport {
    pub fn pass(&self) -> bool {
        self.phi.pass && self.nu.pass
    }
}

struct Worst {
    value: f64,
    x: Vec<f64>,
    t: f64,
    k: usize,
    skipped: usize,
}

/// Max over `k` and the points of `f(x, k)`; coefficient overflow skips the point.
fn sup_over<F>(exec: Exec, pts: &[(f64, Vec<f64>)], m: usize, f: F) -> Result<Worst>
where
    F: Fn(f64, &[f64], usize) -> Result<f64> + Sync + Send,
{
    let vals = par::map(exec, pts, |(t, x)| -> Result<Option<(f64, usize)>> {
        let mut best: Option<(f64, usize)> = None;
        for k in 0..m {
            match f(*t, x, k) {
                Ok(v) if v.is_nan() => return Ok(None),
                Ok(v) => {
                    if best.is_none_or(|(b, _)| v > b) {
                        best = Some((v, k));
                    }
                }
                Err(Error::NonFiniteCoefficient { .. }) | Err(Error::Saturation { .. }) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        Ok(best)
    });
    let mut w = Worst { value: f64::NEG_INFINITY, x: Vec::new(), t: 0.0, k: 0, skipped: 0 };
    for (v, (t, x)) in vals.into_iter().zip(pts) {
        match v? {
            None => w.skipped += 1,
            Some((v, k)) => {
                if v > w.value {
                    w = Worst { value: v, x: x.clone(), t: *t, k, skipped: w.skipped };
                }
            }
        }
    }
    Ok(w)
}

fn phi_quotient(op: &OperatorSpec, spec: &LyapunovSpec, x: &[f64], k: usize) -> Result<f64> {
    let wt = spec.weight();
    let lj = wt.log_jet(0.0, x, &wt.shape.jet(r_of(x))?);
    operator_quotient(op, spec.target.variant(), k, x, &lj)
}

/// `sup (𝓐φ)_k/φ` on `[−R,R]^d` and `[−2R,2R]^d`; `λ = max(0, sup)`.
///
/// Fails with a certificate error when the supremum grows by 10% or more as
/// the radius doubles.
pub fn certify_phi(op: &OperatorSpec, spec: &LyapunovSpec, plan: &CertificatePlan) -> Result<PhiCertificate> {
    let dims = op.dims();
    let eval = |rad: f64| {
        let pts: Vec<(f64, Vec<f64>)> = plan.points(dims.d, rad, 0.0).into_iter().map(|x| (0.0, x)).collect();
        sup_over(plan.exec, &pts, dims.m, |_, x, k| phi_quotient(op, spec, x, k))
    };
    let w1 = eval(plan.radius)?;
    let w2 = eval(2.0 * plan.radius)?;
    if !w2.value.is_finite() {
        return Err(Error::Certificate(format!("sup of (𝓐φ)_k/φ is not finite (worst at x = {:?})", w2.x)));
    }
    let rel = (w2.value - w1.value) / w1.value.abs().max(1.0);
    if rel >= UNBOUNDED_GROWTH {
        return Err(Error::Certificate(format!(
            "sup of (𝓐φ)_k/φ grows from {} to {} when R doubles from {} (unbounded growth)",
            w1.value, w2.value, plan.radius
        )));
    }
    Ok(PhiCertificate {
        sup_r: w1.value,
        sup_2r: w2.value,
        relative_change: rel,
        lambda: w2.value.max(0.0),
        worst_x: w2.x,
        worst_k: w2.k,
        skipped: w2.skipped,
        pass: rel < plan.tolerance,
    })
}

fn nu_residual(op: &OperatorSpec, nu: &TimeLyapunovSpec, t: f64, x: &[f64], k: usize) -> Result<f64> {
    let wt = nu.weight();
    let lj = wt.log_jet(t, x, &wt.shape.jet(r_of(x))?);
    let q = operator_quotient(op, nu.base.target.variant(), k, x, &lj)?;
    Ok(lj.dt + q - nu.eps_t * nu.delta * t.powf(nu.p()))
}

/// Calibrates `c̃₀ = max(0, sup residual)` of `D_tν + 𝓐ν ≤ (ε_T δ t^p)ν` on
/// the verification grid (`x` up to `2R`) and checks it on held-out points
/// midway between grid nodes and times.
pub fn certify_nu(op: &OperatorSpec, nu: &TimeLyapunovSpec, plan: &CertificatePlan) -> Result<NuCertificate> {
    let dims = op.dims();
    if !(nu.p() > -1.0) {
        return Err(Error::Certificate(format!("g is not integrable: p = {} ≤ −1", nu.p())));
    }
    let times = plan.times(nu.horizon);
    let xs = plan.points(dims.d, 2.0 * plan.radius, 0.0);
    let pts: Vec<(f64, Vec<f64>)> = times.iter().flat_map(|&t| xs.iter().map(move |x| (t, x.clone()))).collect();
    let w = sup_over(plan.exec, &pts, dims.m, |t, x, k| nu_residual(op, nu, t, x, k))?;
    if !w.value.is_finite() {
        return Err(Error::Certificate(format!(
            "residual of the ν inequality is not finite at t = {}, x = {:?}",
            w.t, w.x
        )));
    }
    let c0 = w.value.max(0.0);
    let mid_t: Vec<f64> = times.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    let xh = plan.points(dims.d, 2.0 * plan.radius, 0.5);
    let hold: Vec<(f64, Vec<f64>)> =
        mid_t.iter().step_by(4).flat_map(|&t| xh.iter().map(move |x| (t, x.clone()))).collect();
    let wh = sup_over(plan.exec, &hold, dims.m, |t, x, k| nu_residual(op, nu, t, x, k))?;
    let excess = (wh.value - c0).max(0.0);
    let pass = excess <= plan.holdout_rel * c0.abs() + 1e-9;
    Ok(NuCertificate {
        c0,
        worst_t: w.t,
        worst_x: w.x,
        worst_k: w.k,
        holdout_max_excess: excess,
        samples: pts.len(),
        skipped: w.skipped,
        pass,
    })
}

/// Certifies both functions and returns the specs with `λ` and `c̃₀` filled in.
pub fn verify_certificate(
    op: &OperatorSpec,
    phi: &LyapunovSpec,
    nu: &TimeLyapunovSpec,
    plan: &CertificatePlan,
) -> Result<CertificateReport> {
    if phi.target != nu.base.target {
        return Err(Error::Precondition("φ and ν certify different operators".into()));
    }
    let pc = certify_phi(op, phi, plan)?;
    let nc = certify_nu(op, nu, plan)?;
    let mut lyapunov = phi.clone();
    lyapunov.lambda = pc.lambda;
    let mut time = nu.clone();
    time.c0 = nc.c0;
    time.base.lambda = pc.lambda;
    Ok(CertificateReport { phi: pc, nu: nc, lyapunov, time })
}

#[cfg(test)]
mod tests {
    use super::super::{eval_G, synth, SynthOverrides, Target};
    use super::*;
    use crate::coefficients::{Family, FamilyParams, FnCoefficients, SystemDims};
    use crate::lyapunov::LyapunovForm;
    use crate::quadrature::integrate;

    fn example() -> Family {
        let theta = [vec![1.0, 0.5], vec![0.5, 1.0]];
        let gamma = [vec![2.0, 1.0], vec![1.0, 2.0]];
        Family::polynomial(FamilyParams::isotropic(1, 1.0, 0.0, 1.0, 1.0, &theta, &gamma).unwrap())
    }

    fn small_plan(r: f64) -> CertificatePlan {
        CertificatePlan { spacing: Some(r / 128.0), dyadic_levels: 6, uniform_times: 16, ..CertificatePlan::new(r) }
    }

    #[test]
    fn example_certificate_passes() {
        let fam = example();
        let op = fam.operator();
        for target in [Target::P, Target::PAdjoint] {
            let (phi, nu) = synth(&fam, 1.0, target, &SynthOverrides::default()).unwrap();
            let rep = verify_certificate(&op, &phi, &nu, &small_plan(10.0)).unwrap();
            assert!(rep.pass(), "{target}: {:?} {:?}", rep.phi, rep.nu);
            assert!(rep.lyapunov.lambda >= 0.0 && rep.time.c0 >= 0.0);
            // G closed form against quadrature of g
            let t = 0.7;
            let q = integrate(|s| rep.time.g(s), 0.0, t, 1e-12).unwrap();
            assert!((eval_G(&rep.time, t).unwrap() - q).abs() <= 1e-8 * q.abs());
        }
    }

    #[test]
    fn ou_certificate_at_origin() {
        // Q=1, b=−x, V=1+x²: (𝓐φ)/φ at 0 is 2ε̂ρ − 1
        let dims = SystemDims::new(1, 1).unwrap();
        let op = OperatorSpec::new(FnCoefficients::new(
            dims,
            |_, _, q: &mut [f64]| q[0] = 1.0,
            |_, x: &[f64], b: &mut [f64]| b[0] = -x[0],
            |x: &[f64], v: &mut [f64]| v[0] = 1.0 + x[0] * x[0],
            vec![true],
        ));
        let phi = LyapunovSpec {
            form: LyapunovForm::PolyExp,
            rho: 0.5,
            eps_hat: 0.1,
            lambda: 0.0,
            target: Target::P,
            provenance: vec![],
        };
        let q0 = phi_quotient(&op, &phi, &[0.0], 0).unwrap();
        assert!((q0 - (2.0 * 0.1 * 0.5 - 1.0)).abs() < 1e-12);
        let pc = certify_phi(&op, &phi, &small_plan(20.0)).unwrap();
        assert!(pc.pass);
        assert!((pc.lambda - 0.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_fails() {
        let dims = SystemDims::new(1, 1).unwrap();
        let op = OperatorSpec::new(FnCoefficients::new(
            dims,
            |_, _, q: &mut [f64]| q[0] = 1.0,
            |_, _, b: &mut [f64]| b[0] = 0.0,
            |_, v: &mut [f64]| v[0] = 0.0,
            vec![false],
        ));
        let phi = LyapunovSpec {
            form: LyapunovForm::PolyExp,
            rho: 1.0,
            eps_hat: 0.5,
            lambda: 0.0,
            target: Target::P,
            provenance: vec![],
        };
        assert!(matches!(certify_phi(&op, &phi, &small_plan(5.0)), Err(Error::Certificate(_))));
    }

    #[test]
    fn t_zero_slice_is_minus_row_sum() {
        let fam = example();
        let op = fam.operator();
        let (_, nu) = synth(&fam, 1.0, Target::P, &SynthOverrides::default()).unwrap();
        let x = [0.7];
        let wt = nu.weight();
        let lj = wt.log_jet(0.0, &x, &wt.shape.jet(r_of(&x)).unwrap());
        let q = operator_quotient(&op, nu.base.target.variant(), 0, &x, &lj).unwrap();
        let r = 1.49f64;
        assert!((q + (r * r - 0.5 * r)).abs() < 1e-12);
    }
}
