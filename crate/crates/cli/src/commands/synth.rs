//! `synth`: Lyapunov certificates, constants ledger and bound certificate.

use std::fmt::Write as _;

use kernelbound::bounds::BoundCertificate;
use kernelbound::lyapunov::{synth, verify_certificate, CertificatePlan, CertificateReport, Target};
use kernelbound::verify::{calibrate_weighted_bound, prepare_weighted, Side, WeightedPlan, WeightedSetup};

use super::Ctx;
use crate::error::CliResult;
use crate::output::{fmt_list, kv};

fn provenance(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("provenance.{k} = {v}\n")).collect()
}

fn certificate_text(r: &CertificateReport) -> (String, String) {
    let phi = &r.lyapunov;
    let mut a = kv(&[
        ("target", phi.target.name().to_string()),
        ("form", phi.form.name().to_string()),
        ("rho", format!("{:e}", phi.rho)),
        ("eps_hat", format!("{:e}", phi.eps_hat)),
        ("lambda", format!("{:e}", phi.lambda)),
        ("sup_quotient_R", format!("{:e}", r.phi.sup_r)),
        ("sup_quotient_2R", format!("{:e}", r.phi.sup_2r)),
        ("relative_change", format!("{:e}", r.phi.relative_change)),
        ("worst_x", fmt_list(&r.phi.worst_x)),
        ("worst_k", (r.phi.worst_k + 1).to_string()),
        ("skipped_points", r.phi.skipped.to_string()),
        ("pass", r.phi.pass.to_string()),
    ]);
    a.push_str(&provenance(&phi.provenance));
    let nu = &r.time;
    let b = kv(&[
        ("target", nu.base.target.name().to_string()),
        ("horizon", format!("{:e}", nu.horizon)),
        ("sigma", format!("{:e}", nu.sigma)),
        ("delta", format!("{:e}", nu.delta)),
        ("eps_T", format!("{:e}", nu.eps_t)),
        ("p", format!("{:e}", nu.p())),
        ("c0", format!("{:e}", nu.c0)),
        ("worst_t", format!("{:e}", r.nu.worst_t)),
        ("worst_x", fmt_list(&r.nu.worst_x)),
        ("worst_k", (r.nu.worst_k + 1).to_string()),
        ("holdout_max_excess", format!("{:e}", r.nu.holdout_max_excess)),
        ("samples", r.nu.samples.to_string()),
        ("skipped_points", r.nu.skipped.to_string()),
        ("pass", r.nu.pass.to_string()),
    ]);
    (a, b)
}

/// The ledger text and whether the constants are representable at every plan time.
fn ledger_text(setup: &WeightedSetup, plan: &WeightedPlan) -> (String, bool) {
    let mut s = String::new();
    let mut representable = true;
    let sides: Vec<(&str, &Side)> =
        std::iter::once(("forward", &setup.forward)).chain(setup.adjoint.as_ref().map(|a| ("adjoint", a))).collect();
    for (name, side) in sides {
        let mj = &side.majorant;
        let _ = writeln!(s, "[{name}]");
        let _ = writeln!(s, "s = {:e}", mj.s);
        let _ = writeln!(s, "window = {}", mj.mode);
        let _ = writeln!(s, "ledger_window = [{:e}, {:e}]", side.ledger.a0, side.ledger.b0);
        let _ = writeln!(s, "c_tilde = {}", fmt_list(&mj.c_tilde));
        let _ = writeln!(s, "skipped_points = {}", side.ledger.skipped);
        for (i, it) in side.ledger.items.iter().enumerate() {
            let _ = writeln!(
                s,
                "item.{} = {} sup {:e} at t={:e} x={} h={}{}",
                i + 1,
                it.label,
                it.value,
                it.argmax_t,
                fmt_list(&it.argmax_x),
                it.argmax_h + 1,
                if it.saturated { " (on the outer ring)" } else { "" }
            );
        }
        let _ = writeln!(s, "# per evaluation time: t, window (a0, a, b, b0), constants c1..c8");
        for &t in &plan.times {
            match mj.ledger_at(setup.d, t) {
                Ok(l) => {
                    let w = l.window;
                    let _ = writeln!(
                        s,
                        "t = {t:e}: window [{:e}, {:e}, {:e}, {:e}] c = {}",
                        w.a0,
                        w.a,
                        w.b,
                        w.b0,
                        fmt_list(&l.c)
                    );
                }
                Err(e) => {
                    representable = false;
                    let _ = writeln!(s, "t = {t:e}: not representable: {e}");
                }
            }
        }
        s.push('\n');
    }
    (s, representable)
}

fn bound_text(cert: &BoundCertificate, calibrated: &str) -> String {
    let mut s = kv(&[
        ("kind", cert.kind.name().to_string()),
        ("d", cert.d.to_string()),
        ("s", format!("{:e}", cert.s)),
        ("window", cert.window_mode.to_string()),
        ("c_hat", format!("{:e}", cert.c_hat)),
        ("c_cal", format!("{:e}", cert.c_cal)),
        ("c_cal_source", calibrated.to_string()),
    ]);
    for (name, p) in std::iter::once(("forward", Some(cert.forward))).chain(std::iter::once(("adjoint", cert.adjoint)))
    {
        if let Some(p) = p {
            let _ = writeln!(
                s,
                "{name} = form {} eps {:e} sigma {:e} rho {:e} lambda {:e}",
                p.form.name(),
                p.eps,
                p.sigma,
                p.rho,
                p.lambda
            );
        }
    }
    s.push_str(&provenance(&cert.provenance));
    s
}

pub fn run(ctx: &mut Ctx<'_>) -> CliResult<bool> {
    let family = ctx.cfg.require_family("synth")?;
    let op = family.operator();
    let horizon = ctx.cfg.lyapunov.horizon;
    let plan = CertificatePlan::new(ctx.cfg.lyapunov.certificate_radius);
    let targets: &[Target] = if ctx.cfg.bounds.two_sided { &[Target::P, Target::PAdjoint] } else { &[Target::P] };
    let mut pass = true;
    for &target in targets {
        let (phi, nu) = synth(family, horizon, target, &ctx.cfg.lyapunov.overrides)?;
        let report = verify_certificate(&op, &phi, &nu, &plan)?;
        println!(
            "certificate {:<10} {} ρ={} λ={:.6e} c̃₀={:.6e} {}",
            target.name(),
            phi.form.name(),
            phi.rho,
            report.lyapunov.lambda,
            report.time.c0,
            if report.pass() { "pass" } else { "FAIL" }
        );
        pass &= report.pass();
        let (a, b) = certificate_text(&report);
        ctx.out.write(&format!("lyapunov_{}.txt", target.name()), &a)?;
        ctx.out.write(&format!("time_lyapunov_{}.txt", target.name()), &b)?;
    }
    ctx.out.progress("estimating the constants ledger");
    let d = family.dims().d;
    let wcfg = ctx.weighted_config(d);
    let setup = prepare_weighted(family, &wcfg)?;
    let wplan = ctx.weighted_plan(d);
    let (ledger, representable) = ledger_text(&setup, &wplan);
    ctx.out.write("constants_ledger.txt", &ledger)?;
    if !representable {
        println!("constants ledger: not representable in f64 at some plan times (see constants_ledger.txt)");
        pass = false;
    }
    let (c_cal, source) = match (ctx.cfg.bounds.c_cal, &ctx.cfg.grid) {
        (Some(c), _) => (c.0, "config".to_string()),
        (None, Some(_)) if !representable => (f64::NAN, "uncalibrated: constants ledger not representable".to_string()),
        (None, Some(g)) => {
            let (r, h) = ctx.cfg.bounds.training;
            let grid = g.grid(r, h)?;
            let c = calibrate_weighted_bound(&op, &setup, &grid, &wplan, &ctx.settings(g))?;
            (c.0, format!("calibrated on R={r}, h={h}"))
        }
        (None, None) => (f64::NAN, "uncalibrated: no [grid] section".to_string()),
    };
    let mut cert = setup.certificate(c_cal);
    cert.c_hat = ctx.cfg.bounds.c_hat;
    ctx.out.write("bound_certificate.txt", &bound_text(&cert, &source))?;
    println!("bound certificate: C_cal = {c_cal:.6e} ({source})");
    Ok(pass)
}
