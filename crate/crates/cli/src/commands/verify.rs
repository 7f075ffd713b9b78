//! `verify`: the selected property checks, with summary, CSV and plots.

use std::collections::BTreeMap;

use kernelbound::coefficients::{Family, Variant};
use kernelbound::hypotheses::check_base;
use kernelbound::lyapunov::{certify_nu, synth, CertificatePlan, Target};
use kernelbound::solver::{assemble, kernel_columns, GridSpec, Propagator};
use kernelbound::verify::svg::{line_plot, Series};
use kernelbound::verify::{
    calibrate_weighted_bound, check_chapman_kolmogorov, check_decay_shape, check_domination, check_duality,
    check_lyapunov_integrability, check_mass_and_positivity, check_monotone_in_R, check_support, check_weighted_bound,
    prepare_weighted, results_csv, summary, CheckResult, IntegrabilityOptions, SolveSettings, Source, WeightedSetup,
};
use kernelbound::Error;

use super::Ctx;
use crate::config::{needs_seed, Format, GridConfig, VerifyConfig};
use crate::error::CliResult;

struct Job<'a> {
    family: &'a Family,
    grid: GridSpec,
    gcfg: &'a GridConfig,
    vcfg: &'a VerifyConfig,
    settings: SolveSettings,
    seed: u64,
    weighted: Option<WeightedSetup>,
}

impl Job<'_> {
    fn sources(&self) -> Vec<Source> {
        let d = self.family.dims().d;
        (0..self.family.dims().m).map(|k| Source::new(vec![0.0; d], k)).collect()
    }

    fn weighted(&mut self, ctx: &Ctx<'_>) -> CliResult<&WeightedSetup> {
        if self.weighted.is_none() {
            ctx.out.progress("preparing the weighted bound (synthesis, c̃₀, ledger)");
            let setup = prepare_weighted(self.family, &ctx.weighted_config(self.family.dims().d))?;
            self.weighted = Some(setup);
        }
        Ok(self.weighted.as_ref().expect("just prepared"))
    }
}

fn run_check(id: &str, job: &mut Job<'_>, ctx: &Ctx<'_>) -> CliResult<Vec<CheckResult>> {
    let spec = job.family.operator();
    let v = job.vcfg;
    let horizon = ctx.cfg.lyapunov.horizon;
    let t_last = *v.times.iter().max_by(|a, b| a.total_cmp(b)).expect("times are nonempty");
    Ok(match id {
        "domination" => vec![check_domination(
            &spec,
            &[job.grid],
            &v.times,
            &job.sources(),
            &job.settings,
            v.tol("domination", 1e-9),
            job.seed,
        )?],
        "monotone" => {
            let inner = job.gcfg.radii[0];
            let pts: Vec<Vec<f64>> = v.points.iter().filter(|x| x.iter().all(|c| c.abs() < inner)).cloned().collect();
            if pts.is_empty() {
                return Err(ctx.cfg.error_at(
                    "verify",
                    "points",
                    format!("no point lies inside the smallest box R = {inner}"),
                ));
            }
            let srcs: Vec<Source> = job.sources().into_iter().filter(|s| s.y.iter().all(|c| c.abs() < inner)).collect();
            vec![check_monotone_in_R(
                &spec,
                &job.gcfg.radii,
                job.gcfg.mesh,
                t_last,
                &pts,
                &srcs,
                &job.settings,
                v.tol("monotone", 1e-8),
            )?]
        }
        "mass" => {
            let base = check_base(job.family);
            let m_bound = base.row_sums.as_ref().and_then(|r| r.m).ok_or_else(|| {
                Error::Hypothesis("row sums of V^P are not bounded below; the mass bound does not apply".into())
            })?;
            check_mass_and_positivity(
                &spec,
                &job.grid,
                &v.times,
                m_bound,
                &job.sources(),
                &job.settings,
                v.tol("mass", 0.01),
                v.tol("positivity", 1e-8),
                job.seed,
            )?
        }
        "support" => {
            let mut out = Vec::new();
            for k in 0..job.family.dims().m {
                out.extend(check_support(&spec, &job.grid, k, t_last, &job.settings)?);
            }
            out
        }
        "duality" => {
            let pts: Vec<&Vec<f64>> = v.points.iter().take(3).collect();
            let pairs: Vec<(Vec<f64>, Vec<f64>)> =
                pts.iter().flat_map(|x| pts.iter().map(move |y| ((*x).clone(), (*y).clone()))).collect();
            vec![check_duality(&spec, &job.grid, t_last, &pairs, &job.settings, v.tol("duality", 0.02))?]
        }
        "chapman_kolmogorov" => {
            let (t, s) = v.chapman_kolmogorov;
            vec![check_chapman_kolmogorov(
                &spec,
                Variant::P,
                &job.grid,
                t,
                s,
                &job.settings,
                job.seed,
                v.tol("chapman_kolmogorov", 1e-8),
            )?]
        }
        "integrability" => {
            let (_, nu) = synth(job.family, horizon, Target::P, &ctx.cfg.lyapunov.overrides)?;
            let mut nu = nu.with_eps(nu.eps_t / 4.0)?;
            nu.c0 = certify_nu(&spec, &nu, &CertificatePlan::new(ctx.cfg.lyapunov.certificate_radius))?.c0;
            let times: Vec<f64> = v.times.iter().copied().filter(|t| *t <= horizon).collect();
            let opts = IntegrabilityOptions { tol: v.tol("integrability", 0.05), ..IntegrabilityOptions::default() };
            vec![check_lyapunov_integrability(&spec, &nu, &job.grid, &times, &v.points, &job.settings, &opts)?]
        }
        "weighted_bound" => {
            let settings = job.settings;
            let gcfg = job.gcfg;
            let setup = job.weighted(ctx)?.clone();
            let d = job.family.dims().d;
            let plan = ctx.weighted_plan(d);
            let b = &ctx.cfg.bounds;
            let c_cal = match b.c_cal {
                Some(c) => c,
                None => {
                    let train = gcfg.grid(b.training.0, b.training.1)?;
                    ctx.out.progress(&format!("calibrating C_cal on R = {}, h = {}", b.training.0, b.training.1));
                    calibrate_weighted_bound(&spec, &setup, &train, &plan, &settings)?
                }
            };
            let c_cal = match (c_cal.1, setup.adjoint.is_some()) {
                (None, true) => {
                    let train = gcfg.grid(b.training.0, b.training.1)?;
                    (c_cal.0, calibrate_weighted_bound(&spec, &setup, &train, &plan, &settings)?.1)
                }
                _ => c_cal,
            };
            let hold = gcfg.grid(b.holdout.0, b.holdout.1)?;
            let tested = if b.ledger_scale == 1.0 { setup } else { setup.scaled(b.ledger_scale) };
            ctx.out.progress(&format!("checking on R = {}, h = {}", b.holdout.0, b.holdout.1));
            check_weighted_bound(&spec, &tested, c_cal, &hold, &plan, &settings, v.tol("weighted_bound", 0.1))?
        }
        "decay_shape" => {
            let w = job.weighted(ctx)?.forward.w;
            vec![check_decay_shape(
                &spec,
                &w,
                &job.grid,
                &v.decay_times,
                &v.points,
                &job.settings,
                v.tol("decay_shape", 0.02),
            )?]
        }
        other => return Err(ctx.cfg.error_at("verify", "checks", format!("unknown check `{other}`"))),
    })
}

fn kernel_plot(job: &Job<'_>) -> CliResult<String> {
    let spec = job.family.operator();
    let op = assemble(&spec, Variant::P, &job.grid)?;
    let times = &job.vcfg.times;
    let prop = Propagator::new(&op, job.settings.theta, job.settings.dt_for(times, job.grid.mesh), times)?;
    let cols = kernel_columns(&prop, &[(job.grid.center(), 0)], job.settings.width(&job.grid), job.settings.exec)?;
    let m = job.family.dims().m;
    let series: Vec<Series> = cols[0]
        .iter()
        .map(|kf| Series {
            name: format!("t = {}", kf.time()),
            points: (0..job.grid.num_nodes())
                .filter(|&p| job.grid.coords(p)[1..].iter().all(|c| *c == 0.0))
                .map(|p| (job.grid.coords(p)[0], (0..m).map(|h| kf.get(p, h).abs()).sum()))
                .collect(),
        })
        .collect();
    Ok(line_plot("kernel section from y = 0, k = 1", "x", "Σ_h |p_h1(t,x,0)|", &series, true))
}

fn ratio_plot(results: &[CheckResult]) -> Option<String> {
    let series: Vec<Series> = results
        .iter()
        .filter(|r| r.id.starts_with("weighted_bound"))
        .map(|r| {
            let mut by_t: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
            for s in &r.samples {
                if let Some(t) = s.location.t {
                    let e = by_t.entry(t.to_bits()).or_insert((t, f64::NEG_INFINITY));
                    e.1 = e.1.max(s.value);
                }
            }
            Series { name: r.id.clone(), points: by_t.into_values().collect() }
        })
        .collect();
    (!series.is_empty()).then(|| line_plot("weighted ratio vs t (held-out grid)", "t", "sup ratio", &series, true))
}

pub fn run(ctx: &mut Ctx<'_>) -> CliResult<bool> {
    let family = ctx.cfg.require_family("verify")?;
    let gcfg = ctx.cfg.require_grid("verify")?;
    let vcfg = ctx.cfg.require_verify("verify")?;
    if needs_seed(&vcfg.checks) && ctx.seed.is_none() {
        return Err(ctx.cfg.error_at(
            "verify",
            "seed",
            "a seed is required by the randomized checks (set verify.seed or --seed)",
        ));
    }
    let grid = gcfg.main_grid()?;
    grid.check_budget(family.dims().m, gcfg.max_unknowns)?;
    let mut job =
        Job { family, grid, gcfg, vcfg, settings: ctx.settings(gcfg), seed: ctx.seed.unwrap_or(0), weighted: None };
    let mut results = Vec::new();
    for id in &vcfg.checks {
        let start = std::time::Instant::now();
        let res = run_check(id, &mut job, ctx)?;
        for r in &res {
            println!("{}", r.line());
        }
        ctx.out.progress(&format!("{id}: {:.2}s", start.elapsed().as_secs_f64()));
        results.extend(res);
    }
    let title = format!("verification of {}", ctx.cfg.path.display());
    ctx.out.write_as(Format::Text, "verify_summary.txt", &summary(&title, &results))?;
    if ctx.out.wants(Format::Csv) {
        ctx.out.write("verify_results.csv", &results_csv(&results))?;
        for r in &results {
            ctx.out.write(&format!("checks/{}.csv", r.id), &results_csv(std::slice::from_ref(r)))?;
        }
    }
    if ctx.out.wants(Format::Svg) {
        ctx.out.write("kernel_sections.svg", &kernel_plot(&job)?)?;
        if let Some(svg) = ratio_plot(&results) {
            ctx.out.write("weighted_ratio.svg", &svg)?;
        }
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    println!("{} checks, {} passed, {} not passed", results.len(), results.len() - failed, failed);
    if failed > 0 {
        let worst: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.id.as_str()).collect();
        ctx.out.progress(&format!("not passed: {}", worst.join(", ")));
    }
    Ok(failed == 0)
}
