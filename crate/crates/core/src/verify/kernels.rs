//! Structural checks on discrete kernels: domination, monotonicity in the
//! domain, mass and positivity, coupling support, duality and the semigroup
//! law.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fingerprint, fingerprint_of, node_of, sorted_times, CheckResult, Location, Sample, SolveSettings, Source};
use crate::coefficients::{coupling_support, coupling_support_with, OperatorSpec, Variant};
use crate::par;
use crate::presets::sparse_coupling;
use crate::solver::{assemble, kernel_columns, DiscreteField, GridSpec, KernelField, Propagator};
use crate::{Error, Result};

/// Columns below this fraction of the kernel peak count as identically zero.
pub const NULL_TOL: f64 = 1e-10;
/// Columns above this fraction of the kernel peak count as nontrivial.
pub const POSITIVE_FLOOR: f64 = 1e-12;

/// Kernel snapshots per source (outer) and time (inner).
fn solve_columns(
    spec: &OperatorSpec,
    variant: Variant,
    grid: &GridSpec,
    times: &[f64],
    sources: &[Source],
    settings: &SolveSettings,
) -> Result<Vec<Vec<KernelField>>> {
    let op = assemble(spec, variant, grid)?;
    let dt = settings.dt_for(times, grid.mesh);
    let prop = Propagator::new(&op, settings.theta, dt, times)?;
    let nodes = sources.iter().map(|s| Ok((node_of(grid, &s.y)?, s.k))).collect::<Result<Vec<_>>>()?;
    kernel_columns(&prop, &nodes, settings.width(grid), settings.exec)
}

fn random_field(grid: GridSpec, m: usize, seed: u64, signed: bool) -> DiscreteField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = if signed { -1.0 } else { 0.0 };
    let values = (0..grid.num_nodes() * m).map(|_| rng.gen_range(lo..=1.0)).collect();
    DiscreteField { grid, m, values, time: 0.0 }
}

fn field_peak(f: &DiscreteField) -> f64 {
    f.max_abs()
}

/// Largest `(|p| − p^P)/scale` over a pair of fields, with its node and component.
fn worst_excess(plain: &DiscreteField, dom: &DiscreteField, scale: f64) -> (f64, usize, usize) {
    let m = plain.m;
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for (i, (a, b)) in plain.values.iter().zip(&dom.values).enumerate() {
        let v = (a.abs() - b) / scale;
        if v > best.0 || v.is_nan() {
            best = (if v.is_nan() { f64::INFINITY } else { v }, i / m, i % m);
        }
    }
    best
}

/// `|p^𝒟_hk| ≤ p^{𝒟,P}_hk` at every node for the given sources, and
/// `|T(t)f| ≤ T^P(t)|f|` for a random sign-changing `f`; violations relative
/// to the peak of the dominating field.
pub fn check_domination(
    spec: &OperatorSpec,
    grids: &[GridSpec],
    times: &[f64],
    sources: &[Source],
    settings: &SolveSettings,
    tol: f64,
    seed: u64,
) -> Result<CheckResult> {
    let times = sorted_times(times)?;
    let m = spec.dims().m;
    let mut samples = Vec::new();
    for grid in grids {
        let plain = solve_columns(spec, Variant::Plain, grid, &times, sources, settings)?;
        let dom = solve_columns(spec, Variant::P, grid, &times, sources, settings)?;
        for (si, src) in sources.iter().enumerate() {
            for (ti, &t) in times.iter().enumerate() {
                let (a, b) = (&plain[si][ti].field, &dom[si][ti].field);
                let scale = field_peak(b).max(f64::MIN_POSITIVE);
                let (v, node, h) = worst_excess(a, b, scale);
                samples.push(Sample {
                    location: Location {
                        t: Some(t),
                        x: Some(grid.coords(node)),
                        y: Some(src.y.clone()),
                        h: Some(h),
                        k: Some(src.k),
                    },
                    value: a.values[node * m + h],
                    reference: b.values[node * m + h],
                    violation: v,
                });
            }
        }
        let f = random_field(*grid, m, seed, true);
        let abs_f = DiscreteField { values: f.values.iter().map(|v| v.abs()).collect(), ..f.clone() };
        let dt = settings.dt_for(&times, grid.mesh);
        let op_plain = assemble(spec, Variant::Plain, grid)?;
        let op_p = assemble(spec, Variant::P, grid)?;
        let (ua, _) = Propagator::new(&op_plain, settings.theta, dt, &times)?.run(&f)?;
        let (ub, _) = Propagator::new(&op_p, settings.theta, dt, &times)?.run(&abs_f)?;
        for ((a, b), &t) in ua.iter().zip(&ub).zip(&times) {
            let scale = field_peak(&abs_f).max(f64::MIN_POSITIVE);
            let (v, node, h) = worst_excess(a, b, scale);
            samples.push(Sample {
                location: Location { t: Some(t), x: Some(grid.coords(node)), h: Some(h), ..Location::default() },
                value: a.values[node * m + h],
                reference: b.values[node * m + h],
                violation: v,
            });
        }
    }
    let fp = fingerprint_of("domination", spec, &format!("{grids:?}|{times:?}|{sources:?}|{settings:?}|{seed}"));
    Ok(CheckResult::from_samples("domination", tol, &fp, samples)
        .with_note("violations are relative to the peak of the dominating field"))
}

/// `p^{𝒟,P}_hk(t,x,y)` nondecreasing along a ladder of nested boxes sharing
/// the mesh; violations are absolute. Metrics `increment_i` (largest change
/// from rung `i` to `i+1`) and `shrink_i = increment_i / increment_{i+1}`
/// report the convergence trend.
#[allow(non_snake_case)]
pub fn check_monotone_in_R(
    spec: &OperatorSpec,
    radii: &[f64],
    mesh: f64,
    t: f64,
    points: &[Vec<f64>],
    sources: &[Source],
    settings: &SolveSettings,
    tol: f64,
) -> Result<CheckResult> {
    let d = spec.dims().d;
    let m = spec.dims().m;
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition(format!("radii must increase, got {radii:?}")));
    }
    let mut settings = *settings;
    settings.dt = Some(settings.dt_for(&[t], mesh));
    // values[rung][source][point][h]
    let mut values: Vec<Vec<Vec<Vec<f64>>>> = Vec::new();
    for &r in radii {
        let grid = GridSpec::new(d, r, mesh)?;
        let cols = solve_columns(spec, Variant::P, &grid, &[t], sources, &settings)?;
        let per_src = cols
            .iter()
            .map(|c| {
                points
                    .iter()
                    .map(|x| {
                        let node = node_of(&grid, x)?;
                        Ok((0..m).map(|h| c[0].get(node, h)).collect())
                    })
                    .collect::<Result<Vec<Vec<f64>>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        values.push(per_src);
    }
    let mut samples = Vec::new();
    let mut increments = Vec::new();
    for i in 1..values.len() {
        let mut inc = 0.0f64;
        for (si, src) in sources.iter().enumerate() {
            for (pi, x) in points.iter().enumerate() {
                for h in 0..m {
                    let (a, b) = (values[i - 1][si][pi][h], values[i][si][pi][h]);
                    inc = inc.max((b - a).abs());
                    samples.push(Sample {
                        location: Location {
                            t: Some(t),
                            x: Some(x.clone()),
                            y: Some(src.y.clone()),
                            h: Some(h),
                            k: Some(src.k),
                        },
                        value: b,
                        reference: a,
                        violation: a - b,
                    });
                }
            }
        }
        increments.push(inc);
    }
    let fp = fingerprint_of("monotone", spec, &format!("{radii:?}|{mesh}|{t}|{points:?}|{sources:?}|{settings:?}"));
    let mut res = CheckResult::from_samples("monotone", tol, &fp, samples);
    for (i, inc) in increments.iter().enumerate() {
        res = res.with_metric(&format!("increment_{i}"), *inc);
    }
    for i in 1..increments.len() {
        res = res.with_metric(&format!("shrink_{}", i - 1), shrink(increments[i - 1], increments[i]));
    }
    Ok(res)
}

/// `a/b`, with an already converged pair (`b = 0`) reported as infinite.
fn shrink(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        f64::INFINITY
    }
}

/// Two results: `mass` (`Σ_k ∫ p^{𝒟,P}_hk(t,x,y) dy = (T^P(t)𝟙)_h(x) ≤
/// √m e^{−Mt}`, violation `value/bound − 1`) and `positivity` (kernel columns
/// and `T^P(t)f` for random `f ≥ 0` are `≥ −tol_neg` relative to their peak).
#[allow(clippy::too_many_arguments)]
pub fn check_mass_and_positivity(
    spec: &OperatorSpec,
    grid: &GridSpec,
    times: &[f64],
    m_bound: f64,
    sources: &[Source],
    settings: &SolveSettings,
    tol_mass: f64,
    tol_neg: f64,
    seed: u64,
) -> Result<Vec<CheckResult>> {
    let times = sorted_times(times)?;
    let m = spec.dims().m;
    let op = assemble(spec, Variant::P, grid)?;
    let dt = settings.dt_for(&times, grid.mesh);
    let prop = Propagator::new(&op, settings.theta, dt, &times)?;
    let ones = DiscreteField { grid: *grid, m, values: vec![1.0; grid.num_nodes() * m], time: 0.0 };
    let (mass, _) = prop.run(&ones)?;
    let mut mass_samples = Vec::new();
    for (u, &t) in mass.iter().zip(&times) {
        let bound = (m as f64).sqrt() * (-m_bound * t).exp();
        for h in 0..m {
            let (node, v) = (0..grid.num_nodes())
                .map(|p| (p, u.get(p, h)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty grid");
            mass_samples.push(Sample {
                location: Location { t: Some(t), x: Some(grid.coords(node)), h: Some(h), ..Location::default() },
                value: v,
                reference: bound,
                violation: v / bound - 1.0,
            });
        }
    }
    let extra = format!("{grid:?}|{times:?}|{m_bound}|{sources:?}|{settings:?}|{seed}");
    let mass_res = CheckResult::from_samples("mass", tol_mass, &fingerprint_of("mass", spec, &extra), mass_samples)
        .with_metric("row_sum_bound", m_bound);

    let mut pos = Vec::new();
    let mut push_min = |f: &DiscreteField, loc: Location| {
        let scale = field_peak(f).max(f64::MIN_POSITIVE);
        let (i, v) = f.values.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty field");
        pos.push(Sample {
            location: Location { x: Some(grid.coords(i / m)), h: Some(i % m), ..loc },
            value: v,
            reference: scale,
            violation: -v / scale,
        });
    };
    let nodes = sources.iter().map(|s| Ok((node_of(grid, &s.y)?, s.k))).collect::<Result<Vec<_>>>()?;
    let cols = kernel_columns(&prop, &nodes, settings.width(grid), settings.exec)?;
    for (src, per_t) in sources.iter().zip(&cols) {
        for kf in per_t {
            push_min(
                &kf.field,
                Location { t: Some(kf.time()), y: Some(src.y.clone()), k: Some(src.k), ..Location::default() },
            );
        }
    }
    let f = random_field(*grid, m, seed, false);
    let (us, _) = prop.run(&f)?;
    for u in &us {
        push_min(u, Location { t: Some(u.time), ..Location::default() });
    }
    let pos_res = CheckResult::from_samples("positivity", tol_neg, &fingerprint_of("positivity", spec, &extra), pos)
        .with_note("negative parts are relative to the field peak");
    Ok(vec![mass_res, pos_res])
}

/// Classification of one column against the coupling graph.
fn support_samples(kf: &KernelField, predicted: &[bool], t: f64) -> (Vec<Sample>, Vec<Sample>) {
    let m = kf.m();
    let scale = kf.field.max_abs().max(f64::MIN_POSITIVE);
    let (mut null, mut floor) = (Vec::new(), Vec::new());
    for h in 0..m {
        let col = kf.column(h);
        let peak = col.iter().fold(0.0f64, |a, v| a.max(v.abs())) / scale;
        let loc = Location { t: Some(t), y: Some(kf.source.clone()), h: Some(h), k: Some(kf.k), ..Location::default() };
        if predicted[h] {
            let top = col.iter().copied().fold(f64::NEG_INFINITY, f64::max) / scale;
            floor.push(Sample {
                location: loc,
                value: top,
                reference: POSITIVE_FLOOR,
                violation: if top > 0.0 { -top.log10() } else { f64::INFINITY },
            });
        } else {
            null.push(Sample { location: loc, value: peak, reference: NULL_TOL, violation: peak });
        }
    }
    (null, floor)
}

/// Two results for the source `(0, k)`: `support_null` (columns `h ∉ F_k`
/// below `1e−10` of the kernel peak) and `support_floor` (columns `h ∈ F_k`
/// reach `1e−12` of the peak; the violation is `−log₁₀` of the relative
/// column maximum, compared with 12).
pub fn check_support(
    spec: &OperatorSpec,
    grid: &GridSpec,
    k: usize,
    t: f64,
    settings: &SolveSettings,
) -> Result<Vec<CheckResult>> {
    let support = coupling_support(spec, k)?;
    let origin = vec![0.0; spec.dims().d];
    let cols = solve_columns(spec, Variant::P, grid, &[t], &[Source::new(origin, k)], settings)?;
    let predicted: Vec<bool> = (0..spec.dims().m).map(|h| support.contains(h)).collect();
    let (null, floor) = support_samples(&cols[0][0], &predicted, t);
    let extra = format!("{grid:?}|{k}|{t}|{settings:?}");
    let levels = format!("levels {:?}, F = {:?} (0-based)", support.levels, support.f);
    Ok(vec![
        CheckResult::from_samples("support_null", NULL_TOL, &fingerprint_of("support_null", spec, &extra), null)
            .with_note(levels.clone()),
        CheckResult::from_samples(
            "support_floor",
            -POSITIVE_FLOOR.log10(),
            &fingerprint_of("support_floor", spec, &extra),
            floor,
        )
        .with_note(levels),
    ])
}

/// Random off-diagonal sparsity patterns (`2 ≤ m ≤ m_max`, each entry
/// present with probability 0.4): for every pattern and every `k` the
/// numerical support must match the graph prediction. Violation is 1 per
/// mismatched column, so the tolerance is 0.
pub fn check_support_patterns(
    patterns: usize,
    m_max: usize,
    seed: u64,
    grid: &GridSpec,
    t: f64,
    settings: &SolveSettings,
) -> Result<CheckResult> {
    if m_max < 2 {
        return Err(Error::Precondition("patterns need m_max ≥ 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(usize, Vec<bool>)> = (0..patterns)
        .map(|_| {
            let m = rng.gen_range(2..=m_max);
            let pat = (0..m * m).map(|i| i / m != i % m && rng.gen_bool(0.4)).collect();
            (m, pat)
        })
        .collect();
    let per_case = par::try_map(settings.exec, &cases, |(m, pat)| -> Result<Vec<Sample>> {
        let m = *m;
        let spec = sparse_coupling(m, pat)?;
        let mut out = Vec::new();
        let inner = SolveSettings { exec: crate::par::Exec::Sequential, ..*settings };
        for k in 0..m {
            let support = coupling_support_with(m, k, |h, l| pat[h * m + l]);
            let predicted: Vec<bool> = (0..m).map(|h| support.contains(h)).collect();
            let cols = solve_columns(&spec, Variant::P, grid, &[t], &[Source::new(vec![0.0], k)], &inner)?;
            let (null, floor) = support_samples(&cols[0][0], &predicted, t);
            for s in null {
                let bad = !(s.value <= NULL_TOL);
                out.push(Sample { violation: bad as u8 as f64, ..s });
            }
            for s in floor {
                let bad = !(s.value >= POSITIVE_FLOOR);
                out.push(Sample { violation: bad as u8 as f64, ..s });
            }
        }
        Ok(out)
    })?;
    let samples: Vec<Sample> = per_case.into_iter().flatten().collect();
    let fp = fingerprint(&format!("support_patterns|{patterns}|{m_max}|{seed}|{grid:?}|{t}|{settings:?}"));
    let mut res = CheckResult::from_samples("support_patterns", 0.0, &fp, samples);
    for (i, (m, pat)) in cases.iter().enumerate() {
        let edges: Vec<String> =
            (0..m * m).filter(|&j| pat[j]).map(|j| format!("v{}{}", j / m + 1, j % m + 1)).collect();
        res = res.with_note(format!("pattern {i}: m = {m}, nonzero off-diagonal {}", edges.join(" ")));
    }
    Ok(res.with_metric("patterns", patterns as f64))
}

/// `p^{𝒟,P}_hk(t,x,y) = p^{𝒟,P,*}_kh(t,y,x)` at the given `(x, y)` pairs, all
/// `h, k`; errors relative to the peak of the forward column.
pub fn check_duality(
    spec: &OperatorSpec,
    grid: &GridSpec,
    t: f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
    settings: &SolveSettings,
    tol: f64,
) -> Result<CheckResult> {
    let m = spec.dims().m;
    let fwd_src: Vec<Source> = pairs.iter().flat_map(|(_, y)| (0..m).map(move |k| Source::new(y.clone(), k))).collect();
    let adj_src: Vec<Source> = pairs.iter().flat_map(|(x, _)| (0..m).map(move |h| Source::new(x.clone(), h))).collect();
    let fwd = solve_columns(spec, Variant::P, grid, &[t], &fwd_src, settings)?;
    let adj = solve_columns(spec, Variant::PAdjoint, grid, &[t], &adj_src, settings)?;
    let mut samples = Vec::new();
    for (pi, (x, y)) in pairs.iter().enumerate() {
        let (xn, yn) = (node_of(grid, x)?, node_of(grid, y)?);
        for k in 0..m {
            let f = &fwd[pi * m + k][0];
            let scale = f.field.max_abs().max(f64::MIN_POSITIVE);
            for h in 0..m {
                let a = &adj[pi * m + h][0];
                let (p, q) = (f.get(xn, h), a.get(yn, k));
                samples.push(Sample {
                    location: Location { t: Some(t), x: Some(x.clone()), y: Some(y.clone()), h: Some(h), k: Some(k) },
                    value: p,
                    reference: q,
                    violation: (p - q).abs() / scale,
                });
            }
        }
    }
    let fp = fingerprint_of("duality", spec, &format!("{grid:?}|{t}|{pairs:?}|{settings:?}"));
    Ok(CheckResult::from_samples("duality", tol, &fp, samples))
}

/// `T(t+s)f = T(t)T(s)f` for random `f`: one uninterrupted run to `t+s`
/// against a run stopped at `s` and restarted. When `dt` does not divide
/// `s` the step sequences differ and the tolerance becomes
/// `max(tol, 2·e)`, with `e` the Richardson estimate of the temporal error.
#[allow(clippy::too_many_arguments)]
pub fn check_chapman_kolmogorov(
    spec: &OperatorSpec,
    variant: Variant,
    grid: &GridSpec,
    t: f64,
    s: f64,
    settings: &SolveSettings,
    seed: u64,
    tol: f64,
) -> Result<CheckResult> {
    if !(t > 0.0 && s >= 0.0) {
        return Err(Error::Precondition(format!("need t > 0 and s ≥ 0, got t = {t}, s = {s}")));
    }
    let m = spec.dims().m;
    let op = assemble(spec, variant, grid)?;
    let dt = settings.dt_for(&[t], grid.mesh);
    let f = random_field(*grid, m, seed, true);
    let norm = f.max_abs().max(f64::MIN_POSITIVE);
    let run = |times: &[f64], dt: f64, f: &DiscreteField| -> Result<DiscreteField> {
        let (mut v, _) = Propagator::new(&op, settings.theta, dt, times)?.run(f)?;
        Ok(v.pop().expect("one output"))
    };
    let direct = run(&[t + s], dt, &f)?;
    let mid = if s > 0.0 { run(&[s], dt, &f)? } else { f.clone() };
    let split = run(&[t], dt, &mid)?;
    let steps = s / dt;
    let aligned = (steps - steps.round()).abs() < 1e-9;
    let mut tolerance = tol;
    let mut notes = Vec::new();
    if !aligned {
        let fine = run(&[t + s], dt / 2.0, &f)?;
        let e = direct.values.iter().zip(&fine.values).fold(0.0f64, |a, (p, q)| a.max((p - q).abs())) / norm;
        tolerance = tol.max(2.0 * e);
        notes.push(format!("dt = {dt} does not divide s = {s}; temporal error estimate {e:.3e}"));
    }
    let (i, diff) = direct
        .values
        .iter()
        .zip(&split.values)
        .map(|(a, b)| (a - b).abs() / norm)
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty grid");
    let sample = Sample {
        location: Location { t: Some(t + s), x: Some(grid.coords(i / m)), h: Some(i % m), ..Location::default() },
        value: direct.values[i],
        reference: split.values[i],
        violation: diff,
    };
    let fp = fingerprint_of("chapman_kolmogorov", spec, &format!("{variant}|{grid:?}|{t}|{s}|{settings:?}|{seed}"));
    let mut res = CheckResult::from_samples("chapman_kolmogorov", tolerance, &fp, vec![sample]);
    res.notes = notes;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn g(r: f64, h: f64) -> GridSpec {
        GridSpec::new(1, r, h).unwrap()
    }

    #[test]
    fn domination_on_coupled_constant_potential() {
        let spec = presets::coupled_constant().operator();
        let src = [Source::new(vec![0.0], 0), Source::new(vec![0.5], 1)];
        let r = check_domination(&spec, &[g(4.0, 0.125)], &[0.2, 0.5], &src, &SolveSettings::positivity(), 1e-9, 7)
            .unwrap();
        assert!(r.passed(), "{}", r.line());
        // V = V^P gives identical kernels
        let same = presets::constant_potential(&[vec![1.0, -0.5], vec![-0.5, 1.0]]).unwrap().operator();
        let r =
            check_domination(&same, &[g(4.0, 0.125)], &[0.3], &src[..1], &SolveSettings::positivity(), 0.0, 1).unwrap();
        assert!(r.worst <= 1e-15, "{}", r.worst);
    }

    #[test]
    fn monotone_heat_ladder() {
        let spec = presets::heat().operator();
        let src = [Source::new(vec![0.0], 0)];
        let pts = vec![vec![0.0], vec![1.0]];
        let s = SolveSettings::positivity();
        let r = check_monotone_in_R(&spec, &[2.0, 4.0, 8.0], 0.125, 0.5, &pts, &src, &s, 1e-8).unwrap();
        assert!(r.passed(), "{}", r.line());
        assert!(r.metric("increment_0").unwrap() > 0.0);
        assert!(r.metric("shrink_0").unwrap() > 4.0);
        let one = check_monotone_in_R(&spec, &[2.0], 0.125, 0.5, &pts, &src, &s, 1e-8).unwrap();
        assert!(one.passed() && one.samples.is_empty());
    }

    #[test]
    fn mass_and_positivity_heat() {
        let spec = presets::heat().operator();
        let src = [Source::new(vec![0.0], 0)];
        let res = check_mass_and_positivity(
            &spec,
            &g(4.0, 0.125),
            &[0.1, 0.5],
            0.0,
            &src,
            &SolveSettings::positivity(),
            0.01,
            1e-8,
            3,
        )
        .unwrap();
        assert!(res.iter().all(CheckResult::passed));
        // a too optimistic M fails
        let res = check_mass_and_positivity(
            &spec,
            &g(4.0, 0.125),
            &[0.5],
            1.0,
            &src,
            &SolveSettings::positivity(),
            0.01,
            1e-8,
            3,
        )
        .unwrap();
        assert!(!res[0].passed());
    }

    #[test]
    fn chain_support() {
        let spec = presets::chain3().operator();
        let s = SolveSettings::positivity();
        let top = check_support(&spec, &g(4.0, 0.125), 2, 0.5, &s).unwrap();
        assert!(top.iter().all(CheckResult::passed));
        assert_eq!(top[0].samples.len(), 2);
        let bottom = check_support(&spec, &g(4.0, 0.125), 0, 0.5, &s).unwrap();
        assert!(bottom.iter().all(CheckResult::passed));
        assert_eq!(bottom[1].samples.len(), 3);
        let pats = check_support_patterns(4, 4, 11, &g(3.0, 0.125), 0.3, &s).unwrap();
        assert!(pats.passed(), "{}", pats.line());
    }

    #[test]
    fn duality_and_semigroup_law() {
        let spec = presets::coupled_constant().operator();
        let pairs = vec![(vec![0.0], vec![0.5]), (vec![-0.25], vec![0.25])];
        let r = check_duality(&spec, &g(4.0, 0.0625), 0.5, &pairs, &SolveSettings::positivity(), 0.02).unwrap();
        assert!(r.passed(), "{}", r.line());
        let s = SolveSettings { dt: Some(0.01), ..SolveSettings::positivity() };
        let ck = check_chapman_kolmogorov(&spec, Variant::P, &g(3.0, 0.125), 0.2, 0.1, &s, 5, 1e-8).unwrap();
        assert!(ck.passed(), "{}", ck.line());
        let ck0 = check_chapman_kolmogorov(&spec, Variant::Plain, &g(3.0, 0.125), 0.2, 0.0, &s, 5, 1e-12).unwrap();
        assert!(ck0.passed() && ck0.worst == 0.0);
        let off = check_chapman_kolmogorov(&spec, Variant::P, &g(3.0, 0.125), 0.2, 0.013, &s, 5, 1e-8).unwrap();
        assert!(off.passed() && off.tolerance > 1e-8, "{}", off.line());
    }
}
