use super::assemble::{DiscreteOperator, LinearSolverKind};
use super::banded::BandedLu;
use super::iterative::{backward_error, bicgstab, Ilu0};
use super::sparse::CsrMatrix;
use super::DiscreteField;
use crate::{Error, Result};

/// Target normwise backward error of every implicit solve.
pub const SOLVE_TOL: f64 = 1e-10;
const MAX_REFINE: usize = 3;
const MAX_KRYLOV: usize = 2000;

/// `min(t_final/64, h)`
pub fn default_dt(t_final: f64, mesh: f64) -> f64 {
    (t_final / 64.0).min(mesh)
}

/// Diagnostics of one evolution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolveReport {
    pub steps: usize,
    /// Length of the final shortened step when `dt` does not divide the horizon.
    pub partial_steps: Vec<f64>,
    pub max_iterations: usize,
    pub max_backward_error: f64,
}

enum Factor {
    Banded(BandedLu),
    Iterative(Ilu0),
}

struct Stepper {
    dt: f64,
    implicit: CsrMatrix,
    implicit_norm: f64,
    explicit: Option<CsrMatrix>,
    factor: Factor,
}

impl Stepper {
    fn new(op: &DiscreteOperator, dt: f64, theta: f64) -> Result<Self> {
        let implicit = op.matrix.shifted(1.0, -theta * dt);
        let explicit = if theta < 1.0 { Some(op.matrix.shifted(1.0, (1.0 - theta) * dt)) } else { None };
        let factor = match op.resolved_solver() {
            LinearSolverKind::Iterative => Factor::Iterative(Ilu0::new(&implicit)?),
            _ => Factor::Banded(BandedLu::factor(&implicit)?),
        };
        Ok(Self { dt, implicit_norm: implicit.norm_inf(), implicit, explicit, factor })
    }

    /// One θ-step, in place. Returns (iterations, backward error).
    fn step(&self, u: &mut [f64], rhs: &mut [f64], scratch: &mut [f64]) -> Result<(usize, f64)> {
        match &self.explicit {
            Some(e) => e.matvec(u, rhs),
            None => rhs.copy_from_slice(u),
        }
        let (its, err) = match &self.factor {
            Factor::Banded(lu) => {
                u.copy_from_slice(rhs);
                lu.solve_in_place(u);
                let mut err = backward_error(&self.implicit, self.implicit_norm, u, rhs, scratch);
                let mut its = 0;
                while err > SOLVE_TOL && its < MAX_REFINE {
                    // iterative refinement
                    for (s, r) in scratch.iter_mut().zip(rhs.iter()) {
                        *s = r - *s;
                    }
                    lu.solve_in_place(scratch);
                    for (x, c) in u.iter_mut().zip(scratch.iter()) {
                        *x += c;
                    }
                    err = backward_error(&self.implicit, self.implicit_norm, u, rhs, scratch);
                    its += 1;
                }
                (its, err)
            }
            Factor::Iterative(pre) => {
                let its = bicgstab(&self.implicit, self.implicit_norm, pre, rhs, u, SOLVE_TOL, MAX_KRYLOV)?;
                (its, backward_error(&self.implicit, self.implicit_norm, u, rhs, scratch))
            }
        };
        if !(err <= SOLVE_TOL) || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonConvergence { iterations: its, residual: err });
        }
        Ok((its, err))
    }
}

struct Segment {
    stepper: usize,
    count: usize,
    partial: bool,
}

/// θ-method propagator with factorizations prepared for a fixed list of
/// output times. Immutable once built, so one instance can drive many
/// evolutions concurrently.
pub struct Propagator<'a> {
    op: &'a DiscreteOperator,
    times: Vec<f64>,
    /// segments to run before reaching each output time
    schedule: Vec<Vec<Segment>>,
    steppers: Vec<Stepper>,
}

impl<'a> Propagator<'a> {
    /// `times` must be nonnegative and nondecreasing.
    pub fn new(op: &'a DiscreteOperator, theta: f64, dt: f64, times: &[f64]) -> Result<Self> {
        if !(0.5..=1.0).contains(&theta) {
            return Err(Error::Precondition(format!("θ must lie in [1/2, 1], got {theta}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Precondition(format!("time step must be positive, got {dt}")));
        }
        if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Precondition(format!(
                "output times must be finite, nonnegative and sorted, got {times:?}"
            )));
        }
        let mut steppers: Vec<Stepper> = Vec::new();
        let stepper_for = |dt: f64, steppers: &mut Vec<Stepper>| -> Result<usize> {
            if let Some(i) = steppers.iter().position(|s| s.dt == dt) {
                return Ok(i);
            }
            steppers.push(Stepper::new(op, dt, theta)?);
            Ok(steppers.len() - 1)
        };
        let mut schedule = Vec::with_capacity(times.len());
        let mut now = 0.0;
        for &t in times {
            let span = t - now;
            let mut segs = Vec::new();
            let full = (span / dt + 1e-9).floor() as usize;
            if full > 0 {
                segs.push(Segment { stepper: stepper_for(dt, &mut steppers)?, count: full, partial: false });
            }
            let rest = span - full as f64 * dt;
            if rest > 1e-9 * dt {
                segs.push(Segment { stepper: stepper_for(rest, &mut steppers)?, count: 1, partial: true });
            }
            schedule.push(segs);
            now = t;
        }
        Ok(Self { op, times: times.to_vec(), schedule, steppers })
    }

    pub fn operator(&self) -> &DiscreteOperator {
        self.op
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Evolves `f`, returning the field at every output time.
    pub fn run(&self, f: &DiscreteField) -> Result<(Vec<DiscreteField>, EvolveReport)> {
        if !self.op.grid.same_as(&f.grid) || f.m != self.op.m {
            return Err(Error::GridMismatch(format!(
                "initial datum on {:?} (m = {}) does not match operator grid {:?} (m = {})",
                f.grid, f.m, self.op.grid, self.op.m
            )));
        }
        let n = f.values.len();
        let mut u = f.values.clone();
        let mut rhs = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        let mut report = EvolveReport::default();
        let mut out = Vec::with_capacity(self.times.len());
        for (segs, &t) in self.schedule.iter().zip(&self.times) {
            for seg in segs {
                let st = &self.steppers[seg.stepper];
                if seg.partial {
                    report.partial_steps.push(st.dt);
                }
                for _ in 0..seg.count {
                    let (its, err) = st.step(&mut u, &mut rhs, &mut scratch)?;
                    report.steps += 1;
                    report.max_iterations = report.max_iterations.max(its);
                    report.max_backward_error = report.max_backward_error.max(err);
                }
            }
            out.push(DiscreteField { grid: f.grid, m: f.m, values: u.clone(), time: t });
        }
        Ok((out, report))
    }
}

/// Approximates `T(t_final) f` with the θ-method.
pub fn evolve(op: &DiscreteOperator, f: &DiscreteField, t_final: f64, dt: f64, theta: f64) -> Result<DiscreteField> {
    evolve_with_report(op, f, t_final, dt, theta).map(|(u, _)| u)
}

pub fn evolve_with_report(
    op: &DiscreteOperator,
    f: &DiscreteField,
    t_final: f64,
    dt: f64,
    theta: f64,
) -> Result<(DiscreteField, EvolveReport)> {
    let prop = Propagator::new(op, theta, dt, &[t_final])?;
    let (mut v, report) = prop.run(f)?;
    Ok((v.pop().expect("one output time"), report))
}

#[cfg(test)]
mod tests {
    use super::super::{assemble, GridSpec};
    use super::*;
    use crate::coefficients::{OperatorSpec, Variant};

    fn constant_system(d: usize, v: Vec<Vec<f64>>) -> OperatorSpec {
        let m = v.len();
        let dims = crate::coefficients::SystemDims::new(d, m).unwrap();
        let flat: Vec<f64> = v.into_iter().flatten().collect();
        OperatorSpec::new(crate::coefficients::FnCoefficients::new(
            dims,
            |_, x: &[f64], out: &mut [f64]| {
                out.fill(0.0);
                for i in 0..x.len() {
                    out[i * x.len() + i] = 1.0;
                }
            },
            |_, _: &[f64], out: &mut [f64]| out.fill(0.0),
            move |_: &[f64], out: &mut [f64]| out.copy_from_slice(&flat),
            vec![true; m * m],
        ))
    }

    #[test]
    fn zero_stays_zero_and_decay_matches() {
        let spec = constant_system(1, vec![vec![0.7]]);
        let grid = GridSpec::new(1, 16.0, 0.125).unwrap();
        let op = assemble(&spec, Variant::Plain, &grid).unwrap();
        let z = DiscreteField::zeros(grid, 1);
        let u = evolve(&op, &z, 0.5, 0.01, 0.5).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(u.time, 0.5);
        let one = DiscreteField::from_fn(grid, 1, |_, _| 1.0).unwrap();
        let u = evolve(&op, &one, 0.5, 0.01, 0.5).unwrap();
        assert!((u.get(grid.center(), 0) - (-0.35f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn partial_step_is_recorded() {
        let spec = constant_system(1, vec![vec![1.0]]);
        let grid = GridSpec::new(1, 4.0, 0.25).unwrap();
        let op = assemble(&spec, Variant::Plain, &grid).unwrap();
        let one = DiscreteField::from_fn(grid, 1, |_, _| 1.0).unwrap();
        let (_, rep) = evolve_with_report(&op, &one, 0.25, 0.1, 1.0).unwrap();
        assert_eq!(rep.steps, 3);
        assert_eq!(rep.partial_steps.len(), 1);
        assert!((rep.partial_steps[0] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn coupled_constant_potential_2d_iterative() {
        let spec = constant_system(2, vec![vec![2.0, 3.0], vec![-1.0, 4.0]]);
        let grid = GridSpec::new(2, 8.0, 0.25).unwrap();
        let op = assemble(&spec, Variant::Plain, &grid).unwrap();
        let f = DiscreteField::from_fn(grid, 2, |_, h| if h == 0 { 1.0 } else { 0.5 }).unwrap();
        let u = evolve(&op, &f, 0.3, 0.01, 0.5).unwrap();
        // e^{-tV} v by a fine explicit reference
        let mut w = [1.0, 0.5];
        let n = 30000;
        let dt = 0.3 / n as f64;
        for _ in 0..n {
            let k1 = [-(2.0 * w[0] + 3.0 * w[1]), -(-w[0] + 4.0 * w[1])];
            let mid = [w[0] + 0.5 * dt * k1[0], w[1] + 0.5 * dt * k1[1]];
            let k2 = [-(2.0 * mid[0] + 3.0 * mid[1]), -(-mid[0] + 4.0 * mid[1])];
            w = [w[0] + dt * k2[0], w[1] + dt * k2[1]];
        }
        let c = grid.center();
        assert!((u.get(c, 0) - w[0]).abs() < 1e-4, "{} vs {}", u.get(c, 0), w[0]);
        assert!((u.get(c, 1) - w[1]).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_theta() {
        let spec = constant_system(1, vec![vec![1.0]]);
        let grid = GridSpec::new(1, 1.0, 0.25).unwrap();
        let op = assemble(&spec, Variant::Plain, &grid).unwrap();
        assert!(Propagator::new(&op, 0.3, 0.1, &[1.0]).is_err());
        assert!(Propagator::new(&op, 1.0, 0.0, &[1.0]).is_err());
    }
}
