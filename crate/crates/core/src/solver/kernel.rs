use super::assemble::DiscreteOperator;
use super::stepping::Propagator;
use super::{DiscreteField, GridSpec};
use crate::coefficients::Variant;
use crate::par::{self, Exec};
use crate::{Error, Result};

/// Discrete approximation of `x ↦ p_hk(t, x, y)`, `h = 1..m`, for one source
/// `(y, k)`. For the adjoint variant the source is `x` and the columns are
/// `y ↦ p*_{hk}(t, y, x) = p_{kh}(t, x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    pub source_node: usize,
    pub source: Vec<f64>,
    pub k: usize,
    pub variant: Variant,
    pub mollifier_width: f64,
    /// node-major values; `field.time` is the kernel time
    pub field: DiscreteField,
}

impl KernelField {
    pub fn grid(&self) -> &GridSpec {
        &self.field.grid
    }

    pub fn m(&self) -> usize {
        self.field.m
    }

    pub fn time(&self) -> f64 {
        self.field.time
    }

    pub fn get(&self, node: usize, h: usize) -> f64 {
        self.field.get(node, h)
    }

    pub fn column(&self, h: usize) -> Vec<f64> {
        self.field.component(h)
    }

    /// Discrete L¹ mass of `Σ_h |column_h|`.
    pub fn total_mass(&self) -> f64 {
        (0..self.m()).map(|h| self.field.l1(h)).sum()
    }
}

/// Normalized discrete Gaussian of width `width` centred at node `y`
/// (unit discrete mass; truncated beyond 8 widths).
pub fn mollifier(grid: &GridSpec, y: usize, width: f64) -> Result<Vec<f64>> {
    if y >= grid.num_nodes() {
        return Err(Error::Precondition(format!("source node {y} is not an interior node")));
    }
    if !(width >= grid.mesh * (1.0 - 1e-12)) || !width.is_finite() {
        return Err(Error::Precondition(format!("mollifier width {width} is below the mesh size {}", grid.mesh)));
    }
    let yc = grid.coords(y);
    let cut = (8.0 * width) * (8.0 * width);
    let mut w: Vec<f64> = (0..grid.num_nodes())
        .map(|p| {
            let x = grid.coords(p);
            let r2: f64 = x.iter().zip(&yc).map(|(a, b)| (a - b) * (a - b)).sum();
            if r2 > cut {
                0.0
            } else {
                (-r2 / (2.0 * width * width)).exp()
            }
        })
        .collect();
    let mass: f64 = w.iter().sum::<f64>() * grid.cell_volume();
    for v in &mut w {
        *v /= mass;
    }
    Ok(w)
}

fn initial_datum(grid: &GridSpec, m: usize, y: usize, k: usize, width: f64) -> Result<DiscreteField> {
    if k >= m {
        return Err(Error::Dimension(format!("component {k} out of range (m = {m})")));
    }
    let moll = mollifier(grid, y, width)?;
    let mut f = DiscreteField::zeros(*grid, m);
    for (p, v) in moll.into_iter().enumerate() {
        f.values[p * m + k] = v;
    }
    Ok(f)
}

/// Evolves the mollified delta at `(y, k)` up to `t`.
pub fn kernel_column(
    op: &DiscreteOperator,
    y: usize,
    k: usize,
    t: f64,
    dt: f64,
    theta: f64,
    mollifier_width: f64,
) -> Result<KernelField> {
    let prop = Propagator::new(op, theta, dt, &[t])?;
    let mut v = kernel_snapshots(&prop, y, k, mollifier_width)?;
    Ok(v.pop().expect("one output time"))
}

/// Kernel columns from one source at every output time of the propagator.
pub fn kernel_snapshots(prop: &Propagator<'_>, y: usize, k: usize, mollifier_width: f64) -> Result<Vec<KernelField>> {
    let op = prop.operator();
    let f = initial_datum(&op.grid, op.m, y, k, mollifier_width)?;
    let (fields, _) = prop.run(&f)?;
    let source = op.grid.coords(y);
    Ok(fields
        .into_iter()
        .map(|field| KernelField {
            source_node: y,
            source: source.clone(),
            k,
            variant: op.variant,
            mollifier_width,
            field,
        })
        .collect())
}

/// Kernel snapshots for many `(node, component)` sources; one entry per
/// source, each holding one field per output time.
pub fn kernel_columns(
    prop: &Propagator<'_>,
    sources: &[(usize, usize)],
    mollifier_width: f64,
    exec: Exec,
) -> Result<Vec<Vec<KernelField>>> {
    par::try_map(exec, sources, |&(y, k)| kernel_snapshots(prop, y, k, mollifier_width))
}

/// `x ↦ Σ_k Σ_y f_k(y) p_hk(t, x, y) h^d` from an ensemble of kernel fields.
/// Every `(y, k)` with `f_k(y) ≠ 0` must be among the sources.
pub fn apply_kernel_to_function(ensemble: &[KernelField], f: &DiscreteField) -> Result<DiscreteField> {
    let first = ensemble.first().ok_or_else(|| Error::GridMismatch("empty kernel ensemble".into()))?;
    let mut out = DiscreteField::zeros(f.grid, f.m);
    out.check_compatible(&first.field)?;
    let nodes = f.grid.num_nodes();
    let mut seen = vec![false; nodes * f.m];
    for kf in ensemble {
        kf.field.check_compatible(&first.field)?;
        if kf.time() != first.time() || kf.variant != first.variant {
            return Err(Error::GridMismatch("ensemble mixes times or variants".into()));
        }
        let idx = kf.source_node * f.m + kf.k;
        if seen[idx] {
            continue;
        }
        seen[idx] = true;
        let c = f.values[idx] * f.grid.cell_volume();
        if c != 0.0 {
            for (o, v) in out.values.iter_mut().zip(&kf.field.values) {
                *o += c * v;
            }
        }
    }
    if let Some(miss) = (0..nodes * f.m).find(|&i| f.values[i] != 0.0 && !seen[i]) {
        return Err(Error::GridMismatch(format!(
            "no kernel column for node {} component {}",
            miss / f.m,
            miss % f.m + 1
        )));
    }
    out.time = first.time();
    Ok(out)
}

/// Per component `h`: `Σ_z g(z)·column_h(z)·h^d`, the quadrature of `g`
/// against the kernel in its free variable.
pub fn integrate_against(kf: &KernelField, g: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let grid = kf.grid();
    let m = kf.m();
    let mut acc = vec![0.0; m];
    for p in 0..grid.num_nodes() {
        let w = g(&grid.coords(p));
        for (h, a) in acc.iter_mut().enumerate() {
            *a += w * kf.get(p, h);
        }
    }
    acc.iter().map(|a| a * grid.cell_volume()).collect()
}

#[cfg(test)]
mod tests {
    use super::super::assemble;
    use super::*;
    use crate::coefficients::{Family, FamilyParams, OperatorSpec};

    fn heat(d: usize) -> OperatorSpec {
        let z = vec![vec![0.0]];
        Family::polynomial(FamilyParams::isotropic(d, 1.0, 0.0, 0.0, 0.0, &z, &z).unwrap()).operator()
    }

    #[test]
    fn mollifier_has_unit_mass() {
        let g = GridSpec::new(2, 2.0, 0.125).unwrap();
        let w = mollifier(&g, g.center(), 0.25).unwrap();
        assert!((w.iter().sum::<f64>() * g.cell_volume() - 1.0).abs() < 1e-14);
        assert!(mollifier(&g, g.center(), 0.1).is_err());
    }

    #[test]
    fn heat_column_mass_and_reciprocity() {
        let grid = GridSpec::new(1, 4.0, 0.125).unwrap();
        let op = assemble(&heat(1), Variant::P, &grid).unwrap();
        let prop = Propagator::new(&op, 1.0, 0.01, &[0.2]).unwrap();
        let sources: Vec<(usize, usize)> = (0..grid.num_nodes()).map(|p| (p, 0)).collect();
        let cols = kernel_columns(&prop, &sources, 0.25, Exec::Parallel).unwrap();
        let ens: Vec<KernelField> = cols.into_iter().map(|mut v| v.remove(0)).collect();
        let c = grid.center();
        let mass = integrate_against(&ens[c], |_| 1.0)[0];
        assert!(mass < 1.0 && mass > 0.99, "{mass}");
        // a mollified delta at y recovers the column at y
        let moll = mollifier(&grid, c, 0.25).unwrap();
        let f = DiscreteField { grid, m: 1, values: moll, time: 0.0 };
        let applied = apply_kernel_to_function(&ens, &f).unwrap();
        let direct = kernel_column(&op, c, 0, 0.2, 0.01, 1.0, 0.25).unwrap();
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for p in 0..grid.num_nodes() {
            num = num.max((applied.values[p] - direct.field.values[p]).abs());
            den = den.max(direct.field.values[p]);
        }
        // applied = direct smoothed once more by the mollifier
        assert!(num / den < 0.2, "{}", num / den);
        assert!(apply_kernel_to_function(&ens[..3], &f).is_err());
    }
}
