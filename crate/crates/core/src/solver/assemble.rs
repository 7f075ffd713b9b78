use super::sparse::CsrMatrix;
use super::GridSpec;
use crate::coefficients::{min_sym_eigenvalue, OperatorSpec, Variant};
use crate::{Error, Result};

/// How the implicit systems are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolverKind {
    /// Banded LU for d = 1, ILU(0)-BiCGSTAB for d = 2.
    #[default]
    Auto,
    Banded,
    Iterative,
}

/// Assembled discrete operator `A ≈ 𝓐` (or its P / adjoint variant) on a grid.
///
/// Unknowns are node-major: index `node·m + h`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: GridSpec,
    pub m: usize,
    pub variant: Variant,
    pub matrix: CsrMatrix,
    pub solver: LinearSolverKind,
}

impl DiscreteOperator {
    pub fn unknowns(&self) -> usize {
        self.matrix.n
    }

    pub fn with_solver(mut self, solver: LinearSolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub(crate) fn resolved_solver(&self) -> LinearSolverKind {
        match self.solver {
            LinearSolverKind::Auto if self.grid.d == 1 => LinearSolverKind::Banded,
            LinearSolverKind::Auto => LinearSolverKind::Iterative,
            s => s,
        }
    }
}

/// Assembles the variant of the operator on `grid`.
///
/// Diffusion is in flux form with `Q` at midpoints (mixed derivatives by the
/// centered four-point stencil), drift is centered with per-node upwinding
/// where the cell Péclet number exceeds 1, and the potential enters as an m×m
/// block per node. The adjoint variant is the exact transpose of the P matrix.
pub fn assemble(spec: &OperatorSpec, variant: Variant, grid: &GridSpec) -> Result<DiscreteOperator> {
    let dims = spec.dims();
    if dims.d != grid.d {
        return Err(Error::Dimension(format!("operator has d = {}, grid has d = {}", dims.d, grid.d)));
    }
    let forward = if variant == Variant::Plain { Variant::Plain } else { Variant::P };
    let matrix = assemble_forward(spec, forward, grid)?;
    let matrix = if variant == Variant::PAdjoint { matrix.transpose() } else { matrix };
    Ok(DiscreteOperator { grid: *grid, m: dims.m, variant, matrix, solver: LinearSolverKind::Auto })
}

fn assemble_forward(spec: &OperatorSpec, variant: Variant, grid: &GridSpec) -> Result<CsrMatrix> {
    let d = grid.d;
    let m = spec.dims().m;
    let n = grid.nodes_per_axis();
    let hm = grid.mesh;
    let coef = spec.coefficients();
    let nodes = grid.num_nodes();
    let mut trip = Vec::with_capacity(nodes * m * (if d == 1 { 3 + m } else { 9 + m }));
    let mut qbuf = vec![0.0; d * d];
    let diffusion_at = |h: usize, x: &[f64], out: &mut [f64]| -> Result<()> {
        coef.diffusion(h, x, out);
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteCoefficient { what: "diffusion", h, x: x.to_vec() })
        }
    };
    let shift = |idx: [usize; 2], a: usize, s: isize| -> Option<usize> {
        let v = idx[a] as isize + s;
        if v < 0 || v >= n as isize {
            None
        } else {
            let mut j = idx;
            j[a] = v as usize;
            Some(grid.node_of(j))
        }
    };
    for node in 0..nodes {
        let x = grid.coords(node);
        let mi = grid.multi_index(node);
        let v = spec.potential(&x, variant == Variant::P)?;
        for h in 0..m {
            let row = node * m + h;
            let loc = spec.local(h, &x)?;
            if min_sym_eigenvalue(&loc.q, d) <= 0.0 {
                return Err(Error::NonElliptic { h, x });
            }
            let mut diag = 0.0;
            let mut xm = x.clone();
            for a in 0..d {
                // q_aa at the two midpoints
                let mut flux = [0.0; 2];
                for (side, s) in [-0.5, 0.5].into_iter().enumerate() {
                    xm[a] = x[a] + s * hm;
                    diffusion_at(h, &xm, &mut qbuf)?;
                    flux[side] = qbuf[a * d + a] / (hm * hm);
                }
                xm[a] = x[a];
                diag -= flux[0] + flux[1];
                if let Some(p) = shift(mi, a, -1) {
                    trip.push((row, p * m + h, flux[0]));
                }
                if let Some(p) = shift(mi, a, 1) {
                    trip.push((row, p * m + h, flux[1]));
                }
                // drift
                let b = loc.b[a];
                let peclet = b.abs() * hm / (2.0 * loc.q[a * d + a]);
                if peclet <= 1.0 {
                    let c = b / (2.0 * hm);
                    if let Some(p) = shift(mi, a, 1) {
                        trip.push((row, p * m + h, c));
                    }
                    if let Some(p) = shift(mi, a, -1) {
                        trip.push((row, p * m + h, -c));
                    }
                } else {
                    let c = b.abs() / hm;
                    diag -= c;
                    if let Some(p) = shift(mi, a, if b > 0.0 { 1 } else { -1 }) {
                        trip.push((row, p * m + h, c));
                    }
                }
            }
            // mixed derivatives D_a(q_ac D_c u), a ≠ c
            if d == 2 {
                for a in 0..d {
                    let c = 1 - a;
                    for s in [-1isize, 1] {
                        xm[a] = x[a] + s as f64 * hm;
                        diffusion_at(h, &xm, &mut qbuf)?;
                        xm[a] = x[a];
                        let w = s as f64 * qbuf[a * d + c] / (4.0 * hm * hm);
                        if w == 0.0 {
                            continue;
                        }
                        if let Some(pa) = shift(mi, a, s) {
                            let ia = grid.multi_index(pa);
                            if let Some(p) = shift(ia, c, 1) {
                                trip.push((row, p * m + h, w));
                            }
                            if let Some(p) = shift(ia, c, -1) {
                                trip.push((row, p * m + h, -w));
                            }
                        }
                    }
                }
            }
            trip.push((row, row, diag));
            for k in 0..m {
                let e = v[h * m + k];
                if e != 0.0 {
                    trip.push((row, node * m + k, -e));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(nodes * m, trip))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{FieldJet, FnCoefficients, SystemDims};

    fn scalar(d: usize, q: fn(&[f64]) -> f64, b: fn(&[f64]) -> f64) -> OperatorSpec {
        let dims = SystemDims::new(d, 1).unwrap();
        OperatorSpec::new(FnCoefficients::new(
            dims,
            move |_, x: &[f64], out: &mut [f64]| {
                out.fill(0.0);
                for i in 0..x.len() {
                    out[i * x.len() + i] = q(x);
                }
            },
            move |_, x: &[f64], out: &mut [f64]| {
                out.fill(b(x));
            },
            |_: &[f64], out: &mut [f64]| out.fill(0.0),
            vec![true],
        ))
    }

    #[test]
    fn textbook_stencil() {
        let spec = scalar(1, |_| 1.0, |_| 0.0);
        let grid = GridSpec::new(1, 1.0, 0.5).unwrap();
        let a = assemble(&spec, Variant::Plain, &grid).unwrap();
        assert_eq!(a.matrix.get(1, 0), 4.0);
        assert_eq!(a.matrix.get(1, 1), -8.0);
        assert_eq!(a.matrix.get(1, 2), 4.0);
        assert_eq!(a.matrix.get(0, 2), 0.0);
    }

    #[test]
    fn variable_diffusion_rows_sum_to_zero() {
        let spec = scalar(1, |x| 1.0 + x[0] * x[0], |_| 0.0);
        let grid = GridSpec::new(1, 2.0, 0.25).unwrap();
        let a = assemble(&spec, Variant::Plain, &grid).unwrap();
        let x = grid.coords(3)[0];
        assert_eq!(a.matrix.get(3, 2), (1.0 + (x - 0.125).powi(2)) * 16.0);
        for i in 1..grid.num_nodes() - 1 {
            let s: f64 = a.matrix.row(i).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-12);
        }
        // symmetric when b = 0
        let t = a.matrix.transpose();
        assert_eq!(t, a.matrix);
    }

    #[test]
    fn upwinding_keeps_off_diagonals_nonnegative() {
        let spec = scalar(1, |_| 1.0, |x| -x[0] * x[0] * x[0]);
        let grid = GridSpec::new(1, 4.0, 0.125).unwrap();
        let a = assemble(&spec, Variant::P, &grid).unwrap();
        for i in 0..a.unknowns() {
            for (j, v) in a.matrix.row(i) {
                if i != j {
                    assert!(v >= 0.0, "entry ({i},{j}) = {v}");
                }
            }
        }
    }

    #[test]
    fn consistency_with_pointwise_operator_2d() {
        let dims = SystemDims::new(2, 1).unwrap();
        let spec = OperatorSpec::new(FnCoefficients::new(
            dims,
            |_, x: &[f64], out: &mut [f64]| {
                out[0] = 1.0 + 0.1 * x[0] * x[0];
                out[1] = 0.2 * x[1];
                out[2] = 0.2 * x[1];
                out[3] = 1.5;
            },
            |_, x: &[f64], out: &mut [f64]| {
                out[0] = 0.3 * x[1];
                out[1] = -0.2;
            },
            |_: &[f64], out: &mut [f64]| out[0] = 0.5,
            vec![true],
        ));
        let u = |x: &[f64]| (0.7 * x[0]).sin() * (0.4 * x[1]).cos() + 0.1 * x[0] * x[1];
        let x0 = [0.5, -0.5];
        let mut errs = Vec::new();
        for variant in [Variant::P, Variant::PAdjoint] {
            for hm in [0.125, 0.0625] {
                let grid = GridSpec::new(2, 2.0, hm).unwrap();
                let a = assemble(&spec, variant, &grid).unwrap();
                let uv: Vec<f64> = (0..grid.num_nodes()).map(|p| u(&grid.coords(p))).collect();
                let mut au = vec![0.0; uv.len()];
                a.matrix.matvec(&uv, &mut au);
                let p = grid.node_at(&x0).unwrap();
                let mut jet = FieldJet::zeros(dims);
                let (s0, c0) = ((0.7 * x0[0]).sin(), (0.7 * x0[0]).cos());
                let (s1, c1) = ((0.4 * x0[1]).sin(), (0.4 * x0[1]).cos());
                jet.value[0] = u(&x0);
                jet.grad[0] = 0.7 * c0 * c1 + 0.1 * x0[1];
                jet.grad[1] = -0.4 * s0 * s1 + 0.1 * x0[0];
                jet.hess[0] = -0.49 * s0 * c1;
                jet.hess[1] = -0.28 * c0 * s1 + 0.1;
                jet.hess[2] = jet.hess[1];
                jet.hess[3] = -0.16 * s0 * c1;
                let exact = spec.eval_operator(variant, &jet, 0, &x0).unwrap();
                errs.push((au[p] - exact).abs());
            }
        }
        assert!(errs[0] < 1e-2 && errs[1] < errs[0] / 3.0, "{errs:?}");
        assert!(errs[2] < 1e-2 && errs[3] < errs[2] / 3.0, "{errs:?}");
    }

    #[test]
    fn non_elliptic_reports_node() {
        let spec = scalar(1, |x| x[0], |_| 0.0);
        let grid = GridSpec::new(1, 1.0, 0.5).unwrap();
        match assemble(&spec, Variant::Plain, &grid) {
            Err(Error::NonElliptic { h: 0, x }) => assert_eq!(x, vec![-0.5]),
            other => panic!("{other:?}"),
        }
    }
}
