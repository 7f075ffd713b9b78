//! Finite-difference discretization of the Dirichlet problems on boxes,
//! θ-method time stepping and discrete kernel extraction.

mod assemble;
pub mod banded;
pub mod io;
pub mod iterative;
mod kernel;
pub mod sparse;
mod stepping;

pub use assemble::{assemble, DiscreteOperator, LinearSolverKind};
pub use kernel::{
    apply_kernel_to_function, integrate_against, kernel_column, kernel_columns, kernel_snapshots, mollifier,
    KernelField,
};
pub use stepping::{default_dt, evolve, evolve_with_report, EvolveReport, Propagator};

use crate::{Error, Result};

/// Default cap on the number of grid nodes.
pub const DEFAULT_NODE_BUDGET: usize = 4_000_000;

/// Uniform grid on `[−R, R]^d` with homogeneous Dirichlet boundary.
///
/// Interior nodes sit at `−R + (i+1)h`, `i = 0..n`, `n = 2R/h − 1` (odd, so 0 is a node).
/// Multi-indices are flattened with the first axis fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub d: usize,
    pub radius: f64,
    pub mesh: f64,
    n: usize,
}

impl GridSpec {
    pub fn new(d: usize, radius: f64, mesh: f64) -> Result<Self> {
        Self::with_budget(d, radius, mesh, DEFAULT_NODE_BUDGET)
    }

    pub fn with_budget(d: usize, radius: f64, mesh: f64, budget: usize) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::Dimension(format!("grids support d = 1 or 2, got {d}")));
        }
        if !(radius > 0.0 && mesh > 0.0 && radius.is_finite() && mesh.is_finite()) {
            return Err(Error::Precondition(format!(
                "grid needs positive radius and mesh, got R = {radius}, h = {mesh}"
            )));
        }
        let cells = 2.0 * radius / mesh;
        let c = cells.round();
        if (cells - c).abs() > 1e-9 * cells.max(1.0) || c < 2.0 || !(c as u64).is_multiple_of(2) {
            return Err(Error::Precondition(format!("2R/h must be an even integer ≥ 2, got {cells}")));
        }
        let n = c as usize - 1;
        let total = (n as f64).powi(d as i32);
        if total > budget as f64 {
            return Err(Error::ResourceLimit(format!(
                "grid with {n} nodes per axis in d = {d} exceeds the budget of {budget} nodes"
            )));
        }
        Ok(Self { d, radius, mesh, n })
    }

    /// Interior nodes per axis.
    pub fn nodes_per_axis(&self) -> usize {
        self.n
    }

    pub fn num_nodes(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// `h^d`
    pub fn cell_volume(&self) -> f64 {
        self.mesh.powi(self.d as i32)
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.radius + (i + 1) as f64 * self.mesh
    }

    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        if self.d == 1 {
            [node, 0]
        } else {
            [node % self.n, node / self.n]
        }
    }

    pub fn node_of(&self, idx: [usize; 2]) -> usize {
        if self.d == 1 {
            idx[0]
        } else {
            idx[1] * self.n + idx[0]
        }
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mi = self.multi_index(node);
        (0..self.d).map(|a| self.axis_coord(mi[a])).collect()
    }

    /// The node located at `x`, if `x` is (within 1e−9·h) an interior node.
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.d {
            return None;
        }
        let mut idx = [0usize; 2];
        for a in 0..self.d {
            let s = (x[a] + self.radius) / self.mesh - 1.0;
            let r = s.round();
            if (s - r).abs() > 1e-9 || r < 0.0 || r >= self.n as f64 {
                return None;
            }
            idx[a] = r as usize;
        }
        Some(self.node_of(idx))
    }

    /// The node at the origin.
    pub fn center(&self) -> usize {
        let c = self.n / 2;
        self.node_of([c, c])
    }

    /// Checks that the system size `m·nodes` fits in `max_unknowns`.
    pub fn check_budget(&self, m: usize, max_unknowns: usize) -> Result<()> {
        let u = self.num_nodes() * m;
        if u > max_unknowns {
            return Err(Error::ResourceLimit(format!("{u} unknowns exceed the budget of {max_unknowns}")));
        }
        Ok(())
    }

    fn same_as(&self, other: &GridSpec) -> bool {
        self.d == other.d && self.n == other.n && (self.mesh - other.mesh).abs() <= 1e-12 * self.mesh
    }
}

/// Grid function with `m` components; values are node-major (`node·m + h`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    pub grid: GridSpec,
    pub m: usize,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DiscreteField {
    pub fn zeros(grid: GridSpec, m: usize) -> Self {
        Self { grid, m, values: vec![0.0; grid.num_nodes() * m], time: 0.0 }
    }

    /// Samples `f(x, h)` at every interior node.
    pub fn from_fn(grid: GridSpec, m: usize, f: impl Fn(&[f64], usize) -> f64) -> Result<Self> {
        let mut out = Self::zeros(grid, m);
        for node in 0..grid.num_nodes() {
            let x = grid.coords(node);
            for h in 0..m {
                let v = f(&x, h);
                if !v.is_finite() {
                    return Err(Error::Domain(format!(
                        "initial datum is not finite at x = {x:?}, component {}",
                        h + 1
                    )));
                }
                out.values[node * m + h] = v;
            }
        }
        Ok(out)
    }

    pub fn get(&self, node: usize, h: usize) -> f64 {
        self.values[node * self.m + h]
    }

    pub fn component(&self, h: usize) -> Vec<f64> {
        self.values.iter().skip(h).step_by(self.m).copied().collect()
    }

    /// Discrete L¹ norm of component `h`.
    pub fn l1(&self, h: usize) -> f64 {
        self.values.iter().skip(h).step_by(self.m).map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    /// Discrete inner product `Σ u·v·h^d` over all components.
    pub fn dot(&self, other: &DiscreteField) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_compatible(&self, other: &DiscreteField) -> Result<()> {
        if !self.grid.same_as(&other.grid) || self.m != other.m {
            return Err(Error::GridMismatch(format!(
                "fields live on different grids ({:?}, m = {} vs {:?}, m = {})",
                self.grid, self.m, other.grid, other.m
            )));
        }
        Ok(())
    }
}
