//! The operator
//!
//! ```text
//! (𝓐f)_h = div(Q^h ∇f_h) + ⟨b^h, ∇f_h⟩ − (V f)_h
//! ```
//!
//! together with its cooperative variant 𝓐^P (off-diagonal potential entries
//! replaced by −|v_hk|) and the formal adjoint
//! `(𝓐^{P,*}u)_k = div(Q^k∇u_k) − ⟨b^k,∇u_k⟩ − div(b^k)u_k − ((V^P)ᵀu)_k`.
//!
//! Pointwise evaluation uses the expanded form `tr(Q D²u) + ⟨G, ∇u⟩` with
//! `G_j = Σ_i D_i q_ij`, so no weak formulation is needed.

mod family;
mod generic;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::{Error, Result};

pub use family::{ExponentialFamily, Family, FamilyKind, FamilyParams, PolynomialFamily};
pub use generic::FnCoefficients;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemDims {
    pub d: usize,
    pub m: usize,
}

impl SystemDims {
    pub fn new(d: usize, m: usize) -> Result<Self> {
        if d == 0 || m == 0 {
            return Err(Error::Dimension(format!("need d ≥ 1 and m ≥ 1, got d={d}, m={m}")));
        }
        Ok(Self { d, m })
    }
}

/// Which operator a computation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Plain,
    P,
    PAdjoint,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::P => "P",
            Variant::PAdjoint => "P_adjoint",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Variant::Plain => 0,
            Variant::P => 1,
            Variant::PAdjoint => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Variant::Plain),
            1 => Some(Variant::P),
            2 => Some(Variant::PAdjoint),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" => Ok(Variant::Plain),
            "p" => Ok(Variant::P),
            "p_adjoint" | "p-adjoint" | "adjoint" => Ok(Variant::PAdjoint),
            other => Err(Error::Format(format!("unknown variant '{other}'"))),
        }
    }
}

/// Pointwise access to the coefficients. All matrices are row-major.
pub trait Coefficients: Send + Sync + fmt::Debug {
    fn dims(&self) -> SystemDims;

    /// `q^h_ij(x)`, d×d.
    fn diffusion(&self, h: usize, x: &[f64], out: &mut [f64]);

    /// `R^h_ij = D_i q^h_ij(x)`, d×d (no summation).
    fn diffusion_derivs(&self, h: usize, x: &[f64], out: &mut [f64]);

    /// `b^h(x)`, length d.
    fn drift(&self, h: usize, x: &[f64], out: &mut [f64]);

    /// `div b^h(x)`.
    fn drift_div(&self, h: usize, x: &[f64]) -> f64;

    /// `v_hk(x)`, m×m.
    fn potential(&self, x: &[f64], out: &mut [f64]);

    /// Whether `v_hk` can be nonzero somewhere; decided from parameters.
    fn coupling_nonzero(&self, h: usize, k: usize) -> bool;

    /// `Σ_k v^P_hk(x)`.
    fn potential_p_row_sum(&self, h: usize, x: &[f64]) -> f64 {
        let m = self.dims().m;
        let mut v = vec![0.0; m * m];
        self.potential(x, &mut v);
        (0..m).map(|k| if k == h { v[h * m + k] } else { -v[h * m + k].abs() }).sum()
    }

    /// `Σ_h v^P_hk(x)`.
    fn potential_p_col_sum(&self, k: usize, x: &[f64]) -> f64 {
        let m = self.dims().m;
        let mut v = vec![0.0; m * m];
        self.potential(x, &mut v);
        (0..m).map(|h| if h == k { v[h * m + k] } else { -v[h * m + k].abs() }).sum()
    }
}

/// Values, gradients and Hessians of an m-vector field at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldJet {
    pub dims: SystemDims,
    /// length m
    pub value: Vec<f64>,
    /// m×d, component-major
    pub grad: Vec<f64>,
    /// m×d×d, component-major
    pub hess: Vec<f64>,
}

impl FieldJet {
    pub fn zeros(dims: SystemDims) -> Self {
        let (d, m) = (dims.d, dims.m);
        Self { dims, value: vec![0.0; m], grad: vec![0.0; m * d], hess: vec![0.0; m * d * d] }
    }

    /// The same scalar jet in every component.
    pub fn broadcast(dims: SystemDims, value: f64, grad: &[f64], hess: &[f64]) -> Self {
        let mut j = Self::zeros(dims);
        let d = dims.d;
        for c in 0..dims.m {
            j.value[c] = value;
            j.grad[c * d..(c + 1) * d].copy_from_slice(grad);
            j.hess[c * d * d..(c + 1) * d * d].copy_from_slice(hess);
        }
        j
    }

    fn grad_of(&self, c: usize) -> &[f64] {
        let d = self.dims.d;
        &self.grad[c * d..(c + 1) * d]
    }

    fn hess_of(&self, c: usize) -> &[f64] {
        let d = self.dims.d;
        &self.hess[c * d * d..(c + 1) * d * d]
    }
}

/// Coefficients at one point for one equation, checked for finiteness.
#[derive(Debug, Clone)]
pub struct LocalCoefficients {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    /// `G_j = Σ_i D_i q_ij`
    pub g: Vec<f64>,
    pub b: Vec<f64>,
    pub div_b: f64,
}

/// Full description of 𝓐; cheap to clone and shareable across threads.
#[derive(Clone)]
pub struct OperatorSpec {
    coef: Arc<dyn Coefficients>,
    dims: SystemDims,
}

impl fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSpec").field("dims", &self.dims).field("coefficients", &self.coef).finish()
    }
}

impl OperatorSpec {
    pub fn new<C: Coefficients + 'static>(coef: C) -> Self {
        let dims = coef.dims();
        Self { coef: Arc::new(coef), dims }
    }

    pub fn from_arc(coef: Arc<dyn Coefficients>) -> Self {
        let dims = coef.dims();
        Self { coef, dims }
    }

    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    pub fn coefficients(&self) -> &dyn Coefficients {
        self.coef.as_ref()
    }

    fn check_point(&self, h: usize, x: &[f64]) -> Result<()> {
        if x.len() != self.dims.d {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, operator has d = {}",
                x.len(),
                self.dims.d
            )));
        }
        if h >= self.dims.m {
            return Err(Error::Dimension(format!("equation index {h} out of range (m = {})", self.dims.m)));
        }
        Ok(())
    }

    /// Diffusion, its derivatives and the drift of equation `h` at `x`.
    pub fn local(&self, h: usize, x: &[f64]) -> Result<LocalCoefficients> {
        self.check_point(h, x)?;
        let d = self.dims.d;
        let mut q = vec![0.0; d * d];
        let mut r = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        self.coef.diffusion(h, x, &mut q);
        self.coef.diffusion_derivs(h, x, &mut r);
        self.coef.drift(h, x, &mut b);
        let div_b = self.coef.drift_div(h, x);
        let bad = |what| Error::NonFiniteCoefficient { what, h, x: x.to_vec() };
        if !q.iter().all(|v| v.is_finite()) {
            return Err(bad("diffusion"));
        }
        if !r.iter().all(|v| v.is_finite()) {
            return Err(bad("diffusion derivative"));
        }
        if !b.iter().all(|v| v.is_finite()) {
            return Err(bad("drift"));
        }
        if !div_b.is_finite() {
            return Err(bad("drift divergence"));
        }
        let g = (0..d).map(|j| (0..d).map(|i| r[i * d + j]).sum()).collect();
        Ok(LocalCoefficients { q, r, g, b, div_b })
    }

    /// The potential at `x` (or its cooperative version), m×m row-major.
    pub fn potential(&self, x: &[f64], cooperative: bool) -> Result<Vec<f64>> {
        self.check_point(0, x)?;
        let m = self.dims.m;
        let mut v = vec![0.0; m * m];
        self.coef.potential(x, &mut v);
        for h in 0..m {
            for k in 0..m {
                let e = v[h * m + k];
                if !e.is_finite() {
                    return Err(Error::NonFiniteCoefficient { what: "potential", h, x: x.to_vec() });
                }
                if cooperative && h != k {
                    v[h * m + k] = -e.abs();
                }
            }
        }
        Ok(v)
    }

    /// `(𝓐u)_h`, `(𝓐^P u)_h` or `(𝓐^{P,*}u)_h` at `x`.
    pub fn eval_operator(&self, variant: Variant, u: &FieldJet, h: usize, x: &[f64]) -> Result<f64> {
        if u.dims != self.dims {
            return Err(Error::Dimension(format!("field has dims {:?}, operator has {:?}", u.dims, self.dims)));
        }
        let loc = self.local(h, x)?;
        let d = self.dims.d;
        let m = self.dims.m;
        let grad = u.grad_of(h);
        let hess = u.hess_of(h);
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += loc.q[i * d + j] * hess[j * d + i];
            }
        }
        let drift_sign = if variant == Variant::PAdjoint { -1.0 } else { 1.0 };
        for j in 0..d {
            acc += (loc.g[j] + drift_sign * loc.b[j]) * grad[j];
        }
        let v = self.potential(x, variant != Variant::Plain)?;
        match variant {
            Variant::Plain | Variant::P => {
                for k in 0..m {
                    acc -= v[h * m + k] * u.value[k];
                }
            }
            Variant::PAdjoint => {
                acc -= loc.div_b * u.value[h];
                for j in 0..m {
                    acc -= v[j * m + h] * u.value[j];
                }
            }
        }
        Ok(acc)
    }
}

/// `V^P`: diagonal kept, off-diagonal entries replaced by `−|v_hk|`.
pub fn eval_vp(v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !v.is_square() {
        return Err(Error::Dimension(format!("potential must be square, got {}×{}", v.nrows(), v.ncols())));
    }
    Ok(DMatrix::from_fn(v.nrows(), v.ncols(), |h, k| if h == k { v[(h, k)] } else { -v[(h, k)].abs() }))
}

/// Reachability of component `k` through the coupling graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingSupport {
    pub k: usize,
    /// `levels[i]` is `H_k^i`, sorted; trailing empty levels are dropped.
    pub levels: Vec<Vec<usize>>,
    /// `F_k`, sorted.
    pub f: Vec<usize>,
}

impl CouplingSupport {
    pub fn contains(&self, h: usize) -> bool {
        self.f.binary_search(&h).is_ok()
    }
}

/// Breadth-first reachability where `nonzero(h, l)` states that `v_hl ≢ 0`:
/// component `l` feeds component `h`.
pub fn coupling_support_with(m: usize, k: usize, nonzero: impl Fn(usize, usize) -> bool) -> CouplingSupport {
    let mut seen = vec![false; m];
    seen[k] = true;
    let mut levels = Vec::new();
    let mut frontier = vec![k];
    loop {
        let mut next: Vec<usize> = (0..m).filter(|&h| !seen[h] && frontier.iter().any(|&l| nonzero(h, l))).collect();
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        for &h in &next {
            seen[h] = true;
        }
        levels.push(next.clone());
        frontier = next;
    }
    let f = (0..m).filter(|&h| seen[h]).collect();
    CouplingSupport { k, levels, f }
}

/// [`coupling_support_with`] using the coefficients' own zero pattern.
pub fn coupling_support(spec: &OperatorSpec, k: usize) -> Result<CouplingSupport> {
    let m = spec.dims().m;
    if k >= m {
        return Err(Error::Dimension(format!("component {k} out of range (m = {m})")));
    }
    let c = spec.coefficients();
    Ok(coupling_support_with(m, k, |h, l| h != l && c.coupling_nonzero(h, l)))
}

/// Smallest eigenvalue of a symmetric matrix (row-major n×n).
pub fn min_sym_eigenvalue(a: &[f64], n: usize) -> f64 {
    let mat = DMatrix::from_row_slice(n, n, a);
    let sym = (&mat + mat.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}
