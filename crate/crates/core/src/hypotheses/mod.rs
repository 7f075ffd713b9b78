//! Hypothesis checks with margins and witnesses, row-sum bounds and constant
//! ledgers.
//!
//! Family hypotheses are exact comparisons on parameters. Infima over ℝ^d are
//! replaced by a leading-term analysis for |x| → ∞ plus a grid search on the
//! compact part.

mod ledger;

pub use ledger::{estimate_ledger, AnalyticForm, LedgerEstimate, LedgerItem, LedgerSetup, SamplePlan, LEDGER_ITEMS};

use std::fmt::{self, Write as _};

use crate::coefficients::{min_sym_eigenvalue, Family, FamilyKind, FamilyParams, OperatorSpec};
use crate::par::{self, Exec};

/// Radius of the compact part of ℝ^d searched for infima.
pub const R_CHECK: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Holds,
    Fails,
    NumericOnly,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Holds => "holds",
            Status::Fails => "fails",
            Status::NumericOnly => "numeric-only",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which operator an inequality serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarginGroup {
    /// Regularity, ellipticity and sign conditions shared by all sets.
    Structure,
    /// Needed for `𝓐^P`.
    Forward,
    /// Needed for `𝓐^{P,*}`.
    Adjoint,
    /// Needed for the two-sided estimate.
    Combined,
}

impl MarginGroup {
    pub fn name(self) -> &'static str {
        match self {
            MarginGroup::Structure => "structure",
            MarginGroup::Forward => "forward",
            MarginGroup::Adjoint => "adjoint",
            MarginGroup::Combined => "combined",
        }
    }
}

/// One inequality `lhs > rhs` (or `≥`) recorded as `slack = lhs − rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Margin {
    pub id: String,
    pub slack: f64,
    pub strict: bool,
    pub group: MarginGroup,
    pub h: Option<usize>,
    pub k: Option<usize>,
}

impl Margin {
    fn new(id: &str, slack: f64, strict: bool, group: MarginGroup) -> Self {
        Self { id: id.to_string(), slack, strict, group, h: None, k: None }
    }

    fn at(mut self, h: Option<usize>, k: Option<usize>) -> Self {
        self.h = h;
        self.k = k;
        self
    }

    /// Zero slack fails a strict inequality.
    pub fn holds(&self) -> bool {
        if self.strict {
            self.slack > 0.0
        } else {
            self.slack >= 0.0
        }
    }
}

/// Where a failure occurs.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub margin: String,
    pub h: Option<usize>,
    pub k: Option<usize>,
    pub x: Option<Vec<f64>>,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.margin)?;
        match (self.h, self.k) {
            (Some(h), Some(k)) => write!(f, " at (h,k) = ({},{})", h + 1, k + 1)?,
            (Some(h), None) => write!(f, " at h = {}", h + 1)?,
            (None, Some(k)) => write!(f, " at k = {}", k + 1)?,
            _ => {}
        }
        if let Some(x) = &self.x {
            write!(f, " x = {x:?}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSumMethod {
    /// Leading-term tail analysis plus a refined radial grid infimum.
    Analytic,
    /// Grid infimum only.
    GridInfimum,
}

/// Lower bounds `Σ_k v^P_hk ≥ M` and `Σ_k v^P_kh + div b^h ≥ M*`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSumBound {
    /// `None` when the rows are unbounded below.
    pub m: Option<f64>,
    pub m_star: Option<f64>,
    pub method: RowSumMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub id: String,
    pub status: Status,
    pub witness: Option<Witness>,
    pub margins: Vec<Margin>,
    pub row_sums: Option<RowSumBound>,
    pub notes: Vec<String>,
}

impl HypothesisReport {
    fn from_margins(id: &str, margins: Vec<Margin>, numeric_only: bool) -> Self {
        let failing = margins.iter().find(|m| !m.holds());
        let witness = failing.map(|m| Witness { margin: m.id.clone(), h: m.h, k: m.k, x: None });
        let status = if witness.is_some() {
            Status::Fails
        } else if numeric_only {
            Status::NumericOnly
        } else {
            Status::Holds
        };
        Self { id: id.to_string(), status, witness, margins, row_sums: None, notes: Vec::new() }
    }

    /// Whether every inequality of the given groups holds.
    pub fn holds_for(&self, groups: &[MarginGroup]) -> bool {
        self.margins.iter().filter(|m| groups.contains(&m.group)).all(Margin::holds)
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fails
    }

    pub fn margin(&self, id: &str) -> Option<&Margin> {
        self.margins.iter().find(|m| m.id == id)
    }

    /// Plain-text report.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "hypothesis set: {}", self.id);
        let _ = writeln!(s, "status: {}", self.status);
        if let Some(w) = &self.witness {
            let _ = writeln!(s, "witness: {w}");
        }
        if let Some(rs) = &self.row_sums {
            let show = |v: Option<f64>| v.map_or("unbounded below".to_string(), |v| format!("{v:.12e}"));
            let _ = writeln!(s, "row-sum bound M: {} ({:?})", show(rs.m), rs.method);
            let _ = writeln!(s, "row-sum bound M*: {}", show(rs.m_star));
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "margins:");
        for m in &self.margins {
            let _ = writeln!(
                s,
                "  {:<44} {:<9} {:>14.6e} {}{}",
                m.id,
                m.group.name(),
                m.slack,
                if m.holds() { "ok" } else { "FAIL" },
                index_suffix(m.h, m.k)
            );
        }
        s
    }

    /// `set,margin,group,h,k,slack,strict,holds` rows with a header.
    pub fn margins_csv(&self) -> String {
        let mut s = String::from("set,margin,group,h,k,slack,strict,holds\n");
        let idx = |v: Option<usize>| v.map_or(String::new(), |v| (v + 1).to_string());
        for m in &self.margins {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:e},{},{}",
                self.id,
                m.id,
                m.group.name(),
                idx(m.h),
                idx(m.k),
                m.slack,
                m.strict,
                m.holds()
            );
        }
        s
    }
}

fn index_suffix(h: Option<usize>, k: Option<usize>) -> String {
    match (h, k) {
        (Some(h), Some(k)) => format!(" (h={}, k={})", h + 1, k + 1),
        (Some(h), None) => format!(" (h={})", h + 1),
        (None, Some(k)) => format!(" (k={})", k + 1),
        _ => String::new(),
    }
}

fn structure_margins(p: &FamilyParams, prefix: &str) -> Vec<Margin> {
    let (d, m) = (p.d(), p.m());
    let id = |s: &str| format!("{prefix}.{s}");
    let mut out = Vec::new();
    let mut min_exp = f64::INFINITY;
    let mut asym: f64 = 0.0;
    for k in 0..m {
        for i in 0..d {
            min_exp = min_exp.min(p.beta(k, i));
            for j in 0..d {
                min_exp = min_exp.min(p.alpha(k, i, j));
                asym = asym.max((p.alpha(k, i, j) - p.alpha(k, j, i)).abs());
            }
        }
        for h in 0..m {
            min_exp = min_exp.min(p.gamma(h, k));
        }
    }
    out.push(Margin::new(&id("nonnegative_exponents"), min_exp, false, MarginGroup::Structure));
    out.push(Margin::new(&id("alpha_symmetric"), -asym, false, MarginGroup::Structure));
    for k in 0..m {
        out.push(Margin::new(&id("drift_rate_positive"), p.eta_min(k), true, MarginGroup::Structure).at(None, Some(k)));
        out.push(
            Margin::new(&id("potential_diagonal_positive"), p.theta(k, k), true, MarginGroup::Structure)
                .at(None, Some(k)),
        );
        if d > 1 {
            let mut off = f64::NEG_INFINITY;
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        off = off.max(p.alpha(k, i, j));
                    }
                }
            }
            out.push(
                Margin::new(
                    &id("diffusion_off_diagonal_exponent_gap"),
                    p.alpha_min(k) - off,
                    true,
                    MarginGroup::Structure,
                )
                .at(None, Some(k)),
            );
        }
        let zm = p.z_matrix(k);
        let sym = (0..d).all(|i| (0..d).all(|j| zm[i * d + j] == zm[j * d + i]));
        let lam = if sym { min_sym_eigenvalue(&zm, d) } else { f64::NEG_INFINITY };
        out.push(Margin::new(&id("z_matrix_positive_definite"), lam, true, MarginGroup::Structure).at(None, Some(k)));
    }
    out
}

fn gap_margins(p: &FamilyParams, prefix: &str) -> Vec<Margin> {
    let m = p.m();
    let mut out = Vec::new();
    for h in 0..m {
        for k in 0..m {
            if h != k {
                out.push(
                    Margin::new(
                        &format!("{prefix}.potential_exponent_gap"),
                        p.gamma(h, h) - p.gamma(h, k),
                        true,
                        MarginGroup::Forward,
                    )
                    .at(Some(h), Some(k)),
                );
            }
        }
    }
    out
}

/// Largest `γ_hk` (or `γ_kh` when `row`) over `h ≠ k`.
fn off_max(p: &FamilyParams, k: usize, row: bool) -> f64 {
    (0..p.m())
        .filter(|&h| h != k)
        .map(|h| if row { p.gamma(k, h) } else { p.gamma(h, k) })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exact parameter checks for the polynomial family: the forward set, the
/// adjoint set and the combined two-sided set.
pub fn check_polynomial(p: &FamilyParams) -> HypothesisReport {
    let mut margins = structure_margins(p, "poly");
    margins.extend(gap_margins(p, "poly"));
    for k in 0..p.m() {
        let g = p.gamma(k, k);
        let am1 = p.alpha_max(k) - 1.0;
        margins.push(
            Margin::new("poly.growth_balance", g.max(p.beta_min(k)) - am1, true, MarginGroup::Forward)
                .at(None, Some(k)),
        );
        let adj = p.beta_max(k).max(off_max(p, k, false)).max(am1);
        margins.push(Margin::new("poly.adjoint_dominance", g - adj, true, MarginGroup::Adjoint).at(None, Some(k)));
        let comb = adj.max(off_max(p, k, true));
        margins.push(Margin::new("poly.combined_dominance", g - comb, true, MarginGroup::Combined).at(None, Some(k)));
    }
    HypothesisReport::from_margins("polynomial", margins, false)
}

/// Exact parameter checks for the exponential family.
pub fn check_exponential(p: &FamilyParams) -> HypothesisReport {
    let mut margins = structure_margins(p, "exp");
    margins.extend(gap_margins(p, "exp"));
    for k in 0..p.m() {
        let g = p.gamma(k, k);
        let a = p.alpha_max(k);
        margins.push(
            Margin::new("exp.growth_balance", p.beta_min(k).max(g) - a, true, MarginGroup::Forward).at(None, Some(k)),
        );
        let adj = a.max(p.beta_max(k)).max(off_max(p, k, false));
        margins.push(Margin::new("exp.adjoint_dominance", g - adj, true, MarginGroup::Adjoint).at(None, Some(k)));
        let comb = adj.max(off_max(p, k, true));
        margins.push(Margin::new("exp.combined_dominance", g - comb, true, MarginGroup::Combined).at(None, Some(k)));
    }
    HypothesisReport::from_margins("exponential", margins, false)
}

/// Dispatches to the family's parameter checks.
pub fn check_family(family: &Family) -> HypothesisReport {
    match family.kind() {
        FamilyKind::Polynomial => check_polynomial(family.params()),
        FamilyKind::Exponential => check_exponential(family.params()),
    }
}

/// `coef · r^pow · e^{r^growth}` (no exponential factor when `growth` is `None`).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    growth: Option<f64>,
    pow: f64,
    coef: f64,
}

impl Term {
    fn new(growth: Option<f64>, pow: f64, coef: f64) -> Self {
        match growth {
            // e^{r^0} = e
            Some(0.0) => Term { growth: None, pow, coef: coef * std::f64::consts::E },
            _ => Term { growth, pow, coef },
        }
    }

    fn eval(&self, r: f64) -> f64 {
        let e = self.growth.map_or(1.0, |a| r.powf(a).exp());
        self.coef * r.powf(self.pow) * e
    }

    /// Ordering of growth at infinity.
    fn key(&self) -> (f64, f64) {
        (self.growth.unwrap_or(f64::NEG_INFINITY), self.pow)
    }
}

/// A radial function `Σ terms` of `r = 1+|x|²`.
#[derive(Debug, Clone, Default)]
struct Radial(Vec<Term>);

impl Radial {
    fn eval(&self, r: f64) -> f64 {
        self.0.iter().map(|t| t.eval(r)).sum()
    }

    /// Coefficient and key of the dominant term after merging equal keys.
    fn leading(&self) -> Option<(f64, (f64, f64))> {
        let mut merged: Vec<((f64, f64), f64)> = Vec::new();
        for t in &self.0 {
            let key = t.key();
            match merged.iter_mut().find(|(k, _)| *k == key) {
                Some((_, c)) => *c += t.coef,
                None => merged.push((key, t.coef)),
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        merged
            .into_iter()
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(k, c)| (c, k))
    }

    /// Tail margin: positive leading coefficient, or a constant leading term.
    fn tail_margin(&self, id: &str, group: MarginGroup, h: usize) -> Margin {
        match self.leading() {
            None => Margin::new(id, 0.0, false, group).at(Some(h), None),
            Some((_, key)) if key == (f64::NEG_INFINITY, 0.0) => Margin::new(id, 0.0, false, group).at(Some(h), None),
            Some((c, _)) => Margin::new(id, c, true, group).at(Some(h), None),
        }
    }

    /// Infimum over `|x| ≤ radius` (refined), extended along a logarithmic
    /// ray to `|x| = 10³` to catch dips past the compact part.
    fn infimum(&self, radius: f64) -> (f64, f64) {
        let f = |rad: f64| self.eval(1.0 + rad * rad);
        let mut pts: Vec<f64> = (0..=1000).map(|i| radius * i as f64 / 1000.0).collect();
        let (l0, l1) = (radius.max(1.0).ln(), 1e3f64.ln());
        pts.extend((1..=200).map(|i| (l0 + (l1 - l0) * i as f64 / 200.0).exp()));
        let vals: Vec<f64> = pts.iter().map(|&p| f(p)).collect();
        let mut best = 0;
        for (i, v) in vals.iter().enumerate() {
            if v.is_finite() && (!vals[best].is_finite() || *v < vals[best]) {
                best = i;
            }
        }
        let lo = pts[best.saturating_sub(1)];
        let hi = pts[(best + 1).min(pts.len() - 1)];
        let (x, v) = golden_min(&f, lo, hi);
        if v < vals[best] {
            (v, x)
        } else {
            (vals[best], pts[best])
        }
    }
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn family_rows(family: &Family) -> (Vec<Radial>, Vec<Radial>) {
    let p = family.params();
    let (d, m) = (p.d(), p.m());
    let exp = family.kind() == FamilyKind::Exponential;
    let pot = |gamma: f64, c: f64| {
        if exp {
            Term::new(Some(gamma), 0.0, c)
        } else {
            Term::new(None, gamma, c)
        }
    };
    let mut fwd = Vec::with_capacity(m);
    let mut adj = Vec::with_capacity(m);
    for h in 0..m {
        let mut f = Radial::default();
        let mut a = Radial::default();
        for k in 0..m {
            if k == h {
                f.0.push(pot(p.gamma(h, h), p.theta(h, h)));
                a.0.push(pot(p.gamma(h, h), p.theta(h, h)));
            } else {
                if p.theta(h, k) != 0.0 {
                    f.0.push(pot(p.gamma(h, k), -p.theta(h, k).abs()));
                }
                if p.theta(k, h) != 0.0 {
                    a.0.push(pot(p.gamma(k, h), -p.theta(k, h).abs()));
                }
            }
        }
        // div b^h from below, using x_i² ≤ |x|² = r − 1
        for i in 0..d {
            let (eta, beta) = (p.eta(h, i), p.beta(h, i));
            if exp {
                a.0.push(Term::new(Some(beta), 0.0, -eta));
                if beta != 0.0 {
                    a.0.push(Term::new(Some(beta), beta, -2.0 * beta * eta));
                    a.0.push(Term::new(Some(beta), beta - 1.0, 2.0 * beta * eta));
                }
            } else {
                a.0.push(Term::new(None, beta, -eta * (1.0 + 2.0 * beta)));
                if beta != 0.0 {
                    a.0.push(Term::new(None, beta - 1.0, 2.0 * beta * eta));
                }
            }
        }
        fwd.push(f);
        adj.push(a);
    }
    (fwd, adj)
}

/// Base hypotheses for a parametric family: ellipticity per equation and
/// row sums of `V^P` (and of the adjoint rows) bounded from below. The
/// Lyapunov condition is certified separately.
pub fn check_base(family: &Family) -> HypothesisReport {
    check_base_with(family, R_CHECK)
}

pub fn check_base_with(family: &Family, r_check: f64) -> HypothesisReport {
    let p = family.params();
    let m = p.m();
    let mut margins = Vec::new();
    for k in 0..m {
        let lam = p.min_ellipticity(k).unwrap_or_else(|_| min_sym_eigenvalue(&p.z_matrix(k), p.d()));
        margins.push(Margin::new("base.ellipticity", lam, true, MarginGroup::Structure).at(Some(k), None));
    }
    let (fwd, adj) = family_rows(family);
    let mut m_fwd: Option<f64> = Some(f64::INFINITY);
    let mut m_adj: Option<f64> = Some(f64::INFINITY);
    let mut witness_x = None;
    for h in 0..m {
        let tf = fwd[h].tail_margin("base.row_sum_bounded_below", MarginGroup::Forward, h);
        let ta = adj[h].tail_margin("base.adjoint_row_sum_bounded_below", MarginGroup::Adjoint, h);
        let (vf, xf) = fwd[h].infimum(r_check);
        let (va, _) = adj[h].infimum(r_check);
        if tf.holds() {
            m_fwd = m_fwd.map(|v| v.min(vf));
        } else {
            m_fwd = None;
            witness_x.get_or_insert(xf);
        }
        if ta.holds() {
            m_adj = m_adj.map(|v| v.min(va));
        } else {
            m_adj = None;
        }
        margins.push(tf);
        margins.push(ta);
    }
    let mut rep = HypothesisReport::from_margins(&format!("base/{}", family.kind().name()), margins, false);
    if let (Some(w), Some(x)) = (rep.witness.as_mut(), witness_x) {
        if w.margin == "base.row_sum_bounded_below" {
            let mut pt = vec![0.0; p.d()];
            pt[0] = x;
            w.x = Some(pt);
        }
    }
    rep.row_sums = Some(RowSumBound { m: m_fwd, m_star: m_adj, method: RowSumMethod::Analytic });
    rep.notes.push("Lyapunov condition deferred to the certificate of the lyapunov module".to_string());
    rep
}

/// Grid-only base check for coefficients outside the parametric families.
pub fn check_base_numeric(op: &OperatorSpec, r_check: f64, exec: Exec) -> HypothesisReport {
    let dims = op.dims();
    let (d, m) = (dims.d, dims.m);
    let n: usize = if d == 1 { 512 } else { 64 };
    let total = n.pow(d as u32);
    let point = |i: usize| -> Vec<f64> {
        let idx = [i % n, i / n];
        (0..d).map(|a| -r_check + 2.0 * r_check * idx[a] as f64 / (n - 1) as f64).collect()
    };
    // per point: (min ellipticity per h, forward row sums, adjoint row sums)
    let samples = par::map_range(exec, total, |i| {
        let x = point(i);
        let mut ell = vec![f64::NAN; m];
        let mut rows = vec![f64::NAN; m];
        let mut cols = vec![f64::NAN; m];
        if let Ok(v) = op.potential(&x, true) {
            for h in 0..m {
                rows[h] = (0..m).map(|k| v[h * m + k]).sum();
                cols[h] = (0..m).map(|k| v[k * m + h]).sum();
            }
        }
        for h in 0..m {
            if let Ok(lc) = op.local(h, &x) {
                ell[h] = min_sym_eigenvalue(&lc.q, d);
                cols[h] += lc.div_b;
            }
        }
        (ell, rows, cols)
    });
    let mut margins = Vec::new();
    let mut worst = vec![(f64::INFINITY, 0usize); m];
    let (mut mf, mut ma) = (f64::INFINITY, f64::INFINITY);
    let mut nonfinite = false;
    for (i, (ell, rows, cols)) in samples.iter().enumerate() {
        for h in 0..m {
            if !(ell[h].is_finite() && rows[h].is_finite() && cols[h].is_finite()) {
                nonfinite = true;
            }
            if ell[h] < worst[h].0 || ell[h].is_nan() {
                worst[h] = (if ell[h].is_nan() { f64::NEG_INFINITY } else { ell[h] }, i);
            }
            mf = mf.min(rows[h]);
            ma = ma.min(cols[h]);
        }
    }
    for (h, &(lam, _)) in worst.iter().enumerate() {
        margins.push(Margin::new("base.ellipticity", lam, true, MarginGroup::Structure).at(Some(h), None));
    }
    margins.push(Margin::new(
        "base.coefficients_finite",
        if nonfinite { -1.0 } else { 0.0 },
        false,
        MarginGroup::Structure,
    ));
    let mut rep = HypothesisReport::from_margins("base/generic", margins, true);
    if let Some(w) = rep.witness.as_mut() {
        if let Some(h) = w.h {
            w.x = Some(point(worst[h].1));
        }
    }
    rep.row_sums = Some(RowSumBound {
        m: mf.is_finite().then_some(mf),
        m_star: ma.is_finite().then_some(ma),
        method: RowSumMethod::GridInfimum,
    });
    rep.notes.push(format!(
        "grid search on [-{r_check}, {r_check}]^{d} with {n} points per axis; no tail analysis for generic coefficients"
    ));
    rep.notes.push("Lyapunov condition has no closed-form certificate for generic coefficients".to_string());
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly2(gamma: [[f64; 2]; 2]) -> FamilyParams {
        let theta = [vec![1.0, 0.5], vec![0.5, 1.0]];
        let g = [gamma[0].to_vec(), gamma[1].to_vec()];
        FamilyParams::isotropic(1, 1.0, 0.0, 1.0, 1.0, &theta, &g).unwrap()
    }

    #[test]
    fn example_family_holds() {
        let p = poly2([[2.0, 1.0], [1.0, 2.0]]);
        let rep = check_polynomial(&p);
        assert_eq!(rep.status, Status::Holds, "{}", rep.to_text());
        assert_eq!(rep.margin("poly.growth_balance").unwrap().slack, 3.0);
        let base = check_base(&Family::polynomial(p));
        assert_eq!(base.status, Status::Holds, "{}", base.to_text());
        let rs = base.row_sums.unwrap();
        // min over r ≥ 1 of r² − 0.5 r is attained at r = 1
        assert!((rs.m.unwrap() - 0.5).abs() < 1e-9, "{:?}", rs.m);
        assert!(rs.m_star.is_some());
    }

    #[test]
    fn gap_failure_has_witness() {
        let p = poly2([[1.0, 2.0], [1.0, 2.0]]);
        let rep = check_polynomial(&p);
        assert_eq!(rep.status, Status::Fails);
        let w = rep.witness.unwrap();
        assert_eq!(w.margin, "poly.potential_exponent_gap");
        assert_eq!((w.h, w.k), (Some(0), Some(1)));
        let base = check_base(&Family::polynomial(p));
        assert_eq!(base.status, Status::Fails);
        assert_eq!(base.row_sums.unwrap().m, None);
    }

    #[test]
    fn growth_balance_failure() {
        let p = FamilyParams::isotropic(1, 1.0, 3.0, 1.0, 0.0, &[vec![1.0]], &[vec![1.0]]).unwrap();
        let rep = check_polynomial(&p);
        let w = rep.witness.unwrap();
        assert_eq!(w.margin, "poly.growth_balance");
        assert_eq!(w.k, Some(0));
    }

    #[test]
    fn strict_boundary_fails() {
        let p = FamilyParams::isotropic(1, 1.0, 0.0, 1.0, 1.0, &[vec![1.0]], &[vec![1.0]]).unwrap();
        let rep = check_polynomial(&p);
        let m = rep.margin("poly.adjoint_dominance").unwrap();
        assert_eq!(m.slack, 0.0);
        assert!(!m.holds());
        assert!(rep.holds_for(&[MarginGroup::Structure, MarginGroup::Forward]));
    }

    #[test]
    fn exponential_sets() {
        let theta = [vec![1.0, 0.5], vec![0.5, 1.0]];
        let gamma = [vec![1.0, 0.5], vec![0.5, 1.0]];
        let p = FamilyParams::isotropic(1, 1.0, 0.0, 1.0, 0.0, &theta, &gamma).unwrap();
        assert_eq!(check_exponential(&p).status, Status::Holds);
        let base = check_base(&Family::exponential(p));
        assert_eq!(base.status, Status::Holds, "{}", base.to_text());

        let p = FamilyParams::isotropic(1, 1.0, 1.5, 1.0, 2.0, &[vec![1.0]], &[vec![1.0]]).unwrap();
        let rep = check_exponential(&p);
        assert!(rep.margin("exp.growth_balance").unwrap().holds());

        let p = FamilyParams::isotropic(1, 1.0, 1.0, 1.0, 0.5, &[vec![1.0]], &[vec![1.0]]).unwrap();
        let rep = check_exponential(&p);
        let m = rep.margin("exp.adjoint_dominance").unwrap();
        assert_eq!(m.slack, 0.0);
        assert!(!m.holds());
    }

    #[test]
    fn zero_potential_gives_zero_bound() {
        let p = FamilyParams::isotropic(1, 1.0, 0.0, 1.0, 0.0, &[vec![0.0]], &[vec![0.0]]).unwrap();
        let base = check_base(&Family::polynomial(p));
        assert_eq!(base.row_sums.as_ref().unwrap().m, Some(0.0));
        assert!(base.margin("base.row_sum_bounded_below").unwrap().holds());
    }

    #[test]
    fn numeric_base_is_numeric_only() {
        let p = poly2([[2.0, 1.0], [1.0, 2.0]]);
        let op = Family::polynomial(p).operator();
        let rep = check_base_numeric(&op, 5.0, Exec::Sequential);
        assert_eq!(rep.status, Status::NumericOnly, "{}", rep.to_text());
        let rs = rep.row_sums.unwrap();
        assert!((rs.m.unwrap() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn leading_term_merging() {
        let r = Radial(vec![Term::new(None, 2.0, 1.0), Term::new(None, 2.0, -1.0), Term::new(None, 1.0, -3.0)]);
        assert_eq!(r.leading(), Some((-3.0, (f64::NEG_INFINITY, 1.0))));
        let e = Radial(vec![Term::new(Some(0.5), 0.0, 1.0), Term::new(None, 5.0, -10.0)]);
        assert_eq!(e.leading().unwrap().0, 1.0);
    }
}
