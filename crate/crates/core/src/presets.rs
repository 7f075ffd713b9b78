//! Reference configurations used by the tests, the acceptance suite and the
//! CLI `preset` key.

use crate::coefficients::{Family, FamilyParams, FnCoefficients, OperatorSpec, SystemDims};
use crate::{Error, Result};

/// `d = 1`, `m = 1`, `Q = 1`, `b = 0`, `V = 0`.
pub fn heat() -> Family {
    let z = vec![vec![0.0]];
    Family::polynomial(FamilyParams::isotropic(1, 1.0, 0.0, 0.0, 0.0, &z, &z).expect("valid"))
}

/// `d = 1`, `Q = I`, `b = 0` and a constant potential `v` (m×m, row-major rows).
pub fn constant_potential(v: &[Vec<f64>]) -> Result<Family> {
    let m = v.len();
    let g = vec![vec![0.0; m]; m];
    Ok(Family::polynomial(FamilyParams::isotropic(1, 1.0, 0.0, 0.0, 0.0, v, &g)?))
}

/// The coupled constant-potential oracle `V = [[2, 3], [−1, 4]]`.
pub fn coupled_constant() -> Family {
    constant_potential(&[vec![2.0, 3.0], vec![-1.0, 4.0]]).expect("valid")
}

/// Ornstein–Uhlenbeck: `d = 1`, `m = 1`, `Q = 1`, `b = −x`, `V = 0`.
pub fn ornstein_uhlenbeck() -> Family {
    let z = vec![vec![0.0]];
    Family::polynomial(FamilyParams::isotropic(1, 1.0, 0.0, 1.0, 0.0, &z, &z).expect("valid"))
}

/// Polynomial example: `d = 1`, `m = 2`, `ζ = 1`, `α = 0`, `η = 1`, `β = 1`,
/// `θ = [[1, ½], [½, 1]]`, `γ = [[2, 1], [1, 2]]`.
pub fn polynomial_example() -> Family {
    Family::polynomial(
        FamilyParams::isotropic(
            1,
            1.0,
            0.0,
            1.0,
            1.0,
            &[vec![1.0, 0.5], vec![0.5, 1.0]],
            &[vec![2.0, 1.0], vec![1.0, 2.0]],
        )
        .expect("valid"),
    )
}

/// Exponential example: `d = 1`, `m = 2`, `ζ = η = 1`, `α = β = 0`,
/// `θ = [[1, ½], [½, 1]]`, `γ_kk = 1`, `γ_hk = ½`.
pub fn exponential_example() -> Family {
    Family::exponential(
        FamilyParams::isotropic(
            1,
            1.0,
            0.0,
            1.0,
            0.0,
            &[vec![1.0, 0.5], vec![0.5, 1.0]],
            &[vec![1.0, 0.5], vec![0.5, 1.0]],
        )
        .expect("valid"),
    )
}

/// Three components fed along a chain `1 → 2 → 3`: only `v_21` and `v_32`
/// are nonzero off the diagonal.
pub fn chain3() -> Family {
    Family::polynomial(
        FamilyParams::isotropic(
            1,
            1.0,
            0.0,
            1.0,
            1.0,
            &[vec![1.0, 0.0, 0.0], vec![0.5, 1.0, 0.0], vec![0.0, 0.5, 1.0]],
            &[vec![2.0, 1.0, 1.0], vec![1.0, 2.0, 1.0], vec![1.0, 1.0, 2.0]],
        )
        .expect("valid"),
    )
}

/// `d = 1`, `Q = I`, `b = 0`, `V = I + pattern·½` where `pattern` is an m×m
/// row-major off-diagonal sparsity pattern; the declared zero pattern is exact.
pub fn sparse_coupling(m: usize, pattern: &[bool]) -> Result<OperatorSpec> {
    if pattern.len() != m * m {
        return Err(Error::Dimension(format!("pattern must be {m}×{m}")));
    }
    let pat = pattern.to_vec();
    let nonzero: Vec<bool> = (0..m * m).map(|i| i / m == i % m || pat[i]).collect();
    let nz = nonzero.clone();
    let coef = FnCoefficients::new(
        SystemDims::new(1, m)?,
        |_, _, q| q[0] = 1.0,
        |_, _, b| b[0] = 0.0,
        move |_, v| {
            for (i, e) in v.iter_mut().enumerate() {
                *e = if i / m == i % m {
                    1.0
                } else if nz[i] {
                    0.5
                } else {
                    0.0
                };
            }
        },
        nonzero,
    );
    Ok(OperatorSpec::new(coef))
}

/// Names accepted by [`by_name`].
pub const FAMILY_PRESETS: [&str; 6] =
    ["polynomial_example", "exponential_example", "chain3", "heat", "ornstein_uhlenbeck", "coupled_constant"];

pub fn by_name(name: &str) -> Option<Family> {
    match name {
        "heat" => Some(heat()),
        "ornstein_uhlenbeck" => Some(ornstein_uhlenbeck()),
        "coupled_constant" => Some(coupled_constant()),
        "polynomial_example" => Some(polynomial_example()),
        "exponential_example" => Some(exponential_example()),
        "chain3" => Some(chain3()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::coupling_support;
    use crate::hypotheses::{check_base, check_exponential, check_polynomial};

    #[test]
    fn examples_satisfy_their_hypotheses() {
        assert!(check_polynomial(polynomial_example().params()).passed());
        assert!(check_exponential(exponential_example().params()).passed());
        assert!(check_base(&polynomial_example()).passed());
    }

    #[test]
    fn chain_support_matches_pattern() {
        let spec = chain3().operator();
        assert_eq!(coupling_support(&spec, 0).unwrap().f, vec![0, 1, 2]);
        assert_eq!(coupling_support(&spec, 2).unwrap().f, vec![2]);
        let mut pat = vec![false; 9];
        pat[3] = true;
        let s = sparse_coupling(3, &pat).unwrap();
        assert_eq!(coupling_support(&s, 0).unwrap().f, vec![0, 1]);
        assert!(sparse_coupling(3, &pat[..4]).is_err());
    }
}
