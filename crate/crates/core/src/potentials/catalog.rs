use faer::{c64, Mat};
use serde::Deserialize;

use super::{OperatorFamily, PotentialError, PotentialSpec, PotentialTerm};

const NAMES: [&str; 9] = [
    "jordan2x2",
    "gap2x2",
    "degenerate2x2",
    "harmonic_quartic",
    "double_well",
    "cubic_i",
    "sine_g",
    "rational_g",
    "poly_lq",
];

/// Optional overrides for the parametrized scenarios.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogParams {
    /// Coupling of the imaginary part of `H(0)` (sine_g, rational_g, poly_lq).
    pub g: Option<f64>,
    /// Half-degree of the confining `x²ⁿ` (sine_g, rational_g).
    pub n: Option<u32>,
    /// poly_lq: `x²ˡ + igx²ᵠ⁻¹`.
    pub l: Option<u32>,
    pub q: Option<u32>,
    /// cubic_i generalization `ix²ᵏ⁺¹`.
    pub k: Option<u32>,
}

pub fn catalog_names() -> &'static [&'static str] {
    &NAMES
}

pub fn catalog(name: &str) -> Result<OperatorFamily, PotentialError> {
    catalog_with(name, &CatalogParams::default())
}

fn m(re: f64) -> c64 {
    c64::new(re, 0.0)
}

fn two_by_two(a: [[c64; 2]; 2]) -> crate::CMat {
    Mat::from_fn(2, 2, |i, j| a[i][j])
}

fn mono(c: f64, k: u32) -> PotentialTerm {
    PotentialTerm::monomial(c, k)
}

/// The `x⁴ + ix³` perturbation shared by the Schrödinger scenarios.
fn quartic_cubic() -> PotentialSpec {
    PotentialSpec::new(vec![mono(1.0, 4)], vec![mono(1.0, 3)]).expect("parity-correct")
}

pub fn catalog_with(name: &str, params: &CatalogParams) -> Result<OperatorFamily, PotentialError> {
    let i = c64::new(0.0, 1.0);
    let z = m(0.0);
    let parity = Mat::from_fn(2, 2, |r, c| match (r, c) {
        (0, 0) => 1.0,
        (1, 1) => -1.0,
        _ => 0.0,
    });
    // i·σₓ: the imaginary off-diagonal coupling used by all matrix scenarios.
    let igw = two_by_two([[z, i], [i, z]]);
    let g = params.g;
    let n = params.n.unwrap_or(1);
    if n == 0 {
        return Err(PotentialError::BadParameters("n must be at least 1".into()));
    }
    let family = match name {
        "jordan2x2" => OperatorFamily::matrix(two_by_two([[m(1.0), i], [i, m(-1.0)]]), igw, parity, 1.0)?,
        "gap2x2" => OperatorFamily::matrix(two_by_two([[z, z], [z, m(2.0)]]), igw, parity, 2.0)?,
        "degenerate2x2" => OperatorFamily::matrix(two_by_two([[m(1.0), z], [z, m(1.0)]]), igw, parity, 1.0)?,
        "harmonic_quartic" => OperatorFamily::schrodinger(
            PotentialSpec::new(vec![mono(1.0, 2)], vec![])?,
            PotentialSpec::new(vec![mono(1.0, 4)], vec![])?,
            0.2,
        ),
        "double_well" => OperatorFamily::double_well(0.2),
        "cubic_i" => {
            let k = params.k.unwrap_or(1);
            if k == 0 {
                return Err(PotentialError::BadParameters("k must be at least 1".into()));
            }
            OperatorFamily::schrodinger(PotentialSpec::new(vec![], vec![mono(1.0, 2 * k + 1)])?, quartic_cubic(), 0.1)
        }
        "sine_g" => OperatorFamily::schrodinger(
            PotentialSpec::new(
                vec![mono(1.0, 2 * n)],
                vec![PotentialTerm::Sine { coefficient: g.unwrap_or(0.5), frequency: 1.0 }],
            )?,
            quartic_cubic(),
            0.1,
        ),
        "rational_g" => OperatorFamily::schrodinger(
            PotentialSpec::new(vec![mono(1.0, 2 * n)], vec![PotentialTerm::RationalOdd { coefficient: g.unwrap_or(0.5) }])?,
            quartic_cubic(),
            0.1,
        ),
        "poly_lq" => {
            let l = params.l.unwrap_or(3);
            let q = params.q.unwrap_or(1);
            if q == 0 || l <= 2 * q {
                return Err(PotentialError::BadParameters(format!("poly_lq needs q ≥ 1 and l > 2q (l = {l}, q = {q})")));
            }
            OperatorFamily::schrodinger(
                PotentialSpec::new(vec![mono(1.0, 2 * l)], vec![mono(g.unwrap_or(0.1), 2 * q - 1)])?,
                PotentialSpec::new(vec![mono(1.0, 2)], vec![mono(1.0, 1)])?,
                0.1,
            )
        }
        _ => {
            return Err(PotentialError::UnknownScenario {
                name: name.to_string(),
                available: NAMES.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(family.named(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{parity_audit, theorem22_applicable};

    #[test]
    fn jordan_matrices() {
        let f = catalog("jordan2x2").unwrap();
        let mf = f.matrix_family().unwrap();
        assert_eq!(mf.h0[(0, 1)], c64::new(0.0, 1.0));
        assert_eq!(mf.h0[(1, 1)], c64::new(-1.0, 0.0));
        assert_eq!(mf.w[(1, 0)], c64::new(0.0, 1.0));
        assert_eq!(mf.p[(1, 1)], -1.0);
    }

    #[test]
    fn double_well_expands_per_epsilon() {
        let f = catalog("double_well").unwrap();
        let u = f.schrodinger_family().unwrap().potential_at(0.1);
        let x: f64 = 1.7;
        let expect = x * x * (1.0 - 0.1 * x).powi(2);
        assert!((u.evaluate(x).unwrap().re - expect).abs() < 1e-14);
    }

    #[test]
    fn unknown_name_lists_available() {
        match catalog("nope") {
            Err(PotentialError::UnknownScenario { available, .. }) => assert_eq!(available.len(), NAMES.len()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn every_entry_builds_and_is_parity_clean() {
        for name in catalog_names() {
            let f = catalog(name).unwrap();
            if let Some(s) = f.schrodinger_family() {
                for spec in [s.v(), s.w()].into_iter().flatten() {
                    let a = parity_audit(spec, 200).unwrap();
                    assert!(a.even_asymmetry <= 1e-12 && a.odd_symmetry_defect <= 1e-12, "{name}");
                }
            }
        }
    }

    #[test]
    fn poly_lq_meets_polynomial_hypotheses() {
        let f = catalog("poly_lq").unwrap();
        let s = f.schrodinger_family().unwrap();
        // H(0) = x⁶ + igx: V₊ = x⁶, the imaginary coupling plays the role of W.
        let v_plus = PotentialSpec::new(s.v().unwrap().even_terms().to_vec(), vec![]).unwrap();
        let w_odd = PotentialSpec::new(vec![], s.v().unwrap().odd_terms().to_vec()).unwrap();
        let r = theorem22_applicable(&v_plus, &w_odd).unwrap();
        assert_eq!((r.applicable, r.l, r.r), (true, 3, 1));
        assert!(catalog_with("poly_lq", &CatalogParams { l: Some(2), q: Some(1), ..Default::default() }).is_err());
    }
}
