//! Complex potentials `V = V₊ + iV₋` built from parity-typed real terms,
//! operator families, structural audits and the scenario catalog.

mod catalog;
mod family;

pub use catalog::{catalog, catalog_names, catalog_with, CatalogParams};
pub use family::{EffectivePotential, MatrixFamily, OperatorFamily, SchrodingerFamily, Variant};

use faer::c64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `exp(x²)` is only evaluated for `|x|` up to this value.
pub const EXP_SQUARE_CLAMP: f64 = 26.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("{term:?} is {actual:?} and cannot be placed in the {slot:?} part")]
    WrongParity { term: PotentialTerm, slot: Parity, actual: Parity },
    #[error("potential value at x = {x} is not finite")]
    NonFinite { x: f64 },
    #[error("polynomial reality hypotheses: {0}")]
    Theorem22(Theorem22Violation),
    #[error("unknown scenario {name:?}; available: {}", available.join(", "))]
    UnknownScenario { name: String, available: Vec<String> },
    #[error("invalid scenario parameters: {0}")]
    BadParameters(String),
    #[error("invalid matrix family: {0}")]
    BadMatrixFamily(String),
    #[error("operation requires a {expected} family")]
    WrongVariant { expected: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

/// One real-valued building block of a potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialTerm {
    /// `c·xᵏ`
    Monomial { coefficient: f64, power: u32 },
    /// `c·sin(ωx)`
    Sine { coefficient: f64, frequency: f64 },
    /// `c·x/(x²+1)`
    RationalOdd { coefficient: f64 },
    /// `c·exp(x²)`
    ExpSquare { coefficient: f64 },
}

impl PotentialTerm {
    pub fn monomial(coefficient: f64, power: u32) -> Self {
        PotentialTerm::Monomial { coefficient, power }
    }

    pub fn parity(&self) -> Parity {
        match self {
            PotentialTerm::Monomial { power, .. } if power % 2 == 0 => Parity::Even,
            PotentialTerm::Monomial { .. } => Parity::Odd,
            PotentialTerm::Sine { .. } | PotentialTerm::RationalOdd { .. } => Parity::Odd,
            PotentialTerm::ExpSquare { .. } => Parity::Even,
        }
    }

    pub fn coefficient(&self) -> f64 {
        match *self {
            PotentialTerm::Monomial { coefficient, .. }
            | PotentialTerm::Sine { coefficient, .. }
            | PotentialTerm::RationalOdd { coefficient }
            | PotentialTerm::ExpSquare { coefficient } => coefficient,
        }
    }

    pub fn value(&self, x: f64) -> Result<f64, PotentialError> {
        let v = match *self {
            PotentialTerm::Monomial { coefficient, power } => coefficient * x.powi(power as i32),
            PotentialTerm::Sine { coefficient, frequency } => coefficient * (frequency * x).sin(),
            PotentialTerm::RationalOdd { coefficient } => coefficient * x / (x * x + 1.0),
            PotentialTerm::ExpSquare { coefficient } => {
                if x.abs() > EXP_SQUARE_CLAMP {
                    return Err(PotentialError::NonFinite { x });
                }
                coefficient * (x * x).exp()
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(PotentialError::NonFinite { x })
        }
    }
}

/// `V(x) = Σ even_terms(x) + i·Σ odd_terms(x)`.
///
/// Construction rejects terms of the wrong parity, so a value of this type
/// is always `P`-even in its real part and `P`-odd in its imaginary part.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct PotentialSpec {
    even: Vec<PotentialTerm>,
    odd: Vec<PotentialTerm>,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    #[serde(default)]
    even: Vec<PotentialTerm>,
    #[serde(default)]
    odd: Vec<PotentialTerm>,
}

impl TryFrom<RawSpec> for PotentialSpec {
    type Error = PotentialError;
    fn try_from(raw: RawSpec) -> Result<Self, Self::Error> {
        PotentialSpec::new(raw.even, raw.odd)
    }
}

impl From<PotentialSpec> for RawSpec {
    fn from(s: PotentialSpec) -> Self {
        RawSpec { even: s.even, odd: s.odd }
    }
}

impl PotentialSpec {
    pub fn new(even: Vec<PotentialTerm>, odd: Vec<PotentialTerm>) -> Result<Self, PotentialError> {
        for (slot, terms) in [(Parity::Even, &even), (Parity::Odd, &odd)] {
            if let Some(t) = terms.iter().find(|t| t.parity() != slot) {
                return Err(PotentialError::WrongParity { term: *t, slot, actual: t.parity() });
            }
        }
        Ok(PotentialSpec { even, odd })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn even_terms(&self) -> &[PotentialTerm] {
        &self.even
    }

    pub fn odd_terms(&self) -> &[PotentialTerm] {
        &self.odd
    }

    pub fn is_zero(&self) -> bool {
        self.even.iter().chain(&self.odd).all(|t| t.coefficient() == 0.0)
    }

    pub fn evaluate(&self, x: f64) -> Result<c64, PotentialError> {
        if !x.is_finite() {
            return Err(PotentialError::NonFinite { x });
        }
        let mut re = 0.0;
        for t in &self.even {
            re += t.value(x)?;
        }
        let mut im = 0.0;
        for t in &self.odd {
            im += t.value(x)?;
        }
        Ok(c64::new(re, im))
    }

    fn all_monomials(&self) -> bool {
        self.even.iter().chain(&self.odd).all(|t| matches!(t, PotentialTerm::Monomial { .. }))
    }
}

/// Pointwise evaluation of `V₊(x) + iV₋(x)`.
pub fn evaluate(spec: &PotentialSpec, x: f64) -> Result<c64, PotentialError> {
    spec.evaluate(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParityAudit {
    /// `max |f₊(x) − f₊(−x)|` over the samples.
    pub even_asymmetry: f64,
    /// `max |f₋(x) + f₋(−x)|` over the samples.
    pub odd_symmetry_defect: f64,
    pub samples: usize,
    pub x_max: f64,
}

/// Samples `x_j = j·x_max/samples` and compares the values at `±x_j`.
pub fn parity_audit(spec: &PotentialSpec, samples: usize) -> Result<ParityAudit, PotentialError> {
    parity_audit_range(spec, samples, 6.0)
}

pub fn parity_audit_range(spec: &PotentialSpec, samples: usize, x_max: f64) -> Result<ParityAudit, PotentialError> {
    let samples = samples.max(2);
    let mut even_asymmetry = 0.0f64;
    let mut odd_symmetry_defect = 0.0f64;
    for j in 1..=samples {
        let x = x_max * j as f64 / samples as f64;
        let plus = spec.evaluate(x)?;
        let minus = spec.evaluate(-x)?;
        even_asymmetry = even_asymmetry.max((plus.re - minus.re).abs());
        odd_symmetry_defect = odd_symmetry_defect.max((plus.im + minus.im).abs());
    }
    Ok(ParityAudit { even_asymmetry, odd_symmetry_defect, samples, x_max })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem22Violation {
    NonPolynomial,
    VNotEven,
    WNotOdd,
}

impl std::fmt::Display for Theorem22Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Theorem22Violation::NonPolynomial => "non-polynomial terms present",
            Theorem22Violation::VNotEven => "V is not a real even polynomial",
            Theorem22Violation::WNotOdd => "W is not a real odd polynomial",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem22Report {
    pub applicable: bool,
    pub l: u32,
    pub r: u32,
    pub reason: Option<String>,
}

/// Highest power with a nonzero combined coefficient, and that coefficient.
fn leading(terms: &[PotentialTerm]) -> Option<(u32, f64)> {
    let mut by_power = std::collections::BTreeMap::<u32, f64>::new();
    for t in terms {
        if let PotentialTerm::Monomial { coefficient, power } = *t {
            *by_power.entry(power).or_default() += coefficient;
        }
    }
    by_power.into_iter().rev().find(|(_, c)| *c != 0.0)
}

/// Checks `H_g = p² + V + igW` against: `V` a real even polynomial of degree
/// `2l` growing to `+∞`, `W` a real odd polynomial of degree `2r−1`, `l > 2r`.
///
/// `W` carries its odd monomials in the odd (imaginary) slot, as it enters
/// the operator multiplied by `i`.
pub fn theorem22_applicable(v: &PotentialSpec, w: &PotentialSpec) -> Result<Theorem22Report, PotentialError> {
    if !v.all_monomials() || !w.all_monomials() {
        return Err(PotentialError::Theorem22(Theorem22Violation::NonPolynomial));
    }
    if !v.odd.iter().all(|t| t.coefficient() == 0.0) {
        return Err(PotentialError::Theorem22(Theorem22Violation::VNotEven));
    }
    if !w.even.iter().all(|t| t.coefficient() == 0.0) {
        return Err(PotentialError::Theorem22(Theorem22Violation::WNotOdd));
    }
    let (v_deg, v_lead) = leading(&v.even).unwrap_or((0, 0.0));
    let l = v_deg / 2;
    let r = leading(&w.odd).map(|(d, _)| d.div_ceil(2)).unwrap_or(0);
    let reason = if v_deg == 0 || v_lead <= 0.0 {
        Some("V does not diverge to +∞".to_string())
    } else if r == 0 {
        Some("W vanishes identically".to_string())
    } else if l <= 2 * r {
        Some(format!("l = {l} is not larger than 2r = {}", 2 * r))
    } else {
        None
    };
    Ok(Theorem22Report { applicable: reason.is_none(), l, r, reason })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfinementReport {
    pub epsilon: f64,
    pub shell_radii: Vec<f64>,
    /// `min(|U(s)|, |U(−s)|)` per shell, `U = V + εW`.
    pub shell_minima: Vec<f64>,
    pub min_value: f64,
    pub min_radius: f64,
    /// Shell minima are nondecreasing outward.
    pub monotone_growth: bool,
}

/// Samples `|V(x) + εW(x)|` on the shells `|x| = j·x_max/samples`.
pub fn confinement_audit(
    family: &OperatorFamily,
    epsilon: f64,
    x_max: f64,
    samples: usize,
) -> Result<ConfinementReport, PotentialError> {
    let sch = family.schrodinger_family().ok_or(PotentialError::WrongVariant { expected: "schrodinger" })?;
    let u = sch.potential_at(epsilon);
    let samples = samples.max(2);
    let mut shell_radii = Vec::with_capacity(samples);
    let mut shell_minima = Vec::with_capacity(samples);
    for j in 1..=samples {
        let s = x_max * j as f64 / samples as f64;
        let m = u.evaluate(s)?.norm().min(u.evaluate(-s)?.norm());
        shell_radii.push(s);
        shell_minima.push(m);
    }
    let (imin, &min_value) = shell_minima
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least two shells");
    let monotone_growth = shell_minima.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    Ok(ConfinementReport {
        epsilon,
        min_radius: shell_radii[imin],
        shell_radii,
        shell_minima,
        min_value,
        monotone_growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(c: f64, k: u32) -> PotentialTerm {
        PotentialTerm::monomial(c, k)
    }

    #[test]
    fn evaluate_examples() {
        let quartic = PotentialSpec::new(vec![mono(1.0, 4)], vec![]).unwrap();
        assert_eq!(evaluate(&quartic, 2.0).unwrap(), c64::new(16.0, 0.0));
        let v = PotentialSpec::new(
            vec![mono(1.0, 2)],
            vec![PotentialTerm::Sine { coefficient: 1.0, frequency: 1.0 }],
        )
        .unwrap();
        assert_eq!(evaluate(&v, 0.0).unwrap(), c64::new(0.0, 0.0));
        let cubic = PotentialSpec::new(vec![], vec![mono(1.0, 3)]).unwrap();
        assert_eq!(evaluate(&cubic, 1.0).unwrap(), c64::new(0.0, 1.0));
    }

    #[test]
    fn term_formulas() {
        assert_eq!(PotentialTerm::RationalOdd { coefficient: 2.0 }.value(1.0).unwrap(), 1.0);
        assert!((PotentialTerm::ExpSquare { coefficient: 1.0 }.value(1.0).unwrap() - 1f64.exp()).abs() < 1e-15);
        assert!((PotentialTerm::Sine { coefficient: 2.0, frequency: 0.5 }.value(1.0).unwrap() - 2.0 * 0.5f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn exp_square_beyond_clamp_is_an_error() {
        let t = PotentialTerm::ExpSquare { coefficient: 1.0 };
        assert!(t.value(26.0).is_ok());
        assert_eq!(t.value(30.0), Err(PotentialError::NonFinite { x: 30.0 }));
    }

    #[test]
    fn wrong_parity_rejected() {
        let err = PotentialSpec::new(vec![], vec![mono(1.0, 2)]).unwrap_err();
        assert!(matches!(err, PotentialError::WrongParity { slot: Parity::Odd, actual: Parity::Even, .. }));
        assert!(PotentialSpec::new(vec![PotentialTerm::Sine { coefficient: 1.0, frequency: 1.0 }], vec![]).is_err());
        assert!(PotentialSpec::new(vec![PotentialTerm::ExpSquare { coefficient: 1.0 }], vec![]).is_ok());
    }

    #[test]
    fn parity_audit_examples() {
        let harmonic = PotentialSpec::new(vec![mono(1.0, 2)], vec![]).unwrap();
        let a = parity_audit(&harmonic, 50).unwrap();
        assert_eq!((a.even_asymmetry, a.odd_symmetry_defect), (0.0, 0.0));
        let v = PotentialSpec::new(
            vec![mono(1.0, 4)],
            vec![PotentialTerm::Sine { coefficient: 1.0, frequency: 1.0 }],
        )
        .unwrap();
        let a = parity_audit(&v, 100).unwrap();
        assert!(a.even_asymmetry <= 1e-14 && a.odd_symmetry_defect <= 1e-14);
    }

    #[test]
    fn theorem22_examples() {
        let v6 = PotentialSpec::new(vec![mono(1.0, 6)], vec![]).unwrap();
        let w1 = PotentialSpec::new(vec![], vec![mono(1.0, 1)]).unwrap();
        let r = theorem22_applicable(&v6, &w1).unwrap();
        assert_eq!((r.applicable, r.l, r.r), (true, 3, 1));

        let v4 = PotentialSpec::new(vec![mono(1.0, 4)], vec![]).unwrap();
        let w3 = PotentialSpec::new(vec![], vec![mono(1.0, 3)]).unwrap();
        let r = theorem22_applicable(&v4, &w3).unwrap();
        assert_eq!((r.applicable, r.l, r.r), (false, 2, 2));

        let v3 = PotentialSpec::new(vec![], vec![mono(1.0, 3)]).unwrap();
        assert_eq!(
            theorem22_applicable(&v3, &w1),
            Err(PotentialError::Theorem22(Theorem22Violation::VNotEven))
        );
        let sine = PotentialSpec::new(vec![], vec![PotentialTerm::Sine { coefficient: 1.0, frequency: 1.0 }]).unwrap();
        assert_eq!(
            theorem22_applicable(&v6, &sine),
            Err(PotentialError::Theorem22(Theorem22Violation::NonPolynomial))
        );
        let neg = PotentialSpec::new(vec![mono(-1.0, 6)], vec![]).unwrap();
        assert!(!theorem22_applicable(&neg, &w1).unwrap().applicable);
    }

    #[test]
    fn confinement_examples() {
        let harmonic = OperatorFamily::schrodinger(
            PotentialSpec::new(vec![mono(1.0, 2)], vec![]).unwrap(),
            PotentialSpec::zero(),
            1.0,
        );
        let r = confinement_audit(&harmonic, 0.0, 10.0, 100).unwrap();
        assert!(r.monotone_growth);
        assert_eq!(r.min_radius, r.shell_radii[0]);

        let cubic = catalog("cubic_i").unwrap();
        assert!(confinement_audit(&cubic, 0.1, 10.0, 200).unwrap().monotone_growth);

        let bounded = OperatorFamily::schrodinger(
            PotentialSpec::new(vec![], vec![PotentialTerm::Sine { coefficient: 1.0, frequency: 1.0 }]).unwrap(),
            PotentialSpec::zero(),
            1.0,
        );
        assert!(!confinement_audit(&bounded, 0.0, 10.0, 100).unwrap().monotone_growth);
    }

    #[test]
    fn spec_json_rejects_wrong_parity() {
        let ok: PotentialSpec = serde_json::from_str(
            r#"{"even":[{"kind":"monomial","coefficient":1.0,"power":2}],"odd":[{"kind":"sine","coefficient":0.5,"frequency":1.0}]}"#,
        )
        .unwrap();
        assert_eq!(ok.even_terms().len(), 1);
        let bad = serde_json::from_str::<PotentialSpec>(r#"{"odd":[{"kind":"monomial","coefficient":1.0,"power":2}]}"#);
        assert!(bad.is_err());
    }
}
