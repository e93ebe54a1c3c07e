use faer::{c64, Mat};

use super::{PotentialError, PotentialSpec, PotentialTerm};
use crate::linalg::{CMat, RMat};

/// Relative PT residual accepted for user-supplied matrix triples.
const MATRIX_PT_TOL: f64 = 1e-10;

/// A potential at fixed ε as a sum of complex-weighted real terms.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectivePotential {
    pub terms: Vec<(c64, PotentialTerm)>,
}

impl EffectivePotential {
    pub fn evaluate(&self, x: f64) -> Result<c64, PotentialError> {
        if !x.is_finite() {
            return Err(PotentialError::NonFinite { x });
        }
        let mut acc = c64::new(0.0, 0.0);
        for (w, t) in &self.terms {
            if *w != c64::new(0.0, 0.0) {
                acc += *w * t.value(x)?;
            }
        }
        Ok(acc)
    }

    /// Terms with a nonzero weight.
    pub fn active_terms(&self) -> impl Iterator<Item = &(c64, PotentialTerm)> {
        self.terms.iter().filter(|(w, t)| *w != c64::new(0.0, 0.0) && t.coefficient() != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchrodingerFamily {
    /// `p² + V + εW`.
    Affine { v: PotentialSpec, w: PotentialSpec },
    /// `p² + x²(1 − εx)²`, rebuilt per ε.
    DoubleWell,
}

impl SchrodingerFamily {
    pub fn potential_at(&self, epsilon: f64) -> EffectivePotential {
        let one = c64::new(1.0, 0.0);
        let i = c64::new(0.0, 1.0);
        match self {
            SchrodingerFamily::Affine { v, w } => {
                let mut terms = Vec::new();
                terms.extend(v.even_terms().iter().map(|t| (one, *t)));
                terms.extend(v.odd_terms().iter().map(|t| (i, *t)));
                terms.extend(w.even_terms().iter().map(|t| (one * epsilon, *t)));
                terms.extend(w.odd_terms().iter().map(|t| (i * epsilon, *t)));
                EffectivePotential { terms }
            }
            SchrodingerFamily::DoubleWell => EffectivePotential {
                terms: vec![
                    (one, PotentialTerm::monomial(1.0, 2)),
                    (one, PotentialTerm::monomial(-2.0 * epsilon, 3)),
                    (one, PotentialTerm::monomial(epsilon * epsilon, 4)),
                ],
            },
        }
    }

    /// Whether `V + εW` is `𝒫𝒯`-symmetric for real ε. The double well has a
    /// real odd cubic term and is not.
    pub fn is_pt_symmetric(&self) -> bool {
        matches!(self, SchrodingerFamily::Affine { .. })
    }

    pub fn v(&self) -> Option<&PotentialSpec> {
        match self {
            SchrodingerFamily::Affine { v, .. } => Some(v),
            SchrodingerFamily::DoubleWell => None,
        }
    }

    pub fn w(&self) -> Option<&PotentialSpec> {
        match self {
            SchrodingerFamily::Affine { w, .. } => Some(w),
            SchrodingerFamily::DoubleWell => None,
        }
    }
}

/// Explicit triple `(H₀, W, P)` with `H(ε) = H₀ + εW`.
#[derive(Debug, Clone)]
pub struct MatrixFamily {
    pub h0: CMat,
    pub w: CMat,
    pub p: RMat,
}

impl MatrixFamily {
    pub fn dim(&self) -> usize {
        self.h0.nrows()
    }

    pub fn matrix_at(&self, epsilon: f64) -> CMat {
        let eps = c64::new(epsilon, 0.0);
        Mat::from_fn(self.dim(), self.dim(), |i, j| self.h0[(i, j)] + eps * self.w[(i, j)])
    }
}

#[derive(Debug, Clone)]
pub enum Variant {
    Schrodinger(SchrodingerFamily),
    Matrix(MatrixFamily),
}

#[derive(Debug, Clone)]
pub struct OperatorFamily {
    pub name: Option<String>,
    pub variant: Variant,
    pub epsilon_max: f64,
}

impl OperatorFamily {
    pub fn schrodinger(v: PotentialSpec, w: PotentialSpec, epsilon_max: f64) -> Self {
        OperatorFamily {
            name: None,
            variant: Variant::Schrodinger(SchrodingerFamily::Affine { v, w }),
            epsilon_max,
        }
    }

    pub fn double_well(epsilon_max: f64) -> Self {
        OperatorFamily { name: None, variant: Variant::Schrodinger(SchrodingerFamily::DoubleWell), epsilon_max }
    }

    /// Validates shapes, `P² = I`, `P = Pᵀ` and the PT symmetry of `H₀` and `W`.
    pub fn matrix(h0: CMat, w: CMat, p: RMat, epsilon_max: f64) -> Result<Self, PotentialError> {
        let n = h0.nrows();
        if n == 0 || h0.ncols() != n || w.nrows() != n || w.ncols() != n || p.nrows() != n || p.ncols() != n {
            return Err(PotentialError::BadMatrixFamily("H0, W and P must be square of equal size".into()));
        }
        if !(epsilon_max > 0.0) {
            return Err(PotentialError::BadMatrixFamily("epsilon_max must be positive".into()));
        }
        let pp = &p * &p;
        let mut inv_defect = 0.0f64;
        let mut sym_defect = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                inv_defect = inv_defect.max((pp[(i, j)] - id).abs());
                sym_defect = sym_defect.max((p[(i, j)] - p[(j, i)]).abs());
            }
        }
        if inv_defect > 1e-12 || sym_defect > 1e-12 {
            return Err(PotentialError::BadMatrixFamily("P must be a real symmetric involution".into()));
        }
        let parity = crate::discretize::Parity::Dense(p.clone());
        for (label, m) in [("H0", &h0), ("W", &w)] {
            let r = crate::discretize::pt_residual(m.as_ref(), &parity);
            if r > MATRIX_PT_TOL {
                return Err(PotentialError::BadMatrixFamily(format!(
                    "{label} is not PT-symmetric (relative residual {r:.3e})"
                )));
            }
        }
        Ok(OperatorFamily { name: None, variant: Variant::Matrix(MatrixFamily { h0, w, p }), epsilon_max })
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }

    pub fn schrodinger_family(&self) -> Option<&SchrodingerFamily> {
        match &self.variant {
            Variant::Schrodinger(s) => Some(s),
            Variant::Matrix(_) => None,
        }
    }

    pub fn matrix_family(&self) -> Option<&MatrixFamily> {
        match &self.variant {
            Variant::Matrix(m) => Some(m),
            Variant::Schrodinger(_) => None,
        }
    }

    pub fn is_pt_symmetric(&self) -> bool {
        match &self.variant {
            Variant::Schrodinger(s) => s.is_pt_symmetric(),
            Variant::Matrix(_) => true,
        }
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("inline")
    }
}
