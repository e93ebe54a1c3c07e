//! Hermite functions, Gauss–Hermite rules and Galerkin assembly in the
//! oscillator basis `φₙ(x) = ω^{1/4} ψₙ(√ω x)`.

use faer::{c64, Mat};

use super::DiscretizeError;
use crate::linalg::CMat;
use crate::potentials::{EffectivePotential, Parity as TermParity, PotentialTerm, EXP_SQUARE_CLAMP};
use crate::tridiag::{hermitian_eigen, Tridiagonal};

/// Values `ψ₀(ξ), …, ψ_{m−1}(ξ)` of the normalized Hermite functions.
pub fn hermite_functions(xi: f64, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m);
    if m == 0 {
        return out;
    }
    let p0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    out.push(p0);
    if m > 1 {
        out.push(std::f64::consts::SQRT_2 * xi * p0);
    }
    for n in 1..m.saturating_sub(1) {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * xi * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// A Gauss–Hermite rule in the "function" normalization: for integrands
/// `ψₘ ψₙ f`, `∫ ψₘ ψₙ f dξ ≈ Σ w̃ₖ ψₘ(ξₖ) ψₙ(ξₖ) f(ξₖ)`, with
/// `w̃ₖ = wₖ e^{ξₖ²}` computed directly as `1/Σ_{n<M} ψₙ(ξₖ)²`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub scaled_weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1);
        // Jacobi matrix of the Hermite polynomials (weight e^{−ξ²}).
        let off: Vec<c64> = (1..m).map(|k| c64::new((k as f64 / 2.0).sqrt(), 0.0)).collect();
        let t = Tridiagonal { sub: off.clone(), diag: vec![c64::new(0.0, 0.0); m], sup: off };
        let (mut nodes, _) = if m == 1 { (vec![0.0], None) } else { hermitian_eigen(&t, false) };
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let psi = hermite_functions(*x, m + 1);
                let f = psi[m];
                let df = (2.0 * m as f64).sqrt() * psi[m - 1] - *x * f;
                if df != 0.0 {
                    *x -= f / df;
                }
            }
        }
        nodes.sort_by(|a, b| a.total_cmp(b));
        for k in 0..m / 2 {
            let s = 0.5 * (nodes[m - 1 - k] - nodes[k]);
            nodes[k] = -s;
            nodes[m - 1 - k] = s;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        let scaled_weights = nodes
            .iter()
            .map(|&x| 1.0 / hermite_functions(x, m).iter().map(|p| p * p).sum::<f64>())
            .collect();
        GaussHermite { nodes, scaled_weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Number of quadrature nodes used for `n_modes` basis functions.
pub fn quadrature_size(n_modes: usize) -> usize {
    2 * n_modes + 16
}

/// `⟨m|ξ²|n⟩` (`sign = +1`) or `⟨m|p_ξ²|n⟩` (`sign = −1`) in the Hermite basis.
fn ladder_quadratic(m: usize, n: usize, sign: f64) -> f64 {
    if m == n {
        (2 * n + 1) as f64 / 2.0
    } else if m == n + 2 {
        sign * (((n + 1) * (n + 2)) as f64).sqrt() / 2.0
    } else if n == m + 2 {
        sign * (((m + 1) * (m + 2)) as f64).sqrt() / 2.0
    } else {
        0.0
    }
}

/// Galerkin matrix of `p² + U` in the first `n_modes` oscillator functions.
pub fn assemble(potential: &EffectivePotential, n_modes: usize, omega: f64) -> Result<CMat, DiscretizeError> {
    let zero = c64::new(0.0, 0.0);
    let mut h = Mat::from_fn(n_modes, n_modes, |m, n| c64::new(omega * ladder_quadratic(m, n, -1.0), 0.0));
    let mut quad_even: Vec<(c64, PotentialTerm)> = Vec::new();
    let mut quad_odd: Vec<(c64, PotentialTerm)> = Vec::new();
    for &(w, t) in potential.active_terms() {
        match t {
            PotentialTerm::Monomial { coefficient, power: 2 } => {
                let c = w * coefficient / omega;
                for n in 0..n_modes {
                    for m in n.saturating_sub(2)..(n + 3).min(n_modes) {
                        let e = ladder_quadratic(m, n, 1.0);
                        if e != 0.0 {
                            h[(m, n)] += c * e;
                        }
                    }
                }
            }
            PotentialTerm::Monomial { power: 0, coefficient } => {
                for n in 0..n_modes {
                    h[(n, n)] += w * coefficient;
                }
            }
            _ => match t.parity() {
                TermParity::Even => quad_even.push((w, t)),
                TermParity::Odd => quad_odd.push((w, t)),
            },
        }
    }
    if quad_even.is_empty() && quad_odd.is_empty() {
        return Ok(h);
    }
    let has_exp = quad_even.iter().any(|(_, t)| matches!(t, PotentialTerm::ExpSquare { .. }));
    if has_exp && omega <= 1.0 {
        return Err(DiscretizeError::QuadratureNonConvergence(format!(
            "exp(x²) matrix elements diverge for basis scale ω = {omega} ≤ 1"
        )));
    }
    let rule = GaussHermite::new(quadrature_size(n_modes));
    let sqrt_omega = omega.sqrt();
    let mm = rule.len();
    let mut psi = Mat::<f64>::zeros(mm, n_modes);
    for k in 0..mm {
        let vals = hermite_functions(rule.nodes[k], n_modes);
        for (n, v) in vals.into_iter().enumerate() {
            psi[(k, n)] = v;
        }
    }
    for (terms, parity_bit) in [(&quad_even, 0usize), (&quad_odd, 1usize)] {
        if terms.is_empty() {
            continue;
        }
        let mut weighted = Mat::<c64>::zeros(mm, n_modes);
        for k in 0..mm {
            let x = rule.nodes[k] / sqrt_omega;
            if has_exp && x.abs() > EXP_SQUARE_CLAMP {
                return Err(DiscretizeError::QuadratureNonConvergence(format!(
                    "quadrature node x = {x:.3} lies beyond the exp(x²) clamp {EXP_SQUARE_CLAMP}"
                )));
            }
            let mut f = zero;
            for (w, t) in terms.iter() {
                f += *w * t.value(x)?;
            }
            let f = f * rule.scaled_weights[k];
            for n in 0..n_modes {
                weighted[(k, n)] = f * psi[(k, n)];
            }
        }
        let psi_c = Mat::from_fn(mm, n_modes, |k, n| c64::new(psi[(k, n)], 0.0));
        let block = psi_c.transpose() * &weighted;
        for n in 0..n_modes {
            for m in 0..n_modes {
                if (m + n) % 2 == parity_bit {
                    h[(m, n)] += 0.5 * (block[(m, n)] + block[(n, m)]);
                }
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_hermite_orthonormality() {
        let n = 12;
        let rule = GaussHermite::new(quadrature_size(n));
        for a in 0..n {
            for b in 0..n {
                let s: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.scaled_weights)
                    .map(|(&x, &w)| {
                        let p = hermite_functions(x, n);
                        w * p[a] * p[b]
                    })
                    .sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12, "{a} {b} {s}");
            }
        }
    }

    #[test]
    fn nodes_are_symmetric_roots() {
        let rule = GaussHermite::new(9);
        assert_eq!(rule.nodes[4], 0.0);
        for k in 0..4 {
            assert_eq!(rule.nodes[k], -rule.nodes[8 - k]);
        }
        // Known largest root of H_9.
        assert!((rule.nodes[8] - 3.190993201781528).abs() < 1e-12);
    }
}
