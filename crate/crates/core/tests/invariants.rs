use faer::{c64, Mat};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pt_spectra::discretize::{self, pt_residual, BasisSpec, Discretization, Grid, Parity};
use pt_spectra::eigensolve::{conjugate_closure_defect, eig_matrix, eigenvalues, sort_order, sorted};
use pt_spectra::perturbation::{perturbation_matrix, rspe_coefficients};
use pt_spectra::potentials::{catalog, OperatorFamily, PotentialSpec, PotentialTerm};
use pt_spectra::stability::numerical_range_matrix;
use pt_spectra::verify::random_pt_matrix;

fn polynomial_family(even: Vec<f64>, odd: Vec<f64>) -> OperatorFamily {
    let terms = |c: &[f64], first: u32| {
        c.iter().enumerate().map(|(i, &a)| PotentialTerm::monomial(a, first + 2 * i as u32)).collect::<Vec<_>>()
    };
    // Confining x² plus the random even and odd parts.
    let mut v = terms(&even, 4);
    v.push(PotentialTerm::monomial(1.0, 2));
    let spec = PotentialSpec::new(v, terms(&odd, 1)).unwrap();
    OperatorFamily::schrodinger(spec, PotentialSpec::zero(), 1.0)
}

fn eigenvalue_scale(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(1.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn discretized_pt_operators_have_zero_residual(
        even in prop::collection::vec(0.0..2.0f64, 0..3),
        odd in prop::collection::vec(-2.0..2.0f64, 1..3),
        n in 20usize..120,
        modes in 8usize..40,
    ) {
        let fam = polynomial_family(even, odd);
        let fd = discretize::build(&fam, 0.0, Some(&Discretization::FiniteDifference(Grid::new(6.0, n).unwrap()))).unwrap();
        prop_assert!(fd.pt_residual() <= 1e-15);
        let basis = discretize::build(&fam, 0.0, Some(&Discretization::Basis(BasisSpec::new(modes, 1.0).unwrap()))).unwrap();
        prop_assert!(basis.pt_residual() <= 1e-13);
    }

    #[test]
    fn pt_residual_detects_broken_symmetry(seed in any::<u64>(), n in 2usize..12, t in 1e-3..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_pt_matrix(n, &mut rng);
        let p = Parity::Reversal(n);
        prop_assert!(pt_residual(h.as_ref(), &p) <= 1e-14);
        // An imaginary diagonal entry that is not mirrored breaks PT symmetry.
        let mut broken = h.clone();
        broken[(0, 0)] += c64::new(0.0, t * (1.0 + h.norm_l2()));
        prop_assert!(pt_residual(broken.as_ref(), &p) > 1e-4);
    }

    #[test]
    fn pt_spectra_are_conjugation_closed(seed in any::<u64>(), n in 2usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_pt_matrix(n, &mut rng);
        let values = eig_matrix(h.as_ref()).unwrap().values();
        // Eigenvalue sensitivity grows near coalescence; 1e-6 relative is generous for random draws.
        prop_assert!(conjugate_closure_defect(&values) <= 1e-6 * eigenvalue_scale(&values));
    }

    #[test]
    fn sorting_is_a_permutation_ordered_by_real_part(
        parts in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..40),
    ) {
        let v: Vec<c64> = parts.iter().map(|&(a, b)| c64::new(a, b)).collect();
        let mut idx = sort_order(&v);
        let s = sorted(&v);
        prop_assert_eq!(s.len(), v.len());
        for w in s.windows(2) {
            prop_assert!(w[0].re <= w[1].re + 1e-9 * eigenvalue_scale(&v));
        }
        idx.sort_unstable();
        prop_assert_eq!(idx, (0..v.len()).collect::<Vec<_>>());
    }

    #[test]
    fn numerical_range_contains_spectrum_and_rayleigh_quotients(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_pt_matrix(n, &mut rng);
        let b = numerical_range_matrix(h.as_ref(), 64).unwrap();
        let tol = 1e-10 * (1.0 + h.norm_l2());
        for z in eig_matrix(h.as_ref()).unwrap().values() {
            prop_assert!(b.outer_distance(z) <= tol);
        }
        let u = Mat::<c64>::from_fn(n, 1, |i, _| c64::new((i as f64 + 1.0).sin(), (seed % 7) as f64 * 0.1 * i as f64));
        let q = (u.adjoint() * &h * &u)[(0, 0)] / (u.adjoint() * &u)[(0, 0)];
        prop_assert!(b.outer_distance(q) <= tol);
    }

    #[test]
    fn finite_difference_error_is_second_order(n in 150usize..400) {
        // p² + x²: ground state 1.
        let fam = polynomial_family(vec![], vec![0.0]);
        let err = |n: usize| {
            let op = discretize::build(&fam, 0.0, Some(&Discretization::FiniteDifference(Grid::new(8.0, n).unwrap()))).unwrap();
            (eigenvalues(&op).unwrap()[0] - c64::new(1.0, 0.0)).norm()
        };
        let (e1, e2) = (err(n), err(2 * n + 1));
        // Halving h divides the error by about 4.
        prop_assert!(e2 < e1);
        prop_assert!((3.5..4.5).contains(&(e1 / e2)), "ratio {}", e1 / e2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The truncated series misses the eigenvalue by O(ε^{N+1}).
    #[test]
    fn series_remainder_slope(order in 1usize..=3, e1 in 1e-3..2e-3f64, e2 in 5e-3..1e-2f64) {
        let fam = catalog("harmonic_quartic").unwrap();
        let disc = Discretization::Basis(BasisSpec::new(40, 1.0).unwrap());
        let h0 = discretize::build(&fam, 0.0, Some(&disc)).unwrap();
        let w = perturbation_matrix(&fam, Some(&disc)).unwrap();
        let series = rspe_coefficients(&h0, w.as_ref(), c64::new(1.0, 0.0), order).unwrap();
        let remainder = |e: f64| {
            let op = discretize::build(&fam, e, Some(&disc)).unwrap();
            let v = eigenvalues(&op).unwrap();
            let target = series.evaluate(e);
            v.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min)
        };
        let slope = (remainder(e2) / remainder(e1)).ln() / (e2 / e1).ln();
        prop_assert!(slope >= order as f64 + 0.5, "order {order}: slope {slope}");
    }
}

/// Diagonal basis element against a direct quadrature of the Gaussian moment
/// `⟨0|x⁴|0⟩ = ∫x⁴e^{−x²}dx/√π = 3/4` and `⟨0|p²|0⟩ = 1/2`.
#[test]
fn basis_matrix_element_matches_gaussian_moment() {
    let steps = 20_000;
    let (a, b) = (-12.0f64, 12.0f64);
    let h = (b - a) / steps as f64;
    let moment: f64 = (0..=steps)
        .map(|i| {
            let x = a + i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            w * x.powi(4) * (-x * x).exp()
        })
        .sum::<f64>()
        * h
        / std::f64::consts::PI.sqrt();
    assert!((moment - 0.75).abs() < 1e-12);
    let spec = PotentialSpec::new(vec![PotentialTerm::monomial(1.0, 4)], vec![]).unwrap();
    let fam = OperatorFamily::schrodinger(spec, PotentialSpec::zero(), 1.0);
    let op = discretize::build(&fam, 0.0, Some(&Discretization::Basis(BasisSpec::new(12, 1.0).unwrap()))).unwrap();
    assert!((op.matrix[(0, 0)] - c64::new(0.5 + moment, 0.0)).norm() < 1e-12);
}
