//! Randomized invariants of the winding number, inertia and both indices.

use morse_index::conjugate::{conjugate_index, det_winding, ConjugateConfig};
use morse_index::specflow::spectral_index_inertia;
use morse_index::{
    inertia, shooting_matrix, winding_number, Contour, Family, GalerkinConfig, Matrix,
    MorseSturmSystem,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn contour() -> Contour<f64> {
    Contour::around_unit_interval(0.25).unwrap()
}

/// Roots kept at least 0.05 away from the default contour.
fn root() -> impl Strategy<Value = (f64, f64)> {
    (-1.0f64..2.0, -0.8f64..0.8).prop_filter("root too close to the contour", |&(re, im)| {
        let d_re = (re + 0.25).abs().min((re - 1.25).abs());
        let d_im = (im.abs() - 0.25).abs();
        let inside_re = re > -0.25 && re < 1.25;
        let inside_im = im.abs() < 0.25;
        (inside_re || d_re > 0.05)
            && (inside_im || d_im > 0.05)
            && !(inside_re && d_im < 0.05)
            && !(inside_im && d_re < 0.05)
    })
}

fn enclosed(r: &(f64, f64)) -> bool {
    r.0 > -0.25 && r.0 < 1.25 && r.1.abs() < 0.25
}

fn poly(roots: &[(f64, f64)], z: Complex64) -> Complex64 {
    roots
        .iter()
        .map(|&(a, b)| z - Complex64::new(a, b))
        .product()
}

fn wind(f: impl Fn(Complex64) -> Complex64) -> i64 {
    winding_number(|z| Ok(f(z)), &contour(), None)
        .unwrap()
        .winding
}

/// Closed-form index of `diag(J) u'' + t² diag(κ) u = 0`: each entry with
/// `J_i κ_i > 0` contributes `J_i ⌊√(J_i κ_i)/π⌋`.
fn diagonal_index(signs: &[f64], kappas: &[f64]) -> i64 {
    signs
        .iter()
        .zip(kappas)
        .map(|(&j, &k)| {
            if j * k > 0.0 {
                j as i64 * ((j * k).sqrt() / std::f64::consts::PI).floor() as i64
            } else {
                0
            }
        })
        .sum()
}

fn frac_distance(k: f64) -> f64 {
    let r = k.abs().sqrt() / std::f64::consts::PI;
    (r - r.round()).abs()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn winding_counts_enclosed_roots(roots in prop::collection::vec(root(), 0..5)) {
        let expected = roots.iter().filter(|r| enclosed(r)).count() as i64;
        prop_assert_eq!(wind(|z| poly(&roots, z)), expected);
    }

    #[test]
    fn winding_is_additive_over_products(a in prop::collection::vec(root(), 0..4), b in prop::collection::vec(root(), 0..4)) {
        let wa = wind(|z| poly(&a, z));
        let wb = wind(|z| poly(&b, z));
        prop_assert_eq!(wind(|z| poly(&a, z) * poly(&b, z)), wa + wb);
        // reciprocals wind backwards
        prop_assert_eq!(wind(|z| poly(&a, z) / poly(&b, z)), wa - wb);
    }

    #[test]
    fn congruence_preserves_inertia(
        d in prop::collection::vec(prop_oneof![-5.0f64..-0.1, 0.1f64..5.0, Just(0.0)], 1..6),
        seed in prop::collection::vec(-1.0f64..1.0, 36),
    ) {
        let n = d.len();
        let a = Matrix::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 });
        // unit lower triangular times a diagonal of magnitude ≥ 1 is invertible
        let p = Matrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => seed[i * 6 + j],
            std::cmp::Ordering::Equal => 1.0 + seed[i * 6 + j].abs(),
            std::cmp::Ordering::Less => 0.0,
        });
        let congruent = p.mul(&a).mul(&p.transpose()).symmetrized();
        let expected = inertia(&a).unwrap();
        let got = inertia(&congruent).unwrap();
        prop_assert_eq!((got.n_minus, got.n_zero, got.n_plus), (expected.n_minus, expected.n_zero, expected.n_plus));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10, ..ProptestConfig::default() })]

    #[test]
    fn nonzero_constant_multiples_keep_the_winding(re in -50.0f64..50.0, im in -50.0f64..50.0) {
        prop_assume!(re.hypot(im) > 1e-3);
        let c = Complex64::new(re, im);
        let sys = MorseSturmSystem::const_diag(0, vec![61.68502750680849]).unwrap();
        let family = Family::new(&sys);
        let trace = winding_number(
            |z| Ok(c * shooting_matrix(&family, z.into(), 1000)?[(0, 0)]),
            &contour(),
            None,
        ).unwrap();
        prop_assert_eq!(trace.winding, 2);
    }

    #[test]
    fn transposed_shooting_matrix_winds_alike(
        kappas in prop::collection::vec(-150.0f64..150.0, 1..3),
        nu_raw in 0usize..3,
    ) {
        prop_assume!(kappas.iter().all(|&k| frac_distance(k) > 0.03));
        let nu = nu_raw.min(kappas.len());
        let sys = MorseSturmSystem::const_diag(nu, kappas).unwrap();
        let family = Family::new(&sys);
        let direct = det_winding(&family, &contour(), 1000).unwrap().winding;
        let transposed = winding_number(
            |z| morse_index::determinant(&shooting_matrix(&family, z.into(), 1000)?.transpose()),
            &contour(),
            None,
        ).unwrap().winding;
        prop_assert_eq!(direct, transposed);
    }

    #[test]
    fn diagonal_systems_match_the_closed_form(
        kappas in prop::collection::vec(-250.0f64..250.0, 1..4),
        nu_raw in 0usize..4,
    ) {
        prop_assume!(kappas.iter().all(|&k| frac_distance(k) > 0.03));
        let nu = nu_raw.min(kappas.len());
        let n = kappas.len();
        let signs: Vec<f64> = (0..n).map(|i| if i < n - nu { 1.0 } else { -1.0 }).collect();
        let expected = diagonal_index(&signs, &kappas);
        let sys = MorseSturmSystem::const_diag(nu, kappas).unwrap();
        let con = conjugate_index(&sys, &ConjugateConfig::default()).unwrap();
        prop_assert_eq!(con.mu_con, expected);
        let spec = spectral_index_inertia(&sys, &GalerkinConfig::default()).unwrap();
        prop_assert_eq!(spec.value, expected);
    }
}
