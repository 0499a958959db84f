use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use pluriclosed::bismut::{rho_general, rho_two_step};
use pluriclosed::forms::tuples;
use pluriclosed::generate::{gen_two_step, generate_instance, GenControls};
use pluriclosed::liealg::DEFAULT_TOL;
use pluriclosed::{
    catalog, parse_instance, to_instance_string, ComplexStructure, FormBasis, HermitianStructure, InvariantForm, Metric,
    C64,
};

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.sample(StandardNormal))
}

fn random_form(rng: &mut ChaCha8Rng, dim: usize, degree: usize) -> InvariantForm {
    let idx = tuples(dim, degree);
    let terms: Vec<(&[usize], C64)> = idx
        .iter()
        .map(|t| (t.as_slice(), C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))))
        .collect();
    InvariantForm::from_terms(dim, degree, FormBasis::Real, &terms).unwrap()
}

/// Pushes `(μ, J, g)` forward along `h`: `μ' = hμ(h⁻¹·, h⁻¹·)`, `J' = hJh⁻¹`,
/// `g' = h⁻ᵀ g h⁻¹`.
fn push_forward(h: &HermitianStructure, m: &DMatrix<f64>) -> HermitianStructure {
    let mi = m.clone().try_inverse().unwrap();
    let alg = h.algebra().conjugate(m).unwrap();
    let j = ComplexStructure::new(m * h.j() * &mi).unwrap();
    let g = Metric::new(mi.transpose() * h.g() * &mi).unwrap();
    HermitianStructure::new(alg, j, g).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_brackets_are_bilinear_and_antisymmetric(p in 2usize..5, q in 1usize..4, seed in any::<u64>()) {
        let a = gen_two_step(p, q + (p + q) % 2, seed).unwrap();
        let n = a.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        let z = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        let s: f64 = rng.sample(StandardNormal);
        let lhs = a.bracket(&(&x * s + &z), &y).unwrap();
        let rhs = a.bracket(&x, &y).unwrap() * s + a.bracket(&z, &y).unwrap();
        prop_assert!((lhs - rhs).amax() < 1e-12 * (1.0 + s.abs()) * 10.0);
        prop_assert!((a.bracket(&x, &y).unwrap() + a.bracket(&y, &x).unwrap()).amax() < 1e-13);
        let r = a.check_structure(DEFAULT_TOL);
        prop_assert!(r.jacobi_ok && r.two_step);
    }

    #[test]
    fn d_squared_vanishes_on_conjugated_example1(seed in any::<u64>(), k in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = gaussian_matrix(&mut rng, 4) + DMatrix::identity(4, 4) * 3.0;
        let a = catalog("example1").unwrap().algebra.conjugate(&m).unwrap();
        let phi = random_form(&mut rng, 4, k);
        let dd = a.differential(&a.differential(&phi).unwrap()).unwrap();
        let c = a.max_abs_constant().max(1.0);
        prop_assert!(dd.max_abs() <= 1e-10 * c * c * phi.max_abs());
    }

    #[test]
    fn wedge_is_graded_commutative(seed in any::<u64>(), p in 0usize..4, q in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_form(&mut rng, 6, p);
        let b = random_form(&mut rng, 6, q);
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap();
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(ab.sub(&ba.scale(C64::new(sign, 0.0))).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn rho_is_natural_under_isomorphisms(seed in any::<u64>()) {
        // ρ' = h⁻ᵀ ρ h⁻¹ for the pushed-forward structure
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = gaussian_matrix(&mut rng, 4) * 0.3 + DMatrix::identity(4, 4);
        for name in ["example1", "kt4"] {
            let h = catalog(name).unwrap().hermitian().unwrap();
            let hp = push_forward(&h, &m);
            let mi = m.clone().try_inverse().unwrap();
            let want = mi.transpose() * rho_general(&h).unwrap().matrix() * &mi;
            let got = rho_general(&hp).unwrap();
            prop_assert!((got.matrix() - &want).amax() < 1e-9 * (1.0 + want.amax()), "{name}");
            prop_assert_eq!(
                h.skt_check(DEFAULT_TOL).unwrap().is_skt,
                hp.skt_check(DEFAULT_TOL).unwrap().is_skt
            );
        }
    }

    #[test]
    fn skt_is_scale_invariant(seed in 0u64..1000, s in 0.1f64..10.0) {
        let spec = generate_instance(4, 2, seed, &GenControls::default()).unwrap().unwrap();
        let h = spec.hermitian().unwrap();
        let scaled = HermitianStructure::new(
            h.algebra().clone(),
            h.complex_structure().clone(),
            Metric::new(h.g() * s).unwrap(),
        )
        .unwrap();
        prop_assert!(scaled.skt_check(DEFAULT_TOL).unwrap().is_skt);
        // ρ^B is invariant under homotheties
        let a = rho_two_step(&h).unwrap();
        let b = rho_two_step(&scaled).unwrap();
        prop_assert!((a.matrix() - b.matrix()).amax() < 1e-10 * h.scale().powi(2));
    }

    #[test]
    fn generated_instances_round_trip_exactly(seed in 0u64..200) {
        let spec = generate_instance(2, 2, seed, &GenControls::default()).unwrap().unwrap();
        let back = parse_instance(&to_instance_string(&spec)).unwrap();
        prop_assert_eq!(&back.algebra, &spec.algebra);
        prop_assert_eq!(&back.j, &spec.j);
        prop_assert_eq!(&back.g, &spec.g);
    }
}

#[test]
fn example1_is_not_nilpotent_and_has_a_center() {
    let a = catalog("example1").unwrap().algebra;
    let r = a.check_structure(DEFAULT_TOL);
    assert!(r.jacobi_ok && !r.two_step);
    assert_eq!(r.center_dim, 1);
}

#[test]
fn odd_center_dimension_is_a_generation_failure() {
    assert!(generate_instance(3, 3, 1, &GenControls::default()).unwrap().is_none());
}
