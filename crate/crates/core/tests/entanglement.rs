mod common;

use std::time::Instant;

use picturelab::entanglement::*;
use picturelab::fock::*;
use picturelab::states::*;
use picturelab::tol::Tolerances;
use picturelab::{CMatrix, CVector, Error, C64};
use proptest::prelude::*;

/// Dense-eigensolve values of the Alice|Bob negativity of rho_T at m=2,
/// n_max_per_pair=8.
const RHO_T_NEGATIVITY: [(f64, f64); 3] = [
    (0.3, 0.04712041883530396),
    (0.6, 0.21950882301396693),
    (0.9, 0.6756885135346322),
];

#[test]
fn rho_t_negativity_pinned() {
    let cut = Bipartition::alice_bob(2).unwrap();
    let start = Instant::now();
    for (eta, want) in RHO_T_NEGATIVITY {
        let t = rho_t(eta, 2, 8, PhaseAverageMethod::Analytic).unwrap();
        let n = negativity(&t, &cut).unwrap();
        assert!(n > TOL_NEG_FLOOR);
        assert!((n - want).abs() < 1e-8, "eta={eta}: {n} vs {want}");
        let v = classify(&t, &cut).unwrap();
        assert_eq!(v.status, SeparabilityStatus::EntangledCertified);
    }
    assert!(start.elapsed().as_secs() < 120);
}

const TOL_NEG_FLOOR: f64 = picturelab::tol::TOL_NEG;

#[test]
fn rho_s_separable() {
    let r = rho_s(0.5, 12).unwrap();
    let cut = Bipartition::two_mode();
    assert!(negativity(&r, &cut).unwrap().abs() < 1e-10);
    let v = separable_certificate_diagonal(&r, &cut).unwrap();
    assert_eq!(v.status, SeparabilityStatus::SeparableCertified);
    let terms = v.certificate.unwrap();
    assert_eq!(terms.len(), 13);
    for (n, t) in terms.iter().enumerate() {
        assert!((t.weight - 0.75 * 0.25f64.powi(n as i32)).abs() < 1e-15);
        assert_eq!((t.a[0], t.b[0]), (n, n));
    }
}

#[test]
fn bell_state_verdicts() {
    let s = ModeShape::new(vec![2, 2]).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let phi = Ket::new(
        s,
        CVector::from_vec(vec![
            C64::new(h, 0.0),
            C64::default(),
            C64::default(),
            C64::new(h, 0.0),
        ]),
    )
    .unwrap();
    let cut = Bipartition::two_mode();
    assert!((negativity(&phi.projector(), &cut).unwrap() - 0.5).abs() < 1e-14);
    let v = classify(&phi.projector(), &cut).unwrap();
    assert_eq!(v.status, SeparabilityStatus::EntangledCertified);
    let json = serde_json::to_value(&v).unwrap();
    assert_eq!(json["status"], "entangled-certified");
    assert!(json.get("certificate").is_none());
}

#[test]
fn laser_pictures_under_number_measurement() {
    let cs = coherent_phase_decomposition(1.0, 20, 32).unwrap();
    let ns = number_state_decomposition(1.0, 20).unwrap();
    assert!(decomposition_equivalent(&cs, &ns, 1e-12).unwrap());
    let povm = number_basis_povm(cs.shape());
    assert!(statistics_invariance_check(&cs, &ns, &povm, 1e-12).unwrap());
    let p = outcome_probabilities(&assemble_density(&cs).unwrap(), &povm).unwrap();
    let mut fact = 1.0;
    for (n, pn) in p.iter().enumerate() {
        if n > 0 {
            fact *= n as f64;
        }
        assert!((pn - (-1f64).exp() / fact).abs() < 1e-14);
    }
}

#[test]
fn single_term_number_states_differ() {
    let s = ModeShape::new(vec![2]).unwrap();
    let d0 = Decomposition::uniform(vec![number_ket(&s, &[0]).unwrap()]).unwrap();
    let d1 = Decomposition::uniform(vec![number_ket(&s, &[1]).unwrap()]).unwrap();
    assert!(!decomposition_equivalent(&d0, &d1, 1e-12).unwrap());
}

#[test]
fn povm_must_resolve_identity() {
    let s = ModeShape::new(vec![3]).unwrap();
    let d = Decomposition::uniform(vec![number_ket(&s, &[0]).unwrap()]).unwrap();
    let mut povm = number_basis_povm(&s);
    povm.pop();
    assert!(matches!(
        statistics_invariance_check(&d, &d, &povm, 1e-10),
        Err(Error::Validation(_))
    ));
}

fn random_diagonal_state(seed: u64, da: usize, db: usize) -> DensityOp {
    use rand::Rng;
    let mut rng = common::rng(seed);
    let w: Vec<f64> = (0..da * db).map(|_| rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    let diag = CVector::from_iterator(da * db, w.iter().map(|x| C64::new(x / total, 0.0)));
    DensityOp::new(
        ModeShape::new(vec![da, db]).unwrap(),
        CMatrix::from_diagonal(&diag),
        &Tolerances::default(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn negativity_invariant_under_local_unitaries(seed in any::<u64>(), terms in 1usize..4) {
        let mut rng = common::rng(seed);
        let s = ModeShape::new(vec![3, 3]).unwrap();
        let r = assemble_density(&common::random_decomposition(&mut rng, &s, terms)).unwrap();
        let u = common::local_unitary(&mut rng, 3, 3);
        let rotated = &u * r.matrix() * u.adjoint();
        let rotated = (&rotated + rotated.adjoint()) * C64::new(0.5, 0.0);
        let r2 = DensityOp::new(s, rotated, &Tolerances::default()).unwrap();
        let cut = Bipartition::two_mode();
        prop_assert!((raw_negativity(&r, &cut).unwrap() - raw_negativity(&r2, &cut).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn product_diagonal_states_have_no_negativity(seed in any::<u64>(), da in 1usize..5, db in 1usize..5) {
        let r = random_diagonal_state(seed, da, db);
        let cut = Bipartition::two_mode();
        prop_assert_eq!(negativity(&r, &cut).unwrap(), 0.0);
        let v = separable_certificate_diagonal(&r, &cut).unwrap();
        prop_assert_eq!(v.status, SeparabilityStatus::SeparableCertified);
        let back = certificate_operator(r.shape(), &cut, &v.certificate.unwrap()).unwrap();
        prop_assert!(trace_distance(&r, &back).unwrap() < 1e-12);
    }

    #[test]
    fn remixed_ensembles_share_statistics(seed in any::<u64>(), terms in 1usize..5) {
        let mut rng = common::rng(seed);
        let s = ModeShape::new(vec![2, 3]).unwrap();
        let d1 = common::random_decomposition(&mut rng, &s, terms);
        let d2 = common::remix(&mut rng, &d1, terms + 2);
        let u = common::random_unitary(&mut rng, 6);
        let povm: Vec<CMatrix> = (0..6).map(|k| { let c = u.column(k); c * c.adjoint() }).collect();
        prop_assert!(statistics_invariance_check(&d1, &d2, &povm, 1e-10).unwrap());
        prop_assert!(statistics_invariance_check(&d1, &d2, &number_basis_povm(&s), 1e-10).unwrap());
    }
}
