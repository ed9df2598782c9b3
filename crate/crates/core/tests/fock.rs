mod common;

use picturelab::fock::*;
use picturelab::states::coherent_ket;
use picturelab::tol::Tolerances;
use picturelab::{CMatrix, Error, C64};
use proptest::prelude::*;

fn shape(d: &[usize]) -> ModeShape {
    ModeShape::new(d.to_vec()).unwrap()
}

#[test]
fn number_kets() {
    let v = number_ket(&shape(&[4]), &[0]).unwrap();
    assert_eq!(v.amps().as_slice()[0], C64::new(1.0, 0.0));
    assert!(v.amps().iter().skip(1).all(|a| *a == C64::new(0.0, 0.0)));
    let k = number_ket(&shape(&[2, 2]), &[1, 1]).unwrap();
    assert_eq!(k.amps()[3], C64::new(1.0, 0.0));
    assert!(matches!(
        number_ket(&shape(&[3]), &[3]),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn assembled_half_mixture() {
    let s = shape(&[2]);
    let d = Decomposition::new(
        vec![0.5, 0.5],
        vec![number_ket(&s, &[0]).unwrap(), number_ket(&s, &[1]).unwrap()],
    )
    .unwrap();
    let r = assemble_density(&d).unwrap();
    assert_eq!(r.diagonal(), vec![0.5, 0.5]);
    assert_eq!(r.max_off_diagonal(), 0.0);
}

#[test]
fn pure_distances() {
    let s = shape(&[3]);
    let a = number_ket(&s, &[0]).unwrap().projector();
    let b = number_ket(&s, &[1]).unwrap().projector();
    assert!(trace_distance(&a, &a).unwrap().abs() < 1e-15);
    assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-14);
    assert!(matches!(
        trace_distance(&a, &number_ket(&shape(&[4]), &[0]).unwrap().projector()),
        Err(Error::Shape(_))
    ));
}

#[test]
fn coherent_number_expectation() {
    let k = coherent_ket(1.3, 0.2, 40).unwrap();
    let n = number_operator(k.shape(), 0).unwrap();
    let v = expectation(&k.projector(), &n, &Tolerances::default()).unwrap();
    assert!((v - 1.69).abs() < 1e-12);
    let id = CMatrix::identity(41, 41);
    let t = expectation(&k.projector(), &id, &Tolerances::default()).unwrap();
    assert!((t - k.norm_sqr()).abs() < 1e-15);
}

#[test]
fn non_hermitian_observable_rejected() {
    let r = number_ket(&shape(&[2]), &[0]).unwrap().projector();
    let mut obs = CMatrix::zeros(2, 2);
    obs[(0, 1)] = C64::new(1.0, 0.0);
    assert!(matches!(
        expectation(&r, &obs, &Tolerances::default()),
        Err(Error::Validation(_))
    ));
}

#[test]
fn ket_json_roundtrip() {
    let k = coherent_ket(0.7, 1.9, 12).unwrap();
    let s = serde_json::to_string(&k).unwrap();
    assert!(s.starts_with(r#"{"dims":[13],"re":["#));
    let back: Ket = serde_json::from_str(&s).unwrap();
    assert_eq!(back, k);
}

fn shapes() -> impl Strategy<Value = ModeShape> {
    prop_oneof![
        Just(vec![2, 3]),
        Just(vec![3, 2]),
        Just(vec![2, 2, 2]),
        Just(vec![3, 3])
    ]
    .prop_map(|d| ModeShape::new(d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn assembled_states_are_psd(s in shapes(), terms in 1usize..6, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let d = common::random_decomposition(&mut rng, &s, terms);
        let r = assemble_density(&d).unwrap();
        prop_assert!(r.min_eigenvalue(&Tolerances::default()).unwrap() >= -1e-10);
        prop_assert!((r.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_is_linear(s in shapes(), terms in 1usize..5, seed in any::<u64>(), keep in 0usize..2) {
        let mut rng = common::rng(seed);
        let d = common::random_decomposition(&mut rng, &s, terms);
        let whole = partial_trace(&assemble_density(&d).unwrap(), &[keep]).unwrap();
        let mut sum = CMatrix::zeros(whole.dim(), whole.dim());
        for (w, k) in d.weights().iter().zip(d.kets()) {
            sum += partial_trace(&k.projector(), &[keep]).unwrap().matrix() * C64::new(*w, 0.0);
        }
        prop_assert!((whole.matrix() - sum).camax() < 1e-12);
    }

    #[test]
    fn partial_transpose_involution(s in shapes(), terms in 1usize..5, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let r = assemble_density(&common::random_decomposition(&mut rng, &s, terms)).unwrap();
        let pt = partial_transpose(&r, &[0]).unwrap();
        prop_assert!((pt.trace() - r.matrix().trace()).norm() < 1e-14);
        let back = DensityOp::new(s.clone(), pt, &Tolerances::default()).unwrap();
        let twice = partial_transpose(&back, &[0]).unwrap();
        prop_assert!((twice - r.matrix()).camax() < 1e-14);
    }

    #[test]
    fn remixed_decompositions_agree(s in shapes(), terms in 1usize..5, extra in 0usize..4, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let d1 = common::random_decomposition(&mut rng, &s, terms);
        let d2 = common::remix(&mut rng, &d1, terms + extra);
        let (r1, r2) = (assemble_density(&d1).unwrap(), assemble_density(&d2).unwrap());
        prop_assert!(trace_distance(&r1, &r2).unwrap() < 1e-10);
        let obs = common::random_hermitian(&mut rng, s.total_dim());
        let tol = Tolerances::default();
        let (e1, e2) = (expectation(&r1, &obs, &tol).unwrap(), expectation(&r2, &obs, &tol).unwrap());
        prop_assert!((e1 - e2).abs() < 1e-10);
    }
}
