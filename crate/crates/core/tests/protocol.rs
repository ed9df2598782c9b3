use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use picturelab::bell::{chsh, optimize_chsh, BellResult, ChshSettings, ScanSpec};
use picturelab::protocol::*;
use picturelab::states::{tmsv_ket, SqueezeParams};
use picturelab::tol::Tolerances;

const ETA: f64 = 0.6;

fn best() -> &'static BellResult {
    static BEST: OnceLock<BellResult> = OnceLock::new();
    BEST.get_or_init(|| {
        let k = tmsv_ket(&SqueezeParams::auto(ETA, 0.0, &Tolerances::default()).unwrap());
        optimize_chsh(&k, &ScanSpec::default()).unwrap()
    })
}

fn config(m: usize, model: PhaseModel, seed: u64) -> ExperimentConfig {
    ExperimentConfig::new(ETA, m, best().settings, model, seed).unwrap()
}

#[test]
fn four_pairs_give_grid_values() {
    for model in [
        PhaseModel::fixed(0.3).unwrap(),
        PhaseModel::SharedRandom,
        PhaseModel::IidRandom,
    ] {
        let sim = Simulator::new(config(4, model, 7)).unwrap();
        for o in sim.outcomes(200) {
            assert!(
                [-4.0, -2.0, 0.0, 2.0, 4.0].contains(&o.chsh_estimate),
                "{}",
                o.chsh_estimate
            );
            assert!(o.correlators.iter().all(|e| e.abs() == 1.0));
        }
    }
}

#[test]
fn optimal_phase_violates_reliably() {
    let p = success_probability(&config(25600, PhaseModel::fixed(0.0).unwrap(), 42), 200).unwrap();
    assert!(p.p_hat > 0.95, "{p:?}");
}

#[test]
fn opposite_phase_does_not_violate() {
    let p = success_probability(&config(25600, PhaseModel::fixed(PI).unwrap(), 42), 200).unwrap();
    assert!(p.p_hat < 0.05, "{p:?}");
}

#[test]
fn empirical_correlators_concentrate() {
    let c = config(1600, PhaseModel::fixed(0.0).unwrap(), 3);
    let exact = setting_probabilities(&c, 0.0).unwrap();
    let sim = Simulator::new(c).unwrap();
    let bound = 5.0 / ((c.m / 4) as f64).sqrt();
    let outcomes = sim.outcomes(500);
    for k in 0..4 {
        let e = picturelab::bell::correlator_from_probabilities(&exact[k]);
        let inside = outcomes
            .iter()
            .filter(|o| (o.correlators[k] - e).abs() < bound)
            .count();
        assert!(inside as f64 >= 0.99 * outcomes.len() as f64);
    }
}

#[test]
fn same_seed_same_outcomes() {
    for model in [PhaseModel::SharedRandom, PhaseModel::IidRandom] {
        let a = Simulator::new(config(400, model, 11)).unwrap().outcomes(50);
        let b = Simulator::new(config(400, model, 11)).unwrap().outcomes(50);
        assert_eq!(a, b);
        let c = Simulator::new(config(400, model, 12)).unwrap().outcomes(50);
        assert_ne!(a, c);
    }
    let c = config(400, PhaseModel::SharedRandom, 5);
    let curve = |_| {
        success_curve(&c, &[40, 400], 100)
            .unwrap()
            .to_csv(&c)
            .unwrap()
    };
    assert_eq!(curve(0), curve(1));
}

#[test]
fn explicit_stream_matches_indexed_experiment() {
    let c = config(400, PhaseModel::IidRandom, 9);
    let sim = Simulator::new(c).unwrap();
    let mut rng = experiment_rng(9, 400, 3);
    assert_eq!(run_experiment(&c, &mut rng).unwrap(), sim.experiment(3));
}

#[test]
fn phase_grid_error_below_threshold() {
    let c = config(4, PhaseModel::SharedRandom, 0);
    let table = ProbabilityTable::build(&c).unwrap();
    let proj = SettingProjectors::new(&c).unwrap();
    assert_eq!(table.len(), DEFAULT_PHASE_GRID);
    // worst case sits halfway between grid points
    let mut worst = 0.0_f64;
    for i in 0..256 {
        let phi = TAU * (i as f64 + 0.37) / 256.0;
        let exact = chsh_from_probabilities(&proj.probabilities(phi).unwrap());
        let step = TAU / table.len() as f64;
        let mid = ((phi / step).floor() + 0.5) * step;
        let looked = chsh_from_probabilities(table.lookup(mid - 1e-12));
        let exact_mid = chsh_from_probabilities(&proj.probabilities(mid).unwrap());
        worst = worst.max((looked - exact_mid).abs());
        assert!((chsh_from_probabilities(table.lookup(phi)) - exact).abs() < 1e-3);
    }
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn window_of_zero_settings_is_empty() {
    let w = phase_window(ETA, &ChshSettings::zero(), 16).unwrap();
    assert_eq!(w.measure, 0.0);
    assert!(phase_window(ETA, &ChshSettings::zero(), 7).is_err());
}

#[test]
fn window_of_optimal_settings_is_positive() {
    let w = phase_window(ETA, &best().settings, DEFAULT_WINDOW_GRID).unwrap();
    assert!(w.measure > 0.3 && w.measure < 0.6, "{}", w.measure);
    let at_zero = chsh(
        &tmsv_ket(&SqueezeParams::auto(ETA, 0.0, &Tolerances::default()).unwrap()),
        &best().settings,
    )
    .unwrap();
    assert_eq!(w.values[0], at_zero.chsh_value);
}

#[test]
fn fixed_phase_success_grows_with_m() {
    // a phase where B(φ) sits just above 2, so small m fails often
    let w = phase_window(ETA, &best().settings, DEFAULT_WINDOW_GRID).unwrap();
    let (i, _) = w
        .values
        .iter()
        .enumerate()
        .filter(|(_, b)| **b > 2.02)
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let c = config(400, PhaseModel::fixed(w.phases[i]).unwrap(), 21);
    let curve = success_curve(&c, &[400, 1600, 6400, 25600], 300).unwrap();
    for pair in curve.points.windows(2) {
        let se = (pair[0].std_error.powi(2) + pair[1].std_error.powi(2)).sqrt();
        assert!(pair[1].p_hat >= pair[0].p_hat - 2.0 * se, "{curve:?}");
    }
    assert!(curve.points[3].p_hat > 0.9);
}

#[test]
fn curve_rejects_bad_inputs() {
    let c = config(4, PhaseModel::SharedRandom, 0);
    assert!(success_curve(&c, &[1600, 400], 10).is_err());
    assert!(success_curve(&c, &[], 10).is_err());
    assert!(success_curve(&c, &[400], 0).is_err());
    assert!(success_curve(&c, &[402], 10).is_err());
}

#[test]
fn eta_selection_prefers_wider_window() {
    let spec = ScanSpec {
        refinements: 1,
        ..ScanSpec::default()
    };
    let (chosen, all) = select_eta(&[0.3, 0.6], &spec, 90).unwrap();
    assert_eq!(all.len(), 2);
    assert!(all.iter().all(|c| c.window <= chosen.window));
    assert!(all.iter().all(|c| c.best.violated));
}
