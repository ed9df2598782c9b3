//! Subcommand implementations.

use std::f64::consts::TAU;

use clap::{Args, ValueEnum};
use picturelab::bell::{optimize_chsh_with, scan_chsh_with, AxisSpec, ScanRow, ScanSpec};
use picturelab::entanglement::{
    classify, outcome_probabilities, statistics_invariance_check, Bipartition, SeparabilityVerdict,
};
use picturelab::fock::{assemble_density, number_basis_povm, Decomposition, Ket};
use picturelab::protocol::{
    phase_window_with, select_eta_with, success_curve, EtaCandidate, ExperimentConfig, PhaseModel,
    DEFAULT_WINDOW_GRID, ETA_GRID,
};
use picturelab::qubit_demo::{self, BellState};
use picturelab::states::{
    coherent_phase_decomposition, number_state_decomposition, tmsv_ket, SqueezeParams,
};
use picturelab::tol::Tolerances;
use picturelab::{CMatrix, CVector, Error, C64};
use serde::Serialize;

use crate::config::{build, default_cut, Built, StateArgs, StateConfig};
use crate::output::{emit, json, num, Csv};
use crate::{Command, Failure, Format, OutputArgs};

/// Settings common to every output's embedded config.
#[derive(Serialize)]
struct RunConfig<'a, T: Serialize> {
    subcommand: &'a str,
    seed: u64,
    tail_tol: f64,
    format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<String>,
    #[serde(flatten)]
    params: T,
}

fn run_config<'a, T: Serialize>(
    name: &'a str,
    out: &OutputArgs,
    default: Format,
    tol: &Tolerances,
    params: T,
) -> RunConfig<'a, T> {
    RunConfig {
        subcommand: name,
        seed: out.seed,
        tail_tol: tol.tail,
        format: out.format.unwrap_or(default),
        output: out.output.as_ref().map(|p| p.display().to_string()),
        params,
    }
}

pub fn run(command: Command, tol: &Tolerances) -> Result<(), Failure> {
    match command {
        Command::State { state, out } => cmd_state(&state, &out, tol),
        Command::Negativity { state, out } => cmd_negativity(&state, &out, tol),
        Command::BellScan { state, scan, out } => cmd_bell_scan(&state, &scan, &out, tol),
        Command::Protocol { protocol, out } => cmd_protocol(&protocol, &out, tol),
        Command::QubitDemo { out } => cmd_qubit_demo(&out, tol),
        Command::PictureCheck { out } => cmd_picture_check(&out, tol),
    }
}

#[derive(Serialize)]
struct StateSummary<'a, C: Serialize> {
    config: &'a C,
    representation: &'static str,
    dims: Vec<usize>,
    trace: f64,
    deficit: f64,
    diagonal: Vec<f64>,
    max_off_diagonal: f64,
}

fn summarize(built: &Built) -> (&'static str, Vec<usize>, Vec<f64>, f64) {
    match built {
        Built::Pure(k) => {
            let diag: Vec<f64> = k.amps().iter().map(|a| a.norm_sqr()).collect();
            let mut mags: Vec<f64> = k.amps().iter().map(|a| a.norm()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            let off = if mags.len() > 1 {
                mags[0] * mags[1]
            } else {
                0.0
            };
            ("ket", k.shape().dims().to_vec(), diag, off)
        }
        Built::Mixed(r) => (
            "density",
            r.shape().dims().to_vec(),
            r.diagonal(),
            r.max_off_diagonal(),
        ),
    }
}

fn resolved(args: &StateArgs, tol: &Tolerances) -> Result<StateConfig, Failure> {
    Ok(args.to_config()?.resolve(tol)?)
}

fn cmd_state(args: &StateArgs, out: &OutputArgs, tol: &Tolerances) -> Result<(), Failure> {
    let cfg = resolved(args, tol)?;
    let built = build(&cfg, tol)?;
    let run = run_config("state", out, Format::Json, tol, &cfg);
    let (representation, dims, diagonal, max_off_diagonal) = summarize(&built);
    let trace: f64 = diagonal.iter().sum();
    emit(out, Format::Json, |f| match f {
        Format::Json => json(&StateSummary {
            config: &run,
            representation,
            dims: dims.clone(),
            trace,
            deficit: 1.0 - trace,
            diagonal: diagonal.clone(),
            max_off_diagonal,
        }),
        Format::Csv => {
            let shape = picturelab::fock::ModeShape::new(dims.clone()).expect("built shape");
            let mut csv = Csv::new(&run, &["index", "occupations", "population"]);
            for (i, p) in diagonal.iter().enumerate() {
                let occ: Vec<String> = shape.occupations(i).iter().map(|n| n.to_string()).collect();
                csv.row([i.to_string(), occ.join(" "), num(*p)]);
            }
            csv.into_string()
        }
    })
}

#[derive(Serialize)]
struct NegativityReport<'a, C: Serialize> {
    config: &'a C,
    cut: Bipartition,
    #[serde(flatten)]
    verdict: SeparabilityVerdict,
}

fn cmd_negativity(args: &StateArgs, out: &OutputArgs, tol: &Tolerances) -> Result<(), Failure> {
    let cfg = resolved(args, tol)?;
    let cut = default_cut(&cfg)?;
    let rho = build(&cfg, tol)?.density();
    let verdict = classify(&rho, &cut)?;
    let run = run_config("negativity", out, Format::Json, tol, &cfg);
    emit(out, Format::Json, |f| match f {
        Format::Json => json(&NegativityReport {
            config: &run,
            cut: cut.clone(),
            verdict: verdict.clone(),
        }),
        Format::Csv => {
            let mut csv = Csv::new(&run, &["status", "negativity"]);
            let status = serde_json::to_value(verdict.status).expect("status serializes");
            csv.row([
                status.as_str().unwrap_or_default().to_string(),
                num(verdict.negativity.unwrap_or(0.0)),
            ]);
            csv.into_string()
        }
    })
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    /// Grid points per free axis.
    #[arg(long, default_value_t = 41)]
    pub points: usize,
    /// Free axes span [-range, range].
    #[arg(long, default_value_t = 1.0)]
    pub range: f64,
    #[arg(long, default_value_t = 2)]
    pub refinements: usize,
    /// Also scan imaginary parts of the free settings.
    #[arg(long)]
    pub complex: bool,
    /// JSON scan spec; replaces the grid flags.
    #[arg(long)]
    pub scan_spec: Option<std::path::PathBuf>,
}

impl ScanArgs {
    fn spec(&self) -> Result<ScanSpec, Failure> {
        if let Some(path) = &self.scan_spec {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            return Ok(serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?);
        }
        let fixed = AxisSpec::fixed(0.0);
        let free = AxisSpec::range(-self.range, self.range, self.points);
        let spec = ScanSpec {
            re: [fixed, free, fixed, free],
            im: [fixed; 4],
            refinements: self.refinements,
            ..ScanSpec::default()
        };
        Ok(if self.complex {
            spec.with_complex()
        } else {
            spec
        })
    }
}

#[derive(Serialize)]
struct ScanConfig<'a> {
    #[serde(flatten)]
    state: &'a StateConfig,
    scan: &'a ScanSpec,
}

#[derive(Serialize)]
struct ScanReport<'a, C: Serialize> {
    config: &'a C,
    best: picturelab::bell::BellResult,
    rows: &'a [ScanRow],
}

fn cmd_bell_scan(
    args: &StateArgs,
    scan: &ScanArgs,
    out: &OutputArgs,
    tol: &Tolerances,
) -> Result<(), Failure> {
    let cfg = resolved(args, tol)?;
    let spec = scan.spec()?;
    let rows = match build(&cfg, tol)? {
        Built::Pure(k) => scan_chsh_with(&k, &spec, tol)?,
        Built::Mixed(r) => scan_chsh_with(&r, &spec, tol)?,
    };
    let best = picturelab::bell::best_row(&rows)?;
    let run = run_config(
        "bell-scan",
        out,
        Format::Csv,
        tol,
        ScanConfig {
            state: &cfg,
            scan: &spec,
        },
    );
    emit(out, Format::Csv, |f| match f {
        Format::Json => json(&ScanReport {
            config: &run,
            best,
            rows: &rows,
        }),
        Format::Csv => {
            let header = [
                "stage", "a0_re", "a0_im", "a1_re", "a1_im", "b0_re", "b0_im", "b1_re", "b1_im",
                "chsh", "violated",
            ];
            let mut csv = Csv::new(&run, &header);
            for r in &rows {
                let s = r.result.settings;
                let mut cells = vec![r.stage.to_string()];
                for g in [s.a0, s.a1, s.b0, s.b1] {
                    cells.push(num(g.gamma().re));
                    cells.push(num(g.gamma().im));
                }
                cells.push(num(r.result.chsh_value));
                cells.push(r.result.violated.to_string());
                csv.row(cells);
            }
            csv.into_string()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseModelName {
    Fixed,
    Shared,
    Iid,
}

#[derive(Debug, Clone, Args)]
pub struct ProtocolArgs {
    /// Squeezing; chosen by the widest violation window when omitted.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Pairs per experiment; repeat for a curve.
    #[arg(long = "m", default_values_t = [400, 1600, 6400, 25600])]
    pub ms: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    pub experiments: usize,
    #[arg(long, value_enum, default_value_t = PhaseModelName::Shared)]
    pub phase_model: PhaseModelName,
    /// Phase for the fixed model.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi: f64,
}

#[derive(Serialize)]
struct ProtocolConfig {
    experiment: ExperimentConfig,
    ms: Vec<usize>,
    n_experiments: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_selection: Option<Vec<EtaCandidate>>,
}

#[derive(Serialize)]
struct ProtocolReport<'a, C: Serialize> {
    config: &'a C,
    points: &'a [picturelab::protocol::SuccessPoint],
    log_slope: Option<f64>,
    /// Fraction of phases with B > 2; the large-m limit of the shared model.
    phase_window: f64,
}

fn cmd_protocol(args: &ProtocolArgs, out: &OutputArgs, tol: &Tolerances) -> Result<(), Failure> {
    let model = match args.phase_model {
        PhaseModelName::Fixed => PhaseModel::fixed(args.phi)?,
        PhaseModelName::Shared => PhaseModel::SharedRandom,
        PhaseModelName::Iid => PhaseModel::IidRandom,
    };
    if args.ms.is_empty() {
        return Err(Error::Validation("at least one --m is required".into()).into());
    }
    let mut ms = args.ms.clone();
    ms.sort_unstable();
    let (eta, settings, selection) = match args.eta {
        Some(eta) => {
            let ket = tmsv_ket(&SqueezeParams::auto(eta, 0.0, tol)?);
            (
                eta,
                optimize_chsh_with(&ket, &ScanSpec::default(), tol)?.settings,
                None,
            )
        }
        None => {
            let (chosen, all) =
                select_eta_with(&ETA_GRID, &ScanSpec::default(), DEFAULT_WINDOW_GRID, tol)?;
            (chosen.eta, chosen.best.settings, Some(all))
        }
    };
    let experiment = ExperimentConfig::with_tolerances(eta, ms[0], settings, model, out.seed, tol)?;
    let curve = success_curve(&experiment, &ms, args.experiments)?;
    let window = phase_window_with(eta, &settings, DEFAULT_WINDOW_GRID, tol)?.measure;
    let params = ProtocolConfig {
        experiment,
        ms,
        n_experiments: args.experiments,
        eta_selection: selection,
    };
    let run = run_config("protocol", out, Format::Csv, tol, params);
    let csv = curve.to_csv(&run)?;
    emit(out, Format::Csv, |f| match f {
        Format::Json => json(&ProtocolReport {
            config: &run,
            points: &curve.points,
            log_slope: curve.log_slope(),
            phase_window: window,
        }),
        Format::Csv => csv,
    })
}

fn cmd_qubit_demo(out: &OutputArgs, tol: &Tolerances) -> Result<(), Failure> {
    let report = qubit_demo::report()?;
    let run = run_config("qubit-demo", out, Format::Json, tol, serde_json::json!({}));
    emit(out, Format::Json, |f| match f {
        Format::Json => json(&serde_json::json!({"config": run, "report": report})),
        Format::Csv => {
            let mut csv = Csv::new(
                &run,
                &[
                    "outcome",
                    "probability",
                    "bell_state",
                    "fidelity",
                    "negativity",
                ],
            );
            for r in &report.conditional {
                csv.row([
                    r.outcome.to_string(),
                    num(r.probability),
                    r.bell_state.label().to_string(),
                    num(r.fidelity),
                    num(r.negativity),
                ]);
            }
            csv.into_string()
        }
    })
}

#[derive(Debug, Clone, Serialize)]
struct PictureCheck {
    name: &'static str,
    measurement: &'static str,
    tol: f64,
    expected: bool,
    passed: bool,
    max_difference: f64,
}

fn picture_check(
    name: &'static str,
    measurement: &'static str,
    d1: &Decomposition,
    d2: &Decomposition,
    povm: &[CMatrix],
    tol: f64,
    expected: bool,
) -> picturelab::Result<PictureCheck> {
    let passed = statistics_invariance_check(d1, d2, povm, tol)?;
    let p1 = outcome_probabilities(&assemble_density(d1)?, povm)?;
    let p2 = outcome_probabilities(&assemble_density(d2)?, povm)?;
    let max_difference = p1
        .iter()
        .zip(&p2)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(PictureCheck {
        name,
        measurement,
        tol,
        expected,
        passed,
        max_difference,
    })
}

/// Squeezed state at `k` equally spaced phases versus its pair-number diagonal.
fn squeezed_pictures(
    eta: f64,
    k: usize,
    tol: &Tolerances,
) -> picturelab::Result<(Decomposition, Decomposition)> {
    let base = SqueezeParams::auto(eta, 0.0, tol)?;
    let phases = (0..k)
        .map(|j| tmsv_ket(&base.with_phi(TAU * j as f64 / k as f64)))
        .collect();
    let d1 = Decomposition::uniform(phases)?;
    let reference = tmsv_ket(&base);
    let shape = reference.shape().clone();
    let d = base.n_max() + 1;
    let total = reference.norm_sqr();
    let mut weights = Vec::new();
    let mut kets = Vec::new();
    for n in 0..d {
        let a = reference.amps()[n * d + n].norm_sqr();
        let mut v = CVector::zeros(d * d);
        v[n * d + n] = C64::new(total.sqrt(), 0.0);
        weights.push(a / total);
        kets.push(Ket::new(shape.clone(), v)?);
    }
    Ok((d1, Decomposition::new(weights, kets)?))
}

fn perturbed(d: &Decomposition) -> picturelab::Result<Decomposition> {
    let mut w = d.weights().to_vec();
    w[0] += 1e-3;
    let total: f64 = w.iter().sum();
    Decomposition::new(w.iter().map(|x| x / total).collect(), d.kets().to_vec())
}

fn cmd_picture_check(out: &OutputArgs, tol: &Tolerances) -> Result<(), Failure> {
    let cs = coherent_phase_decomposition(1.0, 20, 32)?;
    let ns = number_state_decomposition(1.0, 20)?;
    let bell = qubit_demo::bell_mixture();
    let product = qubit_demo::product_mixture();
    let bell_basis: Vec<CMatrix> = BellState::ALL
        .iter()
        .map(|b| b.ket().projector().matrix().clone())
        .collect();
    let (sq_phase, sq_pairs) = squeezed_pictures(0.5, 32, tol)?;
    let checks = vec![
        picture_check(
            "laser coherent vs number picture",
            "photon number",
            &cs,
            &ns,
            &number_basis_povm(cs.shape()),
            1e-12,
            true,
        )?,
        picture_check(
            "register Bell vs product mixture",
            "product basis",
            &bell,
            &product,
            &number_basis_povm(bell.shape()),
            1e-12,
            true,
        )?,
        picture_check(
            "register Bell vs product mixture",
            "Bell basis",
            &bell,
            &product,
            &bell_basis,
            1e-12,
            true,
        )?,
        picture_check(
            "squeezed phases vs pair diagonal",
            "photon number",
            &sq_phase,
            &sq_pairs,
            &number_basis_povm(sq_phase.shape()),
            1e-12,
            true,
        )?,
        picture_check(
            "perturbed weights (control)",
            "photon number",
            &cs,
            &perturbed(&ns)?,
            &number_basis_povm(cs.shape()),
            1e-6,
            false,
        )?,
    ];
    let all_as_expected = checks.iter().all(|c| c.passed == c.expected);
    let run = run_config(
        "picture-check",
        out,
        Format::Json,
        tol,
        serde_json::json!({}),
    );
    emit(out, Format::Json, |f| match f {
        Format::Json => json(
            &serde_json::json!({"config": run, "checks": checks, "all_as_expected": all_as_expected}),
        ),
        Format::Csv => {
            let mut csv = Csv::new(
                &run,
                &[
                    "name",
                    "measurement",
                    "tol",
                    "expected",
                    "passed",
                    "max_difference",
                ],
            );
            for c in &checks {
                csv.row([
                    c.name.to_string(),
                    c.measurement.to_string(),
                    num(c.tol),
                    c.expected.to_string(),
                    c.passed.to_string(),
                    num(c.max_difference),
                ]);
            }
            csv.into_string()
        }
    })?;
    if !all_as_expected {
        return Err(
            Error::Numerical("a picture check disagreed with its expectation".into()).into(),
        );
    }
    Ok(())
}
