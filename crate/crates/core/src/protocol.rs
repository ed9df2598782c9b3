//! Monte Carlo model of repeated Bell experiments on phase-randomized pairs.
//!
//! Each experiment measures `m` pairs, a quarter per CHSH setting pair in
//! round-robin order, and succeeds when the empirical CHSH value exceeds 2.
//! The pair phase is fixed, drawn once per experiment (all pairs share it),
//! or drawn independently for every pair.
//!
//! Outcome probabilities for random phases come from a table on a uniform
//! phase grid with nearest-point lookup. Every experiment owns a ChaCha
//! stream keyed by `(seed, m)` with the experiment index as stream id, so
//! results do not depend on thread scheduling.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bell::{
    joint_parity_probabilities_with, optimize_chsh_with, BellResult, ChshOperators, ChshSettings,
    ParityProjectors, ScanSpec, CHSH_SIGNS,
};
use crate::par::*;
use crate::states::{min_pair_cutoff, reduce_phase, tmsv_ket_unchecked, SqueezeParams};
use crate::tol::Tolerances;
use crate::{Error, Result};

/// Points in the cached phase table.
pub const DEFAULT_PHASE_GRID: usize = 2048;
/// Grid used to measure the violation window.
pub const DEFAULT_WINDOW_GRID: usize = 720;
/// Candidate squeezing values for protocol runs.
pub const ETA_GRID: [f64; 5] = [0.2, 0.3, 0.4, 0.5, 0.6];

/// How the pair phase is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PhaseModel {
    Fixed {
        phi: f64,
    },
    /// One uniform phase per experiment, shared by all its pairs.
    SharedRandom,
    /// One uniform phase per pair.
    IidRandom,
}

impl PhaseModel {
    pub fn fixed(phi: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::Argument(format!("phase {phi} is not finite")));
        }
        Ok(Self::Fixed {
            phi: reduce_phase(phi),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Fixed { .. } => "fixed",
            Self::SharedRandom => "shared",
            Self::IidRandom => "iid",
        }
    }
}

/// Parameters of one batch of experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub eta: f64,
    pub m: usize,
    pub settings: ChshSettings,
    pub phase_model: PhaseModel,
    pub n_max: usize,
    pub seed: u64,
    pub phase_grid: usize,
    /// Tail tolerance the truncation was chosen for.
    pub tail_tol: f64,
}

impl ExperimentConfig {
    /// Uses the smallest truncation meeting the default tail tolerance.
    pub fn new(
        eta: f64,
        m: usize,
        settings: ChshSettings,
        phase_model: PhaseModel,
        seed: u64,
    ) -> Result<Self> {
        Self::with_tolerances(eta, m, settings, phase_model, seed, &Tolerances::default())
    }

    pub fn with_tolerances(
        eta: f64,
        m: usize,
        settings: ChshSettings,
        phase_model: PhaseModel,
        seed: u64,
        tol: &Tolerances,
    ) -> Result<Self> {
        SqueezeParams::auto(eta, 0.0, tol)?;
        let c = Self {
            eta,
            m,
            settings,
            phase_model,
            n_max: min_pair_cutoff(eta, tol.tail),
            seed,
            phase_grid: DEFAULT_PHASE_GRID,
            tail_tol: tol.tail,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_m(self, m: usize) -> Result<Self> {
        let c = Self { m, ..self };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 4 || !self.m.is_multiple_of(4) {
            return Err(Error::Validation(format!(
                "m must be a positive multiple of 4, got {}",
                self.m
            )));
        }
        if self.phase_grid < 8 {
            return Err(Error::Validation(format!(
                "phase grid needs at least 8 points, got {}",
                self.phase_grid
            )));
        }
        if let PhaseModel::Fixed { phi } = self.phase_model {
            if !(0.0..TAU).contains(&phi) {
                return Err(Error::Validation(format!(
                    "fixed phase {phi} outside [0, 2π)"
                )));
            }
        }
        Ok(())
    }

    fn params(&self, phi: f64) -> Result<SqueezeParams> {
        SqueezeParams::new(
            self.eta,
            phi,
            self.n_max,
            &Tolerances::with_tail(self.tail_tol),
        )
    }
}

/// Joint parity probabilities `(ee, eo, oe, oo)` for each setting pair, in
/// [`ChshSettings::pairs`] order.
pub type SettingProbabilities = [[f64; 4]; 4];

/// Parity projectors for the four settings of a config, reusable across phases.
pub struct SettingProjectors {
    eta: f64,
    n_max: usize,
    a: [ParityProjectors; 2],
    b: [ParityProjectors; 2],
}

impl SettingProjectors {
    pub fn new(c: &ExperimentConfig) -> Result<Self> {
        c.params(0.0)?;
        let (s, n_max) = (&c.settings, c.n_max);
        Ok(Self {
            eta: c.eta,
            n_max,
            a: [
                ParityProjectors::new(s.a0.gamma(), n_max)?,
                ParityProjectors::new(s.a1.gamma(), n_max)?,
            ],
            b: [
                ParityProjectors::new(s.b0.gamma(), n_max)?,
                ParityProjectors::new(s.b1.gamma(), n_max)?,
            ],
        })
    }

    /// Exact outcome probabilities of `tmsv(η, φ)` under the four setting pairs.
    pub fn probabilities(&self, phi: f64) -> Result<SettingProbabilities> {
        let ket = tmsv_ket_unchecked(self.eta, reduce_phase(phi), self.n_max);
        let mut out = [[0.0; 4]; 4];
        for (k, (ia, ib)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            out[k] = joint_parity_probabilities_with(&ket, &self.a[ia], &self.b[ib])?;
        }
        Ok(out)
    }
}

/// Exact outcome probabilities of `tmsv(η, φ)` under the four setting pairs.
pub fn setting_probabilities(c: &ExperimentConfig, phi: f64) -> Result<SettingProbabilities> {
    SettingProjectors::new(c)?.probabilities(phi)
}

/// CHSH value implied by a probability table row.
pub fn chsh_from_probabilities(p: &SettingProbabilities) -> f64 {
    p.iter()
        .zip(CHSH_SIGNS)
        .map(|(q, s)| s * crate::bell::correlator_from_probabilities(q))
        .sum()
}

/// Outcome probabilities on a uniform phase grid.
#[derive(Debug, Clone)]
pub struct ProbabilityTable {
    rows: Vec<SettingProbabilities>,
}

impl ProbabilityTable {
    pub fn build(c: &ExperimentConfig) -> Result<Self> {
        let proj = SettingProjectors::new(c)?;
        let n = c.phase_grid;
        let rows = (0..n)
            .into_par_iter()
            .map(|i| proj.probabilities(TAU * i as f64 / n as f64))
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row at the grid point nearest to `phi`.
    pub fn lookup(&self, phi: f64) -> &SettingProbabilities {
        let n = self.rows.len();
        let i = (reduce_phase(phi) / TAU * n as f64).round() as usize % n;
        &self.rows[i]
    }

    pub fn grid_phase(&self, i: usize) -> f64 {
        TAU * i as f64 / self.rows.len() as f64
    }

    pub fn row(&self, i: usize) -> &SettingProbabilities {
        &self.rows[i]
    }
}

/// Result of one simulated experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    pub chsh_estimate: f64,
    pub violated: bool,
    /// Empirical correlators in [`ChshSettings::pairs`] order.
    pub correlators: [f64; 4],
    /// Phase drawn for the experiment; `None` when every pair has its own.
    pub phase: Option<f64>,
}

enum Source {
    Fixed(SettingProbabilities),
    Table(ProbabilityTable),
}

/// Config plus its precomputed outcome probabilities.
pub struct Simulator {
    config: ExperimentConfig,
    source: Source,
}

/// Deterministic stream for experiment `index` of a batch.
pub fn experiment_rng(seed: u64, m: usize, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(m as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

fn sample(p: &[f64; 4], u: f64) -> usize {
    // probabilities sum to 1 − tail; the remainder goes to the last outcome
    let mut acc = 0.0;
    for (k, q) in p.iter().enumerate().take(3) {
        acc += q;
        if u < acc {
            return k;
        }
    }
    3
}

impl Simulator {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let source = match config.phase_model {
            PhaseModel::Fixed { phi } => Source::Fixed(setting_probabilities(&config, phi)?),
            _ => Source::Table(ProbabilityTable::build(&config)?),
        };
        Ok(Self { config, source })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    /// Same probabilities, different `m`.
    pub fn with_m(self, m: usize) -> Result<Self> {
        Ok(Self {
            config: self.config.with_m(m)?,
            source: self.source,
        })
    }

    pub fn run_experiment<R: Rng + ?Sized>(&self, rng: &mut R) -> ExperimentOutcome {
        let mut counts = [[0u64; 4]; 4];
        let per_setting = (self.config.m / 4) as f64;
        let phase = match (&self.config.phase_model, &self.source) {
            (PhaseModel::Fixed { phi }, _) => Some(*phi),
            (PhaseModel::SharedRandom, _) => Some(rng.random::<f64>() * TAU),
            (PhaseModel::IidRandom, _) => None,
        };
        let shared = match (&self.source, phase) {
            (Source::Fixed(p), _) => Some(p),
            (Source::Table(t), Some(phi)) => Some(t.lookup(phi)),
            (Source::Table(_), None) => None,
        };
        for pair in 0..self.config.m {
            let k = pair % 4;
            let probs = match (shared, &self.source) {
                (Some(p), _) => &p[k],
                (None, Source::Table(t)) => &t.lookup(rng.random::<f64>() * TAU)[k],
                (None, Source::Fixed(p)) => &p[k],
            };
            counts[k][sample(probs, rng.random::<f64>())] += 1;
        }
        let mut correlators = [0.0; 4];
        for (e, c) in correlators.iter_mut().zip(&counts) {
            *e = (c[0] as f64 - c[1] as f64 - c[2] as f64 + c[3] as f64) / per_setting;
        }
        let chsh_estimate: f64 = correlators.iter().zip(CHSH_SIGNS).map(|(e, s)| s * e).sum();
        ExperimentOutcome {
            chsh_estimate,
            violated: chsh_estimate > 2.0,
            correlators,
            phase,
        }
    }

    /// Experiment `index` of the batch, on its own stream.
    pub fn experiment(&self, index: u64) -> ExperimentOutcome {
        let mut rng = experiment_rng(self.config.seed, self.config.m, index);
        self.run_experiment(&mut rng)
    }

    pub fn outcomes(&self, n_experiments: usize) -> Vec<ExperimentOutcome> {
        (0..n_experiments as u64)
            .into_par_iter()
            .map(|i| self.experiment(i))
            .collect()
    }

    pub fn success_probability(&self, n_experiments: usize) -> Result<SuccessPoint> {
        if n_experiments == 0 {
            return Err(Error::Validation("n_experiments must be at least 1".into()));
        }
        let hits = self
            .outcomes(n_experiments)
            .iter()
            .filter(|o| o.violated)
            .count();
        Ok(SuccessPoint::new(self.config.m, hits, n_experiments))
    }
}

/// One experiment with a caller-supplied stream.
pub fn run_experiment<R: Rng + ?Sized>(
    c: &ExperimentConfig,
    rng: &mut R,
) -> Result<ExperimentOutcome> {
    Ok(Simulator::new(*c)?.run_experiment(rng))
}

/// Fraction of violating experiments with its binomial standard error.
pub fn success_probability(c: &ExperimentConfig, n_experiments: usize) -> Result<SuccessPoint> {
    if n_experiments == 0 {
        return Err(Error::Validation("n_experiments must be at least 1".into()));
    }
    Simulator::new(*c)?.success_probability(n_experiments)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessPoint {
    pub m: usize,
    pub p_hat: f64,
    pub std_error: f64,
    pub n_experiments: usize,
}

impl SuccessPoint {
    pub fn new(m: usize, hits: usize, n_experiments: usize) -> Self {
        let p_hat = hits as f64 / n_experiments as f64;
        Self {
            m,
            p_hat,
            std_error: (p_hat * (1.0 - p_hat) / n_experiments as f64).sqrt(),
            n_experiments,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessCurve {
    pub phase_model: PhaseModel,
    pub points: Vec<SuccessPoint>,
}

/// Success probability for each `m`, sharing one probability table.
pub fn success_curve(
    c: &ExperimentConfig,
    ms: &[usize],
    n_experiments: usize,
) -> Result<SuccessCurve> {
    if ms.is_empty() {
        return Err(Error::Validation("no values of m given".into()));
    }
    if ms.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Validation(format!(
            "m values must be ascending, got {ms:?}"
        )));
    }
    if n_experiments == 0 {
        return Err(Error::Validation("n_experiments must be at least 1".into()));
    }
    let mut sim = Simulator::new(c.with_m(ms[0])?)?;
    let mut points = Vec::with_capacity(ms.len());
    for &m in ms {
        sim = sim.with_m(m)?;
        points.push(sim.success_probability(n_experiments)?);
    }
    Ok(SuccessCurve {
        phase_model: c.phase_model,
        points,
    })
}

impl SuccessCurve {
    /// CSV with a leading `# config:` comment carrying `config` as JSON.
    pub fn to_csv<C: Serialize>(&self, config: &C) -> Result<String> {
        let mut out = String::new();
        let json = serde_json::to_string(config).map_err(|e| Error::Numerical(e.to_string()))?;
        writeln!(out, "# config: {json}").unwrap();
        writeln!(out, "m,p_hat,stderr,n_experiments,phase_model").unwrap();
        for p in &self.points {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{},{}",
                p.m,
                p.p_hat,
                p.std_error,
                p.n_experiments,
                self.phase_model.name()
            )
            .unwrap();
        }
        Ok(out)
    }

    /// Least-squares slope of `ln P̂` against `m` over points with `P̂ > 0`.
    pub fn log_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.p_hat > 0.0)
            .map(|p| (p.m as f64, p.p_hat.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

/// CHSH value across a phase grid and the fraction of it above 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseWindow {
    pub measure: f64,
    pub phases: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn phase_window(eta: f64, settings: &ChshSettings, n_grid: usize) -> Result<PhaseWindow> {
    phase_window_with(eta, settings, n_grid, &Tolerances::default())
}

pub fn phase_window_with(
    eta: f64,
    settings: &ChshSettings,
    n_grid: usize,
    tol: &Tolerances,
) -> Result<PhaseWindow> {
    if n_grid < 8 {
        return Err(Error::Validation(format!(
            "phase window needs n_grid ≥ 8, got {n_grid}"
        )));
    }
    let base = SqueezeParams::auto(eta, 0.0, tol)?;
    let ops = ChshOperators::new(settings, (base.n_max() + 1, base.n_max() + 1))?;
    let phases: Vec<f64> = (0..n_grid)
        .map(|i| TAU * i as f64 / n_grid as f64)
        .collect();
    let values = phases
        .clone()
        .into_par_iter()
        .map(|phi| {
            ops.evaluate_with(&crate::states::tmsv_ket(&base.with_phi(phi)), tol)
                .map(|r| r.chsh_value)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let measure = values.iter().filter(|&&b| b > 2.0).count() as f64 / n_grid as f64;
    Ok(PhaseWindow {
        measure,
        phases,
        values,
    })
}

/// Scan result and violation window for one candidate `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaCandidate {
    pub eta: f64,
    pub best: BellResult,
    pub window: f64,
}

/// Optimizes settings at `φ = 0` for each `η` and keeps the one with the
/// widest violation window; ties go to the smaller `η`.
pub fn select_eta(
    etas: &[f64],
    spec: &ScanSpec,
    n_grid: usize,
) -> Result<(EtaCandidate, Vec<EtaCandidate>)> {
    select_eta_with(etas, spec, n_grid, &Tolerances::default())
}

pub fn select_eta_with(
    etas: &[f64],
    spec: &ScanSpec,
    n_grid: usize,
    tol: &Tolerances,
) -> Result<(EtaCandidate, Vec<EtaCandidate>)> {
    let mut all = Vec::with_capacity(etas.len());
    for &eta in etas {
        let ket = crate::states::tmsv_ket(&SqueezeParams::auto(eta, 0.0, tol)?);
        let best = optimize_chsh_with(&ket, spec, tol)?;
        let window = phase_window_with(eta, &best.settings, n_grid, tol)?.measure;
        all.push(EtaCandidate { eta, best, window });
    }
    let chosen = all
        .iter()
        .copied()
        .fold(None::<EtaCandidate>, |acc, c| match acc {
            Some(a) if a.window >= c.window => Some(a),
            _ => Some(c),
        })
        .ok_or_else(|| Error::Validation("no eta candidates".into()))?;
    Ok((chosen, all))
}
