//! State parameter records shared by the `state`, `negativity` and
//! `bell-scan` subcommands.

use std::path::Path;

use clap::{Args, ValueEnum};
use picturelab::entanglement::Bipartition;
use picturelab::fock::{DensityOp, Ket};
use picturelab::qubit_demo::BellState;
use picturelab::states::{
    coherent_ket, min_coherent_cutoff, min_pair_cutoff, phase_randomized_coherent, rho_s, rho_t,
    split_coherent, tmsv_ket, PhaseAverageMethod, SqueezeParams,
};
use picturelab::tol::Tolerances;
use picturelab::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum StateKind {
    /// Pure coherent state |α e^{iφ}⟩.
    Coherent,
    /// Phase-randomized coherent state.
    Laser,
    /// Two-mode squeezed vacuum.
    Tmsv,
    /// Phase-randomized two-mode squeezed vacuum.
    RhoS,
    /// Shared-phase average of m squeezed pairs.
    RhoT,
    /// Coherent state split into m equal-phase copies.
    SplitCoherent,
    /// Two-qubit Bell state |φ+⟩.
    Bell,
    /// Two-mode vacuum.
    Vacuum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Analytic,
    Quadrature,
}

/// Parameter record; unset fields take defaults when resolved.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub state: StateKind,
    #[serde(default)]
    pub params: StateParams,
}

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_ETA: f64 = 0.5;
pub const DEFAULT_M: usize = 2;
pub const DEFAULT_RHO_T_N_MAX: usize = 8;
pub const DEFAULT_K: usize = 64;

#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    /// JSON file `{"state": ..., "params": {...}}`; flags override its fields.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<StateKind>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<MethodName>,
    /// Quadrature points.
    #[arg(long = "k")]
    pub k: Option<usize>,
}

fn read_config(path: &Path) -> Result<StateConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl StateArgs {
    pub fn to_config(&self) -> Result<StateConfig> {
        let mut cfg = match &self.config {
            Some(p) => read_config(p)?,
            None => StateConfig {
                state: self.kind.ok_or_else(|| {
                    Error::Argument("either --kind or --config is required".into())
                })?,
                params: StateParams::default(),
            },
        };
        if let Some(k) = self.kind {
            cfg.state = k;
        }
        let p = &mut cfg.params;
        p.alpha = self.alpha.or(p.alpha);
        p.phi = self.phi.or(p.phi);
        p.eta = self.eta.or(p.eta);
        p.m = self.m.or(p.m);
        p.n_max = self.n_max.or(p.n_max);
        p.method = self.method.or(p.method);
        p.k = self.k.or(p.k);
        Ok(cfg)
    }
}

impl StateConfig {
    /// Fills in every parameter the state uses and drops the rest.
    pub fn resolve(&self, tol: &Tolerances) -> Result<StateConfig> {
        let p = &self.params;
        let phi = Some(p.phi.unwrap_or(0.0));
        let alpha = p.alpha.unwrap_or(DEFAULT_ALPHA);
        let eta = p.eta.unwrap_or(DEFAULT_ETA);
        let method = p.method.unwrap_or(MethodName::Analytic);
        let k = (method == MethodName::Quadrature).then(|| p.k.unwrap_or(DEFAULT_K));
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::Argument(format!(
                "eta must lie in [0, 1), got {eta}"
            )));
        }
        if alpha < 0.0 || !alpha.is_finite() {
            return Err(Error::Argument(format!(
                "alpha must be finite and ≥ 0, got {alpha}"
            )));
        }
        let params = match self.state {
            StateKind::Coherent => StateParams {
                alpha: Some(alpha),
                phi,
                n_max: Some(
                    p.n_max
                        .unwrap_or_else(|| min_coherent_cutoff(alpha, tol.tail)),
                ),
                ..Default::default()
            },
            StateKind::Laser => StateParams {
                alpha: Some(alpha),
                n_max: Some(
                    p.n_max
                        .unwrap_or_else(|| min_coherent_cutoff(alpha, tol.tail)),
                ),
                method: Some(method),
                k,
                ..Default::default()
            },
            StateKind::Tmsv => StateParams {
                eta: Some(eta),
                phi,
                n_max: Some(p.n_max.unwrap_or_else(|| min_pair_cutoff(eta, tol.tail))),
                ..Default::default()
            },
            StateKind::RhoS => StateParams {
                eta: Some(eta),
                n_max: Some(p.n_max.unwrap_or_else(|| min_pair_cutoff(eta, tol.tail))),
                ..Default::default()
            },
            StateKind::RhoT => StateParams {
                eta: Some(eta),
                m: Some(p.m.unwrap_or(DEFAULT_M)),
                n_max: Some(p.n_max.unwrap_or(DEFAULT_RHO_T_N_MAX)),
                method: Some(method),
                k,
                ..Default::default()
            },
            StateKind::SplitCoherent => StateParams {
                alpha: Some(alpha),
                phi,
                m: Some(p.m.unwrap_or(DEFAULT_M)),
                n_max: Some(
                    p.n_max
                        .unwrap_or_else(|| min_coherent_cutoff(alpha, tol.tail)),
                ),
                ..Default::default()
            },
            StateKind::Bell | StateKind::Vacuum => StateParams {
                n_max: (self.state == StateKind::Vacuum).then(|| p.n_max.unwrap_or(0)),
                ..Default::default()
            },
        };
        Ok(StateConfig {
            state: self.state,
            params,
        })
    }
}

/// A built state.
pub enum Built {
    Pure(Ket),
    Mixed(DensityOp),
}

impl Built {
    pub fn density(&self) -> DensityOp {
        match self {
            Built::Pure(k) => k.projector(),
            Built::Mixed(r) => r.clone(),
        }
    }
}

fn method(p: &StateParams) -> Result<PhaseAverageMethod> {
    match p.method.unwrap_or(MethodName::Analytic) {
        MethodName::Analytic => Ok(PhaseAverageMethod::Analytic),
        MethodName::Quadrature => PhaseAverageMethod::quadrature(p.k.unwrap_or(DEFAULT_K)),
    }
}

/// Builds a resolved config.
pub fn build(cfg: &StateConfig, tol: &Tolerances) -> Result<Built> {
    let p = &cfg.params;
    let alpha = p.alpha.unwrap_or(DEFAULT_ALPHA);
    let phi = p.phi.unwrap_or(0.0);
    let eta = p.eta.unwrap_or(DEFAULT_ETA);
    let n_max = p.n_max.unwrap_or(0);
    let m = p.m.unwrap_or(DEFAULT_M);
    Ok(match cfg.state {
        StateKind::Coherent => Built::Pure(coherent_ket(alpha, phi, n_max)?),
        StateKind::Laser => Built::Mixed(phase_randomized_coherent(alpha, n_max, method(p)?)?),
        StateKind::Tmsv => Built::Pure(tmsv_ket(&SqueezeParams::new(eta, phi, n_max, tol)?)),
        StateKind::RhoS => Built::Mixed(rho_s(eta, n_max)?),
        StateKind::RhoT => Built::Mixed(rho_t(eta, m, n_max, method(p)?)?),
        StateKind::SplitCoherent => Built::Pure(split_coherent(alpha, phi, m, n_max)?),
        StateKind::Bell => Built::Pure(BellState::PhiPlus.ket()),
        StateKind::Vacuum => Built::Pure(tmsv_ket(&SqueezeParams::new(0.0, 0.0, n_max, tol)?)),
    })
}

/// The party split used for entanglement diagnostics of `cfg`.
pub fn default_cut(cfg: &StateConfig) -> Result<Bipartition> {
    match cfg.state {
        StateKind::RhoT => Bipartition::alice_bob(cfg.params.m.unwrap_or(DEFAULT_M)),
        StateKind::Tmsv | StateKind::RhoS | StateKind::Bell | StateKind::Vacuum => {
            Ok(Bipartition::two_mode())
        }
        StateKind::SplitCoherent => {
            let m = cfg.params.m.unwrap_or(DEFAULT_M);
            Bipartition::new(&(0..m / 2).collect::<Vec<_>>(), m)
        }
        StateKind::Coherent | StateKind::Laser => Err(Error::Argument(
            "single-mode states have no bipartition".into(),
        )),
    }
}
