//! Constructors for the coherent, squeezed and phase-averaged states.
//!
//! Phase averaging is done either exactly, by projecting onto sectors of a
//! conserved number grading (`∫ dφ/2π e^{i(N-N')φ} = δ_{NN'}`), or by a
//! uniform `K`-point quadrature which is exact once `K` exceeds the largest
//! grading difference on the state's support.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::fock::{Decomposition, DensityOp, Ket, ModeShape};
use crate::par::*;
use crate::tol::Tolerances;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Default cap on the total Hilbert-space dimension of dense multi-copy states.
pub const DEFAULT_MAX_DIM: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PhaseAverageMethod {
    /// Exact projection onto conserved-number sectors.
    Analytic,
    /// Average over `points` uniformly spaced phases.
    Quadrature { points: usize },
}

impl PhaseAverageMethod {
    pub fn quadrature(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Config(format!(
                "quadrature needs at least 2 phase points, got {points}"
            )));
        }
        Ok(Self::Quadrature { points })
    }
}

/// Reduce a phase to `[0, 2π)`.
pub fn reduce_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Squeezing strength, phase and pair-number truncation of a two-mode state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParams {
    eta: f64,
    phi: f64,
    n_max: usize,
}

impl SqueezeParams {
    /// Rejects `eta ∉ [0,1)` and truncations whose dropped weight
    /// `η^{2(n_max+1)}` is not below `tol.tail`.
    pub fn new(eta: f64, phi: f64, n_max: usize, tol: &Tolerances) -> Result<Self> {
        check_eta(eta)?;
        let tail = squeeze_tail(eta, n_max);
        if tail >= tol.tail {
            return Err(Error::Truncation(format!(
                "eta={eta} with n_max={n_max} drops weight {tail:e} >= {:e}",
                tol.tail
            )));
        }
        Ok(Self {
            eta,
            phi: reduce_phase(phi),
            n_max,
        })
    }

    /// Smallest truncation meeting `tol.tail`.
    pub fn auto(eta: f64, phi: f64, tol: &Tolerances) -> Result<Self> {
        check_eta(eta)?;
        Self::new(eta, phi, min_pair_cutoff(eta, tol.tail), tol)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn with_phi(self, phi: f64) -> Self {
        Self {
            phi: reduce_phase(phi),
            ..self
        }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::Argument(format!(
            "eta must lie in [0, 1), got {eta}"
        )));
    }
    Ok(())
}

/// Weight beyond `n_max` of the geometric pair distribution.
pub fn squeeze_tail(eta: f64, n_max: usize) -> f64 {
    (eta * eta).powi(n_max as i32 + 1)
}

/// Smallest `n_max` with `η^{2(n_max+1)} < tail`.
pub fn min_pair_cutoff(eta: f64, tail: f64) -> usize {
    let mut n = 0;
    while squeeze_tail(eta, n) >= tail {
        n += 1;
    }
    n
}

/// Smallest `n_max` whose Poisson tail for mean `α²` is below `tail`.
pub fn min_coherent_cutoff(alpha: f64, tail: f64) -> usize {
    let mean = alpha * alpha;
    let mut p = (-mean).exp();
    let mut cum = p;
    let mut n = 0;
    while 1.0 - cum >= tail {
        n += 1;
        p *= mean / n as f64;
        cum += p;
        if p == 0.0 && n as f64 > mean {
            break;
        }
    }
    n
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Argument(format!(
            "alpha must be a finite nonnegative real (the phase carries the sign), got {alpha}"
        )));
    }
    Ok(())
}

/// Poisson weights `e^{-α²} α^{2n}/n!` for `n = 0..=n_max`.
pub fn poisson_weights(alpha: f64, n_max: usize) -> Vec<f64> {
    let mean = alpha * alpha;
    let mut w = Vec::with_capacity(n_max + 1);
    let mut p = (-mean).exp();
    w.push(p);
    for n in 1..=n_max {
        p *= mean / n as f64;
        w.push(p);
    }
    w
}

/// `√(1-η²) ηⁿ` for `n = 0..=n_max`.
pub fn pair_amplitudes(eta: f64, n_max: usize) -> Vec<f64> {
    let mut a = Vec::with_capacity(n_max + 1);
    let mut v = (1.0 - eta * eta).sqrt();
    a.push(v);
    for _ in 0..n_max {
        v *= eta;
        a.push(v);
    }
    a
}

/// `|α e^{iφ}⟩` truncated at `n_max`; not renormalized.
pub fn coherent_ket(alpha: f64, phi: f64, n_max: usize) -> Result<Ket> {
    check_alpha(alpha)?;
    let phi = reduce_phase(phi);
    let shape = ModeShape::new(vec![n_max + 1])?;
    let mut mag = (-alpha * alpha / 2.0).exp();
    let mut amps = CVector::zeros(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            mag *= alpha / (n as f64).sqrt();
        }
        amps[n] = C64::from_polar(mag, n as f64 * phi);
    }
    Ok(Ket::from_parts(shape, amps))
}

/// Phase average of `|ψ⟩⟨ψ|` under `e^{iφ G}` where `grading[i]` is the
/// eigenvalue of `G` on basis state `i`.
pub fn phase_average(
    ket: &Ket,
    grading: &[usize],
    method: PhaseAverageMethod,
) -> Result<DensityOp> {
    let n = ket.shape().total_dim();
    if grading.len() != n {
        return Err(Error::Dimension(format!(
            "grading of length {} for dimension {n}",
            grading.len()
        )));
    }
    let support: Vec<usize> = (0..n)
        .filter(|&i| ket.amps()[i] != C64::new(0.0, 0.0))
        .collect();
    let mut mat = CMatrix::zeros(n, n);
    match method {
        PhaseAverageMethod::Analytic => {
            for &j in &support {
                for &i in &support {
                    if grading[i] == grading[j] {
                        mat[(i, j)] = ket.amps()[i] * ket.amps()[j].conj();
                    }
                }
            }
        }
        PhaseAverageMethod::Quadrature { points } => {
            if points < 2 {
                return Err(Error::Config("quadrature needs at least 2 points".into()));
            }
            let (lo, hi) = support
                .iter()
                .map(|&i| grading[i])
                .fold((usize::MAX, 0), |(lo, hi), g| (lo.min(g), hi.max(g)));
            let spread = hi.saturating_sub(lo);
            if points <= spread {
                return Err(Error::Config(format!(
                    "{points} quadrature points alias a grading spread of {spread}; need more than {spread}"
                )));
            }
            // rotated[k][s] = e^{i g φ_k} ψ_s over the support
            let rotated: Vec<Vec<C64>> = (0..points)
                .map(|k| {
                    let phi = TAU * k as f64 / points as f64;
                    support
                        .iter()
                        .map(|&i| ket.amps()[i] * C64::from_polar(1.0, grading[i] as f64 * phi))
                        .collect()
                })
                .collect();
            let inv = 1.0 / points as f64;
            let columns: Vec<Vec<C64>> = (0..support.len())
                .into_par_iter()
                .map(|sj| {
                    (0..support.len())
                        .map(|si| {
                            let mut acc = C64::new(0.0, 0.0);
                            for r in &rotated {
                                acc += r[si] * r[sj].conj();
                            }
                            acc * inv
                        })
                        .collect()
                })
                .collect();
            for (sj, col) in columns.iter().enumerate() {
                for (si, v) in col.iter().enumerate() {
                    mat[(support[si], support[sj])] = *v;
                }
            }
        }
    }
    Ok(DensityOp::from_parts(ket.shape().clone(), mat))
}

/// Grading by photon number of a single mode (or of the listed modes summed).
pub fn number_grading(shape: &ModeShape, modes: &[usize]) -> Vec<usize> {
    (0..shape.total_dim())
        .map(|i| {
            let occ = shape.occupations(i);
            modes.iter().map(|&m| occ[m]).sum()
        })
        .collect()
}

/// Phase-averaged laser state `e^{-α²} Σ α^{2n}/n! |n⟩⟨n|`.
pub fn phase_randomized_coherent(
    alpha: f64,
    n_max: usize,
    method: PhaseAverageMethod,
) -> Result<DensityOp> {
    check_alpha(alpha)?;
    match method {
        PhaseAverageMethod::Analytic => {
            let w = poisson_weights(alpha, n_max);
            let diag = CVector::from_iterator(n_max + 1, w.iter().map(|&p| C64::new(p, 0.0)));
            Ok(DensityOp::from_parts(
                ModeShape::new(vec![n_max + 1])?,
                CMatrix::from_diagonal(&diag),
            ))
        }
        PhaseAverageMethod::Quadrature { points } => {
            if points <= n_max {
                return Err(Error::Config(format!(
                    "quadrature with K={points} must exceed n_max={n_max}"
                )));
            }
            let ket = coherent_ket(alpha, 0.0, n_max)?;
            let grading = number_grading(ket.shape(), &[0]);
            phase_average(&ket, &grading, method)
        }
    }
}

/// Coherent-state picture of the laser state: `K` equally weighted kets at
/// phases `2πk/K`.
pub fn coherent_phase_decomposition(
    alpha: f64,
    n_max: usize,
    points: usize,
) -> Result<Decomposition> {
    if points <= n_max {
        return Err(Error::Config(format!(
            "K={points} phase points must exceed n_max={n_max}"
        )));
    }
    let kets = (0..points)
        .map(|k| coherent_ket(alpha, TAU * k as f64 / points as f64, n_max))
        .collect::<Result<Vec<_>>>()?;
    Decomposition::uniform(kets)
}

/// Number-state picture of the laser state: Fock kets with Poisson weights.
///
/// The truncation deficit is carried by the kets (each scaled by
/// `√(Σ p_n)`) so the weights sum to one, matching how the coherent picture
/// carries it.
pub fn number_state_decomposition(alpha: f64, n_max: usize) -> Result<Decomposition> {
    check_alpha(alpha)?;
    let w = poisson_weights(alpha, n_max);
    let total: f64 = w.iter().sum();
    let shape = ModeShape::new(vec![n_max + 1])?;
    let scale = C64::new(total.sqrt(), 0.0);
    let kets = (0..=n_max)
        .map(|n| {
            let mut a = CVector::zeros(n_max + 1);
            a[n] = scale;
            Ket::from_parts(shape.clone(), a)
        })
        .collect();
    Decomposition::new(w.iter().map(|p| p / total).collect(), kets)
}

/// Two-mode squeezed ket `√(1-η²) Σ ηⁿ e^{inφ} |n n⟩` on shape
/// `[n_max+1, n_max+1]`.
pub fn tmsv_ket(p: &SqueezeParams) -> Ket {
    tmsv_ket_unchecked(p.eta, p.phi, p.n_max)
}

pub(crate) fn tmsv_ket_unchecked(eta: f64, phi: f64, n_max: usize) -> Ket {
    let d = n_max + 1;
    let shape = ModeShape::new(vec![d, d]).expect("nonzero dims");
    let mut amps = CVector::zeros(d * d);
    for (n, a) in pair_amplitudes(eta, n_max).into_iter().enumerate() {
        amps[n * d + n] = C64::from_polar(a, n as f64 * phi);
    }
    Ket::from_parts(shape, amps)
}

/// Phase-randomized single-copy squeezed state
/// `(1-η²) Σ η^{2n} |n n⟩⟨n n|`.
pub fn rho_s(eta: f64, n_max: usize) -> Result<DensityOp> {
    check_eta(eta)?;
    let d = n_max + 1;
    let shape = ModeShape::new(vec![d, d])?;
    let mut mat = CMatrix::zeros(d * d, d * d);
    for (n, a) in pair_amplitudes(eta, n_max).into_iter().enumerate() {
        mat[(n * d + n, n * d + n)] = C64::new(a * a, 0.0);
    }
    Ok(DensityOp::from_parts(shape, mat))
}

/// `|α e^{iφ}⟩ → |α/√m e^{iφ}⟩^{⊗m}` as a product of coherent kets.
pub fn split_coherent(alpha: f64, phi: f64, m: usize, n_max: usize) -> Result<Ket> {
    check_alpha(alpha)?;
    if m == 0 {
        return Err(Error::Argument("m must be at least 1".into()));
    }
    let copy = coherent_ket(alpha / (m as f64).sqrt(), phi, n_max)?;
    let mut ket = copy.clone();
    for _ in 1..m {
        ket = ket.tensor(&copy);
    }
    Ok(ket)
}

/// Shared-phase multi-copy state with the default dimension cap.
pub fn rho_t(
    eta: f64,
    m: usize,
    n_max_per_pair: usize,
    method: PhaseAverageMethod,
) -> Result<DensityOp> {
    rho_t_with_cap(eta, m, n_max_per_pair, method, DEFAULT_MAX_DIM)
}

/// Total dimension of the `m`-pair state, if it fits in `usize`.
pub fn rho_t_dimension(m: usize, n_max_per_pair: usize) -> Option<usize> {
    (n_max_per_pair + 1).checked_pow(u32::try_from(2 * m).ok()?)
}

/// Phase average over one shared φ of `m` squeezed pairs, each with
/// parameter `η/√m`. Modes are ordered `[A1, B1, A2, B2, ...]`.
pub fn rho_t_with_cap(
    eta: f64,
    m: usize,
    n_max_per_pair: usize,
    method: PhaseAverageMethod,
    max_dim: usize,
) -> Result<DensityOp> {
    check_eta(eta)?;
    if m == 0 {
        return Err(Error::Argument("m must be at least 1".into()));
    }
    let dim = rho_t_dimension(m, n_max_per_pair);
    match dim {
        Some(d) if d <= max_dim => {}
        _ => {
            return Err(Error::Resource(format!(
                "m={m}, n_max={n_max_per_pair} needs dimension {} above the cap {max_dim}",
                dim.map_or_else(|| "> usize::MAX".to_string(), |d| d.to_string())
            )))
        }
    }
    if let PhaseAverageMethod::Quadrature { points } = method {
        if points <= m * n_max_per_pair {
            return Err(Error::Config(format!(
                "K={points} must exceed m*n_max={}",
                m * n_max_per_pair
            )));
        }
    }
    let pair = tmsv_ket_unchecked(eta / (m as f64).sqrt(), 0.0, n_max_per_pair);
    let mut ket = pair.clone();
    for _ in 1..m {
        ket = ket.tensor(&pair);
    }
    let alice: Vec<usize> = (0..m).map(|k| 2 * k).collect();
    let grading = number_grading(ket.shape(), &alice);
    phase_average(&ket, &grading, method)
}
