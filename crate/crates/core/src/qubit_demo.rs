//! Two qubits entangled with a four-level register.
//!
//! `|Ψ⟩ = ½(|0⟩|φ+⟩ + |1⟩|φ−⟩ + |2⟩|ψ+⟩ + |3⟩|ψ−⟩)` on shape `[4, 2, 2]`
//! (register, qubit A, qubit B). Reading the register leaves a Bell state;
//! discarding it leaves `I/4`, which is equally a mixture of Bell states and
//! of product states.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::Serialize;

use crate::entanglement::{decomposition_equivalent, negativity, Bipartition};
use crate::fock::{
    assemble_density, partial_trace, trace_distance, Decomposition, DensityOp, Ket, ModeShape,
};
use crate::{CVector, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    /// In register order.
    pub const ALL: [BellState; 4] = [Self::PhiPlus, Self::PhiMinus, Self::PsiPlus, Self::PsiMinus];

    /// Amplitudes on `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub fn amplitudes(self) -> [f64; 4] {
        let h = FRAC_1_SQRT_2;
        match self {
            Self::PhiPlus => [h, 0.0, 0.0, h],
            Self::PhiMinus => [h, 0.0, 0.0, -h],
            Self::PsiPlus => [0.0, h, h, 0.0],
            Self::PsiMinus => [0.0, h, -h, 0.0],
        }
    }

    pub fn ket(self) -> Ket {
        real_ket(qubit_pair_shape(), &self.amplitudes())
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::PhiPlus => "phi+",
            Self::PhiMinus => "phi-",
            Self::PsiPlus => "psi+",
            Self::PsiMinus => "psi-",
        }
    }
}

fn qubit_pair_shape() -> ModeShape {
    ModeShape::new(vec![2, 2]).expect("valid shape")
}

fn real_ket(shape: ModeShape, amps: &[f64]) -> Ket {
    let v = CVector::from_iterator(amps.len(), amps.iter().map(|&a| C64::new(a, 0.0)));
    Ket::new(shape, v).expect("unit-norm amplitudes")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiState {
    pub ket: Ket,
}

pub fn build_psi() -> PsiState {
    let mut amps = Vec::with_capacity(16);
    for b in BellState::ALL {
        amps.extend(b.amplitudes().iter().map(|a| 0.5 * a));
    }
    PsiState {
        ket: real_ket(ModeShape::new(vec![4, 2, 2]).expect("valid shape"), &amps),
    }
}

/// Probability of register outcome `outcome` and the normalized qubit state it
/// leaves behind.
pub fn measure_register(psi: &PsiState, outcome: usize) -> Result<(f64, Ket)> {
    if outcome > 3 {
        return Err(Error::Argument(format!(
            "register outcome {outcome} not in 0..=3"
        )));
    }
    let slice = psi.ket.amps().rows(4 * outcome, 4).into_owned();
    let p = slice.norm_squared();
    let ket = Ket::new(qubit_pair_shape(), slice / C64::new(p.sqrt(), 0.0))?;
    Ok((p, ket))
}

/// Qubit state after the register is traced out.
pub fn lost_register_state(psi: &PsiState) -> Result<DensityOp> {
    partial_trace(&psi.ket.projector(), &[1, 2])
}

/// Equal mixture of the four Bell states.
pub fn bell_mixture() -> Decomposition {
    Decomposition::uniform(BellState::ALL.iter().map(|b| b.ket()).collect()).expect("four kets")
}

/// Equal mixture of `|00⟩, |01⟩, |10⟩, |11⟩`.
pub fn product_mixture() -> Decomposition {
    let kets = (0..4)
        .map(|i| {
            let mut a = [0.0; 4];
            a[i] = 1.0;
            real_ket(qubit_pair_shape(), &a)
        })
        .collect();
    Decomposition::uniform(kets).expect("four kets")
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &Ket, b: &Ket) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalRow {
    pub outcome: usize,
    pub probability: f64,
    pub bell_state: BellState,
    pub fidelity: f64,
    pub negativity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub bell_mixture: Vec<(f64, BellState)>,
    pub product_mixture: Vec<(f64, String)>,
    pub trace_distance: f64,
    pub equivalent: bool,
    pub reduced_negativity: f64,
    pub conditional: Vec<ConditionalRow>,
}

/// Everything the example demonstrates, collected for printing.
pub fn report() -> Result<DemoReport> {
    let psi = build_psi();
    let cut = Bipartition::two_mode();
    let bell = bell_mixture();
    let product = product_mixture();
    let reduced = lost_register_state(&psi)?;
    let mut conditional = Vec::with_capacity(4);
    for (outcome, b) in BellState::ALL.into_iter().enumerate() {
        let (probability, ket) = measure_register(&psi, outcome)?;
        conditional.push(ConditionalRow {
            outcome,
            probability,
            bell_state: b,
            fidelity: fidelity(&ket, &b.ket())?,
            negativity: negativity(&ket.projector(), &cut)?,
        });
    }
    Ok(DemoReport {
        bell_mixture: bell.weights().iter().copied().zip(BellState::ALL).collect(),
        product_mixture: product
            .weights()
            .iter()
            .zip(["00", "01", "10", "11"])
            .map(|(w, l)| (*w, l.to_string()))
            .collect(),
        trace_distance: trace_distance(&assemble_density(&bell)?, &assemble_density(&product)?)?,
        equivalent: decomposition_equivalent(&bell, &product, 1e-12)?,
        reduced_negativity: negativity(&reduced, &cut)?,
        conditional,
    })
}
