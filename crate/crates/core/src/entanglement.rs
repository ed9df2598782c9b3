//! Decomposition-independent entanglement diagnostics.
//!
//! Everything here depends only on the assembled density operator, never on
//! the ensemble used to build it: partial-transpose negativity, a separability
//! certificate for operators diagonal in a product basis, and equality of
//! measurement statistics between two ensembles.

use serde::Serialize;

use crate::fock::{
    assemble_density, partial_transpose, trace_distance, Decomposition, DensityOp, ModeShape,
};
use crate::linalg::hermitian_eigenvalues;
use crate::tol::{Tolerances, TOL_NEG};
use crate::{CMatrix, Error, Result, C64};

/// Off-diagonal magnitude treated as zero by the diagonal certificate.
pub const DIAGONAL_TOL: f64 = 1e-15;
/// Reassembly accuracy required before a certificate is emitted.
pub const CERTIFICATE_TOL: f64 = 1e-10;
/// Completeness tolerance for POVM effects.
pub const POVM_SUM_TOL: f64 = 1e-10;

/// Split of the modes into two nonempty complementary parties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bipartition {
    party_a: Vec<usize>,
    party_b: Vec<usize>,
}

impl Bipartition {
    pub fn new(party_a: &[usize], n_modes: usize) -> Result<Self> {
        let mut a = party_a.to_vec();
        a.sort_unstable();
        a.dedup();
        if a.iter().any(|&m| m >= n_modes) {
            return Err(Error::Argument(format!(
                "party {party_a:?} names modes outside 0..{n_modes}"
            )));
        }
        let b: Vec<usize> = (0..n_modes).filter(|m| !a.contains(m)).collect();
        if a.is_empty() || b.is_empty() {
            return Err(Error::Argument("both parties must be nonempty".into()));
        }
        Ok(Self {
            party_a: a,
            party_b: b,
        })
    }

    /// First mode versus second mode of a two-mode state.
    pub fn two_mode() -> Self {
        Self {
            party_a: vec![0],
            party_b: vec![1],
        }
    }

    /// For `m` copy-pairs laid out `[A1, B1, A2, B2, ...]`: every first mode
    /// against every second mode.
    pub fn alice_bob(m: usize) -> Result<Self> {
        let a: Vec<usize> = (0..m).map(|k| 2 * k).collect();
        Self::new(&a, 2 * m)
    }

    pub fn party_a(&self) -> &[usize] {
        &self.party_a
    }

    pub fn party_b(&self) -> &[usize] {
        &self.party_b
    }

    fn check(&self, shape: &ModeShape) -> Result<()> {
        let n = self.party_a.len() + self.party_b.len();
        if n != shape.n_modes() {
            return Err(Error::Shape(format!(
                "bipartition over {n} modes applied to shape {shape}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeparabilityStatus {
    SeparableCertified,
    EntangledCertified,
    Undecided,
}

/// One product term `p |a⟩⟨a| ⊗ |b⟩⟨b|` of a certificate, with `a` and `b`
/// given as occupations of each party's modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductTerm {
    pub weight: f64,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparabilityVerdict {
    pub status: SeparabilityStatus,
    pub negativity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Vec<ProductTerm>>,
}

impl SeparabilityVerdict {
    fn undecided() -> Self {
        Self {
            status: SeparabilityStatus::Undecided,
            negativity: None,
            certificate: None,
        }
    }
}

/// Sum of the magnitudes of the negative partial-transpose eigenvalues,
/// without the noise floor.
pub fn raw_negativity(rho: &DensityOp, cut: &Bipartition) -> Result<f64> {
    cut.check(rho.shape())?;
    let pt = partial_transpose(rho, cut.party_a())?;
    let ev = hermitian_eigenvalues(&pt, Tolerances::default().herm)?;
    Ok(ev.iter().filter(|&&v| v < 0.0).map(|v| -v).sum())
}

/// Negativity across `cut`; values below `1e-9` are reported as 0.
pub fn negativity(rho: &DensityOp, cut: &Bipartition) -> Result<f64> {
    let n = raw_negativity(rho, cut)?;
    Ok(if n < TOL_NEG { 0.0 } else { n })
}

/// Operator `Σ p_k |a_k⟩⟨a_k| ⊗ |b_k⟩⟨b_k|` in the layout of `shape`.
pub fn certificate_operator(
    shape: &ModeShape,
    cut: &Bipartition,
    terms: &[ProductTerm],
) -> Result<DensityOp> {
    cut.check(shape)?;
    let n = shape.total_dim();
    let mut mat = CMatrix::zeros(n, n);
    let mut occ = vec![0; shape.n_modes()];
    for t in terms {
        for (&m, &v) in cut.party_a().iter().zip(&t.a) {
            occ[m] = v;
        }
        for (&m, &v) in cut.party_b().iter().zip(&t.b) {
            occ[m] = v;
        }
        let i = shape.index(&occ)?;
        mat[(i, i)] += C64::new(t.weight, 0.0);
    }
    Ok(DensityOp::from_parts(shape.clone(), mat))
}

/// Reads an explicit product decomposition off an operator that is diagonal
/// in the product number basis. Anything else is `Undecided`.
pub fn separable_certificate_diagonal(
    rho: &DensityOp,
    cut: &Bipartition,
) -> Result<SeparabilityVerdict> {
    cut.check(rho.shape())?;
    if rho.max_off_diagonal() > DIAGONAL_TOL {
        return Ok(SeparabilityVerdict::undecided());
    }
    let shape = rho.shape();
    let tol = Tolerances::default();
    let mut terms = Vec::new();
    for (i, p) in rho.diagonal().into_iter().enumerate() {
        if p < tol.psd {
            return Ok(SeparabilityVerdict::undecided());
        }
        if p <= 0.0 {
            continue;
        }
        let occ = shape.occupations(i);
        terms.push(ProductTerm {
            weight: p,
            a: cut.party_a().iter().map(|&m| occ[m]).collect(),
            b: cut.party_b().iter().map(|&m| occ[m]).collect(),
        });
    }
    let rebuilt = certificate_operator(shape, cut, &terms)?;
    if trace_distance(&rebuilt, rho)? > CERTIFICATE_TOL {
        return Ok(SeparabilityVerdict::undecided());
    }
    Ok(SeparabilityVerdict {
        status: SeparabilityStatus::SeparableCertified,
        negativity: None,
        certificate: Some(terms),
    })
}

/// Diagonal certificate first, then negativity; always reports negativity.
pub fn classify(rho: &DensityOp, cut: &Bipartition) -> Result<SeparabilityVerdict> {
    let neg = negativity(rho, cut)?;
    let mut verdict = separable_certificate_diagonal(rho, cut)?;
    if verdict.status == SeparabilityStatus::Undecided && neg > 0.0 {
        verdict.status = SeparabilityStatus::EntangledCertified;
    }
    verdict.negativity = Some(neg);
    Ok(verdict)
}

/// True when the two ensembles assemble to operators closer than `tol` in
/// trace distance.
pub fn decomposition_equivalent(d1: &Decomposition, d2: &Decomposition, tol: f64) -> Result<bool> {
    if d1.shape() != d2.shape() {
        return Err(Error::Shape(format!(
            "comparing decompositions on {} and {}",
            d1.shape(),
            d2.shape()
        )));
    }
    let r1 = assemble_density(d1)?;
    let r2 = assemble_density(d2)?;
    Ok(trace_distance(&r1, &r2)? < tol)
}

/// Checks that `povm` is a list of PSD effects summing to the identity.
pub fn validate_povm(povm: &[CMatrix], dim: usize) -> Result<()> {
    if povm.is_empty() {
        return Err(Error::Validation("empty POVM".into()));
    }
    let tol = Tolerances::default();
    let mut sum = CMatrix::zeros(dim, dim);
    for (k, e) in povm.iter().enumerate() {
        if e.nrows() != dim || e.ncols() != dim {
            return Err(Error::Dimension(format!(
                "effect {k} is {}x{}, expected {dim}x{dim}",
                e.nrows(),
                e.ncols()
            )));
        }
        let min = hermitian_eigenvalues(e, tol.herm)?
            .first()
            .copied()
            .unwrap_or(0.0);
        if min < tol.psd {
            return Err(Error::Validation(format!(
                "effect {k} has negative eigenvalue {min:e}"
            )));
        }
        sum += e;
    }
    let dev = (sum - CMatrix::identity(dim, dim)).camax();
    if dev > POVM_SUM_TOL {
        return Err(Error::Validation(format!(
            "effects sum to identity only within {dev:e}"
        )));
    }
    Ok(())
}

/// `Tr(ρ E_k)` for each effect.
pub fn outcome_probabilities(rho: &DensityOp, povm: &[CMatrix]) -> Result<Vec<f64>> {
    validate_povm(povm, rho.dim())?;
    let tol = Tolerances::default();
    povm.iter()
        .map(|e| crate::fock::expectation(rho, e, &tol))
        .collect()
}

/// True when every outcome probability agrees within `tol` between the
/// operators assembled from `d1` and `d2`.
pub fn statistics_invariance_check(
    d1: &Decomposition,
    d2: &Decomposition,
    povm: &[CMatrix],
    tol: f64,
) -> Result<bool> {
    if d1.shape() != d2.shape() {
        return Err(Error::Shape(format!(
            "comparing decompositions on {} and {}",
            d1.shape(),
            d2.shape()
        )));
    }
    let p1 = outcome_probabilities(&assemble_density(d1)?, povm)?;
    let p2 = outcome_probabilities(&assemble_density(d2)?, povm)?;
    Ok(p1.iter().zip(&p2).all(|(a, b)| (a - b).abs() <= tol))
}
