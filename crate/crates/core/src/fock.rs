//! Multimode truncated Fock-space states and the generic operations on them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{check_square, hermitian_deviation, hermitian_eigenvalues, trace_norm};
use crate::tol::{Tolerances, TRACE_EXCESS};
use crate::{CMatrix, CVector, Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Per-mode truncation sizes; mode `k` holds levels `0..dims[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ModeShape {
    dims: Vec<usize>,
}

impl ModeShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Dimension("shape needs at least one mode".into()));
        }
        if let Some(k) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Dimension(format!("mode {k} has zero dimension")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Resource("total dimension overflows usize".into()))?;
        Ok(Self { dims })
    }

    /// `n_modes` copies of a `d`-level mode.
    pub fn uniform(d: usize, n_modes: usize) -> Result<Self> {
        Self::new(vec![d; n_modes])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Row-major strides: the last mode varies fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.dims[k + 1];
        }
        s
    }

    pub fn index(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.dims.len() {
            return Err(Error::Dimension(format!(
                "{} occupations for {} modes",
                occupations.len(),
                self.dims.len()
            )));
        }
        let mut idx = 0;
        for (k, (&n, &d)) in occupations.iter().zip(&self.dims).enumerate() {
            if n >= d {
                return Err(Error::Dimension(format!(
                    "occupation {n} of mode {k} outside 0..{d}"
                )));
            }
            idx = idx * d + n;
        }
        Ok(idx)
    }

    /// Inverse of [`ModeShape::index`]; `index` must be in range.
    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            occ[k] = index % self.dims[k];
            index /= self.dims[k];
        }
        occ
    }

    /// Shape restricted to the given modes, in the given order.
    pub fn select(&self, modes: &[usize]) -> Result<Self> {
        let dims = modes
            .iter()
            .map(|&m| {
                self.dims
                    .get(m)
                    .copied()
                    .ok_or_else(|| Error::Argument(format!("mode {m} does not exist")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims)
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims }
    }

    /// Validates a mode subset and returns it sorted without duplicates.
    pub(crate) fn mode_subset(&self, modes: &[usize]) -> Result<Vec<usize>> {
        let mut set = modes.to_vec();
        set.sort_unstable();
        set.dedup();
        if let Some(&bad) = set.iter().find(|&&m| m >= self.n_modes()) {
            return Err(Error::Argument(format!(
                "mode {bad} does not exist in a {}-mode shape",
                self.n_modes()
            )));
        }
        Ok(set)
    }

    /// For every basis index, the part of the flat index contributed by
    /// `modes`.
    pub(crate) fn partial_offsets(&self, modes: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = vec![0usize; self.total_dim()];
        for (i, off) in offsets.iter_mut().enumerate() {
            let occ = self.occupations(i);
            *off = modes.iter().map(|&m| occ[m] * strides[m]).sum();
        }
        offsets
    }
}

impl TryFrom<Vec<usize>> for ModeShape {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<ModeShape> for Vec<usize> {
    fn from(s: ModeShape) -> Self {
        s.dims
    }
}

impl fmt::Display for ModeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.dims)
    }
}

/// Flat JSON wire form shared by kets and density operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatJson {
    pub dims: Vec<usize>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Pure state amplitudes over a truncated product basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlatJson", into = "FlatJson")]
pub struct Ket {
    shape: ModeShape,
    amps: CVector,
}

impl Ket {
    /// Squared norm must lie in `(0, 1]`.
    pub fn new(shape: ModeShape, amps: CVector) -> Result<Self> {
        if amps.len() != shape.total_dim() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for shape {shape} of dimension {}",
                amps.len(),
                shape.total_dim()
            )));
        }
        let n2 = amps.norm_squared();
        if !(n2 > 0.0 && n2 <= 1.0 + TRACE_EXCESS) {
            return Err(Error::Validation(format!(
                "squared norm {n2} outside (0, 1]"
            )));
        }
        Ok(Self { shape, amps })
    }

    pub(crate) fn from_parts(shape: ModeShape, amps: CVector) -> Self {
        debug_assert_eq!(shape.total_dim(), amps.len());
        Self { shape, amps }
    }

    pub fn shape(&self) -> &ModeShape {
        &self.shape
    }

    pub fn amps(&self) -> &CVector {
        &self.amps
    }

    pub fn amp(&self, occupations: &[usize]) -> Result<C64> {
        Ok(self.amps[self.shape.index(occupations)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    /// `1 - ⟨ψ|ψ⟩`, the weight lost to truncation.
    pub fn norm_deficit(&self) -> f64 {
        1.0 - self.norm_sqr()
    }

    /// Errors when the truncation tail exceeds `tol.tail`.
    pub fn ensure_tail(&self, tol: &Tolerances) -> Result<()> {
        let d = self.norm_deficit();
        if d >= tol.tail {
            return Err(Error::Truncation(format!(
                "norm deficit {d:e} not below tail tolerance {:e}; raise n_max",
                tol.tail
            )));
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "inner product of {} and {}",
                self.shape, other.shape
            )));
        }
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        Ket {
            shape: self.shape.concat(&other.shape),
            amps: self.amps.kronecker(&other.amps),
        }
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> DensityOp {
        let n = self.amps.len();
        let mut mat = CMatrix::zeros(n, n);
        mat.gerc(ONE, &self.amps, &self.amps, ZERO);
        DensityOp::from_parts(self.shape.clone(), mat)
    }
}

impl From<Ket> for FlatJson {
    fn from(k: Ket) -> Self {
        FlatJson {
            dims: k.shape.dims.clone(),
            re: k.amps.iter().map(|z| z.re).collect(),
            im: k.amps.iter().map(|z| z.im).collect(),
        }
    }
}

impl TryFrom<FlatJson> for Ket {
    type Error = Error;
    fn try_from(j: FlatJson) -> Result<Self> {
        let shape = ModeShape::new(j.dims)?;
        if j.re.len() != j.im.len() {
            return Err(Error::Dimension("re/im lengths differ".into()));
        }
        let amps = CVector::from_iterator(
            j.re.len(),
            j.re.iter().zip(&j.im).map(|(&r, &i)| C64::new(r, i)),
        );
        Ket::new(shape, amps)
    }
}

/// Density operator over a truncated product basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlatJson", into = "FlatJson")]
pub struct DensityOp {
    shape: ModeShape,
    mat: CMatrix,
}

impl DensityOp {
    /// Checks dimensions, Hermiticity within `tol.herm` and
    /// `0 < trace ≤ 1 + 1e-12`. Positivity and the tail bound are checked by
    /// [`DensityOp::validate`].
    pub fn new(shape: ModeShape, mat: CMatrix, tol: &Tolerances) -> Result<Self> {
        check_square(&mat, "density matrix")?;
        if mat.nrows() != shape.total_dim() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for shape {shape}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let dev = hermitian_deviation(&mat);
        if dev > tol.herm {
            return Err(Error::Validation(format!(
                "density matrix not Hermitian: deviation {dev:e}"
            )));
        }
        let tr = mat.trace().re;
        if !(tr > 0.0 && tr <= 1.0 + TRACE_EXCESS) {
            return Err(Error::Validation(format!("trace {tr} outside (0, 1]")));
        }
        Ok(Self { shape, mat })
    }

    pub(crate) fn from_parts(shape: ModeShape, mat: CMatrix) -> Self {
        debug_assert_eq!(shape.total_dim(), mat.nrows());
        Self { shape, mat }
    }

    /// Full invariant check including positivity and the truncation tail.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let dev = hermitian_deviation(&self.mat);
        if dev > tol.herm {
            return Err(Error::Validation(format!("Hermitian deviation {dev:e}")));
        }
        let min = self.min_eigenvalue(tol)?;
        if min < tol.psd {
            return Err(Error::Validation(format!("negative eigenvalue {min:e}")));
        }
        self.ensure_tail(tol)
    }

    pub fn ensure_tail(&self, tol: &Tolerances) -> Result<()> {
        let d = self.trace_deficit();
        if d >= tol.tail {
            return Err(Error::Truncation(format!(
                "trace deficit {d:e} not below tail tolerance {:e}; raise n_max",
                tol.tail
            )));
        }
        Ok(())
    }

    pub fn shape(&self) -> &ModeShape {
        &self.shape
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn trace_deficit(&self) -> f64 {
        1.0 - self.trace()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    pub fn element(&self, row: &[usize], col: &[usize]) -> Result<C64> {
        Ok(self.mat[(self.shape.index(row)?, self.shape.index(col)?)])
    }

    /// Largest off-diagonal magnitude.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    worst = worst.max(self.mat[(i, j)].norm());
                }
            }
        }
        worst
    }

    pub fn eigenvalues(&self, tol: &Tolerances) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.mat, tol.herm)
    }

    pub fn min_eigenvalue(&self, tol: &Tolerances) -> Result<f64> {
        Ok(self.eigenvalues(tol)?.first().copied().unwrap_or(0.0))
    }

    pub fn tensor(&self, other: &DensityOp) -> DensityOp {
        DensityOp {
            shape: self.shape.concat(&other.shape),
            mat: self.mat.kronecker(&other.mat),
        }
    }
}

impl From<DensityOp> for FlatJson {
    fn from(d: DensityOp) -> Self {
        let n = d.dim();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                re.push(d.mat[(r, c)].re);
                im.push(d.mat[(r, c)].im);
            }
        }
        FlatJson {
            dims: d.shape.dims.clone(),
            re,
            im,
        }
    }
}

impl TryFrom<FlatJson> for DensityOp {
    type Error = Error;
    fn try_from(j: FlatJson) -> Result<Self> {
        let shape = ModeShape::new(j.dims)?;
        let n = shape.total_dim();
        if j.re.len() != n * n || j.im.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} entries for shape {shape}",
                n * n
            )));
        }
        let mat = CMatrix::from_fn(n, n, |r, c| C64::new(j.re[r * n + c], j.im[r * n + c]));
        DensityOp::new(shape, mat, &Tolerances::default())
    }
}

/// Weighted pure-state ensemble: one "picture" of a density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    weights: Vec<f64>,
    kets: Vec<Ket>,
}

/// Allowed slack on the weight sum.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

impl Decomposition {
    pub fn new(weights: Vec<f64>, kets: Vec<Ket>) -> Result<Self> {
        if weights.len() != kets.len() {
            return Err(Error::Argument(format!(
                "{} weights for {} kets",
                weights.len(),
                kets.len()
            )));
        }
        if kets.is_empty() {
            return Err(Error::Argument("empty decomposition".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Validation(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Validation(format!("weights sum to {sum}, not 1")));
        }
        let shape = kets[0].shape();
        if let Some(bad) = kets.iter().find(|k| k.shape() != shape) {
            return Err(Error::Shape(format!(
                "decomposition mixes shapes {shape} and {}",
                bad.shape()
            )));
        }
        Ok(Self { weights, kets })
    }

    /// Equal weights over `kets`.
    pub fn uniform(kets: Vec<Ket>) -> Result<Self> {
        let n = kets.len();
        Self::new(vec![1.0 / n as f64; n], kets)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kets(&self) -> &[Ket] {
        &self.kets
    }

    pub fn shape(&self) -> &ModeShape {
        self.kets[0].shape()
    }

    pub fn len(&self) -> usize {
        self.kets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kets.is_empty()
    }
}

/// Basis ket with amplitude one at the given occupations.
pub fn number_ket(shape: &ModeShape, occupations: &[usize]) -> Result<Ket> {
    let idx = shape.index(occupations)?;
    let mut amps = CVector::zeros(shape.total_dim());
    amps[idx] = ONE;
    Ok(Ket::from_parts(shape.clone(), amps))
}

/// `Σ w_i |ψ_i⟩⟨ψ_i|`.
pub fn assemble_density(d: &Decomposition) -> Result<DensityOp> {
    let shape = d.shape();
    if let Some(bad) = d.kets.iter().find(|k| k.shape() != shape) {
        return Err(Error::Shape(format!(
            "decomposition mixes shapes {shape} and {}",
            bad.shape()
        )));
    }
    let n = shape.total_dim();
    let mut mat = CMatrix::zeros(n, n);
    for (w, k) in d.weights.iter().zip(&d.kets) {
        mat.gerc(C64::new(*w, 0.0), &k.amps, &k.amps, ONE);
    }
    Ok(DensityOp::from_parts(shape.clone(), mat))
}

/// Reduced operator on the modes in `keep` (declared order).
pub fn partial_trace(rho: &DensityOp, keep: &[usize]) -> Result<DensityOp> {
    let shape = rho.shape();
    let keep = shape.mode_subset(keep)?;
    if keep.is_empty() {
        return Err(Error::Argument(
            "partial trace must keep at least one mode".into(),
        ));
    }
    let traced: Vec<usize> = (0..shape.n_modes()).filter(|m| !keep.contains(m)).collect();
    let kept_shape = shape.select(&keep)?;
    if traced.is_empty() {
        return Ok(rho.clone());
    }
    let traced_shape = shape.select(&traced)?;
    let n = shape.total_dim();
    let nk = kept_shape.total_dim();

    // bucket full indices by the traced-out multi-index
    let mut buckets: Vec<Vec<(usize, usize)>> = vec![Vec::new(); traced_shape.total_dim()];
    for i in 0..n {
        let occ = shape.occupations(i);
        let k_occ: Vec<usize> = keep.iter().map(|&m| occ[m]).collect();
        let t_occ: Vec<usize> = traced.iter().map(|&m| occ[m]).collect();
        let k = kept_shape.index(&k_occ)?;
        let t = traced_shape.index(&t_occ)?;
        buckets[t].push((i, k));
    }
    let mut out = CMatrix::zeros(nk, nk);
    for bucket in &buckets {
        for &(j, kj) in bucket {
            for &(i, ki) in bucket {
                out[(ki, kj)] += rho.mat[(i, j)];
            }
        }
    }
    Ok(DensityOp::from_parts(kept_shape, out))
}

/// Transpose of the indices belonging to `party`.
///
/// The result is Hermitian with the same trace but may have negative
/// eigenvalues, so it is returned as a bare matrix.
pub fn partial_transpose(rho: &DensityOp, party: &[usize]) -> Result<CMatrix> {
    let shape = rho.shape();
    let party = shape.mode_subset(party)?;
    if party.is_empty() || party.len() == shape.n_modes() {
        return Err(Error::Argument(
            "partial transpose needs a proper nonempty mode subset".into(),
        ));
    }
    let n = shape.total_dim();
    let p_off = shape.partial_offsets(&party);
    let mut out = CMatrix::zeros(n, n);
    for j in 0..n {
        let (pj, rj) = (p_off[j], j - p_off[j]);
        for i in 0..n {
            let (pi, ri) = (p_off[i], i - p_off[i]);
            out[(ri + pj, rj + pi)] = rho.mat[(i, j)];
        }
    }
    Ok(out)
}

/// `½ Σ |λ(a - b)|`.
pub fn trace_distance(a: &DensityOp, b: &DensityOp) -> Result<f64> {
    if a.shape != b.shape {
        return Err(Error::Shape(format!(
            "trace distance between {} and {}",
            a.shape, b.shape
        )));
    }
    let diff = &a.mat - &b.mat;
    Ok(0.5 * trace_norm(&diff, 2.0 * Tolerances::default().herm)?)
}

/// `Tr(ρ·obs)` for a Hermitian observable.
pub fn expectation(rho: &DensityOp, obs: &CMatrix, tol: &Tolerances) -> Result<f64> {
    check_square(obs, "observable")?;
    if obs.nrows() != rho.dim() {
        return Err(Error::Dimension(format!(
            "observable of dimension {} for state of dimension {}",
            obs.nrows(),
            rho.dim()
        )));
    }
    let dev = hermitian_deviation(obs);
    if dev > tol.herm {
        return Err(Error::Validation(format!(
            "observable not Hermitian: deviation {dev:e}"
        )));
    }
    let v = trace_of_product(&rho.mat, obs);
    if v.im.abs() >= 1e-10 {
        return Err(Error::Numerical(format!(
            "expectation has imaginary part {:e}",
            v.im
        )));
    }
    Ok(v.re)
}

/// `Tr(a·b)` without forming the product.
pub(crate) fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Number operator of one mode, embedded in the full space.
pub fn number_operator(shape: &ModeShape, mode: usize) -> Result<CMatrix> {
    if mode >= shape.n_modes() {
        return Err(Error::Argument(format!("mode {mode} does not exist")));
    }
    let n = shape.total_dim();
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(shape.occupations(i)[mode] as f64, 0.0);
    }
    Ok(m)
}

/// Total photon number over all modes.
pub fn total_number_operator(shape: &ModeShape) -> CMatrix {
    let n = shape.total_dim();
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(shape.occupations(i).iter().sum::<usize>() as f64, 0.0);
    }
    m
}

/// Projectors onto every basis state: the photon-number measurement.
pub fn number_basis_povm(shape: &ModeShape) -> Vec<CMatrix> {
    let n = shape.total_dim();
    (0..n)
        .map(|i| {
            let mut e = CMatrix::zeros(n, n);
            e[(i, i)] = ONE;
            e
        })
        .collect()
}
