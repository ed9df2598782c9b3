//! Displaced-parity CHSH tests on two-mode states.
//!
//! Each party displaces its mode by `γ` and measures photon-number parity.
//! The displaced parity `Π(γ) = D(γ) P D(γ)†` equals `D(2γ) P`, so the
//! correlator needs only one block of a displacement matrix. The joint
//! outcome probabilities are computed independently from explicit
//! `D(γ) P_even D(γ)†` projectors, which gives two code paths that must agree.

use serde::{Deserialize, Serialize};

use crate::fock::{DensityOp, Ket};
use crate::par::*;
use crate::tol::Tolerances;
use crate::{CMatrix, Error, Result, C64};

/// Largest allowed `|γ|` for a measurement setting.
pub const DEFAULT_DISPLACEMENT_CAP: f64 = 3.0;
/// Weight allowed in the boundary rows of the padded exponential.
const BOUNDARY_WEIGHT_TARGET: f64 = 1e-24;
/// Column-norm deviation that turns into a truncation error.
pub const UNITARITY_TOL: f64 = 1e-6;
/// Imaginary residue tolerated in a correlator.
pub const IMAG_TOL: f64 = 1e-10;
/// Slack on `|E| ≤ 1`.
pub const CORRELATOR_SLACK: f64 = 1e-9;
/// Clamp threshold for slightly negative probabilities.
pub const PROB_NEG_TOL: f64 = -1e-10;
/// Tolerance between the summed joint probabilities and the state's trace.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Complex displacement applied by one party before the parity measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementSetting {
    gamma: C64,
}

impl DisplacementSetting {
    pub fn new(gamma: C64) -> Result<Self> {
        Self::with_cap(gamma, DEFAULT_DISPLACEMENT_CAP)
    }

    pub fn with_cap(gamma: C64, cap: f64) -> Result<Self> {
        if !(gamma.re.is_finite() && gamma.im.is_finite()) || gamma.norm() > cap {
            return Err(Error::Argument(format!(
                "displacement {gamma} exceeds the cap |γ| ≤ {cap}"
            )));
        }
        Ok(Self { gamma })
    }

    pub fn real(x: f64) -> Result<Self> {
        Self::new(C64::new(x, 0.0))
    }

    pub fn zero() -> Self {
        Self {
            gamma: C64::new(0.0, 0.0),
        }
    }

    pub fn gamma(&self) -> C64 {
        self.gamma
    }

    /// Same magnitude, phase advanced by `phi`.
    pub fn rotated(&self, phi: f64) -> Self {
        Self {
            gamma: self.gamma * C64::from_polar(1.0, phi),
        }
    }
}

/// Two settings per party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub a0: DisplacementSetting,
    pub a1: DisplacementSetting,
    pub b0: DisplacementSetting,
    pub b1: DisplacementSetting,
}

/// Signs of the four correlators in `B`, in [`ChshSettings::pairs`] order.
pub const CHSH_SIGNS: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

impl ChshSettings {
    pub fn real(a0: f64, a1: f64, b0: f64, b1: f64) -> Result<Self> {
        Ok(Self {
            a0: DisplacementSetting::real(a0)?,
            a1: DisplacementSetting::real(a1)?,
            b0: DisplacementSetting::real(b0)?,
            b1: DisplacementSetting::real(b1)?,
        })
    }

    pub fn zero() -> Self {
        let z = DisplacementSetting::zero();
        Self {
            a0: z,
            a1: z,
            b0: z,
            b1: z,
        }
    }

    /// `(a0,b0), (a1,b0), (a0,b1), (a1,b1)`.
    pub fn pairs(&self) -> [(DisplacementSetting, DisplacementSetting); 4] {
        [
            (self.a0, self.b0),
            (self.a1, self.b0),
            (self.a0, self.b1),
            (self.a1, self.b1),
        ]
    }

    /// Rotates both of Bob's settings by `phi`.
    pub fn rotate_b(&self, phi: f64) -> Self {
        Self {
            b0: self.b0.rotated(phi),
            b1: self.b1.rotated(phi),
            ..*self
        }
    }

    fn sort_key(&self) -> [f64; 8] {
        let g = [self.a0, self.a1, self.b0, self.b1];
        let mut k = [0.0; 8];
        for (i, s) in g.iter().enumerate() {
            k[2 * i] = s.gamma.re;
            k[2 * i + 1] = s.gamma.im;
        }
        k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellResult {
    pub chsh_value: f64,
    pub settings: ChshSettings,
    pub violated: bool,
}

impl BellResult {
    pub fn new(chsh_value: f64, settings: ChshSettings) -> Self {
        Self {
            chsh_value,
            settings,
            violated: chsh_value > 2.0,
        }
    }
}

/// `D(γ)` computed as the exponential of the truncated generator at a padded
/// dimension.
#[derive(Debug, Clone)]
pub struct DisplacementMatrix {
    gamma: C64,
    n_max: usize,
    pad: usize,
    padded: CMatrix,
}

impl DisplacementMatrix {
    pub fn gamma(&self) -> C64 {
        self.gamma
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    /// Full padded matrix, dimension `n_max + 1 + pad`.
    pub fn padded(&self) -> &CMatrix {
        &self.padded
    }

    /// `⟨m|D(γ)|n⟩` for `m, n ≤ n_max`.
    pub fn block(&self) -> CMatrix {
        let d = self.n_max + 1;
        self.padded.view((0, 0), (d, d)).into_owned()
    }

    /// Rows above this index are the guard band excluded from sums.
    fn interior(&self) -> usize {
        self.padded.nrows() - guard(self.pad)
    }
}

fn guard(pad: usize) -> usize {
    (pad / 2).max(5)
}

fn initial_pad(gamma: C64) -> usize {
    10usize.max((4.0 * gamma.norm_sqr()).ceil() as usize)
}

fn generator(gamma: C64, dim: usize) -> CMatrix {
    let mut g = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        let s = (n as f64).sqrt();
        g[(n, n - 1)] = gamma * s;
        g[(n - 1, n)] = -gamma.conj() * s;
    }
    g
}

/// Largest weight of any column `j ≤ n_max` in the guard rows, and the
/// largest deviation of the interior column norms from one.
fn leakage(d: &CMatrix, n_max: usize, pad: usize) -> (f64, f64) {
    let dim = d.nrows();
    let cut = dim - guard(pad);
    let mut boundary = 0.0_f64;
    let mut deviation = 0.0_f64;
    for j in 0..=n_max {
        let col = d.column(j);
        let inner: f64 = col.rows(0, cut).norm_squared();
        let outer: f64 = col.rows(cut, dim - cut).norm_squared();
        boundary = boundary.max(outer);
        deviation = deviation.max((1.0 - inner).abs());
    }
    (boundary, deviation)
}

/// Truncated `D(γ) = exp(γa† − γ*a)` acting on levels `0..=n_max`.
///
/// The padding starts at `max(10, ⌈4|γ|²⌉)` and doubles until the columns of
/// interest carry negligible weight near the artificial boundary.
pub fn displacement_matrix(gamma: C64, n_max: usize) -> Result<DisplacementMatrix> {
    if !(gamma.re.is_finite() && gamma.im.is_finite()) {
        return Err(Error::Argument(format!("non-finite displacement {gamma}")));
    }
    let mut pad = initial_pad(gamma);
    let ceiling = 4 * (n_max + 1) + (16.0 * gamma.norm_sqr()).ceil() as usize + 64;
    loop {
        let dim = n_max + 1 + pad;
        let d = generator(gamma, dim).exp();
        let (boundary, deviation) = leakage(&d, n_max, pad);
        if boundary <= BOUNDARY_WEIGHT_TARGET || pad >= ceiling {
            if deviation > UNITARITY_TOL {
                return Err(Error::Truncation(format!(
                    "displacement {gamma} at n_max={n_max} loses unitarity ({deviation:e}) even with pad {pad}"
                )));
            }
            return Ok(DisplacementMatrix {
                gamma,
                n_max,
                pad,
                padded: d,
            });
        }
        pad = (2 * pad).min(ceiling);
    }
}

/// Diagonal `(-1)^n` for `n = 0..=n_max`.
pub fn parity_matrix(n_max: usize) -> CMatrix {
    let mut p = CMatrix::zeros(n_max + 1, n_max + 1);
    for n in 0..=n_max {
        p[(n, n)] = C64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
    }
    p
}

/// `Π(γ) = D(γ) P D(γ)† = D(2γ) P` on levels `0..=n_max`.
pub fn displaced_parity(gamma: C64, n_max: usize) -> Result<CMatrix> {
    let mut m = displacement_matrix(gamma * 2.0, n_max)?.block();
    for n in (1..=n_max).step_by(2) {
        m.column_mut(n).neg_mut();
    }
    // exact Hermiticity; the exponential is Hermitian only to rounding
    Ok((&m + m.adjoint()) * C64::new(0.5, 0.0))
}

/// Even and odd displaced-parity projectors on levels `0..=n_max`.
#[derive(Debug, Clone)]
pub struct ParityProjectors {
    pub even: CMatrix,
    pub odd: CMatrix,
}

impl ParityProjectors {
    /// `D(γ) P_{even/odd} D(γ)†` summed over the padded intermediate levels.
    pub fn new(gamma: C64, n_max: usize) -> Result<Self> {
        let d = displacement_matrix(gamma, n_max)?;
        let rows = d.padded.rows(0, n_max + 1);
        let k_max = d.interior();
        let dim = n_max + 1;
        let mut even = CMatrix::zeros(dim, dim);
        let mut odd = CMatrix::zeros(dim, dim);
        for k in 0..k_max {
            let col = rows.column(k);
            let target = if k % 2 == 0 { &mut even } else { &mut odd };
            target.gerc(C64::new(1.0, 0.0), &col, &col, C64::new(1.0, 0.0));
        }
        Ok(Self { even, odd })
    }
}

/// A state on two modes, one per party.
pub trait TwoModeState: Sync {
    /// Dimensions of Alice's and Bob's modes.
    fn mode_dims(&self) -> Result<(usize, usize)>;
    /// `⟨X ⊗ Y⟩`.
    fn local_expectation(&self, x: &CMatrix, y: &CMatrix) -> C64;
    /// Trace of the state; below one by the truncation deficit.
    fn total_weight(&self) -> f64;
    fn ensure_measurable(&self, tol: &Tolerances) -> Result<()>;
}

fn two_mode_dims(dims: &[usize]) -> Result<(usize, usize)> {
    match dims {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::Shape(format!(
            "parity CHSH needs a two-mode state, got {} modes",
            dims.len()
        ))),
    }
}

impl TwoModeState for DensityOp {
    fn mode_dims(&self) -> Result<(usize, usize)> {
        two_mode_dims(self.shape().dims())
    }

    fn local_expectation(&self, x: &CMatrix, y: &CMatrix) -> C64 {
        // Tr[ρ (X⊗Y)] = Σ ρ[(i,j),(k,l)] X[k,i] Y[l,j]
        let (da, db) = (x.nrows(), y.nrows());
        let rho = self.matrix();
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..da {
            for l in 0..db {
                let c = k * db + l;
                for i in 0..da {
                    let xki = x[(k, i)];
                    let mut inner = C64::new(0.0, 0.0);
                    for j in 0..db {
                        inner += rho[(i * db + j, c)] * y[(l, j)];
                    }
                    acc += xki * inner;
                }
            }
        }
        acc
    }

    fn total_weight(&self) -> f64 {
        self.trace()
    }

    fn ensure_measurable(&self, tol: &Tolerances) -> Result<()> {
        self.ensure_tail(tol)
    }
}

impl TwoModeState for Ket {
    fn mode_dims(&self) -> Result<(usize, usize)> {
        two_mode_dims(self.shape().dims())
    }

    fn local_expectation(&self, x: &CMatrix, y: &CMatrix) -> C64 {
        // ⟨ψ|X⊗Y|ψ⟩ = Σ conj(Ψ) ∘ (X Ψ Yᵀ) with Ψ[i,j] = ψ_{i·db+j}
        let (da, db) = (x.nrows(), y.nrows());
        let amps = self.amps();
        let psi = CMatrix::from_fn(da, db, |i, j| amps[i * db + j]);
        let moved = x * &psi * y.transpose();
        psi.iter()
            .zip(moved.iter())
            .map(|(p, m)| p.conj() * m)
            .sum()
    }

    fn total_weight(&self) -> f64 {
        self.norm_sqr()
    }

    fn ensure_measurable(&self, tol: &Tolerances) -> Result<()> {
        self.ensure_tail(tol)
    }
}

fn checked_correlator(raw: C64) -> Result<f64> {
    if raw.im.abs() >= IMAG_TOL {
        return Err(Error::Numerical(format!(
            "correlator has imaginary residue {:e}",
            raw.im
        )));
    }
    if raw.re.abs() > 1.0 + CORRELATOR_SLACK {
        return Err(Error::Numerical(format!(
            "correlator {} outside [-1, 1]; truncation too small",
            raw.re
        )));
    }
    Ok(raw.re)
}

/// `E(γ_A, γ_B) = ⟨Π(γ_A) ⊗ Π(γ_B)⟩`.
pub fn correlator<S: TwoModeState + ?Sized>(
    state: &S,
    ga: DisplacementSetting,
    gb: DisplacementSetting,
) -> Result<f64> {
    let (da, db) = state.mode_dims()?;
    state.ensure_measurable(&Tolerances::default())?;
    let pa = displaced_parity(ga.gamma, da - 1)?;
    let pb = displaced_parity(gb.gamma, db - 1)?;
    checked_correlator(state.local_expectation(&pa, &pb))
}

/// Displaced-parity operators for a fixed set of CHSH settings.
#[derive(Debug, Clone)]
pub struct ChshOperators {
    settings: ChshSettings,
    a: [CMatrix; 2],
    b: [CMatrix; 2],
}

impl ChshOperators {
    pub fn new(s: &ChshSettings, dims: (usize, usize)) -> Result<Self> {
        let (da, db) = dims;
        Ok(Self {
            settings: *s,
            a: [
                displaced_parity(s.a0.gamma, da - 1)?,
                displaced_parity(s.a1.gamma, da - 1)?,
            ],
            b: [
                displaced_parity(s.b0.gamma, db - 1)?,
                displaced_parity(s.b1.gamma, db - 1)?,
            ],
        })
    }

    /// `B = E(a0,b0) + E(a1,b0) + E(a0,b1) − E(a1,b1)`.
    pub fn evaluate<S: TwoModeState + ?Sized>(&self, state: &S) -> Result<BellResult> {
        self.evaluate_with(state, &Tolerances::default())
    }

    pub fn evaluate_with<S: TwoModeState + ?Sized>(
        &self,
        state: &S,
        tol: &Tolerances,
    ) -> Result<BellResult> {
        let dims = state.mode_dims()?;
        if dims != (self.a[0].nrows(), self.b[0].nrows()) {
            return Err(Error::Shape(format!(
                "operators built for {:?}, state has {dims:?}",
                (self.a[0].nrows(), self.b[0].nrows())
            )));
        }
        state.ensure_measurable(tol)?;
        let mut value = 0.0;
        for (k, (ia, ib)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            value += CHSH_SIGNS[k]
                * checked_correlator(state.local_expectation(&self.a[ia], &self.b[ib]))?;
        }
        Ok(BellResult::new(value, self.settings))
    }
}

/// `B = E(a0,b0) + E(a1,b0) + E(a0,b1) − E(a1,b1)`.
pub fn chsh<S: TwoModeState + ?Sized>(state: &S, s: &ChshSettings) -> Result<BellResult> {
    chsh_with(state, s, &Tolerances::default())
}

pub fn chsh_with<S: TwoModeState + ?Sized>(
    state: &S,
    s: &ChshSettings,
    tol: &Tolerances,
) -> Result<BellResult> {
    ChshOperators::new(s, state.mode_dims()?)?.evaluate_with(state, tol)
}

/// Joint parity probabilities `(ee, eo, oe, oo)` from precomputed projectors.
pub fn joint_parity_probabilities_with<S: TwoModeState + ?Sized>(
    state: &S,
    pa: &ParityProjectors,
    pb: &ParityProjectors,
) -> Result<[f64; 4]> {
    let mut p = [0.0; 4];
    let combos = [
        (&pa.even, &pb.even),
        (&pa.even, &pb.odd),
        (&pa.odd, &pb.even),
        (&pa.odd, &pb.odd),
    ];
    for (slot, (x, y)) in p.iter_mut().zip(combos) {
        let v = state.local_expectation(x, y);
        if v.im.abs() >= IMAG_TOL {
            return Err(Error::Numerical(format!(
                "probability has imaginary residue {:e}",
                v.im
            )));
        }
        if v.re < PROB_NEG_TOL {
            return Err(Error::Numerical(format!("negative probability {:e}", v.re)));
        }
        *slot = v.re.max(0.0);
    }
    // the four projectors resolve the identity, so the sum is the state's trace
    let sum: f64 = p.iter().sum();
    let weight = state.total_weight();
    if (sum - weight).abs() > PROB_SUM_TOL {
        return Err(Error::Numerical(format!(
            "parity probabilities sum to {sum} against trace {weight}; truncation too small"
        )));
    }
    Ok(p)
}

/// Joint parity probabilities `(ee, eo, oe, oo)`.
pub fn joint_parity_probabilities<S: TwoModeState + ?Sized>(
    state: &S,
    ga: DisplacementSetting,
    gb: DisplacementSetting,
) -> Result<[f64; 4]> {
    let (da, db) = state.mode_dims()?;
    state.ensure_measurable(&Tolerances::default())?;
    let pa = ParityProjectors::new(ga.gamma, da - 1)?;
    let pb = ParityProjectors::new(gb.gamma, db - 1)?;
    joint_parity_probabilities_with(state, &pa, &pb)
}

/// `p_ee − p_eo − p_oe + p_oo`.
pub fn correlator_from_probabilities(p: &[f64; 4]) -> f64 {
    p[0] - p[1] - p[2] + p[3]
}

/// One scanned axis; `points == 1` pins the value at `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn fixed(v: f64) -> Self {
        Self {
            min: v,
            max: v,
            points: 1,
        }
    }

    pub fn range(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points }
    }

    pub fn step(&self) -> f64 {
        if self.points > 1 {
            (self.max - self.min) / (self.points - 1) as f64
        } else {
            0.0
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points.max(1))
            .map(|i| {
                if i + 1 == self.points {
                    self.max
                } else {
                    self.min + step * i as f64
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.points == 0
            || !(self.min.is_finite() && self.max.is_finite())
            || self.max < self.min
        {
            return Err(Error::Argument(format!("invalid scan axis {self:?}")));
        }
        Ok(())
    }

    /// Axis of `2·span+1` points of spacing `step·shrink` centred on `centre`.
    fn refined(&self, centre: f64, shrink: f64) -> Self {
        if self.points <= 1 {
            return *self;
        }
        let span = (1.0 / shrink).round() as usize;
        let step = self.step() * shrink;
        Self {
            min: centre - step * span as f64,
            max: centre + step * span as f64,
            points: 2 * span + 1,
        }
    }
}

/// Grid over the four settings, real and imaginary parts separately, in
/// order `[a0, a1, b0, b1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub re: [AxisSpec; 4],
    pub im: [AxisSpec; 4],
    /// Number of local refinement rounds around the running best point.
    pub refinements: usize,
    /// Step multiplier per refinement round.
    pub shrink: f64,
}

impl Default for ScanSpec {
    /// `a0 = b0 = 0`, `a1, b1 ∈ [−1, 1]` with 41 points, two ×1/5 refinements.
    fn default() -> Self {
        let fixed = AxisSpec::fixed(0.0);
        let free = AxisSpec::range(-1.0, 1.0, 41);
        Self {
            re: [fixed, free, fixed, free],
            im: [fixed; 4],
            refinements: 2,
            shrink: 0.2,
        }
    }
}

impl ScanSpec {
    /// Enables imaginary parts for the free settings with the same grid as
    /// their real parts.
    pub fn with_complex(mut self) -> Self {
        for k in 0..4 {
            if self.re[k].points > 1 {
                self.im[k] = self.re[k];
            }
        }
        self
    }

    fn validate(&self) -> Result<()> {
        for a in self.re.iter().chain(&self.im) {
            a.validate()?;
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Argument(format!(
                "shrink {} must be in (0, 1)",
                self.shrink
            )));
        }
        Ok(())
    }

    fn slot_values(&self, k: usize) -> Result<Vec<DisplacementSetting>> {
        let mut out = Vec::new();
        for re in self.re[k].values() {
            for im in self.im[k].values() {
                out.push(DisplacementSetting::new(C64::new(re, im))?);
            }
        }
        Ok(out)
    }

    fn refined(&self, best: &ChshSettings) -> Self {
        let g = [best.a0.gamma, best.a1.gamma, best.b0.gamma, best.b1.gamma];
        let mut next = self.clone();
        for k in 0..4 {
            next.re[k] = clamp_axis(self.re[k].refined(g[k].re, self.shrink));
            next.im[k] = clamp_axis(self.im[k].refined(g[k].im, self.shrink));
        }
        next
    }
}

fn clamp_axis(a: AxisSpec) -> AxisSpec {
    // keep refined grids inside the displacement cap
    let c = DEFAULT_DISPLACEMENT_CAP / std::f64::consts::SQRT_2;
    if a.points <= 1 || (a.min >= -c && a.max <= c) {
        return a;
    }
    let (min, max) = (a.min.max(-c), a.max.min(c));
    let points = (((max - min) / a.step()).round() as usize + 1).max(1);
    AxisSpec { min, max, points }
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    /// 0 for the coarse grid, then one per refinement round.
    pub stage: usize,
    pub result: BellResult,
}

fn precompute<T: Send>(
    items: &[DisplacementSetting],
    dim: usize,
    f: impl Fn(C64, usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    items
        .to_vec()
        .into_par_iter()
        .map(|s| f(s.gamma, dim - 1))
        .collect()
}

fn correlator_table<S: TwoModeState + ?Sized>(
    state: &S,
    a: &[CMatrix],
    b: &[CMatrix],
) -> Result<Vec<Vec<f64>>> {
    let nb = b.len();
    let flat: Vec<Result<f64>> = (0..a.len() * nb)
        .into_par_iter()
        .map(|idx| checked_correlator(state.local_expectation(&a[idx / nb], &b[idx % nb])))
        .collect();
    let flat = flat.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(flat.chunks(nb).map(|c| c.to_vec()).collect())
}

fn scan_stage<S: TwoModeState + ?Sized>(
    state: &S,
    spec: &ScanSpec,
    stage: usize,
) -> Result<Vec<ScanRow>> {
    let (da, db) = state.mode_dims()?;
    let slots: Vec<Vec<DisplacementSetting>> =
        (0..4).map(|k| spec.slot_values(k)).collect::<Result<_>>()?;
    let (a0, a1, b0, b1) = (&slots[0], &slots[1], &slots[2], &slots[3]);
    let pa0 = precompute(a0, da, displaced_parity)?;
    let pa1 = precompute(a1, da, displaced_parity)?;
    let pb0 = precompute(b0, db, displaced_parity)?;
    let pb1 = precompute(b1, db, displaced_parity)?;
    let e00 = correlator_table(state, &pa0, &pb0)?;
    let e10 = correlator_table(state, &pa1, &pb0)?;
    let e01 = correlator_table(state, &pa0, &pb1)?;
    let e11 = correlator_table(state, &pa1, &pb1)?;
    let mut rows = Vec::with_capacity(a0.len() * a1.len() * b0.len() * b1.len());
    for (i0, s_a0) in a0.iter().enumerate() {
        for (i1, s_a1) in a1.iter().enumerate() {
            for (j0, s_b0) in b0.iter().enumerate() {
                for (j1, s_b1) in b1.iter().enumerate() {
                    let value = e00[i0][j0] + e10[i1][j0] + e01[i0][j1] - e11[i1][j1];
                    let settings = ChshSettings {
                        a0: *s_a0,
                        a1: *s_a1,
                        b0: *s_b0,
                        b1: *s_b1,
                    };
                    rows.push(ScanRow {
                        stage,
                        result: BellResult::new(value, settings),
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Best row: largest `B`, ties to the lexicographically smallest settings.
fn best_of(rows: &[ScanRow]) -> Option<BellResult> {
    rows.iter()
        .map(|r| r.result)
        .fold(None, |best, r| match best {
            None => Some(r),
            Some(b) => {
                let better = r.chsh_value > b.chsh_value
                    || (r.chsh_value == b.chsh_value
                        && r.settings.sort_key().partial_cmp(&b.settings.sort_key())
                            == Some(std::cmp::Ordering::Less));
                Some(if better { r } else { b })
            }
        })
}

/// Every grid point evaluated by the coarse scan and its refinements.
pub fn scan_chsh<S: TwoModeState + ?Sized>(state: &S, spec: &ScanSpec) -> Result<Vec<ScanRow>> {
    scan_chsh_with(state, spec, &Tolerances::default())
}

pub fn scan_chsh_with<S: TwoModeState + ?Sized>(
    state: &S,
    spec: &ScanSpec,
    tol: &Tolerances,
) -> Result<Vec<ScanRow>> {
    spec.validate()?;
    state.ensure_measurable(tol)?;
    let mut rows = scan_stage(state, spec, 0)?;
    let mut current = spec.clone();
    for stage in 1..=spec.refinements {
        let best = best_of(&rows).ok_or_else(|| Error::Argument("empty scan".into()))?;
        current = current.refined(&best.settings);
        rows.extend(scan_stage(state, &current, stage)?);
    }
    Ok(rows)
}

/// Largest CHSH value over the scan.
pub fn optimize_chsh<S: TwoModeState + ?Sized>(state: &S, spec: &ScanSpec) -> Result<BellResult> {
    optimize_chsh_with(state, spec, &Tolerances::default())
}

pub fn optimize_chsh_with<S: TwoModeState + ?Sized>(
    state: &S,
    spec: &ScanSpec,
    tol: &Tolerances,
) -> Result<BellResult> {
    best_row(&scan_chsh_with(state, spec, tol)?)
}

/// Best row of a finished scan.
pub fn best_row(rows: &[ScanRow]) -> Result<BellResult> {
    best_of(rows).ok_or_else(|| Error::Argument("empty scan".into()))
}
