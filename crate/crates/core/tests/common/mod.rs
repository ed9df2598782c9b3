#![allow(dead_code)]

use picturelab::fock::{Decomposition, Ket, ModeShape};
use picturelab::{CMatrix, CVector, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| gaussian(rng))
}

pub fn random_ket(rng: &mut ChaCha8Rng, shape: &ModeShape) -> Ket {
    let v = random_vector(rng, shape.total_dim());
    let n = v.norm();
    Ket::new(shape.clone(), v / C64::new(n, 0.0)).unwrap()
}

/// Haar-like unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / C64::new(d.norm(), 0.0)
        } else {
            C64::new(1.0, 0.0)
        };
        let col = u.column(j) * phase;
        u.set_column(j, &col);
    }
    u
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| gaussian(rng));
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

pub fn random_decomposition(
    rng: &mut ChaCha8Rng,
    shape: &ModeShape,
    terms: usize,
) -> Decomposition {
    let raw: Vec<f64> = (0..terms).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let kets = (0..terms).map(|_| random_ket(rng, shape)).collect();
    Decomposition::new(weights, kets).unwrap()
}

/// Another ensemble for the same operator: `w_j = Σ_i U_ji √p_i ψ_i` with a
/// random `size × size` unitary, `size ≥ d.len()`.
pub fn remix(rng: &mut ChaCha8Rng, d: &Decomposition, size: usize) -> Decomposition {
    let u = random_unitary(rng, size);
    let dim = d.shape().total_dim();
    let mut weights = Vec::new();
    let mut kets = Vec::new();
    for j in 0..size {
        let mut w = CVector::zeros(dim);
        for (i, (p, k)) in d.weights().iter().zip(d.kets()).enumerate() {
            w += k.amps() * (u[(j, i)] * p.sqrt());
        }
        let n2 = w.norm_squared();
        if n2 < 1e-30 {
            continue;
        }
        weights.push(n2);
        kets.push(Ket::new(d.shape().clone(), w / C64::new(n2.sqrt(), 0.0)).unwrap());
    }
    let total: f64 = weights.iter().sum();
    let weights = weights.into_iter().map(|w| w / total).collect();
    Decomposition::new(weights, kets).unwrap()
}

pub fn local_unitary(rng: &mut ChaCha8Rng, da: usize, db: usize) -> CMatrix {
    random_unitary(rng, da).kronecker(&random_unitary(rng, db))
}
