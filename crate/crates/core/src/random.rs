//! Seeded random ensembles.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{Operator, C64};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-task seed derived from a master seed (SplitMix64 finaliser).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// i.i.d. standard complex Gaussian entries (E|z|² = 1).
pub fn complex_gaussian(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

/// A = X·X*/dim with X complex Ginibre: full rank, positive.
pub fn random_positive(dim: usize, rng: &mut Rng) -> Operator {
    let x = complex_gaussian(dim, dim, rng);
    Operator::new(&x * x.adjoint() / C64::new(dim as f64, 0.0)).symmetrized().with_positive()
}

/// Haar unitary via QR with the phase correction on R's diagonal.
pub fn random_unitary(dim: usize, rng: &mut Rng) -> Operator {
    let x = complex_gaussian(dim, dim, rng);
    let qr = x.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= ph;
        }
    }
    Operator::new(q)
}
