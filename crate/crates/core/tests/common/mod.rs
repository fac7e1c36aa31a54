#![allow(dead_code)]

use impc_core::numerics::{DenseMatrix, DenseVector};
use impc_core::{ControllerState, Experiment, MpcProblem, ProblemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dc_motor() -> Experiment {
    ProblemSpec::dc_motor().build().unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut impl Rng, len: usize, scale: f64) -> DenseVector {
    DenseVector::from_fn(len, |_, _| rng.gen_range(-scale..scale))
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

/// `Σ_{k<terms} M^k / k!`, summed directly.
pub fn taylor_expm(m: &DenseMatrix, terms: usize) -> DenseMatrix {
    let n = m.nrows();
    let mut sum = DenseMatrix::identity(n, n);
    let mut term = DenseMatrix::identity(n, n);
    for k in 1..terms {
        term = &term * m / k as f64;
        sum += &term;
    }
    sum
}

/// Simulate the discrete prediction model forward and stack `z`.
pub fn rollout(prob: &MpcProblem, x0: &DenseVector, inputs: &[DenseVector]) -> DenseVector {
    let (n, m, horizon) = (prob.n(), prob.m(), prob.horizon());
    assert_eq!(inputs.len(), horizon);
    let mut z = DenseVector::zeros(prob.nz());
    let mut x = x0.clone();
    for (p, u) in inputs.iter().enumerate() {
        z.rows_mut(p * m, m).copy_from(u);
        x = prob.a() * &x + prob.b() * u;
        z.rows_mut(m * horizon + p * n, n).copy_from(&x);
    }
    z
}

pub fn random_state(rng: &mut impl Rng, prob: &MpcProblem, scale: f64) -> ControllerState {
    ControllerState {
        z: random_vector(rng, prob.nz(), scale),
        mu: DenseVector::from_fn(prob.n_ineq(), |_, _| rng.gen_range(0.0..scale)),
        lambda: random_vector(rng, prob.n_eq(), scale),
    }
}

/// Solve `[2F, K Hᵀ; H, -α I] [z; λ] = [0; -V x]`.
pub fn damped_saddle(prob: &MpcProblem, k: f64, alpha: f64, x: &DenseVector) -> (DenseVector, DenseVector) {
    let (nz, ne) = (prob.nz(), prob.n_eq());
    let mut s = DenseMatrix::zeros(nz + ne, nz + ne);
    s.view_mut((0, 0), (nz, nz)).copy_from(&(prob.f() * 2.0));
    s.view_mut((0, nz), (nz, ne)).copy_from(&(prob.h().transpose() * k));
    s.view_mut((nz, 0), (ne, nz)).copy_from(prob.h());
    s.view_mut((nz, nz), (ne, ne)).copy_from(&(DenseMatrix::identity(ne, ne) * -alpha));
    let mut rhs = DenseVector::zeros(nz + ne);
    rhs.rows_mut(nz, ne).copy_from(&-(prob.v() * x));
    // full-pivot LU keeps the oracle independent of the crate's partial-pivot path
    let sol = s.full_piv_lu().solve(&rhs).unwrap();
    (sol.rows(0, nz).into_owned(), sol.rows(nz, ne).into_owned())
}
