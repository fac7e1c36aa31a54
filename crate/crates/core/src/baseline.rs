//! Conventional sampled MPC: solve the equality-constrained QP from scratch
//! at every sample and apply the first planned input.

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, DenseVector, LuFactor};
use crate::problem::MpcProblem;

/// Primal-dual optimum of the equality-constrained problem.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DenseVector,
    pub lambda: DenseVector,
}

/// Assemble `[[2F, Hᵀ], [H, 0]]`.
pub fn kkt_matrix(prob: &MpcProblem) -> DenseMatrix {
    let nz = prob.nz();
    let ne = prob.n_eq();
    let mut kkt = DenseMatrix::zeros(nz + ne, nz + ne);
    kkt.view_mut((0, 0), (nz, nz)).copy_from(&(prob.f() * 2.0));
    kkt.view_mut((0, nz), (nz, ne)).copy_from(&prob.h().transpose());
    kkt.view_mut((nz, 0), (ne, nz)).copy_from(prob.h());
    kkt
}

/// Minimize `zᵀFz` subject to `H z + V x = 0` through its KKT system.
pub fn solve_equality_qp(prob: &MpcProblem, x: &DenseVector) -> Result<QpSolution> {
    if prob.n_ineq() > 0 {
        return Err(Error::UnsupportedInequality("the baseline KKT solver"));
    }
    prob.check_state(x)?;
    let nz = prob.nz();
    let ne = prob.n_eq();
    let factor = LuFactor::new(&kkt_matrix(prob))?;
    let mut rhs = DenseVector::zeros(nz + ne);
    rhs.rows_mut(nz, ne).copy_from(&-(prob.v() * x));
    let sol = factor.solve(&rhs)?;
    Ok(QpSolution {
        z: sol.rows(0, nz).into_owned(),
        lambda: sol.rows(nz, ne).into_owned(),
    })
}

/// First `m` entries of the optimizer.
pub fn mpc_step(prob: &MpcProblem, x: &DenseVector) -> Result<DenseVector> {
    let sol = solve_equality_qp(prob, x)?;
    Ok(prob.e() * sol.z)
}
