//! Shared fixtures for the latency benchmarks.

use impc_core::numerics::{rk4_step, DenseVector};
use impc_core::{flow_rhs, ControllerState, Experiment, FlowParams, MpcProblem, ProblemSpec};

/// DC-motor problem with the plant at rest, `x̃ = -r`.
pub struct Fixture {
    pub experiment: Experiment,
    pub x_tilde: DenseVector,
}

impl Fixture {
    pub fn dc_motor() -> Self {
        let experiment = ProblemSpec::dc_motor().build().expect("preset builds");
        let x_tilde = -&experiment.shift.r;
        Self { experiment, x_tilde }
    }

    pub fn problem(&self) -> &MpcProblem {
        &self.experiment.problem
    }
}

fn pack(c: &ControllerState) -> DenseVector {
    DenseVector::from_iterator(
        c.z.len() + c.mu.len() + c.lambda.len(),
        c.z.iter().chain(c.mu.iter()).chain(c.lambda.iter()).copied(),
    )
}

fn unpack(y: &DenseVector, prob: &MpcProblem) -> ControllerState {
    let (nz, nq, ne) = (prob.nz(), prob.n_ineq(), prob.n_eq());
    ControllerState {
        z: y.rows(0, nz).into_owned(),
        mu: y.rows(nz, nq).map(|v| v.max(0.0)),
        lambda: y.rows(nz + nq, ne).into_owned(),
    }
}

/// Advance the controller by `substeps` RK4 steps of `h / substeps` with the
/// plant state frozen and return the new input `E z`.
pub fn flow_decision(
    state: &mut ControllerState,
    x_tilde: &DenseVector,
    prob: &MpcProblem,
    params: &FlowParams,
    h: f64,
    substeps: usize,
) -> DenseVector {
    let field = |y: &DenseVector| {
        let d = flow_rhs(&unpack(y, prob), x_tilde, prob, params).expect("finite flow");
        pack(&ControllerState { z: d.z, mu: d.mu, lambda: d.lambda })
    };
    let mut y = pack(state);
    let h_sub = h / substeps as f64;
    for _ in 0..substeps {
        y = rk4_step(|_, y| field(y), 0.0, &y, h_sub).expect("stable step");
    }
    *state = unpack(&y, prob);
    state.z.rows(0, prob.m()).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_moves_the_input() {
        let f = Fixture::dc_motor();
        let params = FlowParams::new(10.0, 10.0).unwrap();
        let mut s = ControllerState::zeros(f.problem());
        let u = flow_decision(&mut s, &f.x_tilde, f.problem(), &params, 1e-3, 1);
        assert_eq!(u.len(), 1);
        assert!(u[0] > 0.0);
    }
}
