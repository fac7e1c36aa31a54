mod common;

use common::*;
use impc_core::baseline::{kkt_matrix, solve_equality_qp};
use impc_core::flow::{residual_flow_equilibrium, residual_kkt};
use impc_core::numerics::{expm, rk4_step, sym_eig_extremes, DenseMatrix, DenseVector};
use impc_core::problem::{discretize, lu_rank};
use impc_core::{gamma_flow_rhs, project_equality, ControllerState, FlowParams, GammaFlow};
use rand::Rng;

#[test]
fn expm_matches_taylor_series() {
    let exp = dc_motor();
    let m = exp.plant.a_c() * exp.problem.dt();
    let diff = expm(&m).unwrap() - taylor_expm(&m, 30);
    assert!(diff.amax() < 1e-10, "{}", diff.amax());
}

#[test]
fn discretize_matches_taylor_on_augmented_matrix() {
    let exp = dc_motor();
    let (n, m) = (exp.plant.n(), exp.plant.m());
    let dt = exp.problem.dt();
    let mut aug = DenseMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(exp.plant.a_c() * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(exp.plant.b_c() * dt));
    let phi = taylor_expm(&aug, 30);
    let (a, b) = discretize(&exp.plant, dt).unwrap();
    assert!((a - phi.view((0, 0), (n, n))).amax() < 1e-10);
    assert!((b - phi.view((0, n), (n, m))).amax() < 1e-10);
}

#[test]
fn rk4_error_is_fifth_order() {
    let exp = dc_motor();
    let a = exp.plant.a_c().clone();
    let y0 = DenseVector::from_vec(vec![1.0, 0.0]);
    let err = |h: f64| {
        let y = rk4_step(|_, y| &a * y, 0.0, &y0, h).unwrap();
        (y - expm(&(&a * h)).unwrap() * &y0).norm()
    };
    let (e1, e2) = (err(0.01), err(0.005));
    // local error scales as h⁵: halving h divides it by ~32
    let ratio = e1 / e2;
    assert!(ratio > 25.0 && ratio < 40.0, "ratio {ratio}");
    assert!(e1 < 1e-7, "{e1}");
}

#[test]
fn rollout_satisfies_prediction_constraints() {
    let exp = dc_motor();
    let prob = &exp.problem;
    let mut rng = rng(1);
    for _ in 0..20 {
        let x0 = random_vector(&mut rng, prob.n(), 100.0);
        let inputs: Vec<_> = (0..prob.horizon()).map(|_| random_vector(&mut rng, prob.m(), 50.0)).collect();
        let z = rollout(prob, &x0, &inputs);
        let res = prob.equality_residual(&z, &x0);
        let scale = z.amax().max(1.0);
        assert!(res.amax() <= 1e-12 * scale, "{}", res.amax());
        assert_eq!(prob.e() * &z, inputs[0]);
    }
}

#[test]
fn prediction_constraints_have_full_row_rank() {
    let exp = dc_motor();
    let h = exp.problem.h();
    assert_eq!(h.nrows(), 60);
    assert_eq!(lu_rank(h), 60);
    let sv = h.clone().svd(false, false).singular_values;
    assert!(sv.min() > 1e-3, "{}", sv.min());
}

#[test]
fn rho_bounds_gradient_inner_product() {
    let exp = dc_motor();
    let prob = &exp.problem;
    assert!((prob.rho() - 2.0).abs() < 1e-12);
    let mut rng = rng(2);
    for _ in 0..200 {
        let z = random_vector(&mut rng, prob.nz(), 10.0);
        assert!(prob.cost_gradient(&z).dot(&z) >= prob.rho() * z.norm_squared() * (1.0 - 1e-12));
    }
}

#[test]
fn reference_input_solves_steady_state() {
    let exp = dc_motor();
    let expected = (4.0 * 200.0 / 3.0 + 0.03 * 5.0) / 2.0;
    assert!((exp.shift.u_r[0] - expected).abs() < 1e-9);
    let d = exp.plant.derivative(&exp.shift.r, &exp.shift.u_r);
    assert!(d.amax() < 1e-9);
}

#[test]
fn projection_is_orthogonal_and_feasible() {
    let exp = dc_motor();
    let prob = &exp.problem;
    let mut rng = rng(3);
    // null space of H from its SVD
    let svd = prob.h().clone().svd(false, true);
    let vt = svd.v_t.unwrap();
    let row_space = vt.rows(0, prob.n_eq()).into_owned();
    for _ in 0..20 {
        let z = random_vector(&mut rng, prob.nz(), 100.0);
        let x = random_vector(&mut rng, prob.n(), 100.0);
        let p = project_equality(&z, &x, prob).unwrap();
        assert!(prob.equality_residual(&p, &x).amax() <= 1e-9);
        let again = project_equality(&p, &x, prob).unwrap();
        assert!((&again - &p).amax() <= 1e-12 * p.amax().max(1.0));
        // z - p lies in the row space of H
        let d = &z - &p;
        let in_row = row_space.transpose() * (&row_space * &d);
        assert!((&d - in_row).amax() <= 1e-9 * d.amax().max(1.0));
    }
}

#[test]
fn gamma_flow_satisfies_its_implicit_equations() {
    let exp = dc_motor();
    let prob = &exp.problem;
    let params = FlowParams::with_gamma(10.0, 10.0, 0.5).unwrap();
    let gamma = GammaFlow::new(prob, &params).unwrap();
    let mut rng = rng(4);
    for _ in 0..20 {
        let s = random_state(&mut rng, prob, 10.0);
        let x = random_vector(&mut rng, prob.n(), 10.0);
        let d = gamma.rhs(&s, &x, prob).unwrap();
        let lambda_prime = &s.lambda + &d.lambda * params.beta();
        let z_res = &d.z + prob.cost_gradient(&s.z) + prob.h().tr_mul(&lambda_prime);
        let z_hat = &s.z + &d.z * params.gamma();
        let l_res = &d.lambda * params.damping() - (prob.equality_residual(&z_hat, &x) - &s.lambda * params.alpha());
        let scale = s.z.amax().max(1.0) * 1e4;
        assert!(z_res.amax() <= 1e-9 * scale, "{}", z_res.amax());
        assert!(l_res.amax() <= 1e-9 * scale, "{}", l_res.amax());
    }
}

#[test]
fn gamma_flow_degenerates_to_plain_flow() {
    let exp = dc_motor();
    let prob = &exp.problem;
    let params = FlowParams::new(3.0, 0.0).unwrap();
    let mut rng = rng(5);
    for _ in 0..50 {
        let s = random_state(&mut rng, prob, 10.0);
        let x = random_vector(&mut rng, prob.n(), 10.0);
        let a = gamma_flow_rhs(&s, &x, prob, &params).unwrap();
        let b = impc_core::flow_rhs(&s, &x, prob, &params).unwrap();
        let scale = a.norm_inf().max(1.0);
        assert!((&a.z - &b.z).amax() <= 1e-12 * scale);
        assert!((&a.lambda - &b.lambda).amax() <= 1e-12 * scale);
    }
}

#[test]
fn qp_solution_satisfies_kkt_at_reference_offset() {
    let exp = dc_motor();
    let prob = &exp.problem;
    let x = -&exp.shift.r;
    let sol = solve_equality_qp(prob, &x).unwrap();
    let r = residual_kkt(&sol.z, &DenseVector::zeros(0), &sol.lambda, &x, prob).unwrap();
    assert!(r.max() <= 1e-9, "{r:?}");
    assert!(sol.z[0].abs() < 1e3, "{}", sol.z[0]);
}

#[test]
fn qp_solution_beats_feasible_perturbations() {
    let exp = dc_motor();
    let prob = &exp.problem;
    let x = -&exp.shift.r;
    let sol = solve_equality_qp(prob, &x).unwrap();
    let best = prob.cost(&sol.z);
    let mut rng = rng(6);
    for _ in 0..100 {
        let d = random_vector(&mut rng, prob.nz(), 1.0);
        // project the perturbation onto the null space of H
        let d0 = project_equality(&d, &DenseVector::zeros(prob.n()), prob).unwrap();
        let scale: f64 = rng.gen_range(1e-3..10.0);
        let z = &sol.z + d0 * scale;
        assert!(prob.equality_residual(&z, &x).amax() < 1e-8);
        assert!(prob.cost(&z) >= best, "{} < {best}", prob.cost(&z));
    }
}

#[test]
fn qp_solution_is_linear_in_state() {
    let exp = dc_motor();
    let prob = &exp.problem;
    let x = DenseVector::from_vec(vec![3.0, -1.0]);
    let a = solve_equality_qp(prob, &x).unwrap();
    let b = solve_equality_qp(prob, &(&x * -2.5)).unwrap();
    assert!((&b.z + &a.z * 2.5).amax() <= 1e-9 * a.z.amax());
}

#[test]
fn kkt_matrix_is_symmetric() {
    let exp = dc_motor();
    let k = kkt_matrix(&exp.problem);
    assert_eq!((&k - k.transpose()).amax(), 0.0);
}

#[test]
fn damped_saddle_has_zero_flow_residual() {
    let exp = dc_motor();
    let prob = &exp.problem;
    let params = FlowParams::new(10.0, 10.0).unwrap();
    let x = -&exp.shift.r;
    let (z, lambda) = damped_saddle(prob, params.k(), params.alpha(), &x);
    let state = ControllerState { z, mu: DenseVector::zeros(0), lambda };
    let r = residual_flow_equilibrium(&state, &x, prob, &params).unwrap();
    assert!(r.max() <= 1e-8, "{r:?}");
    // the plain equality residual equals the damping term
    let eq = prob.equality_residual(&state.z, &x);
    assert!((eq.amax() - params.alpha() * state.lambda.amax()).abs() <= 1e-8);
    let d = impc_core::flow_rhs(&state, &x, prob, &params).unwrap();
    assert!(d.norm_inf() <= 1e-8, "{}", d.norm_inf());
}

#[test]
fn symmetric_extremes_bound_rayleigh_quotient() {
    let mut rng = rng(7);
    let m = random_matrix(&mut rng, 12, 12, 1.0);
    let s = &m + m.transpose();
    let (lo, hi) = sym_eig_extremes(&s).unwrap();
    for _ in 0..100 {
        let v = random_vector(&mut rng, 12, 1.0).normalize();
        let q = v.dot(&(&s * &v));
        assert!(q >= lo - 1e-9 && q <= hi + 1e-9);
    }
}

#[test]
fn gamma_flow_substitute_back_on_scalar_instance() {
    let mut rng = rng(8);
    for _ in 0..20 {
        let a: f64 = rng.gen_range(-1.0..1.0);
        let b: f64 = rng.gen_range(0.2..2.0);
        let prob = impc_core::MpcProblem::from_discrete(
            DenseMatrix::from_element(1, 1, a),
            DenseMatrix::from_element(1, 1, b),
            2,
            0.1,
            DenseMatrix::from_diagonal(&DenseVector::from_vec(vec![1.0, 2.0, 3.0, 4.0])),
        )
        .unwrap();
        let params = FlowParams::with_gamma(rng.gen_range(0.1..5.0), rng.gen_range(0.0..5.0), 0.5).unwrap();
        let s = random_state(&mut rng, &prob, 1.0);
        let x = random_vector(&mut rng, 1, 1.0);
        let d = gamma_flow_rhs(&s, &x, &prob, &params).unwrap();
        let z_res = &d.z + prob.h().tr_mul(&d.lambda) * params.beta()
            + prob.cost_gradient(&s.z)
            + prob.h().tr_mul(&s.lambda);
        let l_res = -prob.h() * &d.z * params.gamma() + &d.lambda * params.damping()
            - (prob.equality_residual(&s.z, &x) - &s.lambda * params.alpha());
        assert!(z_res.amax() < 1e-10, "{}", z_res.amax());
        assert!(l_res.amax() < 1e-10, "{}", l_res.amax());
    }
}

#[test]
fn origin_is_an_equilibrium_of_both_flows() {
    let exp = dc_motor();
    let prob = &exp.problem;
    let zero = ControllerState::zeros(prob);
    let x = DenseVector::zeros(prob.n());
    let params = FlowParams::with_gamma(10.0, 10.0, 0.3).unwrap();
    assert_eq!(impc_core::flow_rhs(&zero, &x, prob, &params).unwrap().norm_inf(), 0.0);
    assert_eq!(gamma_flow_rhs(&zero, &x, prob, &params).unwrap().norm_inf(), 0.0);
}
