mod common;

use common::*;
use pcmpc::min_time::{analytic_f_rows, make_problem, MinTimeParams, DIMS};
use pcmpc::ocp::{evaluate_f, forward_rollout, performance_index, solve_horizon, Layout, SolutionVector};
use proptest::prelude::*;
use rand::Rng;

const N: usize = 20;

#[test]
fn rollout_matches_independent_euler_loop() {
    let params = MinTimeParams::default();
    let prob = make_problem(params.clone()).unwrap();
    let grid = shipped_grid();
    let mut r = rng(21);
    for _ in 0..50 {
        let u = random_solution(&mut r, N);
        let x0 = random_state(&mut r);
        let k = r.gen_range(0..3);
        let ws = forward_rollout(&prob, &grid, &x0, &u, k).unwrap();
        let oracle = euler_states(&params, N, x0, &u, k);
        for (i, s) in oracle.iter().enumerate() {
            assert!(max_abs_diff(ws.state(i), s) <= 1e-14);
        }
    }
}

#[test]
fn costates_match_independent_sweep() {
    let params = MinTimeParams::default();
    let prob = make_problem(params.clone()).unwrap();
    let grid = shipped_grid();
    let mut r = rng(22);
    for _ in 0..50 {
        let u = random_solution(&mut r, N);
        let x0 = random_state(&mut r);
        let k = r.gen_range(0..3);
        let ws = solve_horizon(&prob, &grid, &x0, &u, k).unwrap();
        let v = u.as_slice();
        let (a, p, dt) = (params.variants[k].a, v[3 * N + 2], 1.0 / N as f64);
        let mut lam = [v[3 * N], v[3 * N + 1]];
        assert_eq!(ws.costate(N), &lam);
        for i in (0..N).rev() {
            let h = v[2 * i];
            lam = [lam[0] + dt * p * a * (h.cos() * lam[0] + h.sin() * lam[1]), lam[1]];
            assert!(max_abs_diff(ws.costate(i), &lam) <= 1e-14);
            // Second costate component is constant over the horizon.
            assert_eq!(ws.costate(i)[1], ws.costate(N)[1]);
        }
    }
}

#[test]
fn performance_index_matches_independent_quadrature() {
    let params = MinTimeParams::default();
    let prob = make_problem(params.clone()).unwrap();
    let grid = shipped_grid();
    let mut r = rng(23);
    for _ in 0..50 {
        let u = random_solution(&mut r, N);
        let x0 = random_state(&mut r);
        let k = r.gen_range(0..3);
        let v = u.as_slice();
        let p = v[3 * N + 2];
        let oracle = p + (0..N).map(|i| -params.w_s * v[2 * i + 1] * p / N as f64).sum::<f64>();
        let j = performance_index(&prob, &grid, &x0, &u, k).unwrap();
        assert!((j - oracle).abs() <= 1e-14, "{j} vs {oracle}");
    }
}

#[test]
fn generic_assembly_equals_analytic_rows() {
    let params = MinTimeParams::default();
    let prob = make_problem(params.clone()).unwrap();
    let grid = shipped_grid();
    let mut r = rng(24);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u = random_solution(&mut r, N);
        let x0 = random_state(&mut r);
        let k = r.gen_range(0..3);
        let generic = evaluate_f(&prob, &grid, &x0, &u, k).unwrap();
        let analytic = analytic_f_rows(&params, &grid, &x0, &u, k).unwrap();
        worst = worst.max(max_abs_diff(&generic, &analytic));
    }
    assert!(worst <= 1e-10, "{worst:e}");
}

#[test]
fn residual_blocks_are_lagrangian_gradient() {
    let params = MinTimeParams::default();
    let prob = make_problem(params.clone()).unwrap();
    let grid = shipped_grid();
    let mut r = rng(25);
    let step = 1e-6;
    for _ in 0..10 {
        let u = random_solution(&mut r, N);
        let x0 = random_state(&mut r);
        let k = r.gen_range(0..3);
        let ws = solve_horizon(&prob, &grid, &x0, &u, k).unwrap();
        let states: Vec<[f64; 2]> = (0..=N).map(|i| [ws.state(i)[0], ws.state(i)[1]]).collect();
        let costates: Vec<[f64; 2]> = (0..=N).map(|i| [ws.costate(i)[0], ws.costate(i)[1]]).collect();
        let f = evaluate_f(&prob, &grid, &x0, &u, k).unwrap();
        let scale = inf_norm(&f);
        let mut v = u.as_slice().to_vec();
        for c in 0..v.len() {
            let orig = v[c];
            v[c] = orig + step;
            let lp = lagrangian(&params, N, x0, &states, &costates, &v, k);
            v[c] = orig - step;
            let lm = lagrangian(&params, N, x0, &states, &costates, &v, k);
            v[c] = orig;
            let fd = (lp - lm) / (2.0 * step);
            assert!((fd - f[c]).abs() <= 1e-5 * scale.max(f[c].abs()), "entry {c}: {fd} vs {}", f[c]);
        }
    }
}

#[test]
fn evaluation_is_deterministic() {
    let prob = make_problem(MinTimeParams::default()).unwrap();
    let grid = shipped_grid();
    let mut r = rng(26);
    let u = random_solution(&mut r, N);
    let x0 = random_state(&mut r);
    let a = evaluate_f(&prob, &grid, &x0, &u, 1).unwrap();
    let b = evaluate_f(&prob, &grid, &x0, &u, 1).unwrap();
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn rollout_reaching_target_zeroes_terminal_block() {
    // Heading 0 at unit speed; steps of 0.125 land exactly on x = 0.5.
    let params = MinTimeParams {
        variants: vec![pcmpc::min_time::SpeedLaw { a: 0.0, b: 1.0 }],
        target: [0.5, 0.0],
        ..MinTimeParams::default()
    };
    let prob = make_problem(params).unwrap();
    let grid = pcmpc::ocp::HorizonGrid::uniform(4).unwrap();
    let mut u = SolutionVector::zeros(Layout::new(DIMS, 4));
    u.p_mut()[0] = 0.5;
    let f = evaluate_f(&prob, &grid, &[0.0, 0.0], &u, 0).unwrap();
    let nu = u.layout().nu_range();
    assert_eq!(&f[nu], &[0.0, 0.0]);
}

#[test]
fn divergent_rollout_is_reported() {
    let params = MinTimeParams {
        variants: vec![pcmpc::min_time::SpeedLaw { a: 1e300, b: 1.0 }],
        ..MinTimeParams::default()
    };
    let prob = make_problem(params).unwrap();
    let grid = shipped_grid();
    let mut u = SolutionVector::zeros(Layout::new(DIMS, N));
    u.p_mut()[0] = 1e10;
    let err = forward_rollout(&prob, &grid, &[1.0, 0.0], &u, 0).unwrap_err();
    assert!(matches!(err, pcmpc::SolverError::NonFiniteValue(_)));
}

proptest! {
    #[test]
    fn layout_blocks_round_trip(
        n in 1usize..30,
        u_block in prop::array::uniform2(-1e3f64..1e3),
        mu in -1e3f64..1e3,
        nu in prop::array::uniform2(-1e3f64..1e3),
        p in -1e3f64..1e3,
        stage in 0usize..30,
    ) {
        let stage = stage % n;
        let mut s = SolutionVector::zeros(Layout::new(DIMS, n));
        s.u_mut(stage).copy_from_slice(&u_block);
        s.mu_mut(stage)[0] = mu;
        s.nu_mut().copy_from_slice(&nu);
        s.p_mut()[0] = p;
        let back = SolutionVector::from_vec(s.layout(), s.as_slice().to_vec()).unwrap();
        prop_assert_eq!(back.u(stage), &u_block[..]);
        prop_assert_eq!(back.mu(stage)[0].to_bits(), mu.to_bits());
        prop_assert_eq!(back.nu(), &nu[..]);
        prop_assert_eq!(back.p()[0].to_bits(), p.to_bits());
        prop_assert_eq!(back.len(), 3 * n + 3);
    }
}
