#![allow(dead_code)]

use pcmpc::linalg::DenseMatrix;
use pcmpc::min_time::{MinTimeParams, DIMS};
use pcmpc::ocp::{HorizonGrid, Layout, SolutionVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let data = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DenseMatrix::from_row_major(n, n, data).unwrap()
}

/// Random matrix shifted by `n·I`, comfortably well conditioned.
pub fn well_conditioned(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let mut a = random_matrix(rng, n);
    for i in 0..n {
        a[(i, i)] += n as f64 * 0.5;
    }
    a
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Random horizon unknowns in a range where the rollout stays tame.
pub fn random_solution(rng: &mut ChaCha8Rng, n: usize) -> SolutionVector {
    let mut u = SolutionVector::zeros(Layout::new(DIMS, n));
    for i in 0..n {
        let c = [rng.gen_range(0.4..1.2), rng.gen_range(-0.3..0.3)];
        u.u_mut(i).copy_from_slice(&c);
        u.mu_mut(i)[0] = rng.gen_range(-0.5..0.5);
    }
    u.nu_mut()
        .copy_from_slice(&[rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
    u.p_mut()[0] = rng.gen_range(0.2..1.5);
    u
}

pub fn random_state(rng: &mut ChaCha8Rng) -> [f64; 2] {
    [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]
}

/// Plain Euler loop for the minimum-time model, written without the
/// library's rollout.
pub fn euler_states(params: &MinTimeParams, n: usize, x0: [f64; 2], u: &SolutionVector, k: usize) -> Vec<[f64; 2]> {
    let law = params.variants[k];
    let v = u.as_slice();
    let p = v[3 * n + 2];
    let dt = 1.0 / n as f64;
    let mut out = vec![x0];
    for i in 0..n {
        let [x, y] = out[i];
        let s = p * (law.a * x + law.b);
        out.push([x + dt * s * v[2 * i].cos(), y + dt * s * v[2 * i].sin()]);
    }
    out
}

/// Discrete Lagrangian with states and costates held fixed.
pub fn lagrangian(
    params: &MinTimeParams,
    n: usize,
    x0: [f64; 2],
    states: &[[f64; 2]],
    costates: &[[f64; 2]],
    u: &[f64],
    k: usize,
) -> f64 {
    let law = params.variants[k];
    let dt = 1.0 / n as f64;
    let p = u[3 * n + 2];
    let (nu1, nu2) = (u[3 * n], u[3 * n + 1]);
    let mut l = p;
    l += costates[0][0] * (x0[0] - states[0][0]) + costates[0][1] * (x0[1] - states[0][1]);
    for i in 0..n {
        let (h, us, mu) = (u[2 * i], u[2 * i + 1], u[2 * n + i]);
        let [x, y] = states[i];
        let s = p * (law.a * x + law.b);
        l += -params.w_s * us * p * dt;
        let lam = costates[i + 1];
        l += lam[0] * (x - states[i + 1][0] + s * h.cos() * dt);
        l += lam[1] * (y - states[i + 1][1] + s * h.sin() * dt);
        l += mu * ((h - params.c_u).powi(2) + us * us - params.r_u * params.r_u) * dt;
    }
    l += nu1 * (states[n][0] - params.target[0]) + nu2 * (states[n][1] - params.target[1]);
    l
}

pub fn shipped_grid() -> HorizonGrid {
    HorizonGrid::uniform(20).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn inf_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Gauss-Jordan elimination with partial pivoting on a copy of `a`,
/// independent of the library's LU.
pub fn gauss_solve(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a.row(i).to_vec();
            row.push(b[i]);
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())
            .unwrap();
        m.swap(c, piv);
        let d = m[c][c];
        for v in m[c].iter_mut() {
            *v /= d;
        }
        let pivot_row = m[c].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != c && row[c] != 0.0 {
                let f = row[c];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
    }
    m.into_iter().map(|row| row[n]).collect()
}
