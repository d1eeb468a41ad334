//! Discretized receding-horizon problem: Euler rollout of the states,
//! backward costate sweep and the stacked optimality residual `F[U, x, t]`.
//!
//! States and costates are eliminated, so the only unknowns are those in a
//! [`SolutionVector`]. Stage derivatives of the Hamiltonian
//! `H = L + λᵀf + μᵀC` are always evaluated with the *next* costate
//! `λ_{i+1}`, matching the discrete Lagrangian where `λ_{i+1}` multiplies
//! the Euler step from `x_i` to `x_{i+1}`.

use crate::error::{ensure_finite, ensure_len, Result, SolverError};

/// Block dimensions of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    /// State.
    pub n_x: usize,
    /// Stage control block (physical controls and slacks).
    pub n_u: usize,
    /// Stage equality constraint `C`.
    pub n_c: usize,
    /// Terminal constraint `ψ`.
    pub n_psi: usize,
    /// Free parameters `p`.
    pub n_p: usize,
}

/// Arguments of a Hamiltonian stage derivative.
#[derive(Debug, Clone, Copy)]
pub struct StagePoint<'a> {
    pub tau: f64,
    pub x: &'a [f64],
    /// Costate `λ_{i+1}` paired with stage `i`.
    pub lambda: &'a [f64],
    pub u: &'a [f64],
    pub mu: &'a [f64],
    pub p: &'a [f64],
}

/// A discretizable optimal control problem with `num_variants` switchable
/// dynamics.
///
/// Output slices are pre-sized by the caller to the dimensions in
/// [`Dims`]. Matrix-valued derivatives are row-major with one row per
/// component of the differentiated function (`n_psi × n_x` for `∂ψ/∂x`).
pub trait OcpProblem {
    fn dims(&self) -> Dims;
    fn num_variants(&self) -> usize;

    /// State derivative `f(τ, x, u, p)` under variant `k`.
    fn dynamics(&self, tau: f64, x: &[f64], u: &[f64], p: &[f64], k: usize, out: &mut [f64]);
    fn dhdu(&self, s: &StagePoint<'_>, k: usize, out: &mut [f64]);
    fn dhdx(&self, s: &StagePoint<'_>, k: usize, out: &mut [f64]);
    fn dhdp(&self, s: &StagePoint<'_>, k: usize, out: &mut [f64]);

    fn constraint(&self, tau: f64, x: &[f64], u: &[f64], p: &[f64], out: &mut [f64]);
    fn stage_cost(&self, tau: f64, x: &[f64], u: &[f64], p: &[f64]) -> f64;

    fn terminal_cost(&self, x: &[f64], p: &[f64]) -> f64;
    fn terminal_cost_dx(&self, x: &[f64], p: &[f64], out: &mut [f64]);
    fn terminal_cost_dp(&self, x: &[f64], p: &[f64], out: &mut [f64]);

    fn terminal_constraint(&self, x: &[f64], p: &[f64], out: &mut [f64]);
    fn terminal_constraint_dx(&self, x: &[f64], p: &[f64], out: &mut [f64]);
    fn terminal_constraint_dp(&self, x: &[f64], p: &[f64], out: &mut [f64]);
}

/// Horizon discretization on the normalized time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonGrid {
    tau: Vec<f64>,
    dtau: Vec<f64>,
}

impl HorizonGrid {
    /// `n` equal steps on `[0, 1]`, `Δτ = 1/n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(SolverError::InvalidParams("horizon needs at least one step".into()));
        }
        let tau = (0..=n).map(|i| i as f64 / n as f64).collect();
        let dtau = vec![1.0 / n as f64; n];
        Ok(Self { tau, dtau })
    }

    /// Arbitrary strictly increasing grid points.
    pub fn from_points(tau: Vec<f64>) -> Result<Self> {
        if tau.len() < 2 {
            return Err(SolverError::InvalidParams("horizon needs at least two points".into()));
        }
        ensure_finite(&tau, "horizon grid")?;
        let dtau: Vec<f64> = tau.windows(2).map(|w| w[1] - w[0]).collect();
        if dtau.iter().any(|&d| d <= 0.0) {
            return Err(SolverError::InvalidParams("horizon grid must be strictly increasing".into()));
        }
        Ok(Self { tau, dtau })
    }

    pub fn n_steps(&self) -> usize {
        self.dtau.len()
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn dtau(&self) -> &[f64] {
        &self.dtau
    }
}

/// Offsets of the unknown blocks `[u_0..u_{N-1} | μ_0..μ_{N-1} | ν | p]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub dims: Dims,
    pub n_steps: usize,
}

impl Layout {
    pub fn new(dims: Dims, n_steps: usize) -> Self {
        Self { dims, n_steps }
    }

    pub fn dim(&self) -> usize {
        self.n_steps * (self.dims.n_u + self.dims.n_c) + self.dims.n_psi + self.dims.n_p
    }

    pub fn u_range(&self, i: usize) -> std::ops::Range<usize> {
        let s = i * self.dims.n_u;
        s..s + self.dims.n_u
    }

    pub fn mu_range(&self, i: usize) -> std::ops::Range<usize> {
        let s = self.n_steps * self.dims.n_u + i * self.dims.n_c;
        s..s + self.dims.n_c
    }

    pub fn nu_range(&self) -> std::ops::Range<usize> {
        let s = self.n_steps * (self.dims.n_u + self.dims.n_c);
        s..s + self.dims.n_psi
    }

    pub fn p_range(&self) -> std::ops::Range<usize> {
        let s = self.nu_range().end;
        s..s + self.dims.n_p
    }
}

/// Stacked horizon unknowns with block accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionVector {
    layout: Layout,
    data: Vec<f64>,
}

impl SolutionVector {
    pub fn zeros(layout: Layout) -> Self {
        Self {
            layout,
            data: vec![0.0; layout.dim()],
        }
    }

    pub fn from_vec(layout: Layout, data: Vec<f64>) -> Result<Self> {
        ensure_len(layout.dim(), data.len())?;
        ensure_finite(&data, "solution vector")?;
        Ok(Self { layout, data })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn u(&self, i: usize) -> &[f64] {
        &self.data[self.layout.u_range(i)]
    }

    pub fn u_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.layout.u_range(i);
        &mut self.data[r]
    }

    pub fn mu(&self, i: usize) -> &[f64] {
        &self.data[self.layout.mu_range(i)]
    }

    pub fn mu_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.layout.mu_range(i);
        &mut self.data[r]
    }

    pub fn nu(&self) -> &[f64] {
        &self.data[self.layout.nu_range()]
    }

    pub fn nu_mut(&mut self) -> &mut [f64] {
        let r = self.layout.nu_range();
        &mut self.data[r]
    }

    pub fn p(&self) -> &[f64] {
        &self.data[self.layout.p_range()]
    }

    pub fn p_mut(&mut self) -> &mut [f64] {
        let r = self.layout.p_range();
        &mut self.data[r]
    }

    /// `self + scale · direction`.
    pub fn offset(&self, direction: &[f64], scale: f64) -> Result<Self> {
        ensure_len(self.data.len(), direction.len())?;
        let data = self
            .data
            .iter()
            .zip(direction)
            .map(|(a, d)| a + scale * d)
            .collect();
        Ok(Self {
            layout: self.layout,
            data,
        })
    }
}

/// States `x_0..x_N` and costates `λ_0..λ_N` of one rollout, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonWorkspace {
    n_x: usize,
    states: Vec<f64>,
    costates: Vec<f64>,
}

impl HorizonWorkspace {
    pub fn n_points(&self) -> usize {
        self.states.len() / self.n_x.max(1)
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.n_x..(i + 1) * self.n_x]
    }

    pub fn costate(&self, i: usize) -> &[f64] {
        &self.costates[i * self.n_x..(i + 1) * self.n_x]
    }

    pub fn terminal_state(&self) -> &[f64] {
        self.state(self.n_points() - 1)
    }
}

fn check_inputs<P: OcpProblem + ?Sized>(
    def: &P,
    grid: &HorizonGrid,
    x0: &[f64],
    u: &SolutionVector,
    k: usize,
) -> Result<()> {
    let dims = def.dims();
    ensure_len(dims.n_x, x0.len())?;
    ensure_len(Layout::new(dims, grid.n_steps()).dim(), u.len())?;
    if u.layout().dims != dims || u.layout().n_steps != grid.n_steps() {
        return Err(SolverError::InvalidParams(
            "solution layout does not match problem and grid".into(),
        ));
    }
    if k >= def.num_variants() {
        return Err(SolverError::InvalidParams(format!(
            "variant {k} out of range (q = {})",
            def.num_variants()
        )));
    }
    Ok(())
}

/// Explicit Euler prediction `x_{i+1} = x_i + f(τ_i, x_i, u_i, p)·Δτ_i`.
/// Costates are left zeroed.
pub fn forward_rollout<P: OcpProblem + ?Sized>(
    def: &P,
    grid: &HorizonGrid,
    x0: &[f64],
    u: &SolutionVector,
    k: usize,
) -> Result<HorizonWorkspace> {
    check_inputs(def, grid, x0, u, k)?;
    let n_x = def.dims().n_x;
    let n = grid.n_steps();
    let mut states = vec![0.0; (n + 1) * n_x];
    states[..n_x].copy_from_slice(x0);
    let mut fx = vec![0.0; n_x];
    for i in 0..n {
        let (done, rest) = states.split_at_mut((i + 1) * n_x);
        let xi = &done[i * n_x..];
        def.dynamics(grid.tau()[i], xi, u.u(i), u.p(), k, &mut fx);
        let dt = grid.dtau()[i];
        for ((next, cur), f) in rest[..n_x].iter_mut().zip(xi).zip(&fx) {
            *next = cur + f * dt;
        }
    }
    ensure_finite(&states, "state rollout")?;
    Ok(HorizonWorkspace {
        n_x,
        costates: vec![0.0; states.len()],
        states,
    })
}

/// Terminal costate `λ_N = φ_xᵀ + ψ_xᵀ ν`, then
/// `λ_i = λ_{i+1} + H_xᵀ(τ_i, x_i, λ_{i+1}, u_i, μ_i, p)·Δτ_i` for descending `i`.
pub fn backward_costates<P: OcpProblem + ?Sized>(
    def: &P,
    grid: &HorizonGrid,
    ws: &mut HorizonWorkspace,
    u: &SolutionVector,
    k: usize,
) -> Result<()> {
    let dims = def.dims();
    let n_x = dims.n_x;
    let n = grid.n_steps();
    ensure_len((n + 1) * n_x, ws.states.len())?;

    let x_n = &ws.states[n * n_x..];
    let mut lam = vec![0.0; n_x];
    def.terminal_cost_dx(x_n, u.p(), &mut lam);
    let mut psi_x = vec![0.0; dims.n_psi * n_x];
    def.terminal_constraint_dx(x_n, u.p(), &mut psi_x);
    for (r, nu_r) in u.nu().iter().enumerate() {
        for c in 0..n_x {
            lam[c] += psi_x[r * n_x + c] * nu_r;
        }
    }
    ws.costates[n * n_x..].copy_from_slice(&lam);

    let mut hx = vec![0.0; n_x];
    for i in (0..n).rev() {
        let (lower, upper) = ws.costates.split_at_mut((i + 1) * n_x);
        let next = &upper[..n_x];
        let s = StagePoint {
            tau: grid.tau()[i],
            x: &ws.states[i * n_x..(i + 1) * n_x],
            lambda: next,
            u: u.u(i),
            mu: u.mu(i),
            p: u.p(),
        };
        def.dhdx(&s, k, &mut hx);
        let dt = grid.dtau()[i];
        for ((cur, nx), h) in lower[i * n_x..].iter_mut().zip(next).zip(&hx) {
            *cur = nx + h * dt;
        }
    }
    ensure_finite(&ws.costates, "costate sweep")
}

/// Rollout plus costate sweep.
pub fn solve_horizon<P: OcpProblem + ?Sized>(
    def: &P,
    grid: &HorizonGrid,
    x0: &[f64],
    u: &SolutionVector,
    k: usize,
) -> Result<HorizonWorkspace> {
    let mut ws = forward_rollout(def, grid, x0, u, k)?;
    backward_costates(def, grid, &mut ws, u, k)?;
    Ok(ws)
}

/// The optimality residual `F[U, x0]` in the same block layout as `U`:
/// `H_u·Δτ` per stage, `C·Δτ` per stage, `ψ(x_N, p)`, and
/// `φ_pᵀ + ψ_pᵀν + Σ H_pᵀ·Δτ`.
pub fn evaluate_f<P: OcpProblem + ?Sized>(
    def: &P,
    grid: &HorizonGrid,
    x0: &[f64],
    u: &SolutionVector,
    k: usize,
) -> Result<Vec<f64>> {
    let ws = solve_horizon(def, grid, x0, u, k)?;
    let dims = def.dims();
    let layout = u.layout();
    let n = grid.n_steps();
    let mut out = vec![0.0; layout.dim()];
    let mut hp_sum = vec![0.0; dims.n_p];
    let mut hp = vec![0.0; dims.n_p];

    for i in 0..n {
        let dt = grid.dtau()[i];
        let s = StagePoint {
            tau: grid.tau()[i],
            x: ws.state(i),
            lambda: ws.costate(i + 1),
            u: u.u(i),
            mu: u.mu(i),
            p: u.p(),
        };
        let block = &mut out[layout.u_range(i)];
        def.dhdu(&s, k, block);
        block.iter_mut().for_each(|v| *v *= dt);

        let block = &mut out[layout.mu_range(i)];
        def.constraint(s.tau, s.x, s.u, s.p, block);
        block.iter_mut().for_each(|v| *v *= dt);

        def.dhdp(&s, k, &mut hp);
        for (acc, v) in hp_sum.iter_mut().zip(&hp) {
            *acc += v * dt;
        }
    }

    let x_n = ws.terminal_state();
    def.terminal_constraint(x_n, u.p(), &mut out[layout.nu_range()]);

    let mut phi_p = vec![0.0; dims.n_p];
    def.terminal_cost_dp(x_n, u.p(), &mut phi_p);
    let mut psi_p = vec![0.0; dims.n_psi * dims.n_p];
    def.terminal_constraint_dp(x_n, u.p(), &mut psi_p);
    let p_block = &mut out[layout.p_range()];
    for c in 0..dims.n_p {
        let psi_term: f64 = u
            .nu()
            .iter()
            .enumerate()
            .map(|(r, nu_r)| psi_p[r * dims.n_p + c] * nu_r)
            .sum();
        p_block[c] = phi_p[c] + psi_term + hp_sum[c];
    }
    ensure_finite(&out, "optimality residual")?;
    Ok(out)
}

/// `J = φ(x_N, p) + Σ L(τ_i, x_i, u_i, p)·Δτ_i` over a fresh rollout.
pub fn performance_index<P: OcpProblem + ?Sized>(
    def: &P,
    grid: &HorizonGrid,
    x0: &[f64],
    u: &SolutionVector,
    k: usize,
) -> Result<f64> {
    let ws = forward_rollout(def, grid, x0, u, k)?;
    let mut j = def.terminal_cost(ws.terminal_state(), u.p());
    for i in 0..grid.n_steps() {
        j += def.stage_cost(grid.tau()[i], ws.state(i), u.u(i), u.p()) * grid.dtau()[i];
    }
    if j.is_finite() {
        Ok(j)
    } else {
        Err(SolverError::NonFiniteValue("performance index"))
    }
}
