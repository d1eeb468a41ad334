//! Minimum-time planar transfer with a banded heading.
//!
//! The vehicle moves with speed `A_k·x + B_k` along heading `u`. Time is
//! rescaled onto `τ ∈ [0, 1]` so the horizon length `p = t_f − t_0` becomes
//! a free parameter. The heading band `|u − c_u| ≤ r_u` is written as the
//! equality `(u − c_u)² + u_s² − r_u² = 0` with slack `u_s`, and the cost is
//! `J = p − w_s·p·∫u_s dτ`.
//!
//! Per stage the control block is `(u, u_s)` with one multiplier; the
//! terminal multipliers are `(ν₁, ν₂)` and the single parameter is `p`.

use crate::continuation::{initialize_solution, ContinuationConfig, HorizonResidual};
use crate::error::{ensure_finite, ensure_len, Result, SolverError};
use crate::ocp::{Dims, HorizonGrid, Layout, OcpProblem, SolutionVector, StagePoint};

pub const DIMS: Dims = Dims {
    n_x: 2,
    n_u: 2,
    n_c: 1,
    n_psi: 2,
    n_p: 1,
};

/// Speed law `A·x + B` of one dynamics variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedLaw {
    pub a: f64,
    pub b: f64,
}

impl SpeedLaw {
    pub fn speed(&self, x: f64) -> f64 {
        self.a * x + self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinTimeParams {
    pub variants: Vec<SpeedLaw>,
    pub start: [f64; 2],
    pub target: [f64; 2],
    /// Band center, radians.
    pub c_u: f64,
    /// Band half-width, radians.
    pub r_u: f64,
    pub w_s: f64,
}

impl Default for MinTimeParams {
    fn default() -> Self {
        Self {
            variants: vec![
                SpeedLaw { a: 0.97, b: 1.0 },
                SpeedLaw { a: 0.9, b: 1.05 },
                SpeedLaw { a: 1.1, b: 0.9 },
            ],
            start: [0.0, 0.0],
            target: [1.0, 1.0],
            c_u: 0.8,
            r_u: 0.2,
            w_s: 0.005,
        }
    }
}

impl MinTimeParams {
    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(SolverError::InvalidParams("no dynamics variants".into()));
        }
        if !(self.r_u > 0.0) {
            return Err(SolverError::InvalidParams(format!("r_u must be positive, got {}", self.r_u)));
        }
        let scalars = [self.c_u, self.r_u, self.w_s];
        let points = self.start.iter().chain(&self.target);
        let laws = self.variants.iter().flat_map(|v| [v.a, v.b]);
        if !scalars.iter().copied().chain(points.copied()).chain(laws).all(f64::is_finite) {
            return Err(SolverError::InvalidParams("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn layout(&self, grid: &HorizonGrid) -> Layout {
        Layout::new(DIMS, grid.n_steps())
    }
}

/// Rescaled dynamics `p·(A_k x + B_k)·(cos u, sin u)`.
pub fn dynamics(law: SpeedLaw, x: f64, u: f64, p: f64) -> [f64; 2] {
    let v = p * law.speed(x);
    [v * u.cos(), v * u.sin()]
}

/// The minimum-time problem as an [`OcpProblem`].
#[derive(Debug, Clone)]
pub struct MinTimeProblem {
    params: MinTimeParams,
}

pub fn make_problem(params: MinTimeParams) -> Result<MinTimeProblem> {
    params.validate()?;
    Ok(MinTimeProblem { params })
}

impl MinTimeProblem {
    pub fn params(&self) -> &MinTimeParams {
        &self.params
    }

    fn law(&self, k: usize) -> SpeedLaw {
        self.params.variants[k]
    }
}

impl OcpProblem for MinTimeProblem {
    fn dims(&self) -> Dims {
        DIMS
    }

    fn num_variants(&self) -> usize {
        self.params.variants.len()
    }

    fn dynamics(&self, _tau: f64, x: &[f64], u: &[f64], p: &[f64], k: usize, out: &mut [f64]) {
        out.copy_from_slice(&dynamics(self.law(k), x[0], u[0], p[0]));
    }

    fn dhdu(&self, s: &StagePoint<'_>, k: usize, out: &mut [f64]) {
        let (u, us, mu, p) = (s.u[0], s.u[1], s.mu[0], s.p[0]);
        let v = self.law(k).speed(s.x[0]);
        out[0] = p * v * (-u.sin() * s.lambda[0] + u.cos() * s.lambda[1])
            + 2.0 * (u - self.params.c_u) * mu;
        out[1] = 2.0 * mu * us - self.params.w_s * p;
    }

    fn dhdx(&self, s: &StagePoint<'_>, k: usize, out: &mut [f64]) {
        let u = s.u[0];
        out[0] = s.p[0] * self.law(k).a * (u.cos() * s.lambda[0] + u.sin() * s.lambda[1]);
        out[1] = 0.0;
    }

    fn dhdp(&self, s: &StagePoint<'_>, k: usize, out: &mut [f64]) {
        let u = s.u[0];
        let v = self.law(k).speed(s.x[0]);
        out[0] = v * (u.cos() * s.lambda[0] + u.sin() * s.lambda[1]) - self.params.w_s * s.u[1];
    }

    fn constraint(&self, _tau: f64, _x: &[f64], u: &[f64], _p: &[f64], out: &mut [f64]) {
        let d = u[0] - self.params.c_u;
        out[0] = d * d + u[1] * u[1] - self.params.r_u * self.params.r_u;
    }

    fn stage_cost(&self, _tau: f64, _x: &[f64], u: &[f64], p: &[f64]) -> f64 {
        -self.params.w_s * u[1] * p[0]
    }

    fn terminal_cost(&self, _x: &[f64], p: &[f64]) -> f64 {
        p[0]
    }

    fn terminal_cost_dx(&self, _x: &[f64], _p: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn terminal_cost_dp(&self, _x: &[f64], _p: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }

    fn terminal_constraint(&self, x: &[f64], _p: &[f64], out: &mut [f64]) {
        out[0] = x[0] - self.params.target[0];
        out[1] = x[1] - self.params.target[1];
    }

    fn terminal_constraint_dx(&self, _x: &[f64], _p: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
    }

    fn terminal_constraint_dp(&self, _x: &[f64], _p: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Hand-written residual rows for the minimum-time problem, independent of
/// the generic assembly in [`crate::ocp::evaluate_f`].
///
/// Rows per stage: heading stationarity, slack stationarity, band equality;
/// then the two terminal rows and the horizon-length row.
pub fn analytic_f_rows(
    params: &MinTimeParams,
    grid: &HorizonGrid,
    x0: &[f64],
    u: &SolutionVector,
    k: usize,
) -> Result<Vec<f64>> {
    let n = grid.n_steps();
    ensure_len(2, x0.len())?;
    ensure_len(params.layout(grid).dim(), u.len())?;
    let SpeedLaw { a, b } = *params
        .variants
        .get(k)
        .ok_or_else(|| SolverError::InvalidParams(format!("variant {k} out of range")))?;
    let v = u.as_slice();
    let heading = |i: usize| v[2 * i];
    let slack = |i: usize| v[2 * i + 1];
    let mult = |i: usize| v[2 * n + i];
    let (nu1, nu2, p) = (v[3 * n], v[3 * n + 1], v[3 * n + 2]);

    let mut xs = vec![0.0; n + 1];
    let mut ys = vec![0.0; n + 1];
    xs[0] = x0[0];
    ys[0] = x0[1];
    for i in 0..n {
        let dt = grid.dtau()[i];
        let s = a * xs[i] + b;
        xs[i + 1] = xs[i] + dt * p * s * heading(i).cos();
        ys[i + 1] = ys[i] + dt * p * s * heading(i).sin();
    }
    let mut l1 = vec![0.0; n + 1];
    let mut l2 = vec![0.0; n + 1];
    l1[n] = nu1;
    l2[n] = nu2;
    for i in (0..n).rev() {
        let dt = grid.dtau()[i];
        let ui = heading(i);
        l1[i] = l1[i + 1] + dt * p * a * (ui.cos() * l1[i + 1] + ui.sin() * l2[i + 1]);
        l2[i] = l2[i + 1];
    }

    let mut out = vec![0.0; 3 * n + 3];
    let mut sum = 0.0;
    for i in 0..n {
        let dt = grid.dtau()[i];
        let (ui, usi, mui) = (heading(i), slack(i), mult(i));
        let s = a * xs[i] + b;
        out[2 * i] = dt
            * (p * s * (-ui.sin() * l1[i + 1] + ui.cos() * l2[i + 1])
                + 2.0 * (ui - params.c_u) * mui);
        out[2 * i + 1] = dt * (2.0 * mui * usi - params.w_s * p);
        out[2 * n + i] =
            dt * ((ui - params.c_u).powi(2) + usi * usi - params.r_u * params.r_u);
        sum += dt * (s * (ui.cos() * l1[i + 1] + ui.sin() * l2[i + 1]) - params.w_s * usi);
    }
    out[3 * n] = xs[n] - params.target[0];
    out[3 * n + 1] = ys[n] - params.target[1];
    out[3 * n + 2] = sum + 1.0;
    ensure_finite(&out, "analytic residual rows")?;
    Ok(out)
}

/// Starting point for the horizon initializer.
///
/// Heading at the band center with the slack saturated, horizon length from
/// the straight-line distance at the base speed `B_k`, multipliers chosen so
/// the slack rows vanish and the horizon-length row vanishes for a constant
/// costate `ν = −s·(cos c_u, sin c_u)`.
pub fn initial_guess(params: &MinTimeParams, grid: &HorizonGrid, k: usize) -> SolutionVector {
    let law = params.variants[k];
    let n = grid.n_steps();
    let dist = (params.target[0] - params.start[0]).hypot(params.target[1] - params.start[1]);
    let p = dist / law.b;

    let mut u = SolutionVector::zeros(params.layout(grid));
    for i in 0..n {
        u.u_mut(i).copy_from_slice(&[params.c_u, params.r_u]);
        u.mu_mut(i)[0] = params.w_s * p / (2.0 * params.r_u);
    }
    u.p_mut()[0] = p;

    // Quadrature of the speed along the guessed straight-heading rollout.
    let mut x = params.start[0];
    let mut speed_integral = 0.0;
    for &dt in grid.dtau() {
        speed_integral += dt * law.speed(x);
        x += dt * dynamics(law, x, params.c_u, p)[0];
    }
    let scale = if speed_integral.abs() > 0.0 {
        (1.0 - params.w_s * params.r_u) / speed_integral
    } else {
        1.0 / law.b
    };
    u.nu_mut()
        .copy_from_slice(&[-scale * params.c_u.cos(), -scale * params.c_u.sin()]);
    u
}

/// Initializes the horizon for variant `k` from [`initial_guess`], retrying
/// with the terminal multipliers halved and doubled when Newton fails.
pub fn initialize(
    problem: &MinTimeProblem,
    grid: &HorizonGrid,
    x0: &[f64],
    k: usize,
    cfg: &ContinuationConfig,
) -> Result<SolutionVector> {
    let params = problem.params();
    let mut guess_params = params.clone();
    guess_params.start = [x0[0], x0[1]];
    let base = initial_guess(&guess_params, grid, k);
    if !(base.p()[0] > 0.0) {
        return Err(SolverError::InitializationFailed(format!(
            "degenerate horizon: guessed length {} (start coincides with target?)",
            base.p()[0]
        )));
    }
    let map = HorizonResidual::new(problem, grid, x0, k);
    let mut last_err = None;
    for nu_scale in [1.0, 0.5, 2.0] {
        let mut guess = base.clone();
        guess.nu_mut().iter_mut().for_each(|v| *v *= nu_scale);
        match initialize_solution(&map, guess.as_slice(), cfg) {
            Ok(sol) if sol[sol.len() - 1] > 0.0 => {
                return SolutionVector::from_vec(base.layout(), sol);
            }
            Ok(sol) => {
                last_err = Some(SolverError::InitializationFailed(format!(
                    "converged to non-positive horizon length {}",
                    sol[sol.len() - 1]
                )))
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}
