//! Newton-Krylov continuation.
//!
//! Each sample solves one linearized system `F_U·ΔU = −F[U_prev, x]` by
//! GMRES, where the Jacobian is never formed: it is applied through the
//! forward difference `(F[U_prev + h·v] − F[U_prev]) / h`. The unknown of
//! the Krylov solve is `ΔU` itself rather than `ΔU / h`, so the absolute
//! GMRES tolerance is measured on the scale of the update.
//!
//! A dense Jacobian approximation assembled column by column from the same
//! difference quotient is LU-factored now and then and reused as a left
//! preconditioner until the next refresh.

use crate::error::{ensure_finite, ensure_len, Result, SolverError};
use crate::linalg::{default_pivot_floor, gmres, lu_factor, lu_solve, norm2, DenseMatrix, GmresReport, LuFactors};
use crate::ocp::{evaluate_f, HorizonGrid, OcpProblem, SolutionVector};

/// A nonlinear map `U ↦ F(U)` whose root the continuation tracks.
pub trait ResidualMap {
    fn dim(&self) -> usize;
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>>;
}

/// `F[·, x0]` of an [`OcpProblem`] under a fixed variant and current state.
pub struct HorizonResidual<'a, P: ?Sized> {
    def: &'a P,
    grid: &'a HorizonGrid,
    x0: &'a [f64],
    variant: usize,
}

impl<'a, P: OcpProblem + ?Sized> HorizonResidual<'a, P> {
    pub fn new(def: &'a P, grid: &'a HorizonGrid, x0: &'a [f64], variant: usize) -> Self {
        Self {
            def,
            grid,
            x0,
            variant,
        }
    }

    pub fn variant(&self) -> usize {
        self.variant
    }

    pub fn to_solution(&self, v: Vec<f64>) -> Result<SolutionVector> {
        SolutionVector::from_vec(self.layout(), v)
    }

    fn layout(&self) -> crate::ocp::Layout {
        crate::ocp::Layout::new(self.def.dims(), self.grid.n_steps())
    }
}

impl<P: OcpProblem + ?Sized> ResidualMap for HorizonResidual<'_, P> {
    fn dim(&self) -> usize {
        self.layout().dim()
    }

    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let sol = SolutionVector::from_vec(self.layout(), u.to_vec())?;
        evaluate_f(self.def, self.grid, self.x0, &sol, self.variant)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationConfig {
    /// Finite-difference step of the directional derivative.
    pub h: f64,
    pub gmres_tol_abs: f64,
    pub gmres_max_iter: usize,
    /// Model time between preconditioner refreshes.
    pub precond_period: f64,
    /// Absolute LU pivot floor; `None` uses `1e-14·‖A‖_∞`.
    pub pivot_floor: Option<f64>,
    pub init_newton_tol: f64,
    pub init_max_iter: usize,
    /// Backtracking factor of the initializer line search.
    pub init_damping: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            h: 1e-8,
            gmres_tol_abs: 1e-5,
            gmres_max_iter: 30,
            precond_period: 0.2,
            pivot_floor: None,
            init_newton_tol: 1e-10,
            init_max_iter: 50,
            init_damping: 0.5,
        }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.h > 0.0
            && self.gmres_tol_abs > 0.0
            && self.gmres_max_iter >= 1
            && self.precond_period > 0.0
            && self.pivot_floor.is_none_or(|f| f >= 0.0)
            && self.init_newton_tol > 0.0
            && self.init_max_iter >= 1
            && self.init_damping > 0.0
            && self.init_damping < 1.0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidParams(format!("invalid continuation config {self:?}")))
        }
    }
}

/// Forward-difference Jacobian-vector product around a fixed base point.
pub struct FdOperator<'a, R: ?Sized> {
    map: &'a R,
    base: &'a [f64],
    f_base: Vec<f64>,
    h: f64,
}

impl<'a, R: ResidualMap + ?Sized> FdOperator<'a, R> {
    pub fn new(map: &'a R, base: &'a [f64], h: f64) -> Result<Self> {
        let f_base = map.residual(base)?;
        Ok(Self::with_base_residual(map, base, f_base, h))
    }

    /// Reuses an already computed `F(base)`.
    pub fn with_base_residual(map: &'a R, base: &'a [f64], f_base: Vec<f64>, h: f64) -> Self {
        Self { map, base, f_base, h }
    }

    pub fn base_residual(&self) -> &[f64] {
        &self.f_base
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        ensure_len(self.base.len(), v.len())?;
        ensure_finite(v, "difference direction")?;
        let shifted: Vec<f64> = self.base.iter().zip(v).map(|(b, d)| b + self.h * d).collect();
        let f = self.map.residual(&shifted)?;
        Ok(f.iter()
            .zip(&self.f_base)
            .map(|(a, b)| (a - b) / self.h)
            .collect())
    }
}

/// `(F(base + h·v) − F(base)) / h`.
pub fn directional_derivative<R: ResidualMap + ?Sized>(
    map: &R,
    base: &[f64],
    v: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    FdOperator::new(map, base, h)?.apply(v)
}

/// Dense Jacobian approximation with column `c` equal to the difference
/// quotient along the `c`-th unit vector.
pub fn build_jacobian<R: ResidualMap + ?Sized>(map: &R, base: &[f64], h: f64) -> Result<DenseMatrix> {
    build_jacobian_with(&FdOperator::new(map, base, h)?)
}

fn build_jacobian_with<R: ResidualMap + ?Sized>(op: &FdOperator<'_, R>) -> Result<DenseMatrix> {
    let m = op.base.len();
    let mut jac = DenseMatrix::zeros(m, m);
    let mut e = vec![0.0; m];
    for c in 0..m {
        e[c] = 1.0;
        jac.set_column(c, &op.apply(&e)?);
        e[c] = 0.0;
    }
    Ok(jac)
}

/// LU-factored Jacobian approximation reused across samples.
#[derive(Debug, Clone)]
pub struct PreconditionerState {
    pub factors: LuFactors,
    pub built_at: f64,
    pub built_for_variant: usize,
    /// `‖A − Aᵀ‖_∞ / ‖A‖_∞` of the factored matrix.
    pub asymmetry: f64,
}

/// Assembles the Jacobian approximation at `base` and factors it.
pub fn refresh_preconditioner<R: ResidualMap + ?Sized>(
    map: &R,
    base: &[f64],
    t: f64,
    variant: usize,
    cfg: &ContinuationConfig,
) -> Result<PreconditionerState> {
    let jac = build_jacobian(map, base, cfg.h)?;
    let floor = cfg.pivot_floor.unwrap_or_else(|| default_pivot_floor(&jac));
    let factors = lu_factor(&jac, floor)?;
    Ok(PreconditionerState {
        factors,
        built_at: t,
        built_for_variant: variant,
        asymmetry: jac.relative_asymmetry(),
    })
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// `U_prev + ΔU`.
    pub u: Vec<f64>,
    pub delta: Vec<f64>,
    pub report: GmresReport,
    /// `‖F‖₂` at the updated point.
    pub residual_norm: f64,
}

/// One continuation update from `u_prev`: GMRES on the difference operator
/// with right-hand side `−F(u_prev)`, starting from `warm_start` (zero when
/// absent). Non-convergence is reported in the outcome, not as an error.
pub fn continuation_step<R: ResidualMap + ?Sized>(
    map: &R,
    u_prev: &[f64],
    precond: Option<&PreconditionerState>,
    warm_start: Option<&[f64]>,
    cfg: &ContinuationConfig,
) -> Result<StepOutcome> {
    ensure_len(map.dim(), u_prev.len())?;
    let op = FdOperator::new(map, u_prev, cfg.h)?;
    let rhs: Vec<f64> = op.base_residual().iter().map(|v| -v).collect();
    let zero;
    let x0 = match warm_start {
        Some(w) => {
            ensure_len(u_prev.len(), w.len())?;
            w
        }
        None => {
            zero = vec![0.0; u_prev.len()];
            &zero
        }
    };
    let (delta, report) = gmres(
        |v| op.apply(v),
        &rhs,
        x0,
        precond.map(|p| &p.factors),
        cfg.gmres_tol_abs,
        cfg.gmres_max_iter,
    )?;
    let u: Vec<f64> = u_prev.iter().zip(&delta).map(|(a, d)| a + d).collect();
    let residual_norm = norm2(&map.residual(&u)?);
    Ok(StepOutcome {
        u,
        delta,
        report,
        residual_norm,
    })
}

/// Damped Newton with the dense difference Jacobian and backtracking on
/// `‖F‖₂` (sufficient decrease `1 − 1e-4·α`).
pub fn initialize_solution<R: ResidualMap + ?Sized>(
    map: &R,
    guess: &[f64],
    cfg: &ContinuationConfig,
) -> Result<Vec<f64>> {
    ensure_len(map.dim(), guess.len())?;
    ensure_finite(guess, "initial guess")?;
    let mut u = guess.to_vec();
    let mut f = map.residual(&u)?;
    let mut norm = norm2(&f);

    for _ in 0..cfg.init_max_iter {
        if norm <= cfg.init_newton_tol {
            return Ok(u);
        }
        let op = FdOperator::with_base_residual(map, &u, f, cfg.h);
        let jac = build_jacobian_with(&op)?;
        let floor = cfg.pivot_floor.unwrap_or_else(|| default_pivot_floor(&jac));
        let factors = lu_factor(&jac, floor)
            .map_err(|e| SolverError::InitializationFailed(format!("newton jacobian: {e}")))?;
        let rhs: Vec<f64> = op.base_residual().iter().map(|v| -v).collect();
        let step = lu_solve(&factors, &rhs)?;

        let mut alpha = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, d)| a + alpha * d).collect();
            match map.residual(&trial) {
                Ok(ft) => {
                    let nt = norm2(&ft);
                    if nt <= (1.0 - 1e-4 * alpha) * norm {
                        break Some((trial, ft, nt));
                    }
                }
                Err(SolverError::NonFiniteValue(_)) => {}
                Err(e) => return Err(e),
            }
            alpha *= cfg.init_damping;
            if alpha < 1e-10 {
                break None;
            }
        };
        let Some((trial, ft, nt)) = accepted else {
            return Err(SolverError::InitializationFailed(format!(
                "line search stalled at residual {norm:e}"
            )));
        };
        u = trial;
        f = ft;
        norm = nt;
    }
    if norm <= cfg.init_newton_tol {
        Ok(u)
    } else {
        Err(SolverError::InitializationFailed(format!(
            "no convergence in {} iterations (residual {norm:e})",
            cfg.init_max_iter
        )))
    }
}
