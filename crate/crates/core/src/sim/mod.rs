//! Closed-loop simulation of the minimum-time transfer.
//!
//! The plant is the same Euler model the predictor uses, integrated in
//! physical time with the dynamics of whichever variant the ensemble step
//! selected. Sample `j` sits at `t_j = j·dt`.

mod config;
mod output;

pub use config::{parse_config, ConfigError, SimConfig};
pub use output::write_outputs;

use crate::continuation::{refresh_preconditioner, HorizonResidual, PreconditionerState, ResidualMap};
use crate::error::{Result, SolverError};
use crate::linalg::norm2;
use crate::min_time::{self, make_problem};
use crate::ocp::{performance_index, HorizonGrid, SolutionVector};
use crate::particle::{particle_step, select_variant, VariantOutcome};

/// One applied control sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub j: usize,
    pub t: f64,
    /// State at `t`, before the control is applied.
    pub state: [f64; 2],
    pub u_applied: f64,
    pub u_s_applied: f64,
    /// 0-based variant index.
    pub chosen_k: usize,
    pub residual_norm: f64,
    /// GMRES iterations per variant, refinement included.
    pub gmres_iters: Vec<usize>,
    pub p_remaining: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    PStop,
    MaxSteps,
    Error(String),
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Termination::PStop => f.write_str("p_stop"),
            Termination::MaxSteps => f.write_str("max_steps"),
            Termination::Error(e) => write!(f, "error: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps_executed: usize,
    pub total_gmres_iters: usize,
    /// Maximal runs of equal variant as `(0-based k, length)`.
    pub switch_segments: Vec<(usize, usize)>,
    pub initial_p: f64,
    pub final_state: [f64; 2],
    pub final_time: f64,
    pub terminated_by: Termination,
}

/// A preconditioner refresh attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct RefreshEvent {
    pub t: f64,
    pub variant: usize,
    /// Relative asymmetry of the Jacobian; `None` if factorization failed.
    pub asymmetry: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
    pub refreshes: Vec<RefreshEvent>,
}

pub fn switch_segments(records: &[StepRecord]) -> Vec<(usize, usize)> {
    let mut segs: Vec<(usize, usize)> = Vec::new();
    for r in records {
        match segs.last_mut() {
            Some((k, len)) if *k == r.chosen_k => *len += 1,
            _ => segs.push((r.chosen_k, 1)),
        }
    }
    segs
}

fn summarize(
    records: &[StepRecord],
    initial_p: f64,
    state: [f64; 2],
    dt: f64,
    terminated_by: Termination,
) -> RunSummary {
    RunSummary {
        steps_executed: records.len(),
        total_gmres_iters: records.iter().flat_map(|r| &r.gmres_iters).sum(),
        switch_segments: switch_segments(records),
        initial_p,
        final_state: state,
        final_time: records.len() as f64 * dt,
        terminated_by,
    }
}

/// Runs the closed loop until the remaining-time parameter reaches
/// `p_stop` or `max_steps` controls have been applied.
///
/// Initialization failure is an error. A failure inside the loop ends the
/// run with [`Termination::Error`] and keeps the records gathered so far.
pub fn run_closed_loop(cfg: &SimConfig) -> Result<SimRun> {
    cfg.validate()
        .map_err(|e| SolverError::InvalidParams(e.to_string()))?;
    let problem = make_problem(cfg.problem.clone())?;
    let grid = HorizonGrid::uniform(cfg.n_steps)?;
    let cont = cfg.continuation();
    let part = cfg.particle();
    let q = cfg.problem.variants.len();

    let mut x = cfg.problem.start;

    // Horizon initialization for every variant, then selection as in a
    // regular ensemble step.
    let mut inits: Vec<Option<SolutionVector>> = Vec::with_capacity(q);
    let mut outcomes = Vec::with_capacity(q);
    let mut last_err = None;
    for k in 0..q {
        let (sol, outcome) = match min_time::initialize(&problem, &grid, &x, k, &cont) {
            Ok(u) => {
                let map = HorizonResidual::new(&problem, &grid, &x, k);
                let residual_norm = norm2(&map.residual(u.as_slice())?);
                let cost = performance_index(&problem, &grid, &x, &u, k)?;
                let o = VariantOutcome {
                    residual_norm,
                    cost,
                    gmres_iterations: 0,
                    refine_iterations: 0,
                    admissible: residual_norm <= part.admissibility_threshold,
                    refined: false,
                };
                (Some(u), o)
            }
            Err(e) => {
                last_err = Some(e);
                let o = VariantOutcome {
                    residual_norm: f64::INFINITY,
                    cost: f64::INFINITY,
                    gmres_iterations: 0,
                    refine_iterations: 0,
                    admissible: false,
                    refined: false,
                };
                (None, o)
            }
        };
        inits.push(sol);
        outcomes.push(outcome);
    }
    let mut k = select_variant(&outcomes).ok_or_else(|| {
        last_err.unwrap_or_else(|| SolverError::InitializationFailed("no admissible initial horizon".into()))
    })?;
    let mut u = inits.swap_remove(k).expect("selected variant was initialized");
    let mut residual = outcomes[k].residual_norm;
    let mut iters = vec![0; q];
    let initial_p = u.p()[0];

    let mut records = Vec::new();
    let mut refreshes = Vec::new();
    let mut precond: Option<PreconditionerState> = None;
    let mut last_refresh = f64::NEG_INFINITY;
    let mut warm: Option<Vec<f64>> = None;
    let terminated_by;

    loop {
        let j = records.len();
        let t = j as f64 * cfg.dt;

        if j > 0 {
            if u.p()[0] <= cfg.p_stop {
                terminated_by = Termination::PStop;
                break;
            }
            if j >= cfg.max_steps {
                terminated_by = Termination::MaxSteps;
                break;
            }
        }

        if cfg.precond_enabled && t - last_refresh >= cfg.precond_period - 1e-9 * cfg.dt {
            let map = HorizonResidual::new(&problem, &grid, &x, k);
            last_refresh = t;
            match refresh_preconditioner(&map, u.as_slice(), t, k, &cont) {
                Ok(pc) => {
                    refreshes.push(RefreshEvent {
                        t,
                        variant: k,
                        asymmetry: Some(pc.asymmetry),
                    });
                    precond = Some(pc);
                }
                Err(SolverError::SingularMatrix { .. }) => {
                    refreshes.push(RefreshEvent {
                        t,
                        variant: k,
                        asymmetry: None,
                    });
                    precond = None;
                }
                Err(e) => {
                    terminated_by = Termination::Error(e.to_string());
                    break;
                }
            }
        }

        if j > 0 {
            match particle_step(
                &problem,
                &grid,
                &u,
                &x,
                precond.as_ref(),
                warm.as_deref(),
                &cont,
                &part,
            ) {
                Ok(d) => {
                    k = d.chosen;
                    residual = d.per_variant[k].residual_norm;
                    iters = d
                        .per_variant
                        .iter()
                        .map(|o| o.gmres_iterations + o.refine_iterations)
                        .collect();
                    u = d.u_next;
                    warm = Some(d.delta);
                }
                Err(e) => {
                    terminated_by = Termination::Error(e.to_string());
                    break;
                }
            }
        }

        let control = u.u(0);
        records.push(StepRecord {
            j,
            t,
            state: x,
            u_applied: control[0],
            u_s_applied: control[1],
            chosen_k: k,
            residual_norm: residual,
            gmres_iters: iters.clone(),
            p_remaining: u.p()[0],
        });
        let rate = min_time::dynamics(cfg.problem.variants[k], x[0], control[0], 1.0);
        x = [x[0] + cfg.dt * rate[0], x[1] + cfg.dt * rate[1]];
    }

    let summary = summarize(&records, initial_p, x, cfg.dt, terminated_by);
    Ok(SimRun {
        records,
        summary,
        refreshes,
    })
}
