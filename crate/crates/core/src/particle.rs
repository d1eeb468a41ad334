//! Ensemble continuation over the dynamics variants of a problem.
//!
//! Every sample runs one continuation update per variant from the same
//! previous solution, optionally with one shared preconditioner. A variant
//! is admissible when its updated residual is below the threshold, possibly
//! after a few extra Newton passes; among admissible variants the one with
//! the smallest performance index wins, ties going to the lowest index.

use crate::continuation::{continuation_step, ContinuationConfig, HorizonResidual, PreconditionerState, ResidualMap};
use crate::error::{ensure_len, Result, SolverError};
use crate::ocp::{performance_index, HorizonGrid, OcpProblem, SolutionVector};

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfig {
    /// Largest `‖F‖₂` accepted after the update.
    pub admissibility_threshold: f64,
    pub refine: bool,
    pub refine_max_passes: usize,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self {
            admissibility_threshold: 1e-1,
            refine: true,
            refine_max_passes: 1,
        }
    }
}

/// Per-variant result of one ensemble sample.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantOutcome {
    pub residual_norm: f64,
    pub cost: f64,
    /// Iterations of the continuation solve.
    pub gmres_iterations: usize,
    /// Iterations spent in refinement passes.
    pub refine_iterations: usize,
    pub admissible: bool,
    pub refined: bool,
}

#[derive(Debug, Clone)]
pub struct ParticleDecision {
    pub chosen: usize,
    pub u_next: SolutionVector,
    /// Update taken by the chosen variant, the warm start of the next sample.
    pub delta: Vec<f64>,
    pub per_variant: Vec<VariantOutcome>,
}

impl ParticleDecision {
    pub fn total_iterations(&self) -> usize {
        self.per_variant
            .iter()
            .map(|o| o.gmres_iterations + o.refine_iterations)
            .sum()
    }
}

/// Additional Newton passes from `candidate`, stopping once the residual is
/// at most `threshold`. Returns the best point seen, its residual norm and
/// the GMRES iterations spent.
pub fn refine_solution<R: ResidualMap + ?Sized>(
    map: &R,
    candidate: &[f64],
    precond: Option<&PreconditionerState>,
    cfg: &ContinuationConfig,
    passes: usize,
    threshold: f64,
) -> Result<(Vec<f64>, f64, usize)> {
    if passes == 0 {
        return Err(SolverError::InvalidParams("refinement needs at least one pass".into()));
    }
    let mut best = candidate.to_vec();
    let mut best_norm = crate::linalg::norm2(&map.residual(candidate)?);
    let mut current = best.clone();
    let mut iterations = 0;
    for _ in 0..passes {
        if best_norm <= threshold {
            break;
        }
        let out = continuation_step(map, &current, precond, None, cfg)?;
        iterations += out.report.iterations;
        if out.residual_norm < best_norm {
            best.clone_from(&out.u);
            best_norm = out.residual_norm;
        }
        current = out.u;
    }
    Ok((best, best_norm, iterations))
}

/// One ensemble sample at state `x`.
#[allow(clippy::too_many_arguments)]
pub fn particle_step<P: OcpProblem + ?Sized>(
    def: &P,
    grid: &HorizonGrid,
    u_prev: &SolutionVector,
    x: &[f64],
    precond: Option<&PreconditionerState>,
    warm_start: Option<&[f64]>,
    cfg_cont: &ContinuationConfig,
    cfg_part: &ParticleConfig,
) -> Result<ParticleDecision> {
    ensure_len(def.dims().n_x, x.len())?;
    let q = def.num_variants();
    let threshold = cfg_part.admissibility_threshold;
    let mut per_variant = Vec::with_capacity(q);
    let mut candidates = Vec::with_capacity(q);
    let mut deltas = Vec::with_capacity(q);

    for k in 0..q {
        let map = HorizonResidual::new(def, grid, x, k);
        let out = continuation_step(&map, u_prev.as_slice(), precond, warm_start, cfg_cont)?;
        let mut u = out.u;
        let mut delta = out.delta;
        let mut residual = out.residual_norm;
        let mut refined = false;
        let mut refine_iterations = 0;
        if !(residual <= threshold) && cfg_part.refine && cfg_part.refine_max_passes > 0 {
            let (ur, rr, it) = refine_solution(&map, &u, precond, cfg_cont, cfg_part.refine_max_passes, threshold)?;
            delta = ur.iter().zip(u_prev.as_slice()).map(|(a, b)| a - b).collect();
            u = ur;
            residual = rr;
            refined = true;
            refine_iterations = it;
        }
        let sol = map.to_solution(u)?;
        let cost = performance_index(def, grid, x, &sol, k)?;
        per_variant.push(VariantOutcome {
            residual_norm: residual,
            cost,
            gmres_iterations: out.report.iterations,
            refine_iterations,
            admissible: residual <= threshold,
            refined,
        });
        candidates.push(sol);
        deltas.push(delta);
    }

    let chosen = select_variant(&per_variant).ok_or_else(|| SolverError::AllVariantsInadmissible {
        variants: q,
        best_residual: per_variant
            .iter()
            .map(|o| o.residual_norm)
            .fold(f64::INFINITY, f64::min),
        threshold,
    })?;
    let u_next = candidates.swap_remove(chosen);
    let delta = deltas.swap_remove(chosen);
    Ok(ParticleDecision {
        chosen,
        u_next,
        delta,
        per_variant,
    })
}

/// Admissible variant of least cost; the first one wins exact ties.
pub fn select_variant(outcomes: &[VariantOutcome]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, o) in outcomes.iter().enumerate() {
        if !o.admissible {
            continue;
        }
        match best {
            Some(b) if outcomes[b].cost <= o.cost => {}
            _ => best = Some(k),
        }
    }
    best
}
