mod common;

use common::*;
use pcmpc::continuation::{continuation_step, ContinuationConfig, HorizonResidual, ResidualMap};
use pcmpc::linalg::norm2;
use pcmpc::min_time::{self, make_problem, MinTimeParams, MinTimeProblem, SpeedLaw};
use pcmpc::ocp::SolutionVector;
use pcmpc::particle::{particle_step, refine_solution, ParticleConfig};
use pcmpc::SolverError;

fn first_sample(params: MinTimeParams, k_init: usize) -> (MinTimeProblem, SolutionVector, [f64; 2]) {
    let prob = make_problem(params).unwrap();
    let grid = shipped_grid();
    let u0 = min_time::initialize(&prob, &grid, &[0.0, 0.0], k_init, &ContinuationConfig::default()).unwrap();
    let law = prob.params().variants[k_init];
    let rate = min_time::dynamics(law, 0.0, u0.u(0)[0], 1.0);
    (prob, u0, [0.005 * rate[0], 0.005 * rate[1]])
}

#[test]
fn ensemble_of_one_is_a_bare_continuation_step() {
    let params = MinTimeParams {
        variants: vec![SpeedLaw { a: 0.9, b: 1.05 }],
        ..MinTimeParams::default()
    };
    let (prob, u0, x1) = first_sample(params, 0);
    let grid = shipped_grid();
    let cfg = ContinuationConfig::default();
    let d = particle_step(&prob, &grid, &u0, &x1, None, None, &cfg, &ParticleConfig::default()).unwrap();
    let map = HorizonResidual::new(&prob, &grid, &x1, 0);
    let bare = continuation_step(&map, u0.as_slice(), None, None, &cfg).unwrap();
    assert_eq!(d.chosen, 0);
    assert_eq!(d.per_variant.len(), 1);
    assert_eq!(d.u_next.as_slice(), &bare.u[..]);
    assert_eq!(d.per_variant[0].gmres_iterations, bare.report.iterations);
    assert_eq!(d.per_variant[0].residual_norm, bare.residual_norm);
}

#[test]
fn identical_variants_tie_to_lowest_index() {
    let law = SpeedLaw { a: 0.97, b: 1.0 };
    let params = MinTimeParams {
        variants: vec![law; 3],
        ..MinTimeParams::default()
    };
    let (prob, u0, x1) = first_sample(params, 0);
    let grid = shipped_grid();
    let d = particle_step(&prob, &grid, &u0, &x1, None, None, &ContinuationConfig::default(), &ParticleConfig::default())
        .unwrap();
    assert_eq!(d.chosen, 0);
    let c0 = d.per_variant[0].cost;
    assert!(d.per_variant.iter().all(|o| o.cost == c0));
}

#[test]
fn shipped_first_sample_selects_second_pair() {
    let (prob, u0, x1) = first_sample(MinTimeParams::default(), 1);
    let grid = shipped_grid();
    let d = particle_step(&prob, &grid, &u0, &x1, None, None, &ContinuationConfig::default(), &ParticleConfig::default())
        .unwrap();
    assert_eq!(d.chosen, 1);
    assert!(d.per_variant.iter().all(|o| o.admissible));
    let best = d.per_variant.iter().map(|o| o.cost).fold(f64::INFINITY, f64::min);
    assert_eq!(d.per_variant[d.chosen].cost, best);
}

#[test]
fn permuting_variants_permutes_the_decision() {
    let base = MinTimeParams::default();
    let (prob, u0, x1) = first_sample(base.clone(), 1);
    let grid = shipped_grid();
    let cont = ContinuationConfig::default();
    let part = ParticleConfig::default();
    let d = particle_step(&prob, &grid, &u0, &x1, None, None, &cont, &part).unwrap();

    // perm[new] = old
    let perm = [2usize, 0, 1];
    let permuted = MinTimeParams {
        variants: perm.iter().map(|&o| base.variants[o]).collect(),
        ..base
    };
    let prob_p = make_problem(permuted).unwrap();
    let dp = particle_step(&prob_p, &grid, &u0, &x1, None, None, &cont, &part).unwrap();
    for (new, &old) in perm.iter().enumerate() {
        assert_eq!(dp.per_variant[new], d.per_variant[old]);
    }
    assert_eq!(perm[dp.chosen], d.chosen);
    assert_eq!(dp.u_next.as_slice(), d.u_next.as_slice());
}

#[test]
fn refinement_reduces_perturbed_residual() {
    let (prob, u0, x1) = first_sample(MinTimeParams::default(), 1);
    let grid = shipped_grid();
    let mut r = rng(41);
    let noise = random_vec(&mut r, u0.len());
    let scale = 1e-3 / norm2(&noise);
    let candidate = u0.offset(&noise, scale).unwrap();
    let map = HorizonResidual::new(&prob, &grid, &x1, 1);
    let before = norm2(&map.residual(candidate.as_slice()).unwrap());
    let (_, after, _) =
        refine_solution(&map, candidate.as_slice(), None, &ContinuationConfig::default(), 2, 0.0).unwrap();
    assert!(after < before, "{after} vs {before}");
}

#[test]
fn inadmissible_ensemble_is_an_error() {
    let (prob, u0, x1) = first_sample(MinTimeParams::default(), 1);
    let grid = shipped_grid();
    let part = ParticleConfig {
        admissibility_threshold: 1e-30,
        refine: false,
        refine_max_passes: 0,
    };
    let err = particle_step(&prob, &grid, &u0, &x1, None, None, &ContinuationConfig::default(), &part).unwrap_err();
    assert!(matches!(err, SolverError::AllVariantsInadmissible { variants: 3, .. }));
}

#[test]
fn refinement_lowers_the_best_failing_residual() {
    let (prob, u0, x1) = first_sample(MinTimeParams::default(), 1);
    let grid = shipped_grid();
    let cont = ContinuationConfig::default();
    let best = |refine: bool| {
        let part = ParticleConfig {
            admissibility_threshold: 1e-30,
            refine,
            refine_max_passes: 2,
        };
        match particle_step(&prob, &grid, &u0, &x1, None, None, &cont, &part).unwrap_err() {
            SolverError::AllVariantsInadmissible { best_residual, .. } => best_residual,
            e => panic!("unexpected error {e}"),
        }
    };
    assert!(best(true) < best(false));
}
