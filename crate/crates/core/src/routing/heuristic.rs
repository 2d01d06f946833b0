//! Random-restart heuristics over service-cell choices.
//!
//! Each iteration draws one valid cell per user and solves the visit order
//! exactly. The advanced variant additionally drops a random number of
//! low-priority users before ordering and then tries to serve them from the
//! resulting tour.
//!
//! Iterations draw from independent streams keyed by their index, so with an
//! iteration budget they run in parallel and reduce deterministically.
//! Advanced iteration `i` reuses the cell draw of plain iteration `i` for the
//! same seed; its exclusions come from a separate stream.

use std::time::Instant;

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;

use super::{
    optimal_order, optimal_order_subset, pick_best, reintegrate_excluded, Budget, Problem, SolveError, SolverRun, Tour,
};
use crate::coverage::CellIndex;
use crate::rng::{self, Rng};
use crate::Scalar;

pub fn heuristic_solve<S: Scalar>(problem: &Problem<'_, S>, iterations: usize, seed: u64) -> Result<Tour<S>, SolveError> {
    heuristic_run(problem, Budget::Iterations(iterations), seed).map(|r| r.tour)
}

pub fn heuristic_run<S: Scalar>(problem: &Problem<'_, S>, budget: Budget, seed: u64) -> Result<SolverRun<S>, SolveError> {
    run_iterations(budget, |i| Some(heuristic_iteration(problem, &mut rng::stream(seed, "heuristic", i))))
        .map(|r| r.expect("every heuristic iteration yields a tour"))
}

pub fn advanced_solve<S: Scalar>(problem: &Problem<'_, S>, iterations: usize, seed: u64) -> Result<Tour<S>, SolveError> {
    advanced_run(problem, Budget::Iterations(iterations), seed).map(|r| r.tour)
}

/// Exclusion/reintegration heuristic. Falls back to plain random-restart
/// iterations (nobody excluded) when no iteration manages to serve everyone.
pub fn advanced_run<S: Scalar>(problem: &Problem<'_, S>, budget: Budget, seed: u64) -> Result<SolverRun<S>, SolveError> {
    let pool = problem.low_priority_pool();
    let run = run_iterations(budget, |i| {
        advanced_iteration(problem, &pool, &mut rng::stream(seed, "heuristic", i), &mut rng::stream(seed, "advanced", i), None)
    })?;
    match run {
        Some(r) => Ok(r),
        None => {
            let iterations = match budget {
                Budget::Iterations(n) => n,
                Budget::WallClock(_) => 1,
            };
            let mut r = run_iterations(Budget::Iterations(iterations), |i| {
                Some(heuristic_iteration(problem, &mut rng::stream(seed, "advanced-fallback", i)))
            })?
            .expect("fallback iterations yield tours");
            r.iterations += iterations;
            Ok(r)
        }
    }
}

pub(crate) fn draw_cells<S: Scalar>(problem: &Problem<'_, S>, rng: &mut Rng) -> Vec<CellIndex> {
    (0..problem.n_users())
        .map(|u| {
            let cells = problem.valid_cells(u);
            cells[rng.gen_range(0..cells.len())]
        })
        .collect()
}

fn heuristic_iteration<S: Scalar>(problem: &Problem<'_, S>, rng: &mut Rng) -> Tour<S> {
    let cells = draw_cells(problem, rng);
    let points: Vec<_> = cells.iter().enumerate().map(|(u, &c)| problem.areas[u].point(c)).collect();
    let mut tour = optimal_order(&points, problem.mission);
    tour.cells = cells.into_iter().map(Some).collect();
    tour
}

/// One exclusion iteration. `forced_exclusions` pins N'_p instead of
/// drawing it. Returns the tour only when every user ends up served within
/// the flight limit.
pub(crate) fn advanced_iteration<S: Scalar>(
    problem: &Problem<'_, S>,
    pool: &[usize],
    cell_rng: &mut Rng,
    rng: &mut Rng,
    forced_exclusions: Option<usize>,
) -> Option<Tour<S>> {
    let n = problem.n_users();
    let cells = draw_cells(problem, cell_rng);
    let n_excluded = forced_exclusions.unwrap_or_else(|| rng.gen_range(0..=n / 2)).min(pool.len());
    let mut excluded: Vec<usize> = index::sample(rng, pool.len(), n_excluded)
        .into_iter()
        .map(|k| pool[k])
        .collect();
    excluded.sort_unstable();
    let retained: Vec<usize> = (0..n).filter(|u| excluded.binary_search(u).is_err()).collect();

    let points: Vec<_> = cells.iter().enumerate().map(|(u, &c)| problem.areas[u].point(c)).collect();
    let mut partial = optimal_order_subset(&points, problem.mission, &retained);
    partial.cells = cells.into_iter().map(Some).collect();
    for &e in &excluded {
        partial.cells[e] = None;
    }
    let tour = reintegrate_excluded(&partial, &excluded, problem)?;
    tour.feasible.then_some(tour)
}

/// Runs iterations under `budget`, keeping the best tour by
/// (feasible, objective, iteration index).
fn run_iterations<S, F>(budget: Budget, iterate: F) -> Result<Option<SolverRun<S>>, SolveError>
where
    S: Scalar,
    F: Fn(u64) -> Option<Tour<S>> + Sync,
{
    let results: Vec<(usize, Option<Tour<S>>)> = match budget {
        Budget::Iterations(0) => {
            return Err(SolveError::InvalidInput("iterations must be >= 1".to_string()));
        }
        Budget::Iterations(n) => (0..n).into_par_iter().map(|i| (i, iterate(i as u64))).collect(),
        Budget::WallClock(limit) => {
            let start = Instant::now();
            let mut out = Vec::new();
            let mut i = 0;
            while i == 0 || start.elapsed() < limit {
                out.push((i, iterate(i as u64)));
                i += 1;
            }
            out
        }
    };

    let iterations = results.len();
    let mut trace = Vec::with_capacity(iterations);
    let mut best_feasible = S::infinity();
    let mut best: Option<(Tour<S>, usize)> = None;
    for (i, tour) in results {
        if let Some(t) = tour {
            if t.feasible && t.objective < best_feasible {
                best_feasible = t.objective;
            }
            best = Some(match best {
                None => (t, i),
                Some(b) => pick_best(b, (t, i)),
            });
        }
        trace.push(best_feasible);
    }
    Ok(best.map(|(tour, _)| SolverRun { tour, iterations, trace }))
}
