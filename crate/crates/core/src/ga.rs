//! Genetic-algorithm solver over joint (visit order, service cell) genomes.
//!
//! Fitness is minimized:
//!
//! ```text
//! J = sum_i w_i^I_w t_i + lambda * max(0, t_end - T_max) + mu * (#users on a 0-cell)
//! ```
//!
//! which equals the plain weighted-latency objective whenever the genome is
//! feasible. Decoded tours always close at the station, so no return penalty
//! is needed.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::coverage::CellIndex;
use crate::rng::{self, Rng};
use crate::routing::{Budget, Problem, SolveError, SolverRun, Tour};
use crate::Scalar;

const TOURNAMENT_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chromosome {
    pub order: Vec<usize>,
    /// One grid cell per user, indexed by user.
    pub cells: Vec<CellIndex>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaConfig<S> {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Penalty per second beyond `T_max`.
    pub lambda: S,
    /// Penalty per user whose cell is not a 1-cell.
    pub mu: S,
    /// Station-return penalty. Decoded tours always close at the station, so
    /// this term never fires; kept for configuration compatibility.
    pub gamma: S,
    pub seed: u64,
}

impl<S: Scalar> Default for GaConfig<S> {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 500,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            lambda: S::lit(1e3),
            mu: S::lit(1e6),
            gamma: S::zero(),
            seed: 0,
        }
    }
}

impl<S: Scalar> GaConfig<S> {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::InvalidInput(m.to_string()));
        if self.population < 2 {
            return bad("population must be >= 2");
        }
        if self.generations < 1 {
            return bad("generations must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("rates must lie in [0, 1]");
        }
        if !(self.lambda >= S::zero() && self.mu >= S::zero() && self.gamma >= S::zero()) {
            return bad("penalties must be >= 0");
        }
        Ok(())
    }
}

struct Scored<S> {
    genome: Chromosome,
    fitness: S,
    feasible: bool,
}

/// Penalized fitness and feasibility of a genome.
fn evaluate<S: Scalar>(ch: &Chromosome, problem: &Problem<'_, S>, cfg: &GaConfig<S>) -> (S, bool) {
    let mission = problem.mission;
    let mut arrival = vec![S::zero(); ch.order.len()];
    let mut t = S::zero();
    let mut at = mission.station;
    let mut invalid = 0usize;
    for &u in &ch.order {
        let area = &problem.areas[u];
        let cell = ch.cells[u];
        if !area.is_valid_cell(cell) {
            invalid += 1;
        }
        let p = area.point(cell);
        t = t + at.distance(&p) / mission.v_uav;
        arrival[u] = t;
        at = p;
    }
    let end = t + at.distance(&mission.station) / mission.v_uav;
    let objective = mission
        .users
        .iter()
        .zip(&arrival)
        .fold(S::zero(), |acc, (user, &t)| acc + user.weight.powf(mission.i_w) * t);
    let overrun = (end - mission.t_max).max(S::zero());
    let j = objective + cfg.lambda * overrun + cfg.mu * S::of_usize(invalid);
    (j, invalid == 0 && end <= mission.t_max)
}

/// Penalized objective `J` (lower is better).
pub fn fitness<S: Scalar>(ch: &Chromosome, problem: &Problem<'_, S>, cfg: &GaConfig<S>) -> S {
    evaluate(ch, problem, cfg).0
}

/// Decodes a genome into a tour with chained arrival times.
pub fn decode<S: Scalar>(ch: &Chromosome, problem: &Problem<'_, S>) -> Tour<S> {
    let points: Vec<_> = ch
        .cells
        .iter()
        .enumerate()
        .map(|(u, &c)| problem.areas[u].point(c))
        .collect();
    let mut tour = Tour::from_order(ch.order.clone(), &points, problem.mission);
    tour.cells = ch.cells.iter().copied().map(Some).collect();
    tour.feasible = tour.feasible && ch.cells.iter().enumerate().all(|(u, &c)| problem.areas[u].is_valid_cell(c));
    tour
}

fn random_genome<S: Scalar>(problem: &Problem<'_, S>, rng: &mut Rng) -> Chromosome {
    let n = problem.n_users();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let cells = (0..n)
        .map(|u| {
            let v = problem.valid_cells(u);
            v[rng.gen_range(0..v.len())]
        })
        .collect();
    Chromosome { order, cells }
}

/// Order crossover: keeps a slice of `a` in place and fills the remaining
/// positions with the missing genes in `b`'s order.
pub fn order_crossover(a: &[usize], b: &[usize], rng: &mut Rng) -> Vec<usize> {
    let n = a.len();
    if n < 2 {
        return a.to_vec();
    }
    let mut i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n);
    if i > j {
        std::mem::swap(&mut i, &mut j);
    }
    let mut child = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for k in i..=j {
        child[k] = a[k];
        taken[a[k]] = true;
    }
    let mut fill = b.iter().cycle().skip(j + 1).filter(|g| !taken[**g]);
    for k in (j + 1..n).chain(0..i) {
        child[k] = *fill.next().expect("enough genes");
    }
    child
}

fn tournament<'p, S: Scalar>(pop: &'p [Scored<S>], rng: &mut Rng) -> &'p Scored<S> {
    let mut best = rng.gen_range(0..pop.len());
    for _ in 1..TOURNAMENT_SIZE {
        let k = rng.gen_range(0..pop.len());
        if pop[k].fitness < pop[best].fitness || (pop[k].fitness == pop[best].fitness && k < best) {
            best = k;
        }
    }
    &pop[best]
}

fn breed<S: Scalar>(pop: &[Scored<S>], problem: &Problem<'_, S>, cfg: &GaConfig<S>, rng: &mut Rng) -> Chromosome {
    let a = tournament(pop, rng);
    let b = tournament(pop, rng);
    let mut child = if rng.gen_bool(cfg.crossover_rate) {
        let order = order_crossover(&a.genome.order, &b.genome.order, rng);
        let cells = a
            .genome
            .cells
            .iter()
            .zip(&b.genome.cells)
            .map(|(&x, &y)| if rng.gen_bool(0.5) { x } else { y })
            .collect();
        Chromosome { order, cells }
    } else {
        a.genome.clone()
    };
    let n = child.order.len();
    if n >= 2 && rng.gen_bool(cfg.mutation_rate) {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        child.order.swap(i, j);
    }
    if n >= 1 && rng.gen_bool(cfg.mutation_rate) {
        let u = rng.gen_range(0..n);
        let v = problem.valid_cells(u);
        child.cells[u] = v[rng.gen_range(0..v.len())];
    }
    child
}

fn score_all<S: Scalar>(genomes: Vec<Chromosome>, problem: &Problem<'_, S>, cfg: &GaConfig<S>) -> Vec<Scored<S>> {
    genomes
        .into_par_iter()
        .map(|genome| {
            let (fitness, feasible) = evaluate(&genome, problem, cfg);
            Scored {
                genome,
                fitness,
                feasible,
            }
        })
        .collect()
}

pub fn ga_solve<S: Scalar>(problem: &Problem<'_, S>, cfg: &GaConfig<S>) -> Result<Tour<S>, SolveError> {
    ga_run(problem, cfg, Budget::Iterations(cfg.generations)).map(|r| r.tour)
}

/// Evolves for the given number of generations (or until the wall-clock
/// budget is spent). `trace` holds the best fitness after each generation.
pub fn ga_run<S: Scalar>(problem: &Problem<'_, S>, cfg: &GaConfig<S>, budget: Budget) -> Result<SolverRun<S>, SolveError> {
    cfg.validate()?;
    if let Budget::Iterations(0) = budget {
        return Err(SolveError::InvalidInput("generations must be >= 1".to_string()));
    }
    let mut rng = rng::stream(cfg.seed, "ga", 0);
    let start = Instant::now();

    let initial = (0..cfg.population).map(|_| random_genome(problem, &mut rng)).collect();
    let mut pop = score_all(initial, problem, cfg);
    let mut best_feasible: Option<(Chromosome, S)> = None;
    let mut trace = Vec::new();
    let mut generation = 0;

    loop {
        pop.sort_by(|a, b| a.fitness.partial_cmp(&b.fitness).unwrap_or(std::cmp::Ordering::Equal));
        if let Some(s) = pop.iter().find(|s| s.feasible) {
            if best_feasible.as_ref().is_none_or(|(_, f)| s.fitness < *f) {
                best_feasible = Some((s.genome.clone(), s.fitness));
            }
        }
        if generation > 0 {
            trace.push(pop[0].fitness);
        }
        let done = match budget {
            Budget::Iterations(g) => generation >= g,
            Budget::WallClock(limit) => generation >= 1 && start.elapsed() >= limit,
        };
        if done {
            break;
        }

        let children: Vec<Chromosome> = (1..cfg.population).map(|_| breed(&pop, problem, cfg, &mut rng)).collect();
        let mut next = score_all(children, problem, cfg);
        let elite = pop.swap_remove(0);
        next.push(elite);
        pop = next;
        generation += 1;
    }

    let tour = match &best_feasible {
        Some((g, _)) => decode(g, problem),
        None => decode(&pop[0].genome, problem),
    };
    Ok(SolverRun {
        tour,
        iterations: generation,
        trace,
    })
}
