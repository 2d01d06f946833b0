//! Weighted-latency routing over chosen service points.
//!
//! The UAV leaves the station, visits one service point per user and flies
//! back. Arrival times chain leg by leg at constant speed, and a tour is
//! scored by `sum_i w_i^I_w * t_i`. Service is instantaneous at arrival.

mod heuristic;
mod order;
mod reintegrate;

use std::time::Duration;

use thiserror::Error;

use crate::coverage::{CellIndex, ServiceAreaGrid};
use crate::geometry::{ObstacleMap, Point3};
use crate::link::{max_service_distance, validate_with_range, LinkBudget, User};
use crate::Scalar;

pub use heuristic::{advanced_run, advanced_solve, heuristic_run, heuristic_solve};
pub use order::{optimal_order, optimal_order_subset, EXACT_LIMIT};
pub use reintegrate::reintegrate_excluded;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("user {user} has no valid service cell")]
    Unsatisfiable { user: String },
    #[error("invalid mission: {0}")]
    InvalidMission(String),
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
}

/// Mission parameters: station, users, objective exponent and flight limits.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionSpec<S> {
    pub station: Point3<S>,
    pub users: Vec<User<S>>,
    pub i_w: S,
    pub t_max: S,
    pub v_uav: S,
}

impl<S: Scalar> MissionSpec<S> {
    pub fn new(station: Point3<S>, users: Vec<User<S>>, i_w: S, t_max: S, v_uav: S) -> Result<Self, SolveError> {
        if !(i_w >= S::zero() && i_w.is_finite()) {
            return Err(SolveError::InvalidMission(format!("i_w ({i_w}) must be >= 0")));
        }
        if !(t_max > S::zero()) {
            return Err(SolveError::InvalidMission(format!("t_max ({t_max}) must be > 0")));
        }
        if !(v_uav > S::zero() && v_uav.is_finite()) {
            return Err(SolveError::InvalidMission(format!("v_uav ({v_uav}) must be > 0")));
        }
        Ok(Self {
            station,
            users,
            i_w,
            t_max,
            v_uav,
        })
    }

    /// `w_i^I_w` per user.
    pub fn priority_factors(&self) -> Vec<S> {
        self.users.iter().map(|u| u.weight.powf(self.i_w)).collect()
    }
}

/// Flight-time limit from battery energy and constant power draw.
pub fn t_max_from_energy<S: Scalar>(e_max: S, p_uav: S) -> S {
    e_max / p_uav
}

pub fn travel_time<S: Scalar>(a: &Point3<S>, b: &Point3<S>, v: S) -> S {
    a.distance(b) / v
}

/// A closed station-to-station tour.
///
/// Per-user vectors are indexed by user index. During the exclusion
/// heuristic a tour may visit only a subset of users; unvisited users then
/// carry a NaN arrival time and do not contribute to the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Tour<S> {
    pub order: Vec<usize>,
    pub service_points: Vec<Point3<S>>,
    /// Grid cell behind each service point; `None` for off-lattice points
    /// found during reintegration (validated directly instead).
    pub cells: Vec<Option<CellIndex>>,
    pub arrival_times: Vec<S>,
    pub end_time: S,
    pub objective: S,
    pub feasible: bool,
    /// Order proven optimal for these service points.
    pub exact: bool,
}

impl<S: Scalar> Tour<S> {
    /// Chains arrival times along `order` and scores the result.
    ///
    /// `points` holds one entry per user; only visited entries are read.
    pub fn from_order(order: Vec<usize>, points: &[Point3<S>], mission: &MissionSpec<S>) -> Self {
        let n = mission.users.len();
        let mut arrival_times = vec![S::nan(); n];
        let mut t = S::zero();
        let mut at = mission.station;
        for &i in &order {
            t = t + travel_time(&at, &points[i], mission.v_uav);
            arrival_times[i] = t;
            at = points[i];
        }
        let end_time = t + travel_time(&at, &mission.station, mission.v_uav);
        let mut tour = Self {
            order,
            service_points: points.to_vec(),
            cells: vec![None; n],
            arrival_times,
            end_time,
            objective: S::zero(),
            feasible: false,
            exact: false,
        };
        tour.objective = objective_value(&tour, &mission.users, mission.i_w);
        tour.feasible = tour.is_complete(n) && end_time <= mission.t_max;
        tour
    }

    pub fn is_complete(&self, n_users: usize) -> bool {
        self.order.len() == n_users
    }

    /// Stops of the flown polyline, station at both ends.
    pub fn polyline(&self, station: &Point3<S>) -> Vec<Point3<S>> {
        let mut out = Vec::with_capacity(self.order.len() + 2);
        out.push(*station);
        out.extend(self.order.iter().map(|&i| self.service_points[i]));
        out.push(*station);
        out
    }

    /// Pairs `(i, j)` with `w_i > w_j` and `i` served before `j`, against
    /// all pairs with distinct weights.
    pub fn priority_compliance(&self, users: &[User<S>]) -> (usize, usize) {
        let mut ok = 0;
        let mut total = 0;
        for i in 0..users.len() {
            for j in 0..users.len() {
                if users[i].weight > users[j].weight {
                    total += 1;
                    if self.arrival_times[i] < self.arrival_times[j] {
                        ok += 1;
                    }
                }
            }
        }
        (ok, total)
    }
}

/// `sum_i w_i^I_w * t_i` over visited users, in user-index order.
pub fn objective_value<S: Scalar>(tour: &Tour<S>, users: &[User<S>], i_w: S) -> S {
    users
        .iter()
        .zip(&tour.arrival_times)
        .filter(|(_, t)| !t.is_nan())
        .fold(S::zero(), |acc, (u, &t)| acc + u.weight.powf(i_w) * t)
}

/// How long a stochastic solver may run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Iterations(usize),
    WallClock(Duration),
}

/// Solver output with run statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun<S> {
    pub tour: Tour<S>,
    /// Iterations (or GA generations) actually run.
    pub iterations: usize,
    /// Best feasible objective after each iteration; infinite until the
    /// first feasible tour.
    pub trace: Vec<S>,
}

/// Everything a solver needs: mission, per-user service areas, and the
/// obstacle/link model for validating off-lattice service points.
#[derive(Debug, Clone)]
pub struct Problem<'a, S> {
    pub mission: &'a MissionSpec<S>,
    pub areas: &'a [ServiceAreaGrid<S>],
    pub map: &'a ObstacleMap<S>,
    pub budget: &'a LinkBudget<S>,
    valid_cells: Vec<Vec<CellIndex>>,
    ranges: Vec<S>,
}

impl<'a, S: Scalar> Problem<'a, S> {
    pub fn new(
        mission: &'a MissionSpec<S>,
        areas: &'a [ServiceAreaGrid<S>],
        map: &'a ObstacleMap<S>,
        budget: &'a LinkBudget<S>,
    ) -> Result<Self, SolveError> {
        if areas.len() != mission.users.len() {
            return Err(SolveError::InvalidInput(format!(
                "{} service areas for {} users",
                areas.len(),
                mission.users.len()
            )));
        }
        let valid_cells: Vec<Vec<CellIndex>> = areas.iter().map(|a| a.valid_cells()).collect();
        if let Some(k) = valid_cells.iter().position(|v| v.is_empty()) {
            return Err(SolveError::Unsatisfiable {
                user: mission.users[k].id.clone(),
            });
        }
        let ranges = mission
            .users
            .iter()
            .map(|u| max_service_distance(u.weight, budget))
            .collect();
        Ok(Self {
            mission,
            areas,
            map,
            budget,
            valid_cells,
            ranges,
        })
    }

    pub fn n_users(&self) -> usize {
        self.mission.users.len()
    }

    pub fn valid_cells(&self, user: usize) -> &[CellIndex] {
        &self.valid_cells[user]
    }

    /// Maximum service distance for `user`.
    pub fn range(&self, user: usize) -> S {
        self.ranges[user]
    }

    pub fn is_valid_point(&self, user: usize, p: &Point3<S>) -> bool {
        validate_with_range(p, &self.mission.users[user].position, self.ranges[user], self.map).is_valid()
    }

    /// The `floor(N/2)` lowest-weight users (ties by id), eligible for
    /// exclusion in the advanced heuristic.
    pub fn low_priority_pool(&self) -> Vec<usize> {
        let users = &self.mission.users;
        let mut idx: Vec<usize> = (0..users.len()).collect();
        idx.sort_by(|&a, &b| {
            users[a]
                .weight
                .partial_cmp(&users[b].weight)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| users[a].id.cmp(&users[b].id))
        });
        idx.truncate(users.len() / 2);
        idx
    }

    /// Checks every tour contract: permutation, chained times, flight limit
    /// and service-point validity. Returns the first violation.
    pub fn verify_tour(&self, tour: &Tour<S>) -> Result<(), String> {
        let n = self.n_users();
        let mut seen = vec![false; n];
        for &i in &tour.order {
            if i >= n || seen[i] {
                return Err(format!("order is not a permutation: {:?}", tour.order));
            }
            seen[i] = true;
        }
        if tour.order.len() != n {
            return Err(format!("tour visits {} of {} users", tour.order.len(), n));
        }
        let chained = Tour::from_order(tour.order.clone(), &tour.service_points, self.mission);
        let tol = S::lit(1e-9);
        for i in 0..n {
            let d = (chained.arrival_times[i] - tour.arrival_times[i]).abs();
            if !(d <= tol * S::one().max(chained.arrival_times[i])) {
                return Err(format!("arrival time of user {i} does not chain"));
            }
        }
        if (chained.end_time - tour.end_time).abs() > tol * S::one().max(tour.end_time) {
            return Err("end time does not chain".to_string());
        }
        if !(tour.end_time <= self.mission.t_max) {
            return Err(format!("end time {} exceeds T_max {}", tour.end_time, self.mission.t_max));
        }
        for i in 0..n {
            let p = &tour.service_points[i];
            if let Some(cell) = tour.cells[i] {
                if !self.areas[i].is_valid_cell(cell) {
                    return Err(format!("user {i}: cell {cell:?} is not a 1-cell"));
                }
                if self.areas[i].point(cell) != *p {
                    return Err(format!("user {i}: service point is not its cell center"));
                }
            }
            if !self.is_valid_point(i, p) {
                return Err(format!("user {i}: service point fails QoS/LoS validation"));
            }
        }
        Ok(())
    }
}

/// Ordering key for picking the best tour: feasible before infeasible, then
/// objective (feasible) or end time (infeasible), then iteration index.
pub(crate) fn tour_rank<S: Scalar>(t: &Tour<S>) -> (bool, S) {
    if t.feasible {
        (false, t.objective)
    } else {
        (true, t.end_time)
    }
}

pub(crate) fn rank_cmp<S: Scalar>(a: &(Tour<S>, usize), b: &(Tour<S>, usize)) -> std::cmp::Ordering {
    let (fa, va) = tour_rank(&a.0);
    let (fb, vb) = tour_rank(&b.0);
    fa.cmp(&fb)
        .then(va.partial_cmp(&vb).unwrap_or(std::cmp::Ordering::Equal))
        .then(a.1.cmp(&b.1))
}

/// Keeps the better of two indexed tours; the reduction is associative, so
/// parallel and sequential runs agree.
pub(crate) fn pick_best<S: Scalar>(a: (Tour<S>, usize), b: (Tour<S>, usize)) -> (Tour<S>, usize) {
    if rank_cmp(&b, &a).is_lt() {
        b
    } else {
        a
    }
}
