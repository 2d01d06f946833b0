//! Visit-order optimization for fixed service points.
//!
//! Exact for up to [`EXACT_LIMIT`] users by dynamic programming over
//! visited subsets. The weighted-latency objective decomposes per leg: the
//! leg flown into the `k`-th stop delays every user not yet served, so its
//! cost is `leg_time * (sum of factors of unvisited users)`. Any permutation
//! is a single station-rooted tour, so subtour elimination holds by
//! construction.

use rand::seq::SliceRandom;

use super::{travel_time, MissionSpec, Tour};
use crate::geometry::Point3;
use crate::rng;
use crate::Scalar;

/// Largest user count solved exactly.
pub const EXACT_LIMIT: usize = 16;

const LOCAL_SEARCH_RESTARTS: usize = 20;

/// Relative gap under which two DP costs count as tied.
const TIE_EPS: f64 = 1e-12;

/// Best visit order over all users for one service point per user.
pub fn optimal_order<S: Scalar>(points: &[Point3<S>], mission: &MissionSpec<S>) -> Tour<S> {
    assert_eq!(points.len(), mission.users.len(), "one service point per user");
    let all: Vec<usize> = (0..points.len()).collect();
    optimal_order_subset(points, mission, &all)
}

/// Best visit order over the users in `subset`; other users stay unvisited.
///
/// If the optimum breaks the flight limit, the DP is rerun breaking
/// objective ties toward shorter end time; if that still fails the optimum
/// is returned flagged infeasible.
pub fn optimal_order_subset<S: Scalar>(points: &[Point3<S>], mission: &MissionSpec<S>, subset: &[usize]) -> Tour<S> {
    let n_users = mission.users.len();
    if subset.is_empty() {
        return Tour::from_order(Vec::new(), points, mission);
    }
    let inst = Instance::new(points, mission, subset);
    let complete = subset.len() == n_users;
    let finish = |order: Vec<usize>, exact: bool| {
        let mut t = Tour::from_order(order, points, mission);
        t.exact = exact;
        if !complete {
            t.feasible = t.end_time <= mission.t_max;
        }
        t
    };

    if subset.len() > EXACT_LIMIT {
        return finish(inst.map_order(&inst.local_search()), false);
    }
    let first = finish(inst.map_order(&inst.held_karp(false)), true);
    if first.feasible {
        return first;
    }
    let second = finish(inst.map_order(&inst.held_karp(true)), true);
    if second.feasible {
        second
    } else {
        first
    }
}

struct Instance<'a, S> {
    subset: &'a [usize],
    factors: Vec<S>,
    /// Leg times between stops; row/column `n` is the station.
    legs: Vec<S>,
    n: usize,
}

impl<'a, S: Scalar> Instance<'a, S> {
    fn new(points: &[Point3<S>], mission: &MissionSpec<S>, subset: &'a [usize]) -> Self {
        let n = subset.len();
        let stop = |k: usize| {
            if k == n {
                mission.station
            } else {
                points[subset[k]]
            }
        };
        let mut legs = vec![S::zero(); (n + 1) * (n + 1)];
        for a in 0..=n {
            for b in 0..=n {
                legs[a * (n + 1) + b] = travel_time(&stop(a), &stop(b), mission.v_uav);
            }
        }
        let factors = subset
            .iter()
            .map(|&i| mission.users[i].weight.powf(mission.i_w))
            .collect();
        Self {
            subset,
            factors,
            legs,
            n,
        }
    }

    #[inline]
    fn leg(&self, a: usize, b: usize) -> S {
        self.legs[a * (self.n + 1) + b]
    }

    fn map_order(&self, local: &[usize]) -> Vec<usize> {
        local.iter().map(|&k| self.subset[k]).collect()
    }

    /// Subset DP. `prefer_short` breaks near-ties on cost by elapsed time
    /// (and by end time at the final step).
    fn held_karp(&self, prefer_short: bool) -> Vec<usize> {
        let n = self.n;
        let full = (1usize << n) - 1;
        let station = n;

        // Factor mass of each subset.
        let mut mass = vec![S::zero(); full + 1];
        for mask in 1..=full {
            let low = mask.trailing_zeros() as usize;
            mass[mask] = mass[mask & (mask - 1)] + self.factors[low];
        }

        let inf = S::infinity();
        let mut cost = vec![inf; (full + 1) * n];
        let mut elapsed = vec![inf; (full + 1) * n];
        let mut parent = vec![u8::MAX; (full + 1) * n];

        let better = |nc: S, ne: S, oc: S, oe: S| -> bool {
            if prefer_short {
                let scale = nc.abs().max(oc.abs());
                if (nc - oc).abs() <= S::lit(TIE_EPS) * scale {
                    return ne < oe;
                }
            }
            nc < oc
        };

        for k in 0..n {
            let idx = (1 << k) * n + k;
            cost[idx] = self.leg(station, k) * mass[full];
            elapsed[idx] = self.leg(station, k);
        }
        for mask in 1..=full {
            let remaining = mass[full ^ mask];
            let mut bits = mask;
            while bits != 0 {
                let k = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let c = cost[mask * n + k];
                if c == inf {
                    continue;
                }
                let e = elapsed[mask * n + k];
                let mut free = full & !mask;
                while free != 0 {
                    let m = free.trailing_zeros() as usize;
                    free &= free - 1;
                    let leg = self.leg(k, m);
                    let nc = c + leg * remaining;
                    let ne = e + leg;
                    let slot = (mask | (1 << m)) * n + m;
                    if better(nc, ne, cost[slot], elapsed[slot]) {
                        cost[slot] = nc;
                        elapsed[slot] = ne;
                        parent[slot] = k as u8;
                    }
                }
            }
        }

        let mut last = 0;
        for k in 1..n {
            let (nc, ne) = (cost[full * n + k], elapsed[full * n + k] + self.leg(k, station));
            let (oc, oe) = (cost[full * n + last], elapsed[full * n + last] + self.leg(last, station));
            if better(nc, ne, oc, oe) {
                last = k;
            }
        }

        let mut order = Vec::with_capacity(n);
        let mut mask = full;
        let mut k = last;
        loop {
            order.push(k);
            let p = parent[mask * n + k];
            mask &= !(1 << k);
            if p == u8::MAX {
                break;
            }
            k = p as usize;
        }
        order.reverse();
        order
    }

    fn score(&self, order: &[usize]) -> S {
        let mut t = S::zero();
        let mut at = self.n;
        let mut total = S::zero();
        for &k in order {
            t = t + self.leg(at, k);
            total = total + self.factors[k] * t;
            at = k;
        }
        total
    }

    /// 2-opt and or-opt descent from several starts.
    fn local_search(&self) -> Vec<usize> {
        let n = self.n;
        let mut rng = rng::stream(n as u64, "order-local-search", 0);
        let mut best: Vec<usize> = (0..n).collect();
        let mut best_score = S::infinity();
        for restart in 0..LOCAL_SEARCH_RESTARTS {
            let mut order: Vec<usize> = if restart == 0 {
                self.nearest_neighbour()
            } else {
                let mut o: Vec<usize> = (0..n).collect();
                o.shuffle(&mut rng);
                o
            };
            let mut score = self.score(&order);
            let mut improved = true;
            while improved {
                improved = false;
                // 2-opt: reverse a block.
                for i in 0..n {
                    for j in i + 1..n {
                        order[i..=j].reverse();
                        let s = self.score(&order);
                        if s < score {
                            score = s;
                            improved = true;
                        } else {
                            order[i..=j].reverse();
                        }
                    }
                }
                // Or-opt: move a block of 1..=3 stops elsewhere.
                for len in 1..=3.min(n) {
                    for i in 0..=n - len {
                        for j in 0..=n - len {
                            if j == i {
                                continue;
                            }
                            let mut cand = order.clone();
                            let block: Vec<usize> = cand.drain(i..i + len).collect();
                            cand.splice(j..j, block);
                            let s = self.score(&cand);
                            if s < score {
                                score = s;
                                order = cand;
                                improved = true;
                            }
                        }
                    }
                }
            }
            if score < best_score {
                best_score = score;
                best = order;
            }
        }
        best
    }

    fn nearest_neighbour(&self) -> Vec<usize> {
        let mut left: Vec<usize> = (0..self.n).collect();
        let mut at = self.n;
        let mut out = Vec::with_capacity(self.n);
        while !left.is_empty() {
            let (pos, _) = left
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    self.leg(at, *a.1)
                        .partial_cmp(&self.leg(at, *b.1))
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("non-empty");
            at = left.remove(pos);
            out.push(at);
        }
        out
    }
}
