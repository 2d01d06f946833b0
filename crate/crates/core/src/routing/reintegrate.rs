//! Serving excluded users from an already optimized tour.
//!
//! Each excluded user (heaviest first) is attached where it costs the least
//! extra flight time: either at a point on the flown polyline that already
//! satisfies its QoS and LoS requirements (zero detour, nobody else's arrival
//! moves), or at one of its valid cells lying within one grid step of a leg,
//! reached by a short out-and-back detour.

use super::{Problem, Tour};
use crate::coverage::CellIndex;
use crate::geometry::Point3;
use crate::Scalar;

struct Insertion<S> {
    detour: S,
    arrival: S,
    /// Insert after this many visited stops.
    position: usize,
    point: Point3<S>,
    cell: Option<CellIndex>,
}

/// Reintegrates `excluded` users into `tour`; `None` when some user cannot
/// be served or the final tour breaks the flight limit.
pub fn reintegrate_excluded<S: Scalar>(tour: &Tour<S>, excluded: &[usize], problem: &Problem<'_, S>) -> Option<Tour<S>> {
    let mission = problem.mission;
    let mut order_excl = excluded.to_vec();
    order_excl.sort_by(|&a, &b| {
        mission.users[b]
            .weight
            .partial_cmp(&mission.users[a].weight)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut current = tour.clone();
    for e in order_excl {
        let ins = best_insertion(&current, e, problem)?;
        let mut order = current.order.clone();
        order.insert(ins.position, e);
        let mut points = current.service_points.clone();
        points[e] = ins.point;
        let cells = {
            let mut c = current.cells.clone();
            c[e] = ins.cell;
            c
        };
        let mut next = Tour::from_order(order, &points, mission);
        next.cells = cells;
        current = next;
    }

    let n = problem.n_users();
    current.feasible = current.is_complete(n) && current.end_time <= mission.t_max;
    current.exact = false;
    if current.end_time <= mission.t_max {
        Some(current)
    } else {
        None
    }
}

fn point_segment_distance<S: Scalar>(p: &Point3<S>, a: &Point3<S>, b: &Point3<S>) -> S {
    let (abx, aby, abz) = (b.x - a.x, b.y - a.y, b.z - a.z);
    let len2 = abx * abx + aby * aby + abz * abz;
    let t = if len2 == S::zero() {
        S::zero()
    } else {
        (((p.x - a.x) * abx + (p.y - a.y) * aby + (p.z - a.z) * abz) / len2)
            .max(S::zero())
            .min(S::one())
    };
    p.distance(&a.lerp(b, t))
}

fn best_insertion<S: Scalar>(tour: &Tour<S>, user: usize, problem: &Problem<'_, S>) -> Option<Insertion<S>> {
    let mission = problem.mission;
    let v = mission.v_uav;
    let spec = &problem.areas[user].spec;
    let step = spec.dx.min(spec.dy);
    let corridor = spec.dx.max(spec.dy);
    let stops = tour.polyline(&mission.station);

    let mut best: Option<Insertion<S>> = None;
    let mut consider = |cand: Insertion<S>| {
        let replace = match &best {
            None => true,
            Some(b) => cand.detour < b.detour || (cand.detour == b.detour && cand.arrival < b.arrival),
        };
        if replace {
            best = Some(cand);
        }
    };

    let mut t_at = S::zero();
    for (seg, pair) in stops.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let len = a.distance(b);

        // On-path samples, endpoints included.
        let n = (len / step).ceil().to_usize().unwrap_or(0).max(1);
        for k in 0..=n {
            let q = a.lerp(b, S::of_usize(k) / S::of_usize(n));
            if problem.is_valid_point(user, &q) {
                consider(Insertion {
                    detour: S::zero(),
                    arrival: t_at + a.distance(&q) / v,
                    position: seg,
                    point: q,
                    cell: None,
                });
                // Later samples on this leg only arrive later.
                break;
            }
        }

        // Valid cells inside the corridor around this leg.
        for &cell in problem.valid_cells(user) {
            let c = problem.areas[user].point(cell);
            if point_segment_distance(&c, a, b) > corridor {
                continue;
            }
            let ac = a.distance(&c);
            let detour = ((ac + c.distance(b) - len) / v).max(S::zero());
            consider(Insertion {
                detour,
                arrival: t_at + ac / v,
                position: seg,
                point: c,
                cell: Some(cell),
            });
        }

        t_at = t_at + len / v;
    }
    best
}
