//! Slow, deliberately simple reference implementations.
//!
//! Nothing here calls into the modules it is used to check: distances,
//! travel times, objectives, containment and the Q-function are all
//! recomputed locally in plain `f64`. Only the plain data structs
//! (points, cuboids) are shared.
//!
//! `los_by_sampling` is conservative only up to its sampling resolution: an
//! obstacle crossing shorter than `step` can be missed.

use thiserror::Error;

use crate::geometry::{Cuboid, Los, ObstacleMap, Point3};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance size {n} exceeds enumeration cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("invalid oracle config: {0}")]
    InvalidConfig(String),
    #[error("no candidate satisfies the flight limit")]
    NoFeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Sampling interval in meters.
    pub step: f64,
    /// Largest instance enumerated exhaustively.
    pub cap: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { step: 0.05, cap: 8 }
    }
}

impl OracleConfig {
    pub fn new(step: f64, cap: usize) -> Result<Self, OracleError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(OracleError::InvalidConfig(format!("step ({step}) must be > 0")));
        }
        if cap < 1 {
            return Err(OracleError::InvalidConfig("cap must be >= 1".to_string()));
        }
        Ok(Self { step, cap })
    }
}

fn dist(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let dz = b.z - a.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn inside_closed(p: &Point3<f64>, c: &Cuboid<f64>) -> bool {
    p.x >= c.x_min && p.x <= c.x_max && p.y >= c.y_min && p.y <= c.y_max && p.z >= 0.0 && p.z <= c.height
}

/// Blocked iff some sample along `a..b` (spacing at most `step`, both ends
/// included) lies in a closed cuboid.
pub fn los_by_sampling(a: &Point3<f64>, b: &Point3<f64>, map: &ObstacleMap<f64>, step: f64) -> Los {
    assert!(step > 0.0, "step must be positive");
    let n = ((dist(a, b) / step).ceil() as usize).max(1);
    for k in 0..=n {
        let t = k as f64 / n as f64;
        let p = Point3 {
            x: a.x + (b.x - a.x) * t,
            y: a.y + (b.y - a.y) * t,
            z: a.z + (b.z - a.z) * t,
        };
        if map.cuboids().iter().any(|c| inside_closed(&p, c)) {
            return Los::Blocked;
        }
    }
    Los::Clear
}

/// Blocked iff the segment meets some closed cuboid (roof and floor
/// included), by slab clipping.
pub fn los_by_slabs(a: &Point3<f64>, b: &Point3<f64>, map: &ObstacleMap<f64>) -> Los {
    let hit = |c: &Cuboid<f64>| {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for (p, q, min, max) in [
            (a.x, b.x, c.x_min, c.x_max),
            (a.y, b.y, c.y_min, c.y_max),
            (a.z, b.z, 0.0, c.height),
        ] {
            let d = q - p;
            if d == 0.0 {
                if p < min || p > max {
                    return false;
                }
                continue;
            }
            let (t0, t1) = ((min - p) / d, (max - p) / d);
            lo = lo.max(t0.min(t1));
            hi = hi.min(t0.max(t1));
            if lo > hi {
                return false;
            }
        }
        true
    };
    if map.cuboids().iter().any(hit) {
        Los::Blocked
    } else {
        Los::Clear
    }
}

/// Shortest distance between segments `p0..p1` and `q0..q1`.
pub fn segment_distance(p0: &Point3<f64>, p1: &Point3<f64>, q0: &Point3<f64>, q1: &Point3<f64>) -> f64 {
    let sub = |a: &Point3<f64>, b: &Point3<f64>| [a.x - b.x, a.y - b.y, a.z - b.z];
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let d1 = sub(p1, p0);
    let d2 = sub(q1, q0);
    let r = sub(p0, q0);
    let (a, e, f) = (dot(d1, d1), dot(d2, d2), dot(d2, r));
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return dist(p0, q0);
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(d1, r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(d1, d2);
            let denom = a * e - b * b;
            let s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            } else {
                t = t0;
                s = s0;
            }
        }
    }
    let cp = Point3 {
        x: p0.x + d1[0] * s,
        y: p0.y + d1[1] * s,
        z: p0.z + d1[2] * s,
    };
    let cq = Point3 {
        x: q0.x + d2[0] * t,
        y: q0.y + d2[1] * t,
        z: q0.z + d2[2] * t,
    };
    dist(&cp, &cq)
}

/// The twelve edges of a cuboid standing on `z = 0`.
pub fn cuboid_edges(c: &Cuboid<f64>) -> Vec<(Point3<f64>, Point3<f64>)> {
    let corners = [(c.x_min, c.y_min), (c.x_max, c.y_min), (c.x_max, c.y_max), (c.x_min, c.y_max)];
    let mut out = Vec::with_capacity(12);
    for k in 0..4 {
        let (x0, y0) = corners[k];
        let (x1, y1) = corners[(k + 1) % 4];
        for z in [0.0, c.height] {
            out.push((Point3 { x: x0, y: y0, z }, Point3 { x: x1, y: y1, z }));
        }
        out.push((Point3 { x: x0, y: y0, z: 0.0 }, Point3 { x: x0, y: y0, z: c.height }));
    }
    out
}

/// Smallest distance from the segment to any cuboid edge.
pub fn edge_clearance(a: &Point3<f64>, b: &Point3<f64>, map: &ObstacleMap<f64>) -> f64 {
    map.cuboids()
        .iter()
        .flat_map(cuboid_edges)
        .map(|(p, q)| segment_distance(a, b, &p, &q))
        .fold(f64::INFINITY, f64::min)
}

/// True when either endpoint lies in a closed cuboid.
pub fn endpoint_in_obstacle(a: &Point3<f64>, b: &Point3<f64>, map: &ObstacleMap<f64>) -> bool {
    map.cuboids().iter().any(|c| inside_closed(a, c) || inside_closed(b, c))
}

/// Result of an exhaustive routing search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTour {
    pub order: Vec<usize>,
    /// Chosen point per user (by user index).
    pub points: Vec<Point3<f64>>,
    pub arrival_times: Vec<f64>,
    pub end_time: f64,
    pub objective: f64,
}

/// Routing instance in plain form.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub station: Point3<f64>,
    pub weights: Vec<f64>,
    pub i_w: f64,
    pub v: f64,
    pub t_max: f64,
}

impl OracleInstance {
    fn evaluate(&self, order: &[usize], points: &[Point3<f64>]) -> OracleTour {
        let mut arrival_times = vec![f64::NAN; points.len()];
        let mut t = 0.0;
        let mut at = self.station;
        for &i in order {
            t += dist(&at, &points[i]) / self.v;
            arrival_times[i] = t;
            at = points[i];
        }
        let end_time = t + dist(&at, &self.station) / self.v;
        let mut objective = 0.0;
        for (w, t) in self.weights.iter().zip(&arrival_times) {
            objective += w.powf(self.i_w) * t;
        }
        OracleTour {
            order: order.to_vec(),
            points: points.to_vec(),
            arrival_times,
            end_time,
            objective,
        }
    }
}

/// Advances `p` to the next permutation in lexicographic order.
fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = vec![p.clone()];
    while next_permutation(&mut p) {
        out.push(p.clone());
    }
    out
}

/// Minimum-objective visit order over all `n!` permutations. Ties go to the
/// lexicographically smallest order. The flight limit is ignored; the
/// returned `end_time` lets callers check it.
pub fn brute_force_order(points: &[Point3<f64>], inst: &OracleInstance, cap: usize) -> Result<OracleTour, OracleError> {
    let n = points.len();
    if n > cap {
        return Err(OracleError::CapExceeded { n, cap });
    }
    let mut best: Option<OracleTour> = None;
    for order in permutations(n) {
        let cand = inst.evaluate(&order, points);
        if best.as_ref().is_none_or(|b| cand.objective < b.objective) {
            best = Some(cand);
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// Exhaustive optimum over visit order and one candidate point per user,
/// restricted to tours within the flight limit.
///
/// For each permutation the point choice is a layered shortest path: the
/// objective equals `sum_k leg_k * (weight mass still unserved before leg k)`,
/// so legs separate once the order is fixed. If the unconstrained best for a
/// permutation overruns `t_max`, that permutation falls back to full
/// enumeration of its point combinations (bounded by `combo_cap`).
pub fn exhaustive_order_cells(
    candidates: &[Vec<Point3<f64>>],
    inst: &OracleInstance,
    cap: usize,
    combo_cap: usize,
) -> Result<OracleTour, OracleError> {
    let n = candidates.len();
    if n > cap {
        return Err(OracleError::CapExceeded { n, cap });
    }
    let factors: Vec<f64> = inst.weights.iter().map(|w| w.powf(inst.i_w)).collect();
    let mut best: Option<OracleTour> = None;
    for order in permutations(n) {
        let choice = best_choice_for_order(&order, candidates, &factors, inst);
        let mut points: Vec<Point3<f64>> = choice.iter().enumerate().map(|(u, &k)| candidates[u][k]).collect();
        let mut cand = inst.evaluate(&order, &points);
        if cand.end_time > inst.t_max {
            let total: usize = candidates.iter().map(Vec::len).product();
            if total > combo_cap {
                return Err(OracleError::CapExceeded { n: total, cap: combo_cap });
            }
            let mut found: Option<OracleTour> = None;
            let mut idx = vec![0usize; n];
            loop {
                for u in 0..n {
                    points[u] = candidates[u][idx[u]];
                }
                let t = inst.evaluate(&order, &points);
                if t.end_time <= inst.t_max && found.as_ref().is_none_or(|f| t.objective < f.objective) {
                    found = Some(t);
                }
                let mut u = 0;
                while u < n {
                    idx[u] += 1;
                    if idx[u] < candidates[u].len() {
                        break;
                    }
                    idx[u] = 0;
                    u += 1;
                }
                if u == n {
                    break;
                }
            }
            match found {
                Some(f) => cand = f,
                None => continue,
            }
        }
        if best.as_ref().is_none_or(|b| cand.objective < b.objective) {
            best = Some(cand);
        }
    }
    best.ok_or(OracleError::NoFeasible)
}

fn best_choice_for_order(order: &[usize], candidates: &[Vec<Point3<f64>>], factors: &[f64], inst: &OracleInstance) -> Vec<usize> {
    let n = order.len();
    if n == 0 {
        return Vec::new();
    }
    // remaining[k]: weight mass of users at positions >= k.
    let mut remaining = vec![0.0; n + 1];
    for k in (0..n).rev() {
        remaining[k] = remaining[k + 1] + factors[order[k]];
    }
    let first = &candidates[order[0]];
    let mut cost: Vec<f64> = first.iter().map(|p| dist(&inst.station, p) / inst.v * remaining[0]).collect();
    let mut back: Vec<Vec<usize>> = vec![vec![0; first.len()]];
    for k in 1..n {
        let prev = &candidates[order[k - 1]];
        let cur = &candidates[order[k]];
        let mut next = vec![f64::INFINITY; cur.len()];
        let mut arg = vec![0; cur.len()];
        for (j, q) in cur.iter().enumerate() {
            for (i, p) in prev.iter().enumerate() {
                let c = cost[i] + dist(p, q) / inst.v * remaining[k];
                if c < next[j] {
                    next[j] = c;
                    arg[j] = i;
                }
            }
        }
        cost = next;
        back.push(arg);
    }
    let mut k_best = 0;
    for (j, c) in cost.iter().enumerate() {
        if *c < cost[k_best] {
            k_best = j;
        }
    }
    let mut choice = vec![0; n];
    let mut j = k_best;
    for k in (0..n).rev() {
        choice[order[k]] = j;
        j = back[k][j];
    }
    choice
}

/// Gaussian upper tail by composite Simpson quadrature.
pub fn q_by_quadrature(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - q_by_quadrature(-x);
    }
    let upper = x + 14.0;
    let n = 40_000;
    let h = (upper - x) / n as f64;
    let f = |t: f64| (-0.5 * t * t).exp();
    let mut sum = f(x) + f(upper);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(x + k as f64 * h);
    }
    sum * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`q_by_quadrature`] by bisection on `[0, 40]`.
pub fn q_inverse_by_bisection(p: f64) -> f64 {
    assert!(p > 0.0 && p < 0.5, "p must lie in (0, 0.5)");
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if q_by_quadrature(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
