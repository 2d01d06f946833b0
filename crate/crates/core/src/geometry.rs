//! Cuboid obstacle model and the line-of-sight test.
//!
//! Buildings are axis-aligned boxes standing on the ground plane `z = 0`.
//! A straight link is blocked when it crosses one of the four vertical side
//! faces of any box. Roofs are never tested: a straight segment that enters
//! through a roof must leave through a side face unless it ends inside the
//! box, and points inside boxes are rejected when a scenario is loaded.

use std::cmp::Ordering;

use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("cuboid {id}: {reason}")]
    InvalidCuboid { id: String, reason: String },
    #[error("cuboid {id} lies outside the map bounds")]
    OutOfBounds { id: String },
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Scalar> Point3<S> {
    pub const fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    /// Finite coordinates and non-negative altitude.
    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.z >= S::zero()
    }

    pub fn distance(&self, other: &Self) -> S {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        let dz = other.z - self.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &Self, t: S) -> Self {
        let s = S::one() - t;
        Self::new(
            s * self.x + t * other.x,
            s * self.y + t * other.y,
            s * self.z + t * other.z,
        )
    }
}

/// Axis-aligned rectangle in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<S> {
    pub x_min: S,
    pub x_max: S,
    pub y_min: S,
    pub y_max: S,
}

impl<S: Scalar> Rect<S> {
    pub fn contains_rect(&self, other: &Rect<S>) -> bool {
        self.x_min <= other.x_min
            && other.x_max <= self.x_max
            && self.y_min <= other.y_min
            && other.y_max <= self.y_max
    }

    pub fn area(&self) -> S {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

/// A building: rectangular footprint extruded from the ground to `height`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cuboid<S> {
    pub id: String,
    pub x_min: S,
    pub x_max: S,
    pub y_min: S,
    pub y_max: S,
    pub height: S,
}

impl<S: Scalar> Cuboid<S> {
    pub fn new(
        id: impl Into<String>,
        x_min: S,
        x_max: S,
        y_min: S,
        y_max: S,
        height: S,
    ) -> Result<Self, GeometryError> {
        let id = id.into();
        let all = [x_min, x_max, y_min, y_max, height];
        let reason = if all.iter().any(|v| !v.is_finite()) {
            Some("coordinates must be finite")
        } else if !(x_min < x_max) {
            Some("x_min must be < x_max")
        } else if !(y_min < y_max) {
            Some("y_min must be < y_max")
        } else if !(height > S::zero()) {
            Some("height must be > 0")
        } else {
            None
        };
        match reason {
            Some(r) => Err(GeometryError::InvalidCuboid {
                id,
                reason: r.to_string(),
            }),
            None => Ok(Self {
                id,
                x_min,
                x_max,
                y_min,
                y_max,
                height,
            }),
        }
    }

    /// The four roof corners, counter-clockwise from `(x_min, y_min)`.
    pub fn upper_vertices(&self) -> [Point3<S>; 4] {
        let h = self.height;
        [
            Point3::new(self.x_min, self.y_min, h),
            Point3::new(self.x_max, self.y_min, h),
            Point3::new(self.x_max, self.y_max, h),
            Point3::new(self.x_min, self.y_max, h),
        ]
    }

    pub fn footprint(&self) -> Rect<S> {
        Rect {
            x_min: self.x_min,
            x_max: self.x_max,
            y_min: self.y_min,
            y_max: self.y_max,
        }
    }

    /// Strict interior test: boundary points are outside.
    pub fn contains_point(&self, p: &Point3<S>) -> bool {
        self.x_min < p.x
            && p.x < self.x_max
            && self.y_min < p.y
            && p.y < self.y_max
            && S::zero() < p.z
            && p.z < self.height
    }
}

/// Immutable collection of building cuboids with its ground-plane bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleMap<S> {
    cuboids: Vec<Cuboid<S>>,
    bounds: Rect<S>,
}

impl<S: Scalar> ObstacleMap<S> {
    pub fn new(cuboids: Vec<Cuboid<S>>, bounds: Rect<S>) -> Result<Self, GeometryError> {
        if !(bounds.x_min <= bounds.x_max && bounds.y_min <= bounds.y_max) {
            return Err(GeometryError::InvalidBounds(
                "min must not exceed max".to_string(),
            ));
        }
        if let Some(c) = cuboids.iter().find(|c| !bounds.contains_rect(&c.footprint())) {
            return Err(GeometryError::OutOfBounds { id: c.id.clone() });
        }
        Ok(Self { cuboids, bounds })
    }

    /// Map whose bounds are the bounding rectangle of the cuboids.
    pub fn from_cuboids(cuboids: Vec<Cuboid<S>>) -> Self {
        let bounds = bounding_rect(&cuboids);
        Self { cuboids, bounds }
    }

    pub fn empty() -> Self {
        Self::from_cuboids(Vec::new())
    }

    pub fn cuboids(&self) -> &[Cuboid<S>] {
        &self.cuboids
    }

    pub fn bounds(&self) -> Rect<S> {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.cuboids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuboids.is_empty()
    }

    /// First cuboid whose open interior contains `p`.
    pub fn containing(&self, p: &Point3<S>) -> Option<&Cuboid<S>> {
        self.cuboids.iter().find(|c| c.contains_point(p))
    }

    /// Copy of this map with one more cuboid, bounds grown to fit.
    pub fn with_cuboid(&self, c: Cuboid<S>) -> Self {
        let mut cuboids = self.cuboids.clone();
        let fp = c.footprint();
        cuboids.push(c);
        let b = if self.cuboids.is_empty() {
            fp
        } else {
            Rect {
                x_min: self.bounds.x_min.min(fp.x_min),
                x_max: self.bounds.x_max.max(fp.x_max),
                y_min: self.bounds.y_min.min(fp.y_min),
                y_max: self.bounds.y_max.max(fp.y_max),
            }
        };
        Self { cuboids, bounds: b }
    }
}

fn bounding_rect<S: Scalar>(cuboids: &[Cuboid<S>]) -> Rect<S> {
    let mut it = cuboids.iter();
    let Some(first) = it.next() else {
        return Rect {
            x_min: S::zero(),
            x_max: S::zero(),
            y_min: S::zero(),
            y_max: S::zero(),
        };
    };
    it.fold(first.footprint(), |r, c| Rect {
        x_min: r.x_min.min(c.x_min),
        x_max: r.x_max.max(c.x_max),
        y_min: r.y_min.min(c.y_min),
        y_max: r.y_max.max(c.y_max),
    })
}

/// Line-of-sight status between two points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Los {
    Clear,
    Blocked,
}

impl Los {
    pub fn is_clear(self) -> bool {
        self == Los::Clear
    }

    /// 1 for clear, 0 for blocked.
    pub fn flag(self) -> u8 {
        match self {
            Los::Clear => 1,
            Los::Blocked => 0,
        }
    }
}

/// Crossing of one side-face plane: the segment parameter where it hits
/// `coord = plane`, or `None` when the segment is parallel to that plane.
#[inline]
fn plane_parameter<S: Scalar>(from: S, to: S, plane: S) -> Option<S> {
    let denom = to - from;
    if denom == S::zero() {
        None
    } else {
        Some((plane - from) / denom)
    }
}

/// True when segment `a`–`b` crosses one of the four side faces of `c`.
///
/// Face rectangles and the segment parameter range `[0, 1]` are closed, so
/// grazing contact counts as an intersection. Segments parallel to a face
/// plane never hit that face.
pub fn intersects_cuboid<S: Scalar>(a: &Point3<S>, b: &Point3<S>, c: &Cuboid<S>) -> bool {
    let zero = S::zero();
    let one = S::one();
    // Constant-y faces (xz-plane).
    for plane in [c.y_min, c.y_max] {
        if let Some(t) = plane_parameter(a.y, b.y, plane) {
            if zero <= t && t <= one {
                let x = (one - t) * a.x + t * b.x;
                let z = (one - t) * a.z + t * b.z;
                if c.x_min <= x && x <= c.x_max && zero <= z && z <= c.height {
                    return true;
                }
            }
        }
    }
    // Constant-x faces (yz-plane).
    for plane in [c.x_min, c.x_max] {
        if let Some(t) = plane_parameter(a.x, b.x, plane) {
            if zero <= t && t <= one {
                let y = (one - t) * a.y + t * b.y;
                let z = (one - t) * a.z + t * b.z;
                if c.y_min <= y && y <= c.y_max && zero <= z && z <= c.height {
                    return true;
                }
            }
        }
    }
    false
}

pub fn check_los<S: Scalar>(uav: &Point3<S>, user: &Point3<S>, map: &ObstacleMap<S>) -> Los {
    if map.cuboids.iter().any(|c| intersects_cuboid(uav, user, c)) {
        Los::Blocked
    } else {
        Los::Clear
    }
}

#[derive(Debug, Clone)]
struct Piece<S> {
    rect: Rect<S>,
    h_min: S,
    h_max: S,
    id: String,
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

/// Merges face-adjacent cuboids whose union is exactly a rectangle and whose
/// heights all lie within `height_tol` of each other.
///
/// Sweeps alternate between x-adjacency (shared full edge of constant x) and
/// y-adjacency until nothing changes. A merged box takes the maximum height of
/// its constituents, so the blocked region only grows.
pub fn merge_cuboids<S: Scalar>(map: &ObstacleMap<S>, height_tol: S) -> ObstacleMap<S> {
    let mut pieces: Vec<Piece<S>> = map
        .cuboids
        .iter()
        .map(|c| Piece {
            rect: c.footprint(),
            h_min: c.height,
            h_max: c.height,
            id: c.id.clone(),
        })
        .collect();

    loop {
        let before = pieces.len();
        pieces = merge_pass(pieces, Axis::X, height_tol);
        pieces = merge_pass(pieces, Axis::Y, height_tol);
        if pieces.len() == before {
            break;
        }
    }

    pieces.sort_by(|a, b| {
        a.rect
            .x_min
            .partial_cmp(&b.rect.x_min)
            .unwrap_or(Ordering::Equal)
            .then(a.rect.y_min.partial_cmp(&b.rect.y_min).unwrap_or(Ordering::Equal))
    });
    let cuboids = pieces
        .into_iter()
        .map(|p| Cuboid {
            id: p.id,
            x_min: p.rect.x_min,
            x_max: p.rect.x_max,
            y_min: p.rect.y_min,
            y_max: p.rect.y_max,
            height: p.h_max,
        })
        .collect();
    ObstacleMap {
        cuboids,
        bounds: map.bounds,
    }
}

fn cmp<S: Scalar>(a: S, b: S) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// One sweep along `axis`: pieces sharing the same cross-axis span are
/// sorted along the axis and chained while they abut exactly.
fn merge_pass<S: Scalar>(mut pieces: Vec<Piece<S>>, axis: Axis, tol: S) -> Vec<Piece<S>> {
    // (span_lo, span_hi, along_lo, along_hi)
    let key = |p: &Piece<S>| match axis {
        Axis::X => (p.rect.y_min, p.rect.y_max, p.rect.x_min, p.rect.x_max),
        Axis::Y => (p.rect.x_min, p.rect.x_max, p.rect.y_min, p.rect.y_max),
    };
    pieces.sort_by(|a, b| {
        let (a0, a1, a2, _) = key(a);
        let (b0, b1, b2, _) = key(b);
        cmp(a0, b0).then(cmp(a1, b1)).then(cmp(a2, b2))
    });

    let mut out: Vec<Piece<S>> = Vec::with_capacity(pieces.len());
    for p in pieces {
        if let Some(last) = out.last_mut() {
            let (l0, l1, _, l_hi) = key(last);
            let (p0, p1, p_lo, _) = key(&p);
            let h_min = last.h_min.min(p.h_min);
            let h_max = last.h_max.max(p.h_max);
            if l0 == p0 && l1 == p1 && l_hi == p_lo && h_max - h_min <= tol {
                match axis {
                    Axis::X => last.rect.x_max = p.rect.x_max,
                    Axis::Y => last.rect.y_max = p.rect.y_max,
                }
                last.h_min = h_min;
                last.h_max = h_max;
                continue;
            }
        }
        out.push(p);
    }
    out
}
