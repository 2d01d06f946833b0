//! BER link model and single-point QoS validation.
//!
//! BER at distance `d` is `Q(sqrt(K) / d)` where `K = 2 c1 Pt / N0` is an
//! aggregate link constant. `K` is never given directly: it is calibrated so
//! that the BER at `d_ref` equals the loose (w = 0) threshold, which gives
//! `sqrt(K) = Q^-1(ber_loose) * d_ref`.

use thiserror::Error;

use crate::geometry::{check_los, ObstacleMap, Point3};
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("probability {0} outside the open interval (0, 0.5)")]
    Domain(f64),
    #[error("invalid link budget: {0}")]
    Budget(String),
    #[error("user {id}: weight {weight} must lie in (0, 1]")]
    Weight { id: String, weight: f64 },
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function<S: Scalar>(x: S) -> S {
    S::lit(q_f64(x.as_f64()))
}

#[inline]
fn q_f64(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Inverse of [`q_function`] on `(0, 0.5)`.
///
/// Newton iteration on `Q` with a bisection fallback; the bracket is kept
/// throughout so the result is accurate to about 1e-13 in `x`.
pub fn q_inverse<S: Scalar>(p: S) -> Result<S, LinkError> {
    let pf = p.as_f64();
    if !(pf > 0.0 && pf < 0.5) {
        return Err(LinkError::Domain(pf));
    }
    Ok(S::lit(q_inverse_f64(pf)))
}

fn q_inverse_f64(p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
    // Q is decreasing: Q(lo) > p > Q(hi).
    let mut x = 1.0;
    for _ in 0..200 {
        let fx = q_f64(x) - p;
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut next = x + fx / density;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1.0) || hi - lo <= 1e-15 {
            return next;
        }
        x = next;
    }
    x
}

/// BER thresholds and distance calibration.
///
/// `ber_loose` applies at priority weight 0 and `ber_strict` at weight 1.
/// `d_ref` is the distance at which the BER equals `ber_loose`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget<S> {
    pub ber_loose: S,
    pub ber_strict: S,
    pub d_ref: S,
}

impl<S: Scalar> LinkBudget<S> {
    pub fn new(ber_loose: S, ber_strict: S, d_ref: S) -> Result<Self, LinkError> {
        let half = S::lit(0.5);
        if !(S::zero() < ber_strict && ber_strict < ber_loose && ber_loose < half) {
            return Err(LinkError::Budget(format!(
                "need 0 < ber_strict ({ber_strict}) < ber_loose ({ber_loose}) < 0.5"
            )));
        }
        if !(d_ref > S::zero() && d_ref.is_finite()) {
            return Err(LinkError::Budget(format!("d_ref ({d_ref}) must be > 0")));
        }
        Ok(Self {
            ber_loose,
            ber_strict,
            d_ref,
        })
    }

    /// Thresholds 1e-3 / 1e-6 with a 500 m calibration distance.
    pub fn default_budget() -> Self {
        Self {
            ber_loose: S::lit(1e-3),
            ber_strict: S::lit(1e-6),
            d_ref: S::lit(500.0),
        }
    }

    /// `sqrt(2 c1 Pt / N0)`, the calibrated link constant.
    pub fn link_constant(&self) -> S {
        q_inverse(self.ber_loose).expect("validated budget") * self.d_ref
    }

    /// BER predicted at distance `d` by the calibrated model.
    pub fn ber_at_distance(&self, d: S) -> S {
        q_function(self.link_constant() / d)
    }
}

/// Required BER for priority `w`, log-linear between the two thresholds.
pub fn ber_threshold<S: Scalar>(w: S, budget: &LinkBudget<S>) -> S {
    ((S::one() - w) * budget.ber_loose.ln() + w * budget.ber_strict.ln()).exp()
}

/// Largest UAV-user distance meeting [`ber_threshold`] for weight `w`.
pub fn max_service_distance<S: Scalar>(w: S, budget: &LinkBudget<S>) -> S {
    if w == S::zero() {
        return budget.d_ref;
    }
    let loose = q_inverse(budget.ber_loose).expect("validated budget");
    let req = q_inverse(ber_threshold(w, budget)).expect("threshold inside (0, 0.5)");
    budget.d_ref * loose / req
}

/// A ground user to be served.
#[derive(Debug, Clone, PartialEq)]
pub struct User<S> {
    pub id: String,
    pub position: Point3<S>,
    pub weight: S,
}

impl<S: Scalar> User<S> {
    pub fn new(id: impl Into<String>, position: Point3<S>, weight: S) -> Result<Self, LinkError> {
        let id = id.into();
        if !(weight > S::zero() && weight <= S::one()) {
            return Err(LinkError::Weight {
                id,
                weight: weight.as_f64(),
            });
        }
        Ok(Self {
            id,
            position,
            weight,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid,
}

impl Validity {
    pub fn is_valid(self) -> bool {
        self == Validity::Valid
    }
}

pub fn validate_service_point<S: Scalar>(
    uav: &Point3<S>,
    user: &User<S>,
    map: &ObstacleMap<S>,
    budget: &LinkBudget<S>,
) -> Validity {
    let d_max = max_service_distance(user.weight, budget);
    validate_with_range(uav, &user.position, d_max, map)
}

/// Distance-then-LoS check with a precomputed service range.
pub(crate) fn validate_with_range<S: Scalar>(
    uav: &Point3<S>,
    user: &Point3<S>,
    d_max: S,
    map: &ObstacleMap<S>,
) -> Validity {
    if uav.distance(user) <= d_max && check_los(uav, user, map).is_clear() {
        Validity::Valid
    } else {
        Validity::Invalid
    }
}
