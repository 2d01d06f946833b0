//! Planning engine for UAV service trajectories over a cuboid city model.
//!
//! The pipeline runs bottom-up:
//!
//! - [`geometry`]: axis-aligned building cuboids, segment/side-face
//!   intersection and the line-of-sight test, obstacle-map merging.
//! - [`link`]: Gaussian-tail BER model, priority-interpolated thresholds and
//!   the maximum service distance they imply.
//! - [`coverage`]: per-user binary service-area grids at a fixed altitude.
//! - [`routing`]: weighted-latency tour optimization plus the random-restart
//!   and exclusion/reintegration heuristics.
//! - [`ga`]: genetic-algorithm solver over (visit order, service cell).
//! - [`scenario_io`]: JSON scenarios and reports, CSV rasters, GeoJSON export,
//!   footprint conversion.
//! - [`cli`]: the `uav-planner` command line.
//! - [`oracle`]: slow brute-force references used by the test suites.
//!
//! Core math is generic over [`Scalar`] (`f32` or `f64`). The aliases at the
//! crate root fix the scalar to `f64`, which is what the I/O layer uses.

pub mod cli;
pub mod coverage;
pub mod fixtures;
pub mod ga;
pub mod geometry;
pub mod link;
pub mod oracle;
pub mod rng;
pub mod routing;
pub mod scalar;
pub mod scenario_io;

pub use scalar::Scalar;

pub type Point3 = geometry::Point3<f64>;
pub type Cuboid = geometry::Cuboid<f64>;
pub type ObstacleMap = geometry::ObstacleMap<f64>;
pub type LinkBudget = link::LinkBudget<f64>;
pub type User = link::User<f64>;
pub type GridSpec = coverage::GridSpec<f64>;
pub type ServiceAreaGrid = coverage::ServiceAreaGrid<f64>;
pub type MissionSpec = routing::MissionSpec<f64>;
pub type Tour = routing::Tour<f64>;
pub type Problem<'a> = routing::Problem<'a, f64>;
pub type GaConfig = ga::GaConfig<f64>;
