//! Service-area grids: which lattice points at the flight altitude can serve
//! a given user.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{ObstacleMap, Point3};
use crate::link::{max_service_distance, validate_with_range, LinkBudget, User};
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum CoverageError {
    #[error("invalid grid: {0}")]
    InvalidSpec(String),
    #[error("cell ({m_x}, {m_y}) outside a {dim_x} x {dim_y} grid")]
    OutOfRange {
        m_x: usize,
        m_y: usize,
        dim_x: usize,
        dim_y: usize,
    },
}

/// Lattice index `(m_x, m_y)` into a grid.
pub type CellIndex = (usize, usize);

/// Horizontal lattice at a fixed flight altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<S> {
    pub x_min: S,
    pub x_max: S,
    pub y_min: S,
    pub y_max: S,
    pub dx: S,
    pub dy: S,
    pub altitude: S,
}

impl<S: Scalar> GridSpec<S> {
    pub fn new(x_min: S, x_max: S, y_min: S, y_max: S, dx: S, dy: S, altitude: S) -> Result<Self, CoverageError> {
        let spec = Self {
            x_min,
            x_max,
            y_min,
            y_max,
            dx,
            dy,
            altitude,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CoverageError> {
        let vals = [self.x_min, self.x_max, self.y_min, self.y_max, self.dx, self.dy, self.altitude];
        let bad = if vals.iter().any(|v| !v.is_finite()) {
            Some("values must be finite")
        } else if !(self.x_min < self.x_max) {
            Some("x_min must be < x_max")
        } else if !(self.y_min < self.y_max) {
            Some("y_min must be < y_max")
        } else if !(self.dx > S::zero() && self.dy > S::zero()) {
            Some("dx and dy must be > 0")
        } else if !(self.altitude > S::zero()) {
            Some("altitude must be > 0")
        } else {
            None
        };
        match bad {
            Some(m) => Err(CoverageError::InvalidSpec(m.to_string())),
            None => Ok(()),
        }
    }

    /// Same bounds and altitude at a new resolution.
    pub fn with_resolution(&self, dx: S, dy: S) -> Self {
        Self { dx, dy, ..*self }
    }
}

/// Relative slack absorbing representation error in `(max - min) / step`,
/// so that e.g. a 0.3 m range at 0.1 m steps yields 4 points, not 3.
const FLOOR_SLACK: f64 = 1e-9;

fn lattice_count<S: Scalar>(lo: S, hi: S, step: S) -> usize {
    let ratio = ((hi - lo) / step).as_f64();
    (ratio * (1.0 + FLOOR_SLACK)).floor() as usize + 1
}

/// `(M_x, M_y)` with `M = floor((max - min) / step) + 1`.
pub fn grid_dimensions<S: Scalar>(spec: &GridSpec<S>) -> (usize, usize) {
    (
        lattice_count(spec.x_min, spec.x_max, spec.dx),
        lattice_count(spec.y_min, spec.y_max, spec.dy),
    )
}

/// Lattice point `(x_min + m_x dx, y_min + m_y dy, altitude)`.
pub fn cell_center<S: Scalar>(spec: &GridSpec<S>, m_x: usize, m_y: usize) -> Result<Point3<S>, CoverageError> {
    let (dim_x, dim_y) = grid_dimensions(spec);
    if m_x >= dim_x || m_y >= dim_y {
        return Err(CoverageError::OutOfRange { m_x, m_y, dim_x, dim_y });
    }
    Ok(lattice_point(spec, m_x, m_y))
}

#[inline]
pub(crate) fn lattice_point<S: Scalar>(spec: &GridSpec<S>, m_x: usize, m_y: usize) -> Point3<S> {
    Point3::new(
        spec.x_min + S::of_usize(m_x) * spec.dx,
        spec.y_min + S::of_usize(m_y) * spec.dy,
        spec.altitude,
    )
}

/// Binary service-area matrix for one user.
///
/// Cells are stored row-major with `m_x` as the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceAreaGrid<S> {
    pub spec: GridSpec<S>,
    pub user_id: String,
    dims: (usize, usize),
    cells: Vec<bool>,
}

impl<S: Scalar> ServiceAreaGrid<S> {
    /// Wraps a precomputed matrix; `cells.len()` must equal `M_x * M_y`.
    pub fn from_cells(spec: GridSpec<S>, user_id: impl Into<String>, cells: Vec<bool>) -> Result<Self, CoverageError> {
        let dims = grid_dimensions(&spec);
        if cells.len() != dims.0 * dims.1 {
            return Err(CoverageError::InvalidSpec(format!(
                "expected {} cells, got {}",
                dims.0 * dims.1,
                cells.len()
            )));
        }
        Ok(Self {
            spec,
            user_id: user_id.into(),
            dims,
            cells,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn get(&self, m_x: usize, m_y: usize) -> bool {
        m_x < self.dims.0 && m_y < self.dims.1 && self.cells[m_x * self.dims.1 + m_y]
    }

    pub fn is_valid_cell(&self, cell: CellIndex) -> bool {
        self.get(cell.0, cell.1)
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count_valid(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// All 1-cells in storage order.
    pub fn valid_cells(&self) -> Vec<CellIndex> {
        let my = self.dims.1;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(k, _)| (k / my, k % my))
            .collect()
    }

    pub fn point(&self, cell: CellIndex) -> Point3<S> {
        lattice_point(&self.spec, cell.0, cell.1)
    }
}

/// Evaluates every lattice point of `spec` against the user's QoS and LoS
/// requirements.
pub fn service_area<S: Scalar>(
    user: &User<S>,
    map: &ObstacleMap<S>,
    budget: &LinkBudget<S>,
    spec: &GridSpec<S>,
) -> ServiceAreaGrid<S> {
    let (mx, my) = grid_dimensions(spec);
    let d_max = max_service_distance(user.weight, budget);
    let cells: Vec<bool> = (0..mx)
        .into_par_iter()
        .flat_map_iter(|m_x| {
            (0..my).map(move |m_y| {
                let uav = lattice_point(spec, m_x, m_y);
                validate_with_range(&uav, &user.position, d_max, map).is_valid()
            })
        })
        .collect();
    ServiceAreaGrid {
        spec: *spec,
        user_id: user.id.clone(),
        dims: (mx, my),
        cells,
    }
}
