//! Scenario and report files.
//!
//! Scenarios are versioned JSON documents (see `docs/scenario-format.md`).
//! Loading is strict: unknown fields are rejected and every invariant is
//! checked, with diagnostics naming the offending field. Reports, rasters
//! and GeoJSON exports are written deterministically, so equal inputs give
//! byte-identical files.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::coverage::{GridSpec, ServiceAreaGrid};
use crate::ga::GaConfig;
use crate::geometry::{merge_cuboids, Cuboid, ObstacleMap, Point3, Rect};
use crate::link::{ber_threshold, validate_service_point, LinkBudget, User};
use crate::routing::{t_max_from_energy, MissionSpec, Tour};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {field}: {constraint}")]
    Validation { field: String, constraint: String },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

fn invalid(field: impl Into<String>, constraint: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        constraint: constraint.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ScenarioError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn read_file(path: &Path) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// Scenario document

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDoc {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectDoc {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleDoc {
    pub id: String,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserDoc {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub ber_loose: f64,
    pub ber_strict: f64,
    pub d_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub dx: f64,
    pub dy: f64,
    pub altitude: f64,
}

/// Either `t_max` or the pair `e_max`/`p_uav` sets the flight limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionDoc {
    pub i_w: f64,
    pub v_uav: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_uav: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationsDoc {
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaDoc {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub lambda: f64,
    pub mu: f64,
    #[serde(default)]
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolversDoc {
    pub heuristic: IterationsDoc,
    pub advanced: IterationsDoc,
    pub ga: GaDoc,
}

impl Default for SolversDoc {
    fn default() -> Self {
        SolverConfigs::default().to_doc()
    }
}

/// On-disk scenario layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<RectDoc>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleDoc>,
    pub users: Vec<UserDoc>,
    pub station: PointDoc,
    pub link: LinkDoc,
    pub grid: GridDoc,
    pub mission: MissionDoc,
    #[serde(default)]
    pub solvers: SolversDoc,
}

/// Per-solver settings carried by a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfigs {
    pub heuristic_iterations: usize,
    pub advanced_iterations: usize,
    pub ga: GaConfig<f64>,
}

impl Default for SolverConfigs {
    fn default() -> Self {
        Self {
            heuristic_iterations: 200,
            advanced_iterations: 200,
            ga: GaConfig::default(),
        }
    }
}

impl SolverConfigs {
    fn to_doc(self) -> SolversDoc {
        SolversDoc {
            heuristic: IterationsDoc {
                iterations: self.heuristic_iterations,
            },
            advanced: IterationsDoc {
                iterations: self.advanced_iterations,
            },
            ga: GaDoc {
                population: self.ga.population,
                generations: self.ga.generations,
                crossover_rate: self.ga.crossover_rate,
                mutation_rate: self.ga.mutation_rate,
                lambda: self.ga.lambda,
                mu: self.ga.mu,
                gamma: self.ga.gamma,
            },
        }
    }
}

/// A validated planning scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub description: Option<String>,
    /// Master seed for every stochastic component.
    pub seed: u64,
    pub map: ObstacleMap<f64>,
    pub budget: LinkBudget<f64>,
    pub grid: GridSpec<f64>,
    /// Station, users, `I_w`, `T_max` and `v_uav`.
    pub mission: MissionSpec<f64>,
    pub solvers: SolverConfigs,
}

impl Scenario {
    pub fn users(&self) -> &[User<f64>] {
        &self.mission.users
    }

    pub fn station(&self) -> Point3<f64> {
        self.mission.station
    }

    pub fn from_doc(doc: ScenarioDoc) -> Result<Self, ScenarioError> {
        if doc.version != SCHEMA_VERSION {
            return Err(invalid("version", format!("must be {SCHEMA_VERSION}, got {}", doc.version)));
        }

        let mut cuboids = Vec::with_capacity(doc.obstacles.len());
        let mut ids = HashSet::new();
        for (k, o) in doc.obstacles.iter().enumerate() {
            let field = format!("obstacles[{k}]");
            if !ids.insert(o.id.as_str()) {
                return Err(invalid(format!("{field}.id"), format!("duplicate id \"{}\"", o.id)));
            }
            let c = Cuboid::new(o.id.clone(), o.x_min, o.x_max, o.y_min, o.y_max, o.height).map_err(|e| invalid(&field, e.to_string()))?;
            cuboids.push(c);
        }
        let map = match &doc.bounds {
            Some(b) => ObstacleMap::new(
                cuboids,
                Rect {
                    x_min: b.x_min,
                    x_max: b.x_max,
                    y_min: b.y_min,
                    y_max: b.y_max,
                },
            )
            .map_err(|e| invalid("bounds", e.to_string()))?,
            None => ObstacleMap::from_cuboids(cuboids),
        };

        let budget = LinkBudget::new(doc.link.ber_loose, doc.link.ber_strict, doc.link.d_ref).map_err(|e| invalid("link", e.to_string()))?;
        let g = &doc.grid;
        let grid = GridSpec::new(g.x_min, g.x_max, g.y_min, g.y_max, g.dx, g.dy, g.altitude).map_err(|e| invalid("grid", e.to_string()))?;

        if doc.users.is_empty() {
            return Err(invalid("users", "at least one user is required"));
        }
        let mut users = Vec::with_capacity(doc.users.len());
        let mut ids = HashSet::new();
        for (k, u) in doc.users.iter().enumerate() {
            let field = format!("users[{k}]");
            if !ids.insert(u.id.as_str()) {
                return Err(invalid(format!("{field}.id"), format!("duplicate id \"{}\"", u.id)));
            }
            let p = Point3::new(u.x, u.y, u.z);
            if !p.is_valid() {
                return Err(invalid(&field, "coordinates must be finite"));
            }
            if let Some(c) = map.containing(&p) {
                return Err(invalid(&field, format!("user \"{}\" lies inside cuboid \"{}\"", u.id, c.id)));
            }
            users.push(User::new(u.id.clone(), p, u.weight).map_err(|e| invalid(format!("{field}.weight"), e.to_string()))?);
        }

        let s = &doc.station;
        let station = Point3::new(s.x, s.y, s.z);
        if !station.is_valid() {
            return Err(invalid("station", "coordinates must be finite"));
        }
        if let Some(c) = map.containing(&station) {
            return Err(invalid("station", format!("lies inside cuboid \"{}\"", c.id)));
        }
        if station.z > grid.altitude {
            return Err(invalid(
                "station.z",
                format!("({}) must not exceed grid.altitude ({})", station.z, grid.altitude),
            ));
        }

        let m = &doc.mission;
        let t_max = match (m.t_max, m.e_max, m.p_uav) {
            (Some(t), None, None) => t,
            (None, Some(e), Some(p)) => {
                if !(e > 0.0 && p > 0.0) {
                    return Err(invalid("mission", "e_max and p_uav must be > 0"));
                }
                t_max_from_energy(e, p)
            }
            _ => return Err(invalid("mission", "give either t_max or both e_max and p_uav")),
        };
        let mission = MissionSpec::new(station, users, m.i_w, t_max, m.v_uav).map_err(|e| invalid("mission", e.to_string()))?;

        let sd = &doc.solvers;
        let solvers = SolverConfigs {
            heuristic_iterations: sd.heuristic.iterations,
            advanced_iterations: sd.advanced.iterations,
            ga: GaConfig {
                population: sd.ga.population,
                generations: sd.ga.generations,
                crossover_rate: sd.ga.crossover_rate,
                mutation_rate: sd.ga.mutation_rate,
                lambda: sd.ga.lambda,
                mu: sd.ga.mu,
                gamma: sd.ga.gamma,
                seed: doc.seed,
            },
        };
        if solvers.heuristic_iterations == 0 {
            return Err(invalid("solvers.heuristic.iterations", "must be >= 1"));
        }
        if solvers.advanced_iterations == 0 {
            return Err(invalid("solvers.advanced.iterations", "must be >= 1"));
        }
        solvers.ga.validate().map_err(|e| invalid("solvers.ga", e.to_string()))?;

        Ok(Self {
            description: doc.description,
            seed: doc.seed,
            map,
            budget,
            grid,
            mission,
            solvers,
        })
    }

    pub fn to_doc(&self) -> ScenarioDoc {
        let b = self.map.bounds();
        let g = &self.grid;
        ScenarioDoc {
            version: SCHEMA_VERSION,
            description: self.description.clone(),
            seed: self.seed,
            bounds: Some(RectDoc {
                x_min: b.x_min,
                x_max: b.x_max,
                y_min: b.y_min,
                y_max: b.y_max,
            }),
            obstacles: self.map.cuboids().iter().map(obstacle_doc).collect(),
            users: self
                .users()
                .iter()
                .map(|u| UserDoc {
                    id: u.id.clone(),
                    x: u.position.x,
                    y: u.position.y,
                    z: u.position.z,
                    weight: u.weight,
                })
                .collect(),
            station: point_doc(&self.station()),
            link: LinkDoc {
                ber_loose: self.budget.ber_loose,
                ber_strict: self.budget.ber_strict,
                d_ref: self.budget.d_ref,
            },
            grid: GridDoc {
                x_min: g.x_min,
                x_max: g.x_max,
                y_min: g.y_min,
                y_max: g.y_max,
                dx: g.dx,
                dy: g.dy,
                altitude: g.altitude,
            },
            mission: MissionDoc {
                i_w: self.mission.i_w,
                v_uav: self.mission.v_uav,
                t_max: Some(self.mission.t_max),
                e_max: None,
                p_uav: None,
            },
            solvers: self.solvers.to_doc(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_doc()).expect("scenario serializes");
        s.push('\n');
        s
    }
}

fn point_doc(p: &Point3<f64>) -> PointDoc {
    PointDoc { x: p.x, y: p.y, z: p.z }
}

fn obstacle_doc(c: &Cuboid<f64>) -> ObstacleDoc {
    ObstacleDoc {
        id: c.id.clone(),
        x_min: c.x_min,
        x_max: c.x_max,
        y_min: c.y_min,
        y_max: c.y_max,
        height: c.height,
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    Scenario::from_doc(doc)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    parse_scenario(&read_file(path)?).map_err(|e| match e {
        ScenarioError::Parse(m) => ScenarioError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    write_file(path.as_ref(), &scenario.to_json())
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub name: String,
    pub seed: u64,
    pub iterations: usize,
    /// Omitted unless timing was requested; it would break byte-identical
    /// reruns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: String,
    pub weight: f64,
    pub arrival_time: Option<f64>,
    pub service_point: [f64; 3],
    pub cell: Option<[usize; 2]>,
    pub ber_threshold: f64,
    pub threshold_met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compliance {
    /// Pairs with `w_i > w_j` where `i` is served first.
    pub ordered_pairs: usize,
    pub total_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub version: u32,
    pub solver: SolverMeta,
    pub i_w: f64,
    pub t_max: f64,
    pub station: [f64; 3],
    /// User ids in visiting order.
    pub order: Vec<String>,
    pub end_time: f64,
    pub objective: f64,
    pub feasible: bool,
    pub exact: bool,
    pub users: Vec<UserRecord>,
    pub compliance: Compliance,
    /// Best feasible objective after each iteration or generation; `None`
    /// until one is found.
    #[serde(default)]
    pub convergence: Vec<Option<f64>>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl TrajectoryReport {
    pub fn from_tour(scenario: &Scenario, tour: &Tour<f64>, solver: SolverMeta, trace: &[f64]) -> Self {
        let users = scenario.users();
        let records = users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let p = tour.service_points[i];
                let visited = !tour.arrival_times[i].is_nan();
                UserRecord {
                    id: u.id.clone(),
                    weight: u.weight,
                    arrival_time: finite(tour.arrival_times[i]),
                    service_point: [p.x, p.y, p.z],
                    cell: tour.cells[i].map(|(a, b)| [a, b]),
                    ber_threshold: ber_threshold(u.weight, &scenario.budget),
                    threshold_met: visited && validate_service_point(&p, u, &scenario.map, &scenario.budget).is_valid(),
                }
            })
            .collect();
        let (ordered_pairs, total_pairs) = tour.priority_compliance(users);
        let s = scenario.station();
        Self {
            version: SCHEMA_VERSION,
            solver,
            i_w: scenario.mission.i_w,
            t_max: scenario.mission.t_max,
            station: [s.x, s.y, s.z],
            order: tour.order.iter().map(|&i| users[i].id.clone()).collect(),
            end_time: tour.end_time,
            objective: tour.objective,
            feasible: tour.feasible,
            exact: tour.exact,
            users: records,
            compliance: Compliance {
                ordered_pairs,
                total_pairs,
            },
            convergence: trace.iter().map(|&v| finite(v)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn save_report(report: &TrajectoryReport, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    write_file(path.as_ref(), &report.to_json())
}

pub fn load_report(path: impl AsRef<Path>) -> Result<TrajectoryReport, ScenarioError> {
    let path = path.as_ref();
    serde_json::from_str(&read_file(path)?).map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Rasters

/// CSV raster: `M_y` rows (row index = `m_y`) of `M_x` comma-separated 0/1
/// values.
pub fn grid_to_csv(grid: &ServiceAreaGrid<f64>) -> String {
    let (mx, my) = grid.dims();
    let mut out = String::with_capacity(mx * my * 2);
    for y in 0..my {
        for x in 0..mx {
            if x > 0 {
                out.push(',');
            }
            out.push(if grid.get(x, y) { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

pub fn export_grid(grid: &ServiceAreaGrid<f64>, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    write_file(path.as_ref(), &grid_to_csv(grid))
}

/// Reads a raster written by [`export_grid`] back into a grid over `spec`.
pub fn load_grid(path: impl AsRef<Path>, spec: GridSpec<f64>, user_id: &str) -> Result<ServiceAreaGrid<f64>, ScenarioError> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let rows: Vec<Vec<bool>> = text
        .lines()
        .enumerate()
        .map(|(r, line)| {
            line.split(',')
                .map(|v| match v.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(ScenarioError::Row {
                        row: r + 1,
                        message: format!("expected 0 or 1, got \"{other}\""),
                    }),
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let (mx, my) = crate::coverage::grid_dimensions(&spec);
    if rows.len() != my {
        return Err(ScenarioError::Parse(format!("{}: expected {my} rows, got {}", path.display(), rows.len())));
    }
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != mx) {
        return Err(ScenarioError::Row {
            row: r + 1,
            message: format!("expected {mx} columns, got {}", row.len()),
        });
    }
    let mut cells = vec![false; mx * my];
    for (y, row) in rows.iter().enumerate() {
        for (x, &v) in row.iter().enumerate() {
            cells[x * my + y] = v;
        }
    }
    ServiceAreaGrid::from_cells(spec, user_id, cells).map_err(|e| ScenarioError::Parse(e.to_string()))
}

// ---------------------------------------------------------------------------
// GeoJSON

fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("geojson serializes");
    s.push('\n');
    s
}

/// Flown polyline plus one point feature per service point.
pub fn trajectory_geojson(scenario: &Scenario, tour: &Tour<f64>) -> String {
    let station = scenario.station();
    let line: Vec<Value> = tour.polyline(&station).iter().map(|p| json!([p.x, p.y, p.z])).collect();
    let mut features = vec![json!({
        "type": "Feature",
        "geometry": { "type": "LineString", "coordinates": line },
        "properties": { "kind": "trajectory", "end_time": finite(tour.end_time), "objective": finite(tour.objective) },
    })];
    for (rank, &i) in tour.order.iter().enumerate() {
        let p = tour.service_points[i];
        let u = &scenario.users()[i];
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Point", "coordinates": [p.x, p.y, p.z] },
            "properties": {
                "kind": "service_point",
                "user": u.id,
                "weight": u.weight,
                "visit": rank + 1,
                "arrival_time": finite(tour.arrival_times[i]),
            },
        }));
    }
    to_pretty(&json!({ "type": "FeatureCollection", "features": features }))
}

/// One square polygon per valid cell of each grid.
pub fn coverage_geojson(grids: &[ServiceAreaGrid<f64>]) -> String {
    let mut features = Vec::new();
    for g in grids {
        let (hx, hy) = (g.spec.dx / 2.0, g.spec.dy / 2.0);
        for cell in g.valid_cells() {
            let c = g.point(cell);
            let ring = json!([
                [c.x - hx, c.y - hy],
                [c.x + hx, c.y - hy],
                [c.x + hx, c.y + hy],
                [c.x - hx, c.y + hy],
                [c.x - hx, c.y - hy]
            ]);
            features.push(json!({
                "type": "Feature",
                "geometry": { "type": "Polygon", "coordinates": [ring] },
                "properties": { "user": g.user_id, "m_x": cell.0, "m_y": cell.1, "altitude": g.spec.altitude },
            }));
        }
    }
    to_pretty(&json!({ "type": "FeatureCollection", "features": features }))
}

// ---------------------------------------------------------------------------
// Footprint conversion

/// What to do with footprint rows that leave `height` empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeightRule {
    Require,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversion {
    pub map: ObstacleMap<f64>,
    pub before: usize,
    pub after: usize,
}

#[derive(Debug, Deserialize)]
struct FootprintRow {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    height: Option<f64>,
}

/// Parses footprint CSV text (`x_min,x_max,y_min,y_max,height`) into
/// cuboids and merges them at zero height tolerance. Rows are numbered from
/// 1, not counting the header.
pub fn convert_footprints_str(text: &str, rule: HeightRule) -> Result<Conversion, ScenarioError> {
    if text.trim().is_empty() {
        return Ok(Conversion {
            map: ObstacleMap::empty(),
            before: 0,
            after: 0,
        });
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut cuboids = Vec::new();
    for (k, rec) in reader.deserialize::<FootprintRow>().enumerate() {
        let row = k + 1;
        let r = rec.map_err(|e| ScenarioError::Row { row, message: e.to_string() })?;
        let height = match (r.height, rule) {
            (Some(h), _) => h,
            (None, HeightRule::Fixed(h)) => h,
            (None, HeightRule::Require) => {
                return Err(ScenarioError::Row {
                    row,
                    message: "missing height".to_string(),
                })
            }
        };
        let c = Cuboid::new(format!("f{row}"), r.x_min, r.x_max, r.y_min, r.y_max, height)
            .map_err(|e| ScenarioError::Row { row, message: e.to_string() })?;
        cuboids.push(c);
    }
    let before = cuboids.len();
    let map = merge_cuboids(&ObstacleMap::from_cuboids(cuboids), 0.0);
    let after = map.len();
    Ok(Conversion { map, before, after })
}

pub fn convert_footprints(path: impl AsRef<Path>, rule: HeightRule) -> Result<Conversion, ScenarioError> {
    convert_footprints_str(&read_file(path.as_ref())?, rule)
}

/// JSON document holding converted obstacles and the before/after counts.
pub fn conversion_json(conv: &Conversion) -> String {
    let b = conv.map.bounds();
    to_pretty(&json!({
        "footprints": conv.before,
        "cuboids": conv.after,
        "bounds": { "x_min": b.x_min, "x_max": b.x_max, "y_min": b.y_min, "y_max": b.y_max },
        "obstacles": conv.map.cuboids().iter().map(obstacle_doc).collect::<Vec<_>>(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::service_area;

    const MINIMAL: &str = r#"{
        "version": 1,
        "seed": 7,
        "users": [{ "id": "u1", "x": 50, "y": 50, "z": 1.5, "weight": 0.5 }],
        "station": { "x": 0, "y": 0, "z": 0 },
        "link": { "ber_loose": 1e-3, "ber_strict": 1e-6, "d_ref": 500 },
        "grid": { "x_min": 0, "x_max": 100, "y_min": 0, "y_max": 100, "dx": 10, "dy": 10, "altitude": 260 },
        "mission": { "i_w": 2, "t_max": 2100, "v_uav": 5 }
    }"#;

    fn with(patch: impl FnOnce(&mut Value)) -> String {
        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        patch(&mut v);
        v.to_string()
    }

    fn field_of(err: ScenarioError) -> String {
        match err {
            ScenarioError::Validation { field, .. } => field,
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn minimal_loads() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.users().len(), 1);
        assert!(s.map.is_empty());
        assert_eq!(s.mission.t_max, 2100.0);
        assert_eq!(s.solvers, SolverConfigs { ga: GaConfig { seed: 7, ..GaConfig::default() }, ..SolverConfigs::default() });
    }

    #[test]
    fn user_inside_building_is_named() {
        let text = with(|v| {
            v["obstacles"] = json!([{ "id": "tower", "x_min": 40, "x_max": 60, "y_min": 40, "y_max": 60, "height": 30 }]);
        });
        let err = parse_scenario(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("u1") && msg.contains("tower"), "{msg}");
    }

    #[test]
    fn each_violation_names_its_field() {
        let cases: Vec<(Box<dyn Fn(&mut Value)>, &str)> = vec![
            (Box::new(|v| v["version"] = json!(2)), "version"),
            (Box::new(|v| v["users"][0]["weight"] = json!(0.0)), "users[0].weight"),
            (Box::new(|v| v["users"] = json!([])), "users"),
            (Box::new(|v| v["station"]["z"] = json!(300.0)), "station.z"),
            (Box::new(|v| v["grid"]["dx"] = json!(-1.0)), "grid"),
            (Box::new(|v| v["link"]["ber_strict"] = json!(1e-2)), "link"),
            (Box::new(|v| v["mission"]["v_uav"] = json!(0.0)), "mission"),
            (Box::new(|v| v["mission"]["e_max"] = json!(10.0)), "mission"),
            (
                Box::new(|v| v["obstacles"] = json!([{ "id": "a", "x_min": 5, "x_max": 1, "y_min": 0, "y_max": 1, "height": 3 }])),
                "obstacles[0]",
            ),
            (
                Box::new(|v| {
                    v["users"] = json!([
                        { "id": "u", "x": 1, "y": 1, "z": 0, "weight": 0.5 },
                        { "id": "u", "x": 2, "y": 2, "z": 0, "weight": 0.5 }
                    ])
                }),
                "users[1].id",
            ),
        ];
        for (patch, field) in cases {
            let err = parse_scenario(&with(|v| patch(v))).unwrap_err();
            assert_eq!(field_of(err), field);
        }
        let err = parse_scenario(&with(|v| v["extra"] = json!(1))).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
    }

    #[test]
    fn energy_form_sets_t_max() {
        let text = with(|v| {
            v["mission"] = json!({ "i_w": 2, "v_uav": 5, "e_max": 420000.0, "p_uav": 200.0 });
        });
        assert_eq!(parse_scenario(&text).unwrap().mission.t_max, 2100.0);
    }

    #[test]
    fn scenario_round_trip() {
        let s = parse_scenario(&with(|v| {
            v["obstacles"] = json!([{ "id": "a", "x_min": 70, "x_max": 80.25, "y_min": 0, "y_max": 10, "height": 33.3 }]);
        }))
        .unwrap();
        let again = parse_scenario(&s.to_json()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.to_json(), s.to_json());
    }

    fn solved() -> (Scenario, Tour<f64>) {
        let s = parse_scenario(MINIMAL).unwrap();
        let area = service_area(&s.users()[0], &s.map, &s.budget, &s.grid);
        let cell = area.valid_cells()[3];
        let mut tour = Tour::from_order(vec![0], &[area.point(cell)], &s.mission);
        tour.cells = vec![Some(cell)];
        (s, tour)
    }

    #[test]
    fn report_round_trip() {
        let (s, tour) = solved();
        let meta = SolverMeta {
            name: "heuristic".into(),
            seed: 7,
            iterations: 3,
            wall_time_s: None,
        };
        let report = TrajectoryReport::from_tour(&s, &tour, meta, &[f64::INFINITY, 1.0 / 3.0, 0.1]);
        assert!(report.users[0].threshold_met);
        assert_eq!(report.convergence, vec![None, Some(1.0 / 3.0), Some(0.1)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        save_report(&report, &path).unwrap();
        assert_eq!(load_report(&path).unwrap(), report);
        assert!(!report.to_json().contains("wall_time"));
    }

    #[test]
    fn raster_shape_and_round_trip() {
        let (s, _) = solved();
        let area = service_area(&s.users()[0], &s.map, &s.budget, &s.grid);
        let csv = grid_to_csv(&area);
        let (mx, my) = area.dims();
        assert_eq!(csv.lines().count(), my);
        assert!(csv.lines().all(|l| l.split(',').count() == mx));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        export_grid(&area, &path).unwrap();
        assert_eq!(load_grid(&path, s.grid, "u1").unwrap(), area);

        let spec = GridSpec::new(0.0, 20.0, 0.0, 10.0, 10.0, 10.0, 5.0).unwrap();
        let zeros = ServiceAreaGrid::from_cells(spec, "z", vec![false; 6]).unwrap();
        assert_eq!(grid_to_csv(&zeros), "0,0,0\n0,0,0\n");
    }

    #[test]
    fn raster_rows_follow_m_y() {
        let spec = GridSpec::new(0.0, 20.0, 0.0, 10.0, 10.0, 10.0, 5.0).unwrap();
        let mut cells = vec![false; 6];
        cells[2 * 2 + 1] = true; // (m_x = 2, m_y = 1)
        let g = ServiceAreaGrid::from_cells(spec, "z", cells).unwrap();
        assert_eq!(grid_to_csv(&g), "0,0,0\n0,0,1\n");
    }

    #[test]
    fn geojson_exports_parse() {
        let (s, tour) = solved();
        let traj: Value = serde_json::from_str(&trajectory_geojson(&s, &tour)).unwrap();
        assert_eq!(traj["features"].as_array().unwrap().len(), 2);
        assert_eq!(traj["features"][0]["geometry"]["coordinates"].as_array().unwrap().len(), 3);
        let area = service_area(&s.users()[0], &s.map, &s.budget, &s.grid);
        let cov: Value = serde_json::from_str(&coverage_geojson(std::slice::from_ref(&area))).unwrap();
        assert_eq!(cov["features"].as_array().unwrap().len(), area.count_valid());
    }

    #[test]
    fn footprints_merge() {
        let text = "x_min,x_max,y_min,y_max,height\n0,1,0,1,5\n1,2,0,1,5\n0,1,1,2,5\n1,2,1,2,5\n";
        let conv = convert_footprints_str(text, HeightRule::Require).unwrap();
        assert_eq!((conv.before, conv.after), (4, 1));
        let c = &conv.map.cuboids()[0];
        assert_eq!((c.x_min, c.x_max, c.y_min, c.y_max, c.height), (0.0, 2.0, 0.0, 2.0, 5.0));

        let empty = convert_footprints_str("", HeightRule::Require).unwrap();
        assert!(empty.map.is_empty());
        let header_only = convert_footprints_str("x_min,x_max,y_min,y_max,height\n", HeightRule::Require).unwrap();
        assert_eq!(header_only.before, 0);
    }

    #[test]
    fn footprint_errors_carry_row_numbers() {
        let text = "x_min,x_max,y_min,y_max,height\n0,1,0,1,5\n0,1,0,abc,5\n";
        match convert_footprints_str(text, HeightRule::Require).unwrap_err() {
            ScenarioError::Row { row, .. } => assert_eq!(row, 2),
            e => panic!("{e}"),
        }
        let text = "x_min,x_max,y_min,y_max,height\n0,1,0,1,\n";
        assert!(matches!(
            convert_footprints_str(text, HeightRule::Require),
            Err(ScenarioError::Row { row: 1, .. })
        ));
        let conv = convert_footprints_str(text, HeightRule::Fixed(12.0)).unwrap();
        assert_eq!(conv.map.cuboids()[0].height, 12.0);
        let text = "x_min,x_max,y_min,y_max,height\n3,1,0,1,4\n";
        assert!(matches!(convert_footprints_str(text, HeightRule::Require), Err(ScenarioError::Row { row: 1, .. })));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_scenario("/nonexistent/scenario.json").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/scenario.json"));
    }
}
