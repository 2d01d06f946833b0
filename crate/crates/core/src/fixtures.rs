//! Deterministic synthetic inputs: a block-lattice city, its footprint
//! subdivision, and scenarios placed on top of it.
//!
//! Everything is a pure function of the seed.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::coverage::{service_area, GridSpec};
use crate::geometry::{Cuboid, ObstacleMap, Point3, Rect};
use crate::link::{LinkBudget, User};
use crate::rng;
use crate::routing::MissionSpec;
use crate::scenario_io::{Scenario, SolverConfigs};

pub const CITY_COLS: usize = 16;
pub const CITY_ROWS: usize = 8;
pub const CITY_EXTENT: f64 = 1200.0;
/// Base blocks split 5 x 5; the rest are split 4 x 6.
pub const FIVE_BY_FIVE: usize = 78;

const PITCH_X: f64 = CITY_EXTENT / CITY_COLS as f64;
const PITCH_Y: f64 = CITY_EXTENT / CITY_ROWS as f64;

fn half_metres(v: f64) -> f64 {
    (v * 2.0).round() / 2.0
}

/// 128 free-standing blocks on a 16 x 8 lattice over a 1200 m square, with
/// streets of at least 15 m and roof heights between 20 and 250 m (mostly
/// low-rise).
pub fn synthetic_city(seed: u64) -> ObstacleMap<f64> {
    let mut rng = rng::stream(seed, "fixture-city", 0);
    let mut cuboids = Vec::with_capacity(CITY_COLS * CITY_ROWS);
    for c in 0..CITY_COLS {
        for r in 0..CITY_ROWS {
            let w = half_metres(rng.gen_range(35.0..60.0));
            let d = half_metres(rng.gen_range(80.0..130.0));
            let x0 = half_metres(c as f64 * PITCH_X + (PITCH_X - w) / 2.0);
            let y0 = half_metres(r as f64 * PITCH_Y + (PITCH_Y - d) / 2.0);
            let u: f64 = rng.gen();
            let h = (20.0 + 230.0 * u * u).round();
            let id = format!("b{:03}", c * CITY_ROWS + r);
            cuboids.push(Cuboid::new(id, x0, x0 + w, y0, y0 + d, h).expect("valid block"));
        }
    }
    ObstacleMap::new(
        cuboids,
        Rect {
            x_min: 0.0,
            x_max: CITY_EXTENT,
            y_min: 0.0,
            y_max: CITY_EXTENT,
        },
    )
    .expect("blocks inside the city")
}

fn cuts(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 })
        .collect()
}

/// Splits every block of `city` into equal-height footprints: a seeded
/// choice of [`FIVE_BY_FIVE`] blocks into 5 x 5 pieces, the others into
/// 4 x 6. For the default city that is 3150 footprints.
pub fn subdivided_footprints(city: &ObstacleMap<f64>, seed: u64) -> Vec<Cuboid<f64>> {
    let mut rng = rng::stream(seed, "fixture-split", 0);
    let mut idx: Vec<usize> = (0..city.len()).collect();
    idx.shuffle(&mut rng);
    let mut five = vec![false; city.len()];
    for &k in idx.iter().take(FIVE_BY_FIVE) {
        five[k] = true;
    }
    let mut out = Vec::new();
    for (k, b) in city.cuboids().iter().enumerate() {
        let (nx, ny) = if five[k] { (5, 5) } else { (4, 6) };
        let xs = cuts(b.x_min, b.x_max, nx);
        let ys = cuts(b.y_min, b.y_max, ny);
        for i in 0..nx {
            for j in 0..ny {
                let id = format!("{}-{i}-{j}", b.id);
                out.push(Cuboid::new(id, xs[i], xs[i + 1], ys[j], ys[j + 1], b.height).expect("valid piece"));
            }
        }
    }
    out
}

/// Footprint table in the converter's CSV layout.
pub fn footprints_csv(pieces: &[Cuboid<f64>]) -> String {
    let mut out = String::from("x_min,x_max,y_min,y_max,height\n");
    for c in pieces {
        out.push_str(&format!("{},{},{},{},{}\n", c.x_min, c.x_max, c.y_min, c.y_max, c.height));
    }
    out
}

fn in_footprint(map: &ObstacleMap<f64>, x: f64, y: f64, margin: f64) -> bool {
    map.cuboids()
        .iter()
        .any(|c| x >= c.x_min - margin && x <= c.x_max + margin && y >= c.y_min - margin && y <= c.y_max + margin)
}

/// Places `n` street-level users (z = 1.5 m) with seeded weights, redrawing
/// any whose service area would be empty.
fn place_users(
    seed: u64,
    n: usize,
    map: &ObstacleMap<f64>,
    budget: &LinkBudget<f64>,
    grid: &GridSpec<f64>,
    weights: (f64, f64),
    max_cells: Option<usize>,
) -> Vec<User<f64>> {
    let mut rng = rng::stream(seed, "fixture-users", 0);
    let mut users = Vec::with_capacity(n);
    while users.len() < n {
        let x = half_metres(rng.gen_range(grid.x_min + 10.0..grid.x_max - 10.0));
        let y = half_metres(rng.gen_range(grid.y_min + 10.0..grid.y_max - 10.0));
        let w = (rng.gen_range(weights.0..=weights.1) * 100.0f64).round() / 100.0;
        if in_footprint(map, x, y, 1.0) {
            continue;
        }
        let user = User::new(format!("u{:02}", users.len() + 1), Point3::new(x, y, 1.5), w).expect("weight in range");
        let count = service_area(&user, map, budget, grid).count_valid();
        if count == 0 || max_cells.is_some_and(|m| count > m) {
            continue;
        }
        users.push(user);
    }
    users
}

/// City-scale scenario with the template mission: 260 m altitude, 10 m
/// grid, 5 m/s, 2100 s, BER 1e-3 / 1e-6 and a 500 m calibration distance.
/// The station sits on the roof of the block nearest the city centre.
pub fn city_scenario(seed: u64, n_users: usize, i_w: f64) -> Scenario {
    let map = synthetic_city(seed);
    let budget = LinkBudget::default_budget();
    let grid = GridSpec::new(0.0, CITY_EXTENT, 0.0, CITY_EXTENT, 10.0, 10.0, 260.0).expect("valid grid");
    let users = place_users(seed, n_users, &map, &budget, &grid, (0.05, 1.0), None);
    let centre = CITY_EXTENT / 2.0;
    let roof = map
        .cuboids()
        .iter()
        .min_by(|a, b| {
            let da = ((a.x_min + a.x_max) / 2.0 - centre).hypot((a.y_min + a.y_max) / 2.0 - centre);
            let db = ((b.x_min + b.x_max) / 2.0 - centre).hypot((b.y_min + b.y_max) / 2.0 - centre);
            da.total_cmp(&db)
        })
        .expect("city has blocks");
    let station = Point3::new((roof.x_min + roof.x_max) / 2.0, (roof.y_min + roof.y_max) / 2.0, roof.height);
    let mission = MissionSpec::new(station, users, i_w, 2100.0, 5.0).expect("valid mission");
    let mut solvers = SolverConfigs::default();
    solvers.ga.seed = seed;
    Scenario {
        description: Some(format!("synthetic city, seed {seed}, {n_users} users")),
        seed,
        map,
        budget,
        grid,
        mission,
        solvers,
    }
}

/// Small instance for exhaustive checks: a 400 m square with four low
/// blocks, a 40 m grid at 60 m altitude, and users whose service areas hold
/// between 1 and `max_cells` cells.
pub fn small_scenario(seed: u64, n_users: usize, i_w: f64, max_cells: usize) -> Scenario {
    let blocks = [(80.0, 140.0, 80.0, 140.0), (260.0, 320.0, 80.0, 140.0), (80.0, 140.0, 260.0, 320.0), (260.0, 320.0, 260.0, 320.0)];
    let cuboids = blocks
        .iter()
        .enumerate()
        .map(|(k, &(x0, x1, y0, y1))| Cuboid::new(format!("s{k}"), x0, x1, y0, y1, 40.0).expect("valid block"))
        .collect();
    let map = ObstacleMap::new(
        cuboids,
        Rect {
            x_min: 0.0,
            x_max: 400.0,
            y_min: 0.0,
            y_max: 400.0,
        },
    )
    .expect("blocks inside bounds");
    let budget = LinkBudget::new(1e-3, 1e-6, 150.0).expect("valid budget");
    let grid = GridSpec::new(0.0, 400.0, 0.0, 400.0, 40.0, 40.0, 60.0).expect("valid grid");
    let users = place_users(seed, n_users, &map, &budget, &grid, (0.5, 1.0), Some(max_cells));
    let mission = MissionSpec::new(Point3::new(200.0, 200.0, 0.0), users, i_w, 2100.0, 5.0).expect("valid mission");
    let mut solvers = SolverConfigs::default();
    solvers.ga.seed = seed;
    Scenario {
        description: Some(format!("small exhaustive instance, seed {seed}")),
        seed,
        map,
        budget,
        grid,
        mission,
        solvers,
    }
}
