//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the summary always prints:
//!
//! ```text
//! cargo test --test acceptance
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng as _;
use rayon::prelude::*;

use uav_planner::coverage::{cell_center, grid_dimensions, service_area, GridSpec, ServiceAreaGrid};
use uav_planner::fixtures::{city_scenario, small_scenario, subdivided_footprints, synthetic_city};
use uav_planner::ga::{ga_run, ga_solve, GaConfig};
use uav_planner::geometry::{check_los, merge_cuboids, Cuboid, Los, ObstacleMap, Point3};
use uav_planner::link::{max_service_distance, q_function, q_inverse, validate_service_point, LinkBudget, User};
use uav_planner::oracle::{
    brute_force_order, edge_clearance, endpoint_in_obstacle, exhaustive_order_cells, los_by_sampling,
    q_inverse_by_bisection, OracleInstance,
};
use uav_planner::rng;
use uav_planner::routing::{advanced_run, advanced_solve, heuristic_run, optimal_order, Budget, MissionSpec, Problem, Tour};
use uav_planner::scenario_io::{convert_footprints, Scenario};

const FIXTURE_SEED: u64 = 2100;
const T_MAX: f64 = 2100.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn areas_of(s: &Scenario) -> Vec<ServiceAreaGrid<f64>> {
    s.users().iter().map(|u| service_area(u, &s.map, &s.budget, &s.grid)).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// 1 ------------------------------------------------------------------------

fn random_map(r: &mut rng::Rng) -> ObstacleMap<f64> {
    let n = r.gen_range(1..=50);
    let cuboids = (0..n)
        .map(|k| {
            let x0 = r.gen_range(0.0..95.0);
            let y0 = r.gen_range(0.0..95.0);
            let w = r.gen_range(1.0..20.0);
            let d = r.gen_range(1.0..20.0);
            let h = r.gen_range(1.0..50.0);
            Cuboid::new(format!("c{k}"), x0, x0 + w, y0, y0 + d, h).unwrap()
        })
        .collect();
    ObstacleMap::from_cuboids(cuboids)
}

fn random_point(r: &mut rng::Rng) -> Point3<f64> {
    Point3::new(r.gen_range(-10.0..110.0), r.gen_range(-10.0..110.0), r.gen_range(0.0..60.0))
}

fn criterion_1() -> Outcome {
    const TRIALS: u64 = 10_000;
    const STEP: f64 = 0.05;
    let start = Instant::now();
    let results: Vec<(bool, usize, bool)> = (0..TRIALS)
        .into_par_iter()
        .map(|trial| {
            let mut r = rng::stream(1, "acceptance-los", trial);
            let mut redraws = 0;
            loop {
                let map = random_map(&mut r);
                let a = random_point(&mut r);
                let b = random_point(&mut r);
                if endpoint_in_obstacle(&a, &b, &map) || edge_clearance(&a, &b, &map) < STEP {
                    redraws += 1;
                    continue;
                }
                let fast = check_los(&a, &b, &map);
                let slow = los_by_sampling(&a, &b, &map, STEP);
                return (fast == slow, redraws, fast == Los::Blocked);
            }
        })
        .collect();
    let agree = results.iter().filter(|r| r.0).count();
    let redraws: usize = results.iter().map(|r| r.1).sum();
    let blocked = results.iter().filter(|r| r.2).count();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        agree as u64 == TRIALS && secs < 30.0,
        format!("{agree}/{TRIALS} agree ({blocked} blocked, {redraws} near-tangent redraws), {secs:.1} s"),
    )
}

// 2 ------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for k in 1..=8 {
        let p = 10f64.powi(-k);
        let x = q_inverse(p).unwrap();
        worst = worst.max((q_function(x) / p - 1.0).abs());
    }
    let a: f64 = q_inverse(1e-3).unwrap();
    let b: f64 = q_inverse(1e-6).unwrap();
    let oa = q_inverse_by_bisection(1e-3);
    let ob = q_inverse_by_bisection(1e-6);
    let pass = worst <= 1e-9 && (a - 3.0902).abs() <= 1e-3 && (b - 4.7534).abs() <= 1e-3 && (a - oa).abs() <= 1e-3 && (b - ob).abs() <= 1e-3;
    outcome(
        pass,
        format!("max round-trip rel. error {worst:.2e}; Qinv(1e-3) = {a:.6} (oracle {oa:.6}), Qinv(1e-6) = {b:.6} (oracle {ob:.6})"),
    )
}

// 3 ------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let budget = LinkBudget::default_budget();
    let d0 = max_service_distance(0.0, &budget);
    let d1 = max_service_distance(1.0, &budget);
    let expected = q_inverse_by_bisection(budget.ber_loose) / q_inverse_by_bisection(budget.ber_strict);
    let ratio_err = (d1 / d0 - expected).abs();
    let ds: Vec<f64> = (0..=100).map(|k| max_service_distance(k as f64 / 100.0, &budget)).collect();
    let monotone = ds.windows(2).all(|w| w[1] < w[0]);
    outcome(
        d0 == budget.d_ref && ratio_err <= 1e-9 && monotone,
        format!("d(0) = {d0} m, d(1)/d(0) off by {ratio_err:.1e}, strictly decreasing over 101 samples: {monotone}"),
    )
}

// 4 ------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    // Specs drawn on a centimetre lattice so the floor formula can be
    // evaluated exactly in integers.
    let mut r = rng::stream(4, "acceptance-grid", 0);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let x0: i64 = r.gen_range(-100_000..100_000);
        let y0: i64 = r.gen_range(-100_000..100_000);
        let dx: i64 = r.gen_range(1..5_000);
        let dy: i64 = r.gen_range(1..5_000);
        let wx: i64 = if r.gen_bool(0.3) { dx * r.gen_range(1..200) } else { r.gen_range(1..500_000) };
        let wy: i64 = if r.gen_bool(0.3) { dy * r.gen_range(1..200) } else { r.gen_range(1..500_000) };
        let c = |v: i64| v as f64 / 100.0;
        let spec = GridSpec::new(c(x0), c(x0 + wx), c(y0), c(y0 + wy), c(dx), c(dy), 100.0).unwrap();
        let expected = ((wx / dx + 1) as usize, (wy / dy + 1) as usize);
        if grid_dimensions(&spec) != expected {
            mismatches += 1;
        }
    }

    let s = city_scenario(FIXTURE_SEED, 7, 2.0);
    let mut cell_mismatches = 0usize;
    let mut cells = 0usize;
    for u in s.users() {
        let g = service_area(u, &s.map, &s.budget, &s.grid);
        let (mx, my) = g.dims();
        for x in 0..mx {
            for y in 0..my {
                let p = cell_center(&s.grid, x, y).unwrap();
                cells += 1;
                if g.get(x, y) != validate_service_point(&p, u, &s.map, &s.budget).is_valid() {
                    cell_mismatches += 1;
                }
            }
        }
    }
    outcome(
        mismatches == 0 && cell_mismatches == 0,
        format!("dimension mismatches {mismatches}/1000; cell mismatches {cell_mismatches}/{cells}"),
    )
}

// 5 ------------------------------------------------------------------------

fn routing_instance(n: usize, i_w: f64, r: &mut rng::Rng) -> (MissionSpec<f64>, Vec<Point3<f64>>) {
    let users: Vec<User<f64>> = (0..n)
        .map(|k| {
            let w = r.gen_range(0.05..=1.0);
            User::new(format!("u{k}"), Point3::new(r.gen_range(0.0..1000.0), r.gen_range(0.0..1000.0), 0.0), w).unwrap()
        })
        .collect();
    let points = users
        .iter()
        .map(|_| Point3::new(r.gen_range(0.0..1000.0), r.gen_range(0.0..1000.0), 100.0))
        .collect();
    let station = Point3::new(r.gen_range(0.0..1000.0), r.gen_range(0.0..1000.0), 0.0);
    (MissionSpec::new(station, users, i_w, 1e9, 5.0).unwrap(), points)
}

fn oracle_instance(m: &MissionSpec<f64>) -> OracleInstance {
    OracleInstance {
        station: m.station,
        weights: m.users.iter().map(|u| u.weight).collect(),
        i_w: m.i_w,
        v: m.v_uav,
        t_max: m.t_max,
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let cases: Vec<(usize, f64, u64)> = (2..=8)
        .flat_map(|n| [0.0, 2.0, 4.0].into_iter().flat_map(move |iw| (0..100).map(move |k| (n, iw, k))))
        .collect();
    let bad: Vec<String> = cases
        .par_iter()
        .filter_map(|&(n, iw, k)| {
            let mut r = rng::stream(5, &format!("acceptance-routing-{n}-{iw}"), k);
            let (m, pts) = routing_instance(n, iw, &mut r);
            let dp = optimal_order(&pts, &m);
            let bf = brute_force_order(&pts, &oracle_instance(&m), 8).unwrap();
            if dp.objective != bf.objective {
                Some(format!("n={n} I_w={iw} #{k}: {} vs {}", dp.objective, bf.objective))
            } else {
                None
            }
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        bad.is_empty() && secs < 60.0,
        format!(
            "{}/{} instances match bit-exactly, {secs:.1} s{}",
            cases.len() - bad.len(),
            cases.len(),
            bad.first().map(|b| format!("; first mismatch {b}")).unwrap_or_default()
        ),
    )
}

// 6 ------------------------------------------------------------------------

fn criterion_6() -> Outcome {
    let users = vec![
        User::new("A", Point3::new(-1.0, 0.0, 0.0), 0.1).unwrap(),
        User::new("B", Point3::new(10.0, 0.0, 0.0), 0.9).unwrap(),
    ];
    let pts = vec![users[0].position, users[1].position];
    let station = Point3::new(0.0, 0.0, 0.0);
    let t0: Tour<f64> = optimal_order(&pts, &MissionSpec::new(station, users.clone(), 0.0, 1e9, 1.0).unwrap());
    let t2: Tour<f64> = optimal_order(&pts, &MissionSpec::new(station, users, 2.0, 1e9, 1.0).unwrap());
    let pass = t0.order == vec![0, 1] && t0.objective == 13.0 && t2.order == vec![1, 0] && (t2.objective - 8.31).abs() <= 1e-9;
    outcome(
        pass,
        format!("I_w=0: order {:?} objective {}; I_w=2: order {:?} objective {}", t0.order, t0.objective, t2.order, t2.objective),
    )
}

// 7-9 ----------------------------------------------------------------------

struct FeasibilityLog {
    checked: usize,
    violations: Vec<String>,
}

impl FeasibilityLog {
    fn check(&mut self, label: &str, problem: &Problem<'_, f64>, tour: &Tour<f64>) {
        if !tour.feasible {
            return;
        }
        self.checked += 1;
        if let Err(e) = problem.verify_tour(tour) {
            self.violations.push(format!("{label}: {e}"));
        } else if tour.end_time > T_MAX {
            self.violations.push(format!("{label}: end time {}", tour.end_time));
        }
    }
}

fn criterion_7(log: &mut FeasibilityLog) -> Outcome {
    let start = Instant::now();
    let mut medians = Vec::new();
    let mut infeasible = 0;
    for iw in [0.0, 2.0, 4.0] {
        let s = city_scenario(FIXTURE_SEED, 12, iw);
        let areas = areas_of(&s);
        let p = Problem::new(&s.mission, &areas, &s.map, &s.budget).unwrap();
        let mut ends = Vec::new();
        for seed in 0..10 {
            let t = advanced_solve(&p, 200, seed).unwrap();
            log.check(&format!("advanced I_w={iw} seed={seed}"), &p, &t);
            if !t.feasible {
                infeasible += 1;
            }
            ends.push(t.end_time);
        }
        medians.push(median(ends));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = medians[0] <= medians[1] && medians[1] <= medians[2] && infeasible == 0;
    outcome(
        pass,
        format!(
            "median end time T(0) = {:.1} s, T(2) = {:.1} s, T(4) = {:.1} s; {infeasible} infeasible runs, {secs:.1} s",
            medians[0], medians[1], medians[2]
        ),
    )
}

const FIG3_BUDGET: Duration = Duration::from_millis(500);

fn criterion_8(log: &mut FeasibilityLog) -> Outcome {
    let s = city_scenario(FIXTURE_SEED, 10, 2.0);
    let areas = areas_of(&s);
    let p = Problem::new(&s.mission, &areas, &s.map, &s.budget).unwrap();
    let budget = Budget::WallClock(FIG3_BUDGET);
    let mut ordered = 0;
    let mut rows = Vec::new();
    for seed in 0..10 {
        let adv = advanced_run(&p, budget, seed).unwrap().tour;
        let heu = heuristic_run(&p, budget, seed).unwrap().tour;
        let cfg = GaConfig {
            seed,
            ..GaConfig::default()
        };
        let ga = ga_run(&p, &cfg, budget).unwrap().tour;
        for (name, t) in [("advanced", &adv), ("heuristic", &heu), ("ga", &ga)] {
            log.check(&format!("{name} seed={seed}"), &p, t);
        }
        let ok = adv.feasible && heu.feasible && ga.feasible && adv.objective <= heu.objective && heu.objective <= ga.objective;
        if ok {
            ordered += 1;
        }
        rows.push(format!("{:.0}/{:.0}/{:.0}", adv.objective, heu.objective, ga.objective));
    }
    outcome(
        ordered >= 7,
        format!(
            "advanced <= heuristic <= ga in {ordered}/10 seeds at {} ms each (objectives adv/heu/ga: {})",
            FIG3_BUDGET.as_millis(),
            rows.join(" ")
        ),
    )
}

fn criterion_9(log: &FeasibilityLog) -> Outcome {
    outcome(
        log.violations.is_empty() && log.checked > 0,
        format!(
            "{} feasible tours verified, {} violations{}",
            log.checked,
            log.violations.len(),
            log.violations.first().map(|v| format!("; first: {v}")).unwrap_or_default()
        ),
    )
}

// 10 -----------------------------------------------------------------------

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let s = small_scenario(FIXTURE_SEED, 6, 2.0, 20);
    let areas = areas_of(&s);
    let p = Problem::new(&s.mission, &areas, &s.map, &s.budget).unwrap();
    let cands: Vec<Vec<Point3<f64>>> = areas.iter().map(|a| a.valid_cells().into_iter().map(|c| a.point(c)).collect()).collect();
    let best = exhaustive_order_cells(&cands, &oracle_instance(&s.mission), 8, 10_000_000).unwrap();
    let gaps: Vec<f64> = (0..20)
        .into_par_iter()
        .map(|seed| {
            let cfg = GaConfig {
                population: 100,
                generations: 200,
                seed,
                ..GaConfig::default()
            };
            let t = ga_solve(&p, &cfg).unwrap();
            if t.feasible {
                t.objective / best.objective - 1.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let within = gaps.iter().filter(|g| **g <= 0.02).count();
    let secs = start.elapsed().as_secs_f64();
    let cells: Vec<usize> = cands.iter().map(Vec::len).collect();
    outcome(
        within >= 18 && secs < 180.0,
        format!(
            "{within}/20 seeds within 2% of exhaustive optimum {:.3} (cells per user {cells:?}, worst gap {:.2}%), {secs:.1} s",
            best.objective,
            gaps.iter().cloned().fold(0.0, f64::max) * 100.0
        ),
    )
}

// 11 -----------------------------------------------------------------------

fn criterion_11() -> Outcome {
    let conv = convert_footprints(fixtures_dir().join("footprints_3150.csv"), uav_planner::scenario_io::HeightRule::Require).unwrap();
    let base = synthetic_city(FIXTURE_SEED).len();
    let pieces = subdivided_footprints(&synthetic_city(FIXTURE_SEED), FIXTURE_SEED);
    let original = ObstacleMap::from_cuboids(pieces);
    let merged = merge_cuboids(&original, 0.0);

    let mut r = rng::stream(11, "acceptance-merge", 0);
    let mut flips = 0;
    let mut blocked = 0;
    let mut queries = 0;
    while queries < 1000 {
        let a = Point3::new(r.gen_range(0.0..1200.0), r.gen_range(0.0..1200.0), r.gen_range(0.0..300.0));
        let b = Point3::new(r.gen_range(0.0..1200.0), r.gen_range(0.0..1200.0), r.gen_range(0.0..300.0));
        if endpoint_in_obstacle(&a, &b, &original) {
            continue;
        }
        queries += 1;
        let before = check_los(&a, &b, &original);
        let after = check_los(&a, &b, &merged);
        if before == Los::Blocked {
            blocked += 1;
            if after == Los::Clear {
                flips += 1;
            }
        }
    }
    let pass = conv.before == 3150 && conv.after == base && merged.len() == base && flips == 0;
    outcome(
        pass,
        format!(
            "{} footprints -> {} cuboids (base blocks {base}); {flips} blocked->clear flips in {queries} queries ({blocked} blocked)",
            conv.before, conv.after
        ),
    )
}

// 12 -----------------------------------------------------------------------

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map(|rd| {
            rd.map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn criterion_12() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_uav-planner");
    let fx = fixtures_dir();
    let scen = fx.join("city_10.json").to_string_lossy().into_owned();
    let foot = fx.join("footprints_3150.csv").to_string_lossy().into_owned();
    let runs: Vec<(&str, Vec<String>)> = vec![
        ("coverage", vec!["coverage".into(), "--scenario".into(), scen.clone()]),
        ("solve-heuristic", vec!["solve".into(), "--solver".into(), "heuristic".into(), "--scenario".into(), scen.clone(), "--seed".into(), "7".into(), "--iterations".into(), "50".into()]),
        ("solve-advanced", vec!["solve".into(), "--solver".into(), "advanced".into(), "--scenario".into(), scen.clone(), "--seed".into(), "7".into(), "--iterations".into(), "50".into()]),
        ("solve-ga", vec!["solve".into(), "--solver".into(), "ga".into(), "--scenario".into(), scen.clone(), "--seed".into(), "7".into(), "--iterations".into(), "50".into()]),
        ("compare", vec!["compare".into(), "--scenario".into(), scen.clone(), "--seed".into(), "7".into(), "--iterations".into(), "50".into()]),
        ("validate", vec!["validate".into(), "--scenario".into(), scen.clone()]),
        ("convert", vec!["convert".into(), "--input".into(), foot]),
    ];
    let root = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    let mut files = 0;
    for (name, args) in &runs {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let dir = root.path().join(format!("{name}-{rep}"));
            let mut cmd = Command::new(bin);
            cmd.args(args);
            match *name {
                "validate" => {}
                "convert" => {
                    fs::create_dir_all(&dir).unwrap();
                    cmd.arg("--out").arg(dir.join("obstacles.json"));
                }
                _ => {
                    cmd.arg("--out-dir").arg(&dir);
                }
            }
            let out = cmd.output().unwrap();
            if !out.status.success() {
                differing.push(format!("{name} exited with {}", out.status));
            }
            let mut snap = snapshot(&dir);
            if *name == "validate" {
                snap.push(("stdout".into(), out.stdout));
            }
            outputs.push(snap);
        }
        files += outputs[0].len();
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            differing.push(name.to_string());
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} commands, {files} output files compared{}", runs.len(), if differing.is_empty() { String::new() } else { format!("; differing: {}", differing.join(", ")) }),
    )
}

fn main() {
    let mut log = FeasibilityLog {
        checked: 0,
        violations: Vec::new(),
    };
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut FeasibilityLog) -> Outcome>)> = vec![
        ("LoS oracle equivalence", Box::new(|_| criterion_1())),
        ("Q-function round trip", Box::new(|_| criterion_2())),
        ("Service distance law", Box::new(|_| criterion_3())),
        ("Grid formulas", Box::new(|_| criterion_4())),
        ("Routing exactness", Box::new(|_| criterion_5())),
        ("Priority flip instance", Box::new(|_| criterion_6())),
        ("I_w trajectory-time trend", Box::new(criterion_7)),
        ("Solver ranking at matched wall-clock", Box::new(criterion_8)),
        ("Feasibility contract", Box::new(|l: &mut FeasibilityLog| criterion_9(l))),
        ("GA sanity", Box::new(|_| criterion_10())),
        ("Merge correctness", Box::new(|_| criterion_11())),
        ("CLI determinism", Box::new(|_| criterion_12())),
    ];
    let mut failed = 0;
    println!("acceptance criteria");
    for (k, (name, run)) in criteria.into_iter().enumerate() {
        let o = run(&mut log);
        if !o.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
