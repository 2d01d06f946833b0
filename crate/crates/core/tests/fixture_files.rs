//! The checked-in fixture files must equal what the generators produce.
//! Run with `UPDATE_FIXTURES=1` to rewrite them.

use std::fs;
use std::path::PathBuf;

use uav_planner::fixtures::{city_scenario, footprints_csv, small_scenario, subdivided_footprints, synthetic_city};
use uav_planner::scenario_io::load_scenario;

pub const CITY_SEED: u64 = 2100;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn expected() -> Vec<(&'static str, String)> {
    let city = synthetic_city(CITY_SEED);
    vec![
        ("city_7.json", city_scenario(CITY_SEED, 7, 2.0).to_json()),
        ("city_10.json", city_scenario(CITY_SEED, 10, 2.0).to_json()),
        ("city_14.json", city_scenario(CITY_SEED, 14, 2.0).to_json()),
        ("small_5.json", small_scenario(CITY_SEED, 5, 2.0, 20).to_json()),
        ("footprints_3150.csv", footprints_csv(&subdivided_footprints(&city, CITY_SEED))),
    ]
}

#[test]
fn fixture_files_match_generators() {
    let update = std::env::var_os("UPDATE_FIXTURES").is_some();
    fs::create_dir_all(dir()).unwrap();
    for (name, text) in expected() {
        let path = dir().join(name);
        if update {
            fs::write(&path, &text).unwrap();
            continue;
        }
        let on_disk = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(on_disk == text, "{name} is stale; rerun with UPDATE_FIXTURES=1");
    }
}

#[test]
fn scenario_fixtures_load() {
    for name in ["city_7.json", "city_10.json", "city_14.json", "small_5.json", "minimal.json", "template.json"] {
        let s = load_scenario(dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!s.users().is_empty());
    }
    let golden = load_scenario(dir().join("city_14.json")).unwrap();
    assert_eq!(golden.map.len(), 128);
    assert!((7..=14).contains(&golden.users().len()));
}
