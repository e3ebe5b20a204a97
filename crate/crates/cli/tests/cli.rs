use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value;

fn speds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speds"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &Path, prefix: &str) -> Value {
    let text = fs::read_to_string(dir.join(format!("{prefix}_summary.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_LASER: &str = r#"{
  "source": "laser",
  "mean_photons_per_pulse": 0.5,
  "drive": { "mode": "pulsed", "repetition_rate_mhz": 80.0, "pulse_width_ps": 300.0,
             "sweep_out": "none", "duration_ns": 200000.0 },
  "lines_a": ["X"], "lines_b": ["X"], "window_ns": 137.5, "bin_ns": 0.5
}"#;

#[test]
fn throughput_itemizes_factors_and_prints_67() {
    let dir = tempfile::tempdir().unwrap();
    let o = speds(&[
        "throughput",
        "--preset",
        "throughput",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for item in [
        "collection gain",
        "repetition-rate gain",
        "quantum-efficiency",
        "relative to reference: 67",
    ] {
        assert!(out.contains(item), "missing `{item}` in\n{out}");
    }
    let s = summary(dir.path(), "throughput");
    assert_eq!(s["command"], "throughput");
    assert!((s["results"]["throughput_ratio"].as_f64().unwrap() - 66.7).abs() < 0.1);
}

#[test]
fn figure_six_presets_print_their_efficiencies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for (preset, target, tol) in [("fig6a_no_cavity", 0.5, 0.05), ("fig6b_cavity", 7.0, 1.0)] {
        let o = speds(&["emission-pattern", "--preset", preset, "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("collection efficiency into NA 0.50"));
        let eta = summary(dir.path(), preset)["results"]["collection_efficiency"]
            .as_f64()
            .unwrap();
        assert!((100.0 * eta - target).abs() <= tol, "{preset}: {eta}");
        let csv = fs::read_to_string(dir.path().join(format!("{preset}_pattern.csv"))).unwrap();
        assert!(csv.lines().any(|l| l.starts_with("theta_deg,power_density")));
    }
}

#[test]
fn empty_air_structure_radiates_unit_power() {
    let dir = tempfile::tempdir().unwrap();
    let o = speds(&[
        "emission-pattern",
        "--preset",
        "homogeneous_air",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = &summary(dir.path(), "homogeneous_air")["results"];
    assert!((r["total_power"].as_f64().unwrap() - 1.0).abs() < 1e-4);
    assert!(r["guided_power"].as_f64().unwrap().abs() < 1e-4);
}

#[test]
fn top_mirror_preset_reports_argmax() {
    let dir = tempfile::tempdir().unwrap();
    let o = speds(&[
        "cavity-sweep",
        "--preset",
        "top_mirror_geometry",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sweeps = &summary(dir.path(), "top_mirror_geometry")["results"]["sweeps"];
    assert_eq!(sweeps[0]["best_value"], 4);
    let csv = fs::read_to_string(dir.path().join("top_mirror_geometry_top_na0.50.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("parameter,efficiency"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn unknown_or_misplaced_presets_are_usage_errors() {
    let o = speds(&["emission-pattern", "--preset", "fig7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown preset `fig7`"));
    let o = speds(&["hbt", "--preset", "fig6b_cavity"]);
    assert_eq!(o.status.code(), Some(2));
    let o = speds(&["hbt"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_configs_fail_fast_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "pulse.json",
            r#"{ "drive": { "mode": "pulsed", "repetition_rate_mhz": 1000.0, "pulse_width_ps": 1500.0,
                 "sweep_out": "none", "duration_ns": 1e9 },
                 "lines_a": ["X"], "lines_b": ["X"], "window_ns": 20.0, "bin_ns": 0.1 }"#,
            "pulse_width_ps",
        ),
        (
            "capture.json",
            r#"{ "model": { "capture_rate": -1.0 },
                 "drive": { "mode": "dc", "repetition_rate_mhz": 0.0, "pulse_width_ps": 0.0,
                 "sweep_out": "none", "duration_ns": 1e9 },
                 "lines_a": ["X"], "lines_b": ["X"], "window_ns": 20.0, "bin_ns": 0.1 }"#,
            "capture_rate",
        ),
        (
            "typo.json",
            r#"{ "drive": { "mode": "dc", "repetition_rate_mhz": 0.0, "pulse_width_ps": 0.0,
                 "sweep_out": "none", "duration_ns": 1e9 },
                 "lines_a": ["X"], "lines_b": ["X"], "window_ns": 20.0, "bin_width": 0.1 }"#,
            "bin_width",
        ),
    ];
    for (name, json, field) in cases {
        let path = write_config(dir.path(), name, json);
        let mut fastest = Duration::MAX;
        for _ in 0..3 {
            let start = Instant::now();
            let o = speds(&["hbt", "--config", &path, "--out", dir.path().to_str().unwrap()]);
            fastest = fastest.min(start.elapsed());
            assert_eq!(o.status.code(), Some(2), "{name}");
            assert!(stderr(&o).contains(field), "{name}: {}", stderr(&o));
        }
        assert!(fastest < Duration::from_millis(100), "{name} took {fastest:?}");
    }
    let sweep = write_config(
        dir.path(),
        "sweep.json",
        r#"{ "design": { "bottom_periods": 12, "top_periods": 0, "cavity_order": 3.0,
             "dipole_depth_below_surface": 2.0, "numerical_aperture": 0.5, "design_wavelength_nm": 900.0 },
             "bottom_sweep": { "max_periods": 0, "numerical_apertures": [0.5] } }"#,
    );
    let o = speds(&["cavity-sweep", "--config", &sweep]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("max_periods"));
}

#[test]
fn cross_correlation_needs_distinct_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "laser.json", SMALL_LASER);
    let o = speds(&["cross-corr", "--config", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lines_b"));
}

#[test]
fn starved_histogram_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "dim.json",
        &SMALL_LASER.replace("0.5,\n  \"drive\"", "1e-9,\n  \"drive\""),
    );
    let o = speds(&["hbt", "--config", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn fixed_seed_gives_byte_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "laser.json", SMALL_LASER);
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let o = speds(&["hbt", "--config", &path, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        ["histogram.csv", "peak_areas.csv", "summary.json"].map(|f| fs::read(out.join(format!("laser_{f}"))).unwrap())
    };
    let a = run("a", "11");
    let b = run("b", "11");
    let c = run("c", "12");
    assert_eq!(a, b);
    assert_ne!(a[0], c[0]);
    let s: Value = serde_json::from_slice(&a[2]).unwrap();
    assert_eq!(s["seed"], 11);
}

fn peak_areas(dir: &Path, prefix: &str) -> Vec<(i64, f64)> {
    let csv = fs::read_to_string(dir.join(format!("{prefix}_peak_areas.csv"))).unwrap();
    csv.lines()
        .skip(1)
        .map(|l| {
            let (m, a) = l.split_once(',').unwrap();
            (m.parse().unwrap(), a.parse().unwrap())
        })
        .collect()
}

#[test]
fn laser_reference_has_flat_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let o = speds(&["hbt", "--preset", "laser_80mhz", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    // about 160k coincidences per peak: one standard error is 0.01
    for (m, a) in peak_areas(dir.path(), "laser_80mhz") {
        assert!((a - 1.0).abs() < 0.03, "m = {m}: {a}");
    }
    assert!(summary(dir.path(), "laser_80mhz")["results"]["g2_zero_prediction"].is_null());
}

#[test]
fn gigahertz_preset_suppresses_the_zero_peak() {
    let dir = tempfile::tempdir().unwrap();
    let o = speds(&["hbt", "--preset", "fig9_1ghz", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for (m, a) in peak_areas(dir.path(), "fig9_1ghz") {
        if m == 0 {
            assert!(a < 0.5, "zero peak {a}");
        } else {
            assert!((a - 1.0).abs() < 0.1, "m = {m}: {a}");
        }
    }
}

#[test]
fn equal_noise_preset_matches_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let o = speds(&[
        "hbt",
        "--preset",
        "dc_equal_noise",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = &summary(dir.path(), "dc_equal_noise")["results"];
    assert_eq!(r["g2_zero_prediction"], 0.75);
    let (g, se) = (r["g2_zero"].as_f64().unwrap(), r["g2_zero_error"].as_f64().unwrap());
    assert!((g - 0.75).abs() < 3.0 * se, "{g} ± {se}");
}

#[test]
fn decay_preset_fits_the_exciton_lifetime() {
    let dir = tempfile::tempdir().unwrap();
    let o = speds(&["hbt", "--preset", "fig8_decay", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let tau = summary(dir.path(), "fig8_decay")["results"]["fitted_decay_ns"]
        .as_f64()
        .unwrap();
    assert!((tau / 2.1 - 1.0).abs() < 0.05, "{tau}");
}

#[test]
fn presets_subcommand_lists_everything() {
    let o = speds(&["presets"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("fig6b_cavity") && out.contains("cross-corr") && out.contains("throughput"));
}
