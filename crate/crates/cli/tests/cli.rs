use std::fs;
use std::path::Path;
use std::process::Command;

use subrig_cli::{run, CliError, Overrides, Scenario, Status};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subrig"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const HEISENBERG_GEODESIC: &str = r#"{
  "builtin": "heisenberg",
  "tasks": [
    { "kind": "geodesic", "name": "line", "x0": [0, 0, 0], "p0": [1, 0, 0], "duration": 1.0 }
  ]
}"#;

#[test]
fn heisenberg_geodesic_csv_final_row() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "s.json", HEISENBERG_GEODESIC);
    let out = dir.path().join("out");
    let status = bin().args(["run", file.to_str().unwrap(), "--out", out.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let (header, rows) = csv_rows(&out.join("line.csv"));
    assert_eq!(header, ["t", "x", "y", "z", "p_x", "p_y", "p_z"]);
    let last = rows.last().unwrap();
    for (a, b) in last.iter().zip([1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]) {
        assert!((a - b).abs() <= 1e-8, "{last:?}");
    }
    let report = json(&out.join("line.json"));
    assert_eq!(report["samples"].as_u64().unwrap() as usize, rows.len());
}

#[test]
fn uniform_sampling_sets_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let text = HEISENBERG_GEODESIC.replace(r#""duration": 1.0"#, r#""duration": 1.0, "samples": 11"#);
    let scenario = Scenario::from_json(&text).unwrap();
    run(&scenario, dir.path(), false, Overrides::default()).unwrap();
    let (_, rows) = csv_rows(&dir.path().join("line.csv"));
    assert_eq!(rows.len(), 11);
    assert!((rows[5][0] - 0.5).abs() < 1e-15);
}

#[test]
fn montgomery_helix_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
      "builtin": "montgomery",
      "tasks": [{
        "kind": "abnormal-test", "name": "helix",
        "curve": { "start": [1, 0, 0], "segments": [{ "generator": { "frame": 1 }, "t0": 0, "t1": 1 }] }
      }]
    }"#;
    let file = write(dir.path(), "s.json", text);
    let out = dir.path().join("out");
    let status = bin().args(["run", file.to_str().unwrap(), "--out", out.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let raw = fs::read_to_string(out.join("helix.json")).unwrap();
    let keys = ["\"rank\"", "\"singular_values\"", "\"annihilator\"", "\"residual_max\"", "\"verdict\""];
    let positions: Vec<usize> = keys.iter().map(|k| raw.find(k).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "key order: {positions:?}");
    let cert = json(&out.join("helix.json"));
    assert_eq!(cert["verdict"], "abnormal");
    assert_eq!(cert["rank"], 2);
    assert_eq!(cert["singular_values"].as_array().unwrap().len(), 3);
    // floats carry 17 significant digits
    assert!(raw.contains("4.0000000000000000e0"));
}

#[test]
fn empty_task_list_gives_empty_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "s.json", r#"{ "builtin": "liu-sussmann", "tasks": [] }"#);
    let out = dir.path().join("out");
    let status = bin().args(["run", file.to_str().unwrap(), "--out", out.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let bundle = json(&out.join("bundle.json"));
    assert!(bundle["tasks"].as_array().unwrap().is_empty());
    assert_eq!(bundle["provenance"]["scenario_sha256"].as_str().unwrap().len(), 64);
    let mut files: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert_eq!(files, ["bundle.json", "timings.json"]);
}

#[test]
fn reruns_are_byte_identical() {
    let scenario = Scenario::from_builtin("montgomery").unwrap();
    let mut scenario = scenario.clone();
    let extra = Scenario::from_json(
        r#"{ "builtin": "montgomery", "tasks": [
          { "kind": "nonholonomic", "name": "nh", "x0": [1.2, 0, 0], "u0": [0.6, 0.8], "duration": 1 },
          { "kind": "pointwise", "name": "pt", "point": [1.1, 0.2, 0.3] },
          { "kind": "flow", "name": "fl", "field": { "frame": 1 }, "x0": [1.2, 0, 0], "t0": 0, "t1": 1 }
        ] }"#,
    )
    .unwrap();
    scenario.tasks.extend(extra.tasks);
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&scenario, a.path(), false, Overrides::default()).unwrap();
    run(&scenario, b.path(), false, Overrides::default()).unwrap();
    run(&scenario, c.path(), true, Overrides::default()).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 5);
    for name in names.iter().filter(|n| *n != "timings.json") {
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name:?}");
        assert_eq!(x, fs::read(c.path().join(name)).unwrap(), "{name:?} parallel");
    }
}

#[test]
fn builtins_round_trip() {
    for name in ["montgomery", "liu-sussmann", "heisenberg"] {
        let exported = bin().args(["export-builtin", name]).output().unwrap();
        assert!(exported.status.success());
        let text = String::from_utf8(exported.stdout).unwrap();
        let reloaded = Scenario::from_json(&text).unwrap();
        assert_eq!(reloaded, Scenario::from_builtin(name).unwrap(), "{name}");
        assert_eq!(reloaded.to_json(), text, "{name}");
        // a reference by name resolves to the same structure
        let by_name = Scenario::from_json(&format!(r#"{{ "builtin": "{name}" }}"#)).unwrap();
        assert_eq!(by_name.chart, reloaded.chart);
        assert_eq!(by_name.frame, reloaded.frame);
        assert_eq!(by_name.complement, reloaded.complement);
        let s = by_name.validate().unwrap().structure;
        let t = reloaded.validate().unwrap().structure;
        for x in s.probes() {
            assert_eq!(s.frame_matrix(x).unwrap(), t.frame_matrix(x).unwrap());
        }
    }
}

#[test]
fn builtin_definitions_match_examples() {
    let m = Scenario::from_builtin("montgomery").unwrap();
    assert_eq!(m.frame.as_ref().unwrap()[1], ["0", "1", "-(1/2*r^2 - 1/4*r^4)"]);
    assert_eq!(m.chart.as_ref().unwrap().domain.as_ref().unwrap()[0], [Some(0.01), Some(10.0)]);
    let l = Scenario::from_builtin("liu-sussmann").unwrap();
    assert_eq!(l.frame.unwrap(), [vec!["1", "0", "0"], vec!["0", "1 - x", "x^2"]]);
}

#[test]
fn missing_frame_is_a_schema_error() {
    let s = Scenario::from_json(r#"{ "chart": { "coordinates": ["x", "y", "z"] } }"#).unwrap();
    match s.validate() {
        Err(CliError::Schema { path, .. }) => assert_eq!(path, "frame"),
        other => panic!("{:?}", other.err()),
    }
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "s.json", r#"{ "chart": { "coordinates": ["x", "y", "z"] } }"#);
    let out = bin().args(["validate", file.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("frame"));
}

#[test]
fn schema_errors_locate_the_field() {
    let cases = [
        (r#"{ "builtin": "heisenberg", "tasks": [{ "kind": "geodesic", "x0": [0, 0, 0], "p0": [1, 0], "duration": 1 }] }"#, "tasks[0].p0"),
        (r#"{ "builtin": "heisenberg", "tasks": [{ "kind": "geodesic", "x0": [0, 0, 0], "p0": [1, 0, 0], "duration": 1, "extra": 2 }] }"#, "tasks[0]"),
        (r#"{ "builtin": "heisenberg", "tasks": [{ "kind": "teleport" }] }"#, "tasks[0]"),
        (r#"{ "chart": { "coordinates": ["x", "y"] }, "frame": [["1", "x +* y"]] }"#, "frame[0][1]"),
        (r#"{ "chart": { "coordinates": ["x", "y"] }, "frame": [["1", "w"]] }"#, "frame[0][1]"),
        (r#"{ "builtin": "heisenberg", "frame": [["1", "0", "0"]] }"#, "frame"),
        (r#"{ "builtin": "heisenberg", "tolerances": { "rank_tol": 2 } }"#, "tolerances.rank_tol"),
        (r#"{ "builtin": "heisenberg", "colour": "red" }"#, "colour"),
        (r#""text""#, "scenario"),
        (r#"{ "builtin": "heisenberg", "tasks": [{ "kind": "pointwise", "name": "../x", "point": [0, 0, 0] }] }"#, "tasks[0].name"),
    ];
    for (text, expected) in cases {
        let err = Scenario::from_json(text).and_then(|s| s.validate().map(|_| ()));
        match err {
            Err(CliError::Schema { path, message }) => assert!(path.starts_with(expected), "{text}: {path} ({message})"),
            other => panic!("{text}: {:?}", other.err()),
        }
    }
    let parse = Scenario::from_json(r#"{ "chart": { "coordinates": ["x", "y"] }, "frame": [["1", "x +* y"]] }"#)
        .unwrap()
        .validate()
        .err()
        .unwrap();
    assert!(parse.to_string().contains("offset 3"), "{parse}");
}

#[test]
fn failures_and_indeterminate_verdicts_set_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // leaves the chart domain r > 0.01
    let failing = r#"{ "builtin": "montgomery", "tasks": [
      { "kind": "nonholonomic", "name": "bad", "x0": [0.5, 0, 0], "u0": [-1, 0], "duration": 1 },
      { "kind": "pointwise", "name": "good", "point": [1, 0, 0] }
    ] }"#;
    let file = write(dir.path(), "f.json", failing);
    let out = dir.path().join("f");
    let status = bin().args(["run", file.to_str().unwrap(), "--out", out.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(1));
    let bundle = json(&out.join("bundle.json"));
    assert_eq!(bundle["tasks"][0]["status"], "failed");
    assert!(!bundle["tasks"][0]["error"].as_str().unwrap().is_empty());
    assert_eq!(bundle["tasks"][1]["status"], "ok");
    assert!(out.join("good.json").exists());

    // a coarse rank tolerance puts the helix singular values inside the indeterminacy band
    let helix = r#"{ "builtin": "heisenberg", "tasks": [{
        "kind": "abnormal-test", "name": "short",
        "curve": { "start": [0, 0, 0], "segments": [{ "generator": { "frame": 0 }, "t0": 0, "t1": 0.05 }] }
    }] }"#;
    let file = write(dir.path(), "i.json", helix);
    let out = dir.path().join("i");
    let status = bin()
        .args(["run", file.to_str().unwrap(), "--out", out.to_str().unwrap(), "--rank-tol", "1e-2"])
        .status()
        .unwrap();
    let bundle = json(&out.join("bundle.json"));
    let cert = json(&out.join("short.json"));
    assert_eq!(bundle["provenance"]["tolerances"]["rank_tol"], 1e-2);
    if cert["verdict"] == "indeterminate" {
        assert_eq!(status.code(), Some(2));
        assert_eq!(bundle["tasks"][0]["status"], "indeterminate");
    } else {
        assert_eq!(status.code(), Some(0));
    }
}

#[test]
fn every_task_kind_runs() {
    let text = r#"{ "builtin": "montgomery", "tasks": [
      { "kind": "pointwise", "point": [1.1, 0, 0] },
      { "kind": "filtration", "point": [1, 0, 0], "depth": 3 },
      { "kind": "geodesic", "x0": [1.2, 0, 0], "p0": [0.3, 0.2, 0.1], "duration": 0.5, "samples": 5 },
      { "kind": "riemannian-geodesic", "x0": [1.2, 0, 0], "v0": [0.3, 0.2, 0.1], "duration": 0.5 },
      { "kind": "flow", "field": { "components": ["1", "0", "r"] }, "x0": [1.2, 0, 0], "t0": 0, "t1": 0.5 },
      { "kind": "coadjoint-transport", "start": [1, 0, 0], "segment": { "generator": { "frame": 1 }, "t0": 0, "t1": 1 }, "eta0": [0, 0.25, 1] },
      { "kind": "pullback-span", "curve": { "start": [1.2, 0, 0], "segments": [
          { "generator": { "frame": 0 }, "t0": 0, "t1": 0.2 },
          { "generator": { "coefficients": ["0", "1"] }, "t0": 0.2, "t1": 0.6 }
      ] }, "samples_per_segment": 4 },
      { "kind": "variation-vector", "start": [1.2, 0, 0], "segment": { "generator": { "frame": 1 }, "t0": 0, "t1": 1 }, "field": { "frame": 0 }, "tau": 0.5, "dt": 0.1 },
      { "kind": "nonholonomic", "x0": [1.2, 0, 0], "u0": [0.6, 0.8], "duration": 1 },
      { "kind": "annihilator-transport", "x0": [1.2, 0, 0], "u0": [0.6, 0.8], "duration": 1, "eta0": [0, 0.2016, 1] },
      { "kind": "compatibility", "x0": [1.2, 0, 0], "u0": [0.6, 0.8], "duration": 1 }
    ] }"#;
    let scenario = Scenario::from_json(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bundle = run(&scenario, dir.path(), false, Overrides::default()).unwrap();
    for t in &bundle.tasks {
        assert_eq!(t.status, Status::Ok, "{} {:?}", t.name, t.error);
        for f in &t.files {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
    assert_eq!(bundle.exit_code(), 0);
    let filtration = json(&dir.path().join("01-filtration.json"));
    assert_eq!(filtration["dims"], serde_json::json!([2, 2, 3]));
    let (header, rows) = csv_rows(&dir.path().join("02-geodesic.csv"));
    assert_eq!(header.len(), 7);
    assert_eq!(rows.len(), 5);
    let (header, _) = csv_rows(&dir.path().join("08-nonholonomic.csv"));
    assert_eq!(header, ["t", "r", "theta", "z", "u_1", "u_2"]);
    let transport = json(&dir.path().join("09-annihilator-transport.json"));
    assert!(transport["annihilation_defect"].as_f64().unwrap() < 1e-9);
    let compat = json(&dir.path().join("10-compatibility.json"));
    assert_eq!(compat["verdict"], "compatible");
}

#[test]
fn examples_lists_builtins() {
    let out = bin().arg("examples").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["montgomery", "liu-sussmann", "heisenberg"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
    assert!(!bin().args(["export-builtin", "nope"]).status().unwrap().success());
}

#[test]
fn shipped_scenarios_and_schema_are_current() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    for name in ["montgomery", "liu-sussmann", "heisenberg"] {
        let shipped = fs::read_to_string(root.join("scenarios").join(format!("{name}.json"))).unwrap();
        assert_eq!(shipped, Scenario::from_builtin(name).unwrap().to_json(), "{name}");
    }
    let schema: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("docs/scenario.schema.json")).unwrap()).unwrap();
    let kinds: Vec<&str> = schema["properties"]["tasks"]["items"]["oneOf"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["properties"]["kind"]["const"].as_str().unwrap())
        .collect();
    let expected = [
        "pointwise",
        "filtration",
        "geodesic",
        "riemannian-geodesic",
        "flow",
        "coadjoint-transport",
        "pullback-span",
        "abnormal-test",
        "variation-vector",
        "nonholonomic",
        "annihilator-transport",
        "compatibility",
    ];
    assert_eq!(kinds, expected);
    for kind in expected {
        // every schema kind deserializes as a task
        let probe = format!(r#"{{ "builtin": "heisenberg", "tasks": [{{ "kind": "{kind}" }}] }}"#);
        let err = Scenario::from_json(&probe).unwrap_err().to_string();
        assert!(err.contains("missing field"), "{kind}: {err}");
    }
}
