use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gait_impedance::{
    load_gait_csv, CsvSchema, EstimationResult, ImpedanceParameters, ReferenceSet, TuningSpec,
};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../data/{name}_representative.csv"))
}

fn gaitimp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaitimp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn estimate_writes_artifacts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let o = gaitimp(&[
        "estimate",
        "--input",
        s(&data("ankle")),
        "--set",
        "B",
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in ["params.json", "result.json", "trace.csv", "report.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let params: ImpedanceParameters =
        serde_json::from_str(&fs::read_to_string(out.join("params.json")).unwrap()).unwrap();
    assert_eq!(params.schedule().section_count(), 3);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("converged        true"));
    assert_eq!(String::from_utf8_lossy(&o.stdout), report);
}

#[test]
fn unconverged_estimate_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = gaitimp(&[
        "estimate",
        "--input",
        s(&data("ankle")),
        "--set",
        "A",
        "--max-iters",
        "1",
        "--starts",
        "2",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let r: EstimationResult =
        serde_json::from_str(&fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    assert!(!r.converged);
}

#[test]
fn missing_input_exits_one_and_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_gait.csv");
    let o = gaitimp(&[
        "estimate",
        "--input",
        s(&missing),
        "--set",
        "B",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("no_such_gait.csv"), "{err}");
}

#[test]
fn conflicting_schedule_flags_are_an_error() {
    let o = gaitimp(&[
        "estimate",
        "--input",
        s(&data("ankle")),
        "--set",
        "B",
        "--boundaries",
        "0,0.5,1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn knee_stance_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let o = gaitimp(&[
        "estimate",
        "--input",
        s(&data("knee")),
        "--set",
        "D",
        "--joint",
        "knee",
        "--fit-window",
        "0:0.63",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("joint            knee"));
    assert!(report.contains("fit window       0:0.63"));
}

#[test]
fn custom_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    let o = gaitimp(&[
        "estimate",
        "--input",
        s(&data("ankle")),
        "--boundaries",
        "0,0.3,0.63,1",
        "--order-k",
        "3",
        "--order-d",
        "2",
        "--angle-bounds=-0.6:0.6",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let p: ImpedanceParameters =
        serde_json::from_str(&fs::read_to_string(dir.path().join("params.json")).unwrap()).unwrap();
    assert_eq!(p.schedule().boundaries(), [0.0, 0.3, 0.63, 1.0]);
    assert_eq!(p.stiffness().order(), 3);
    assert_eq!(p.damping().order(), 2);
    assert!(p.schedule().angles().iter().all(|a| a.abs() <= 0.6));
}

#[test]
fn evaluate_fixture_curves_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let o = gaitimp(&[
        "evaluate",
        "--input",
        s(&data("ankle")),
        "--set",
        "A",
        "--svg",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let (header, rows) = read_csv(&dir.path().join("curves.csv"));
    assert_eq!(
        header,
        [
            "phase",
            "K",
            "D",
            "theta_eq",
            "tau_model",
            "tau_data",
            "power"
        ]
    );
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[0][1], 2.21);
    assert_eq!(rows[0][3], 0.0294);
    let input = load_gait_csv(data("ankle"), &CsvSchema::default()).unwrap();
    for (r, (&v, &tau)) in rows.iter().zip(input.velocity().iter().zip(input.torque())) {
        assert_eq!(r[5], tau);
        assert_eq!(r[6], r[4] * v);
    }
    for (file, lines) in [("stiffness.svg", 1), ("damping.svg", 1), ("torque.svg", 2)] {
        let svg = fs::read_to_string(dir.path().join(file)).unwrap();
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), lines, "{file}");
        assert_eq!(svg.matches("<svg").count(), svg.matches("</svg>").count());
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap())
            .unwrap();
    assert!(metrics["metrics"]["rmse"].as_f64().unwrap() > 0.0);
}

#[test]
fn zero_parameters_give_zero_model_torque() {
    let dir = tempfile::tempdir().unwrap();
    let zero = ImpedanceParameters::new(
        gait_impedance::ImpedanceProfile::constant(0.0, 0.63).unwrap(),
        gait_impedance::ImpedanceProfile::constant(0.0, 0.63).unwrap(),
        ReferenceSet::B.schedule(),
    )
    .unwrap();
    let params = dir.path().join("zero.json");
    fs::write(&params, serde_json::to_string(&zero).unwrap()).unwrap();
    let o = gaitimp(&[
        "evaluate",
        "--input",
        s(&data("ankle")),
        "--params",
        s(&params),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let (_, rows) = read_csv(&dir.path().join("curves.csv"));
    assert!(rows.iter().all(|r| r[4] == 0.0 && r[6] == 0.0));
    assert!(!dir.path().join("torque.svg").exists());
}

#[test]
fn synth_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let o = gaitimp(&[
            "synth",
            "--input",
            s(&data("ankle")),
            "--set",
            "C",
            "--noise",
            "0.5",
            "--seed",
            seed,
            "--out",
            s(&out),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        fs::read(out.join("synthetic.csv")).unwrap()
    };
    let a = run("a", "7");
    assert_eq!(a, run("b", "7"));
    assert_ne!(a, run("c", "8"));
}

#[test]
fn noise_free_synth_matches_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = gaitimp(&[
        "synth",
        "--input",
        s(&data("ankle")),
        "--set",
        "D",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let synthetic = load_gait_csv(dir.path().join("synthetic.csv"), &CsvSchema::default()).unwrap();
    let model = ReferenceSet::D
        .params()
        .torque_trajectory(&synthetic)
        .unwrap();
    assert_eq!(model, synthetic.torque());
}

#[test]
fn report_over_four_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut results = Vec::new();
    for set in ["D", "C", "B", "A"] {
        let out = dir.path().join(set);
        let o = gaitimp(&[
            "estimate",
            "--input",
            s(&data("ankle")),
            "--set",
            set,
            "--starts",
            "4",
            "--out",
            s(&out),
        ]);
        assert_eq!(o.status.code(), Some(0));
        results.push(out.join("result.json"));
    }
    let mut args = vec!["report", "--out", s(dir.path()), "--results"];
    args.extend(results.iter().map(|p| s(p)));
    let o = gaitimp(&args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = fs::read_to_string(dir.path().join("comparison.txt")).unwrap();
    assert_eq!(String::from_utf8_lossy(&o.stdout), text);
    let labels: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(labels, ["A", "B", "C", "D"]);
    let csv = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("comparison.json").exists());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(data("ankle"), dir.path().join("gait.csv")).unwrap();
    fs::write(
        dir.path().join("run.json"),
        r#"{"input": "gait.csv", "set": "C", "starts": 2, "seed": 3, "out": "from_config"}"#,
    )
    .unwrap();
    let config = dir.path().join("run.json");
    let o = gaitimp(&["estimate", "--config", s(&config)]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report = fs::read_to_string(dir.path().join("from_config/report.txt")).unwrap();
    assert!(report.contains("schedule         C"));
    assert!(report.contains("starts           2 (seed 3)"));

    let out = dir.path().join("flags");
    let o = gaitimp(&[
        "estimate",
        "--config",
        s(&config),
        "--set",
        "D",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("schedule         D"));
    assert!(report.contains("starts           2 (seed 3)"));

    fs::write(dir.path().join("bad.json"), r#"{"inputt": "gait.csv"}"#).unwrap();
    let o = gaitimp(&["estimate", "--config", s(&dir.path().join("bad.json"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tune_with_published_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = gaitimp(&[
        "tune",
        "--set",
        "C",
        "--published-tuning",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let tuned: ImpedanceParameters =
        serde_json::from_str(&fs::read_to_string(dir.path().join("tuned.json")).unwrap()).unwrap();
    let expected =
        gait_impedance::tune(&ReferenceSet::C.params(), &ReferenceSet::C.tuning()).unwrap();
    assert_eq!(tuned, expected);
    assert_eq!(tuned.schedule().angles(), [-0.2617, 0.1452]);

    let out = dir.path().join("manual");
    let o = gaitimp(&[
        "tune",
        "--set",
        "C",
        "--alpha",
        "0.5",
        "--beta",
        "0.166",
        "--gamma",
        "20",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let manual: ImpedanceParameters =
        serde_json::from_str(&fs::read_to_string(out.join("tuned.json")).unwrap()).unwrap();
    let expected = gait_impedance::tune(
        &ReferenceSet::C.params(),
        &TuningSpec::scale(0.5, 0.166, 20.0),
    )
    .unwrap();
    assert_eq!(manual, expected);
    assert_eq!(
        manual.schedule().angles(),
        ReferenceSet::C.optimized_angles()
    );
}

#[test]
fn fixture_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = gaitimp(&["fixture", "--set", "A", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let p: ImpedanceParameters =
        serde_json::from_str(&fs::read_to_string(dir.path().join("params.json")).unwrap()).unwrap();
    assert_eq!(p, ReferenceSet::A.params());
}

#[test]
fn sweep_tabulates_each_order() {
    let dir = tempfile::tempdir().unwrap();
    let o = gaitimp(&[
        "sweep",
        "--input",
        s(&data("ankle")),
        "--set",
        "C",
        "--orders",
        "1:3",
        "--starts",
        "2",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let orders: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(orders, ["1", "2", "3"]);
}
