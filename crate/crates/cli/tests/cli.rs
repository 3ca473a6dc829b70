use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rdd_core::dgp::{generate, DgpSpec, TakeUp};
use rdd_core::ColumnMap;

fn rdd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdd"))
        .args(args)
        .output()
        .expect("run rdd")
}

fn write_data(dir: &Path, fuzzy: bool) -> PathBuf {
    let mut spec = DgpSpec::linear(600).with_seed(11);
    spec.covariates = 2;
    if fuzzy {
        spec.compliance = Some(TakeUp {
            p_below: 0.1,
            p_above: 0.8,
        });
    }
    let (data, _) = generate(&spec).unwrap();
    let map = ColumnMap {
        score: "x".into(),
        outcome: "y".into(),
        received: fuzzy.then(|| "d".into()),
        covariates: vec![],
    };
    let path = dir.join(if fuzzy { "fuzzy.csv" } else { "sharp.csv" });
    let mut buf = Vec::new();
    data.write_csv(&mut buf, &map).unwrap();
    std::fs::write(&path, buf).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let o = rdd(&[]);
    assert_eq!(o.status.code(), Some(2));
    let text = String::from_utf8_lossy(&o.stderr);
    assert!(text.contains("Usage"), "{text}");
}

#[test]
fn estimate_prints_table_and_writes_json_with_config() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_data(dir.path(), false);
    let json = dir.path().join("est.json");
    let o = rdd(&[
        "estimate",
        "--input",
        csv.to_str().unwrap(),
        "--kernel",
        "epa",
        "--out",
        json.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(
        out.contains("RD Effect") && out.contains("95% Robust CI"),
        "{out}"
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["command"], "estimate");
    assert_eq!(v["config"]["data"]["score"], "x");
    assert_eq!(v["config"]["estimator"]["kernel"], "epanechnikov");
    assert!(v["result"]["estimates"]["point"].is_number());
}

#[test]
fn fuzzy_estimate_reports_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_data(dir.path(), true);
    let o = rdd(&[
        "estimate",
        "--input",
        csv.to_str().unwrap(),
        "--received",
        "d",
        "--fuzzy",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    for row in ["First stage", "ITT", "Fuzzy RD"] {
        assert!(out.contains(row), "{out}");
    }
}

#[test]
fn randinf_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_data(dir.path(), false);
    let args = [
        "randinf",
        "--input",
        csv.to_str().unwrap(),
        "--w",
        "0.1",
        "--seed",
        "5023",
        "--reps",
        "300",
    ];
    let a = rdd(&args);
    let b = rdd(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("Fisherian p"));
}

#[test]
fn missing_input_and_bad_column_exit_2() {
    let o = rdd(&["estimate", "--input", "/definitely/not/here.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let csv = write_data(dir.path(), false);
    let o = rdd(&[
        "estimate",
        "--input",
        csv.to_str().unwrap(),
        "--outcome",
        "nope",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = rdd(&["randinf", "--input", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "randinf without a window");
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_data(dir.path(), false);
    let bad = dir.path().join("missing").join("out.json");
    let o = rdd(&[
        "estimate",
        "--input",
        csv.to_str().unwrap(),
        "--out",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_supplies_bindings_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_data(dir.path(), false);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"input": {:?}, "score": "x", "outcome": "y", "seed": 9}}"#,
            csv.to_str().unwrap()
        ),
    )
    .unwrap();
    let json = dir.path().join("r.json");
    let o = rdd(&[
        "randinf",
        "--config",
        cfg.to_str().unwrap(),
        "--w",
        "0.1",
        "--reps",
        "200",
        "--seed",
        "4",
        "--out",
        json.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["config"]["data"]["seed"], 4);
    assert_eq!(v["result"]["fisher"]["seed"], 4);
}

#[test]
fn falsify_writes_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_data(dir.path(), false);
    let md = dir.path().join("f.md");
    let o = rdd(&[
        "falsify",
        "--input",
        csv.to_str().unwrap(),
        "--covariates",
        "z1,z2",
        "--placebo-cutoffs",
        "-0.5,0.5",
        "--donut",
        "0,0.02",
        "--out",
        md.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(md).unwrap();
    assert!(
        text.contains("Balance") && text.contains("c=-0.5") && text.contains("r=0.02"),
        "{text}"
    );
}

#[test]
fn plot_and_histogram_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_data(dir.path(), false);
    let svg = dir.path().join("p.svg");
    let o = rdd(&[
        "plot",
        "--input",
        csv.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let hist = dir.path().join("h.csv");
    let o = rdd(&[
        "plot",
        "--input",
        csv.to_str().unwrap(),
        "--histogram",
        "--out",
        hist.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(hist).unwrap();
    let total: u64 = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 600);
}

#[test]
fn simulate_runs_a_small_study() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sim.csv");
    let o = rdd(&[
        "simulate",
        "--dgp",
        "linear",
        "--n",
        "300",
        "--reps",
        "100",
        "--data-out",
        data.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("Robust"));
    assert_eq!(std::fs::read_to_string(data).unwrap().lines().count(), 301);
}

#[test]
fn winselect_marks_a_window() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_data(dir.path(), false);
    let o = rdd(&[
        "winselect",
        "--input",
        csv.to_str().unwrap(),
        "--covariates",
        "z1,z2",
        "--reps",
        "200",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(
        out.contains("chosen window") || out.contains("no balanced window"),
        "{out}"
    );
}

#[test]
fn randinf_ci_takes_one_comma_separated_grid() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_data(dir.path(), false);
    let o = rdd(&[
        "randinf",
        "--input",
        csv.to_str().unwrap(),
        "--w",
        "0.2",
        "--ci",
        "-1,2,0.05",
        "--reps",
        "200",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("constant-effect"), "{}", stdout(&o));
    let o = rdd(&["randinf", "--input", csv.to_str().unwrap(), "--w", "0.2", "--ci", "-1,2"]);
    assert_eq!(o.status.code(), Some(2));
}
