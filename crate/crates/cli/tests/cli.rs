use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use propel::mip::export_mps;
use propel::scp::{build_mip, random_micro_instance};

const BIN: &str = env!("CARGO_BIN_EXE_propel");

const SMALL: &str = r#"
seed = 3
scale = 0.05
label_budget = 200.0
prop_budget = 100.0
total_budget = 200.0
step_budget = 20.0
layers = [2]
hiddens = [8]
lrs = [0.01]
epochs = 5
rl_episodes = 40
"#;

fn propel(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("PROPEL_LOG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, SMALL).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn generate_is_reproducible_and_guards_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = propel(&["generate", "--config", &cfg, "--out", p(d)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let manifest = |d: &Path| fs::read(d.join("manifest.json")).unwrap();
    assert_eq!(manifest(&a), manifest(&b));

    let again = propel(&["generate", "--config", &cfg, "--out", p(&a)]);
    assert_eq!(code(&again), 3);
    assert!(stderr(&again).contains("--force"));
    let forced = propel(&["generate", "--config", &cfg, "--out", p(&a), "--force"]);
    assert_eq!(code(&forced), 0, "{}", stderr(&forced));
    assert_eq!(manifest(&a), manifest(&b));
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let o = propel(&["generate", "--out", p(&out), "--scale", "-1"]);
    assert_eq!(code(&o), 2);

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "no_such_key = 1\n").unwrap();
    let o = propel(&["generate", "--out", p(&out), "--config", p(&bad)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let o = Command::new(BIN)
        .args(["generate", "--out", p(&out)])
        .env("PROPEL_SCALE", "\"large\"")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_data_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let o = propel(&[
        "evaluate",
        "--data",
        p(&tmp.path().join("nothing")),
        "--out",
        p(&tmp.path().join("e")),
        "--methods",
        "OPT",
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn opt_alone_needs_no_models_but_prop_does() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let data = tmp.path().join("data");
    assert_eq!(
        code(&propel(&["generate", "--config", &cfg, "--out", p(&data)])),
        0
    );
    let eval = tmp.path().join("eval");
    let o = propel(&[
        "evaluate",
        "--config",
        &cfg,
        "--data",
        p(&data),
        "--out",
        p(&eval),
        "--methods",
        "OPT",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(eval.join("results.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("instance,method,pi,pg,rt,n_fixed,n_int"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("OPT")));

    let inst = data.join("instances").join("test-0000.json");
    let o = propel(&["solve", p(&inst), "--deterministic", "--time-limit", "300"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("status "));

    let o = propel(&[
        "evaluate",
        "--config",
        &cfg,
        "--data",
        p(&data),
        "--out",
        p(&eval),
        "--methods",
        "PROP",
    ]);
    assert_eq!(code(&o), 3);
    let o = propel(&[
        "evaluate",
        "--config",
        &cfg,
        "--data",
        p(&data),
        "--out",
        p(&eval),
        "--methods",
        "FOO",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (data, models, eval, rep) = (
        tmp.path().join("data"),
        tmp.path().join("models"),
        tmp.path().join("eval"),
        tmp.path().join("report"),
    );
    let results = eval.join("results.csv");
    let steps: [Vec<&str>; 4] = [
        vec!["generate", "--config", &cfg, "--out", p(&data)],
        vec![
            "train",
            "--config",
            &cfg,
            "--data",
            p(&data),
            "--out",
            p(&models),
        ],
        vec![
            "evaluate",
            "--config",
            &cfg,
            "--data",
            p(&data),
            "--models",
            p(&models),
            "--out",
            p(&eval),
        ],
        vec!["report", "--results", p(&results), "--out", p(&rep)],
    ];
    for args in &steps {
        let o = propel(args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
    }
    for f in ["models.json", "training_report.csv", "train_summary.json"] {
        assert!(models.join(f).exists(), "{f}");
    }
    for f in ["summary.csv", "first_incumbent.csv", "gap_vs_time.csv"] {
        assert!(rep.join(f).exists(), "{f}");
    }
    let results = fs::read_to_string(&results).unwrap();
    for m in ["OPT", "PROPB", "PROP"] {
        assert!(results.contains(&format!(",{m},")), "{m}");
    }
    assert_eq!(
        results.contains(",PROPEL,"),
        models.join("qnet.json").exists()
    );
}

#[test]
fn malformed_results_report_the_row() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("results.csv");
    fs::write(
        &csv,
        "instance,method,pi,pg,rt,n_fixed,n_int\n\
         test-0000,OPT,1.0,0.1,2.0,0,10\n\
         test-0000,PROP,oops,0.1,2.0,3,10\n",
    )
    .unwrap();
    let o = propel(&[
        "report",
        "--results",
        p(&csv),
        "--out",
        p(&tmp.path().join("r")),
    ]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}

fn write_micro(dir: &Path) -> String {
    let mip = build_mip(&random_micro_instance(17, 1e4)).unwrap();
    let path = dir.join("micro.mps");
    fs::write(&path, export_mps(&mip).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn objective_of(out: &str) -> f64 {
    let mut it = out.split_whitespace();
    it.find(|w| *w == "objective").expect("objective field");
    it.next().unwrap().parse().unwrap()
}

#[test]
fn solve_builtin_and_through_the_file_adapter() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write_micro(tmp.path());
    let sol = tmp.path().join("direct.sol");
    let direct = propel(&[
        "solve",
        &model,
        "--deterministic",
        "--gap",
        "0",
        "--time-limit",
        "1e6",
        "--output",
        p(&sol),
    ]);
    assert_eq!(code(&direct), 0, "{}", stderr(&direct));
    assert!(fs::read_to_string(&sol)
        .unwrap()
        .starts_with("=status= optimal"));

    let template = format!(
        "external:{BIN} solve {{input}} --output {{output}} --deterministic --gap 0 --time-limit 1e6"
    );
    let via = propel(&["solve", &model, "--solver", &template, "--deterministic"]);
    assert_eq!(code(&via), 0, "{}", stderr(&via));
    assert!((objective_of(&stdout(&direct)) - objective_of(&stdout(&via))).abs() < 1e-9);

    let failing = propel(&[
        "solve",
        &model,
        "--solver",
        "external:false {input} {output}",
    ]);
    assert_eq!(code(&failing), 4);
    let unknown = propel(&["solve", &model, "--solver", "cplex"]);
    assert_eq!(code(&unknown), 2);
}
